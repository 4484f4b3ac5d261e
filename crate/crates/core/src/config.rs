//! Run configuration, loaded from TOML with optional preset inheritance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{FieldSolver, Order};
use crate::spatial::Reconstruction;

pub use crate::integrator::FieldSolver as FieldKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Hermite,
    Fd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// `(1 + δ cos kx) M(v)` with the unit Maxwellian `M`.
    Landau,
    /// `(1 + δ((cos 2kx + cos 3kx)/1.2 + cos kx)) (2/7)(1 + 5v²) M(v)`.
    TwoStream,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub problem: Problem,
    /// Wave number; the domain is `[0, 2π/k)`.
    pub k: f64,
    pub delta: f64,
    pub nu: f64,
    /// Neutralizing background; defaults to the mean initial density.
    pub rho0: Option<f64>,
    pub nx: usize,
    pub backend: Backend,
    /// Highest Hermite mode `M`.
    pub modes: usize,
    pub nv: usize,
    pub v0: f64,
    pub vmax: f64,
    pub rank: usize,
    pub dt: f64,
    pub t_end: f64,
    pub order: u8,
    pub field: FieldSolver,
    pub reconstruction: Reconstruction,
    /// Diagnostics are recorded every this many steps.
    pub output_stride: usize,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    /// Hou-Li filter on the Hermite kinetic factor.
    pub filter: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Landau,
            k: 0.5,
            delta: 1e-3,
            nu: 0.0,
            rho0: None,
            nx: 128,
            backend: Backend::Hermite,
            modes: 256,
            nv: 256,
            v0: 1.0,
            vmax: 8.0,
            rank: 6,
            dt: 2e-3,
            t_end: 40.0,
            order: 2,
            field: FieldSolver::Ampere,
            reconstruction: Reconstruction::MusclMc,
            output_stride: 10,
            snapshot_times: Vec::new(),
            seed: 0,
            filter: true,
        }
    }
}

impl SimConfig {
    /// Parses TOML. A `preset` key selects the base configuration that the
    /// remaining keys override.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mut table: toml::Table = s.parse()?;
        let base = match table.remove("preset") {
            Some(toml::Value::String(name)) => crate::benchmarks::preset(&name)
                .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?,
            Some(other) => return Err(Error::Config(format!("preset must be a string, got {other}"))),
            None => SimConfig::default(),
        };
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in table {
            merged.insert(k, v);
        }
        let cfg: SimConfig = merged.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn order(&self) -> Result<Order> {
        match self.order {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            o => Err(Error::Config(format!("order must be 1 or 2, got {o}"))),
        }
    }

    pub fn length(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Number of velocity unknowns for the selected backend.
    pub fn velocity_len(&self) -> usize {
        match self.backend {
            Backend::Hermite => self.modes + 1,
            Backend::Fd => self.nv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let order = self.order()?;
        if order == Order::Second && self.field == FieldSolver::Gauss {
            return Err(Error::Config("order 2 requires field = \"ampere\"".into()));
        }
        let positive = [("k", self.k), ("dt", self.dt), ("t_end", self.t_end), ("v0", self.v0), ("vmax", self.vmax)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) || !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(Error::Config("delta and nu must be nonnegative".into()));
        }
        if self.nx < 5 || self.rank == 0 || self.output_stride == 0 {
            return Err(Error::Config("nx >= 5, rank >= 1 and output_stride >= 1 are required".into()));
        }
        if self.rank + 3 > self.velocity_len() {
            return Err(Error::Config(format!(
                "rank {} needs at least {} velocity unknowns, have {}",
                self.rank,
                self.rank + 3,
                self.velocity_len()
            )));
        }
        if self.rank > self.nx {
            return Err(Error::Config(format!("rank {} exceeds nx = {}", self.rank, self.nx)));
        }
        Ok(())
    }
}
