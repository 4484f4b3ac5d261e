//! Conserved totals, drift tracking, local balance-law residuals and
//! rate fits on electric energy histories.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{SimState, Solver, StepReport};

/// Global quantities at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Observables {
    pub charge: f64,
    pub current: f64,
    pub kinetic: f64,
    pub electric: f64,
    /// `max_x max_m |⟨g, φ_m⟩_v|`, which vanishes for an exact micro part.
    pub micro_residual: f64,
}

impl Observables {
    pub fn total_energy(&self) -> f64 {
        self.kinetic + self.electric
    }
}

pub fn observables(solver: &Solver, st: &SimState) -> Observables {
    let grid = solver.grid();
    let co = solver.coefficients();
    let charge = grid.integrate(&st.u.density(co));
    let current = grid.integrate(&st.u.current(co));
    let kinetic = grid.integrate(&st.u.kinetic(co));
    let electric = 0.5 * grid.trapezoid(&st.e, &st.e);
    Observables { charge, current, kinetic, electric, micro_residual: micro_residual(solver, st) }
}

/// `max |Σ_ij X_i S_ij ⟨V_j, φ_m⟩|` over `x` and `φ_m ∈ {1, v, v²/2}`.
pub fn micro_residual(solver: &Solver, st: &SimState) -> f64 {
    let space = solver.space();
    let c = &solver.coefficients().c;
    let r = st.g.rank();
    let b = &space.macro_terms().basis;
    // ⟨V_j, w p_n⟩ then φ_m = Σ_n C_mn p_n.
    let proj = nalgebra::DMatrix::from_fn(r, 3, |j, n| space.inner(st.g.v.column(j).as_slice(), &b[n]));
    let cm = nalgebra::DMatrix::from_fn(3, 3, |m, n| c[(m, n)]);
    let mom = &st.g.x * &st.g.s * proj * cm.transpose();
    mom.amax()
}

/// One row of `diagnostics.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub total_charge: f64,
    pub total_current: f64,
    pub total_kinetic_energy: f64,
    pub electric_energy: f64,
    pub total_energy: f64,
    pub charge_drift: f64,
    pub current_drift: f64,
    pub energy_drift: f64,
    pub micro_moment_residual: f64,
}

pub const CSV_HEADER: &str = "t,total_charge,total_current,total_kinetic_energy,electric_energy,total_energy,charge_drift,current_drift,energy_drift,micro_moment_residual";

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t,
            self.total_charge,
            self.total_current,
            self.total_kinetic_energy,
            self.electric_energy,
            self.total_energy,
            self.charge_drift,
            self.current_drift,
            self.energy_drift,
            self.micro_moment_residual
        )
    }
}

/// `|q - q0| / max(|q0|, 1)`.
pub fn relative_drift(q: f64, q0: f64) -> f64 {
    (q - q0).abs() / q0.abs().max(1.0)
}

/// Records observables relative to the initial state.
#[derive(Clone, Debug)]
pub struct DriftTracker {
    initial: Observables,
}

impl DriftTracker {
    pub fn new(initial: Observables) -> Self {
        Self { initial }
    }

    pub fn initial(&self) -> &Observables {
        &self.initial
    }

    pub fn record(&self, t: f64, o: &Observables) -> DiagnosticsRecord {
        let i = &self.initial;
        DiagnosticsRecord {
            t,
            total_charge: o.charge,
            total_current: o.current,
            total_kinetic_energy: o.kinetic,
            electric_energy: o.electric,
            total_energy: o.total_energy(),
            charge_drift: relative_drift(o.charge, i.charge),
            current_drift: relative_drift(o.current, i.current),
            energy_drift: relative_drift(o.total_energy(), i.total_energy()),
            micro_moment_residual: o.micro_residual,
        }
    }
}

pub fn write_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{CSV_HEADER}")?;
    for r in records {
        writeln!(f, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Pointwise residuals of the discrete charge and energy balance laws over
/// one step, `max_i |Δρ/Δt + ∂x F_ρ|` and `max_i |Δe/Δt + ∂x F_e|` with
/// `e = κ + E²/2`.
pub fn local_law_residuals(solver: &Solver, old: &SimState, new: &SimState, report: &StepReport) -> (f64, f64) {
    let co = solver.coefficients();
    let c = &co.c;
    let nx = solver.grid().nx();
    let dx = solver.grid().dx();
    let dt = report.dt;
    let rho0 = old.u.density(co);
    let rho1 = new.u.density(co);
    let k0 = old.u.kinetic(co);
    let k1 = new.u.kinetic(co);
    let f = &report.faces;
    let flux_rho = |i: usize| c[(0, 0)] * f[(i, 0)];
    let flux_e = |i: usize| c[(2, 0)] * f[(i, 0)] + c[(2, 1)] * f[(i, 1)] + c[(2, 2)] * f[(i, 2)];
    let mut res_rho: f64 = 0.0;
    let mut res_e: f64 = 0.0;
    for i in 0..nx {
        let im = (i + nx - 1) % nx;
        let r = (rho1[i] - rho0[i]) / dt + (flux_rho(i) - flux_rho(im)) / dx;
        let e0 = k0[i] + 0.5 * old.e[i] * old.e[i];
        let e1 = k1[i] + 0.5 * new.e[i] * new.e[i];
        let re = (e1 - e0) / dt + (flux_e(i) - flux_e(im)) / dx;
        res_rho = res_rho.max(r.abs());
        res_e = res_e.max(re.abs());
    }
    (res_rho, res_e)
}

/// `‖f‖` in the weighted `L²(x, v)` norm; the macro and micro parts are
/// orthogonal and the factors orthonormal.
pub fn l2_norm(solver: &Solver, st: &SimState) -> f64 {
    let grid = solver.grid();
    let macro_sq: f64 = (0..3).map(|n| grid.trapezoid(&st.u.f[n], &st.u.f[n])).sum();
    (macro_sq + st.g.s.norm_squared()).sqrt()
}

/// Local maxima of `w` (strict), at least `min_sep` samples apart, with
/// times refined by a parabola through `ln w`.
pub fn find_peaks(t: &[f64], w: &[f64], min_sep: usize) -> Vec<(f64, f64)> {
    let mut out: Vec<(usize, f64, f64)> = Vec::new();
    for i in 1..w.len().saturating_sub(1) {
        if !(w[i] > w[i - 1] && w[i] > w[i + 1] && w[i] > 0.0 && w[i - 1] > 0.0 && w[i + 1] > 0.0) {
            continue;
        }
        if let Some(&(j, _, _)) = out.last() {
            if i - j < min_sep {
                continue;
            }
        }
        let (ym, y0, yp) = (w[i - 1].ln(), w[i].ln(), w[i + 1].ln());
        let denom = ym - 2.0 * y0 + yp;
        let h = t[i + 1] - t[i];
        let (tp, yp_) = if denom < 0.0 {
            let s = 0.5 * (ym - yp) / denom;
            (t[i] + s * h, y0 - 0.25 * (ym - yp) * s)
        } else {
            (t[i], y0)
        };
        out.push((i, tp, yp_));
    }
    out.into_iter().map(|(_, tp, y)| (tp, y.exp())).collect()
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let den: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    num / den
}

/// Damping rate of the field amplitude from the peaks of the electric
/// energy `w(t)` in `window`: half the slope of a least-squares fit of
/// `ln w` at the peaks. The first peak in the window is skipped and at least
/// four must remain.
pub fn damping_rate(t: &[f64], w: &[f64], window: (f64, f64)) -> Result<f64> {
    let peaks: Vec<(f64, f64)> = find_peaks(t, w, 5)
        .into_iter()
        .filter(|p| p.0 >= window.0 && p.0 <= window.1)
        .skip(1)
        .map(|(tp, wp)| (tp, wp.ln()))
        .collect();
    if peaks.len() < 4 {
        return Err(Error::TooFewPeaks { found: peaks.len(), required: 4 });
    }
    Ok(0.5 * slope(&peaks))
}

/// Growth rate of the field amplitude: half the least-squares slope of
/// `ln w` over all samples in `window`.
pub fn growth_rate(t: &[f64], w: &[f64], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(w)
        .filter(|(ti, wi)| **ti >= window.0 && **ti <= window.1 && **wi > 0.0)
        .map(|(ti, wi)| (*ti, wi.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::FitWindow { lo: window.0, hi: window.1, samples: pts.len() });
    }
    Ok(0.5 * slope(&pts))
}
