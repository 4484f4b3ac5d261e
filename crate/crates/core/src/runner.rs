//! Building solvers from configurations, running them, and writing output.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::benchmarks::{initial_state, mean_density};
use crate::config::{Backend, SimConfig};
use crate::diagnostics::{self, observables, DiagnosticsRecord, DriftTracker};
use crate::error::{Error, Result};
use crate::integrator::{SimState, Solver, SolverParams, StepReport};
use crate::spatial::XGrid;
use crate::velocity::fd::FdSpace;
use crate::velocity::hermite::HermiteSpace;
use crate::velocity::VelocitySpace;

pub fn build_space(cfg: &SimConfig) -> Result<Box<dyn VelocitySpace>> {
    Ok(match cfg.backend {
        Backend::Hermite => Box::new(HermiteSpace::new(cfg.modes, cfg.v0)?.with_filter(cfg.filter)),
        Backend::Fd => Box::new(FdSpace::new(cfg.vmax, cfg.nv)?),
    })
}

pub fn build_solver(cfg: &SimConfig) -> Result<Solver> {
    cfg.validate()?;
    let grid = XGrid::new(cfg.length(), cfg.nx)?;
    let space = build_space(cfg)?;
    let rho0 = cfg.rho0.unwrap_or_else(|| mean_density(cfg, space.as_ref(), cfg.nx));
    let params = SolverParams { nu: cfg.nu, rho0, recon: cfg.reconstruction, field: cfg.field, order: cfg.order()? };
    Solver::new(grid, space, params, cfg.rank, cfg.seed)
}

/// Phase-space samples of `f` at one time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `nx × v.len()`.
    pub f: DMatrix<f64>,
}

/// `N + g` in the velocity representation (`nx × len`).
pub fn dense_f(solver: &Solver, st: &SimState) -> DMatrix<f64> {
    let space = solver.space();
    let b = &space.macro_terms().basis;
    let mut f = st.g.reconstruct();
    for i in 0..f.nrows() {
        for k in 0..f.ncols() {
            f[(i, k)] += (0..3).map(|n| st.u.f[n][i] * b[n][k]).sum::<f64>();
        }
    }
    f
}

pub fn snapshot(solver: &Solver, st: &SimState) -> Snapshot {
    let (v, map) = solver.space().raster();
    let dense = dense_f(solver, st);
    let f = match map {
        Some(m) => dense * m.transpose(),
        None => dense,
    };
    Snapshot { t: st.t, x: solver.grid().points(), v, f }
}

pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: SimState,
    pub steps: usize,
}

fn check_stability(cfg: &SimConfig, solver: &Solver, st: &SimState) -> Result<()> {
    let vp = solver.v_projections(&st.g.v)?;
    let cfl = cfg.dt * vp.sys.max_speed() / solver.grid().dx();
    if cfl > 0.9 {
        log::warn!("advective CFL number {cfl:.3} exceeds 0.9");
    }
    if cfg.backend == Backend::Fd && cfg.nu > 0.0 {
        let co = solver.coefficients();
        let tmax = (0..st.u.nx())
            .filter_map(|i| co.primitive(st.u.at(i)).ok())
            .map(|p| p.temp)
            .fold(0.0, f64::max);
        let dv = 2.0 * cfg.vmax / cfg.nv as f64;
        let number = 2.0 * cfg.nu * tmax * cfg.dt / (dv * dv);
        if number > 0.9 {
            log::warn!("velocity diffusion number {number:.3} exceeds 0.9");
        }
    }
    Ok(())
}

/// Runs `cfg` to `t_end`. `on_step` sees every completed step.
pub fn run_with<F>(cfg: &SimConfig, mut on_step: F) -> Result<RunOutput>
where
    F: FnMut(&Solver, &SimState, &SimState, &StepReport),
{
    let solver = build_solver(cfg)?;
    let mut st = initial_state(&solver, cfg)?;
    check_stability(cfg, &solver, &st)?;
    let tracker = DriftTracker::new(observables(&solver, &st));
    let steps = cfg.steps();
    let mut records = vec![tracker.record(0.0, tracker.initial())];
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = cfg.snapshot_times.clone();
    pending.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let take_snapshots = |st: &SimState, pending: &mut Vec<f64>, out: &mut Vec<Snapshot>| {
        while let Some(&ts) = pending.first() {
            if ts <= st.t + 0.5 * cfg.dt {
                out.push(snapshot(&solver, st));
                pending.remove(0);
            } else {
                break;
            }
        }
    };
    take_snapshots(&st, &mut pending, &mut snapshots);
    for n in 1..=steps {
        let (mut next, report) = solver.step(&st, cfg.dt)?;
        next.t = n as f64 * cfg.dt;
        on_step(&solver, &st, &next, &report);
        st = next;
        if n % cfg.output_stride == 0 || n == steps {
            let rec = tracker.record(st.t, &observables(&solver, &st));
            if !rec.total_energy.is_finite() {
                return Err(Error::NonFinite { t: st.t });
            }
            records.push(rec);
        }
        take_snapshots(&st, &mut pending, &mut snapshots);
    }
    Ok(RunOutput { records, snapshots, final_state: st, steps })
}

pub fn run(cfg: &SimConfig) -> Result<RunOutput> {
    run_with(cfg, |_, _, _, _| {})
}

#[derive(Serialize)]
struct RunMeta<'a> {
    version: &'a str,
    config: &'a SimConfig,
    steps: usize,
}

pub fn write_snapshot(path: &Path, s: &Snapshot) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x,v,f")?;
    for (i, x) in s.x.iter().enumerate() {
        for (k, v) in s.v.iter().enumerate() {
            writeln!(f, "{:e},{:e},{:e}", x, v, s.f[(i, k)])?;
        }
    }
    Ok(())
}

pub fn snapshot_filename(t: f64) -> String {
    format!("phase_space_t{t:07.3}.csv")
}

/// Writes `diagnostics.csv`, the phase-space snapshots and `run_meta.json`.
pub fn write_outputs(dir: &Path, cfg: &SimConfig, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    diagnostics::write_csv(&dir.join("diagnostics.csv"), &out.records)?;
    for s in &out.snapshots {
        write_snapshot(&dir.join(snapshot_filename(s.t)), s)?;
    }
    let meta = RunMeta { version: env!("CARGO_PKG_VERSION"), config: cfg, steps: out.steps };
    std::fs::write(dir.join("run_meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Self-convergence of the final-time distribution under time-step
/// halving.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceResult {
    pub dts: Vec<f64>,
    /// `‖f(dt_i) - f(dt_{i+1})‖`, `None` where either run was unstable.
    pub errors: Vec<Option<f64>>,
    /// Least-squares slope of `ln error` against `ln dt`.
    pub order: f64,
}

pub fn convergence_study(base: &SimConfig, dts: &[f64]) -> Result<ConvergenceResult> {
    if dts.len() < 3 {
        return Err(Error::Config(format!("convergence study needs at least 3 time steps, got {}", dts.len())));
    }
    for w in dts.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(Error::Config("time steps must halve successively".into()));
        }
    }
    let finals: Vec<Option<(Solver, SimState)>> = dts
        .iter()
        .map(|&dt| {
            let cfg = SimConfig { dt, ..base.clone() };
            match run(&cfg) {
                Ok(out) => Ok(Some((build_solver(&cfg)?, out.final_state))),
                Err(Error::NonFinite { t }) => {
                    log::warn!("run with dt = {dt} became unstable at t = {t}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut errors = Vec::new();
    for w in finals.windows(2) {
        errors.push(match (&w[0], &w[1]) {
            (Some((solver, a)), Some((_, b))) => {
                let diff = dense_f(solver, a) - dense_f(solver, b);
                let sq: f64 = diff.row_iter().map(|row| solver.space().weight() * row.norm_squared()).sum();
                Some((solver.grid().dx() * sq).sqrt())
            }
            _ => None,
        });
    }
    let pts: Vec<(f64, f64)> = dts
        .iter()
        .zip(&errors)
        .filter_map(|(dt, e)| e.filter(|e| *e > 0.0).map(|e| (dt.ln(), e.ln())))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Config("fewer than two stable error estimates".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let order = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    Ok(ConvergenceResult { dts: dts.to_vec(), errors, order })
}
