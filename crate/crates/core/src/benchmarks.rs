//! Benchmark presets and initial conditions.
//!
//! Both initial conditions are separable, `f(x, v) = a(x) h(v)`, with a
//! Maxwellian of unit temperature normalized to unit density.

use nalgebra::DMatrix;

use crate::config::{Backend, Problem, SimConfig};
use crate::error::Result;
use crate::integrator::{FieldSolver, MomentField, SimState, Solver};
use crate::lowrank::init_from_svd;
use crate::spatial::Reconstruction;

pub const PRESET_NAMES: &[&str] = &[
    "weak_ld_hermite",
    "weak_ld_fd",
    "collisional_ld_hermite",
    "collisional_ld_fd",
    "strong_ld_hermite",
    "strong_ld_fd",
    "two_stream_hermite",
    "two_stream_fd",
    "convergence",
];

fn maxwellian(v: f64) -> f64 {
    (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Spatial profile `a(x)`.
pub fn profile_x(cfg: &SimConfig, x: f64) -> f64 {
    let (k, d) = (cfg.k, cfg.delta);
    match cfg.problem {
        Problem::Landau => 1.0 + d * (k * x).cos(),
        Problem::TwoStream => 1.0 + d * (((2.0 * k * x).cos() + (3.0 * k * x).cos()) / 1.2 + (k * x).cos()),
    }
}

/// Velocity profile `h(v)`.
pub fn profile_v(cfg: &SimConfig, v: f64) -> f64 {
    match cfg.problem {
        Problem::Landau => maxwellian(v),
        Problem::TwoStream => 2.0 / 7.0 * (1.0 + 5.0 * v * v) * maxwellian(v),
    }
}

pub fn preset(name: &str) -> Option<SimConfig> {
    let base = SimConfig::default();
    let hermite = |c: SimConfig| SimConfig { backend: Backend::Hermite, modes: 256, v0: 1.0, ..c };
    let fd = |c: SimConfig, nv: usize| SimConfig { backend: Backend::Fd, nv, vmax: 8.0, ..c };
    let weak = SimConfig { problem: Problem::Landau, k: 0.5, delta: 1e-3, nx: 128, rank: 6, dt: 2e-3, t_end: 40.0, ..base };
    let strong = SimConfig { delta: 0.5, rank: 16, dt: 4e-3, t_end: 50.0, ..weak.clone() };
    let two = SimConfig {
        problem: Problem::TwoStream,
        k: 0.5,
        delta: 0.01,
        nx: 256,
        rank: 20,
        dt: 4e-3,
        t_end: 50.0,
        ..weak.clone()
    };
    let cfg = match name {
        "weak_ld_hermite" => hermite(weak),
        "weak_ld_fd" => fd(weak, 256),
        "collisional_ld_hermite" => hermite(SimConfig { nu: 0.25, ..weak }),
        "collisional_ld_fd" => fd(SimConfig { nu: 0.25, dt: 5e-4, ..weak }, 128),
        "strong_ld_hermite" => hermite(strong),
        "strong_ld_fd" => fd(strong, 256),
        "two_stream_hermite" => hermite(two),
        "two_stream_fd" => fd(two, 256),
        "convergence" => hermite(SimConfig {
            reconstruction: Reconstruction::Weno5,
            t_end: 5.0,
            dt: 4e-3,
            order: 1,
            field: FieldSolver::Ampere,
            ..weak
        }),
        _ => return None,
    };
    Some(cfg)
}

/// Discretized initial state. Moments come from the velocity-space
/// representation of `h`; the micro part `a(x) P⊥ h` is compressed by a
/// truncated SVD and the field from Gauss's law.
pub fn initial_state(solver: &Solver, cfg: &SimConfig) -> Result<SimState> {
    let space = solver.space();
    let grid = solver.grid();
    let nx = grid.nx();
    let rep = space.represent(&|v| profile_v(cfg, v));
    let c: Vec<f64> = (0..3).map(|n| space.inner(&space.macro_terms().basis[n], &rep)).collect();
    let mut micro = rep.clone();
    space.project_perp(&mut micro);
    space.project_perp(&mut micro);
    let a: Vec<f64> = grid.points().iter().map(|&x| profile_x(cfg, x)).collect();

    let mut u = MomentField::zeros(nx);
    for i in 0..nx {
        for n in 0..3 {
            u.f[n][i] = a[i] * c[n];
        }
    }
    let g0 = DMatrix::from_fn(nx, space.len(), |i, k| a[i] * micro[k]);
    let scale = (grid.trapezoid(&a, &a) * space.inner(&rep, &rep)).sqrt();
    let g = init_from_svd(&g0, cfg.rank, grid.dx(), space, solver.pool(), scale);
    let e = solver.gauss_field(&u);
    Ok(SimState { u, e, g, t: 0.0 })
}

/// Mean initial density, the default neutralizing background.
pub fn mean_density(cfg: &SimConfig, space: &dyn crate::velocity::VelocitySpace, nx: usize) -> f64 {
    let rep = space.represent(&|v| profile_v(cfg, v));
    let rho_v = space.coefficients().c[(0, 0)] * space.inner(&space.macro_terms().basis[0], &rep);
    let dx = cfg.length() / nx as f64;
    let mean_a = (0..nx).map(|i| profile_x(cfg, i as f64 * dx)).sum::<f64>() / nx as f64;
    rho_v * mean_a
}
