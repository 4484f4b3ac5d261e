//! Dense oracles for the low-rank substeps: every operator is assembled as
//! a full matrix in the velocity representation and applied to the dense
//! distribution, independent of the projected coupling matrices.

#![allow(dead_code)]

use kinetic_dlr::integrator::{MomentField, SimState, SolverParams};
use kinetic_dlr::lowrank::{augmented_qr, qr_weighted};
use kinetic_dlr::velocity::hermite::HermiteSpace;
use kinetic_dlr::{FieldSolver, LowRankState, Order, Reconstruction, Solver, VelocitySpace, XGrid};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Column-by-column matrix of a linear velocity operator.
pub fn operator_matrix(space: &dyn VelocitySpace, op: &dyn Fn(&[f64], &mut [f64])) -> DMatrix<f64> {
    let m = space.len();
    let mut out = DMatrix::zeros(m, m);
    for c in 0..m {
        let mut e = vec![0.0; m];
        e[c] = 1.0;
        let mut col = vec![0.0; m];
        op(&e, &mut col);
        out.set_column(c, &DVector::from_vec(col));
    }
    out
}

pub struct DenseOps {
    pub vmul: DMatrix<f64>,
    pub dv: DMatrix<f64>,
    pub dv2: DMatrix<f64>,
    pub dv_vmul: DMatrix<f64>,
    /// Macro basis `w p_n`, `n = 0, 1, 2`, as rows.
    pub basis: DMatrix<f64>,
}

impl DenseOps {
    pub fn new(space: &dyn VelocitySpace) -> Self {
        let b = &space.macro_terms().basis;
        Self {
            vmul: operator_matrix(space, &|g, o| space.vmul(g, o)),
            dv: operator_matrix(space, &|g, o| space.dv(g, [0.0; 2], o)),
            dv2: operator_matrix(space, &|g, o| space.dv2(g, [0.0; 2], o)),
            dv_vmul: operator_matrix(space, &|g, o| space.dv_vmul(g, [0.0; 2], o)),
            basis: DMatrix::from_fn(3, space.len(), |n, k| b[n][k]),
        }
    }
}

/// Small periodic problem with a Hermite velocity space.
pub fn hermite_solver(nx: usize, max_mode: usize, rank: usize, nu: f64, order: Order, field: FieldSolver, recon: Reconstruction) -> Solver {
    let grid = XGrid::new(4.0 * std::f64::consts::PI, nx).unwrap();
    let space = HermiteSpace::new(max_mode, 1.0).unwrap().with_filter(false);
    let params = SolverParams { nu, rho0: 1.0, recon, field, order };
    Solver::new(grid, Box::new(space), params, rank, 7).unwrap()
}

/// Smooth positive macro state with unit-order temperature, a smooth field
/// and random orthonormal factors with decaying velocity content.
pub fn random_state(solver: &Solver, r: usize, seed: u64) -> SimState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = solver.grid();
    let space = solver.space();
    let nx = grid.nx();
    let co = solver.coefficients();
    let th: Vec<f64> = (0..nx).map(|i| 2.0 * std::f64::consts::PI * i as f64 / nx as f64).collect();
    let (p1, p2, p3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    // Density 1 + 0.3 sin, bulk velocity 0.1 cos, temperature 1 + 0.2 cos.
    let mut u = MomentField::zeros(nx);
    for i in 0..nx {
        let rho = 1.0 + 0.3 * (th[i] + 6.0 * p1).sin();
        let ub = 0.1 * (2.0 * th[i] + 6.0 * p2).cos();
        let t = 1.0 + 0.2 * (th[i] + 6.0 * p3).cos();
        let j = rho * ub;
        let kappa = 0.5 * rho * (t + ub * ub);
        // Invert the lower-triangular C.
        let c = &co.c;
        let f0 = rho / c[(0, 0)];
        let f1 = (j - c[(1, 0)] * f0) / c[(1, 1)];
        let f2 = (kappa - c[(2, 0)] * f0 - c[(2, 1)] * f1) / c[(2, 2)];
        u.f[0][i] = f0;
        u.f[1][i] = f1;
        u.f[2][i] = f2;
    }
    let e: Vec<f64> = th.iter().map(|t| 0.2 * (t + 1.0).sin() - 0.1 * (2.0 * t).cos()).collect();
    let kx = DMatrix::from_fn(nx, r, |i, j| {
        let m = (j + 1) as f64;
        (m * th[i] + rng.gen::<f64>()).sin() + 0.3 * rng.gen::<f64>()
    });
    let nv = space.len();
    let lv = DMatrix::from_fn(nv, r, |k, _| (rng.gen::<f64>() - 0.5) * (-(k as f64) / 4.0).exp());
    let (x, _) = qr_weighted(&kx, grid.dx(), &solver.pool().x);
    let (v, _) = augmented_qr(&lv, space, &solver.pool().v);
    let s = DMatrix::from_fn(r, r, |_, _| 0.1 * (rng.gen::<f64>() - 0.5));
    SimState { u, e, g: LowRankState { x, s, v }, t: 0.0 }
}

/// Dense `N` (`nx × len`).
pub fn dense_macro(ops: &DenseOps, u: &MomentField) -> DMatrix<f64> {
    let nx = u.nx();
    let f = DMatrix::from_fn(nx, 3, |i, n| u.f[n][i]);
    f * &ops.basis
}

/// Velocity part of the kinetic operator applied row-wise to `f`:
/// `-E ∂v f + ν ∂v(T ∂v f + (v - u) f)`.
pub fn velocity_part(solver: &Solver, ops: &DenseOps, u: &MomentField, e: &[f64], f: &DMatrix<f64>) -> DMatrix<f64> {
    let nu = solver.params().nu;
    let co = solver.coefficients();
    let mut out = DMatrix::zeros(f.nrows(), f.ncols());
    for i in 0..f.nrows() {
        let row = f.row(i).transpose();
        let (ub, t) = if nu > 0.0 {
            let p = co.primitive(u.at(i)).unwrap();
            (p.u, p.temp)
        } else {
            (0.0, 0.0)
        };
        let d = -(e[i] + nu * ub) * (&ops.dv * &row) + nu * t * (&ops.dv2 * &row) + nu * (&ops.dv_vmul * &row);
        out.set_row(i, &d.transpose());
    }
    out
}

/// `-v ∂x f` with the centered difference in `x`.
pub fn centered_transport(solver: &Solver, ops: &DenseOps, f: &DMatrix<f64>) -> DMatrix<f64> {
    let nx = f.nrows();
    let dx = solver.grid().dx();
    let df = DMatrix::from_fn(nx, f.ncols(), |i, k| (f[((i + 1) % nx, k)] - f[((i + nx - 1) % nx, k)]) / (2.0 * dx));
    -(df * ops.vmul.transpose())
}

/// Forward Euler K step with first-order characteristic upwinding of the
/// joint system built from dense inner products. Returns `K^{n+1}`.
pub fn oracle_k(solver: &Solver, ops: &DenseOps, st: &SimState, dt: f64) -> DMatrix<f64> {
    let space = solver.space();
    let w = space.weight();
    let nx = st.u.nx();
    let r = st.g.rank();
    let dx = solver.grid().dx();
    let basis = DMatrix::from_fn(space.len(), r + 3, |k, c| if c < 3 { ops.basis[(c, k)] } else { st.g.v[(k, c - 3)] });
    let a0 = basis.transpose() * &ops.vmul * &basis * w;
    let a0 = (&a0 + a0.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a0.clone());
    let rv = &eig.eigenvectors;
    let lp = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0)));
    let lm = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.min(0.0)));
    let ap = rv * lp * rv.transpose();
    let am = rv * lm * rv.transpose();
    let k0 = &st.g.x * &st.g.s;
    let wst = DMatrix::from_fn(nx, r + 3, |i, c| if c < 3 { st.u.f[c][i] } else { k0[(i, c - 3)] });
    let face = |i: usize| -> DVector<f64> {
        let wl = wst.row(i).transpose();
        let wr = wst.row((i + 1) % nx).transpose();
        &ap * wl + &am * wr
    };
    let f = dense_macro(ops, &st.u) + st.g.reconstruct();
    let vel = velocity_part(solver, ops, &st.u, &st.e, &f) * &st.g.v * w;
    DMatrix::from_fn(nx, r, |i, j| {
        let div = (face(i)[3 + j] - face((i + nx - 1) % nx)[3 + j]) / dx;
        k0[(i, j)] + dt * (-div + vel[(i, j)])
    })
}

/// Forward Euler S step (backward in time) with centered transport.
pub fn oracle_s(solver: &Solver, ops: &DenseOps, st: &SimState, x: &DMatrix<f64>, s: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
    let w = solver.space().weight();
    let dx = solver.grid().dx();
    let f = dense_macro(ops, &st.u) + x * s * st.g.v.transpose();
    let d = centered_transport(solver, ops, &f) + velocity_part(solver, ops, &st.u, &st.e, &f);
    s - (x.transpose() * d * &st.g.v) * (dt * dx * w)
}

/// Forward Euler L step with centered transport and the micro projection;
/// returns `L^{n+1}` before the filter.
pub fn oracle_l(solver: &Solver, ops: &DenseOps, st: &SimState, x: &DMatrix<f64>, s: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
    let space = solver.space();
    let dx = solver.grid().dx();
    let l0 = &st.g.v * s.transpose();
    let f = dense_macro(ops, &st.u) + x * l0.transpose();
    let d = centered_transport(solver, ops, &f) + velocity_part(solver, ops, &st.u, &st.e, &f);
    let mut rhs = d.transpose() * x * dx;
    for c in 0..rhs.ncols() {
        space.project_perp(rhs.column_mut(c).as_mut_slice());
    }
    l0 + rhs * dt
}

pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}
