//! Periodic spatial grid, Poisson solve, and upwind flux splitting for the
//! joint hyperbolic system of the macro moments and the `K` factor.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orthopoly::MacroCoefficients;

/// Uniform periodic grid `x_i = i Δx` on `[0, L)`.
#[derive(Clone, Debug, PartialEq)]
pub struct XGrid {
    length: f64,
    nx: usize,
}

impl XGrid {
    pub fn new(length: f64, nx: usize) -> Result<Self> {
        if nx < 5 {
            return Err(Error::Config(format!("need at least 5 grid points, got {nx}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("domain length must be positive, got {length}")));
        }
        Ok(Self { length, nx })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.point(i)).collect()
    }

    /// Periodic trapezoid rule, which reduces to `Δx Σ g_i h_i`.
    pub fn trapezoid(&self, g: &[f64], h: &[f64]) -> f64 {
        self.dx() * g.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn integrate(&self, g: &[f64]) -> f64 {
        self.dx() * g.iter().sum::<f64>()
    }

    /// Second-order centered difference `(g_{i+1} - g_{i-1}) / 2Δx`.
    pub fn centered_dx(&self, g: &[f64], out: &mut [f64]) {
        let n = self.nx;
        let c = 0.5 / self.dx();
        for i in 0..n {
            out[i] = c * (g[(i + 1) % n] - g[(i + n - 1) % n]);
        }
    }

    /// Solves `-Δ_h φ = ρ - ρ0` with the periodic 3-point Laplacian and
    /// returns `(φ, E)` with `E = -D_c φ` and `φ` of zero mean.
    ///
    /// Any residual mean of `ρ - ρ0` is removed first so that the system is
    /// solvable; the solve itself is exact up to rounding.
    pub fn poisson_solve(&self, rho: &[f64], rho0: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.nx;
        let dx2 = self.dx() * self.dx();
        let mean = rho.iter().map(|r| r - rho0).sum::<f64>() / n as f64;
        // ψ_i = φ_{i+1} - φ_i satisfies ψ_i - ψ_{i-1} = -Δx² s_i.
        let mut cum = vec![0.0; n];
        let mut acc = 0.0;
        for i in 0..n {
            acc += rho[i] - rho0 - mean;
            cum[i] = acc;
        }
        let c = dx2 * cum.iter().sum::<f64>() / n as f64;
        let mut phi = vec![0.0; n];
        for i in 0..n - 1 {
            phi[i + 1] = phi[i] + c - dx2 * cum[i];
        }
        let pm = phi.iter().sum::<f64>() / n as f64;
        phi.iter_mut().for_each(|p| *p -= pm);
        let mut e = vec![0.0; n];
        self.centered_dx(&phi, &mut e);
        e.iter_mut().for_each(|v| *v = -*v);
        (phi, e)
    }
}

/// Interface reconstruction used in the upwind flux.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    #[serde(rename = "upwind1")]
    FirstOrder,
    MusclMc,
    Weno5,
}

/// Monotonized-central limited slope from three consecutive values.
pub fn mc_slope(um: f64, u0: f64, up: f64) -> f64 {
    let a = u0 - um;
    let b = up - u0;
    if a * b <= 0.0 {
        return 0.0;
    }
    let c = 0.5 * (up - um);
    let m = (2.0 * a.abs()).min(2.0 * b.abs()).min(c.abs());
    m.copysign(c)
}

/// WENO5-JS value at the right face of the centre cell, from cells
/// `i-2 .. i+2`.
pub fn weno5_left(v: [f64; 5]) -> f64 {
    const EPS: f64 = 1e-6;
    let [a, b, c, d, e] = v;
    let b0 = 13.0 / 12.0 * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2);
    let b1 = 13.0 / 12.0 * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2);
    let b2 = 13.0 / 12.0 * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2);
    let a0 = 0.1 / (EPS + b0).powi(2);
    let a1 = 0.6 / (EPS + b1).powi(2);
    let a2 = 0.3 / (EPS + b2).powi(2);
    let q0 = (2.0 * a - 7.0 * b + 11.0 * c) / 6.0;
    let q1 = (-b + 5.0 * c + 2.0 * d) / 6.0;
    let q2 = (2.0 * c + 5.0 * d - e) / 6.0;
    (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)
}

/// Left and right states at face `i+1/2` of a periodic array.
fn face_states(c: &[f64], i: usize, recon: Reconstruction) -> (f64, f64) {
    let n = c.len();
    let at = |k: isize| c[((i as isize + k).rem_euclid(n as isize)) as usize];
    match recon {
        Reconstruction::FirstOrder => (at(0), at(1)),
        Reconstruction::MusclMc => {
            let l = at(0) + 0.5 * mc_slope(at(-1), at(0), at(1));
            let r = at(1) - 0.5 * mc_slope(at(0), at(1), at(2));
            (l, r)
        }
        Reconstruction::Weno5 => {
            let l = weno5_left([at(-2), at(-1), at(0), at(1), at(2)]);
            let r = weno5_left([at(3), at(2), at(1), at(0), at(-1)]);
            (l, r)
        }
    }
}

/// Which rows of the joint flux are returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rows {
    /// The three macro rows.
    Macro,
    /// The `r` kinetic rows.
    Kinetic,
    All,
}

/// The symmetric `(r+3)`-dimensional flux matrix coupling the macro
/// coefficients `(f0, f1, f2)` with the `K` columns, and its
/// eigendecomposition.
#[derive(Clone, Debug)]
pub struct HyperbolicSystem {
    a0: DMatrix<f64>,
    eigvecs: DMatrix<f64>,
    eigvals: Vec<f64>,
}

impl HyperbolicSystem {
    /// `q_j = <V_j, w p3>` and `a_jl = <V_j, v V_l>`.
    pub fn new(coeffs: &MacroCoefficients, q: &[f64], a: &DMatrix<f64>) -> Result<Self> {
        let r = q.len();
        let m = r + 3;
        let mut a0 = DMatrix::zeros(m, m);
        for n in 0..3 {
            a0[(n, n)] = coeffs.b[n];
        }
        a0[(0, 1)] = coeffs.a[0];
        a0[(1, 0)] = coeffs.a[0];
        a0[(1, 2)] = coeffs.a[1];
        a0[(2, 1)] = coeffs.a[1];
        for j in 0..r {
            a0[(2, 3 + j)] = coeffs.a[2] * q[j];
            a0[(3 + j, 2)] = coeffs.a[2] * q[j];
            for l in 0..r {
                a0[(3 + j, 3 + l)] = 0.5 * (a[(j, l)] + a[(l, j)]);
            }
        }
        let eig = SymmetricEigen::new(a0.clone());
        if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::Eigen);
        }
        Ok(Self { a0, eigvecs: eig.eigenvectors, eigvals: eig.eigenvalues.iter().copied().collect() })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a0
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn max_speed(&self) -> f64 {
        self.eigvals.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    /// Upwind numerical fluxes at faces `i+1/2` (row `i`) for the state
    /// `w` (`nx × (r+3)`, columns `f0, f1, f2, K_1..K_r`).
    pub fn face_fluxes(&self, w: &DMatrix<f64>, recon: Reconstruction, rows: Rows) -> DMatrix<f64> {
        let nx = w.nrows();
        let m = self.a0.nrows();
        let chars = w * &self.eigvecs;
        let mut fchar = DMatrix::zeros(nx, m);
        for k in 0..m {
            let lam = self.eigvals[k];
            let (lp, lm) = (lam.max(0.0), lam.min(0.0));
            let col = chars.column(k);
            let c = col.as_slice();
            for i in 0..nx {
                let (l, r) = face_states(c, i, recon);
                fchar[(i, k)] = lp * l + lm * r;
            }
        }
        let (start, len) = match rows {
            Rows::Macro => (0, 3),
            Rows::Kinetic => (3, m - 3),
            Rows::All => (0, m),
        };
        fchar * self.eigvecs.rows(start, len).transpose()
    }

    /// `(F_{i+1/2} - F_{i-1/2}) / Δx` for the selected rows.
    pub fn flux_divergence(&self, w: &DMatrix<f64>, dx: f64, recon: Reconstruction, rows: Rows) -> DMatrix<f64> {
        let faces = self.face_fluxes(w, recon, rows);
        divergence(&faces, dx)
    }
}

/// Periodic difference of face values stored as `row i = face i+1/2`.
pub fn divergence(faces: &DMatrix<f64>, dx: f64) -> DMatrix<f64> {
    let nx = faces.nrows();
    DMatrix::from_fn(nx, faces.ncols(), |i, k| (faces[(i, k)] - faces[((i + nx - 1) % nx, k)]) / dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthopoly::BasisFamily;
    use std::f64::consts::PI;

    #[test]
    fn centered_dx_of_sine() {
        let g = XGrid::new(2.0 * PI, 64).unwrap();
        let s: Vec<f64> = g.points().iter().map(|x| x.sin()).collect();
        let mut d = vec![0.0; 64];
        g.centered_dx(&s, &mut d);
        let dx = g.dx();
        for (i, x) in g.points().iter().enumerate() {
            assert!((d[i] - x.cos() * dx.sin() / dx).abs() < 1e-13);
        }
    }

    #[test]
    fn poisson_matches_dense_solve() {
        let grid = XGrid::new(4.0 * PI, 32).unwrap();
        let n = grid.nx();
        let rho: Vec<f64> = grid.points().iter().map(|x| 1.0 + 0.3 * (0.5 * x).cos() + 0.1 * (1.5 * x).sin()).collect();
        let (phi, e) = grid.poisson_solve(&rho, 1.0);
        // Dense oracle: Laplacian plus a rank-one mean constraint.
        let dx2 = grid.dx().powi(2);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0 / dx2;
            a[(i, (i + 1) % n)] -= 1.0 / dx2;
            a[(i, (i + n - 1) % n)] -= 1.0 / dx2;
        }
        let a = a + DMatrix::from_element(n, n, 1.0);
        let b = nalgebra::DVector::from_iterator(n, rho.iter().map(|r| r - 1.0));
        let sol = a.lu().solve(&b).unwrap();
        for i in 0..n {
            assert!((phi[i] - sol[i]).abs() < 1e-12);
            let expect = -(sol[(i + 1) % n] - sol[(i + n - 1) % n]) / (2.0 * grid.dx());
            assert!((e[i] - expect).abs() < 1e-12);
        }
        assert!(grid.integrate(&e).abs() < 1e-13);
    }

    #[test]
    fn poisson_single_mode() {
        let k = 0.5;
        let grid = XGrid::new(2.0 * PI / k, 64).unwrap();
        let rho: Vec<f64> = grid.points().iter().map(|x| 1.0 + 1e-3 * (k * x).cos()).collect();
        let (_, e) = grid.poisson_solve(&rho, 1.0);
        let dx = grid.dx();
        let lam = (2.0 - 2.0 * (k * dx).cos()) / (dx * dx);
        let dc = (k * dx).sin() / dx;
        for (i, x) in grid.points().iter().enumerate() {
            assert!((e[i] - 1e-3 * dc / lam * (k * x).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn mc_slope_cases() {
        assert_eq!(mc_slope(0.0, 1.0, 0.0), 0.0);
        assert!((mc_slope(0.0, 1.0, 2.0) - 1.0).abs() < 1e-15);
        assert!((mc_slope(0.0, 0.1, 2.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn weno_exact_for_quadratics() {
        // Cell averages of x² over unit cells centered at -2..2.
        let avg = |c: f64| c * c + 1.0 / 12.0;
        let v = [avg(-2.0), avg(-1.0), avg(0.0), avg(1.0), avg(2.0)];
        assert!((weno5_left(v) - 0.25).abs() < 1e-12);
    }

    fn hermite_system(r: usize) -> HyperbolicSystem {
        let coeffs = BasisFamily::hermite(1.0).unwrap().macro_coefficients();
        // V_j = e_{3+j}: q = (1, 0, ..), A tridiagonal.
        let mut q = vec![0.0; r];
        q[0] = 1.0;
        let a = DMatrix::from_fn(r, r, |j, l| {
            let (n, m) = (3 + j, 3 + l);
            if m == n + 1 { (m as f64).sqrt() } else if n == m + 1 { (n as f64).sqrt() } else { 0.0 }
        });
        HyperbolicSystem::new(&coeffs, &q, &a).unwrap()
    }

    #[test]
    fn joint_matrix_is_truncated_jacobi_matrix() {
        let sys = hermite_system(4);
        let a0 = sys.matrix();
        for n in 0..7 {
            for m in 0..7 {
                let expect = if m == n + 1 { (m as f64).sqrt() } else if n == m + 1 { (n as f64).sqrt() } else { 0.0 };
                assert!((a0[(n, m)] - expect).abs() < 1e-14);
            }
        }
        // Eigenvalues are the Gauss-Hermite nodes of order 7, symmetric.
        let mut ev = sys.eigenvalues().to_vec();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for k in 0..7 {
            assert!((ev[k] + ev[6 - k]).abs() < 1e-12);
        }
        assert!(ev[3].abs() < 1e-12);
    }

    #[test]
    fn upwind_flux_of_constant_state_is_physical_flux() {
        let sys = hermite_system(3);
        let nx = 16;
        let state = [0.7, -0.2, 0.1, 0.05, -0.03, 0.02];
        let w = DMatrix::from_fn(nx, 6, |_, k| state[k]);
        for recon in [Reconstruction::FirstOrder, Reconstruction::MusclMc, Reconstruction::Weno5] {
            let f = sys.face_fluxes(&w, recon, Rows::All);
            let phys = sys.matrix() * nalgebra::DVector::from_row_slice(&state);
            for i in 0..nx {
                for k in 0..6 {
                    assert!((f[(i, k)] - phys[k]).abs() < 1e-14);
                }
            }
            let div = sys.flux_divergence(&w, 0.1, recon, Rows::Kinetic);
            assert!(div.amax() < 1e-12);
        }
    }
}
