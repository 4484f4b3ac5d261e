//! Orthonormal polynomial families used for the macro basis.
//!
//! Each family has a positive weight `w(v)` and polynomials `p_n` with
//! `∫ w p_n p_m dv = δ_nm`. The macro part of the distribution is expanded
//! as `N = w (f0 p0 + f1 p1 + f2 p2)`; the coefficients in
//! [`MacroCoefficients`] couple the moment equations to the kinetic part.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// Probabilists' Hermite with Gaussian weight of width `v0`.
    Hermite,
    /// Legendre on `[-vmax, vmax]` with constant weight `1/vmax`.
    Legendre,
}

/// A weighted orthonormal polynomial family on the velocity line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisFamily {
    kind: BasisKind,
    scale: f64,
}

impl BasisFamily {
    pub fn hermite(v0: f64) -> Result<Self> {
        if !(v0.is_finite() && v0 > 0.0) {
            return Err(Error::Config(format!("Hermite scale v0 must be positive, got {v0}")));
        }
        Ok(Self { kind: BasisKind::Hermite, scale: v0 })
    }

    pub fn legendre(vmax: f64) -> Result<Self> {
        if !(vmax.is_finite() && vmax > 0.0) {
            return Err(Error::Config(format!("Legendre half-width must be positive, got {vmax}")));
        }
        Ok(Self { kind: BasisKind::Legendre, scale: vmax })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// `v0` for Hermite, `vmax` for Legendre.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Three-term recurrence coefficients `(a_n, b_n)` with
    /// `v p_n = a_n p_{n+1} + b_n p_n + a_{n-1} p_{n-1}`.
    pub fn recurrence_coeffs(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        match self.kind {
            BasisKind::Hermite => (self.scale * (nf + 1.0).sqrt(), 0.0),
            BasisKind::Legendre => {
                let a = (nf + 1.0) / ((2.0 * nf + 1.0) * (2.0 * nf + 3.0)).sqrt();
                (a * self.scale, 0.0)
            }
        }
    }

    pub fn weight(&self, v: f64) -> f64 {
        match self.kind {
            BasisKind::Hermite => {
                let s = v / self.scale;
                (-0.5 * s * s).exp() / (self.scale * SQRT_2PI)
            }
            // Constant on the domain; callers stay inside [-vmax, vmax].
            BasisKind::Legendre => 1.0 / self.scale,
        }
    }

    /// Evaluates `p_n(v)`.
    pub fn eval_pn(&self, n: usize, v: f64) -> f64 {
        if n <= 3 {
            return self.closed_form(n, v);
        }
        self.eval_all(n, v)[n]
    }

    /// Evaluates `p_0(v) .. p_nmax(v)` by the upward recurrence.
    pub fn eval_all(&self, nmax: usize, v: f64) -> Vec<f64> {
        let mut p = Vec::with_capacity(nmax + 1);
        p.push(self.closed_form(0, v));
        if nmax >= 1 {
            p.push(self.closed_form(1, v));
        }
        for n in 1..nmax {
            let (an, bn) = self.recurrence_coeffs(n);
            let (anm1, _) = self.recurrence_coeffs(n - 1);
            let next = ((v - bn) * p[n] - anm1 * p[n - 1]) / an;
            p.push(next);
        }
        p
    }

    fn closed_form(&self, n: usize, v: f64) -> f64 {
        let s = v / self.scale;
        match self.kind {
            BasisKind::Hermite => match n {
                0 => 1.0,
                1 => s,
                2 => (s * s - 1.0) / 2f64.sqrt(),
                3 => (s * s * s - 3.0 * s) / 6f64.sqrt(),
                _ => unreachable!(),
            },
            BasisKind::Legendre => match n {
                0 => 0.5f64.sqrt(),
                1 => 1.5f64.sqrt() * s,
                2 => (5.0f64 / 8.0).sqrt() * (3.0 * s * s - 1.0),
                3 => (7.0f64 / 8.0).sqrt() * (5.0 * s * s * s - 3.0 * s),
                _ => unreachable!(),
            },
        }
    }

    /// Matrix `C` with `(1, v, v²/2)^T = C (p0, p1, p2)^T`.
    pub fn c_matrix(&self) -> Matrix3<f64> {
        let v = self.scale;
        match self.kind {
            BasisKind::Hermite => Matrix3::new(
                1.0, 0.0, 0.0, //
                0.0, v, 0.0, //
                0.5 * v * v, 0.0, v * v / 2f64.sqrt(),
            ),
            BasisKind::Legendre => Matrix3::new(
                2f64.sqrt(), 0.0, 0.0, //
                0.0, (2.0f64 / 3.0).sqrt() * v, 0.0, //
                2f64.sqrt() * v * v / 6.0, 0.0, (8.0f64 / 5.0).sqrt() * v * v / 6.0,
            ),
        }
    }

    /// `(d10, d20, d21)` with `p1' = d10 p0`, `p2' = d20 p0 + d21 p1`.
    pub fn derivative_coeffs(&self) -> (f64, f64, f64) {
        let v = self.scale;
        match self.kind {
            BasisKind::Hermite => (1.0 / v, 0.0, 2f64.sqrt() / v),
            BasisKind::Legendre => (3f64.sqrt() / v, 0.0, 15f64.sqrt() / v),
        }
    }

    pub fn macro_coefficients(&self) -> MacroCoefficients {
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        for n in 0..3 {
            (a[n], b[n]) = self.recurrence_coeffs(n);
        }
        let (d10, d20, d21) = self.derivative_coeffs();
        MacroCoefficients { a, b, d10, d20, d21, c: self.c_matrix() }
    }
}

/// Coefficients coupling the three macro moments to each other and to the
/// kinetic part. Built analytically from a [`BasisFamily`] or, for the
/// finite-difference backend, from discrete inner products.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroCoefficients {
    /// Off-diagonal recurrence coefficients `a_0, a_1, a_2`.
    pub a: [f64; 3],
    /// Diagonal recurrence coefficients `b_0, b_1, b_2`.
    pub b: [f64; 3],
    pub d10: f64,
    pub d20: f64,
    pub d21: f64,
    pub c: Matrix3<f64>,
}

/// Density, bulk velocity and temperature at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub u: f64,
    pub temp: f64,
}

impl MacroCoefficients {
    pub fn density(&self, f: [f64; 3]) -> f64 {
        self.c[(0, 0)] * f[0]
    }

    pub fn current(&self, f: [f64; 3]) -> f64 {
        self.c[(1, 0)] * f[0] + self.c[(1, 1)] * f[1]
    }

    /// `∫ v²/2 N dv`.
    pub fn kinetic(&self, f: [f64; 3]) -> f64 {
        self.c[(2, 0)] * f[0] + self.c[(2, 1)] * f[1] + self.c[(2, 2)] * f[2]
    }

    /// `(ρ, u, T)` from the macro coefficients.
    ///
    /// `T = 2κ/ρ - u²` with `κ` the kinetic energy density.
    pub fn primitive(&self, f: [f64; 3]) -> Result<Primitive> {
        let rho = self.density(f);
        if !(rho > 0.0) {
            return Err(Error::DegenerateDensity { index: 0, rho });
        }
        let u = self.current(f) / rho;
        let temp = 2.0 * self.kinetic(f) / rho - u * u;
        Ok(Primitive { rho, u, temp })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
        // Golub-Welsch on the Jacobi matrix of the monic Legendre recurrence.
        let mut j = nalgebra::DMatrix::zeros(n, n);
        for k in 1..n {
            let kf = k as f64;
            let beta = kf / (4.0 * kf * kf - 1.0).sqrt();
            j[(k, k - 1)] = beta;
            j[(k - 1, k)] = beta;
        }
        let eig = nalgebra::SymmetricEigen::new(j);
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..n).map(|k| 2.0 * eig.eigenvectors[(0, k)].powi(2)).collect();
        (nodes, weights)
    }

    /// `∫ f dv` against the family weight, by an independent quadrature.
    fn weighted_integral(fam: &BasisFamily, f: impl Fn(f64) -> f64) -> f64 {
        match fam.kind() {
            BasisKind::Hermite => {
                // Trapezoid on a wide interval is spectrally accurate here.
                let v0 = fam.scale();
                let h = 1e-3 * v0;
                let n = (24.0 * v0 / h) as i64;
                (-n..=n).map(|i| {
                    let v = i as f64 * h;
                    fam.weight(v) * f(v) * h
                }).sum()
            }
            BasisKind::Legendre => {
                let (x, w) = gauss_legendre_nodes(40);
                let vm = fam.scale();
                x.iter().zip(&w).map(|(&s, &ws)| ws * vm * fam.weight(s * vm) * f(s * vm)).sum()
            }
        }
    }

    #[test]
    fn recurrence_frozen_values() {
        let h = BasisFamily::hermite(1.0).unwrap();
        assert!((h.recurrence_coeffs(0).0 - 1.0).abs() < 1e-15);
        let l = BasisFamily::legendre(8.0).unwrap();
        assert!((l.recurrence_coeffs(0).0 - 8.0 / 3f64.sqrt()).abs() < 1e-14);
        let h2 = BasisFamily::hermite(2.0).unwrap();
        assert!((h2.recurrence_coeffs(2).0 - 2.0 * 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn closed_forms() {
        let h = BasisFamily::hermite(1.0).unwrap();
        // He_3(2) = 8 - 6 = 2.
        assert!((h.eval_pn(3, 2.0) - 2.0 / 6f64.sqrt()).abs() < 1e-14);
        assert!((h.weight(0.0) - 1.0 / SQRT_2PI).abs() < 1e-16);
        let l = BasisFamily::legendre(1.0).unwrap();
        assert!((l.eval_pn(2, 1.0) - (5.0f64 / 8.0).sqrt() * 2.0).abs() < 1e-14);
    }

    #[test]
    fn recurrence_matches_closed_forms() {
        for fam in [BasisFamily::hermite(1.3).unwrap(), BasisFamily::legendre(6.0).unwrap()] {
            for &v in &[-2.1, -0.3, 0.0, 0.7, 1.9] {
                let all = fam.eval_all(6, v);
                for n in 0..=3 {
                    assert!((all[n] - fam.closed_form(n, v)).abs() < 1e-13);
                }
                for n in 1..6 {
                    let (an, bn) = fam.recurrence_coeffs(n);
                    let (anm1, _) = fam.recurrence_coeffs(n - 1);
                    let res = v * all[n] - an * all[n + 1] - bn * all[n] - anm1 * all[n - 1];
                    assert!(res.abs() <= 1e-12 * (1.0 + v.abs()), "n={n} res={res}");
                }
            }
        }
    }

    #[test]
    fn orthonormality_by_quadrature() {
        for fam in [BasisFamily::hermite(1.0).unwrap(), BasisFamily::hermite(0.7).unwrap(), BasisFamily::legendre(8.0).unwrap()] {
            for n in 0..6 {
                for m in 0..6 {
                    let ip = weighted_integral(&fam, |v| fam.eval_pn(n, v) * fam.eval_pn(m, v));
                    let expect = if n == m { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-11, "{:?} n={n} m={m} ip={ip}", fam.kind());
                }
            }
        }
    }

    #[test]
    fn c_matrix_reproduces_monomials() {
        for fam in [BasisFamily::hermite(1.0).unwrap(), BasisFamily::hermite(1.7).unwrap(), BasisFamily::legendre(8.0).unwrap()] {
            let c = fam.c_matrix();
            for &v in &[-1.5, 0.0, 0.4, 2.2] {
                let p = [fam.eval_pn(0, v), fam.eval_pn(1, v), fam.eval_pn(2, v)];
                let phi = [1.0, v, 0.5 * v * v];
                for i in 0..3 {
                    let s: f64 = (0..3).map(|j| c[(i, j)] * p[j]).sum();
                    assert!((s - phi[i]).abs() < 1e-13 * (1.0 + phi[i].abs()), "{:?} row {i}", fam.kind());
                }
            }
        }
        let l = BasisFamily::legendre(8.0).unwrap().c_matrix();
        assert!((l[(2, 0)] - 2f64.sqrt() * 64.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_coefficients() {
        for fam in [BasisFamily::hermite(1.4).unwrap(), BasisFamily::legendre(5.0).unwrap()] {
            let (d10, d20, d21) = fam.derivative_coeffs();
            let h = 1e-5;
            for &v in &[-0.8, 0.3, 1.1] {
                let dp1 = (fam.eval_pn(1, v + h) - fam.eval_pn(1, v - h)) / (2.0 * h);
                let dp2 = (fam.eval_pn(2, v + h) - fam.eval_pn(2, v - h)) / (2.0 * h);
                assert!((dp1 - d10 * fam.eval_pn(0, v)).abs() < 1e-8);
                assert!((dp2 - d20 * fam.eval_pn(0, v) - d21 * fam.eval_pn(1, v)).abs() < 1e-8);
            }
            // Identities from differentiating (1, v, v²/2) = C p.
            let c = fam.c_matrix();
            assert!((c[(1, 1)] * d10 - c[(0, 0)]).abs() < 1e-14);
            assert!((c[(2, 2)] * d21 - c[(1, 1)]).abs() < 1e-13);
            assert!((c[(2, 2)] * d20 + c[(2, 1)] * d10 - c[(1, 0)]).abs() < 1e-14);
        }
    }

    #[test]
    fn primitive_variables() {
        let h = BasisFamily::hermite(1.0).unwrap().macro_coefficients();
        let p = h.primitive([1.0, 0.0, 0.0]).unwrap();
        assert!((p.rho - 1.0).abs() < 1e-15 && p.u.abs() < 1e-15 && (p.temp - 1.0).abs() < 1e-15);
        let p = h.primitive([2.0, 1.0, 0.5]).unwrap();
        // ρ=2, J=1, κ = 1 + 0.5/√2.
        let kappa = 1.0 + 0.5 / 2f64.sqrt();
        assert!((p.u - 0.5).abs() < 1e-15);
        assert!((p.temp - (2.0 * kappa / 2.0 - 0.25)).abs() < 1e-14);
        assert!(matches!(h.primitive([0.0, 1.0, 0.0]), Err(Error::DegenerateDensity { .. })));
    }

    #[test]
    fn rejects_bad_scales() {
        assert!(BasisFamily::hermite(0.0).is_err());
        assert!(BasisFamily::legendre(-1.0).is_err());
        assert!(BasisFamily::hermite(f64::NAN).is_err());
    }
}
