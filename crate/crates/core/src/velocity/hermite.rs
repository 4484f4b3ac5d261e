//! Asymmetrically weighted Hermite spectral discretization.
//!
//! A function of `v` is stored as coefficients `g_n` of the expansion
//! `g(v) = Σ_{n=0}^{M} g_n w(v) p_n(v)` with Gaussian weight of width `v0`.
//! In this representation the weighted inner product is the plain dot
//! product, the micro projector zeroes modes 0..2, and every operator in
//! the kinetic equation is a banded matrix.

use nalgebra::DMatrix;

use super::{random_coeffs, MacroTerms, Transport, VelocitySpace};
use crate::error::Result;
use crate::orthopoly::{BasisFamily, MacroCoefficients};

/// Banded operators on Hermite coefficient vectors of length `M + 1`.
#[derive(Clone, Debug)]
pub struct HermiteOperators {
    modes: usize,
    v0: f64,
    sqrt: Vec<f64>,
}

impl HermiteOperators {
    pub fn new(max_mode: usize, v0: f64) -> Self {
        let modes = max_mode + 1;
        let sqrt = (0..modes + 2).map(|n| (n as f64).sqrt()).collect();
        Self { modes, v0, sqrt }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// `(v g)_n = v0 (√n g_{n-1} + √(n+1) g_{n+1})`, truncated at `M`.
    pub fn vmul(&self, g: &[f64], out: &mut [f64]) {
        let m = self.modes;
        for n in 0..m {
            let lo = if n > 0 { self.sqrt[n] * g[n - 1] } else { 0.0 };
            let hi = if n + 1 < m { self.sqrt[n + 1] * g[n + 1] } else { 0.0 };
            out[n] = self.v0 * (lo + hi);
        }
    }

    /// `(∂v g)_n = -√n g_{n-1} / v0`.
    pub fn dv(&self, g: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        for n in 1..self.modes {
            out[n] = -self.sqrt[n] * g[n - 1] / self.v0;
        }
    }

    /// `(∂v² g)_n = √(n(n-1)) g_{n-2} / v0²`.
    pub fn dv2(&self, g: &[f64], out: &mut [f64]) {
        let s = 1.0 / (self.v0 * self.v0);
        for n in 0..self.modes {
            out[n] = if n >= 2 { self.sqrt[n] * self.sqrt[n - 1] * g[n - 2] * s } else { 0.0 };
        }
    }

    /// `(∂v(v g))_n = -√(n(n-1)) g_{n-2} - n g_n`.
    pub fn dv_vmul(&self, g: &[f64], out: &mut [f64]) {
        for n in 0..self.modes {
            let lo = if n >= 2 { self.sqrt[n] * self.sqrt[n - 1] * g[n - 2] } else { 0.0 };
            out[n] = -lo - n as f64 * g[n];
        }
    }

    /// Dougherty operator `∂v(T ∂v g + (v - u) g)` in coefficient space.
    pub fn collision(&self, g: &[f64], u: f64, temp: f64, out: &mut [f64]) {
        let m = self.modes;
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        let mut c = vec![0.0; m];
        self.dv2(g, &mut a);
        self.dv_vmul(g, &mut b);
        self.dv(g, &mut c);
        for n in 0..m {
            out[n] = temp * a[n] + b[n] - u * c[n];
        }
    }

    /// Hou-Li exponential filter factor for mode `n`.
    pub fn filter_factor(&self, n: usize) -> f64 {
        hou_li(n as f64 / self.modes as f64)
    }
}

/// `σ(s) = 1` for `s ≤ 2/3`, `exp(-36 s^36)` beyond.
pub fn hou_li(s: f64) -> f64 {
    if s <= 2.0 / 3.0 {
        1.0
    } else {
        (-36.0 * s.powi(36)).exp()
    }
}

/// Hermite velocity space implementing [`VelocitySpace`].
#[derive(Clone, Debug)]
pub struct HermiteSpace {
    ops: HermiteOperators,
    family: BasisFamily,
    coeffs: MacroCoefficients,
    terms: MacroTerms,
    filter: bool,
    raster_points: usize,
}

impl HermiteSpace {
    pub fn new(max_mode: usize, v0: f64) -> Result<Self> {
        if max_mode < 4 {
            return Err(crate::Error::Config(format!("Hermite space needs M >= 4, got {max_mode}")));
        }
        let family = BasisFamily::hermite(v0)?;
        let ops = HermiteOperators::new(max_mode, v0);
        let m = ops.modes();
        let unit = |n: usize| {
            let mut e = vec![0.0; m];
            e[n] = 1.0;
            e
        };
        let basis = [unit(0), unit(1), unit(2), unit(3)];
        let apply = |f: &dyn Fn(&[f64], &mut [f64])| {
            std::array::from_fn(|n| {
                let mut out = vec![0.0; m];
                f(&basis[n], &mut out);
                out
            })
        };
        let terms = MacroTerms {
            vmul: apply(&|g, o| ops.vmul(g, o)),
            dv: apply(&|g, o| ops.dv(g, o)),
            dv2: apply(&|g, o| ops.dv2(g, o)),
            dv_vmul: apply(&|g, o| ops.dv_vmul(g, o)),
            basis,
        };
        Ok(Self { coeffs: family.macro_coefficients(), ops, family, terms, filter: true, raster_points: 512 })
    }

    /// Enables or disables the Hou-Li filter applied after each `L` step.
    pub fn with_filter(mut self, on: bool) -> Self {
        self.filter = on;
        self
    }

    pub fn operators(&self) -> &HermiteOperators {
        &self.ops
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    /// Dense matrix of `w(v_i) p_n(v_i)` on the given velocities.
    pub fn eval_matrix(&self, v: &[f64]) -> DMatrix<f64> {
        let m = self.ops.modes();
        let mut out = DMatrix::zeros(v.len(), m);
        for (i, &vi) in v.iter().enumerate() {
            for (n, val) in self.weighted_functions(m - 1, vi).into_iter().enumerate() {
                out[(i, n)] = val;
            }
        }
        out
    }

    /// `w(v) p_n(v)` for `n = 0..=nmax`, computed with scaled Hermite
    /// functions so that large `n` and `|v|` do not overflow.
    fn weighted_functions(&self, nmax: usize, v: f64) -> Vec<f64> {
        // ψ_n = p_n e^{-s²/4}, so w p_n = ψ_n e^{-s²/4} / (v0 √(2π)).
        let s = v / self.ops.v0();
        let damp = (-0.25 * s * s).exp();
        let psi = scaled_functions(nmax, s);
        let c = damp / (self.ops.v0() * (2.0 * std::f64::consts::PI).sqrt());
        psi.into_iter().map(|p| p * c).collect()
    }
}

/// `p_n(s) e^{-s²/4}` for unit-width Hermite, bounded for all `n`.
fn scaled_functions(nmax: usize, s: f64) -> Vec<f64> {
    let mut psi = Vec::with_capacity(nmax + 1);
    psi.push((-0.25 * s * s).exp());
    if nmax >= 1 {
        psi.push(s * psi[0]);
    }
    for n in 1..nmax {
        let nf = n as f64;
        let next = (s * psi[n] - nf.sqrt() * psi[n - 1]) / (nf + 1.0).sqrt();
        psi.push(next);
    }
    psi
}

impl VelocitySpace for HermiteSpace {
    fn len(&self) -> usize {
        self.ops.modes()
    }

    fn weight(&self) -> f64 {
        1.0
    }

    fn coefficients(&self) -> &MacroCoefficients {
        &self.coeffs
    }

    fn macro_terms(&self) -> &MacroTerms {
        &self.terms
    }

    fn project_perp(&self, g: &mut [f64]) {
        g[..3].iter_mut().for_each(|x| *x = 0.0);
    }

    fn boundary_basis(&self) -> Option<[[f64; 2]; 3]> {
        None
    }

    fn vmul(&self, g: &[f64], out: &mut [f64]) {
        self.ops.vmul(g, out);
    }

    fn dv(&self, g: &[f64], _trace: [f64; 2], out: &mut [f64]) {
        self.ops.dv(g, out);
    }

    fn dv2(&self, g: &[f64], _trace: [f64; 2], out: &mut [f64]) {
        self.ops.dv2(g, out);
    }

    fn dv_vmul(&self, g: &[f64], _trace: [f64; 2], out: &mut [f64]) {
        self.ops.dv_vmul(g, out);
    }

    fn transport(&self, l: &DMatrix<f64>, _traces: &[[f64; 2]], op: &Transport<'_>, out: &mut DMatrix<f64>) {
        let (m, r) = l.shape();
        let mut vl = DMatrix::zeros(m, r);
        let mut dl = DMatrix::zeros(m, r);
        let mut d2l = DMatrix::zeros(m, r);
        let mut dvl = DMatrix::zeros(m, r);
        for k in 0..r {
            let col = l.column(k);
            let g = col.as_slice();
            self.ops.vmul(g, vl.column_mut(k).as_mut_slice());
            self.ops.dv(g, dl.column_mut(k).as_mut_slice());
            self.ops.dv2(g, d2l.column_mut(k).as_mut_slice());
            self.ops.dv_vmul(g, dvl.column_mut(k).as_mut_slice());
        }
        out.gemm(-1.0, &vl, &op.vmul.transpose(), 1.0);
        out.gemm(-1.0, &dl, &op.drift.transpose(), 1.0);
        out.gemm(1.0, &d2l, &op.diffusion.transpose(), 1.0);
        if op.beta != 0.0 {
            *out += op.beta * dvl;
        }
    }

    fn filter(&self, g: &mut [f64]) {
        if !self.filter {
            return;
        }
        for (n, x) in g.iter_mut().enumerate() {
            *x *= self.ops.filter_factor(n);
        }
    }

    fn smooth_candidate(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let mut g = vec![0.0; self.len()];
        let top = (self.len() - 3).min(12);
        for (k, c) in random_coeffs(rng, top).into_iter().enumerate() {
            g[3 + k] = c;
        }
        g
    }

    fn represent(&self, h: &dyn Fn(f64) -> f64) -> Vec<f64> {
        // g_n = ∫ p_n h dv = ∫ ψ_n(s) h(v) e^{s²/4} dv, by the trapezoid rule
        // on a range where h has decayed below rounding.
        let v0 = self.ops.v0();
        let m = self.len();
        let (vmax, dv) = (14.0f64.max(14.0 * v0), 2.5e-3 * v0.min(1.0));
        let n = (vmax / dv).ceil() as i64;
        let mut out = vec![0.0; m];
        for i in -n..=n {
            let v = i as f64 * dv;
            let hv = h(v);
            if hv == 0.0 {
                continue;
            }
            let s = v / v0;
            let scale = hv * (0.25 * s * s).exp() * dv;
            for (o, p) in out.iter_mut().zip(scaled_functions(m - 1, s)) {
                *o += p * scale;
            }
        }
        out
    }

    fn raster(&self) -> (Vec<f64>, Option<DMatrix<f64>>) {
        let np = self.raster_points;
        let vm = 8.0 * self.ops.v0();
        let v: Vec<f64> = (0..np).map(|i| -vm + 2.0 * vm * i as f64 / (np - 1) as f64).collect();
        let b = self.eval_matrix(&v);
        (v, Some(b))
    }
}
