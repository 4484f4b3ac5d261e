//! Finite-difference velocity discretization on `[-vmax, vmax]`.
//!
//! Functions are sampled at the `Nv` cell centers. The macro basis is the
//! set of cubic polynomials orthonormalized under the midpoint rule with the
//! constant Legendre weight `1/vmax`, so the discrete moments of the micro
//! part vanish exactly. The polynomial coefficients are kept alongside the
//! samples, which gives exact derivatives and boundary traces of the macro
//! part.
//!
//! The kinetic factor is extended across `±vmax` by two ghost cells using
//! linear extrapolation towards the Dirichlet value `g(±vmax) = -N(±vmax)`.

use nalgebra::DMatrix;

use super::{random_coeffs, MacroTerms, Transport, VelocitySpace};
use crate::error::{Error, Result};
use crate::orthopoly::MacroCoefficients;
use crate::spatial::mc_slope;

/// Cell-centred velocity grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VGrid {
    vmax: f64,
    nv: usize,
    centers: Vec<f64>,
}

impl VGrid {
    pub fn new(vmax: f64, nv: usize) -> Result<Self> {
        if nv < 8 || nv % 2 != 0 {
            return Err(Error::Config(format!("velocity grid needs an even Nv >= 8, got {nv}")));
        }
        if !(vmax.is_finite() && vmax > 0.0) {
            return Err(Error::Config(format!("vmax must be positive, got {vmax}")));
        }
        let dv = 2.0 * vmax / nv as f64;
        let mut centers = vec![0.0; nv];
        // Mirror the upper half so that the grid is exactly symmetric.
        for k in 0..nv / 2 {
            let v = -vmax + (k as f64 + 0.5) * dv;
            centers[k] = v;
            centers[nv - 1 - k] = -v;
        }
        Ok(Self { vmax, nv, centers })
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.vmax / self.nv as f64
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }
}

/// Cubic polynomials in `s = v / vmax`, stored by monomial coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Poly(pub [f64; 4]);

impl Poly {
    pub fn eval(&self, s: f64) -> f64 {
        let c = &self.0;
        ((c[3] * s + c[2]) * s + c[1]) * s + c[0]
    }

    /// Derivative with respect to `s`.
    pub fn deriv(&self) -> Poly {
        let c = &self.0;
        Poly([c[1], 2.0 * c[2], 3.0 * c[3], 0.0])
    }

    fn scaled(&self, a: f64) -> Poly {
        Poly(self.0.map(|x| a * x))
    }

    fn axpy(&self, a: f64, other: &Poly) -> Poly {
        Poly(std::array::from_fn(|i| self.0[i] + a * other.0[i]))
    }
}

/// The discrete macro basis `p̂_0 .. p̂_3` and the coefficients derived from
/// it.
#[derive(Clone, Debug)]
pub struct DiscreteMacroBasis {
    pub polys: [Poly; 4],
    pub coeffs: MacroCoefficients,
}

impl DiscreteMacroBasis {
    pub fn new(grid: &VGrid) -> Self {
        let vmax = grid.vmax();
        let s: Vec<f64> = grid.centers().iter().map(|v| v / vmax).collect();
        // <w q1, w q2>_{w^-1} = (Δv / vmax) Σ q1 q2 under the midpoint rule.
        let h = grid.dv() / vmax;
        let ip = |a: &Poly, b: &Poly| h * s.iter().map(|&x| a.eval(x) * b.eval(x)).sum::<f64>();
        let normalize = |p: Poly| p.scaled(1.0 / ip(&p, &p).sqrt());
        // Orthogonalize within each parity class; cross-parity products
        // vanish on the symmetric grid.
        let p0 = normalize(Poly([1.0, 0.0, 0.0, 0.0]));
        let p1 = normalize(Poly([0.0, 1.0, 0.0, 0.0]));
        let mut q2 = Poly([0.0, 0.0, 1.0, 0.0]);
        q2 = q2.axpy(-ip(&q2, &p0), &p0);
        q2 = q2.axpy(-ip(&q2, &p0), &p0);
        let p2 = normalize(q2);
        let mut q3 = Poly([0.0, 0.0, 0.0, 1.0]);
        q3 = q3.axpy(-ip(&q3, &p1), &p1);
        q3 = q3.axpy(-ip(&q3, &p1), &p1);
        let p3 = normalize(q3);
        let polys = [p0, p1, p2, p3];

        // 1 = c00 p0, v = c11 p1, v²/2 = c20 p0 + c22 p2.
        let c00 = 1.0 / p0.0[0];
        let alpha = p1.0[1];
        let beta = p2.0[2];
        let gamma = p2.0[0];
        let c11 = vmax / alpha;
        let c22 = vmax * vmax / (2.0 * beta);
        let c20 = -c22 * gamma * c00;
        let c = nalgebra::Matrix3::new(c00, 0.0, 0.0, 0.0, c11, 0.0, c20, 0.0, c22);
        // p̂1' = d10 p̂0 and p̂2' = d21 p̂1 in terms of v.
        let d10 = alpha / (vmax * p0.0[0]);
        let d21 = 2.0 * beta / (vmax * alpha);
        // a_n = <w p̂_{n+1}, v w p̂_n>; b_n vanishes by parity.
        let vip = |a: &Poly, b: &Poly| h * vmax * s.iter().map(|&x| x * a.eval(x) * b.eval(x)).sum::<f64>();
        let a = [vip(&p1, &p0), vip(&p2, &p1), vip(&p3, &p2)];
        let coeffs = MacroCoefficients { a, b: [0.0; 3], d10, d20: 0.0, d21, c };
        Self { polys, coeffs }
    }
}

/// Finite-difference velocity space implementing [`VelocitySpace`].
#[derive(Clone, Debug)]
pub struct FdSpace {
    grid: VGrid,
    basis: DiscreteMacroBasis,
    terms: MacroTerms,
    boundary: [[f64; 2]; 3],
}

impl FdSpace {
    pub fn new(vmax: f64, nv: usize) -> Result<Self> {
        let grid = VGrid::new(vmax, nv)?;
        let basis = DiscreteMacroBasis::new(&grid);
        let w = 1.0 / vmax;
        let centers = grid.centers();
        let sample = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { centers.iter().map(|&v| f(v)).collect() };
        let p = basis.polys;
        let dp = p.map(|q| q.deriv());
        let d2p = dp.map(|q| q.deriv());
        let terms = MacroTerms {
            basis: std::array::from_fn(|n| sample(&|v| w * p[n].eval(v / vmax))),
            vmul: std::array::from_fn(|n| sample(&|v| w * v * p[n].eval(v / vmax))),
            dv: std::array::from_fn(|n| sample(&|v| w * dp[n].eval(v / vmax) / vmax)),
            dv2: std::array::from_fn(|n| sample(&|v| w * d2p[n].eval(v / vmax) / (vmax * vmax))),
            dv_vmul: std::array::from_fn(|n| sample(&|v| w * (p[n].eval(v / vmax) + v * dp[n].eval(v / vmax) / vmax))),
        };
        let boundary = std::array::from_fn(|n| [w * p[n].eval(-1.0), w * p[n].eval(1.0)]);
        Ok(Self { grid, basis, terms, boundary })
    }

    pub fn grid(&self) -> &VGrid {
        &self.grid
    }

    pub fn macro_basis(&self) -> &DiscreteMacroBasis {
        &self.basis
    }

    /// `[g_{-2}, g_{-1}, g_0 .. g_{N-1}, g_N, g_{N+1}]` with linear
    /// extrapolation to the boundary values `dirichlet`.
    pub fn populate_ghosts(&self, g: &[f64], dirichlet: [f64; 2], out: &mut [f64]) {
        let n = g.len();
        out[2..n + 2].copy_from_slice(g);
        out[1] = 2.0 * dirichlet[0] - g[0];
        out[0] = 4.0 * dirichlet[0] - 3.0 * g[0];
        out[n + 2] = 2.0 * dirichlet[1] - g[n - 1];
        out[n + 3] = 4.0 * dirichlet[1] - 3.0 * g[n - 1];
    }

    fn with_ghosts(&self, g: &[f64], trace: [f64; 2]) -> Vec<f64> {
        let mut ext = vec![0.0; g.len() + 4];
        self.populate_ghosts(g, trace, &mut ext);
        ext
    }

    /// Conservative upwind update `-∂v(a(v) g)` with MUSCL-MC face states,
    /// for a face speed `a(v) = a0 + a1 v`.
    pub fn advect_muscl(&self, g: &[f64], trace: [f64; 2], a0: f64, a1: f64, out: &mut [f64]) {
        let n = g.len();
        let ext = self.with_ghosts(g, trace);
        let (left, right) = self.face_states(&ext);
        let dv = self.grid.dv();
        let vmax = self.grid.vmax();
        let mut prev = 0.0;
        for f in 0..=n {
            let s = a0 + a1 * (-vmax + f as f64 * dv);
            let flux = s.max(0.0) * left[f] + s.min(0.0) * right[f];
            if f > 0 {
                out[f - 1] = -(flux - prev) / dv;
            }
            prev = flux;
        }
    }

    /// Left and right states at the `N+1` faces from a ghost-extended array.
    fn face_states(&self, ext: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = ext.len() - 4;
        // Cell j lives at ext[j + 2]; slopes for j = -1..=n.
        let slope = |j: isize| {
            let c = (j + 2) as usize;
            mc_slope(ext[c - 1], ext[c], ext[c + 1])
        };
        let mut left = vec![0.0; n + 1];
        let mut right = vec![0.0; n + 1];
        for f in 0..=n {
            let jl = f as isize - 1;
            let jr = f as isize;
            left[f] = ext[(jl + 2) as usize] + 0.5 * slope(jl);
            right[f] = ext[(jr + 2) as usize] - 0.5 * slope(jr);
        }
        (left, right)
    }

    fn ghost_velocity(&self, j: isize) -> f64 {
        -self.grid.vmax() + (j as f64 + 0.5) * self.grid.dv()
    }
}

impl VelocitySpace for FdSpace {
    fn len(&self) -> usize {
        self.grid.nv()
    }

    fn weight(&self) -> f64 {
        self.grid.vmax() * self.grid.dv()
    }

    fn coefficients(&self) -> &MacroCoefficients {
        &self.basis.coeffs
    }

    fn macro_terms(&self) -> &MacroTerms {
        &self.terms
    }

    fn project_perp(&self, g: &mut [f64]) {
        for n in 0..3 {
            let b = &self.terms.basis[n];
            let c = self.inner(b, g);
            g.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }

    fn boundary_basis(&self) -> Option<[[f64; 2]; 3]> {
        Some(self.boundary)
    }

    fn vmul(&self, g: &[f64], out: &mut [f64]) {
        for ((o, x), v) in out.iter_mut().zip(g).zip(self.grid.centers()) {
            *o = v * x;
        }
    }

    fn dv(&self, g: &[f64], trace: [f64; 2], out: &mut [f64]) {
        let ext = self.with_ghosts(g, trace);
        let c = 0.5 / self.grid.dv();
        for j in 0..g.len() {
            out[j] = c * (ext[j + 3] - ext[j + 1]);
        }
    }

    fn dv2(&self, g: &[f64], trace: [f64; 2], out: &mut [f64]) {
        let ext = self.with_ghosts(g, trace);
        let c = 1.0 / self.grid.dv().powi(2);
        for j in 0..g.len() {
            out[j] = c * (ext[j + 3] - 2.0 * ext[j + 2] + ext[j + 1]);
        }
    }

    fn dv_vmul(&self, g: &[f64], trace: [f64; 2], out: &mut [f64]) {
        let ext = self.with_ghosts(g, trace);
        let c = 0.5 / self.grid.dv();
        for j in 0..g.len() {
            let jj = j as isize;
            out[j] = c * (self.ghost_velocity(jj + 1) * ext[j + 3] - self.ghost_velocity(jj - 1) * ext[j + 1]);
        }
    }

    fn transport(&self, l: &DMatrix<f64>, traces: &[[f64; 2]], op: &Transport<'_>, out: &mut DMatrix<f64>) {
        let (n, r) = l.shape();
        let dv = self.grid.dv();
        let vmax = self.grid.vmax();
        let face_v: Vec<f64> = (0..=n).map(|f| -vmax + f as f64 * dv).collect();
        let mut vl = DMatrix::zeros(n, r);
        let mut d2l = DMatrix::zeros(n, r);
        // Upwind differences of left/right face states per column.
        let mut dleft = DMatrix::zeros(n, r);
        let mut dright = DMatrix::zeros(n, r);
        let mut states = Vec::with_capacity(r);
        for k in 0..r {
            let col = l.column(k);
            let g = col.as_slice();
            self.vmul(g, vl.column_mut(k).as_mut_slice());
            self.dv2(g, traces[k], d2l.column_mut(k).as_mut_slice());
            let ext = self.with_ghosts(g, traces[k]);
            let (left, right) = self.face_states(&ext);
            for j in 0..n {
                dleft[(j, k)] = -(left[j + 1] - left[j]) / dv;
                dright[(j, k)] = -(right[j + 1] - right[j]) / dv;
            }
            states.push((left, right));
        }
        out.gemm(-1.0, &vl, &op.vmul.transpose(), 1.0);
        out.gemm(1.0, &d2l, &op.diffusion.transpose(), 1.0);
        for i in 0..r {
            for k in 0..r {
                let a = op.drift[(i, k)];
                if i == k && op.beta != 0.0 {
                    let (left, right) = &states[k];
                    let mut prev = 0.0;
                    for f in 0..=n {
                        let s = a - op.beta * face_v[f];
                        let flux = s.max(0.0) * left[f] + s.min(0.0) * right[f];
                        if f > 0 {
                            out[(f - 1, i)] -= (flux - prev) / dv;
                        }
                        prev = flux;
                    }
                } else if a != 0.0 {
                    let (ap, am) = (a.max(0.0), a.min(0.0));
                    for j in 0..n {
                        out[(j, i)] += ap * dleft[(j, k)] + am * dright[(j, k)];
                    }
                }
            }
        }
    }

    fn smooth_candidate(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        // Gaussian-modulated low-order polynomials; the caller projects out
        // the macro part.
        let c = random_coeffs(rng, 10);
        self.grid
            .centers()
            .iter()
            .map(|&v| {
                let e = (-0.5 * v * v).exp();
                let mut p = 0.0;
                let mut vn = 1.0;
                for ck in &c {
                    p += ck * vn;
                    vn *= v / 2.0;
                }
                p * e
            })
            .collect()
    }

    fn represent(&self, h: &dyn Fn(f64) -> f64) -> Vec<f64> {
        self.grid.centers().iter().map(|&v| h(v)).collect()
    }

    fn raster(&self) -> (Vec<f64>, Option<DMatrix<f64>>) {
        (self.grid.centers().to_vec(), None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity::hermite::HermiteSpace;
    use proptest::prelude::*;

    #[test]
    fn symmetric_grid() {
        let g = VGrid::new(8.0, 64).unwrap();
        let c = g.centers();
        for k in 0..64 {
            assert_eq!(c[k], -c[63 - k]);
        }
        assert!((c[0] + 8.0 - 0.125).abs() < 1e-15);
        assert!(VGrid::new(8.0, 7).is_err());
    }

    #[test]
    fn discrete_basis_orthonormal() {
        let space = FdSpace::new(8.0, 64).unwrap();
        let b = &space.macro_terms().basis;
        for n in 0..4 {
            for m in 0..4 {
                let expect = if n == m { 1.0 } else { 0.0 };
                assert!((space.inner(&b[n], &b[m]) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn discrete_coefficients_reproduce_moments() {
        let space = FdSpace::new(8.0, 64).unwrap();
        let co = space.coefficients();
        let vmax = 8.0;
        let polys = space.macro_basis().polys;
        for &v in &[-7.3, -1.0, 0.25, 5.5] {
            let s = v / vmax;
            let p: Vec<f64> = polys.iter().map(|q| q.eval(s)).collect();
            let phi = [1.0, v, 0.5 * v * v];
            for i in 0..3 {
                let val: f64 = (0..3).map(|j| co.c[(i, j)] * p[j]).sum();
                assert!((val - phi[i]).abs() < 1e-12 * (1.0 + phi[i].abs()));
            }
            let dp1 = polys[1].deriv().eval(s) / vmax;
            let dp2 = polys[2].deriv().eval(s) / vmax;
            assert!((dp1 - co.d10 * p[0]).abs() < 1e-14);
            assert!((dp2 - co.d21 * p[1]).abs() < 1e-14);
        }
        let b = &space.macro_terms().basis;
        let mut vb = vec![0.0; 64];
        for n in 0..3 {
            space.vmul(&b[n], &mut vb);
            assert!(space.inner(&b[n], &vb).abs() < 1e-14);
            assert!((space.inner(&b[n + 1], &vb) - co.a[n]).abs() < 1e-13);
        }
    }

    #[test]
    fn discrete_basis_converges_to_legendre() {
        let fam = crate::orthopoly::BasisFamily::legendre(8.0).unwrap();
        let exact = fam.macro_coefficients();
        let space = FdSpace::new(8.0, 1024).unwrap();
        let co = space.coefficients();
        for n in 0..3 {
            assert!((co.a[n] - exact.a[n]).abs() < 1e-4);
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((co.c[(i, j)] - exact.c[(i, j)]).abs() < 1e-3, "C[{i},{j}]");
            }
        }
    }

    #[test]
    fn ghost_cells() {
        let space = FdSpace::new(4.0, 8).unwrap();
        let g = vec![0.5; 8];
        let mut ext = vec![0.0; 12];
        space.populate_ghosts(&g, [0.5, 0.5], &mut ext);
        assert!(ext.iter().all(|&x| (x - 0.5).abs() < 1e-15));
        let g: Vec<f64> = space.grid().centers().to_vec();
        space.populate_ghosts(&g, [-4.0, 4.0], &mut ext);
        // Linear data is continued exactly.
        assert!((ext[1] - (-4.5)).abs() < 1e-14 && (ext[0] - (-5.5)).abs() < 1e-14);
        assert!((ext[10] - 4.5).abs() < 1e-14 && (ext[11] - 5.5).abs() < 1e-14);
    }

    #[test]
    fn macro_dirichlet_trace_matches_hermite_width_maxwellian() {
        // A Maxwellian macro part nearly vanishes at the truncated boundary
        // when it is represented in the Hermite family.
        let h = HermiteSpace::new(16, 1.0).unwrap();
        let fam = h.family();
        let f = [1.0, 0.2, 0.1];
        let trace = |v: f64| -> f64 { (0..3).map(|n| f[n] * fam.weight(v) * fam.eval_pn(n, v)).sum() };
        let peak = (0..100).map(|i| trace(-3.0 + 0.06 * i as f64).abs()).fold(0.0, f64::max);
        assert!(trace(8.0).abs() <= 1e-13 * peak);
        assert!(trace(-8.0).abs() <= 1e-13 * peak);
    }

    #[test]
    fn centered_operators_interior() {
        let space = FdSpace::new(4.0, 40).unwrap();
        let v = space.grid().centers().to_vec();
        let g: Vec<f64> = v.iter().map(|x| x * x).collect();
        let mut out = vec![0.0; 40];
        space.dv2(&g, [16.0, 16.0], &mut out);
        for j in 2..38 {
            assert!((out[j] - 2.0).abs() < 1e-10);
        }
        space.dv(&g, [16.0, 16.0], &mut out);
        for j in 2..38 {
            assert!((out[j] - 2.0 * v[j]).abs() < 1e-11);
        }
        // ∂v(v · v) = 2v is reproduced exactly by the centered difference.
        space.dv_vmul(&v, [-4.0, 4.0], &mut out);
        for j in 2..38 {
            assert!((out[j] - 2.0 * v[j]).abs() < 1e-11);
        }
    }

    #[test]
    fn muscl_advection_conserves_with_zero_boundary_flux() {
        let space = FdSpace::new(6.0, 60).unwrap();
        let g: Vec<f64> = space.grid().centers().iter().map(|v| (-v * v).exp()).collect();
        let mut out = vec![0.0; 60];
        space.advect_muscl(&g, [0.0, 0.0], 0.7, -0.3, &mut out);
        let total: f64 = out.iter().sum();
        // Boundary faces carry the trace and a tiny gaussian tail.
        assert!(total.abs() < 1e-10);
    }

    #[test]
    fn transport_with_constant_drift_matches_muscl() {
        let space = FdSpace::new(5.0, 32).unwrap();
        let v = space.grid().centers().to_vec();
        let l = DMatrix::from_fn(32, 2, |j, k| (-(v[j] - 0.3 * k as f64).powi(2)).exp());
        let traces = [[0.01, -0.02], [0.0, 0.03]];
        let drift = DMatrix::from_row_slice(2, 2, &[0.4, -0.2, 0.1, -0.6]);
        let zero = DMatrix::zeros(2, 2);
        let op = Transport { vmul: &zero, drift: &drift, beta: 0.5, diffusion: &zero };
        let mut out = DMatrix::zeros(32, 2);
        space.transport(&l, &traces, &op, &mut out);
        for i in 0..2 {
            let mut expect = vec![0.0; 32];
            let mut tmp = vec![0.0; 32];
            for k in 0..2 {
                let a1 = if i == k { -0.5 } else { 0.0 };
                space.advect_muscl(l.column(k).as_slice(), traces[k], drift[(i, k)], a1, &mut tmp);
                expect.iter_mut().zip(&tmp).for_each(|(e, t)| *e += t);
            }
            for j in 0..32 {
                assert!((out[(j, i)] - expect[j]).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn projection_properties(g in prop::collection::vec(-1.0f64..1.0, 16)) {
            let space = FdSpace::new(6.0, 16).unwrap();
            let mut p = g.clone();
            space.project_perp(&mut p);
            for n in 0..3 {
                prop_assert!(space.inner(&p, &space.macro_terms().basis[n]).abs() < 1e-14);
            }
            let mut pp = p.clone();
            space.project_perp(&mut pp);
            for k in 0..16 {
                prop_assert!((p[k] - pp[k]).abs() < 1e-14);
            }
        }

        #[test]
        fn centered_ops_are_affine_in_trace(g in prop::collection::vec(-1.0f64..1.0, 16), t0 in -1.0f64..1.0, t1 in -1.0f64..1.0) {
            let space = FdSpace::new(3.0, 16).unwrap();
            let mut full = vec![0.0; 16];
            let mut zero = vec![0.0; 16];
            let mut lift0 = vec![0.0; 16];
            let mut lift1 = vec![0.0; 16];
            let z = vec![0.0; 16];
            space.dv2(&g, [t0, t1], &mut full);
            space.dv2(&g, [0.0, 0.0], &mut zero);
            space.dv2(&z, [1.0, 0.0], &mut lift0);
            space.dv2(&z, [0.0, 1.0], &mut lift1);
            for j in 0..16 {
                prop_assert!((full[j] - zero[j] - t0 * lift0[j] - t1 * lift1[j]).abs() < 1e-10);
            }
        }
    }
}
