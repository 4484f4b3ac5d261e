//! Quantities frozen during a K, S or L substep: the macro context and the
//! Galerkin projections of the velocity and spatial operators onto the
//! current low-rank bases.

use nalgebra::{DMatrix, DVector};

use super::MomentField;
use crate::error::{Error, Result};
use crate::spatial::{HyperbolicSystem, XGrid};
use crate::velocity::VelocitySpace;

/// Macro moments and electric field at the level used by the kinetic
/// substeps, with derived per-point quantities.
#[derive(Clone, Debug)]
pub struct MacroContext {
    pub f: [Vec<f64>; 3],
    pub e: Vec<f64>,
    /// Bulk velocity, zero when collisions are off.
    pub u: Vec<f64>,
    /// Temperature, zero when collisions are off.
    pub temp: Vec<f64>,
    /// Centered `∂x f_n`.
    pub dfdx: [Vec<f64>; 3],
    /// `-N(x, -vmax)` and `-N(x, vmax)` for truncated velocity domains.
    pub traces: Option<[Vec<f64>; 2]>,
}

impl MacroContext {
    pub fn new(grid: &XGrid, space: &dyn VelocitySpace, m: &MomentField, e: &[f64], collisions: bool) -> Result<Self> {
        let nx = grid.nx();
        let mut u = vec![0.0; nx];
        let mut temp = vec![0.0; nx];
        if collisions {
            let co = space.coefficients();
            for i in 0..nx {
                let p = co.primitive(m.at(i)).map_err(|err| match err {
                    Error::DegenerateDensity { rho, .. } => Error::DegenerateDensity { index: i, rho },
                    other => other,
                })?;
                u[i] = p.u;
                temp[i] = p.temp;
            }
        }
        let dfdx = std::array::from_fn(|n| {
            let mut d = vec![0.0; nx];
            grid.centered_dx(&m.f[n], &mut d);
            d
        });
        let traces = space.boundary_basis().map(|bb| {
            std::array::from_fn(|b| (0..nx).map(|i| -(0..3).map(|n| m.f[n][i] * bb[n][b]).sum::<f64>()).collect())
        });
        Ok(Self { f: m.f.clone(), e: e.to_vec(), u, temp, dfdx, traces })
    }
}

/// Projections of velocity operators onto the basis `V` (`len × r`).
#[derive(Clone, Debug)]
pub struct VProjections {
    /// `<V_j, w p3>`.
    pub q: Vec<f64>,
    /// `<V_j, v V_l>`.
    pub a: DMatrix<f64>,
    /// `<V_j, v w p_n>`.
    pub vm: [DVector<f64>; 3],
    /// `<V_j, ∂v(w p_n)>`.
    pub d: [DVector<f64>; 3],
    /// `<V_j, ∂v²(w p_n)>`.
    pub dd: [DVector<f64>; 3],
    /// `<V_j, ∂v(v w p_n)>`.
    pub dvv: [DVector<f64>; 3],
    /// `<V_j, ∂v V_l>` with homogeneous boundary data.
    pub p1: DMatrix<f64>,
    /// `<V_j, ∂v² V_l>`.
    pub p2: DMatrix<f64>,
    /// `<V_j, ∂v(v V_l)>`.
    pub pg: DMatrix<f64>,
    /// Boundary lifts `<V_j, op(0; e_b)>` for `op = ∂v, ∂v², ∂v(v ·)`
    /// (`r × 2` each).
    pub lifts: Option<[DMatrix<f64>; 3]>,
    pub sys: HyperbolicSystem,
}

impl VProjections {
    pub fn new(space: &dyn VelocitySpace, v: &DMatrix<f64>) -> Result<Self> {
        let (nv, r) = v.shape();
        let w = space.weight();
        let terms = space.macro_terms();
        let proj = |h: &[f64]| -> DVector<f64> {
            let hv = DVector::from_column_slice(h);
            v.tr_mul(&hv) * w
        };
        let q: Vec<f64> = proj(&terms.basis[3]).iter().copied().collect();
        let vm = std::array::from_fn(|n| proj(&terms.vmul[n]));
        let d = std::array::from_fn(|n| proj(&terms.dv[n]));
        let dd = std::array::from_fn(|n| proj(&terms.dv2[n]));
        let dvv = std::array::from_fn(|n| proj(&terms.dv_vmul[n]));

        let mut vv = DMatrix::zeros(nv, r);
        let mut d1 = DMatrix::zeros(nv, r);
        let mut d2 = DMatrix::zeros(nv, r);
        let mut dg = DMatrix::zeros(nv, r);
        for l in 0..r {
            let col = v.column(l);
            let g = col.as_slice();
            space.vmul(g, vv.column_mut(l).as_mut_slice());
            space.dv(g, [0.0, 0.0], d1.column_mut(l).as_mut_slice());
            space.dv2(g, [0.0, 0.0], d2.column_mut(l).as_mut_slice());
            space.dv_vmul(g, [0.0, 0.0], dg.column_mut(l).as_mut_slice());
        }
        let a = v.tr_mul(&vv) * w;
        let a = (&a + a.transpose()) * 0.5;
        let p1 = v.tr_mul(&d1) * w;
        let p2 = v.tr_mul(&d2) * w;
        let pg = v.tr_mul(&dg) * w;

        let lifts = space.boundary_basis().map(|_| {
            let zero = vec![0.0; nv];
            let mut ops: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(nv, 2));
            for b in 0..2 {
                let mut t = [0.0; 2];
                t[b] = 1.0;
                space.dv(&zero, t, ops[0].column_mut(b).as_mut_slice());
                space.dv2(&zero, t, ops[1].column_mut(b).as_mut_slice());
                space.dv_vmul(&zero, t, ops[2].column_mut(b).as_mut_slice());
            }
            ops.map(|m| v.tr_mul(&m) * w)
        });
        let sys = HyperbolicSystem::new(space.coefficients(), &q, &a)?;
        Ok(Self { q, a, vm, d, dd, dvv, p1, p2, pg, lifts, sys })
    }
}

/// Projections of spatial quantities onto the basis `X` (`nx × r`).
#[derive(Clone, Debug)]
pub struct XProjections {
    /// `<X_i, ∂x f_n>`.
    pub dfdx: [DVector<f64>; 3],
    /// `<X_i, E f_n>`.
    pub ef: [DVector<f64>; 3],
    /// `<X_i, T f_n>`.
    pub tf: [DVector<f64>; 3],
    /// `<X_i, f_n>`.
    pub ff: [DVector<f64>; 3],
    /// `<X_i, u f_n>`.
    pub uf: [DVector<f64>; 3],
    /// `<X_i, ∂x X_k>`.
    pub b: DMatrix<f64>,
    /// `<X_i, E X_k>`.
    pub fe: DMatrix<f64>,
    /// `<X_i, T X_k>`.
    pub nt: DMatrix<f64>,
    /// `<X_i, u X_k>`.
    pub qu: DMatrix<f64>,
    /// `<X_k, -N(·, v_b)>` (`r × 2`).
    pub traces: Option<DMatrix<f64>>,
}

impl XProjections {
    pub fn new(grid: &XGrid, ctx: &MacroContext, x: &DMatrix<f64>) -> Self {
        let (nx, r) = x.shape();
        let dx = grid.dx();
        let proj = |h: &dyn Fn(usize) -> f64| -> DVector<f64> {
            let hv = DVector::from_fn(nx, |i, _| h(i));
            x.tr_mul(&hv) * dx
        };
        let dfdx = std::array::from_fn(|n| proj(&|i| ctx.dfdx[n][i]));
        let ef = std::array::from_fn(|n| proj(&|i| ctx.e[i] * ctx.f[n][i]));
        let tf = std::array::from_fn(|n| proj(&|i| ctx.temp[i] * ctx.f[n][i]));
        let ff = std::array::from_fn(|n| proj(&|i| ctx.f[n][i]));
        let uf = std::array::from_fn(|n| proj(&|i| ctx.u[i] * ctx.f[n][i]));
        let mut dxx = DMatrix::zeros(nx, r);
        for k in 0..r {
            grid.centered_dx(x.column(k).as_slice(), dxx.column_mut(k).as_mut_slice());
        }
        let b = x.tr_mul(&dxx) * dx;
        let weighted = |h: &[f64]| -> DMatrix<f64> {
            let hx = DMatrix::from_fn(nx, r, |i, k| h[i] * x[(i, k)]);
            x.tr_mul(&hx) * dx
        };
        let fe = weighted(&ctx.e);
        let nt = weighted(&ctx.temp);
        let qu = weighted(&ctx.u);
        let traces = ctx.traces.as_ref().map(|tr| {
            DMatrix::from_fn(r, 2, |k, b| dx * (0..nx).map(|i| x[(i, k)] * tr[b][i]).sum::<f64>())
        });
        Self { dfdx, ef, tf, ff, uf, b, fe, nt, qu, traces }
    }
}
