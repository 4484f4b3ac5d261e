//! Time integrators coupling the macro moments, the electric field and the
//! low-rank micro part.
//!
//! The kinetic right-hand side of `g` is
//!
//! `D[E, N, g] = -v ∂x(N + g) - E ∂v(N + g) + ν ∂v(T ∂v(N + g) + (v - u)(N + g))`,
//!
//! projected onto the micro space. The projector-splitting substeps evolve
//! `K = X S` with `⟨V_j, D⟩`, `S` backward with `-⟨X_i V_j, D⟩` and
//! `L = V S^T` with `P⊥ ⟨X_i, D⟩_x`. The `v ∂x` coupling between `f0, f1,
//! f2` and `K` is discretized as one symmetric hyperbolic system with an
//! upwind flux; the macro rows of that flux drive the moment update, which
//! makes charge and (with the time-centred field) energy conservation exact
//! at the discrete level.

pub mod projections;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowrank::{augmented_qr, qr_weighted, CompletionPool, LowRankState};
use crate::orthopoly::MacroCoefficients;
use crate::spatial::{divergence, Reconstruction, Rows, XGrid};
use crate::velocity::{Transport, VelocitySpace};
pub use projections::{MacroContext, VProjections, XProjections};

/// Macro coefficients `f0, f1, f2` on the spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentField {
    pub f: [Vec<f64>; 3],
}

impl MomentField {
    pub fn zeros(nx: usize) -> Self {
        Self { f: std::array::from_fn(|_| vec![0.0; nx]) }
    }

    pub fn nx(&self) -> usize {
        self.f[0].len()
    }

    pub fn at(&self, i: usize) -> [f64; 3] {
        [self.f[0][i], self.f[1][i], self.f[2][i]]
    }

    pub fn density(&self, co: &MacroCoefficients) -> Vec<f64> {
        (0..self.nx()).map(|i| co.density(self.at(i))).collect()
    }

    pub fn current(&self, co: &MacroCoefficients) -> Vec<f64> {
        (0..self.nx()).map(|i| co.current(self.at(i))).collect()
    }

    pub fn kinetic(&self, co: &MacroCoefficients) -> Vec<f64> {
        (0..self.nx()).map(|i| co.kinetic(self.at(i))).collect()
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &MomentField) -> MomentField {
        MomentField {
            f: std::array::from_fn(|n| self.f[n].iter().zip(&other.f[n]).map(|(x, y)| x + a * y).collect()),
        }
    }

    fn is_finite(&self) -> bool {
        self.f.iter().all(|c| c.iter().all(|x| x.is_finite()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldSolver {
    /// Poisson solve from the charge density every step.
    Gauss,
    /// Forward integration of `∂t E = -J` with a time-centred field.
    Ampere,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

/// Time integration used inside a kinetic substep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Ssprk2,
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub u: MomentField,
    pub e: Vec<f64>,
    pub g: LowRankState,
    pub t: f64,
}

/// Data of one completed step needed to check the local balance laws.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub dt: f64,
    /// Field used in the source terms of the macro update.
    pub e_star: Vec<f64>,
    /// Macro fluxes at faces `i+1/2` (`nx × 3`) used in the final update.
    pub faces: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverParams {
    pub nu: f64,
    pub rho0: f64,
    pub recon: Reconstruction,
    pub field: FieldSolver,
    pub order: Order,
}

/// Discretization and parameters shared by all steps of a run.
pub struct Solver {
    grid: XGrid,
    space: Box<dyn VelocitySpace>,
    params: SolverParams,
    pool: CompletionPool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flux {
    Upwind,
    Centered,
}

impl Solver {
    pub fn new(grid: XGrid, space: Box<dyn VelocitySpace>, params: SolverParams, rank: usize, seed: u64) -> Result<Self> {
        if params.order == Order::Second && params.field == FieldSolver::Gauss {
            return Err(Error::Config("the second-order integrator requires the Ampère field solve".into()));
        }
        if rank == 0 || rank + 3 > space.len() {
            return Err(Error::Config(format!("rank {rank} incompatible with {} velocity unknowns", space.len())));
        }
        if !(params.nu >= 0.0) {
            return Err(Error::Config(format!("collision frequency must be nonnegative, got {}", params.nu)));
        }
        let pool = CompletionPool::new(grid.nx(), space.as_ref(), rank, seed);
        Ok(Self { grid, space, params, pool })
    }

    pub fn grid(&self) -> &XGrid {
        &self.grid
    }

    pub fn space(&self) -> &dyn VelocitySpace {
        self.space.as_ref()
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn pool(&self) -> &CompletionPool {
        &self.pool
    }

    pub fn coefficients(&self) -> &MacroCoefficients {
        self.space.coefficients()
    }

    /// `E = -∂x φ` with `-Δφ = ρ - ρ0`.
    pub fn gauss_field(&self, u: &MomentField) -> Vec<f64> {
        let rho = u.density(self.coefficients());
        self.grid.poisson_solve(&rho, self.params.rho0).1
    }

    /// `(E^{n+1}, E*)` from a forward Ampère step with current of `u`.
    pub fn ampere_field(&self, e: &[f64], u: &MomentField, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let j = u.current(self.coefficients());
        let e1: Vec<f64> = e.iter().zip(&j).map(|(e, j)| e - dt * j).collect();
        let es = e.iter().zip(&e1).map(|(a, b)| 0.5 * (a + b)).collect();
        (e1, es)
    }

    pub fn context(&self, u: &MomentField, e: &[f64]) -> Result<MacroContext> {
        MacroContext::new(&self.grid, self.space(), u, e, self.params.nu > 0.0)
    }

    pub fn v_projections(&self, v: &DMatrix<f64>) -> Result<VProjections> {
        VProjections::new(self.space(), v)
    }

    /// `f3 = Σ X_i S_ij <V_j, w p3>`.
    pub fn third_moment(&self, g: &LowRankState) -> Vec<f64> {
        let q = DMatrix::from_fn(g.v.ncols(), 1, |j, _| {
            self.space.inner(g.v.column(j).as_slice(), &self.space.macro_terms().basis[3])
        });
        (&g.x * &g.s * q).iter().copied().collect()
    }

    fn assemble(u: &MomentField, k: &DMatrix<f64>) -> DMatrix<f64> {
        let (nx, r) = k.shape();
        DMatrix::from_fn(nx, r + 3, |i, c| if c < 3 { u.f[c][i] } else { k[(i, c - 3)] })
    }

    /// Right-hand side of the moment equations and the macro face fluxes.
    pub fn macro_rhs(&self, u: &MomentField, k: &DMatrix<f64>, vp: &VProjections, e: &[f64]) -> (MomentField, DMatrix<f64>) {
        let w = Self::assemble(u, k);
        let faces = vp.sys.face_fluxes(&w, self.params.recon, Rows::Macro);
        let div = divergence(&faces, self.grid.dx());
        let co = self.coefficients();
        let mut rhs = MomentField::zeros(u.nx());
        for i in 0..u.nx() {
            for n in 0..3 {
                rhs.f[n][i] = -div[(i, n)];
            }
            rhs.f[1][i] += e[i] * co.d10 * u.f[0][i];
            rhs.f[2][i] += e[i] * (co.d20 * u.f[0][i] + co.d21 * u.f[1][i]);
        }
        (rhs, faces)
    }

    /// `⟨V_j, D[E, N, Σ_l K_l V_l]⟩` for all `j`. `tau` are the boundary
    /// values of `g` at `±vmax` for truncated velocity domains.
    fn kinetic_rhs(&self, ctx: &MacroContext, k: &DMatrix<f64>, vp: &VProjections, tau: Option<&[Vec<f64>; 2]>, flux: Flux) -> DMatrix<f64> {
        let (nx, r) = k.shape();
        let nu = self.params.nu;
        let mut out = match flux {
            Flux::Upwind => {
                let w = Self::assemble(&MomentField { f: ctx.f.clone() }, k);
                -vp.sys.flux_divergence(&w, self.grid.dx(), self.params.recon, Rows::Kinetic)
            }
            Flux::Centered => {
                let mut dk = DMatrix::zeros(nx, r);
                for l in 0..r {
                    self.grid.centered_dx(k.column(l).as_slice(), dk.column_mut(l).as_mut_slice());
                }
                let mut o = -(dk * &vp.a);
                for i in 0..nx {
                    for j in 0..r {
                        o[(i, j)] -= (0..3).map(|n| ctx.dfdx[n][i] * vp.vm[n][j]).sum::<f64>();
                    }
                }
                o
            }
        };
        let kp1 = k * vp.p1.transpose();
        let kp2 = k * vp.p2.transpose();
        let kpg = k * vp.pg.transpose();
        for i in 0..nx {
            let alpha = -ctx.e[i] - nu * ctx.u[i];
            let beta = nu * ctx.temp[i];
            let f = [ctx.f[0][i], ctx.f[1][i], ctx.f[2][i]];
            for j in 0..r {
                let mut acc = alpha * kp1[(i, j)] + beta * kp2[(i, j)] + nu * kpg[(i, j)];
                for n in 0..3 {
                    acc += f[n] * (alpha * vp.d[n][j] + beta * vp.dd[n][j] + nu * vp.dvv[n][j]);
                }
                if let (Some(tau), Some(l)) = (tau, vp.lifts.as_ref()) {
                    for b in 0..2 {
                        acc += tau[b][i] * (alpha * l[0][(j, b)] + beta * l[1][(j, b)] + nu * l[2][(j, b)]);
                    }
                }
                out[(i, j)] += acc;
            }
        }
        out
    }

    /// Boundary values of `g` represented in the span of `x`.
    fn projected_traces(&self, ctx: &MacroContext, x: &DMatrix<f64>) -> Option<[Vec<f64>; 2]> {
        let tr = ctx.traces.as_ref()?;
        let dx = self.grid.dx();
        Some(std::array::from_fn(|b| {
            let c = x.tr_mul(&nalgebra::DVector::from_column_slice(&tr[b])) * dx;
            (x * c).iter().copied().collect()
        }))
    }

    fn integrate<F>(q0: &DMatrix<f64>, dt: f64, scheme: Scheme, rhs: F) -> DMatrix<f64>
    where
        F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
    {
        let q1 = q0 + rhs(q0) * dt;
        match scheme {
            Scheme::Euler => q1,
            Scheme::Ssprk2 => {
                let q2 = &q1 + rhs(&q1) * dt;
                (q0 + q2) * 0.5
            }
        }
    }

    /// K step: evolves `K = x0 s0` with basis `V` fixed and returns the QR
    /// factors `(X, S')`.
    pub fn k_step(&self, ctx: &MacroContext, x0: &DMatrix<f64>, s0: &DMatrix<f64>, vp: &VProjections, dt: f64, scheme: Scheme) -> (DMatrix<f64>, DMatrix<f64>) {
        let tau = self.projected_traces(ctx, x0);
        let k0 = x0 * s0;
        let k1 = Self::integrate(&k0, dt, scheme, |k| self.kinetic_rhs(ctx, k, vp, tau.as_ref(), Flux::Upwind));
        qr_weighted(&k1, self.grid.dx(), &self.pool.x)
    }

    /// S step, backward in time: `S' = -⟨X_i V_j, D[X S V^T]⟩`.
    pub fn s_step(&self, ctx: &MacroContext, x: &DMatrix<f64>, s0: &DMatrix<f64>, vp: &VProjections, dt: f64, scheme: Scheme) -> DMatrix<f64> {
        let tau = self.projected_traces(ctx, x);
        let dx = self.grid.dx();
        Self::integrate(s0, dt, scheme, |s| {
            let k = x * s;
            -(x.tr_mul(&self.kinetic_rhs(ctx, &k, vp, tau.as_ref(), Flux::Centered)) * dx)
        })
    }

    /// L step: evolves `L = V S^T` with `X` fixed and returns `(V, S)` from
    /// the augmented QR of the filtered result.
    pub fn l_step(&self, ctx: &MacroContext, x: &DMatrix<f64>, s0: &DMatrix<f64>, v0: &DMatrix<f64>, dt: f64, scheme: Scheme) -> (DMatrix<f64>, DMatrix<f64>) {
        let space = self.space();
        let terms = space.macro_terms();
        let xp = XProjections::new(&self.grid, ctx, x);
        let nu = self.params.nu;
        let (nv, r) = (v0.nrows(), x.ncols());

        // Macro source, fixed during the step.
        let mut z = DMatrix::zeros(nv, r);
        for i in 0..r {
            let mut col = z.column_mut(i);
            for n in 0..3 {
                let cv = -xp.dfdx[n][i];
                let cd = -xp.ef[n][i] - nu * xp.uf[n][i];
                let cdd = nu * xp.tf[n][i];
                let cg = nu * xp.ff[n][i];
                for k in 0..nv {
                    col[k] += cv * terms.vmul[n][k] + cd * terms.dv[n][k] + cdd * terms.dv2[n][k] + cg * terms.dv_vmul[n][k];
                }
            }
        }
        let drift = &xp.fe + &xp.qu * nu;
        let diffusion = &xp.nt * nu;
        let op = Transport { vmul: &xp.b, drift: &drift, beta: nu, diffusion: &diffusion };
        let traces: Vec<[f64; 2]> = match &xp.traces {
            Some(t) => (0..r).map(|k| [t[(k, 0)], t[(k, 1)]]).collect(),
            None => vec![[0.0; 2]; r],
        };
        let l0 = v0 * s0.transpose();
        let mut l1 = Self::integrate(&l0, dt, scheme, |l| {
            let mut out = z.clone();
            space.transport(l, &traces, &op, &mut out);
            for i in 0..r {
                space.project_perp(out.column_mut(i).as_mut_slice());
            }
            out
        });
        for i in 0..r {
            space.filter(l1.column_mut(i).as_mut_slice());
        }
        let (v, rr) = augmented_qr(&l1, space, &self.pool.v);
        (v, rr.transpose())
    }

    /// Advances `state` by `dt` with the configured order.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<(SimState, StepReport)> {
        let out = match self.params.order {
            Order::First => self.step_first_order(state, dt)?,
            Order::Second => self.step_second_order(state, dt)?,
        };
        let (next, _) = &out;
        let finite = next.u.is_finite()
            && next.e.iter().all(|x| x.is_finite())
            && next.g.s.iter().all(|x| x.is_finite())
            && next.g.x.iter().all(|x| x.is_finite())
            && next.g.v.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite { t: next.t });
        }
        Ok(out)
    }

    /// Forward Euler macro step followed by one K, S, L sweep.
    pub fn step_first_order(&self, st: &SimState, dt: f64) -> Result<(SimState, StepReport)> {
        let (e_amp, e_star) = match self.params.field {
            FieldSolver::Gauss => (None, st.e.clone()),
            FieldSolver::Ampere => {
                let (e1, es) = self.ampere_field(&st.e, &st.u, dt);
                (Some(e1), es)
            }
        };
        let vp = self.v_projections(&st.g.v)?;
        let k0 = &st.g.x * &st.g.s;
        let (rhs, faces) = self.macro_rhs(&st.u, &k0, &vp, &e_star);
        let u1 = st.u.axpy(dt, &rhs);

        let ctx = self.context(&st.u, &e_star)?;
        let (x1, s1) = self.k_step(&ctx, &st.g.x, &st.g.s, &vp, dt, Scheme::Euler);
        let s2 = self.s_step(&ctx, &x1, &s1, &vp, dt, Scheme::Euler);
        let (v3, s3) = self.l_step(&ctx, &x1, &s2, &st.g.v, dt, Scheme::Euler);

        let e1 = match e_amp {
            Some(e) => e,
            None => self.gauss_field(&u1),
        };
        let next = SimState { u: u1, e: e1, g: LowRankState { x: x1, s: s3, v: v3 }, t: st.t + dt };
        Ok((next, StepReport { dt, e_star, faces }))
    }

    /// Strang-split step: macro half step, Ampère step, K S L L S K with
    /// half steps, and the full macro step from the half-level fluxes.
    pub fn step_second_order(&self, st: &SimState, dt: f64) -> Result<(SimState, StepReport)> {
        let h = 0.5 * dt;
        let vp_n = self.v_projections(&st.g.v)?;
        let k_n = &st.g.x * &st.g.s;
        let (rhs0, _) = self.macro_rhs(&st.u, &k_n, &vp_n, &st.e);
        let u_half = st.u.axpy(h, &rhs0);
        let (e1, e_half) = self.ampere_field(&st.e, &u_half, dt);

        let ctx = self.context(&u_half, &e_half)?;
        let (x, s) = self.k_step(&ctx, &st.g.x, &st.g.s, &vp_n, h, Scheme::Ssprk2);
        let s = self.s_step(&ctx, &x, &s, &vp_n, h, Scheme::Ssprk2);
        let (v, s) = self.l_step(&ctx, &x, &s, &st.g.v, h, Scheme::Ssprk2);
        let g_half = LowRankState { x: x.clone(), s: s.clone(), v: v.clone() };
        let (v, s) = self.l_step(&ctx, &x, &s, &v, h, Scheme::Ssprk2);
        let vp = self.v_projections(&v)?;
        let s = self.s_step(&ctx, &x, &s, &vp, h, Scheme::Ssprk2);
        let (x, s) = self.k_step(&ctx, &x, &s, &vp, h, Scheme::Ssprk2);

        let vp_half = self.v_projections(&g_half.v)?;
        let k_half = &g_half.x * &g_half.s;
        let (rhs1, faces) = self.macro_rhs(&u_half, &k_half, &vp_half, &e_half);
        let u1 = st.u.axpy(dt, &rhs1);
        let next = SimState { u: u1, e: e1, g: LowRankState { x, s, v }, t: st.t + dt };
        Ok((next, StepReport { dt, e_star: e_half, faces }))
    }
}
