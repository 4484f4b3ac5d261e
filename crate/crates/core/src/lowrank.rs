//! Rank-`r` factorization `g = X S V^T` of the micro part and the
//! orthogonalization routines used by the projector-splitting integrator.
//!
//! `X` has orthonormal columns under `Δx Σ_i`, `V` has orthonormal columns
//! under the velocity space inner product and is orthogonal to the macro
//! basis `w p0, w p1, w p2`.
//!
//! When a factor loses rank, the orthonormal basis is completed with
//! vectors taken in a fixed order from a seeded pool of smooth functions.
//! The completion therefore does not depend on the history of the run.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::velocity::VelocitySpace;

/// Columns whose residual norm falls below this fraction of the largest
/// input column norm are treated as rank-deficient.
pub const DEFICIENCY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LowRankState {
    pub x: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl LowRankState {
    pub fn rank(&self) -> usize {
        self.s.nrows()
    }

    /// Dense `X S V^T` (`nx × len(v)`).
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.x * &self.s * self.v.transpose()
    }

    /// `max |X^T X Δx - I|`.
    pub fn x_defect(&self, dx: f64) -> f64 {
        let g = self.x.transpose() * &self.x * dx;
        (g - DMatrix::identity(self.rank(), self.rank())).amax()
    }

    /// `max |<V_i, V_j> - δ_ij|`.
    pub fn v_defect(&self, space: &dyn VelocitySpace) -> f64 {
        let g = self.v.transpose() * &self.v * space.weight();
        (g - DMatrix::identity(self.rank(), self.rank())).amax()
    }
}

/// Smooth completion vectors for `X` and `V`, generated once from a seed.
#[derive(Clone, Debug)]
pub struct CompletionPool {
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl CompletionPool {
    pub fn new(nx: usize, space: &dyn VelocitySpace, rank: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = 2 * rank + 6;
        let modes = (rank + 4).min(nx / 2 - 1);
        let x = (0..count)
            .map(|_| {
                let c = crate::velocity::random_coeffs(&mut rng, 2 * modes + 1);
                (0..nx)
                    .map(|i| {
                        let th = 2.0 * std::f64::consts::PI * i as f64 / nx as f64;
                        let mut s = c[0];
                        for m in 1..=modes {
                            let mf = m as f64;
                            s += c[2 * m - 1] * (mf * th).cos() + c[2 * m] * (mf * th).sin();
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let v = (0..count).map(|_| space.smooth_candidate(&mut rng)).collect();
        Self { x, v }
    }
}

/// Modified Gram-Schmidt (two passes) under `weight * dot`, with
/// deterministic completion of deficient columns. Returns `(Q, R)` with
/// `A = Q R` up to the dropped sub-tolerance residuals.
///
/// `pre` is applied to every column and candidate before orthogonalization;
/// it is used to remove the macro part.
pub fn orthonormalize(
    a: &DMatrix<f64>,
    weight: f64,
    pre: &dyn Fn(&mut [f64]),
    pool: &[Vec<f64>],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, r) = a.shape();
    let ip = |x: &[f64], y: &[f64]| weight * x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let mut q = DMatrix::zeros(n, r);
    let mut rr = DMatrix::zeros(r, r);
    let mut cols: Vec<Vec<f64>> = (0..r)
        .map(|k| {
            let mut c = a.column(k).iter().copied().collect::<Vec<_>>();
            pre(&mut c);
            c
        })
        .collect();
    let max_norm = cols.iter().map(|c| ip(c, c).sqrt()).fold(0.0, f64::max);
    let tol = DEFICIENCY_TOL * max_norm;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(r);
    for k in 0..r {
        let c = &mut cols[k];
        for _ in 0..2 {
            for (j, b) in basis.iter().enumerate() {
                let p = ip(b, c);
                rr[(j, k)] += p;
                c.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let nrm = ip(c, c).sqrt();
        let qk = if nrm > tol && nrm > 0.0 {
            rr[(k, k)] = nrm;
            c.iter().map(|x| x / nrm).collect()
        } else {
            let e = complete(&basis, weight, pre, pool, n);
            rr[(k, k)] = ip(&e, c);
            e
        };
        q.column_mut(k).copy_from_slice(&qk);
        basis.push(qk);
    }
    (q, rr)
}

fn complete(basis: &[Vec<f64>], weight: f64, pre: &dyn Fn(&mut [f64]), pool: &[Vec<f64>], n: usize) -> Vec<f64> {
    let ip = |x: &[f64], y: &[f64]| weight * x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let try_vec = |mut c: Vec<f64>| -> Option<Vec<f64>> {
        pre(&mut c);
        let n0 = ip(&c, &c).sqrt();
        for _ in 0..2 {
            for b in basis {
                let p = ip(b, &c);
                c.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let nrm = ip(&c, &c).sqrt();
        (n0 > 0.0 && nrm > 1e-6 * n0).then(|| c.iter().map(|x| x / nrm).collect())
    };
    for cand in pool {
        if let Some(e) = try_vec(cand.clone()) {
            return e;
        }
    }
    // The pool is sized well above the rank; fall back to unit vectors.
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        if let Some(e) = try_vec(e) {
            return e;
        }
    }
    panic!("unable to complete an orthonormal basis of dimension {}", basis.len() + 1);
}

/// QR of `K` under the trapezoid inner product: `K = X R`.
pub fn qr_weighted(k: &DMatrix<f64>, dx: f64, pool: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    orthonormalize(k, dx, &|_| {}, pool)
}

/// QR of the micro projection of `L` in the velocity inner product, which
/// is the same as orthonormalizing `[w p0, w p1, w p2, L]` and keeping the
/// trailing block: `P⊥ L = V R`.
pub fn augmented_qr(l: &DMatrix<f64>, space: &dyn VelocitySpace, pool: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let pre = |c: &mut [f64]| {
        space.project_perp(c);
        space.project_perp(c);
    };
    orthonormalize(l, space.weight(), &pre, pool)
}

/// Truncated weighted SVD of a dense micro part `g` (`nx × len`), giving a
/// rank-`r` factorization with the required orthogonality. Singular values
/// below `1e-12 * max(σ_1, scale)` are dropped.
pub fn init_from_svd(
    g: &DMatrix<f64>,
    rank: usize,
    dx: f64,
    space: &dyn VelocitySpace,
    pool: &CompletionPool,
    scale: f64,
) -> LowRankState {
    let wx = dx.sqrt();
    let wv = space.weight().sqrt();
    let svd = (g * (wx * wv)).svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let sig = &svd.singular_values;
    let nx = g.nrows();
    let nv = g.ncols();
    let mut order: Vec<usize> = (0..sig.len()).collect();
    order.sort_by(|&a, &b| sig[b].partial_cmp(&sig[a]).unwrap());
    let cutoff = 1e-12 * sig.iter().copied().fold(scale, f64::max);
    let mut xk = DMatrix::zeros(nx, rank);
    let mut vr = DMatrix::zeros(nv, rank);
    for (c, &idx) in order.iter().take(rank).enumerate() {
        if sig[idx] <= cutoff {
            continue;
        }
        for i in 0..nx {
            xk[(i, c)] = u[(i, idx)] / wx * sig[idx];
        }
        for k in 0..nv {
            vr[(k, c)] = vt[(idx, k)] / wv;
        }
    }
    let (x, r1) = qr_weighted(&xk, dx, &pool.x);
    let (v, r2) = augmented_qr(&vr, space, &pool.v);
    let s = r1 * r2.transpose();
    LowRankState { x, s, v }
}
