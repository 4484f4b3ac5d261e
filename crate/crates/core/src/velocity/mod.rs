//! Velocity discretizations.
//!
//! A [`VelocitySpace`] stores functions of `v` as vectors (Hermite
//! coefficients or grid samples) and supplies the linear operators needed by
//! the integrator: multiplication by `v`, the derivatives appearing in the
//! Vlasov and Dougherty terms, the micro projector, and the macro basis.

pub mod fd;
pub mod hermite;

use nalgebra::DMatrix;
use rand::Rng;

use crate::orthopoly::MacroCoefficients;

/// The macro basis `w p_n` (n = 0..=3) and its images under the operators
/// that act on the macro part in the kinetic equation.
#[derive(Clone, Debug)]
pub struct MacroTerms {
    /// `w p_n`.
    pub basis: [Vec<f64>; 4],
    /// `v w p_n`.
    pub vmul: [Vec<f64>; 3],
    /// `∂v (w p_n)`.
    pub dv: [Vec<f64>; 3],
    /// `∂v² (w p_n)`.
    pub dv2: [Vec<f64>; 3],
    /// `∂v (v w p_n)`.
    pub dv_vmul: [Vec<f64>; 3],
}

/// Velocity transport acting column-wise on a factor `L`:
///
/// `T(L)_i = Σ_k [ -vmul_ik v L_k - ∂v((drift_ik - β δ_ik v) L_k) + diffusion_ik ∂v² L_k ]`
#[derive(Clone, Debug)]
pub struct Transport<'a> {
    pub vmul: &'a DMatrix<f64>,
    pub drift: &'a DMatrix<f64>,
    /// Coefficient `β` of the linear-in-`v` drift on the diagonal.
    pub beta: f64,
    pub diffusion: &'a DMatrix<f64>,
}

pub trait VelocitySpace: Send + Sync {
    /// Length of the vector representing one function of `v`.
    fn len(&self) -> usize;

    /// Constant `c` with `<a, b>_{w^{-1}} = c Σ a_k b_k`.
    fn weight(&self) -> f64;

    /// `<a, b>_{w^{-1}}`.
    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    fn coefficients(&self) -> &MacroCoefficients;

    fn macro_terms(&self) -> &MacroTerms;

    /// Removes the components along `w p0, w p1, w p2`.
    fn project_perp(&self, g: &mut [f64]);

    /// Values of `p_n(v_b) w(v_b)` (n = 0..2) at the lower and upper
    /// velocity boundaries, for backends with a truncated domain.
    fn boundary_basis(&self) -> Option<[[f64; 2]; 3]>;

    /// `v g`.
    fn vmul(&self, g: &[f64], out: &mut [f64]);

    /// `∂v g`, with boundary values `trace` where the backend needs them.
    fn dv(&self, g: &[f64], trace: [f64; 2], out: &mut [f64]);

    /// `∂v² g`.
    fn dv2(&self, g: &[f64], trace: [f64; 2], out: &mut [f64]);

    /// `∂v (v g)`.
    fn dv_vmul(&self, g: &[f64], trace: [f64; 2], out: &mut [f64]);

    /// Applies `transport` to the columns of `l` and adds the result into
    /// `out`. `traces[k]` are the boundary values for column `k`.
    fn transport(&self, l: &DMatrix<f64>, traces: &[[f64; 2]], op: &Transport<'_>, out: &mut DMatrix<f64>);

    /// Optional spectral filter on a kinetic factor column.
    fn filter(&self, _g: &mut [f64]) {}

    /// A random smooth micro-like function used to complete deficient
    /// bases.
    fn smooth_candidate(&self, rng: &mut dyn rand::RngCore) -> Vec<f64>;

    /// Representation of the function `h(v)`.
    fn represent(&self, h: &dyn Fn(f64) -> f64) -> Vec<f64>;

    /// Velocities used for phase-space output and, if the representation
    /// is not nodal, the matrix mapping a representation to those samples.
    fn raster(&self) -> (Vec<f64>, Option<DMatrix<f64>>);
}

/// `<V_j, h>` for every column of `v`.
pub fn project_onto(space: &dyn VelocitySpace, v: &DMatrix<f64>, h: &[f64]) -> Vec<f64> {
    (0..v.ncols()).map(|j| space.inner(v.column(j).as_slice(), h)).collect()
}

/// Random coefficients with the given decay used by both backends' smooth
/// candidates.
pub(crate) fn random_coeffs(rng: &mut dyn rand::RngCore, n: usize) -> Vec<f64> {
    (0..n).map(|k| rng.gen_range(-1.0..1.0) / (1.0 + k as f64)).collect()
}
