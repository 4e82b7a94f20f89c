//! Shared numerical kernels.

mod elliptical;
mod projection;
mod ridge;
mod softmax;

pub use elliptical::{elliptical_potential_audit, EllipticalAudit};
pub use projection::{project_ball, project_nonnegative_ball, project_simplex, RewardDomain};
pub use ridge::{mahalanobis, ridge_update, RidgeAccumulator, IDENTITY_RESIDUAL_TOL};
pub use softmax::mirror_descent_step;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
