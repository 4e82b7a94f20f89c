use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ridge::log_det;
use crate::error::{Error, Result};

/// Both sides of the elliptical potential inequality
/// Σ_t min{1, u_tᵀΛ_t⁻¹u_t} ≤ 2·log(det Λ_{T+1} / det Λ_1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticalAudit {
    pub lhs: f64,
    pub rhs: f64,
}

impl EllipticalAudit {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Replays the Gram sequence Λ_t = Λ_0 + Σ_{j<t} u_j u_jᵀ. The quadratic
/// forms use an incrementally maintained inverse; the log-determinants are
/// computed from scratch on the accumulated Gram matrix.
pub fn elliptical_potential_audit(lambda0: &DMatrix<f64>, regressors: &[Vec<f64>]) -> Result<EllipticalAudit> {
    let dim = lambda0.nrows();
    if lambda0.ncols() != dim {
        return Err(Error::Dimension("initial Gram matrix is not square".into()));
    }
    if regressors.is_empty() {
        return Ok(EllipticalAudit { lhs: 0.0, rhs: 0.0 });
    }
    let mut inverse = lambda0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("initial Gram matrix is not positive definite".into()))?
        .inverse();
    let mut gram = lambda0.clone();
    let mut lhs = 0.0;
    for u in regressors {
        if u.len() != dim {
            return Err(Error::Dimension("regressor length".into()));
        }
        if u.iter().all(|&x| x == 0.0) {
            continue;
        }
        let u = DVector::from_column_slice(u);
        let z = &inverse * &u;
        let quad = u.dot(&z).max(0.0);
        lhs += quad.min(1.0);
        gram.ger(1.0, &u, &u, 1.0);
        inverse.ger(-1.0 / (1.0 + quad), &z, &z, 1.0);
    }
    let rhs = 2.0 * (log_det(&gram) - log_det(lambda0));
    Ok(EllipticalAudit { lhs, rhs })
}
