use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::AdditionalSet;
use crate::error::Result;
use crate::mdp::{occupancy_measures, LinearKernelMdp, Policy, TransitionFeatures};

/// Relative eigenvalue floor defining the expert span.
const SPAN_TOL: f64 = 1e-10;

/// Σ_{s'} φ(s,a,s')φ(s,a,s')ᵀ.
pub(crate) fn feature_second_moment(features: &TransitionFeatures, s: usize, a: usize) -> DMatrix<f64> {
    let d = features.dim();
    let mut m = DMatrix::zeros(d, d);
    for s_next in 0..features.num_states() {
        let f = DVector::from_column_slice(features.get(s, a, s_next));
        m.ger(1.0, &f, &f, 1.0);
    }
    m
}

/// Largest c with N₂⁻¹ Σ_τ Σ_{s'} φφᵀ ⪰ c·E_{π^E}[Σ_{s'} φφᵀ] on the span of
/// the expert matrix, minimized over steps. Returns 0 for an empty dataset.
pub fn coverage_ratio(mdp: &LinearKernelMdp, data: &AdditionalSet, expert: &Policy) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let features = mdp.features();
    let moments: Vec<DMatrix<f64>> = (0..ns)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| feature_second_moment(features, s, a))
        .collect();
    let occupancy = occupancy_measures(mdp, expert)?;
    let d = features.dim();
    let n2 = data.len() as f64;
    let mut ratio = f64::INFINITY;
    for h in 0..mdp.horizon() {
        let counts = data.visit_counts(h, ns, na);
        let mut empirical = DMatrix::zeros(d, d);
        let mut expert_m = DMatrix::zeros(d, d);
        for (i, m) in moments.iter().enumerate() {
            if counts[i] > 0 {
                empirical += m * (counts[i] as f64 / n2);
            }
            if occupancy[h][i] > 0.0 {
                expert_m += m * occupancy[h][i];
            }
        }
        ratio = ratio.min(restricted_min_generalized_eigenvalue(&empirical, &expert_m));
    }
    Ok(ratio.max(0.0))
}

/// min over y in span(B) of yᵀAy / yᵀBy.
fn restricted_min_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(b.clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return f64::INFINITY;
    }
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > SPAN_TOL * top)
        .collect();
    let mut w = DMatrix::zeros(b.nrows(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt().recip();
        w.set_column(j, &(eig.eigenvectors.column(i) * scale));
    }
    let reduced = w.transpose() * a * &w;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    SymmetricEigen::new(reduced)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
