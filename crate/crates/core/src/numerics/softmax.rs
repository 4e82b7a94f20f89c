use crate::error::{Error, Result};

const FLUSH_BELOW: f64 = 1e-300;

/// One multiplicative-weights step: π'(a) ∝ π(a)·exp(α·Q̂(a)), evaluated in
/// log space. Zero-probability actions stay at zero.
pub fn mirror_descent_step(row: &[f64], q_row: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if row.len() != q_row.len() {
        return Err(Error::Dimension("policy row and Q row differ in length".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidModel(format!("step size must be nonnegative, got {alpha}")));
    }
    if row.iter().chain(q_row).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "mirror descent input".into(),
        });
    }
    let logits: Vec<f64> = row
        .iter()
        .zip(q_row)
        .map(|(&p, &q)| if p > 0.0 { p.ln() + alpha * q } else { f64::NEG_INFINITY })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Degenerate("all action masses are zero".into()));
    }
    let mut out: Vec<f64> = logits
        .iter()
        .map(|&l| {
            let w = (l - max).exp();
            if w < FLUSH_BELOW {
                0.0
            } else {
                w
            }
        })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_q_or_zero_step_keeps_row() {
        let row = [0.2, 0.5, 0.3];
        for (q, alpha) in [([0.0; 3], 1.0), ([1.0, -2.0, 3.0], 0.0)] {
            let out = mirror_descent_step(&row, &q, alpha).unwrap();
            for (a, b) in out.iter().zip(row) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn closed_form_two_actions() {
        let out = mirror_descent_step(&[0.5, 0.5], &[2f64.ln(), 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(out[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn preserves_support_and_survives_huge_steps() {
        let out = mirror_descent_step(&[0.0, 0.5, 0.5], &[1e6, 1.0, 0.0], 1e4).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn all_zero_row_is_an_error() {
        assert!(matches!(
            mirror_descent_step(&[0.0, 0.0], &[1.0, 1.0], 1.0),
            Err(Error::Degenerate(_))
        ));
    }
}
