use serde::{Deserialize, Serialize};

use super::norm2;

/// Euclidean projection onto {v : ‖v‖₂ ≤ radius}.
pub fn project_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let n = norm2(v);
    if n <= radius {
        v.to_vec()
    } else {
        v.iter().map(|x| x * radius / n).collect()
    }
}

/// Euclidean projection onto the ball intersected with the nonnegative orthant.
pub fn project_nonnegative_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let clamped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    project_ball(&clamped, radius)
}

/// Euclidean projection onto the probability simplex (sorted-threshold method).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if x - candidate > 0.0 {
            threshold = candidate;
        }
    }
    v.iter().map(|x| (x - threshold).max(0.0)).collect()
}

/// Feasible set for each reward parameter μ_h.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardDomain {
    /// The centered ball of radius √d_R; rewards may be negative.
    #[default]
    Ball,
    /// Ball ∩ nonnegative orthant; with nonnegative ψ rewards lie in [0, √d_R].
    NonnegativeBall,
}

impl RewardDomain {
    pub fn project(self, v: &[f64], radius: f64) -> Vec<f64> {
        match self {
            RewardDomain::Ball => project_ball(v, radius),
            RewardDomain::NonnegativeBall => project_nonnegative_ball(v, radius),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ball_identity_inside() {
        assert_eq!(project_ball(&[0.1, -0.2], 1.0), vec![0.1, -0.2]);
    }

    #[test]
    fn ball_radial_scaling() {
        let p = project_ball(&[3.0, 4.0], 1.0);
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn simplex_fixed_points_and_hand_case() {
        assert_eq!(project_simplex(&[0.25, 0.75]), vec![0.25, 0.75]);
        let p = project_simplex(&[1.2, -0.2]);
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-15);
        assert_eq!(project_simplex(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn simplex_matches_grid_search() {
        let cases = [[0.9, 0.4, -0.3], [-1.0, 2.0, 0.5], [0.2, 0.2, 0.2], [3.0, -3.0, 1.0]];
        let steps = 400;
        for v in cases {
            let p = project_simplex(&v);
            let mut best = (f64::INFINITY, [0.0; 3]);
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let q = [
                        i as f64 / steps as f64,
                        j as f64 / steps as f64,
                        (steps - i - j) as f64 / steps as f64,
                    ];
                    let dist: f64 = q.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
                    if dist < best.0 {
                        best = (dist, q);
                    }
                }
            }
            for (a, b) in p.iter().zip(best.1) {
                assert!((a - b).abs() <= 1e-2 / 2.0 + 1e-4, "{p:?} vs {:?}", best.1);
            }
            let dist_p: f64 = p.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(dist_p <= best.0 + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn ball_output_is_feasible_idempotent_nonexpansive(
            u in prop::collection::vec(-10.0f64..10.0, 4),
            v in prop::collection::vec(-10.0f64..10.0, 4),
            radius in 0.1f64..5.0,
        ) {
            let pu = project_ball(&u, radius);
            let pv = project_ball(&v, radius);
            prop_assert!(norm2(&pu) <= radius * (1.0 + 1e-15));
            let again = project_ball(&pu, radius);
            for (a, b) in again.iter().zip(&pu) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            let d_out: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| a - b).collect();
            let d_in: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
            prop_assert!(norm2(&d_out) <= norm2(&d_in) + 1e-12);
        }

        #[test]
        fn simplex_output_is_distribution(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let p = project_simplex(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn nonnegative_ball_is_feasible(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let p = project_nonnegative_ball(&v, 1.5);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!(norm2(&p) <= 1.5 * (1.0 + 1e-15));
        }
    }

    #[test]
    fn ball_projection_sweep() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(5);
        for _ in 0..10_000 {
            let v: Vec<f64> = (0..5).map(|_| rng.random_range(-20.0..20.0)).collect();
            assert!(norm2(&project_ball(&v, 2.0)) <= 2.0 * (1.0 + 1e-15));
        }
    }
}
