use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Bound on ‖Λ·Λ⁻¹ − I‖_max before the maintained inverse is re-factorized.
pub const IDENTITY_RESIDUAL_TOL: f64 = 1e-8;
const CHECK_EVERY: usize = 32;

/// Ridge regression state: Λ = λI + Σ w·u uᵀ, its maintained inverse, and
/// the right-hand side Σ w·u·y.
#[derive(Debug, Clone)]
pub struct RidgeAccumulator {
    lambda: f64,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    rhs: DVector<f64>,
    updates: usize,
    refactorizations: usize,
}

impl RidgeAccumulator {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("ridge dimension must be positive".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidModel(format!("ridge λ must be positive, got {lambda}")));
        }
        Ok(Self {
            lambda,
            gram: DMatrix::identity(dim, dim) * lambda,
            gram_inv: DMatrix::identity(dim, dim) / lambda,
            rhs: DVector::zeros(dim),
            updates: 0,
            refactorizations: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn refactorizations(&self) -> usize {
        self.refactorizations
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn update(&mut self, u: &[f64], y: f64) -> Result<()> {
        self.update_weighted(u, y, 1.0)
    }

    /// Adds `weight` copies of the observation (u, y).
    pub fn update_weighted(&mut self, u: &[f64], y: f64, weight: f64) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "regressor has length {}, accumulator dim is {}",
                u.len(),
                self.dim()
            )));
        }
        if !y.is_finite() || !weight.is_finite() || u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "ridge update".into(),
            });
        }
        if weight < 0.0 {
            return Err(Error::InvalidModel("negative ridge weight".into()));
        }
        self.updates += 1;
        if weight == 0.0 || u.iter().all(|&x| x == 0.0) {
            return Ok(());
        }
        let u = DVector::from_column_slice(u);
        self.gram.ger(weight, &u, &u, 1.0);
        self.rhs.axpy(weight * y, &u, 1.0);

        let z = &self.gram_inv * &u;
        let denom = 1.0 + weight * u.dot(&z);
        self.gram_inv.ger(-weight / denom, &z, &z, 1.0);
        symmetrize(&mut self.gram_inv);

        if self.updates % CHECK_EVERY == 0 && self.identity_residual() > IDENTITY_RESIDUAL_TOL {
            self.refactor();
        }
        Ok(())
    }

    /// ‖Λ·Λ⁻¹ − I‖_max.
    pub fn identity_residual(&self) -> f64 {
        let mut prod = &self.gram * &self.gram_inv;
        for i in 0..self.dim() {
            prod[(i, i)] -= 1.0;
        }
        prod.amax()
    }

    /// Recomputes Λ⁻¹ from Λ by a dense Cholesky factorization.
    pub fn refactor(&mut self) {
        let chol = self
            .gram
            .clone()
            .cholesky()
            .expect("ridge Gram matrix is positive definite");
        self.gram_inv = chol.inverse();
        symmetrize(&mut self.gram_inv);
        self.refactorizations += 1;
    }

    /// θ̂ = Λ⁻¹·rhs.
    pub fn solution(&self) -> Vec<f64> {
        (&self.gram_inv * &self.rhs).iter().copied().collect()
    }

    /// vᵀΛ⁻¹v, clamped at zero.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let dim = self.dim();
        let mut total = 0.0;
        for i in 0..dim {
            if v[i] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..dim {
                row += self.gram_inv[(i, j)] * v[j];
            }
            total += v[i] * row;
        }
        total.max(0.0)
    }

    /// log det Λ via Cholesky.
    pub fn log_det(&self) -> f64 {
        log_det(&self.gram)
    }
}

pub(crate) fn log_det(matrix: &DMatrix<f64>) -> f64 {
    let chol = matrix
        .clone()
        .cholesky()
        .expect("matrix is positive definite");
    2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Functional form of [`RidgeAccumulator::update`].
pub fn ridge_update(mut acc: RidgeAccumulator, u: &[f64], y: f64) -> Result<RidgeAccumulator> {
    acc.update(u, y)?;
    Ok(acc)
}

/// ‖v‖_{Λ⁻¹} = √(vᵀΛ⁻¹v).
pub fn mahalanobis(acc: &RidgeAccumulator, v: &[f64]) -> f64 {
    acc.quad_form(v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    use crate::rng::seeded;

    fn dense_solution(us: &[Vec<f64>], ys: &[f64], lambda: f64) -> Vec<f64> {
        let d = us[0].len();
        let mut gram = DMatrix::<f64>::identity(d, d) * lambda;
        let mut rhs = DVector::<f64>::zeros(d);
        for (u, &y) in us.iter().zip(ys) {
            let u = DVector::from_column_slice(u);
            gram += &u * u.transpose();
            rhs += &u * y;
        }
        gram.lu().solve(&rhs).unwrap().iter().copied().collect()
    }

    #[test]
    fn empty_accumulator_is_regularizer() {
        let acc = RidgeAccumulator::new(3, 1.0).unwrap();
        assert_eq!(acc.solution(), vec![0.0; 3]);
        assert_eq!(acc.gram(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn single_update_matches_closed_form() {
        let u = [0.3, -1.2, 0.5];
        let y = 2.0;
        let acc = ridge_update(RidgeAccumulator::new(3, 1.0).unwrap(), &u, y).unwrap();
        let norm_sq: f64 = u.iter().map(|x| x * x).sum();
        let expected: Vec<f64> = u.iter().map(|x| x * y / (1.0 + norm_sq)).collect();
        let dense = dense_solution(&[u.to_vec()], &[y], 1.0);
        for ((a, b), c) in acc.solution().iter().zip(&expected).zip(&dense) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            assert_abs_diff_eq!(a, c, epsilon = 1e-14);
        }
    }

    #[test]
    fn many_updates_match_dense_solve() {
        let mut rng = seeded(11);
        let d = 6;
        let mut acc = RidgeAccumulator::new(d, 1.0).unwrap();
        let mut us = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..500 {
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = rng.random_range(-3.0..3.0);
            acc.update(&u, y).unwrap();
            us.push(u);
            ys.push(y);
        }
        let dense = dense_solution(&us, &ys, 1.0);
        let sol = acc.solution();
        let scale = dense.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (a, b) in sol.iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
        }
        assert!(acc.identity_residual() <= IDENTITY_RESIDUAL_TOL);
    }

    #[test]
    fn weighted_update_equals_repeated_updates() {
        let u = [1.0, 2.0, -0.5];
        let mut a = RidgeAccumulator::new(3, 0.5).unwrap();
        let mut b = RidgeAccumulator::new(3, 0.5).unwrap();
        a.update_weighted(&u, 0.7, 3.0).unwrap();
        for _ in 0..3 {
            b.update(&u, 0.7).unwrap();
        }
        for (x, y) in a.solution().iter().zip(b.solution()) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut acc = RidgeAccumulator::new(2, 1.0).unwrap();
        assert!(matches!(acc.update(&[f64::NAN, 0.0], 1.0), Err(Error::NonFinite { .. })));
        assert!(matches!(acc.update(&[1.0, 0.0], f64::INFINITY), Err(Error::NonFinite { .. })));
        assert!(acc.update(&[1.0], 1.0).is_err());
    }

    #[test]
    fn mahalanobis_basics() {
        let acc = RidgeAccumulator::new(3, 1.0).unwrap();
        assert_abs_diff_eq!(mahalanobis(&acc, &[1.0, 0.0, 0.0]), 1.0);
        assert_eq!(mahalanobis(&acc, &[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn mahalanobis_counts_visits_on_one_hot_features() {
        let mut acc = RidgeAccumulator::new(4, 1.0).unwrap();
        let e2 = [0.0, 0.0, 1.0, 0.0];
        for n in 0..7 {
            assert_abs_diff_eq!(mahalanobis(&acc, &e2), 1.0 / (1.0 + n as f64).sqrt(), epsilon = 1e-14);
            acc.update(&e2, 1.0).unwrap();
        }
    }
}
