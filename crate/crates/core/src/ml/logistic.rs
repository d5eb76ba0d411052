//! L2-regularized logistic regression fitted by gradient descent.

use super::{Features, MLDataset, MLError, Model};
use crate::num::Scalar;

/// Stop once every gradient component is below this.
pub const TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 10_000;

/// Weights for the four features followed by the intercept.
pub type Params<T> = [T; 5];

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression<T> {
    pub params: Params<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn logit<T: Scalar>(params: &Params<T>, x: &Features<T>) -> T {
    x.iter().zip(params).map(|(a, w)| *a * *w).sum::<T>() + params[4]
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// Mean log-loss plus `l2 / 2 * |w|^2`; the intercept is not penalized.
pub fn log_loss<T: Scalar>(params: &Params<T>, xs: &[Features<T>], ys: &[bool], l2: T) -> T {
    let n = T::of_usize(xs.len().max(1));
    let data: T = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = logit(params, x);
            if y {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum::<T>()
        / n;
    let penalty = params[..4].iter().map(|w| *w * *w).sum::<T>() * l2 / T::of(2.0);
    data + penalty
}

/// Gradient of [`log_loss`].
pub fn log_loss_gradient<T: Scalar>(params: &Params<T>, xs: &[Features<T>], ys: &[bool], l2: T) -> Params<T> {
    let n = T::of_usize(xs.len().max(1));
    let mut grad = [T::zero(); 5];
    for (x, &y) in xs.iter().zip(ys) {
        let residual = sigmoid(logit(params, x)) - if y { T::one() } else { T::zero() };
        for c in 0..4 {
            grad[c] = grad[c] + residual * x[c];
        }
        grad[4] = grad[4] + residual;
    }
    for c in 0..5 {
        grad[c] = grad[c] / n;
        if c < 4 {
            grad[c] = grad[c] + l2 * params[c];
        }
    }
    grad
}

impl<T: Scalar> LogisticRegression<T> {
    pub fn fit(data: &MLDataset<T>, l2: T) -> Result<Self, MLError> {
        if data.is_empty() {
            return Err(MLError::EmptyDataset);
        }
        if !data.has_both_classes() {
            return Err(MLError::SingleClassData);
        }
        let xs: Vec<Features<T>> = data.rows.iter().map(|r| r.features).collect();
        let ys = data.labels();
        // Lipschitz bound of the gradient: trace of the scaled Gram matrix plus the penalty.
        let trace = xs.iter().map(|x| x.iter().map(|v| *v * *v).sum::<T>() + T::one()).sum::<T>() / T::of_usize(xs.len());
        let step = T::one() / (trace / T::of(4.0) + l2);
        let tolerance = T::of(TOLERANCE);
        let mut params = [T::zero(); 5];
        for iteration in 0..MAX_ITERATIONS {
            let grad = log_loss_gradient(&params, &xs, &ys, l2);
            if grad.iter().all(|g| g.abs() < tolerance) {
                return Ok(Self { params, iterations: iteration, converged: true });
            }
            for c in 0..5 {
                params[c] = params[c] - step * grad[c];
            }
        }
        Ok(Self { params, iterations: MAX_ITERATIONS, converged: false })
    }
}

impl<T: Scalar> Model<T> for LogisticRegression<T> {
    fn predict_score(&self, x: &Features<T>) -> T {
        sigmoid(logit(&self.params, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::standardize;
    use crate::ml::testdata::{row, separable};
    use proptest::prelude::*;

    #[test]
    fn separable_training_accuracy() {
        let data = standardize(&separable(200, 11)).unwrap().dataset;
        let model = LogisticRegression::fit(&data, 0.001).unwrap();
        let correct = data.rows.iter().filter(|r| model.predict(&r.features) == r.label).count();
        assert!(correct as f64 / 200.0 >= 0.99);
    }

    #[test]
    fn converges_on_overlapping_data() {
        let rows = (0..40).map(|i| row([(i % 7) as f64 / 7.0, 0.0, (i % 3) as f64 / 3.0, 0.0], i % 2 == 0)).collect();
        let model = LogisticRegression::fit(&MLDataset::new(rows).unwrap(), 0.1).unwrap();
        assert!(model.converged);
    }

    #[test]
    fn single_class_is_rejected() {
        let data = MLDataset::new(vec![row([0.0; 4], true), row([1.0; 4], true)]).unwrap();
        assert_eq!(LogisticRegression::fit(&data, 1.0).unwrap_err(), MLError::SingleClassData);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let p = [1e3, 0.0, 0.0, 0.0, 0.0];
        assert!(log_loss(&p, &[[1.0, 0.0, 0.0, 0.0]], &[false], 0.0f64).is_finite());
        assert_eq!(sigmoid(-1e4f64), 0.0);
        assert_eq!(sigmoid(1e4f64), 1.0);
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(
            xs in proptest::collection::vec(proptest::array::uniform4(-2.0f64..2.0), 1..12),
            ys in proptest::collection::vec(any::<bool>(), 12),
            params in proptest::array::uniform5(-1.5f64..1.5),
            l2 in 0.0f64..2.0,
        ) {
            let ys = &ys[..xs.len()];
            let grad = log_loss_gradient(&params, &xs, ys, l2);
            let h = 1e-5;
            for c in 0..5 {
                let (mut up, mut down) = (params, params);
                up[c] += h;
                down[c] -= h;
                let numeric = (log_loss(&up, &xs, ys, l2) - log_loss(&down, &xs, ys, l2)) / (2.0 * h);
                let err = (numeric - grad[c]).abs() / grad[c].abs().max(numeric.abs()).max(1e-3);
                prop_assert!(err <= 1e-5, "component {}: analytic {} numeric {}", c, grad[c], numeric);
            }
        }
    }
}
