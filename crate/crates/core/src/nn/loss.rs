use std::sync::atomic::{AtomicU64, Ordering};

use super::error::NnError;
use super::scalar::Scalar;
use super::tensor::Tensor;

/// Probability floor applied before taking the log in the cross-entropy.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

static CLAMP_WARNINGS: AtomicU64 = AtomicU64::new(0);

/// Number of cross-entropy evaluations that hit the probability floor.
pub fn clamp_warnings() -> u64 {
    CLAMP_WARNINGS.load(Ordering::Relaxed)
}

fn check_shapes<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(), NnError> {
    if a.shape() != b.shape() {
        return Err(NnError::Mismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Mean squared error and its gradient with respect to `prediction`.
pub fn mse_loss<T: Scalar>(
    prediction: &Tensor<T>,
    target: &Tensor<T>,
) -> Result<(T, Tensor<T>), NnError> {
    check_shapes(prediction, target)?;
    let n = T::from_usize(prediction.len().max(1)).unwrap();
    let two = T::lit(2.0);
    let mut grad = prediction.clone();
    let mut loss = T::zero();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let e = *g - t;
        loss += e * e;
        *g = two * e / n;
    }
    Ok((loss / n, grad))
}

/// Huber loss of a single residual `e` and its derivative.
#[inline]
pub fn huber_elementwise<T: Scalar>(e: T, delta: T) -> (T, T) {
    let half = T::lit(0.5);
    if e.abs() <= delta {
        (half * e * e, e)
    } else {
        (delta * e.abs() - half * delta * delta, delta * e.signum())
    }
}

/// Mean Huber loss with threshold `delta` and its gradient with respect to `prediction`.
pub fn huber_loss<T: Scalar>(
    prediction: &Tensor<T>,
    target: &Tensor<T>,
    delta: T,
) -> Result<(T, Tensor<T>), NnError> {
    if delta.is_nan() || delta <= T::zero() {
        return Err(NnError::Loss(format!("huber delta must be positive, got {delta}")));
    }
    check_shapes(prediction, target)?;
    let n = T::from_usize(prediction.len().max(1)).unwrap();
    let mut grad = prediction.clone();
    let mut loss = T::zero();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let (l, d) = huber_elementwise(*g - t, delta);
        loss += l;
        *g = d / n;
    }
    Ok((loss / n, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossEntropy<T> {
    pub loss: T,
    /// Gradient with respect to the logits feeding the softmax.
    pub logit_grad: Tensor<T>,
    /// Whether `p[action]` was clamped to the probability floor.
    pub clamped: bool,
}

/// Weighted categorical cross-entropy `-w·log p[a]` on softmax outputs.
pub fn cross_entropy_loss<T: Scalar>(
    probabilities: &Tensor<T>,
    action: usize,
    weight: T,
) -> Result<CrossEntropy<T>, NnError> {
    if action >= probabilities.len() {
        return Err(NnError::Loss(format!(
            "action {action} outside {} classes",
            probabilities.len()
        )));
    }
    let floor = T::lit(PROBABILITY_FLOOR);
    let p = probabilities[action];
    let clamped = p < floor;
    if clamped {
        CLAMP_WARNINGS.fetch_add(1, Ordering::Relaxed);
    }
    let loss = -weight * p.max(floor).ln();
    let mut logit_grad = probabilities.clone();
    logit_grad[action] -= T::one();
    logit_grad.scale(weight);
    Ok(CrossEntropy {
        loss,
        logit_grad,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    type LossFn<'a> = &'a dyn Fn(&Tensor<f64>) -> (f64, Tensor<f64>);


    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(v.to_vec())
    }

    #[test]
    fn mse_hand_values() {
        let (l, g) = mse_loss(&t(&[3.0]), &t(&[1.0])).unwrap();
        assert_eq!((l, g[0]), (4.0, 4.0));
        let (l, _) = mse_loss(&t(&[1.0, 2.0]), &t(&[1.0, 2.0])).unwrap();
        assert_eq!(l, 0.0);
        assert!(mse_loss(&t(&[1.0]), &t(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber_loss(&t(&[0.0]), &t(&[0.0]), 2.0).unwrap().0, 0.0);
        assert_eq!(huber_loss(&t(&[1.0]), &t(&[0.0]), 2.0).unwrap().0, 0.5);
        let (l, g) = huber_loss(&t(&[5.0]), &t(&[0.0]), 2.0).unwrap();
        assert_eq!((l, g[0]), (8.0, 2.0));
        let (_, g) = huber_loss(&t(&[-5.0]), &t(&[0.0]), 2.0).unwrap();
        assert_eq!(g[0], -2.0);
        assert!(huber_loss(&t(&[1.0]), &t(&[0.0]), 0.0).is_err());
        assert!(huber_loss(&t(&[1.0]), &t(&[0.0]), -1.0).is_err());
    }

    #[test]
    fn huber_smooth_at_threshold() {
        let delta: f64 = 2.0;
        for sign in [1.0, -1.0] {
            let lo = huber_elementwise(sign * delta * (1.0 - 1e-7), delta);
            let hi = huber_elementwise(sign * delta * (1.0 + 1e-7), delta);
            assert!((lo.0 - hi.0).abs() < 1e-6);
            assert!((lo.1 - hi.1).abs() < 1e-6);
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let pred = t(&[0.3, -1.7, 2.9, 4.2]);
        let target = t(&[0.0, 0.5, -0.4, 0.1]);
        let h = 1e-6;
        let losses: [LossFn; 2] = [
            &|p| mse_loss(p, &target).unwrap(),
            &|p| huber_loss(p, &target, 2.0).unwrap(),
        ];
        for f in losses {
            let (_, g) = f(&pred);
            for i in 0..pred.len() {
                let mut up = pred.clone();
                up[i] += h;
                let mut down = pred.clone();
                down[i] -= h;
                let fd = (f(&up).0 - f(&down).0) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6, "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn cross_entropy_cases() {
        let ce = cross_entropy_loss(&t(&[0.0, 1.0]), 1, 1.0).unwrap();
        assert_eq!(ce.loss, 0.0);
        let ce = cross_entropy_loss(&t(&[0.25; 4]), 2, 1.0).unwrap();
        assert!((ce.loss - 4f64.ln()).abs() < 1e-12);
        assert_eq!(ce.logit_grad.data(), &[0.25, 0.25, -0.75, 0.25]);
        let ce = cross_entropy_loss(&t(&[0.25; 4]), 2, 0.0).unwrap();
        assert_eq!(ce.loss, 0.0);
        assert!(ce.logit_grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let before = clamp_warnings();
        let ce = cross_entropy_loss(&t(&[1.0, 0.0]), 1, 1.0).unwrap();
        assert!(ce.clamped);
        assert!((ce.loss - (-(1e-12f64).ln())).abs() < 1e-9);
        assert!(clamp_warnings() > before);
    }
}
