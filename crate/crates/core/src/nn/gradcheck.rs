//! Central finite-difference checks of analytic network gradients.

use super::error::NnError;
use super::network::{Gradients, Network};
use super::scalar::Scalar;
use super::tensor::Tensor;

pub const FD_STEP: f64 = 1e-5;
/// Parameter count above which checking is refused.
pub const MAX_CHECKED_PARAMS: usize = 5_000;
/// Denominator floor of the relative error, so near-zero gradients compare absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamIndex {
    pub layer: usize,
    pub tensor: usize,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst: Option<ParamIndex>,
    pub failures: Vec<ParamIndex>,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Central differences of `objective` with respect to every parameter.
pub fn numeric_gradients<T, F>(network: &mut Network<T>, step: T, mut objective: F) -> Gradients<T>
where
    T: Scalar,
    F: FnMut(&Network<T>) -> T,
{
    let mut grads = Gradients::zeros_like(network);
    let two = T::lit(2.0);
    for layer in 0..network.layers().len() {
        for tensor in 0..network.layers()[layer].params.len() {
            for i in 0..network.param(layer, tensor).len() {
                let original = network.param(layer, tensor)[i];
                network.param_mut(layer, tensor)[i] = original + step;
                let up = objective(network);
                network.param_mut(layer, tensor)[i] = original - step;
                let down = objective(network);
                network.param_mut(layer, tensor)[i] = original;
                grads.layer_mut(layer)[tensor][i] = (up - down) / (two * step);
            }
        }
    }
    grads
}

/// Compares analytic against numeric gradients entrywise.
///
/// The relative error of an entry is `|analytic - numeric| / max(|numeric|, 1e-6)`.
pub fn compare_gradients<T: Scalar>(
    analytic: &Gradients<T>,
    numeric: &Gradients<T>,
    tolerance: f64,
) -> GradCheckReport {
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        failures: Vec::new(),
        checked: 0,
        tolerance,
        passed: true,
    };
    for layer in 0..analytic.num_layers() {
        for (tensor, (a, n)) in analytic
            .layer(layer)
            .iter()
            .zip(numeric.layer(layer))
            .enumerate()
        {
            for (index, (&ai, &ni)) in a.data().iter().zip(n.data()).enumerate() {
                let (ai, ni) = (ai.as_f64(), ni.as_f64());
                let err = (ai - ni).abs() / ni.abs().max(RELATIVE_FLOOR);
                let at = ParamIndex {
                    layer,
                    tensor,
                    index,
                };
                report.checked += 1;
                if err.is_nan() || err >= tolerance {
                    report.failures.push(at);
                }
                if err > report.max_relative_error || err.is_nan() {
                    report.max_relative_error = err;
                    report.worst = Some(at);
                }
            }
        }
    }
    report.passed = report.failures.is_empty();
    report
}

fn check_size<T: Scalar>(network: &Network<T>) -> Result<(), NnError> {
    if network.param_count() > MAX_CHECKED_PARAMS {
        return Err(NnError::Spec(format!(
            "gradient check limited to {MAX_CHECKED_PARAMS} parameters, network has {}",
            network.param_count()
        )));
    }
    Ok(())
}

/// Checks backpropagation through the whole network for the scalar objective
/// `loss_fn(network(input))`, where `loss_fn` returns the loss and its
/// gradient with respect to the network output.
pub fn grad_check<T, F>(
    network: &mut Network<T>,
    loss_fn: F,
    input: &Tensor<T>,
    tolerance: f64,
) -> Result<GradCheckReport, NnError>
where
    T: Scalar,
    F: Fn(&Tensor<T>) -> Result<(T, Tensor<T>), NnError>,
{
    check_size(network)?;
    let output = network.forward(input)?;
    let (_, upstream) = loss_fn(&output)?;
    let analytic = network.backward(&upstream)?;
    let numeric = numeric_gradients(network, T::lit(FD_STEP), |net| {
        let out = net.predict(input).expect("shapes validated by the forward pass");
        loss_fn(&out).expect("loss validated by the forward pass").0
    });
    Ok(compare_gradients(&analytic, &numeric, tolerance))
}

/// Variant of [`grad_check`] for softmax-headed networks whose loss reports its
/// gradient with respect to the logits (fused softmax/cross-entropy).
pub fn grad_check_logits<T, F>(
    network: &mut Network<T>,
    loss_fn: F,
    input: &Tensor<T>,
    tolerance: f64,
) -> Result<GradCheckReport, NnError>
where
    T: Scalar,
    F: Fn(&Tensor<T>) -> Result<(T, Tensor<T>), NnError>,
{
    check_size(network)?;
    let probs = network.forward(input)?;
    let (_, logit_grad) = loss_fn(&probs)?;
    let mut analytic = Gradients::zeros_like(network);
    network.accumulate_backward_from_logits(&logit_grad, &mut analytic)?;
    let numeric = numeric_gradients(network, T::lit(FD_STEP), |net| {
        let out = net.predict(input).expect("shapes validated by the forward pass");
        loss_fn(&out).expect("loss validated by the forward pass").0
    });
    Ok(compare_gradients(&analytic, &numeric, tolerance))
}
