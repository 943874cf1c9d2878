//! Finite-difference checks of every layer kind and loss on small networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::{
    cross_entropy_loss, grad_check, grad_check_logits, huber_loss, mse_loss, Activation,
    GradCheckReport, LayerSpec, NnError,
};
use crate::{Network, Tensor};

pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheckCase {
    pub name: &'static str,
    pub report: GradCheckReport,
}

fn sequence(rng: &mut ChaCha8Rng, steps: usize, dim: usize) -> Tensor {
    let data = (0..steps * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(vec![steps, dim], data).expect("shape matches data")
}

fn half_sum_of_squares(out: &Tensor) -> Result<(f64, Tensor), NnError> {
    let loss = 0.5 * out.data().iter().map(|v| v * v).sum::<f64>();
    Ok((loss, out.clone()))
}

fn dense_net(seed: u64) -> Result<Network, NnError> {
    Network::new(
        vec![
            LayerSpec::dense(4, 5, Activation::Tanh),
            LayerSpec::dense(5, 3, Activation::Identity),
        ],
        seed,
    )
}

/// Output of `net` on `input` shifted by `offset`, as a regression target.
fn shifted_target(net: &Network, input: &Tensor, offset: &[f64]) -> Result<Tensor, NnError> {
    let mut t = net.predict(input)?;
    for (v, o) in t.data_mut().iter_mut().zip(offset.iter().cycle()) {
        *v += o;
    }
    Ok(t)
}

/// Checks dense, Conv1d, LSTM over 2 and 5 steps, embedding, MSE, both Huber
/// branches (δ = 2) and return-weighted cross-entropy through softmax.
pub fn gradcheck_suite(tolerance: f64) -> Result<Vec<GradCheckCase>, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases = Vec::new();
    let mut push = |name, report| cases.push(GradCheckCase { name, report });

    let x4 = Tensor::from_vec(vec![0.3, -0.8, 1.1, 0.05]);
    let mut net = Network::new(
        vec![
            LayerSpec::dense(4, 5, Activation::Tanh),
            LayerSpec::dense(5, 4, Activation::Relu),
            LayerSpec::dense(4, 3, Activation::Identity),
        ],
        1,
    )?;
    push("dense", grad_check(&mut net, half_sum_of_squares, &x4, tolerance)?);

    let mut net = Network::new(
        vec![
            LayerSpec::Conv1d { in_dim: 3, out_dim: 4, kernel_width: 2 },
            LayerSpec::dense(4, 2, Activation::Tanh),
        ],
        2,
    )?;
    let seq = sequence(&mut rng, 5, 3);
    push("conv1d", grad_check(&mut net, half_sum_of_squares, &seq, tolerance)?);

    for (name, steps) in [("lstm-2-steps", 2), ("lstm-5-steps", 5)] {
        let mut net = Network::new(
            vec![
                LayerSpec::Lstm { in_dim: 3, out_dim: 4 },
                LayerSpec::dense(4, 2, Activation::Identity),
            ],
            3,
        )?;
        let seq = sequence(&mut rng, steps, 3);
        push(name, grad_check(&mut net, half_sum_of_squares, &seq, tolerance)?);
    }

    let mut net = Network::new(
        vec![
            LayerSpec::Embedding { vocab: 6, dim: 3 },
            LayerSpec::Lstm { in_dim: 3, out_dim: 3 },
            LayerSpec::dense(3, 2, Activation::Identity),
        ],
        4,
    )?;
    let tokens = Tensor::from_vec(vec![6.0, 2.0, 5.0, 2.0]);
    push("embedding", grad_check(&mut net, half_sum_of_squares, &tokens, tolerance)?);

    let mut net = dense_net(5)?;
    let target = shifted_target(&net, &x4, &[0.7, -1.3, 0.4])?;
    push("mse", grad_check(&mut net, |p: &Tensor| mse_loss(p, &target), &x4, tolerance)?);

    let mut net = dense_net(6)?;
    let target = shifted_target(&net, &x4, &[0.9, -1.2, 0.5])?;
    push(
        "huber-quadratic",
        grad_check(&mut net, |p: &Tensor| huber_loss(p, &target, 2.0), &x4, tolerance)?,
    );
    let mut net = dense_net(7)?;
    let target = shifted_target(&net, &x4, &[4.0, -5.5, 3.0])?;
    push(
        "huber-linear",
        grad_check(&mut net, |p: &Tensor| huber_loss(p, &target, 2.0), &x4, tolerance)?,
    );

    let mut net = Network::new(
        vec![
            LayerSpec::Lstm { in_dim: 2, out_dim: 3 },
            LayerSpec::dense(3, 4, Activation::Identity),
            LayerSpec::Softmax { dim: 4 },
        ],
        8,
    )?;
    let seq = sequence(&mut rng, 4, 2);
    push(
        "weighted-cross-entropy",
        grad_check_logits(
            &mut net,
            |p: &Tensor| {
                let ce = cross_entropy_loss(p, 1, -1.7)?;
                Ok((ce.loss, ce.logit_grad))
            },
            &seq,
            tolerance,
        )?,
    );
    Ok(cases)
}
