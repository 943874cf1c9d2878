use serde::{Deserialize, Serialize};

use super::error::NnError;
use super::network::{Gradients, Network};
use super::scalar::Scalar;
use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Plain SGD or bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    learning_rate: T,
    first_moment: Vec<Vec<Tensor<T>>>,
    second_moment: Vec<Vec<Tensor<T>>>,
    steps: u64,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: T, network: &Network<T>) -> Self {
        let zeros = || -> Vec<Vec<Tensor<T>>> {
            match kind {
                OptimizerKind::Sgd => Vec::new(),
                OptimizerKind::Adam => network
                    .layers()
                    .iter()
                    .map(|l| l.params.iter().map(|p| Tensor::zeros(p.shape())).collect())
                    .collect(),
            }
        };
        Self {
            kind,
            learning_rate,
            first_moment: zeros(),
            second_moment: zeros(),
            steps: 0,
        }
    }

    pub fn sgd(learning_rate: T, network: &Network<T>) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate, network)
    }

    pub fn adam(learning_rate: T, network: &Network<T>) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate, network)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> T {
        self.learning_rate
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Non-finite gradients are rejected before any
    /// parameter is touched.
    pub fn step(&mut self, network: &mut Network<T>, grads: &Gradients<T>) -> Result<(), NnError> {
        if grads.num_layers() != network.layers().len() {
            return Err(NnError::Spec("gradient buffer does not match network".into()));
        }
        for layer in 0..grads.num_layers() {
            if !grads.layer(layer).iter().all(Tensor::is_finite) {
                return Err(NnError::NonFiniteGradient { layer });
            }
        }
        self.steps += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for layer in 0..grads.num_layers() {
                    for (j, g) in grads.layer(layer).iter().enumerate() {
                        let p = network.param_mut(layer, j);
                        for (w, &gi) in p.data_mut().iter_mut().zip(g.data()) {
                            *w -= lr * gi;
                        }
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2), T::lit(ADAM_EPSILON));
                let t = i32::try_from(self.steps).unwrap_or(i32::MAX);
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                for layer in 0..grads.num_layers() {
                    for (j, g) in grads.layer(layer).iter().enumerate() {
                        let m = self.first_moment[layer][j].data_mut();
                        let v = self.second_moment[layer][j].data_mut();
                        let p = network.param_mut(layer, j).data_mut();
                        for i in 0..p.len() {
                            let gi = g.data()[i];
                            m[i] = b1 * m[i] + (T::one() - b1) * gi;
                            v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                            let m_hat = m[i] / c1;
                            let v_hat = v[i] / c2;
                            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
