use rand::Rng;
use serde::{Deserialize, Serialize};

use super::error::NnError;
use super::scalar::Scalar;
use super::tensor::Tensor;
use super::{conv1d, dense, embedding, lstm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation and the activation output.
    #[inline]
    pub fn derivative<T: Scalar>(self, pre: T, out: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - out * out,
        }
    }
}

/// Layer kind together with its dimensions.
///
/// Sequence layers (`Embedding`, `Conv1d`, `Lstm`) consume a `[seq × features]`
/// tensor; `Conv1d` and `Lstm` reduce it to a vector (global max-pool and final
/// hidden state respectively). `Dense` and `Softmax` act on flat vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Token lookup; token id `vocab` is the padding token and maps to zeros.
    Embedding { vocab: usize, dim: usize },
    Dense {
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
    },
    Conv1d {
        in_dim: usize,
        out_dim: usize,
        kernel_width: usize,
    },
    Lstm { in_dim: usize, out_dim: usize },
    Softmax { dim: usize },
}

impl LayerSpec {
    pub fn dense(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec::Dense {
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn out_dim(&self) -> usize {
        match *self {
            LayerSpec::Embedding { dim, .. } => dim,
            LayerSpec::Dense { out_dim, .. }
            | LayerSpec::Conv1d { out_dim, .. }
            | LayerSpec::Lstm { out_dim, .. } => out_dim,
            LayerSpec::Softmax { dim } => dim,
        }
    }

    /// Feature width expected from the previous layer, if constrained.
    pub fn in_dim(&self) -> Option<usize> {
        match *self {
            LayerSpec::Embedding { .. } => None,
            LayerSpec::Dense { in_dim, .. }
            | LayerSpec::Conv1d { in_dim, .. }
            | LayerSpec::Lstm { in_dim, .. } => Some(in_dim),
            LayerSpec::Softmax { dim } => Some(dim),
        }
    }

    pub(crate) fn validate(&self) -> Result<(), NnError> {
        let ok = match *self {
            LayerSpec::Embedding { vocab, dim } => vocab > 0 && dim > 0,
            LayerSpec::Dense { in_dim, out_dim, .. } | LayerSpec::Lstm { in_dim, out_dim } => {
                in_dim > 0 && out_dim > 0
            }
            LayerSpec::Conv1d {
                in_dim,
                out_dim,
                kernel_width,
            } => in_dim > 0 && out_dim > 0 && kernel_width > 0,
            LayerSpec::Softmax { dim } => dim > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(NnError::Spec(format!("non-positive dimension in {self:?}")))
        }
    }

    /// Shapes of the parameter tensors, in storage order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Embedding { vocab, dim } => vec![vec![vocab, dim]],
            LayerSpec::Dense { in_dim, out_dim, .. } => vec![vec![out_dim, in_dim], vec![out_dim]],
            LayerSpec::Conv1d {
                in_dim,
                out_dim,
                kernel_width,
            } => vec![vec![out_dim, kernel_width, in_dim], vec![out_dim]],
            LayerSpec::Lstm { in_dim, out_dim } => vec![
                vec![4 * out_dim, in_dim],
                vec![4 * out_dim, out_dim],
                vec![4 * out_dim],
            ],
            LayerSpec::Softmax { .. } => Vec::new(),
        }
    }

    /// Uniform `±1/√fan_in` initialization; LSTM forget-gate bias starts at 1.
    pub(crate) fn init_params<T: Scalar, R: Rng>(&self, rng: &mut R) -> Vec<Tensor<T>> {
        let fan_ins: Vec<usize> = match *self {
            LayerSpec::Embedding { dim, .. } => vec![dim],
            LayerSpec::Dense { in_dim, .. } => vec![in_dim, in_dim],
            LayerSpec::Conv1d {
                in_dim,
                kernel_width,
                ..
            } => vec![in_dim * kernel_width; 2],
            LayerSpec::Lstm { in_dim, out_dim } => vec![in_dim, out_dim, out_dim],
            LayerSpec::Softmax { .. } => Vec::new(),
        };
        let mut params: Vec<Tensor<T>> = self
            .param_shapes()
            .iter()
            .zip(fan_ins)
            .map(|(shape, fan_in)| {
                let bound = 1.0 / (fan_in as f64).sqrt();
                let n = shape.iter().product();
                let data = (0..n)
                    .map(|_| T::lit(rng.random_range(-bound..=bound)))
                    .collect();
                Tensor::new(shape.clone(), data).expect("shape matches generated data")
            })
            .collect();
        if let LayerSpec::Lstm { out_dim, .. } = *self {
            let bias = params[2].data_mut();
            bias[out_dim..2 * out_dim].fill(T::one());
        }
        params
    }
}

#[derive(Clone, Debug)]
pub(crate) enum LayerCache<T> {
    Embedding(embedding::Cache),
    Dense(dense::Cache<T>),
    Conv1d(conv1d::Cache<T>),
    Lstm(lstm::Cache<T>),
    Softmax(Vec<T>),
}

/// A layer: its spec plus parameter tensors.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub params: Vec<Tensor<T>>,
    #[serde(skip)]
    pub(crate) cache: Option<LayerCache<T>>,
}

impl<T: Scalar> PartialEq for Layer<T> {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.params == other.params
    }
}

impl<T: Scalar> Layer<T> {
    pub(crate) fn forward(
        &self,
        index: usize,
        input: &Tensor<T>,
    ) -> Result<(Tensor<T>, LayerCache<T>), NnError> {
        let shape_err = |expected: String| NnError::Shape {
            layer: index,
            expected,
            found: input.shape().to_vec(),
        };
        match self.spec {
            LayerSpec::Embedding { vocab, dim } => {
                let (out, cache) = embedding::forward(&self.params[0], vocab, dim, input)
                    .ok_or_else(|| shape_err(format!("token ids in 0..={vocab}")))?;
                Ok((out, LayerCache::Embedding(cache)))
            }
            LayerSpec::Dense {
                in_dim,
                out_dim,
                activation,
            } => {
                if input.len() != in_dim {
                    return Err(shape_err(format!("{in_dim} values")));
                }
                let (out, cache) = dense::forward(&self.params, out_dim, activation, input.data());
                Ok((Tensor::from_vec(out), LayerCache::Dense(cache)))
            }
            LayerSpec::Conv1d {
                in_dim,
                kernel_width,
                ..
            } => {
                if input.cols() != in_dim || input.rows() < kernel_width || input.shape().len() < 2
                {
                    return Err(shape_err(format!(
                        "[seq >= {kernel_width} x {in_dim}]"
                    )));
                }
                let (out, cache) = conv1d::forward(&self.params, kernel_width, input);
                Ok((Tensor::from_vec(out), LayerCache::Conv1d(cache)))
            }
            LayerSpec::Lstm { in_dim, out_dim } => {
                if input.cols() != in_dim || input.rows() == 0 || input.shape().len() < 2 {
                    return Err(shape_err(format!("[seq >= 1 x {in_dim}]")));
                }
                let (out, cache) = lstm::forward(&self.params, out_dim, input);
                Ok((Tensor::from_vec(out), LayerCache::Lstm(cache)))
            }
            LayerSpec::Softmax { dim } => {
                if input.len() != dim {
                    return Err(shape_err(format!("{dim} values")));
                }
                let p = softmax(input.data());
                Ok((Tensor::from_vec(p.clone()), LayerCache::Softmax(p)))
            }
        }
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub(crate) fn backward(
        &self,
        cache: &LayerCache<T>,
        upstream: &[T],
        grads: &mut [Tensor<T>],
    ) -> Vec<T> {
        match (&self.spec, cache) {
            (LayerSpec::Embedding { dim, .. }, LayerCache::Embedding(c)) => {
                embedding::backward(c, *dim, upstream, &mut grads[0])
            }
            (LayerSpec::Dense { activation, .. }, LayerCache::Dense(c)) => {
                dense::backward(&self.params, *activation, c, upstream, grads)
            }
            (LayerSpec::Conv1d { kernel_width, .. }, LayerCache::Conv1d(c)) => {
                conv1d::backward(&self.params, *kernel_width, c, upstream, grads)
            }
            (LayerSpec::Lstm { out_dim, .. }, LayerCache::Lstm(c)) => {
                lstm::backward(&self.params, *out_dim, c, upstream, grads)
            }
            (LayerSpec::Softmax { .. }, LayerCache::Softmax(p)) => softmax_backward(p, upstream),
            _ => unreachable!("layer cache kind always matches its spec"),
        }
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: T = out.iter().copied().sum();
    out.iter_mut().for_each(|p| *p = *p / sum);
    out
}

fn softmax_backward<T: Scalar>(p: &[T], upstream: &[T]) -> Vec<T> {
    let dot: T = p.iter().zip(upstream).map(|(&a, &b)| a * b).sum();
    p.iter()
        .zip(upstream)
        .map(|(&pi, &gi)| pi * (gi - dot))
        .collect()
}
