use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::error::NnError;
use super::layer::{Layer, LayerSpec};
use super::scalar::Scalar;
use super::tensor::Tensor;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Per-layer, per-tensor gradients shaped like a network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    layers: Vec<Vec<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(network: &Network<T>) -> Self {
        let layers = network
            .layers
            .iter()
            .map(|l| l.params.iter().map(|p| Tensor::zeros(p.shape())).collect())
            .collect();
        Self { layers }
    }

    pub fn layer(&self, index: usize) -> &[Tensor<T>] {
        &self.layers[index]
    }

    pub fn layer_mut(&mut self, index: usize) -> &mut [Tensor<T>] {
        &mut self.layers[index]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn scale(&mut self, factor: T) {
        self.iter_mut().for_each(|t| t.scale(factor));
    }

    pub fn zero(&mut self) {
        self.iter_mut().for_each(|t| t.fill(T::zero()));
    }

    pub fn max_abs(&self) -> T {
        self.iter().fold(T::zero(), |m, t| m.max(t.max_abs()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.layers.iter_mut().flatten()
    }
}

/// Feed-forward stack of layers with cached activations for reverse-mode gradients.
#[derive(Clone, Debug)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
    init_seed: u64,
}

impl<T: Scalar> PartialEq for Network<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.init_seed == other.init_seed
    }
}

#[derive(Serialize)]
#[serde(bound = "T: Scalar")]
struct ModelFileRef<'a, T> {
    version: u32,
    init_seed: u64,
    layers: &'a [Layer<T>],
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelFile<T> {
    version: u32,
    init_seed: u64,
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Network<T> {
    /// Builds a network with parameters drawn from a seeded RNG.
    pub fn new(specs: Vec<LayerSpec>, init_seed: u64) -> Result<Self, NnError> {
        validate_chain(&specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let layers = specs
            .into_iter()
            .map(|spec| {
                let params = spec.init_params(&mut rng);
                Layer {
                    spec,
                    params,
                    cache: None,
                }
            })
            .collect();
        Ok(Self { layers, init_seed })
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.params)
            .map(Tensor::len)
            .sum()
    }

    pub fn param(&self, layer: usize, tensor: usize) -> &Tensor<T> {
        &self.layers[layer].params[tensor]
    }

    pub fn param_mut(&mut self, layer: usize, tensor: usize) -> &mut Tensor<T> {
        &mut self.layers[layer].params[tensor]
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.spec.out_dim())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| &l.params)
            .all(Tensor::is_finite)
    }

    /// Forward pass that caches activations for a subsequent backward pass.
    pub fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut x = input.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let (y, cache) = layer.forward(i, &x)?;
            layer.cache = Some(cache);
            x = y;
        }
        Ok(x)
    }

    /// Inference without touching the activation caches.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(i, &x)?.0;
        }
        Ok(x)
    }

    /// Gradients of `upstream · output` with respect to every parameter.
    pub fn backward(&mut self, upstream: &Tensor<T>) -> Result<Gradients<T>, NnError> {
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_backward(upstream, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Network::backward`], adding into an existing gradient buffer.
    pub fn accumulate_backward(
        &mut self,
        upstream: &Tensor<T>,
        grads: &mut Gradients<T>,
    ) -> Result<(), NnError> {
        self.backward_through(self.layers.len(), upstream, grads)
    }

    /// Backward pass entered below a trailing softmax layer, with `logit_grad`
    /// the gradient with respect to its input.
    pub fn accumulate_backward_from_logits(
        &mut self,
        logit_grad: &Tensor<T>,
        grads: &mut Gradients<T>,
    ) -> Result<(), NnError> {
        match self.layers.last().map(|l| &l.spec) {
            Some(LayerSpec::Softmax { .. }) => {
                self.backward_through(self.layers.len() - 1, logit_grad, grads)
            }
            _ => Err(NnError::Spec("network does not end in a softmax layer".into())),
        }
    }

    fn backward_through(
        &mut self,
        top: usize,
        upstream: &Tensor<T>,
        grads: &mut Gradients<T>,
    ) -> Result<(), NnError> {
        if grads.num_layers() != self.layers.len() {
            return Err(NnError::Spec("gradient buffer does not match network".into()));
        }
        let expected = self.layers[..top].last().map_or(0, |l| l.spec.out_dim());
        if upstream.len() != expected {
            return Err(NnError::Shape {
                layer: top.saturating_sub(1),
                expected: format!("upstream gradient of {expected} values"),
                found: upstream.shape().to_vec(),
            });
        }
        let mut g = upstream.data().to_vec();
        for i in (0..top).rev() {
            let layer = &self.layers[i];
            let cache = layer.cache.as_ref().ok_or(NnError::NoForwardCache)?;
            g = layer.backward(cache, &g, grads.layer_mut(i));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        let file = ModelFileRef {
            version: MODEL_FORMAT_VERSION,
            init_seed: self.init_seed,
            layers: &self.layers,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(json: &str) -> Result<Self, NnError> {
        let file: ModelFile<T> = serde_json::from_str(json)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(NnError::Spec(format!(
                "unsupported model format version {}",
                file.version
            )));
        }
        let specs: Vec<LayerSpec> = file.layers.iter().map(|l| l.spec.clone()).collect();
        validate_chain(&specs)?;
        for layer in &file.layers {
            let shapes = layer.spec.param_shapes();
            let actual: Vec<Vec<usize>> =
                layer.params.iter().map(|p| p.shape().to_vec()).collect();
            let sized = layer
                .params
                .iter()
                .all(|p| p.len() == p.shape().iter().product::<usize>());
            if shapes != actual || !sized {
                return Err(NnError::Spec(format!(
                    "parameter shapes {actual:?} do not match {:?}",
                    layer.spec
                )));
            }
        }
        Ok(Self {
            layers: file.layers,
            init_seed: file.init_seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        fs::write(path, self.to_json()?).map_err(|source| NnError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let json = fs::read_to_string(path).map_err(|source| NnError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json)
    }
}

fn validate_chain(specs: &[LayerSpec]) -> Result<(), NnError> {
    if specs.is_empty() {
        return Err(NnError::Spec("network needs at least one layer".into()));
    }
    for (i, spec) in specs.iter().enumerate() {
        spec.validate()?;
        if i > 0 {
            if matches!(spec, LayerSpec::Embedding { .. }) {
                return Err(NnError::Spec(format!(
                    "layer {i}: embedding must be the first layer"
                )));
            }
            let prev = specs[i - 1].out_dim();
            if let Some(expected) = spec.in_dim() {
                if expected != prev {
                    return Err(NnError::Spec(format!(
                        "layer {i} expects width {expected} but layer {} emits {prev}",
                        i - 1
                    )));
                }
            }
        }
    }
    Ok(())
}
