use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("tensor shape {shape:?} does not hold {len} values")]
    ShapeData { shape: Vec<usize>, len: usize },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    Mismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("layer {layer}: expected input {expected}, got shape {found:?}")]
    Shape {
        layer: usize,
        expected: String,
        found: Vec<usize>,
    },
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("invalid loss configuration: {0}")]
    Loss(String),
    #[error("backward called without a preceding forward pass")]
    NoForwardCache,
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("model file I/O at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}
