use super::scalar::Scalar;
use super::tensor::Tensor;

#[derive(Clone, Debug)]
pub(crate) struct Cache {
    tokens: Vec<usize>,
    vocab: usize,
    input_shape: Vec<usize>,
}

/// Looks up one row per token. Returns `None` for ids outside `0..=vocab`.
pub(crate) fn forward<T: Scalar>(
    table: &Tensor<T>,
    vocab: usize,
    dim: usize,
    input: &Tensor<T>,
) -> Option<(Tensor<T>, Cache)> {
    let tokens = input
        .data()
        .iter()
        .map(|&x| {
            let id = x.to_usize()?;
            (T::from_usize(id)? == x && id <= vocab).then_some(id)
        })
        .collect::<Option<Vec<usize>>>()?;
    let mut out = Tensor::zeros(&[tokens.len(), dim]);
    for (pos, &tok) in tokens.iter().enumerate() {
        if tok < vocab {
            out.data_mut()[pos * dim..(pos + 1) * dim]
                .copy_from_slice(&table.data()[tok * dim..(tok + 1) * dim]);
        }
    }
    let cache = Cache {
        tokens,
        vocab,
        input_shape: input.shape().to_vec(),
    };
    Some((out, cache))
}

pub(crate) fn backward<T: Scalar>(
    cache: &Cache,
    dim: usize,
    upstream: &[T],
    grad: &mut Tensor<T>,
) -> Vec<T> {
    let g = grad.data_mut();
    for (pos, &tok) in cache.tokens.iter().enumerate() {
        if tok == cache.vocab {
            continue;
        }
        for (gi, &ui) in g[tok * dim..(tok + 1) * dim]
            .iter_mut()
            .zip(&upstream[pos * dim..(pos + 1) * dim])
        {
            *gi += ui;
        }
    }
    vec![T::zero(); cache.input_shape.iter().product()]
}
