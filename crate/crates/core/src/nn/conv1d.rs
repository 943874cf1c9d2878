use super::scalar::Scalar;
use super::tensor::Tensor;

#[derive(Clone, Debug)]
pub(crate) struct Cache<T> {
    input: Tensor<T>,
    /// Winning window start per filter.
    argmax: Vec<usize>,
}

/// Valid 1-D convolution over the sequence axis followed by global max-pooling.
pub(crate) fn forward<T: Scalar>(
    params: &[Tensor<T>],
    kernel_width: usize,
    input: &Tensor<T>,
) -> (Vec<T>, Cache<T>) {
    let (w, b) = (params[0].data(), params[1].data());
    let filters = b.len();
    let channels = input.cols();
    let positions = input.rows() + 1 - kernel_width;
    let window = kernel_width * channels;
    let x = input.data();
    let mut out = vec![T::neg_infinity(); filters];
    let mut argmax = vec![0; filters];
    for f in 0..filters {
        let wf = &w[f * window..(f + 1) * window];
        for p in 0..positions {
            let xs = &x[p * channels..p * channels + window];
            let z = b[f] + wf.iter().zip(xs).map(|(&a, &c)| a * c).sum::<T>();
            if z > out[f] {
                out[f] = z;
                argmax[f] = p;
            }
        }
    }
    let cache = Cache {
        input: input.clone(),
        argmax,
    };
    (out, cache)
}

pub(crate) fn backward<T: Scalar>(
    params: &[Tensor<T>],
    kernel_width: usize,
    cache: &Cache<T>,
    upstream: &[T],
    grads: &mut [Tensor<T>],
) -> Vec<T> {
    let w = params[0].data();
    let channels = cache.input.cols();
    let window = kernel_width * channels;
    let x = cache.input.data();
    let mut dx = vec![T::zero(); x.len()];
    let (gw, gb) = grads.split_at_mut(1);
    let (gw, gb) = (gw[0].data_mut(), gb[0].data_mut());
    for (f, &g) in upstream.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        gb[f] += g;
        let start = cache.argmax[f] * channels;
        let xs = &x[start..start + window];
        for (j, &xj) in xs.iter().enumerate() {
            gw[f * window + j] += g * xj;
            dx[start + j] += g * w[f * window + j];
        }
    }
    dx
}
