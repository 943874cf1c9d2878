use super::layer::Activation;
use super::scalar::Scalar;
use super::tensor::Tensor;

#[derive(Clone, Debug)]
pub(crate) struct Cache<T> {
    input: Vec<T>,
    pre: Vec<T>,
    out: Vec<T>,
}

pub(crate) fn forward<T: Scalar>(
    params: &[Tensor<T>],
    out_dim: usize,
    activation: Activation,
    x: &[T],
) -> (Vec<T>, Cache<T>) {
    let (w, b) = (params[0].data(), params[1].data());
    let in_dim = x.len();
    let pre: Vec<T> = (0..out_dim)
        .map(|o| {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            b[o] + row.iter().zip(x).map(|(&wi, &xi)| wi * xi).sum::<T>()
        })
        .collect();
    let out: Vec<T> = pre.iter().map(|&z| activation.apply(z)).collect();
    let cache = Cache {
        input: x.to_vec(),
        pre,
        out: out.clone(),
    };
    (out, cache)
}

pub(crate) fn backward<T: Scalar>(
    params: &[Tensor<T>],
    activation: Activation,
    cache: &Cache<T>,
    upstream: &[T],
    grads: &mut [Tensor<T>],
) -> Vec<T> {
    let w = params[0].data();
    let in_dim = cache.input.len();
    let mut dx = vec![T::zero(); in_dim];
    let (gw, gb) = grads.split_at_mut(1);
    let (gw, gb) = (gw[0].data_mut(), gb[0].data_mut());
    for (o, &g) in upstream.iter().enumerate() {
        let dz = g * activation.derivative(cache.pre[o], cache.out[o]);
        if dz == T::zero() {
            continue;
        }
        gb[o] += dz;
        let row = o * in_dim..(o + 1) * in_dim;
        for ((gwi, &xi), (dxi, &wi)) in gw[row.clone()]
            .iter_mut()
            .zip(&cache.input)
            .zip(dx.iter_mut().zip(&w[row]))
        {
            *gwi += dz * xi;
            *dxi += dz * wi;
        }
    }
    dx
}
