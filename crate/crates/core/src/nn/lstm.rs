//! Single-layer LSTM emitting the final hidden state, with backpropagation
//! through time over the whole input sequence.
//!
//! Gate layout in the stacked `4H` pre-activation: input, forget, cell, output.

use super::scalar::{sigmoid, Scalar};
use super::tensor::Tensor;

#[derive(Clone, Debug)]
pub(crate) struct Cache<T> {
    input: Tensor<T>,
    /// Activated gates per step, `[T × 4H]`.
    gates: Vec<T>,
    /// Hidden states `h_0..h_T`, `[(T+1) × H]`.
    hidden: Vec<T>,
    /// Cell states `c_0..c_T`, `[(T+1) × H]`.
    cell: Vec<T>,
}

fn matvec_acc<T: Scalar>(m: &[T], cols: usize, v: &[T], out: &mut [T]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o += m[r * cols..(r + 1) * cols]
            .iter()
            .zip(v)
            .map(|(&a, &b)| a * b)
            .sum::<T>();
    }
}

pub(crate) fn forward<T: Scalar>(
    params: &[Tensor<T>],
    hidden: usize,
    input: &Tensor<T>,
) -> (Vec<T>, Cache<T>) {
    let (wx, wh, b) = (params[0].data(), params[1].data(), params[2].data());
    let steps = input.rows();
    let in_dim = input.cols();
    let h4 = 4 * hidden;
    let mut gates = vec![T::zero(); steps * h4];
    let mut hs = vec![T::zero(); (steps + 1) * hidden];
    let mut cs = vec![T::zero(); (steps + 1) * hidden];
    for t in 0..steps {
        let z = &mut gates[t * h4..(t + 1) * h4];
        z.copy_from_slice(b);
        matvec_acc(wx, in_dim, input.row(t), z);
        matvec_acc(wh, hidden, &hs[t * hidden..(t + 1) * hidden], z);
        for k in 0..hidden {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hidden + k]);
            let g = z[2 * hidden + k].tanh();
            let o = sigmoid(z[3 * hidden + k]);
            z[k] = i;
            z[hidden + k] = f;
            z[2 * hidden + k] = g;
            z[3 * hidden + k] = o;
            let c = f * cs[t * hidden + k] + i * g;
            cs[(t + 1) * hidden + k] = c;
            hs[(t + 1) * hidden + k] = o * c.tanh();
        }
    }
    let out = hs[steps * hidden..].to_vec();
    let cache = Cache {
        input: input.clone(),
        gates,
        hidden: hs,
        cell: cs,
    };
    (out, cache)
}

pub(crate) fn backward<T: Scalar>(
    params: &[Tensor<T>],
    hidden: usize,
    cache: &Cache<T>,
    upstream: &[T],
    grads: &mut [Tensor<T>],
) -> Vec<T> {
    let (wx, wh) = (params[0].data(), params[1].data());
    let input = &cache.input;
    let steps = input.rows();
    let in_dim = input.cols();
    let h4 = 4 * hidden;
    let mut dx = vec![T::zero(); input.len()];
    let mut dh = upstream.to_vec();
    let mut dc = vec![T::zero(); hidden];
    let mut dz = vec![T::zero(); h4];
    let [gwx, gwh, gb] = grads else {
        unreachable!("LSTM has three parameter tensors")
    };
    let (gwx, gwh, gb) = (gwx.data_mut(), gwh.data_mut(), gb.data_mut());
    let one = T::one();
    for t in (0..steps).rev() {
        let gate = &cache.gates[t * h4..(t + 1) * h4];
        let c_prev = &cache.cell[t * hidden..(t + 1) * hidden];
        let c_cur = &cache.cell[(t + 1) * hidden..(t + 2) * hidden];
        for k in 0..hidden {
            let (i, f, g, o) = (
                gate[k],
                gate[hidden + k],
                gate[2 * hidden + k],
                gate[3 * hidden + k],
            );
            let tc = c_cur[k].tanh();
            let d_o = dh[k] * tc;
            dc[k] += dh[k] * o * (one - tc * tc);
            let d_i = dc[k] * g;
            let d_g = dc[k] * i;
            let d_f = dc[k] * c_prev[k];
            dz[k] = d_i * i * (one - i);
            dz[hidden + k] = d_f * f * (one - f);
            dz[2 * hidden + k] = d_g * (one - g * g);
            dz[3 * hidden + k] = d_o * o * (one - o);
            dc[k] *= f;
        }
        let x_t = input.row(t);
        let h_prev = &cache.hidden[t * hidden..(t + 1) * hidden];
        dh.iter_mut().for_each(|v| *v = T::zero());
        let dx_t = &mut dx[t * in_dim..(t + 1) * in_dim];
        for (r, &d) in dz.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            gb[r] += d;
            let wx_row = &wx[r * in_dim..(r + 1) * in_dim];
            for ((g, dxi), (&xi, &wi)) in gwx[r * in_dim..(r + 1) * in_dim]
                .iter_mut()
                .zip(dx_t.iter_mut())
                .zip(x_t.iter().zip(wx_row))
            {
                *g += d * xi;
                *dxi += d * wi;
            }
            let wh_row = &wh[r * hidden..(r + 1) * hidden];
            for ((g, dhi), (&hi, &wi)) in gwh[r * hidden..(r + 1) * hidden]
                .iter_mut()
                .zip(dh.iter_mut())
                .zip(h_prev.iter().zip(wh_row))
            {
                *g += d * hi;
                *dhi += d * wi;
            }
        }
    }
    dx
}
