use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Fully connected network with rectifier hidden layers and a linear
/// output layer.
///
/// Parameters live in one flat buffer; each layer stores its weight matrix
/// (row-major, `outputs × inputs`) followed by its bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Per-evaluation activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl MlpCache {
    pub fn new(mlp: &Mlp) -> Self {
        let widest = mlp.sizes.iter().copied().max().unwrap_or(0);
        Self {
            acts: mlp.sizes.iter().map(|n| alloc::vec![0.0; *n]).collect(),
            delta: alloc::vec![0.0; widest],
            delta_next: alloc::vec![0.0; widest],
        }
    }

    /// Network input of the last forward pass.
    pub fn input(&self) -> &[f64] {
        &self.acts[0]
    }

    pub fn input_mut(&mut self) -> &mut [f64] {
        &mut self.acts[0]
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least one layer")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Zero-initialized network with `sizes = [inputs, hidden.., outputs]`.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        let n = param_count(sizes);
        Self::from_params(sizes, alloc::vec![0.0; n])
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            bail!(
                ModelState,
                "layer sizes {sizes:?} must have ≥ 2 positive entries"
            );
        }
        let expected = param_count(sizes);
        if params.len() != expected {
            bail!(
                ModelState,
                "expected {expected} parameters for layers {sizes:?}, got {}",
                params.len()
            );
        }
        if params.iter().any(|p| !p.is_finite()) {
            bail!(ModelState, "network parameters are not finite");
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut off = 0;
        offsets.push(0);
        for w in sizes.windows(2) {
            off += w[1] * w[0] + w[1];
            offsets.push(off);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
            offsets,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Weight matrix and bias of layer `i`.
    pub fn layer(&self, i: usize) -> (&[f64], &[f64]) {
        let (n_in, n_out) = (self.sizes[i], self.sizes[i + 1]);
        let start = self.offsets[i];
        let w_end = start + n_in * n_out;
        (
            &self.params[start..w_end],
            &self.params[w_end..w_end + n_out],
        )
    }

    /// Mutable weight matrix and bias of layer `i`.
    pub fn layer_mut(&mut self, i: usize) -> (&mut [f64], &mut [f64]) {
        let (n_in, n_out) = (self.sizes[i], self.sizes[i + 1]);
        let start = self.offsets[i];
        let w_end = start + n_in * n_out;
        let (w, rest) = self.params[start..w_end + n_out].split_at_mut(n_in * n_out);
        (w, rest)
    }

    /// Runs the network on `cache.input()`; the result is `cache.output()`.
    pub fn forward(&self, cache: &mut MlpCache) {
        let last = self.num_layers() - 1;
        for i in 0..=last {
            let (w, b) = self.layer(i);
            let n_in = self.sizes[i];
            let (head, tail) = cache.acts.split_at_mut(i + 1);
            let input = &head[i];
            let out = &mut tail[0];
            for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
                let mut s = *bias;
                for (wi, xi) in row.iter().zip(input.iter()) {
                    s += wi * xi;
                }
                *o = if i < last { s.max(0.0) } else { s };
            }
        }
    }

    /// Accumulates `scale * d(output · grad_out)/dθ` into `grads` and, when
    /// `grad_input` is given, writes the gradient w.r.t. the network input.
    ///
    /// `cache` must hold the activations of the matching forward pass.
    pub fn backward(
        &self,
        cache: &mut MlpCache,
        grad_out: &[f64],
        scale: f64,
        grads: &mut [f64],
        grad_input: Option<&mut [f64]>,
    ) {
        let last = self.num_layers() - 1;
        let n_last = self.sizes[last + 1];
        cache.delta[..n_last].copy_from_slice(&grad_out[..n_last]);
        let want_input = grad_input.is_some();
        for i in (0..=last).rev() {
            let (n_in, n_out) = (self.sizes[i], self.sizes[i + 1]);
            if i < last {
                for (d, a) in cache.delta[..n_out].iter_mut().zip(&cache.acts[i + 1]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let start = self.offsets[i];
            let w_len = n_in * n_out;
            let (gw, gb) = grads[start..start + w_len + n_out].split_at_mut(w_len);
            let input = &cache.acts[i];
            for (o, d) in cache.delta[..n_out].iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let sd = scale * d;
                gb[o] += sd;
                for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                    *g += sd * x;
                }
            }
            if i > 0 || want_input {
                let (w, _) = self.layer(i);
                let next = &mut cache.delta_next[..n_in];
                next.fill(0.0);
                for (o, d) in cache.delta[..n_out].iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (nx, wi) in next.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *nx += d * wi;
                    }
                }
                core::mem::swap(&mut cache.delta, &mut cache.delta_next);
            }
        }
        if let Some(gi) = grad_input {
            gi.copy_from_slice(&cache.delta[..self.sizes[0]]);
        }
    }
}
