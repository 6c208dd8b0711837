//! Fully connected networks with tanh hidden layers and hand-written
//! reverse-mode gradients, plus Adam.

use serde::{Deserialize, Serialize};

use crate::rng::Stream;

/// Parameters stored flat, layer by layer: weights (row-major, `out x in`)
/// followed by biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations of one forward pass; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct Cache {
    pub acts: Vec<Vec<f64>>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

pub fn n_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Uniform fan-in initialization; the output layer is scaled by `out_scale`.
    pub fn new(sizes: &[usize], out_scale: f64, rng: &mut Stream) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0));
        let mut params = Vec::with_capacity(n_params(sizes));
        let last = sizes.len() - 2;
        for (l, w) in sizes.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt() * if l == last { out_scale } else { 1.0 };
            for _ in 0..w[0] * w[1] {
                params.push(rng.uniform_in(-bound, bound));
            }
            params.extend(std::iter::repeat(0.0).take(w[1]));
        }
        Self { sizes: sizes.to_vec(), params }
    }

    pub fn n_in(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_out(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn offset(&self, layer: usize) -> usize {
        n_params(&self.sizes[..=layer])
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cache(x).acts.pop().unwrap()
    }

    pub fn forward_cache(&self, x: &[f64]) -> Cache {
        assert_eq!(x.len(), self.n_in());
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let a = &acts[l];
            let hidden = l + 1 < self.n_layers();
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let z = b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>();
                    if hidden {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        Cache { acts }
    }

    /// Adds `d(loss)/d(params)` into `grad` and returns `d(loss)/d(input)`.
    pub fn backward(&self, cache: &Cache, dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.params.len());
        let mut d = dout.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < self.n_layers() {
                for (di, a) in d.iter_mut().zip(&cache.acts[l + 1]) {
                    *di *= 1.0 - a * a;
                }
            }
            let off = self.offset(l);
            let a = &cache.acts[l];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let g = d[o];
                if g == 0.0 {
                    continue;
                }
                let row = off + o * n_in;
                for i in 0..n_in {
                    grad[row + i] += g * a[i];
                    prev[i] += g * self.params[row + i];
                }
                grad[off + n_in * n_out + o] += g;
            }
            d = prev;
        }
        d
    }

    /// `self <- tau * src + (1 - tau) * self`.
    pub fn soft_update(&mut self, src: &Mlp, tau: f64) {
        for (t, s) in self.params.iter_mut().zip(&src.params) {
            *t = tau * s + (1.0 - tau) * *t;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
