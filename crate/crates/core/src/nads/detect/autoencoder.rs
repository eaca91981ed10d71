//! Fully connected autoencoder `d -> hidden -> code -> hidden -> d` with
//! rectifier activations on the hidden and code layers and a linear output.
//! Trained by per-sample gradient descent on the mean squared
//! reconstruction error.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nads::{quantile, sorted};
use crate::rng::site_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub relu: bool,
}

impl Layer {
    fn new<R: Rng>(n_in: usize, n_out: usize, relu: bool, rng: &mut R) -> Layer {
        let lim = (6.0 / n_in as f64).sqrt();
        let w = (0..n_in * n_out).map(|_| rng.gen_range(-lim..lim)).collect();
        Layer { n_in, n_out, w, b: vec![0.0; n_out], relu }
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z = self.b.clone();
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            *zo += row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
        let a = if self.relu { z.iter().map(|&v| v.max(0.0)).collect() } else { z.clone() };
        (z, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub code: usize,
    /// Threshold percentile of training reconstruction errors.
    pub percentile: f64,
    pub threshold_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, epochs: 3, hidden: 32, code: 4, percentile: 99.0, threshold_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub layers: Vec<Layer>,
    pub threshold: f64,
}

impl Autoencoder {
    pub fn new<R: Rng>(d: usize, hidden: usize, code: usize, rng: &mut R) -> Autoencoder {
        let layers = vec![
            Layer::new(d, hidden, true, rng),
            Layer::new(hidden, code, true, rng),
            Layer::new(code, hidden, true, rng),
            Layer::new(hidden, d, false, rng),
        ];
        Autoencoder { layers, threshold: f64::INFINITY }
    }

    pub fn train(x: &[Vec<f64>], cfg: &TrainConfig, seed: u64) -> Autoencoder {
        let d = x[0].len();
        let mut init = site_rng(seed, "autoencoder.init");
        let mut ae = Autoencoder::new(d, cfg.hidden, cfg.code, &mut init);
        let mut shuffle = site_rng(seed, "autoencoder.shuffle");
        let mut order: Vec<usize> = (0..x.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut shuffle);
            for &i in &order {
                ae.sgd_step(&x[i], cfg.learning_rate);
            }
        }
        let errors = sorted(x.iter().map(|v| ae.loss(v)).collect());
        ae.threshold = quantile(&errors, cfg.percentile / 100.0) * cfg.threshold_scale;
        ae
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in &self.layers {
            a = l.forward(&a).1;
        }
        a
    }

    /// Mean squared reconstruction error.
    pub fn loss(&self, x: &[f64]) -> f64 {
        let y = self.reconstruct(x);
        y.iter().zip(x).map(|(y, x)| (y - x) * (y - x)).sum::<f64>() / x.len() as f64
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.loss(x)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// All weights and biases, layer by layer (weights first).
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.w);
            p.extend_from_slice(&l.b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut i = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&p[i..i + nw]);
            i += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[i..i + nb]);
            i += nb;
        }
    }

    /// Loss and its gradient with respect to [`Autoencoder::params`].
    pub fn loss_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut acts = vec![x.to_vec()];
        let mut pre = Vec::new();
        for l in &self.layers {
            let (z, a) = l.forward(acts.last().expect("input"));
            pre.push(z);
            acts.push(a);
        }
        let y = acts.last().expect("output");
        let n = x.len() as f64;
        let loss = y.iter().zip(x).map(|(y, x)| (y - x) * (y - x)).sum::<f64>() / n;
        let mut da: Vec<f64> = y.iter().zip(x).map(|(y, x)| 2.0 * (y - x) / n).collect();

        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(self.layers.len());
        for (li, l) in self.layers.iter().enumerate().rev() {
            let delta: Vec<f64> = if l.relu {
                da.iter().zip(&pre[li]).map(|(d, z)| if *z > 0.0 { *d } else { 0.0 }).collect()
            } else {
                da
            };
            let a_prev = &acts[li];
            let mut gw = vec![0.0; l.w.len()];
            for o in 0..l.n_out {
                for i in 0..l.n_in {
                    gw[o * l.n_in + i] = delta[o] * a_prev[i];
                }
            }
            let mut next = vec![0.0; l.n_in];
            for o in 0..l.n_out {
                for (i, nx) in next.iter_mut().enumerate() {
                    *nx += l.w[o * l.n_in + i] * delta[o];
                }
            }
            grads.push((gw, delta));
            da = next;
        }
        grads.reverse();
        let mut g = Vec::with_capacity(self.param_count());
        for (gw, gb) in grads {
            g.extend(gw);
            g.extend(gb);
        }
        (loss, g)
    }

    pub fn sgd_step(&mut self, x: &[f64], lr: f64) -> f64 {
        let (loss, g) = self.loss_and_grad(x);
        let mut p = self.params();
        for (p, g) in p.iter_mut().zip(&g) {
            *p -= lr * g;
        }
        self.set_params(&p);
        loss
    }
}
