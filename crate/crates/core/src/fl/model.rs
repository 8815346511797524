//! Two-layer perceptron `input -> hidden (ReLU) -> classes (softmax)` with
//! cross-entropy loss, plus the traits the training loop is written against.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::data::Dataset;

/// Something that maps a feature vector to class scores.
pub trait Classifier {
    fn classes(&self) -> usize;
    fn logits(&self, x: &[f32], out: &mut [f64]);
}

/// A differentiable empirical loss over an indexed sample set.
pub trait LocalObjective: Sync {
    fn num_samples(&self) -> usize;
    fn dim(&self) -> usize;
    /// Mean loss over `batch`; the mean gradient is written into `grad`.
    fn loss_and_grad(&self, params: &[f64], batch: &[usize], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpArch {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl MlpArch {
    pub fn new(input: usize, hidden: usize, classes: usize) -> Self {
        MlpArch { input, hidden, classes }
    }

    pub fn num_params(&self) -> usize {
        self.input * self.hidden + self.hidden + self.hidden * self.classes + self.classes
    }

    // Layout: W1 (input-major, input x hidden), b1, W2 (hidden-major, hidden x classes), b2.
    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.input * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.hidden * self.classes;
        (b1, w2, b2)
    }

    /// He-uniform first layer, Glorot-uniform second layer, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.num_params()];
        let (b1, w2, b2) = self.offsets();
        let a1 = (6.0 / self.input as f64).sqrt();
        let u1 = Uniform::new_inclusive(-a1, a1).expect("finite bound");
        for w in &mut p[..b1] {
            *w = u1.sample(rng);
        }
        let a2 = (6.0 / (self.hidden + self.classes) as f64).sqrt();
        let u2 = Uniform::new_inclusive(-a2, a2).expect("finite bound");
        for w in &mut p[w2..b2] {
            *w = u2.sample(rng);
        }
        p
    }

    fn hidden_pre(&self, params: &[f64], x: &[f32], h: &mut [f64]) {
        let (b1, _, _) = self.offsets();
        h.copy_from_slice(&params[b1..b1 + self.hidden]);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let xj = xj as f64;
            let row = &params[j * self.hidden..(j + 1) * self.hidden];
            for (hk, w) in h.iter_mut().zip(row) {
                *hk += xj * w;
            }
        }
    }

    fn output(&self, params: &[f64], h: &[f64], out: &mut [f64]) {
        let (_, w2, b2) = self.offsets();
        out.copy_from_slice(&params[b2..b2 + self.classes]);
        for (k, &hk) in h.iter().enumerate() {
            if hk == 0.0 {
                continue;
            }
            let row = &params[w2 + k * self.classes..w2 + (k + 1) * self.classes];
            for (o, w) in out.iter_mut().zip(row) {
                *o += hk * w;
            }
        }
    }

    pub fn forward(&self, params: &[f64], x: &[f32], out: &mut [f64]) {
        let mut h = vec![0.0; self.hidden];
        self.hidden_pre(params, x, &mut h);
        for v in &mut h {
            *v = v.max(0.0);
        }
        self.output(params, &h, out);
    }

    /// Mean cross-entropy over `samples` of `data` and its gradient.
    pub fn loss_and_grad(&self, params: &[f64], data: &Dataset, samples: &[usize], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let (b1, w2, b2) = self.offsets();
        let mut pre = vec![0.0; self.hidden];
        let mut h = vec![0.0; self.hidden];
        let mut logits = vec![0.0; self.classes];
        let mut dh = vec![0.0; self.hidden];
        let mut loss = 0.0;
        for &i in samples {
            let x = data.features(i);
            let y = data.label(i) as usize;
            self.hidden_pre(params, x, &mut pre);
            for (hk, &p) in h.iter_mut().zip(&pre) {
                *hk = p.max(0.0);
            }
            self.output(params, &h, &mut logits);
            let lse = log_sum_exp(&logits);
            loss += lse - logits[y];
            // dL/dlogits = softmax - onehot
            for v in logits.iter_mut() {
                *v = (*v - lse).exp();
            }
            logits[y] -= 1.0;
            for (g, d) in grad[b2..b2 + self.classes].iter_mut().zip(&logits) {
                *g += d;
            }
            for k in 0..self.hidden {
                let row = &params[w2 + k * self.classes..w2 + (k + 1) * self.classes];
                dh[k] = if pre[k] > 0.0 { row.iter().zip(&logits).map(|(w, d)| w * d).sum() } else { 0.0 };
                if h[k] != 0.0 {
                    let g = &mut grad[w2 + k * self.classes..w2 + (k + 1) * self.classes];
                    for (gv, d) in g.iter_mut().zip(&logits) {
                        *gv += h[k] * d;
                    }
                }
            }
            for (g, d) in grad[b1..b1 + self.hidden].iter_mut().zip(&dh) {
                *g += d;
            }
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                let xj = xj as f64;
                let g = &mut grad[j * self.hidden..(j + 1) * self.hidden];
                for (gv, d) in g.iter_mut().zip(&dh) {
                    *gv += xj * d;
                }
            }
        }
        let n = samples.len().max(1) as f64;
        for g in grad.iter_mut() {
            *g /= n;
        }
        loss / n
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Parameters together with their architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub arch: MlpArch,
    pub params: Vec<f64>,
}

impl Model {
    pub fn new(arch: MlpArch, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), arch.num_params(), "parameter count does not match architecture");
        Model { arch, params }
    }

    pub fn init<R: Rng + ?Sized>(arch: MlpArch, rng: &mut R) -> Self {
        Model { arch, params: arch.init(rng) }
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// `theta += delta`.
    pub fn apply(&mut self, delta: &[f64]) {
        for (p, d) in self.params.iter_mut().zip(delta) {
            *p += d;
        }
    }
}

impl Classifier for Model {
    fn classes(&self) -> usize {
        self.arch.classes
    }

    fn logits(&self, x: &[f32], out: &mut [f64]) {
        self.arch.forward(&self.params, x, out)
    }
}

/// A client's shard of a dataset as a training objective.
#[derive(Debug, Clone, Copy)]
pub struct MlpObjective<'a> {
    pub arch: MlpArch,
    pub data: &'a Dataset,
    pub indices: &'a [usize],
}

impl LocalObjective for MlpObjective<'_> {
    fn num_samples(&self) -> usize {
        self.indices.len()
    }

    fn dim(&self) -> usize {
        self.arch.num_params()
    }

    fn loss_and_grad(&self, params: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
        let samples: Vec<usize> = batch.iter().map(|&b| self.indices[b]).collect();
        self.arch.loss_and_grad(params, self.data, &samples, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_data(rng: &mut ChaCha8Rng) -> Dataset {
        let n = 12;
        let dim = 6;
        let features: Vec<f32> = (0..n * dim)
            .map(|i| if i % 4 == 0 { 0.0 } else { rng.random_range(-1.0..1.0) })
            .collect();
        let labels = (0..n).map(|i| (i % 3) as u8).collect();
        Dataset::new(dim, 3, features, labels).unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let arch = MlpArch::new(6, 5, 3);
        for trial in 0..10 {
            let data = toy_data(&mut rng);
            let params = arch.init(&mut rng);
            let batch: Vec<usize> = (0..data.len()).collect();
            let mut grad = vec![0.0; arch.num_params()];
            arch.loss_and_grad(&params, &data, &batch, &mut grad);
            let h = 1e-6;
            let mut scratch = vec![0.0; arch.num_params()];
            for k in 0..arch.num_params() {
                let mut plus = params.clone();
                plus[k] += h;
                let mut minus = params.clone();
                minus[k] -= h;
                let lp = arch.loss_and_grad(&plus, &data, &batch, &mut scratch);
                let lm = arch.loss_and_grad(&minus, &data, &batch, &mut scratch);
                let fd = (lp - lm) / (2.0 * h);
                let denom = fd.abs().max(grad[k].abs()).max(1e-6);
                assert!((fd - grad[k]).abs() / denom < 1e-4, "trial {trial} param {k}: fd {fd} vs {}", grad[k]);
            }
        }
    }

    #[test]
    fn forward_matches_loss_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = MlpArch::new(6, 4, 3);
        let data = toy_data(&mut rng);
        let model = Model::init(arch, &mut rng);
        let mut out = vec![0.0; 3];
        model.logits(data.features(0), &mut out);
        let expect = log_sum_exp(&out) - out[data.label(0) as usize];
        let mut g = vec![0.0; arch.num_params()];
        let loss = arch.loss_and_grad(&model.params, &data, &[0], &mut g);
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn param_count() {
        assert_eq!(MlpArch::new(784, 32, 10).num_params(), 784 * 32 + 32 + 320 + 10);
    }
}
