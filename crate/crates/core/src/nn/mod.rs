//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Hidden layers use a rectifier; the output layer is linear and losses apply
//! their own link. Weights are stored input-major (`w[i * out + j]`) so a sparse
//! input row only touches the weight rows of its nonzero entries, which is what
//! keeps pixel encoders cheap.

mod checkpoint;
mod loss;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader};
pub use loss::{mse_loss, segmented_nll_loss, LossKind};
pub use train::{train, train_stages, Stage, TrainConfig, TrainReport};

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect();
        Self { inputs, outputs, weights, biases: vec![0.0; outputs] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.biases);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }
}

/// Fully connected network: rectifier on hidden layers, identity on the output.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Per-layer activations recorded by [`DenseNet::forward_trace`].
///
/// `acts[0]` is the input and `acts[k]` the output of layer `k`.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Parameter gradients laid out like the network.
#[derive(Clone, Debug)]
pub struct Grads {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zero(&mut self) {
        for g in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Flattened in checkpoint order: each layer's weights then biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

impl DenseNet {
    /// Glorot-uniform weights and zero biases, fully determined by `seed`.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        assert!(sizes.len() >= 2, "a network needs at least input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes.windows(2).map(|w| Layer::glorot(w[0], w[1], &mut rng)).collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let mut net = Self::new(sizes, 0);
        for l in &mut net.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        net
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::LengthMismatch { expected: self.param_count(), actual: flat.len() });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let (nw, nb) = (l.weights.len(), l.biases.len());
            l.weights.copy_from_slice(&flat[at..at + nw]);
            l.biases.copy_from_slice(&flat[at + nw..at + nw + nb]);
            at += nw + nb;
        }
        Ok(())
    }

    pub fn grads(&self) -> Grads {
        Grads {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::LengthMismatch { expected: self.input_len(), actual: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            l.affine(&cur, &mut next);
            if k < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(l.outputs);
            l.affine(&acts[k], &mut out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
        }
        Ok(Trace { acts })
    }

    /// Backpropagate `grad_out` through a recorded trace.
    ///
    /// Parameter gradients are accumulated into `grads` when given; the gradient
    /// with respect to the input is returned when `want_input` is set.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_out: &[f64],
        mut grads: Option<&mut Grads>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        assert_eq!(grad_out.len(), self.output_len());
        let mut delta = grad_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let input = &trace.acts[k];
            if let Some(g) = grads.as_deref_mut() {
                for (gb, d) in g.biases[k].iter_mut().zip(&delta) {
                    *gb += d;
                }
                let gw = &mut g.weights[k];
                for (i, &xi) in input.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let row = &mut gw[i * l.outputs..(i + 1) * l.outputs];
                    for (r, d) in row.iter_mut().zip(&delta) {
                        *r += xi * d;
                    }
                }
            }
            if k == 0 && !want_input {
                return None;
            }
            let mut prev = vec![0.0; l.inputs];
            for (i, p) in prev.iter_mut().enumerate() {
                // rectifier derivative: hidden activations that are zero pass no gradient
                if k > 0 && input[i] <= 0.0 {
                    continue;
                }
                let row = &l.weights[i * l.outputs..(i + 1) * l.outputs];
                *p = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
            }
            delta = prev;
        }
        Some(delta)
    }
}

/// SGD with classical momentum.
#[derive(Clone, Debug)]
pub struct Momentum {
    rate: f64,
    momentum: f64,
    weight_decay: f64,
    velocity: Grads,
}

impl Momentum {
    pub fn new(net: &DenseNet, rate: f64, momentum: f64) -> Self {
        Self { rate, momentum, weight_decay: 0.0, velocity: net.grads() }
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Self {
        self.weight_decay = weight_decay;
        self
    }

    /// Apply `grads * scale` as one step.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Grads, scale: f64) {
        for (k, l) in net.layers.iter_mut().enumerate() {
            let vw = &mut self.velocity.weights[k];
            for ((p, v), g) in l.weights.iter_mut().zip(vw.iter_mut()).zip(&grads.weights[k]) {
                *v = self.momentum * *v - self.rate * (g * scale + self.weight_decay * *p);
                *p += *v;
            }
            let vb = &mut self.velocity.biases[k];
            for ((p, v), g) in l.biases.iter_mut().zip(vb.iter_mut()).zip(&grads.biases[k]) {
                *v = self.momentum * *v - self.rate * g * scale;
                *p += *v;
            }
        }
    }
}

/// Momentum update for a free parameter vector (e.g. a conditioning vector).
#[derive(Clone, Debug)]
pub struct VectorMomentum {
    rate: f64,
    momentum: f64,
    velocity: Vec<f64>,
}

impl VectorMomentum {
    pub fn new(len: usize, rate: f64, momentum: f64) -> Self {
        Self { rate, momentum, velocity: vec![0.0; len] }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], scale: f64) {
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grads) {
            *v = self.momentum * *v - self.rate * g * scale;
            *p += *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_decay_shrinks_weights_only() {
        let mut net = DenseNet::new(&[3, 4, 2], 5);
        let before = net.clone();
        let zero = net.grads();
        Momentum::new(&net, 0.1, 0.9).with_weight_decay(0.5).step(&mut net, &zero, 1.0);
        for (a, b) in net.layers().iter().zip(before.layers()) {
            for (w, w0) in a.weights().iter().zip(b.weights()) {
                assert!((w - w0 * 0.95).abs() < 1e-15);
            }
            assert_eq!(a.biases(), b.biases());
        }
    }

    /// Scalar-loop forward pass written independently of `Layer::affine`.
    #[allow(clippy::needless_range_loop)]
    fn naive_forward(net: &DenseNet, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let n = net.layers().len();
        for (k, l) in net.layers().iter().enumerate() {
            let mut z = Vec::new();
            for j in 0..l.outputs {
                let mut s = l.biases()[j];
                for i in 0..l.inputs {
                    s += l.weights()[i * l.outputs + j] * a[i];
                }
                z.push(if k + 1 < n { if s > 0.0 { s } else { 0.0 } } else { s });
            }
            a = z;
        }
        a
    }

    #[test]
    fn parameter_count() {
        let net = DenseNet::new(&[27, 64, 16], 1);
        assert_eq!(net.param_count(), 27 * 64 + 64 + 64 * 16 + 16);
        assert_eq!(net.params().len(), net.param_count());
    }

    #[test]
    fn zero_weights_give_last_bias() {
        let mut net = DenseNet::zeros(&[3, 4, 2]);
        net.layers_mut()[1].biases_mut().copy_from_slice(&[0.5, -2.0]);
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![0.5, -2.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let mut net = DenseNet::zeros(&[3, 3]);
        for i in 0..3 {
            net.layers_mut()[0].weights_mut()[i * 3 + i] = 1.0;
        }
        assert_eq!(net.forward(&[0.3, -1.0, 7.0]).unwrap(), vec![0.3, -1.0, 7.0]);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            let net = DenseNet::new(&[7, 10, 9, 5], seed);
            let mut net = net;
            for l in net.layers_mut() {
                l.biases_mut().iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
            }
            let x: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fast = net.forward(&x).unwrap();
            let slow = naive_forward(&net, &x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10);
            }
            assert_eq!(net.forward_trace(&x).unwrap().output(), fast.as_slice());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let net = DenseNet::new(&[4, 2], 0);
        assert!(matches!(net.forward(&[1.0]), Err(Error::LengthMismatch { expected: 4, actual: 1 })));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = DenseNet::new(&[20, 30], 5);
        assert_eq!(a, DenseNet::new(&[20, 30], 5));
        assert_ne!(a, DenseNet::new(&[20, 30], 6));
        let limit = (6.0f64 / 50.0).sqrt();
        assert!(a.params().iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn backward_matches_finite_differences() {
        // loss = sum_j c_j * out_j, so d loss / d out = c
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = DenseNet::new(&[5, 8, 6, 3], 11);
        for l in net.layers_mut() {
            l.biases_mut().iter_mut().for_each(|b| *b = rng.gen_range(-0.3..0.3));
        }
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = [0.7, -1.3, 0.4];
        let f = |n: &DenseNet, x: &[f64]| -> f64 {
            n.forward(x).unwrap().iter().zip(&c).map(|(o, c)| o * c).sum()
        };
        let trace = net.forward_trace(&x).unwrap();
        let mut g = net.grads();
        let gx = net.backward(&trace, &c, Some(&mut g), true).unwrap();
        let analytic = g.flat();
        let params = net.params();
        let eps = 1e-5;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += eps;
            let mut np = net.clone();
            np.set_params(&p).unwrap();
            let up = f(&np, &x);
            p[i] -= 2.0 * eps;
            np.set_params(&p).unwrap();
            let down = f(&np, &x);
            let fd = (up - down) / (2.0 * eps);
            assert!((fd - analytic[i]).abs() < 1e-6, "param {i}: {fd} vs {}", analytic[i]);
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += eps;
            let up = f(&net, &xp);
            xp[i] -= 2.0 * eps;
            let fd = (up - f(&net, &xp)) / (2.0 * eps);
            assert!((fd - gx[i]).abs() < 1e-6);
        }
    }
}
