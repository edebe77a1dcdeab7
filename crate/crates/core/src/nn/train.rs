use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DenseNet, Grads, LossKind, Momentum, Trace};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
    /// L2 penalty on weights (not biases), added to the gradient.
    #[serde(default)]
    pub weight_decay: f64,
}

fn default_momentum() -> f64 {
    0.9
}

impl TrainConfig {
    pub fn new(learning_rate: f64, batch_size: usize, epochs: usize, seed: u64, loss: LossKind) -> Self {
        Self { learning_rate, momentum: default_momentum(), batch_size, epochs, seed, loss, weight_decay: 0.0 }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(format!(
                "learning rate, batch size and epochs must be positive (got {}, {}, {})",
                self.learning_rate, self.batch_size, self.epochs
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("negative weight decay {}", self.weight_decay)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-sample loss of each epoch.
    pub losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// One link of a training pipeline. Gradients flow through frozen stages
/// without touching their parameters.
pub enum Stage<'a> {
    Train(&'a mut DenseNet),
    Frozen(&'a DenseNet),
}

impl Stage<'_> {
    fn net(&self) -> &DenseNet {
        match self {
            Stage::Train(n) => n,
            Stage::Frozen(n) => n,
        }
    }
}

/// Minibatch SGD with momentum over a chain of networks.
///
/// Shuffling is driven by `cfg.seed`, so identical inputs give identical parameters.
pub fn train_stages(stages: &mut [Stage<'_>], data: &[(Vec<f64>, Vec<f64>)], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if stages.is_empty() {
        return Err(Error::Config("no stages to train".into()));
    }
    for w in stages.windows(2) {
        if w[0].net().output_len() != w[1].net().input_len() {
            return Err(Error::LengthMismatch { expected: w[1].net().input_len(), actual: w[0].net().output_len() });
        }
    }
    let (input_len, output_len) = (stages[0].net().input_len(), stages[stages.len() - 1].net().output_len());
    for (x, t) in data {
        if x.len() != input_len {
            return Err(Error::LengthMismatch { expected: input_len, actual: x.len() });
        }
        if t.len() != output_len {
            return Err(Error::LengthMismatch { expected: output_len, actual: t.len() });
        }
    }

    let mut grads: Vec<Option<Grads>> = stages
        .iter()
        .map(|s| matches!(s, Stage::Train(_)).then(|| s.net().grads()))
        .collect();
    let mut opts: Vec<Option<Momentum>> = stages
        .iter()
        .map(|s| matches!(s, Stage::Train(_)).then(|| Momentum::new(s.net(), cfg.learning_rate, cfg.momentum).with_weight_decay(cfg.weight_decay)))
        .collect();
    let first_trainable = stages.iter().position(|s| matches!(s, Stage::Train(_)));
    let Some(first_trainable) = first_trainable else {
        return Err(Error::Config("every stage is frozen".into()));
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    let mut traces: Vec<Trace> = Vec::with_capacity(stages.len());

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().flatten().for_each(Grads::zero);
            for &i in batch {
                let (x, t) = &data[i];
                traces.clear();
                let mut cur = x.clone();
                for s in stages.iter() {
                    let tr = s.net().forward_trace(&cur)?;
                    cur = tr.output().to_vec();
                    traces.push(tr);
                }
                let (loss, mut delta) = cfg.loss.eval(&cur, t)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, loss });
                }
                epoch_loss += loss;
                for k in (first_trainable..stages.len()).rev() {
                    let want_input = k > first_trainable;
                    match stages[k].net().backward(&traces[k], &delta, grads[k].as_mut(), want_input) {
                        Some(d) => delta = d,
                        None => break,
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for (k, s) in stages.iter_mut().enumerate() {
                if let (Stage::Train(net), Some(g), Some(opt)) = (s, grads[k].as_ref(), opts[k].as_mut()) {
                    opt.step(net, g, scale);
                }
            }
        }
        let mean = epoch_loss / data.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        report.losses.push(mean);
    }
    Ok(report)
}

/// Train `net`, optionally sandwiched between frozen networks.
pub fn train(
    net: &mut DenseNet,
    data: &[(Vec<f64>, Vec<f64>)],
    cfg: &TrainConfig,
    frozen_prefix: Option<&DenseNet>,
    frozen_suffix: Option<&DenseNet>,
) -> Result<TrainReport> {
    let mut stages = Vec::with_capacity(3);
    if let Some(p) = frozen_prefix {
        stages.push(Stage::Frozen(p));
    }
    stages.push(Stage::Train(net));
    if let Some(s) = frozen_suffix {
        stages.push(Stage::Frozen(s));
    }
    train_stages(&mut stages, data, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::segmented_nll_loss;
    use rand::Rng;

    fn line_data() -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..20).map(|i| {
            let x = i as f64 / 10.0 - 1.0;
            (vec![x], vec![2.0 * x])
        })
        .collect()
    }

    #[test]
    fn fits_a_line() {
        let mut net = DenseNet::new(&[1, 1], 0);
        let cfg = TrainConfig::new(0.05, 4, 500, 0, LossKind::Mse);
        let report = train(&mut net, &line_data(), &cfg, None, None).unwrap();
        assert!(report.final_loss() < 1e-4, "{}", report.final_loss());
        assert!((net.layers()[0].weights()[0] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn loss_is_monotone_on_a_convex_full_batch() {
        let mut net = DenseNet::new(&[1, 1], 3);
        let cfg = TrainConfig::new(1e-3, 20, 200, 0, LossKind::Mse);
        let report = train(&mut net, &line_data(), &cfg, None, None).unwrap();
        for w in report.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn equal_seeds_give_identical_parameters() {
        let data: Vec<_> = (0..30)
            .map(|i| (vec![(i % 5) as f64, (i % 3) as f64], vec![(i % 7) as f64 * 0.1]))
            .collect();
        let cfg = TrainConfig::new(0.01, 7, 20, 42, LossKind::Mse);
        let mut a = DenseNet::new(&[2, 6, 1], 1);
        let mut b = DenseNet::new(&[2, 6, 1], 1);
        train(&mut a, &data, &cfg, None, None).unwrap();
        train(&mut b, &data, &cfg, None, None).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn frozen_neighbours_are_untouched() {
        let prefix = DenseNet::new(&[3, 5, 4], 1);
        let suffix = DenseNet::new(&[4, 6, 3], 2);
        let (p0, s0) = (prefix.clone(), suffix.clone());
        let mut mid = DenseNet::new(&[4, 8, 4], 3);
        let m0 = mid.clone();
        let data: Vec<_> = (0..12)
            .map(|i| (vec![i as f64 * 0.1, 1.0, -0.5], vec![0.0, 1.0, 0.0]))
            .collect();
        let cfg = TrainConfig::new(0.01, 4, 5, 0, LossKind::SegmentedNll { segments: vec![3] });
        train(&mut mid, &data, &cfg, Some(&prefix), Some(&suffix)).unwrap();
        assert_eq!(prefix, p0);
        assert_eq!(suffix, s0);
        assert_ne!(mid, m0);
    }

    #[test]
    fn gradients_through_frozen_composition_match_finite_differences() {
        // Reproduce one full-batch SGD step's gradient and compare with central differences
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let prefix = DenseNet::new(&[4, 6, 5], 10);
        let suffix = DenseNet::new(&[5, 7, 6], 11);
        let mut mid = DenseNet::new(&[5, 9, 5], 12);
        for l in mid.layers_mut() {
            l.biases_mut().iter_mut().for_each(|b| *b = rng.gen_range(-0.2..0.2));
        }
        let segs = vec![3, 3];
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let total = |m: &DenseNet| -> f64 {
            let h = prefix.forward(&x).unwrap();
            let z = m.forward(&h).unwrap();
            let o = suffix.forward(&z).unwrap();
            segmented_nll_loss(&o, &t, &segs).unwrap().0
        };
        let h = prefix.forward(&x).unwrap();
        let tm = mid.forward_trace(&h).unwrap();
        let ts = suffix.forward_trace(tm.output()).unwrap();
        let (_, d) = segmented_nll_loss(ts.output(), &t, &segs).unwrap();
        let d = suffix.backward(&ts, &d, None, true).unwrap();
        let mut g = mid.grads();
        mid.backward(&tm, &d, Some(&mut g), false);
        let analytic = g.flat();
        let params = mid.params();
        let eps = 1e-5;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += eps;
            let mut m = mid.clone();
            m.set_params(&p).unwrap();
            let up = total(&m);
            p[i] -= 2.0 * eps;
            m.set_params(&p).unwrap();
            let fd = (up - total(&m)) / (2.0 * eps);
            let tol = 1e-5 * fd.abs().max(analytic[i].abs()).max(1e-3);
            assert!((fd - analytic[i]).abs() <= tol, "param {i}: {fd} vs {}", analytic[i]);
        }
    }

    #[test]
    fn bad_config_and_dimensions() {
        let mut net = DenseNet::new(&[2, 1], 0);
        let data = vec![(vec![1.0, 2.0], vec![0.0])];
        let bad = TrainConfig::new(0.0, 1, 1, 0, LossKind::Mse);
        assert!(matches!(train(&mut net, &data, &bad, None, None), Err(Error::Config(_))));
        let cfg = TrainConfig::new(0.1, 1, 1, 0, LossKind::Mse);
        let wrong = vec![(vec![1.0], vec![0.0])];
        assert!(matches!(train(&mut net, &wrong, &cfg, None, None), Err(Error::LengthMismatch { .. })));
        let suffix = DenseNet::new(&[3, 1], 0);
        assert!(train(&mut net, &data, &cfg, None, Some(&suffix)).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let mut net = DenseNet::new(&[1, 1], 0);
        let data = vec![(vec![1e200], vec![0.0])];
        let cfg = TrainConfig::new(1.0, 1, 3, 0, LossKind::Mse);
        assert!(matches!(train(&mut net, &data, &cfg, None, None), Err(Error::Diverged { .. })));
    }
}
