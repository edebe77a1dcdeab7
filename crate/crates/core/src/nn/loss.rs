use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LossKind {
    /// Softmax cross-entropy applied independently to each segment.
    SegmentedNll { segments: Vec<usize> },
    Mse,
}

impl LossKind {
    pub fn eval(&self, output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            LossKind::SegmentedNll { segments } => segmented_nll_loss(output, target, segments),
            LossKind::Mse => mse_loss(output, target),
        }
    }
}

fn check_len(output: &[f64], target: &[f64]) -> Result<()> {
    if output.len() != target.len() {
        return Err(Error::LengthMismatch { expected: target.len(), actual: output.len() });
    }
    Ok(())
}

/// Sum over segments of `-log softmax(logits)[hot]`, where `hot` is the
/// target's argmax in that segment. Gradient is `softmax - target` per segment.
pub fn segmented_nll_loss(logits: &[f64], target: &[f64], segments: &[usize]) -> Result<(f64, Vec<f64>)> {
    check_len(logits, target)?;
    let total: usize = segments.iter().sum();
    if total != logits.len() {
        return Err(Error::LengthMismatch { expected: total, actual: logits.len() });
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    let mut at = 0;
    for &len in segments {
        let g = &logits[at..at + len];
        let t = &target[at..at + len];
        let hot = t
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > t[best] { i } else { best });
        let max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = g.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - g[hot];
        for i in 0..len {
            grad[at + i] = (g[i] - lse).exp() - t[i];
        }
        at += len;
    }
    Ok((loss, grad))
}

/// `0.5 * |output - target|^2` and its gradient `output - target`.
pub fn mse_loss(output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len(output, target)?;
    let grad: Vec<f64> = output.iter().zip(target).map(|(o, t)| o - t).collect();
    let loss = 0.5 * grad.iter().map(|d| d * d).sum::<f64>();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_hot3(segs: &[usize], hots: &[usize]) -> Vec<f64> {
        let mut v = vec![0.0; segs.iter().sum()];
        let mut at = 0;
        for (len, h) in segs.iter().zip(hots) {
            v[at + h] = 1.0;
            at += len;
        }
        v
    }

    fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                a[i] += eps;
                let up = f(&a);
                a[i] -= 2.0 * eps;
                (up - f(&a)) / (2.0 * eps)
            })
            .collect()
    }

    #[test]
    fn uniform_logits_closed_form() {
        let segs = [20, 3, 3];
        let t = one_hot3(&segs, &[4, 1, 2]);
        let (loss, _) = segmented_nll_loss(&[0.0; 26], &t, &segs).unwrap();
        let expected = 20f64.ln() + 3f64.ln() + 3f64.ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 5.193).abs() < 1e-3);
    }

    #[test]
    fn dominant_logits_drive_loss_to_zero() {
        let segs = [4, 3, 3];
        let t = one_hot3(&segs, &[2, 0, 1]);
        let g: Vec<f64> = t.iter().map(|&v| if v == 1.0 { 60.0 } else { -60.0 }).collect();
        let (loss, grad) = segmented_nll_loss(&g, &t, &segs).unwrap();
        assert!(loss < 1e-20);
        assert!(grad.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn nll_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let segs = [5, 3, 3];
        for _ in 0..20 {
            let g: Vec<f64> = (0..11).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let t = one_hot3(&segs, &[rng.gen_range(0..5), rng.gen_range(0..3), rng.gen_range(0..3)]);
            let (_, grad) = segmented_nll_loss(&g, &t, &segs).unwrap();
            let fd = central_diff(|x| segmented_nll_loss(x, &t, &segs).unwrap().0, &g, 1e-5);
            for (a, b) in grad.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mse_values_and_gradient() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap().0, 0.0);
        assert_eq!(mse_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap().0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, grad) = mse_loss(&g, &t).unwrap();
        let fd = central_diff(|x| mse_loss(x, &t).unwrap().0, &g, 1e-5);
        for (a, b) in grad.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(segmented_nll_loss(&[0.0; 4], &[0.0; 4], &[2, 1]).is_err());
        assert!(segmented_nll_loss(&[0.0; 4], &[0.0; 3], &[2, 2]).is_err());
    }
}
