use super::Tensor;
use crate::error::{invalid, Result};

/// Row-wise softmax of `(batch, classes, 1)` logits.
pub fn softmax(logits: &Tensor) -> Vec<Vec<f64>> {
    (0..logits.batch)
        .map(|b| {
            let z = logits.sample(b);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Mean cross-entropy over the batch and its gradient `(p − onehot)/batch`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let classes = logits.channels;
    if logits.len != 1 || labels.len() != logits.batch {
        return Err(invalid(format!(
            "{} labels for logits of shape {:?}",
            labels.len(),
            logits.shape()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(invalid(format!("label {bad} outside [0, {classes})")));
    }
    let n = logits.batch as f64;
    let mut grad = Tensor::zeros(logits.batch, classes, 1);
    let mut loss = 0.0;
    for (b, (probs, &label)) in softmax(logits).iter().zip(labels).enumerate() {
        // log-sum-exp form keeps large logits finite
        let z = logits.sample(b);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[label];
        let g = grad.sample_mut(b);
        for (c, p) in probs.iter().enumerate() {
            g[c] = (p - if c == label { 1.0 } else { 0.0 }) / n;
        }
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_log_classes() {
        let logits = Tensor::zeros(3, 5, 1);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 2, 4]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logit_gives_zero_loss() {
        let logits = Tensor::from_vec(1, 3, 1, vec![1000.0, 0.0, 0.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss.abs() < 1e-12 && loss.is_finite());
        assert!(grad.data.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn invalid_labels_are_rejected() {
        let logits = Tensor::zeros(2, 3, 1);
        assert!(softmax_cross_entropy(&logits, &[0, 3]).is_err());
        assert!(softmax_cross_entropy(&logits, &[0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = Tensor::from_vec(4, 5, 1, (0..20).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let labels = [1, 0, 4, 2];
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let h = 1e-6;
        for i in 0..20 {
            let mut p = logits.clone();
            p.data[i] += h;
            let lp = softmax_cross_entropy(&p, &labels).unwrap().0;
            p.data[i] -= 2.0 * h;
            let lm = softmax_cross_entropy(&p, &labels).unwrap().0;
            assert!(((lp - lm) / (2.0 * h) - grad.data[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let logits = Tensor::from_vec(10, 7, 1, (0..70).map(|_| rng.random_range(-50.0..50.0)).collect()).unwrap();
        for row in softmax(&logits) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
