use crate::error::{ensure_finite, Error, Result};

/// Probability floor applied inside the logarithm of the cross-entropy loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Empty("softmax input"));
    }
    ensure_finite("softmax input", logits)?;
    Ok(softmax_unchecked(logits))
}

pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&a| (a - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// `log softmax(a)`, evaluated without forming the probabilities.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Empty("log_softmax input"));
    }
    ensure_finite("log_softmax input", logits)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&a| (a - max).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|&a| a - lse).collect())
}

/// Negative log-likelihood of `label` under `probs`, with the probability
/// clamped to [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(Error::LabelOutOfRange {
        label,
        classes: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}
