use rand::Rng;
use serde::{Deserialize, Serialize};

/// At or below this temperature, sampling is greedy.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: usize,
    pub max_tokens: usize,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 1.2,
            top_p: 0.8,
            top_k: 30,
            max_tokens: 1200,
        }
    }
}

impl DecodingParams {
    /// Plain sampling from the weights, no truncation.
    pub fn untruncated(max_tokens: usize) -> Self {
        DecodingParams {
            temperature: 1.0,
            top_p: 1.0,
            top_k: usize::MAX,
            max_tokens,
        }
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature <= GREEDY_TEMPERATURE || self.top_k == 1
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.top_k == 0 {
            return Err("top_k must be positive".into());
        }
        if self.max_tokens == 0 {
            return Err("max_tokens must be positive".into());
        }
        Ok(())
    }
}

/// Effective probabilities of a categorical after temperature, top-k and
/// top-p. `weights` must be non-negative with at least one positive entry.
///
/// Order: weights are raised to `1/T` and normalized; the `top_k` largest
/// are kept (ties by lower index) and renormalized; the smallest prefix of
/// those, in the same order, reaching mass `top_p` is kept and renormalized.
/// The greedy limit puts all mass on the first maximum.
pub fn truncated_distribution(weights: &[f64], params: &DecodingParams) -> Vec<f64> {
    let n = weights.len();
    assert!(n > 0, "empty categorical");
    let mut probs = vec![0.0; n];
    if params.is_greedy() {
        let best = (0..n).fold(0, |b, i| if weights[i] > weights[b] { i } else { b });
        probs[best] = 1.0;
        return probs;
    }
    let logs: Vec<f64> = weights
        .iter()
        .map(|&w| if w > 0.0 { w.ln() / params.temperature } else { f64::NEG_INFINITY })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|&l| (l - top).exp()).collect();

    let mut order: Vec<usize> = (0..n).filter(|&i| scaled[i] > 0.0).collect();
    order.sort_by(|&a, &b| scaled[b].total_cmp(&scaled[a]).then(a.cmp(&b)));
    order.truncate(params.top_k);
    let kept_mass: f64 = order.iter().map(|&i| scaled[i]).sum();

    let mut cumulative = 0.0;
    let mut nucleus = 0;
    for &i in &order {
        cumulative += scaled[i] / kept_mass;
        nucleus += 1;
        // guard against the last summand landing a rounding error short
        if cumulative >= params.top_p - 1e-12 {
            break;
        }
    }
    order.truncate(nucleus);
    let mass: f64 = order.iter().map(|&i| scaled[i]).sum();
    for &i in &order {
        probs[i] = scaled[i] / mass;
    }
    probs
}

/// Inverse-CDF draw; consumes exactly one uniform.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t: f64, p: f64, k: usize) -> DecodingParams {
        DecodingParams {
            temperature: t,
            top_p: p,
            top_k: k,
            max_tokens: 100,
        }
    }

    #[test]
    fn untruncated_is_normalized_weights() {
        let d = truncated_distribution(&[1.0, 3.0], &params(1.0, 1.0, 10));
        assert!((d[0] - 0.25).abs() < 1e-15 && (d[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn top_k_keeps_largest_with_index_ties() {
        let d = truncated_distribution(&[2.0, 1.0, 2.0, 2.0], &params(1.0, 1.0, 2));
        assert_eq!(d, vec![0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn nucleus_is_smallest_prefix() {
        // 0.5, 0.3, 0.2: 0.5 < 0.8, 0.8 >= 0.8
        let d = truncated_distribution(&[5.0, 3.0, 2.0], &params(1.0, 0.8, 10));
        assert!((d[0] - 0.625).abs() < 1e-12 && (d[1] - 0.375).abs() < 1e-12 && d[2] == 0.0);
    }

    #[test]
    fn greedy_limits() {
        assert_eq!(truncated_distribution(&[1.0, 4.0, 4.0], &params(1e-9, 0.8, 30)), vec![0.0, 1.0, 0.0]);
        assert_eq!(truncated_distribution(&[1.0, 4.0, 4.0], &params(5.0, 1.0, 1)), vec![0.0, 1.0, 0.0]);
    }
}
