//! Agent-level attention refinement and mean-field aggregation.

use serde::{Deserialize, Serialize};

use super::EmfacError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    /// Softmax over all logits.
    pub raw: Vec<f64>,
    /// Softmax over the selected logits only; zero elsewhere.
    pub refined: Vec<f64>,
    /// Selected indices in descending logit order.
    pub selected: Vec<usize>,
}

/// Number of attended entries for `len` logits among `n` agents at ratio `k`.
pub fn attended_count(len: usize, k: f64, n: usize, min_one: bool) -> usize {
    let m = (k * n as f64 + 1e-9).floor().max(0.0) as usize;
    let m = if min_one { m.max(1) } else { m };
    m.min(len)
}

fn softmax_into(logits: &[f64], idx: &[usize], out: &mut [f64]) {
    let m = idx.iter().map(|&i| logits[i]).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return;
    }
    let mut sum = 0.0;
    for &i in idx {
        let e = (logits[i] - m).exp();
        out[i] = e;
        sum += e;
    }
    for &i in idx {
        out[i] /= sum;
    }
}

/// Keeps the top `max(1, ⌊k·n⌋)` logits (ties go to the lower index) and renormalizes them with a
/// softmax; every other weight is exactly zero.
pub fn refine_attention(logits: &[f64], k: f64, n: usize) -> AttentionWeights {
    refine_attention_with(logits, k, n, true)
}

/// [`refine_attention`] with the minimum-one rule optional, so that `k = 0` can select nothing.
pub fn refine_attention_with(logits: &[f64], k: f64, n: usize, min_one: bool) -> AttentionWeights {
    let len = logits.len();
    let key = |i: usize| if logits[i].is_nan() { f64::NEG_INFINITY } else { logits[i] };
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    let m = attended_count(len, k, n, min_one);
    let selected = order[..m].to_vec();
    let clean: Vec<f64> = (0..len).map(key).collect();
    let mut raw = vec![0.0; len];
    softmax_into(&clean, &order, &mut raw);
    let mut refined = vec![0.0; len];
    softmax_into(&clean, &selected, &mut refined);
    AttentionWeights { raw, refined, selected }
}

/// `(1/N) Σ_j â_j · w_j` over the `N` neighbors. With `weights = None` every weight is 1, which
/// gives the plain mean. Returns `None` for an empty neighborhood.
pub fn mean_field_action(high_actions: &[&[f64]], weights: Option<&[f64]>) -> Option<Vec<f64>> {
    let first = high_actions.first()?;
    let n = high_actions.len() as f64;
    let mut out = vec![0.0; first.len()];
    for (j, a) in high_actions.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[j]);
        for (o, x) in out.iter_mut().zip(a.iter()) {
            *o += x * w;
        }
    }
    for o in &mut out {
        *o /= n;
    }
    Some(out)
}

/// Scales each 3-wide per-agent block of `state`, which starts at `offset`, by its weight.
/// Everything outside the blocks is copied unchanged.
pub fn weighted_state(state: &[f64], offset: usize, weights: &[f64]) -> Result<Vec<f64>, EmfacError> {
    let end = offset + 3 * weights.len();
    if end > state.len() {
        return Err(EmfacError::Shape(format!(
            "{} agent blocks from offset {offset} do not fit a state of length {}",
            weights.len(),
            state.len()
        )));
    }
    let mut out = state.to_vec();
    for (b, w) in weights.iter().enumerate() {
        for x in &mut out[offset + 3 * b..offset + 3 * b + 3] {
            *x *= w;
        }
    }
    Ok(out)
}
