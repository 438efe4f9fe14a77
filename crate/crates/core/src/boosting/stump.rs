use super::{ComponentClassifier, ComponentLearn, LearnError, Stump, WeightVector};
use crate::dataset::Dataset;
use rayon::prelude::*;

/// Best stump restricted to one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpCandidate {
    pub feature: u32,
    pub threshold: f64,
    pub polarity: i8,
    pub error: f64,
}

impl StumpCandidate {
    pub fn stump(&self) -> Stump {
        Stump {
            feature: self.feature,
            threshold: self.threshold,
            polarity: self.polarity,
        }
    }
}

fn best_for_column(feature: u32, column: &[f64], labels: &[i8], w: &[f64]) -> StumpCandidate {
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));

    let (mut w_pos, mut w_neg) = (0.0, 0.0);
    for (y, wi) in labels.iter().zip(w) {
        if *y > 0 {
            w_pos += wi;
        } else {
            w_neg += wi;
        }
    }

    let mut best = StumpCandidate {
        feature,
        threshold: f64::NAN,
        polarity: 1,
        error: f64::INFINITY,
    };
    let (mut pos_below, mut neg_below) = (0.0, 0.0);
    for k in 0..=order.len() {
        let candidate = if k == 0 {
            order.first().map(|&i| column[i] - column[i].abs().max(1.0))
        } else if k < order.len() && column[order[k]] != column[order[k - 1]] {
            Some(0.5 * (column[order[k - 1]] + column[order[k]]))
        } else {
            None
        };
        if let Some(threshold) = candidate {
            // polarity +1 labels everything at or above the threshold positive
            let err_up = pos_below + (w_neg - neg_below);
            let err_down = neg_below + (w_pos - pos_below);
            if err_up < best.error {
                best = StumpCandidate {
                    feature,
                    threshold,
                    polarity: 1,
                    error: err_up,
                };
            }
            if err_down < best.error {
                best = StumpCandidate {
                    feature,
                    threshold,
                    polarity: -1,
                    error: err_down,
                };
            }
        }
        if k < order.len() {
            let i = order[k];
            if labels[i] > 0 {
                pos_below += w[i];
            } else {
                neg_below += w[i];
            }
        }
    }
    best.error = best.error.clamp(0.0, 1.0);
    best
}

/// Minimum-error stump for every feature, in feature order.
pub fn stump_errors(data: &Dataset, w: &WeightVector) -> Vec<StumpCandidate> {
    (0..data.dim())
        .into_par_iter()
        .map(|f| best_for_column(f as u32, &data.column(f), data.labels(), w.as_slice()))
        .collect()
}

/// The `d` features whose best stump has the smallest weighted error,
/// ties broken by feature id. Returns every feature when `d >= dim`.
pub fn top_stump_features(data: &Dataset, w: &WeightVector, d: usize) -> Vec<u32> {
    if d >= data.dim() {
        return (0..data.dim() as u32).collect();
    }
    let mut all = stump_errors(data, w);
    all.sort_by(|a, b| a.error.total_cmp(&b.error).then(a.feature.cmp(&b.feature)));
    all.into_iter().take(d).map(|c| c.feature).collect()
}

/// Exact weighted-error minimiser over (feature, midpoint threshold, polarity).
/// Ties go to the smallest feature id, then the smallest threshold.
pub fn learn_stump(data: &Dataset, w: &WeightVector) -> Result<ComponentClassifier, LearnError> {
    if data.is_empty() || data.dim() == 0 {
        return Err(LearnError::Empty);
    }
    let all = stump_errors(data, w);
    let best = all
        .iter()
        .fold(None::<&StumpCandidate>, |acc, c| match acc {
            Some(b) if b.error <= c.error => Some(b),
            _ => Some(c),
        })
        .expect("at least one feature");
    if !best.threshold.is_finite() {
        return Err(LearnError::NonFinite);
    }
    Ok(ComponentClassifier::Stump(best.stump()))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StumpLearner;

impl ComponentLearn for StumpLearner {
    fn learn(
        &mut self,
        data: &Dataset,
        w: &WeightVector,
        _round: usize,
    ) -> Result<ComponentClassifier, LearnError> {
        learn_stump(data, w)
    }
}
