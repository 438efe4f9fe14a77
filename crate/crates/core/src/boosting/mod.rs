//! Discrete AdaBoost over pluggable component learners.
//!
//! The loop is the classic one: uniform initial weights, a component trained
//! on the weighted sample, `alpha = 1/2 ln((1 - eps) / eps)`, a multiplicative
//! update `w_i <- w_i exp(-alpha y_i h(x_i)) / Z`, and a final vote
//! `sign(sum alpha_t h_t(x))`.

mod component;
mod stump;
mod tinynet;
mod tree;

pub use component::{ComponentClassifier, Stump, SvmComponent, WeightedComponent};
pub use stump::{learn_stump, stump_errors, top_stump_features, StumpCandidate, StumpLearner};
pub use tinynet::{learn_tinynet, TinyNet, TinyNetLearner};
pub use tree::{learn_tree, DecisionTree, TreeLearner, TreeNode};

use crate::dataset::{Dataset, FeatureAccess};
use crate::svm::SvmError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoostError {
    #[error("size mismatch: {data} samples but {weights} weights")]
    SizeMismatch { data: usize, weights: usize },
    #[error("weights must be non-negative and sum to 1 (sum = {sum})")]
    InvalidWeights { sum: f64 },
    #[error("number of rounds must be at least 1")]
    NoRounds,
    #[error("round {round}: component learner failed: {source}")]
    Learner { round: usize, source: LearnError },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("non-finite value encountered while training")]
    NonFinite,
    #[error("empty training set")]
    Empty,
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error("{0}")]
    Other(String),
}

pub(crate) const WEIGHT_TOLERANCE: f64 = 1e-9;

/// A probability distribution over training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Accepts weights that are non-negative and sum to 1 (within 1e-9).
    pub fn new(w: Vec<f64>) -> Result<Self, BoostError> {
        let sum: f64 = w.iter().sum();
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(BoostError::InvalidWeights { sum });
        }
        Ok(WeightVector(w))
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    /// Divides by the total; fails when the total is not positive.
    pub fn normalized(raw: Vec<f64>) -> Result<(Self, f64), BoostError> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) || !total.is_finite() || raw.iter().any(|v| *v < 0.0) {
            return Err(BoostError::InvalidWeights { sum: total });
        }
        Ok((WeightVector(raw.into_iter().map(|v| v / total).collect()), total))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Audit record of one accepted boosting round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    pub t: usize,
    #[serde(with = "crate::real")]
    pub epsilon: f64,
    #[serde(with = "crate::real")]
    pub alpha: f64,
    /// `Z_t`, the sum of the unnormalised updated weights.
    #[serde(with = "crate::real")]
    pub normalizer: f64,
    /// Epsilon had to be clamped away from 0 or 1 to compute alpha.
    pub clamped: bool,
    /// Index of the component in the strong classifier.
    pub learner_id: usize,
    /// Sum of the weights after normalisation.
    #[serde(with = "crate::real")]
    pub weight_sum: f64,
}

/// `sign(sum alpha_t h_t(x) - threshold)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongClassifier {
    pub rounds: Vec<WeightedComponent>,
    #[serde(with = "crate::real")]
    pub threshold: f64,
}

impl StrongClassifier {
    pub fn score<F: FeatureAccess + ?Sized>(&self, x: &F) -> f64 {
        self.rounds
            .iter()
            .map(|r| r.alpha * r.component.predict(x) as f64)
            .sum()
    }

    pub fn decide<F: FeatureAccess + ?Sized>(&self, x: &F) -> (f64, i8) {
        let score = self.score(x);
        (score, crate::svm::sign(score - self.threshold))
    }

    pub fn feature_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .rounds
            .iter()
            .flat_map(|r| r.component.feature_ids())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Rewrites every feature reference `f` to `map[f]`.
    pub fn remap_features(&mut self, map: &[u32]) {
        for r in &mut self.rounds {
            r.component.remap_features(map);
        }
    }

    /// Fraction of `data` misclassified at the current threshold.
    pub fn training_error(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let wrong = data
            .points()
            .zip(data.labels())
            .filter(|(p, &y)| self.decide(*p).1 != y)
            .count();
        wrong as f64 / data.len() as f64
    }
}

/// `(score, label)` of the strong classifier on `x`.
pub fn strong_decision<F: FeatureAccess + ?Sized>(s: &StrongClassifier, x: &F) -> (f64, i8) {
    s.decide(x)
}

pub fn weighted_error(
    h: &ComponentClassifier,
    data: &Dataset,
    w: &WeightVector,
) -> Result<f64, BoostError> {
    if data.len() != w.len() {
        return Err(BoostError::SizeMismatch {
            data: data.len(),
            weights: w.len(),
        });
    }
    let preds: Vec<i8> = data.points().map(|p| h.predict(p)).collect();
    Ok(error_of_predictions(&preds, data.labels(), w))
}

pub(crate) fn error_of_predictions(preds: &[i8], labels: &[i8], w: &WeightVector) -> f64 {
    let e: f64 = preds
        .iter()
        .zip(labels)
        .zip(w.as_slice())
        .filter(|((p, y), _)| p != y)
        .map(|(_, wi)| wi)
        .sum();
    e.clamp(0.0, 1.0)
}

pub const EPSILON_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha {
    pub value: f64,
    /// Epsilon was outside `[1e-10, 1 - 1e-10]` and was clamped.
    pub clamped: bool,
}

/// `1/2 ln((1 - eps) / eps)`, with eps clamped into `[1e-10, 1 - 1e-10]`.
pub fn alpha_of(epsilon: f64) -> Alpha {
    let e = epsilon.clamp(EPSILON_FLOOR, 1.0 - EPSILON_FLOOR);
    Alpha {
        value: 0.5 * ((1.0 - e) / e).ln(),
        clamped: e != epsilon,
    }
}

pub fn update_weights(
    w: &WeightVector,
    alpha: f64,
    h: &ComponentClassifier,
    data: &Dataset,
) -> Result<(WeightVector, f64), BoostError> {
    if data.len() != w.len() {
        return Err(BoostError::SizeMismatch {
            data: data.len(),
            weights: w.len(),
        });
    }
    let preds: Vec<i8> = data.points().map(|p| h.predict(p)).collect();
    update_with_predictions(w, alpha, &preds, data.labels())
}

pub(crate) fn update_with_predictions(
    w: &WeightVector,
    alpha: f64,
    preds: &[i8],
    labels: &[i8],
) -> Result<(WeightVector, f64), BoostError> {
    let raw: Vec<f64> = w
        .as_slice()
        .iter()
        .zip(preds.iter().zip(labels))
        .map(|(wi, (p, y))| wi * (-alpha * (*p as f64) * (*y as f64)).exp())
        .collect();
    WeightVector::normalized(raw)
}

/// Produces a component classifier from a weighted sample.
pub trait ComponentLearn {
    fn learn(
        &mut self,
        data: &Dataset,
        w: &WeightVector,
        round: usize,
    ) -> Result<ComponentClassifier, LearnError>;
}

impl<F> ComponentLearn for F
where
    F: FnMut(&Dataset, &WeightVector, usize) -> Result<ComponentClassifier, LearnError>,
{
    fn learn(
        &mut self,
        data: &Dataset,
        w: &WeightVector,
        round: usize,
    ) -> Result<ComponentClassifier, LearnError> {
        self(data, w, round)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    /// A component reached zero training error; the loop should stop.
    Perfect,
}

/// Round-by-round AdaBoost state, so callers can inspect the ensemble
/// between rounds (cascade stages stop as soon as their goals are met).
pub struct AdaBoost<'a> {
    data: &'a Dataset,
    weights: WeightVector,
    rounds: Vec<BoostRound>,
    components: Vec<WeightedComponent>,
}

impl<'a> AdaBoost<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        AdaBoost {
            data,
            weights: WeightVector::uniform(data.len()),
            rounds: Vec::new(),
            components: Vec::new(),
        }
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn rounds(&self) -> &[BoostRound] {
        &self.rounds
    }

    pub fn step(&mut self, learner: &mut dyn ComponentLearn) -> Result<StepOutcome, BoostError> {
        let t = self.rounds.len() + 1;
        let h = learner
            .learn(self.data, &self.weights, t)
            .map_err(|source| BoostError::Learner { round: t, source })?;
        let preds: Vec<i8> = self.data.points().map(|p| h.predict(p)).collect();
        Ok(self.accept(h, &preds))
    }

    /// Records `h` (with predictions `preds` on the training set) as the next round.
    pub(crate) fn accept(&mut self, h: ComponentClassifier, preds: &[i8]) -> StepOutcome {
        let t = self.rounds.len() + 1;
        let epsilon = error_of_predictions(preds, self.data.labels(), &self.weights);
        let alpha = alpha_of(epsilon);
        let (next, normalizer) =
            update_with_predictions(&self.weights, alpha.value, preds, self.data.labels())
                .expect("exp of a finite alpha keeps weights positive");
        self.weights = next;
        self.rounds.push(BoostRound {
            t,
            epsilon,
            alpha: alpha.value,
            normalizer,
            clamped: alpha.clamped,
            learner_id: self.components.len(),
            weight_sum: self.weights.sum(),
        });
        self.components.push(WeightedComponent {
            alpha: alpha.value,
            component: h,
        });
        if epsilon == 0.0 {
            StepOutcome::Perfect
        } else {
            StepOutcome::Continue
        }
    }

    pub fn classifier(&self, threshold: f64) -> StrongClassifier {
        StrongClassifier {
            rounds: self.components.clone(),
            threshold,
        }
    }
}

/// Result of a full boosting run with its per-round audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostRun {
    pub classifier: StrongClassifier,
    pub rounds: Vec<BoostRound>,
}

impl AdaBoostRun {
    /// `prod_t 2 sqrt(eps_t (1 - eps_t))`, the bound on the training error.
    pub fn error_bound(&self) -> f64 {
        self.rounds
            .iter()
            .map(|r| 2.0 * (r.epsilon * (1.0 - r.epsilon)).sqrt())
            .product()
    }

    /// `prod_t Z_t` using the recorded normalisers.
    pub fn normalizer_product(&self) -> f64 {
        self.rounds.iter().map(|r| r.normalizer).product()
    }
}

pub fn run_adaboost(
    data: &Dataset,
    learner: &mut dyn ComponentLearn,
    rounds: usize,
) -> Result<AdaBoostRun, BoostError> {
    if rounds == 0 {
        return Err(BoostError::NoRounds);
    }
    let mut boost = AdaBoost::new(data);
    for _ in 0..rounds {
        if boost.step(learner)? == StepOutcome::Perfect {
            break;
        }
    }
    let run = AdaBoostRun {
        classifier: boost.classifier(0.0),
        rounds: boost.rounds,
    };
    debug_assert!(
        run.classifier.training_error(data) <= run.error_bound() + 1e-12
            || run.rounds.iter().any(|r| r.clamped)
    );
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant(label: f64) -> ComponentClassifier {
        ComponentClassifier::Stump(Stump {
            feature: 0,
            threshold: if label > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY },
            polarity: 1,
        })
    }

    fn line(n: usize) -> Dataset {
        let pts = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        Dataset::new(pts, labels).unwrap()
    }

    #[test]
    fn weighted_error_examples() {
        let d = Dataset::new(
            vec![vec![-1.0], vec![-0.5], vec![0.5], vec![1.0]],
            vec![-1, -1, 1, 1],
        )
        .unwrap();
        let w = WeightVector::uniform(4);
        let perfect = ComponentClassifier::Stump(Stump {
            feature: 0,
            threshold: 0.0,
            polarity: 1,
        });
        assert_eq!(weighted_error(&perfect, &d, &w).unwrap(), 0.0);
        let one_off = ComponentClassifier::Stump(Stump {
            feature: 0,
            threshold: -0.75,
            polarity: 1,
        });
        assert_eq!(weighted_error(&one_off, &d, &w).unwrap(), 0.25);
        assert!(weighted_error(&perfect, &d, &WeightVector::uniform(3)).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_of(0.5).value, 0.0);
        assert!((alpha_of(0.25).value - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((alpha_of(0.75).value + 0.5 * 3f64.ln()).abs() < 1e-15);
        let a = alpha_of(0.0);
        assert!(a.clamped);
        assert!((a.value - 0.5 * ((1.0 - 1e-10) / 1e-10f64).ln()).abs() < 1e-9);
        assert!(alpha_of(1.0).clamped);
        assert!(!alpha_of(0.3).clamped);
    }

    #[test]
    fn update_weights_examples() {
        let d = Dataset::new(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![-1, 1, 1, 1],
        )
        .unwrap();
        let w = WeightVector::uniform(4);
        let h = constant(1.0); // wrong only on sample 0
        let eps = weighted_error(&h, &d, &w).unwrap();
        assert_eq!(eps, 0.25);
        let (next, z) = update_weights(&w, alpha_of(eps).value, &h, &d).unwrap();
        let expected = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (a, b) in next.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((z - 2.0 * (0.25f64 * 0.75).sqrt()).abs() < 1e-15);

        let (same, _) = update_weights(&w, 0.0, &h, &d).unwrap();
        assert_eq!(same, w);

        let always_wrong = constant(-1.0);
        let d2 = Dataset::new(vec![vec![0.0]; 3], vec![1, 1, 1]).unwrap();
        let w2 = WeightVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let (unchanged, _) = update_weights(&w2, 0.7, &always_wrong, &d2).unwrap();
        for (a, b) in unchanged.as_slice().iter().zip(w2.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn strong_decision_examples() {
        let s = StrongClassifier {
            rounds: vec![WeightedComponent {
                alpha: 0.5,
                component: constant(1.0),
            }],
            threshold: 0.0,
        };
        assert_eq!(strong_decision(&s, &[0.0][..]), (0.5, 1));
        let s = StrongClassifier {
            rounds: vec![
                WeightedComponent {
                    alpha: 1.0,
                    component: constant(1.0),
                },
                WeightedComponent {
                    alpha: 2.0,
                    component: constant(-1.0),
                },
            ],
            threshold: 0.0,
        };
        assert_eq!(strong_decision(&s, &[0.0][..]), (-1.0, -1));
        let lenient = StrongClassifier {
            threshold: -10.0,
            ..s
        };
        assert_eq!(strong_decision(&lenient, &[0.0][..]).1, 1);
    }

    #[test]
    fn single_perfect_stump_stops_early() {
        let d = Dataset::new(
            vec![vec![-2.0], vec![-1.0], vec![1.0], vec![3.0]],
            vec![-1, -1, 1, 1],
        )
        .unwrap();
        let run = run_adaboost(&d, &mut StumpLearner::default(), 10).unwrap();
        assert_eq!(run.rounds.len(), 1);
        assert!(run.rounds[0].clamped);
        assert_eq!(run.classifier.training_error(&d), 0.0);
    }

    #[test]
    fn constant_learner_on_balanced_data() {
        let d = line(6);
        let mut learner =
            |_: &Dataset, _: &WeightVector, _: usize| -> Result<ComponentClassifier, LearnError> {
                Ok(constant(1.0))
            };
        let run = run_adaboost(&d, &mut learner, 3).unwrap();
        assert_eq!(run.rounds.len(), 3);
        for r in &run.rounds {
            assert_eq!(r.epsilon, 0.5);
            assert_eq!(r.alpha, 0.0);
        }
    }

    #[test]
    fn learner_failure_names_round() {
        let d = line(4);
        let mut learner = |_: &Dataset, _: &WeightVector, t: usize| {
            if t == 2 {
                Err(LearnError::Other("boom".into()))
            } else {
                Ok(constant(1.0))
            }
        };
        let err = run_adaboost(&d, &mut learner, 5).unwrap_err();
        assert!(matches!(err, BoostError::Learner { round: 2, .. }));
        assert_eq!(run_adaboost(&d, &mut StumpLearner::default(), 0), Err(BoostError::NoRounds));
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.5, 1.5]).is_err());
        assert!(WeightVector::normalized(vec![0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn alpha_is_antisymmetric(e in 1e-6f64..(1.0 - 1e-6)) {
            prop_assert!((alpha_of(e).value + alpha_of(1.0 - e).value).abs() < 1e-12);
        }

        #[test]
        fn updated_weights_stay_a_distribution(
            raw in proptest::collection::vec(0.01f64..1.0, 2..40),
            alpha in -3.0f64..3.0,
            seed in any::<u64>(),
        ) {
            let n = raw.len();
            let (w, _) = WeightVector::normalized(raw).unwrap();
            let labels: Vec<i8> = (0..n).map(|i| if (seed >> (i % 64)) & 1 == 1 { 1 } else { -1 }).collect();
            let preds: Vec<i8> = (0..n).map(|i| if (seed >> ((i * 7) % 64)) & 1 == 1 { 1 } else { -1 }).collect();
            let (next, z) = update_with_predictions(&w, alpha, &preds, &labels).unwrap();
            prop_assert!(z > 0.0);
            prop_assert!((next.sum() - 1.0).abs() < 1e-12);
            prop_assert!(next.as_slice().iter().all(|v| *v >= 0.0));
        }
    }
}
