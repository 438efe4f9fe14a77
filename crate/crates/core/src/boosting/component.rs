use super::{DecisionTree, TinyNet};
use crate::dataset::FeatureAccess;
use crate::svm::SvmModel;
use serde::{Deserialize, Serialize};

/// `+1` when `polarity * (x[feature] - threshold) >= 0`, else `-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: u32,
    #[serde(with = "crate::real")]
    pub threshold: f64,
    pub polarity: i8,
}

impl Stump {
    #[inline]
    pub fn predict_value(&self, v: f64) -> i8 {
        if self.polarity as f64 * (v - self.threshold) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// An SVM evaluated on a projection of the input onto `feature_subset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmComponent {
    pub feature_subset: Vec<u32>,
    pub model: SvmModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ComponentClassifier {
    Stump(Stump),
    Tree(DecisionTree),
    TinyNet(TinyNet),
    Svm(SvmComponent),
}

impl ComponentClassifier {
    pub fn predict<F: FeatureAccess + ?Sized>(&self, x: &F) -> i8 {
        match self {
            ComponentClassifier::Stump(s) => s.predict_value(x.feature(s.feature as usize)),
            ComponentClassifier::Tree(t) => t.predict(x),
            ComponentClassifier::TinyNet(n) => n.predict(x),
            ComponentClassifier::Svm(s) => {
                let v: Vec<f64> = s
                    .feature_subset
                    .iter()
                    .map(|&f| x.feature(f as usize))
                    .collect();
                crate::svm::sign(s.model.decision_unchecked(&v))
            }
        }
    }

    /// Every feature id the component reads, unsorted, possibly repeated.
    pub fn feature_ids(&self) -> Vec<u32> {
        match self {
            ComponentClassifier::Stump(s) => vec![s.feature],
            ComponentClassifier::Tree(t) => t.feature_ids(),
            ComponentClassifier::TinyNet(n) => n.feature_subset.clone(),
            ComponentClassifier::Svm(s) => s.feature_subset.clone(),
        }
    }

    pub fn remap_features(&mut self, map: &[u32]) {
        match self {
            ComponentClassifier::Stump(s) => s.feature = map[s.feature as usize],
            ComponentClassifier::Tree(t) => t.remap_features(map),
            ComponentClassifier::TinyNet(n) => {
                n.feature_subset.iter_mut().for_each(|f| *f = map[*f as usize])
            }
            ComponentClassifier::Svm(s) => {
                s.feature_subset.iter_mut().for_each(|f| *f = map[*f as usize])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedComponent {
    #[serde(with = "crate::real")]
    pub alpha: f64,
    pub component: ComponentClassifier,
}
