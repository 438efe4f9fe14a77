use super::{top_stump_features, ComponentClassifier, ComponentLearn, LearnError, WeightVector};
use crate::dataset::{Dataset, FeatureAccess};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One tanh hidden layer with a linear output, thresholded at 0.
///
/// Inputs are standardised with the (weighted) training mean and scale
/// before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyNet {
    pub feature_subset: Vec<u32>,
    #[serde(with = "crate::real::vec")]
    pub input_mean: Vec<f64>,
    #[serde(with = "crate::real::vec")]
    pub input_scale: Vec<f64>,
    pub hidden: usize,
    /// `hidden x inputs`, row-major.
    #[serde(with = "crate::real::vec")]
    pub w1: Vec<f64>,
    #[serde(with = "crate::real::vec")]
    pub b1: Vec<f64>,
    #[serde(with = "crate::real::vec")]
    pub w2: Vec<f64>,
    #[serde(with = "crate::real")]
    pub b2: f64,
}

impl TinyNet {
    fn forward(&self, z: &[f64], hidden: &mut [f64]) -> f64 {
        let d = z.len();
        let mut out = self.b2;
        for (k, h) in hidden.iter_mut().enumerate() {
            let row = &self.w1[k * d..(k + 1) * d];
            let pre: f64 = self.b1[k] + row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            *h = pre.tanh();
            out += self.w2[k] * *h;
        }
        out
    }

    pub fn output<F: FeatureAccess + ?Sized>(&self, x: &F) -> f64 {
        let z: Vec<f64> = self
            .feature_subset
            .iter()
            .enumerate()
            .map(|(j, &f)| (x.feature(f as usize) - self.input_mean[j]) / self.input_scale[j])
            .collect();
        let mut hidden = vec![0.0; self.hidden];
        self.forward(&z, &mut hidden)
    }

    pub fn predict<F: FeatureAccess + ?Sized>(&self, x: &F) -> i8 {
        crate::svm::sign(self.output(x))
    }
}

const LEARNING_RATE: f64 = 0.5;

/// Full-batch gradient descent on `sum_i w_i (out_i - y_i)^2`.
pub fn learn_tinynet(
    data: &Dataset,
    w: &WeightVector,
    hidden: usize,
    epochs: usize,
    seed: u64,
) -> Result<ComponentClassifier, LearnError> {
    let subset: Vec<u32> = (0..data.dim() as u32).collect();
    train_on_subset(data, w, subset, hidden, epochs, seed).map(ComponentClassifier::TinyNet)
}

fn train_on_subset(
    data: &Dataset,
    w: &WeightVector,
    subset: Vec<u32>,
    hidden: usize,
    epochs: usize,
    seed: u64,
) -> Result<TinyNet, LearnError> {
    if data.is_empty() || subset.is_empty() || hidden == 0 {
        return Err(LearnError::Empty);
    }
    let d = subset.len();
    let n = data.len();
    let wt = w.as_slice();

    let mut mean = vec![0.0; d];
    let mut scale = vec![0.0; d];
    for (j, &f) in subset.iter().enumerate() {
        let m: f64 = (0..n).map(|i| wt[i] * data.point(i)[f as usize]).sum();
        let v: f64 = (0..n)
            .map(|i| wt[i] * (data.point(i)[f as usize] - m).powi(2))
            .sum();
        mean[j] = m;
        scale[j] = if v > 1e-24 { v.sqrt() } else { 1.0 };
    }
    let z: Vec<f64> = (0..n)
        .flat_map(|i| {
            let p = data.point(i);
            subset
                .iter()
                .enumerate()
                .map(|(j, &f)| (p[f as usize] - mean[j]) / scale[j])
                .collect::<Vec<_>>()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r1 = 1.0 / (d as f64).sqrt();
    let r2 = 1.0 / (hidden as f64).sqrt();
    let mut net = TinyNet {
        feature_subset: subset,
        input_mean: mean,
        input_scale: scale,
        hidden,
        w1: (0..hidden * d).map(|_| rng.random_range(-r1..r1)).collect(),
        b1: vec![0.0; hidden],
        w2: (0..hidden).map(|_| rng.random_range(-r2..r2)).collect(),
        b2: 0.0,
    };

    let mut h = vec![0.0; hidden];
    let mut g_w1 = vec![0.0; hidden * d];
    let mut g_b1 = vec![0.0; hidden];
    let mut g_w2 = vec![0.0; hidden];
    for _ in 0..epochs {
        g_w1.iter_mut().for_each(|g| *g = 0.0);
        g_b1.iter_mut().for_each(|g| *g = 0.0);
        g_w2.iter_mut().for_each(|g| *g = 0.0);
        let mut g_b2 = 0.0;
        for i in 0..n {
            let zi = &z[i * d..(i + 1) * d];
            let out = net.forward(zi, &mut h);
            let delta = 2.0 * wt[i] * (out - data.label(i) as f64);
            g_b2 += delta;
            for k in 0..hidden {
                g_w2[k] += delta * h[k];
                let back = delta * net.w2[k] * (1.0 - h[k] * h[k]);
                g_b1[k] += back;
                for (g, zj) in g_w1[k * d..(k + 1) * d].iter_mut().zip(zi) {
                    *g += back * zj;
                }
            }
        }
        for (p, g) in net.w1.iter_mut().zip(&g_w1) {
            *p -= LEARNING_RATE * g;
        }
        for (p, g) in net.b1.iter_mut().zip(&g_b1) {
            *p -= LEARNING_RATE * g;
        }
        for (p, g) in net.w2.iter_mut().zip(&g_w2) {
            *p -= LEARNING_RATE * g;
        }
        net.b2 -= LEARNING_RATE * g_b2;
    }
    let finite = net.w1.iter().chain(&net.b1).chain(&net.w2).all(|v| v.is_finite());
    if !finite || !net.b2.is_finite() {
        return Err(LearnError::NonFinite);
    }
    Ok(net)
}

#[derive(Debug, Clone, Copy)]
pub struct TinyNetLearner {
    pub hidden: usize,
    pub epochs: usize,
    pub seed: u64,
    /// When set, train on the `d` features with the best weighted stumps.
    pub inputs: Option<usize>,
}

impl Default for TinyNetLearner {
    fn default() -> Self {
        TinyNetLearner {
            hidden: 8,
            epochs: 200,
            seed: 0,
            inputs: None,
        }
    }
}

impl ComponentLearn for TinyNetLearner {
    fn learn(
        &mut self,
        data: &Dataset,
        w: &WeightVector,
        round: usize,
    ) -> Result<ComponentClassifier, LearnError> {
        let subset = match self.inputs {
            Some(d) => top_stump_features(data, w, d),
            None => (0..data.dim() as u32).collect(),
        };
        let seed = crate::derive_seed(self.seed, round as u64);
        train_on_subset(data, w, subset, self.hidden, self.epochs, seed)
            .map(ComponentClassifier::TinyNet)
    }
}
