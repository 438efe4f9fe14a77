//! Soft-margin kernel SVM trained by sequential minimal optimization.

mod cache;
mod smo;

use crate::boosting::WeightVector;
use crate::dataset::Dataset;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use smo::SolveStats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("resampling drew a single class in {attempts} attempts")]
    ResampleSingleClass { attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Rbf {
        #[serde(with = "crate::real")]
        sigma: f64,
    },
    Polynomial {
        degree: u32,
    },
    Sigmoid {
        #[serde(with = "crate::real")]
        a: f64,
    },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), SvmError> {
        match *self {
            KernelSpec::Rbf { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                SvmError::InvalidParameter(format!("rbf sigma must be positive, got {sigma}")),
            ),
            KernelSpec::Polynomial { degree: 0 } => Err(SvmError::InvalidParameter(
                "polynomial degree must be >= 1".into(),
            )),
            KernelSpec::Sigmoid { a } if !a.is_finite() => {
                Err(SvmError::InvalidParameter("sigmoid offset must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Rbf { sigma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Polynomial { degree } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (dot + 1.0).powi(degree as i32)
            }
            KernelSpec::Sigmoid { a } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (dot + a).tanh()
            }
        }
    }
}

/// `K(x, y)` for the given kernel.
pub fn kernel_eval(k: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(k.eval_unchecked(x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kkt_tolerance: f64,
    /// Iteration cap, in multiples of the training-set size.
    pub max_passes: usize,
    /// Kernel rows kept in the LRU cache.
    pub cache_budget: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kkt_tolerance: 1e-3,
            max_passes: 200,
            cache_budget: 1024,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SvmError> {
        if !(self.kkt_tolerance > 0.0) {
            return Err(SvmError::InvalidParameter("kkt_tolerance must be positive".into()));
        }
        if self.max_passes == 0 {
            return Err(SvmError::InvalidParameter("max_passes must be positive".into()));
        }
        Ok(())
    }
}

/// Kernel expansion `f(x) = sum_j coef_j K(sv_j, x) + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    #[serde(with = "crate::real")]
    pub c: f64,
    pub dim: usize,
    /// Support vectors, flattened row-major.
    #[serde(with = "crate::real::vec")]
    pub support_vectors: Vec<f64>,
    /// `y_i * alpha_i` per support vector.
    #[serde(with = "crate::real::vec")]
    pub dual_coefs: Vec<f64>,
    #[serde(with = "crate::real")]
    pub bias: f64,
}

impl SvmModel {
    pub fn n_support(&self) -> usize {
        self.dual_coefs.len()
    }

    pub fn support_vector(&self, j: usize) -> &[f64] {
        &self.support_vectors[j * self.dim..(j + 1) * self.dim]
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self
            .dual_coefs
            .iter()
            .enumerate()
            .map(|(j, c)| c * self.kernel.eval_unchecked(self.support_vector(j), x))
            .sum();
        sum + self.bias
    }

    /// `sign(f(x))` with `sign(0) = +1`.
    pub fn classify(&self, x: &[f64]) -> Result<i8, SvmError> {
        self.decision(x).map(sign)
    }
}

/// `svm_decision`: the real-valued margin of `x`.
pub fn svm_decision(m: &SvmModel, x: &[f64]) -> Result<f64, SvmError> {
    m.decision(x)
}

pub(crate) fn sign(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// A trained model plus the full dual solution it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub model: SvmModel,
    /// `alpha_i` for every training point (zeros included).
    pub alpha: Vec<f64>,
    /// Per-point box bound `C_i`.
    pub upper: Vec<f64>,
    pub stats: SolveStats,
}

/// Trains with a common box bound `C` for every point.
pub fn train_svm(
    data: &Dataset,
    kernel: KernelSpec,
    c: f64,
    cfg: &SolverConfig,
) -> Result<SvmFit, SvmError> {
    let upper = vec![c; data.len()];
    train_with_bounds(data, kernel, c, &upper, cfg)
}

fn train_with_bounds(
    data: &Dataset,
    kernel: KernelSpec,
    c: f64,
    upper: &[f64],
    cfg: &SolverConfig,
) -> Result<SvmFit, SvmError> {
    kernel.validate()?;
    cfg.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(SvmError::InvalidParameter(format!("C must be positive, got {c}")));
    }
    if !data.has_both_classes() {
        return Err(SvmError::SingleClass);
    }
    let (alpha, bias, stats) = smo::solve(data, kernel, upper, cfg);
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (i, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.extend_from_slice(data.point(i));
            dual_coefs.push(data.label(i) as f64 * a);
        }
    }
    Ok(SvmFit {
        model: SvmModel {
            kernel,
            c,
            dim: data.dim(),
            support_vectors,
            dual_coefs,
            bias,
        },
        alpha,
        upper: upper.to_vec(),
        stats,
    })
}

/// How sample weights reach the SVM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightMode {
    /// Draw `n` points i.i.d. from the weight distribution and train on them.
    Resample { n: usize, seed: u64 },
    /// Per-point box bounds `C_i = C * N * w_i`.
    Reweight,
}

const RESAMPLE_REDRAWS: usize = 10;

/// Indices drawn with replacement from `w`; redrawn while only one class appears.
pub fn resample_indices(
    data: &Dataset,
    w: &WeightVector,
    n: usize,
    seed: u64,
) -> Result<Vec<usize>, SvmError> {
    if n < 2 {
        return Err(SvmError::InvalidParameter("resample size must be >= 2".into()));
    }
    let dist = WeightedIndex::new(w.as_slice())
        .map_err(|e| SvmError::InvalidParameter(format!("weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..=RESAMPLE_REDRAWS {
        let idx: Vec<usize> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let pos = idx.iter().filter(|&&i| data.label(i) > 0).count();
        if pos > 0 && pos < n {
            return Ok(idx);
        }
    }
    Err(SvmError::ResampleSingleClass {
        attempts: RESAMPLE_REDRAWS + 1,
    })
}

pub fn train_weighted_svm(
    data: &Dataset,
    w: &WeightVector,
    kernel: KernelSpec,
    c: f64,
    cfg: &SolverConfig,
    mode: WeightMode,
) -> Result<SvmFit, SvmError> {
    if w.len() != data.len() {
        return Err(SvmError::Dimension {
            expected: data.len(),
            found: w.len(),
        });
    }
    match mode {
        WeightMode::Resample { n, seed } => {
            let idx = resample_indices(data, w, n, seed)?;
            train_svm(&data.subset(&idx), kernel, c, cfg)
        }
        WeightMode::Reweight => {
            let n = data.len() as f64;
            let upper: Vec<f64> = w.as_slice().iter().map(|wi| c * n * wi).collect();
            train_with_bounds(data, kernel, c, &upper, cfg)
        }
    }
}

/// Dual objective `1/2 a'Qa - sum a` of a solution, recomputed from scratch.
pub fn dual_objective(data: &Dataset, kernel: &KernelSpec, alpha: &[f64]) -> f64 {
    let mut quad = 0.0;
    for i in 0..data.len() {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..data.len() {
            if alpha[j] == 0.0 {
                continue;
            }
            let yy = (data.label(i) * data.label(j)) as f64;
            quad += alpha[i] * alpha[j] * yy * kernel.eval_unchecked(data.point(i), data.point(j));
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}
