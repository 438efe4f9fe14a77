//! AdaBoost whose component classifiers are RBF-SVMs, with a kernel width
//! that starts wide (weak learners) and shrinks whenever a component is
//! worse than chance on the weighted training set.

use crate::boosting::{
    top_stump_features, AdaBoost, BoostError, BoostRound, ComponentClassifier, StepOutcome,
    StrongClassifier, SvmComponent, WeightVector,
};
use crate::dataset::Dataset;
use crate::derive_seed;
use crate::real::csv_real;
use crate::svm::{train_weighted_svm, KernelSpec, SolverConfig, SvmError, WeightMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoostSvmError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("schedule exhausted: sigma reached sigma_min before any round was accepted")]
    ScheduleExhausted,
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Boost(#[from] BoostError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSchedule {
    #[serde(with = "crate::real")]
    pub sigma_ini: f64,
    #[serde(with = "crate::real")]
    pub sigma_min: f64,
    #[serde(with = "crate::real")]
    pub sigma_step: f64,
    #[serde(with = "crate::real")]
    pub current: f64,
}

impl SigmaSchedule {
    pub fn new(sigma_ini: f64, sigma_min: f64, sigma_step: f64) -> Result<Self, BoostSvmError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(sigma_ini) && ok(sigma_min) && ok(sigma_step)) || sigma_min >= sigma_ini {
            return Err(BoostSvmError::Config(format!(
                "need 0 < sigma_min < sigma_ini and sigma_step > 0 \
                 (got ini={sigma_ini}, min={sigma_min}, step={sigma_step})"
            )));
        }
        Ok(SigmaSchedule {
            sigma_ini,
            sigma_min,
            sigma_step,
            current: sigma_ini,
        })
    }

    /// `ini = 10 m`, `min = m / 10`, 20 steps between them, where `m` is the
    /// median pairwise distance of at most 200 points drawn with `seed`.
    pub fn from_data(data: &Dataset, seed: u64) -> Result<Self, BoostSvmError> {
        let m = median_pairwise_distance(data, 200, seed);
        if !(m > 0.0 && m.is_finite()) {
            return Err(BoostSvmError::Config(
                "cannot derive a kernel width: all sampled points coincide".into(),
            ));
        }
        let (ini, min) = (10.0 * m, 0.1 * m);
        Self::new(ini, min, (ini - min) / 20.0)
    }

    pub fn is_running(&self) -> bool {
        self.current > self.sigma_min
    }

    pub fn decrement(&mut self) {
        self.current -= self.sigma_step;
    }
}

/// Median Euclidean distance over all pairs of a seeded subsample.
pub fn median_pairwise_distance(data: &Dataset, max_points: usize, seed: u64) -> f64 {
    let n = data.len();
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = if n > max_points {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, n, max_points).into_vec()
    } else {
        (0..n).collect()
    };
    idx.sort_unstable();
    let mut d = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let s: f64 = data
                .point(i)
                .iter()
                .zip(data.point(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            d.push(s.sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let k = d.len();
    if k % 2 == 1 {
        d[k / 2]
    } else {
        0.5 * (d[k / 2 - 1] + d[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostSvmConfig {
    /// `None` derives the schedule from the data.
    pub schedule: Option<SigmaSchedule>,
    #[serde(with = "crate::real")]
    pub c: f64,
    /// `None` means `min(N, 1000)`.
    pub resample_n: Option<usize>,
    pub t_max: usize,
    /// `None` trains on every input dimension; `Some(d)` first keeps the `d`
    /// features with the lowest weighted stump error.
    pub feature_subset_size: Option<usize>,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for BoostSvmConfig {
    fn default() -> Self {
        BoostSvmConfig {
            schedule: None,
            c: 1.0,
            resample_n: None,
            t_max: 50,
            feature_subset_size: None,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

/// One SVM training attempt, accepted or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub stage: usize,
    /// Number the round gets if accepted.
    pub t: usize,
    #[serde(with = "crate::real")]
    pub sigma: f64,
    #[serde(with = "crate::real")]
    pub epsilon: f64,
    #[serde(with = "crate::real")]
    pub alpha: f64,
    pub accepted: bool,
    pub resample_seed: u64,
}

pub const ATTEMPT_CSV_HEADER: &str = "stage,t,sigma,epsilon,alpha,status,resample_seed";

impl Attempt {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.stage,
            self.t,
            csv_real(self.sigma),
            csv_real(self.epsilon),
            csv_real(self.alpha),
            if self.accepted { "accepted" } else { "rejected" },
            self.resample_seed
        )
    }
}

pub fn attempts_csv(attempts: &[Attempt]) -> String {
    let mut s = String::from(ATTEMPT_CSV_HEADER);
    s.push('\n');
    for a in attempts {
        s.push_str(&a.csv_row());
        s.push('\n');
    }
    s
}

/// Trains one RBF-SVM component on a weighted resample of `data`.
pub fn make_svm_component(
    data: &Dataset,
    w: &WeightVector,
    sigma: f64,
    cfg: &BoostSvmConfig,
    resample_seed: u64,
) -> Result<ComponentClassifier, SvmError> {
    let subset: Vec<u32> = match cfg.feature_subset_size {
        Some(d) => top_stump_features(data, w, d),
        None => (0..data.dim() as u32).collect(),
    };
    let n = cfg.resample_n.unwrap_or(data.len().min(1000));
    let mode = WeightMode::Resample {
        n,
        seed: resample_seed,
    };
    let kernel = KernelSpec::Rbf { sigma };
    let fit = if subset.len() == data.dim() && subset.iter().enumerate().all(|(i, &f)| f as usize == i)
    {
        train_weighted_svm(data, w, kernel, cfg.c, &cfg.solver, mode)?
    } else {
        let cols: Vec<usize> = subset.iter().map(|&f| f as usize).collect();
        train_weighted_svm(&data.project(&cols), w, kernel, cfg.c, &cfg.solver, mode)?
    };
    Ok(ComponentClassifier::Svm(SvmComponent {
        feature_subset: subset,
        model: fit.model,
    }))
}

const STALL_LIMIT: usize = 3;

/// What one call to [`BoostSvm::step`] achieved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvmStep {
    Accepted(StepOutcome),
    /// The schedule or the round budget ran out; no round was added.
    Finished,
}

/// Round-by-round driver; each `step` retries at smaller widths until a
/// component with weighted error at most 1/2 is found.
pub struct BoostSvm<'a> {
    data: &'a Dataset,
    boost: AdaBoost<'a>,
    cfg: BoostSvmConfig,
    schedule: SigmaSchedule,
    attempts: Vec<Attempt>,
    stage: usize,
    zero_alpha_run: usize,
}

impl<'a> BoostSvm<'a> {
    pub fn new(data: &'a Dataset, cfg: BoostSvmConfig, stage: usize) -> Result<Self, BoostSvmError> {
        if !data.has_both_classes() {
            return Err(BoostSvmError::SingleClass);
        }
        if !(cfg.c > 0.0 && cfg.c.is_finite()) || cfg.t_max == 0 {
            return Err(BoostSvmError::Config("C and T_max must be positive".into()));
        }
        if cfg.resample_n == Some(0) || cfg.feature_subset_size == Some(0) {
            return Err(BoostSvmError::Config(
                "resample size and feature subset size must be positive".into(),
            ));
        }
        let schedule = match cfg.schedule {
            Some(s) => SigmaSchedule::new(s.sigma_ini, s.sigma_min, s.sigma_step)?,
            None => match cfg.feature_subset_size {
                Some(d) => {
                    let cols: Vec<usize> =
                        top_stump_features(data, &WeightVector::uniform(data.len()), d)
                            .into_iter()
                            .map(|f| f as usize)
                            .collect();
                    SigmaSchedule::from_data(&data.project(&cols), cfg.seed)?
                }
                None => SigmaSchedule::from_data(data, cfg.seed)?,
            },
        };
        Ok(BoostSvm {
            data,
            boost: AdaBoost::new(data),
            cfg,
            schedule,
            attempts: Vec::new(),
            stage,
            zero_alpha_run: 0,
        })
    }

    pub fn schedule(&self) -> &SigmaSchedule {
        &self.schedule
    }

    pub fn attempts(&self) -> &[Attempt] {
        &self.attempts
    }

    pub fn rounds(&self) -> &[BoostRound] {
        self.boost.rounds()
    }

    pub fn weights(&self) -> &WeightVector {
        self.boost.weights()
    }

    pub fn classifier(&self, threshold: f64) -> StrongClassifier {
        self.boost.classifier(threshold)
    }

    pub fn step(&mut self) -> Result<SvmStep, BoostSvmError> {
        loop {
            if !self.schedule.is_running() || self.boost.rounds().len() >= self.cfg.t_max {
                return Ok(SvmStep::Finished);
            }
            let t = self.boost.rounds().len() + 1;
            let resample_seed = derive_seed(
                derive_seed(self.cfg.seed, self.stage as u64),
                self.attempts.len() as u64,
            );
            let sigma = self.schedule.current;
            let h = make_svm_component(
                self.data,
                self.boost.weights(),
                sigma,
                &self.cfg,
                resample_seed,
            )?;
            let preds: Vec<i8> = self.data.points().map(|p| h.predict(p)).collect();
            let epsilon = crate::boosting::error_of_predictions(
                &preds,
                self.data.labels(),
                self.boost.weights(),
            );
            if epsilon > 0.5 {
                self.attempts.push(Attempt {
                    stage: self.stage,
                    t,
                    sigma,
                    epsilon,
                    alpha: 0.0,
                    accepted: false,
                    resample_seed,
                });
                self.schedule.decrement();
                continue;
            }
            let outcome = self.boost.accept(h, &preds);
            let round = self.boost.rounds().last().expect("round just accepted");
            self.attempts.push(Attempt {
                stage: self.stage,
                t,
                sigma,
                epsilon,
                alpha: round.alpha,
                accepted: true,
                resample_seed,
            });
            if round.alpha == 0.0 {
                self.zero_alpha_run += 1;
                if self.zero_alpha_run >= STALL_LIMIT {
                    self.zero_alpha_run = 0;
                    self.schedule.decrement();
                }
            } else {
                self.zero_alpha_run = 0;
            }
            return Ok(SvmStep::Accepted(outcome));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostSvmRun {
    pub classifier: StrongClassifier,
    pub rounds: Vec<BoostRound>,
    pub attempts: Vec<Attempt>,
    pub schedule: SigmaSchedule,
}

pub fn run_adaboost_svm(data: &Dataset, cfg: &BoostSvmConfig) -> Result<BoostSvmRun, BoostSvmError> {
    let mut run = BoostSvm::new(data, cfg.clone(), 0)?;
    loop {
        match run.step()? {
            SvmStep::Accepted(StepOutcome::Continue) => {}
            SvmStep::Accepted(StepOutcome::Perfect) | SvmStep::Finished => break,
        }
    }
    if run.rounds().is_empty() {
        return Err(BoostSvmError::ScheduleExhausted);
    }
    Ok(BoostSvmRun {
        classifier: run.classifier(0.0),
        rounds: run.rounds().to_vec(),
        attempts: run.attempts,
        schedule: run.schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Dataset {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.3;
            pts.push(vec![t.cos(), t.sin()]);
            labels.push(-1);
            pts.push(vec![4.0 + t.cos(), 4.0 + t.sin()]);
            labels.push(1);
        }
        Dataset::new(pts, labels).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(SigmaSchedule::new(1.0, 2.0, 0.1).is_err());
        assert!(SigmaSchedule::new(2.0, 1.0, 0.0).is_err());
        let s = SigmaSchedule::new(2.0, 1.0, 0.5).unwrap();
        assert_eq!(s.current, 2.0);
    }

    #[test]
    fn median_of_three_collinear_points() {
        let d = Dataset::new(vec![vec![0.0], vec![1.0], vec![3.0]], vec![-1, 1, 1]).unwrap();
        // distances 1, 2, 3
        assert_eq!(median_pairwise_distance(&d, 200, 0), 2.0);
    }

    #[test]
    fn separable_data_stops_after_one_round() {
        let run = run_adaboost_svm(&blobs(), &BoostSvmConfig::default()).unwrap();
        assert_eq!(run.rounds.len(), 1);
        assert_eq!(run.rounds[0].epsilon, 0.0);
        assert!(run.rounds[0].clamped);
    }

    #[test]
    fn identical_seeds_identical_components() {
        let d = blobs();
        let w = WeightVector::uniform(d.len());
        let cfg = BoostSvmConfig::default();
        assert_eq!(
            make_svm_component(&d, &w, 1.5, &cfg, 4).unwrap(),
            make_svm_component(&d, &w, 1.5, &cfg, 4).unwrap()
        );
    }

    #[test]
    fn full_subset_is_identity_projection() {
        let d = blobs();
        let w = WeightVector::uniform(d.len());
        let cfg = BoostSvmConfig {
            feature_subset_size: Some(5),
            ..Default::default()
        };
        let ComponentClassifier::Svm(c) = make_svm_component(&d, &w, 1.5, &cfg, 4).unwrap() else {
            panic!()
        };
        assert_eq!(c.feature_subset, vec![0, 1]);
    }

    #[test]
    fn csv_rows_name_status() {
        let a = Attempt {
            stage: 0,
            t: 1,
            sigma: 2.0,
            epsilon: 0.6,
            alpha: 0.0,
            accepted: false,
            resample_seed: 9,
        };
        assert_eq!(
            a.csv_row(),
            "0,1,2.0000000000000000e0,5.9999999999999998e-1,0.0000000000000000e0,rejected,9"
        );
    }
}
