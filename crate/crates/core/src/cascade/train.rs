use super::{
    run_stages, scan_sizes, CascadeModel, LutWindow, StageMeta, TrainingMeta, FORMAT_VERSION,
};
use crate::boosting::{
    AdaBoost, BoostError, ComponentLearn, StepOutcome, StrongClassifier, StumpLearner,
    TinyNetLearner, TreeLearner,
};
use crate::boostsvm::{BoostSvm, BoostSvmConfig, BoostSvmError, SvmStep};
use crate::dataset::{Dataset, FeatureAccess};
use crate::derive_seed;
use crate::features::{build_lut_subset, enumerate_pool, FeaturePool, ScaledFeatureLUT};
use crate::imaging::{GrayImage, IntegralPair};
use crate::real::csv_real;
use crate::svm::SolverConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bad training data: {0}")]
    Data(String),
    #[error("stage {stage}: {source}")]
    Boost { stage: usize, source: BoostError },
    #[error("stage {stage}: {source}")]
    BoostSvm { stage: usize, source: BoostSvmError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerKind {
    Stump,
    Tree {
        max_depth: usize,
    },
    Net {
        hidden: usize,
        epochs: usize,
        inputs: usize,
    },
    Svm {
        #[serde(with = "crate::real")]
        c: f64,
        feature_subset_size: usize,
        resample_n: Option<usize>,
    },
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Stump => "stump",
            LearnerKind::Tree { .. } => "tree",
            LearnerKind::Net { .. } => "net",
            LearnerKind::Svm { .. } => "svm",
        }
    }

    /// Defaults for each family, looked up by name.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "stump" => LearnerKind::Stump,
            "tree" => LearnerKind::Tree { max_depth: 3 },
            "net" => LearnerKind::Net {
                hidden: 8,
                epochs: 200,
                inputs: 16,
            },
            "svm" => LearnerKind::Svm {
                c: 1.0,
                feature_subset_size: 16,
                resample_n: None,
            },
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub base: u32,
    pub learner: LearnerKind,
    /// Minimum held-out face detection rate per stage.
    #[serde(with = "crate::real")]
    pub d_min: f64,
    /// Maximum held-out false-positive rate per stage.
    #[serde(with = "crate::real")]
    pub f_max: f64,
    /// Training stops once the product of stage false-positive rates reaches this.
    #[serde(with = "crate::real")]
    pub target_fpr: f64,
    pub max_stages: usize,
    pub max_rounds: usize,
    /// Fraction of the faces held out to tune stage thresholds.
    #[serde(with = "crate::real")]
    pub validation_fraction: f64,
    /// Mined negatives per training face (capped at 10).
    #[serde(with = "crate::real")]
    pub negative_ratio: f64,
    /// Size of the random candidate subset of the pool; `None` uses the whole pool.
    pub candidate_features: Option<usize>,
    /// Window draws allowed per requested negative before mining gives up.
    pub mining_draws: usize,
    #[serde(with = "crate::real")]
    pub scale_factor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base: 32,
            learner: LearnerKind::Stump,
            d_min: 0.995,
            f_max: 0.5,
            target_fpr: 1e-3,
            max_stages: 10,
            max_rounds: 100,
            validation_fraction: 0.25,
            negative_ratio: 3.0,
            candidate_features: Some(2000),
            mining_draws: 200,
            scale_factor: 1.25,
            seed: 0,
        }
    }
}

const NEGATIVE_CAP: f64 = 10.0;

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.base < 2 {
            return bad(format!("base must be >= 2, got {}", self.base));
        }
        if !(0.0..=1.0).contains(&self.d_min) || !(0.0..=1.0).contains(&self.f_max) {
            return bad("d_min and f_max must lie in [0, 1]".into());
        }
        if !(self.target_fpr > 0.0 && self.target_fpr <= 1.0) {
            return bad("target_fpr must lie in (0, 1]".into());
        }
        if self.max_stages == 0 || self.max_rounds == 0 || self.mining_draws == 0 {
            return bad("max_stages, max_rounds and mining_draws must be >= 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)".into());
        }
        if !(self.negative_ratio > 0.0 && self.negative_ratio.is_finite()) {
            return bad("negative_ratio must be positive".into());
        }
        if self.candidate_features == Some(0) {
            return bad("candidate_features must be >= 1".into());
        }
        if !(self.scale_factor.is_finite() && self.scale_factor > 1.0) {
            return bad("scale_factor must be > 1".into());
        }
        match self.learner {
            LearnerKind::Tree { max_depth: 0 } => bad("tree depth must be >= 1".into()),
            LearnerKind::Net {
                hidden, epochs, inputs, ..
            } if hidden == 0 || epochs == 0 || inputs == 0 => {
                bad("net sizes must be >= 1".into())
            }
            LearnerKind::Svm {
                c,
                feature_subset_size,
                ..
            } if !(c > 0.0) || feature_subset_size == 0 => {
                bad("svm C and feature subset size must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

/// One accepted boosting round, or one rejected SVM attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLogRow {
    pub stage: usize,
    pub t: usize,
    pub sigma: Option<f64>,
    pub epsilon: f64,
    pub alpha: f64,
    pub accepted: bool,
    pub resample_seed: Option<u64>,
}

pub const ROUND_LOG_HEADER: &str = "stage,t,sigma,epsilon,alpha,status,resample_seed";

pub fn round_log_csv(rows: &[RoundLogRow]) -> String {
    let mut s = String::from(ROUND_LOG_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.stage,
            r.t,
            r.sigma.map(csv_real).unwrap_or_default(),
            csv_real(r.epsilon),
            csv_real(r.alpha),
            if r.accepted { "accepted" } else { "rejected" },
            r.resample_seed.map(|s| s.to_string()).unwrap_or_default(),
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub model: CascadeModel,
    pub log: Vec<RoundLogRow>,
}

/// Highest threshold keeping at least `d_min` of `scores` at or above it;
/// `+inf` when `d_min` is 0.
fn stage_threshold(scores: &[f64], d_min: f64) -> f64 {
    if d_min <= 0.0 || scores.is_empty() {
        return f64::INFINITY;
    }
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let k = ((d_min * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[k - 1]
}

fn rate_at_or_above(scores: &[f64], theta: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|&&v| v >= theta).count() as f64 / scores.len() as f64
}

/// Candidate LUTs for every window size the sources allow.
struct Candidates {
    ids: Vec<u32>,
    luts: Vec<ScaledFeatureLUT>,
}

impl Candidates {
    fn vector(&self, k: usize, ip: &IntegralPair, x: u32, y: u32) -> Vec<f64> {
        let w = LutWindow::new(&self.luts[k], ip, x, y);
        (0..self.ids.len()).map(|i| w.feature(i)).collect()
    }
}

enum Booster<'a> {
    Ada(AdaBoost<'a>, Box<dyn ComponentLearn + 'a>),
    Svm(BoostSvm<'a>),
}

impl Booster<'_> {
    /// `None` when the learner has nothing more to add.
    fn step(&mut self, stage: usize) -> Result<Option<StepOutcome>, TrainError> {
        match self {
            Booster::Ada(b, l) => b
                .step(l.as_mut())
                .map(Some)
                .map_err(|source| TrainError::Boost { stage, source }),
            Booster::Svm(b) => match b.step() {
                Ok(SvmStep::Accepted(o)) => Ok(Some(o)),
                Ok(SvmStep::Finished) => Ok(None),
                Err(source) => Err(TrainError::BoostSvm { stage, source }),
            },
        }
    }

    fn classifier(&self) -> StrongClassifier {
        match self {
            Booster::Ada(b, _) => b.classifier(0.0),
            Booster::Svm(b) => b.classifier(0.0),
        }
    }

    fn log(&self, stage: usize) -> Vec<RoundLogRow> {
        match self {
            Booster::Ada(b, _) => b
                .rounds()
                .iter()
                .map(|r| RoundLogRow {
                    stage,
                    t: r.t,
                    sigma: None,
                    epsilon: r.epsilon,
                    alpha: r.alpha,
                    accepted: true,
                    resample_seed: None,
                })
                .collect(),
            Booster::Svm(b) => b
                .attempts()
                .iter()
                .map(|a| RoundLogRow {
                    stage,
                    t: a.t,
                    sigma: Some(a.sigma),
                    epsilon: a.epsilon,
                    alpha: a.alpha,
                    accepted: a.accepted,
                    resample_seed: Some(a.resample_seed),
                })
                .collect(),
        }
    }
}

fn make_booster<'a>(
    data: &'a Dataset,
    cfg: &TrainConfig,
    stage: usize,
) -> Result<Booster<'a>, TrainError> {
    let seed = derive_seed(cfg.seed, 1000 + stage as u64);
    Ok(match cfg.learner {
        LearnerKind::Stump => Booster::Ada(AdaBoost::new(data), Box::new(StumpLearner)),
        LearnerKind::Tree { max_depth } => {
            Booster::Ada(AdaBoost::new(data), Box::new(TreeLearner { max_depth }))
        }
        LearnerKind::Net {
            hidden,
            epochs,
            inputs,
        } => Booster::Ada(
            AdaBoost::new(data),
            Box::new(TinyNetLearner {
                hidden,
                epochs,
                seed,
                inputs: Some(inputs),
            }),
        ),
        LearnerKind::Svm {
            c,
            feature_subset_size,
            resample_n,
        } => {
            let svm_cfg = BoostSvmConfig {
                schedule: None,
                c,
                resample_n,
                t_max: cfg.max_rounds,
                feature_subset_size: Some(feature_subset_size),
                seed,
                solver: SolverConfig::default(),
            };
            Booster::Svm(
                BoostSvm::new(data, svm_cfg, stage)
                    .map_err(|source| TrainError::BoostSvm { stage, source })?,
            )
        }
    })
}

/// Trains a cascade from `faces` (each exactly `base x base`) and face-free
/// `nonface_sources`, mining each stage's negatives from windows that pass
/// the stages trained so far.
pub fn train_cascade(
    faces: &[GrayImage],
    nonface_sources: &[GrayImage],
    cfg: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    let base = cfg.base;
    if let Some((i, f)) = faces
        .iter()
        .enumerate()
        .find(|(_, f)| f.width() != base || f.height() != base)
    {
        return Err(TrainError::Data(format!(
            "face {i} is {}x{}, expected {base}x{base}",
            f.width(),
            f.height()
        )));
    }
    if faces.len() < 2 {
        return Err(TrainError::Data(
            "need at least two faces (one for training, one held out)".into(),
        ));
    }
    let sources: Vec<IntegralPair> = nonface_sources
        .iter()
        .filter(|s| s.width() >= base && s.height() >= base)
        .map(IntegralPair::build)
        .collect();
    if sources.is_empty() {
        return Err(TrainError::Data(format!(
            "no non-face source is at least {base}x{base}"
        )));
    }

    let pool = enumerate_pool(base);
    let max_dim = sources.iter().map(|s| s.width().min(s.height())).max().unwrap_or(base);
    let candidates = pick_candidates(&pool, cfg, max_dim)?;

    // split faces
    let mut order: Vec<usize> = (0..faces.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1)));
    let n_val = ((cfg.validation_fraction * faces.len() as f64).round() as usize)
        .clamp(1, faces.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let face_vectors: Vec<Vec<f64>> = faces
        .par_iter()
        .map(|f| candidates.vector(0, &IntegralPair::build(f), 0, 0))
        .collect();
    let train_faces: Vec<&Vec<f64>> = train_idx.iter().map(|&i| &face_vectors[i]).collect();
    let val_faces: Vec<&Vec<f64>> = val_idx.iter().map(|&i| &face_vectors[i]).collect();

    let n_train_neg =
        ((cfg.negative_ratio.min(NEGATIVE_CAP) * train_faces.len() as f64).ceil() as usize).max(1);
    let n_val_neg =
        ((cfg.negative_ratio.min(NEGATIVE_CAP) * val_faces.len() as f64).ceil() as usize).max(1);

    let mut stages: Vec<StrongClassifier> = Vec::new();
    let mut meta: Vec<StageMeta> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut log: Vec<RoundLogRow> = Vec::new();
    let mut cumulative_fpr = 1.0;
    let mut mining_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2));

    for stage in 0..cfg.max_stages {
        let wanted = n_train_neg + n_val_neg;
        let negatives = mine_negatives(
            &sources,
            &candidates,
            &stages,
            wanted,
            wanted.saturating_mul(cfg.mining_draws),
            &mut mining_rng,
        );
        if negatives.len() < wanted {
            let msg = format!(
                "negative bootstrap exhausted at stage {}: mined {} of {} windows",
                stage + 1,
                negatives.len(),
                wanted
            );
            if stages.is_empty() {
                return Err(TrainError::Data(msg));
            }
            warnings.push(msg);
            break;
        }
        let (train_neg, val_neg) = negatives.split_at(n_train_neg);

        let mut values = Vec::with_capacity((train_faces.len() + n_train_neg) * candidates.ids.len());
        let mut labels = Vec::with_capacity(train_faces.len() + n_train_neg);
        for f in &train_faces {
            values.extend_from_slice(f);
            labels.push(1);
        }
        for n in train_neg {
            values.extend_from_slice(n);
            labels.push(-1);
        }
        let data = Dataset::from_flat(candidates.ids.len(), values, labels)
            .map_err(|e| TrainError::Data(e.to_string()))?;

        let mut booster = make_booster(&data, cfg, stage)?;
        let mut chosen: Option<(StrongClassifier, StageMeta)> = None;
        for _ in 0..cfg.max_rounds {
            let Some(outcome) = booster.step(stage)? else {
                break;
            };
            let mut clf = booster.classifier();
            let face_scores: Vec<f64> = val_faces.iter().map(|v| clf.score(v.as_slice())).collect();
            let neg_scores: Vec<f64> = val_neg.iter().map(|v| clf.score(v.as_slice())).collect();
            let theta = stage_threshold(&face_scores, cfg.d_min);
            clf.threshold = theta;
            let stage_meta = StageMeta {
                rounds: clf.rounds.len(),
                negatives: n_train_neg,
                detection_rate: rate_at_or_above(&face_scores, theta),
                false_positive_rate: rate_at_or_above(&neg_scores, theta),
                degenerate: theta == f64::INFINITY,
            };
            let done = stage_meta.false_positive_rate <= cfg.f_max
                || outcome == StepOutcome::Perfect;
            chosen = Some((clf, stage_meta));
            if done {
                break;
            }
        }
        log.extend(booster.log(stage + 1));
        let Some((clf, stage_meta)) = chosen else {
            if stages.is_empty() {
                return Err(TrainError::BoostSvm {
                    stage: stage + 1,
                    source: BoostSvmError::ScheduleExhausted,
                });
            }
            warnings.push(format!("stage {} produced no rounds", stage + 1));
            break;
        };
        cumulative_fpr *= stage_meta.false_positive_rate;
        stages.push(clf);
        meta.push(stage_meta);
        if cumulative_fpr <= cfg.target_fpr {
            break;
        }
    }

    for s in &mut stages {
        s.remap_features(&candidates.ids);
    }
    let model = CascadeModel {
        format_version: FORMAT_VERSION,
        base,
        pool_digest: pool.digest(),
        stages,
        training_meta: TrainingMeta {
            learner: cfg.learner.name().to_string(),
            seed: cfg.seed,
            config: cfg.clone(),
            stages: meta,
            warnings,
        },
    };
    Ok(TrainOutput { model, log })
}

fn pick_candidates(
    pool: &FeaturePool,
    cfg: &TrainConfig,
    max_dim: u32,
) -> Result<Candidates, TrainError> {
    let mut ids: Vec<u32> = match cfg.candidate_features {
        Some(k) if k < pool.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
            rand::seq::index::sample(&mut rng, pool.len(), k)
                .into_iter()
                .map(|i| i as u32)
                .collect()
        }
        _ => (0..pool.len() as u32).collect(),
    };
    ids.sort_unstable();
    // window sizes for mining; index 0 is the base size
    let luts = scan_sizes(cfg.base, max_dim, cfg.scale_factor)
        .iter()
        .map(|&s| build_lut_subset(pool, &ids, s as f64 / cfg.base as f64))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| TrainError::Config(e.to_string()))?;
    Ok(Candidates { ids, luts })
}

/// Random windows from `sources` that every current stage accepts, as
/// candidate-feature vectors.
fn mine_negatives(
    sources: &[IntegralPair],
    candidates: &Candidates,
    stages: &[StrongClassifier],
    wanted: usize,
    max_draws: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(wanted);
    let mut draws = 0;
    while out.len() < wanted && draws < max_draws {
        draws += 1;
        let ip = &sources[rng.random_range(0..sources.len())];
        let fit = candidates
            .luts
            .iter()
            .take_while(|l| l.window <= ip.width() && l.window <= ip.height())
            .count();
        let k = rng.random_range(0..fit);
        let size = candidates.luts[k].window;
        let x = rng.random_range(0..=ip.width() - size);
        let y = rng.random_range(0..=ip.height() - size);
        let window = LutWindow::new(&candidates.luts[k], ip, x, y);
        if run_stages(stages, &window, None).accepted {
            out.push(candidates.vector(k, ip, x, y));
        }
    }
    out
}
