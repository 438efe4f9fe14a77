//! Cascades of boosted strong classifiers and the multi-scale window scanner.
//!
//! Features are rescaled to each window size (one LUT per scale) instead of
//! building an image pyramid.

mod train;

pub use train::{
    round_log_csv, train_cascade, LearnerKind, RoundLogRow, TrainConfig, TrainError, TrainOutput,
    ROUND_LOG_HEADER,
};

use crate::boosting::StrongClassifier;
use crate::dataset::FeatureAccess;
use crate::features::{
    build_lut_subset, enumerate_pool, lighting_divisor, pool_size, FeatureError, FeaturePool,
    ScaledFeatureLUT,
};
use crate::imaging::{GrayImage, IntegralPair, Rect};
use crate::boosting::ComponentClassifier;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CascadeError {
    #[error("model parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("pool digest mismatch: model expects {expected}, base {base} pool has {found}")]
    PoolDigest {
        base: u32,
        expected: String,
        found: String,
    },
    #[error("invalid scan configuration: {0}")]
    Config(String),
    #[error("no LUT for window size {0}")]
    MissingScale(u32),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    #[serde(with = "crate::real")]
    pub scale_factor: f64,
    /// Stride as a fraction of the current window edge, at least 1 px.
    #[serde(with = "crate::real")]
    pub step_fraction: f64,
    /// Smallest window edge to scan; the model's base is always a lower bound.
    pub min_window: u32,
    pub merge_min_neighbors: usize,
    #[serde(with = "crate::real")]
    pub merge_overlap: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            scale_factor: 1.25,
            step_fraction: 0.05,
            min_window: 0,
            merge_min_neighbors: 2,
            merge_overlap: 0.3,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), CascadeError> {
        let bad = |m: &str| Err(CascadeError::Config(m.into()));
        if !(self.scale_factor.is_finite() && self.scale_factor > 1.0) {
            return bad("scale_factor must be > 1");
        }
        if !(self.step_fraction.is_finite() && self.step_fraction > 0.0 && self.step_fraction <= 1.0)
        {
            return bad("step_fraction must be in (0, 1]");
        }
        if self.merge_min_neighbors == 0 {
            return bad("merge_min_neighbors must be >= 1");
        }
        if !(self.merge_overlap > 0.0 && self.merge_overlap <= 1.0) {
            return bad("merge_overlap must be in (0, 1]");
        }
        Ok(())
    }

    pub fn step_for(&self, size: u32) -> u32 {
        ((self.step_fraction * size as f64).round() as u32).max(1)
    }
}

/// Window edges `round(base * factor^k)`, deduplicated, up to `max`.
pub fn scan_sizes(base: u32, max: u32, factor: f64) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::new();
    if base == 0 {
        return out;
    }
    for k in 0.. {
        let s = (base as f64 * factor.powi(k)).round_ties_even();
        if s > max as f64 {
            break;
        }
        let s = s as u32;
        if out.last() != Some(&s) {
            out.push(s);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub rect: Rect,
    #[serde(with = "crate::real")]
    pub scale: f64,
    #[serde(with = "crate::real")]
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub accepted: bool,
    /// Score of the last stage evaluated.
    pub score: f64,
    pub stages_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMeta {
    pub rounds: usize,
    pub negatives: usize,
    /// Held-out face detection rate at the chosen threshold.
    #[serde(with = "crate::real")]
    pub detection_rate: f64,
    /// Held-out negative acceptance rate at the chosen threshold.
    #[serde(with = "crate::real")]
    pub false_positive_rate: f64,
    /// The stage goal was vacuous and the threshold rejects everything.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub learner: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub stages: Vec<StageMeta>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeModel {
    pub format_version: u32,
    pub base: u32,
    pub pool_digest: String,
    pub stages: Vec<StrongClassifier>,
    pub training_meta: TrainingMeta,
}

impl CascadeModel {
    /// Structural checks that need no pool: version, stage count, feature ids.
    pub fn validate(&self) -> Result<(), CascadeError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CascadeError::InvalidModel(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if self.stages.is_empty() {
            return Err(CascadeError::InvalidModel("a cascade needs at least one stage".into()));
        }
        let n = pool_size(self.base);
        for (k, s) in self.stages.iter().enumerate() {
            if s.rounds.is_empty() {
                return Err(CascadeError::InvalidModel(format!("stage {k} has no rounds")));
            }
            if let Some(&f) = s.feature_ids().iter().find(|&&f| f as u64 >= n) {
                return Err(CascadeError::InvalidModel(format!(
                    "stage {k} references feature {f}, pool has {n}"
                )));
            }
            for r in &s.rounds {
                if let ComponentClassifier::Svm(c) = &r.component {
                    if c.model.dim != c.feature_subset.len() {
                        return Err(CascadeError::InvalidModel(format!(
                            "stage {k}: svm dimension {} but {} input features",
                            c.model.dim,
                            c.feature_subset.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CascadeError> {
        let m: CascadeModel = serde_json::from_str(text).map_err(|e| CascadeError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    /// Regenerates the pool for `base` and checks it against the stored digest.
    pub fn verified_pool(&self) -> Result<FeaturePool, CascadeError> {
        let pool = enumerate_pool(self.base);
        let found = pool.digest();
        if found != self.pool_digest {
            return Err(CascadeError::PoolDigest {
                base: self.base,
                expected: self.pool_digest.clone(),
                found,
            });
        }
        Ok(pool)
    }

    pub fn feature_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.stages.iter().flat_map(|s| s.feature_ids()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Lighting-corrected features of one window, addressed by LUT position.
pub(crate) struct LutWindow<'a> {
    pub lut: &'a ScaledFeatureLUT,
    pub ip: &'a IntegralPair,
    pub x: u32,
    pub y: u32,
    pub inv_std: f64,
}

impl<'a> LutWindow<'a> {
    pub fn new(lut: &'a ScaledFeatureLUT, ip: &'a IntegralPair, x: u32, y: u32) -> Self {
        let stats = ip.window_stats_unchecked(Rect::new(x, y, lut.window, lut.window));
        LutWindow {
            lut,
            ip,
            x,
            y,
            inv_std: 1.0 / lighting_divisor(stats.variance),
        }
    }
}

impl FeatureAccess for LutWindow<'_> {
    #[inline]
    fn feature(&self, i: usize) -> f64 {
        self.lut.entry(i).raw_value(self.ip, self.x, self.y) * self.inv_std
    }
}

/// Same as [`LutWindow`] but addressed by pool feature id.
struct IdWindow<'a>(LutWindow<'a>);

impl FeatureAccess for IdWindow<'_> {
    fn feature(&self, id: usize) -> f64 {
        let w = &self.0;
        w.lut
            .lookup(id as u32)
            .expect("LUT covers every feature the model uses")
            .raw_value(w.ip, w.x, w.y)
            * w.inv_std
    }
}

/// Runs `stages` in order, stopping at the first one whose score is below
/// its threshold. `final_threshold` overrides the last stage's threshold.
pub(crate) fn run_stages<F: FeatureAccess + ?Sized>(
    stages: &[StrongClassifier],
    x: &F,
    final_threshold: Option<f64>,
) -> Classification {
    let mut score = 0.0;
    for (k, s) in stages.iter().enumerate() {
        score = s.score(x);
        let theta = match final_threshold {
            Some(t) if k + 1 == stages.len() => t,
            _ => s.threshold,
        };
        if score < theta {
            return Classification {
                accepted: false,
                score,
                stages_run: k + 1,
            };
        }
    }
    Classification {
        accepted: true,
        score,
        stages_run: stages.len(),
    }
}

/// Classifies one window; `lut` must be built for the window's size and
/// contain every feature the model reads.
pub fn cascade_classify(
    model: &CascadeModel,
    ip: &IntegralPair,
    window: Rect,
    lut: &ScaledFeatureLUT,
) -> Result<Classification, CascadeError> {
    if window.w != lut.window || window.h != lut.window {
        return Err(CascadeError::MissingScale(window.w.max(window.h)));
    }
    if !window.fits_in(ip.width(), ip.height()) {
        return Err(FeatureError::WindowOutOfBounds {
            window,
            width: ip.width(),
            height: ip.height(),
        }
        .into());
    }
    if let Some(&id) = model.feature_ids().iter().find(|&&id| lut.lookup(id).is_none()) {
        return Err(FeatureError::UnknownFeature { id }.into());
    }
    let view = IdWindow(LutWindow::new(lut, ip, window.x, window.y));
    Ok(run_stages(&model.stages, &view, None))
}

/// A model compiled for scanning: stages rewritten to address a compact
/// per-scale LUT holding only the features they use.
#[derive(Debug, Clone)]
pub struct Detector {
    base: u32,
    stages: Vec<StrongClassifier>,
    ids: Vec<u32>,
    luts: Vec<ScaledFeatureLUT>,
    cfg: ScanConfig,
}

impl Detector {
    /// Builds LUTs for every scan size up to `max_window`.
    pub fn new(model: &CascadeModel, cfg: &ScanConfig, max_window: u32) -> Result<Self, CascadeError> {
        let pool = model.verified_pool()?;
        Self::with_pool(model, &pool, cfg, max_window)
    }

    /// As [`Detector::new`] with an already-verified pool.
    pub fn with_pool(
        model: &CascadeModel,
        pool: &FeaturePool,
        cfg: &ScanConfig,
        max_window: u32,
    ) -> Result<Self, CascadeError> {
        cfg.validate()?;
        model.validate()?;
        let ids = model.feature_ids();
        let mut position = vec![u32::MAX; pool.len()];
        for (i, &id) in ids.iter().enumerate() {
            position[id as usize] = i as u32;
        }
        let mut stages = model.stages.clone();
        for s in &mut stages {
            s.remap_features(&position);
        }
        let luts = scan_sizes(model.base, max_window, cfg.scale_factor)
            .into_iter()
            .filter(|&s| s >= cfg.min_window)
            .map(|s| build_lut_subset(pool, &ids, s as f64 / model.base as f64))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Detector {
            base: model.base,
            stages,
            ids,
            luts,
            cfg: *cfg,
        })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn window_sizes(&self) -> Vec<u32> {
        self.luts.iter().map(|l| l.window).collect()
    }

    /// Pool ids in LUT order.
    pub fn feature_ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn classify(&self, ip: &IntegralPair, window: Rect) -> Result<Classification, CascadeError> {
        let lut = self
            .luts
            .iter()
            .find(|l| l.window == window.w && window.w == window.h)
            .ok_or(CascadeError::MissingScale(window.w.max(window.h)))?;
        if !window.fits_in(ip.width(), ip.height()) {
            return Err(FeatureError::WindowOutOfBounds {
                window,
                width: ip.width(),
                height: ip.height(),
            }
            .into());
        }
        Ok(run_stages(
            &self.stages,
            &LutWindow::new(lut, ip, window.x, window.y),
            None,
        ))
    }

    /// Every window accepted by the cascade, before merging, sorted by
    /// (scale, y, x). `final_threshold` overrides the last stage's threshold.
    pub fn scan(&self, img: &GrayImage, final_threshold: Option<f64>) -> Vec<Detection> {
        let ip = IntegralPair::build(img);
        let (w, h) = (img.width(), img.height());
        let rows: Vec<(usize, u32)> = self
            .luts
            .iter()
            .enumerate()
            .filter(|(_, l)| l.window <= w && l.window <= h)
            .flat_map(|(k, l)| {
                let step = self.cfg.step_for(l.window);
                (0..=(h - l.window)).step_by(step as usize).map(move |y| (k, y))
            })
            .collect();
        rows.par_iter()
            .flat_map_iter(|&(k, y)| {
                let lut = &self.luts[k];
                let step = self.cfg.step_for(lut.window) as usize;
                let ip = &ip;
                (0..=(w - lut.window)).step_by(step).filter_map(move |x| {
                    let c = run_stages(
                        &self.stages,
                        &LutWindow::new(lut, ip, x, y),
                        final_threshold,
                    );
                    c.accepted.then(|| Detection {
                        rect: Rect::new(x, y, lut.window, lut.window),
                        scale: lut.scale,
                        score: c.score,
                    })
                })
            })
            .collect()
    }

    /// Scan and merge; empty when the image is smaller than the base window.
    pub fn detect(&self, img: &GrayImage) -> Vec<Detection> {
        let hits = self.scan(img, None);
        merge_detections(&hits, self.cfg.merge_overlap, self.cfg.merge_min_neighbors)
    }

    pub fn config(&self) -> &ScanConfig {
        &self.cfg
    }
}

/// Convenience wrapper building a [`Detector`] sized for `img`.
pub fn detect(
    model: &CascadeModel,
    img: &GrayImage,
    cfg: &ScanConfig,
) -> Result<Vec<Detection>, CascadeError> {
    let max = img.width().min(img.height());
    if max < model.base {
        return Ok(Vec::new());
    }
    Ok(Detector::new(model, cfg, max)?.detect(img))
}

fn hit_order(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.scale.total_cmp(&b.scale))
        .then(a.rect.y.cmp(&b.rect.y))
        .then(a.rect.x.cmp(&b.rect.x))
}

/// Leader clustering. Hits are visited by descending score, ties going to
/// the hit overlapping the most others; each joins the first group whose
/// leader it overlaps by at least `overlap` IoU, or starts a new one.
/// Returns groups of indices into `hits`, leader first.
pub fn group_hits(hits: &[Detection], overlap: f64) -> Vec<Vec<usize>> {
    let support: Vec<usize> = hits
        .iter()
        .map(|h| hits.iter().filter(|o| o.rect.iou(&h.rect) >= overlap).count())
        .collect();
    let mut order: Vec<usize> = (0..hits.len()).collect();
    order.sort_by(|&a, &b| {
        hits[b]
            .score
            .total_cmp(&hits[a].score)
            .then(support[b].cmp(&support[a]))
            .then(hit_order(&hits[a], &hits[b]))
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let r = hits[i].rect;
        match groups.iter_mut().find(|g| hits[g[0]].rect.iou(&r) >= overlap) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// A group of raw hits after merging.
#[derive(Debug, Clone, PartialEq)]
pub struct HitGroup {
    /// Indices into the hit list, leader first.
    pub members: Vec<usize>,
    /// Rounded average of the member rectangles.
    pub rect: Rect,
    /// Highest member score.
    pub score: f64,
    /// The `min_neighbors`-th highest member score: the group survives a
    /// final-stage threshold exactly when the threshold is at or below it.
    pub key: f64,
    pub scale: f64,
}

fn average_rect(hits: &[Detection], group: &[usize]) -> Rect {
    let n = group.len() as u64;
    let avg = |f: fn(&Rect) -> u32| -> u32 {
        let s: u64 = group.iter().map(|&i| f(&hits[i].rect) as u64).sum();
        ((s + n / 2) / n) as u32
    };
    Rect::new(avg(|r| r.x), avg(|r| r.y), avg(|r| r.w), avg(|r| r.h))
}

fn centre_inside(inner: &Rect, outer: &Rect) -> bool {
    let (cx2, cy2) = (2 * inner.x as u64 + inner.w as u64, 2 * inner.y as u64 + inner.h as u64);
    cx2 >= 2 * outer.x as u64
        && cx2 < 2 * outer.right() as u64
        && cy2 >= 2 * outer.y as u64
        && cy2 < 2 * outer.bottom() as u64
}

/// Groups hits, keeps groups with at least `min_neighbors` members, then
/// drops any group whose centre falls inside a stronger kept group.
/// Groups are ranked by key, then size, then score; the result keeps that order.
pub fn merge_hits(hits: &[Detection], overlap: f64, min_neighbors: usize) -> Vec<HitGroup> {
    let k = min_neighbors.max(1);
    let mut groups: Vec<HitGroup> = group_hits(hits, overlap)
        .into_iter()
        .filter(|g| g.len() >= k)
        .map(|members| {
            let mut scores: Vec<f64> = members.iter().map(|&i| hits[i].score).collect();
            scores.sort_by(|a, b| b.total_cmp(a));
            HitGroup {
                rect: average_rect(hits, &members),
                score: scores[0],
                key: scores[k - 1],
                scale: hits[members[0]].scale,
                members,
            }
        })
        .collect();
    groups.sort_by(|a, b| {
        b.key
            .total_cmp(&a.key)
            .then(b.members.len().cmp(&a.members.len()))
            .then(b.score.total_cmp(&a.score))
            .then(a.rect.y.cmp(&b.rect.y))
            .then(a.rect.x.cmp(&b.rect.x))
            .then(a.rect.w.cmp(&b.rect.w))
    });
    let mut kept: Vec<HitGroup> = Vec::new();
    for g in groups {
        if !kept.iter().any(|k| centre_inside(&g.rect, &k.rect)) {
            kept.push(g);
        }
    }
    kept
}

/// Merged detections (average rect, max score), sorted by score descending.
pub fn merge_detections(hits: &[Detection], overlap: f64, min_neighbors: usize) -> Vec<Detection> {
    let mut out: Vec<Detection> = merge_hits(hits, overlap, min_neighbors)
        .into_iter()
        .map(|g| Detection {
            rect: g.rect,
            scale: g.scale,
            score: g.score,
        })
        .collect();
    out.sort_by(hit_order);
    out
}
