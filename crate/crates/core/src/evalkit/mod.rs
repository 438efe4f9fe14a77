//! Evaluation tooling: synthetic data, annotated corpora, ROC curves over
//! the final stage threshold, and miss-rate tables at fixed false-detection
//! budgets.

mod svg;
mod synth;

pub use svg::roc_svg;
pub use synth::{
    backgrounds, cross_corpus, cross_faces, gen_synthetic, minority_count, two_gaussians,
    two_moons, Synthetic, SyntheticKind,
};

use crate::cascade::{merge_hits, CascadeError, CascadeModel, Detector, ScanConfig};
use crate::imaging::{load_pgm, write_pgm, GrayImage, PnmError, Rect};
use crate::real::csv_real;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("annotation line {line}: {reason}")]
    Annotation { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image { path: String, source: PnmError },
    #[error("{path}: face {rect:?} lies outside the {width}x{height} image")]
    RectOutside {
        path: String,
        rect: Rect,
        width: u32,
        height: u32,
    },
    #[error("empty threshold sweep")]
    EmptySweep,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Cascade(#[from] CascadeError),
}

/// An image with its ground-truth face rectangles.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub name: String,
    pub image: GrayImage,
    pub truth: Vec<Rect>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub path: String,
    pub truth: Vec<Rect>,
}

/// Annotation list: one line per face, `relative/path.pgm x y w h`; a line
/// holding only a path declares a face-free image.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotatedCorpus {
    pub entries: Vec<CorpusEntry>,
}

pub const ANNOTATION_FILE: &str = "annotations.txt";

impl AnnotatedCorpus {
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut entries: Vec<CorpusEntry> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let err = |reason: &str| EvalError::Annotation {
                line: i + 1,
                reason: reason.into(),
            };
            let rect = match parts.len() {
                1 => None,
                5 => {
                    let v: Vec<u32> = parts[1..]
                        .iter()
                        .map(|p| p.parse::<u32>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err("coordinates must be non-negative integers"))?;
                    if v[2] == 0 || v[3] == 0 {
                        return Err(err("face rectangle has zero size"));
                    }
                    Some(Rect::new(v[0], v[1], v[2], v[3]))
                }
                _ => return Err(err("expected `path` or `path x y w h`")),
            };
            let path = parts[0].to_string();
            let idx = match entries.iter().position(|e| e.path == path) {
                Some(k) => k,
                None => {
                    entries.push(CorpusEntry {
                        path,
                        truth: Vec::new(),
                    });
                    entries.len() - 1
                }
            };
            entries[idx].truth.extend(rect);
        }
        Ok(AnnotatedCorpus { entries })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            if e.truth.is_empty() {
                let _ = writeln!(s, "{}", e.path);
            }
            for r in &e.truth {
                let _ = writeln!(s, "{} {} {} {} {}", e.path, r.x, r.y, r.w, r.h);
            }
        }
        s
    }

    /// Reads every image relative to `root` and checks the rectangles.
    pub fn load(&self, root: &Path) -> Result<Vec<LabeledImage>, EvalError> {
        self.entries
            .iter()
            .map(|e| {
                let path = root.join(&e.path);
                let shown = path.display().to_string();
                let bytes = std::fs::read(&path).map_err(|source| EvalError::Io {
                    path: shown.clone(),
                    source,
                })?;
                let image = load_pgm(&bytes).map_err(|source| EvalError::Image {
                    path: shown.clone(),
                    source,
                })?;
                if let Some(r) = e.truth.iter().find(|r| !r.fits_in(image.width(), image.height())) {
                    return Err(EvalError::RectOutside {
                        path: shown,
                        rect: *r,
                        width: image.width(),
                        height: image.height(),
                    });
                }
                Ok(LabeledImage {
                    name: e.path.clone(),
                    image,
                    truth: e.truth.clone(),
                })
            })
            .collect()
    }

    pub fn from_images(images: &[LabeledImage]) -> Self {
        AnnotatedCorpus {
            entries: images
                .iter()
                .map(|l| CorpusEntry {
                    path: l.name.clone(),
                    truth: l.truth.clone(),
                })
                .collect(),
        }
    }
}

/// Writes each image as PGM under `dir` plus the annotation file.
pub fn write_corpus(dir: &Path, images: &[LabeledImage]) -> Result<(), EvalError> {
    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| EvalError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for l in images {
        let p = dir.join(&l.name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(io(parent))?;
        }
        std::fs::write(&p, write_pgm(&l.image)).map_err(io(&p))?;
    }
    let ann = dir.join(ANNOTATION_FILE);
    std::fs::write(&ann, AnnotatedCorpus::from_images(images).to_text()).map_err(io(&ann))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub false_detections: usize,
    pub detection_rate: f64,
    /// Final-stage threshold producing this point.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// `+inf`, every distinct cached score, and `-inf`.
    Exact,
    Values(Vec<f64>),
}

/// A merged hit group with the score at which it first appears.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredGroup {
    pub rect: Rect,
    /// The `min_neighbors`-th highest member score: the group has enough
    /// members exactly when the final threshold is at or below this.
    pub key: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScan {
    pub groups: Vec<ScoredGroup>,
    pub truth: Vec<Rect>,
}

/// Final-stage scores cached for a whole corpus, so that any final
/// threshold can be evaluated without rescanning.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScan {
    pub images: Vec<ImageScan>,
    pub match_iou: f64,
}

/// Scans with the final stage's threshold lifted, merges hits once, and
/// records the score at which each merged group appears. Groups keep the
/// merge ranking, so a group never outranks one that suppressed it.
pub fn scan_corpus(detector: &Detector, images: &[LabeledImage], match_iou: f64) -> CorpusScan {
    let cfg = *detector.config();
    let scans = images
        .par_iter()
        .map(|l| {
            let hits = detector.scan(&l.image, Some(f64::NEG_INFINITY));
            let groups = merge_hits(&hits, cfg.merge_overlap, cfg.merge_min_neighbors)
                .into_iter()
                .map(|g| ScoredGroup {
                    rect: g.rect,
                    key: g.key,
                })
                .collect();
            ImageScan {
                groups,
                truth: l.truth.clone(),
            }
        })
        .collect();
    CorpusScan {
        images: scans,
        match_iou,
    }
}

/// Greedy matching: groups in descending key order each claim the
/// unmatched truth rect with the highest IoU at or above `match_iou`.
/// Returns the number of matched groups.
pub fn match_greedy(groups: &[Rect], truth: &[Rect], match_iou: f64) -> usize {
    let mut taken = vec![false; truth.len()];
    let mut matched = 0;
    for g in groups {
        let best = truth
            .iter()
            .enumerate()
            .filter(|(j, _)| !taken[*j])
            .map(|(j, t)| (j, g.iou(t)))
            .filter(|(_, v)| *v >= match_iou)
            .fold(None::<(usize, f64)>, |acc, c| match acc {
                Some(a) if a.1 >= c.1 => Some(a),
                _ => Some(c),
            });
        if let Some((j, _)) = best {
            taken[j] = true;
            matched += 1;
        }
    }
    matched
}

impl CorpusScan {
    pub fn total_truth(&self) -> usize {
        self.images.iter().map(|i| i.truth.len()).sum()
    }

    /// `(false_detections, matched)` at final threshold `theta`.
    pub fn count_at(&self, theta: f64) -> (usize, usize) {
        let mut fd = 0;
        let mut hit = 0;
        for img in &self.images {
            let kept: Vec<Rect> = img
                .groups
                .iter()
                .take_while(|g| g.key >= theta)
                .map(|g| g.rect)
                .collect();
            let m = match_greedy(&kept, &img.truth, self.match_iou);
            hit += m;
            fd += kept.len() - m;
        }
        (fd, hit)
    }

    pub fn point_at(&self, theta: f64) -> RocPoint {
        let (fd, hit) = self.count_at(theta);
        let total = self.total_truth();
        RocPoint {
            false_detections: fd,
            detection_rate: if total == 0 { 0.0 } else { hit as f64 / total as f64 },
            threshold: theta,
        }
    }

    /// ROC points sorted by threshold descending.
    pub fn roc(&self, sweep: &Sweep) -> Result<Vec<RocPoint>, EvalError> {
        let mut thetas: Vec<f64> = match sweep {
            Sweep::Values(v) if v.is_empty() => return Err(EvalError::EmptySweep),
            Sweep::Values(v) => v.clone(),
            Sweep::Exact => {
                let mut t = vec![f64::INFINITY, f64::NEG_INFINITY];
                t.extend(self.images.iter().flat_map(|i| i.groups.iter().map(|g| g.key)));
                t
            }
        };
        thetas.sort_by(|a, b| b.total_cmp(a));
        thetas.dedup();
        Ok(thetas.iter().map(|&t| self.point_at(t)).collect())
    }
}

/// ROC of `model` over `images`, sweeping only the final stage threshold.
pub fn roc_curve(
    model: &CascadeModel,
    images: &[LabeledImage],
    cfg: &ScanConfig,
    sweep: &Sweep,
    match_iou: f64,
) -> Result<Vec<RocPoint>, EvalError> {
    if images.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    if matches!(sweep, Sweep::Values(v) if v.is_empty()) {
        return Err(EvalError::EmptySweep);
    }
    let max = images
        .iter()
        .map(|l| l.image.width().min(l.image.height()))
        .max()
        .unwrap_or(0);
    let detector = Detector::new(model, cfg, max)?;
    scan_corpus(&detector, images, match_iou).roc(sweep)
}

pub const ROC_CSV_HEADER: &str = "threshold,false_detections,detection_rate";

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut s = String::from(ROC_CSV_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{}",
            csv_real(p.threshold),
            p.false_detections,
            csv_real(p.detection_rate)
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub name: String,
    /// Miss rate in percent, `None` when no ROC point fits the budget.
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub fd_targets: Vec<usize>,
    pub rows: Vec<ErrorRow>,
}

/// Picks, per target, the point with the most false detections not above
/// the target (ties to the higher rate) and reports `(1 - rate) * 100`.
pub fn error_table_from_rocs(curves: &[(String, Vec<RocPoint>)], fd_targets: &[usize]) -> ErrorTable {
    let rows = curves
        .iter()
        .map(|(name, pts)| ErrorRow {
            name: name.clone(),
            cells: fd_targets
                .iter()
                .map(|&target| {
                    pts.iter()
                        .filter(|p| p.false_detections <= target)
                        .max_by(|a, b| {
                            a.false_detections
                                .cmp(&b.false_detections)
                                .then(a.detection_rate.total_cmp(&b.detection_rate))
                        })
                        .map(|p| (1.0 - p.detection_rate) * 100.0)
                })
                .collect(),
        })
        .collect();
    ErrorTable {
        fd_targets: fd_targets.to_vec(),
        rows,
    }
}

pub fn error_table(
    models: &[(String, CascadeModel)],
    images: &[LabeledImage],
    cfg: &ScanConfig,
    fd_targets: &[usize],
    match_iou: f64,
) -> Result<ErrorTable, EvalError> {
    let curves = models
        .iter()
        .map(|(name, m)| Ok((name.clone(), roc_curve(m, images, cfg, &Sweep::Exact, match_iou)?)))
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(error_table_from_rocs(&curves, fd_targets))
}

fn cell_text(c: Option<f64>) -> String {
    match c {
        Some(v) => format!("{v:.2}"),
        None => "unreachable".into(),
    }
}

impl ErrorTable {
    pub fn to_text(&self) -> String {
        let mut header = vec!["model".to_string()];
        header.extend(self.fd_targets.iter().map(|t| format!("fd={t}")));
        let mut rows = vec![header];
        for r in &self.rows {
            let mut row = vec![r.name.clone()];
            row.extend(r.cells.iter().map(|&c| cell_text(c)));
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    if j == 0 {
                        format!("{c:<w$}", w = widths[j])
                    } else {
                        format!("{c:>w$}", w = widths[j])
                    }
                })
                .collect();
            let _ = writeln!(s, "{}", line.join("  "));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("model");
        for t in &self.fd_targets {
            let _ = write!(s, ",fd_{t}");
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.name);
            for &c in &r.cells {
                let _ = write!(s, ",{}", cell_text(c));
            }
            s.push('\n');
        }
        s
    }
}
