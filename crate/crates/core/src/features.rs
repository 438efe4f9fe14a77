//! The exhaustive Haar feature pool and its per-scale lookup tables.
//!
//! Sub-rectangle layout per kind (`G` = grey, counted positively; `W` = white,
//! subtracted):
//!
//! ```text
//! TwoRectHorizontal   TwoRectVertical   ThreeRect       FourRect
//!  +---+---+           +-----+          +--+--+--+      +---+---+
//!  | G | W |           |  G  |          |G |W |G |      | G | W |
//!  +---+---+           +-----+          +--+--+--+      +---+---+
//!                      |  W  |                          | W | G |
//!                      +-----+                          +---+---+
//! ```
//!
//! A feature's value is the mean intensity of its grey part minus the mean
//! intensity of its white part. Each sub-rectangle is normalised by its own
//! (rescaled) area and sub-rectangles of one colour are averaged, so the
//! value is unchanged by adding a constant to every pixel and stays on the
//! same scale whatever the window size. The result is finally divided by the
//! window's standard deviation to correct for lighting.

use crate::imaging::{IntegralPair, Rect};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("feature id {id} not present in the lookup table")]
    UnknownFeature { id: u32 },
    #[error("window {window:?} does not match the {expected}px lookup table")]
    ScaleMismatch { window: Rect, expected: u32 },
    #[error("window {window:?} is outside the {width}x{height} image")]
    WindowOutOfBounds { window: Rect, width: u32, height: u32 },
    #[error("scale {0} is not a finite value >= 1")]
    BadScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HaarKind {
    TwoRectHorizontal,
    TwoRectVertical,
    ThreeRect,
    FourRect,
}

impl HaarKind {
    pub const ALL: [HaarKind; 4] = [
        HaarKind::TwoRectHorizontal,
        HaarKind::TwoRectVertical,
        HaarKind::ThreeRect,
        HaarKind::FourRect,
    ];

    /// Width and height granularity of the bounding box.
    pub fn unit(self) -> (u32, u32) {
        match self {
            HaarKind::TwoRectHorizontal => (2, 1),
            HaarKind::TwoRectVertical => (1, 2),
            HaarKind::ThreeRect => (3, 1),
            HaarKind::FourRect => (2, 2),
        }
    }

    fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colour {
    Grey,
    White,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HaarFeature {
    pub kind: HaarKind,
    pub anchor: Rect,
}

impl HaarFeature {
    /// `None` when the anchor violates the kind's divisibility rule.
    pub fn new(kind: HaarKind, anchor: Rect) -> Option<Self> {
        let (uw, uh) = kind.unit();
        (anchor.w >= uw && anchor.h >= uh && anchor.w % uw == 0 && anchor.h % uh == 0)
            .then_some(HaarFeature { kind, anchor })
    }

    /// Sub-rectangles as `[x0, x1) x [y0, y1)` corner pairs in window coordinates.
    fn corners(&self) -> Vec<([u32; 4], Colour)> {
        let Rect { x, y, w, h } = self.anchor;
        let (xm, ym) = (x + w / 2, y + h / 2);
        let (x3a, x3b) = (x + w / 3, x + 2 * w / 3);
        let (xe, ye) = (x + w, y + h);
        use Colour::*;
        match self.kind {
            HaarKind::TwoRectHorizontal => vec![([x, xm, y, ye], Grey), ([xm, xe, y, ye], White)],
            HaarKind::TwoRectVertical => vec![([x, xe, y, ym], Grey), ([x, xe, ym, ye], White)],
            HaarKind::ThreeRect => vec![
                ([x, x3a, y, ye], Grey),
                ([x3a, x3b, y, ye], White),
                ([x3b, xe, y, ye], Grey),
            ],
            HaarKind::FourRect => vec![
                ([x, xm, y, ym], Grey),
                ([xm, xe, y, ym], White),
                ([x, xm, ym, ye], White),
                ([xm, xe, ym, ye], Grey),
            ],
        }
    }

    /// Sub-rectangles at base scale with their colour.
    pub fn sub_rects(&self) -> Vec<(Rect, Colour)> {
        self.corners()
            .into_iter()
            .map(|([x0, x1, y0, y1], c)| (Rect::new(x0, y0, x1 - x0, y1 - y0), c))
            .collect()
    }
}

/// Every legal feature for a square base window, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturePool {
    pub base: u32,
    pub features: Vec<HaarFeature>,
}

/// Enumerates kind-major, then `y`, `x`, `h`, `w` ascending.
pub fn enumerate_pool(base: u32) -> FeaturePool {
    let mut features = Vec::with_capacity(pool_size(base) as usize);
    for kind in HaarKind::ALL {
        let (uw, uh) = kind.unit();
        for y in 0..base {
            for x in 0..base {
                for h in (uh..=base - y).step_by(uh as usize) {
                    for w in (uw..=base - x).step_by(uw as usize) {
                        features.push(HaarFeature {
                            kind,
                            anchor: Rect::new(x, y, w, h),
                        });
                    }
                }
            }
        }
    }
    FeaturePool { base, features }
}

/// Number of features [`enumerate_pool`] yields, without enumerating.
pub fn pool_size(base: u32) -> u64 {
    let placements = |unit: u32| -> u64 {
        (1..=base / unit)
            .map(|k| (base - k * unit + 1) as u64)
            .sum()
    };
    HaarKind::ALL
        .iter()
        .map(|k| {
            let (uw, uh) = k.unit();
            placements(uw) * placements(uh)
        })
        .sum()
}

impl FeaturePool {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// SHA-256 over a canonical byte encoding of the pool, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"haar-pool-v1");
        hasher.update(self.base.to_le_bytes());
        for f in &self.features {
            let r = f.anchor;
            hasher.update([f.kind.code()]);
            for v in [r.x, r.y, r.w, r.h] {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Round half to even, then clamp into `[0, limit]`.
fn scale_coord(v: u32, scale: f64, limit: u32) -> u32 {
    let s = (v as f64 * scale).round_ties_even();
    s.clamp(0.0, limit as f64) as u32
}

/// One rescaled sub-rectangle with its precomputed weight `±1/(n_colour * area)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledRect {
    pub rect: Rect,
    pub area: u32,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFeature {
    pub rects: Vec<ScaledRect>,
    /// Some sub-rectangle collapsed to zero area at this scale and evaluates as 0.
    pub degraded: bool,
}

impl ScaledFeature {
    fn from_feature(f: &HaarFeature, scale: f64, window: u32) -> Self {
        let corners = f.corners();
        let n_grey = corners.iter().filter(|(_, c)| *c == Colour::Grey).count() as f64;
        let n_white = corners.len() as f64 - n_grey;
        let mut degraded = false;
        let rects = corners
            .iter()
            .map(|([x0, x1, y0, y1], colour)| {
                let (sx0, sx1) = (scale_coord(*x0, scale, window), scale_coord(*x1, scale, window));
                let (sy0, sy1) = (scale_coord(*y0, scale, window), scale_coord(*y1, scale, window));
                let rect = Rect::new(sx0, sy0, sx1 - sx0, sy1 - sy0);
                let area = rect.w * rect.h;
                let sign = match colour {
                    Colour::Grey => 1.0 / n_grey,
                    Colour::White => -1.0 / n_white,
                };
                let coeff = if area == 0 {
                    degraded = true;
                    0.0
                } else {
                    sign / area as f64
                };
                ScaledRect { rect, area, coeff }
            })
            .collect();
        ScaledFeature { rects, degraded }
    }

    /// Raw (not lighting-corrected) value with the window's top-left at `(ox, oy)`.
    /// The caller guarantees the window fits in the image.
    #[inline]
    pub(crate) fn raw_value(&self, ip: &IntegralPair, ox: u32, oy: u32) -> f64 {
        self.rects
            .iter()
            .filter(|r| r.area > 0)
            .map(|r| {
                let abs = Rect::new(ox + r.rect.x, oy + r.rect.y, r.rect.w, r.rect.h);
                r.coeff * ip.rect_sum_unchecked(abs) as f64
            })
            .sum()
    }
}

/// Rescaled coordinates for a set of pool features at one detection scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFeatureLUT {
    pub base: u32,
    pub scale: f64,
    /// Edge of the scaled window in pixels, `round(base * scale)`.
    pub window: u32,
    ids: Vec<u32>,
    entries: Vec<ScaledFeature>,
}

impl ScaledFeatureLUT {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Entry at position `i` (the order of the ids passed at construction).
    pub fn entry(&self, i: usize) -> &ScaledFeature {
        &self.entries[i]
    }

    pub fn lookup(&self, id: u32) -> Option<&ScaledFeature> {
        self.ids
            .binary_search(&id)
            .ok()
            .map(|i| &self.entries[i])
            .or_else(|| self.ids.iter().position(|&x| x == id).map(|i| &self.entries[i]))
    }
}

/// LUT covering the whole pool; `scale` must be finite and >= 1.
pub fn build_lut(pool: &FeaturePool, scale: f64) -> Result<ScaledFeatureLUT, FeatureError> {
    let ids: Vec<u32> = (0..pool.len() as u32).collect();
    build_lut_subset(pool, &ids, scale)
}

/// LUT restricted to `ids`; entry `i` corresponds to `ids[i]`.
pub fn build_lut_subset(
    pool: &FeaturePool,
    ids: &[u32],
    scale: f64,
) -> Result<ScaledFeatureLUT, FeatureError> {
    if !(scale.is_finite() && scale >= 1.0) {
        return Err(FeatureError::BadScale(scale));
    }
    let window = (pool.base as f64 * scale).round_ties_even() as u32;
    let entries = ids
        .iter()
        .map(|&id| {
            pool.features
                .get(id as usize)
                .map(|f| ScaledFeature::from_feature(f, scale, window))
                .ok_or(FeatureError::UnknownFeature { id })
        })
        .collect::<Result<_, _>>()?;
    Ok(ScaledFeatureLUT {
        base: pool.base,
        scale,
        window,
        ids: ids.to_vec(),
        entries,
    })
}

/// Divisor used for lighting correction: the window's standard deviation,
/// or 1 for a constant window.
pub fn lighting_divisor(variance: f64) -> f64 {
    if variance > 0.0 {
        variance.sqrt()
    } else {
        1.0
    }
}

/// Lighting-corrected value of pool feature `id` inside `window`.
pub fn eval_feature(
    lut: &ScaledFeatureLUT,
    id: u32,
    ip: &IntegralPair,
    window: Rect,
    window_std: f64,
) -> Result<f64, FeatureError> {
    if window.w != lut.window || window.h != lut.window {
        return Err(FeatureError::ScaleMismatch {
            window,
            expected: lut.window,
        });
    }
    if !window.fits_in(ip.width(), ip.height()) {
        return Err(FeatureError::WindowOutOfBounds {
            window,
            width: ip.width(),
            height: ip.height(),
        });
    }
    let f = lut.lookup(id).ok_or(FeatureError::UnknownFeature { id })?;
    let std = if window_std > 0.0 { window_std } else { 1.0 };
    Ok(f.raw_value(ip, window.x, window.y) / std)
}
