//! Seeded synthetic data: 2-D point clouds and a toy "face" corpus where a
//! face is a bright plus shape over a 3x3 cell grid on a noisy background.

use super::LabeledImage;
use crate::dataset::Dataset;
use crate::imaging::{GrayImage, Rect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    /// Two unit-variance Gaussians; the positive class is the minority,
    /// `ceil(n / (ratio + 1))` points.
    TwoGaussians { n: usize, ratio: f64 },
    TwoMoons { n: usize, noise: f64 },
    /// `images` scenes with `targets` planted faces each, for window size `base`.
    CrossCorpus {
        images: usize,
        targets: usize,
        base: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Synthetic {
    Data(Dataset),
    Corpus(Vec<LabeledImage>),
}

pub fn gen_synthetic(kind: SyntheticKind, seed: u64) -> Synthetic {
    match kind {
        SyntheticKind::TwoGaussians { n, ratio } => Synthetic::Data(two_gaussians(n, ratio, seed)),
        SyntheticKind::TwoMoons { n, noise } => Synthetic::Data(two_moons(n, noise, seed)),
        SyntheticKind::CrossCorpus {
            images,
            targets,
            base,
        } => Synthetic::Corpus(cross_corpus(images, targets, base, seed)),
    }
}

/// Size of the minority class for `n` points at imbalance `ratio`.
pub fn minority_count(n: usize, ratio: f64) -> usize {
    ((n as f64) / (ratio + 1.0)).ceil() as usize
}

pub fn two_gaussians(n: usize, ratio: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let n_pos = minority_count(n, ratio).min(n);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (centre, label) = if i < n_pos { (1.5, 1) } else { (0.0, -1) };
        points.push(vec![
            centre + unit.sample(&mut rng),
            centre + unit.sample(&mut rng),
        ]);
        labels.push(label);
    }
    Dataset::new(points, labels).expect("generated points are finite")
}

pub fn two_moons(n: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise.max(0.0)).expect("non-negative noise");
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.random_range(0.0..PI);
        let (x, y, label) = if i % 2 == 0 {
            (t.cos(), t.sin(), -1)
        } else {
            (1.0 - t.cos(), 0.5 - t.sin(), 1)
        };
        points.push(vec![x + jitter.sample(&mut rng), y + jitter.sample(&mut rng)]);
        labels.push(label);
    }
    Dataset::new(points, labels).expect("generated points are finite")
}

fn noise_image(width: u32, height: u32, rng: &mut ChaCha8Rng) -> GrayImage {
    let data = (0..width as usize * height as usize)
        .map(|_| rng.random_range(20..=110u8))
        .collect();
    GrayImage::new(width, height, data).expect("sized buffer")
}

/// Paints a plus of edge `size` (f64, so sub-pixel sizes work) with its
/// top-left corner at `(x0, y0)`; pixels outside the image are skipped.
fn paint_plus(img: &mut GrayImage, x0: f64, y0: f64, size: f64, rng: &mut ChaCha8Rng) {
    paint_cells(img, x0, y0, size, [false, true, false, true, true, true, false, true, false], rng);
}

/// Paints the bright cells (row-major over the 3x3 grid) of a glyph.
fn paint_cells(
    img: &mut GrayImage,
    x0: f64,
    y0: f64,
    size: f64,
    cells: [bool; 9],
    rng: &mut ChaCha8Rng,
) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let lo_x = x0.floor().max(0.0) as i64;
    let lo_y = y0.floor().max(0.0) as i64;
    let hi_x = ((x0 + size).ceil() as i64).min(w);
    let hi_y = ((y0 + size).ceil() as i64).min(h);
    for py in lo_y..hi_y {
        for px in lo_x..hi_x {
            let u = (px as f64 + 0.5 - x0) / size;
            let v = (py as f64 + 0.5 - y0) / size;
            if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) {
                continue;
            }
            let (cu, cv) = ((u * 3.0) as u32, (v * 3.0) as u32);
            if cells[(cv * 3 + cu) as usize] {
                img.set(px as u32, py as u32, rng.random_range(185..=245u8));
            }
        }
    }
}

fn paint_bar(img: &mut GrayImage, avoid: &[Rect], rng: &mut ChaCha8Rng) {
    let (w, h) = (img.width(), img.height());
    let thick = rng.random_range(3..=8u32);
    let long = rng.random_range(12..=48u32);
    let (bw, bh) = if rng.random_bool(0.5) {
        (long.min(w), thick.min(h))
    } else {
        (thick.min(w), long.min(h))
    };
    let x = rng.random_range(0..=w - bw);
    let y = rng.random_range(0..=h - bh);
    let bar = Rect::new(x, y, bw, bh);
    if avoid.iter().any(|r| r.intersection_area(&bar) > 0) {
        return;
    }
    let level = rng.random_range(150..=250u8);
    for py in y..y + bh {
        for px in x..x + bw {
            img.set(px, py, level);
        }
    }
}

/// A plus with one arm missing (a T), or with one corner cell lit.
fn paint_near_plus(img: &mut GrayImage, avoid: &[Rect], rng: &mut ChaCha8Rng) {
    let short = img.width().min(img.height());
    let size = rng.random_range(short / 4..=short / 2).max(3);
    let x = rng.random_range(0..=img.width() - size);
    let y = rng.random_range(0..=img.height() - size);
    let r = Rect::new(x, y, size, size);
    if avoid.iter().any(|a| a.intersection_area(&r) > 0) {
        return;
    }
    let mut cells = [false, true, false, true, true, true, false, true, false];
    if rng.random_bool(0.5) {
        cells[[1, 3, 5, 7][rng.random_range(0..4)]] = false;
    } else {
        cells[[0, 2, 6, 8][rng.random_range(0..4)]] = true;
    }
    paint_cells(img, x as f64, y as f64, size as f64, cells, rng);
}

fn paint_distractors(img: &mut GrayImage, avoid: &[Rect], rng: &mut ChaCha8Rng) {
    let count = (img.width() * img.height()) / 2000;
    for _ in 0..count {
        paint_bar(img, avoid, rng);
    }
    for _ in 0..count / 3 {
        paint_near_plus(img, avoid, rng);
    }
}

/// `n` face-free scenes of noise, bars and near-miss glyphs.
pub fn backgrounds(n: usize, width: u32, height: u32, seed: u64) -> Vec<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut img = noise_image(width, height, &mut rng);
            paint_distractors(&mut img, &[], &mut rng);
            img
        })
        .collect()
}

/// `n` face windows of edge `base`; the plus is jittered in size and
/// position by roughly the slack of a scan at scale step 1.25.
pub fn cross_faces(n: usize, base: u32, seed: u64) -> Vec<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = base as f64;
    (0..n)
        .map(|_| {
            let mut img = noise_image(base, base, &mut rng);
            let size = b * rng.random_range(0.9..1.1);
            let shift = 0.06 * b;
            let x0 = (b - size) / 2.0 + rng.random_range(-shift..=shift);
            let y0 = (b - size) / 2.0 + rng.random_range(-shift..=shift);
            paint_plus(&mut img, x0, y0, size, &mut rng);
            img
        })
        .collect()
}

/// Scenes of `5 base x 3.75 base` pixels, each with `targets` non-overlapping
/// planted faces of edge in `[base, 2 base]`, at least `base / 4` apart,
/// plus distractor bars and near-miss glyphs.
pub fn cross_corpus(images: usize, targets: usize, base: u32, seed: u64) -> Vec<LabeledImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (width, height) = (5 * base, (15 * base) / 4);
    // keeps windows straddling two targets rare
    let margin = (base / 4).max(2);
    (0..images)
        .map(|k| {
            let mut img = noise_image(width, height, &mut rng);
            let mut truth: Vec<Rect> = Vec::with_capacity(targets);
            let mut tries = 0;
            while truth.len() < targets {
                tries += 1;
                // shrink the size range if the scene is too crowded
                let max = if tries > 2000 { base } else { (2 * base).min(height) };
                let s = rng.random_range(base..=max);
                let r = Rect::new(
                    rng.random_range(0..=width - s),
                    rng.random_range(0..=height - s),
                    s,
                    s,
                );
                let m = margin;
                let gap = Rect::new(r.x.saturating_sub(m), r.y.saturating_sub(m), s + 2 * m, s + 2 * m);
                if truth.iter().all(|t| t.intersection_area(&gap) == 0) {
                    truth.push(r);
                } else if tries > 10_000 {
                    break;
                }
            }
            for r in &truth {
                paint_plus(&mut img, r.x as f64, r.y as f64, r.w as f64, &mut rng);
            }
            paint_distractors(&mut img, &truth, &mut rng);
            LabeledImage {
                name: format!("img_{k:03}.pgm"),
                image: img,
                truth,
            }
        })
        .collect()
}
