//! Grayscale images, summed-area tables and per-window statistics.
//!
//! Every feature in the detector is a combination of rectangle sums, so the
//! integral tables here are the one place pixels are touched after loading.

mod pnm;

pub use pnm::{load_pgm, write_pgm, write_ppm, PnmError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImagingError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} values but {width}x{height} needs {expected}")]
    BufferLength {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
    #[error("rect {rect:?} lies outside a {width}x{height} image")]
    OutOfBounds { rect: Rect, width: u32, height: u32 },
}

/// Axis-aligned rectangle in pixel coordinates, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    /// True when the rect is non-empty and fits inside a `width` x `height` image.
    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.x as u64 + self.w as u64 <= width as u64
            && self.y as u64 + self.h as u64 <= height as u64
    }

    pub fn intersection_area(&self, other: &Rect) -> u64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) as u64 * (y1 - y0) as u64
        }
    }

    /// Intersection over union; 0 when both rects are empty.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// 8-bit grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage { width, height });
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(ImagingError::BufferLength {
                width,
                height,
                expected,
                actual: data.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    /// Image filled with a single intensity.
    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> u8,
    ) -> Result<Self, ImagingError> {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = value;
    }

    /// Copy of the pixels inside `rect`.
    pub fn crop(&self, rect: Rect) -> Result<GrayImage, ImagingError> {
        if !rect.fits_in(self.width, self.height) {
            return Err(ImagingError::OutOfBounds {
                rect,
                width: self.width,
                height: self.height,
            });
        }
        GrayImage::from_fn(rect.w, rect.h, |x, y| self.get(rect.x + x, rect.y + y))
    }

    /// Nearest-neighbour resampling to `width` x `height`.
    pub fn resize_nearest(&self, width: u32, height: u32) -> Result<GrayImage, ImagingError> {
        let (sw, sh) = (self.width as u64, self.height as u64);
        GrayImage::from_fn(width, height, |x, y| {
            let sx = ((x as u64 * sw) / width as u64).min(sw - 1) as u32;
            let sy = ((y as u64 * sh) / height as u64).min(sh - 1) as u32;
            self.get(sx, sy)
        })
    }
}

/// Summed-area tables of an image and of its squared intensities.
///
/// Both tables carry a zero border row and column, so entry `(x, y)` holds
/// the sum over all pixels strictly above row `y` and left of column `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralPair {
    width: u32,
    height: u32,
    sum: Vec<u64>,
    sqsum: Vec<u64>,
}

/// Mean and population variance of the pixels inside a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mean: f64,
    pub variance: f64,
}

impl WindowStats {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

impl IntegralPair {
    pub fn build(img: &GrayImage) -> IntegralPair {
        let w = img.width as usize;
        let h = img.height as usize;
        let stride = w + 1;
        let mut sum = vec![0u64; stride * (h + 1)];
        let mut sqsum = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = 0u64;
            let mut row_sq = 0u64;
            let src = &img.data[y * w..(y + 1) * w];
            for (x, &p) in src.iter().enumerate() {
                let p = p as u64;
                row_sum += p;
                row_sq += p * p;
                let above = y * stride + x + 1;
                let here = (y + 1) * stride + x + 1;
                sum[here] = sum[above] + row_sum;
                sqsum[here] = sqsum[above] + row_sq;
            }
        }
        IntegralPair {
            width: img.width,
            height: img.height,
            sum,
            sqsum,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Table entry for corner `(x, y)`, `0 <= x <= width`, `0 <= y <= height`.
    pub fn sum_at(&self, x: u32, y: u32) -> u64 {
        self.sum[y as usize * (self.width as usize + 1) + x as usize]
    }

    pub fn sqsum_at(&self, x: u32, y: u32) -> u64 {
        self.sqsum[y as usize * (self.width as usize + 1) + x as usize]
    }

    fn check(&self, r: Rect) -> Result<(), ImagingError> {
        if r.fits_in(self.width, self.height) {
            Ok(())
        } else {
            Err(ImagingError::OutOfBounds {
                rect: r,
                width: self.width,
                height: self.height,
            })
        }
    }

    #[inline]
    fn four_reads(table: &[u64], stride: usize, r: Rect) -> u64 {
        let (x0, y0) = (r.x as usize, r.y as usize);
        let (x1, y1) = (x0 + r.w as usize, y0 + r.h as usize);
        (table[y1 * stride + x1] + table[y0 * stride + x0])
            - (table[y0 * stride + x1] + table[y1 * stride + x0])
    }

    /// Sum of pixels inside `r` using four table reads.
    pub fn rect_sum(&self, r: Rect) -> Result<u64, ImagingError> {
        self.check(r)?;
        Ok(self.rect_sum_unchecked(r))
    }

    /// Same as [`rect_sum`](Self::rect_sum) for rects already known to be in bounds.
    #[inline]
    pub(crate) fn rect_sum_unchecked(&self, r: Rect) -> u64 {
        debug_assert!(r.x + r.w <= self.width && r.y + r.h <= self.height);
        Self::four_reads(&self.sum, self.width as usize + 1, r)
    }

    pub fn rect_sqsum(&self, r: Rect) -> Result<u64, ImagingError> {
        self.check(r)?;
        Ok(Self::four_reads(&self.sqsum, self.width as usize + 1, r))
    }

    /// Mean and population variance over `r`.
    ///
    /// The variance numerator `A*Q - S^2` is formed in exact integer
    /// arithmetic before the single division.
    pub fn window_stats(&self, r: Rect) -> Result<WindowStats, ImagingError> {
        self.check(r)?;
        Ok(self.window_stats_unchecked(r))
    }

    pub(crate) fn window_stats_unchecked(&self, r: Rect) -> WindowStats {
        let stride = self.width as usize + 1;
        let s = Self::four_reads(&self.sum, stride, r) as u128;
        let q = Self::four_reads(&self.sqsum, stride, r) as u128;
        let a = r.area() as u128;
        let numer = (a * q).saturating_sub(s * s);
        let a2 = (a * a) as f64;
        WindowStats {
            mean: s as f64 / a as f64,
            variance: (numer as f64 / a2).max(0.0),
        }
    }
}

/// Free-function form of [`IntegralPair::build`].
pub fn build_integral(img: &GrayImage) -> IntegralPair {
    IntegralPair::build(img)
}
