//! Labelled real-valued samples shared by every learner.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("point {index} has dimension {found}, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{points} points but {labels} labels")]
    LabelCount { points: usize, labels: usize },
    #[error("label {label} at index {index} is not -1 or +1")]
    BadLabel { index: usize, label: i8 },
    #[error("non-finite value at point {index}")]
    NonFinite { index: usize },
}

/// Read-only access to the feature values of one sample.
///
/// Tabular samples are plain slices; image windows implement this by
/// evaluating Haar features on demand.
pub trait FeatureAccess {
    fn feature(&self, id: usize) -> f64;
}

impl FeatureAccess for [f64] {
    #[inline]
    fn feature(&self, id: usize) -> f64 {
        self[id]
    }
}

impl FeatureAccess for Vec<f64> {
    #[inline]
    fn feature(&self, id: usize) -> f64 {
        self[id]
    }
}

/// `l` points of dimension `R` stored row-major, with labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
    labels: Vec<i8>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<Self, DatasetError> {
        let dim = points.first().map_or(0, Vec::len);
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(DatasetError::Dimension {
                    index,
                    expected: dim,
                    found: p.len(),
                });
            }
        }
        Self::from_flat(dim, points.into_iter().flatten().collect(), labels)
    }

    pub fn from_flat(dim: usize, values: Vec<f64>, labels: Vec<i8>) -> Result<Self, DatasetError> {
        let points = if dim == 0 { labels.len() } else { values.len() / dim };
        if (dim > 0 && values.len() % dim != 0) || points != labels.len() {
            return Err(DatasetError::LabelCount {
                points,
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l != 1 && l != -1) {
            return Err(DatasetError::BadLabel { index, label });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite { index: pos / dim.max(1) });
        }
        Ok(Dataset {
            dim,
            values,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.values[i * self.dim + j]).collect()
    }

    pub fn count_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l > 0).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.count_positive();
        pos > 0 && pos < self.len()
    }

    /// Rows at `indices`, repeats allowed.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.point(i));
        }
        Dataset {
            dim: self.dim,
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Keeps only the given columns, in the given order.
    pub fn project(&self, columns: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(self.len() * columns.len());
        for p in self.points() {
            values.extend(columns.iter().map(|&c| p[c]));
        }
        Dataset {
            dim: columns.len(),
            values,
            labels: self.labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![1, -1]).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![0]).is_err());
        assert!(Dataset::new(vec![vec![f64::NAN]], vec![1]).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![1, 1]).is_err());
    }

    #[test]
    fn subset_and_project() {
        let d = Dataset::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![1, -1]).unwrap();
        assert!(d.has_both_classes());
        let s = d.subset(&[1, 1]);
        assert_eq!(s.point(1), &[3.0, 4.0]);
        assert!(!s.has_both_classes());
        let p = d.project(&[1]);
        assert_eq!(p.column(0), vec![2.0, 4.0]);
    }
}
