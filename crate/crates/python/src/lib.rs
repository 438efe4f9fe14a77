use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use svmcascade_core as core;
use core::boostsvm::BoostSvmConfig;
use core::cascade::{LearnerKind, ScanConfig, TrainConfig};
use core::evalkit::{LabeledImage, Sweep};
use core::svm::{KernelSpec, SolverConfig};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type RectTuple = (u32, u32, u32, u32);

fn rect(r: RectTuple) -> core::Rect {
    core::Rect::new(r.0, r.1, r.2, r.3)
}

/// 8-bit greyscale image, row-major.
#[pyclass(module = "svmcascade", frozen)]
pub struct GrayImage {
    inner: core::GrayImage,
}

#[pymethods]
impl GrayImage {
    #[new]
    fn new(width: u32, height: u32, data: Vec<u8>) -> PyResult<Self> {
        let inner = core::GrayImage::new(width, height, data).map_err(value_err)?;
        Ok(GrayImage { inner })
    }

    /// Reads a binary or ASCII PGM/PPM file (colour is converted to grey).
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let bytes = std::fs::read(path).map_err(value_err)?;
        let inner = core::imaging::load_pgm(&bytes).map_err(value_err)?;
        Ok(GrayImage { inner })
    }

    fn save_pgm(&self, path: &str) -> PyResult<()> {
        std::fs::write(path, core::imaging::write_pgm(&self.inner)).map_err(value_err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    fn data<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.data())
    }

    fn get(&self, x: u32, y: u32) -> PyResult<u8> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err("pixel outside the image"));
        }
        Ok(self.inner.get(x, y))
    }

    fn __repr__(&self) -> String {
        format!("GrayImage({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Summed-area tables of pixel values and squared values.
#[pyclass(module = "svmcascade", frozen)]
pub struct IntegralPair {
    inner: core::IntegralPair,
}

#[pymethods]
impl IntegralPair {
    #[new]
    fn new(image: &GrayImage) -> Self {
        IntegralPair {
            inner: core::IntegralPair::build(&image.inner),
        }
    }

    fn rect_sum(&self, r: RectTuple) -> PyResult<u64> {
        self.inner.rect_sum(rect(r)).map_err(value_err)
    }

    fn rect_sqsum(&self, r: RectTuple) -> PyResult<u64> {
        self.inner.rect_sqsum(rect(r)).map_err(value_err)
    }

    /// `(mean, variance)` of the pixels in `r`.
    fn window_stats(&self, r: RectTuple) -> PyResult<(f64, f64)> {
        let s = self.inner.window_stats(rect(r)).map_err(value_err)?;
        Ok((s.mean, s.variance))
    }
}

/// Labelled points, labels in {-1, +1}.
#[pyclass(module = "svmcascade", frozen)]
pub struct Dataset {
    inner: core::Dataset,
}

#[pymethods]
impl Dataset {
    #[new]
    fn new(points: Vec<Vec<f64>>, labels: Vec<i8>) -> PyResult<Self> {
        let inner = core::Dataset::new(points, labels).map_err(value_err)?;
        Ok(Dataset { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().map(<[f64]>::to_vec).collect()
    }

    fn labels(&self) -> Vec<i8> {
        self.inner.labels().to_vec()
    }
}

/// RBF-kernel SVM.
#[pyclass(module = "svmcascade", frozen)]
pub struct SvmModel {
    inner: core::svm::SvmModel,
}

#[pymethods]
impl SvmModel {
    fn decision(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.decision(&x).map_err(value_err)
    }

    fn classify(&self, x: Vec<f64>) -> PyResult<i8> {
        self.inner.classify(&x).map_err(value_err)
    }

    #[getter]
    fn n_support(&self) -> usize {
        self.inner.n_support()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.inner.bias
    }
}

#[pyfunction]
#[pyo3(signature = (data, sigma, c = 1.0))]
fn train_svm(data: &Dataset, sigma: f64, c: f64) -> PyResult<SvmModel> {
    let fit = core::svm::train_svm(&data.inner, KernelSpec::Rbf { sigma }, c, &SolverConfig::default())
        .map_err(value_err)?;
    Ok(SvmModel { inner: fit.model })
}

/// Weighted vote of component classifiers.
#[pyclass(module = "svmcascade", frozen)]
pub struct StrongClassifier {
    inner: core::boosting::StrongClassifier,
}

#[pymethods]
impl StrongClassifier {
    fn score(&self, x: Vec<f64>) -> f64 {
        self.inner.score(x.as_slice())
    }

    fn predict(&self, x: Vec<f64>) -> i8 {
        self.inner.decide(x.as_slice()).1
    }

    fn error(&self, data: &Dataset) -> f64 {
        self.inner.training_error(&data.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.rounds.len()
    }

    fn alphas(&self) -> Vec<f64> {
        self.inner.rounds.iter().map(|r| r.alpha).collect()
    }
}

/// Result of boosting RBF-SVM components with a shrinking kernel width.
#[pyclass(module = "svmcascade", frozen)]
pub struct BoostSvmRun {
    inner: core::boostsvm::BoostSvmRun,
}

#[pymethods]
impl BoostSvmRun {
    fn classifier(&self) -> StrongClassifier {
        StrongClassifier {
            inner: self.inner.classifier.clone(),
        }
    }

    /// Every attempt as `(sigma, epsilon, alpha, accepted)`.
    fn attempts(&self) -> Vec<(f64, f64, f64, bool)> {
        self.inner
            .attempts
            .iter()
            .map(|a| (a.sigma, a.epsilon, a.alpha, a.accepted))
            .collect()
    }

    fn attempts_csv(&self) -> String {
        core::boostsvm::attempts_csv(&self.inner.attempts)
    }

    /// `(sigma_ini, sigma_min, sigma_step)`.
    #[getter]
    fn schedule(&self) -> (f64, f64, f64) {
        let s = &self.inner.schedule;
        (s.sigma_ini, s.sigma_min, s.sigma_step)
    }
}

#[pyfunction]
#[pyo3(signature = (data, t_max = 100, c = 1.0, seed = 0))]
fn run_adaboost_svm(data: &Dataset, t_max: usize, c: f64, seed: u64) -> PyResult<BoostSvmRun> {
    let cfg = BoostSvmConfig {
        t_max,
        c,
        seed,
        ..BoostSvmConfig::default()
    };
    let run = core::boostsvm::run_adaboost_svm(&data.inner, &cfg).map_err(value_err)?;
    Ok(BoostSvmRun { inner: run })
}

/// A trained detector cascade.
#[pyclass(module = "svmcascade", frozen)]
pub struct CascadeModel {
    inner: core::cascade::CascadeModel,
}

fn scan_config(scale_factor: f64, min_neighbors: usize) -> PyResult<ScanConfig> {
    let cfg = ScanConfig {
        scale_factor,
        merge_min_neighbors: min_neighbors,
        ..ScanConfig::default()
    };
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

fn labeled(images: Vec<PyRef<'_, GrayImage>>, truth: Vec<Vec<RectTuple>>) -> PyResult<Vec<LabeledImage>> {
    if images.len() != truth.len() {
        return Err(PyValueError::new_err("one truth list is needed per image"));
    }
    Ok(images
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(i, (img, t))| LabeledImage {
            name: format!("image_{i:04}"),
            image: img.inner.clone(),
            truth: t.into_iter().map(rect).collect(),
        })
        .collect())
}

#[pymethods]
impl CascadeModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = core::cascade::CascadeModel::from_json(text).map_err(value_err)?;
        Ok(CascadeModel { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(value_err)?)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        std::fs::write(path, self.inner.to_json()).map_err(value_err)
    }

    #[getter]
    fn base(&self) -> u32 {
        self.inner.base
    }

    #[getter]
    fn n_stages(&self) -> usize {
        self.inner.stages.len()
    }

    #[getter]
    fn learner(&self) -> String {
        self.inner.training_meta.learner.clone()
    }

    /// Merged detections as `(x, y, w, h, score)`.
    #[pyo3(signature = (image, scale_factor = 1.25, min_neighbors = 2))]
    fn detect(&self, image: &GrayImage, scale_factor: f64, min_neighbors: usize) -> PyResult<Vec<(u32, u32, u32, u32, f64)>> {
        let cfg = scan_config(scale_factor, min_neighbors)?;
        let dets = core::cascade::detect(&self.inner, &image.inner, &cfg).map_err(value_err)?;
        Ok(dets
            .iter()
            .map(|d| (d.rect.x, d.rect.y, d.rect.w, d.rect.h, d.score))
            .collect())
    }

    /// Exact ROC sweep over an annotated set, as `(threshold, false_detections, detection_rate)`.
    #[pyo3(signature = (images, truth, match_iou = 0.5))]
    fn roc_curve(
        &self,
        images: Vec<PyRef<'_, GrayImage>>,
        truth: Vec<Vec<RectTuple>>,
        match_iou: f64,
    ) -> PyResult<Vec<(f64, usize, f64)>> {
        let set = labeled(images, truth)?;
        let points = core::evalkit::roc_curve(&self.inner, &set, &ScanConfig::default(), &Sweep::Exact, match_iou)
            .map_err(value_err)?;
        Ok(points
            .iter()
            .map(|p| (p.threshold, p.false_detections, p.detection_rate))
            .collect())
    }
}

#[pyfunction]
#[pyo3(signature = (faces, nonfaces, learner = "stump", base = 32, max_stages = 10, max_rounds = 100, d_min = 0.995, f_max = 0.5, target_fpr = 1e-3, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn train_cascade(
    faces: Vec<PyRef<'_, GrayImage>>,
    nonfaces: Vec<PyRef<'_, GrayImage>>,
    learner: &str,
    base: u32,
    max_stages: usize,
    max_rounds: usize,
    d_min: f64,
    f_max: f64,
    target_fpr: f64,
    seed: u64,
) -> PyResult<CascadeModel> {
    let learner = LearnerKind::from_name(learner)
        .ok_or_else(|| PyValueError::new_err(format!("unknown learner {learner:?}")))?;
    let cfg = TrainConfig {
        base,
        learner,
        max_stages,
        max_rounds,
        d_min,
        f_max,
        target_fpr,
        seed,
        ..TrainConfig::default()
    };
    let faces: Vec<core::GrayImage> = faces.iter().map(|f| f.inner.clone()).collect();
    let nonfaces: Vec<core::GrayImage> = nonfaces.iter().map(|f| f.inner.clone()).collect();
    let out = core::cascade::train_cascade(&faces, &nonfaces, &cfg).map_err(value_err)?;
    Ok(CascadeModel { inner: out.model })
}

#[pyfunction]
#[pyo3(signature = (n, ratio = 10.0, seed = 0))]
fn two_gaussians(n: usize, ratio: f64, seed: u64) -> Dataset {
    Dataset {
        inner: core::evalkit::two_gaussians(n, ratio, seed),
    }
}

#[pyfunction]
#[pyo3(signature = (n, noise = 0.1, seed = 0))]
fn two_moons(n: usize, noise: f64, seed: u64) -> Dataset {
    Dataset {
        inner: core::evalkit::two_moons(n, noise, seed),
    }
}

fn wrap(images: Vec<core::GrayImage>) -> Vec<GrayImage> {
    images.into_iter().map(|inner| GrayImage { inner }).collect()
}

#[pyfunction]
#[pyo3(signature = (n, base = 32, seed = 0))]
fn cross_faces(n: usize, base: u32, seed: u64) -> Vec<GrayImage> {
    wrap(core::evalkit::cross_faces(n, base, seed))
}

#[pyfunction]
#[pyo3(signature = (n, width, height, seed = 0))]
fn backgrounds(n: usize, width: u32, height: u32, seed: u64) -> Vec<GrayImage> {
    wrap(core::evalkit::backgrounds(n, width, height, seed))
}

/// Scenes with planted targets, as `(image, [(x, y, w, h), ...])`.
#[pyfunction]
#[pyo3(signature = (images, targets = 3, base = 32, seed = 0))]
fn cross_corpus(images: usize, targets: usize, base: u32, seed: u64) -> Vec<(GrayImage, Vec<RectTuple>)> {
    core::evalkit::cross_corpus(images, targets, base, seed)
        .into_iter()
        .map(|l| {
            let truth = l.truth.iter().map(|r| (r.x, r.y, r.w, r.h)).collect();
            (GrayImage { inner: l.image }, truth)
        })
        .collect()
}

#[pymodule]
fn svmcascade(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<GrayImage>()?;
    m.add_class::<IntegralPair>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<SvmModel>()?;
    m.add_class::<StrongClassifier>()?;
    m.add_class::<BoostSvmRun>()?;
    m.add_class::<CascadeModel>()?;
    m.add_function(wrap_pyfunction!(train_svm, m)?)?;
    m.add_function(wrap_pyfunction!(run_adaboost_svm, m)?)?;
    m.add_function(wrap_pyfunction!(train_cascade, m)?)?;
    m.add_function(wrap_pyfunction!(two_gaussians, m)?)?;
    m.add_function(wrap_pyfunction!(two_moons, m)?)?;
    m.add_function(wrap_pyfunction!(cross_faces, m)?)?;
    m.add_function(wrap_pyfunction!(backgrounds, m)?)?;
    m.add_function(wrap_pyfunction!(cross_corpus, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
