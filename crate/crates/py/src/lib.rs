//! Python bindings: images and native metrics, the score cache, manifests,
//! stack training and prediction, and the evaluation protocol.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use stackiqa::evalkit::{self, CvConfig, SplitUnit, TiePolicy};
use stackiqa::metrics::{self, MetricDescriptor, NiqePristineModel};
use stackiqa::pairset::{self, PairRecord, Side};
use stackiqa::stacker::{self, FeatureSpec, StackHyper};
use std::path::PathBuf;

create_exception!(stackiqa_py, StackiqaError, PyException);

fn err(e: stackiqa::Error) -> PyErr {
    StackiqaError::new_err(e.to_string())
}

fn invalid(message: String) -> PyErr {
    StackiqaError::new_err(message)
}

fn parse_side(side: &str) -> PyResult<Side> {
    side.parse().map_err(invalid)
}

fn ties(include: bool) -> TiePolicy {
    if include {
        TiePolicy::CountAsWrong
    } else {
        TiePolicy::Exclude
    }
}

/// An 8-bit gray or RGB image.
#[pyclass(name = "Image", module = "stackiqa_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyImage(pairset::Image);

#[pymethods]
impl PyImage {
    /// `data` holds `width * height * channels` bytes, row-major, channels interleaved.
    #[new]
    fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> PyResult<Self> {
        pairset::Image::new(width, height, channels, data).map(Self).map_err(err)
    }

    /// Loads a PNG or PNM file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        pairset::load_image(path).map(Self).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.0.channels()
    }

    fn luma(&self) -> Vec<f64> {
        self.0.luma().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{}, channels={})", self.0.width(), self.0.height(), self.0.channels())
    }
}

#[pyfunction]
fn psnr(x: &PyImage, y: &PyImage) -> PyResult<f64> {
    metrics::psnr(&x.0, &y.0).map_err(err)
}

#[pyfunction]
fn ssim(x: &PyImage, y: &PyImage) -> PyResult<f64> {
    metrics::ssim(&x.0, &y.0).map_err(err)
}

fn niqe_model(path: Option<PathBuf>) -> PyResult<NiqePristineModel> {
    match path {
        Some(p) => NiqePristineModel::load(p).map_err(err),
        None => Ok(NiqePristineModel::builtin()),
    }
}

/// NIQE against the bundled pristine model, or the model file at `model_path`.
#[pyfunction]
#[pyo3(signature = (image, model_path=None))]
fn niqe(image: &PyImage, model_path: Option<PathBuf>) -> PyResult<f64> {
    metrics::niqe(&image.0, &niqe_model(model_path)?).map_err(err)
}

/// Fits an asymmetric generalized Gaussian; returns `(shape, left_scale, right_scale, mean)`.
#[pyfunction]
fn fit_aggd(samples: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
    let f = metrics::fit_aggd(&samples).map_err(err)?;
    Ok((f.shape, f.left_scale, f.right_scale, f.mean))
}

/// Known metrics with their kind (`fr`/`nr`) and polarity (`higher`/`lower`).
#[pyclass(name = "MetricRegistry", module = "stackiqa_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyRegistry(metrics::MetricRegistry);

#[pymethods]
impl PyRegistry {
    /// Starts from the built-in metrics.
    #[new]
    fn new() -> Self {
        Self(metrics::MetricRegistry::builtin())
    }

    fn register(&mut self, metric_id: &str, kind: &str, polarity: &str) -> PyResult<()> {
        let desc = MetricDescriptor::external(metric_id, kind.parse().map_err(invalid)?, polarity.parse().map_err(invalid)?);
        self.0.register(desc).map_err(err)
    }

    /// Adds definitions from a `metric_id,kind,polarity` CSV; returns how many.
    fn extend_from_file(&mut self, path: PathBuf) -> PyResult<usize> {
        self.0.extend_from_file(path).map_err(err)
    }

    fn metric_ids(&self) -> Vec<String> {
        self.0.iter().map(|d| d.metric_id.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

fn registry(reg: Option<&PyRegistry>) -> metrics::MetricRegistry {
    reg.map(|r| r.0.clone()).unwrap_or_else(metrics::MetricRegistry::builtin)
}

/// Scores per `(pair_id, side, metric_id)`.
#[pyclass(name = "ScoreCache", module = "stackiqa_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyScoreCache(pairset::ScoreCache);

#[pymethods]
impl PyScoreCache {
    #[new]
    fn new() -> Self {
        Self(pairset::ScoreCache::new())
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        pairset::ScoreCache::load(path).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load_or_empty(path: PathBuf) -> PyResult<Self> {
        pairset::ScoreCache::load_or_empty(path).map(Self).map_err(err)
    }

    fn get(&self, pair_id: &str, side: &str, metric_id: &str) -> PyResult<Option<f64>> {
        Ok(self.0.get(pair_id, parse_side(side)?, metric_id))
    }

    /// True when the entry is new; identical re-insertion returns False and a
    /// different value raises.
    fn put(&mut self, pair_id: &str, side: &str, metric_id: &str, score: f64) -> PyResult<bool> {
        self.0.put(pair_id, parse_side(side)?, metric_id, score).map_err(err)
    }

    /// Merges a score CSV atomically; returns the number of new entries.
    fn ingest(&mut self, path: PathBuf) -> PyResult<usize> {
        let file = std::fs::File::open(&path)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        self.0.ingest(file).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    fn entries(&self) -> Vec<(String, String, String, f64)> {
        self.0
            .iter()
            .map(|(p, s, m, v)| (p.to_string(), s.to_string(), m.to_string(), v))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// One comparison: reference, candidates A and B, and the share of raters preferring A.
#[pyclass(name = "Pair", module = "stackiqa_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyPair(PairRecord);

#[pymethods]
impl PyPair {
    #[new]
    fn new(pair_id: String, ref_path: PathBuf, a_path: PathBuf, b_path: PathBuf, p_a: f64) -> Self {
        Self(PairRecord {
            pair_id,
            ref_path,
            a_path,
            b_path,
            p_a,
        })
    }

    #[getter]
    fn pair_id(&self) -> &str {
        &self.0.pair_id
    }

    #[getter]
    fn ref_path(&self) -> PathBuf {
        self.0.ref_path.clone()
    }

    #[getter]
    fn a_path(&self) -> PathBuf {
        self.0.a_path.clone()
    }

    #[getter]
    fn b_path(&self) -> PathBuf {
        self.0.b_path.clone()
    }

    #[getter]
    fn p_a(&self) -> f64 {
        self.0.p_a
    }

    /// `"A"`, `"B"` or `"tie"`.
    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    fn __repr__(&self) -> String {
        format!("Pair({:?}, p_a={})", self.0.pair_id, self.0.p_a)
    }
}

fn records(pairs: &[PyPair]) -> Vec<PairRecord> {
    pairs.iter().map(|p| p.0.clone()).collect()
}

#[pyfunction]
fn load_manifest(path: PathBuf) -> PyResult<Vec<PyPair>> {
    Ok(pairset::load_manifest(path).map_err(err)?.into_iter().map(PyPair).collect())
}

/// Computes missing native scores into `cache`; returns how many were added.
#[pyfunction]
#[pyo3(signature = (pairs, metric_ids, cache, niqe_model_path=None, registry=None))]
fn score(
    py: Python<'_>,
    pairs: Vec<PyPair>,
    metric_ids: Vec<String>,
    cache: &mut PyScoreCache,
    niqe_model_path: Option<PathBuf>,
    registry: Option<PyRef<'_, PyRegistry>>,
) -> PyResult<usize> {
    let reg = self::registry(registry.as_deref());
    let model = niqe_model(niqe_model_path)?;
    let recs = records(&pairs);
    let cache = &mut cache.0;
    py.detach(|| stackiqa::scoring::score_pairs(&recs, &metric_ids, &reg, cache, &model))
        .map_err(err)
}

/// A trained stack.
#[pyclass(name = "StackModel", module = "stackiqa_py", frozen)]
pub struct PyStackModel(stacker::StackModel);

#[pymethods]
impl PyStackModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        stacker::StackModel::load(path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    #[getter]
    fn metric_ids(&self) -> Vec<String> {
        self.0.spec().metric_ids().to_vec()
    }

    /// Decision value for raw features `[m1(A), m1(B), m2(A), ...]`; positive prefers A.
    fn decision(&self, features: Vec<f64>) -> PyResult<f64> {
        self.0.decision(&features).map_err(err)
    }

    fn decision_pair(&self, pair: &PyPair, cache: &PyScoreCache) -> PyResult<f64> {
        self.0.decision_pair(&pair.0, &cache.0).map_err(err)
    }

    /// `"A"` or `"B"`.
    fn predict_pair(&self, pair: &PyPair, cache: &PyScoreCache) -> PyResult<String> {
        Ok(self.0.predict_pair(&pair.0, &cache.0).map_err(err)?.to_string())
    }
}

fn hyper(c: f64, gamma: Option<f64>, tol: f64, max_passes: usize, swap_augment: bool) -> StackHyper {
    StackHyper {
        c,
        gamma,
        tol,
        max_passes,
        swap_augment,
    }
}

/// Trains the stack on the non-tie pairs.
#[pyfunction]
#[pyo3(signature = (pairs, metric_ids, cache, seed=42, c=1.0, gamma=None, tol=1e-3, max_passes=200, swap_augment=true))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    pairs: Vec<PyPair>,
    metric_ids: Vec<String>,
    cache: &PyScoreCache,
    seed: u64,
    c: f64,
    gamma: Option<f64>,
    tol: f64,
    max_passes: usize,
    swap_augment: bool,
) -> PyResult<PyStackModel> {
    let spec = FeatureSpec::from_ids(&metric_ids).map_err(err)?;
    let h = hyper(c, gamma, tol, max_passes, swap_augment);
    let recs = records(&pairs);
    py.detach(|| stacker::train_stack(&recs, &spec, &cache.0, &h, seed))
        .map(PyStackModel)
        .map_err(err)
}

/// Predicted labels (`"A"`/`"B"`) for every pair.
#[pyfunction]
fn predict(model: &PyStackModel, pairs: Vec<PyPair>, cache: &PyScoreCache) -> PyResult<Vec<String>> {
    pairs
        .iter()
        .map(|p| model.0.predict_pair(&p.0, &cache.0).map(|l| l.to_string()))
        .collect::<stackiqa::Result<_>>()
        .map_err(err)
}

/// Repeated random-split evaluation of the stack. Returns the median
/// accuracy and per-cycle `(cycle, accuracy, n_train, n_test)` tuples.
#[pyfunction]
#[pyo3(signature = (pairs, metric_ids, cache, seed=42, cycles=5, train_fraction=0.8, split_unit="pair", include_ties=false, c=1.0, gamma=None, tol=1e-3, max_passes=200, swap_augment=true))]
#[allow(clippy::too_many_arguments)]
fn cross_validate(
    py: Python<'_>,
    pairs: Vec<PyPair>,
    metric_ids: Vec<String>,
    cache: &PyScoreCache,
    seed: u64,
    cycles: usize,
    train_fraction: f64,
    split_unit: &str,
    include_ties: bool,
    c: f64,
    gamma: Option<f64>,
    tol: f64,
    max_passes: usize,
    swap_augment: bool,
) -> PyResult<(f64, Vec<(usize, f64, usize, usize)>)> {
    let split_unit = match split_unit {
        "pair" => SplitUnit::ByPair,
        "reference" => SplitUnit::ByReference,
        other => return Err(invalid(format!("split_unit must be `pair` or `reference`, got `{other}`"))),
    };
    let config = CvConfig {
        cycles,
        train_fraction,
        seed,
        split_unit,
        ties: ties(include_ties),
    };
    let spec = FeatureSpec::from_ids(&metric_ids).map_err(err)?;
    let h = hyper(c, gamma, tol, max_passes, swap_augment);
    let recs = records(&pairs);
    let rep = py
        .detach(|| evalkit::cross_validate(&recs, &spec, &cache.0, &config, &h))
        .map_err(err)?;
    Ok((
        rep.median_accuracy,
        rep.cycles
            .iter()
            .map(|c| (c.cycle, c.accuracy, c.n_train, c.n_test))
            .collect(),
    ))
}

/// Single-metric accuracies as `(metric_id, accuracy, n)` tuples.
#[pyfunction]
#[pyo3(signature = (pairs, metric_ids, cache, registry=None, include_ties=false))]
fn baselines(
    pairs: Vec<PyPair>,
    metric_ids: Vec<String>,
    cache: &PyScoreCache,
    registry: Option<PyRef<'_, PyRegistry>>,
    include_ties: bool,
) -> PyResult<Vec<(String, f64, usize)>> {
    let reg = self::registry(registry.as_deref());
    let recs = records(&pairs);
    metric_ids
        .iter()
        .map(|id| {
            let desc = reg.require(id)?;
            let r = evalkit::single_metric_accuracy(desc, &recs, &cache.0, ties(include_ties))?;
            Ok((r.metric_id, r.accuracy, r.n))
        })
        .collect::<stackiqa::Result<_>>()
        .map_err(err)
}

/// Populated supporter cells as `(supported, supporter, accuracy, count)` tuples.
#[pyfunction]
#[pyo3(signature = (pairs, metric_ids, cache, registry=None, include_ties=false))]
fn supporter_matrix(
    pairs: Vec<PyPair>,
    metric_ids: Vec<String>,
    cache: &PyScoreCache,
    registry: Option<PyRef<'_, PyRegistry>>,
    include_ties: bool,
) -> PyResult<Vec<(String, String, f64, usize)>> {
    let reg = self::registry(registry.as_deref());
    let descs = metric_ids
        .iter()
        .map(|id| reg.require(id))
        .collect::<stackiqa::Result<Vec<_>>>()
        .map_err(err)?;
    let m = evalkit::supporter_matrix(&descs, &records(&pairs), &cache.0, ties(include_ties)).map_err(err)?;
    let ids = m.metric_ids();
    let mut out = Vec::new();
    for s in 0..ids.len() {
        for t in 0..ids.len() {
            if let Some(cell) = m.cell(s, t) {
                out.push((ids[s].clone(), ids[t].clone(), cell.accuracy, cell.count));
            }
        }
    }
    Ok(out)
}

/// Synthetic dataset: `(pairs, cache, registry)` with six complementary metrics.
#[pyfunction]
#[pyo3(signature = (n_pairs=500, seed=42))]
fn synthetic(n_pairs: usize, seed: u64) -> PyResult<(Vec<PyPair>, PyScoreCache, PyRegistry)> {
    let ds = evalkit::synthetic::generate(n_pairs, seed);
    let mut reg = metrics::MetricRegistry::builtin();
    for m in &ds.metrics {
        reg.register(m.clone()).map_err(err)?;
    }
    Ok((
        ds.pairs.into_iter().map(PyPair).collect(),
        PyScoreCache(ds.cache),
        PyRegistry(reg),
    ))
}

/// Registers every class and function on `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("StackiqaError", m.py().get_type::<StackiqaError>())?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyRegistry>()?;
    m.add_class::<PyScoreCache>()?;
    m.add_class::<PyPair>()?;
    m.add_class::<PyStackModel>()?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(niqe, m)?)?;
    m.add_function(wrap_pyfunction!(fit_aggd, m)?)?;
    m.add_function(wrap_pyfunction!(load_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(baselines, m)?)?;
    m.add_function(wrap_pyfunction!(supporter_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    Ok(())
}

#[pymodule]
fn stackiqa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

