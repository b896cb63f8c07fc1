//! Stacked meta-learner: paired base-metric scores in, preference out.
//!
//! Each pair becomes the vector `[m1(A), m1(B), m2(A), m2(B), ...]` in spec
//! order. Features are z-scored with training statistics and fed to the RBF
//! SVM; `+1` means A is preferred. With swap augmentation every training
//! sample `(x, y)` is accompanied by `(swap(x), -y)`, which makes the
//! learned decision function antisymmetric under exchanging A and B.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{validate_metric_id, MetricRegistry};
use crate::pairset::{PairRecord, PreferenceLabel, ScoreCache, Side};
use crate::svm::{scale_gamma, train_detailed, SvmModel, SvmParams, TrainSet};

/// Infinite scores (PSNR of identical images) are clamped to this magnitude.
pub const INF_CLAMP: f64 = 1e6;
pub const FORMAT_VERSION: u32 = 1;
const MODEL_HEADER: &str = "stackiqa-model v1";

/// Ordered list of base metrics feeding the stack.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSpec {
    metric_ids: Vec<String>,
}

impl FeatureSpec {
    /// Builds a spec whose ids must all be known to `registry`.
    pub fn new<S: AsRef<str>>(metric_ids: &[S], registry: &MetricRegistry) -> Result<Self> {
        let spec = Self::from_ids(metric_ids)?;
        for id in &spec.metric_ids {
            registry.require(id)?;
        }
        Ok(spec)
    }

    /// Builds a spec without a registry lookup (used when loading models).
    pub fn from_ids<S: AsRef<str>>(metric_ids: &[S]) -> Result<Self> {
        if metric_ids.is_empty() {
            return Err(Error::InvalidArgument("feature spec needs at least one metric".into()));
        }
        let mut seen = HashSet::new();
        let mut ids = Vec::with_capacity(metric_ids.len());
        for id in metric_ids {
            let id = id.as_ref();
            validate_metric_id(id)?;
            if !seen.insert(id) {
                return Err(Error::InvalidArgument(format!("metric `{id}` listed twice")));
            }
            ids.push(id.to_string());
        }
        Ok(Self { metric_ids: ids })
    }

    pub fn metric_ids(&self) -> &[String] {
        &self.metric_ids
    }

    pub fn len(&self) -> usize {
        self.metric_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metric_ids.is_empty()
    }

    /// Feature dimension, two per metric.
    pub fn dim(&self) -> usize {
        2 * self.metric_ids.len()
    }
}

fn clamp_infinite(v: f64) -> f64 {
    if v.is_infinite() {
        v.clamp(-INF_CLAMP, INF_CLAMP)
    } else {
        v
    }
}

/// Interleaved A/B scores of `pair` in spec order, infinities clamped.
pub fn build_features(pair: &PairRecord, spec: &FeatureSpec, cache: &ScoreCache) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(spec.dim());
    for metric in spec.metric_ids() {
        for side in Side::BOTH {
            let v = cache
                .get(&pair.pair_id, side, metric)
                .ok_or_else(|| Error::MissingScore {
                    pair_id: pair.pair_id.clone(),
                    side,
                    metric_id: metric.clone(),
                })?;
            out.push(clamp_infinite(v));
        }
    }
    Ok(out)
}

/// Exchanges the A and B entries of every metric block.
pub fn swap_features(x: &[f64]) -> Result<Vec<f64>> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "feature vector has odd length {}",
            x.len()
        )));
    }
    Ok(x.chunks_exact(2).flat_map(|p| [p[1], p[0]]).collect())
}

/// Training hyperparameters of the stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackHyper {
    pub c: f64,
    /// `None` selects the scale heuristic on the standardized features.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
    pub swap_augment: bool,
}

impl Default for StackHyper {
    fn default() -> Self {
        Self {
            c: SvmParams::DEFAULT_C,
            gamma: None,
            tol: SvmParams::DEFAULT_TOL,
            max_passes: SvmParams::DEFAULT_MAX_PASSES,
            swap_augment: true,
        }
    }
}

/// Per-dimension z-score statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
    /// Dimensions with zero training variance; their std is stored as 1.
    zero_variance: Vec<bool>,
}

impl Standardizer {
    pub fn fit(xs: &[Vec<f64>]) -> Self {
        let d = xs[0].len();
        let n = xs.len() as f64;
        let mut means = vec![0.0; d];
        for x in xs {
            for (m, v) in means.iter_mut().zip(x) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for x in xs {
            for k in 0..d {
                vars[k] += (x[k] - means[k]).powi(2);
            }
        }
        let mut stds = Vec::with_capacity(d);
        let mut zero_variance = Vec::with_capacity(d);
        for v in vars {
            let s = (v / n).sqrt();
            let flat = !(s > 0.0);
            zero_variance.push(flat);
            stds.push(if flat { 1.0 } else { s });
        }
        Self {
            means,
            stds,
            zero_variance,
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn zero_variance(&self) -> &[bool] {
        &self.zero_variance
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// A trained stack: feature spec, standardization and the SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct StackModel {
    spec: FeatureSpec,
    standardizer: Standardizer,
    svm: SvmModel,
    hyper: StackHyper,
    seed: u64,
    format_version: u32,
}

/// Trains on the non-tie pairs of `pairs`.
pub fn train_stack(
    pairs: &[PairRecord],
    spec: &FeatureSpec,
    cache: &ScoreCache,
    hyper: &StackHyper,
    seed: u64,
) -> Result<StackModel> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for pair in pairs {
        if let Some(y) = pair.label().sign() {
            xs.push(build_features(pair, spec, cache)?);
            ys.push(y);
        }
    }
    train_from_features(&xs, &ys, spec, hyper, seed)
}

/// Trains from prebuilt raw feature vectors with labels in `{+1, -1}`.
pub fn train_from_features(
    xs: &[Vec<f64>],
    ys: &[f64],
    spec: &FeatureSpec,
    hyper: &StackHyper,
    seed: u64,
) -> Result<StackModel> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 non-tie training pairs, got {}",
            xs.len()
        )));
    }
    if !(ys.contains(&1.0) && ys.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    for x in xs {
        if x.len() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                found: x.len(),
            });
        }
    }
    let (mut all_x, mut all_y) = (xs.to_vec(), ys.to_vec());
    if hyper.swap_augment {
        for (x, y) in xs.iter().zip(ys) {
            all_x.push(swap_features(x)?);
            all_y.push(-y);
        }
    }
    let standardizer = Standardizer::fit(&all_x);
    let zs: Vec<Vec<f64>> = all_x.iter().map(|x| standardizer.apply(x)).collect();
    let gamma = hyper.gamma.unwrap_or_else(|| scale_gamma(&zs));
    let params = SvmParams {
        c: hyper.c,
        gamma,
        tol: hyper.tol,
        max_passes: hyper.max_passes,
        seed,
    };
    let ts = TrainSet::new(zs, all_y)?;
    let (svm, _) = train_detailed(&ts, &params)?;
    Ok(StackModel {
        spec: spec.clone(),
        standardizer,
        svm,
        hyper: StackHyper {
            gamma: Some(gamma),
            ..*hyper
        },
        seed,
        format_version: FORMAT_VERSION,
    })
}

fn label_from_decision(decision: f64) -> PreferenceLabel {
    if decision >= 0.0 {
        PreferenceLabel::PreferA
    } else {
        PreferenceLabel::PreferB
    }
}

impl StackModel {
    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn svm(&self) -> &SvmModel {
        &self.svm
    }

    /// Hyperparameters with the resolved gamma.
    pub fn hyper(&self) -> &StackHyper {
        &self.hyper
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    /// Decision value of a raw (unstandardized) feature vector; positive
    /// favours A.
    pub fn decision(&self, raw: &[f64]) -> Result<f64> {
        if raw.len() != self.spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.dim(),
                found: raw.len(),
            });
        }
        let clamped: Vec<f64> = raw.iter().map(|&v| clamp_infinite(v)).collect();
        self.svm.decision(&self.standardizer.apply(&clamped))
    }

    pub fn predict_features(&self, raw: &[f64]) -> Result<PreferenceLabel> {
        Ok(label_from_decision(self.decision(raw)?))
    }

    pub fn decision_pair(&self, pair: &PairRecord, cache: &ScoreCache) -> Result<f64> {
        self.decision(&build_features(pair, &self.spec, cache)?)
    }

    /// Never returns a tie: a zero decision goes to A.
    pub fn predict_pair(&self, pair: &PairRecord, cache: &ScoreCache) -> Result<PreferenceLabel> {
        Ok(label_from_decision(self.decision_pair(pair, cache)?))
    }

    pub fn to_text(&self) -> String {
        let join = |vals: &[f64]| {
            vals.iter()
                .map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        out.push_str(MODEL_HEADER);
        out.push('\n');
        out.push_str(&format!(
            "metrics {} {}\n",
            self.spec.len(),
            self.spec.metric_ids().join(" ")
        ));
        out.push_str(&format!(
            "hyper c={:.17e} gamma={:.17e} tol={:.17e} seed={} max_passes={} swap_augment={}\n",
            self.hyper.c,
            self.svm.gamma(),
            self.hyper.tol,
            self.seed,
            self.hyper.max_passes,
            u8::from(self.hyper.swap_augment),
        ));
        out.push_str(&format!("means {}\n", join(self.standardizer.means())));
        out.push_str(&format!("stds {}\n", join(self.standardizer.stds())));
        let flagged: Vec<String> = self
            .standardizer
            .zero_variance()
            .iter()
            .enumerate()
            .filter(|(_, &z)| z)
            .map(|(i, _)| i.to_string())
            .collect();
        out.push_str("zero_variance");
        for i in flagged {
            out.push(' ');
            out.push_str(&i);
        }
        out.push('\n');
        out.push_str(&format!("support_vectors {}\n", self.svm.support_xs().len()));
        for (sv, coeff) in self.svm.support_xs().iter().zip(self.svm.coeffs()) {
            out.push_str(&format!("{coeff:.17e} {}\n", join(sv)));
        }
        out.push_str(&format!("bias {:.17e}\n", self.svm.bias()));
        out
    }

    pub fn parse(mut reader: impl Read) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text).map_err(|e| Error::ModelFormat {
            line: 0,
            message: e.to_string(),
        })?;
        ModelParser::new(&text).parse()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file)
    }
}

struct ModelParser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> ModelParser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::ModelFormat {
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim())
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(tokens.collect())
    }

    fn float(&self, t: &str) -> Result<f64> {
        t.parse().map_err(|_| self.err(format!("bad number `{t}`")))
    }

    fn floats(&self, tokens: &[&str], expected: usize) -> Result<Vec<f64>> {
        if tokens.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", tokens.len())));
        }
        tokens.iter().map(|t| self.float(t)).collect()
    }

    fn parse(mut self) -> Result<StackModel> {
        if self.next_line()? != MODEL_HEADER {
            return Err(self.err(format!("expected `{MODEL_HEADER}`")));
        }
        let tokens = self.keyed("metrics")?;
        let k: usize = tokens
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err("missing metric count"))?;
        if tokens.len() != k + 1 {
            return Err(self.err(format!("expected {k} metric ids")));
        }
        let spec = FeatureSpec::from_ids(&tokens[1..]).map_err(|e| self.err(e.to_string()))?;
        let dim = spec.dim();

        let tokens = self.keyed("hyper")?;
        let get = |key: &str| -> Result<&str> {
            tokens
                .iter()
                .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| self.err(format!("missing `{key}`")))
        };
        let (c, gamma, tol) = (get("c")?, get("gamma")?, get("tol")?);
        let (seed, max_passes, swap) = (get("seed")?, get("max_passes")?, get("swap_augment")?);
        let c = self.float(c)?;
        let gamma = self.float(gamma)?;
        let tol = self.float(tol)?;
        let seed: u64 = seed.parse().map_err(|_| self.err("bad seed"))?;
        let max_passes: usize = max_passes.parse().map_err(|_| self.err("bad max_passes"))?;
        let swap_augment = match swap {
            "0" => false,
            "1" => true,
            _ => return Err(self.err("swap_augment must be 0 or 1")),
        };

        let tokens = self.keyed("means")?;
        let means = self.floats(&tokens, dim)?;
        let tokens = self.keyed("stds")?;
        let stds = self.floats(&tokens, dim)?;
        if stds.iter().any(|s| !(*s > 0.0)) {
            return Err(self.err("standard deviations must be positive"));
        }
        let tokens = self.keyed("zero_variance")?;
        let mut zero_variance = vec![false; dim];
        for t in tokens {
            let i: usize = t.parse().map_err(|_| self.err(format!("bad index `{t}`")))?;
            *zero_variance
                .get_mut(i)
                .ok_or_else(|| self.err(format!("index {i} out of range")))? = true;
        }

        let tokens = self.keyed("support_vectors")?;
        let count: usize = match tokens.as_slice() {
            [n] => n.parse().map_err(|_| self.err("bad support vector count"))?,
            _ => return Err(self.err("expected support vector count")),
        };
        let mut support_xs = Vec::with_capacity(count);
        let mut coeffs = Vec::with_capacity(count);
        for _ in 0..count {
            let line = self.next_line()?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let vals = self.floats(&tokens, dim + 1)?;
            coeffs.push(vals[0]);
            support_xs.push(vals[1..].to_vec());
        }
        let tokens = self.keyed("bias")?;
        let bias = self.floats(&tokens, 1)?[0];
        let svm = SvmModel::from_parts(support_xs, coeffs, bias, gamma, c, dim)
            .map_err(|e| self.err(e.to_string()))?;
        Ok(StackModel {
            spec,
            standardizer: Standardizer {
                means,
                stds,
                zero_variance,
            },
            svm,
            hyper: StackHyper {
                c,
                gamma: Some(gamma),
                tol,
                max_passes,
                swap_augment,
            },
            seed,
            format_version: FORMAT_VERSION,
        })
    }
}
