//! Soft-margin binary SVM with an RBF kernel, trained by sequential minimal
//! optimization.

mod kernel;
mod smo;

pub use self::kernel::rbf;
pub use self::smo::{smo_train, train_detailed, SmoReport};

use crate::error::{Error, Result};

/// Labelled training vectors with labels in `{+1, -1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSet {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl TrainSet {
    /// Validates shape, labels and finiteness. Class balance is checked at
    /// training time.
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                found: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "training set needs at least 2 samples, got {}",
                xs.len()
            )));
        }
        let dim = xs[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("zero-dimensional features".into()));
        }
        for (i, x) in xs.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
            if let Some(d) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { sample: i, dim: d });
            }
        }
        if let Some(y) = ys.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidArgument(format!("label {y} is not +1 or -1")));
        }
        Ok(Self { xs, ys })
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    /// Box constraint.
    pub c: f64,
    pub gamma: f64,
    /// KKT tolerance.
    pub tol: f64,
    /// Consecutive sweeps without objective progress before giving up.
    pub max_passes: usize,
    pub seed: u64,
}

impl SvmParams {
    pub const DEFAULT_C: f64 = 1.0;
    pub const DEFAULT_TOL: f64 = 1e-3;
    pub const DEFAULT_MAX_PASSES: usize = 200;

    pub fn new(gamma: f64) -> Self {
        Self {
            c: Self::DEFAULT_C,
            gamma,
            tol: Self::DEFAULT_TOL,
            max_passes: Self::DEFAULT_MAX_PASSES,
            seed: 0,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (name, v) in [("C", self.c), ("gamma", self.gamma), ("tol", self.tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidArgument("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// `1 / (d * v)` where `v` is the mean per-dimension variance of `xs`.
/// Falls back to `1 / d` when every dimension is constant.
pub fn scale_gamma(xs: &[Vec<f64>]) -> f64 {
    let d = xs.first().map_or(1, Vec::len).max(1);
    let n = xs.len() as f64;
    let mut total = 0.0;
    for k in 0..d {
        let mean = xs.iter().map(|x| x[k]).sum::<f64>() / n;
        total += xs.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / n;
    }
    let var = total / d as f64;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0 / d as f64
    }
}

/// Trained decision function `f(x) = sum coeff_i K(x, sv_i) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    support_xs: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    coeffs: Vec<f64>,
    bias: f64,
    gamma: f64,
    c: f64,
    dim: usize,
}

impl SvmModel {
    pub fn from_parts(
        support_xs: Vec<Vec<f64>>,
        coeffs: Vec<f64>,
        bias: f64,
        gamma: f64,
        c: f64,
        dim: usize,
    ) -> Result<Self> {
        if support_xs.len() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: support_xs.len(),
                found: coeffs.len(),
            });
        }
        if let Some(x) = support_xs.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if !(gamma > 0.0 && c > 0.0 && bias.is_finite()) {
            return Err(Error::InvalidArgument("invalid SVM parameters".into()));
        }
        Ok(Self {
            support_xs,
            coeffs,
            bias,
            gamma,
            c,
            dim,
        })
    }

    pub fn support_xs(&self) -> &[Vec<f64>] {
        &self.support_xs
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let sum: f64 = self
            .support_xs
            .iter()
            .zip(&self.coeffs)
            .map(|(sv, a)| a * rbf(x, sv, self.gamma))
            .sum();
        Ok(sum + self.bias)
    }

    /// `+1` when the decision value is `>= 0`, else `-1`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(label_of(self.decision(x)?))
    }
}

pub(crate) fn label_of(decision: f64) -> f64 {
    if decision >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Dual objective `sum a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij`.
pub fn dual_objective(ts: &TrainSet, alphas: &[f64], gamma: f64) -> f64 {
    let (xs, ys) = (ts.xs(), ts.ys());
    let mut quad = 0.0;
    for i in 0..xs.len() {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..xs.len() {
            if alphas[j] != 0.0 {
                quad += alphas[i] * alphas[j] * ys[i] * ys[j] * rbf(&xs[i], &xs[j], gamma);
            }
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Per-sample KKT violation of a dual solution with bias `bias`: zero when
/// the sample satisfies its complementary-slackness condition exactly.
pub fn kkt_violations(ts: &TrainSet, alphas: &[f64], bias: f64, gamma: f64, c: f64) -> Vec<f64> {
    let (xs, ys) = (ts.xs(), ts.ys());
    (0..xs.len())
        .map(|i| {
            let f: f64 = (0..xs.len())
                .filter(|&j| alphas[j] != 0.0)
                .map(|j| alphas[j] * ys[j] * rbf(&xs[i], &xs[j], gamma))
                .sum::<f64>()
                + bias;
            let margin = ys[i] * f - 1.0;
            if alphas[i] <= 0.0 {
                (-margin).max(0.0)
            } else if alphas[i] >= c {
                margin.max(0.0)
            } else {
                margin.abs()
            }
        })
        .collect()
}
