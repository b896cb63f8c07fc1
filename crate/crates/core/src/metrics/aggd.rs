use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const SHAPE_MIN: f64 = 0.2;
const SHAPE_MAX: f64 = 10.0;
const SHAPE_TOL: f64 = 1e-6;

/// Moment-matched asymmetric generalized Gaussian parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggdFit {
    pub shape: f64,
    pub left_scale: f64,
    pub right_scale: f64,
    /// Distribution mean, `(right - left) * G(2/a) / G(1/a)`.
    pub mean: f64,
}

impl AggdFit {
    /// Standard deviation implied for the negative half.
    pub fn left_std(&self) -> f64 {
        self.left_scale * scale_to_std(self.shape)
    }

    pub fn right_std(&self) -> f64 {
        self.right_scale * scale_to_std(self.shape)
    }
}

fn scale_to_std(shape: f64) -> f64 {
    (0.5 * (ln_gamma(3.0 / shape) - ln_gamma(1.0 / shape))).exp()
}

/// `G(2/g)^2 / (G(1/g) G(3/g))`, increasing in `g`.
fn moment_ratio(g: f64) -> f64 {
    (2.0 * ln_gamma(2.0 / g) - ln_gamma(1.0 / g) - ln_gamma(3.0 / g)).exp()
}

/// Fits an AGGD by matching the left/right second moments and the
/// generalized Gaussian ratio, inverting the ratio by bisection on
/// `[0.2, 10]`.
pub fn fit_aggd(samples: &[f64]) -> Result<AggdFit> {
    if samples.len() < 16 {
        return Err(Error::DegenerateSamples(format!(
            "{} samples, at least 16 required",
            samples.len()
        )));
    }
    let (mut lsum, mut lcount, mut rsum, mut rcount) = (0.0, 0usize, 0.0, 0usize);
    let (mut abs_sum, mut sq_sum) = (0.0, 0.0);
    let first = samples[0];
    let mut all_equal = true;
    for &v in samples {
        if !v.is_finite() {
            return Err(Error::DegenerateSamples("non-finite sample".into()));
        }
        all_equal &= v == first;
        if v < 0.0 {
            lsum += v * v;
            lcount += 1;
        } else if v > 0.0 {
            rsum += v * v;
            rcount += 1;
        }
        abs_sum += v.abs();
        sq_sum += v * v;
    }
    if all_equal {
        return Err(Error::DegenerateSamples("all samples identical".into()));
    }
    if lcount == 0 || rcount == 0 {
        return Err(Error::DegenerateSamples("samples lie on one side of zero".into()));
    }
    let n = samples.len() as f64;
    let left_std = (lsum / lcount as f64).sqrt();
    let right_std = (rsum / rcount as f64).sqrt();
    let gamma_hat = left_std / right_std;
    let r_hat = (abs_sum / n).powi(2) / (sq_sum / n);
    let r_norm = r_hat * (gamma_hat.powi(3) + 1.0) * (gamma_hat + 1.0) / (gamma_hat.powi(2) + 1.0).powi(2);

    let shape = invert_ratio(r_norm);
    let to_scale = 1.0 / scale_to_std(shape);
    let left_scale = left_std * to_scale;
    let right_scale = right_std * to_scale;
    let mean = (right_scale - left_scale) * (ln_gamma(2.0 / shape) - ln_gamma(1.0 / shape)).exp();
    Ok(AggdFit {
        shape,
        left_scale,
        right_scale,
        mean,
    })
}

fn invert_ratio(target: f64) -> f64 {
    let (mut lo, mut hi) = (SHAPE_MIN, SHAPE_MAX);
    if target <= moment_ratio(lo) {
        return lo;
    }
    if target >= moment_ratio(hi) {
        return hi;
    }
    while hi - lo > SHAPE_TOL {
        let mid = 0.5 * (lo + hi);
        if moment_ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
