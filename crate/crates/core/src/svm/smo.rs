//! Platt-style SMO.
//!
//! Sweeps alternate between every sample and the non-bound samples only.
//! For each KKT violator the partner index is first the non-bound sample
//! with the largest error gap; failing that, non-bound and then all samples
//! are tried starting from a position drawn from the seeded generator. The
//! generator is the only source of randomness, so a seed fixes the model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::KernelMatrix;
use super::{SvmModel, SvmParams, TrainSet};
use crate::error::{Error, Result};

/// Smallest alpha change accepted as a step.
const STEP_EPS: f64 = 1e-12;

/// Multipliers within this fraction of C of a bound are placed on it, so
/// rounding residue never makes a bound sample look free.
const BOUND_EPS: f64 = 1e-10;

/// Diagnostics of one SMO run.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoReport {
    /// Final multiplier of every training sample, in input order.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub sweeps: usize,
    pub steps: usize,
    /// False when training stopped on the stall limit.
    pub converged: bool,
}

struct Solver<'a> {
    kernel: KernelMatrix<'a>,
    ys: &'a [f64],
    alphas: Vec<f64>,
    errors: Vec<f64>,
    bias: f64,
    c: f64,
    tol: f64,
    rng: ChaCha8Rng,
    steps: usize,
}

impl Solver<'_> {
    fn n(&self) -> usize {
        self.ys.len()
    }

    fn is_free(&self, i: usize) -> bool {
        self.alphas[i] > 0.0 && self.alphas[i] < self.c
    }

    /// `sum_j a_j y_j K_ij` for every sample, computed from scratch.
    fn kernel_sums(&self) -> Vec<f64> {
        let n = self.n();
        let active: Vec<usize> = (0..n).filter(|&j| self.alphas[j] != 0.0).collect();
        (0..n)
            .map(|i| {
                active
                    .iter()
                    .map(|&j| self.alphas[j] * self.ys[j] * self.kernel.get(i, j))
                    .sum()
            })
            .collect()
    }

    fn refresh_errors(&mut self) {
        let sums = self.kernel_sums();
        for (i, g) in sums.into_iter().enumerate() {
            self.errors[i] = g + self.bias - self.ys[i];
        }
    }

    fn objective(&self) -> f64 {
        // g_i = E_i + y_i - b
        (0..self.n())
            .map(|i| {
                let g = self.errors[i] + self.ys[i] - self.bias;
                self.alphas[i] - 0.5 * self.alphas[i] * self.ys[i] * g
            })
            .sum()
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let c = self.c;
        let (a1_old, a2_old) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.ys[i1], self.ys[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2_old - a1_old).max(0.0), (c + a2_old - a1_old).min(c))
        } else {
            ((a2_old + a1_old - c).max(0.0), (a2_old + a1_old).min(c))
        };
        if lo >= hi {
            return false;
        }
        let k11 = self.kernel.get(i1, i1);
        let k12 = self.kernel.get(i1, i2);
        let k22 = self.kernel.get(i2, i2);
        let eta = k11 + k22 - 2.0 * k12;
        // Objective gain along the constraint line as a function of the
        // change t in a2: y2 (E1 - E2) t - eta t^2 / 2.
        let slope = y2 * (e1 - e2);
        let mut a2 = if eta > 1e-12 {
            (a2_old + slope / eta).clamp(lo, hi)
        } else {
            let gain = |t: f64| slope * t - 0.5 * eta * t * t;
            let (g_lo, g_hi) = (gain(lo - a2_old), gain(hi - a2_old));
            if g_lo > g_hi + 1e-15 {
                lo
            } else if g_hi > g_lo + 1e-15 {
                hi
            } else {
                a2_old
            }
        };
        if (a2 - a2_old).abs() < STEP_EPS * (a2 + a2_old + STEP_EPS) {
            return false;
        }
        let mut a1 = a1_old + s * (a2_old - a2);
        if a1 < 0.0 {
            a2 += s * a1;
            a1 = 0.0;
        } else if a1 > c {
            a2 += s * (a1 - c);
            a1 = c;
        }
        let snap = |a: f64| {
            if a < BOUND_EPS * c {
                0.0
            } else if a > c * (1.0 - BOUND_EPS) {
                c
            } else {
                a
            }
        };
        let a1 = snap(a1);
        let a2 = snap(a2.clamp(0.0, c));

        let d1 = y1 * (a1 - a1_old);
        let d2 = y2 * (a2 - a2_old);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let new_bias = if a1 > 0.0 && a1 < c {
            b1
        } else if a2 > 0.0 && a2 < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_bias - self.bias;
        for i in 0..self.n() {
            self.errors[i] += d1 * self.kernel.get(i1, i) + d2 * self.kernel.get(i2, i) + db;
        }
        self.alphas[i1] = a1;
        self.alphas[i2] = a2;
        self.bias = new_bias;
        self.steps += 1;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.ys[i2];
        let a2 = self.alphas[i2];
        let r2 = self.errors[i2] * y2;
        if !((r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0)) {
            return false;
        }
        let n = self.n();
        let free: Vec<usize> = (0..n).filter(|&i| self.is_free(i)).collect();
        if free.len() > 1 {
            let e2 = self.errors[i2];
            let mut best = None;
            let mut best_gap = -1.0;
            for &i in &free {
                let gap = (self.errors[i] - e2).abs();
                if gap > best_gap {
                    best_gap = gap;
                    best = Some(i);
                }
            }
            if let Some(i1) = best {
                if self.take_step(i1, i2) {
                    return true;
                }
            }
        }
        if !free.is_empty() {
            let start = self.rng.random_range(0..free.len());
            for k in 0..free.len() {
                if self.take_step(free[(start + k) % free.len()], i2) {
                    return true;
                }
            }
        }
        let start = self.rng.random_range(0..n);
        for k in 0..n {
            if self.take_step((start + k) % n, i2) {
                return true;
            }
        }
        false
    }

    /// Bias from the free support vectors, or the midpoint of the interval
    /// allowed by the bound ones.
    fn final_bias(&self, sums: &[f64]) -> f64 {
        let mut free_sum = 0.0;
        let mut free_count = 0usize;
        let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..self.n() {
            let target = self.ys[i] - sums[i];
            if self.is_free(i) {
                free_sum += target;
                free_count += 1;
            } else {
                // a = 0 needs y f >= 1; a = C needs y f <= 1.
                let at_zero = self.alphas[i] <= 0.0;
                let is_lower = (self.ys[i] > 0.0) == at_zero;
                if is_lower {
                    lower = lower.max(target);
                } else {
                    upper = upper.min(target);
                }
            }
        }
        if free_count > 0 {
            free_sum / free_count as f64
        } else if lower.is_finite() && upper.is_finite() {
            0.5 * (lower + upper)
        } else if lower.is_finite() {
            lower
        } else if upper.is_finite() {
            upper
        } else {
            0.0
        }
    }
}

/// Trains and returns the model together with solver diagnostics.
pub fn train_detailed(ts: &TrainSet, params: &SvmParams) -> Result<(SvmModel, SmoReport)> {
    params.validate()?;
    let ys = ts.ys();
    if !(ys.contains(&1.0) && ys.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    let n = ts.len();
    let mut solver = Solver {
        kernel: KernelMatrix::new(ts.xs(), params.gamma),
        ys,
        alphas: vec![0.0; n],
        errors: ys.iter().map(|y| -y).collect(),
        bias: 0.0,
        c: params.c,
        tol: params.tol,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        steps: 0,
    };

    let mut examine_all = true;
    let mut changed = 0usize;
    let mut sweeps = 0usize;
    let mut stalled = 0usize;
    let mut converged = true;
    let mut last_objective = 0.0;
    while changed > 0 || examine_all {
        if examine_all {
            solver.refresh_errors();
        }
        changed = 0;
        for i in 0..n {
            if examine_all || solver.is_free(i) {
                changed += usize::from(solver.examine(i));
            }
        }
        sweeps += 1;
        if examine_all {
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
        let objective = solver.objective();
        if objective - last_objective <= 1e-12 * (1.0 + objective.abs()) {
            stalled += 1;
            if stalled >= params.max_passes {
                converged = false;
                break;
            }
        } else {
            stalled = 0;
        }
        last_objective = objective;
    }

    let sums = solver.kernel_sums();
    let bias = solver.final_bias(&sums);
    solver.bias = bias;
    for i in 0..n {
        solver.errors[i] = sums[i] + bias - ys[i];
    }
    let objective = solver.objective();

    let mut support_xs = Vec::new();
    let mut coeffs = Vec::new();
    for i in 0..n {
        if solver.alphas[i] > 0.0 {
            support_xs.push(ts.xs()[i].clone());
            coeffs.push(solver.alphas[i] * ys[i]);
        }
    }
    let model = SvmModel::from_parts(support_xs, coeffs, bias, params.gamma, params.c, ts.dim())?;
    let report = SmoReport {
        alphas: solver.alphas,
        bias,
        objective,
        sweeps,
        steps: solver.steps,
        converged,
    };
    Ok((model, report))
}

pub fn smo_train(ts: &TrainSet, params: &SvmParams) -> Result<SvmModel> {
    train_detailed(ts, params).map(|(model, _)| model)
}
