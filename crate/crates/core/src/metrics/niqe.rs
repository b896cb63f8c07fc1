//! Natural image quality evaluator.
//!
//! Each image is cropped to whole patches and analysed at two scales (the
//! second one a 2x2 box-average downsample). Per scale, the MSCN plane of a
//! patch yields 18 AGGD features: shape and mean scale of the coefficients,
//! then shape, mean, left and right scale of the products with the four
//! neighbouring orientations. The score is the Mahalanobis-style distance
//! between the patch-feature Gaussian of the test image and a pristine
//! model.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::aggd::fit_aggd;
use super::filter::{filter_replicate, gaussian_taps};
use crate::error::{Error, Result};
use crate::pairset::Image;

pub const NIQE_FEATURES: usize = 36;
const PER_SCALE: usize = NIQE_FEATURES / 2;
const MSCN_WINDOW: usize = 7;
const MSCN_SIGMA: f64 = 7.0 / 6.0;
const MODEL_HEADER: &str = "niqe-model v1";
const BUILTIN_MODEL: &str = include_str!("../../data/niqe_pristine.model");

/// Multivariate Gaussian of pristine patch features.
#[derive(Debug, Clone, PartialEq)]
pub struct NiqePristineModel {
    mean: Vec<f64>,
    /// Row-major 36x36.
    cov: Vec<f64>,
    patch_size: usize,
    sharpness_fraction: f64,
}

fn check_patch_size(patch_size: usize) -> Result<()> {
    if patch_size < 8 || !patch_size.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "patch size {patch_size} must be even and at least 8"
        )));
    }
    Ok(())
}

impl NiqePristineModel {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>, patch_size: usize, sharpness_fraction: f64) -> Result<Self> {
        check_patch_size(patch_size)?;
        if mean.len() != NIQE_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: NIQE_FEATURES,
                found: mean.len(),
            });
        }
        if cov.len() != NIQE_FEATURES * NIQE_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: NIQE_FEATURES * NIQE_FEATURES,
                found: cov.len(),
            });
        }
        if !(0.0..1.0).contains(&sharpness_fraction) {
            return Err(Error::InvalidArgument(format!(
                "sharpness fraction {sharpness_fraction} outside [0, 1)"
            )));
        }
        if mean.iter().chain(&cov).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite model parameter".into()));
        }
        for i in 0..NIQE_FEATURES {
            for j in 0..i {
                let (a, b) = (cov[i * NIQE_FEATURES + j], cov[j * NIQE_FEATURES + i]);
                if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidArgument(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            mean,
            cov,
            patch_size,
            sharpness_fraction,
        })
    }

    /// The model shipped with the crate, fitted on public-domain photographs.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_MODEL.as_bytes()).expect("bundled NIQE model is valid")
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn sharpness_fraction(&self) -> f64 {
        self.sharpness_fraction
    }

    pub fn parse(mut reader: impl Read) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::ModelFormat {
                line: 0,
                message: e.to_string(),
            })?;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::ModelFormat {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            })
        };
        let (_, header) = next("header")?;
        if header != MODEL_HEADER {
            return Err(Error::ModelFormat {
                line: 1,
                message: format!("expected `{MODEL_HEADER}`"),
            });
        }
        let (line, params) = next("patch size and sharpness fraction")?;
        let params: Vec<&str> = params.split_whitespace().collect();
        let bad = |line: usize, message: String| Error::ModelFormat { line, message };
        if params.len() != 2 {
            return Err(bad(line, "expected `patch_size sharpness_fraction`".into()));
        }
        let patch_size: usize = params[0]
            .parse()
            .map_err(|_| bad(line, format!("bad patch size `{}`", params[0])))?;
        let fraction: f64 = params[1]
            .parse()
            .map_err(|_| bad(line, format!("bad sharpness fraction `{}`", params[1])))?;

        let parse_row = |line: usize, text: &str| -> Result<Vec<f64>> {
            let row = text
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(line, e.to_string()))?;
            if row.len() != NIQE_FEATURES {
                return Err(bad(line, format!("expected {NIQE_FEATURES} values, found {}", row.len())));
            }
            Ok(row)
        };
        let (line, means) = next("mean vector")?;
        let mean = parse_row(line, means)?;
        let mut cov = Vec::with_capacity(NIQE_FEATURES * NIQE_FEATURES);
        for _ in 0..NIQE_FEATURES {
            let (line, row) = next("covariance row")?;
            cov.extend(parse_row(line, row)?);
        }
        Self::new(mean, cov, patch_size, fraction)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file)
    }

    pub fn to_text(&self) -> String {
        let row = |vals: &[f64]| {
            vals.iter()
                .map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = format!(
            "{MODEL_HEADER}\n{} {:.17e}\n{}\n",
            self.patch_size,
            self.sharpness_fraction,
            row(&self.mean)
        );
        for r in self.cov.chunks(NIQE_FEATURES) {
            out.push_str(&row(r));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Mean-subtracted contrast-normalized coefficients of a luma plane, and the
/// local standard deviation map used for them.
pub fn mscn(luma: &[f64], width: usize, height: usize) -> (Vec<f64>, Vec<f64>) {
    let taps = gaussian_taps(MSCN_WINDOW, MSCN_SIGMA);
    let mu = filter_replicate(luma, width, height, &taps);
    let sq: Vec<f64> = luma.iter().map(|v| v * v).collect();
    let mu_sq = filter_replicate(&sq, width, height, &taps);
    let sigma: Vec<f64> = mu
        .iter()
        .zip(&mu_sq)
        .map(|(m, s)| (s - m * m).abs().sqrt())
        .collect();
    let coeffs = luma
        .iter()
        .zip(&mu)
        .zip(&sigma)
        .map(|((v, m), s)| (v - m) / (s + 1.0))
        .collect();
    (coeffs, sigma)
}

/// Features of one patch, with its grid position and sharpness.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatures {
    /// Patch column index.
    pub col: usize,
    /// Patch row index.
    pub row: usize,
    /// Mean local standard deviation over the patch at full scale.
    pub sharpness: f64,
    pub features: [f64; NIQE_FEATURES],
}

/// Computes features for every non-overlapping patch of the plane (cropped to
/// whole patches). Patches whose AGGD fits are degenerate, such as perfectly
/// flat ones, are skipped.
pub fn patch_features(
    luma: &[f64],
    width: usize,
    height: usize,
    patch_size: usize,
) -> Result<Vec<PatchFeatures>> {
    check_patch_size(patch_size)?;
    if luma.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            found: luma.len(),
        });
    }
    let (cols, rows) = (width / patch_size, height / patch_size);
    if cols == 0 || rows == 0 {
        return Err(Error::ImageTooSmall {
            width,
            height,
            min_width: patch_size,
            min_height: patch_size,
        });
    }
    let (cw, ch) = (cols * patch_size, rows * patch_size);
    let cropped: Vec<f64> = (0..ch)
        .flat_map(|y| luma[y * width..y * width + cw].iter().copied())
        .collect();
    let (hw, hh) = (cw / 2, ch / 2);
    let half: Vec<f64> = (0..hh)
        .flat_map(|y| {
            let cropped = &cropped;
            (0..hw).map(move |x| {
                let i = 2 * y * cw + 2 * x;
                0.25 * (cropped[i] + cropped[i + 1] + cropped[i + cw] + cropped[i + cw + 1])
            })
        })
        .collect();

    let (mscn1, sigma1) = mscn(&cropped, cw, ch);
    let (mscn2, _) = mscn(&half, hw, hh);
    let half_patch = patch_size / 2;

    let mut out = Vec::with_capacity(cols * rows);
    for row in 0..rows {
        for col in 0..cols {
            let block1 = extract(&mscn1, cw, col * patch_size, row * patch_size, patch_size);
            let block2 = extract(&mscn2, hw, col * half_patch, row * half_patch, half_patch);
            let sigma_block = extract(&sigma1, cw, col * patch_size, row * patch_size, patch_size);
            let sharpness = sigma_block.iter().sum::<f64>() / sigma_block.len() as f64;
            let mut features = [0.0; NIQE_FEATURES];
            let ok = scale_features(&block1, patch_size, &mut features[..PER_SCALE]).is_ok()
                && scale_features(&block2, half_patch, &mut features[PER_SCALE..]).is_ok();
            if ok {
                out.push(PatchFeatures {
                    col,
                    row,
                    sharpness,
                    features,
                });
            }
        }
    }
    Ok(out)
}

fn extract(plane: &[f64], stride: usize, x0: usize, y0: usize, size: usize) -> Vec<f64> {
    (y0..y0 + size)
        .flat_map(|y| plane[y * stride + x0..y * stride + x0 + size].iter().copied())
        .collect()
}

fn scale_features(block: &[f64], size: usize, out: &mut [f64]) -> Result<()> {
    // Flat regions leave only filter round-off in the coefficients.
    if block.iter().all(|v| v.abs() < 1e-6) {
        return Err(Error::DegenerateSamples("flat patch".into()));
    }
    let fit = fit_aggd(block)?;
    out[0] = fit.shape;
    out[1] = 0.5 * (fit.left_scale + fit.right_scale);
    const SHIFTS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];
    let n = size as isize;
    let mut product = vec![0.0; block.len()];
    for (k, (dy, dx)) in SHIFTS.iter().enumerate() {
        for y in 0..n {
            let sy = (y - dy).rem_euclid(n);
            for x in 0..n {
                let sx = (x - dx).rem_euclid(n);
                product[(y * n + x) as usize] = block[(y * n + x) as usize] * block[(sy * n + sx) as usize];
            }
        }
        let fit = fit_aggd(&product)?;
        let o = 2 + 4 * k;
        out[o] = fit.shape;
        out[o + 1] = fit.mean;
        out[o + 2] = fit.left_scale;
        out[o + 3] = fit.right_scale;
    }
    Ok(())
}

/// Keeps patches whose sharpness exceeds `fraction` of the sharpest patch.
pub fn select_sharp(patches: &[PatchFeatures], fraction: f64) -> Vec<&PatchFeatures> {
    let max = patches.iter().map(|p| p.sharpness).fold(0.0, f64::max);
    patches
        .iter()
        .filter(|p| p.sharpness > fraction * max)
        .collect()
}

fn mean_and_cov(rows: &[[f64; NIQE_FEATURES]]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; NIQE_FEATURES];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; NIQE_FEATURES * NIQE_FEATURES];
    for r in rows {
        for i in 0..NIQE_FEATURES {
            let di = r[i] - mean[i];
            for j in i..NIQE_FEATURES {
                cov[i * NIQE_FEATURES + j] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..NIQE_FEATURES {
        for j in i..NIQE_FEATURES {
            let v = cov[i * NIQE_FEATURES + j] / (n - 1.0);
            cov[i * NIQE_FEATURES + j] = v;
            cov[j * NIQE_FEATURES + i] = v;
        }
    }
    (mean, cov)
}

/// Fits the pristine feature Gaussian from sharp patches of a corpus.
pub fn fit_pristine_model(
    corpus: &[Image],
    patch_size: usize,
    sharpness_fraction: f64,
) -> Result<NiqePristineModel> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty pristine corpus".into()));
    }
    let mut rows = Vec::new();
    for img in corpus {
        let patches = patch_features(img.luma(), img.width(), img.height(), patch_size)?;
        rows.extend(select_sharp(&patches, sharpness_fraction).into_iter().map(|p| p.features));
    }
    let required = NIQE_FEATURES + 1;
    if rows.len() < required {
        return Err(Error::InsufficientPatches {
            selected: rows.len(),
            required,
        });
    }
    let (mean, cov) = mean_and_cov(&rows);
    NiqePristineModel::new(mean, cov, patch_size, sharpness_fraction)
}

/// `sqrt(d' ((S_model + S_test) / 2)^-1 d)` with `d` the mean difference.
pub fn niqe_distance(model: &NiqePristineModel, test_mean: &[f64], test_cov: &[f64]) -> Result<f64> {
    if test_mean.len() != NIQE_FEATURES || test_cov.len() != NIQE_FEATURES * NIQE_FEATURES {
        return Err(Error::DimensionMismatch {
            expected: NIQE_FEATURES,
            found: test_mean.len(),
        });
    }
    let pooled = DMatrix::from_fn(NIQE_FEATURES, NIQE_FEATURES, |i, j| {
        let k = i * NIQE_FEATURES + j;
        0.5 * (model.cov[k] + test_cov[k])
    });
    let diff = DVector::from_fn(NIQE_FEATURES, |i, _| model.mean[i] - test_mean[i]);
    let chol = match pooled.clone().cholesky() {
        Some(c) => c,
        None => {
            let ridge = 1e-8 * pooled.trace() / NIQE_FEATURES as f64;
            let mut reg = pooled;
            for i in 0..NIQE_FEATURES {
                reg[(i, i)] += ridge;
            }
            reg.cholesky().ok_or(Error::SingularCovariance)?
        }
    };
    let solved = chol.solve(&diff);
    Ok(diff.dot(&solved).max(0.0).sqrt())
}

/// NIQE of a luma plane. Each dimension must hold at least two patches.
pub fn niqe_luma(luma: &[f64], width: usize, height: usize, model: &NiqePristineModel) -> Result<f64> {
    let p = model.patch_size;
    if width < 2 * p || height < 2 * p {
        return Err(Error::ImageTooSmall {
            width,
            height,
            min_width: 2 * p,
            min_height: 2 * p,
        });
    }
    let patches = patch_features(luma, width, height, p)?;
    if patches.len() < 2 {
        return Err(Error::DegenerateSamples(format!(
            "only {} patches with usable statistics",
            patches.len()
        )));
    }
    let rows: Vec<_> = patches.iter().map(|p| p.features).collect();
    let (mean, cov) = mean_and_cov(&rows);
    niqe_distance(model, &mean, &cov)
}

pub fn niqe(image: &Image, model: &NiqePristineModel) -> Result<f64> {
    niqe_luma(image.luma(), image.width(), image.height(), model)
}
