//! Oracles, fixtures and the acceptance criteria shared by the integration
//! test targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use stackiqa::evalkit::{
    cross_validate, median, report, single_metric_accuracy, subset_search, supporter_matrix, synthetic, CvConfig,
    SubsetSearch, TiePolicy,
};
use stackiqa::metrics::{fit_aggd, niqe, psnr, ssim, NiqePristineModel};
use stackiqa::pairset::{load_image, Image, PairRecord, ScoreCache, Side};
use stackiqa::stacker::{swap_features, train_stack, FeatureSpec, StackHyper};
use stackiqa::svm::{dual_objective, kkt_violations, rbf, train_detailed, SvmParams, TrainSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub const FIXTURES: [&str; 5] = ["camera", "coins", "grass", "moon", "motorcycle_right"];
pub const NOISE_LEVELS: [f64; 4] = [5.0, 10.0, 20.0, 40.0];

/// Gray image with uniform random pixels.
pub fn random_gray(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Image {
    let data = (0..width * height).map(|_| rng.random::<u8>()).collect();
    Image::gray(width, height, data).unwrap()
}

pub fn random_rgb(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Image {
    let data = (0..width * height * 3).map(|_| rng.random::<u8>()).collect();
    Image::rgb(width, height, data).unwrap()
}

/// Gray copy of `img` with additive Gaussian noise, rounded and clamped to 8 bits.
pub fn with_noise(img: &Image, sigma: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let data = img
        .luma()
        .iter()
        .map(|v| (v.round() + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
        .collect();
    Image::gray(img.width(), img.height(), data).unwrap()
}

/// SSIM straight from the definition: every valid 11x11 window, explicit
/// 2-D Gaussian weights, statistics accumulated per window.
pub fn naive_ssim(x: &Image, y: &Image) -> f64 {
    let (w, h) = (x.width(), x.height());
    let win = 11usize;
    let sigma = 1.5f64;
    let mut g: Vec<f64> = (0..win)
        .map(|i| {
            let d = i as f64 - 5.0;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let (lx, ly) = (x.luma(), y.luma());
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=h - win {
        for c in 0..=w - win {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..win {
                for j in 0..win {
                    let wt = g[i] * g[j];
                    let a = lx[(r + i) * w + c + j];
                    let b = ly[(r + i) * w + c + j];
                    mx += wt * a;
                    my += wt * b;
                    xx += wt * a * a;
                    yy += wt * b * b;
                    xy += wt * a * b;
                }
            }
            let (vx, vy, cxy) = (xx - mx * mx, yy - my * my, xy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

/// Exact maximizer of the soft-margin SVM dual for a handful of points.
///
/// Every assignment of samples to {at zero, at C, free} is tried. For the
/// free set the stationarity conditions `(Q a)_i + b y_i = 1` together with
/// `sum y_i a_i = 0` form a linear system, solved by SVD least squares.
/// Feasible candidates are scored with the dual objective and the best is
/// returned with its multipliers.
pub fn qp_oracle(xs: &[Vec<f64>], ys: &[f64], c: f64, gamma: f64) -> (f64, Vec<f64>) {
    let n = xs.len();
    let q = DMatrix::from_fn(n, n, |i, j| ys[i] * ys[j] * rbf(&xs[i], &xs[j], gamma));
    let objective = |a: &[f64]| {
        let av = DVector::from_column_slice(a);
        av.sum() - 0.5 * (av.transpose() * &q * &av)[(0, 0)]
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if !free.is_empty() {
            let m = free.len();
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut rhs = DVector::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (k, &j) in free.iter().enumerate() {
                    a[(r, k)] = q[(i, j)];
                }
                a[(r, m)] = ys[i];
                let fixed: f64 = (0..n).filter(|&j| state[j] == 1).map(|j| q[(i, j)] * c).sum();
                rhs[r] = 1.0 - fixed;
            }
            for (k, &j) in free.iter().enumerate() {
                a[(m, k)] = ys[j];
            }
            rhs[m] = -(0..n).filter(|&j| state[j] == 1).map(|j| ys[j] * c).sum::<f64>();
            let Ok(sol) = a.clone().svd(true, true).solve(&rhs, 1e-12) else {
                continue;
            };
            if (&a * &sol - &rhs).amax() > 1e-9 {
                continue;
            }
            for (k, &i) in free.iter().enumerate() {
                alpha[i] = sol[k];
            }
        }
        let eq: f64 = alpha.iter().zip(ys).map(|(a, y)| a * y).sum();
        if eq.abs() > 1e-9 || alpha.iter().any(|&a| a < -1e-12 || a > c + 1e-12) {
            continue;
        }
        let obj = objective(&alpha);
        if best.as_ref().is_none_or(|(b, _)| obj > *b) {
            best = Some((obj, alpha));
        }
    }
    best.expect("all-zero multipliers are always feasible")
}

/// A random training set of 2 to 4 points in the plane with both labels.
pub fn random_small_set(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = rng.random_range(2..=4);
    loop {
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)])
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        if ys.contains(&1.0) && ys.contains(&-1.0) {
            return (xs, ys);
        }
    }
}

/// Pairs and cache with `k` metrics named `m00..`, scores drawn per pair.
pub fn random_scored_pairs(seed: u64, n: usize, k: usize) -> (Vec<PairRecord>, ScoreCache, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..k).map(|m| format!("m{m:02}")).collect();
    let mut pairs = Vec::new();
    let mut cache = ScoreCache::new();
    for i in 0..n {
        let gap: f64 = rng.random_range(-1.0..1.0);
        let pair_id = format!("r{i:04}");
        for id in &ids {
            let noise = rng.random_range(0.2..1.5);
            cache.put(&pair_id, Side::A, id, gap + noise * rng.random_range(-1.0..1.0)).unwrap();
            cache.put(&pair_id, Side::B, id, -gap + noise * rng.random_range(-1.0..1.0)).unwrap();
        }
        pairs.push(PairRecord {
            pair_id,
            ref_path: PathBuf::from(format!("ref{}.png", i % 9)),
            a_path: PathBuf::from("a.png"),
            b_path: PathBuf::from("b.png"),
            p_a: if gap > 0.0 { 0.75 } else { 0.25 },
        });
    }
    (pairs, cache, ids)
}

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Self { name, pass, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }

    pub fn assert(&self) {
        assert!(self.pass, "{}", self.line());
    }
}

pub fn check_svm_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_obj, mut worst_kkt) = (0.0f64, 0.0f64);
    let tol = 1e-6;
    for set in 0..50u64 {
        let (xs, ys) = random_small_set(&mut rng);
        let c = [0.5, 1.0, 10.0][rng.random_range(0..3)];
        let gamma = rng.random_range(0.1..2.0);
        let ts = TrainSet::new(xs.clone(), ys.clone()).unwrap();
        let params = SvmParams {
            c,
            gamma,
            tol,
            max_passes: 200,
            seed: set,
        };
        let (_, rep) = train_detailed(&ts, &params).unwrap();
        let (oracle, _) = qp_oracle(&xs, &ys, c, gamma);
        let obj = dual_objective(&ts, &rep.alphas, gamma);
        worst_obj = worst_obj.max((obj - oracle).abs());
        let kkt = kkt_violations(&ts, &rep.alphas, rep.bias, gamma, c);
        worst_kkt = worst_kkt.max(kkt.into_iter().fold(0.0, f64::max));
    }
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        "svm oracle equivalence",
        worst_obj <= 1e-6 && worst_kkt <= tol && secs < 10.0,
        format!("max |objective gap| {worst_obj:.3e} (<= 1e-6), max KKT residual {worst_kkt:.3e} (<= {tol:e}), {secs:.2}s (< 10s)"),
    )
}

pub fn check_metric_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut identity_ok = true;
    let mut worst_oracle = 0.0f64;
    for i in 0..20 {
        let (w, h) = (rng.random_range(11..48), rng.random_range(11..48));
        let img = if i % 2 == 0 {
            random_gray(&mut rng, w, h)
        } else {
            random_rgb(&mut rng, w, h)
        };
        identity_ok &= ssim(&img, &img).unwrap() == 1.0;
        identity_ok &= psnr(&img, &img).unwrap() == f64::INFINITY;
        let other = random_gray(&mut rng, w, h);
        worst_oracle = worst_oracle.max((ssim(&img, &other).unwrap() - naive_ssim(&img, &other)).abs());
    }
    let base: Vec<u8> = (0..64 * 64).map(|i| (i % 200) as u8).collect();
    let x = Image::gray(64, 64, base.clone()).unwrap();
    let y1 = Image::gray(64, 64, base.iter().map(|v| v + 1).collect()).unwrap();
    let y10 = Image::gray(64, 64, base.iter().map(|v| v + 10).collect()).unwrap();
    let p1 = psnr(&x, &y1).unwrap();
    let p10 = psnr(&x, &y10).unwrap();
    let psnr_ok = (p1 - 48.1308).abs() <= 1e-3 && (p10 - 28.1308).abs() <= 1e-3;
    Check::new(
        "metric identities",
        identity_ok && worst_oracle <= 1e-9 && psnr_ok,
        format!(
            "ssim(x,x)=1 and psnr(x,x)=inf on 20 images: {identity_ok}; max |ssim - naive| {worst_oracle:.2e} (<= 1e-9); psnr MSE=1 {p1:.4} dB, MSE=100 {p10:.4} dB (+-1e-3)"
        ),
    )
}

/// NIQE of each fixture at every noise level, pristine first.
pub fn niqe_noise_table() -> Vec<(String, Vec<f64>)> {
    let model = NiqePristineModel::builtin();
    FIXTURES
        .iter()
        .map(|name| {
            let img = load_image(fixture_dir().join(format!("{name}.png"))).unwrap();
            let mut row = vec![niqe(&img, &model).unwrap()];
            for (k, &sigma) in NOISE_LEVELS.iter().enumerate() {
                row.push(niqe(&with_noise(&img, sigma, k as u64 + 1), &model).unwrap());
            }
            (name.to_string(), row)
        })
        .collect()
}

pub fn check_niqe_ordering() -> Check {
    let start = Instant::now();
    let table = niqe_noise_table();
    let secs = start.elapsed().as_secs_f64();
    let increasing = table
        .iter()
        .filter(|(_, r)| r[1..].windows(2).all(|w| w[1] > w[0]))
        .count();
    let pristine_lowest = table.iter().all(|(_, r)| r[1..].iter().all(|&v| v > r[0]));
    let rows: Vec<String> = table
        .iter()
        .map(|(n, r)| format!("{n} [{}]", r.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ")))
        .collect();
    Check::new(
        "niqe noise ordering",
        increasing >= 4 && pristine_lowest && secs < 60.0,
        format!(
            "{increasing}/5 strictly increasing (>= 4), pristine lowest for all: {pristine_lowest}, {secs:.1}s (< 60s); {}",
            rows.join("; ")
        ),
    )
}

pub fn check_aggd() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let gauss: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
    let laplace: Vec<f64> = (0..100_000)
        .map(|_| {
            let u: f64 = rng.random_range(-0.5..0.5);
            -u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect();
    let g = fit_aggd(&gauss).unwrap().shape;
    let l = fit_aggd(&laplace).unwrap().shape;
    Check::new(
        "aggd shape fits",
        (g - 2.0).abs() <= 0.1 && (l - 1.0).abs() <= 0.1,
        format!("gaussian alpha {g:.4} (2 +- 0.1), laplacian alpha {l:.4} (1 +- 0.1), n=1e5"),
    )
}

pub fn check_antisymmetry() -> Check {
    let ds = synthetic::generate(300, 5);
    let ids = ["syn_a", "syn_b", "syn_c", "syn_d"];
    let spec = FeatureSpec::from_ids(&ids).unwrap();
    let hyper = StackHyper::default();
    let model = train_stack(&ds.pairs, &spec, &ds.cache, &hyper, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let pair = &ds.pairs[i % ds.pairs.len()];
        let mut x = stackiqa::stacker::build_features(pair, &spec, &ds.cache).unwrap();
        if i >= 100 {
            for v in x.iter_mut() {
                *v *= rng.random_range(0.5..1.5);
            }
        }
        let f = model.decision(&x).unwrap();
        let g = model.decision(&swap_features(&x).unwrap()).unwrap();
        worst = worst.max((f + g).abs());
    }
    let bound = 10.0 * hyper.tol;
    Check::new(
        "stack antisymmetry",
        worst <= bound,
        format!("max |f(x) + f(swap x)| over 200 probes {worst:.3e} (<= {bound:e})"),
    )
}

pub fn check_protocol_arithmetic() -> Check {
    let (pairs, cache, ids) = random_scored_pairs(3, 60, 3);
    let spec = FeatureSpec::from_ids(&ids).unwrap();
    let cfg = CvConfig {
        cycles: 4,
        ..CvConfig::default()
    };
    let rep = cross_validate(&pairs, &spec, &cache, &cfg, &StackHyper::default()).unwrap();
    let accs: Vec<f64> = rep.cycles.iter().map(|c| c.accuracy).collect();
    let median_ok = Some(rep.median_accuracy) == median(&accs);

    let (pairs15, cache15, ids15) = random_scored_pairs(4, 30, 15);
    let one_cycle = CvConfig {
        cycles: 1,
        ..CvConfig::default()
    };
    let search = subset_search(&ids15, &[4], &pairs15, &cache15, &one_cycle, &StackHyper::default()).unwrap();
    let n_subsets = search.results.len();
    let mut distinct: Vec<&Vec<String>> = search.results.iter().map(|r| &r.metric_ids).collect();
    distinct.sort();
    distinct.dedup();

    let regs: Vec<_> = ids15
        .iter()
        .map(|id| {
            stackiqa::metrics::MetricDescriptor::external(
                id.as_str(),
                stackiqa::metrics::MetricKind::FullReference,
                stackiqa::metrics::Polarity::HigherBetter,
            )
        })
        .collect();
    let refs: Vec<_> = regs.iter().collect();
    let matrix = supporter_matrix(&refs, &pairs15, &cache15, TiePolicy::Exclude).unwrap();
    let mut cells = 0;
    let mut integral = true;
    for s in 0..15 {
        for t in 0..15 {
            if let Some(c) = matrix.cell(s, t) {
                cells += 1;
                let hits = c.accuracy * c.count as f64;
                integral &= (hits - hits.round()).abs() < 1e-9;
            }
        }
    }
    Check::new(
        "protocol arithmetic",
        median_ok && n_subsets == 1365 && distinct.len() == 1365 && integral && cells > 0,
        format!(
            "reported median equals median of cycles: {median_ok}; 15-id pool at size 4 gives {n_subsets} subsets ({} distinct, expect 1365); accuracy*count integral over {cells} cells: {integral}",
            distinct.len()
        ),
    )
}

/// Best median of each size, sizes 1.. in order.
pub fn best_curve(search: &SubsetSearch) -> Vec<f64> {
    search.best_per_size().iter().map(|r| r.median_accuracy()).collect()
}

/// Rises (within two points per step) up to the plateau size, gains at
/// least three points overall, and stays within two points of the plateau
/// value afterwards.
pub fn plateaus(curve: &[f64], plateau_size: usize) -> bool {
    let eps = 1e-9;
    let p = plateau_size - 1;
    let rising = curve[..=p].windows(2).all(|w| w[1] >= w[0] - 0.02 - eps) && curve[p] - curve[0] >= 0.03 - eps;
    let flat = curve[p..].iter().all(|v| (v - curve[p]).abs() <= 0.02 + eps);
    rising && flat
}

pub fn check_synthetic_end_to_end() -> Check {
    let ds = synthetic::generate(500, 42);
    let ids = ds.metric_ids();
    let best_single = ds
        .metrics
        .iter()
        .map(|m| single_metric_accuracy(m, &ds.pairs, &ds.cache, TiePolicy::Exclude).unwrap().accuracy)
        .fold(0.0, f64::max);
    let start = Instant::now();
    let search = subset_search(
        &ids,
        &[1, 2, 3, 4, 5, 6],
        &ds.pairs,
        &ds.cache,
        &CvConfig::default(),
        &StackHyper::default(),
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let curve = best_curve(&search);
    let best4 = curve[3];
    let margin = best4 - best_single;
    let flat = plateaus(&curve, 4);
    Check::new(
        "synthetic end-to-end",
        margin >= 0.03 - 1e-9 && flat && search.results.len() == 63 && secs < 120.0,
        format!(
            "best single {best_single:.3}, best 4-metric median {best4:.3} (margin {:.1} points, >= 3); best per size [{}] plateaus at 4: {flat}; {} subsets x 5 cycles in {secs:.1}s (< 120s)",
            margin * 100.0,
            curve.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" "),
            search.results.len()
        ),
    )
}

/// Renders every report for the synthetic dataset into one byte buffer.
pub fn synthetic_report_bytes(seed: u64) -> Vec<u8> {
    let ds = synthetic::generate(120, seed);
    let ids = ds.metric_ids();
    let mut out = Vec::new();
    let baselines: Vec<_> = ds
        .metrics
        .iter()
        .map(|m| single_metric_accuracy(m, &ds.pairs, &ds.cache, TiePolicy::Exclude).unwrap())
        .collect();
    report::write_baselines(&baselines, &mut out).unwrap();
    let cfg = CvConfig {
        seed,
        ..CvConfig::default()
    };
    let search = subset_search(&ids, &[1, 2, 3], &ds.pairs, &ds.cache, &cfg, &StackHyper::default()).unwrap();
    report::write_subset_search(&search, &mut out).unwrap();
    report::write_subset_best(&search, &mut out).unwrap();
    report::write_cv_report(&search.results[0].report, &mut out).unwrap();
    out.extend(report::subset_scatter_svg(&search).into_bytes());
    let refs: Vec<_> = ds.metrics.iter().collect();
    let matrix = supporter_matrix(&refs, &ds.pairs, &ds.cache, TiePolicy::Exclude).unwrap();
    report::write_supporters(&matrix, &mut out).unwrap();
    out.extend(report::supporter_heatmap_svg(&matrix).into_bytes());
    let spec = FeatureSpec::from_ids(&ids[..4]).unwrap();
    let model = train_stack(&ds.pairs, &spec, &ds.cache, &StackHyper::default(), seed).unwrap();
    out.extend(model.to_text().into_bytes());
    ds.cache.write(&mut out).unwrap();
    out
}

pub fn check_determinism() -> Check {
    let a = synthetic_report_bytes(42);
    let b = synthetic_report_bytes(42);
    let c = synthetic_report_bytes(43);
    Check::new(
        "determinism",
        a == b && a != c,
        format!(
            "reports, model and cache rerun with the same seed are byte-identical: {}; a different seed changes them: {} ({} bytes)",
            a == b,
            a != c,
            a.len()
        ),
    )
}
