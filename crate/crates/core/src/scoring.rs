//! Native scoring of manifest pairs into the score cache.

use crate::error::{Error, Result};
use crate::metrics::{niqe, psnr, ssim, MetricDescriptor, MetricKind, MetricRegistry, NiqePristineModel, Provenance};
use crate::pairset::{load_image, Image, PairRecord, ScoreCache, Side};
use rayon::prelude::*;

/// Computes one native metric. Full-reference metrics compare `candidate`
/// against `reference`; no-reference metrics look at `candidate` alone.
pub fn compute_native(
    metric: &MetricDescriptor,
    reference: Option<&Image>,
    candidate: &Image,
    niqe_model: &NiqePristineModel,
) -> Result<f64> {
    if metric.provenance != Provenance::Native {
        return Err(Error::ExternalMetric(metric.metric_id.clone()));
    }
    let reference = || {
        reference.ok_or_else(|| {
            Error::InvalidArgument(format!("metric `{}` needs a reference image", metric.metric_id))
        })
    };
    match metric.metric_id.as_str() {
        "psnr" => psnr(reference()?, candidate),
        "ssim" => ssim(reference()?, candidate),
        "niqe" => niqe(candidate, niqe_model),
        other => Err(Error::UnknownMetric(other.to_string())),
    }
}

/// Scores every requested native metric for every (pair, side) missing
/// from `cache` and returns how many entries were added. Pairs are
/// processed on the current rayon pool; results are merged in manifest
/// order so the first failure reported is deterministic.
pub fn score_pairs<S: AsRef<str>>(
    pairs: &[PairRecord],
    metric_ids: &[S],
    registry: &MetricRegistry,
    cache: &mut ScoreCache,
    niqe_model: &NiqePristineModel,
) -> Result<usize> {
    let mut metrics = Vec::with_capacity(metric_ids.len());
    for id in metric_ids {
        let desc = registry.require(id.as_ref())?;
        if desc.provenance != Provenance::Native {
            return Err(Error::ExternalMetric(desc.metric_id.clone()));
        }
        if !metrics.iter().any(|m: &&MetricDescriptor| m.metric_id == desc.metric_id) {
            metrics.push(desc);
        }
    }
    let cache_ref = &*cache;
    let results: Vec<Result<Vec<(Side, &str, f64)>>> = pairs
        .par_iter()
        .map(|pair| {
            let todo: Vec<(Side, &MetricDescriptor)> = Side::BOTH
                .into_iter()
                .flat_map(|side| metrics.iter().map(move |m| (side, *m)))
                .filter(|(side, m)| !cache_ref.contains(&pair.pair_id, *side, &m.metric_id))
                .collect();
            if todo.is_empty() {
                return Ok(Vec::new());
            }
            let reference = if todo.iter().any(|(_, m)| m.kind == MetricKind::FullReference) {
                Some(load_image(&pair.ref_path)?)
            } else {
                None
            };
            let mut out = Vec::with_capacity(todo.len());
            for side in Side::BOTH {
                if !todo.iter().any(|(s, _)| *s == side) {
                    continue;
                }
                let candidate = load_image(pair.side_path(side))?;
                for (_, m) in todo.iter().filter(|(s, _)| *s == side) {
                    let score = compute_native(m, reference.as_ref(), &candidate, niqe_model)?;
                    out.push((side, m.metric_id.as_str(), score));
                }
            }
            Ok(out)
        })
        .collect();
    let mut staged = Vec::new();
    for (pair, result) in pairs.iter().zip(results) {
        for (side, metric, score) in result? {
            staged.push((pair.pair_id.as_str(), side, metric, score));
        }
    }
    let mut added = 0;
    for (pair_id, side, metric, score) in staged {
        if cache.put(pair_id, side, metric, score)? {
            added += 1;
        }
    }
    Ok(added)
}
