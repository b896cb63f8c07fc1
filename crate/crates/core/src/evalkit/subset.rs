use super::{CvConfig, CvPlan, EvalReport, ScoreTable};
use crate::error::{Error, Result};
use crate::pairset::{PairRecord, ScoreCache};
use crate::stacker::StackHyper;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetResult {
    pub metric_ids: Vec<String>,
    pub report: EvalReport,
}

impl SubsetResult {
    pub fn size(&self) -> usize {
        self.metric_ids.len()
    }

    pub fn median_accuracy(&self) -> f64 {
        self.report.median_accuracy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSearch {
    /// Every evaluated subset, by size and then lexicographically by pool index.
    pub results: Vec<SubsetResult>,
}

impl SubsetSearch {
    /// Highest-median subset of each size; the earliest one wins ties.
    pub fn best_per_size(&self) -> Vec<&SubsetResult> {
        let mut best: Vec<&SubsetResult> = Vec::new();
        for r in &self.results {
            match best.last_mut() {
                Some(b) if b.size() == r.size() => {
                    if r.median_accuracy() > b.median_accuracy() {
                        *b = r;
                    }
                }
                _ => best.push(r),
            }
        }
        best
    }
}

/// All k-subsets of `0..n` for each requested size, sizes ascending and
/// subsets in lexicographic order.
pub fn enumerate_subsets(n: usize, sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut sizes: Vec<usize> = sizes.iter().copied().filter(|&k| k >= 1 && k <= n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut out = Vec::new();
    for k in sizes {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.clone());
            let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
                break;
            };
            idx[pos] += 1;
            for j in pos + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

/// Evaluates every subset of `pool` with the requested sizes on shared
/// splits and fixed hyperparameters. Runs on the current rayon pool.
pub fn subset_search<S: AsRef<str> + Sync>(
    pool: &[S],
    sizes: &[usize],
    pairs: &[PairRecord],
    cache: &ScoreCache,
    config: &CvConfig,
    hyper: &StackHyper,
) -> Result<SubsetSearch> {
    let ids: Vec<&str> = pool.iter().map(|s| s.as_ref()).collect();
    for (i, id) in ids.iter().enumerate() {
        if ids[..i].contains(id) {
            return Err(Error::DuplicateMetric(id.to_string()));
        }
    }
    if let Some(&bad) = sizes.iter().find(|&&k| k == 0 || k > ids.len()) {
        return Err(Error::InvalidArgument(format!(
            "subset size {bad} outside 1..={}",
            ids.len()
        )));
    }
    let table = ScoreTable::build(pairs, &ids, cache, config.ties)?;
    let plan = CvPlan::new(&table, config)?;
    let subsets = enumerate_subsets(ids.len(), sizes);
    let results = subsets
        .par_iter()
        .map(|cols| {
            let report = plan.run(&table, cols, hyper)?;
            Ok(SubsetResult {
                metric_ids: report.metric_ids.clone(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubsetSearch { results })
}
