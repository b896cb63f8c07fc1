use super::TiePolicy;
use crate::error::{Error, Result};
use crate::pairset::{PairRecord, PreferenceLabel, ScoreCache, Side};
use crate::stacker::INF_CLAMP;

/// Scores of a fixed metric list over the evaluated pairs, pulled out of
/// the cache once so that repeated trainings only index into memory.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pair_ids: Vec<String>,
    ref_paths: Vec<String>,
    labels: Vec<PreferenceLabel>,
    metric_ids: Vec<String>,
    /// `scores[m][i]` holds the `[A, B]` scores of metric `m` on pair `i`.
    scores: Vec<Vec<[f64; 2]>>,
}

impl ScoreTable {
    /// Ties are kept only under [`TiePolicy::CountAsWrong`]. Every listed
    /// metric must be cached for both sides of every kept pair.
    pub fn build<S: AsRef<str>>(
        pairs: &[PairRecord],
        metric_ids: &[S],
        cache: &ScoreCache,
        ties: TiePolicy,
    ) -> Result<Self> {
        let kept: Vec<&PairRecord> = pairs
            .iter()
            .filter(|p| ties == TiePolicy::CountAsWrong || p.label() != PreferenceLabel::Tie)
            .collect();
        let mut scores = Vec::with_capacity(metric_ids.len());
        for metric in metric_ids {
            let metric = metric.as_ref();
            let mut column = Vec::with_capacity(kept.len());
            for pair in &kept {
                let mut cell = [0.0; 2];
                for (slot, side) in Side::BOTH.into_iter().enumerate() {
                    cell[slot] = cache
                        .get(&pair.pair_id, side, metric)
                        .ok_or_else(|| Error::MissingScore {
                            pair_id: pair.pair_id.clone(),
                            side,
                            metric_id: metric.to_string(),
                        })?;
                }
                column.push(cell);
            }
            scores.push(column);
        }
        Ok(Self {
            pair_ids: kept.iter().map(|p| p.pair_id.clone()).collect(),
            ref_paths: kept
                .iter()
                .map(|p| p.ref_path.to_string_lossy().into_owned())
                .collect(),
            labels: kept.iter().map(|p| p.label()).collect(),
            metric_ids: metric_ids.iter().map(|m| m.as_ref().to_string()).collect(),
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[PreferenceLabel] {
        &self.labels
    }

    pub fn pair_ids(&self) -> &[String] {
        &self.pair_ids
    }

    pub(crate) fn ref_paths(&self) -> &[String] {
        &self.ref_paths
    }

    pub fn metric_ids(&self) -> &[String] {
        &self.metric_ids
    }

    pub fn scores(&self, metric: usize) -> &[[f64; 2]] {
        &self.scores[metric]
    }

    pub fn non_tie_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| **l != PreferenceLabel::Tie)
            .count()
    }

    /// Raw stack features of pair `i` for the metric columns in `columns`.
    pub(crate) fn features(&self, i: usize, columns: &[usize]) -> Vec<f64> {
        let clamp = |v: f64| {
            if v.is_infinite() {
                v.clamp(-INF_CLAMP, INF_CLAMP)
            } else {
                v
            }
        };
        columns
            .iter()
            .flat_map(|&m| {
                let [a, b] = self.scores[m][i];
                [clamp(a), clamp(b)]
            })
            .collect()
    }
}
