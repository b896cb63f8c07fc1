use super::{ScoreTable, TiePolicy};
use crate::error::Result;
use crate::metrics::MetricDescriptor;
use crate::pairset::{PairRecord, ScoreCache};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub metric_id: String,
    pub accuracy: f64,
    pub correct: usize,
    pub n: usize,
}

/// Agreement of one metric's polarity-based preference with the human
/// labels. Exact score ties predict A.
pub fn single_metric_accuracy(
    metric: &MetricDescriptor,
    pairs: &[PairRecord],
    cache: &ScoreCache,
    ties: TiePolicy,
) -> Result<BaselineResult> {
    let table = ScoreTable::build(pairs, &[metric.metric_id.as_str()], cache, ties)?;
    let correct = table
        .scores(0)
        .iter()
        .zip(table.labels())
        .filter(|([a, b], label)| metric.polarity.prefer(*a, *b) == **label)
        .count();
    let n = table.len();
    Ok(BaselineResult {
        metric_id: metric.metric_id.clone(),
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        correct,
        n,
    })
}
