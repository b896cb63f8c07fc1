use super::{ScoreTable, TiePolicy};
use crate::error::Result;
use crate::metrics::MetricDescriptor;
use crate::pairset::{PairRecord, ScoreCache};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupporterCell {
    /// Accuracy of the supporter on the pairs the supported metric gets wrong.
    pub accuracy: f64,
    /// Number of such pairs.
    pub count: usize,
}

/// `cell(s, t)`: how well metric `t` does where metric `s` fails.
#[derive(Debug, Clone, PartialEq)]
pub struct SupporterMatrix {
    metric_ids: Vec<String>,
    cells: Vec<Vec<Option<SupporterCell>>>,
}

impl SupporterMatrix {
    pub fn metric_ids(&self) -> &[String] {
        &self.metric_ids
    }

    /// `None` on the diagonal and when `supported` makes no errors.
    pub fn cell(&self, supported: usize, supporter: usize) -> Option<SupporterCell> {
        self.cells[supported][supporter]
    }
}

/// Builds the matrix from single-metric polarity predictions. Tie pairs
/// are never "correct", so under [`TiePolicy::CountAsWrong`] they enter
/// every error set and count against every supporter.
pub fn supporter_matrix(
    metrics: &[&MetricDescriptor],
    pairs: &[PairRecord],
    cache: &ScoreCache,
    ties: TiePolicy,
) -> Result<SupporterMatrix> {
    let ids: Vec<&str> = metrics.iter().map(|m| m.metric_id.as_str()).collect();
    let table = ScoreTable::build(pairs, &ids, cache, ties)?;
    let correct: Vec<Vec<bool>> = metrics
        .iter()
        .enumerate()
        .map(|(m, desc)| {
            table
                .scores(m)
                .iter()
                .zip(table.labels())
                .map(|([a, b], label)| desc.polarity.prefer(*a, *b) == *label)
                .collect()
        })
        .collect();
    let k = metrics.len();
    let mut cells = vec![vec![None; k]; k];
    for s in 0..k {
        let errors: Vec<usize> = (0..table.len()).filter(|&i| !correct[s][i]).collect();
        if errors.is_empty() {
            continue;
        }
        for t in (0..k).filter(|&t| t != s) {
            let hits = errors.iter().filter(|&&i| correct[t][i]).count();
            cells[s][t] = Some(SupporterCell {
                accuracy: hits as f64 / errors.len() as f64,
                count: errors.len(),
            });
        }
    }
    Ok(SupporterMatrix {
        metric_ids: ids.iter().map(|s| s.to_string()).collect(),
        cells,
    })
}
