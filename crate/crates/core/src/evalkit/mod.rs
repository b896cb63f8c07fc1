//! Experimental protocol: single-metric baselines, repeated random-split
//! evaluation of the stack, exhaustive metric-subset search and the
//! supporter matrix, plus CSV/SVG reporting.

mod baseline;
mod cv;
pub mod report;
mod subset;
mod supporters;
pub mod synthetic;
mod table;

pub use self::baseline::{single_metric_accuracy, BaselineResult};
pub use self::cv::{cross_validate, median, CvConfig, CvPlan, CycleResult, EvalReport, Split, SplitUnit};
pub use self::subset::{enumerate_subsets, subset_search, SubsetResult, SubsetSearch};
pub use self::supporters::{supporter_matrix, SupporterCell, SupporterMatrix};
pub use self::table::ScoreTable;

/// How pairs labelled as ties enter accuracy denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Ties are dropped before evaluation.
    #[default]
    Exclude,
    /// Ties stay in the denominator and always count as errors.
    CountAsWrong,
}
