use super::{ScoreTable, TiePolicy};
use crate::error::{Error, Result};
use crate::pairset::{PairRecord, PreferenceLabel, ScoreCache};
use crate::stacker::{train_from_features, FeatureSpec, StackHyper};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Extra seeds tried for a cycle whose split leaves one side single-class.
const MAX_RETRIES: usize = 10;

/// Minimum number of non-tie pairs for the random-split protocol.
const MIN_PAIRS: usize = 10;

/// Granularity at which pairs are assigned to train or test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitUnit {
    #[default]
    ByPair,
    /// All pairs sharing a reference image land on the same side.
    ByReference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub cycles: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub split_unit: SplitUnit,
    pub ties: TiePolicy,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            cycles: 5,
            train_fraction: 0.8,
            seed: 42,
            split_unit: SplitUnit::ByPair,
            ties: TiePolicy::Exclude,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cycles == 0 {
            return Err(Error::InvalidArgument("cycles must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// One train/test partition, as indices into a [`ScoreTable`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub cycle: usize,
    /// Seed that produced the shuffle; also seeds the SVM of this cycle.
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// The partitions of every cycle. Shared across metric subsets so that
/// all subsets are compared on identical splits.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub config: CvConfig,
    pub splits: Vec<Split>,
}

impl CvPlan {
    pub fn new(table: &ScoreTable, config: &CvConfig) -> Result<Self> {
        config.validate()?;
        let labelled = table.non_tie_count();
        if labelled < MIN_PAIRS {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_PAIRS} non-tie pairs for evaluation, got {labelled}"
            )));
        }
        let units = split_units(table, config.split_unit);
        let n_train_units = (config.train_fraction * units.len() as f64).floor() as usize;
        if n_train_units == 0 || n_train_units == units.len() {
            return Err(Error::InvalidArgument(format!(
                "train fraction {} leaves an empty side with {} split units",
                config.train_fraction,
                units.len()
            )));
        }
        let labels = table.labels();
        let mut splits = Vec::with_capacity(config.cycles);
        for cycle in 0..config.cycles {
            let mut found = None;
            for attempt in 0..=MAX_RETRIES {
                let seed = config
                    .seed
                    .wrapping_add(cycle as u64)
                    .wrapping_add((attempt * config.cycles) as u64);
                let mut order: Vec<usize> = (0..units.len()).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let collect = |idx: &[usize]| {
                    let mut v: Vec<usize> = idx.iter().flat_map(|&u| units[u].iter().copied()).collect();
                    v.sort_unstable();
                    v
                };
                let train = collect(&order[..n_train_units]);
                let test = collect(&order[n_train_units..]);
                if has_both_classes(&train, labels) && has_both_classes(&test, labels) {
                    found = Some(Split { cycle, seed, train, test });
                    break;
                }
            }
            splits.push(found.ok_or(Error::DegenerateSplit {
                cycle,
                attempts: MAX_RETRIES + 1,
            })?);
        }
        Ok(Self {
            config: *config,
            splits,
        })
    }

    /// Trains and tests the stack over the table columns in `columns`.
    pub fn run(&self, table: &ScoreTable, columns: &[usize], hyper: &StackHyper) -> Result<EvalReport> {
        let ids: Vec<&str> = columns.iter().map(|&m| table.metric_ids()[m].as_str()).collect();
        let spec = FeatureSpec::from_ids(&ids)?;
        let labels = table.labels();
        let mut cycles = Vec::with_capacity(self.splits.len());
        for split in &self.splits {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for &i in &split.train {
                if let Some(y) = labels[i].sign() {
                    xs.push(table.features(i, columns));
                    ys.push(y);
                }
            }
            let model = train_from_features(&xs, &ys, &spec, hyper, split.seed)?;
            let mut correct = 0;
            for &i in &split.test {
                if model.predict_features(&table.features(i, columns))? == labels[i] {
                    correct += 1;
                }
            }
            cycles.push(CycleResult {
                cycle: split.cycle,
                seed: split.seed,
                accuracy: correct as f64 / split.test.len() as f64,
                n_train: xs.len(),
                n_test: split.test.len(),
            });
        }
        let accs: Vec<f64> = cycles.iter().map(|c| c.accuracy).collect();
        Ok(EvalReport {
            metric_ids: spec.metric_ids().to_vec(),
            median_accuracy: median(&accs).unwrap_or(0.0),
            cycles,
        })
    }
}

fn split_units(table: &ScoreTable, unit: SplitUnit) -> Vec<Vec<usize>> {
    match unit {
        SplitUnit::ByPair => (0..table.len()).map(|i| vec![i]).collect(),
        SplitUnit::ByReference => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, r) in table.ref_paths().iter().enumerate() {
                groups.entry(r.as_str()).or_default().push(i);
            }
            groups.into_values().collect()
        }
    }
}

fn has_both_classes(idx: &[usize], labels: &[PreferenceLabel]) -> bool {
    let a = idx.iter().any(|&i| labels[i] == PreferenceLabel::PreferA);
    let b = idx.iter().any(|&i| labels[i] == PreferenceLabel::PreferB);
    a && b
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleResult {
    pub cycle: usize,
    pub seed: u64,
    pub accuracy: f64,
    /// Non-tie training pairs, before swap augmentation.
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric_ids: Vec<String>,
    pub cycles: Vec<CycleResult>,
    pub median_accuracy: f64,
}

/// Middle order statistic; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

/// Repeated random-split evaluation of the stack over `spec`'s metrics.
pub fn cross_validate(
    pairs: &[PairRecord],
    spec: &FeatureSpec,
    cache: &ScoreCache,
    config: &CvConfig,
    hyper: &StackHyper,
) -> Result<EvalReport> {
    let table = ScoreTable::build(pairs, spec.metric_ids(), cache, config.ties)?;
    let plan = CvPlan::new(&table, config)?;
    let columns: Vec<usize> = (0..spec.len()).collect();
    plan.run(&table, &columns, hyper)
}
