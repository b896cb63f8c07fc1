//! Synthetic preference dataset with known structure, used to exercise
//! the evaluation protocol without images or external scorers.
//!
//! Every pair has a hidden quality gap between its candidates and a human
//! preference probability derived from that gap plus rater noise. Each
//! synthetic metric observes the candidates' latent quality with its own
//! scale, offset and polarity, and has a "blind" band of reference content
//! levels where its noise is much larger. The six bands tile the level
//! range without overlap, so the metrics' errors are complementary and
//! stacking a few of them beats any one, with diminishing returns.

use crate::metrics::{MetricDescriptor, MetricKind, Polarity};
use crate::pairset::{PairRecord, ScoreCache, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::path::PathBuf;

/// Pairs generated per reference image.
const PAIRS_PER_REFERENCE: usize = 5;

struct SynthMetric {
    id: &'static str,
    polarity: Polarity,
    scale: f64,
    offset: f64,
    noise: f64,
    blind: (f64, f64),
}

const BLIND_NOISE: f64 = 1.2;

const METRICS: [SynthMetric; 6] = [
    SynthMetric { id: "syn_a", polarity: Polarity::HigherBetter, scale: 1.0, offset: 0.0, noise: 0.5, blind: (0.0, 1.0 / 6.0) },
    SynthMetric { id: "syn_b", polarity: Polarity::LowerBetter, scale: 4.0, offset: 20.0, noise: 0.5, blind: (1.0 / 6.0, 2.0 / 6.0) },
    SynthMetric { id: "syn_c", polarity: Polarity::HigherBetter, scale: 0.05, offset: 0.8, noise: 0.5, blind: (2.0 / 6.0, 3.0 / 6.0) },
    SynthMetric { id: "syn_d", polarity: Polarity::LowerBetter, scale: 1.5, offset: 3.0, noise: 0.5, blind: (3.0 / 6.0, 4.0 / 6.0) },
    SynthMetric { id: "syn_e", polarity: Polarity::HigherBetter, scale: 10.0, offset: 30.0, noise: 0.5, blind: (4.0 / 6.0, 5.0 / 6.0) },
    SynthMetric { id: "syn_f", polarity: Polarity::LowerBetter, scale: 2.0, offset: 5.0, noise: 0.5, blind: (5.0 / 6.0, 1.0) },
];

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub pairs: Vec<PairRecord>,
    pub cache: ScoreCache,
    pub metrics: Vec<MetricDescriptor>,
}

impl SyntheticDataset {
    pub fn metric_ids(&self) -> Vec<String> {
        self.metrics.iter().map(|m| m.metric_id.clone()).collect()
    }
}

/// Generates `n_pairs` pairs deterministically from `seed`.
pub fn generate(n_pairs: usize, seed: u64) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut cache = ScoreCache::new();
    let mut level = 0.0;
    let mut base = 0.0;
    for i in 0..n_pairs {
        let reference = i / PAIRS_PER_REFERENCE;
        if i % PAIRS_PER_REFERENCE == 0 {
            level = rng.random::<f64>();
            base = 0.5 * std_normal.sample(&mut rng);
        }
        let gap: f64 = std_normal.sample(&mut rng);
        let rater: f64 = 0.1 * std_normal.sample(&mut rng);
        let p_a = 1.0 / (1.0 + (-(gap + rater) / 0.2).exp());
        let pair_id = format!("syn{i:04}");
        let quality = [base + gap / 2.0, base - gap / 2.0];
        for m in &METRICS {
            let (lo, hi) = m.blind;
            let sd = if level >= lo && level < hi { BLIND_NOISE } else { m.noise };
            for (slot, side) in Side::BOTH.into_iter().enumerate() {
                let observed = quality[slot] + sd * std_normal.sample(&mut rng);
                let signed = match m.polarity {
                    Polarity::HigherBetter => observed,
                    Polarity::LowerBetter => -observed,
                };
                cache
                    .put(&pair_id, side, m.id, m.offset + m.scale * signed)
                    .expect("fresh synthetic cache entry");
            }
        }
        pairs.push(PairRecord {
            pair_id,
            ref_path: PathBuf::from(format!("ref{reference:03}.png")),
            a_path: PathBuf::from(format!("syn{i:04}_a.png")),
            b_path: PathBuf::from(format!("syn{i:04}_b.png")),
            p_a,
        });
    }
    let metrics = METRICS
        .iter()
        .map(|m| MetricDescriptor::external(m.id, MetricKind::FullReference, m.polarity))
        .collect();
    SyntheticDataset { pairs, cache, metrics }
}
