//! Pairwise dataset model: comparison records, images and the shared score
//! cache.

mod cache;
mod image;
mod manifest;

pub use self::cache::{ScoreCache, CACHE_HEADER};
pub use self::image::{load_image, Image};
pub use self::manifest::{load_manifest, parse_manifest, write_manifest, MANIFEST_HEADER};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

/// Human preference between the two candidates of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreferenceLabel {
    PreferA,
    PreferB,
    Tie,
}

impl PreferenceLabel {
    /// Thresholds an empirical preference probability at 0.5.
    pub fn from_probability(p_a: f64) -> Self {
        if p_a > 0.5 {
            PreferenceLabel::PreferA
        } else if p_a < 0.5 {
            PreferenceLabel::PreferB
        } else {
            PreferenceLabel::Tie
        }
    }

    /// `+1` for A, `-1` for B, `None` for a tie.
    pub fn sign(self) -> Option<f64> {
        match self {
            PreferenceLabel::PreferA => Some(1.0),
            PreferenceLabel::PreferB => Some(-1.0),
            PreferenceLabel::Tie => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            PreferenceLabel::PreferA => PreferenceLabel::PreferB,
            PreferenceLabel::PreferB => PreferenceLabel::PreferA,
            PreferenceLabel::Tie => PreferenceLabel::Tie,
        }
    }
}

impl fmt::Display for PreferenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PreferenceLabel::PreferA => "A",
            PreferenceLabel::PreferB => "B",
            PreferenceLabel::Tie => "tie",
        })
    }
}

/// Which candidate of a pair a score belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::A, Side::B];
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Side::A),
            "B" => Ok(Side::B),
            other => Err(format!("side must be `A` or `B`, got `{other}`")),
        }
    }
}

/// One comparison: reference `O`, candidates `A` and `B`, and the empirical
/// probability that humans prefer `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub pair_id: String,
    pub ref_path: PathBuf,
    pub a_path: PathBuf,
    pub b_path: PathBuf,
    pub p_a: f64,
}

impl PairRecord {
    pub fn label(&self) -> PreferenceLabel {
        PreferenceLabel::from_probability(self.p_a)
    }

    pub fn side_path(&self, side: Side) -> &PathBuf {
        match side {
            Side::A => &self.a_path,
            Side::B => &self.b_path,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_boundary_is_tie() {
        assert_eq!(PreferenceLabel::from_probability(0.5), PreferenceLabel::Tie);
        assert_eq!(PreferenceLabel::from_probability(0.82), PreferenceLabel::PreferA);
        assert_eq!(PreferenceLabel::from_probability(0.0), PreferenceLabel::PreferB);
    }

    proptest! {
        #[test]
        fn label_is_pure_function_of_probability(p in 0.0f64..=1.0) {
            let label = PreferenceLabel::from_probability(p);
            prop_assert_eq!(p > 0.5, label == PreferenceLabel::PreferA);
            prop_assert_eq!(p < 0.5, label == PreferenceLabel::PreferB);
            prop_assert_eq!(p == 0.5, label == PreferenceLabel::Tie);
        }
    }
}
