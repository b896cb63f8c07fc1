//! Base quality metrics and the descriptor registry.
//!
//! PSNR, SSIM and NIQE are computed natively on the luma plane. Every other
//! metric is declared as an external descriptor whose raw scores arrive
//! through the score cache.

mod aggd;
mod filter;
mod niqe;
mod psnr;
mod ssim;

pub use self::aggd::{fit_aggd, AggdFit};
pub use self::niqe::{
    fit_pristine_model, mscn, niqe, niqe_distance, niqe_luma, patch_features, select_sharp,
    NiqePristineModel, PatchFeatures, NIQE_FEATURES,
};
pub use self::psnr::psnr;
pub use self::ssim::ssim;

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pairset::PreferenceLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    FullReference,
    NoReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    HigherBetter,
    LowerBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Native,
    External,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::FullReference => "fr",
            MetricKind::NoReference => "nr",
        })
    }
}

impl FromStr for MetricKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fr" | "full_reference" | "fullreference" => Ok(MetricKind::FullReference),
            "nr" | "no_reference" | "noreference" => Ok(MetricKind::NoReference),
            _ => Err(format!("unknown metric kind `{s}` (fr|nr)")),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::HigherBetter => "higher",
            Polarity::LowerBetter => "lower",
        })
    }
}

impl FromStr for Polarity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "higher" | "higher_better" | "higherbetter" => Ok(Polarity::HigherBetter),
            "lower" | "lower_better" | "lowerbetter" => Ok(Polarity::LowerBetter),
            _ => Err(format!("unknown polarity `{s}` (higher|lower)")),
        }
    }
}

impl Polarity {
    /// Single-metric preference: the side with the better score wins, and an
    /// exact tie goes to A.
    pub fn prefer(self, score_a: f64, score_b: f64) -> PreferenceLabel {
        let b_wins = match self {
            Polarity::HigherBetter => score_b > score_a,
            Polarity::LowerBetter => score_b < score_a,
        };
        if b_wins {
            PreferenceLabel::PreferB
        } else {
            PreferenceLabel::PreferA
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::HigherBetter => Polarity::LowerBetter,
            Polarity::LowerBetter => Polarity::HigherBetter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetricDescriptor {
    pub metric_id: String,
    pub kind: MetricKind,
    pub polarity: Polarity,
    pub provenance: Provenance,
}

impl MetricDescriptor {
    pub fn new(
        metric_id: impl Into<String>,
        kind: MetricKind,
        polarity: Polarity,
        provenance: Provenance,
    ) -> Self {
        Self {
            metric_id: metric_id.into(),
            kind,
            polarity,
            provenance,
        }
    }

    pub fn external(metric_id: impl Into<String>, kind: MetricKind, polarity: Polarity) -> Self {
        Self::new(metric_id, kind, polarity, Provenance::External)
    }
}

/// Metric ids appear in whitespace-separated model files and CSV cells.
pub fn validate_metric_id(id: &str) -> Result<()> {
    if id.is_empty()
        || !id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
    {
        return Err(Error::InvalidArgument(format!(
            "metric id `{id}` must be non-empty ASCII letters, digits, `_`, `-` or `.`"
        )));
    }
    Ok(())
}

/// Ordered set of metric descriptors with unique ids.
#[derive(Debug, Clone, Default)]
pub struct MetricRegistry {
    descriptors: Vec<MetricDescriptor>,
    index: HashMap<String, usize>,
}

impl MetricRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Native psnr/ssim/niqe plus external descriptors for the deep and
    /// wavelet metrics that are scored outside this crate.
    pub fn builtin() -> Self {
        use MetricKind::*;
        use Polarity::*;
        let mut reg = Self::empty();
        let native = [
            ("psnr", FullReference, HigherBetter),
            ("ssim", FullReference, HigherBetter),
            ("niqe", NoReference, LowerBetter),
        ];
        for (id, kind, pol) in native {
            reg.register(MetricDescriptor::new(id, kind, pol, Provenance::Native))
                .expect("builtin ids are unique");
        }
        let external = [
            ("pieapp", FullReference, LowerBetter),
            ("topiq", FullReference, HigherBetter),
            ("hyperiqa", NoReference, HigherBetter),
            ("cwssim", FullReference, HigherBetter),
            ("stlpips_vgg", FullReference, LowerBetter),
            ("lpips_vgg", FullReference, LowerBetter),
            ("lpips_alex", FullReference, LowerBetter),
            ("maniqa", NoReference, HigherBetter),
            ("iqa_cnn", NoReference, HigherBetter),
            ("tres", NoReference, HigherBetter),
            ("clipiqa_plus", NoReference, HigherBetter),
            ("tres_koniq", NoReference, HigherBetter),
            ("musiq_koniq", NoReference, HigherBetter),
        ];
        for (id, kind, pol) in external {
            reg.register(MetricDescriptor::external(id, kind, pol))
                .expect("builtin ids are unique");
        }
        reg
    }

    pub fn register(&mut self, desc: MetricDescriptor) -> Result<()> {
        validate_metric_id(&desc.metric_id)?;
        if self.index.contains_key(&desc.metric_id) {
            return Err(Error::DuplicateMetric(desc.metric_id));
        }
        self.index.insert(desc.metric_id.clone(), self.descriptors.len());
        self.descriptors.push(desc);
        Ok(())
    }

    pub fn get(&self, metric_id: &str) -> Option<&MetricDescriptor> {
        self.index.get(metric_id).map(|&i| &self.descriptors[i])
    }

    pub fn require(&self, metric_id: &str) -> Result<&MetricDescriptor> {
        self.get(metric_id)
            .ok_or_else(|| Error::UnknownMetric(metric_id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetricDescriptor> {
        self.descriptors.iter()
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    /// Registers external descriptors from a CSV with header
    /// `metric_id,kind,polarity` (`kind` is `fr`/`nr`, `polarity` is
    /// `higher`/`lower`).
    pub fn extend_from_csv(&mut self, reader: impl Read) -> Result<usize> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        if header.iter().ne(["metric_id", "kind", "polarity"]) {
            return Err(Error::InvalidArgument(
                "metric definitions header must be `metric_id,kind,polarity`".into(),
            ));
        }
        let mut added = 0;
        for (i, record) in rdr.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| Error::InvalidArgument(format!("row {row}: {e}")))?;
            if record.len() != 3 {
                return Err(Error::InvalidArgument(format!("row {row}: expected 3 columns")));
            }
            let kind = record[1]
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("row {row}: {e}")))?;
            let polarity = record[2]
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("row {row}: {e}")))?;
            self.register(MetricDescriptor::external(&record[0], kind, polarity))?;
            added += 1;
        }
        Ok(added)
    }

    pub fn extend_from_file(&mut self, path: impl AsRef<Path>) -> Result<usize> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        self.extend_from_csv(file)
    }

    /// Serializes the external, non-builtin part of a registry in the format
    /// read by [`MetricRegistry::extend_from_csv`].
    pub fn write_definitions<'a>(
        descriptors: impl IntoIterator<Item = &'a MetricDescriptor>,
        mut writer: impl std::io::Write,
    ) -> Result<()> {
        let mut out = String::from("metric_id,kind,polarity\n");
        for d in descriptors {
            out.push_str(&format!("{},{},{}\n", d.metric_id, d.kind, d.polarity));
        }
        writer
            .write_all(out.as_bytes())
            .map_err(|e| Error::InvalidArgument(format!("writing metric definitions: {e}")))
    }
}
