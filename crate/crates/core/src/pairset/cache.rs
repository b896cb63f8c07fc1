use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::Side;
use crate::error::{Error, Result};

pub const CACHE_HEADER: [&str; 4] = ["pair_id", "side", "metric_id", "score"];

/// Values closer than this are treated as the same score on re-insert.
const CONFLICT_TOLERANCE: f64 = 1e-9;

/// Scores keyed by `(pair_id, side, metric_id)`.
///
/// Serialization is sorted by pair, side, then metric, so equal caches
/// produce equal files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreCache {
    entries: BTreeMap<String, BTreeMap<String, [Option<f64>; 2]>>,
    len: usize,
}

fn slot(side: Side) -> usize {
    match side {
        Side::A => 0,
        Side::B => 1,
    }
}

fn same_score(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= CONFLICT_TOLERANCE
}

fn format_score(score: f64) -> String {
    // Display never uses exponents and round-trips exactly; infinities
    // print as `inf` / `-inf`.
    score.to_string()
}

fn parse_score(text: &str) -> Option<f64> {
    let v: f64 = text.trim().parse().ok()?;
    (!v.is_nan()).then_some(v)
}

impl ScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, pair_id: &str, side: Side, metric_id: &str) -> Option<f64> {
        self.entries.get(pair_id)?.get(metric_id)?[slot(side)]
    }

    pub fn contains(&self, pair_id: &str, side: Side, metric_id: &str) -> bool {
        self.get(pair_id, side, metric_id).is_some()
    }

    /// Stores a score. Returns `Ok(true)` for a new entry and `Ok(false)`
    /// when the same score was already present.
    pub fn put(&mut self, pair_id: &str, side: Side, metric_id: &str, score: f64) -> Result<bool> {
        self.put_at(pair_id, side, metric_id, score, None)
    }

    fn put_at(
        &mut self,
        pair_id: &str,
        side: Side,
        metric_id: &str,
        score: f64,
        row: Option<usize>,
    ) -> Result<bool> {
        if score.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "NaN score for ({pair_id}, {side}, {metric_id})"
            )));
        }
        self.check(pair_id, side, metric_id, score, row)?;
        let cell = self
            .entries
            .entry(pair_id.to_string())
            .or_default()
            .entry(metric_id.to_string())
            .or_default();
        if cell[slot(side)].is_some() {
            return Ok(false);
        }
        cell[slot(side)] = Some(score);
        self.len += 1;
        Ok(true)
    }

    fn check(
        &self,
        pair_id: &str,
        side: Side,
        metric_id: &str,
        score: f64,
        row: Option<usize>,
    ) -> Result<()> {
        match self.get(pair_id, side, metric_id) {
            Some(existing) if !same_score(existing, score) => Err(Error::CacheConflict {
                pair_id: pair_id.to_string(),
                side,
                metric_id: metric_id.to_string(),
                existing,
                incoming: score,
                row,
            }),
            _ => Ok(()),
        }
    }

    /// All entries in serialization order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, Side, &str, f64)> + '_ {
        self.entries.iter().flat_map(|(pair, metrics)| {
            Side::BOTH.into_iter().flat_map(move |side| {
                metrics.iter().filter_map(move |(metric, cell)| {
                    cell[slot(side)].map(|v| (pair.as_str(), side, metric.as_str(), v))
                })
            })
        })
    }

    /// Parses cache CSV text. Row numbers are file line numbers.
    pub fn parse(reader: impl Read) -> Result<Self> {
        let mut cache = ScoreCache::new();
        for (row, pair_id, side, metric_id, score) in read_rows(reader)? {
            cache.put_at(&pair_id, side, &metric_id, score, Some(row))?;
        }
        Ok(cache)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file)
    }

    /// Loads the cache at `path`, or an empty cache if the file does not
    /// exist yet.
    pub fn load_or_empty(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new())
        }
    }

    /// Merges rows from another cache CSV. Either every row is accepted or
    /// the cache is left untouched. Returns the number of new entries.
    pub fn ingest(&mut self, reader: impl Read) -> Result<usize> {
        let rows = read_rows(reader)?;
        let mut staged = self.clone();
        let mut added = 0;
        for (row, pair_id, side, metric_id, score) in rows {
            if staged.put_at(&pair_id, side, &metric_id, score, Some(row))? {
                added += 1;
            }
        }
        *self = staged;
        Ok(added)
    }

    pub fn write(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let to_err = |e: csv::Error| Error::InvalidArgument(format!("writing score cache: {e}"));
        wtr.write_record(CACHE_HEADER).map_err(to_err)?;
        for (pair, side, metric, score) in self.iter() {
            wtr.write_record([pair, &side.to_string(), metric, &format_score(score)])
                .map_err(to_err)?;
        }
        wtr.flush()
            .map_err(|e| Error::InvalidArgument(format!("writing score cache: {e}")))
    }

    /// Writes the cache through a sibling temporary file and renames it into
    /// place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        let tmp = path.with_extension("csv.tmp");
        std::fs::write(&tmp, &buf).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

type Row = (usize, String, Side, String, f64);

fn read_rows(reader: impl Read) -> Result<Vec<Row>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::CacheFormat {
        row: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(CACHE_HEADER.iter().copied()) {
        return Err(Error::CacheFormat {
            row: 1,
            message: format!("header must be exactly `{}`", CACHE_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::CacheFormat {
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |message: String| Error::CacheFormat { row, message };
        if record.len() != CACHE_HEADER.len() {
            return Err(bad(format!("expected 4 columns, found {}", record.len())));
        }
        if record[0].is_empty() || record[2].is_empty() {
            return Err(bad("empty pair_id or metric_id".into()));
        }
        let side: Side = record[1].parse().map_err(bad)?;
        let score = parse_score(&record[3])
            .ok_or_else(|| bad(format!("score `{}` is not a decimal or `inf`", &record[3])))?;
        rows.push((row, record[0].to_string(), side, record[2].to_string(), score));
    }
    Ok(rows)
}
