use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::PairRecord;
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 5] = ["pair_id", "ref_path", "a_path", "b_path", "p_a"];

/// Loads a manifest CSV. Image paths are resolved against the manifest's
/// directory; absolute paths are kept as they are.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<PairRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut pairs = parse_manifest(file)?;
    for pair in &mut pairs {
        pair.ref_path = base.join(&pair.ref_path);
        pair.a_path = base.join(&pair.a_path);
        pair.b_path = base.join(&pair.b_path);
    }
    Ok(pairs)
}

/// Parses manifest CSV text without touching the filesystem. Row numbers in
/// errors are file line numbers (the header is line 1).
pub fn parse_manifest(reader: impl Read) -> Result<Vec<PairRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| Error::Manifest {
        row: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
        let missing: Vec<_> = MANIFEST_HEADER
            .iter()
            .filter(|c| !header.iter().any(|h| h == **c))
            .collect();
        let message = if missing.is_empty() {
            format!("header must be exactly `{}`", MANIFEST_HEADER.join(","))
        } else {
            format!("missing column(s) {missing:?}")
        };
        return Err(Error::Manifest { row: 1, message });
    }

    let mut pairs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Manifest {
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != MANIFEST_HEADER.len() {
            return Err(Error::Manifest {
                row,
                message: format!(
                    "expected {} columns, found {}",
                    MANIFEST_HEADER.len(),
                    record.len()
                ),
            });
        }
        let pair_id = record[0].to_string();
        if pair_id.is_empty() {
            return Err(Error::Manifest {
                row,
                message: "empty pair_id".into(),
            });
        }
        let p_a: f64 = record[4].trim().parse().map_err(|_| Error::Manifest {
            row,
            message: format!("p_a `{}` is not a decimal number", &record[4]),
        })?;
        if !(0.0..=1.0).contains(&p_a) {
            return Err(Error::Manifest {
                row,
                message: format!("p_a {p_a} outside [0, 1]"),
            });
        }
        if let Some(&first_row) = seen.get(&pair_id) {
            return Err(Error::DuplicatePairId {
                pair_id,
                first_row,
                row,
            });
        }
        seen.insert(pair_id.clone(), row);
        pairs.push(PairRecord {
            pair_id,
            ref_path: PathBuf::from(&record[1]),
            a_path: PathBuf::from(&record[2]),
            b_path: PathBuf::from(&record[3]),
            p_a,
        });
    }
    Ok(pairs)
}

/// Writes pairs in manifest format, paths as stored on the records.
pub fn write_manifest(pairs: &[PairRecord], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::InvalidArgument(format!("writing manifest: {e}"));
    wtr.write_record(MANIFEST_HEADER).map_err(to_err)?;
    for pair in pairs {
        wtr.write_record([
            pair.pair_id.as_str(),
            &pair.ref_path.to_string_lossy(),
            &pair.a_path.to_string_lossy(),
            &pair.b_path.to_string_lossy(),
            &pair.p_a.to_string(),
        ])
        .map_err(to_err)?;
    }
    wtr.flush()
        .map_err(|e| Error::InvalidArgument(format!("writing manifest: {e}")))?;
    Ok(())
}
