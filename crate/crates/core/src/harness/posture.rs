use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use super::Dataset;
use crate::error::{Error, Result};
use crate::multiset::WeightedPointSet;

/// Markers farther than this from the local origin (millimetres) are pruned.
pub const MAX_MARKER_NORM: f64 = 200.0;
/// Sets left with fewer markers are discarded.
pub const MIN_MARKERS: usize = 3;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub rows: usize,
    pub kept: usize,
    pub discarded: usize,
    pub pruned_markers: usize,
    /// Instance count per marker count, after pruning.
    pub cardinality: BTreeMap<usize, usize>,
}

fn absent(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

/// Reads `class,user,x1,y1,z1,x2,...` rows. Empty or `?` cells mark an
/// absent marker; a header row is detected and skipped. Markers farther
/// than 200 mm from the origin are pruned and sets left with fewer than 3
/// markers are discarded. Every surviving marker is kept, however many.
pub fn ingest_posture_from<R: Read>(reader: R) -> Result<(Dataset, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut report = IngestReport::default();
    let mut items = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = r + 1;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() < 2 {
            return Err(Error::Parse(format!("line {line}: expected class,user,coordinates...")));
        }
        let coords: Vec<&str> = rec.iter().skip(2).collect();
        if r == 0 && coords.iter().any(|c| !absent(c) && c.parse::<f64>().is_err()) {
            continue; // header
        }
        if !coords.len().is_multiple_of(3) {
            return Err(Error::Parse(format!("line {line}: {} coordinate cells is not a multiple of 3", coords.len())));
        }
        report.rows += 1;
        let mut pts = Vec::new();
        for (m, xyz) in coords.chunks(3).enumerate() {
            if xyz.iter().any(|c| absent(c)) {
                continue;
            }
            let mut p = [0.0; 3];
            for (k, cell) in xyz.iter().enumerate() {
                p[k] = cell.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {line}, column {}: {cell:?}: {e}", 3 + 3 * m + k))
                })?;
            }
            if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() > MAX_MARKER_NORM {
                report.pruned_markers += 1;
                continue;
            }
            pts.push(p.to_vec());
        }
        if pts.len() < MIN_MARKERS {
            report.discarded += 1;
            continue;
        }
        *report.cardinality.entry(pts.len()).or_default() += 1;
        let set = WeightedPointSet::from_points(3, pts, None)
            .map_err(|e| Error::Parse(format!("line {line}: {e}")))?
            .with_id(format!("row{line}"))
            .with_labels(Some(rec[0].to_string()), Some(rec[1].to_string()));
        items.push(set);
    }
    report.kept = items.len();
    Ok((Dataset::new(3, items)?, report))
}

pub fn ingest_posture(path: impl AsRef<Path>) -> Result<(Dataset, IngestReport)> {
    ingest_posture_from(std::fs::File::open(path)?)
}
