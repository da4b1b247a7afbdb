//! Square matrices as CSV: a header row `id,<id_1>,...,<id_n>` followed by
//! one row per id, `<id_i>,v_i1,...,v_in`. Values are written in shortest
//! round-trip form, so write/read is lossless. Leading lines starting with
//! `#` are comments; Gram files carry their kind and provenance there.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gram::{GramKind, GramMatrix};
use crate::ground::PrecomputedDistances;
use crate::linalg::Matrix;

/// Matrix plus the text of its leading `#` comment lines.
pub fn read_matrix_with_comments<R: Read>(mut reader: R) -> Result<(Vec<String>, Matrix, Vec<String>)> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut comments = Vec::new();
    let mut body = text.as_str();
    while let Some(rest) = body.strip_prefix('#') {
        let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        comments.push(line.trim().to_string());
        body = tail;
    }
    let (ids, m) = parse_matrix(body.as_bytes(), comments.len())?;
    Ok((ids, m, comments))
}

pub fn read_matrix_from<R: Read>(reader: R) -> Result<(Vec<String>, Matrix)> {
    read_matrix_with_comments(reader).map(|(ids, m, _)| (ids, m))
}

fn parse_matrix(reader: &[u8], skipped: usize) -> Result<(Vec<String>, Matrix)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(Error::Parse("empty matrix header".into()));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = ids.len();
    let mut values = Matrix::zeros(n, n);
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = r + 2 + skipped;
        if rows >= n {
            return Err(Error::Parse(format!("line {line}: more rows than header ids ({n})")));
        }
        if rec.len() != n + 1 {
            return Err(Error::Parse(format!("line {line}: expected {} fields, found {}", n + 1, rec.len())));
        }
        if &rec[0] != ids[rows].as_str() {
            return Err(Error::Parse(format!("line {line}: row id {:?} does not match column id {:?}", &rec[0], ids[rows])));
        }
        for (j, cell) in rec.iter().skip(1).enumerate() {
            values[(rows, j)] = cell
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {line}, column {}: {cell:?}: {e}", j + 2)))?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse(format!("expected {n} rows, found {rows}")));
    }
    Ok((ids, values))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<(Vec<String>, Matrix)> {
    read_matrix_from(std::fs::File::open(path)?)
}

pub fn write_matrix_to<W: Write>(writer: W, ids: &[String], m: &Matrix) -> Result<()> {
    write_matrix_with_comments(writer, ids, m, &[])
}

pub fn write_matrix_with_comments<W: Write>(mut writer: W, ids: &[String], m: &Matrix, comments: &[String]) -> Result<()> {
    if ids.len() != m.nrows() {
        return Err(Error::DimensionMismatch(ids.len(), m.nrows()));
    }
    for c in comments {
        writeln!(writer, "# {}", c.replace('\n', " "))?;
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(ids.iter().cloned());
    w.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend((0..m.ncols()).map(|j| format!("{}", m[(i, j)])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix(path: impl AsRef<Path>, ids: &[String], m: &Matrix) -> Result<()> {
    write_matrix_to(std::fs::File::create(path)?, ids, m)
}

/// Reads a Gram file. The provenance comment written by [`write_gram`] is
/// kept when present; otherwise the provenance is the file name.
pub fn read_gram(path: impl AsRef<Path>, kind: GramKind) -> Result<GramMatrix> {
    let p = path.as_ref();
    let (ids, m, comments) = read_matrix_with_comments(std::fs::File::open(p)?)?;
    let provenance = comments
        .iter()
        .find_map(|c| c.strip_prefix("provenance: "))
        .map(str::to_string)
        .unwrap_or_else(|| format!("file:{}", p.display()));
    GramMatrix::new(m, ids, kind, provenance)
}

/// Kind of a Gram file from its `kind:` comment, if it has one.
pub fn gram_file_kind(path: impl AsRef<Path>) -> Result<Option<GramKind>> {
    let (_, _, comments) = read_matrix_with_comments(std::fs::File::open(path)?)?;
    Ok(comments.iter().find_map(|c| match c.strip_prefix("kind: ") {
        Some("distance") => Some(GramKind::Distance),
        Some("kernel") => Some(GramKind::Kernel),
        _ => None,
    }))
}

pub fn write_gram(path: impl AsRef<Path>, g: &GramMatrix) -> Result<()> {
    write_gram_to(std::fs::File::create(path)?, g)
}

/// [`write_gram`] to any writer.
pub fn write_gram_to<W: Write>(writer: W, g: &GramMatrix) -> Result<()> {
    let kind = match g.kind() {
        GramKind::Distance => "distance",
        GramKind::Kernel => "kernel",
    };
    let comments = [format!("kind: {kind}"), format!("provenance: {}", g.provenance())];
    write_matrix_with_comments(writer, g.ids(), g.values(), &comments)
}

/// Loads a ground-distance table for [`crate::ground::GroundKind::Precomputed`].
pub fn load_precomputed(path: impl AsRef<Path>) -> Result<PrecomputedDistances> {
    let (ids, m) = read_matrix(path)?;
    let rows = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    PrecomputedDistances::new(ids, rows)
}
