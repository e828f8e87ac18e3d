//! CSV ingest for point clouds and distance matrices, and report writers.
//!
//! Both CSV readers accept an optional header row: if any field of the first
//! record fails to parse as a number, the record is treated as a header.

use std::io::{Read, Write};

use crate::discrete_exact::DiscreteInstance;
use crate::error::{Error, Result};
use crate::metric::{EntropyProfile, FiniteMetricSet};

fn read_numeric_rows<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => {
                if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Parse(format!("row {}: non-finite value {bad}", line + 1)));
                }
                rows.push(row);
            }
            Err(_) if line == 0 => {}
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", line + 1))),
        }
    }
    Ok(rows)
}

/// One point per row, coordinates as columns.
pub fn read_points<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let rows = read_numeric_rows(r)?;
    if rows.is_empty() {
        return Err(Error::Parse("no points".into()));
    }
    let dim = rows[0].len();
    if let Some((i, _)) = rows.iter().enumerate().find(|(_, p)| p.len() != dim) {
        return Err(Error::Parse(format!("point {i} has {} coordinates, expected {dim}", rows[i].len())));
    }
    Ok(rows)
}

/// Square matrix of pairwise distances; validated as a pseudo-metric.
pub fn read_distance_matrix<R: Read>(r: R) -> Result<FiniteMetricSet> {
    let rows = read_numeric_rows(r)?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse("empty distance matrix".into()));
    }
    if let Some(row) = rows.iter().find(|row| row.len() != n) {
        return Err(Error::Parse(format!("matrix is not square: row of length {} in {n} rows", row.len())));
    }
    FiniteMetricSet::from_matrix(n, rows.concat())
}

/// How a metric set is stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Points,
    DistanceMatrix,
}

pub fn load_metric_set(path: &std::path::Path, kind: InputKind) -> Result<FiniteMetricSet> {
    let file = std::fs::File::open(path)?;
    match kind {
        InputKind::Points => FiniteMetricSet::from_points(read_points(file)?),
        InputKind::DistanceMatrix => read_distance_matrix(file),
    }
}

/// Columns `eps, lower, upper, entropy`.
pub fn write_profile_csv<W: Write>(w: W, profile: &EntropyProfile) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["eps", "lower", "upper", "entropy"])?;
    for i in 0..profile.scales.len() {
        wtr.write_record([
            profile.scales[i].to_string(),
            profile.lower[i].to_string(),
            profile.counts[i].to_string(),
            profile.entropies[i].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Pretty JSON array of the violating instances, replayable with
/// [`DiscreteInstance::check`].
pub fn write_violations_json<W: Write>(mut w: W, violations: &[DiscreteInstance]) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, violations).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

pub fn read_violations_json<R: Read>(r: R) -> Result<Vec<DiscreteInstance>> {
    serde_json::from_reader(r).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::entropy_profile;

    #[test]
    fn points_with_and_without_header() {
        let a = read_points("x,y\n0,0\n3,4\n".as_bytes()).unwrap();
        let b = read_points("0,0\n3, 4\n\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, vec![vec![0.0, 0.0], vec![3.0, 4.0]]);
        assert!(read_points("0,0\n1\n".as_bytes()).is_err());
        assert!(read_points("0,0\n1,abc\n".as_bytes()).is_err());
        assert!(read_points("x,y\n".as_bytes()).is_err());
        assert!(read_points("0,NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn distance_matrix_ingest() {
        let s = read_distance_matrix("a,b,c\n0,1,2\n1,0,1\n2,1,0\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.d(0, 2), 2.0);
        assert!(read_distance_matrix("0,1\n1,0,3\n".as_bytes()).is_err());
        // Triangle inequality violated.
        assert!(matches!(
            read_distance_matrix("0,1,5\n1,0,1\n5,1,0\n".as_bytes()),
            Err(Error::NotAMetric(_))
        ));
    }

    #[test]
    fn profile_csv_layout() {
        let s = FiniteMetricSet::from_reals(&[0.0, 1.0, 2.0]).unwrap();
        let p = entropy_profile(&s, &[3.0, 0.5]).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("eps,lower,upper,entropy"));
        assert_eq!(lines.next(), Some("3,1,1,0"));
        assert!(lines.next().unwrap().starts_with("0.5,2,3,1.09861"));
    }

    #[test]
    fn violations_roundtrip() {
        let mut rng = crate::rng::substream(5, "io", 0);
        let inst = DiscreteInstance::random(0, 2, &mut rng);
        let mut buf = Vec::new();
        write_violations_json(&mut buf, std::slice::from_ref(&inst)).unwrap();
        let back = read_violations_json(buf.as_slice()).unwrap();
        assert_eq!(back, vec![inst]);
    }
}
