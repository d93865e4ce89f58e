//! Trace persistence: CSV with a pinned header and floats printed with 17
//! significant digits, enough for every value to round-trip bit-exactly.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use smoothalm::alm::TraceRecord;

/// The exact header line of every trace file.
pub const TRACE_HEADER: &str = "t,gap,vnorm,feas,dx,dz,phi";

/// 17 significant digits in scientific notation: the shortest count that
/// round-trips every finite f64 through decimal.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders records as CSV text. The `phi` column is left empty when the merit was
/// not evaluated.
pub fn render_trace(rows: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let phi = r.phi.map(fmt_float).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.t,
            fmt_float(r.gap),
            fmt_float(r.vnorm),
            fmt_float(r.feas),
            fmt_float(r.dx),
            fmt_float(r.dz),
            phi
        ));
    }
    out
}

/// Writes a trace file (parent directories must exist).
pub fn write_trace(path: &Path, rows: &[TraceRecord]) -> Result<()> {
    fs::write(path, render_trace(rows))
        .with_context(|| format!("writing trace {}", path.display()))
}

/// Reads a trace file back; the header must match [`TRACE_HEADER`] exactly.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading trace {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_HEADER => {}
        other => bail!(
            "{}: bad trace header {:?}, expected {:?}",
            path.display(),
            other,
            TRACE_HEADER
        ),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            bail!("{} line {}: expected 7 fields, got {}", path.display(), i + 2, fields.len());
        }
        let num = |j: usize| -> Result<f64> {
            fields[j]
                .parse::<f64>()
                .with_context(|| format!("{} line {} field {}", path.display(), i + 2, j + 1))
        };
        rows.push(TraceRecord {
            t: fields[0]
                .parse::<u64>()
                .with_context(|| format!("{} line {} field 1", path.display(), i + 2))?,
            gap: num(1)?,
            vnorm: num(2)?,
            feas: num(3)?,
            dx: num(4)?,
            dz: num(5)?,
            phi: if fields[6].is_empty() { None } else { Some(num(6)?) },
        });
    }
    Ok(rows)
}

/// First recorded iteration whose gap is at or below `threshold`, if any.
pub fn first_hit(rows: &[TraceRecord], threshold: f64) -> Option<u64> {
    rows.iter().find(|r| r.gap <= threshold).map(|r| r.t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<TraceRecord> {
        vec![
            TraceRecord {
                t: 0,
                gap: 1.5,
                vnorm: 1.0,
                feas: 0.5,
                dx: 0.0,
                dz: 0.0,
                phi: Some(std::f64::consts::PI),
            },
            TraceRecord {
                t: 10,
                gap: 0.25,
                vnorm: 0.2,
                feas: 0.05,
                dx: 1e-300,
                dz: f64::MIN_POSITIVE,
                phi: None,
            },
        ]
    }

    #[test]
    fn roundtrip_preserves_every_bit_and_the_phi_gap() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let original = rows();
        write_trace(&path, &original).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,gap,vnorm,feas,dx,dz,phi\n"));
        assert!(text.lines().nth(2).unwrap().ends_with(','), "empty phi column");
        let back = read_trace(&path).unwrap();
        assert_eq!(back.len(), original.len());
        for (a, b) in original.iter().zip(&back) {
            assert_eq!(a.t, b.t);
            for (x, y) in [
                (a.gap, b.gap),
                (a.vnorm, b.vnorm),
                (a.feas, b.feas),
                (a.dx, b.dx),
                (a.dz, b.dz),
            ] {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            match (a.phi, b.phi) {
                (Some(x), Some(y)) => assert_eq!(x.to_bits(), y.to_bits()),
                (None, None) => {}
                other => panic!("phi mismatch: {other:?}"),
            }
        }
    }

    #[test]
    fn corrupt_headers_and_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "t,gap\n1,2\n").unwrap();
        assert!(read_trace(&path).is_err());
        fs::write(&path, format!("{TRACE_HEADER}\n1,2,3\n")).unwrap();
        assert!(read_trace(&path).is_err());
        fs::write(&path, format!("{TRACE_HEADER}\nx,1,1,1,1,1,\n")).unwrap();
        assert!(read_trace(&path).is_err());
    }

    #[test]
    fn first_hit_reports_the_first_qualifying_row() {
        let r = rows();
        assert_eq!(first_hit(&r, 2.0), Some(0));
        assert_eq!(first_hit(&r, 0.3), Some(10));
        assert_eq!(first_hit(&r, 0.1), None);
    }
}
