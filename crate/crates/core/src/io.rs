//! Data file parsing and atomic output.
//!
//! Histograms are CSV rows `symbol_index,count` with 1-based indices; a
//! single non-numeric header row is allowed, `#` starts a comment line, and
//! symbols absent from the file have count 0. Raw samples are one symbol
//! index per line.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sampling::Histogram;

/// Largest alphabet accepted from a file.
pub const MAX_SYMBOLS: usize = 1 << 26;

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Which of the two accepted data layouts a file uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    HistogramCsv,
    Samples,
}

/// A file is a histogram if any data line contains a comma.
pub fn detect_format(text: &str) -> DataFormat {
    if data_lines(text).any(|(_, l)| l.contains(',')) {
        DataFormat::HistogramCsv
    } else {
        DataFormat::Samples
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_index(field: &str, line: usize) -> Result<usize> {
    let idx: usize = field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid symbol index `{}`", field.trim()),
    })?;
    if idx == 0 || idx > MAX_SYMBOLS {
        return Err(Error::Parse {
            line,
            msg: format!("symbol index {idx} outside [1, {MAX_SYMBOLS}]"),
        });
    }
    Ok(idx)
}

fn resize_for(counts: &mut Vec<u64>, k: Option<usize>, idx: usize, line: usize) -> Result<()> {
    if let Some(k) = k {
        if idx > k {
            return Err(Error::Parse {
                line,
                msg: format!("symbol index {idx} exceeds alphabet size {k}"),
            });
        }
    }
    if counts.len() < idx {
        counts.resize(idx, 0);
    }
    Ok(())
}

/// Parses histogram CSV into per-symbol counts. `k`, when given, fixes the
/// alphabet size; otherwise it is the largest index present.
pub fn parse_histogram_csv(text: &str, k: Option<usize>) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; k.unwrap_or(0)];
    let mut seen = vec![false; counts.len()];
    for (pos, (line, row)) in data_lines(text).enumerate() {
        let mut fields = row.split(',');
        let (a, b) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: "expected `symbol_index,count`".into(),
                })
            }
        };
        if pos == 0 && a.trim().parse::<u64>().is_err() && b.trim().parse::<u64>().is_err() {
            continue;
        }
        let idx = parse_index(a, line)?;
        let count: u64 = b.trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid count `{}`", b.trim()),
        })?;
        resize_for(&mut counts, k, idx, line)?;
        if seen.len() < idx {
            seen.resize(idx, false);
        }
        if std::mem::replace(&mut seen[idx - 1], true) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate symbol index {idx}"),
            });
        }
        counts[idx - 1] = count;
    }
    check_nonempty(&counts)?;
    Ok(counts)
}

/// Parses newline-delimited symbol indices into per-symbol counts.
pub fn parse_samples(text: &str, k: Option<usize>) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; k.unwrap_or(0)];
    for (line, row) in data_lines(text) {
        let idx = parse_index(row, line)?;
        resize_for(&mut counts, k, idx, line)?;
        counts[idx - 1] += 1;
    }
    check_nonempty(&counts)?;
    Ok(counts)
}

fn check_nonempty(counts: &[u64]) -> Result<()> {
    if counts.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no data rows".into(),
        });
    }
    counts.iter().try_fold(0u64, |acc, &c| acc.checked_add(c)).ok_or(Error::Parse {
        line: 0,
        msg: "total count overflows u64".into(),
    })?;
    Ok(())
}

/// Parses either layout into a multinomial histogram.
pub fn parse_data(text: &str, k: Option<usize>) -> Result<Histogram> {
    let counts = match detect_format(text) {
        DataFormat::HistogramCsv => parse_histogram_csv(text, k)?,
        DataFormat::Samples => parse_samples(text, k)?,
    };
    Ok(Histogram::multinomial(counts))
}

pub fn write_histogram_csv(counts: &[u64]) -> String {
    let mut out = String::from("symbol_index,count\n");
    for (i, c) in counts.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_with_header_and_gaps() {
        let c = parse_histogram_csv("symbol_index,count\n1,7\n3, 2\n", None).unwrap();
        assert_eq!(c, vec![7, 0, 2]);
        let c = parse_histogram_csv("# note\n2,1\n", Some(4)).unwrap();
        assert_eq!(c, vec![0, 1, 0, 0]);
    }

    #[test]
    fn histogram_errors_carry_line_numbers() {
        match parse_histogram_csv("1,3\n2,x\n", None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_histogram_csv("1,3\n\n1,4\n", None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_histogram_csv("0,3\n", None).is_err());
        assert!(parse_histogram_csv("5,3\n", Some(4)).is_err());
        assert!(parse_histogram_csv("1,2,3\n", None).is_err());
        assert!(parse_histogram_csv("", None).is_err());
        assert!(parse_histogram_csv("1,18446744073709551615\n2,1\n", None).is_err());
    }

    #[test]
    fn samples_and_detection() {
        let text = "1\n2\n2\n\n3\n";
        assert_eq!(detect_format(text), DataFormat::Samples);
        assert_eq!(parse_samples(text, None).unwrap(), vec![1, 2, 1]);
        assert!(matches!(parse_samples("1\n-2\n", None), Err(Error::Parse { line: 2, .. })));
        let h = parse_data("1,7\n2,0\n3,0\n", None).unwrap();
        assert_eq!(h.counts(), &[7, 0, 0]);
        assert_eq!(h.n(), 7);
    }

    #[test]
    fn csv_round_trip_and_atomic_write() {
        let counts = vec![3, 0, 5, 1];
        let text = write_histogram_csv(&counts);
        assert_eq!(parse_histogram_csv(&text, None).unwrap(), counts);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_atomic(&path, text.as_bytes()).unwrap();
        write_atomic(&path, b"1,1\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "1,1\n");
    }
}
