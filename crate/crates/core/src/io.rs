//! CSV formats shared by the commands.
//!
//! Every file has a one-line header with SI units in the column names, uses
//! `.` as decimal separator and LF line endings. Floats are written in their
//! shortest round-trip form, so re-reading a file reproduces the values
//! exactly.

use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, Terminator, WriterBuilder};

use crate::error::{Error, Result};
use crate::expsim::CountRecord;
use crate::tomo::TomographySet;

pub const LATERAL_HEADER: [&str; 2] = ["offset_m", "efficiency"];
pub const CASCADE_HEADER: [&str; 2] = ["gap_m", "efficiency"];
pub const FRINGE_HEADER: [&str; 5] = [
    "position_m",
    "coincidences",
    "singles_1",
    "singles_2",
    "duration_s",
];
pub const COUNTS_HEADER: [&str; 5] = [
    "setting_label",
    "coincidences",
    "singles_1",
    "singles_2",
    "duration_s",
];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Rows of a CSV file after the header, each tagged with its line number.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<(u64, StringRecord)>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Read a CSV file with a header line. An empty input is an error.
pub fn read_table<R: Read>(r: R) -> Result<Table> {
    let mut rdr = ReaderBuilder::new().has_headers(true).from_reader(r);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::Parse {
            line: 1,
            message: "empty file: expected a header line".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(Table { header, rows })
}

fn expect_header(table: &Table, expected: &[&str]) -> Result<()> {
    if table.header.len() != expected.len()
        || table.header.iter().zip(expected).any(|(a, b)| a != b)
    {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                table.header.join(",")
            ),
        });
    }
    Ok(())
}

pub(crate) fn field<T: std::str::FromStr>(
    line: u64,
    rec: &StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = rec.get(idx).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing column `{name}`"),
    })?;
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{raw}` as {name}"),
    })
}

fn finite(line: u64, v: f64, name: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse {
            line,
            message: format!("{name} is not finite"),
        })
    }
}

/// Two-column sweep (`offset_m,efficiency` or `gap_m,efficiency`).
pub fn write_sweep<W: Write>(w: W, header: [&str; 2], rows: &[(f64, f64)]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(header).map_err(csv_err)?;
    for (x, y) in rows {
        wr.write_record([x.to_string(), y.to_string()])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Read any two-or-more-column numeric table as `(x, y)` using the first two
/// columns.
pub fn read_xy<R: Read>(r: R) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
    let table = read_table(r)?;
    if table.header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need at least two columns".into(),
        });
    }
    let mut xs = Vec::with_capacity(table.rows.len());
    let mut ys = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        xs.push(finite(
            *line,
            field(*line, rec, 0, &table.header[0])?,
            &table.header[0],
        )?);
        ys.push(finite(
            *line,
            field(*line, rec, 1, &table.header[1])?,
            &table.header[1],
        )?);
    }
    Ok((table.header, xs, ys))
}

pub fn write_fringe<W: Write>(w: W, rows: &[(f64, CountRecord)]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(FRINGE_HEADER).map_err(csv_err)?;
    for (z, r) in rows {
        wr.write_record([
            z.to_string(),
            r.coincidences.to_string(),
            r.singles_1.to_string(),
            r.singles_2.to_string(),
            r.duration.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// One row of a fringe scan file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeRow {
    pub position_m: f64,
    pub coincidences: u64,
    pub singles_1: u64,
    pub singles_2: u64,
    pub duration_s: f64,
}

pub fn read_fringe<R: Read>(r: R) -> Result<Vec<FringeRow>> {
    let table = read_table(r)?;
    expect_header(&table, &FRINGE_HEADER)?;
    table
        .rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            Ok(FringeRow {
                position_m: finite(line, field(line, rec, 0, "position_m")?, "position_m")?,
                coincidences: field(line, rec, 1, "coincidences")?,
                singles_1: field(line, rec, 2, "singles_1")?,
                singles_2: field(line, rec, 3, "singles_2")?,
                duration_s: positive_duration(line, field(line, rec, 4, "duration_s")?)?,
            })
        })
        .collect()
}

fn positive_duration(line: u64, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse {
            line,
            message: format!("duration_s must be > 0, got {v}"),
        })
    }
}

pub fn write_counts<W: Write>(w: W, records: &[CountRecord]) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(COUNTS_HEADER).map_err(csv_err)?;
    for r in records {
        wr.write_record([
            r.setting_label.clone(),
            r.coincidences.to_string(),
            r.singles_1.to_string(),
            r.singles_2.to_string(),
            r.duration.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Read a tomography count set. Labels are resolved against `set`; unknown
/// or repeated labels are parse errors. Completeness is checked by the
/// estimators, not here.
pub fn read_counts<R: Read>(r: R, set: &TomographySet) -> Result<Vec<CountRecord>> {
    let table = read_table(r)?;
    expect_header(&table, &COUNTS_HEADER)?;
    let mut seen = std::collections::HashSet::new();
    table
        .rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            let label: String = field(line, rec, 0, "setting_label")?;
            let setting = set.find(&label).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown setting label `{label}`"),
            })?;
            if !seen.insert(label.clone()) {
                return Err(Error::Parse {
                    line,
                    message: format!("setting `{label}` appears twice"),
                });
            }
            Ok(CountRecord {
                setting_label: label,
                analyzer: setting.analyzer,
                coincidences: field(line, rec, 1, "coincidences")?,
                singles_1: field(line, rec, 2, "singles_1")?,
                singles_2: field(line, rec, 3, "singles_2")?,
                duration: positive_duration(line, field(line, rec, 4, "duration_s")?)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polkit::{bell_state, BellState};
    use crate::tomo::{simulate_tomography_counts, standard_settings};

    #[test]
    fn sweep_round_trip_is_exact() {
        let rows = vec![
            (-1e-4, 0.123456789012345),
            (0.0, 1.0 / 3.0),
            (2.5e-4, 7e-300),
        ];
        let mut buf = Vec::new();
        write_sweep(&mut buf, LATERAL_HEADER, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("offset_m,efficiency\n"));
        assert!(!text.contains('\r'));
        let (header, xs, ys) = read_xy(buf.as_slice()).unwrap();
        assert_eq!(header, vec!["offset_m", "efficiency"]);
        for (i, (x, y)) in rows.iter().enumerate() {
            assert_eq!(xs[i].to_bits(), x.to_bits());
            assert_eq!(ys[i].to_bits(), y.to_bits());
        }
    }

    #[test]
    fn counts_round_trip() {
        let set = standard_settings();
        let recs =
            simulate_tomography_counts(&bell_state(BellState::PsiPlus).density(), &set, 1e3, 4)
                .unwrap();
        let mut buf = Vec::new();
        write_counts(&mut buf, &recs).unwrap();
        let back = read_counts(buf.as_slice(), &set).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn malformed_row_names_line() {
        let text = "setting_label,coincidences,singles_1,singles_2,duration_s\nHH,10,20,20,1\nHV,abc,20,20,1\n";
        match read_counts(text.as_bytes(), &standard_settings()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_duplicate_labels() {
        let set = standard_settings();
        let bad = "setting_label,coincidences,singles_1,singles_2,duration_s\nXX,1,1,1,1\n";
        assert!(matches!(
            read_counts(bad.as_bytes(), &set),
            Err(Error::Parse { line: 2, .. })
        ));
        let dup =
            "setting_label,coincidences,singles_1,singles_2,duration_s\nHH,1,1,1,1\nHH,1,1,1,1\n";
        assert!(matches!(
            read_counts(dup.as_bytes(), &set),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(read_xy("".as_bytes()), Err(Error::Parse { .. })));
    }
}
