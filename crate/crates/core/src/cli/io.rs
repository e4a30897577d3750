//! CSV and coefficient-file reading and writing.
//!
//! Headers are exact. Floats are written in Rust's shortest round-trip form,
//! so `parse(write(x)) == x` bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::model::{OcvCurve, TheveninParams};
use crate::pipeline::{FilterRun, RunResult};
use crate::sim::{MeasuredSample, MeasuredTrace, TruthSample, TruthTrace};

pub const MEASURED_HEADER: &[&str] = &["t", "current_a", "voltage_v"];
pub const MEASURED_REF_HEADER: &[&str] = &["t", "current_a", "voltage_v", "soc_ref"];
pub const TRUTH_HEADER: &[&str] = &["t", "current_a", "soc_true", "up_true_v", "ut_true_v"];
pub const TRACE_HEADER: &[&str] = &[
    "t",
    "soc_est",
    "soc_ref",
    "up_est",
    "residual_v",
    "r0",
    "rp",
    "cp",
    "rx",
    "qx_trace",
];

/// Relative tolerance between the configured and observed sample interval.
pub const DT_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: unexpected header `{found}`; expected one of {expected}")]
    Header {
        path: String,
        found: String,
        expected: String,
    },
    #[error("{path}, line {line}: {msg}")]
    Data {
        path: String,
        line: u64,
        msg: String,
    },
    #[error("{path}: {msg}")]
    Sampling { path: String, msg: String },
}

/// Which of the known layouts a CSV file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Measured { with_reference: bool },
    Truth,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn header_is(found: &csv::StringRecord, expected: &[&str]) -> bool {
    found.len() == expected.len() && found.iter().zip(expected).all(|(a, b)| a == *b)
}

pub fn detect_schema(path: &Path) -> Result<Schema, IoError> {
    let mut rdr = open_reader(path)?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header_is(&header, MEASURED_HEADER) {
        Ok(Schema::Measured {
            with_reference: false,
        })
    } else if header_is(&header, MEASURED_REF_HEADER) {
        Ok(Schema::Measured {
            with_reference: true,
        })
    } else if header_is(&header, TRUTH_HEADER) {
        Ok(Schema::Truth)
    } else {
        Err(IoError::Header {
            path: path.display().to_string(),
            found: header.iter().collect::<Vec<_>>().join(","),
            expected: [MEASURED_HEADER, MEASURED_REF_HEADER, TRUTH_HEADER]
                .iter()
                .map(|h| format!("`{}`", h.join(",")))
                .collect::<Vec<_>>()
                .join(", "),
        })
    }
}

fn read_rows(path: &Path, expected: &[&[&str]]) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rdr = open_reader(path)?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if !expected.iter().any(|h| header_is(&header, h)) {
        return Err(IoError::Header {
            path: path.display().to_string(),
            found: header.iter().collect::<Vec<_>>().join(","),
            expected: expected
                .iter()
                .map(|h| format!("`{}`", h.join(",")))
                .collect::<Vec<_>>()
                .join(", "),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err(path))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| IoError::Data {
                        path: path.display().to_string(),
                        line,
                        msg: format!("`{field}` is not a finite number"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IoError::Data {
            path: path.display().to_string(),
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Ok(rows)
}

/// Checks strictly increasing time and uniform spacing against `dt_s`.
pub fn check_sampling(path: &Path, times: &[f64], dt_s: f64) -> Result<(), IoError> {
    let fail = |msg: String| IoError::Sampling {
        path: path.display().to_string(),
        msg,
    };
    if times.len() < 2 {
        return Ok(());
    }
    let mut steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = steps.iter().position(|&d| d <= 0.0) {
        return Err(fail(format!(
            "time is not strictly increasing at row {}",
            i + 2
        )));
    }
    let off = |d: f64| ((d - dt_s) / dt_s).abs() > DT_TOLERANCE;
    if let Some(i) = steps.iter().position(|&d| off(d)) {
        return Err(fail(format!(
            "irregular sampling at row {}: step {} s vs configured dt {} s",
            i + 2,
            steps[i],
            dt_s
        )));
    }
    steps.sort_by(f64::total_cmp);
    let median = steps[steps.len() / 2];
    if off(median) {
        return Err(fail(format!(
            "median timestep {median} s differs from configured dt {dt_s} s"
        )));
    }
    Ok(())
}

pub fn read_measured(path: &Path) -> Result<MeasuredTrace, IoError> {
    let rows = read_rows(path, &[MEASURED_HEADER, MEASURED_REF_HEADER])?;
    let samples = rows
        .into_iter()
        .map(|r| MeasuredSample {
            time_s: r[0],
            current_a: r[1],
            voltage_v: r[2],
            soc_ref: r.get(3).copied(),
        })
        .collect();
    Ok(MeasuredTrace { samples })
}

/// Reads `truth.csv`. Model parameters are not stored in the file and come
/// from the caller.
pub fn read_truth(
    path: &Path,
    params: TheveninParams,
    curve: OcvCurve,
) -> Result<TruthTrace, IoError> {
    let rows = read_rows(path, &[TRUTH_HEADER])?;
    let samples = rows
        .into_iter()
        .map(|r| TruthSample {
            time_s: r[0],
            current_a: r[1],
            soc: r[2],
            up_v: r[3],
            ut_v: r[4],
        })
        .collect();
    Ok(TruthTrace {
        samples,
        params,
        curve,
        cutoff: false,
        soc_clamped: false,
    })
}

fn create_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = create_writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn num(x: f64) -> String {
    x.to_string()
}

pub fn write_truth(path: &Path, truth: &TruthTrace) -> Result<(), IoError> {
    write_table(
        path,
        TRUTH_HEADER,
        truth.samples.iter().map(|s| {
            vec![
                num(s.time_s),
                num(s.current_a),
                num(s.soc),
                num(s.up_v),
                num(s.ut_v),
            ]
        }),
    )
}

pub fn write_measured(path: &Path, trace: &MeasuredTrace) -> Result<(), IoError> {
    let header = if trace.has_reference() {
        MEASURED_REF_HEADER
    } else {
        MEASURED_HEADER
    };
    write_table(
        path,
        header,
        trace.samples.iter().map(|s| {
            let mut row = vec![num(s.time_s), num(s.current_a), num(s.voltage_v)];
            if let Some(r) = s.soc_ref {
                row.push(num(r));
            }
            row
        }),
    )
}

pub fn write_filter_trace(path: &Path, result: &RunResult, run: &FilterRun) -> Result<(), IoError> {
    write_table(
        path,
        TRACE_HEADER,
        run.steps
            .iter()
            .zip(&result.time_s)
            .zip(&result.reference)
            .map(|((s, &t), &r)| {
                vec![
                    num(t),
                    num(s.soc_est),
                    num(r),
                    num(s.up_est),
                    num(s.residual_v),
                    num(s.params.r0_ohm),
                    num(s.params.rp_ohm),
                    num(s.params.cp_f),
                    num(s.rx),
                    num(s.qx_trace),
                ]
            }),
    )
}

pub fn write_coeffs(path: &Path, curve: &OcvCurve) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for c in curve.coeffs {
        writeln!(w, "{c}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Seven numbers, one per line, highest power first. Blank lines and `#`
/// comments are ignored.
pub fn read_coeffs(path: &Path) -> Result<OcvCurve, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut coeffs = Vec::with_capacity(7);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let value = text
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| IoError::Data {
                path: path.display().to_string(),
                line: i as u64 + 1,
                msg: format!("`{text}` is not a finite number"),
            })?;
        coeffs.push(value);
    }
    let coeffs: [f64; 7] = coeffs.try_into().map_err(|v: Vec<f64>| IoError::Data {
        path: path.display().to_string(),
        line: 0,
        msg: format!("expected 7 coefficients, found {}", v.len()),
    })?;
    Ok(OcvCurve { coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn floats_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let values = [
            0.1,
            1.0 / 3.0,
            -2.5e-17,
            4.160_900_000_000_001,
            f64::MIN_POSITIVE,
        ];
        let trace = MeasuredTrace {
            samples: values
                .iter()
                .enumerate()
                .map(|(i, &v)| MeasuredSample {
                    time_s: i as f64,
                    current_a: v,
                    voltage_v: -v,
                    soc_ref: Some(v * 7.0),
                })
                .collect(),
        };
        let p = dir.path().join("m.csv");
        write_measured(&p, &trace).unwrap();
        assert_eq!(read_measured(&p).unwrap(), trace);
        assert_eq!(
            detect_schema(&p).unwrap(),
            Schema::Measured {
                with_reference: true
            }
        );
    }

    #[test]
    fn header_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "time,current_a,voltage_v\n0,1,3.7\n");
        assert!(matches!(read_measured(&p), Err(IoError::Header { .. })));
        let p = write(dir.path(), "b.csv", "t,voltage_v,current_a\n0,3.7,1\n");
        assert!(matches!(read_measured(&p), Err(IoError::Header { .. })));
        let p = write(dir.path(), "c.csv", "t,current_a,voltage_v\n0,abc,3.7\n");
        assert!(matches!(
            read_measured(&p),
            Err(IoError::Data { line: 2, .. })
        ));
        let p = write(dir.path(), "d.csv", "t,current_a,voltage_v\n");
        assert!(matches!(read_measured(&p), Err(IoError::Data { .. })));
        assert!(matches!(
            read_measured(&dir.path().join("missing.csv")),
            Err(IoError::Io { .. })
        ));
    }

    #[test]
    fn sampling_checks() {
        let p = Path::new("x.csv");
        assert!(check_sampling(p, &[0.0, 1.0, 2.0, 3.005], 1.0).is_ok());
        assert!(check_sampling(p, &[0.0], 1.0).is_ok());
        assert!(check_sampling(p, &[0.0, 1.0, 1.0], 1.0).is_err());
        assert!(check_sampling(p, &[0.0, 1.0, 3.0], 1.0).is_err());
        assert!(check_sampling(p, &[0.0, 2.0, 4.0], 1.0).is_err());
        assert!(check_sampling(p, &[0.0, 0.1, 0.2], 0.1).is_ok());
    }

    #[test]
    fn coefficient_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ocv.txt");
        let curve = OcvCurve::default();
        write_coeffs(&p, &curve).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert_eq!(text.lines().next(), Some("-0.5061"));
        assert_eq!(read_coeffs(&p).unwrap(), curve);
        let bad = write(dir.path(), "bad.txt", "1\n2\n");
        assert!(read_coeffs(&bad).is_err());
    }
}
