//! Metrics, raw-estimate and timing CSV files.
//!
//! Rows are written in the order the experiment produces them and floats use
//! shortest round-trip formatting, so re-emitting the same results gives
//! byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::experiment::{Method, MetricsRow, RawEstimate};
use crate::timing::TimingRow;

pub const METRICS_HEADER: &str = "method,r,coef,bias,ese,se,cp,mse,reps";

/// Coefficients are numbered from 1 in files.
pub fn write_metrics<W: Write>(rows: &[MetricsRow], writer: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(writer);
    writeln!(out, "{METRICS_HEADER}")?;
    for m in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            m.method,
            m.r,
            m.coef + 1,
            m.bias,
            m.ese,
            m.se,
            m.cp,
            m.mse,
            m.reps
        )?;
    }
    out.flush()
}

fn raw_header(p: usize) -> String {
    let mut h = String::from("replicate,method,r");
    for j in 1..=p {
        h.push_str(&format!(",beta{j}"));
    }
    for j in 1..=p {
        h.push_str(&format!(",se{j}"));
    }
    h.push_str(",within_bound");
    h
}

pub fn write_raw<W: Write>(raw: &[RawEstimate], p: usize, writer: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(writer);
    writeln!(out, "{}", raw_header(p))?;
    for e in raw {
        write!(out, "{},{},{}", e.replicate, e.method, e.r)?;
        for v in e.beta.iter().chain(&e.se) {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{}", u8::from(e.within_bound))?;
    }
    out.flush()
}

/// Parses a raw-estimates file written by [`write_raw`].
pub fn read_raw<R: Read>(reader: R, origin: &Path) -> Result<Vec<RawEstimate>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| HarnessError::data(origin, e.to_string()))?
        .clone();
    let p = header.len().saturating_sub(4) / 2;
    if p == 0 || header.iter().ne(raw_header(p).split(',')) {
        return Err(HarnessError::data(origin, "not a raw-estimates file"));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| HarnessError::data(origin, e.to_string()))?;
        let line = record.position().map_or(0, |pos| pos.line());
        let bad = |what: &str| HarnessError::data(origin, format!("line {line}: bad {what}"));
        let num = |i: usize| record[i].parse::<f64>().map_err(|_| bad(&header[i]));
        out.push(RawEstimate {
            replicate: record[0].parse().map_err(|_| bad("replicate"))?,
            method: Method::parse(&record[1]).ok_or_else(|| bad("method"))?,
            r: record[2].parse().map_err(|_| bad("r"))?,
            beta: (3..3 + p).map(num).collect::<Result<_>>()?,
            se: (3 + p..3 + 2 * p).map(num).collect::<Result<_>>()?,
            within_bound: match &record[3 + 2 * p] {
                "1" => true,
                "0" => false,
                _ => return Err(bad("within_bound")),
            },
        });
    }
    Ok(out)
}

pub fn write_timing<W: Write>(rows: &[TimingRow], writer: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(writer);
    writeln!(out, "method,n_total,p,seconds,repeats")?;
    for t in rows {
        writeln!(out, "{},{},{},{},{}", t.method.label(), t.n_total, t.p, t.seconds, t.repeats)?;
    }
    out.flush()
}

/// Writes `<prefix>metrics.csv` and `<prefix>raw.csv`; returns their paths.
pub fn emit_reports(rows: &[MetricsRow], raw: &[RawEstimate], p: usize, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let with_suffix = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    let metrics = with_suffix("metrics.csv");
    let raw_path = with_suffix("raw.csv");
    let f = File::create(&metrics).map_err(|e| HarnessError::io(&metrics, e))?;
    write_metrics(rows, f).map_err(|e| HarnessError::io(&metrics, e))?;
    let f = File::create(&raw_path).map_err(|e| HarnessError::io(&raw_path, e))?;
    write_raw(raw, p, f).map_err(|e| HarnessError::io(&raw_path, e))?;
    Ok((metrics, raw_path))
}

pub fn read_raw_file(path: &Path) -> Result<Vec<RawEstimate>> {
    let f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_raw(BufReader::new(f), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> MetricsRow {
        MetricsRow {
            method: Method::Osp,
            r: 800,
            coef: 0,
            bias: 0.0025,
            ese: 0.0317,
            se: 0.0306,
            cp: 0.956,
            mse: 0.01,
            reps: 200,
            failures: 0,
        }
    }

    #[test]
    fn one_row_gives_two_lines() {
        let mut buf = Vec::new();
        write_metrics(&[row()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "method,r,coef,bias,ese,se,cp,mse,reps\nOSP,800,1,0.0025,0.0317,0.0306,0.956,0.01,200\n");
    }

    #[test]
    fn raw_round_trip() {
        let raw = vec![
            RawEstimate {
                replicate: 0,
                method: Method::Unif,
                r: 200,
                beta: vec![-0.9876543210987654, 0.1],
                se: vec![0.03, 1e-5],
                within_bound: true,
            },
            RawEstimate {
                replicate: 1,
                method: Method::Osp,
                r: 400,
                beta: vec![1.0 / 3.0, -2.0],
                se: vec![0.5, 0.25],
                within_bound: false,
            },
        ];
        let mut buf = Vec::new();
        write_raw(&raw, 2, &mut buf).unwrap();
        assert_eq!(read_raw(buf.as_slice(), Path::new("raw.csv")).unwrap(), raw);
        assert!(read_raw("a,b\n1,2\n".as_bytes(), Path::new("x")).is_err());
    }
}
