//! Survival data in CSV: header `time,status,x1,…,xp`, one subject per row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use dsubcox_core::SurvivalDataset;

use crate::error::{HarnessError, Result};

/// Reads a survival CSV file; see [`read_dataset`].
pub fn ingest_csv(path: &Path) -> Result<SurvivalDataset> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_dataset(BufReader::new(file), path)
}

/// Streams records into column buffers; the text is never held in memory.
/// `origin` only labels error messages.
pub fn read_dataset<R: Read>(reader: R, origin: &Path) -> Result<SurvivalDataset> {
    let fail = |line: u64, msg: String| HarnessError::data(origin, format!("line {line}: {msg}"));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| HarnessError::data(origin, format!("unreadable header: {e}")))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(HarnessError::data(origin, "missing header `time,status,x1,...`"));
    }
    let p = header.len().saturating_sub(2);
    let expected: Vec<String> = ["time".to_string(), "status".to_string()]
        .into_iter()
        .chain((1..=p).map(|j| format!("x{j}")))
        .collect();
    if p == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(fail(
            1,
            format!("header must be `{}` with at least one covariate, got `{}`", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut x = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |pos| pos.line());
            fail(line, format!("{e}"))
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |pos| pos.line());
        if record.len() != p + 2 {
            return Err(fail(line, format!("expected {} fields, found {}", p + 2, record.len())));
        }
        let time: f64 = record[0]
            .parse()
            .map_err(|_| fail(line, format!("time `{}` is not a number", &record[0])))?;
        if !(time.is_finite() && time > 0.0) {
            return Err(fail(line, format!("time must be positive and finite, got {time}")));
        }
        let event = match &record[1] {
            "0" => false,
            "1" => true,
            other => return Err(fail(line, format!("status must be 0 or 1, got `{other}`"))),
        };
        times.push(time);
        events.push(event);
        for (j, field) in record.iter().skip(2).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| fail(line, format!("x{} `{field}` is not a number", j + 1)))?;
            if !v.is_finite() {
                return Err(fail(line, format!("x{} is not finite", j + 1)));
            }
            x.push(v);
        }
    }
    if times.is_empty() {
        return Err(HarnessError::data(origin, "no data rows"));
    }
    SurvivalDataset::from_columns(times, events, x, p).map_err(|e| HarnessError::data(origin, e.to_string()))
}

/// Writes `dataset` in input order with shortest round-trip float formatting.
pub fn write_dataset<W: Write>(dataset: &SurvivalDataset, writer: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(writer);
    write!(out, "time,status")?;
    for j in 1..=dataset.p() {
        write!(out, ",x{j}")?;
    }
    writeln!(out)?;
    for s in dataset.subjects() {
        write!(out, "{},{}", s.time, u8::from(s.event))?;
        for v in &s.covariates {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

pub fn write_dataset_file(dataset: &SurvivalDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_dataset(dataset, file).map_err(|e| HarnessError::io(path, e))
}
