//! Site-summary interchange format.
//!
//! ```text
//! dsubcox-summary v1
//! site_id hospital-a
//! n 100000
//! r 800
//! p 2
//! delta 1.0000000000000001e-1
//! beta <p values>
//! psi <p² values, row-major>
//! gamma <p² values, row-major>
//! ```
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use dsubcox_core::subsample::SUMMARY_SCHEMA_VERSION;
use dsubcox_core::{Matrix, SiteSummary};

use crate::error::{HarnessError, Result};

pub const HEADER_PREFIX: &str = "dsubcox-summary";

const FIELDS: [&str; 8] = ["site_id", "n", "r", "p", "delta", "beta", "psi", "gamma"];

/// Reasons a summary payload is rejected.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("missing header line `{HEADER_PREFIX} v{SUMMARY_SCHEMA_VERSION}`")]
    MissingHeader,
    #[error("unsupported summary version `{0}` (expected v{SUMMARY_SCHEMA_VERSION})")]
    Version(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("malformed field `{field}`: {reason}")]
    Malformed { field: String, reason: String },
    #[error("matrix `{0}` is not symmetric")]
    NotSymmetric(&'static str),
    #[error("invalid summary: {0}")]
    Invalid(String),
}

fn push_floats(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        write!(out, " {v:.16e}").expect("writing to a String");
    }
    out.push('\n');
}

/// Text encoding; `site_id` must be a single nonempty token.
pub fn encode_summary(s: &SiteSummary) -> std::result::Result<String, DecodeError> {
    if s.site_id.is_empty() || s.site_id.chars().any(char::is_whitespace) {
        return Err(DecodeError::Malformed {
            field: "site_id".into(),
            reason: "must be a nonempty token without whitespace".into(),
        });
    }
    let mut out = String::new();
    writeln!(out, "{HEADER_PREFIX} v{}", s.schema_version).expect("writing to a String");
    writeln!(out, "site_id {}", s.site_id).expect("writing to a String");
    writeln!(out, "n {}", s.n).expect("writing to a String");
    writeln!(out, "r {}", s.r).expect("writing to a String");
    writeln!(out, "p {}", s.p()).expect("writing to a String");
    push_floats(&mut out, "delta", &[s.delta]);
    push_floats(&mut out, "beta", &s.beta);
    push_floats(&mut out, "psi", s.psi.as_slice());
    push_floats(&mut out, "gamma", s.gamma.as_slice());
    Ok(out)
}

fn malformed(field: &str, reason: impl Into<String>) -> DecodeError {
    DecodeError::Malformed {
        field: field.into(),
        reason: reason.into(),
    }
}

fn parse_count(field: &'static str, values: &[&str]) -> std::result::Result<usize, DecodeError> {
    match values {
        [v] => v.parse().map_err(|_| malformed(field, format!("`{v}` is not a count"))),
        _ => Err(malformed(field, format!("expected 1 value, found {}", values.len()))),
    }
}

fn parse_floats(field: &'static str, values: &[&str], len: usize) -> std::result::Result<Vec<f64>, DecodeError> {
    if values.len() != len {
        return Err(malformed(field, format!("expected {len} values, found {}", values.len())));
    }
    values
        .iter()
        .map(|v| match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(malformed(field, format!("`{v}` is not a finite number"))),
        })
        .collect()
}

pub fn decode_summary(text: &str) -> std::result::Result<SiteSummary, DecodeError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(DecodeError::MissingHeader)?;
    let mut head = header.split_whitespace();
    if head.next() != Some(HEADER_PREFIX) {
        return Err(DecodeError::MissingHeader);
    }
    let version = head.next().unwrap_or("");
    if version != format!("v{SUMMARY_SCHEMA_VERSION}") || head.next().is_some() {
        return Err(DecodeError::Version(version.to_string()));
    }

    let mut slots: [Option<Vec<&str>>; 8] = Default::default();
    for line in lines {
        let mut tokens = line.split_whitespace();
        let key = tokens.next().expect("nonblank line has a token");
        let idx = FIELDS
            .iter()
            .position(|f| *f == key)
            .ok_or_else(|| malformed(key, "unknown field"))?;
        if slots[idx].is_some() {
            return Err(malformed(key, "appears more than once"));
        }
        slots[idx] = Some(tokens.collect());
    }
    let field = |i: usize| slots[i].as_deref().ok_or(DecodeError::MissingField(FIELDS[i]));

    let site_id = match field(0)? {
        [id] => id.to_string(),
        other => return Err(malformed("site_id", format!("expected 1 token, found {}", other.len()))),
    };
    let n = parse_count("n", field(1)?)?;
    let r = parse_count("r", field(2)?)?;
    let p = parse_count("p", field(3)?)?;
    if p == 0 {
        return Err(malformed("p", "must be at least 1"));
    }
    let delta = parse_floats("delta", field(4)?, 1)?[0];
    let beta = parse_floats("beta", field(5)?, p)?;
    let psi = Matrix::from_row_major(p, parse_floats("psi", field(6)?, p * p)?).expect("length checked");
    let gamma = Matrix::from_row_major(p, parse_floats("gamma", field(7)?, p * p)?).expect("length checked");
    for (name, m) in [("psi", &psi), ("gamma", &gamma)] {
        if !m.is_symmetric(1e-12) {
            return Err(DecodeError::NotSymmetric(name));
        }
    }
    let summary = SiteSummary {
        site_id,
        n,
        r,
        beta,
        psi,
        gamma,
        delta,
        schema_version: SUMMARY_SCHEMA_VERSION,
    };
    summary.validate().map_err(|e| DecodeError::Invalid(e.to_string()))?;
    Ok(summary)
}

pub fn write_summary_file(s: &SiteSummary, path: &Path) -> Result<()> {
    let text = encode_summary(s).map_err(|e| HarnessError::Usage(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn read_summary_file(path: &Path) -> Result<SiteSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    decode_summary(&text).map_err(|e| HarnessError::data(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> SiteSummary {
        SiteSummary {
            site_id: "site-1".into(),
            n: 1000,
            r: 100,
            beta: vec![0.1, -0.7],
            psi: Matrix::from_row_major(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap(),
            gamma: Matrix::from_row_major(2, vec![0.3, 0.1, 0.1, 0.2]).unwrap(),
            delta: 0.1,
            schema_version: SUMMARY_SCHEMA_VERSION,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let s = fixture();
        assert_eq!(decode_summary(&encode_summary(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn hand_written_fixture_decodes() {
        let text = "dsubcox-summary v1\nsite_id a\nn 10\nr 4\np 2\ndelta 0.5\nbeta 1 -2.5\n\
                    psi 4 1 1 3\ngamma 1 0 0 2\n";
        let s = decode_summary(text).unwrap();
        assert_eq!((s.site_id.as_str(), s.n, s.r, s.delta), ("a", 10, 4, 0.5));
        assert_eq!(s.beta, vec![1.0, -2.5]);
        assert_eq!(s.psi.as_slice(), &[4.0, 1.0, 1.0, 3.0]);
        assert_eq!(s.gamma.as_slice(), &[1.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn truncated_payload_names_missing_field() {
        let text = encode_summary(&fixture()).unwrap();
        let cut: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert_eq!(decode_summary(&cut).unwrap_err(), DecodeError::MissingField("beta"));
    }

    #[test]
    fn rejects_bad_payloads() {
        let good = encode_summary(&fixture()).unwrap();
        assert_eq!(
            decode_summary(&good.replace("v1", "v2")).unwrap_err(),
            DecodeError::Version("v2".into())
        );
        assert_eq!(decode_summary("").unwrap_err(), DecodeError::MissingHeader);
        assert!(matches!(
            decode_summary(&good.replace("\nn 1000", "\nn ten")).unwrap_err(),
            DecodeError::Malformed { .. }
        ));
        let asym = good.replacen("psi 2.0000000000000000e0 5.0000000000000000e-1", "psi 2.0000000000000000e0 6e-1", 1);
        assert_ne!(asym, good);
        assert_eq!(decode_summary(&asym).unwrap_err(), DecodeError::NotSymmetric("psi"));
        let mut bad_id = fixture();
        bad_id.site_id = "two words".into();
        assert!(encode_summary(&bad_id).is_err());
    }

    #[test]
    fn payload_carries_only_summary_fields() {
        let text = encode_summary(&fixture()).unwrap();
        let keys: Vec<&str> = text.lines().skip(1).map(|l| l.split(' ').next().unwrap()).collect();
        assert_eq!(keys, FIELDS);
    }
}
