//! CSV persistence for sweep results. Floats print through Rust's shortest
//! round-trip formatting: locale-independent, '.' decimal, and
//! parse-identical, so a write/read cycle reproduces the records exactly and
//! a fixed (config, seed) pair reproduces the bytes.

use std::path::Path;
use std::str::FromStr;

use super::config::EstimatorKind;
use super::metrics::MetricRecord;
use crate::error::{Result, SimError};

pub const CSV_HEADER: &str = "snr_db,estimator,user,mse_cfo,mse_channel,ber,packet_loss";

pub fn records_to_csv(records: &[MetricRecord]) -> String {
    records_to_csv_with_comments(records, &[])
}

/// Render records with leading `# `-prefixed comment lines (the sweep echoes
/// the scenario config this way).
pub fn records_to_csv_with_comments(records: &[MetricRecord], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.snr_db, r.estimator, r.user, r.mse_cfo, r.mse_channel, r.ber, r.packet_loss
        ));
    }
    out
}

pub fn write_csv(records: &[MetricRecord], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, records_to_csv(records))?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricRecord>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(SimError::FileFormat(format!(
                "bad CSV header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(SimError::FileFormat(format!(
                "line {}: expected 7 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| SimError::FileFormat(format!("line {}: {e}", i + 2)))
        };
        records.push(MetricRecord {
            snr_db: num(fields[0])?,
            estimator: EstimatorKind::from_str(fields[1])?,
            user: fields[2]
                .parse()
                .map_err(|e| SimError::FileFormat(format!("line {}: {e}", i + 2)))?,
            mse_cfo: num(fields[3])?,
            mse_channel: num(fields[4])?,
            ber: num(fields[5])?,
            packet_loss: num(fields[6])?,
        });
    }
    Ok(records)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRecord>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<MetricRecord> {
        vec![
            MetricRecord {
                snr_db: 10.0,
                estimator: EstimatorKind::Classical,
                user: 0,
                mse_cfo: 1.0625e-5,
                mse_channel: 0.01234,
                ber: 0.00071,
                packet_loss: 0.0,
            },
            MetricRecord {
                snr_db: 15.0,
                estimator: EstimatorKind::Cnn,
                user: 2,
                mse_cfo: f64::MIN_POSITIVE,
                mse_channel: 1.0 / 3.0,
                ber: 1e-300,
                packet_loss: 0.25,
            },
        ]
    }

    #[test]
    fn round_trip_is_exact() {
        let records = sample_records();
        let text = records_to_csv(&records);
        let back = parse_csv(&text).unwrap();
        assert_eq!(back, records);
        // Through a file as well.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_csv(&records, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), records);
    }

    #[test]
    fn empty_records_give_header_only() {
        let text = records_to_csv(&[]);
        assert_eq!(text, format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&text).unwrap().is_empty());
    }

    #[test]
    fn comments_are_skipped_on_read() {
        let records = sample_records();
        let text =
            records_to_csv_with_comments(&records, &["config: {}".into(), "seed: 7".into()]);
        assert!(text.starts_with("# config: {}\n# seed: 7\n"));
        assert_eq!(parse_csv(&text).unwrap(), records);
    }

    #[test]
    fn decimal_point_is_locale_independent() {
        let text = records_to_csv(&sample_records());
        // Exactly seven comma-separated fields per line; fractional values
        // print with a '.' regardless of the process locale.
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 7, "line: {line}");
        }
        assert!(text.contains("0.01234"));
        assert!(!text.contains(";"));
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(parse_csv("nope\n1,2\n").is_err());
        let text = format!("{CSV_HEADER}\n1,classical,0,0,0,0\n");
        assert!(parse_csv(&text).is_err());
        let text = format!("{CSV_HEADER}\n1,warp,0,0,0,0,0\n");
        assert!(parse_csv(&text).is_err());
    }
}
