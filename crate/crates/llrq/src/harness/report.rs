//! Result files and the quantization-cost report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::eval::BlerRecord;

const CSV_HEADER: &str = "scheme,snr_db,codewords,errors,bler";

/// Writes records as CSV. Floats use the shortest round-trip form, so a
/// byte-for-byte comparison of two files is a meaningful determinism
/// check. Wall-clock times are intentionally not written.
pub fn write_results_csv(records: &[BlerRecord], path: &Path) -> Result<()> {
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for r in records {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            r.scheme, r.snr_db, r.codewords, r.errors, r.bler
        );
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses text written by [`write_results_csv`]. Wall times come back as
/// zero since the file does not carry them.
pub fn parse_results_csv(text: &str) -> Result<Vec<BlerRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {CSV_HEADER}, got {header}"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty results file".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("cannot parse {what} from {s}"),
            })
        };
        let parse_u = |s: &str, what: &str| -> Result<usize> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("cannot parse {what} from {s}"),
            })
        };
        records.push(BlerRecord {
            scheme: fields[0].trim().to_string(),
            snr_db: parse_f(fields[1], "an SNR")?,
            codewords: parse_u(fields[2], "a codeword count")?,
            errors: parse_u(fields[3], "an error count")?,
            bler: parse_f(fields[4], "a BLER")?,
            wall_s: 0.0,
        });
    }
    Ok(records)
}

/// SNR at which a BLER curve crosses `target`, interpolating linearly in
/// (SNR, log BLER) between the first bracketing pair of points. Points
/// with zero BLER carry no log information and are skipped. Returns None
/// when the curve never brackets the target.
pub fn snr_at_bler(points: &[(f64, f64)], target: f64) -> Option<f64> {
    if !(target > 0.0) {
        return None;
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(_, b)| b > 0.0 && b.is_finite())
        .collect();
    for pair in usable.windows(2) {
        let (s0, b0) = pair[0];
        let (s1, b1) = pair[1];
        let lo = b0.min(b1);
        let hi = b0.max(b1);
        if target < lo || target > hi {
            continue;
        }
        if b0 == b1 {
            return Some(s0);
        }
        let t = (target.ln() - b0.ln()) / (b1.ln() - b0.ln());
        return Some(s0 + t * (s1 - s0));
    }
    // Exact hit on an endpoint that no window bracketed (single point).
    usable
        .iter()
        .find(|&&(_, b)| b == target)
        .map(|&(s, _)| s)
}

fn points_of(records: &[BlerRecord], scheme: &str) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.scheme == scheme)
        .map(|r| (r.snr_db, r.bler))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

fn bits_per_value_label(scheme: &str, bits_per_symbol: usize) -> String {
    if scheme == "unquantized" {
        return "exact".into();
    }
    if scheme == "ae-full" {
        return "latent".into();
    }
    if let Some(nb) = scheme.strip_prefix("ae-").and_then(|s| s.parse::<usize>().ok()) {
        return format!("{:.3}", nb as f64 / bits_per_symbol as f64);
    }
    if let Some(b) = scheme.strip_prefix("mmi-").and_then(|s| s.parse::<usize>().ok()) {
        return format!("{b}");
    }
    "?".into()
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => "-".into(),
    }
}

fn fmt_loss(scheme: Option<f64>, reference: Option<f64>) -> String {
    match (scheme, reference) {
        (Some(a), Some(b)) => format!("{:+.2}", a - b),
        _ => "-".into(),
    }
}

/// Renders the BLER table and the quantization cost summary: per scheme,
/// the SNR reaching BLER 0.1 and 0.01 and the dB loss against the
/// unquantized curve at those operating points.
pub fn render_report(records: &[BlerRecord], bits_per_symbol: usize) -> String {
    let mut schemes: Vec<String> = Vec::new();
    for r in records {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme.clone());
        }
    }
    schemes.sort();
    let mut snrs: Vec<f64> = Vec::new();
    for r in records {
        if !snrs.iter().any(|&s| s == r.snr_db) {
            snrs.push(r.snr_db);
        }
    }
    snrs.sort_by(f64::total_cmp);

    let mut out = String::new();
    if let Some(r) = records.first() {
        let _ = writeln!(out, "codewords per point: {}", r.codewords);
    }
    let _ = write!(out, "{:<14}", "scheme");
    for &s in &snrs {
        let _ = write!(out, " {s:>9.2}");
    }
    out.push('\n');
    for scheme in &schemes {
        let _ = write!(out, "{scheme:<14}");
        for &s in &snrs {
            match records.iter().find(|r| &r.scheme == scheme && r.snr_db == s) {
                Some(r) => {
                    let _ = write!(out, " {:>9.5}", r.bler);
                }
                None => {
                    let _ = write!(out, " {:>9}", "-");
                }
            }
        }
        out.push('\n');
    }

    let reference = points_of(records, "unquantized");
    let ref10 = snr_at_bler(&reference, 0.1);
    let ref01 = snr_at_bler(&reference, 0.01);
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<14} {:>7} {:>9} {:>9} {:>9} {:>9}",
        "scheme", "bits/L", "snr@0.1", "snr@0.01", "loss@0.1", "loss@0.01"
    );
    for scheme in &schemes {
        let pts = points_of(records, scheme);
        let s10 = snr_at_bler(&pts, 0.1);
        let s01 = snr_at_bler(&pts, 0.01);
        let _ = writeln!(
            out,
            "{:<14} {:>7} {:>9} {:>9} {:>9} {:>9}",
            scheme,
            bits_per_value_label(scheme, bits_per_symbol),
            fmt_opt(s10),
            fmt_opt(s01),
            fmt_loss(s10, ref10),
            fmt_loss(s01, ref01),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn record(scheme: &str, snr: f64, errors: usize) -> BlerRecord {
        BlerRecord {
            scheme: scheme.into(),
            snr_db: snr,
            codewords: 1000,
            errors,
            bler: errors as f64 / 1000.0,
            wall_s: 1.5,
        }
    }

    /// BLER falling one decade per dB, pinned at `start_snr` -> 1.0.
    fn decade_curve(scheme: &str, start_snr: f64) -> Vec<BlerRecord> {
        (0..5)
            .map(|i| {
                let snr = 15.0 + i as f64;
                BlerRecord {
                    scheme: scheme.into(),
                    snr_db: snr,
                    codewords: 1000,
                    errors: 0,
                    bler: 10f64.powf(-(snr - start_snr)),
                    wall_s: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn csv_round_trips() {
        let records = vec![record("unquantized", 15.0, 421), record("ae-15", 16.5, 37)];
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_results_csv(&records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back = parse_results_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.scheme, b.scheme);
            assert_eq!(a.snr_db, b.snr_db);
            assert_eq!(a.codewords, b.codewords);
            assert_eq!(a.errors, b.errors);
            assert_eq!(a.bler, b.bler);
            assert_eq!(b.wall_s, 0.0);
        }
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(parse_results_csv("").is_err());
        assert!(parse_results_csv("wrong,header\n").is_err());
        let bad_fields = format!("{CSV_HEADER}\nunquantized,15.0,1000\n");
        match parse_results_csv(&bad_fields) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_value = format!("{CSV_HEADER}\nunquantized,abc,1000,5,0.005\n");
        assert!(parse_results_csv(&bad_value).is_err());
    }

    #[test]
    fn interpolation_recovers_exact_log_linear_crossings() {
        let pts: Vec<(f64, f64)> = decade_curve("x", 15.0)
            .iter()
            .map(|r| (r.snr_db, r.bler))
            .collect();
        let s = snr_at_bler(&pts, 0.1).unwrap();
        assert!((s - 16.0).abs() < 1e-12, "snr@0.1 = {s}");
        let s = snr_at_bler(&pts, 0.01).unwrap();
        assert!((s - 17.0).abs() < 1e-12, "snr@0.01 = {s}");
        // Between grid points.
        let s = snr_at_bler(&pts, 10f64.powf(-1.6)).unwrap();
        assert!((s - 16.6).abs() < 1e-12, "snr@10^-1.6 = {s}");
    }

    #[test]
    fn interpolation_skips_zero_bler_and_reports_no_bracket() {
        let pts = [(15.0, 0.2), (16.0, 0.0), (17.0, 0.02)];
        // The zero point is dropped; the remaining pair brackets 0.1.
        let s = snr_at_bler(&pts, 0.1).unwrap();
        assert!(s > 15.0 && s < 17.0);
        assert_eq!(snr_at_bler(&pts, 0.5), None);
        assert_eq!(snr_at_bler(&[], 0.1), None);
        assert_eq!(snr_at_bler(&pts, 0.0), None);
    }

    #[test]
    fn identical_curves_show_zero_loss() {
        let mut records = decade_curve("unquantized", 15.0);
        records.extend(decade_curve("ae-full", 15.0));
        let report = render_report(&records, 8);
        assert!(report.contains("+0.00"), "report:\n{report}");
    }

    #[test]
    fn half_decibel_offset_is_measured_within_a_hundredth() {
        let mut records = decade_curve("unquantized", 15.0);
        records.extend(decade_curve("ae-15", 15.5));
        let ref_pts: Vec<(f64, f64)> = decade_curve("unquantized", 15.0)
            .iter()
            .map(|r| (r.snr_db, r.bler))
            .collect();
        let ae_pts: Vec<(f64, f64)> = decade_curve("ae-15", 15.5)
            .iter()
            .map(|r| (r.snr_db, r.bler))
            .collect();
        for target in [0.1, 0.01] {
            let loss =
                snr_at_bler(&ae_pts, target).unwrap() - snr_at_bler(&ref_pts, target).unwrap();
            assert!(
                (loss - 0.5).abs() < 0.01,
                "loss at {target} = {loss}, expected 0.5"
            );
        }
        let report = render_report(&records, 8);
        assert!(report.contains("+0.50"), "report:\n{report}");
        assert!(report.contains("1.875"), "report:\n{report}");
    }
}
