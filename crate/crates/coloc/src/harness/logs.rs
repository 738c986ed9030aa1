//! Trajectory log CSV encoding.
//!
//! Column order is fixed and golden-tested:
//! `stamp,true_x,true_y,true_theta,est_x,est_y,est_theta,p_xx,p_yy,p_tt,nees`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::Pose2;

use super::metrics::LogRow;

pub const CSV_HEADER: &str = "stamp,true_x,true_y,true_theta,est_x,est_y,est_theta,p_xx,p_yy,p_tt,nees";

pub fn rows_to_csv(rows: &[LogRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 96 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            r.stamp,
            r.truth.x,
            r.truth.y,
            r.truth.theta,
            r.est.x,
            r.est.y,
            r.est.theta,
            r.p_xx,
            r.p_yy,
            r.p_tt,
            r.nees
        );
    }
    out
}

pub fn write_csv(path: &Path, rows: &[LogRow]) -> Result<()> {
    fs::write(path, rows_to_csv(rows))?;
    Ok(())
}

pub fn rows_from_csv(path: &Path) -> Result<Vec<LogRow>> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text).map_err(|message| Error::MalformedLog {
        path: path.display().to_string(),
        message,
    })
}

pub fn parse_csv(text: &str) -> std::result::Result<Vec<LogRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        Some(h) => return Err(format!("unexpected header `{h}`")),
        None => return Err("empty file".into()),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", n + 2))?;
        if fields.len() != 11 {
            return Err(format!("line {}: expected 11 fields, got {}", n + 2, fields.len()));
        }
        rows.push(LogRow {
            stamp: fields[0],
            truth: Pose2::new(fields[1], fields[2], fields[3]),
            est: Pose2::new(fields[4], fields[5], fields[6]),
            p_xx: fields[7],
            p_yy: fields[8],
            p_tt: fields[9],
            nees: fields[10],
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            LogRow::new(
                0.1,
                Pose2::new(1.0, 2.0, 0.3),
                Pose2::new(1.01, 1.99, 0.31),
                &Matrix3::from_diagonal(&nalgebra::Vector3::new(0.01, 0.02, 0.03)),
            ),
            LogRow::new(
                0.2,
                Pose2::new(1.1, 2.1, 0.4),
                Pose2::new(1.09, 2.12, 0.38),
                &Matrix3::from_diagonal(&nalgebra::Vector3::new(0.01, 0.02, 0.03)),
            ),
        ];
        let text = rows_to_csv(&rows);
        assert!(text.starts_with(CSV_HEADER));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[0].nees - rows[0].nees).abs() < 1e-8);
        assert!((back[1].est.y - rows[1].est.y).abs() < 1e-9);
    }

    #[test]
    fn header_mismatch_rejected() {
        assert!(parse_csv("stamp,oops\n1,2\n").is_err());
    }
}
