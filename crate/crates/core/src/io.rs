//! CSV formats shared by the library and the command-line tool.
//!
//! * sample streams: header `phi_1,...,phi_r,y`, one sample per row;
//! * support histories: `n,alpha,support_zero` with `;`-joined 1-based indices;
//! * trajectories: `n,theta_1..theta_r,beta_1..beta_r,alpha,lambda_min,r_n`.
//!
//! Numbers are written in shortest round-trip form and exact zeros as `0`.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use nalgebra::DVector;
use thiserror::Error;

use crate::numeric::format_number;
use crate::rls::{ExcitationStats, RegressionSample};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("file contains no data rows")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode_support(set: &BTreeSet<usize>) -> String {
    set.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(";")
}

pub fn decode_support(text: &str) -> Result<BTreeSet<usize>, String> {
    if text.trim().is_empty() {
        return Ok(BTreeSet::new());
    }
    text.split(';').map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad index {t:?}: {e}"))).collect()
}

/// Reads a `phi_1..phi_r,y` stream.
pub fn read_samples<R: Read>(reader: R) -> Result<Vec<RegressionSample>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let width = headers.len();
    if width < 2 {
        return Err(FormatError::Header(format!("expected phi_1..phi_r,y, got {} column(s)", width)));
    }
    for (i, h) in headers.iter().take(width - 1).enumerate() {
        if h != format!("phi_{}", i + 1) {
            return Err(FormatError::Header(format!("column {} is {h:?}, expected \"phi_{}\"", i + 1, i + 1)));
        }
    }
    if &headers[width - 1] != "y" {
        return Err(FormatError::Header(format!("last column is {:?}, expected \"y\"", &headers[width - 1])));
    }

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(FormatError::Row { line, message: format!("{} fields, expected {width}", rec.len()) });
        }
        let mut vals = Vec::with_capacity(width);
        for field in rec.iter() {
            let v: f64 =
                field.parse().map_err(|_| FormatError::Row { line, message: format!("not a number: {field:?}") })?;
            if !v.is_finite() {
                return Err(FormatError::Row { line, message: format!("non-finite value {field:?}") });
            }
            vals.push(v);
        }
        let y = vals.pop().unwrap_or_default();
        out.push(RegressionSample::new(DVector::from_vec(vals), y));
    }
    if out.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(out)
}

pub fn write_samples<W: Write>(writer: W, samples: &[RegressionSample]) -> Result<(), FormatError> {
    let r = samples.first().map_or(0, |s| s.dim());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=r).map(|i| format!("phi_{i}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for s in samples {
        let mut row: Vec<String> = s.phi.iter().map(|&x| format_number(x)).collect();
        row.push(format_number(s.y));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a support history.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportRow {
    pub n: usize,
    pub alpha: f64,
    pub support_zero: BTreeSet<usize>,
}

pub fn write_support_history<W: Write>(writer: W, rows: &[SupportRow]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "alpha", "support_zero"])?;
    for row in rows {
        w.write_record([row.n.to_string(), format_number(row.alpha), encode_support(&row.support_zero)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_support_history<R: Read>(reader: R) -> Result<Vec<SupportRow>, FormatError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| FormatError::Row { line, message };
        let n = rec.get(0).unwrap_or("").parse().map_err(|_| bad("bad n".into()))?;
        let alpha = rec.get(1).unwrap_or("").parse().map_err(|_| bad("bad alpha".into()))?;
        let support_zero = decode_support(rec.get(2).unwrap_or("")).map_err(bad)?;
        out.push(SupportRow { n, alpha, support_zero });
    }
    Ok(out)
}

/// One row of a trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLine {
    pub n: usize,
    pub theta: DVector<f64>,
    pub beta: DVector<f64>,
    pub alpha: f64,
    pub lambda_min: f64,
    pub r_n: f64,
}

pub fn write_trajectory<W: Write>(writer: W, rows: &[TrajectoryLine]) -> Result<(), FormatError> {
    let r = rows.first().map_or(0, |t| t.theta.len());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["n".to_string()];
    header.extend((1..=r).map(|i| format!("theta_{i}")));
    header.extend((1..=r).map(|i| format!("beta_{i}")));
    header.extend(["alpha", "lambda_min", "r_n"].map(String::from));
    w.write_record(&header)?;
    for t in rows {
        let mut row = vec![t.n.to_string()];
        row.extend(t.theta.iter().map(|&x| format_number(x)));
        row.extend(t.beta.iter().map(|&x| format_number(x)));
        row.extend([format_number(t.alpha), format_number(t.lambda_min), format_number(t.r_n)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory<R: Read>(reader: R) -> Result<Vec<TrajectoryLine>, FormatError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 6 || (width - 4) % 2 != 0 {
        return Err(FormatError::Header(format!("{width} columns cannot form a trajectory")));
    }
    let r = (width - 4) / 2;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| FormatError::Row { line, message: e.to_string() })?;
        out.push(TrajectoryLine {
            n: vals[0] as usize,
            theta: DVector::from_column_slice(&vals[1..=r]),
            beta: DVector::from_column_slice(&vals[r + 1..=2 * r]),
            alpha: vals[2 * r + 1],
            lambda_min: vals[2 * r + 2],
            r_n: vals[2 * r + 3],
        });
    }
    Ok(out)
}

/// `n,r_n,lambda_min,ratio_weakest,ratio_zhao`
pub fn write_stats<W: Write>(writer: W, stats: &[(usize, ExcitationStats)]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "r_n", "lambda_min", "ratio_weakest", "ratio_zhao"])?;
    for (n, s) in stats {
        w.write_record([
            n.to_string(),
            format_number(s.r_n),
            format_number(s.lambda_min),
            format_number(s.ratio_weakest),
            format_number(s.ratio_zhao),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_stream_and_reports_lines() {
        let text = "phi_1,phi_2,y\n1,2,3\n0.5,-1e-3,0\n";
        let s = read_samples(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].phi.as_slice(), &[0.5, -1e-3]);

        let bad = "phi_1,y\n1,2\n1,x\n";
        match read_samples(bad.as_bytes()) {
            Err(FormatError::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let short = "phi_1,phi_2,y\n1,2\n";
        assert!(matches!(read_samples(short.as_bytes()), Err(FormatError::Row { line: 2, .. })));
        assert!(matches!(read_samples("phi_1,y\n".as_bytes()), Err(FormatError::Empty)));
        assert!(matches!(read_samples("".as_bytes()), Err(FormatError::Header(_))));
        assert!(matches!(read_samples("x_1,y\n1,2\n".as_bytes()), Err(FormatError::Header(_))));
        assert!(matches!(read_samples("phi_1,y\n1,nan\n".as_bytes()), Err(FormatError::Row { .. })));
    }

    #[test]
    fn support_encoding() {
        let s = BTreeSet::from([2, 5, 10]);
        assert_eq!(encode_support(&s), "2;5;10");
        assert_eq!(decode_support("2;5;10").unwrap(), s);
        assert!(decode_support("").unwrap().is_empty());
        assert!(decode_support("a").is_err());
    }

    #[test]
    fn zeros_are_literal() {
        let mut buf = Vec::new();
        write_samples(&mut buf, &[RegressionSample::from_slice(&[0.0, -0.0], 0.25)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "phi_1,phi_2,y\n0,0,0.25\n");
    }

    proptest! {
        #[test]
        fn sample_csv_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let samples: Vec<_> = rows.iter().map(|r| RegressionSample::from_slice(&r[..2], r[2])).collect();
            let mut buf = Vec::new();
            write_samples(&mut buf, &samples).unwrap();
            prop_assert_eq!(read_samples(buf.as_slice()).unwrap(), samples);
        }

        #[test]
        fn trajectory_round_trip(vals in prop::collection::vec(-1e3f64..1e3, 9), n in 1usize..10_000) {
            let line = TrajectoryLine {
                n,
                theta: DVector::from_column_slice(&vals[0..3]),
                beta: DVector::from_column_slice(&vals[3..6]),
                alpha: vals[6].abs(),
                lambda_min: vals[7].abs(),
                r_n: vals[8].abs() + 1.0,
            };
            let mut buf = Vec::new();
            write_trajectory(&mut buf, std::slice::from_ref(&line)).unwrap();
            prop_assert_eq!(read_trajectory(buf.as_slice()).unwrap(), vec![line]);
        }
    }
}
