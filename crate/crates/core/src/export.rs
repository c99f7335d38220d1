//! CSV and JSON artifact writers. Every file is written to a temporary
//! sibling and renamed into place.

use std::fs;
use std::io;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::approx::ReportRow;
use crate::ifs::Word;
use crate::measure::EmpiricalMeasure;
use crate::opspace::{LevelOperator, LeveledVector};
use crate::word_algebra::CuntzPolynomial;

pub const CONVERGENCE_HEADER: [&str; 5] =
    ["k", "error_sup", "matrix_error", "certified_bound", "decay_ratio"];

/// Result record for one measure diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperationReport {
    pub operation: String,
    pub parameters: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<serde_json::Value>,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        fmt_f64(c.re)
    } else {
        let sign = if c.im.is_sign_negative() { '-' } else { '+' };
        format!("{}{}{}i", c.re, sign, c.im.abs())
    }
}

/// Sample cloud with header `x_0,...,x_{d-1}`.
pub fn measure_csv(m: &EmpiricalMeasure) -> io::Result<Vec<u8>> {
    let d = m.points().first().map_or(0, Vec::len);
    let header: Vec<String> = (0..d).map(|j| format!("x_{j}")).collect();
    csv_bytes(
        &header,
        m.points().iter().map(|p| p.iter().map(|v| fmt_f64(*v)).collect()),
    )
}

/// `word,coefficient_re,coefficient_im`, words written as dot-separated letters.
pub fn vector_csv(v: &LeveledVector) -> io::Result<Vec<u8>> {
    let header = ["word", "coefficient_re", "coefficient_im"].map(String::from);
    csv_bytes(
        &header,
        Word::all(v.n(), v.level())
            .zip(v.coeffs())
            .map(|(w, c)| vec![w.to_string(), fmt_f64(c.re), fmt_f64(c.im)]),
    )
}

/// Dense matrix, row = codomain word rank, column = domain word rank. The
/// header row holds the domain words; the first column holds the codomain words.
pub fn operator_csv(op: &LevelOperator, n: usize) -> io::Result<Vec<u8>> {
    let m = op.to_dense();
    let mut header = vec![String::from("word")];
    header.extend(Word::all(n, op.domain_level()).map(|w| w.to_string()));
    let rows = Word::all(n, op.codomain_level()).enumerate().map(|(r, w)| {
        let mut row = vec![w.to_string()];
        row.extend((0..m.ncols()).map(|c| fmt_complex(m[(r, c)])));
        row
    });
    csv_bytes(&header, rows)
}

pub fn polynomial_json(p: &CuntzPolynomial) -> serde_json::Value {
    serde_json::to_value(p.to_records()).expect("records serialize")
}

/// Convergence table with header `k,error_sup,matrix_error,certified_bound,decay_ratio`;
/// an undefined ratio is an empty field.
pub fn convergence_csv(rows: &[ReportRow]) -> io::Result<Vec<u8>> {
    let header = CONVERGENCE_HEADER.map(String::from);
    csv_bytes(
        &header,
        rows.iter().map(|r| {
            vec![
                r.k.to_string(),
                fmt_f64(r.error_sup),
                fmt_f64(r.matrix_error),
                fmt_f64(r.certified_bound),
                r.decay_ratio.map(fmt_f64).unwrap_or_default(),
            ]
        }),
    )
}
