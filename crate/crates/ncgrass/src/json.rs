//! JSON codecs for matrices and points.
//!
//! A layered matrix serializes as
//! `{"m", "n", "k", "mode", "data"}` with `data` the row-major scalar
//! entries as `[re, im]` pairs: strings like `"3/4"` in exact mode (plain
//! integers allowed on input), numbers in float mode. Rectangular shapes
//! add `"rows"`/`"cols"` for the outer layer and `"ncols"` for the middle
//! layer; absent, the shape is square with outer side `m` and middle side
//! `n`. Points wrap a matrix: `{"d", "m", "rep"}` for Grassmannian classes
//! and `{"sig", "m", "rep"}` for flags.

use crate::error::{Error, Result};
use crate::flag::{FlagPoint, FlagSignature};
use crate::grassmann::GrassPoint;
use crate::matrix::{LayeredMatrix, Mat};
use crate::scalar::{parse_rational, rational_string, GaussRat, Mode, Scalar};
use num::complex::Complex64;
use serde_json::{json, Value};

fn scalar_to_json(s: &Scalar) -> Value {
    match s {
        Scalar::Exact(g) => json!([rational_string(&g.re), rational_string(&g.im)]),
        Scalar::Float(z) => json!([z.re, z.im]),
    }
}

fn scalar_from_json(v: &Value, mode: Mode) -> Result<Scalar> {
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Parse(format!("entry must be a [re, im] pair, got {v}")))?;
    match mode {
        Mode::Exact => {
            let parse = |p: &Value| -> Result<num::BigRational> {
                if let Some(s) = p.as_str() {
                    return parse_rational(s)
                        .ok_or_else(|| Error::Parse(format!("bad rational {s:?}")));
                }
                if let Some(i) = p.as_i64() {
                    return Ok(num::BigRational::from_integer(i.into()));
                }
                Err(Error::Parse(format!(
                    "exact entries are \"p/q\" strings or integers, got {p}"
                )))
            };
            Ok(Scalar::Exact(GaussRat::new(parse(&pair[0])?, parse(&pair[1])?)))
        }
        Mode::Float => {
            let parse = |p: &Value| -> Result<f64> {
                p.as_f64()
                    .ok_or_else(|| Error::Parse(format!("float entries are numbers, got {p}")))
            };
            Ok(Scalar::from_c64(Complex64::new(parse(&pair[0])?, parse(&pair[1])?)))
        }
    }
}

pub fn matrix_to_json(m: &LayeredMatrix) -> Value {
    let data: Vec<Value> = m.mat().entries().iter().map(scalar_to_json).collect();
    let mut obj = json!({
        "m": m.outer_rows(),
        "n": m.mid_rows(),
        "k": m.inner(),
        "mode": m.mode().as_str(),
        "data": data,
    });
    if m.outer_rows() != m.outer_cols() {
        obj["rows"] = json!(m.outer_rows());
        obj["cols"] = json!(m.outer_cols());
    }
    if m.mid_rows() != m.mid_cols() {
        obj["ncols"] = json!(m.mid_cols());
    }
    obj
}

fn usize_field(v: &Value, key: &str) -> Result<usize> {
    v.get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .ok_or_else(|| Error::Parse(format!("missing or bad field {key:?}")))
}

pub fn matrix_from_json(v: &Value) -> Result<LayeredMatrix> {
    let m = usize_field(v, "m")?;
    let n = usize_field(v, "n")?;
    let k = usize_field(v, "k")?;
    let mode = match v.get("mode").and_then(Value::as_str) {
        Some("exact") => Mode::Exact,
        Some("float") => Mode::Float,
        other => return Err(Error::Parse(format!("mode must be exact or float, got {other:?}"))),
    };
    let outer_rows = if v.get("rows").is_some() { usize_field(v, "rows")? } else { m };
    let outer_cols = if v.get("cols").is_some() { usize_field(v, "cols")? } else { m };
    let mid_cols = if v.get("ncols").is_some() { usize_field(v, "ncols")? } else { n };
    if outer_rows == 0 || outer_cols == 0 || n == 0 || mid_cols == 0 || k == 0 {
        return Err(Error::Parse("all layer sizes must be positive".into()));
    }
    let data = v
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("missing data array".into()))?;
    let rows = outer_rows * n * k;
    let cols = outer_cols * mid_cols * k;
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "data has {} entries, shape needs {}",
            data.len(),
            rows * cols
        )));
    }
    let mut entries = Vec::with_capacity(data.len());
    for e in data {
        entries.push(scalar_from_json(e, mode)?);
    }
    let mat = Mat::from_entries(rows, cols, mode, entries)?;
    LayeredMatrix::new(mat, outer_rows, outer_cols, n, mid_cols, k)
}

/// Scalar matrices travel as layered matrices with trivial outer and inner
/// layers.
pub fn mat_to_json(m: &Mat) -> Result<Value> {
    Ok(matrix_to_json(&LayeredMatrix::new(
        m.clone(),
        1,
        1,
        m.rows(),
        m.cols(),
        1,
    )?))
}

pub fn mat_from_json(v: &Value) -> Result<Mat> {
    let lay = matrix_from_json(v)?;
    if lay.outer_rows() != 1 || lay.outer_cols() != 1 || lay.inner() != 1 {
        return Err(Error::Parse(
            "expected a plain matrix (outer and inner layers of size 1)".into(),
        ));
    }
    Ok(lay.into_mat())
}

pub fn grass_to_json(p: &GrassPoint) -> Value {
    json!({
        "d": p.d(),
        "m": p.m(),
        "rep": matrix_to_json(p.rep()),
    })
}

pub fn grass_from_json(v: &Value, tol: f64) -> Result<GrassPoint> {
    let d = usize_field(v, "d")?;
    let m = usize_field(v, "m")?;
    let rep = matrix_from_json(
        v.get("rep").ok_or_else(|| Error::Parse("missing rep".into()))?,
    )?;
    GrassPoint::new(d, m, rep, tol)
}

pub fn flag_to_json(p: &FlagPoint) -> Value {
    json!({
        "sig": p.sig().dims(),
        "m": p.m(),
        "rep": matrix_to_json(p.rep()),
    })
}

pub fn flag_from_json(v: &Value, tol: f64) -> Result<FlagPoint> {
    let dims: Vec<usize> = v
        .get("sig")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("missing sig array".into()))?
        .iter()
        .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(|| Error::Parse("bad sig entry".into())))
        .collect::<Result<_>>()?;
    let m = usize_field(v, "m")?;
    let rep = matrix_from_json(
        v.get("rep").ok_or_else(|| Error::Parse("missing rep".into()))?,
    )?;
    FlagPoint::new(FlagSignature::new(dims, m)?, rep, tol)
}
