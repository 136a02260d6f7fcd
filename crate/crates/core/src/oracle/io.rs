use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use super::LpInstance;
use crate::error::{Error, Result};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn as_usize(v: &Value, key: &str) -> Result<usize> {
    v.get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .ok_or_else(|| parse_err(format!("missing or invalid `{key}`")))
}

fn flat_numbers(v: &Value, key: &str) -> Result<Vec<f64>> {
    let arr = v
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err(format!("missing array `{key}`")))?;
    let mut out = Vec::new();
    for item in arr {
        match item {
            Value::Array(inner) => {
                for x in inner {
                    out.push(x.as_f64().ok_or_else(|| parse_err(format!("non-number in `{key}`")))?);
                }
            }
            x => out.push(x.as_f64().ok_or_else(|| parse_err(format!("non-number in `{key}`")))?),
        }
    }
    Ok(out)
}

/// JSON object `{"n","d","A","b","c","x0"?}`; `A` is row-major, either flat
/// or as an array of rows.
pub fn parse_instance_json(text: &str) -> Result<LpInstance> {
    let v: Value = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let n = as_usize(&v, "n")?;
    let d = as_usize(&v, "d")?;
    let a = flat_numbers(&v, "A")?;
    if a.len() != n * d {
        return Err(Error::Shape(format!("A has {} entries, want {}", a.len(), n * d)));
    }
    let b = flat_numbers(&v, "b")?;
    let c = flat_numbers(&v, "c")?;
    let x0 = match v.get("x0") {
        None | Some(Value::Null) => None,
        Some(_) => Some(DVector::from_vec(flat_numbers(&v, "x0")?)),
    };
    LpInstance::new(
        DMatrix::from_row_slice(n, d, &a),
        DVector::from_vec(b),
        DVector::from_vec(c),
        x0,
    )
}

/// Plain text: `n d`, then `n` lines `a_i1 … a_id b_i`, then a line with `c`,
/// then optionally a line with `x0`.
pub fn parse_instance_text(text: &str) -> Result<LpInstance> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let nums = |line: &str| -> Result<Vec<f64>> {
        line.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(format!("bad number `{t}`"))))
            .collect()
    };
    let header = lines.next().ok_or_else(|| parse_err("empty input"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(format!("bad dimension `{t}`"))))
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(parse_err("first line must be `n d`"));
    }
    let (n, d) = (dims[0], dims[1]);
    let mut a = Vec::with_capacity(n * d);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        let line = lines.next().ok_or_else(|| parse_err(format!("missing row {}", i + 1)))?;
        let row = nums(line)?;
        if row.len() != d + 1 {
            return Err(parse_err(format!("row {} has {} numbers, want {}", i + 1, row.len(), d + 1)));
        }
        a.extend_from_slice(&row[..d]);
        b.push(row[d]);
    }
    let c = nums(lines.next().ok_or_else(|| parse_err("missing cost line"))?)?;
    let x0 = match lines.next() {
        Some(line) => Some(DVector::from_vec(nums(line)?)),
        None => None,
    };
    if lines.next().is_some() {
        return Err(parse_err("trailing lines after x0"));
    }
    LpInstance::new(DMatrix::from_row_slice(n, d, &a), DVector::from_vec(b), DVector::from_vec(c), x0)
}

/// Picks the JSON parser when the text starts with `{`, the text parser
/// otherwise.
pub fn parse_instance(text: &str) -> Result<LpInstance> {
    if text.trim_start().starts_with('{') {
        parse_instance_json(text)
    } else {
        parse_instance_text(text)
    }
}

pub fn load_instance(path: &Path) -> Result<LpInstance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_json_agree() {
        let text = "2 1\n1 0\n-1 -1\n1\n0.5\n";
        let json = r#"{"n":2,"d":1,"A":[[1],[-1]],"b":[0,-1],"c":[1],"x0":[0.5]}"#;
        assert_eq!(parse_instance(text).unwrap(), parse_instance(json).unwrap());
    }

    #[test]
    fn malformed_inputs_fail() {
        assert!(parse_instance("2 1\n1 0\n").is_err());
        assert!(parse_instance(r#"{"n":2,"d":1,"A":[1],"b":[0,0],"c":[1]}"#).is_err());
        assert!(parse_instance("").is_err());
    }

    #[test]
    fn json_roundtrip() {
        let inst = super::super::gen_random_tall_lp(12, 2, 3).unwrap();
        assert_eq!(parse_instance(&inst.to_json()).unwrap(), inst);
    }
}
