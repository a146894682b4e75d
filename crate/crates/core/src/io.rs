//! JSON wire formats for algebras, elements, channels and predual matrices.
//!
//! Complex scalars are written as `[re, im]`; plain numbers are accepted on
//! input. Every parse error names the offending field by its JSON path.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::algebra::{AlgebraElement, Block, DensityElement, TracialAlgebra};
use crate::channel::{KrausChannel, LinearMap};
use crate::error::{FidError, Result};
use crate::linalg::{c, CMat};
use crate::predual::PredualMatrix;

fn err(path: &str, msg: impl std::fmt::Display) -> FidError {
    FidError::Parse(format!("{path}: {msg}"))
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| err(path, format!("missing field \"{key}\"")))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| err(path, "expected an array"))
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| err(&path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| err(&path.display().to_string(), e))
}

pub fn complex_to_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn complex_from_json(v: &Value, path: &str) -> Result<Complex64> {
    if let Some(x) = v.as_f64() {
        return Ok(c(x, 0.0));
    }
    match v.as_array().map(Vec::as_slice) {
        Some([re, im]) => match (re.as_f64(), im.as_f64()) {
            (Some(re), Some(im)) => Ok(c(re, im)),
            _ => Err(err(path, "complex entries must be numbers")),
        },
        _ => Err(err(path, "expected a number or [re, im]")),
    }
}

pub fn matrix_to_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect())).collect(),
    )
}

/// Square `d × d` matrix given as an array of rows.
pub fn matrix_from_json(v: &Value, d: usize, path: &str) -> Result<CMat> {
    let rows = array(v, path)?;
    if rows.len() != d {
        return Err(err(path, format!("expected {d} rows, got {}", rows.len())));
    }
    let mut m = CMat::zeros(d, d);
    for (i, row) in rows.iter().enumerate() {
        let rpath = format!("{path}[{i}]");
        let entries = array(row, &rpath)?;
        if entries.len() != d {
            return Err(err(&rpath, format!("expected {d} entries, got {}", entries.len())));
        }
        for (j, e) in entries.iter().enumerate() {
            m[(i, j)] = complex_from_json(e, &format!("{rpath}[{j}]"))?;
        }
    }
    Ok(m)
}

pub fn algebra_to_json(alg: &TracialAlgebra) -> Value {
    json!({ "blocks": alg.blocks().iter().map(|b| json!({"dim": b.dim, "weight": b.weight})).collect::<Vec<_>>() })
}

pub fn algebra_from_json(v: &Value, path: &str) -> Result<Arc<TracialAlgebra>> {
    let bpath = format!("{path}.blocks");
    let blocks = array(field(v, "blocks", path)?, &bpath)?;
    let mut out = Vec::with_capacity(blocks.len());
    for (k, b) in blocks.iter().enumerate() {
        let p = format!("{bpath}[{k}]");
        let dim =
            field(b, "dim", &p)?.as_u64().ok_or_else(|| err(&format!("{p}.dim"), "expected a positive integer"))?;
        let weight = match b.get("weight") {
            None => 1.0,
            Some(w) => w.as_f64().ok_or_else(|| err(&format!("{p}.weight"), "expected a number"))?,
        };
        out.push(Block { dim: dim as usize, weight });
    }
    TracialAlgebra::new(out).map_err(|e| err(path, e))
}

fn blocks_from_json(v: &Value, alg: &Arc<TracialAlgebra>, path: &str) -> Result<Vec<CMat>> {
    let blocks = array(v, path)?;
    if blocks.len() != alg.num_blocks() {
        return Err(err(path, format!("expected {} blocks, got {}", alg.num_blocks(), blocks.len())));
    }
    blocks
        .iter()
        .zip(alg.blocks())
        .enumerate()
        .map(|(k, (m, b))| matrix_from_json(m, b.dim, &format!("{path}[{k}]")))
        .collect()
}

pub fn element_to_json(x: &AlgebraElement) -> Value {
    json!({
        "algebra": algebra_to_json(x.algebra()),
        "blocks": x.blocks().iter().map(matrix_to_json).collect::<Vec<_>>(),
    })
}

/// Parses an element object; `"algebra"` may be omitted when `default` is
/// given, and must match it when both are present.
pub fn element_from_json(v: &Value, default: Option<&Arc<TracialAlgebra>>, path: &str) -> Result<AlgebraElement> {
    let alg = match (v.get("algebra"), default) {
        (Some(a), Some(d)) => {
            let parsed = algebra_from_json(a, &format!("{path}.algebra"))?;
            if *parsed != **d {
                return Err(err(&format!("{path}.algebra"), format!("does not match the selected algebra {d}")));
            }
            d.clone()
        }
        (Some(a), None) => algebra_from_json(a, &format!("{path}.algebra"))?,
        (None, Some(d)) => d.clone(),
        (None, None) => return Err(err(path, "missing field \"algebra\"")),
    };
    let bpath = format!("{path}.blocks");
    let blocks = blocks_from_json(field(v, "blocks", path)?, &alg, &bpath)?;
    AlgebraElement::from_blocks(alg, blocks)
}

pub fn density_from_json(
    v: &Value,
    default: Option<&Arc<TracialAlgebra>>,
    psd_tol: f64,
    trace_tol: f64,
    path: &str,
) -> Result<DensityElement> {
    DensityElement::with_tolerances(element_from_json(v, default, path)?, psd_tol, trace_tol)
}

pub fn channel_to_json(ch: &KrausChannel) -> Value {
    json!({
        "algebra": algebra_to_json(ch.algebra()),
        "kraus": ch.kraus().iter().map(|a| Value::Array(a.blocks().iter().map(matrix_to_json).collect())).collect::<Vec<_>>(),
    })
}

/// Channel object `{"algebra", "kraus": [blocks, ...]}`. Each Kraus entry
/// is a blocks array or a full element object.
pub fn channel_from_json(
    v: &Value,
    default: Option<&Arc<TracialAlgebra>>,
    tp_tol: f64,
    path: &str,
) -> Result<KrausChannel> {
    let alg = match (v.get("algebra"), default) {
        (Some(a), _) => algebra_from_json(a, &format!("{path}.algebra"))?,
        (None, Some(d)) => d.clone(),
        (None, None) => return Err(err(path, "missing field \"algebra\"")),
    };
    let kpath = format!("{path}.kraus");
    let kraus = array(field(v, "kraus", path)?, &kpath)?
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let p = format!("{kpath}[{k}]");
            if a.is_object() {
                element_from_json(a, Some(&alg), &p)
            } else {
                AlgebraElement::from_blocks(alg.clone(), blocks_from_json(a, &alg, &p)?)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    KrausChannel::with_tolerance(alg, kraus, tp_tol)
}

pub fn linear_map_to_json(map: &LinearMap) -> Value {
    json!({
        "domain": algebra_to_json(map.domain()),
        "codomain": algebra_to_json(map.codomain()),
        "matrix": matrix_to_json(map.matrix()),
    })
}

pub fn predual_to_json(p: &PredualMatrix) -> Value {
    let n = p.n();
    json!({
        "n": n,
        "algebra": algebra_to_json(p.algebra()),
        "entries": (0..n).map(|i| (0..n).map(|j| Value::Array(p.entry(i, j).y.blocks().iter().map(matrix_to_json).collect())).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
}

/// `{"n", "algebra", "entries": [[blocks, ...], ...]}`, rows of entries.
pub fn predual_from_json(v: &Value, default: Option<&Arc<TracialAlgebra>>, path: &str) -> Result<PredualMatrix> {
    let n = field(v, "n", path)?
        .as_u64()
        .filter(|&n| n > 0)
        .ok_or_else(|| err(&format!("{path}.n"), "expected a positive integer"))? as usize;
    let alg = match (v.get("algebra"), default) {
        (Some(a), _) => algebra_from_json(a, &format!("{path}.algebra"))?,
        (None, Some(d)) => d.clone(),
        (None, None) => return Err(err(path, "missing field \"algebra\"")),
    };
    let epath = format!("{path}.entries");
    let rows = array(field(v, "entries", path)?, &epath)?;
    if rows.len() != n {
        return Err(err(&epath, format!("expected {n} rows, got {}", rows.len())));
    }
    let mut ys = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        let rpath = format!("{epath}[{i}]");
        let row = array(row, &rpath)?;
        if row.len() != n {
            return Err(err(&rpath, format!("expected {n} entries, got {}", row.len())));
        }
        for (j, e) in row.iter().enumerate() {
            let p = format!("{rpath}[{j}]");
            ys.push(if e.is_object() {
                element_from_json(e, Some(&alg), &p)?
            } else {
                AlgebraElement::from_blocks(alg.clone(), blocks_from_json(e, &alg, &p)?)?
            });
        }
    }
    PredualMatrix::from_operators(n, alg, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predual;
    use crate::random::{self, rng_from_seed};

    #[test]
    fn element_round_trip() {
        let alg = TracialAlgebra::from_pairs(&[(2, 1.0), (3, 0.5)]).unwrap();
        let x = random::random_element(&alg, &mut rng_from_seed(1));
        let v = element_to_json(&x);
        let text = serde_json::to_string(&v).unwrap();
        let back = element_from_json(&serde_json::from_str(&text).unwrap(), None, "x").unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn plain_numbers_and_default_algebra() {
        let v: Value = serde_json::from_str(r#"{"blocks": [[[0.5, 0], [0, [0.5, 0]]]]}"#).unwrap();
        let m2 = TracialAlgebra::matrix(2);
        let rho = density_from_json(&v, Some(&m2), 1e-10, 1e-9, "rho").unwrap();
        assert_eq!(*rho.element(), AlgebraElement::identity(&m2).scale_real(0.5));
        assert!(matches!(element_from_json(&v, None, "rho"), Err(FidError::Parse(m)) if m.contains("algebra")));
    }

    #[test]
    fn errors_name_the_field() {
        let v: Value = serde_json::from_str(
            r#"{"algebra": {"blocks": [{"dim": 2, "weight": 1}]}, "blocks": [[[1, 0], [0, "x"]]]}"#,
        )
        .unwrap();
        match element_from_json(&v, None, "sigma") {
            Err(FidError::Parse(m)) => assert!(m.starts_with("sigma.blocks[0][1][1]"), "{m}"),
            other => panic!("{other:?}"),
        }
        let v: Value = serde_json::from_str(
            r#"{"algebra": {"blocks": [{"dim": 2, "weight": -1}]}, "blocks": [[[1, 0], [0, 1]]]}"#,
        )
        .unwrap();
        assert!(matches!(element_from_json(&v, None, "s"), Err(FidError::Parse(m)) if m.starts_with("s.algebra:")));
    }

    #[test]
    fn channel_and_predual_round_trip() {
        let ch = KrausChannel::depolarizing_qubit(0.3).unwrap();
        let back = channel_from_json(&channel_to_json(&ch), None, 1e-10, "ch").unwrap();
        assert_eq!(back, ch);
        let omega = predual::identity_lift_example();
        let back = predual_from_json(&predual_to_json(&omega), None, "omega").unwrap();
        assert_eq!(back, omega);
    }
}
