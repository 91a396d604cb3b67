//! Problem file format.
//!
//! A problem file is a JSON object:
//!
//! ```json
//! { "v": 1, "label": "...", "sigma": [..], "x_true": [..], "y_exact": [..] }
//! ```
//!
//! Floats are written in shortest round-trip decimal form, so a save/load
//! cycle reproduces every finite value bit for bit. Loading validates the
//! operator invariants and `y_exact = σ·x_true`.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::spectral::{validate_sigma, ProblemInstance, SpectralOperator, SpectralVector};

pub const SCHEMA_VERSION: u64 = 1;

pub fn to_json(instance: &ProblemInstance) -> Value {
    json!({
        "v": SCHEMA_VERSION,
        "label": instance.label(),
        "sigma": instance.operator().sigma(),
        "x_true": instance.x_true().coeffs(),
        "y_exact": instance.y_exact().coeffs(),
    })
}

pub fn from_json(value: &Value) -> Result<ProblemInstance> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::schema("<root>", "expected an object"))?;
    match obj.get("v").and_then(Value::as_u64) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => return Err(Error::schema("v", format!("unsupported version {other}"))),
        None => return Err(Error::schema("v", "missing or not an integer")),
    }
    let label = obj
        .get("label")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::schema("label", "missing or not a string"))?;
    let sigma = float_array(obj, "sigma")?;
    validate_sigma(&sigma).map_err(|reason| Error::schema("sigma", reason))?;
    let x_true = float_array(obj, "x_true")?;
    let y_exact = float_array(obj, "y_exact")?;
    if x_true.len() != sigma.len() {
        return Err(Error::schema("x_true", format!("length {} != {}", x_true.len(), sigma.len())));
    }
    if y_exact.len() != sigma.len() {
        return Err(Error::schema("y_exact", format!("length {} != {}", y_exact.len(), sigma.len())));
    }
    let op = SpectralOperator::new(sigma).map_err(|e| Error::schema("sigma", e.to_string()))?;
    ProblemInstance::from_parts(op, SpectralVector(x_true), SpectralVector(y_exact), label)
}

fn float_array(obj: &Map<String, Value>, field: &str) -> Result<Vec<f64>> {
    let arr = obj
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::schema(field, "missing or not an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_f64()
                .ok_or_else(|| Error::schema(field, format!("entry {i} is not a number")))
        })
        .collect()
}

pub fn save(instance: &ProblemInstance, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&to_json(instance)).expect("json encoding");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    from_json(&value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_operator, make_solution, Decay, Smoothness};

    fn instance() -> ProblemInstance {
        let op = make_operator(Decay::Geometric { base: 0.7 }, 60, 1.0).unwrap();
        let x = make_solution(&op, Smoothness::Power { nu: 0.3 }, Some(9)).unwrap();
        ProblemInstance::new(op, x, "geo").unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let inst = instance();
        save(&inst, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back, inst);
        for (a, b) in back.x_true().coeffs().iter().zip(inst.x_true().coeffs()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn unsorted_sigma_is_schema_error() {
        let v = json!({"v": 1, "label": "a", "sigma": [0.5, 1.0], "x_true": [1.0, 1.0], "y_exact": [0.5, 1.0]});
        match from_json(&v) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "sigma"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inconsistent_data_is_schema_error() {
        let v = json!({"v": 1, "label": "a", "sigma": [1.0, 0.5], "x_true": [1.0, 1.0], "y_exact": [1.0, 0.6]});
        match from_json(&v) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "y_exact"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_fields_are_named() {
        let v = json!({"v": 1, "sigma": [1.0, 0.5], "x_true": [1.0, 1.0], "y_exact": [1.0, 0.5]});
        assert!(matches!(from_json(&v), Err(Error::Schema { field, .. }) if field == "label"));
        let v = json!({"v": 2, "label": "a"});
        assert!(matches!(from_json(&v), Err(Error::Schema { field, .. }) if field == "v"));
        let v = json!({"v": 1, "label": "a", "sigma": [1.0, "x"], "x_true": [], "y_exact": []});
        assert!(matches!(from_json(&v), Err(Error::Schema { field, .. }) if field == "sigma"));
    }
}
