//! Browser bindings. Each export returns a JSON string.

use qsc_core::constellation::{masking_metrics, PhaseConstellation, QndmConstellation, Y00Constellation, DEFAULT_LAMBDA};
use qsc_core::receivers::{bob_error, capacity_uniform, eve_error_mary, ReceiverModel, SpacingMode, UniformChannelSpec};
use qsc_core::security_metrics::{qndm_unicity, unicity_lower_bound};
use qsc_core::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_CURVE_POINTS: u32 = 2000;

fn constellation_for(scheme: &str, m: u32, alpha: f64) -> Result<Box<dyn PhaseConstellation>> {
    match scheme {
        "y00" => Ok(Box::new(Y00Constellation::new(m, alpha)?)),
        "qndm" => Ok(Box::new(QndmConstellation::new(m, alpha)?)),
        other => Err(Error::InvalidParameter(format!("unknown scheme '{other}'"))),
    }
}

fn mode_for(scheme: &str) -> SpacingMode {
    if scheme == "qndm" {
        SpacingMode::Qndm
    } else {
        SpacingMode::Y00
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

pub fn constellation_json(scheme: &str, m: u32, alpha: f64) -> Result<String> {
    Ok(json(&constellation_for(scheme, m, alpha)?.to_json_document()))
}

#[derive(Debug, Serialize)]
struct Curves {
    alpha: Vec<f64>,
    bob: Vec<f64>,
    eve: Vec<f64>,
    c1: Vec<f64>,
}

/// Bob's homodyne error, Eve's M-ary heterodyne error and `C₁` over
/// `alpha ∈ (0, alpha_max]`.
pub fn error_curves_json(scheme: &str, m: u32, alpha_max: f64, points: u32) -> Result<String> {
    if !(alpha_max.is_finite() && alpha_max > 0.0) {
        return Err(Error::InvalidParameter("alpha_max must be positive".into()));
    }
    if !(2..=MAX_CURVE_POINTS).contains(&points) {
        return Err(Error::InvalidParameter(format!("points must lie in 2..={MAX_CURVE_POINTS}")));
    }
    let mode = mode_for(scheme);
    constellation_for(scheme, m, 1.0)?;
    let mut c = Curves {
        alpha: Vec::new(),
        bob: Vec::new(),
        eve: Vec::new(),
        c1: Vec::new(),
    };
    for i in 1..=points {
        let a = alpha_max * i as f64 / points as f64;
        let eve = eve_error_mary(m, a, mode)?;
        c.alpha.push(a);
        c.bob.push(bob_error(a)?);
        c.eve.push(eve);
        c.c1.push(capacity_uniform(&UniformChannelSpec::from_symbol_error(m, eve)?));
    }
    Ok(json(&c))
}

#[derive(Debug, Serialize)]
struct Summary {
    scheme: String,
    #[serde(rename = "M")]
    m: u32,
    alpha: f64,
    points: usize,
    bob_error: f64,
    eve_error: f64,
    c1: f64,
    gamma_q: f64,
    masked_points: u64,
    masked_blocks: u64,
    masking_met: bool,
    unicity_slots: Option<f64>,
    unicity_capped: bool,
    unicity_key_2_slots: Option<f64>,
}

pub fn security_summary_json(scheme: &str, m: u32, alpha: f64, key_bits: u32, lambda: f64) -> Result<String> {
    let c = constellation_for(scheme, m, alpha)?;
    let mode = mode_for(scheme);
    let mask = masking_metrics(c.as_ref(), ReceiverModel::heterodyne().sigma(), lambda);
    let eve = eve_error_mary(m, alpha, mode)?;
    let c1 = capacity_uniform(&UniformChannelSpec::from_symbol_error(m, eve)?);
    let (u1, u2) = match mode {
        SpacingMode::Qndm => {
            let (a, b) = qndm_unicity(key_bits, key_bits, c1)?;
            (a, Some(b))
        }
        SpacingMode::Y00 => (unicity_lower_bound(key_bits, c1)?, None),
    };
    Ok(json(&Summary {
        scheme: scheme.to_string(),
        m,
        alpha,
        points: c.len(),
        bob_error: bob_error(alpha)?,
        eve_error: eve,
        c1,
        gamma_q: mask.gamma_q,
        masked_points: mask.masked_points,
        masked_blocks: mask.masked_blocks,
        masking_met: mask.condition_met,
        unicity_slots: u1.slots(),
        unicity_capped: u1.is_capped(),
        unicity_key_2_slots: u2.and_then(|u| u.slots()),
    }))
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

/// Labeled points of the `y00` or `qndm` constellation.
#[wasm_bindgen]
pub fn constellation(scheme: &str, m: u32, alpha: f64) -> std::result::Result<String, JsError> {
    js(constellation_json(scheme, m, alpha))
}

#[wasm_bindgen]
pub fn error_curves(scheme: &str, m: u32, alpha_max: f64, points: u32) -> std::result::Result<String, JsError> {
    js(error_curves_json(scheme, m, alpha_max, points))
}

/// Masking and unicity summary; `lambda <= 0` selects the default Λ.
#[wasm_bindgen]
pub fn security_summary(scheme: &str, m: u32, alpha: f64, key_bits: u32, lambda: f64) -> std::result::Result<String, JsError> {
    let lambda = if lambda > 0.0 { lambda } else { DEFAULT_LAMBDA };
    js(security_summary_json(scheme, m, alpha, key_bits, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn constellation_point_counts() {
        let v: Value = serde_json::from_str(&constellation_json("qndm", 4, 1.0).unwrap()).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 32);
        let v: Value = serde_json::from_str(&constellation_json("y00", 2, 1.0).unwrap()).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 4);
        assert!(constellation_json("psk", 4, 1.0).is_err());
    }

    #[test]
    fn curves_are_ordered() {
        let v: Value = serde_json::from_str(&error_curves_json("y00", 16, 4.0, 40).unwrap()).unwrap();
        let bob = v["bob"].as_array().unwrap();
        let eve = v["eve"].as_array().unwrap();
        assert_eq!(bob.len(), 40);
        for (b, e) in bob.iter().zip(eve) {
            assert!(b.as_f64().unwrap() <= e.as_f64().unwrap());
        }
        assert!(error_curves_json("y00", 16, 4.0, 1).is_err());
    }

    #[test]
    fn masked_qndm_summary() {
        let v: Value = serde_json::from_str(&security_summary_json("qndm", 16, 0.5, 128, DEFAULT_LAMBDA).unwrap()).unwrap();
        assert_eq!(v["masking_met"], true);
        assert!(v["c1"].as_f64().unwrap() < 1e-3);
        assert_eq!(v["points"], 512);
    }
}
