//! Generalized unicity distances, DSR/QNDM key-security bounds and the
//! quantum-data-locking efficiency `η`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::receivers::{check_dsr_range, dsr_capacity_unchecked};

/// A unicity lower bound in slots, or the exhaustive-search ceiling
/// `2^|K|` when the per-slot information is too small to beat it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum UnicityBound {
    Slots(f64),
    /// Exceeds the `2^|K|` cap; the payload is `|K|`.
    CappedAtKeyspace(u32),
}

impl UnicityBound {
    pub fn is_capped(&self) -> bool {
        matches!(self, UnicityBound::CappedAtKeyspace(_))
    }

    /// Finite slot count, `None` when capped.
    pub fn slots(&self) -> Option<f64> {
        match *self {
            UnicityBound::Slots(v) => Some(v),
            UnicityBound::CappedAtKeyspace(_) => None,
        }
    }

    /// The bound as a number; the cap is reported as `2^|K|`.
    pub fn value(&self) -> f64 {
        match *self {
            UnicityBound::Slots(v) => v,
            UnicityBound::CappedAtKeyspace(k) => 2f64.powi(k as i32),
        }
    }
}

/// `n ≥ |K|/C₁`, capped at `2^|K|`.
pub fn unicity_lower_bound(key_bits: u32, c1: f64) -> Result<UnicityBound> {
    if key_bits < 1 {
        return Err(invalid("key must have at least one bit"));
    }
    if !(c1 >= 0.0) {
        return Err(invalid(format!("C1 must be non-negative, got {c1}")));
    }
    let k = key_bits as f64;
    let cap = 2f64.powi(key_bits as i32);
    if c1 <= k / cap {
        return Ok(UnicityBound::CappedAtKeyspace(key_bits));
    }
    Ok(UnicityBound::Slots(k / c1))
}

/// DSR unicity `|K| / log₂(π|α| / (2|R_p|))`.
pub fn dsr_unicity(key_bits: u32, amplitude: f64, r_p: f64) -> Result<UnicityBound> {
    check_dsr_range(amplitude, r_p)?;
    if key_bits == 0 {
        return Ok(UnicityBound::Slots(0.0));
    }
    unicity_lower_bound(key_bits, dsr_capacity_unchecked(amplitude, r_p))
}

/// Independent bounds for the two QNDM keys `K_{S1}`, `K_{S2}`.
pub fn qndm_unicity(key_bits_1: u32, key_bits_2: u32, c1: f64) -> Result<(UnicityBound, UnicityBound)> {
    Ok((unicity_lower_bound(key_bits_1, c1)?, unicity_lower_bound(key_bits_2, c1)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockingEta {
    pub eta: f64,
    /// `H(X|Y) = H(K)/η`.
    pub h_x_given_y: f64,
}

/// `η = H(K) / (I_with - I_without)`.
pub fn locking_eta(key_entropy: f64, info_with_key: f64, info_without_key: f64) -> Result<LockingEta> {
    let denom = info_with_key - info_without_key;
    if !(denom > 0.0) {
        return Err(invalid(format!(
            "need I_with > I_without, got {info_with_key} and {info_without_key}"
        )));
    }
    if !(key_entropy > 0.0) {
        return Err(invalid(format!("key entropy must be positive, got {key_entropy}")));
    }
    let eta = key_entropy / denom;
    Ok(LockingEta {
        eta,
        h_x_given_y: key_entropy / eta,
    })
}

/// BB84-basis locking of an `n`-bit message with a 1-bit key:
/// `I_with = n`, `I_without = n/2`.
pub fn bb84_locking(n: u32) -> Result<LockingEta> {
    if n < 1 {
        return Err(invalid("message length must be at least 1"));
    }
    let n = n as f64;
    locking_eta(1.0, n, n / 2.0)
}

/// Key entropy `4 log₂(1/ε)` needed to lock to accuracy `ε`.
pub fn locking_key_requirement(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok(4.0 * (1.0 / epsilon).log2())
}

/// `log₂(n)/n`.
pub fn eta_asymptotic(n: u32) -> Result<f64> {
    if n < 2 {
        return Err(invalid("n must be at least 2"));
    }
    Ok((n as f64).log2() / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Y00,
    Qndm,
    Dsr,
    Locking,
}

/// Where `C₁` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C1Provenance {
    AnalyticUniformChannel,
    AnalyticDsrWedge,
    Empirical,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub scenario: Scenario,
    pub key_bits: u32,
    pub c1_bits_per_slot: f64,
    pub c1_provenance: C1Provenance,
    pub unicity_lower: UnicityBound,
    /// `2^|K|`.
    pub unicity_cap: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eta: Option<f64>,
}

impl SecurityReport {
    pub fn new(scenario: Scenario, key_bits: u32, c1: f64, provenance: C1Provenance) -> Result<Self> {
        Ok(Self {
            scenario,
            key_bits,
            c1_bits_per_slot: c1,
            c1_provenance: provenance,
            unicity_lower: unicity_lower_bound(key_bits, c1)?,
            unicity_cap: 2f64.powi(key_bits as i32),
            eta: None,
        })
    }
}
