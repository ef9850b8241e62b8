//! Semiclassical Gaussian receivers: Bob's keyed homodyne detector, Eve's
//! keyless heterodyne detector, and the closed-form error and capacity
//! formulas built on them.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};

/// Homodyne noise variance (single quadrature).
pub const SIGMA_SQ_HOMODYNE: f64 = 0.25;
/// Heterodyne noise variance, summed over both quadratures.
pub const SIGMA_SQ_HETERODYNE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverKind {
    Homodyne,
    Heterodyne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverModel {
    kind: ReceiverKind,
    sigma_sq: f64,
}

impl ReceiverModel {
    pub fn homodyne() -> Self {
        Self {
            kind: ReceiverKind::Homodyne,
            sigma_sq: SIGMA_SQ_HOMODYNE,
        }
    }

    pub fn heterodyne() -> Self {
        Self {
            kind: ReceiverKind::Heterodyne,
            sigma_sq: SIGMA_SQ_HETERODYNE,
        }
    }

    pub fn kind(&self) -> ReceiverKind {
        self.kind
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }
}

/// Gaussian tail `Q(y) = ½ erfc(y/√2)`.
pub fn tail_q(y: f64) -> f64 {
    if y == f64::INFINITY {
        return 0.0;
    }
    if y == f64::NEG_INFINITY {
        return 1.0;
    }
    0.5 * erfc(y / SQRT_2)
}

/// Bob's binary error `Q(|α|/σ_ho) = Q(2|α|)`.
pub fn bob_error(amplitude: f64) -> Result<f64> {
    if !(amplitude > 0.0) {
        return Err(invalid(format!("amplitude must be positive, got {amplitude}")));
    }
    Ok(tail_q(amplitude.abs() / ReceiverModel::homodyne().sigma()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpacingMode {
    /// Neighbors `π/M` apart.
    Y00,
    /// Neighbors `2π/M²` apart.
    Qndm,
}

impl SpacingMode {
    pub fn delta(self, m: u32) -> f64 {
        let m = m as f64;
        match self {
            SpacingMode::Y00 => PI / m,
            SpacingMode::Qndm => 2.0 * PI / (m * m),
        }
    }
}

/// Eve's nearest-neighbor M-ary error `(2(M-1)/M) Q(Δ/(2σ_he))`,
/// `Δ = √2 |α| √(1 - cos δ)`, clipped to `[0, 1 - 1/M]`.
pub fn eve_error_mary(m: u32, amplitude: f64, mode: SpacingMode) -> Result<f64> {
    if m < 2 {
        return Err(invalid(format!("M must be at least 2, got {m}")));
    }
    if !(amplitude > 0.0) {
        return Err(invalid(format!("amplitude must be positive, got {amplitude}")));
    }
    let mf = m as f64;
    let delta = mode.delta(m);
    let dist = SQRT_2 * amplitude * (1.0 - delta.cos()).sqrt();
    let sigma = ReceiverModel::heterodyne().sigma();
    let p = 2.0 * (mf - 1.0) / mf * tail_q(dist / (2.0 * sigma));
    Ok(p.clamp(0.0, 1.0 - 1.0 / mf))
}

/// Symmetric M-ary channel: correct with `1 - (M-1)ε`, each wrong symbol `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformChannelSpec {
    #[serde(rename = "M")]
    m: u32,
    epsilon: f64,
}

impl UniformChannelSpec {
    pub fn new(m: u32, epsilon: f64) -> Result<Self> {
        if m < 2 {
            return Err(invalid(format!("M must be at least 2, got {m}")));
        }
        let total = (m - 1) as f64 * epsilon;
        if !(epsilon >= 0.0) || total > 1.0 + 1e-12 {
            return Err(invalid(format!("need 0 <= epsilon and (M-1)epsilon <= 1, got epsilon = {epsilon}")));
        }
        Ok(Self { m, epsilon })
    }

    /// Spreads a symbol error probability evenly over the wrong symbols.
    pub fn from_symbol_error(m: u32, p_error: f64) -> Result<Self> {
        if m < 2 {
            return Err(invalid(format!("M must be at least 2, got {m}")));
        }
        Self::new(m, p_error / (m - 1) as f64)
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

fn plogp_inv(p: f64) -> f64 {
    if p > 0.0 {
        p * (1.0 / p).log2()
    } else {
        0.0
    }
}

/// `C₁ = log₂M - [(1-(M-1)ε) log₂(1/(1-(M-1)ε)) + (M-1)ε log₂(1/ε)]`.
pub fn capacity_uniform(spec: &UniformChannelSpec) -> f64 {
    let m = spec.m as f64;
    let wrong = ((m - 1.0) * spec.epsilon).min(1.0);
    let right = (1.0 - wrong).max(0.0);
    let h = plogp_inv(right) + if spec.epsilon > 0.0 { wrong * (1.0 / spec.epsilon).log2() } else { 0.0 };
    (m.log2() - h).max(0.0)
}

/// Wedge-approximation heterodyne information under DSR,
/// `log₂(π|α| / (2|R_p|))`, floored at zero.
pub fn dsr_capacity(amplitude: f64, r_p: f64) -> Result<f64> {
    check_dsr_range(amplitude, r_p)?;
    Ok(dsr_capacity_unchecked(amplitude, r_p))
}

pub(crate) fn dsr_capacity_unchecked(amplitude: f64, r_p: f64) -> f64 {
    (PI * amplitude / (2.0 * r_p.abs())).log2().max(0.0)
}

/// `1 <= σ_he |R_p| <= π|α|/2`. The upper end is admitted so that the
/// boundary itself (zero capacity) can be evaluated.
pub(crate) fn check_dsr_range(amplitude: f64, r_p: f64) -> Result<()> {
    if !(amplitude > 0.0) {
        return Err(invalid(format!("amplitude must be positive, got {amplitude}")));
    }
    let s = ReceiverModel::heterodyne().sigma() * r_p.abs();
    let hi = PI * amplitude / 2.0;
    if !(s >= 1.0 && s <= hi * (1.0 + 1e-12)) {
        return Err(invalid(format!(
            "DSR strength out of range: need 1 <= sigma*|R_p| <= pi*|alpha|/2 = {hi:.6}, got {s}"
        )));
    }
    Ok(())
}
