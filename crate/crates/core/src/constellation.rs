//! Phase-signal constellations for Y-00, OSK, QNDM and DSR.
//!
//! Angles are radians, canonicalized into `[0, 2π)`. Running keys are
//! 1-based (`1..=M`) as in the usual presentation of the protocol; bits are
//! `0` or `1`.
//!
//! Bit placement: a basis `{θ_j, θ_j + π}` carries the placement bit
//! `b' ⊕ parity(key)` in its upper/lower point, where `b'` is the (possibly
//! OSK-flipped) data bit. Y-00 uses the basis key `j`, QNDM uses the
//! first running key `K^{R1}`, so adjacent fine points inside a QNDM block
//! always carry opposite bits.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::C64;

/// Maps any finite angle into `[0, 2π)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs.
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Signed angular difference `a - b` wrapped into `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

fn parity(key: u32) -> u8 {
    (key & 1) as u8
}

fn check_bit(name: &str, b: u8) -> Result<()> {
    if b > 1 {
        return Err(invalid(format!("{name} must be 0 or 1, got {b}")));
    }
    Ok(())
}

fn check_key(name: &str, key: u32, m: u32) -> Result<()> {
    if key == 0 || key > m {
        return Err(invalid(format!("{name} = {key} outside 1..={m}")));
    }
    Ok(())
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(invalid(format!("amplitude must be positive, got {amplitude}")));
    }
    Ok(())
}

/// A coherent state `|α e^{iθ}⟩` on the phase circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    theta: f64,
    amplitude: f64,
}

impl PhasePoint {
    pub fn new(theta: f64, amplitude: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(invalid("phase must be finite"));
        }
        check_amplitude(amplitude)?;
        Ok(Self {
            theta: canonical_angle(theta),
            amplitude,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Complex amplitude `|α| e^{iθ}`.
    pub fn complex(&self) -> C64 {
        C64::from_polar(self.amplitude, self.theta)
    }
}

/// A constellation point together with the key/bit labels that select it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub theta: f64,
    pub k1: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k2: Option<u32>,
    pub bit: u8,
}

/// How placement bits are attached to the two points of a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitParityRule {
    /// Placement bit `b' ⊕ parity(key)`: `0` puts the symbol on `θ_j`,
    /// `1` on `θ_j + π`.
    KeyParityXor,
}

/// Overlap selection keying: keyed XOR flip of the data bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OskConfig {
    pub enabled: bool,
}

impl OskConfig {
    /// Effective Y-00 bit `X_Y00 = g(K_b, X) = X ⊕ K_b`, validating that an
    /// OSK bit is supplied exactly when OSK is enabled.
    pub fn apply(&self, bit: u8, osk_bit: Option<u8>) -> Result<u8> {
        check_bit("bit", bit)?;
        match (self.enabled, osk_bit) {
            (true, Some(k)) => {
                check_bit("osk_bit", k)?;
                Ok(bit ^ k)
            }
            (false, None) => Ok(bit),
            (true, None) => Err(invalid("OSK enabled but no OSK bit supplied")),
            (false, Some(_)) => Err(invalid("OSK bit supplied while OSK is disabled")),
        }
    }
}

/// Common view over the constellations, used by masking analysis and the
/// simulator.
pub trait PhaseConstellation {
    fn kind(&self) -> ConstellationKind;
    /// Number of communication bases `M`.
    fn bases(&self) -> u32;
    fn amplitude(&self) -> f64;
    fn points(&self) -> &[LabeledPoint];
    /// Angular spacing between adjacent points.
    fn spacing(&self) -> f64;
    /// Points inside one region `Γ_l` of angular width `π/M`.
    fn points_per_block(&self) -> usize;

    fn len(&self) -> usize {
        self.points().len()
    }

    fn is_empty(&self) -> bool {
        self.points().is_empty()
    }

    /// Index of the point nearest in phase to `theta`. Points are uniformly
    /// spaced starting at angle zero; a tie rounds to the lower index.
    fn nearest_index(&self, theta: f64) -> usize {
        let n = self.len();
        let pos = canonical_angle(theta) / self.spacing();
        let lower = pos.floor();
        let idx = if pos - lower > 0.5 { lower + 1.0 } else { lower };
        (idx as usize) % n
    }

    /// Index of the region `Γ_l` (0-based, `0..2M`) containing `theta`.
    /// Boundaries belong to the block starting there.
    fn block_of(&self, theta: f64) -> usize {
        let block = PI / self.bases() as f64;
        let l = (canonical_angle(theta) / block).floor() as usize;
        l.min(2 * self.bases() as usize - 1)
    }

    fn to_json_document(&self) -> ConstellationDocument {
        ConstellationDocument {
            kind: self.kind(),
            m: self.bases(),
            amplitude: self.amplitude(),
            delta: match self.kind() {
                ConstellationKind::Qndm => Some(self.spacing()),
                ConstellationKind::Y00 => None,
            },
            points: self.points().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Y00,
    Qndm,
}

/// Serialized constellation: `{kind, M, amplitude, delta?, points}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationDocument {
    pub kind: ConstellationKind,
    #[serde(rename = "M")]
    pub m: u32,
    pub amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
    pub points: Vec<LabeledPoint>,
}

/// The `2M`-point Y-00 constellation: `M` antipodal bases spaced `π/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Y00Constellation {
    m: u32,
    amplitude: f64,
    points: Vec<LabeledPoint>,
    bit_parity_rule: BitParityRule,
}

impl Y00Constellation {
    pub fn new(m: u32, amplitude: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid("number of bases M must be at least 1"));
        }
        check_amplitude(amplitude)?;
        let step = PI / m as f64;
        let points = (0..2 * m)
            .map(|p| {
                let key = p % m + 1;
                let half = (p / m) as u8;
                LabeledPoint {
                    theta: p as f64 * step,
                    k1: key,
                    k2: None,
                    bit: half ^ parity(key),
                }
            })
            .collect();
        Ok(Self {
            m,
            amplitude,
            points,
            bit_parity_rule: BitParityRule::KeyParityXor,
        })
    }

    pub fn bit_parity_rule(&self) -> BitParityRule {
        self.bit_parity_rule
    }

    /// Basis angle `θ_j = π (j-1)/M`; the mapping table `L` of the basic model.
    pub fn basis_angle(&self, key: u32) -> Result<f64> {
        check_key("key", key, self.m)?;
        Ok(PI * (key - 1) as f64 / self.m as f64)
    }

    /// Point index for `(key, effective bit)`.
    pub fn point_index(&self, key: u32, placed: u8) -> usize {
        ((key - 1) + self.m * (placed ^ parity(key)) as u32) as usize
    }

    /// Transmitted phase for running key `key`, data bit `bit` and optional
    /// OSK bit (`None` when OSK is not in use).
    pub fn encode_phase(&self, key: u32, bit: u8, osk_bit: Option<u8>) -> Result<PhasePoint> {
        check_key("key", key, self.m)?;
        check_bit("bit", bit)?;
        let placed = match osk_bit {
            Some(k) => {
                check_bit("osk_bit", k)?;
                bit ^ k
            }
            None => bit,
        };
        let p = self.point_index(key, placed);
        PhasePoint::new(self.points[p].theta, self.amplitude)
    }

    /// Keyed decision: given key and OSK bit, recover the data bit from a
    /// received phase by choosing the nearer point of the basis.
    pub fn decode_bit(&self, theta: f64, key: u32, osk_bit: Option<u8>) -> Result<u8> {
        let base = self.basis_angle(key)?;
        let upper = angle_diff(theta, base).abs() <= PI / 2.0;
        let half = u8::from(!upper);
        let placed = half ^ parity(key);
        Ok(match osk_bit {
            Some(k) => placed ^ k,
            None => placed,
        })
    }
}

impl PhaseConstellation for Y00Constellation {
    fn kind(&self) -> ConstellationKind {
        ConstellationKind::Y00
    }
    fn bases(&self) -> u32 {
        self.m
    }
    fn amplitude(&self) -> f64 {
        self.amplitude
    }
    fn points(&self) -> &[LabeledPoint] {
        &self.points
    }
    fn spacing(&self) -> f64 {
        PI / self.m as f64
    }
    fn points_per_block(&self) -> usize {
        1
    }
}

/// One column of a QNDM mapping pattern `L_k`: running key label, the basis
/// it selects (1-based) and the phase offset `(k-1) δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternEntry {
    pub label: u32,
    pub basis: u32,
    pub offset: f64,
}

/// The `2M²`-point QNDM constellation. Every region `Γ_l` of width `π/M`
/// holds `M` fine points `θ_l + kδ`, `δ = π/M²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QndmConstellation {
    m: u32,
    amplitude: f64,
    delta: f64,
    points: Vec<LabeledPoint>,
}

impl QndmConstellation {
    pub fn new(m: u32, amplitude: f64) -> Result<Self> {
        if m < 2 {
            return Err(invalid("QNDM needs M >= 2"));
        }
        check_amplitude(amplitude)?;
        let delta = PI / (m as f64 * m as f64);
        let mut points = Vec::with_capacity(2 * (m * m) as usize);
        for l in 0..2 * m {
            let basis = l % m;
            let half = (l / m) as u8;
            for k in 0..m {
                let k1 = k + 1;
                let k2 = (k + basis) % m + 1;
                points.push(LabeledPoint {
                    theta: (l * m + k) as f64 * delta,
                    k1,
                    k2: Some(k2),
                    bit: half ^ parity(k1),
                });
            }
        }
        Ok(Self {
            m,
            amplitude,
            delta,
            points,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The `2M` regions `Γ_1 … Γ_2M` in phase order, `M` points each.
    pub fn blocks(&self) -> impl Iterator<Item = &[LabeledPoint]> {
        self.points.chunks(self.m as usize)
    }

    /// Mapping pattern `L_k` (`k` in `1..=M`): labels shifted cyclically by
    /// `k-1` and every basis rotated by `(k-1) δ`.
    pub fn mapping_pattern(&self, k: u32) -> Result<Vec<PatternEntry>> {
        check_key("pattern", k, self.m)?;
        Ok((1..=self.m)
            .map(|j| PatternEntry {
                label: (j - 1 + k - 1) % self.m + 1,
                basis: j,
                offset: (k - 1) as f64 * self.delta,
            })
            .collect())
    }

    /// Global index of the point selected by the two running keys and the
    /// placed bit.
    pub fn point_index(&self, k1: u32, k2: u32, placed: u8) -> usize {
        let m = self.m;
        let basis = (k2 + m - k1) % m;
        let half = (placed ^ parity(k1)) as u32;
        (((basis + half * m) * m) + (k1 - 1)) as usize
    }

    /// Transmitted phase for pattern key `k1`, basis key `k2`, data bit and
    /// optional OSK bit.
    pub fn encode_phase(&self, k1: u32, k2: u32, bit: u8, osk_bit: Option<u8>) -> Result<PhasePoint> {
        check_key("k1", k1, self.m)?;
        check_key("k2", k2, self.m)?;
        check_bit("bit", bit)?;
        let placed = match osk_bit {
            Some(k) => {
                check_bit("osk_bit", k)?;
                bit ^ k
            }
            None => bit,
        };
        let q = self.point_index(k1, k2, placed);
        let p = &self.points[q];
        debug_assert_eq!((p.k1, p.k2), (k1, Some(k2)));
        PhasePoint::new(p.theta, self.amplitude)
    }

    /// Keyed decision for the QNDM scheme.
    pub fn decode_bit(&self, theta: f64, k1: u32, k2: u32, osk_bit: Option<u8>) -> Result<u8> {
        check_key("k1", k1, self.m)?;
        check_key("k2", k2, self.m)?;
        let base = self.points[self.point_index(k1, k2, parity(k1))].theta;
        let upper = angle_diff(theta, base).abs() <= PI / 2.0;
        let placed = u8::from(!upper) ^ parity(k1);
        Ok(match osk_bit {
            Some(k) => placed ^ k,
            None => placed,
        })
    }
}

impl PhaseConstellation for QndmConstellation {
    fn kind(&self) -> ConstellationKind {
        ConstellationKind::Qndm
    }
    fn bases(&self) -> u32 {
        self.m
    }
    fn amplitude(&self) -> f64 {
        self.amplitude
    }
    fn points(&self) -> &[LabeledPoint] {
        &self.points
    }
    fn spacing(&self) -> f64 {
        self.delta
    }
    fn points_per_block(&self) -> usize {
        self.m as usize
    }
}

/// Randomization law for DSR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DsrDensity {
    Uniform,
}

/// Deliberate signal randomization of arc-length strength `|R_p|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsrConfig {
    strength: f64,
    amplitude: f64,
    density: DsrDensity,
}

impl DsrConfig {
    /// Validated configuration: `1 <= σ_he |R_p| < π|α|/2`.
    pub fn new(strength: f64, amplitude: f64, sigma_he: f64) -> Result<Self> {
        check_amplitude(amplitude)?;
        let s = sigma_he * strength;
        if !(s >= 1.0 && s < PI * amplitude / 2.0) {
            return Err(invalid(format!(
                "DSR strength out of range: need 1 <= sigma*|R_p| < pi*|alpha|/2 = {:.6}, got {s}",
                PI * amplitude / 2.0
            )));
        }
        Ok(Self::unchecked(strength, amplitude))
    }

    /// Bypasses the range check; for limit studies (`|R_p| → 0`, or the
    /// boundary `|R_p| = π|α|/2`).
    pub fn unchecked(strength: f64, amplitude: f64) -> Self {
        Self {
            strength: strength.max(0.0),
            amplitude,
            density: DsrDensity::Uniform,
        }
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn density(&self) -> DsrDensity {
        self.density
    }

    /// Angular half-width `|R_p| / |α|` of the randomization.
    pub fn half_width(&self) -> f64 {
        self.strength / self.amplitude
    }
}

/// Draws the randomized phase `θ_r ~ U[θ - |R_p|/|α|, θ + |R_p|/|α|]`.
pub fn apply_dsr<R: Rng + ?Sized>(point: PhasePoint, config: &DsrConfig, rng: &mut R) -> PhasePoint {
    let w = config.half_width();
    let shift = if w > 0.0 { rng.random_range(-w..=w) } else { 0.0 };
    PhasePoint {
        theta: canonical_angle(point.theta + shift),
        amplitude: point.amplitude,
    }
}

/// Quantum-noise masking summary for a constellation at noise level `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskingReport {
    /// `Γ_Q = Mσ/(π|α|)`: number of basis gaps covered by one σ of arc.
    pub gamma_q: f64,
    /// Adjacent points within one σ of arc length.
    pub masked_points: u64,
    /// Whole regions `Γ_l` within one σ of arc length.
    pub masked_blocks: u64,
    pub lambda: f64,
    pub condition_met: bool,
}

/// Default masking factor `Λ`.
pub const DEFAULT_LAMBDA: f64 = 5.0;

/// Masking metrics. The QNDM condition compares the noise arc `σ` with `Λ`
/// spans of `2Mδ` (arc `|α|·2Mδ`); for Y-00 the span is one adjacent gap.
pub fn masking_metrics<C: PhaseConstellation + ?Sized>(c: &C, sigma: f64, lambda: f64) -> MaskingReport {
    let m = c.bases() as f64;
    let a = c.amplitude();
    let sigma = sigma.max(0.0);
    let gamma_q = m * sigma / (PI * a);
    let point_arc = a * c.spacing();
    let covered = sigma / point_arc;
    let span_points = match c.kind() {
        ConstellationKind::Qndm => 2.0 * m,
        ConstellationKind::Y00 => 1.0,
    };
    let condition_met = sigma > 0.0 && covered >= lambda * span_points;
    MaskingReport {
        gamma_q,
        masked_points: covered.floor() as u64,
        masked_blocks: gamma_q.floor() as u64,
        lambda,
        condition_met,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn y00_degenerate_bpsk() {
        let c = Y00Constellation::new(1, 1.0).unwrap();
        let thetas: Vec<f64> = c.points().iter().map(|p| p.theta).collect();
        assert_eq!(thetas, vec![0.0, PI]);
    }

    #[test]
    fn y00_m2_points() {
        let c = Y00Constellation::new(2, 1.0).unwrap();
        let thetas: Vec<f64> = c.points().iter().map(|p| p.theta).collect();
        assert_eq!(thetas, vec![0.0, PI / 2.0, PI, 3.0 * PI / 2.0]);
    }

    #[test]
    fn y00_rejects_bad_parameters() {
        assert!(Y00Constellation::new(0, 1.0).is_err());
        assert!(Y00Constellation::new(4, 0.0).is_err());
        assert!(Y00Constellation::new(4, -1.0).is_err());
        assert!(QndmConstellation::new(1, 1.0).is_err());
    }

    #[test]
    fn y00_spacing_and_antipodes() {
        for m in [1u32, 2, 3, 7, 16, 64] {
            let c = Y00Constellation::new(m, 2.0).unwrap();
            let pts = c.points();
            assert_eq!(pts.len(), 2 * m as usize);
            for p in 0..pts.len() {
                let next = (p + 1) % pts.len();
                let gap = angle_diff(pts[next].theta, pts[p].theta);
                assert!((gap - PI / m as f64).abs() < 1e-12);
                let anti = (p + m as usize) % pts.len();
                assert!((angle_diff(pts[anti].theta, pts[p].theta).abs() - PI).abs() < 1e-12);
                assert_ne!(pts[p].bit, pts[anti].bit);
                assert_eq!(pts[p].k1, pts[anti].k1);
            }
        }
    }

    #[test]
    fn y00_bits_alternate_except_basis_seam() {
        for m in [1u32, 2, 3, 4, 5, 8, 9] {
            let c = Y00Constellation::new(m, 1.0).unwrap();
            let pts = c.points();
            let n = pts.len();
            for p in 0..n {
                let q = (p + 1) % n;
                let seam = m % 2 == 0 && (q == m as usize || q == 0);
                if !seam {
                    assert_ne!(pts[p].bit, pts[q].bit, "M={m} p={p}");
                }
            }
        }
    }

    #[test]
    fn encode_m2_key1_bit0() {
        let c = Y00Constellation::new(2, 1.0).unwrap();
        let p = c.encode_phase(1, 0, None).unwrap();
        assert!((p.theta() - PI).abs() < 1e-15);
        assert!(c.encode_phase(3, 0, None).is_err());
        assert!(c.encode_phase(0, 0, None).is_err());
        assert!(c.encode_phase(1, 2, None).is_err());
    }

    #[test]
    fn osk_zero_is_identity_and_non_injective() {
        let c = Y00Constellation::new(8, 1.0).unwrap();
        for key in 1..=8 {
            for bit in 0..2u8 {
                let plain = c.encode_phase(key, bit, None).unwrap();
                let osk0 = c.encode_phase(key, bit, Some(0)).unwrap();
                assert_eq!(plain, osk0);
                let flipped = c.encode_phase(key, 1 - bit, Some(1)).unwrap();
                assert_eq!(plain, flipped);
            }
        }
    }

    #[test]
    fn osk_config_presence_checks() {
        let on = OskConfig { enabled: true };
        let off = OskConfig::default();
        assert_eq!(on.apply(1, Some(1)).unwrap(), 0);
        assert_eq!(off.apply(1, None).unwrap(), 1);
        assert!(on.apply(1, None).is_err());
        assert!(off.apply(1, Some(0)).is_err());
    }

    #[test]
    fn qndm_first_pattern_is_identity() {
        let c = QndmConstellation::new(5, 1.0).unwrap();
        let l1 = c.mapping_pattern(1).unwrap();
        for (j, e) in l1.iter().enumerate() {
            assert_eq!(e.label, j as u32 + 1);
            assert_eq!(e.basis, j as u32 + 1);
            assert_eq!(e.offset, 0.0);
        }
        let l2 = c.mapping_pattern(2).unwrap();
        assert_eq!(l2.iter().map(|e| e.label).collect::<Vec<_>>(), vec![2, 3, 4, 5, 1]);
        assert!((l2[0].offset - c.delta()).abs() < 1e-15);
    }

    #[test]
    fn qndm_m3_block2_pairs() {
        let c = QndmConstellation::new(3, 1.0).unwrap();
        let block2: Vec<(u32, u32)> = c.blocks().nth(1).unwrap().iter().map(|p| (p.k1, p.k2.unwrap())).collect();
        assert_eq!(block2, vec![(1, 2), (2, 3), (3, 1)]);
    }

    #[test]
    fn qndm_appendix_points() {
        let c = QndmConstellation::new(4, 2.0).unwrap();
        // k1=1 sits on the upper point of its basis for bit = parity(1) = 1.
        let p = c.encode_phase(1, 1, 1, None).unwrap();
        assert_eq!(p.theta(), 0.0);
        assert_eq!(c.block_of(p.theta()), 0);
        let theta2 = PI / 4.0;
        let p = c.encode_phase(2, 3, 0, None).unwrap();
        assert!((p.theta() - (theta2 + c.delta())).abs() < 1e-12);
        assert_eq!(c.block_of(p.theta()), 1);
    }

    #[test]
    fn qndm_blocks_cover_every_first_key_once() {
        for m in 2..=16u32 {
            let c = QndmConstellation::new(m, 1.0).unwrap();
            assert_eq!(c.len(), 2 * (m * m) as usize);
            for (l, block) in c.blocks().enumerate() {
                let mut k1: Vec<u32> = block.iter().map(|p| p.k1).collect();
                k1.sort_unstable();
                assert_eq!(k1, (1..=m).collect::<Vec<_>>());
                for (k, p) in block.iter().enumerate() {
                    let shift = (l as u32) % m;
                    assert_eq!(p.k2.unwrap(), (k as u32 + shift) % m + 1);
                    let want = (l * m as usize + k) as f64 * c.delta();
                    assert!((p.theta - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn qndm_triples_are_distinct() {
        for m in 2..=16u32 {
            let c = QndmConstellation::new(m, 1.0).unwrap();
            let mut seen = std::collections::HashSet::new();
            for k1 in 1..=m {
                for k2 in 1..=m {
                    for bit in 0..2u8 {
                        let p = c.encode_phase(k1, k2, bit, None).unwrap();
                        assert!(seen.insert(c.nearest_index(p.theta())));
                        assert_eq!(c.decode_bit(p.theta(), k1, k2, None).unwrap(), bit);
                    }
                }
            }
            assert_eq!(seen.len(), c.len());
        }
    }

    #[test]
    fn qndm_block_congruence() {
        let c = QndmConstellation::new(6, 1.0).unwrap();
        let m = 6usize;
        let labels: Vec<Vec<(u32, u8)>> = c
            .blocks()
            .map(|b| {
                let mut v: Vec<(u32, u8)> = b.iter().map(|p| (p.k1, p.bit)).collect();
                v.sort_unstable();
                v
            })
            .collect();
        for l in 0..2 * m {
            let same_half = l / m;
            for r in 0..2 * m {
                if r / m == same_half {
                    assert_eq!(labels[l], labels[r]);
                } else {
                    let flipped: Vec<(u32, u8)> = labels[r].iter().map(|&(k, b)| (k, 1 - b)).collect();
                    assert_eq!(labels[l], flipped);
                }
            }
        }
    }

    #[test]
    fn qndm_rejects_out_of_range_keys() {
        let c = QndmConstellation::new(4, 1.0).unwrap();
        assert!(c.encode_phase(0, 1, 0, None).is_err());
        assert!(c.encode_phase(1, 5, 0, None).is_err());
    }

    #[test]
    fn dsr_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = PhasePoint::new(1.0, 3.0).unwrap();
        let zero = DsrConfig::unchecked(0.0, 3.0);
        assert_eq!(apply_dsr(p, &zero, &mut rng), p);

        let edge = DsrConfig::unchecked(PI * 3.0 / 2.0, 3.0);
        for _ in 0..20_000 {
            let r = apply_dsr(p, &edge, &mut rng);
            assert!(angle_diff(r.theta(), p.theta()).abs() <= PI / 2.0 + 1e-12);
        }
    }

    #[test]
    fn dsr_mean_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let amp = 4.0;
        let cfg = DsrConfig::new(2.0, amp, 1.0).unwrap();
        let p = PhasePoint::new(2.0, amp).unwrap();
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| angle_diff(apply_dsr(p, &cfg, &mut rng).theta(), p.theta()))
            .sum::<f64>()
            / n as f64;
        let w = cfg.half_width();
        let se = w / 3f64.sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean offset {mean} vs 3σ {}", 3.0 * se);
    }

    #[test]
    fn dsr_range_validation() {
        assert!(DsrConfig::new(0.5, 3.0, 1.0).is_err());
        assert!(DsrConfig::new(PI * 3.0 / 2.0, 3.0, 1.0).is_err());
        assert!(DsrConfig::new(1.0, 3.0, 1.0).is_ok());
    }

    #[test]
    fn masking_examples() {
        let c = Y00Constellation::new(100, 100.0).unwrap();
        let r = masking_metrics(&c, 1.0, DEFAULT_LAMBDA);
        assert!((r.gamma_q - 1.0 / PI).abs() < 1e-12);
        let r0 = masking_metrics(&c, 0.0, DEFAULT_LAMBDA);
        assert_eq!(r0.gamma_q, 0.0);
        assert!(!r0.condition_met);

        let c2 = Y00Constellation::new(200, 100.0).unwrap();
        let r2 = masking_metrics(&c2, 1.0, DEFAULT_LAMBDA);
        assert!((r2.gamma_q - 2.0 * r.gamma_q).abs() < 1e-12);

        let q = QndmConstellation::new(16, 0.5).unwrap();
        assert!(masking_metrics(&q, 1.0, DEFAULT_LAMBDA).condition_met);
        let q = QndmConstellation::new(16, 4.0).unwrap();
        assert!(!masking_metrics(&q, 1.0, DEFAULT_LAMBDA).condition_met);
    }

    #[test]
    fn adjacent_overlap_increases_with_m() {
        let a = 3.0f64;
        let mut last = 0.0;
        for m in [2u32, 4, 8, 16, 32, 64, 128, 256] {
            let ov = (-2.0 * a * a * (1.0 - (PI / m as f64).cos())).exp();
            assert!(ov > last);
            last = ov;
        }
        assert!(last > 0.99);
    }

    #[test]
    fn json_document_shape() {
        let c = QndmConstellation::new(2, 1.0).unwrap();
        let v = serde_json::to_value(c.to_json_document()).unwrap();
        assert_eq!(v["kind"], "qndm");
        assert_eq!(v["M"], 2);
        assert_eq!(v["points"].as_array().unwrap().len(), 8);
        assert!(v["points"][0]["k2"].is_number());
        let y = serde_json::to_value(Y00Constellation::new(2, 1.0).unwrap().to_json_document()).unwrap();
        assert!(y.get("delta").is_none());
        assert!(y["points"][0].get("k2").is_none());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn y00_round_trip(m in 1u32..64, key_seed in any::<u32>(), bit in 0u8..2, osk in proptest::option::of(0u8..2)) {
                let c = Y00Constellation::new(m, 2.0).unwrap();
                let key = key_seed % m + 1;
                let p = c.encode_phase(key, bit, osk).unwrap();
                prop_assert!(c.points().iter().any(|q| (q.theta - p.theta()).abs() < 1e-12));
                prop_assert_eq!(c.decode_bit(p.theta(), key, osk).unwrap(), bit);
            }

            #[test]
            fn qndm_round_trip(m in 2u32..24, a in any::<u32>(), b in any::<u32>(), bit in 0u8..2, osk in proptest::option::of(0u8..2)) {
                let c = QndmConstellation::new(m, 1.0).unwrap();
                let (k1, k2) = (a % m + 1, b % m + 1);
                let p = c.encode_phase(k1, k2, bit, osk).unwrap();
                let q = &c.points()[c.nearest_index(p.theta())];
                prop_assert_eq!((q.k1, q.k2), (k1, Some(k2)));
                prop_assert_eq!(c.decode_bit(p.theta(), k1, k2, osk).unwrap(), bit);
            }

            #[test]
            fn canonical_angle_range(t in -1e6f64..1e6) {
                let c = canonical_angle(t);
                prop_assert!((0.0..TAU).contains(&c));
                prop_assert!(angle_diff(c, t).abs() < 1e-6);
            }
        }
    }
}
