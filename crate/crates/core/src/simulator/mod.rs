//! Monte Carlo of the keyed link: running keys, Alice's encoder, Bob's
//! keyed homodyne receiver, Eve's keyless heterodyne receiver, and the
//! desk-scale known-plaintext key search.
//!
//! Slots are processed in fixed-size shards. Shard `s` draws all of its
//! randomness from `ChaCha8Rng::seed_from_u64(master_seed)` on stream `s`,
//! so results do not depend on the number of worker threads.

mod kpa;
mod keystream;
mod trace;

pub use kpa::{kpa_search, run_kpa_experiment, KpaConfig, KpaExperiment, KpaResult, KpaScoring, SurvivorPoint, MAX_KPA_KEY_BITS};
pub use keystream::{
    draw_running_key, generate_keystream, maximal_taps, BitSource, ChunkLayout, CounterKeyed, KeySpec,
    KeystreamGenerator, Lfsr, RunningKey,
};
pub use trace::{read_trace_binary, write_trace_binary, write_trace_csv, TRACE_CSV_HEADER};

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::{
    apply_dsr, masking_metrics, DsrConfig, MaskingReport, PhaseConstellation, PhasePoint, QndmConstellation,
    Y00Constellation, DEFAULT_LAMBDA,
};
use crate::error::{invalid, Result};
use crate::receivers::{
    bob_error, capacity_uniform, eve_error_mary, ReceiverModel, SpacingMode, UniformChannelSpec,
};
use crate::stats::{plugin_mutual_information, BinomialEstimate};
use crate::C64;

/// Slots per shard.
pub const SHARD_SLOTS: usize = 1 << 14;

/// Standard deviation of Bob's homodyne noise.
pub const BOB_SIGMA: f64 = 0.5;
/// Per-quadrature standard deviation of Eve's heterodyne noise.
pub const EVE_SIGMA_QUADRATURE: f64 = FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseScheme {
    Y00,
    Qndm,
}

/// Where OSK bits come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OskMode {
    #[default]
    Off,
    /// Cut from the same running-key stream as the basis keys.
    Shared,
    /// Drawn from a separate generator the attacker does not model.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub base: BaseScheme,
    #[serde(default)]
    pub osk: OskMode,
    /// DSR strength `|R_p|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsr: Option<f64>,
}

impl Scheme {
    pub fn y00() -> Self {
        Self {
            base: BaseScheme::Y00,
            osk: OskMode::Off,
            dsr: None,
        }
    }

    pub fn qndm() -> Self {
        Self {
            base: BaseScheme::Qndm,
            ..Self::y00()
        }
    }

    pub fn with_osk(mut self, osk: OskMode) -> Self {
        self.osk = osk;
        self
    }

    pub fn with_dsr(mut self, strength: f64) -> Self {
        self.dsr = Some(strength);
        self
    }

    pub fn layout(&self, m: u32) -> Result<ChunkLayout> {
        ChunkLayout::new(m, self.base == BaseScheme::Qndm, self.osk == OskMode::Shared)
    }

    pub fn spacing_mode(&self) -> SpacingMode {
        match self.base {
            BaseScheme::Y00 => SpacingMode::Y00,
            BaseScheme::Qndm => SpacingMode::Qndm,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.base {
            BaseScheme::Y00 => "y00",
            BaseScheme::Qndm => "qndm",
        })?;
        match self.osk {
            OskMode::Off => {}
            OskMode::Shared => f.write_str("+osk")?,
            OskMode::Independent => f.write_str("+osk-indep")?,
        }
        if self.dsr.is_some() {
            f.write_str("+dsr")?;
        }
        Ok(())
    }
}

/// Parses `y00`, `qndm+osk`, `y00+osk-indep+dsr`, ... The DSR strength is
/// supplied separately; `+dsr` alone sets it to NaN as a placeholder.
impl FromStr for Scheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('+').map(str::trim);
        let mut scheme = match parts.next().map(str::to_ascii_lowercase).as_deref() {
            Some("y00") => Scheme::y00(),
            Some("qndm") => Scheme::qndm(),
            _ => return Err(invalid(format!("unknown scheme '{s}'"))),
        };
        for p in parts {
            match p.to_ascii_lowercase().as_str() {
                "osk" => scheme.osk = OskMode::Shared,
                "osk-indep" => scheme.osk = OskMode::Independent,
                "dsr" => scheme.dsr = Some(f64::NAN),
                other => return Err(invalid(format!("unknown scheme modifier '{other}'"))),
            }
        }
        Ok(scheme)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlaintextSource {
    Fixed { bit: u8 },
    Random,
    Provided { bits: Vec<u8> },
}

/// Test hooks that switch receiver noise off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSwitch {
    pub bob: bool,
    pub eve: bool,
}

impl Default for NoiseSwitch {
    fn default() -> Self {
        Self { bob: true, eve: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub scheme: Scheme,
    #[serde(rename = "M")]
    pub m: u32,
    pub amplitude: f64,
    pub n_slots: usize,
    pub master_seed: u64,
    pub plaintext: PlaintextSource,
    pub key: KeySpec,
    #[serde(default)]
    pub noise: NoiseSwitch,
}

impl TrialConfig {
    /// Y-00 defaults: random plaintext, 16-bit LFSR key.
    pub fn new(scheme: Scheme, m: u32, amplitude: f64, n_slots: usize, master_seed: u64) -> Self {
        Self {
            scheme,
            m,
            amplitude,
            n_slots,
            master_seed,
            plaintext: PlaintextSource::Random,
            key: KeySpec::Lfsr {
                width: 16,
                state: 0xACE1,
            },
            noise: NoiseSwitch::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(invalid("n_slots must be at least 1"));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(invalid(format!("amplitude must be positive, got {}", self.amplitude)));
        }
        Encoder::new(self.scheme.base, self.m, self.amplitude)?;
        self.scheme.layout(self.m)?;
        if let Some(s) = self.scheme.dsr {
            DsrConfig::new(s, self.amplitude, ReceiverModel::heterodyne().sigma())?;
        }
        match &self.plaintext {
            PlaintextSource::Fixed { bit } if *bit > 1 => return Err(invalid("plaintext bit must be 0 or 1")),
            PlaintextSource::Provided { bits } => {
                if bits.len() != self.n_slots {
                    return Err(invalid(format!(
                        "provided plaintext has {} bits for {} slots",
                        bits.len(),
                        self.n_slots
                    )));
                }
                if bits.iter().any(|b| *b > 1) {
                    return Err(invalid("plaintext bits must be 0 or 1"));
                }
            }
            _ => {}
        }
        KeystreamGenerator::new(&self.key, self.scheme.layout(self.m)?)?;
        Ok(())
    }
}

/// The transmitter's constellation.
#[derive(Debug, Clone)]
pub enum Encoder {
    Y00(Y00Constellation),
    Qndm(QndmConstellation),
}

impl Encoder {
    pub fn new(base: BaseScheme, m: u32, amplitude: f64) -> Result<Self> {
        Ok(match base {
            BaseScheme::Y00 => Encoder::Y00(Y00Constellation::new(m, amplitude)?),
            BaseScheme::Qndm => Encoder::Qndm(QndmConstellation::new(m, amplitude)?),
        })
    }

    pub fn constellation(&self) -> &dyn PhaseConstellation {
        match self {
            Encoder::Y00(c) => c,
            Encoder::Qndm(c) => c,
        }
    }

    /// Index of the transmitted point.
    #[inline]
    pub fn point_index(&self, key: &RunningKey, bit: u8) -> usize {
        let placed = bit ^ key.osk.unwrap_or(0);
        match self {
            Encoder::Y00(c) => c.point_index(key.k1, placed),
            Encoder::Qndm(c) => c.point_index(key.k1, key.k2.unwrap_or(key.k1), placed),
        }
    }

    /// Angle of the point that carries placement parity `0` in the keyed
    /// basis; Bob rotates by its negative.
    #[inline]
    pub fn base_angle(&self, key: &RunningKey) -> f64 {
        let p = (key.k1 & 1) as u8;
        let osk = key.osk.unwrap_or(0);
        self.constellation().points()[self.point_index(key, p ^ osk)].theta
    }
}

/// One transmitted symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmitted {
    /// Constellation index before any DSR dither.
    pub index: usize,
    pub phase: PhasePoint,
}

/// Encodes `bits` under `keys`, dithering with DSR when configured.
pub fn alice_encode<R: Rng + ?Sized>(
    encoder: &Encoder,
    keys: &[RunningKey],
    bits: &[u8],
    dsr: Option<&DsrConfig>,
    rng: &mut R,
) -> Result<Vec<Transmitted>> {
    if keys.len() != bits.len() {
        return Err(invalid(format!("{} keys for {} bits", keys.len(), bits.len())));
    }
    let c = encoder.constellation();
    let amp = c.amplitude();
    keys.iter()
        .zip(bits)
        .map(|(k, &b)| {
            if b > 1 {
                return Err(invalid("plaintext bits must be 0 or 1"));
            }
            let index = encoder.point_index(k, b);
            let mut phase = PhasePoint::new(c.points()[index].theta, amp)?;
            if let Some(d) = dsr {
                phase = apply_dsr(phase, d, rng);
            }
            Ok(Transmitted { index, phase })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BobOutput {
    pub sample: f64,
    pub bit: u8,
}

/// Keyed homodyne reception: rotate by the keyed basis angle, sample the
/// real quadrature with variance ¼ (none when `noise` is off), threshold at
/// zero and undo the placement parity and OSK flip.
pub fn bob_receive<R: Rng + ?Sized>(
    encoder: &Encoder,
    phases: &[PhasePoint],
    keys: &[RunningKey],
    noise: bool,
    rng: &mut R,
) -> Result<Vec<BobOutput>> {
    if keys.len() != phases.len() {
        return Err(invalid(format!("{} keys for {} phases", keys.len(), phases.len())));
    }
    Ok(phases
        .iter()
        .zip(keys)
        .map(|(p, k)| {
            let base = encoder.base_angle(k);
            let mean = p.amplitude() * (p.theta() - base).cos();
            let n: f64 = if noise { rng.sample(StandardNormal) } else { 0.0 };
            let sample = mean + BOB_SIGMA * n;
            let half = u8::from(sample < 0.0);
            let bit = half ^ (k.k1 & 1) as u8 ^ k.osk.unwrap_or(0);
            BobOutput { sample, bit }
        })
        .collect())
}

/// Keyless heterodyne reception: `y = |α|e^{iθ} + n`, `n` circular Gaussian
/// with per-quadrature variance ½. Takes no key material.
pub fn eve_receive<R: Rng + ?Sized>(phases: &[PhasePoint], noise: bool, rng: &mut R) -> Vec<C64> {
    phases
        .iter()
        .map(|p| {
            let s = p.complex();
            if noise {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                s + C64::new(re, im) * EVE_SIGMA_QUADRATURE
            } else {
                s
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveMode {
    /// Nearest constellation point (ML for equal-energy Gaussian signals).
    RunningKey,
    /// The placement bit of the nearest point.
    DataBinary,
}

/// Eve's decisions: point indices in running-key mode, bits in data mode.
pub fn eve_decide(samples: &[C64], constellation: &dyn PhaseConstellation, mode: EveMode) -> Vec<u32> {
    samples
        .iter()
        .map(|y| {
            let idx = constellation.nearest_index(y.arg());
            match mode {
                EveMode::RunningKey => idx as u32,
                EveMode::DataBinary => constellation.points()[idx].bit as u32,
            }
        })
        .collect()
}

/// Genie-aided per-block detection on QNDM: Eve is told the region `Γ_l`
/// holding the true point and picks the nearest of its `M` fine points.
/// Returns the within-block index decided for every slot.
pub fn eve_block_decide(samples: &[C64], constellation: &QndmConstellation, true_indices: &[usize]) -> Vec<usize> {
    let m = constellation.bases() as usize;
    let delta = constellation.delta();
    samples
        .iter()
        .zip(true_indices)
        .map(|(y, &q)| {
            let start = constellation.points()[(q / m) * m].theta;
            let pos = crate::constellation::angle_diff(y.arg(), start) / delta;
            pos.round().clamp(0.0, (m - 1) as f64) as usize
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMi {
    pub bits: f64,
    /// First-order plug-in bias.
    pub bias: f64,
    pub samples: usize,
    /// `10 M²`, below which the plug-in estimate is unstable.
    pub recommended_samples: usize,
}

/// Plug-in `I(K; K̂)` between true 1-based running keys and Eve's 1-based
/// estimates over an alphabet of size `m`.
pub fn empirical_mi(true_keys: &[u32], decisions: &[u32], m: u32) -> Result<EmpiricalMi> {
    let to0 = |v: &[u32]| -> Result<Vec<usize>> {
        v.iter()
            .map(|&k| {
                if k == 0 || k > m {
                    Err(invalid(format!("key {k} outside 1..={m}")))
                } else {
                    Ok((k - 1) as usize)
                }
            })
            .collect()
    };
    let (bits, bias) = plugin_mutual_information(&to0(true_keys)?, &to0(decisions)?, m as usize, m as usize)?;
    Ok(EmpiricalMi {
        bits,
        bias,
        samples: true_keys.len(),
        recommended_samples: 10 * (m as usize).pow(2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot_index: u64,
    pub true_phase: f64,
    pub true_index: u32,
    pub plaintext_bit: u8,
    pub bob_sample: f64,
    pub eve_re: f64,
    pub eve_im: f64,
    pub bob_decision: u8,
    pub eve_phase_decision: u32,
    pub eve_bit_decision: u8,
}

impl SlotRecord {
    pub fn eve_sample(&self) -> C64 {
        C64::new(self.eve_re, self.eve_im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub scheme: String,
    #[serde(rename = "M")]
    pub m: u32,
    pub amplitude: f64,
    pub n_slots: usize,
    pub master_seed: u64,
    pub bob_ber: BinomialEstimate,
    pub bob_error_analytic: f64,
    /// Nearest-point symbol error over the full constellation.
    pub eve_symbol_error: BinomialEstimate,
    pub eve_error_analytic: f64,
    /// QNDM only: genie-aided symbol error inside the true region.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eve_block_symbol_error: Option<BinomialEstimate>,
    pub eve_bit_error: BinomialEstimate,
    pub eve_running_key_mi: EmpiricalMi,
    pub c1_analytic: f64,
    pub masking: MaskingReport,
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub records: Vec<SlotRecord>,
    pub keys: Vec<RunningKey>,
    pub summary: TrialSummary,
}

fn independent_osk_key(master_seed: u64) -> [u8; 32] {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(u64::MAX);
    let mut key = [0u8; 32];
    rng.fill_bytes(&mut key);
    key
}

/// Running keys for a trial, including independent OSK bits when
/// configured.
pub fn trial_keystream(config: &TrialConfig) -> Result<Vec<RunningKey>> {
    let layout = config.scheme.layout(config.m)?;
    let mut gen = KeystreamGenerator::new(&config.key, layout)?;
    let mut keys = generate_keystream(&mut gen, config.n_slots);
    if config.scheme.osk == OskMode::Independent {
        let mut src = CounterKeyed::new(independent_osk_key(config.master_seed));
        for k in &mut keys {
            k.osk = Some(src.next_bit());
        }
    }
    Ok(keys)
}

fn shard_rng(master_seed: u64, shard: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(shard as u64);
    rng
}

/// Runs the full link simulation. `threads` caps the worker count; it has
/// no effect on the results.
pub fn run_trial(config: &TrialConfig, threads: Option<usize>) -> Result<TrialOutput> {
    config.validate()?;
    match threads {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::Error::Numerical(format!("thread pool: {e}")))?;
            pool.install(|| run_trial_inner(config))
        }
        _ => run_trial_inner(config),
    }
}

fn run_trial_inner(config: &TrialConfig) -> Result<TrialOutput> {
    let encoder = Encoder::new(config.scheme.base, config.m, config.amplitude)?;
    let dsr = config.scheme.dsr.map(|s| DsrConfig::unchecked(s, config.amplitude));
    let keys = trial_keystream(config)?;
    let n = config.n_slots;
    let shards = n.div_ceil(SHARD_SLOTS);

    let records: Vec<Vec<SlotRecord>> = (0..shards)
        .into_par_iter()
        .map(|s| -> Result<Vec<SlotRecord>> {
            let lo = s * SHARD_SLOTS;
            let hi = ((s + 1) * SHARD_SLOTS).min(n);
            let mut rng = shard_rng(config.master_seed, s);
            let bits: Vec<u8> = match &config.plaintext {
                PlaintextSource::Fixed { bit } => vec![*bit; hi - lo],
                PlaintextSource::Random => (lo..hi).map(|_| rng.random_range(0..=1u8)).collect(),
                PlaintextSource::Provided { bits } => bits[lo..hi].to_vec(),
            };
            let k = &keys[lo..hi];
            let tx = alice_encode(&encoder, k, &bits, dsr.as_ref(), &mut rng)?;
            let phases: Vec<PhasePoint> = tx.iter().map(|t| t.phase).collect();
            let bob = bob_receive(&encoder, &phases, k, config.noise.bob, &mut rng)?;
            let eve = eve_receive(&phases, config.noise.eve, &mut rng);
            let c = encoder.constellation();
            let idx = eve_decide(&eve, c, EveMode::RunningKey);
            let ebit = eve_decide(&eve, c, EveMode::DataBinary);
            Ok((0..hi - lo)
                .map(|i| SlotRecord {
                    slot_index: (lo + i) as u64,
                    true_phase: phases[i].theta(),
                    true_index: tx[i].index as u32,
                    plaintext_bit: bits[i],
                    bob_sample: bob[i].sample,
                    eve_re: eve[i].re,
                    eve_im: eve[i].im,
                    bob_decision: bob[i].bit,
                    eve_phase_decision: idx[i],
                    eve_bit_decision: ebit[i] as u8,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let records: Vec<SlotRecord> = records.into_iter().flatten().collect();
    let summary = summarize(config, &encoder, &keys, &records)?;
    Ok(TrialOutput { records, keys, summary })
}

/// Confidence intervals are reported at three standard deviations.
const CI_SIGMAS: f64 = 3.0;

fn summarize(config: &TrialConfig, encoder: &Encoder, keys: &[RunningKey], records: &[SlotRecord]) -> Result<TrialSummary> {
    let n = records.len() as u64;
    let c = encoder.constellation();
    let count = |f: &dyn Fn(&SlotRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
    let bob_err = count(&|r| r.bob_decision != r.plaintext_bit);
    let eve_sym = count(&|r| r.eve_phase_decision != r.true_index);
    let eve_bit = count(&|r| r.eve_bit_decision != r.plaintext_bit);

    let block = match encoder {
        Encoder::Qndm(q) => {
            let samples: Vec<C64> = records.iter().map(SlotRecord::eve_sample).collect();
            let truth: Vec<usize> = records.iter().map(|r| r.true_index as usize).collect();
            let m = q.bases() as usize;
            let dec = eve_block_decide(&samples, q, &truth);
            let errs = dec.iter().zip(&truth).filter(|(d, t)| **d != *t % m).count() as u64;
            Some(BinomialEstimate::new(errs, n, CI_SIGMAS))
        }
        Encoder::Y00(_) => None,
    };

    let truth_k1: Vec<u32> = keys.iter().map(|k| k.k1).collect();
    let eve_k1: Vec<u32> = records.iter().map(|r| c.points()[r.eve_phase_decision as usize].k1).collect();
    let mi = empirical_mi(&truth_k1, &eve_k1, config.m)?;

    let (eve_analytic, c1) = if config.m >= 2 {
        let pe = eve_error_mary(config.m, config.amplitude, config.scheme.spacing_mode())?;
        (pe, capacity_uniform(&UniformChannelSpec::from_symbol_error(config.m, pe)?))
    } else {
        (0.0, 0.0)
    };

    Ok(TrialSummary {
        scheme: config.scheme.to_string(),
        m: config.m,
        amplitude: config.amplitude,
        n_slots: config.n_slots,
        master_seed: config.master_seed,
        bob_ber: BinomialEstimate::new(bob_err, n, CI_SIGMAS),
        bob_error_analytic: bob_error(config.amplitude)?,
        eve_symbol_error: BinomialEstimate::new(eve_sym, n, CI_SIGMAS),
        eve_error_analytic: eve_analytic,
        eve_block_symbol_error: block,
        eve_bit_error: BinomialEstimate::new(eve_bit, n, CI_SIGMAS),
        eve_running_key_mi: mi,
        c1_analytic: c1,
        masking: masking_metrics(c, ReceiverModel::heterodyne().sigma(), DEFAULT_LAMBDA),
    })
}
