//! Exhaustive known-plaintext key search over an LFSR keyspace.
//!
//! Every non-zero register state is a candidate key. A candidate survives
//! slot `t` when one of the phases it predicts for the known plaintext bit
//! lies within the acceptance arc of Eve's sample.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::keystream::{draw_running_key, Lfsr, RunningKey};
use super::{run_trial, Encoder, KeySpec, NoiseSwitch, OskMode, PlaintextSource, Scheme, TrialConfig};
use crate::constellation::angle_diff;
use crate::error::{invalid, Error, Result};
use crate::receivers::ReceiverModel;
use crate::C64;

/// Largest LFSR width the search will enumerate.
pub const MAX_KPA_KEY_BITS: u32 = 20;

/// Noise scale used for the acceptance arc when receiver noise is off.
const NOISELESS_SIGMA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KpaScoring {
    /// Survive while every prediction is inside the acceptance arc.
    Hard,
    /// Keep keys whose accumulated Gaussian arc score is within
    /// `threshold` of the best key. Counts need not be monotone.
    Soft { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpaConfig {
    pub scheme: Scheme,
    #[serde(rename = "M")]
    pub m: u32,
    pub amplitude: f64,
    pub key_bits: u32,
    /// Acceptance arc in units of `sigma`.
    pub radius_sigmas: f64,
    /// Noise scale of the observed samples.
    pub sigma: f64,
    pub scoring: KpaScoring,
}

impl KpaConfig {
    /// Hard scoring with a `3σ_he` acceptance arc.
    pub fn new(scheme: Scheme, m: u32, amplitude: f64, key_bits: u32) -> Self {
        Self {
            scheme,
            m,
            amplitude,
            key_bits,
            radius_sigmas: 3.0,
            sigma: ReceiverModel::heterodyne().sigma(),
            scoring: KpaScoring::Hard,
        }
    }

    /// Arc length within which a prediction is accepted.
    pub fn radius(&self) -> f64 {
        self.radius_sigmas * self.sigma + self.scheme.dsr.unwrap_or(0.0).abs()
    }

    pub fn keyspace(&self) -> u64 {
        (1u64 << self.key_bits) - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.key_bits > MAX_KPA_KEY_BITS {
            return Err(Error::KeyspaceTooLarge {
                bits: self.key_bits,
                max_bits: MAX_KPA_KEY_BITS,
            });
        }
        if self.key_bits < 2 {
            return Err(invalid("key must have at least 2 bits"));
        }
        if !(self.radius_sigmas > 0.0 && self.sigma > 0.0) {
            return Err(invalid("acceptance radius must be positive"));
        }
        if let KpaScoring::Soft { threshold } = self.scoring {
            if !(threshold >= 0.0) {
                return Err(invalid("soft threshold must be non-negative"));
            }
        }
        Encoder::new(self.scheme.base, self.m, self.amplitude)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivorPoint {
    pub n: usize,
    pub survivors: u64,
    pub equivocation_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpaResult {
    pub keyspace: u64,
    /// Points for `n = 0..=N`.
    pub curve: Vec<SurvivorPoint>,
    /// Hard scoring only: for key state `s`, entry `s - 1` is the slot
    /// count at which it was eliminated, or `N + 1` if it survived.
    pub elimination: Vec<u32>,
}

impl KpaResult {
    pub fn final_survivors(&self) -> u64 {
        self.curve.last().map_or(self.keyspace, |p| p.survivors)
    }

    /// First prefix length with exactly one survivor.
    pub fn unique_at(&self) -> Option<usize> {
        self.curve.iter().find(|p| p.survivors == 1).map(|p| p.n)
    }

    pub fn survived(&self, key_state: u32) -> Option<bool> {
        let n = self.curve.len() as u32;
        self.elimination.get(key_state.checked_sub(1)? as usize).map(|&e| e == n)
    }
}

fn point(n: usize, survivors: u64) -> SurvivorPoint {
    SurvivorPoint {
        n,
        survivors,
        equivocation_bits: if survivors > 0 { (survivors as f64).log2() } else { 0.0 },
    }
}

/// Smallest arc between the sample and the phases `rk` can produce for
/// plaintext bit `bit`.
#[inline]
fn best_arc(encoder: &Encoder, pts: &[crate::constellation::LabeledPoint], osk: OskMode, rk: RunningKey, bit: u8, phi: f64, amp: f64) -> f64 {
    let arc = |k: &RunningKey| amp * angle_diff(phi, pts[encoder.point_index(k, bit)].theta).abs();
    match osk {
        OskMode::Independent => {
            let a = arc(&RunningKey { osk: Some(0), ..rk });
            let b = arc(&RunningKey { osk: Some(1), ..rk });
            a.min(b)
        }
        _ => arc(&rk),
    }
}

/// Survivor curve of the exhaustive search over all `2^|K| - 1` LFSR
/// states given Eve's samples and the known plaintext.
pub fn kpa_search(samples: &[C64], plaintext: &[u8], config: &KpaConfig) -> Result<KpaResult> {
    config.validate()?;
    if samples.len() != plaintext.len() {
        return Err(invalid(format!("{} samples for {} plaintext bits", samples.len(), plaintext.len())));
    }
    if plaintext.iter().any(|b| *b > 1) {
        return Err(invalid("plaintext bits must be 0 or 1"));
    }
    let encoder = Encoder::new(config.scheme.base, config.m, config.amplitude)?;
    let layout = config.scheme.layout(config.m)?;
    let pts = encoder.constellation().points();
    let phis: Vec<f64> = samples.iter().map(|y| y.arg()).collect();
    let n = samples.len();
    let keyspace = config.keyspace();
    let amp = config.amplitude;
    let osk = config.scheme.osk;
    let width = config.key_bits;

    match config.scoring {
        KpaScoring::Hard => {
            let radius = config.radius();
            let elimination: Vec<u32> = (1..=keyspace as u32)
                .into_par_iter()
                .map(|state| {
                    let mut reg = Lfsr::new(width, state).expect("state in range");
                    for t in 0..n {
                        let rk = draw_running_key(&mut reg, &layout);
                        if best_arc(&encoder, pts, osk, rk, plaintext[t], phis[t], amp) > radius {
                            return (t + 1) as u32;
                        }
                    }
                    (n + 1) as u32
                })
                .collect();
            let mut killed_at = vec![0u64; n + 2];
            for &e in &elimination {
                killed_at[e as usize] += 1;
            }
            let mut alive = keyspace;
            let mut curve = Vec::with_capacity(n + 1);
            curve.push(point(0, alive));
            for t in 1..=n {
                alive -= killed_at[t];
                curve.push(point(t, alive));
            }
            Ok(KpaResult {
                keyspace,
                curve,
                elimination,
            })
        }
        KpaScoring::Soft { threshold } => {
            let s2 = 2.0 * config.sigma * config.sigma;
            let mut regs: Vec<Lfsr> = (1..=keyspace as u32)
                .map(|s| Lfsr::new(width, s).expect("state in range"))
                .collect();
            let mut scores = vec![0.0f64; regs.len()];
            let mut curve = Vec::with_capacity(n + 1);
            curve.push(point(0, keyspace));
            for t in 0..n {
                regs.par_iter_mut().zip(scores.par_iter_mut()).for_each(|(reg, score)| {
                    let rk = draw_running_key(reg, &layout);
                    let a = best_arc(&encoder, pts, osk, rk, plaintext[t], phis[t], amp);
                    *score += a * a / s2;
                });
                let best = scores.par_iter().cloned().reduce(|| f64::INFINITY, f64::min);
                let count = scores.par_iter().filter(|&&s| s <= best + threshold).count() as u64;
                curve.push(point(t + 1, count));
            }
            Ok(KpaResult {
                keyspace,
                curve,
                elimination: Vec::new(),
            })
        }
    }
}

/// A full attack run: simulate the link under `true_key`, hand Eve's
/// samples and the plaintext (optionally permuted) to the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpaExperiment {
    pub config: KpaConfig,
    pub true_key: u32,
    pub n_slots: usize,
    pub seed: u64,
    pub noise: bool,
    pub permute_plaintext: bool,
}

impl KpaExperiment {
    pub fn new(config: KpaConfig, true_key: u32, n_slots: usize, seed: u64) -> Self {
        Self {
            config,
            true_key,
            n_slots,
            seed,
            noise: true,
            permute_plaintext: false,
        }
    }
}

pub fn run_kpa_experiment(exp: &KpaExperiment) -> Result<KpaResult> {
    let mut config = exp.config;
    config.validate()?;
    if exp.n_slots == 0 {
        return kpa_search(&[], &[], &config);
    }
    let mut trial = TrialConfig::new(config.scheme, config.m, config.amplitude, exp.n_slots, exp.seed);
    trial.key = KeySpec::Lfsr {
        width: config.key_bits,
        state: exp.true_key,
    };
    trial.plaintext = PlaintextSource::Random;
    trial.noise = NoiseSwitch {
        bob: exp.noise,
        eve: exp.noise,
    };
    let out = run_trial(&trial, None)?;
    let samples: Vec<C64> = out.records.iter().map(|r| r.eve_sample()).collect();
    let mut bits: Vec<u8> = out.records.iter().map(|r| r.plaintext_bit).collect();
    if exp.permute_plaintext {
        bits.shuffle(&mut ChaCha8Rng::seed_from_u64(exp.seed ^ 0x5EED_0F_5A17));
    }
    if !exp.noise {
        config.sigma = NOISELESS_SIGMA;
    }
    kpa_search(&samples, &bits, &config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{masking_metrics, QndmConstellation, DEFAULT_LAMBDA};

    #[test]
    fn oversize_keyspace_refused() {
        let c = KpaConfig::new(Scheme::y00(), 16, 1.0, 24);
        assert_eq!(
            kpa_search(&[], &[], &c).unwrap_err(),
            Error::KeyspaceTooLarge { bits: 24, max_bits: 20 }
        );
    }

    #[test]
    fn empty_plaintext_keeps_full_keyspace() {
        let c = KpaConfig::new(Scheme::y00(), 16, 1.0, 12);
        let r = kpa_search(&[], &[], &c).unwrap();
        assert_eq!(r.curve, vec![point(0, 4095)]);
    }

    #[test]
    fn noiseless_y00_finds_unique_key() {
        for m in [4u32, 16] {
            let mut e = KpaExperiment::new(KpaConfig::new(Scheme::y00(), m, 2.0, 16), 0xBEEF, 12, 3);
            e.noise = false;
            let r = run_kpa_experiment(&e).unwrap();
            let bound = 16usize.div_ceil((2 * m).trailing_zeros() as usize) + 2;
            let at = r.unique_at().expect("unique key reached");
            assert!(at <= bound, "M={m}: unique at {at} > {bound}");
            assert_eq!(r.survived(0xBEEF), Some(true));
            assert!(r.curve.windows(2).all(|w| w[1].survivors <= w[0].survivors));
        }
    }

    #[test]
    fn noisy_search_keeps_true_key() {
        let e = KpaExperiment::new(KpaConfig::new(Scheme::y00(), 4, 4.0, 14), 1234, 60, 8);
        let r = run_kpa_experiment(&e).unwrap();
        assert_eq!(r.survived(1234), Some(true));
        assert!(r.final_survivors() < r.keyspace);
    }

    #[test]
    fn masked_qndm_keeps_keyspace() {
        let c = KpaConfig::new(Scheme::qndm(), 16, 0.5, 16);
        assert!(masking_metrics(&QndmConstellation::new(16, 0.5).unwrap(), 1.0, DEFAULT_LAMBDA).condition_met);
        let r = run_kpa_experiment(&KpaExperiment::new(c, 0x1D2C, 160, 4)).unwrap();
        assert!(r.final_survivors() as f64 >= 0.99 * 65536.0);
    }

    #[test]
    fn independent_osk_ignores_plaintext() {
        let c = KpaConfig::new(Scheme::y00().with_osk(OskMode::Independent), 8, 3.0, 12);
        let mut e = KpaExperiment::new(c, 77, 40, 5);
        let a = run_kpa_experiment(&e).unwrap();
        e.permute_plaintext = true;
        let b = run_kpa_experiment(&e).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn soft_scoring_tracks_true_key() {
        let mut c = KpaConfig::new(Scheme::y00(), 8, 4.0, 12);
        c.scoring = KpaScoring::Soft { threshold: 4.5 };
        let r = run_kpa_experiment(&KpaExperiment::new(c, 99, 40, 2)).unwrap();
        assert!(r.elimination.is_empty());
        assert!(r.final_survivors() >= 1 && r.final_survivors() < 100);
    }

    #[test]
    fn qndm_base_is_supported() {
        let mut e = KpaExperiment::new(KpaConfig::new(Scheme::qndm(), 4, 3.0, 12), 5, 20, 1);
        e.noise = false;
        let r = run_kpa_experiment(&e).unwrap();
        assert_eq!(r.final_survivors(), 1);
        assert_eq!(r.survived(5), Some(true));
    }
}
