use std::f64::consts::TAU;
use std::path::Path;

use qsc_core::constellation::{masking_metrics, MaskingReport, PhaseConstellation, QndmConstellation, Y00Constellation};
use qsc_core::quantum_detection::{
    coherent_overlap, helstrom_binary_mixed, holevo_information, psk_ensemble, srm_error_covariant,
    y00_binary_mixtures, MixtureLabeling,
};
use qsc_core::receivers::{
    bob_error, capacity_uniform, dsr_capacity, eve_error_mary, ReceiverModel, SpacingMode, UniformChannelSpec,
};
use qsc_core::security_metrics::{
    bb84_locking, eta_asymptotic, qndm_unicity, C1Provenance, Scenario, SecurityReport, UnicityBound,
};
use qsc_core::simulator::{
    run_kpa_experiment, run_trial, write_trace_binary, write_trace_csv, BaseScheme, Encoder, KeySpec, KpaConfig,
    KpaExperiment, KpaScoring, NoiseSwitch, PlaintextSource, Scheme, TrialConfig,
};
use qsc_core::C64;
use serde::Serialize;

use crate::output::{check_writable, emit, write_atomic};
use crate::{AnalyzeArgs, CliError, ConstellationArgs, KpaArgs, LinkArgs, PlaintextArg, ScenarioArg, SimulateArgs, TraceFormat};

/// Largest signal set for which the dense Holevo spectrum is computed.
const MAX_HOLEVO_STATES: usize = 512;
/// Largest Y-00 point count for the binary Helstrom evaluation.
const MAX_BINARY_STATES: usize = 256;
const MAX_SLOTS: f64 = 1e10;

fn param(msg: impl Into<String>) -> CliError {
    CliError::Param(msg.into())
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

/// Accepts `160`, `100_000` or `1e6`.
pub fn parse_count(s: &str) -> Result<usize, CliError> {
    let clean = s.trim().replace('_', "");
    if let Ok(n) = clean.parse::<usize>() {
        return Ok(n);
    }
    let v: f64 = clean.parse().map_err(|_| param(format!("not a slot count: '{s}'")))?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= MAX_SLOTS) {
        return Err(param(format!("slot count must be a whole number up to {MAX_SLOTS:e}, got '{s}'")));
    }
    Ok(v as usize)
}

/// Decimal or `0x` hexadecimal.
pub fn parse_u32(s: &str) -> Result<u32, CliError> {
    let t = s.trim();
    let r = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(h) => u32::from_str_radix(h, 16),
        None => t.parse(),
    };
    r.map_err(|_| param(format!("not an integer: '{s}'")))
}

fn parse_key_hex(s: &str) -> Result<[u8; 32], CliError> {
    let t = s.trim();
    if t.len() != 64 || !t.is_ascii() {
        return Err(param("counter key must be 64 hex digits"));
    }
    let mut key = [0u8; 32];
    for (i, b) in key.iter_mut().enumerate() {
        *b = u8::from_str_radix(&t[2 * i..2 * i + 2], 16).map_err(|_| param("counter key must be 64 hex digits"))?;
    }
    Ok(key)
}

fn resolve_scheme(link: &LinkArgs) -> Result<Scheme, CliError> {
    let mut scheme: Scheme = link.scheme.parse()?;
    match (scheme.dsr, link.rp) {
        (_, Some(rp)) => scheme.dsr = Some(rp),
        (Some(_), None) => return Err(param("scheme uses +dsr but --rp was not given")),
        (None, None) => {}
    }
    Ok(scheme)
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn check_threads(threads: Option<usize>) -> Result<(), CliError> {
    if threads == Some(0) {
        return Err(param("--threads must be at least 1"));
    }
    Ok(())
}

pub fn constellation(a: &ConstellationArgs) -> Result<(), CliError> {
    let doc = match a.scheme.to_ascii_lowercase().as_str() {
        "y00" => Y00Constellation::new(a.m, a.alpha)?.to_json_document(),
        "qndm" => QndmConstellation::new(a.m, a.alpha)?.to_json_document(),
        other => return Err(param(format!("unknown constellation '{other}', expected y00 or qndm"))),
    };
    check_writable(a.out.as_deref())?;
    emit(a.out.as_deref(), &to_json(&doc)?)
}

#[derive(Debug, Serialize)]
struct LinkReport {
    scenario: Scenario,
    #[serde(rename = "M")]
    m: u32,
    amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dsr_strength: Option<f64>,
    /// Signal points on the circle.
    points: usize,
    bob_error: f64,
    eve_mary_error: f64,
    eve_binary_error: Option<f64>,
    srm_error: f64,
    holevo: Option<f64>,
    c1: f64,
    c1_provenance: C1Provenance,
    security: SecurityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    unicity_key_2: Option<UnicityBound>,
    masking: MaskingReport,
}

#[derive(Debug, Serialize)]
struct LockingReport {
    scenario: Scenario,
    n: u32,
    key_entropy: f64,
    eta: f64,
    h_x_given_y: f64,
    eta_asymptotic: f64,
}

fn psk_srm_error(n: usize, alpha: f64) -> Result<f64, CliError> {
    let a0 = C64::new(alpha, 0.0);
    let row: Vec<C64> = (0..n)
        .map(|k| coherent_overlap(a0, C64::from_polar(alpha, TAU * k as f64 / n as f64)))
        .collect();
    Ok(srm_error_covariant(n, &row)?)
}

pub fn analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    if a.scenario == ScenarioArg::Locking {
        let r = bb84_locking(a.n)?;
        let report = LockingReport {
            scenario: Scenario::Locking,
            n: a.n,
            key_entropy: 1.0,
            eta: r.eta,
            h_x_given_y: r.h_x_given_y,
            eta_asymptotic: eta_asymptotic(a.n.max(2))?,
        };
        check_writable(a.out.as_deref())?;
        return emit(a.out.as_deref(), &to_json(&report)?);
    }
    let sigma_he = ReceiverModel::heterodyne().sigma();
    let (scenario, mode) = match a.scenario {
        ScenarioArg::Qndm => (Scenario::Qndm, SpacingMode::Qndm),
        ScenarioArg::Dsr => (Scenario::Dsr, SpacingMode::Y00),
        _ => (Scenario::Y00, SpacingMode::Y00),
    };
    let constellation: Box<dyn PhaseConstellation> = match mode {
        SpacingMode::Qndm => Box::new(QndmConstellation::new(a.m, a.alpha)?),
        SpacingMode::Y00 => Box::new(Y00Constellation::new(a.m, a.alpha)?),
    };
    let points = constellation.len();
    let bob = bob_error(a.alpha)?;
    let eve = eve_error_mary(a.m, a.alpha, mode)?;
    let eve_binary = if mode == SpacingMode::Y00 && points <= MAX_BINARY_STATES {
        let (_, r0, r1) = y00_binary_mixtures(a.m, a.alpha, MixtureLabeling::PlacementBit)?;
        Some(helstrom_binary_mixed(&r0, &r1, 0.5)?)
    } else {
        None
    };
    let holevo = if points <= MAX_HOLEVO_STATES {
        Some(holevo_information(&psk_ensemble(points, a.alpha)?))
    } else {
        None
    };
    let (c1, provenance, dsr_strength) = if a.scenario == ScenarioArg::Dsr {
        let rp = a.rp.ok_or_else(|| param("dsr scenario needs --rp"))?;
        (dsr_capacity(a.alpha, rp)?, C1Provenance::AnalyticDsrWedge, Some(rp))
    } else {
        let spec = UniformChannelSpec::from_symbol_error(a.m, eve)?;
        (capacity_uniform(&spec), C1Provenance::AnalyticUniformChannel, None)
    };
    let security = SecurityReport::new(scenario, a.key_bits, c1, provenance)?;
    let unicity_key_2 = match scenario {
        Scenario::Qndm => Some(qndm_unicity(a.key_bits, a.key_bits_2.unwrap_or(a.key_bits), c1)?.1),
        _ => None,
    };
    let report = LinkReport {
        scenario,
        m: a.m,
        amplitude: a.alpha,
        dsr_strength,
        points,
        bob_error: bob,
        eve_mary_error: eve,
        eve_binary_error: eve_binary,
        srm_error: psk_srm_error(points, a.alpha)?,
        holevo,
        c1,
        c1_provenance: provenance,
        security,
        unicity_key_2,
        masking: masking_metrics(constellation.as_ref(), sigma_he, a.lambda),
    };
    check_writable(a.out.as_deref())?;
    emit(a.out.as_deref(), &to_json(&report)?)
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    check_threads(a.threads)?;
    let scheme = resolve_scheme(&a.link)?;
    let n_slots = parse_count(&a.slots)?;
    let key = match &a.counter_key {
        Some(hex) => KeySpec::CounterKeyed { key: parse_key_hex(hex)? },
        None => {
            let mask = if a.key_bits >= 32 { u32::MAX } else { (1u32 << a.key_bits) - 1 };
            let state = match &a.key_state {
                Some(s) => parse_u32(s)?,
                None => 0xACE1 & mask,
            };
            KeySpec::Lfsr {
                width: a.key_bits,
                state,
            }
        }
    };
    let plaintext = match a.plaintext {
        PlaintextArg::Random => PlaintextSource::Random,
        PlaintextArg::Zeros => PlaintextSource::Fixed { bit: 0 },
        PlaintextArg::Ones => PlaintextSource::Fixed { bit: 1 },
    };
    let trace_format = match (&a.trace, a.trace_format) {
        (_, Some(f)) => f,
        (Some(p), None) if p.extension().is_some_and(|e| e == "bin") => TraceFormat::Bin,
        _ => TraceFormat::Csv,
    };
    check_writable(a.out.as_deref())?;
    check_writable(a.trace.as_deref())?;

    let mut config = TrialConfig::new(scheme, a.link.m, a.link.alpha, n_slots, 0);
    config.plaintext = plaintext;
    config.key = key;
    config.noise = NoiseSwitch {
        bob: !a.noiseless,
        eve: !a.noiseless,
    };
    config.validate()?;
    if a.masking_check {
        let encoder = Encoder::new(scheme.base, a.link.m, a.link.alpha)?;
        let report = masking_metrics(encoder.constellation(), ReceiverModel::heterodyne().sigma(), a.lambda);
        if !report.condition_met {
            let what = match scheme.base {
                BaseScheme::Qndm => "blocks",
                BaseScheme::Y00 => "points",
            };
            return Err(param(format!(
                "masking condition unmet for {scheme} M={} |alpha|={}: Gamma_Q = {:.4}, {} {what} masked, Lambda = {}",
                a.link.m,
                a.link.alpha,
                report.gamma_q,
                match scheme.base {
                    BaseScheme::Qndm => report.masked_blocks,
                    BaseScheme::Y00 => report.masked_points,
                },
                a.lambda
            )));
        }
    }
    config.master_seed = resolve_seed(a.seed);
    let out = run_trial(&config, a.threads)?;
    let report = to_json(&out.summary)?;
    if let Some(path) = &a.trace {
        write_trace(path, trace_format, &out.records)?;
    }
    emit(a.out.as_deref(), &report)
}

fn write_trace(path: &Path, format: TraceFormat, records: &[qsc_core::simulator::SlotRecord]) -> Result<(), CliError> {
    write_atomic(path, |f| {
        let w = std::io::BufWriter::new(f);
        match format {
            TraceFormat::Csv => write_trace_csv(records, w).map_err(std::io::Error::other),
            TraceFormat::Bin => write_trace_binary(records, w),
        }
    })
}

pub fn kpa(a: &KpaArgs) -> Result<(), CliError> {
    check_threads(a.threads)?;
    let scheme = resolve_scheme(&a.link)?;
    let n_slots = parse_count(&a.slots)?;
    let mut config = KpaConfig::new(scheme, a.link.m, a.link.alpha, a.key_bits);
    config.radius_sigmas = a.radius_sigmas;
    if let Some(threshold) = a.soft {
        config.scoring = KpaScoring::Soft { threshold };
    }
    config.validate()?;
    let keyspace = config.keyspace();
    let true_key = match &a.true_key {
        Some(s) => parse_u32(s)?,
        None => match 0xACE1 & keyspace as u32 {
            0 => 1,
            k => k,
        },
    };
    if true_key == 0 || true_key as u64 > keyspace {
        return Err(param(format!("true key must be a nonzero {}-bit state", a.key_bits)));
    }
    check_writable(a.out.as_deref())?;
    let mut exp = KpaExperiment::new(config, true_key, n_slots, 0);
    exp.noise = !a.noiseless;
    exp.permute_plaintext = a.permute_plaintext;
    exp.seed = resolve_seed(a.seed);
    let result = match a.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(|| run_kpa_experiment(&exp))?,
        None => run_kpa_experiment(&exp)?,
    };
    let mut csv = String::from("n,survivors,equivocation_bits\n");
    for p in &result.curve {
        csv.push_str(&format!("{},{},{}\n", p.n, p.survivors, p.equivocation_bits));
    }
    eprintln!(
        "keyspace {keyspace}, {} survivors after {n_slots} slots, {}, true key {}",
        result.final_survivors(),
        result.unique_at().map_or("never unique".to_string(), |n| format!("unique at n = {n}")),
        match result.survived(true_key) {
            Some(true) => "survived",
            Some(false) => "eliminated",
            None => "not tracked",
        }
    );
    emit(a.out.as_deref(), csv.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert_eq!(parse_count("160").unwrap(), 160);
        assert_eq!(parse_count("100_000").unwrap(), 100_000);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("lots").is_err());
    }

    #[test]
    fn integers_accept_hex() {
        assert_eq!(parse_u32("0xACE1").unwrap(), 0xACE1);
        assert_eq!(parse_u32("17").unwrap(), 17);
        assert!(parse_u32("0xZZ").is_err());
    }

    #[test]
    fn counter_key_parsing() {
        let k = parse_key_hex(&"0f".repeat(32)).unwrap();
        assert_eq!(k, [0x0f; 32]);
        assert!(parse_key_hex("abc").is_err());
    }

    #[test]
    fn srm_error_matches_core_for_psk() {
        let e = psk_ensemble(8, 1.0).unwrap();
        let ch = qsc_core::quantum_detection::srm_channel(&e).unwrap();
        let direct = 1.0 - (0..8).map(|i| ch.get(i, i)).sum::<f64>() / 8.0;
        assert!((psk_srm_error(8, 1.0).unwrap() - direct).abs() < 1e-10);
    }
}
