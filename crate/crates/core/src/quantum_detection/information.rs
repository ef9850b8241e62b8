use nalgebra::DMatrix;

use super::span::{hermitian_eigen, ChannelMatrix};
use super::{gram_matrix, PureStateEnsemble};
use crate::error::{invalid, Result};
use crate::C64;

/// `-Σ p log₂ p`, skipping non-positive entries.
pub fn shannon_entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

/// Holevo quantity of a pure-state ensemble: the von Neumann entropy of
/// `ρ_T = Σ ξ_k |ψ_k⟩⟨ψ_k|`, read off the spectrum of `D^{1/2} G D^{1/2}`.
pub fn holevo_information(ensemble: &PureStateEnsemble) -> f64 {
    let g = gram_matrix(ensemble);
    let s: Vec<f64> = ensemble.priors().iter().map(|p| p.sqrt()).collect();
    let n = ensemble.len();
    let weighted = DMatrix::from_fn(n, n, |i, j| g[(i, j)] * C64::new(s[i] * s[j], 0.0));
    let (vals, _) = hermitian_eigen(&weighted);
    let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    shannon_entropy_bits(&clipped)
}

/// `I(X;Y)` in bits for input distribution `priors` through `channel`.
pub fn mutual_information(channel: &ChannelMatrix, priors: &[f64]) -> Result<f64> {
    if priors.len() != channel.inputs() {
        return Err(invalid(format!(
            "{} priors for a channel with {} inputs",
            priors.len(),
            channel.inputs()
        )));
    }
    let total: f64 = priors.iter().sum();
    if priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(invalid("priors must be a probability vector"));
    }
    let q: Vec<f64> = (0..channel.outputs())
        .map(|j| (0..channel.inputs()).map(|i| priors[i] * channel.get(i, j)).sum())
        .collect();
    let mut mi = 0.0;
    for (i, &p) in priors.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (j, &qj) in q.iter().enumerate() {
            let w = channel.get(i, j);
            if w > 0.0 && qj > 0.0 {
                mi += p * w * (w / qj).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::super::{psk_ensemble, srm_channel, srm_povm, SpanBasis};
    use super::*;

    fn h2(p: f64) -> f64 {
        shannon_entropy_bits(&[p, 1.0 - p])
    }

    #[test]
    fn identity_and_constant_channels() {
        for n in [2usize, 3, 8] {
            let ch = ChannelMatrix::new(DMatrix::identity(n, n), 0).unwrap();
            let mi = mutual_information(&ch, &vec![1.0 / n as f64; n]).unwrap();
            assert!((mi - (n as f64).log2()).abs() < 1e-12);
            let flat = ChannelMatrix::new(DMatrix::from_element(n, n, 1.0 / n as f64), 0).unwrap();
            assert!(mutual_information(&flat, &vec![1.0 / n as f64; n]).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn binary_symmetric_channel() {
        let p = 0.11;
        let ch = ChannelMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0 - p, p, p, 1.0 - p]), 0).unwrap();
        let mi = mutual_information(&ch, &[0.5, 0.5]).unwrap();
        assert!((mi - (1.0 - h2(p))).abs() < 1e-12);
        assert!((mi - 0.5002).abs() < 2e-4, "{mi}");
    }

    #[test]
    fn holevo_trivial_cases() {
        let far = PureStateEnsemble::uniform(vec![C64::new(0.0, 0.0), C64::new(40.0, 0.0)]).unwrap();
        assert!((holevo_information(&far) - 1.0).abs() < 1e-12);
        let one = PureStateEnsemble::uniform(vec![C64::new(1.0, 1.0)]).unwrap();
        assert!(holevo_information(&one).abs() < 1e-12);
    }

    #[test]
    fn holevo_dominates_srm_information() {
        let e = psk_ensemble(8, 1.0).unwrap();
        let ih = holevo_information(&e);
        let mi = mutual_information(&srm_channel(&e).unwrap(), e.priors()).unwrap();
        assert!(ih >= mi - 1e-9, "{ih} < {mi}");
        assert!(ih <= 3.0 + 1e-12);
        let basis = SpanBasis::from_ensemble(&e).unwrap();
        let via = srm_povm(&basis).unwrap().channel(&basis).unwrap();
        assert!((mutual_information(&via, e.priors()).unwrap() - mi).abs() < 1e-10);
    }

    #[test]
    fn binary_holevo_matches_entropy_of_overlap() {
        // Two pure states with overlap κ: ρ_T has eigenvalues (1 ± κ)/2.
        let a = 0.6;
        let e = psk_ensemble(2, a).unwrap();
        let kappa = (-2.0 * a * a).exp();
        assert!((holevo_information(&e) - h2(0.5 * (1.0 + kappa))).abs() < 1e-12);
    }
}
