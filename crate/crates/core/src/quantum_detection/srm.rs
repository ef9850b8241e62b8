use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use super::span::{ChannelMatrix, Povm, SpanBasis, SPECTRAL_FLOOR};
use super::PureStateEnsemble;
use crate::error::{invalid, Error, Result};
use crate::C64;

/// Uniform ensemble of `n` coherent states `|α e^{2πik/n}⟩`.
pub fn psk_ensemble(n: usize, amplitude: f64) -> Result<PureStateEnsemble> {
    if n == 0 {
        return Err(invalid("PSK ensemble needs at least one state"));
    }
    let amps = (0..n)
        .map(|k| C64::from_polar(amplitude, TAU * k as f64 / n as f64))
        .collect();
    PureStateEnsemble::uniform(amps)
}

/// Square-root measurement `|μ_l⟩ = H^{-1/2}|ψ_l⟩`, `H = Σ|ψ_m⟩⟨ψ_m|`.
///
/// In the Gram eigenframe the measurement vectors are simply the conjugated
/// rows of the eigenvector matrix.
pub fn srm_povm(basis: &SpanBasis) -> Result<Povm> {
    let v = basis.eigenvectors();
    let vectors = (0..basis.states())
        .map(|l| DVector::from_fn(basis.dim(), |k, _| v[(l, k)].conj()))
        .collect();
    Povm::from_vectors(basis, vectors)
}

/// SRM channel `P(l|m) = |(G^{1/2})_{ml}|²`, rows renormalized to absorb
/// the discarded spectrum.
pub fn srm_channel(ensemble: &PureStateEnsemble) -> Result<ChannelMatrix> {
    let basis = SpanBasis::from_ensemble(ensemble)?;
    let root = basis.gram_sqrt();
    let n = root.nrows();
    let mut p = DMatrix::from_fn(n, n, |m, l| root[(m, l)].norm_sqr());
    for mut row in p.row_iter_mut() {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row /= s;
        }
    }
    ChannelMatrix::new(p, basis.dropped())
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            c += (sum - s) + t;
        } else {
            c += (t - s) + sum;
        }
        sum = s;
    }
    sum + c
}

/// Error probability of the SRM for `N` covariant (circulant) states,
/// `1 - (Σ√λ_m)² / N²` with `λ_m` the DFT of the first Gram row.
///
/// `overlaps[k] = ⟨ψ_1|ψ_{k+1}⟩`. Uses the `N`-point kernel
/// `u = e^{2πi/N}` and the same eigenvalue floor as the direct route.
pub fn srm_error_covariant(n: usize, overlaps: &[C64]) -> Result<f64> {
    if n == 0 || overlaps.len() != n {
        return Err(invalid(format!("expected {n} overlaps, got {}", overlaps.len())));
    }
    let twiddle: Vec<(f64, f64)> = (0..n).map(|j| (TAU * j as f64 / n as f64).sin_cos()).collect();
    let mut root_sum = 0.0;
    for m in 0..n {
        // Re Σ_k g_k e^{-2πi k m / N}; the imaginary part vanishes for a
        // Hermitian circulant row.
        let lambda = compensated_sum(overlaps.iter().enumerate().flat_map(|(k, g)| {
            let (s, c) = twiddle[(k * m) % n];
            [g.re * c, g.im * s]
        }));
        if lambda < -1e-10 {
            return Err(Error::Numerical(format!("circulant eigenvalue {lambda} < 0")));
        }
        if lambda >= SPECTRAL_FLOOR {
            root_sum += lambda.sqrt();
        }
    }
    let pc = (root_sum / n as f64).powi(2);
    Ok((1.0 - pc).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::super::{coherent_overlap, helstrom_binary_pure};
    use super::*;

    fn first_row(e: &PureStateEnsemble) -> Vec<C64> {
        let a = e.amplitudes();
        a.iter().map(|&b| coherent_overlap(a[0], b)).collect()
    }

    #[test]
    fn orthogonal_states_give_identity_channel() {
        let basis_gram = DMatrix::<C64>::identity(3, 3);
        let basis = SpanBasis::from_gram(&basis_gram).unwrap();
        let povm = srm_povm(&basis).unwrap();
        let ch = povm.channel(&basis).unwrap();
        for m in 0..3 {
            for l in 0..3 {
                let want = if m == l { 1.0 } else { 0.0 };
                assert!((ch.get(m, l) - want).abs() < 1e-12);
            }
        }
        let mut ov = vec![C64::new(0.0, 0.0); 5];
        ov[0] = C64::new(1.0, 0.0);
        assert!(srm_error_covariant(5, &ov).unwrap().abs() < 1e-15);
    }

    #[test]
    fn binary_srm_matches_helstrom() {
        for a in [0.1, 0.4, 0.8, 1.5] {
            let e = psk_ensemble(2, a).unwrap();
            let ch = srm_channel(&e).unwrap();
            let kappa = coherent_overlap(e.amplitudes()[0], e.amplitudes()[1]).norm();
            let pc = 0.5 * (1.0 + (1.0 - kappa * kappa).sqrt());
            assert!((ch.get(0, 0) - pc).abs() < 1e-12);
            let pe = helstrom_binary_pure(kappa * kappa, 0.5).unwrap();
            assert!((1.0 - ch.get(0, 0) - pe).abs() < 1e-12);
            let cov = srm_error_covariant(2, &first_row(&e)).unwrap();
            assert!((cov - pe).abs() < 1e-12);
        }
    }

    #[test]
    fn psk8_channel_is_circulant() {
        let e = psk_ensemble(8, 1.0).unwrap();
        let ch = srm_channel(&e).unwrap();
        assert!(ch.is_circulant(1e-12));
        let basis = SpanBasis::from_ensemble(&e).unwrap();
        let via_povm = srm_povm(&basis).unwrap().channel(&basis).unwrap();
        assert!((via_povm.probabilities() - ch.probabilities()).amax() < 1e-12);
    }

    #[test]
    fn large_m_eve_error_is_near_one() {
        let e = psk_ensemble(1024, 3.0).unwrap();
        let p = srm_error_covariant(1024, &first_row(&e)).unwrap();
        assert!(p >= 0.95, "{p}");
    }

    #[test]
    fn covariant_error_increases_with_m() {
        let mut last = -1.0;
        for m in [2usize, 4, 8, 16, 32, 64, 128, 256, 512] {
            let e = psk_ensemble(2 * m, 3.0).unwrap();
            let p = srm_error_covariant(2 * m, &first_row(&e)).unwrap();
            assert!(p > last, "M={m}: {p} <= {last}");
            last = p;
        }
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(srm_error_covariant(3, &[C64::new(1.0, 0.0)]).is_err());
        let bad = vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(2.0, 0.0)];
        assert!(matches!(srm_error_covariant(3, &bad), Err(Error::Numerical(_))));
    }
}
