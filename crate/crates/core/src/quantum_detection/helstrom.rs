use super::span::{SpanBasis, SpanOperator};
use super::PureStateEnsemble;
use crate::constellation::{PhaseConstellation, Y00Constellation};
use crate::error::{invalid, Result};
use crate::C64;

/// Helstrom bound for two pure states with `κ² = |⟨ψ_0|ψ_1⟩|²` and prior
/// `ξ` on either one: `½[1 - √(1 - 4ξ(1-ξ)κ²)]`.
pub fn helstrom_binary_pure(kappa_sq: f64, xi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&kappa_sq) {
        return Err(invalid(format!("kappa^2 = {kappa_sq} outside [0, 1]")));
    }
    if !(xi > 0.0 && xi < 1.0) {
        return Err(invalid(format!("prior xi = {xi} outside (0, 1)")));
    }
    let disc = (1.0 - 4.0 * xi * (1.0 - xi) * kappa_sq).max(0.0);
    Ok(0.5 * (1.0 - disc.sqrt()))
}

/// Helstrom bound `½(1 - ‖ξ_1ρ_1 - ξ_0ρ_0‖₁)` for two density operators on
/// a common span; `xi` is the prior of `rho0`.
pub fn helstrom_binary_mixed(rho0: &SpanOperator, rho1: &SpanOperator, xi: f64) -> Result<f64> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(invalid(format!("prior xi = {xi} outside (0, 1)")));
    }
    if !rho0.is_density() || !rho1.is_density() {
        return Err(invalid("inputs must be density operators"));
    }
    let diff = rho1.combine(1.0 - xi, rho0, -xi)?;
    Ok((0.5 * (1.0 - diff.trace_norm())).clamp(0.0, 0.5))
}

/// Which points of the `2M` Y-00 constellation form Eve's binary mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureLabeling {
    /// Even versus odd constellation index around the circle.
    IndexParity,
    /// The placement bit each point actually carries.
    PlacementBit,
}

/// The two equal-weight mixtures `ρ^E_0`, `ρ^E_1` of the Y-00 signal set,
/// on the span of all `2M` states.
pub fn y00_binary_mixtures(
    m: u32,
    amplitude: f64,
    labeling: MixtureLabeling,
) -> Result<(SpanBasis, SpanOperator, SpanOperator)> {
    let c = Y00Constellation::new(m, amplitude)?;
    let amps: Vec<C64> = c.points().iter().map(|p| C64::from_polar(amplitude, p.theta)).collect();
    let basis = SpanBasis::from_ensemble(&PureStateEnsemble::uniform(amps)?)?;
    let label = |i: usize| match labeling {
        MixtureLabeling::IndexParity => (i % 2) as u8,
        MixtureLabeling::PlacementBit => c.points()[i].bit,
    };
    let mut zero = Vec::new();
    let mut one = Vec::new();
    for i in 0..c.len() {
        if label(i) == 0 {
            zero.push(i);
        } else {
            one.push(i);
        }
    }
    let w0 = 1.0 / zero.len() as f64;
    let w1 = 1.0 / one.len() as f64;
    let rho0 = basis.mixture(&zero.iter().map(|&i| (i, w0)).collect::<Vec<_>>());
    let rho1 = basis.mixture(&one.iter().map(|&i| (i, w1)).collect::<Vec<_>>());
    Ok((basis, rho0, rho1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn pure_pair(kappa_sq: f64) -> (SpanOperator, SpanOperator) {
        let k = C64::new(kappa_sq.sqrt(), 0.0);
        let g = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), k, k.conj(), C64::new(1.0, 0.0)]);
        let basis = SpanBasis::from_gram(&g).unwrap();
        (basis.projector(0), basis.projector(1))
    }

    #[test]
    fn pure_examples() {
        assert_eq!(helstrom_binary_pure(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(helstrom_binary_pure(1.0, 0.5).unwrap(), 0.5);
        let v = helstrom_binary_pure((-4.0f64).exp(), 0.5).unwrap();
        assert!((v - 0.5 * (1.0 - (1.0 - (-4.0f64).exp()).sqrt())).abs() < 1e-16);
        // Evaluates to 0.0046001; the commonly quoted 0.004604 is a loose rounding.
        assert!((v - 0.004_604).abs() < 5e-6);
        assert!(helstrom_binary_pure(1.5, 0.5).is_err());
        assert!(helstrom_binary_pure(0.5, 0.0).is_err());
        assert!(helstrom_binary_pure(0.5, 1.0).is_err());
    }

    #[test]
    fn mixed_reproduces_pure() {
        for kappa_sq in [0.0, 0.1, (-4.0f64).exp(), 0.5, 0.9, 1.0] {
            let (r0, r1) = pure_pair(kappa_sq);
            for xi in [0.1, 0.3, 0.5, 0.8] {
                let a = helstrom_binary_pure(kappa_sq, xi).unwrap();
                let b = helstrom_binary_mixed(&r0, &r1, xi).unwrap();
                assert!((a - b).abs() < 1e-10, "κ²={kappa_sq} ξ={xi}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn identical_states_give_half() {
        let (r0, _) = pure_pair(0.3);
        assert!((helstrom_binary_mixed(&r0, &r0, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_density() {
        let (r0, r1) = pure_pair(0.3);
        let twice = r0.combine(2.0, &r1, 0.0).unwrap();
        assert!(helstrom_binary_mixed(&twice, &r1, 0.5).is_err());
        let other = pure_pair(0.3).0;
        assert!(helstrom_binary_mixed(&other, &r1, 0.5).is_err());
    }

    #[test]
    fn y00_mixtures_near_half() {
        for labeling in [MixtureLabeling::IndexParity, MixtureLabeling::PlacementBit] {
            let (_, r0, r1) = y00_binary_mixtures(64, 3.0, labeling).unwrap();
            let p = helstrom_binary_mixed(&r0, &r1, 0.5).unwrap();
            assert!(p >= 0.49, "{labeling:?}: {p}");
        }
    }

    #[test]
    fn osk_mixtures_are_identical() {
        // With OSK each basis point carries either bit with probability ½,
        // so both data mixtures are the full uniform mixture.
        let c = Y00Constellation::new(8, 2.0).unwrap();
        let amps: Vec<C64> = c.points().iter().map(|p| C64::from_polar(2.0, p.theta)).collect();
        let basis = SpanBasis::from_ensemble(&PureStateEnsemble::uniform(amps).unwrap()).unwrap();
        let all: Vec<(usize, f64)> = (0..16).map(|i| (i, 1.0 / 16.0)).collect();
        let r = basis.mixture(&all);
        assert!((helstrom_binary_mixed(&r, &r.clone(), 0.5).unwrap() - 0.5).abs() < 1e-12);
    }
}
