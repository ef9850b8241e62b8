//! Residuals of the Bayes, minimax and mutual-information optimality
//! conditions for a given POVM on a pure-state ensemble.

use nalgebra::{DMatrix, DVector, Matrix2};

use super::span::{hermitian_eigen, Povm, SpanBasis};
use super::PureStateEnsemble;
use crate::error::{invalid, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesResiduals {
    /// `max_{l,m} ‖Π_m (ξ_m ρ_m - ξ_l ρ_l) Π_l‖`.
    pub offdiag: f64,
    /// `-min_l λ_min(γ - ξ_l ρ_l)`, `γ = Σ ξ_l ρ_l Π_l` (symmetrized).
    pub positivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimaxResiduals {
    pub bayes: BayesResiduals,
    /// `max_l Tr ρ_l Π_l - min_l Tr ρ_l Π_l`.
    pub spread: f64,
}

fn check(ensemble: &PureStateEnsemble, basis: &SpanBasis, povm: &Povm) -> Result<()> {
    if basis.states() != ensemble.len() {
        return Err(invalid("span does not match the ensemble"));
    }
    if povm.span_id() != basis.id() {
        return Err(invalid("POVM and states live on different spans"));
    }
    if povm.dim() != basis.dim() {
        return Err(invalid(format!(
            "POVM acts on dimension {}, span has dimension {}",
            povm.dim(),
            basis.dim()
        )));
    }
    if povm.len() != ensemble.len() {
        return Err(invalid(format!(
            "POVM has {} outcomes for {} hypotheses",
            povm.len(),
            ensemble.len()
        )));
    }
    Ok(())
}

/// Spectral norm of `x y† - z w†` via the 2×2 product `(P†P)(Q†Q)` with
/// `P = [x, z]`, `Q = [y, -w]`.
fn rank_two_norm(x: &DVector<C64>, y: &DVector<C64>, z: &DVector<C64>, w: &DVector<C64>) -> f64 {
    let pp = Matrix2::new(x.dotc(x), x.dotc(z), z.dotc(x), z.dotc(z));
    let qq = Matrix2::new(y.dotc(y), -y.dotc(w), -w.dotc(y), w.dotc(w));
    let k = pp * qq;
    let tr = (k[(0, 0)] + k[(1, 1)]).re;
    let det = (k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)]).re;
    let disc = (tr * tr - 4.0 * det).max(0.0);
    (0.5 * (tr + disc.sqrt())).max(0.0).sqrt()
}

/// `Π_a |ψ_b⟩` for every pair.
fn projected_states(basis: &SpanBasis, povm: &Povm) -> Vec<Vec<DVector<C64>>> {
    let coords = basis.basis_transform();
    povm.elements()
        .iter()
        .map(|e| (0..basis.states()).map(|b| e.matrix() * coords.column(b)).collect())
        .collect()
}

fn bayes_residuals(ensemble: &PureStateEnsemble, basis: &SpanBasis, povm: &Povm) -> BayesResiduals {
    let xi = ensemble.priors();
    let n = ensemble.len();
    let d = basis.dim();
    let w = projected_states(basis, povm);

    let mut offdiag = 0.0f64;
    for m in 0..n {
        for l in 0..n {
            if l == m {
                continue;
            }
            // Π_m (ξ_m|ψ_m⟩⟨ψ_m| - ξ_l|ψ_l⟩⟨ψ_l|) Π_l
            let x = &w[m][m] * C64::new(xi[m], 0.0);
            let z = &w[m][l] * C64::new(xi[l], 0.0);
            offdiag = offdiag.max(rank_two_norm(&x, &w[l][m], &z, &w[l][l]));
        }
    }

    let coords = basis.basis_transform();
    let mut gamma = DMatrix::<C64>::zeros(d, d);
    for l in 0..n {
        gamma += (coords.column(l) * w[l][l].adjoint()) * C64::new(xi[l], 0.0);
    }
    let gamma = (&gamma + gamma.adjoint()) * C64::new(0.5, 0.0);
    let mut positivity = f64::NEG_INFINITY;
    for l in 0..n {
        let c = coords.column(l);
        let op = &gamma - (c * c.adjoint()) * C64::new(xi[l], 0.0);
        let (vals, _) = hermitian_eigen(&op);
        positivity = positivity.max(-vals[d - 1]);
    }
    BayesResiduals { offdiag, positivity }
}

/// Holevo–Yuen conditions for Bayes optimality of `povm`.
pub fn verify_bayes_conditions(ensemble: &PureStateEnsemble, basis: &SpanBasis, povm: &Povm) -> Result<BayesResiduals> {
    check(ensemble, basis, povm)?;
    Ok(bayes_residuals(ensemble, basis, povm))
}

/// Minimax conditions: the Bayes residuals plus the spread of the
/// conditional correct-decision probabilities.
pub fn verify_minimax_conditions(
    ensemble: &PureStateEnsemble,
    basis: &SpanBasis,
    povm: &Povm,
) -> Result<MinimaxResiduals> {
    check(ensemble, basis, povm)?;
    let bayes = bayes_residuals(ensemble, basis, povm);
    let ch = povm.channel(basis)?;
    let correct: Vec<f64> = (0..ensemble.len()).map(|l| ch.get(l, l)).collect();
    let hi = correct.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = correct.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(MinimaxResiduals { bayes, spread: hi - lo })
}

/// Residual of the stationarity condition for maximum mutual information,
/// `max_{i,j} ‖Π_j (F_j - F_i) Π_i‖` with
/// `F_j = Σ_l ξ_l ρ_l log₂[P(j|l) / Σ_k ξ_k P(j|k)]`.
/// Terms with `P(j|l) = 0` are left out; outcomes that never occur are
/// skipped.
pub fn verify_mi_condition(ensemble: &PureStateEnsemble, basis: &SpanBasis, povm: &Povm) -> Result<f64> {
    check(ensemble, basis, povm)?;
    let xi = ensemble.priors();
    let n = ensemble.len();
    let outcomes = povm.len();
    let d = basis.dim();
    let ch = povm.channel(basis)?;
    let coords = basis.basis_transform();

    let mut f: Vec<Option<DMatrix<C64>>> = Vec::with_capacity(outcomes);
    for j in 0..outcomes {
        let q: f64 = (0..n).map(|k| xi[k] * ch.get(k, j)).sum();
        if q <= 0.0 {
            f.push(None);
            continue;
        }
        let mut fj = DMatrix::<C64>::zeros(d, d);
        for l in 0..n {
            let p = ch.get(l, j);
            if p > 0.0 {
                let c = coords.column(l);
                fj += (c * c.adjoint()) * C64::new(xi[l] * (p / q).log2(), 0.0);
            }
        }
        f.push(Some(fj));
    }

    let mut residual = 0.0f64;
    match povm.vectors() {
        Some(mu) => {
            let norms: Vec<f64> = mu.iter().map(|v| v.norm()).collect();
            for i in 0..outcomes {
                let Some(fi) = &f[i] else { continue };
                let fi_mu = fi * &mu[i];
                for j in 0..outcomes {
                    if i == j {
                        continue;
                    }
                    let Some(fj) = &f[j] else { continue };
                    let v = mu[j].dotc(&(fj * &mu[i])) - mu[j].dotc(&fi_mu);
                    residual = residual.max(v.norm() * norms[i] * norms[j]);
                }
            }
        }
        None => {
            let el = povm.elements();
            for i in 0..outcomes {
                let Some(fi) = &f[i] else { continue };
                for j in 0..outcomes {
                    if i == j {
                        continue;
                    }
                    let Some(fj) = &f[j] else { continue };
                    let m = el[j].matrix() * (fj - fi) * el[i].matrix();
                    let s = m.singular_values().iter().cloned().fold(0.0, f64::max);
                    residual = residual.max(s);
                }
            }
        }
    }
    Ok(residual)
}
