//! Quantum detection in the finite span of coherent signal states.
//!
//! Every computation here works in an orthonormal basis of
//! `span{|α_m⟩}` obtained from the Hermitian eigendecomposition of the Gram
//! matrix, so no photon-number truncation is involved.

mod conditions;
mod helstrom;
mod information;
mod span;
mod srm;

pub use conditions::{
    verify_bayes_conditions, verify_mi_condition, verify_minimax_conditions, BayesResiduals, MinimaxResiduals,
};
pub use helstrom::{helstrom_binary_mixed, helstrom_binary_pure, y00_binary_mixtures, MixtureLabeling};
pub use information::{holevo_information, mutual_information, shannon_entropy_bits};
pub use span::{hermitian_eigen, ChannelMatrix, Povm, SpanBasis, SpanOperator, SPECTRAL_FLOOR};
pub use srm::{psk_ensemble, srm_channel, srm_error_covariant, srm_povm};

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::C64;

/// Inner product `⟨a|b⟩ = exp(-|a|²/2 - |b|²/2 + a* b)` of two coherent states.
pub fn coherent_overlap(a: C64, b: C64) -> C64 {
    (-(a.norm_sqr() + b.norm_sqr()) / 2.0 + a.conj() * b).exp()
}

/// Tolerance on the prior normalization.
const PRIOR_SUM_TOL: f64 = 1e-12;

/// A finite set of coherent states `|α_m⟩` with prior probabilities `ξ_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureStateEnsemble {
    amplitudes: Vec<C64>,
    priors: Vec<f64>,
}

impl PureStateEnsemble {
    pub fn new(amplitudes: Vec<C64>, priors: Vec<f64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(invalid("ensemble must contain at least one state"));
        }
        if amplitudes.len() != priors.len() {
            return Err(invalid(format!(
                "{} amplitudes but {} priors",
                amplitudes.len(),
                priors.len()
            )));
        }
        if let Some(p) = priors.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(invalid(format!("priors must be strictly positive, got {p}")));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(invalid(format!("priors sum to {total}, expected 1")));
        }
        Ok(Self { amplitudes, priors })
    }

    /// Equal priors `1/N`.
    pub fn uniform(amplitudes: Vec<C64>) -> Result<Self> {
        let n = amplitudes.len().max(1);
        Self::new(amplitudes, vec![1.0 / n as f64; n])
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

/// Gram matrix `G_ij = ⟨α_i|α_j⟩`.
pub fn gram_matrix(ensemble: &PureStateEnsemble) -> DMatrix<C64> {
    let a = ensemble.amplitudes();
    let n = a.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            coherent_overlap(a[i], a[j])
        }
    })
}
