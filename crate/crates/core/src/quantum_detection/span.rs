use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use super::{gram_matrix, PureStateEnsemble};
use crate::error::{invalid, Error, Result};
use crate::C64;

/// Eigenvalues below this are treated as zero: they define the numerical
/// rank of the span and are dropped from square roots.
pub const SPECTRAL_FLOOR: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const COMPLETENESS_TOL: f64 = 1e-9;
const ROW_SUM_TOL: f64 = 1e-10;

/// Largest Fock truncation used to build a coherent span directly.
const MAX_FOCK_DIM: usize = 256;
/// Photon-number weight left outside the truncation.
const FOCK_TAIL: f64 = 1e-36;
const SVD_EPS: f64 = f64::EPSILON / 16.0;
const SVD_MAX_ITER: usize = 10_000;

static NEXT_SPAN_ID: AtomicU64 = AtomicU64::new(1);

/// Hermitian eigendecomposition with eigenvalues sorted in decreasing order.
/// Column `k` of the returned matrix is the eigenvector for value `k`.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Fock levels needed for `|α|² ≤ max_sq`, or `None` past [`MAX_FOCK_DIM`].
fn fock_dim(max_sq: f64) -> Option<usize> {
    if max_sq == 0.0 {
        return Some(1);
    }
    let (ln_a2, ln_tail) = (max_sq.ln(), FOCK_TAIL.ln());
    let mut ln_p = -max_sq;
    for k in 0..MAX_FOCK_DIM {
        let r = max_sq / (k + 1) as f64;
        if r < 1.0 && ln_p + (r / (1.0 - r)).ln() < ln_tail {
            return Some(k + 1);
        }
        ln_p += ln_a2 - ((k + 1) as f64).ln();
    }
    None
}

/// `⟨k|α⟩ = e^{-|α|²/2} α^k / √k!`, evaluated in log magnitude.
fn fock_coefficient(a: C64, k: usize, ln_k_fact: f64) -> C64 {
    let r = a.norm();
    if r == 0.0 {
        return C64::new(if k == 0 { 1.0 } else { 0.0 }, 0.0);
    }
    let ln_mag = -0.5 * r * r + k as f64 * r.ln() - 0.5 * ln_k_fact;
    C64::from_polar(ln_mag.exp(), k as f64 * a.arg())
}

fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Orthonormal basis of `span{|ψ_m⟩}` built from the Gram matrix.
///
/// With `G = V Λ V†`, the coordinates of state `m` in the eigenbasis are
/// column `m` of `Λ^{1/2} V†` (eigenvalues below [`SPECTRAL_FLOOR`]
/// discarded). This coordinate matrix is the basis transform from state
/// labels to the orthonormal frame.
#[derive(Debug, Clone)]
pub struct SpanBasis {
    id: u64,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
    coords: DMatrix<C64>,
    dropped: usize,
}

impl SpanBasis {
    /// Coherent ensembles whose photon statistics fit in [`MAX_FOCK_DIM`]
    /// levels are factored as `Ψ = U Σ V†` from their Fock coefficients, so
    /// `√λ = σ` carries full relative precision on the near-null spectrum.
    /// Larger amplitudes fall back to the Gram eigendecomposition.
    pub fn from_ensemble(ensemble: &PureStateEnsemble) -> Result<Self> {
        let max_sq = ensemble.amplitudes().iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
        match fock_dim(max_sq).and_then(|d| Self::from_fock(ensemble.amplitudes(), d)) {
            Some(basis) => Ok(basis),
            None => Self::from_gram(&gram_matrix(ensemble)),
        }
    }

    fn from_fock(amps: &[C64], d: usize) -> Option<Self> {
        let n = amps.len();
        let mut ln_fact = vec![0.0f64; d];
        for k in 1..d {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        let psi = DMatrix::from_fn(d, n, |k, m| fock_coefficient(amps[m], k, ln_fact[k]));
        // nalgebra's default SVD stopping rule leaves ~1e-9 residuals on
        // these matrices; a tighter threshold restores full accuracy.
        let (singular, vt) = if d >= n {
            let svd = psi.try_svd(false, true, SVD_EPS, SVD_MAX_ITER)?;
            (svd.singular_values, svd.v_t?)
        } else {
            let svd = psi.adjoint().try_svd(true, false, SVD_EPS, SVD_MAX_ITER)?;
            (svd.singular_values, svd.u?.adjoint())
        };
        let mut order: Vec<usize> = (0..singular.len()).collect();
        order.sort_by(|&a, &b| singular[b].total_cmp(&singular[a]));
        let sigma: Vec<f64> = order.iter().map(|&i| singular[i]).collect();
        let rank = sigma.iter().take_while(|&&s| s * s >= SPECTRAL_FLOOR).count().max(1);
        let eigenvalues: Vec<f64> = sigma[..rank].iter().map(|s| s * s).collect();
        let eigenvectors = DMatrix::from_fn(n, rank, |m, k| vt[(order[k], m)].conj());
        let coords = DMatrix::from_fn(rank, n, |k, m| vt[(order[k], m)] * sigma[k]);
        Some(Self {
            id: NEXT_SPAN_ID.fetch_add(1, Ordering::Relaxed),
            eigenvalues,
            eigenvectors,
            coords,
            dropped: n - rank,
        })
    }

    /// Builds the span from any Gram matrix of normalized pure states.
    pub fn from_gram(gram: &DMatrix<C64>) -> Result<Self> {
        if !gram.is_square() || gram.is_empty() {
            return Err(invalid("Gram matrix must be square and non-empty"));
        }
        if (gram - gram.adjoint()).camax() > HERMITIAN_TOL {
            return Err(invalid("Gram matrix is not Hermitian"));
        }
        let n = gram.nrows();
        let (values, vectors) = hermitian_eigen(gram);
        let scale = values[0].abs().max(1.0);
        if let Some(v) = values.last().filter(|v| **v < -1e-8 * scale) {
            return Err(Error::Numerical(format!("Gram eigenvalue {v} is negative")));
        }
        let rank = values.iter().take_while(|&&v| v >= SPECTRAL_FLOOR).count().max(1);
        let eigenvalues: Vec<f64> = values[..rank].to_vec();
        let eigenvectors = vectors.columns(0, rank).into_owned();
        let coords = DMatrix::from_fn(rank, n, |k, m| eigenvectors[(m, k)].conj() * eigenvalues[k].sqrt());
        Ok(Self {
            id: NEXT_SPAN_ID.fetch_add(1, Ordering::Relaxed),
            eigenvalues,
            eigenvectors,
            coords,
            dropped: n - rank,
        })
    }

    pub(crate) fn id(&self) -> u64 {
        self.id
    }

    /// Dimension of the span (numerical rank).
    pub fn dim(&self) -> usize {
        self.coords.nrows()
    }

    /// Number of signal states.
    pub fn states(&self) -> usize {
        self.coords.ncols()
    }

    /// Eigenvalues discarded as numerically zero.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.dropped > 0
    }

    /// Retained Gram eigenvalues, decreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Retained Gram eigenvectors (`N × dim`).
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    /// State coordinates in the orthonormal frame (`dim × N`).
    pub fn basis_transform(&self) -> &DMatrix<C64> {
        &self.coords
    }

    pub fn state(&self, m: usize) -> DVector<C64> {
        self.coords.column(m).into_owned()
    }

    /// `G^{1/2}` restricted to the retained spectrum.
    pub fn gram_sqrt(&self) -> DMatrix<C64> {
        let n = self.states();
        let v = &self.eigenvectors;
        DMatrix::from_fn(n, n, |i, j| {
            (0..self.dim())
                .map(|k| v[(i, k)] * v[(j, k)].conj() * self.eigenvalues[k].sqrt())
                .sum()
        })
    }

    fn wrap(&self, matrix: DMatrix<C64>) -> SpanOperator {
        SpanOperator { matrix, span: self.id }
    }

    /// `|ψ_m⟩⟨ψ_m|`.
    pub fn projector(&self, m: usize) -> SpanOperator {
        let c = self.state(m);
        self.wrap(&c * c.adjoint())
    }

    /// `Σ w_m |ψ_m⟩⟨ψ_m|`.
    pub fn mixture(&self, weights: &[(usize, f64)]) -> SpanOperator {
        let d = self.dim();
        let mut acc = DMatrix::zeros(d, d);
        for &(m, w) in weights {
            let c = self.coords.column(m);
            acc += (c * c.adjoint()) * C64::new(w, 0.0);
        }
        self.wrap(acc)
    }

    pub fn identity(&self) -> SpanOperator {
        self.wrap(DMatrix::identity(self.dim(), self.dim()))
    }

    pub fn zero(&self) -> SpanOperator {
        self.wrap(DMatrix::zeros(self.dim(), self.dim()))
    }

    /// Wraps an explicit matrix given in this span's orthonormal frame.
    pub fn operator(&self, matrix: DMatrix<C64>) -> Result<SpanOperator> {
        if matrix.nrows() != self.dim() || matrix.ncols() != self.dim() {
            return Err(invalid(format!(
                "operator is {}x{}, span has dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                self.dim()
            )));
        }
        Ok(self.wrap(matrix))
    }
}

/// An operator on a [`SpanBasis`], stored in the span's orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanOperator {
    matrix: DMatrix<C64>,
    span: u64,
}

impl SpanOperator {
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn same_span(&self, other: &SpanOperator) -> bool {
        self.span == other.span
    }

    pub fn is_hermitian(&self) -> bool {
        (&self.matrix - self.matrix.adjoint()).camax() <= HERMITIAN_TOL
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn is_positive(&self) -> bool {
        self.is_hermitian() && self.min_eigenvalue() >= -PSD_TOL
    }

    /// Hermitian with unit trace and no eigenvalue below `-1e-10`.
    pub fn is_density(&self) -> bool {
        self.is_positive() && (self.trace() - C64::new(1.0, 0.0)).norm() <= 1e-10
    }

    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }

    /// `Σ |λ_k|`, for Hermitian operators.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|v| v.abs()).sum()
    }

    /// `a·self + b·other`, both on the same span.
    pub fn combine(&self, a: f64, other: &SpanOperator, b: f64) -> Result<SpanOperator> {
        if !self.same_span(other) {
            return Err(invalid("operators live on different spans"));
        }
        Ok(SpanOperator {
            matrix: &self.matrix * C64::new(a, 0.0) + &other.matrix * C64::new(b, 0.0),
            span: self.span,
        })
    }
}

/// A POVM `{Π_l}` on a span. Rank-one POVMs keep their vectors `|μ_l⟩`
/// (`Π_l = |μ_l⟩⟨μ_l|`) for cheap residual evaluation.
#[derive(Debug, Clone)]
pub struct Povm {
    elements: Vec<SpanOperator>,
    vectors: Option<Vec<DVector<C64>>>,
}

impl Povm {
    /// Validates positivity of every element and completeness
    /// `Σ Π_l = I` within `1e-9`.
    pub fn new(elements: Vec<SpanOperator>) -> Result<Self> {
        let povm = Self {
            elements,
            vectors: None,
        };
        povm.validate()?;
        Ok(povm)
    }

    /// Rank-one POVM from vectors in the span frame of `basis`.
    pub fn from_vectors(basis: &SpanBasis, vectors: Vec<DVector<C64>>) -> Result<Self> {
        if let Some(v) = vectors.iter().find(|v| v.len() != basis.dim()) {
            return Err(invalid(format!("POVM vector has length {}, span dimension {}", v.len(), basis.dim())));
        }
        let elements = vectors.iter().map(|v| basis.wrap(v * v.adjoint())).collect();
        let povm = Self {
            elements,
            vectors: Some(vectors),
        };
        povm.validate()?;
        Ok(povm)
    }

    fn validate(&self) -> Result<()> {
        let first = self.elements.first().ok_or_else(|| invalid("POVM needs at least one element"))?;
        if self.elements.iter().any(|e| !e.same_span(first)) {
            return Err(invalid("POVM elements live on different spans"));
        }
        if let Some(l) = self.elements.iter().position(|e| !e.is_positive()) {
            return Err(invalid(format!("POVM element {l} is not positive semidefinite")));
        }
        let r = self.completeness_residual();
        if r > COMPLETENESS_TOL {
            return Err(invalid(format!("POVM completeness residual {r:.3e} exceeds {COMPLETENESS_TOL:.0e}")));
        }
        Ok(())
    }

    pub fn elements(&self) -> &[SpanOperator] {
        &self.elements
    }

    pub fn vectors(&self) -> Option<&[DVector<C64>]> {
        self.vectors.as_deref()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub(crate) fn span_id(&self) -> u64 {
        self.elements[0].span
    }

    /// Spectral norm of `Σ Π_l - I`.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.dim();
        let mut total = DMatrix::<C64>::identity(d, d) * C64::new(-1.0, 0.0);
        for e in &self.elements {
            total += &e.matrix;
        }
        spectral_norm(&total)
    }

    /// Channel `P(l|m) = ⟨ψ_m|Π_l|ψ_m⟩` for every state of `basis`.
    pub fn channel(&self, basis: &SpanBasis) -> Result<ChannelMatrix> {
        if self.span_id() != basis.id {
            return Err(invalid("POVM and states live on different spans"));
        }
        let n = basis.states();
        let raw = DMatrix::from_fn(n, self.len(), |m, l| {
            let c = basis.coords.column(m);
            match &self.vectors {
                Some(v) => v[l].dotc(&c).norm_sqr(),
                None => c.dotc(&(&self.elements[l].matrix * c)).re,
            }
        });
        ChannelMatrix::new(raw, basis.dropped())
    }
}

/// Classical channel `P(l|m)` induced by a measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    probabilities: DMatrix<f64>,
    /// Eigenvalues of the Gram matrix discarded to form the span.
    pub dropped_rank: usize,
}

impl ChannelMatrix {
    /// Clips entries into `[0, 1]` and checks that each row sums to one
    /// within `1e-10`. Entries below `-1e-12` or above `1 + 1e-12` are
    /// rejected rather than clipped.
    pub fn new(raw: DMatrix<f64>, dropped_rank: usize) -> Result<Self> {
        if let Some(v) = raw.iter().find(|v| !v.is_finite() || **v < -1e-12 || **v > 1.0 + 1e-12) {
            return Err(Error::Numerical(format!("channel entry {v} outside [0, 1]")));
        }
        let probabilities = raw.map(|v| v.clamp(0.0, 1.0));
        for (m, row) in probabilities.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Numerical(format!("channel row {m} sums to {s}")));
            }
        }
        Ok(Self {
            probabilities,
            dropped_rank,
        })
    }

    pub fn probabilities(&self) -> &DMatrix<f64> {
        &self.probabilities
    }

    pub fn get(&self, m: usize, l: usize) -> f64 {
        self.probabilities[(m, l)]
    }

    pub fn inputs(&self) -> usize {
        self.probabilities.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.probabilities.ncols()
    }

    /// `Σ_m ξ_m P(m|m)` for a square channel.
    pub fn success_probability(&self, priors: &[f64]) -> f64 {
        priors.iter().enumerate().map(|(m, p)| p * self.probabilities[(m, m)]).sum()
    }

    /// Whether every row is the cyclic shift of the first one.
    pub fn is_circulant(&self, tol: f64) -> bool {
        let n = self.inputs();
        if self.outputs() != n {
            return false;
        }
        (0..n).all(|m| (0..n).all(|l| (self.get(m, l) - self.get(0, (l + n - m) % n)).abs() <= tol))
    }
}

#[cfg(test)]
mod tests {
    use super::super::psk_ensemble;
    use super::*;

    #[test]
    fn fock_truncation_covers_photon_statistics() {
        assert_eq!(fock_dim(0.0), Some(1));
        let d = fock_dim(16.0).unwrap();
        assert!(d > 16 && d < 200, "{d}");
        assert!(fock_dim(64.0).is_some());
        assert!(fock_dim(1e3).is_none());
        let a = C64::from_polar(2.0, 0.7);
        let mut ln_fact = 0.0;
        let mut norm = 0.0;
        for k in 0..fock_dim(4.0).unwrap() {
            if k > 0 {
                ln_fact += (k as f64).ln();
            }
            norm += fock_coefficient(a, k, ln_fact).norm_sqr();
        }
        assert!((norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fock_and_gram_routes_agree() {
        for (n, amp) in [(4usize, 1.0), (16, 2.0), (32, 4.0), (8, 8.0), (3, 40.0)] {
            let e = psk_ensemble(n, amp).unwrap();
            let fock = SpanBasis::from_ensemble(&e).unwrap();
            let gram = SpanBasis::from_gram(&gram_matrix(&e)).unwrap();
            assert_eq!(fock.dim(), gram.dim());
            let c = fock.basis_transform();
            let dev = (c.adjoint() * c - gram_matrix(&e)).camax();
            assert!(dev < 1e-13, "n={n} amp={amp}: {dev:e}");
            assert!((fock.gram_sqrt() - gram.gram_sqrt()).camax() < 1e-6);
        }
    }

    #[test]
    fn fock_route_keeps_near_null_directions_accurate() {
        // Rank-deficient covariant set: every state must stay unit norm and
        // the SRM diagonal must stay uniform.
        let e = psk_ensemble(64, 1.0).unwrap();
        let b = SpanBasis::from_ensemble(&e).unwrap();
        assert!(b.is_rank_deficient());
        let c = b.basis_transform();
        for m in 0..64 {
            assert!((c.column(m).norm_squared() - 1.0).abs() < 1e-13);
        }
        let root = b.gram_sqrt();
        let d: Vec<f64> = (0..64).map(|m| root[(m, m)].norm_sqr()).collect();
        let spread = d.iter().cloned().fold(f64::MIN, f64::max) - d.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-12, "{spread}");
    }

    #[test]
    fn general_gram_rejects_bad_input() {
        let one = C64::new(1.0, 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[one, C64::new(0.5, 0.0), C64::new(0.1, 0.0), one]);
        assert!(SpanBasis::from_gram(&bad).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[one, C64::new(2.0, 0.0), C64::new(2.0, 0.0), one]);
        assert!(matches!(SpanBasis::from_gram(&neg), Err(Error::Numerical(_))));
    }
}
