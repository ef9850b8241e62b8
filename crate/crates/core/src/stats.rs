//! Small statistical helpers for the Monte Carlo checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};

/// Empirical proportion with its normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialEstimate {
    pub successes: u64,
    pub trials: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BinomialEstimate {
    /// `z`-sigma interval, clipped to `[0, 1]`.
    pub fn new(successes: u64, trials: u64, z: f64) -> Self {
        let rate = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        let half = z * binomial_sd(rate, trials);
        Self {
            successes,
            trials,
            rate,
            ci_low: (rate - half).max(0.0),
            ci_high: (rate + half).min(1.0),
        }
    }

    pub fn covers(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }

    /// Whether the estimate is within `k` standard deviations of `p`, the
    /// deviation taken under the hypothesis `p`.
    pub fn within_sigmas(&self, p: f64, k: f64) -> bool {
        (self.rate - p).abs() <= k * binomial_sd(p, self.trials)
    }
}

/// `√(p(1-p)/n)`.
pub fn binomial_sd(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Pearson χ² goodness-of-fit p-value of `counts` against `expected`
/// probabilities.
pub fn chi_square_p_value(counts: &[u64], expected: &[f64]) -> Result<f64> {
    if counts.len() != expected.len() || counts.len() < 2 {
        return Err(invalid("need at least two matching categories"));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(invalid("no observations"));
    }
    let mut stat = 0.0;
    for (&c, &p) in counts.iter().zip(expected) {
        if !(p > 0.0) {
            return Err(invalid("expected probabilities must be positive"));
        }
        let e = p * n as f64;
        stat += (c as f64 - e).powi(2) / e;
    }
    let dist = ChiSquared::new((counts.len() - 1) as f64).map_err(|e| invalid(e.to_string()))?;
    Ok(dist.sf(stat))
}

/// χ² test against the uniform distribution.
pub fn chi_square_uniform_p_value(counts: &[u64]) -> Result<f64> {
    let k = counts.len().max(1);
    chi_square_p_value(counts, &vec![1.0 / k as f64; k])
}

/// χ² test that two count vectors over the same categories come from one
/// distribution. Categories empty in both samples are dropped.
pub fn chi_square_homogeneity_p_value(a: &[u64], b: &[u64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid("count vectors differ in length"));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(invalid("no observations"));
    }
    let total = (na + nb) as f64;
    let mut stat = 0.0;
    let mut cats = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cats += 1;
        let ea = col * na as f64 / total;
        let eb = col * nb as f64 / total;
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    if cats < 2 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new((cats - 1) as f64).map_err(|e| invalid(e.to_string()))?;
    Ok(dist.sf(stat))
}

/// Two-sample Kolmogorov–Smirnov statistic `D` and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS test needs two non-empty samples"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok((d, kolmogorov_sf(lambda)))
}

/// `Q_KS(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Plug-in mutual information (bits) of paired discrete samples, with the
/// first-order Miller–Madow bias `(K_xy - K_x - K_y + 1) / (2N ln 2)`.
pub fn plugin_mutual_information(x: &[usize], y: &[usize], nx: usize, ny: usize) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(invalid("samples must be paired"));
    }
    if x.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut joint = vec![0u64; nx * ny];
    let mut px = vec![0u64; nx];
    let mut py = vec![0u64; ny];
    for (&a, &b) in x.iter().zip(y) {
        if a >= nx || b >= ny {
            return Err(invalid("sample outside alphabet"));
        }
        joint[a * ny + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let n = x.len() as f64;
    let mut mi = 0.0;
    for a in 0..nx {
        for b in 0..ny {
            let c = joint[a * ny + b];
            if c > 0 {
                let pxy = c as f64 / n;
                mi += pxy * (c as f64 * n / (px[a] as f64 * py[b] as f64)).log2();
            }
        }
    }
    let nz = |v: &[u64]| v.iter().filter(|&&c| c > 0).count() as f64;
    let bias = (nz(&joint) - nz(&px) - nz(&py) + 1.0).max(0.0) / (2.0 * n * std::f64::consts::LN_2);
    Ok((mi.max(0.0), bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binomial_interval() {
        let e = BinomialEstimate::new(50, 100, 3.0);
        assert_eq!(e.rate, 0.5);
        assert!((e.ci_high - 0.65).abs() < 1e-12 && e.covers(0.5));
        assert!(e.within_sigmas(0.5, 0.1));
        assert!(!e.within_sigmas(0.8, 3.0));
    }

    #[test]
    fn chi_square_detects_skew() {
        assert!(chi_square_uniform_p_value(&[100, 100, 100, 100]).unwrap() > 0.99);
        assert!(chi_square_uniform_p_value(&[200, 100, 100, 0]).unwrap() < 1e-6);
        // χ²₁ survival at 3.8415 is 0.05.
        let p = chi_square_p_value(&[0, 0], &[0.5, 0.5]);
        assert!(p.is_err());
        let p = chi_square_p_value(&[60, 40], &[0.5, 0.5]).unwrap();
        assert!((p - 0.0455).abs() < 1e-3, "{p}");
    }

    #[test]
    fn homogeneity() {
        assert!(chi_square_homogeneity_p_value(&[100, 200, 300], &[110, 190, 300]).unwrap() > 0.3);
        assert!(chi_square_homogeneity_p_value(&[100, 200, 300], &[300, 200, 100]).unwrap() < 1e-10);
        assert_eq!(chi_square_homogeneity_p_value(&[5, 0], &[7, 0]).unwrap(), 1.0);
    }

    #[test]
    fn ks_same_and_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() + 0.2).collect();
        assert!(ks_two_sample(&a, &b).unwrap().1 > 0.01);
        assert!(ks_two_sample(&a, &c).unwrap().1 < 1e-10);
        let (d, p) = ks_two_sample(&a, &a).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Tabulated critical values: Q(1.3581) = 0.05, Q(1.6276) = 0.01.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn plugin_mi_limits() {
        let x: Vec<usize> = (0..4000).map(|i| i % 8).collect();
        let (mi, _) = plugin_mutual_information(&x, &x, 8, 8).unwrap();
        assert!((mi - 3.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<usize> = (0..4000).map(|_| rng.random_range(0..8)).collect();
        let (mi, bias) = plugin_mutual_information(&x, &y, 8, 8).unwrap();
        assert!(mi < 4.0 * bias + 0.01, "{mi} {bias}");
    }
}
