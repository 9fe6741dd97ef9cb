//! Small statistical toolkit shared by estimation, diagnostics and studies:
//! sample moments, quantiles, Kolmogorov–Smirnov tests, MCMC effective
//! sample size and Gelman–Rubin ratios, and least-squares line fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (`n - 1` denominator).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Raw moment `(1/n) Σ x^k`.
pub fn raw_moment(x: &[f64], k: i32) -> f64 {
    x.iter().map(|v| v.powi(k)).sum::<f64>() / x.len() as f64
}

/// Linear-interpolation quantile of a sorted sample (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample KS test of `x` against the continuous CDF `cdf`.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &v) in s.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    KsResult { statistic: d, p_value: ks_p_value(d, n), n }
}

/// `P(D_n ≥ d)`: the Kolmogorov limit with Stephens' correction for
/// `n ≥ 35`, the exact Marsaglia–Tsang–Wang evaluation below.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let p = if n >= 35 {
        let sn = (n as f64).sqrt();
        kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
    } else {
        1.0 - kolmogorov_exact_cdf(n, d)
    };
    p.clamp(0.0, 1.0)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form converges fast for small arguments.
        let y = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (0..20).map(|k| (y * ((2 * k + 1) * (2 * k + 1)) as f64).exp()).sum();
        return 1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    2.0 * s
}

/// `P(D_n < d)` by the Marsaglia–Tsang–Wang matrix method.
pub fn kolmogorov_exact_cdf(n: usize, d: f64) -> f64 {
    let nf = n as f64;
    if d <= 0.5 / nf {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    let k = (nf * d) as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nf * d;
    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            hm[i * m + j] = if i + 1 >= j { 1.0 } else { 0.0 };
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    hm[(m - 1) * m] += if 2.0 * h - 1.0 > 0.0 { (2.0 * h - 1.0).powi(m as i32) } else { 0.0 };
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }
    let (q, mut e) = matrix_power(&hm, m, n);
    let mut s = q[(k - 1) * m + k - 1];
    for i in 1..=n {
        s = s * i as f64 / nf;
        if s < 1e-140 {
            s *= 1e140;
            e -= 140;
        }
    }
    s * 10f64.powi(e)
}

fn matrix_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for l in 0..m {
            let x = a[i * m + l];
            if x != 0.0 {
                for j in 0..m {
                    c[i * m + j] += x * b[l * m + j];
                }
            }
        }
    }
    c
}

/// `A^n` with a decimal exponent carried separately to avoid overflow.
fn matrix_power(a: &[f64], m: usize, n: usize) -> (Vec<f64>, i32) {
    if n == 1 {
        return (a.to_vec(), 0);
    }
    let (half, eh) = matrix_power(a, m, n / 2);
    let mut v = matrix_mul(&half, &half, m);
    let mut e = 2 * eh;
    if n % 2 == 1 {
        v = matrix_mul(a, &v, m);
    }
    if v[(m / 2) * m + m / 2] > 1e140 {
        v.iter_mut().for_each(|x| *x *= 1e-140);
        e += 140;
    }
    (v, e)
}

/// Two-sample KS test; ties are handled by stepping both empirical CDFs
/// over all equal values before comparing.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> KsResult {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    let ne = n1 * n2 / (n1 + n2);
    let sn = ne.sqrt();
    let p = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d).clamp(0.0, 1.0);
    KsResult { statistic: d, p_value: p, n: a.len() + b.len() }
}

/// Autocorrelation of `x` at `lag` (biased normalisation).
fn autocorrelation(x: &[f64], m: f64, var0: f64, lag: usize) -> f64 {
    let n = x.len();
    let s: f64 = (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum();
    s / n as f64 / var0
}

/// Integrated autocorrelation time by Geyer's initial monotone sequence.
pub fn integrated_autocorrelation_time(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return 1.0;
    }
    let m = mean(x);
    let var0 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if var0 == 0.0 {
        return 1.0;
    }
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = autocorrelation(x, m, var0, lag) + autocorrelation(x, m, var0, lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        lag += 2;
    }
    tau.max(1.0 / n as f64)
}

/// Effective sample size summed over chains.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    chains.iter().map(|c| c.len() as f64 / integrated_autocorrelation_time(c)).sum()
}

/// Gelman–Rubin potential scale reduction; `None` with fewer than 2 chains.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    if m < 2 {
        return None;
    }
    let n = chains.iter().map(Vec::len).min()?;
    if n < 2 {
        return None;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let grand = mean(&means);
    let b = n as f64 / (m as f64 - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = mean(&chains.iter().map(|c| variance(&c[..n])).collect::<Vec<_>>());
    if w == 0.0 {
        return Some(1.0);
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    Some((var_plus / w).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares `y = intercept + slope·x`; needs 3 points.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_stderr = (sse / (n as f64 - 2.0) / sxx).sqrt();
    Some(LineFit { slope, intercept, slope_stderr, r_squared, n })
}

/// `n` points from `lo` to `hi` equally spaced in log scale.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo * (r * i as f64).exp() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from scipy.stats.kstwo.sf / kstwobign.sf.
    #[test]
    fn exact_kolmogorov_matches_scipy() {
        assert!((ks_p_value(0.2, 10) - 0.74871904).abs() < 1e-10);
        assert!((ks_p_value(0.35, 20) - 0.01075496344438931).abs() < 1e-10);
        assert!((ks_p_value(0.1, 34) - 0.8525202451245393).abs() < 1e-10);
    }

    #[test]
    fn asymptotic_kolmogorov_is_close_to_exact() {
        for (d, exact) in [(0.1, 0.2526927570063874), (0.15, 0.019839242125643017), (0.05, 0.9532159710635725)] {
            assert!((ks_p_value(d, 100) - exact).abs() < 1e-2, "{d}");
        }
        assert!((kolmogorov_sf(1.0) - 0.26999967167735456).abs() < 1e-12);
        assert!((kolmogorov_sf(0.5) - 0.9639452436648751).abs() < 1e-12);
    }

    #[test]
    fn two_sample_statistic_handles_ties() {
        let r = ks_two_sample(&[1.0, 2.0, 2.0, 3.0], &[2.0, 2.0, 4.0, 5.0]);
        assert!((r.statistic - 0.5).abs() < 1e-15);
        let same = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
    }

    #[test]
    fn moments_and_quantiles() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((variance(&x) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(raw_moment(&x, 2), 7.5);
        assert_eq!(quantile_sorted(&x, 0.5), 2.5);
        assert_eq!(quantile_sorted(&x, 0.0), 1.0);
        assert_eq!(quantile_sorted(&x, 1.0), 4.0);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn ar1_autocorrelation_time() {
        // AR(1) with coefficient φ has τ = (1+φ)/(1-φ) = 3 for φ = 0.5.
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut x = vec![0.0; 200_000];
        for t in 1..x.len() {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[t] = 0.5 * x[t - 1] + z;
        }
        let tau = integrated_autocorrelation_time(&x);
        assert!((tau - 3.0).abs() < 0.15, "{tau}");
        let r = gelman_rubin(&[x[..100_000].to_vec(), x[100_000..].to_vec()]).unwrap();
        assert!((r - 1.0).abs() < 0.01);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
        assert!((f.r_squared - 1.0).abs() < 1e-15);
        let g = geometric_grid(0.1, 50.0, 25);
        assert_eq!(g.len(), 25);
        assert_eq!(g[24], 50.0);
        assert!((g[0] - 0.1).abs() < 1e-17);
    }
}
