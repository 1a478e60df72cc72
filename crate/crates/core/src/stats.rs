//! Small statistical toolkit used by the diagnostics and the test suites.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut a = MeanAccumulator::default();
        xs.iter().for_each(|&x| a.push(x));
        a
    }
}

/// Running sums for a ratio estimator `sum(a) / sum(b)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RatioAccumulator {
    n: u64,
    sa: f64,
    sb: f64,
    saa: f64,
    sbb: f64,
    sab: f64,
}

impl RatioAccumulator {
    #[inline]
    pub fn push(&mut self, a: f64, b: f64) {
        self.n += 1;
        self.sa += a;
        self.sb += b;
        self.saa += a * a;
        self.sbb += b * b;
        self.sab += a * b;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean_a(&self) -> f64 {
        self.sa / self.n.max(1) as f64
    }

    pub fn mean_b(&self) -> f64 {
        self.sb / self.n.max(1) as f64
    }

    /// Ratio of means; `None` when the denominator vanishes.
    pub fn ratio(&self) -> Option<f64> {
        (self.sb > 0.0).then(|| self.sa / self.sb)
    }

    /// Delta-method standard error of the ratio.
    pub fn ratio_std_error(&self) -> f64 {
        let n = self.n as f64;
        if self.n < 2 || self.sb <= 0.0 {
            return 0.0;
        }
        let r = self.sa / self.sb;
        let mb = self.sb / n;
        // sample variance of (a - r b)
        let s = self.saa - 2.0 * r * self.sab + r * r * self.sbb;
        let mean_resid = (self.sa - r * self.sb) / n;
        let var = ((s - n * mean_resid * mean_resid) / (n - 1.0)).max(0.0);
        (var / n).sqrt() / mb
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided p-value of a standardized residual.
pub fn two_sided_p(z: f64) -> f64 {
    2.0 * (1.0 - normal_cdf(z.abs()))
}

pub fn chi2_sf(stat: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof).map(|d| d.cdf(stat)).unwrap_or(0.0)
}

pub fn student_t_quantile(p: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof.max(1.0)).map(|d| d.inverse_cdf(p)).unwrap_or(f64::NAN)
}

/// Result of a two-sample homogeneity test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Chi-square homogeneity test for two samples of integer categories.
/// Sparse tail categories are pooled until every expected cell count is at
/// least five.
pub fn chi2_two_sample_counts(a: &[i64], b: &[i64]) -> TestOutcome {
    let mut table: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for &x in a {
        table.entry(x).or_default().0 += 1.0;
    }
    for &x in b {
        table.entry(x).or_default().1 += 1.0;
    }
    let cells: Vec<(f64, f64)> = table.into_values().collect();
    chi2_from_cells(&cells, a.len() as f64, b.len() as f64)
}

/// Chi-square homogeneity test on a continuous statistic, binned at the
/// pooled quantiles. Values equal to `atom` (if given) get their own cell.
pub fn chi2_two_sample_binned(a: &[f64], b: &[f64], bins: usize, atom: Option<f64>) -> TestOutcome {
    let is_atom = |x: f64| atom.is_some_and(|t| x == t);
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().filter(|&x| !is_atom(x)).collect();
    pooled.sort_by(|x, y| x.total_cmp(y));
    let mut edges = Vec::new();
    if !pooled.is_empty() {
        for k in 1..bins {
            let e = pooled[(k * pooled.len()) / bins];
            if edges.last().is_none_or(|&l| e > l) {
                edges.push(e);
            }
        }
    }
    let cell_of = |x: f64| -> usize {
        if is_atom(x) {
            edges.len() + 1
        } else {
            edges.partition_point(|&e| e <= x)
        }
    };
    let mut cells = vec![(0.0, 0.0); edges.len() + 2];
    for &x in a {
        cells[cell_of(x)].0 += 1.0;
    }
    for &x in b {
        cells[cell_of(x)].1 += 1.0;
    }
    cells.retain(|c| c.0 + c.1 > 0.0);
    chi2_from_cells(&cells, a.len() as f64, b.len() as f64)
}

fn chi2_from_cells(cells: &[(f64, f64)], na: f64, nb: f64) -> TestOutcome {
    let total = na + nb;
    let expected_min = |c: &(f64, f64)| (c.0 + c.1) * na.min(nb) / total;
    // pool adjacent sparse cells left to right
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut cur = (0.0, 0.0);
    for c in cells {
        cur.0 += c.0;
        cur.1 += c.1;
        if expected_min(&cur) >= 5.0 {
            pooled.push(cur);
            cur = (0.0, 0.0);
        }
    }
    if cur.0 + cur.1 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += cur.0;
                last.1 += cur.1;
            }
            None => pooled.push(cur),
        }
    }
    if pooled.len() < 2 {
        return TestOutcome { statistic: 0.0, dof: 0.0, p_value: 1.0 };
    }
    let mut stat = 0.0;
    for c in &pooled {
        let row = c.0 + c.1;
        let ea = row * na / total;
        let eb = row * nb / total;
        stat += (c.0 - ea).powi(2) / ea + (c.1 - eb).powi(2) / eb;
    }
    let dof = (pooled.len() - 1) as f64;
    TestOutcome { statistic: stat, dof, p_value: chi2_sf(stat, dof) }
}

/// One-sample Kolmogorov-Smirnov test against the standard normal.
pub fn ks_standard_normal(xs: &[f64]) -> TestOutcome {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    TestOutcome { statistic: d, dof: n, p_value: kolmogorov_sf(lambda) }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..200 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// Weighted least squares fit `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub points: usize,
}

impl LinearFit {
    /// Two-sided confidence interval for the slope.
    pub fn slope_ci(&self, level: f64) -> (f64, f64) {
        let dof = self.points.saturating_sub(2).max(1) as f64;
        let t = student_t_quantile(0.5 + level / 2.0, dof);
        (self.slope - t * self.slope_se, self.slope + t * self.slope_se)
    }
}

pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * (x - xm).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((x, y), w)| w * (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    // weights are inverse variances: scale by the residual variance only if
    // the fit is worse than the weights claim
    let dof = (n as f64 - 2.0).max(1.0);
    let scale = (rss / dof).max(1.0);
    let slope_se = (scale / sxx).sqrt();
    let intercept_se = (scale * (1.0 / sw + xm * xm / sxx)).sqrt();
    Some(LinearFit { intercept, slope, slope_se, intercept_se, points: n })
}

/// Total-variation distance between an empirical distribution of discrete
/// outcomes and a reference probability mass function.
pub fn tv_empirical_vs_pmf<K: Ord + Clone>(samples: &[K], pmf: impl Fn(&K) -> f64) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let mut counts: BTreeMap<K, f64> = BTreeMap::new();
    for s in samples {
        *counts.entry(s.clone()).or_default() += 1.0;
    }
    let n = samples.len() as f64;
    let mut observed_ref = 0.0;
    let mut over = 0.0;
    for (k, c) in &counts {
        let p = pmf(k);
        observed_ref += p;
        over += (c / n - p).abs();
    }
    // reference mass on outcomes never observed
    0.5 * (over + (1.0 - observed_ref).max(0.0))
}

pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (kf * mean.ln() - mean - ln_factorial(k)).exp()
}

pub fn ln_factorial(k: u64) -> f64 {
    statrs::function::factorial::ln_factorial(k)
}

/// Smallest `m` with `P(Poisson(mean) > m) < tol`.
pub fn poisson_truncation(mean: f64, tol: f64) -> usize {
    let mut cdf = 0.0;
    let mut m = 0u64;
    loop {
        cdf += poisson_pmf(m, mean);
        if 1.0 - cdf < tol || m > 10_000 {
            return m as usize;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 2.0, 4.0, 7.0, 11.0];
        let a = MeanAccumulator::from_slice(&xs);
        assert!((a.mean() - 5.0).abs() < 1e-12);
        assert!((a.variance() - 16.5).abs() < 1e-12);
        let mut b = MeanAccumulator::from_slice(&xs[..2]);
        b.merge(&MeanAccumulator::from_slice(&xs[2..]));
        assert!((b.variance() - a.variance()).abs() < 1e-12);
    }

    #[test]
    fn chi2_detects_shift_and_accepts_identity() {
        let a: Vec<i64> = (0..2000).map(|i| i % 5).collect();
        let b: Vec<i64> = (0..2000).map(|i| (i * 7) % 5).collect();
        assert!(chi2_two_sample_counts(&a, &b).p_value > 0.99);
        let c: Vec<i64> = (0..2000).map(|i| (i % 5) + (i % 3 == 0) as i64).collect();
        assert!(chi2_two_sample_counts(&a, &c).p_value < 1e-6);
    }

    #[test]
    fn tv_against_pmf() {
        let samples = vec![0u64, 0, 1, 1];
        let tv = tv_empirical_vs_pmf(&samples, |&k| if k < 2 { 0.5 } else { 0.0 });
        assert!(tv.abs() < 1e-12);
        let tv = tv_empirical_vs_pmf(&samples, |&k| if k == 0 { 1.0 } else { 0.0 });
        assert!((tv - 0.5).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.0 - 2.0 * x).collect();
        let f = weighted_linear_fit(&x, &y, &vec![1.0; 10]).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_se_zero_for_constant_ratio() {
        let mut r = RatioAccumulator::default();
        for i in 0..100 {
            let b = 1.0 + (i % 7) as f64;
            r.push(0.5 * b, b);
        }
        assert!((r.ratio().unwrap() - 0.5).abs() < 1e-15);
        assert!(r.ratio_std_error() < 1e-12);
    }

    #[test]
    fn poisson_truncation_tail() {
        let m = poisson_truncation(1.0, 1e-10);
        let tail: f64 = 1.0 - (0..=m as u64).map(|k| poisson_pmf(k, 1.0)).sum::<f64>();
        assert!(tail < 1e-10);
        let tail_prev: f64 = 1.0 - (0..m as u64).map(|k| poisson_pmf(k, 1.0)).sum::<f64>();
        assert!(tail_prev >= 1e-10);
    }
}
