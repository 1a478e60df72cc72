//! Randomized quasi-Monte Carlo rules.
//!
//! The node set is the additive recurrence `frac(shift + n * g)` with the
//! generalized golden-ratio generator `g`. Independent uniform shifts turn it
//! into an unbiased estimator whose spread across shifts gives a standard
//! error.

use rand::Rng;

use crate::rng::StreamSeed;
use crate::stats::MeanAccumulator;

/// Kronecker lattice in `[0,1)^dim`.
#[derive(Debug, Clone)]
pub struct Kronecker {
    generator: Vec<f64>,
}

impl Kronecker {
    pub fn new(dim: usize) -> Self {
        // phi_d solves x^(d+1) = x + 1
        let mut phi = 2.0_f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
        }
        let generator = (1..=dim).map(|i| (1.0 / phi.powi(i as i32)).fract()).collect();
        Kronecker { generator }
    }

    pub fn dim(&self) -> usize {
        self.generator.len()
    }

    /// Writes node `n` under `shift` into `out`.
    #[inline]
    pub fn node(&self, n: usize, shift: &[f64], out: &mut [f64]) {
        let nf = n as f64;
        for ((o, g), s) in out.iter_mut().zip(&self.generator).zip(shift) {
            *o = (s + nf * g).fract();
        }
    }
}

/// Estimate of an integral over the unit cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QmcEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Integrates `f` over `[0,1)^dim` with `shifts` randomized copies of an
/// `nodes`-point rule.
pub fn integrate<F>(dim: usize, nodes: usize, shifts: usize, seed: StreamSeed, mut f: F) -> QmcEstimate
where
    F: FnMut(&[f64]) -> f64,
{
    if dim == 0 {
        return QmcEstimate { value: f(&[]), std_error: 0.0 };
    }
    let rule = Kronecker::new(dim);
    let mut rng = seed.rng();
    let mut shift = vec![0.0; dim];
    let mut u = vec![0.0; dim];
    let mut acc = MeanAccumulator::default();
    for _ in 0..shifts.max(1) {
        for s in shift.iter_mut() {
            *s = rng.random();
        }
        let mut sum = 0.0;
        for n in 0..nodes {
            rule.node(n, &shift, &mut u);
            sum += f(&u);
        }
        acc.push(sum / nodes as f64);
    }
    QmcEstimate { value: acc.mean(), std_error: acc.std_error() }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial() {
        let est = integrate(3, 4096, 8, StreamSeed::new(3), |u| u[0] * u[1] + u[2] * u[2]);
        let exact = 0.25 + 1.0 / 3.0;
        assert!((est.value - exact).abs() < 1e-3, "{:?}", est);
        assert!(est.std_error < 1e-3);
    }

    #[test]
    fn gauss_legendre_exact_for_degree() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-13);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }
}
