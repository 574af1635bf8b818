//! Random Fourier features for the Gaussian kernel.
//!
//! With `ω ~ N(0, σ² I)` and `b ~ U[0, 2π)`, the map
//! `z(x)_i = √(2/D) cos(ω_iᵀ x + b_i)` satisfies
//! `E[z(x)ᵀ z(y)] = exp(-σ² ‖x - y‖² / 2)`.
//!
//! [`circle_integral_identity`] checks the closed form used to collapse the
//! boundary integral when the frequency is an integer on the unit circle:
//! `∫₀^{2π} cos(m t + b) φ(t) dt = 2π · ½ (a_m cos b − b_m sin b)`.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::rng::seeded;

/// Trapezoid nodes used by [`circle_integral_identity`].
pub const IDENTITY_QUADRATURE_NODES: usize = 1 << 14;

#[derive(Debug, Error, PartialEq)]
pub enum RffError {
    #[error("input dimension {got} does not match basis dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid basis parameters: {0}")]
    InvalidParameters(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RffBasis {
    dim: usize,
    /// Row-major `D × dim` frequencies.
    omegas: Vec<f64>,
    biases: Vec<f64>,
    sigma: f64,
    seed: u64,
}

impl RffBasis {
    /// Draws `features` frequencies from `N(0, σ² I)` and phases from `U[0, 2π)`.
    pub fn sample(dim: usize, features: usize, sigma: f64, seed: u64) -> Result<Self, RffError> {
        if dim == 0 || features == 0 {
            return Err(RffError::InvalidParameters("dimension and feature count must be >= 1"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(RffError::InvalidParameters("sigma must be positive"));
        }
        let mut rng = seeded(seed);
        let normal = Normal::new(0.0, sigma).expect("sigma validated");
        let omegas: Vec<f64> = (0..features * dim).map(|_| normal.sample(&mut rng)).collect();
        let biases: Vec<f64> = (0..features).map(|_| rng.random_range(0.0..TAU)).collect();
        Ok(Self {
            dim,
            omegas,
            biases,
            sigma,
            seed,
        })
    }

    /// Builds a basis from explicit frequencies (row-major, `biases.len()` rows).
    pub fn from_parts(dim: usize, omegas: Vec<f64>, biases: Vec<f64>) -> Result<Self, RffError> {
        if dim == 0 || biases.is_empty() || omegas.len() != dim * biases.len() {
            return Err(RffError::InvalidParameters("frequency matrix does not match bias count"));
        }
        Ok(Self {
            dim,
            omegas,
            biases,
            sigma: f64::NAN,
            seed: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> usize {
        self.biases.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn omega(&self, i: usize) -> &[f64] {
        &self.omegas[i * self.dim..(i + 1) * self.dim]
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// `z(x)`.
    pub fn feature_map(&self, x: &[f64]) -> Result<Vec<f64>, RffError> {
        if x.len() != self.dim {
            return Err(RffError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let scale = (2.0 / self.features() as f64).sqrt();
        Ok(self
            .biases
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let phase: f64 = self.omega(i).iter().zip(x).map(|(w, v)| w * v).sum();
                scale * (phase + b).cos()
            })
            .collect())
    }

    /// `z(x)ᵀ z(y)`, an unbiased estimate of the Gaussian kernel.
    pub fn approx_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64, RffError> {
        let zx = self.feature_map(x)?;
        let zy = self.feature_map(y)?;
        Ok(zx.iter().zip(&zy).map(|(a, b)| a * b).sum())
    }

    /// The kernel being approximated, `exp(-σ² ‖x − y‖² / 2)`.
    pub fn exact_kernel(&self, x: &[f64], y: &[f64]) -> f64 {
        gaussian_kernel(self.sigma, x, y)
    }
}

pub fn gaussian_kernel(sigma: f64, x: &[f64], y: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-0.5 * sigma * sigma * d2).exp()
}

/// A finite trigonometric series `φ(t) = Σ a_n cos(n t) + b_n sin(n t)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrigSeries {
    /// `(n, a_n, b_n)` triples; unlisted frequencies are zero.
    pub terms: Vec<(u32, f64, f64)>,
}

impl TrigSeries {
    pub fn new(terms: Vec<(u32, f64, f64)>) -> Self {
        Self { terms }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(n, a, b)| {
                let (s, c) = (n as f64 * t).sin_cos();
                a * c + b * s
            })
            .sum()
    }

    /// Summed `(a_n, b_n)` for frequency `n`.
    pub fn coefficients(&self, n: u32) -> (f64, f64) {
        self.terms
            .iter()
            .filter(|t| t.0 == n)
            .fold((0.0, 0.0), |(a, b), t| (a + t.1, b + t.2))
    }
}

/// Returns `(lhs, rhs)`: the trapezoid-quadrature value of
/// `∫₀^{2π} cos(m t + b) φ(t) dt` and the closed form `2π c` with
/// `c = ½ (a_m cos b − b_m sin b)`.
pub fn circle_integral_identity(m: u32, phase: f64, series: &TrigSeries) -> (f64, f64) {
    let n = IDENTITY_QUADRATURE_NODES;
    let h = TAU / n as f64;
    let lhs = (0..n)
        .map(|k| {
            let t = h * k as f64;
            (m as f64 * t + phase).cos() * series.eval(t)
        })
        .sum::<f64>()
        * h;
    let (a_m, b_m) = series.coefficients(m);
    let c = 0.5 * (a_m * phase.cos() - b_m * phase.sin());
    (lhs, c * TAU)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    #[test]
    fn sampling_statistics() {
        for (sigma, seed) in [(1.0, 4), (2.0, 4)] {
            let basis = RffBasis::sample(2, 100_000, sigma, seed).unwrap();
            let w = basis.omegas();
            let n = w.len() as f64;
            let mean = w.iter().sum::<f64>() / n;
            let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if sigma == 1.0 {
                assert!((var - 1.0).abs() < 0.02, "variance {var}");
            } else {
                assert!((var.sqrt() - 2.0).abs() < 0.04, "std {}", var.sqrt());
            }
            assert!(basis.biases().iter().all(|b| (0.0..TAU).contains(b)));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = RffBasis::sample(2, 3, 1.0, 4).unwrap();
        let b = RffBasis::sample(2, 3, 1.0, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, RffBasis::sample(2, 3, 1.0, 5).unwrap());
    }

    #[test]
    fn invalid_parameters() {
        assert!(RffBasis::sample(0, 3, 1.0, 1).is_err());
        assert!(RffBasis::sample(2, 0, 1.0, 1).is_err());
        assert!(RffBasis::sample(2, 3, 0.0, 1).is_err());
    }

    #[test]
    fn feature_map_examples() {
        let zero = RffBasis::from_parts(2, vec![0.0, 0.0], vec![0.0]).unwrap();
        let z = zero.feature_map(&[0.7, -3.0]).unwrap();
        assert!((z[0] - SQRT_2).abs() < 1e-15);

        let unit = RffBasis::from_parts(2, vec![1.0, 0.0], vec![0.0]).unwrap();
        let z = unit.feature_map(&[PI, 0.0]).unwrap();
        assert!((z[0] + SQRT_2).abs() < 1e-15);

        assert_eq!(
            zero.feature_map(&[1.0]).unwrap_err(),
            RffError::DimensionMismatch { expected: 2, got: 1 }
        );
        assert!((zero.approx_kernel(&[1.0, 2.0], &[-4.0, 0.5]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn feature_norm_statistic() {
        let basis = RffBasis::sample(2, 4096, 1.0, 10).unwrap();
        let mut rng = seeded(11);
        let mean = (0..1000)
            .map(|_| {
                let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                basis.feature_map(&x).unwrap().iter().map(|v| v * v).sum::<f64>()
            })
            .sum::<f64>()
            / 1000.0;
        assert!((mean - 1.0).abs() < 0.05, "mean squared norm {mean}");
    }

    #[test]
    fn kernel_examples() {
        let basis = RffBasis::sample(2, 4096, 1.0, 12).unwrap();
        let x = [0.3, -0.4];
        assert!((basis.approx_kernel(&x, &x).unwrap() - 1.0).abs() < 0.05);
        let y = [0.3 + 2.0, -0.4];
        let k = basis.approx_kernel(&x, &y).unwrap();
        assert!((k - (-2.0f64).exp()).abs() < 0.05, "k = {k}");
    }

    #[test]
    fn shift_invariance_in_expectation() {
        let basis = RffBasis::sample(2, 4096, 1.0, 21).unwrap();
        let mut rng = seeded(22);
        for _ in 0..20 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let y = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let v = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let xs = [x[0] + v[0], x[1] + v[1]];
            let ys = [y[0] + v[0], y[1] + v[1]];
            let target = gaussian_kernel(1.0, &x, &y);
            assert_eq!(target, gaussian_kernel(1.0, &xs, &ys));
            assert!((basis.approx_kernel(&xs, &ys).unwrap() - target).abs() < 0.05);
        }
    }

    #[test]
    fn identity_examples() {
        let cos3 = TrigSeries::new(vec![(3, 1.0, 0.0)]);
        let (lhs, rhs) = circle_integral_identity(3, 0.7, &cos3);
        assert!((rhs - PI * 0.7f64.cos()).abs() < 1e-12);
        assert!((lhs - rhs).abs() < 1e-8);
        assert!((rhs - 2.402823).abs() < 1e-6);

        let (lhs, rhs) = circle_integral_identity(2, 1.234, &cos3);
        assert_eq!(rhs, 0.0);
        assert!(lhs.abs() < 1e-8);

        let sin5 = TrigSeries::new(vec![(5, 0.0, 1.0)]);
        let (lhs, rhs) = circle_integral_identity(5, FRAC_PI_2, &sin5);
        assert!((rhs + PI).abs() < 1e-12);
        assert!((lhs + PI).abs() < 1e-8);
    }

    fn sparse_series() -> impl Strategy<Value = TrigSeries> {
        prop::collection::vec((0u32..=40, -2.0f64..2.0, -2.0f64..2.0), 1..6).prop_map(TrigSeries::new)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn identity_holds_for_integer_frequencies(m in 1u32..=32, b in 0.0f64..TAU, s in sparse_series()) {
            let (lhs, rhs) = circle_integral_identity(m, b, &s);
            prop_assert!((lhs - rhs).abs() < 1e-8, "m={} lhs={} rhs={}", m, lhs, rhs);
        }
    }
}
