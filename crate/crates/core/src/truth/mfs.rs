//! Method of fundamental solutions for Laplace and Helmholtz problems.
//!
//! Sources sit on the boundary curve dilated by [`MFS_DILATION`] at
//! equispaced α. Coefficients come from a least-squares collocation fit of the
//! boundary data solved through an SVD.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use super::bessel::{y0, y1};
use super::{anchor_value, BcKind, Equation, PdeSpec, TruthError};
use crate::geometry::{Boundary, BoundarySample, Point2};

pub const MFS_DILATION: f64 = 1.5;

/// Largest accepted collocation residual, relative to max(1, max |data|).
pub const MFS_MAX_RESIDUAL: f64 = 1e-4;

pub const MFS_MIN_SOURCES: usize = 32;

#[derive(Debug, Clone, Copy)]
enum Kernel {
    Laplace,
    Helmholtz(f64),
}

impl Kernel {
    fn value(&self, dx: f64, dy: f64) -> f64 {
        let rho = dx.hypot(dy);
        match *self {
            Kernel::Laplace => -rho.ln() / TAU,
            Kernel::Helmholtz(k) => 0.25 * y0(k * rho),
        }
    }

    /// Gradient with respect to the field point.
    fn gradient(&self, dx: f64, dy: f64) -> [f64; 2] {
        let rho2 = dx * dx + dy * dy;
        let scale = match *self {
            Kernel::Laplace => -1.0 / (TAU * rho2),
            Kernel::Helmholtz(k) => {
                let rho = rho2.sqrt();
                -0.25 * k * y1(k * rho) / rho
            }
        };
        [scale * dx, scale * dy]
    }
}

/// A fitted MFS expansion `u(p) = Σ c_j G(p, q_j) (+ c_0 for Laplace)`.
#[derive(Debug, Clone)]
pub struct MfsSolution {
    kernel: Kernel,
    sources: Vec<[f64; 2]>,
    coeffs: Vec<f64>,
    constant: f64,
    residual: f64,
}

impl MfsSolution {
    pub fn eval(&self, p: &Point2) -> f64 {
        self.constant
            + self
                .sources
                .iter()
                .zip(&self.coeffs)
                .map(|(q, c)| c * self.kernel.value(p.x - q[0], p.y - q[1]))
                .sum::<f64>()
    }

    pub fn gradient(&self, p: &Point2) -> [f64; 2] {
        let mut g = [0.0, 0.0];
        for (q, c) in self.sources.iter().zip(&self.coeffs) {
            let k = self.kernel.gradient(p.x - q[0], p.y - q[1]);
            g[0] += c * k[0];
            g[1] += c * k[1];
        }
        g
    }

    /// Relative max-norm collocation residual of the fit.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }
}

/// Fits the boundary data with `n_sources` fundamental solutions.
///
/// Dirichlet data is matched pointwise; Neumann data is matched through the
/// normal derivative. Pure-Neumann Laplace problems get one extra row pinning
/// `u(0, 0)` to the reference field to remove the additive constant.
pub fn mfs_solve(
    boundary: &Boundary,
    pde: &PdeSpec,
    data: &[BoundarySample],
    n_sources: usize,
) -> Result<MfsSolution, TruthError> {
    let kernel = match pde.equation {
        Equation::Laplace => Kernel::Laplace,
        Equation::Helmholtz { k } => Kernel::Helmholtz(k),
        Equation::Darcy => {
            return Err(TruthError::Mfs("Darcy flow has no fundamental solution here".into()));
        }
    };
    if n_sources < MFS_MIN_SOURCES {
        return Err(TruthError::Mfs(format!("need at least {MFS_MIN_SOURCES} sources, got {n_sources}")));
    }
    if data.is_empty() {
        return Err(TruthError::Mfs("no boundary data".into()));
    }

    let sources: Vec<[f64; 2]> = (0..n_sources)
        .map(|j| {
            let a = TAU * j as f64 / n_sources as f64;
            let r = MFS_DILATION * boundary.radius(a);
            [r * a.cos(), r * a.sin()]
        })
        .collect();

    let with_constant = matches!(kernel, Kernel::Laplace);
    let anchored = with_constant && pde.bc_kind == BcKind::Neumann;
    let cols = n_sources + usize::from(with_constant);
    let rows = data.len() + usize::from(anchored);

    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    for (i, s) in data.iter().enumerate() {
        let p = s.point;
        for (j, q) in sources.iter().enumerate() {
            a[(i, j)] = match pde.bc_kind {
                BcKind::Dirichlet => kernel.value(p.x - q[0], p.y - q[1]),
                BcKind::Neumann => {
                    let g = kernel.gradient(p.x - q[0], p.y - q[1]);
                    g[0] * s.normal[0] + g[1] * s.normal[1]
                }
            };
        }
        if with_constant && pde.bc_kind == BcKind::Dirichlet {
            a[(i, n_sources)] = 1.0;
        }
        b[i] = s.value;
    }
    if anchored {
        let i = data.len();
        for (j, q) in sources.iter().enumerate() {
            a[(i, j)] = kernel.value(-q[0], -q[1]);
        }
        a[(i, n_sources)] = 1.0;
        b[i] = anchor_value(pde);
    }

    // Column equilibration keeps the SVD cutoff meaningful.
    let scales: Vec<f64> = (0..cols)
        .map(|j| {
            let n = a.column(j).norm();
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let svd = scaled.svd(true, true);
    let cutoff = svd.singular_values.max() * f64::EPSILON * rows.max(cols) as f64;
    let y = svd
        .solve(&b, cutoff)
        .map_err(|e| TruthError::Mfs(format!("least-squares solve failed: {e}")))?;
    let x: Vec<f64> = y.iter().zip(&scales).map(|(v, s)| v * s).collect();

    let fitted = &a * DVector::from_column_slice(&x);
    let data_scale = b.amax().max(1.0);
    let residual = (fitted - &b).amax() / data_scale;
    if !residual.is_finite() || residual > MFS_MAX_RESIDUAL {
        return Err(TruthError::Mfs(format!(
            "collocation residual {residual:.3e} exceeds {MFS_MAX_RESIDUAL:e}"
        )));
    }

    let (coeffs, constant) = if with_constant {
        (x[..n_sources].to_vec(), x[n_sources])
    } else {
        (x, 0.0)
    };
    Ok(MfsSolution {
        kernel,
        sources,
        coeffs,
        constant,
        residual,
    })
}

/// Subtracts the arc-length mean of `values` sampled at equispaced α so the
/// data integrates to zero around the curve. Returns the removed mean.
pub(crate) fn project_compatible(boundary: &Boundary, samples: &mut [BoundarySample]) -> f64 {
    let weights: Vec<f64> = samples.iter().map(|s| boundary.speed(s.alpha)).collect();
    let total: f64 = weights.iter().sum();
    let mean = samples.iter().zip(&weights).map(|(s, w)| s.value * w).sum::<f64>() / total;
    for s in samples.iter_mut() {
        s.value -= mean;
    }
    mean
}

/// Relative compatibility defect |∮ g ds| / (perimeter · max |g|) of
/// equispaced samples.
pub(crate) fn compatibility_defect(boundary: &Boundary, samples: &[BoundarySample]) -> f64 {
    let h = TAU / samples.len() as f64;
    let integral: f64 = samples.iter().map(|s| s.value * boundary.speed(s.alpha)).sum::<f64>() * h;
    let max = samples.iter().map(|s| s.value.abs()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    integral.abs() / (boundary.perimeter() * max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{equispaced_boundary, sample_interior, BoundaryId, BoundaryShape, DEFAULT_MARGIN};
    use crate::rng::seeded;
    use crate::truth::{manufactured_for, TruthMode};

    fn fill(data: &mut [BoundarySample], f: impl Fn(&BoundarySample) -> f64) {
        for s in data.iter_mut() {
            s.value = f(s);
        }
    }

    #[test]
    fn laplace_dirichlet_on_training_boundary() {
        let b = BoundaryId::BTrain.boundary();
        let pde = PdeSpec::new(Equation::Laplace, BcKind::Dirichlet, TruthMode::MfsOracle);
        let mut data = equispaced_boundary(&b, 2000);
        fill(&mut data, |s| s.point.x.exp() * s.point.y.sin());
        let sol = mfs_solve(&b, &pde, &data, 200).unwrap();
        let pts = sample_interior(&b, 100, DEFAULT_MARGIN, &mut seeded(3)).unwrap();
        let err = pts
            .iter()
            .map(|p| (sol.eval(p) - p.x.exp() * p.y.sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err:e}");
    }

    #[test]
    fn helmholtz_dirichlet_plane_wave_on_circle() {
        let b = Boundary::Star(BoundaryShape::circle());
        let pde = PdeSpec::new(Equation::helmholtz(), BcKind::Dirichlet, TruthMode::Manufactured);
        let wave = manufactured_for(pde.equation);
        let mut data = equispaced_boundary(&b, 2000);
        fill(&mut data, |s| wave.u(s.point.x, s.point.y));
        let sol = mfs_solve(&b, &pde, &data, 200).unwrap();
        let pts = sample_interior(&b, 100, DEFAULT_MARGIN, &mut seeded(4)).unwrap();
        let err = pts
            .iter()
            .map(|p| (sol.eval(p) - wave.u(p.x, p.y)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "max error {err:e}");
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let b = BoundaryId::B2.boundary();
        let pde = PdeSpec::new(Equation::Laplace, BcKind::Dirichlet, TruthMode::MfsOracle);
        let data = equispaced_boundary(&b, 400);
        let sol = mfs_solve(&b, &pde, &data, 64).unwrap();
        for p in sample_interior(&b, 50, DEFAULT_MARGIN, &mut seeded(1)).unwrap() {
            assert!(sol.eval(&p).abs() < 1e-10);
        }
    }

    #[test]
    fn neumann_laplace_recovers_manufactured_solution() {
        let b = BoundaryId::BTrain.boundary();
        let pde = PdeSpec::new(Equation::Laplace, BcKind::Neumann, TruthMode::Manufactured);
        let u = manufactured_for(Equation::Laplace);
        let mut data = equispaced_boundary(&b, 2000);
        fill(&mut data, |s| {
            let g = u.grad(s.point.x, s.point.y);
            g[0] * s.normal[0] + g[1] * s.normal[1]
        });
        let sol = mfs_solve(&b, &pde, &data, 200).unwrap();
        for p in sample_interior(&b, 50, DEFAULT_MARGIN, &mut seeded(8)).unwrap() {
            assert!((sol.eval(&p) - u.u(p.x, p.y)).abs() < 1e-5);
        }
    }

    #[test]
    fn helmholtz_neumann_plane_wave() {
        let b = BoundaryId::B1.boundary();
        let pde = PdeSpec::new(Equation::helmholtz(), BcKind::Neumann, TruthMode::Manufactured);
        let u = manufactured_for(pde.equation);
        let mut data = equispaced_boundary(&b, 2000);
        fill(&mut data, |s| {
            let g = u.grad(s.point.x, s.point.y);
            g[0] * s.normal[0] + g[1] * s.normal[1]
        });
        let sol = mfs_solve(&b, &pde, &data, 200).unwrap();
        for p in sample_interior(&b, 50, DEFAULT_MARGIN, &mut seeded(8)).unwrap() {
            assert!((sol.eval(&p) - u.u(p.x, p.y)).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let b = BoundaryId::BTrain.boundary();
        let data = equispaced_boundary(&b, 100);
        let darcy = PdeSpec::new(Equation::Darcy, BcKind::Dirichlet, TruthMode::Manufactured);
        assert!(mfs_solve(&b, &darcy, &data, 64).is_err());
        let lap = PdeSpec::new(Equation::Laplace, BcKind::Dirichlet, TruthMode::MfsOracle);
        assert!(mfs_solve(&b, &lap, &data, 8).is_err());
    }

    #[test]
    fn too_few_sources_for_rough_data_fails() {
        // High-frequency data cannot be represented by 32 smooth sources.
        let b = BoundaryId::BTrain.boundary();
        let pde = PdeSpec::new(Equation::Laplace, BcKind::Dirichlet, TruthMode::MfsOracle);
        let mut data = equispaced_boundary(&b, 400);
        fill(&mut data, |s| (40.0 * s.alpha).sin());
        assert!(matches!(mfs_solve(&b, &pde, &data, 32), Err(TruthError::Mfs(_))));
    }

    #[test]
    fn projection_restores_compatibility() {
        let b = BoundaryId::BTrain.boundary();
        let mut data = equispaced_boundary(&b, 2000);
        fill(&mut data, |s| 0.1 * s.point.x.cos() * s.point.y.cos());
        assert!(compatibility_defect(&b, &data) > 1e-3);
        let mean = project_compatible(&b, &mut data);
        assert!(mean.abs() > 0.0);
        assert!(compatibility_defect(&b, &data) < 1e-8);
    }
}
