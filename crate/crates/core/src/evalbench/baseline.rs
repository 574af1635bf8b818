use nalgebra::{DMatrix, DVector};

use crate::geometry::Point2;
use crate::trainer::mean_squared_error;
use crate::truth::{BcKind, Dataset};

use super::BenchError;

const RIDGE: f64 = 1e-10;

fn tps_kernel(r2: f64) -> f64 {
    if r2 == 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

/// Thin-plate spline `s(x) = Σ wᵢ φ(‖x − cᵢ‖) + a₀ + a₁x + a₂y`,
/// `φ(r) = r² ln r`.
#[derive(Debug, Clone)]
pub struct ThinPlateSpline {
    centers: Vec<[f64; 2]>,
    weights: Vec<f64>,
    affine: [f64; 3],
}

impl ThinPlateSpline {
    /// Interpolates `values` at `centers`; retries with a small diagonal
    /// ridge when the system is singular.
    pub fn fit(centers: &[[f64; 2]], values: &[f64]) -> Result<Self, BenchError> {
        let n = centers.len();
        assert_eq!(n, values.len());
        let size = n + 3;
        let mut a = DMatrix::<f64>::zeros(size, size);
        for i in 0..n {
            for j in 0..n {
                let dx = centers[i][0] - centers[j][0];
                let dy = centers[i][1] - centers[j][1];
                a[(i, j)] = tps_kernel(dx * dx + dy * dy);
            }
            let poly = [1.0, centers[i][0], centers[i][1]];
            for (k, p) in poly.iter().enumerate() {
                a[(i, n + k)] = *p;
                a[(n + k, i)] = *p;
            }
        }
        let mut rhs = DVector::<f64>::zeros(size);
        rhs.rows_mut(0, n).copy_from_slice(values);

        let solve = |m: DMatrix<f64>| {
            m.lu()
                .solve(&rhs)
                .filter(|x: &DVector<f64>| x.iter().all(|v| v.is_finite()))
        };
        let sol = match solve(a.clone()) {
            Some(x) => x,
            None => {
                log::info!("tps system singular, adding ridge {RIDGE:e}");
                let mut reg = a;
                for i in 0..n {
                    reg[(i, i)] += RIDGE;
                }
                solve(reg).ok_or(BenchError::Singular)?
            }
        };
        Ok(Self {
            centers: centers.to_vec(),
            weights: sol.rows(0, n).iter().copied().collect(),
            affine: [sol[n], sol[n + 1], sol[n + 2]],
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut s = self.affine[0] + self.affine[1] * x + self.affine[2] * y;
        for (c, w) in self.centers.iter().zip(&self.weights) {
            let (dx, dy) = (x - c[0], y - c[1]);
            s += w * tps_kernel(dx * dx + dy * dy);
        }
        s
    }
}

/// MSE of a thin-plate spline through the first `m` boundary values,
/// evaluated at every interior point. Dirichlet data only.
pub fn baseline_rbf(data: &Dataset, m: usize) -> Result<f64, BenchError> {
    if data.pde.bc_kind != BcKind::Dirichlet {
        return Err(BenchError::NeumannBaseline);
    }
    let samples = &data.boundary[..m.min(data.boundary.len())];
    let centers: Vec<[f64; 2]> = samples.iter().map(|s| [s.point.x, s.point.y]).collect();
    let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let tps = ThinPlateSpline::fit(&centers, &values)?;
    let pred: Vec<f64> = data.interior.iter().map(|p| eval_point(&tps, &p.point)).collect();
    Ok(mean_squared_error(&pred, &data.truths()))
}

fn eval_point(tps: &ThinPlateSpline, p: &Point2) -> f64 {
    tps.eval(p.x, p.y)
}
