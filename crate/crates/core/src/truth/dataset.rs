use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mfs::{compatibility_defect, mfs_solve, project_compatible};
use super::{dirichlet_value, manufactured_for, neumann_value, BcKind, Equation, PdeSpec, TruthError, TruthMode};
use crate::geometry::{
    equispaced_boundary, sample_boundary, sample_interior, Boundary, BoundaryId, BoundarySample, Point2,
    DEFAULT_MARGIN,
};
use crate::rng::stream;

/// Boundary points used for the MFS fit behind [`TruthMode::MfsOracle`].
pub const DENSE_FIT_POINTS: usize = 2000;

/// Fundamental-solution sources used by the oracle.
pub const ORACLE_SOURCES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorPoint {
    pub point: Point2,
    pub true_value: f64,
}

#[derive(Serialize, Deserialize)]
struct InteriorRecord {
    x: f64,
    y: f64,
    r: f64,
    theta: f64,
    true_value: f64,
}

impl Serialize for InteriorPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        InteriorRecord {
            x: self.point.x,
            y: self.point.y,
            r: self.point.r,
            theta: self.point.theta,
            true_value: self.true_value,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for InteriorPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = InteriorRecord::deserialize(d)?;
        Ok(Self {
            point: Point2 {
                x: r.x,
                y: r.y,
                r: r.r,
                theta: r.theta,
            },
            true_value: r.true_value,
        })
    }
}

/// One problem instance: boundary data plus interior points with ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub shape_id: String,
    #[serde(flatten)]
    pub pde: PdeSpec,
    pub seed: u64,
    pub boundary: Vec<BoundarySample>,
    pub interior: Vec<InteriorPoint>,
    /// Boundary mean removed from pure-Neumann Laplace data, if any.
    #[serde(skip)]
    pub neumann_projection: Option<f64>,
}

impl Dataset {
    pub fn boundary_curve(&self) -> Result<Boundary, TruthError> {
        Ok(self.shape_id.parse::<BoundaryId>()?.boundary())
    }

    pub fn points(&self) -> Vec<Point2> {
        self.interior.iter().map(|p| p.point).collect()
    }

    pub fn truths(&self) -> Vec<f64> {
        self.interior.iter().map(|p| p.true_value).collect()
    }

    /// The first `m` boundary samples ordered by α.
    pub fn boundary_input(&self, m: usize) -> Vec<BoundarySample> {
        let mut b: Vec<BoundarySample> = self.boundary.iter().take(m).copied().collect();
        sort_by_alpha(&mut b);
        b
    }

    /// A copy restricted to the first `n` interior points.
    pub fn with_interior_limit(&self, n: usize) -> Dataset {
        let mut d = self.clone();
        d.interior.truncate(n);
        d
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_json().map_err(std::io::Error::other)?)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

pub(crate) fn sort_by_alpha(samples: &mut [BoundarySample]) {
    samples.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
}

/// Builds a dataset on a preset boundary.
pub fn build_dataset(
    shape_id: BoundaryId,
    pde: &PdeSpec,
    m_boundary: usize,
    n_interior: usize,
    seed: u64,
) -> Result<Dataset, TruthError> {
    build_dataset_on(shape_id.as_str(), &shape_id.boundary(), pde, m_boundary, n_interior, seed)
}

/// Builds a dataset on an arbitrary boundary.
///
/// Boundary and interior points come from independent seeded streams, so the
/// boundary set does not change when `n_interior` does.
pub fn build_dataset_on(
    shape_id: &str,
    boundary: &Boundary,
    pde: &PdeSpec,
    m_boundary: usize,
    n_interior: usize,
    seed: u64,
) -> Result<Dataset, TruthError> {
    pde.validate()?;
    if m_boundary == 0 || n_interior == 0 {
        return Err(TruthError::InvalidSpec("dataset needs at least one boundary and one interior point".into()));
    }
    let mut samples = sample_boundary(boundary, m_boundary, &mut stream(seed, "boundary"))?;
    let points = sample_interior(boundary, n_interior, DEFAULT_MARGIN, &mut stream(seed, "interior"))?;

    for s in samples.iter_mut() {
        s.value = boundary_datum(pde, s)?;
    }

    let mut neumann_projection = None;
    let interior: Vec<InteriorPoint> = match pde.truth_mode {
        TruthMode::Analytic => points
            .iter()
            .map(|p| InteriorPoint {
                point: *p,
                true_value: pde.analytic_field.value(p),
            })
            .collect(),
        TruthMode::Manufactured => {
            let u = manufactured_for(pde.equation);
            points
                .iter()
                .map(|p| InteriorPoint {
                    point: *p,
                    true_value: u.u(p.x, p.y),
                })
                .collect()
        }
        TruthMode::MfsOracle => {
            let mut dense = equispaced_boundary(boundary, DENSE_FIT_POINTS);
            for s in dense.iter_mut() {
                s.value = boundary_datum(pde, s)?;
            }
            if pde.equation == Equation::Laplace && pde.bc_kind == BcKind::Neumann {
                let mean = project_compatible(boundary, &mut dense);
                debug_assert!(compatibility_defect(boundary, &dense) < 1e-8);
                log::info!("neumann data projected by {mean:.6e} to satisfy compatibility");
                for s in samples.iter_mut() {
                    s.value -= mean;
                }
                neumann_projection = Some(mean);
            }
            let sol = mfs_solve(boundary, pde, &dense, ORACLE_SOURCES)?;
            points
                .iter()
                .map(|p| InteriorPoint {
                    point: *p,
                    true_value: sol.eval(p),
                })
                .collect()
        }
    };

    if samples.iter().any(|s| !s.value.is_finite()) || interior.iter().any(|p| !p.true_value.is_finite()) {
        return Err(TruthError::InvalidSpec("non-finite boundary value or interior truth".into()));
    }

    Ok(Dataset {
        shape_id: shape_id.to_string(),
        pde: *pde,
        seed,
        boundary: samples,
        interior,
        neumann_projection,
    })
}

fn boundary_datum(pde: &PdeSpec, s: &BoundarySample) -> Result<f64, TruthError> {
    match pde.bc_kind {
        BcKind::Dirichlet => dirichlet_value(pde, &s.point),
        BcKind::Neumann => neumann_value(pde, s),
    }
}
