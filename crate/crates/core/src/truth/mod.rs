//! Boundary data and interior ground truth for the test problems.
//!
//! Three equations are supported on star-shaped domains:
//!
//! - Laplace: `Δu = 0`
//! - Helmholtz: `Δu + k² u = 0` (k = 1 by default)
//! - Darcy: `-∇·(a ∇u) = f` with `a(x, y) = 1 + 0.5 sin(√(x² + y²))`
//!
//! Ground truth comes from one of three sources, recorded on every dataset:
//! a closed-form harmonic field ([`TruthMode::Analytic`], Laplace only), a
//! manufactured solution ([`TruthMode::Manufactured`]) or a method of
//! fundamental solutions fit of the reference boundary data
//! ([`TruthMode::MfsOracle`], Laplace and Helmholtz).

pub mod bessel;
mod dataset;
mod mfs;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundarySample, GeometryError, Point2};

pub use dataset::{build_dataset, build_dataset_on, Dataset, InteriorPoint, DENSE_FIT_POINTS};
pub use mfs::{mfs_solve, MfsSolution, MFS_DILATION, MFS_MAX_RESIDUAL};

#[derive(Debug, Error)]
pub enum TruthError {
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
    #[error("method of fundamental solutions: {0}")]
    Mfs(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Equation {
    Laplace,
    Helmholtz { k: f64 },
    Darcy,
}

impl Equation {
    pub const HELMHOLTZ_DEFAULT_K: f64 = 1.0;

    pub fn helmholtz() -> Self {
        Equation::Helmholtz {
            k: Self::HELMHOLTZ_DEFAULT_K,
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Equation::Laplace => f.write_str("laplace"),
            Equation::Helmholtz { k } if *k == Self::HELMHOLTZ_DEFAULT_K => f.write_str("helmholtz"),
            Equation::Helmholtz { k } => write!(f, "helmholtz:k={k}"),
            Equation::Darcy => f.write_str("darcy"),
        }
    }
}

impl FromStr for Equation {
    type Err = TruthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "laplace" => Ok(Equation::Laplace),
            "helmholtz" => Ok(Equation::helmholtz()),
            "darcy" => Ok(Equation::Darcy),
            other => {
                if let Some(k) = other.strip_prefix("helmholtz:k=") {
                    let k: f64 = k
                        .parse()
                        .map_err(|_| TruthError::InvalidSpec(format!("bad wavenumber in `{s}`")))?;
                    if !(k > 0.0 && k.is_finite()) {
                        return Err(TruthError::InvalidSpec("wavenumber must be positive".into()));
                    }
                    Ok(Equation::Helmholtz { k })
                } else {
                    Err(TruthError::InvalidSpec(format!("unknown equation `{s}`")))
                }
            }
        }
    }
}

impl Serialize for Equation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Equation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

impl BcKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BcKind::Dirichlet => "dirichlet",
            BcKind::Neumann => "neumann",
        }
    }
}

impl fmt::Display for BcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BcKind {
    type Err = TruthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BcKind::Dirichlet),
            "neumann" => Ok(BcKind::Neumann),
            _ => Err(TruthError::InvalidSpec(format!("unknown boundary condition `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMode {
    Analytic,
    Manufactured,
    MfsOracle,
}

impl TruthMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TruthMode::Analytic => "analytic",
            TruthMode::Manufactured => "manufactured",
            TruthMode::MfsOracle => "mfs_oracle",
        }
    }

    /// Analytic for Laplace–Dirichlet, manufactured for everything else.
    pub fn default_for(equation: Equation, bc_kind: BcKind) -> Self {
        match (equation, bc_kind) {
            (Equation::Laplace, BcKind::Dirichlet) => TruthMode::Analytic,
            _ => TruthMode::Manufactured,
        }
    }
}

impl fmt::Display for TruthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TruthMode {
    type Err = TruthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analytic" => Ok(TruthMode::Analytic),
            "manufactured" => Ok(TruthMode::Manufactured),
            "mfs_oracle" | "mfs" => Ok(TruthMode::MfsOracle),
            _ => Err(TruthError::InvalidSpec(format!("unknown truth mode `{s}`"))),
        }
    }
}

/// Closed-form harmonic field used by [`TruthMode::Analytic`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticField {
    /// `eˣ sin y`, the reference Dirichlet data.
    #[default]
    ExpSin,
    Constant(f64),
}

impl AnalyticField {
    pub fn value(&self, p: &Point2) -> f64 {
        match self {
            AnalyticField::ExpSin => p.x.exp() * p.y.sin(),
            AnalyticField::Constant(c) => *c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeSpec {
    pub equation: Equation,
    pub bc_kind: BcKind,
    pub truth_mode: TruthMode,
    #[serde(default, skip_serializing_if = "is_default_field")]
    pub analytic_field: AnalyticField,
}

fn is_default_field(f: &AnalyticField) -> bool {
    *f == AnalyticField::default()
}

impl PdeSpec {
    pub fn new(equation: Equation, bc_kind: BcKind, truth_mode: TruthMode) -> Self {
        Self {
            equation,
            bc_kind,
            truth_mode,
            analytic_field: AnalyticField::default(),
        }
    }

    /// Uses the default truth mode for the equation and condition.
    pub fn with_default_truth(equation: Equation, bc_kind: BcKind) -> Self {
        Self::new(equation, bc_kind, TruthMode::default_for(equation, bc_kind))
    }

    pub fn validate(&self) -> Result<(), TruthError> {
        if let Equation::Helmholtz { k } = self.equation {
            if !(k > 0.0 && k.is_finite()) {
                return Err(TruthError::InvalidSpec("Helmholtz wavenumber must be positive".into()));
            }
        }
        match (self.truth_mode, self.equation, self.bc_kind) {
            (TruthMode::MfsOracle, Equation::Darcy, _) => Err(TruthError::InvalidSpec(
                "no fundamental solution for variable-coefficient Darcy flow".into(),
            )),
            (TruthMode::Analytic, Equation::Laplace, BcKind::Dirichlet) => Ok(()),
            (TruthMode::Analytic, _, _) => Err(TruthError::InvalidSpec(format!(
                "no closed-form interior solution for {}/{}; use manufactured or mfs_oracle",
                self.equation, self.bc_kind
            ))),
            _ => Ok(()),
        }
    }
}

/// Reference Dirichlet data `u0 = eˣ sin y`.
pub fn reference_dirichlet(p: &Point2) -> f64 {
    p.x.exp() * p.y.sin()
}

/// Reference Neumann data `∂u0/∂n = 0.1 cos x cos y`.
pub fn reference_neumann(p: &Point2) -> f64 {
    0.1 * p.x.cos() * p.y.cos()
}

/// Darcy permeability `a(x, y) = 1 + 0.5 sin r`.
pub fn darcy_permeability(x: f64, y: f64) -> f64 {
    1.0 + 0.5 * x.hypot(y).sin()
}

/// Gradient of the Darcy permeability; zero at the origin by symmetry.
pub fn darcy_permeability_gradient(x: f64, y: f64) -> [f64; 2] {
    let r = x.hypot(y);
    if r < 1e-12 {
        return [0.0, 0.0];
    }
    let s = 0.5 * r.cos() / r;
    [s * x, s * y]
}

/// Manufactured exact solutions, one per equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Manufactured {
    /// `eˣ sin y`.
    Laplace,
    /// Plane wave `cos(k (x cos θ₀ + y sin θ₀))`.
    PlaneWave { k: f64, direction: f64 },
    /// `sin x cos y` with the Darcy permeability and matching forcing.
    Darcy,
}

/// Propagation angle of the manufactured Helmholtz plane wave.
pub const PLANE_WAVE_DIRECTION: f64 = 0.3;

impl Manufactured {
    pub fn u(&self, x: f64, y: f64) -> f64 {
        match *self {
            Manufactured::Laplace => x.exp() * y.sin(),
            Manufactured::PlaneWave { k, direction } => (k * (x * direction.cos() + y * direction.sin())).cos(),
            Manufactured::Darcy => x.sin() * y.cos(),
        }
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            Manufactured::Laplace => {
                let e = x.exp();
                [e * y.sin(), e * y.cos()]
            }
            Manufactured::PlaneWave { k, direction } => {
                let (s, c) = direction.sin_cos();
                let phase = (k * (x * c + y * s)).sin();
                [-k * c * phase, -k * s * phase]
            }
            Manufactured::Darcy => [x.cos() * y.cos(), -x.sin() * y.sin()],
        }
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        match *self {
            Manufactured::Laplace => 0.0,
            Manufactured::PlaneWave { k, .. } => -k * k * self.u(x, y),
            Manufactured::Darcy => -2.0 * x.sin() * y.cos(),
        }
    }

    /// Darcy forcing `f = -(a Δu + ∇a·∇u)`; zero for the other equations.
    pub fn forcing(&self, x: f64, y: f64) -> f64 {
        match self {
            Manufactured::Darcy => {
                let a = darcy_permeability(x, y);
                let ga = darcy_permeability_gradient(x, y);
                let gu = self.grad(x, y);
                -(a * self.laplacian(x, y) + ga[0] * gu[0] + ga[1] * gu[1])
            }
            _ => 0.0,
        }
    }
}

/// The manufactured solution for `pde`'s equation.
pub fn manufacture(pde: &PdeSpec) -> Result<Manufactured, TruthError> {
    if pde.truth_mode != TruthMode::Manufactured {
        return Err(TruthError::InvalidSpec("manufacture requires the manufactured truth mode".into()));
    }
    Ok(manufactured_for(pde.equation))
}

pub(crate) fn manufactured_for(equation: Equation) -> Manufactured {
    match equation {
        Equation::Laplace => Manufactured::Laplace,
        Equation::Helmholtz { k } => Manufactured::PlaneWave {
            k,
            direction: PLANE_WAVE_DIRECTION,
        },
        Equation::Darcy => Manufactured::Darcy,
    }
}

/// Dirichlet boundary value at `p`.
pub fn dirichlet_value(pde: &PdeSpec, p: &Point2) -> Result<f64, TruthError> {
    if pde.bc_kind != BcKind::Dirichlet {
        return Err(TruthError::InvalidSpec("dirichlet_value on a Neumann problem".into()));
    }
    Ok(match pde.truth_mode {
        TruthMode::Analytic => pde.analytic_field.value(p),
        TruthMode::Manufactured => manufactured_for(pde.equation).u(p.x, p.y),
        TruthMode::MfsOracle => reference_dirichlet(p),
    })
}

/// Outward normal derivative at boundary sample `s`.
pub fn neumann_value(pde: &PdeSpec, s: &BoundarySample) -> Result<f64, TruthError> {
    if pde.bc_kind != BcKind::Neumann {
        return Err(TruthError::InvalidSpec("neumann_value on a Dirichlet problem".into()));
    }
    Ok(match pde.truth_mode {
        TruthMode::Analytic | TruthMode::MfsOracle => reference_neumann(&s.point),
        TruthMode::Manufactured => {
            let g = manufactured_for(pde.equation).grad(s.point.x, s.point.y);
            g[0] * s.normal[0] + g[1] * s.normal[1]
        }
    })
}

/// Value the solution takes at the origin, used to pin the additive constant
/// of pure-Neumann Laplace problems.
pub(crate) fn anchor_value(pde: &PdeSpec) -> f64 {
    match pde.truth_mode {
        TruthMode::Manufactured => manufactured_for(pde.equation).u(0.0, 0.0),
        TruthMode::Analytic => pde.analytic_field.value(&Point2::from_cartesian(0.0, 0.0)),
        TruthMode::MfsOracle => reference_dirichlet(&Point2::from_cartesian(0.0, 0.0)),
    }
}
