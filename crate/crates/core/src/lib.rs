//! Fredholm integral equation neural operator (FIE-NO) for two-dimensional
//! boundary value problems on irregular, star-shaped domains.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: parametric boundaries, point sampling and outward normals.
//! - [`truth`]: boundary data and interior ground truth for the Laplace,
//!   Helmholtz and Darcy test problems, including a method-of-fundamental-
//!   solutions oracle.
//! - [`rff`]: random Fourier features and the circle-orthogonality identity
//!   behind the kernel simplification.
//! - [`diffcore`]: a small define-by-run reverse-mode autodiff engine and Adam.
//! - [`model`]: the network itself (kernel branch, integral branch, scale).
//! - [`trainer`]: optimisation loop and evaluation.
//! - [`evalbench`]: experiment grid, tables, plots and a TPS sanity baseline.
//! - [`verify`]: self-check suites exposed through the command line.

pub mod diffcore;
pub mod evalbench;
pub mod geometry;
pub mod model;
pub mod rff;
pub mod rng;
pub mod trainer;
pub mod truth;
pub mod verify;

pub use geometry::{Boundary, BoundaryId, BoundarySample, BoundaryShape, Point2};
pub use truth::{build_dataset, BcKind, Dataset, Equation, PdeSpec, TruthMode};
pub use diffcore::{Graph, Tensor, Var};
pub use model::{FienoModel, IanConfig, KanConfig, ModelConfig};
pub use trainer::{evaluate, train, TrainConfig};
pub use evalbench::{run_grid, GridConfig, Protocol, ResultRecord};
