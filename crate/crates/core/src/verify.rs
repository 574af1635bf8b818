//! Self-check suites: the random-feature identities, gradient checks and
//! oracle agreement. Each check reports a measured quantity against its
//! threshold.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::diffcore::gradcheck::primitive_suite;
use crate::diffcore::{Padding, Tensor};
use crate::geometry::{equispaced_boundary, sample_interior, BoundaryId, DEFAULT_MARGIN};
use crate::model::{FienoModel, IanConfig, KanConfig, ModelConfig};
use crate::rff::{circle_integral_identity, gaussian_kernel, RffBasis, TrigSeries};
use crate::rng::stream;
use crate::truth::{build_dataset, mfs_solve, BcKind, Equation, PdeSpec, TruthMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Rff,
    Grad,
    Oracle,
    All,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rff" => Ok(Suite::Rff),
            "grad" => Ok(Suite::Grad),
            "oracle" => Ok(Suite::Oracle),
            "all" => Ok(Suite::All),
            _ => Err(format!("unknown suite {s:?} (expected rff, grad, oracle or all)")),
        }
    }
}

/// Outcome of one check: `passed` iff `value < threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value < threshold,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {:.3e} (< {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold
        )
    }
}

/// Worst `|lhs − rhs|` of the circle identity over `cases` random integer
/// frequencies `1..=32`, phases and sparse trigonometric series.
pub fn identity_max_error(cases: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, "identity");
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let m = rng.random_range(1..=32u32);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let terms = (0..rng.random_range(1..6))
            .map(|_| {
                (
                    rng.random_range(0..=40u32),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        let (lhs, rhs) = circle_integral_identity(m, phase, &TrigSeries::new(terms));
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Mean and max `|ẑ(x)ᵀẑ(y) − k(x, y)|` over `pairs` random pairs in
/// `[−2, 2]²`, with `features` random features at `σ = 1`.
pub fn rff_errors(features: usize, pairs: usize, seed: u64) -> (f64, f64) {
    let basis = RffBasis::sample(2, features, 1.0, seed).expect("valid rff parameters");
    let mut rng = stream(seed, "pairs");
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for _ in 0..pairs {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let y = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let e = (basis.approx_kernel(&x, &y).expect("2-d inputs") - gaussian_kernel(1.0, &x, &y)).abs();
        sum += e;
        max = max.max(e);
    }
    (sum / pairs as f64, max)
}

pub fn rff_suite() -> Vec<Check> {
    let (mean, max) = rff_errors(4096, 100, 7);
    let (mean_small, _) = rff_errors(64, 100, 7);
    vec![
        Check::below("circle identity, 500 cases, max |lhs - rhs|", identity_max_error(500, 1), 1e-8),
        Check::below("rff D=4096 mean error", mean, 0.05),
        Check::below("rff D=4096 max error", max, 0.15),
        Check::below("rff D=4096 mean error / D=64 mean error", mean / mean_small, 1.0),
    ]
}

/// Worst normwise relative error between the model's MSE gradient and central
/// differences on a 5-point problem, over all trainable tensors.
pub fn model_gradient_error(seed: u64) -> f64 {
    let cfg = ModelConfig {
        kan: KanConfig {
            elm_layers: vec![8, 8],
            mlp_layers: vec![6, 3],
            d: 3,
            elm_seed: seed,
            elm_fan_in_scaling: true,
        },
        ian: IanConfig {
            conv_channels: vec![2, 3],
            kernel_size: 3,
            fc_layers: vec![4, 3],
            d: 3,
            m: 12,
            padding: Padding::Same,
        },
        bc_kind: BcKind::Dirichlet,
        init_seed: seed,
    };
    let mut model = FienoModel::new(cfg).expect("valid micro config");
    let mut rng = stream(seed, "micro");
    // Nonzero biases so every parameter path is exercised.
    for t in model.params_mut() {
        for v in t.data_mut() {
            *v += 0.1 * rng.random_range(-1.0..1.0);
        }
    }
    let shape = BoundaryId::BTrain.boundary();
    let mut boundary = equispaced_boundary(&shape, 12);
    for s in boundary.iter_mut() {
        s.value = s.point.x.exp() * s.point.y.sin();
    }
    let points = sample_interior(&shape, 5, DEFAULT_MARGIN, &mut rng).expect("interior sampling");
    let features = model.elm_features(&points);
    let image = model.boundary_image(&boundary).expect("12 samples");
    let targets = Tensor::vector(points.iter().map(|p| p.x.exp() * p.y.sin()).collect());
    let (_, grads) = model.mse_and_gradients(&features, &image, &targets).expect("forward");

    let mse = |m: &FienoModel| {
        let pred = m.predict_cached(&features, &image).expect("forward");
        pred.iter().zip(targets.data()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
    };
    let h = crate::diffcore::gradcheck::FD_STEP;
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for (k, g) in grads.iter().enumerate() {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 1e-12;
        for j in 0..g.numel() {
            let x0 = probe.params()[k].data()[j];
            probe.params_mut()[k].data_mut()[j] = x0 + h;
            let fp = mse(&probe);
            probe.params_mut()[k].data_mut()[j] = x0 - h;
            let fm = mse(&probe);
            probe.params_mut()[k].data_mut()[j] = x0;
            let numeric = (fp - fm) / (2.0 * h);
            diff = diff.max((numeric - g.data()[j]).abs());
            scale = scale.max(numeric.abs()).max(g.data()[j].abs());
        }
        worst = worst.max(diff / scale);
    }
    worst
}

pub fn grad_suite() -> Vec<Check> {
    let mut out: Vec<Check> = match primitive_suite(50, 2024) {
        Ok(report) => report
            .into_iter()
            .map(|(name, err)| Check::below(format!("gradient {name}, 50 cases"), err, 1e-4))
            .collect(),
        Err(e) => vec![Check {
            name: format!("primitive gradient suite: {e}"),
            value: f64::INFINITY,
            threshold: 1e-4,
            passed: false,
        }],
    };
    out.push(Check::below("FIE-NO loss gradient, 5-point problem", model_gradient_error(3), 1e-4));
    out
}

/// Max error of a 200-source MFS fit of `eˣ sin y` on the training boundary
/// at 100 interior points.
pub fn mfs_laplace_error() -> f64 {
    let shape = BoundaryId::BTrain.boundary();
    let pde = PdeSpec::new(Equation::Laplace, BcKind::Dirichlet, TruthMode::MfsOracle);
    let mut data = equispaced_boundary(&shape, 2000);
    for s in data.iter_mut() {
        s.value = s.point.x.exp() * s.point.y.sin();
    }
    let Ok(sol) = mfs_solve(&shape, &pde, &data, 200) else {
        return f64::INFINITY;
    };
    let Ok(points) = sample_interior(&shape, 100, DEFAULT_MARGIN, &mut stream(4, "mfs-check")) else {
        return f64::INFINITY;
    };
    points
        .iter()
        .map(|p| (sol.eval(p) - p.x.exp() * p.y.sin()).abs())
        .fold(0.0, f64::max)
}

/// Max disagreement between analytic and oracle truths on one preset.
pub fn oracle_agreement(id: BoundaryId) -> f64 {
    let make = |mode| {
        build_dataset(
            id,
            &PdeSpec::new(Equation::Laplace, BcKind::Dirichlet, mode),
            200,
            100,
            5,
        )
    };
    match (make(TruthMode::Analytic), make(TruthMode::MfsOracle)) {
        (Ok(a), Ok(o)) => a
            .interior
            .iter()
            .zip(&o.interior)
            .map(|(x, y)| (x.true_value - y.true_value).abs())
            .fold(0.0, f64::max),
        _ => f64::INFINITY,
    }
}

pub fn oracle_suite() -> Vec<Check> {
    let mut out = vec![Check::below("MFS Laplace on B_train, max interior error", mfs_laplace_error(), 1e-6)];
    for id in BoundaryId::ALL {
        out.push(Check::below(format!("analytic vs oracle truths on {id}"), oracle_agreement(id), 1e-5));
    }
    out
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Rff => rff_suite(),
        Suite::Grad => grad_suite(),
        Suite::Oracle => oracle_suite(),
        Suite::All => [rff_suite(), grad_suite(), oracle_suite()].concat(),
    }
}
