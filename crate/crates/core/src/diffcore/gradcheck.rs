//! Central finite-difference checks for the autodiff primitives.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{DiffError, Graph, Padding, Tensor, Var};
use crate::rng::stream;

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Worst normwise relative error `‖g − ĝ‖∞ / max(‖g‖∞, ‖ĝ‖∞)` between the
/// reverse-mode gradient and central differences, over all inputs.
///
/// `f` must build a one-element output from the input leaves.
pub fn check_gradients<F>(inputs: &[Tensor], f: F, h: f64) -> Result<f64, DiffError>
where
    F: Fn(&mut Graph<'_>, &[Var]) -> Result<Var, DiffError>,
{
    let eval = |ts: &[Tensor]| -> Result<f64, DiffError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.param(t)).collect();
        let out = f(&mut g, &vars)?;
        let v = g.value(out);
        if v.numel() != 1 {
            return Err(DiffError::NotScalar(v.shape().to_vec()));
        }
        Ok(v.data()[0])
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t)).collect();
    let out = f(&mut g, &vars)?;
    let grads = g.backward(out)?;

    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (idx, (var, t)) in vars.iter().zip(inputs).enumerate() {
        let analytic = grads.get_or_zeros(*var, t.shape());
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 1e-8;
        for j in 0..t.numel() {
            let x0 = t.data()[j];
            probe[idx].data_mut()[j] = x0 + h;
            let fp = eval(&probe)?;
            probe[idx].data_mut()[j] = x0 - h;
            let fm = eval(&probe)?;
            probe[idx].data_mut()[j] = x0;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic.data()[j];
            diff = diff.max((a - numeric).abs());
            scale = scale.max(a.abs()).max(numeric.abs());
        }
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}

fn randn<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(data, shape.to_vec()).expect("shape matches")
}

/// Contracts an arbitrary output against a fixed random cotangent so the
/// check exercises a full vector-Jacobian product.
fn contract(g: &mut Graph<'_>, out: Var, weights: &Tensor) -> Result<Var, DiffError> {
    let w = g.constant(weights.clone());
    let p = g.mul(out, w)?;
    Ok(g.sum(p))
}

/// Primitive names covered by [`primitive_suite`].
pub const PRIMITIVES: [&str; 14] = [
    "add", "sub", "mul", "add_row", "matmul", "conv2d_valid", "conv2d_same", "cos", "sin", "gelu", "sum", "mean",
    "reshape", "concat",
];

/// Runs `cases` randomized checks per primitive plus the scalar-parameter
/// scale; returns the worst relative error per primitive.
pub fn primitive_suite(cases: usize, seed: u64) -> Result<Vec<(&'static str, f64)>, DiffError> {
    let mut rng = stream(seed, "gradcheck");
    let mut report = Vec::new();
    for name in PRIMITIVES.iter().copied().chain(["scale_by_scalar_param"]) {
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let m = rng.random_range(1..=4);
            let n = rng.random_range(1..=4);
            let err = match name {
                "add" | "sub" | "mul" => {
                    let (a, b, w) = (randn(&mut rng, &[m, n]), randn(&mut rng, &[m, n]), randn(&mut rng, &[m, n]));
                    check_gradients(
                        &[a, b],
                        |g, v| {
                            let o = match name {
                                "add" => g.add(v[0], v[1])?,
                                "sub" => g.sub(v[0], v[1])?,
                                _ => g.mul(v[0], v[1])?,
                            };
                            contract(g, o, &w)
                        },
                        FD_STEP,
                    )?
                }
                "add_row" => {
                    let (a, b, w) = (randn(&mut rng, &[m, n]), randn(&mut rng, &[n]), randn(&mut rng, &[m, n]));
                    check_gradients(
                        &[a, b],
                        |g, v| {
                            let o = g.add_row(v[0], v[1])?;
                            contract(g, o, &w)
                        },
                        FD_STEP,
                    )?
                }
                "matmul" => {
                    let k = rng.random_range(1..=5);
                    let (a, b, w) = (randn(&mut rng, &[m, k]), randn(&mut rng, &[k, n]), randn(&mut rng, &[m, n]));
                    check_gradients(
                        &[a, b],
                        |g, v| {
                            let o = g.matmul(v[0], v[1])?;
                            contract(g, o, &w)
                        },
                        FD_STEP,
                    )?
                }
                "conv2d_valid" | "conv2d_same" => {
                    let padding = if name == "conv2d_same" { Padding::Same } else { Padding::Valid };
                    let (c, o) = (rng.random_range(1..=2), rng.random_range(1..=3));
                    let (h, wd) = (rng.random_range(3..=5), rng.random_range(3..=6));
                    let input = randn(&mut rng, &[c, h, wd]);
                    let kernel = randn(&mut rng, &[o, c, 3, 3]);
                    let bias = randn(&mut rng, &[o]);
                    let out_shape = match padding {
                        Padding::Same => [o, h, wd],
                        Padding::Valid => [o, h - 2, wd - 2],
                    };
                    let w = randn(&mut rng, &out_shape);
                    check_gradients(
                        &[input, kernel, bias],
                        |g, v| {
                            let y = g.conv2d(v[0], v[1], Some(v[2]), padding)?;
                            contract(g, y, &w)
                        },
                        FD_STEP,
                    )?
                }
                "cos" | "sin" | "gelu" => {
                    let (a, w) = (randn(&mut rng, &[m, n]), randn(&mut rng, &[m, n]));
                    check_gradients(
                        &[a],
                        |g, v| {
                            let o = match name {
                                "cos" => g.cos(v[0]),
                                "sin" => g.sin(v[0]),
                                _ => g.gelu(v[0]),
                            };
                            contract(g, o, &w)
                        },
                        FD_STEP,
                    )?
                }
                "sum" | "mean" => {
                    let a = randn(&mut rng, &[m, n]);
                    check_gradients(
                        &[a],
                        |g, v| Ok(if name == "sum" { g.sum(v[0]) } else { g.mean(v[0]) }),
                        FD_STEP,
                    )?
                }
                "reshape" => {
                    let (a, w) = (randn(&mut rng, &[m, n]), randn(&mut rng, &[n * m]));
                    check_gradients(
                        &[a],
                        |g, v| {
                            let o = g.reshape(v[0], &[n * m])?;
                            contract(g, o, &w)
                        },
                        FD_STEP,
                    )?
                }
                "concat" => {
                    let axis = rng.random_range(0..2);
                    let k = rng.random_range(1..=3);
                    let (sa, sb, so) = if axis == 0 {
                        ([m, n], [k, n], [m + k, n])
                    } else {
                        ([m, n], [m, k], [m, n + k])
                    };
                    let (a, b, w) = (randn(&mut rng, &sa), randn(&mut rng, &sb), randn(&mut rng, &so));
                    check_gradients(
                        &[a, b],
                        |g, v| {
                            let o = g.concat(&[v[0], v[1]], axis)?;
                            contract(g, o, &w)
                        },
                        FD_STEP,
                    )?
                }
                _ => {
                    let (a, s, w) = (randn(&mut rng, &[m, n]), randn(&mut rng, &[1]), randn(&mut rng, &[m, n]));
                    check_gradients(
                        &[a, s],
                        |g, v| {
                            let o = g.scale(v[0], v[1])?;
                            contract(g, o, &w)
                        },
                        FD_STEP,
                    )?
                }
            };
            worst = worst.max(err);
        }
        report.push((name, worst));
    }
    Ok(report)
}
