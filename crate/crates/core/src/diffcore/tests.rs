use super::gradcheck::{check_gradients, primitive_suite, FD_STEP};
use super::*;
use crate::rng::stream;
use rand::Rng;

#[test]
fn cos_at_zero() {
    let x = Tensor::scalar(0.0);
    let mut g = Graph::new();
    let v = g.param(&x);
    let c = g.cos(v);
    assert_eq!(g.value(c).item(), 1.0);
    let grads = g.backward(c).unwrap();
    assert_eq!(grads.get(v).unwrap().item(), 0.0);
}

#[test]
fn sum_of_ones() {
    let x = Tensor::filled(&[2, 2], 1.0);
    let mut g = Graph::new();
    let v = g.param(&x);
    let s = g.sum(v);
    assert_eq!(g.value(s).item(), 4.0);
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.get(v).unwrap().data(), &[1.0; 4]);
}

#[test]
fn square_at_three() {
    let x = Tensor::scalar(3.0);
    let mut g = Graph::new();
    let v = g.param(&x);
    let y = g.mul(v, v).unwrap();
    assert_eq!(g.backward(y).unwrap().get(v).unwrap().item(), 6.0);
}

#[test]
fn constant_loss_has_zero_gradients() {
    let w = Tensor::vector(vec![1.0, 2.0]);
    let mut g = Graph::new();
    let v = g.param(&w);
    let zero = g.scale_const(v, 0.0);
    let c = g.constant(Tensor::scalar(5.0));
    let s = g.sum(zero);
    let loss = g.add(s, c).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(v).unwrap().data(), &[0.0, 0.0]);
    assert!(grads.get(c).is_none());
}

#[test]
fn backward_rejects_non_scalar() {
    let x = Tensor::zeros(&[2]);
    let mut g = Graph::new();
    let v = g.param(&x);
    assert!(matches!(g.backward(v), Err(DiffError::NotScalar(_))));
}

#[test]
fn shape_errors() {
    let (a, b) = (Tensor::zeros(&[2, 3]), Tensor::zeros(&[2, 3]));
    let mut g = Graph::new();
    let (va, vb) = (g.param(&a), g.param(&b));
    assert!(g.matmul(va, vb).is_err());
    let c = g.constant(Tensor::zeros(&[3]));
    assert!(g.add(va, c).is_err());
    let img = g.constant(Tensor::zeros(&[1, 2, 2]));
    let k = g.constant(Tensor::zeros(&[1, 1, 3, 3]));
    assert!(matches!(g.conv2d(img, k, None, Padding::Valid), Err(DiffError::KernelTooLarge { .. })));
    assert!(Tensor::new(vec![1.0; 3], vec![2, 2]).is_err());
}

#[test]
fn gelu_exact_form() {
    assert_eq!(gelu(0.0), 0.0);
    for x in [-2.5, -1.0, 0.3, 4.0] {
        assert_eq!(gelu(x) - x * normal_cdf(x), 0.0);
    }
}

#[test]
fn matmul_matches_finite_differences_tightly() {
    let mut rng = stream(11, "matmul");
    let mut rand = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let a = Tensor::matrix(3, 4, rand(12)).unwrap();
    let b = Tensor::matrix(4, 2, rand(8)).unwrap();
    let w = Tensor::matrix(3, 2, rand(6)).unwrap();
    let err = check_gradients(
        &[a, b],
        |g, v| {
            let o = g.matmul(v[0], v[1])?;
            let c = g.constant(w.clone());
            let p = g.mul(o, c)?;
            Ok(g.sum(p))
        },
        FD_STEP,
    )
    .unwrap();
    assert!(err < 1e-6, "matmul relative error {err}");
}

#[test]
fn mean_gelu_of_linear_map() {
    let mut rng = stream(5, "gelu");
    let mut rand = |n: usize| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
    let w = Tensor::matrix(4, 3, rand(12)).unwrap();
    let x = Tensor::matrix(3, 1, rand(3)).unwrap();
    let err = check_gradients(
        &[w, x],
        |g, v| {
            let h = g.matmul(v[0], v[1])?;
            let a = g.gelu(h);
            Ok(g.mean(a))
        },
        FD_STEP,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn every_primitive_passes_fifty_checks() {
    for (name, err) in primitive_suite(50, 2024).unwrap() {
        assert!(err < 1e-4, "{name}: relative error {err}");
    }
}

#[test]
fn backward_is_deterministic() {
    let w = Tensor::matrix(2, 2, vec![0.3, -1.2, 0.7, 2.0]).unwrap();
    let mut g = Graph::new();
    let v = g.param(&w);
    let c = g.cos(v);
    let m = g.matmul(c, v).unwrap();
    let e = g.gelu(m);
    let loss = g.mean(e);
    let a = g.backward(loss).unwrap();
    let b = g.backward(loss).unwrap();
    assert_eq!(a.get(v).unwrap(), b.get(v).unwrap());
}

#[test]
fn concat_and_reshape_values() {
    let a = Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap();
    let b = Tensor::matrix(1, 2, vec![3.0, 4.0]).unwrap();
    let mut g = Graph::new();
    let (va, vb) = (g.param(&a), g.param(&b));
    let rows = g.concat(&[va, vb], 0).unwrap();
    assert_eq!(g.shape(rows), &[2, 2]);
    assert_eq!(g.value(rows).data(), &[1.0, 2.0, 3.0, 4.0]);
    let cols = g.concat(&[va, vb], 1).unwrap();
    assert_eq!(g.shape(cols), &[1, 4]);
    let flat = g.reshape(rows, &[4]).unwrap();
    assert_eq!(g.value(flat).data(), &[1.0, 2.0, 3.0, 4.0]);
}
