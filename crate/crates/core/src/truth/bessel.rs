//! Bessel functions of integer order 0 and 1 for real positive arguments.
//!
//! Ascending power series below [`SERIES_LIMIT`], Hankel asymptotic expansion
//! above it. Absolute accuracy is better than 1e-10 on (0, ∞).

use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Argument where the power series hands over to the asymptotic expansion.
pub const SERIES_LIMIT: f64 = 12.0;

/// Power-series pieces shared by order 0: returns (J0, Σ (-1)^{k+1} H_k q^k/(k!)^2).
fn series0(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut term = 1.0; // (-q)^k / (k!)^2
    let mut j = 1.0;
    let mut harmonic = 0.0;
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        harmonic += 1.0 / kf;
        j += term;
        s -= harmonic * term;
        if term.abs() < 1e-18 * j.abs().max(1e-300) && term.abs() * harmonic < 1e-18 {
            break;
        }
    }
    (j, s)
}

/// Order-1 series: returns (J1, Σ (-1)^k (H_k + H_{k+1}) (x/2)^{2k+1}/(k!(k+1)!)).
fn series1(x: f64) -> (f64, f64) {
    let h = 0.5 * x;
    let q = h * h;
    let mut term = h; // (-1)^k h^{2k+1} / (k! (k+1)!)
    let mut hk = 0.0;
    let mut hk1 = 1.0;
    let mut j = term;
    let mut s = term * (hk + hk1);
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (kf + 1.0));
        hk += 1.0 / kf;
        hk1 += 1.0 / (kf + 1.0);
        j += term;
        s += term * (hk + hk1);
        if term.abs() * (hk + hk1) < 1e-18 {
            break;
        }
    }
    (j, s)
}

/// Hankel asymptotic amplitudes (P, Q) for order `nu`.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 0.0;
    let mut q = 0.0;
    // a_k = prod_{j=1..k} (mu - (2j-1)^2) / (k! (8x)^k)
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        if a.abs() > last {
            break;
        }
        last = a.abs();
        // Terms alternate in pairs: P takes even k, Q odd k, each with (-1)^{k/2}.
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q += sign * a;
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}

pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_LIMIT {
        series0(x).0
    } else {
        let (p, q) = hankel_pq(0.0, x);
        let chi = x - FRAC_PI_4;
        (FRAC_2_PI / x).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Bessel function of the second kind, order 0. Requires `x > 0`.
pub fn y0(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        let (j, s) = series0(x);
        FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * j + s)
    } else {
        let (p, q) = hankel_pq(0.0, x);
        let chi = x - FRAC_PI_4;
        (FRAC_2_PI / x).sqrt() * (p * chi.sin() + q * chi.cos())
    }
}

pub fn j1(x: f64) -> f64 {
    let sign = x.signum();
    let x = x.abs();
    let v = if x < SERIES_LIMIT {
        series1(x).0
    } else {
        let (p, q) = hankel_pq(1.0, x);
        let chi = x - 3.0 * FRAC_PI_4;
        (FRAC_2_PI / x).sqrt() * (p * chi.cos() - q * chi.sin())
    };
    sign * v
}

/// Bessel function of the second kind, order 1. Requires `x > 0`.
pub fn y1(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        let (j, s) = series1(x);
        FRAC_2_PI * ((0.5 * x).ln() + EULER_GAMMA) * j - FRAC_2_PI / x - s / PI
    } else {
        let (p, q) = hankel_pq(1.0, x);
        let chi = x - 3.0 * FRAC_PI_4;
        (FRAC_2_PI / x).sqrt() * (p * chi.sin() + q * chi.cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from 30-digit arbitrary precision evaluation:
    // (x, Y0, Y1, J0, J1).
    const REFERENCE: [(f64, f64, f64, f64, f64); 14] = [
        (0.01, -3.005455637083646, -63.67859628206065, 0.9999750001562495, 0.004999937500260416),
        (0.1, -1.5342386513503667, -6.4589510947020266, 0.99750156206604, 0.049937526036242),
        (0.5, -0.44451873350670656, -1.471472392670243, 0.9384698072408129, 0.2422684576748739),
        (1.0, 0.08825696421567696, -0.7812128213002887, 0.7651976865579666, 0.4400505857449335),
        (2.0, 0.5103756726497451, -0.10703243154093754, 0.22389077914123567, 0.5767248077568734),
        (3.5, 0.1890219439208265, 0.41018841788751187, -0.3801277399872634, 0.1373775273623272),
        (5.0, -0.30851762524903376, 0.14786314339122683, -0.1775967713143383, -0.32757913759146523),
        (7.9, 0.20652094814437577, -0.18172107728057313, 0.19436184484127825, 0.2191793999217512),
        (8.0, 0.22352148938756622, -0.1580604617312475, 0.1716508071375539, 0.23463634685391463),
        (11.9, -0.22983321394337505, -0.03471149833403061, 0.025049441699589645, -0.22898324966192404),
        (12.0, -0.22523731263436145, -0.05709921826089652, 0.047689310796833535, -0.2234471044906276),
        (15.0, 0.20546429603891828, 0.02107362803687351, -0.014224472826780772, 0.20510403861352275),
        (25.0, -0.12724943226800614, -0.09882996478323741, 0.09626678327595811, -0.1253502495802899),
        (60.0, 0.0473589522094494, 0.09186960936986689, -0.09147180408906187, 0.046598383758166315),
    ];

    #[test]
    fn matches_high_precision_reference() {
        for &(x, ry0, ry1, rj0, rj1) in &REFERENCE {
            let tol = 1e-10 * ry1.abs().max(1.0);
            assert!((y0(x) - ry0).abs() < 1e-10, "y0({x}) = {} vs {ry0}", y0(x));
            assert!((y1(x) - ry1).abs() < tol, "y1({x}) = {} vs {ry1}", y1(x));
            assert!((j0(x) - rj0).abs() < 1e-10, "j0({x}) = {} vs {rj0}", j0(x));
            assert!((j1(x) - rj1).abs() < 1e-10, "j1({x}) = {} vs {rj1}", j1(x));
        }
    }

    #[test]
    fn wronskian() {
        // J1 Y0 - J0 Y1 = 2 / (π x)
        for i in 1..400 {
            let x = 0.05 * i as f64;
            let w = j1(x) * y0(x) - j0(x) * y1(x);
            assert!((w - 2.0 / (PI * x)).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn y0_derivative_is_minus_y1() {
        for x in [0.3, 1.1, 2.7, 6.0] {
            let h = 1e-5;
            let d = (y0(x + h) - y0(x - h)) / (2.0 * h);
            assert!((d + y1(x)).abs() < 1e-8);
        }
    }
}
