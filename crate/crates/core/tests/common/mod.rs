//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls the library's integrators: the equations are restated
//! and solved with fixed-step classical Runge-Kutta, derivatives come from
//! differentiating the equation by hand.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdche::Params;

pub fn c(re: f64) -> C {
    C::new(re, 0.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random admissible parameters: `l` in {0,1,2,3}, `mu` in [0.2, 2], `omega` in [0.3, 2].
pub fn random_params(r: &mut ChaCha8Rng) -> Params {
    let ell = r.gen_range(0..4) as f64;
    let mu = r.gen_range(0.2..=2.0);
    let omega = r.gen_range(0.3..=2.0);
    Params::new(ell, mu, omega).unwrap()
}

/// Phase away from the degenerate values `pi/2 + k pi`, where one branch vanishes.
pub fn random_phase(r: &mut ChaCha8Rng) -> f64 {
    loop {
        let phi0: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let d = (phi0 - std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI);
        if d.min(std::f64::consts::PI - d) > 0.2 {
            return phi0;
        }
    }
}

/// Second derivative from
/// `z^2 E'' + ((l+1) z + mu (1 - z^2)) E' + (-mu (l+1) z + lambda) E = 0`.
pub fn heun_e2(p: &Params, z: C, e: C, e1: C) -> C {
    let b = z * (p.ell + 1.0) + (c(1.0) - z * z) * p.mu;
    let q = -z * (p.mu * (p.ell + 1.0)) + p.lambda;
    -(b * e1 + q * e) / (z * z)
}

/// Derivatives `E, E', ..., E^{(kmax)}` at `z` from `(E, E')`, by differentiating
/// the equation `n` times with the Leibniz rule and solving for the top order.
pub fn heun_derivatives(p: &Params, z: C, e: C, e1: C, kmax: usize) -> Vec<C> {
    let l1 = p.ell + 1.0;
    // Coefficient polynomials and their derivatives: a = z^2, b, q.
    let a = [z * z, z * 2.0, c(2.0)];
    let b = [z * l1 + (c(1.0) - z * z) * p.mu, c(l1) - z * (2.0 * p.mu), c(-2.0 * p.mu)];
    let q = [-z * (p.mu * l1) + p.lambda, c(-p.mu * l1), c(0.0)];
    let mut d = vec![e, e1];
    for n in 0..kmax.saturating_sub(1) {
        // sum_j C(n,j) [a^(j) E^(n-j+2) + b^(j) E^(n-j+1) + q^(j) E^(n-j)] = 0
        let mut rest = c(0.0);
        for j in 0..=n.min(2) {
            let binom = binomial(n, j);
            if j > 0 {
                rest += a[j] * d[n - j + 2] * binom;
            }
            rest += b[j] * d[n - j + 1] * binom;
            rest += q[j] * d[n - j] * binom;
        }
        d.push(-rest / a[0]);
    }
    d.truncate(kmax + 1);
    d
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Classical RK4 for the equation in the log coordinate along the straight
/// segment `w0 -> w1`: `dE/dw = z E'`, `dE'/dw = z E''`.
pub fn rk4_heun(p: &Params, w0: C, state: [C; 2], w1: C, steps: usize) -> [C; 2] {
    let f = |w: C, y: [C; 2]| {
        let z = w.exp();
        [z * y[1], z * heun_e2(p, z, y[0], y[1])]
    };
    let h = (w1 - w0) / steps as f64;
    let mut y = state;
    for k in 0..steps {
        let w = w0 + h * k as f64;
        let k1 = f(w, y);
        let k2 = f(w + h * 0.5, [y[0] + k1[0] * h * 0.5, y[1] + k1[1] * h * 0.5]);
        let k3 = f(w + h * 0.5, [y[0] + k2[0] * h * 0.5, y[1] + k2[1] * h * 0.5]);
        let k4 = f(w + h, [y[0] + k3[0] * h, y[1] + k3[1] * h]);
        for i in 0..2 {
            y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    y
}

/// RK4 through a polyline of `w` vertices.
pub fn rk4_heun_path(p: &Params, vertices: &[C], state: [C; 2], steps_per_segment: usize) -> [C; 2] {
    vertices.windows(2).fold(state, |y, seg| rk4_heun(p, seg[0], y, seg[1], steps_per_segment))
}

/// `(phi, P, Q)` at `t` by RK4 from `t = 0`.
pub fn rk4_rsj(p: &Params, phi0: f64, t: f64, steps: usize) -> [f64; 3] {
    let f = |s: f64, y: [f64; 3]| {
        let (sn, cs) = y[0].sin_cos();
        [p.bias_b + p.bias_a * (p.omega * s).cos() - sn, cs, (-y[1]).exp() * sn]
    };
    let h = t / steps as f64;
    let mut y = [phi0, 0.0, 0.0];
    for k in 0..steps {
        let s = h * k as f64;
        let k1 = f(s, y);
        let k2 = f(s + 0.5 * h, std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]));
        let k3 = f(s + 0.5 * h, std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]));
        let k4 = f(s + h, std::array::from_fn(|i| y[i] + h * k3[i]));
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// RK4 for `P' = cos(phi(t))`, `Q' = e^{-P} sin(phi(t))` from `t = 0`, with
/// `phi` tabulated at half steps: `phi_half[k] = phi(k h / 2)`.
pub fn rk4_quadratures(phi_half: &[f64], h: f64) -> Vec<[f64; 2]> {
    let f = |phi: f64, pq: [f64; 2]| [phi.cos(), (-pq[0]).exp() * phi.sin()];
    let mut out = vec![[0.0, 0.0]];
    let mut y = [0.0, 0.0];
    for k in 0..(phi_half.len() - 1) / 2 {
        let (a, m, b) = (phi_half[2 * k], phi_half[2 * k + 1], phi_half[2 * k + 2]);
        let k1 = f(a, y);
        let k2 = f(m, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f(m, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f(b, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(y);
    }
    out
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

pub fn rel(a: C, b: C) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
