//! Inverse direction: from an eigenpair and an angle `alpha` back to the
//! junction solution.
//!
//! With `c = cos(alpha/2)`, `s = sin(alpha/2)`:
//!
//! * `Phi(z) = -i z^l (c E+(z) + i s E-(z)) / (c E+(1/z) - i s E-(1/z))`,
//!   and `e^{i phi(t)} = Phi(e^{i omega t})`;
//! * `Theta(z) = -i (c E+(1)^2 E-(z) + i s E-(1)^2 E+(z)) / (E+(1) E-(1) (c E+(z) + i s E-(z)))`
//!   and its dual `Theta~`, with `P = -log(-Im Theta)`, `Q = Re Theta` on the circle.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::cover::CoverPoint;
use crate::eigenbasis::EigenPair;
use crate::error::{Error, Result};

/// Tolerance on `|Phi| = 1` along the circle.
pub const UNIMODULAR_TOL: f64 = 1e-8;
/// Relative size of a denominator treated as zero.
pub const DENOMINATOR_TOL: f64 = 1e-12;
/// Largest principal argument jump accepted between neighbouring samples
/// before the grid is refined.
const MAX_ARG_STEP: f64 = 0.25 * PI;
const MAX_REFINE_DEPTH: u32 = 40;
/// Step of the centered differences used for the evolution report.
pub const FD_STEP: f64 = 1.0 / 4096.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alpha {
    pub alpha: f64,
}

impl Alpha {
    pub fn new(alpha: f64) -> Self {
        Self { alpha: alpha.rem_euclid(TAU) }
    }

    fn half_angles(&self) -> (f64, f64) {
        let (s, c) = (0.5 * self.alpha).sin_cos();
        (c, s)
    }

    /// `E-(1) sin(phi0/2 - pi/4) sin(alpha/2) + E+(1) cos(phi0/2 - pi/4) cos(alpha/2)`.
    pub fn residual(&self, pair: &EigenPair, phi0: f64) -> f64 {
        let (c, s) = self.half_angles();
        let (sp, cp) = (0.5 * phi0 - FRAC_PI_4).sin_cos();
        (pair.minus.value_at_one().re * sp * s + pair.plus.value_at_one().re * cp * c).abs()
    }
}

pub fn alpha_from_phi0(pair: &EigenPair, phi0: f64) -> Result<Alpha> {
    pair.require_nondegenerate()?;
    let (sp, cp) = (0.5 * phi0 - FRAC_PI_4).sin_cos();
    let ep = pair.plus.value_at_one().re;
    let em = pair.minus.value_at_one().re;
    Ok(Alpha::new(2.0 * (ep * cp).atan2(-em * sp)))
}

fn circle_point(pair: &EigenPair, t: f64) -> CoverPoint {
    CoverPoint::on_circle(pair.params().omega * t)
}

/// Values of both branches at a cover point, each divided by its value at `z = 1`.
struct Normalized {
    plus: Complex64,
    minus: Complex64,
}

struct Context<'a> {
    pair: &'a EigenPair,
    c: f64,
    s: f64,
    plus_one: Complex64,
    minus_one: Complex64,
}

impl<'a> Context<'a> {
    fn new(pair: &'a EigenPair, alpha: Alpha) -> Result<Self> {
        pair.require_nondegenerate()?;
        let (c, s) = alpha.half_angles();
        let plus_one = pair.plus.eval(CoverPoint::ONE)?.value;
        let minus_one = pair.minus.eval(CoverPoint::ONE)?.value;
        Ok(Self { pair, c, s, plus_one, minus_one })
    }

    fn normalized(&self, p: CoverPoint) -> Result<Normalized> {
        Ok(Normalized { plus: self.pair.plus.eval(p)?.value / self.plus_one, minus: self.pair.minus.eval(p)?.value / self.minus_one })
    }

    /// `c E+ + i s E-` (sign +1) or `c E+ - i s E-` (sign -1).
    fn combo(&self, v: &Normalized, sign: f64) -> Complex64 {
        v.plus * self.plus_one * self.c + Complex64::new(0.0, sign * self.s) * v.minus * self.minus_one
    }

    fn phi_ratio(&self, t: f64) -> Result<Complex64> {
        let p = circle_point(self.pair, t);
        let num = self.combo(&self.normalized(p)?, 1.0);
        let den = self.combo(&self.normalized(p.invert())?, -1.0);
        if den.norm() < DENOMINATOR_TOL * num.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::DenominatorVanished(t));
        }
        let ratio = -Complex64::i() * p.power(self.pair.params().ell) * num / den;
        let modulus = ratio.norm();
        if (modulus - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::NonUnimodular { t, modulus });
        }
        Ok(ratio)
    }

    /// `(Theta, Theta~)` at time `t`.
    fn theta(&self, t: f64) -> Result<(Complex64, Complex64)> {
        let p = circle_point(self.pair, t);
        let i = Complex64::i();
        let (cp, sm) = (self.plus_one * self.c, i * self.minus_one * self.s);
        let v = self.normalized(p)?;
        let den = cp * v.plus + sm * v.minus;
        let num = cp * v.minus + sm * v.plus;
        let u = self.normalized(p.invert())?;
        let den_dual = cp * u.plus - sm * u.minus;
        let num_dual = cp * u.minus - sm * u.plus;
        for (n, d) in [(num, den), (num_dual, den_dual)] {
            if d.norm() < DENOMINATOR_TOL * n.norm().max(f64::MIN_POSITIVE) {
                return Err(Error::DenominatorVanished(t));
            }
        }
        Ok((-i * (num / den), i * (num_dual / den_dual)))
    }
}

impl Context<'_> {
    fn evolution_defect(&self, t: f64) -> Result<f64> {
        let (a_plus, b_plus) = self.theta(t + FD_STEP)?;
        let (a_minus, b_minus) = self.theta(t - FD_STEP)?;
        let (a, b) = self.theta(t)?;
        let phi = self.phi_ratio(t)?;
        let da = (a_plus - a_minus) / (2.0 * FD_STEP);
        let db = (b_plus - b_minus) / (2.0 * FD_STEP);
        let gap = (a - b) * 0.5;
        Ok((da + gap / phi).norm().max((db - gap * phi).norm()))
    }
}

/// `Phi(e^{i omega t})` for one `t`.
pub fn phase_ratio(pair: &EigenPair, alpha: Alpha, t: f64) -> Result<Complex64> {
    Context::new(pair, alpha)?.phi_ratio(t)
}

fn principal_step(a: Complex64, b: Complex64) -> f64 {
    (b / a).arg()
}

/// Continuous argument increment from `t0` to `t1`, refining until each
/// principal step is small.
fn unwrap_between(ctx: &Context, t0: f64, f0: Complex64, t1: f64, f1: Complex64, depth: u32) -> Result<f64> {
    let step = principal_step(f0, f1);
    if step.abs() <= MAX_ARG_STEP || depth >= MAX_REFINE_DEPTH {
        return Ok(step);
    }
    let tm = 0.5 * (t0 + t1);
    let fm = ctx.phi_ratio(tm)?;
    Ok(unwrap_between(ctx, t0, f0, tm, fm, depth + 1)? + unwrap_between(ctx, tm, fm, t1, f1, depth + 1)?)
}

/// Continuous `phi(t)` on the grid, anchored at the principal value of `arg Phi(1)`.
pub fn phi_from_eigen(pair: &EigenPair, alpha: Alpha, t_grid: &[f64]) -> Result<Vec<f64>> {
    let ctx = Context::new(pair, alpha)?;
    let f_zero = ctx.phi_ratio(0.0)?;
    let phi_zero = f_zero.arg();
    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&a, &b| t_grid[a].total_cmp(&t_grid[b]));
    let mut out = vec![0.0; t_grid.len()];
    // Walk outward from t = 0 in both directions.
    let split = order.partition_point(|&k| t_grid[k] < 0.0);
    let forward = order[split..].iter();
    let backward = order[..split].iter().rev();
    for walk in [forward.copied().collect::<Vec<_>>(), backward.copied().collect::<Vec<_>>()] {
        let (mut t_prev, mut f_prev, mut phi) = (0.0, f_zero, phi_zero);
        for k in walk {
            let t = t_grid[k];
            let f = ctx.phi_ratio(t)?;
            phi += unwrap_between(&ctx, t_prev, f_prev, t, f, 0)?;
            out[k] = phi;
            (t_prev, f_prev) = (t, f);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaPair {
    pub t: Vec<f64>,
    pub theta: Vec<Complex64>,
    pub theta_dual: Vec<Complex64>,
    /// Largest deviation from `d Theta/dt = -Phi^{-1} (Theta - Theta~) / 2` and
    /// `d Theta~/dt = Phi (Theta - Theta~) / 2`, by centered differences of
    /// step [`FD_STEP`] around each grid point. Report only.
    pub evolution_residual: f64,
}

impl ThetaPair {
    /// `max |Theta~ - conj Theta|`.
    pub fn duality_defect(&self) -> f64 {
        self.theta.iter().zip(&self.theta_dual).map(|(a, b)| (b - a.conj()).norm()).fold(0.0, f64::max)
    }
}

pub fn theta(pair: &EigenPair, alpha: Alpha, t_grid: &[f64]) -> Result<ThetaPair> {
    let ctx = Context::new(pair, alpha)?;
    let mut theta = Vec::with_capacity(t_grid.len());
    let mut theta_dual = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let (a, b) = ctx.theta(t)?;
        theta.push(a);
        theta_dual.push(b);
    }
    let mut evolution_residual: f64 = 0.0;
    for &t in t_grid {
        evolution_residual = evolution_residual.max(ctx.evolution_defect(t)?);
    }
    Ok(ThetaPair { t: t_grid.to_vec(), theta, theta_dual, evolution_residual })
}

/// `(P, Q)` from `P = -log(-Im Theta)`, `Q = Re Theta`.
pub fn recover_pq(pair: &EigenPair, alpha: Alpha, t_grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let ctx = Context::new(pair, alpha)?;
    let mut ps = Vec::with_capacity(t_grid.len());
    let mut qs = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let (th, _) = ctx.theta(t)?;
        let value = -th.im;
        if value <= 0.0 {
            return Err(Error::LogDomain { t, value });
        }
        ps.push(-value.ln());
        qs.push(th.re);
    }
    Ok((ps, qs))
}

/// One row of the inverse map output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseSample {
    pub t: f64,
    pub phi: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub theta_re: f64,
    pub theta_im: f64,
    /// `|Theta~ - conj Theta|`
    pub duality_residual: f64,
    /// `||Phi| - 1|`
    pub unimodularity_residual: f64,
}

pub fn invert_grid(pair: &EigenPair, alpha: Alpha, t_grid: &[f64]) -> Result<Vec<InverseSample>> {
    let ctx = Context::new(pair, alpha)?;
    let phis = phi_from_eigen(pair, alpha, t_grid)?;
    let (ps, qs) = recover_pq(pair, alpha, t_grid)?;
    t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (th, dual) = ctx.theta(t)?;
            Ok(InverseSample {
                t,
                phi: phis[k],
                p: ps[k],
                q: qs[k],
                theta_re: th.re,
                theta_im: th.im,
                duality_residual: (dual - th.conj()).norm(),
                unimodularity_residual: (ctx.phi_ratio(t)?.norm() - 1.0).abs(),
            })
        })
        .collect()
}

/// `n` points spread uniformly over the open interval `(-pi/omega, pi/omega)`.
pub fn period_grid(omega: f64, n: usize) -> Vec<f64> {
    let half = PI / omega;
    (0..n).map(|k| -half + 2.0 * half * (k as f64 + 0.5) / n as f64).collect()
}
