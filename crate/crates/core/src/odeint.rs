//! Adaptive Dormand-Prince 5(4) integration with dense output.
//!
//! States are fixed-size arrays of real or complex components. Real intervals
//! may run in either direction. Paths on the cover are integrated segment by
//! segment with each segment parameterized affinely by `s` in `[k, k+1]`, so a
//! single [`DenseSolution`] covers the whole path on `[0, n_segments]`.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::cover::CoverPath;
use crate::error::{Error, Result};

pub trait Component: Copy + Send + Sync + Debug + Default + PartialEq + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn modulus(self) -> f64;

    fn finite(self) -> bool;
}

impl Component for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }

    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Component for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }

    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

pub type State<T, const N: usize> = [T; N];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-12, max_steps: 10_000_000 }
    }
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Result<Self> {
        let t = Self { rel, abs, ..Self::default() };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x < 1.0;
        if ok(self.rel) && ok(self.abs) {
            Ok(())
        } else {
            Err(Error::InvalidTolerance { rel: self.rel, abs: self.abs })
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { rel: self.rel * factor, abs: self.abs * factor, ..*self }
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const UNDERFLOW_RATIO: f64 = 1e-14;

#[inline]
fn combine<T: Component, const N: usize>(y: &State<T, N>, h: f64, terms: &[(f64, &State<T, N>)]) -> State<T, N> {
    let mut out = *y;
    for i in 0..N {
        let mut acc = T::default();
        for (c, k) in terms {
            if *c != 0.0 {
                acc = acc + k[i] * *c;
            }
        }
        out[i] = out[i] + acc * h;
    }
    out
}

/// One accepted step: its start parameter, signed length and the five
/// continuous-extension coefficient vectors.
#[derive(Debug, Clone)]
struct Step<T, const N: usize> {
    s0: f64,
    h: f64,
    coeffs: [State<T, N>; 5],
}

impl<T: Component, const N: usize> Step<T, N> {
    fn eval(&self, s: f64) -> State<T, N> {
        let th = (s - self.s0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        let mut out = *r1;
        for i in 0..N {
            out[i] = r1[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * th1) * th) * th1) * th;
        }
        out
    }

    fn eval_derivative(&self, s: f64) -> State<T, N> {
        let th = (s - self.s0) / self.h;
        let th1 = 1.0 - th;
        let [_, r2, r3, r4, r5] = &self.coeffs;
        let mut out = [T::default(); N];
        for i in 0..N {
            let g = r4[i] + r5[i] * th1;
            let dg = r5[i] * -1.0;
            let f = r3[i] + g * th;
            let df = g + dg * th;
            let e = r2[i] + f * th1;
            let de = df * th1 - f;
            out[i] = (e + de * th) * (1.0 / self.h);
        }
        out
    }

    fn end_state(&self) -> State<T, N> {
        let mut out = self.coeffs[0];
        for i in 0..N {
            out[i] = out[i] + self.coeffs[1][i];
        }
        out
    }
}

/// Piecewise quartic interpolant of an accepted integration.
#[derive(Debug, Clone)]
pub struct DenseSolution<T, const N: usize> {
    start: f64,
    end: f64,
    initial: State<T, N>,
    steps: Vec<Step<T, N>>,
    pub accepted: usize,
    pub rejected: usize,
    pub tolerances: Tolerances,
}

impl<T: Component, const N: usize> DenseSolution<T, N> {
    fn empty(start: f64, initial: State<T, N>, tolerances: Tolerances) -> Self {
        Self { start, end: start, initial, steps: Vec::new(), accepted: 0, rejected: 0, tolerances }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn initial_state(&self) -> State<T, N> {
        self.initial
    }

    pub fn final_state(&self) -> State<T, N> {
        self.steps.last().map(Step::end_state).unwrap_or(self.initial)
    }

    /// Parameter values at the step boundaries, in integration order.
    pub fn breakpoints(&self) -> Vec<f64> {
        std::iter::once(self.start).chain(self.steps.iter().map(|s| s.s0 + s.h)).collect()
    }

    fn forward(&self) -> bool {
        self.end >= self.start
    }

    pub fn contains(&self, s: f64) -> bool {
        let (lo, hi) = self.bounds();
        s >= lo && s <= hi
    }

    pub fn bounds(&self) -> (f64, f64) {
        if self.forward() {
            (self.start, self.end)
        } else {
            (self.end, self.start)
        }
    }

    /// Pull `s` onto the domain when it misses an endpoint by rounding only.
    fn snap(&self, s: f64) -> Result<f64> {
        let (lo, hi) = self.bounds();
        let slack = 8.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
        if s < lo - slack || s > hi + slack || s.is_nan() {
            return Err(Error::OutOfDomain { s, lo, hi });
        }
        Ok(s.clamp(lo, hi))
    }

    fn locate(&self, s: f64) -> Result<Option<&Step<T, N>>> {
        if !self.contains(s) {
            let (lo, hi) = self.bounds();
            return Err(Error::OutOfDomain { s, lo, hi });
        }
        if s == self.start || self.steps.is_empty() {
            return Ok(None);
        }
        let sign = if self.forward() { 1.0 } else { -1.0 };
        let key = sign * s;
        let idx = self.steps.partition_point(|st| sign * (st.s0 + st.h) < key);
        Ok(Some(&self.steps[idx.min(self.steps.len() - 1)]))
    }

    pub fn eval(&self, s: f64) -> Result<State<T, N>> {
        let s = self.snap(s)?;
        if s == self.end {
            return Ok(self.final_state());
        }
        Ok(match self.locate(s)? {
            None => self.initial,
            Some(step) => step.eval(s),
        })
    }

    /// Derivative of the interpolant with respect to `s`.
    pub fn eval_derivative(&self, s: f64) -> Result<State<T, N>> {
        let s = self.snap(s)?;
        let step = match self.locate(s)? {
            Some(step) => step,
            None => self.steps.first().ok_or(Error::OutOfDomain { s, lo: self.start, hi: self.end })?,
        };
        Ok(step.eval_derivative(s))
    }

    fn push(&mut self, step: Step<T, N>) {
        self.end = step.s0 + step.h;
        self.steps.push(step);
    }
}

pub fn eval_dense<T: Component, const N: usize>(sol: &DenseSolution<T, N>, s: f64) -> Result<State<T, N>> {
    sol.eval(s)
}

fn error_ratio<T: Component, const N: usize>(err: &State<T, N>, y0: &State<T, N>, y1: &State<T, N>, tol: &Tolerances) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..N {
        let scale = tol.abs + tol.rel * y0[i].modulus().max(y1[i].modulus());
        let r = err[i].modulus() / scale;
        if !r.is_finite() {
            return f64::INFINITY;
        }
        worst = worst.max(r);
    }
    worst
}

fn initial_step<T: Component, const N: usize, F>(f: &F, s0: f64, y0: &State<T, N>, k1: &State<T, N>, span: f64, tol: &Tolerances) -> f64
where
    F: Fn(f64, &State<T, N>) -> State<T, N>,
{
    let dir = span.signum();
    let norm = |v: &State<T, N>| {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = tol.abs + tol.rel * y0[i].modulus();
            acc += (v[i].modulus() / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(k1);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span.abs());
    let y1 = combine(y0, dir * h0, &[(1.0, k1)]);
    let k2 = f(s0 + dir * h0, &y1);
    let mut diff = *k1;
    for i in 0..N {
        diff[i] = k2[i] - k1[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span.abs()).max(span.abs() * 1e-10)
}

fn run<T: Component, const N: usize, F>(f: &F, sol: &mut DenseSolution<T, N>, y0: State<T, N>, s1: f64) -> Result<()>
where
    F: Fn(f64, &State<T, N>) -> State<T, N>,
{
    let tol = sol.tolerances;
    let s0 = sol.end;
    let span = s1 - s0;
    if span == 0.0 {
        return Ok(());
    }
    let dir = span.signum();
    let min_h = UNDERFLOW_RATIO * span.abs();
    let mut s = s0;
    let mut y = y0;
    let mut k1 = f(s, &y);
    let mut h = initial_step(f, s, &y, &k1, span, &tol);
    let mut attempts = 0usize;
    let mut last_rejected = false;

    loop {
        let remaining = (s1 - s) * dir;
        if remaining <= 0.0 {
            break;
        }
        let mut last = false;
        if h >= remaining || remaining - h <= remaining * 1e-12 {
            h = remaining;
            last = true;
        }
        if h < min_h && !last {
            return Err(Error::StepSizeUnderflow { s, h });
        }
        attempts += 1;
        if attempts > tol.max_steps {
            return Err(Error::MaxStepsExceeded(tol.max_steps));
        }

        let hs = dir * h;
        let k2 = f(s + C2 * hs, &combine(&y, hs, &[(A21, &k1)]));
        let k3 = f(s + C3 * hs, &combine(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(s + C4 * hs, &combine(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(s + C5 * hs, &combine(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(s + hs, &combine(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let s_new = if last { s1 } else { s + hs };
        let y_new = combine(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(s_new, &y_new);
        let mut err = [T::default(); N];
        for i in 0..N {
            err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * hs;
        }
        let ratio = error_ratio(&err, &y, &y_new, &tol);
        let finite = y_new.iter().all(|c| c.finite()) && k7.iter().all(|c| c.finite());

        if finite && ratio <= 1.0 {
            let mut ydiff = y_new;
            let mut bspl = y_new;
            let mut r4 = y_new;
            let mut r5 = y_new;
            for i in 0..N {
                ydiff[i] = y_new[i] - y[i];
                bspl[i] = k1[i] * hs - ydiff[i];
                r4[i] = ydiff[i] - k7[i] * hs - bspl[i];
                r5[i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * hs;
            }
            sol.push(Step { s0: s, h: s_new - s, coeffs: [y, ydiff, bspl, r4, r5] });
            sol.accepted += 1;
            s = s_new;
            y = y_new;
            k1 = k7;
            if last {
                break;
            }
            let mut fac = if ratio == 0.0 { FAC_MAX } else { SAFETY * ratio.powf(-0.2) };
            fac = fac.clamp(FAC_MIN, if last_rejected { 1.0 } else { FAC_MAX });
            h *= fac;
            last_rejected = false;
        } else {
            sol.rejected += 1;
            let fac = if finite { (SAFETY * ratio.powf(-0.2)).clamp(FAC_MIN, 1.0) } else { FAC_MIN };
            h *= fac;
            last_rejected = true;
            if h < min_h {
                return Err(Error::StepSizeUnderflow { s, h });
            }
        }
    }
    // Pin the final boundary exactly.
    sol.end = s1;
    if let Some(step) = sol.steps.last_mut() {
        step.h = s1 - step.s0;
    }
    Ok(())
}

/// Integrate `dy/ds = f(s, y)` from `s0` to `s1` (either direction).
pub fn integrate<T: Component, const N: usize, F>(f: F, initial_state: State<T, N>, s0: f64, s1: f64, tol: &Tolerances) -> Result<DenseSolution<T, N>>
where
    F: Fn(f64, &State<T, N>) -> State<T, N>,
{
    tol.validate()?;
    if !(s0.is_finite() && s1.is_finite()) {
        return Err(Error::InvalidPath(format!("non-finite interval [{s0}, {s1}]")));
    }
    let mut sol = DenseSolution::empty(s0, initial_state, *tol);
    run(&f, &mut sol, initial_state, s1)?;
    Ok(sol)
}

/// Dense solution of a field integrated along a path on the cover.
#[derive(Debug, Clone)]
pub struct PathSolution<const N: usize> {
    pub path: CoverPath,
    pub dense: DenseSolution<Complex64, N>,
}

impl<const N: usize> PathSolution<N> {
    /// State at global path parameter `s` in `[0, n_segments]`.
    pub fn eval(&self, s: f64) -> Result<State<Complex64, N>> {
        self.dense.eval(s)
    }

    pub fn final_state(&self) -> State<Complex64, N> {
        self.dense.final_state()
    }
}

/// Integrate `dy/dw = field(w, y)` along a path of straight `w` segments.
pub fn integrate_path<const N: usize, F>(field: F, initial_state: State<Complex64, N>, path: &CoverPath, tol: &Tolerances) -> Result<PathSolution<N>>
where
    F: Fn(Complex64, &State<Complex64, N>) -> State<Complex64, N>,
{
    tol.validate()?;
    let mut sol = DenseSolution::empty(0.0, initial_state, *tol);
    let mut y = initial_state;
    for (k, seg) in path.segments().iter().enumerate() {
        let base = k as f64;
        let delta = seg.delta();
        let start = seg.start;
        let rhs = |s: f64, y: &State<Complex64, N>| {
            let mut d = field(start + delta * (s - base), y);
            for c in d.iter_mut() {
                *c *= delta;
            }
            d
        };
        run(&rhs, &mut sol, y, base + 1.0)?;
        y = sol.final_state();
    }
    Ok(PathSolution { path: path.clone(), dense: sol })
}
