//! The special double confluent Heun equation
//! `z^2 E'' + ((l+1) z + mu (1 - z^2)) E' + (-mu (l+1) z + lambda) E = 0`,
//! the operator `C[E](z) = 2 omega z^{-l-1} (E'(1/z) - mu E(1/z))` and the
//! Laurent recurrence expressing higher derivatives of its eigenfunctions.
//!
//! Everything is evaluated on the universal cover, so `E(1/z)` means `E` at
//! the inverted cover point and every power of `z` is single valued.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::cover::CoverPoint;
use crate::error::Result;
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct HeunState {
    pub value: Complex64,
    /// `dE/dz`
    pub derivative: Complex64,
}

impl HeunState {
    pub fn new(value: Complex64, derivative: Complex64) -> Self {
        Self { value, derivative }
    }

    pub fn is_finite(&self) -> bool {
        self.value.re.is_finite() && self.value.im.is_finite() && self.derivative.re.is_finite() && self.derivative.im.is_finite()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.value * c, self.derivative * c)
    }
}

/// Value and first two `z`-derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
}

/// A function on the cover that can report its value and derivative.
pub trait HeunFunction {
    fn state(&self, p: CoverPoint) -> Result<HeunState>;
}

/// A function on the cover with a second derivative available.
pub trait CoverFunction {
    fn jet(&self, p: CoverPoint) -> Result<Jet>;
}

impl<F: Fn(CoverPoint) -> Jet> CoverFunction for F {
    fn jet(&self, p: CoverPoint) -> Result<Jet> {
        Ok(self(p))
    }
}

/// Coefficients `(z^2, (l+1) z + mu (1 - z^2), -mu (l+1) z + lambda)` at `z`.
fn coefficients(params: &Params, z: Complex64) -> (Complex64, Complex64, Complex64) {
    let l1 = params.ell + 1.0;
    (z * z, z * l1 + (1.0 - z * z) * params.mu, -z * (params.mu * l1) + params.lambda)
}

/// `E''` at `z` from the equation, given `E` and `E'`.
pub fn second_derivative(params: &Params, z: Complex64, value: Complex64, d1: Complex64) -> Complex64 {
    let (a, b, c) = coefficients(params, z);
    -(b * d1 + c * value) / a
}

/// Left-hand side of the equation for an arbitrary jet.
pub fn equation_lhs(params: &Params, z: Complex64, jet: &Jet) -> Complex64 {
    let (a, b, c) = coefficients(params, z);
    a * jet.d2 + b * jet.d1 + c * jet.value
}

/// First-order system for `(E, E')` in the log coordinate `w`:
/// `dE/dw = z E'`, `dE'/dw = z E''`.
pub fn heun_field(params: &Params) -> impl Fn(Complex64, &[Complex64; 2]) -> [Complex64; 2] + Copy + Send + Sync {
    let p = *params;
    move |w: Complex64, y: &[Complex64; 2]| {
        let z = w.exp();
        [z * y[1], z * second_derivative(&p, z, y[0], y[1])]
    }
}

/// Lifts a solution of the equation to a [`CoverFunction`], taking `E''` from the equation.
pub struct SolutionJet<'a, F: ?Sized> {
    pub params: Params,
    pub solution: &'a F,
}

impl<F: HeunFunction + ?Sized> CoverFunction for SolutionJet<'_, F> {
    fn jet(&self, p: CoverPoint) -> Result<Jet> {
        let s = self.solution.state(p)?;
        Ok(Jet { value: s.value, d1: s.derivative, d2: second_derivative(&self.params, p.z(), s.value, s.derivative) })
    }
}

/// `C[f]` at `p`.
pub fn apply_opc<F: HeunFunction + ?Sized>(params: &Params, f: &F, p: CoverPoint) -> Result<Complex64> {
    let q = p.invert();
    let s = f.state(q)?;
    Ok(p.power(-params.ell - 1.0) * (s.derivative - s.value * params.mu) * (2.0 * params.omega))
}

/// `C[f]` and its `z`-derivative at `p`, from the jet of `f` at `1/p`.
pub fn apply_opc_jet<F: CoverFunction + ?Sized>(params: &Params, f: &F, p: CoverPoint) -> Result<HeunState> {
    let j = f.jet(p.invert())?;
    let two_omega = 2.0 * params.omega;
    let l1 = params.ell + 1.0;
    let inner = j.d1 - j.value * params.mu;
    let value = p.power(-l1) * inner * two_omega;
    let derivative = (p.power(-l1 - 1.0) * inner * (-l1) - p.power(-l1 - 2.0) * (j.d2 - j.d1 * params.mu)) * two_omega;
    Ok(HeunState::new(value, derivative))
}

/// `C[C[f]]` at `p` without numerical differentiation.
pub fn apply_opc_twice<F: CoverFunction + ?Sized>(params: &Params, f: &F, p: CoverPoint) -> Result<Complex64> {
    let inner = apply_opc_jet(params, f, p.invert())?;
    Ok(p.power(-params.ell - 1.0) * (inner.derivative - inner.value * params.mu) * (2.0 * params.omega))
}

/// `C[C[f]] - f + (2 omega)^2 lhs[f]`, which vanishes identically for every `f`.
pub fn involution_defect<F: CoverFunction + ?Sized>(params: &Params, f: &F, p: CoverPoint) -> Result<Complex64> {
    let jet = f.jet(p)?;
    let twice = apply_opc_twice(params, f, p)?;
    let four_omega2 = 4.0 * params.omega * params.omega;
    Ok(twice - jet.value + equation_lhs(params, p.z(), &jet) * four_omega2)
}

/// `max |C[C[E]](p) - E(p)| / (1 + |E(p)|)` over the samples.
pub fn involutivity_residual<F: CoverFunction + ?Sized>(params: &Params, f: &F, samples: &[CoverPoint]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &p in samples {
        let e = f.jet(p)?.value;
        let twice = apply_opc_twice(params, f, p)?;
        worst = worst.max((twice - e).norm() / (1.0 + e.norm()));
    }
    Ok(worst)
}

/// `n` points `exp(i theta)` with `theta` spread uniformly over `(-pi, pi)`.
pub fn circle_samples(n: usize) -> Vec<CoverPoint> {
    use std::f64::consts::PI;
    (0..n).map(|k| CoverPoint::on_circle(-PI + 2.0 * PI * (k as f64 + 0.5) / n as f64)).collect()
}

/// Finite Laurent sum `sum_m c_m z^{m + j l}` with a fixed multiple `j` of `l`.
///
/// The `l`-offset keeps non-integer orders representable: the recurrence only
/// ever produces exponents that are integers or integers minus `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPoly {
    ell: f64,
    ell_multiple: i32,
    terms: BTreeMap<i32, Complex64>,
}

impl LaurentPoly {
    pub fn zero(ell: f64, ell_multiple: i32) -> Self {
        Self { ell, ell_multiple, terms: BTreeMap::new() }
    }

    pub fn monomial(ell: f64, ell_multiple: i32, m: i32, c: Complex64) -> Self {
        let mut p = Self::zero(ell, ell_multiple);
        p.add_term(m, c);
        p
    }

    fn add_term(&mut self, m: i32, c: Complex64) {
        let slot = self.terms.entry(m).or_default();
        *slot += c;
        if *slot == Complex64::new(0.0, 0.0) {
            self.terms.remove(&m);
        }
    }

    pub fn ell_multiple(&self) -> i32 {
        self.ell_multiple
    }

    pub fn exponent(&self, m: i32) -> f64 {
        m as f64 + self.ell_multiple as f64 * self.ell
    }

    /// `(m, coefficient)` pairs, exponent `m + j l`.
    pub fn terms(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: i32) -> Complex64 {
        self.terms.get(&m).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, p: CoverPoint) -> Complex64 {
        self.terms.iter().map(|(&m, &c)| c * p.power(self.exponent(m))).sum()
    }

    pub fn derivative(&self) -> Self {
        let mut out = Self::zero(self.ell, self.ell_multiple);
        for (&m, &c) in &self.terms {
            let e = self.exponent(m);
            if e != 0.0 {
                out.add_term(m - 1, c * e);
            }
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.ell, self.ell_multiple);
        for (&m, &v) in &self.terms {
            out.add_term(m, v * c);
        }
        out
    }

    /// Multiply by `c z^{m + j l}`.
    pub fn times_monomial(&self, c: Complex64, m: i32, j: i32) -> Self {
        let mut out = Self::zero(self.ell, self.ell_multiple + j);
        for (&k, &v) in &self.terms {
            out.add_term(k + m, v * c);
        }
        out
    }

    /// Sum of two polynomials sharing the same `l`-multiple.
    pub fn plus(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        assert_eq!(self.ell_multiple, other.ell_multiple, "mismatched exponent lattices");
        let mut out = self.clone();
        for (&m, &c) in &other.terms {
            out.add_term(m, c);
        }
        out
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(&m, c)| match self.ell_multiple {
                0 => format!("({c}) z^{m}"),
                j => format!("({c}) z^({m}{j:+}l)"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl CoverFunction for LaurentPoly {
    fn jet(&self, p: CoverPoint) -> Result<Jet> {
        let d1 = self.derivative();
        let d2 = d1.derivative();
        Ok(Jet { value: self.eval(p), d1: d1.eval(p), d2: d2.eval(p) })
    }
}

/// `(a_k, b_k)` with `d^k E/dz^k = a_k(z) E(z) + b_k(z) E(1/z)` for an
/// eigenfunction with eigenvalue `sign`.
pub fn derivative_coeffs(params: &Params, sign: f64, k: usize) -> (LaurentPoly, LaurentPoly) {
    assert!(k >= 1, "derivative order starts at 1");
    let ell = params.ell;
    let mu = Complex64::new(params.mu, 0.0);
    let g = Complex64::new(sign * params.half_inv_omega(), 0.0);
    let mut a = LaurentPoly::monomial(ell, 0, 0, mu);
    let mut b = LaurentPoly::monomial(ell, -1, -1, g);
    for _ in 1..k {
        let a_next = a.scale(mu).plus(&b.times_monomial(-g, -1, 1)).plus(&a.derivative());
        let b_next = a.times_monomial(g, -1, -1).plus(&b.times_monomial(-mu, -2, 0)).plus(&b.derivative());
        a = a_next;
        b = b_next;
    }
    (a, b)
}
