//! Eigenfunctions `E+`, `E-` of the operator `C` restricted to solutions of the
//! Heun equation, i.e. solutions with `C[E] = +E` or `C[E] = -E`.
//!
//! Two independent constructions are provided:
//!
//! * Cauchy data at `z = 1`: `E'(1) = (nu / (2 omega) + mu) E(1)`, integrated
//!   along the unit circle in both directions.
//! * The junction route: from a solution `phi(t)` of the driven junction,
//!   `chi = i phi` and `sigma = P` on the circle, and
//!   `E(z) = 1/2 e^{mu (z + 1/z - 2)/2} z^{-l/2} [c e^{(sigma + chi)(z)/2} + conj(c) e^{(sigma - chi)(1/z)/2}]`
//!   with `c = (1 +- i)/sqrt(2)`.
//!
//! Working with `chi = log Phi` and `sigma = log Psi` turns every square root
//! into a half exponent, so no branch tracking is needed.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::cover::{CoverPath, CoverPoint};
use crate::error::{Error, Result};
use crate::heun::{apply_opc_jet, circle_samples, heun_field, HeunFunction, HeunState, SolutionJet};
use crate::odeint::{integrate_path, PathSolution, Tolerances};
use crate::params::Params;
use crate::rsj::{default_span, solve_rsj, RsjSolution};

/// Relative size of `E(1)` below which a branch is treated as identically zero.
pub const DEGENERATE_THRESHOLD: f64 = 1e-10;
/// `|E(1)|` below which a branch is built but flagged.
pub const NEAR_DEGENERATE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    /// The eigenvalue `nu`.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Cauchy,
    Riccati,
}

fn i_axis(w: Complex64) -> Complex64 {
    Complex64::new(0.0, w.im)
}

/// Integrate a 2-dimensional field through the given `w` vertices, skipping repeats.
fn continue_through<F>(field: F, state: [Complex64; 2], vertices: &[Complex64], tol: &Tolerances) -> Result<[Complex64; 2]>
where
    F: Fn(Complex64, &[Complex64; 2]) -> [Complex64; 2],
{
    let mut pts: Vec<CoverPoint> = Vec::with_capacity(vertices.len());
    for &v in vertices {
        if pts.last().is_none_or(|p| p.w != v) {
            pts.push(CoverPoint::new(v));
        }
    }
    if pts.len() < 2 {
        return Ok(state);
    }
    let path = CoverPath::through(&pts, 2)?;
    Ok(integrate_path(field, state, &path, tol)?.final_state())
}

/// Solution of the Heun equation fixed by its Cauchy data at `z = 1`.
///
/// Stored densely on the arcs `w = 0 -> i pi` and `w = 0 -> -i pi`; other
/// points are reached by integrating on demand along the imaginary axis and
/// then radially, without mutating the stored solution.
#[derive(Debug, Clone)]
pub struct HeunSolution {
    params: Params,
    initial: HeunState,
    upper: PathSolution<2>,
    lower: PathSolution<2>,
    tol: Tolerances,
}

pub fn solve_heun(params: &Params, initial: HeunState, tol: &Tolerances) -> Result<HeunSolution> {
    if !initial.is_finite() {
        return Err(Error::NonFinite { name: "initial state" });
    }
    let field = heun_field(params);
    let y0 = [initial.value, initial.derivative];
    let upper = integrate_path(field, y0, &CoverPath::through(&[CoverPoint::ONE, CoverPoint::MINUS_ONE_CCW], 64)?, tol)?;
    let lower = integrate_path(field, y0, &CoverPath::through(&[CoverPoint::ONE, CoverPoint::MINUS_ONE_CW], 64)?, tol)?;
    Ok(HeunSolution { params: *params, initial, upper, lower, tol: *tol })
}

impl HeunSolution {
    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn initial(&self) -> HeunState {
        self.initial
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    fn arc_state(&self, theta: f64) -> Result<[Complex64; 2]> {
        if theta >= 0.0 {
            self.upper.eval(theta / PI)
        } else {
            self.lower.eval(-theta / PI)
        }
    }
}

impl HeunFunction for HeunSolution {
    fn state(&self, p: CoverPoint) -> Result<HeunState> {
        if !p.is_finite() {
            return Err(Error::NonFinite { name: "cover point" });
        }
        let w = p.w;
        let anchor = Complex64::new(0.0, w.im.clamp(-PI, PI));
        let y = self.arc_state(anchor.im)?;
        let y = continue_through(heun_field(&self.params), y, &[anchor, i_axis(w), w], &self.tol)?;
        Ok(HeunState::new(y[0], y[1]))
    }
}

/// Logarithms of the Riccati pair, `chi = log Phi` and `sigma = log Psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiccatiState {
    pub chi: Complex64,
    pub sigma: Complex64,
}

/// `d(chi, sigma)/dw` for
/// `z chi' = l + mu (z + 1/z) - (e^chi - e^-chi) / (2 i omega)` and
/// `2 i omega z sigma' = e^chi + e^-chi`.
pub fn riccati_field(params: &Params) -> impl Fn(Complex64, &[Complex64; 2]) -> [Complex64; 2] + Copy + Send + Sync {
    let p = *params;
    move |w: Complex64, y: &[Complex64; 2]| {
        let z = w.exp();
        let e = y[0].exp();
        let e_inv = 1.0 / e;
        let two_i_omega = Complex64::new(0.0, 2.0 * p.omega);
        [(z + 1.0 / z) * p.mu + p.ell - (e - e_inv) / two_i_omega, (e + e_inv) / two_i_omega]
    }
}

/// Riccati pair on the cover built from a junction solution on one forcing period.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    params: Params,
    rsj: RsjSolution,
    tol: Tolerances,
}

impl RiccatiSolution {
    pub fn new(params: &Params, phi0: f64, tol: &Tolerances) -> Result<Self> {
        let rsj = solve_rsj(params, phi0, default_span(params), tol)?;
        Ok(Self { params: *params, rsj, tol: *tol })
    }

    pub fn rsj(&self) -> &RsjSolution {
        &self.rsj
    }

    pub fn phi0(&self) -> f64 {
        self.rsj.phi0
    }

    /// `(chi, sigma)` at `p`: read off the junction solution on the circle,
    /// continued through the log-form equations elsewhere.
    pub fn state(&self, p: CoverPoint) -> Result<RiccatiState> {
        if !p.is_finite() {
            return Err(Error::NonFinite { name: "cover point" });
        }
        let w = p.w;
        let theta = w.im.clamp(-PI, PI);
        let [phi, big_p, _] = self.rsj.state(theta / self.params.omega)?;
        let y = [Complex64::new(0.0, phi), Complex64::new(big_p, 0.0)];
        let y = continue_through(riccati_field(&self.params), y, &[Complex64::new(0.0, theta), i_axis(w), w], &self.tol)?;
        Ok(RiccatiState { chi: y[0], sigma: y[1] })
    }

    fn state_with_rates(&self, p: CoverPoint) -> Result<(RiccatiState, [Complex64; 2])> {
        let s = self.state(p)?;
        let rates = riccati_field(&self.params)(p.w, &[s.chi, s.sigma]);
        Ok((s, rates))
    }
}

/// `(E+(1), E-(1)) = (cos(phi0/2 + pi/4), cos(phi0/2 - pi/4))` for the junction route.
pub fn values_at_one_from_phase(phi0: f64) -> (f64, f64) {
    ((0.5 * phi0 + 0.25 * PI).cos(), (0.5 * phi0 - 0.25 * PI).cos())
}

#[derive(Debug, Clone)]
enum Repr {
    Zero,
    Cauchy(Arc<HeunSolution>),
    Riccati { field: Arc<RiccatiSolution>, factorized: bool },
}

#[derive(Debug, Clone)]
pub struct EigenFunction {
    params: Params,
    branch: Branch,
    provenance: Provenance,
    value_at_one: Complex64,
    near_degenerate: bool,
    repr: Repr,
    value_fault: f64,
}

pub fn eigenfunction_cauchy(params: &Params, branch: Branch, value_at_one: Complex64, tol: &Tolerances) -> Result<EigenFunction> {
    if value_at_one == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroInitialValue);
    }
    // Linearity: integrate unit data once and scale on evaluation, so the
    // step sequence does not depend on the normalization.
    let slope = branch.sign() * params.half_inv_omega() + params.mu;
    let sol = solve_heun(params, HeunState::new(Complex64::new(1.0, 0.0), Complex64::new(slope, 0.0)), tol)?;
    Ok(EigenFunction {
        params: *params,
        branch,
        provenance: Provenance::Cauchy,
        value_at_one,
        near_degenerate: value_at_one.norm() < NEAR_DEGENERATE_THRESHOLD,
        repr: Repr::Cauchy(Arc::new(sol)),
        value_fault: 1.0,
    })
}

impl EigenFunction {
    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn value_at_one(&self) -> Complex64 {
        self.value_at_one
    }

    /// The identically-zero marker returned for a degenerate branch.
    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero)
    }

    pub fn is_near_degenerate(&self) -> bool {
        self.near_degenerate
    }

    /// Whether this is the factorized form used when the other branch vanishes.
    pub fn is_factorized(&self) -> bool {
        matches!(self.repr, Repr::Riccati { factorized: true, .. })
    }

    /// Copy whose values are scaled by `factor` while derivatives are left
    /// alone. It no longer satisfies the eigen relation; used to confirm that
    /// the identity checks notice.
    pub fn with_value_fault(&self, factor: f64) -> Self {
        Self { value_fault: factor, ..self.clone() }
    }

    pub fn eval(&self, p: CoverPoint) -> Result<HeunState> {
        let s = match &self.repr {
            Repr::Zero => HeunState::default(),
            Repr::Cauchy(sol) => sol.state(p)?.scale(self.value_at_one),
            Repr::Riccati { field, factorized } => self.eval_riccati(field, *factorized, p)?,
        };
        Ok(HeunState::new(s.value * self.value_fault, s.derivative))
    }

    fn eval_riccati(&self, field: &RiccatiSolution, factorized: bool, p: CoverPoint) -> Result<HeunState> {
        let prm = &self.params;
        let w = p.w;
        let z = p.z();
        let z_inv = 1.0 / z;
        let u = (z + z_inv - 2.0) * (0.5 * prm.mu) - w * (0.5 * prm.ell);
        let du = (z - z_inv) * (0.5 * prm.mu) - 0.5 * prm.ell;
        let s = self.branch.sign();
        let c1 = Complex64::new(FRAC_1_SQRT_2, s * FRAC_1_SQRT_2);
        let c2 = c1.conj();
        let (here, rates_here) = field.state_with_rates(p)?;
        let x = ((here.sigma + here.chi) * 0.5).exp();
        let dx = x * (rates_here[1] + rates_here[0]) * 0.5;
        let pref = u.exp();
        let (value, dvalue_dw) = if factorized {
            (pref * c1 * x, pref * c1 * (x * du + dx))
        } else {
            let (there, rates_there) = field.state_with_rates(p.invert())?;
            let y = ((there.sigma - there.chi) * 0.5).exp();
            let dy = -y * (rates_there[1] - rates_there[0]) * 0.5;
            let bracket = c1 * x + c2 * y;
            (pref * bracket * 0.5, pref * (bracket * du + c1 * dx + c2 * dy) * 0.5)
        };
        Ok(HeunState::new(value, dvalue_dw / z))
    }
}

impl HeunFunction for EigenFunction {
    fn state(&self, p: CoverPoint) -> Result<HeunState> {
        self.eval(p)
    }
}

pub fn eval_eigen(f: &EigenFunction, p: CoverPoint) -> Result<HeunState> {
    f.eval(p)
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub plus: EigenFunction,
    pub minus: EigenFunction,
    pub phi0: Option<f64>,
}

impl EigenPair {
    pub fn params(&self) -> &Params {
        &self.plus.params
    }

    pub fn get(&self, branch: Branch) -> &EigenFunction {
        match branch {
            Branch::Plus => &self.plus,
            Branch::Minus => &self.minus,
        }
    }

    /// The branch stored as the identically-zero marker, if any.
    pub fn degenerate_branch(&self) -> Option<Branch> {
        Branch::BOTH.into_iter().find(|&b| self.get(b).is_zero())
    }

    /// In-band degeneracy report.
    pub fn degeneracy(&self) -> Option<Error> {
        self.degenerate_branch().map(Error::DegenerateBranch)
    }

    pub fn require_nondegenerate(&self) -> Result<()> {
        match self.degenerate_branch() {
            Some(_) => Err(Error::DegeneratePair),
            None => Ok(()),
        }
    }

    /// `E+(1) E-(1)`.
    pub fn product_at_one(&self) -> Complex64 {
        self.plus.value_at_one * self.minus.value_at_one
    }

    pub fn with_branch(&self, branch: Branch, f: EigenFunction) -> Self {
        let mut out = self.clone();
        match branch {
            Branch::Plus => out.plus = f,
            Branch::Minus => out.minus = f,
        }
        out
    }
}

/// Both branches from Cauchy data with the given values at `z = 1`.
pub fn eigenpair_cauchy(params: &Params, plus_at_one: Complex64, minus_at_one: Complex64, tol: &Tolerances) -> Result<EigenPair> {
    Ok(EigenPair {
        plus: eigenfunction_cauchy(params, Branch::Plus, plus_at_one, tol)?,
        minus: eigenfunction_cauchy(params, Branch::Minus, minus_at_one, tol)?,
        phi0: None,
    })
}

pub fn eigenpair_from_rsj(params: &Params, phi0: f64, tol: &Tolerances) -> Result<EigenPair> {
    let field = Arc::new(RiccatiSolution::new(params, phi0, tol)?);
    let (vp, vm) = values_at_one_from_phase(phi0);
    let scale = vp.abs().max(vm.abs());
    let dead = |v: f64| v.abs() < DEGENERATE_THRESHOLD * scale;
    let build = |branch: Branch, v: f64| -> EigenFunction {
        let repr = if dead(v) {
            Repr::Zero
        } else {
            Repr::Riccati { field: Arc::clone(&field), factorized: dead(if branch == Branch::Plus { vm } else { vp }) }
        };
        EigenFunction {
            params: *params,
            branch,
            provenance: Provenance::Riccati,
            value_at_one: if dead(v) { Complex64::new(0.0, 0.0) } else { Complex64::new(v, 0.0) },
            near_degenerate: v.abs() < NEAR_DEGENERATE_THRESHOLD,
            repr,
            value_fault: 1.0,
        }
    };
    Ok(EigenPair { plus: build(Branch::Plus, vp), minus: build(Branch::Minus, vm), phi0: Some(phi0) })
}

/// `1/2 (E + nu C[E])` for a solution `E`: its component in the `nu` branch,
/// rebuilt from Cauchy data at `z = 1`.
pub fn project_branch(solution: &HeunSolution, branch: Branch) -> Result<EigenFunction> {
    let params = *solution.params();
    let jet = SolutionJet { params, solution };
    let image = apply_opc_jet(&params, &jet, CoverPoint::ONE)?;
    let e = solution.initial();
    let nu = branch.sign();
    let value = (e.value + image.value * nu) * 0.5;
    eigenfunction_cauchy(&params, branch, value, solution.tolerances())
}

/// Measured ratio of a junction-built branch to the `phi0 = 0` branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseRatio {
    pub branch: Branch,
    /// `E(1; phi0) / E(1; 0)`.
    pub ratio: f64,
    /// Largest relative departure of `E(z; phi0) / E(z; 0)` from `ratio` over the samples.
    pub spread: f64,
}

/// Ratios of the two branches at `phi0` to those at `phi0 = 0`, sampled on the circle.
/// Branches that vanish at `phi0` report ratio 0.
pub fn phase_ratios(pair: &EigenPair, reference: &EigenPair, n_samples: usize) -> Result<[PhaseRatio; 2]> {
    let measure = |branch: Branch| -> Result<PhaseRatio> {
        let (f, g) = (pair.get(branch), reference.get(branch));
        let ratio = (f.value_at_one() / g.value_at_one()).re;
        let mut spread = 0.0f64;
        for q in circle_samples(n_samples) {
            let (a, b) = (f.eval(q)?.value, g.eval(q)?.value);
            spread = spread.max((a - b * ratio).norm() / b.norm().max(f64::MIN_POSITIVE));
        }
        Ok(PhaseRatio { branch, ratio, spread })
    };
    Ok([measure(Branch::Plus)?, measure(Branch::Minus)?])
}

/// Maximum relative residuals of the eigenfunction identities.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IdentityReport {
    pub samples: usize,
    pub bilinear: Option<f64>,
    pub wronskian: Option<f64>,
    pub eigen_plus: Option<f64>,
    pub eigen_minus: Option<f64>,
    pub conjugation_plus: Option<f64>,
    pub conjugation_minus: Option<f64>,
}

impl IdentityReport {
    pub fn worst(&self) -> f64 {
        [self.bilinear, self.wronskian, self.eigen_plus, self.eigen_minus, self.conjugation_plus, self.conjugation_minus]
            .into_iter()
            .flatten()
            .fold(0.0, f64::max)
    }

    pub fn all_below(&self, tol: f64) -> bool {
        self.worst() < tol
    }
}

/// Off-circle sample points with `|Re w| <= 0.2`.
pub fn off_circle_samples() -> Vec<CoverPoint> {
    [(0.2, 0.7), (-0.2, 0.7), (0.1, -1.9), (-0.1, -1.9), (0.2, 2.8), (-0.15, -2.6), (0.05, 0.0), (-0.2, 1.5)]
        .into_iter()
        .map(|(re, im)| CoverPoint::from_parts(re, im))
        .collect()
}

fn relative(defect: Complex64, terms: &[Complex64]) -> f64 {
    let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        defect.norm()
    } else {
        defect.norm() / scale
    }
}

/// `E'(z) - nu (2 omega)^{-1} z^{-l-1} E(1/z) - mu E(z)`, relative.
pub fn eigen_residual(f: &EigenFunction, p: CoverPoint) -> Result<f64> {
    let prm = f.params;
    let here = f.eval(p)?;
    let there = f.eval(p.invert())?;
    let cross = p.power(-prm.ell - 1.0) * there.value * (f.branch.sign() * prm.half_inv_omega());
    let drift = here.value * prm.mu;
    Ok(relative(here.derivative - cross - drift, &[here.derivative, cross, drift]))
}

/// `conj(E(conj p)) - E(p)`, relative.
pub fn conjugation_residual(f: &EigenFunction, p: CoverPoint) -> Result<f64> {
    let a = f.eval(p)?.value;
    let b = f.eval(p.conj())?.value.conj();
    Ok(relative(b - a, &[a, b]))
}

fn exp_pair_factor(params: &Params, p: CoverPoint) -> Complex64 {
    let z = p.z();
    ((z + 1.0 / z - 2.0) * params.mu).exp()
}

/// Bilinear identity `E+(z) E-(1/z) + E-(z) E+(1/z) = 2 e^{mu (z + 1/z - 2)} E+(1) E-(1)`.
pub fn bilinear_residual(pair: &EigenPair, p: CoverPoint) -> Result<f64> {
    let (pz, pi) = (pair.plus.eval(p)?.value, pair.plus.eval(p.invert())?.value);
    let (mz, mi) = (pair.minus.eval(p)?.value, pair.minus.eval(p.invert())?.value);
    let rhs = exp_pair_factor(pair.params(), p) * pair.product_at_one() * 2.0;
    let (a, b) = (pz * mi, mz * pi);
    Ok(relative(a + b - rhs, &[a, b, rhs]))
}

/// `E+' E- - E+ E-' = omega^{-1} z^{-l-1} e^{mu (z + 1/z - 2)} E+(1) E-(1)`.
pub fn wronskian_residual(pair: &EigenPair, p: CoverPoint) -> Result<f64> {
    let prm = pair.params();
    let e = pair.plus.eval(p)?;
    let f = pair.minus.eval(p)?;
    let rhs = p.power(-prm.ell - 1.0) * exp_pair_factor(prm, p) * pair.product_at_one() / prm.omega;
    let (a, b) = (e.derivative * f.value, e.value * f.derivative);
    Ok(relative(a - b - rhs, &[a, b, rhs]))
}

pub fn check_identities(pair: &EigenPair, n_samples: usize) -> Result<IdentityReport> {
    let mut points = circle_samples(n_samples);
    points.extend(off_circle_samples());
    let max_over = |f: &dyn Fn(CoverPoint) -> Result<f64>| -> Result<f64> { points.iter().try_fold(0.0f64, |acc, &p| Ok(acc.max(f(p)?))) };
    let mut report = IdentityReport { samples: points.len(), ..IdentityReport::default() };
    for branch in Branch::BOTH {
        let f = pair.get(branch);
        if f.is_zero() {
            continue;
        }
        let eigen = max_over(&|p| eigen_residual(f, p))?;
        let conj = max_over(&|p| conjugation_residual(f, p))?;
        match branch {
            Branch::Plus => (report.eigen_plus, report.conjugation_plus) = (Some(eigen), Some(conj)),
            Branch::Minus => (report.eigen_minus, report.conjugation_minus) = (Some(eigen), Some(conj)),
        }
    }
    if pair.degenerate_branch().is_none() {
        report.bilinear = Some(max_over(&|p| bilinear_residual(pair, p))?);
        report.wronskian = Some(max_over(&|p| wronskian_residual(pair, p))?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heun::{apply_opc, involutivity_residual};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn generic() -> Params {
        Params::new(2.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn branch_basics() {
        assert_eq!(Branch::Plus.sign(), 1.0);
        assert_eq!(Branch::Minus.other(), Branch::Plus);
        assert_eq!(Branch::Minus.to_string(), "minus");
        assert_eq!(Error::DegenerateBranch(Branch::Plus).to_string(), "plus branch is identically zero");
    }

    #[test]
    fn cauchy_anchor_and_eigen_relation() {
        let p = generic();
        let tol = Tolerances::default();
        for b in Branch::BOTH {
            let f = eigenfunction_cauchy(&p, b, c(1.0), &tol).unwrap();
            let s = f.eval(CoverPoint::ONE).unwrap();
            assert_eq!(s.value, c(1.0));
            assert_eq!(s.derivative, c(b.sign() * p.half_inv_omega() + p.mu));
            for q in circle_samples(32) {
                assert!(eigen_residual(&f, q).unwrap() < 1e-7);
                let image = apply_opc(&p, &f, q).unwrap();
                let e = f.eval(q).unwrap().value;
                assert!((image - e * b.sign()).norm() < 1e-7 * (1.0 + e.norm()));
            }
            let jet = SolutionJet { params: p, solution: &f };
            assert!(involutivity_residual(&p, &jet, &circle_samples(32)).unwrap() < 1e-7);
        }
        assert_eq!(eigenfunction_cauchy(&p, Branch::Plus, c(0.0), &tol).unwrap_err(), Error::ZeroInitialValue);
    }

    #[test]
    fn sheets_differ_at_minus_one() {
        let p = generic();
        let f = eigenfunction_cauchy(&p, Branch::Plus, c(1.0), &Tolerances::default()).unwrap();
        let a = f.eval(CoverPoint::MINUS_ONE_CCW).unwrap().value;
        let b = f.eval(CoverPoint::MINUS_ONE_CW).unwrap().value;
        assert!((a - b).norm() > 1e-3);
        // Self-conjugation relates the two sheets.
        assert!((a - b.conj()).norm() < 1e-8 * a.norm());
    }

    #[test]
    fn phase_ratio_is_a_constant_factor() {
        // Each branch is one-dimensional, so changing phi0 only rescales it.
        let p = generic();
        let tol = crate::rsj::default_tolerances();
        let reference = eigenpair_from_rsj(&p, 0.0, &tol).unwrap();
        for phi0 in [0.0, 0.8, -2.1, 3.0] {
            let pair = eigenpair_from_rsj(&p, phi0, &tol).unwrap();
            let [plus, minus] = phase_ratios(&pair, &reference, 16).unwrap();
            assert!((plus.ratio - 2f64.sqrt() * (phi0 / 2.0 + PI / 4.0).cos()).abs() < 1e-14);
            assert!((minus.ratio - 2f64.sqrt() * (phi0 / 2.0 - PI / 4.0).cos()).abs() < 1e-14);
            assert!(plus.spread < 1e-8 && minus.spread < 1e-8, "{plus:?} {minus:?}");
        }
    }

    #[test]
    fn scale_equivariance() {
        let p = Params::new(1.0, 0.7, 1.3).unwrap();
        let tol = Tolerances::default();
        let k = Complex64::new(-0.4, 2.5);
        let f = eigenfunction_cauchy(&p, Branch::Minus, c(1.0), &tol).unwrap();
        let g = eigenfunction_cauchy(&p, Branch::Minus, k, &tol).unwrap();
        for q in circle_samples(16) {
            let (a, b) = (f.eval(q).unwrap().value * k, g.eval(q).unwrap().value);
            assert!((a - b).norm() <= 1e-12 * b.norm(), "{}", (a - b).norm() / b.norm());
        }
    }

    #[test]
    fn wrong_eigenvalue_breaks_relation() {
        let p = generic();
        let tol = Tolerances::default();
        for nu in [0.5, -0.3, 2.0, 0.0] {
            let slope = nu * p.half_inv_omega() + p.mu;
            let sol = solve_heun(&p, HeunState::new(c(1.0), c(slope)), &tol).unwrap();
            let worst = circle_samples(32)
                .into_iter()
                .map(|q| {
                    let here = sol.state(q).unwrap();
                    let there = sol.state(q.invert()).unwrap();
                    let cross = q.power(-p.ell - 1.0) * there.value * (nu * p.half_inv_omega());
                    relative(here.derivative - cross - here.value * p.mu, &[here.derivative, cross, here.value * p.mu])
                })
                .fold(0.0, f64::max);
            assert!(worst > 1e-2, "nu = {nu}: {worst}");
        }
    }

    #[test]
    fn junction_values_at_one() {
        let p = generic();
        let pair = eigenpair_from_rsj(&p, 0.0, &Tolerances::default()).unwrap();
        let h = FRAC_1_SQRT_2;
        for b in Branch::BOTH {
            let s = pair.get(b).eval(CoverPoint::ONE).unwrap();
            assert!((s.value - h).norm() < 1e-15);
            let expected = s.value * (b.sign() * p.half_inv_omega() + p.mu);
            assert!((s.derivative - expected).norm() < 1e-12);
        }
        // E+-(1) = -+ sin((phi0 -+ pi/2) / 2)
        for phi0 in [-2.0, 0.3, 1.0, 4.0] {
            let (vp, vm) = values_at_one_from_phase(phi0);
            assert!((vp + (0.5 * (phi0 - 0.5 * PI)).sin()).abs() < 1e-15);
            assert!((vm - (0.5 * (phi0 + 0.5 * PI)).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn riccati_log_form_reproduces_junction() {
        let p = Params::new(1.5, 0.8, 0.9).unwrap();
        let tol = Tolerances::default();
        let ric = RiccatiSolution::new(&p, 0.6, &tol).unwrap();
        let y = continue_through(riccati_field(&p), [Complex64::new(0.0, 0.6), c(0.0)], &[Complex64::new(0.0, 0.0), Complex64::new(0.0, 2.0)], &tol)
            .unwrap();
        let s = ric.state(CoverPoint::on_circle(2.0)).unwrap();
        assert!((y[0] - s.chi).norm() < 1e-8 && (y[1] - s.sigma).norm() < 1e-8);
        for q in circle_samples(16) {
            let s = ric.state(q).unwrap();
            assert!(s.chi.re.abs() < 1e-8 && s.sigma.im.abs() < 1e-8);
            assert!((s.chi.exp() * s.chi.exp().conj() - 1.0).norm() < 1e-8);
        }
    }

    #[test]
    fn routes_agree() {
        let p = generic();
        let tol = Tolerances::default();
        let phi0 = 0.9;
        let pair = eigenpair_from_rsj(&p, phi0, &tol).unwrap();
        let (vp, vm) = values_at_one_from_phase(phi0);
        let cp = eigenpair_cauchy(&p, c(vp), c(vm), &tol).unwrap();
        for b in Branch::BOTH {
            for q in circle_samples(32) {
                let a = pair.get(b).eval(q).unwrap();
                let r = cp.get(b).eval(q).unwrap();
                assert!((a.value - r.value).norm() < 1e-6 * r.value.norm());
                assert!((a.derivative - r.derivative).norm() < 1e-6 * r.derivative.norm());
            }
        }
    }

    #[test]
    fn identities_generic() {
        let p = generic();
        let pair = eigenpair_from_rsj(&p, 0.0, &Tolerances::default()).unwrap();
        let report = check_identities(&pair, 32).unwrap();
        assert_eq!(report.samples, 40);
        assert!(report.all_below(1e-7), "{report:?}");
        assert_eq!(bilinear_residual(&pair, CoverPoint::ONE).unwrap(), 0.0);
        let w1 = wronskian_residual(&pair, CoverPoint::ONE).unwrap();
        assert!(w1 < 1e-14);

        let faulty = pair.with_branch(Branch::Minus, pair.minus.with_value_fault(1.0 + 1e-3));
        let report = check_identities(&faulty, 32).unwrap();
        assert!(report.eigen_minus.unwrap() > 1e-4, "{report:?}");
    }

    #[test]
    fn degenerate_phase() {
        let p = generic();
        let pair = eigenpair_from_rsj(&p, 0.5 * PI, &Tolerances::default()).unwrap();
        assert!(pair.plus.is_zero());
        assert!(pair.minus.is_factorized());
        assert_eq!(pair.degeneracy(), Some(Error::DegenerateBranch(Branch::Plus)));
        assert_eq!(pair.require_nondegenerate(), Err(Error::DegeneratePair));
        assert_eq!(pair.plus.eval(CoverPoint::on_circle(1.0)).unwrap(), HeunState::default());
        assert!((pair.minus.value_at_one() - 1.0).norm() < 1e-15);
        let report = check_identities(&pair, 32).unwrap();
        assert!(report.bilinear.is_none() && report.eigen_plus.is_none());
        assert!(report.eigen_minus.unwrap() < 1e-7, "{report:?}");

        let pair = eigenpair_from_rsj(&p, -0.5 * PI, &Tolerances::default()).unwrap();
        assert!(pair.minus.is_zero() && pair.plus.is_factorized());
        assert!(check_identities(&pair, 16).unwrap().eigen_plus.unwrap() < 1e-7);
    }

    #[test]
    fn near_degenerate_flagged() {
        let p = generic();
        let pair = eigenpair_from_rsj(&p, 0.5 * PI - 1e-7, &Tolerances::default()).unwrap();
        assert!(!pair.plus.is_zero());
        assert!(pair.plus.is_near_degenerate());
        assert!(!pair.minus.is_near_degenerate());
    }

    #[test]
    fn projection_recovers_branches() {
        let p = Params::new(1.0, 0.6, 0.8).unwrap();
        let tol = Tolerances::default();
        let sol = solve_heun(&p, HeunState::new(c(1.0), c(0.2)), &tol).unwrap();
        let plus = project_branch(&sol, Branch::Plus).unwrap();
        let minus = project_branch(&sol, Branch::Minus).unwrap();
        for q in circle_samples(16) {
            let e = sol.state(q).unwrap();
            let sum = plus.eval(q).unwrap().value + minus.eval(q).unwrap().value;
            assert!((sum - e.value).norm() < 1e-8 * (1.0 + e.value.norm()));
            assert!(eigen_residual(&plus, q).unwrap() < 1e-7);
        }
    }
}
