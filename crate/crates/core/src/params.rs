//! Constant parameters of the Heun equation and of the driven junction.
//!
//! The Heun side is parameterized by `(ell, mu, lambda)`; the operator and the
//! junction side use `(ell, mu, omega)`. The two are tied by
//! `4 omega^2 (lambda + mu^2) = 1`, and the junction drive is `A = 2 omega mu`,
//! `B = omega ell`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INTEGRALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub ell: f64,
    pub mu: f64,
    pub omega: f64,
    pub lambda: f64,
    pub bias_a: f64,
    pub bias_b: f64,
    pub ell_is_integer: bool,
}

fn finite(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { name })
    }
}

impl Params {
    pub fn new(ell: f64, mu: f64, omega: f64) -> Result<Self> {
        finite("ell", ell)?;
        finite("mu", mu)?;
        finite("omega", omega)?;
        if mu == 0.0 {
            return Err(Error::ZeroMu);
        }
        if omega <= 0.0 {
            return Err(Error::NonPositiveOmega(omega));
        }
        let two_omega = 2.0 * omega;
        Ok(Self {
            ell,
            mu,
            omega,
            lambda: 1.0 / (two_omega * two_omega) - mu * mu,
            bias_a: two_omega * mu,
            bias_b: omega * ell,
            ell_is_integer: (ell - ell.round()).abs() < INTEGRALITY_TOL,
        })
    }

    /// Parameters from the Heun-side triple, taking the positive root for omega.
    pub fn from_heun(ell: f64, mu: f64, lambda: f64) -> Result<Self> {
        finite("lambda", lambda)?;
        let s = lambda + mu * mu;
        if !(s > 0.0) {
            return Err(Error::DegenerateScaling(s));
        }
        Self::new(ell, mu, 0.5 / s.sqrt())
    }

    /// Parameters from the junction drive `(A, B, omega)`.
    pub fn from_drive(bias_a: f64, bias_b: f64, omega: f64) -> Result<Self> {
        finite("A", bias_a)?;
        finite("B", bias_b)?;
        if omega <= 0.0 {
            return Err(Error::NonPositiveOmega(omega));
        }
        Self::new(bias_b / omega, bias_a / (2.0 * omega), omega)
    }

    /// `(2 omega)^{-1}`, the coefficient that recurs in every eigenfunction relation.
    pub fn half_inv_omega(&self) -> f64 {
        0.5 / self.omega
    }

    /// `4 omega^2 (lambda + mu^2) - 1`; zero up to rounding for consistent params.
    pub fn scaling_defect(&self) -> f64 {
        4.0 * self.omega * self.omega * (self.lambda + self.mu * self.mu) - 1.0
    }

    /// Fractional part of ell in (-1/2, 1/2].
    pub fn ell_fraction(&self) -> f64 {
        self.ell - self.ell.round()
    }
}

pub fn derive_params(ell: f64, mu: f64, omega: f64) -> Result<Params> {
    Params::new(ell, mu, omega)
}

pub fn params_from_heun(ell: f64, mu: f64, lambda: f64) -> Result<Params> {
    Params::from_heun(ell, mu, lambda)
}
