//! Phase-lock sweep over the bias `B` at fixed drive amplitude and frequency.
//!
//! Each cell is classified twice: by the monodromy trace and by whether the
//! junction's rotation number sits on an integer plateau. Tongue edges of both
//! criteria are then refined by bisection.

use rayon::prelude::*;
use serde::Serialize;

use crate::eigenbasis::eigenpair_cauchy;
use crate::error::{Error, Result};
use crate::monodromy::{lock_indicator, monodromy_continuation, phase_lock, MonodromyMatrix, PhaseLock, DEFAULT_LOCK_TOL};
use crate::odeint::Tolerances;
use crate::params::Params;
use crate::rsj::{default_tolerances, rotation_number};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub omega: f64,
    pub amp: f64,
    pub b_range: (f64, f64),
    pub b_steps: usize,
    pub n_periods: usize,
    pub phi0: f64,
    pub lock_tol: f64,
    pub edge_tol: f64,
    pub tol: Tolerances,
    pub rsj_tol: Tolerances,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            amp: 0.6,
            b_range: (0.0, 2.0),
            b_steps: 101,
            n_periods: 256,
            phi0: 0.0,
            lock_tol: DEFAULT_LOCK_TOL,
            edge_tol: 1e-8,
            tol: Tolerances::default(),
            rsj_tol: default_tolerances(),
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.b_range;
        match self.b_steps {
            0 => Vec::new(),
            1 => vec![lo],
            n => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_steps == 0 {
            return Err(Error::Config("b-steps must be positive".into()));
        }
        if !(self.b_range.0.is_finite() && self.b_range.1.is_finite() && self.b_range.0 <= self.b_range.1) {
            return Err(Error::Config(format!("invalid b-range {:?}", self.b_range)));
        }
        self.tol.validate()?;
        self.rsj_tol.validate()
    }
}

/// Column order of the CSV output.
pub const CSV_HEADER: &str = "B,A,omega,ell,mu,classification,off_diag_abs,trace_re,rotation_number";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "B")]
    pub bias_b: f64,
    #[serde(rename = "A")]
    pub bias_a: f64,
    pub omega: f64,
    pub ell: f64,
    pub mu: f64,
    pub classification: PhaseLock,
    pub off_diag_abs: f64,
    pub trace_re: f64,
    pub rotation_number: f64,
    /// Whether the rotation number sits on an integer plateau.
    pub rotation_locked: bool,
    /// Signed distance into a tongue according to the monodromy.
    pub lock_indicator: f64,
}

impl SweepRow {
    pub fn csv(&self) -> String {
        let num = |x: f64| serde_json::to_string(&x).expect("f64 serializes");
        format!(
            "{},{},{},{},{},{},{},{},{}",
            num(self.bias_b),
            num(self.bias_a),
            num(self.omega),
            num(self.ell),
            num(self.mu),
            self.classification,
            num(self.off_diag_abs),
            num(self.trace_re),
            num(self.rotation_number)
        )
    }
}

/// Rotation number within `2/n` of an integer.
pub fn rotation_locked(rho: f64, n_periods: usize) -> bool {
    (rho - rho.round()).abs() < 2.0 / n_periods as f64
}

/// Normalized continuation monodromy for the drive `(A, B, omega)`.
pub fn cell_monodromy(cfg: &SweepConfig, bias_b: f64) -> Result<(Params, MonodromyMatrix)> {
    let params = Params::from_drive(cfg.amp, bias_b, cfg.omega)?;
    let one = Complex64::new(1.0, 0.0);
    let pair = eigenpair_cauchy(&params, one, one, &cfg.tol)?;
    let m = monodromy_continuation(&params, &pair, &cfg.tol)?.normalized(&params);
    Ok((params, m))
}

fn cell_rotation(cfg: &SweepConfig, params: &Params) -> Result<f64> {
    rotation_number(params, cfg.phi0, cfg.n_periods, &cfg.rsj_tol)
}

pub fn sweep_cell(cfg: &SweepConfig, bias_b: f64) -> Result<SweepRow> {
    let (params, m) = cell_monodromy(cfg, bias_b)?;
    let classification = phase_lock(&m, cfg.lock_tol)?;
    let rho = cell_rotation(cfg, &params)?;
    Ok(SweepRow {
        bias_b,
        bias_a: cfg.amp,
        omega: cfg.omega,
        ell: params.ell,
        mu: params.mu,
        classification,
        off_diag_abs: m.off_diagonal_min(),
        trace_re: m.trace().re,
        rotation_number: rho,
        rotation_locked: rotation_locked(rho, cfg.n_periods),
        lock_indicator: lock_indicator(&m),
    })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| Error::Config(e.to_string()))
}

/// Evaluate every cell; rows come back in grid order regardless of `jobs`.
pub fn run_sweep(cfg: &SweepConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let grid = cfg.grid();
    pool(jobs)?.install(|| grid.par_iter().map(|&b| sweep_cell(cfg, b)).collect())
}

/// Bisection on a sign change of `f` in `[lo, hi]` down to width `tol`.
fn bisect<F: Fn(f64) -> Result<bool>>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let f_lo = f(lo)?;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? == f_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Monodromy,
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub criterion: Criterion,
    #[serde(rename = "B")]
    pub bias_b: f64,
}

/// Tongue edges of one criterion, refined between neighbouring grid cells
/// whose lock state differs.
pub fn refine_edges(cfg: &SweepConfig, rows: &[SweepRow], criterion: Criterion, jobs: usize) -> Result<Vec<Edge>> {
    let state = |r: &SweepRow| match criterion {
        Criterion::Monodromy => r.lock_indicator > 0.0,
        Criterion::Rotation => r.rotation_locked,
    };
    let brackets: Vec<(f64, f64)> = rows.windows(2).filter(|w| state(&w[0]) != state(&w[1])).map(|w| (w[0].bias_b, w[1].bias_b)).collect();
    let probe = |b: f64| -> Result<bool> {
        match criterion {
            Criterion::Monodromy => Ok(lock_indicator(&cell_monodromy(cfg, b)?.1) > 0.0),
            Criterion::Rotation => {
                let params = Params::from_drive(cfg.amp, b, cfg.omega)?;
                Ok(rotation_locked(cell_rotation(cfg, &params)?, cfg.n_periods))
            }
        }
    };
    pool(jobs)?.install(|| brackets.par_iter().map(|&(lo, hi)| Ok(Edge { criterion, bias_b: bisect(probe, lo, hi, cfg.edge_tol)? })).collect())
}

/// Comparison of the two criteria on a finished sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAgreement {
    pub compared: usize,
    pub agreeing: usize,
    pub excluded: usize,
    pub disagreements: Vec<f64>,
    pub monodromy_edges: Vec<f64>,
    pub rotation_edges: Vec<f64>,
    /// Largest distance from a monodromy edge to the nearest rotation edge.
    pub max_edge_gap: f64,
}

impl SweepAgreement {
    pub fn fraction(&self) -> f64 {
        if self.compared == 0 {
            1.0
        } else {
            self.agreeing as f64 / self.compared as f64
        }
    }
}

/// Compare classifications away from a band of half-width `band` around the
/// refined edges, and match edges between criteria.
pub fn compare_criteria(rows: &[SweepRow], monodromy_edges: &[Edge], rotation_edges: &[Edge], band: f64) -> SweepAgreement {
    let medges: Vec<f64> = monodromy_edges.iter().map(|e| e.bias_b).collect();
    let redges: Vec<f64> = rotation_edges.iter().map(|e| e.bias_b).collect();
    let near_edge = |b: f64| medges.iter().chain(&redges).any(|&e| (b - e).abs() <= band);
    let mut out = SweepAgreement {
        compared: 0,
        agreeing: 0,
        excluded: 0,
        disagreements: Vec::new(),
        monodromy_edges: medges.clone(),
        rotation_edges: redges.clone(),
        max_edge_gap: 0.0,
    };
    for r in rows {
        if r.classification == PhaseLock::Boundary || near_edge(r.bias_b) {
            out.excluded += 1;
            continue;
        }
        out.compared += 1;
        if (r.classification == PhaseLock::Locked) == r.rotation_locked {
            out.agreeing += 1;
        } else {
            out.disagreements.push(r.bias_b);
        }
    }
    out.max_edge_gap = medges.iter().map(|m| redges.iter().map(|r| (m - r).abs()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    if medges.len() != redges.len() {
        out.max_edge_gap = f64::INFINITY;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_csv() {
        let cfg = SweepConfig { b_steps: 5, ..SweepConfig::default() };
        assert_eq!(cfg.grid(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(SweepConfig { b_steps: 0, ..cfg }.validate().is_err());
        assert_eq!(CSV_HEADER.split(',').count(), 9);
    }

    #[test]
    fn plateau_criterion() {
        assert!(rotation_locked(1.0 + 1.0 / 256.0, 256));
        assert!(!rotation_locked(1.0 + 3.0 / 256.0, 256));
        assert!(rotation_locked(-0.001, 256));
    }

    #[test]
    fn bisection_finds_threshold() {
        let x = bisect(|b| Ok(b > 0.3), 0.0, 1.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-10);
    }

    #[test]
    fn cells_inside_and_outside_tongue() {
        let cfg = SweepConfig::default();
        // B = 0 with small drive: phase stays bounded, rotation number 0.
        let row = sweep_cell(&cfg, 0.0).unwrap();
        assert_eq!(row.classification, PhaseLock::Locked);
        assert!(row.rotation_locked && row.rotation_number.abs() < 2.0 / 256.0);
        let row = sweep_cell(&cfg, 1.0).unwrap();
        assert_eq!(row.classification, PhaseLock::Unlocked);
        assert!(!row.rotation_locked);
    }

    #[test]
    fn ordering_independent_of_jobs() {
        let cfg = SweepConfig { b_steps: 6, n_periods: 32, ..SweepConfig::default() };
        let a = run_sweep(&cfg, 1).unwrap();
        let b = run_sweep(&cfg, 3).unwrap();
        assert_eq!(a, b);
    }
}
