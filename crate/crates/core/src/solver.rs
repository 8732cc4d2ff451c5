//! Data-driven equilibrium solver.
//!
//! Compatibility and force balance are enforced exactly; the constitutive law
//! of every member is replaced by a local affine fit to the `k` data points
//! nearest to the member's current strain. The fixed-point loop alternates
//! between refitting the local laws and one linear equilibrium solve until the
//! displacement stops changing.

use std::collections::HashMap;

use nalgebra::linalg::LU;
use nalgebra::{DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::material::{DataPoint, MaterialDataSet};
use crate::regression::{huber_fit, least_squares_fit, HuberConfig, LinearLaw, RegressionError};
use crate::truss::TrussModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("stiffness matrix is numerically singular")]
    Singular,
    #[error("k = {k} exceeds the data set size d = {d}")]
    KTooLarge { k: usize, d: usize },
    #[error("expected {expected} entries in {what}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Robust,
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Neighborhoods taken around zero strain.
    ZeroStrain,
    /// One fit over the whole data set followed by one linear solve.
    GlobalFit,
}

/// Growth of `k` after a cycle or iteration-limit failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Escalation {
    pub factor: f64,
    pub max_retries: usize,
}

impl Escalation {
    pub const DISABLED: Escalation = Escalation { factor: 1.0, max_retries: 0 };
}

impl Default for Escalation {
    fn default() -> Self {
        Self { factor: 1.5, max_retries: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub k: usize,
    pub huber: HuberConfig,
    pub method: FitMethod,
    pub u_tol_rel: f64,
    /// m
    pub u_tol_abs: f64,
    pub max_iter: usize,
    pub escalation: Escalation,
    pub init: InitStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: 15,
            huber: HuberConfig::default(),
            method: FitMethod::Robust,
            u_tol_rel: 1e-8,
            u_tol_abs: 1e-12,
            max_iter: 50,
            escalation: Escalation::default(),
            init: InitStrategy::ZeroStrain,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.k == 0 {
            return Err(SolverError::InvalidConfig("k must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1"));
        }
        if !(self.u_tol_rel > 0.0 && self.u_tol_abs > 0.0) {
            return Err(SolverError::InvalidConfig("tolerances must be positive"));
        }
        if !(self.escalation.factor >= 1.0) {
            return Err(SolverError::InvalidConfig("escalation factor must be >= 1"));
        }
        if self.method == FitMethod::Robust {
            self.huber.validate()?;
        }
        Ok(())
    }

    /// Fits one local law with the configured estimator.
    pub fn fit(&self, points: &[DataPoint]) -> Result<LinearLaw, RegressionError> {
        match self.method {
            FitMethod::Robust => huber_fit(points, &self.huber),
            FitMethod::LeastSquares => least_squares_fit(points),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterExceeded,
    CycleDetected,
    SingularSystem,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIterExceeded => "MaxIterExceeded",
            SolveStatus::CycleDetected => "CycleDetected",
            SolveStatus::SingularSystem => "SingularSystem",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Iterations of the final attempt.
    pub iterations: usize,
    pub k_used: usize,
    /// Number of restarts with a larger `k`.
    pub escalations: usize,
    /// `||u(l+1) - u(l)||` over the final attempt.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumState {
    /// Free nodal displacements, m.
    pub u: Vec<f64>,
    pub eps: Vec<f64>,
    /// Pa
    pub sig: Vec<f64>,
    pub laws: Vec<LinearLaw>,
}

impl EquilibriumState {
    /// `||sum_i a_i l_i sig_i b_i - p||`.
    pub fn force_residual(&self, model: &TrussModel, p: &[f64]) -> f64 {
        let f = model.internal_force(&self.sig);
        norm(&f.iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Last computed state; `None` only if no linear solve ever succeeded.
    pub state: Option<EquilibriumState>,
    pub report: SolveReport,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.report.status == SolveStatus::Converged
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), SolverError> {
    if expected == got {
        Ok(())
    } else {
        Err(SolverError::Dimension { what, expected, got })
    }
}

/// LU factorization with partial pivoting of a stiffness matrix that has
/// passed the singularity check.
pub(crate) struct Factorized(LU<f64, Dyn, Dyn>);

impl Factorized {
    pub(crate) fn new(k: DMatrix<f64>) -> Result<Self, SolverError> {
        let n = k.nrows();
        let scale = k.amax();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(SolverError::Singular);
        }
        let lu = k.lu();
        if lu.u().diagonal().amin() <= (n as f64) * f64::EPSILON * scale {
            return Err(SolverError::Singular);
        }
        Ok(Self(lu))
    }

    pub(crate) fn solve(&self, f: Vec<f64>) -> Result<Vec<f64>, SolverError> {
        let u = self.0.solve(&DVector::from_vec(f)).ok_or(SolverError::Singular)?;
        if u.iter().all(|x| x.is_finite()) {
            Ok(u.as_slice().to_vec())
        } else {
            Err(SolverError::Singular)
        }
    }
}

/// Equilibrium state for fixed local laws `sig_i = w_i eps_i + v_i`.
pub fn solve_linear_state(model: &TrussModel, laws: &[LinearLaw], p: &[f64]) -> Result<EquilibriumState, SolverError> {
    let (m, n) = (model.member_count(), model.dof_count());
    check_len("laws", m, laws.len())?;
    check_len("load vector", n, p.len())?;
    let mut k = DMatrix::zeros(n, n);
    let mut f = p.to_vec();
    for (i, law) in laws.iter().enumerate() {
        let al = model.area(i) * model.length(i);
        let row = &model.compat_row(i).entries;
        for &(r, br) in row {
            f[r] -= al * law.v * br;
            for &(c, bc) in row {
                k[(r, c)] += al * law.w * br * bc;
            }
        }
    }
    let u = Factorized::new(k)?.solve(f)?;
    let eps = model.strains(&u);
    let sig = eps.iter().zip(laws).map(|(&e, law)| law.stress(e)).collect();
    Ok(EquilibriumState { u, eps, sig, laws: laws.to_vec() })
}

enum Start<'a> {
    Fresh,
    Warm(&'a EquilibriumState),
}

/// Runs the fixed-point iteration from the configured initialization.
pub fn dd_solve(
    model: &TrussModel,
    data: &MaterialDataSet,
    p: &[f64],
    cfg: &SolverConfig,
) -> Result<Solution, SolverError> {
    run(model, data, p, cfg, Start::Fresh)
}

/// Like [`dd_solve`] but starting from a previous state's strains and
/// displacements (incremental load paths).
pub fn dd_solve_warm(
    model: &TrussModel,
    data: &MaterialDataSet,
    p: &[f64],
    cfg: &SolverConfig,
    previous: &EquilibriumState,
) -> Result<Solution, SolverError> {
    check_len("warm-start strains", model.member_count(), previous.eps.len())?;
    check_len("warm-start displacements", model.dof_count(), previous.u.len())?;
    run(model, data, p, cfg, Start::Warm(previous))
}

fn run(
    model: &TrussModel,
    data: &MaterialDataSet,
    p: &[f64],
    cfg: &SolverConfig,
    start: Start<'_>,
) -> Result<Solution, SolverError> {
    cfg.validate()?;
    check_len("load vector", model.dof_count(), p.len())?;
    let d = data.len();
    if cfg.k > d {
        return Err(SolverError::KTooLarge { k: cfg.k, d });
    }

    let mut k = cfg.k;
    let mut escalations = 0;
    loop {
        let attempt = attempt(model, data, p, cfg, k, &start);
        let retry = matches!(attempt.status, SolveStatus::CycleDetected | SolveStatus::MaxIterExceeded)
            && escalations < cfg.escalation.max_retries
            && k < d;
        if !retry {
            return Ok(Solution {
                state: attempt.state,
                report: SolveReport {
                    status: attempt.status,
                    iterations: attempt.iterations,
                    k_used: k,
                    escalations,
                    residual_history: attempt.history,
                },
            });
        }
        escalations += 1;
        k = ((k as f64 * cfg.escalation.factor).ceil() as usize).max(k + 1).min(d);
    }
}

struct Attempt {
    state: Option<EquilibriumState>,
    status: SolveStatus,
    iterations: usize,
    history: Vec<f64>,
}

fn attempt(
    model: &TrussModel,
    data: &MaterialDataSet,
    p: &[f64],
    cfg: &SolverConfig,
    k: usize,
    start: &Start<'_>,
) -> Attempt {
    let singular = |state, iterations, history| Attempt { state, status: SolveStatus::SingularSystem, iterations, history };
    let m = model.member_count();

    let (mut u, mut eps, mut last) = match start {
        Start::Warm(prev) => (prev.u.clone(), prev.eps.clone(), None),
        Start::Fresh => match cfg.init {
            InitStrategy::ZeroStrain => (vec![0.0; model.dof_count()], vec![0.0; m], None),
            InitStrategy::GlobalFit => {
                let state = cfg
                    .fit(data.points())
                    .map_err(SolverError::from)
                    .and_then(|law| solve_linear_state(model, &vec![law; m], p));
                match state {
                    Ok(s) => (s.u.clone(), s.eps.clone(), Some(s)),
                    Err(_) => return singular(None, 0, Vec::new()),
                }
            }
        },
    };

    let mut seen: HashMap<Vec<Vec<usize>>, usize> = HashMap::new();
    let mut history = Vec::new();
    for iteration in 1..=cfg.max_iter {
        let windows: Vec<Vec<usize>> = eps.iter().map(|&e| data.knn(e, k)).collect();
        // A repeat of the immediately preceding signature reproduces the same
        // laws and therefore converges; anything older is a cycle.
        if let Some(&first) = seen.get(&windows) {
            if first + 1 < iteration {
                return Attempt { state: last, status: SolveStatus::CycleDetected, iterations: iteration - 1, history };
            }
        }
        let laws: Result<Vec<LinearLaw>, _> = windows.iter().map(|w| cfg.fit(&data.select(w))).collect();
        seen.insert(windows, iteration);
        let state = match laws.map_err(SolverError::from).and_then(|laws| solve_linear_state(model, &laws, p)) {
            Ok(state) => state,
            Err(_) => return singular(last, iteration, history),
        };
        let change = norm(&state.u.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
        history.push(change);
        let done = change <= cfg.u_tol_abs + cfg.u_tol_rel * norm(&u);
        u.clone_from(&state.u);
        eps.clone_from(&state.eps);
        last = Some(state);
        if done {
            return Attempt { state: last, status: SolveStatus::Converged, iterations: iteration, history };
        }
    }
    Attempt { state: last, status: SolveStatus::MaxIterExceeded, iterations: cfg.max_iter, history }
}
