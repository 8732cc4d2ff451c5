//! Equilibrium paths and Monte Carlo replication.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{GenConfig, GenError};
use crate::ko16::{ko16_solve, ko16_solve_warm, Ko16Config};
use crate::material::MaterialDataSet;
use crate::solver::{dd_solve, dd_solve_warm, EquilibriumState, FitMethod, Solution, SolveStatus, SolverConfig, SolverError};
use crate::truss::TrussModel;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("malformed load file: {0}")]
    LoadParse(#[from] serde_json::Error),
    #[error("invalid load case: {0}")]
    InvalidLoad(String),
    #[error("probe dof {probe} out of range (model has {n} free dofs)")]
    Probe { probe: usize, n: usize },
    #[error("Monte Carlo needs at least 2 data sets, got {0}")]
    TooFewSets(usize),
    #[error("unknown method {0:?} (expected robust, lsq or ko16)")]
    UnknownMethod(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Gen(#[from] GenError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("mean is zero; coefficient of variation undefined")]
    ZeroMean,
}

/// `|s / mean|` with the (n - 1)-denominator sample standard deviation.
pub fn coefficient_of_variation(samples: &[f64]) -> Result<f64, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return Err(StatsError::ZeroMean);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((var.sqrt() / mean).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Robust,
    LeastSquares,
    Ko16,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Robust => "robust",
            Method::LeastSquares => "lsq",
            Method::Ko16 => "ko16",
        }
    }

    pub fn parse_list(list: &str) -> Result<Vec<Method>, HarnessError> {
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "robust" => Ok(Method::Robust),
            "lsq" | "least_squares" => Ok(Method::LeastSquares),
            "ko16" => Ok(Method::Ko16),
            other => Err(HarnessError::UnknownMethod(other.to_string())),
        }
    }
}

/// `p = lambda * pbar` for each multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadCase {
    /// N per free dof.
    pub pbar: Vec<f64>,
    pub multipliers: Vec<f64>,
}

impl LoadCase {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self, n: usize) -> Result<(), HarnessError> {
        if self.pbar.len() != n {
            return Err(HarnessError::InvalidLoad(format!("pbar has {} entries, model has {n} free dofs", self.pbar.len())));
        }
        if self.pbar.iter().any(|p| !p.is_finite()) {
            return Err(HarnessError::InvalidLoad("pbar must be finite".into()));
        }
        if self.multipliers.is_empty() {
            return Err(HarnessError::InvalidLoad("multipliers must be nonempty".into()));
        }
        if self.multipliers.iter().any(|l| !l.is_finite()) {
            return Err(HarnessError::InvalidLoad("multipliers must be finite".into()));
        }
        Ok(())
    }

    pub fn load(&self, lambda: f64) -> Vec<f64> {
        self.pbar.iter().map(|p| lambda * p).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub solver: SolverConfig,
    pub ko16: Ko16Config,
    /// Start each load step from the previous converged state.
    pub warm_start: bool,
}

impl PathConfig {
    pub fn new(solver: SolverConfig, ko16: Ko16Config) -> Self {
        Self { solver, ko16, warm_start: true }
    }

    fn solve(
        &self,
        method: Method,
        model: &TrussModel,
        data: &MaterialDataSet,
        p: &[f64],
        previous: Option<&EquilibriumState>,
    ) -> Result<Solution, SolverError> {
        let fit = match method {
            Method::Ko16 => {
                return match previous {
                    Some(prev) => ko16_solve_warm(model, data, p, &self.ko16, prev),
                    None => ko16_solve(model, data, p, &self.ko16),
                }
            }
            Method::Robust => FitMethod::Robust,
            Method::LeastSquares => FitMethod::LeastSquares,
        };
        let cfg = SolverConfig { method: fit, ..self.solver };
        match previous {
            Some(prev) => dd_solve_warm(model, data, p, &cfg, prev),
            None => dd_solve(model, data, p, &cfg),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub lambda: f64,
    /// Empty when no state was produced.
    pub u: Vec<f64>,
    pub eps: Vec<f64>,
    pub sig: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub k_used: usize,
    pub escalations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub method: Method,
    pub records: Vec<StepRecord>,
    pub probe_dof: usize,
    /// `u[probe_dof]` per step, NaN where the step produced no state.
    pub probe_values: Vec<f64>,
}

impl PathResult {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.status == SolveStatus::Converged)
    }

    /// `lambda,probe_disp,status,iterations`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,probe_disp,status,iterations\n");
        for (r, probe) in self.records.iter().zip(&self.probe_values) {
            writeln!(out, "{},{},{},{}", r.lambda, probe, r.status, r.iterations).unwrap();
        }
        out
    }
}

/// Solves every load step in order, warm-starting from the last converged
/// state when configured. Per-step failures are recorded, not raised.
pub fn run_equilibrium_path(
    model: &TrussModel,
    data: &MaterialDataSet,
    loadcase: &LoadCase,
    probe_dof: usize,
    cfg: &PathConfig,
    method: Method,
) -> Result<PathResult, HarnessError> {
    let n = model.dof_count();
    if probe_dof >= n {
        return Err(HarnessError::Probe { probe: probe_dof, n });
    }
    loadcase.validate(n)?;

    let mut records = Vec::with_capacity(loadcase.multipliers.len());
    let mut probe_values = Vec::with_capacity(loadcase.multipliers.len());
    let mut previous: Option<EquilibriumState> = None;
    for &lambda in &loadcase.multipliers {
        let p = loadcase.load(lambda);
        let warm = if cfg.warm_start { previous.as_ref() } else { None };
        let sol = cfg.solve(method, model, data, &p, warm)?;
        let report = sol.report;
        let (u, eps, sig) = match &sol.state {
            Some(s) => (s.u.clone(), s.eps.clone(), s.sig.clone()),
            None => Default::default(),
        };
        probe_values.push(u.get(probe_dof).copied().unwrap_or(f64::NAN));
        records.push(StepRecord {
            lambda,
            u,
            eps,
            sig,
            status: report.status,
            iterations: report.iterations,
            k_used: report.k_used,
            escalations: report.escalations,
        });
        if report.status == SolveStatus::Converged {
            previous = sol.state;
        }
    }
    Ok(PathResult { method, records, probe_dof, probe_values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub n_sets: usize,
    /// Master seed; replicate `r` draws from stream `r`.
    pub seed: u64,
    pub methods: Vec<Method>,
    pub path: PathConfig,
    /// Every replicate uses stream 0 (degenerate check of the aggregation).
    pub shared_stream: bool,
}

/// Statistics of the probe displacement at one load step for one method,
/// over converged replicates only.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRow {
    pub lambda: f64,
    pub method: Method,
    pub mean: f64,
    pub abs_cov: f64,
    /// Replicates that did not converge at this step.
    pub failures: usize,
    pub mean_iters: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloStats {
    pub rows: Vec<MonteCarloRow>,
}

impl MonteCarloStats {
    pub fn row(&self, lambda: f64, method: Method) -> Option<&MonteCarloRow> {
        self.rows.iter().find(|r| r.lambda == lambda && r.method == method)
    }

    /// `lambda,method,mean,abs_cov,failures,mean_iters`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,method,mean,abs_cov,failures,mean_iters\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{}", r.lambda, r.method, r.mean, r.abs_cov, r.failures, r.mean_iters).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    pub stats: MonteCarloStats,
    /// `replicates[r][i]` is the path of `methods[i]` on data set `r`.
    pub replicates: Vec<Vec<PathResult>>,
}

/// Replicates run in parallel on the current rayon pool; aggregation is a
/// fixed-order fold over replicate indices, so results do not depend on the
/// schedule.
pub fn run_monte_carlo(
    model: &TrussModel,
    gen: &GenConfig,
    loadcase: &LoadCase,
    probe_dof: usize,
    cfg: &MonteCarloConfig,
) -> Result<MonteCarloRun, HarnessError> {
    if cfg.n_sets < 2 {
        return Err(HarnessError::TooFewSets(cfg.n_sets));
    }
    let n = model.dof_count();
    if probe_dof >= n {
        return Err(HarnessError::Probe { probe: probe_dof, n });
    }
    loadcase.validate(n)?;
    gen.validate()?;
    let gen = gen.with_seed(cfg.seed);

    let replicates: Vec<Vec<PathResult>> = (0..cfg.n_sets)
        .into_par_iter()
        .map(|r| {
            let stream = if cfg.shared_stream { 0 } else { r as u64 };
            let data = gen.generate(stream)?;
            cfg.methods
                .iter()
                .map(|&method| run_equilibrium_path(model, &data, loadcase, probe_dof, &cfg.path, method))
                .collect()
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut rows = Vec::new();
    for (step, &lambda) in loadcase.multipliers.iter().enumerate() {
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let mut values = Vec::with_capacity(cfg.n_sets);
            let mut iters = 0usize;
            for rep in &replicates {
                let path = &rep[mi];
                let rec = &path.records[step];
                if rec.status == SolveStatus::Converged {
                    values.push(path.probe_values[step]);
                    iters += rec.iterations;
                }
            }
            let count = values.len();
            let mean = if count > 0 { values.iter().sum::<f64>() / count as f64 } else { f64::NAN };
            let mean_iters = if count > 0 { iters as f64 / count as f64 } else { f64::NAN };
            rows.push(MonteCarloRow {
                lambda,
                method,
                mean,
                abs_cov: coefficient_of_variation(&values).unwrap_or(f64::NAN),
                failures: cfg.n_sets - count,
                mean_iters,
            });
        }
    }
    Ok(MonteCarloRun { stats: MonteCarloStats { rows }, replicates })
}
