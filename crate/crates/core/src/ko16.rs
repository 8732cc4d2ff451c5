//! Single-nearest-data-point baseline.
//!
//! Every member is assigned one data point `(eps*, sig*)`. Given the
//! assignment, the admissible state closest to it in the `c_e` metric is found
//! from two linear solves with the reference stiffness
//! `K_e = sum_i a_i l_i c_e b_i b_i^T`:
//!
//! ```text
//! K_e u   = sum_i a_i l_i c_e eps*_i b_i
//! K_e eta = p - sum_i a_i l_i sig*_i b_i
//! eps_i = b_i . u,   sig_i = sig*_i + c_e b_i . eta
//! ```
//!
//! Each member is then reassigned to its nearest data point under the same
//! metric. The iteration stops when the assignment no longer changes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::material::MaterialDataSet;
use crate::regression::LinearLaw;
use crate::solver::{check_len, norm, EquilibriumState, Factorized, Solution, SolveReport, SolveStatus, SolverError};
use crate::truss::TrussModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ko16Config {
    /// Metric constant, Pa.
    pub c_e: f64,
    pub max_iter: usize,
}

impl Ko16Config {
    pub fn new(c_e: f64) -> Self {
        Self { c_e, max_iter: 100 }
    }
}

/// Baseline solve from the assignment nearest to the unstressed origin.
pub fn ko16_solve(
    model: &TrussModel,
    data: &MaterialDataSet,
    p: &[f64],
    cfg: &Ko16Config,
) -> Result<Solution, SolverError> {
    let m = model.member_count();
    run(model, data, p, cfg, &vec![0.0; m], &vec![0.0; m], vec![0.0; model.dof_count()])
}

/// Baseline solve starting from the assignment nearest to a previous state.
pub fn ko16_solve_warm(
    model: &TrussModel,
    data: &MaterialDataSet,
    p: &[f64],
    cfg: &Ko16Config,
    previous: &EquilibriumState,
) -> Result<Solution, SolverError> {
    check_len("warm-start strains", model.member_count(), previous.eps.len())?;
    check_len("warm-start stresses", model.member_count(), previous.sig.len())?;
    check_len("warm-start displacements", model.dof_count(), previous.u.len())?;
    run(model, data, p, cfg, &previous.eps, &previous.sig, previous.u.clone())
}

fn run(
    model: &TrussModel,
    data: &MaterialDataSet,
    p: &[f64],
    cfg: &Ko16Config,
    eps0: &[f64],
    sig0: &[f64],
    mut u_prev: Vec<f64>,
) -> Result<Solution, SolverError> {
    if !(cfg.c_e > 0.0 && cfg.c_e.is_finite()) {
        return Err(SolverError::InvalidConfig("c_e must be positive"));
    }
    if cfg.max_iter == 0 {
        return Err(SolverError::InvalidConfig("max_iter must be at least 1"));
    }
    let (m, n) = (model.member_count(), model.dof_count());
    check_len("load vector", n, p.len())?;
    let c_e = cfg.c_e;
    let nearest = |e: f64, s: f64| data.knn_weighted(e, s, c_e, 1)[0];

    let report = |status, iterations, history| SolveReport { status, iterations, k_used: 1, escalations: 0, residual_history: history };

    let mut k = DMatrix::zeros(n, n);
    for i in 0..m {
        let row = &model.compat_row(i).entries;
        let scale = model.area(i) * model.length(i) * c_e;
        for &(r, br) in row {
            for &(c, bc) in row {
                k[(r, c)] += scale * br * bc;
            }
        }
    }
    let lu = match Factorized::new(k) {
        Ok(lu) => lu,
        Err(_) => return Ok(Solution { state: None, report: report(SolveStatus::SingularSystem, 0, Vec::new()) }),
    };

    let mut assignment: Vec<usize> = eps0.iter().zip(sig0).map(|(&e, &s)| nearest(e, s)).collect();
    let mut history = Vec::new();
    let mut last = None;
    for iteration in 1..=cfg.max_iter {
        let mut rhs_u = vec![0.0; n];
        let mut rhs_eta = p.to_vec();
        for (i, &j) in assignment.iter().enumerate() {
            let star = data.point(j);
            let al = model.area(i) * model.length(i);
            for &(r, br) in &model.compat_row(i).entries {
                rhs_u[r] += al * c_e * star.strain * br;
                rhs_eta[r] -= al * star.stress * br;
            }
        }
        let solved = lu.solve(rhs_u).and_then(|u| Ok((u, lu.solve(rhs_eta)?)));
        let (u, eta) = match solved {
            Ok(pair) => pair,
            Err(_) => return Ok(Solution { state: last, report: report(SolveStatus::SingularSystem, iteration, history) }),
        };
        let eps = model.strains(&u);
        let sig: Vec<f64> = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| data.point(j).stress + c_e * model.compat_row(i).dot(&eta))
            .collect();
        let next: Vec<usize> = eps.iter().zip(&sig).map(|(&e, &s)| nearest(e, s)).collect();
        history.push(norm(&u.iter().zip(&u_prev).map(|(a, b)| a - b).collect::<Vec<_>>()));
        let laws = sig.iter().map(|&s| LinearLaw::new(0.0, s)).collect();
        u_prev.clone_from(&u);
        last = Some(EquilibriumState { u, eps, sig, laws });
        if next == assignment {
            return Ok(Solution { state: last, report: report(SolveStatus::Converged, iteration, history) });
        }
        assignment = next;
    }
    Ok(Solution { state: last, report: report(SolveStatus::MaxIterExceeded, cfg.max_iter, history) })
}
