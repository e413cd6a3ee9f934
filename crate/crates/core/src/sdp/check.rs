//! Independent verification of a candidate point.

use serde::{Deserialize, Serialize};

use super::jacobi;
use super::problem::LmiProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub name: String,
    /// Largest eigenvalue of the constraint block (must be `< -margin`), or the
    /// negated smallest eigenvalue of a positivity block.
    pub max_eig: f64,
    pub margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    /// Largest block margin.
    pub margin: f64,
    pub blocks: Vec<BlockCheck>,
    pub passed: bool,
}

impl CheckReport {
    /// Worst (largest) eigenvalue over all blocks.
    pub fn worst(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_eig)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Re-evaluates every block at `point` and requires `λ_max(M_i) < -margin`
/// and `λ_min(X) > margin` for positivity blocks.
pub fn check_point(problem: &LmiProblem, point: &[f64], margin: f64) -> Result<CheckReport> {
    let margins = vec![margin; problem.constraints.len() + problem.positivity.len()];
    check_point_margins(problem, point, &margins)
}

/// As [`check_point`] with one margin per block (constraints, then positivity blocks).
pub fn check_point_margins(problem: &LmiProblem, point: &[f64], margins: &[f64]) -> Result<CheckReport> {
    let nc = problem.constraints.len();
    if margins.len() != nc + problem.positivity.len() {
        return Err(Error::Dimension(format!(
            "{} margins for {} blocks",
            margins.len(),
            nc + problem.positivity.len()
        )));
    }
    let values = problem.evaluate(point)?;
    let mut blocks = Vec::with_capacity(margins.len());
    for ((c, m), eps) in problem.constraints.iter().zip(&values).zip(margins) {
        let max_eig = jacobi::max_eigenvalue(m);
        blocks.push(BlockCheck {
            name: c.name.clone(),
            max_eig,
            margin: *eps,
            ok: max_eig < -eps,
        });
    }
    for (id, eps) in problem.positivity.iter().zip(&margins[nc..]) {
        let x = problem.value(*id, point);
        let max_eig = -jacobi::min_eigenvalue(&x);
        blocks.push(BlockCheck {
            name: format!("{} > 0", problem.variable(*id).name),
            max_eig,
            margin: *eps,
            ok: max_eig < -eps,
        });
    }
    let passed = blocks.iter().all(|b| b.ok);
    Ok(CheckReport {
        margin: margins.iter().copied().fold(0.0, f64::max),
        blocks,
        passed,
    })
}
