//! Observer and controller gains for the reduced model and their Lyapunov certificates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, max_eig_sym, min_eig_sym, spectral_abscissa, symmetrize};
use crate::modal::ModalModel;
use crate::sdp::{self, ConstraintBuilder, LmiProblem, SolveOptions, SolveStatus};

/// Observer gain for `a = 10`, `δ = 0.1`, `N0 = 1`.
pub const REFERENCE_L0: [f64; 1] = [0.7062];
/// Controller gain for `a = 10`, `δ = 0.1`, `N0 = 1`.
pub const REFERENCE_K0: [f64; 2] = [-4.8237, -5.2287];

/// Upper bound on the condition number of the design Lyapunov matrices.
pub const DESIGN_CONDITION_BOUND: f64 = 10.0;

/// Observer/controller gains with their Lyapunov matrices.
///
/// `po` and `pc` are normalised to unit smallest eigenvalue; `margin` is the
/// smallest gap `-λ_max` over the two inequalities
/// `Po(A0 - L0 C0) + (·)ᵀ + 2δ Po ⪯ -margin·I` and
/// `Pc(Ã0 + B̃0 K0) + (·)ᵀ + 2δ Pc ⪯ -margin·I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    /// Column, length `N0`.
    pub l0: Vec<f64>,
    /// Row, length `N0 + 1`.
    pub k0: Vec<f64>,
    pub po: Vec<Vec<f64>>,
    pub pc: Vec<Vec<f64>>,
    pub margin: f64,
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl GainSet {
    pub fn l0_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.l0.len(), 1, &self.l0)
    }

    pub fn k0_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, self.k0.len(), &self.k0)
    }

    pub fn po_matrix(&self) -> Result<DMatrix<f64>> {
        from_rows(&self.po)
    }

    pub fn pc_matrix(&self) -> Result<DMatrix<f64>> {
        from_rows(&self.pc)
    }

    /// Gains without certificates; `certify` fills in `po`, `pc` and `margin`.
    pub fn uncertified(l0: Vec<f64>, k0: Vec<f64>) -> Self {
        Self {
            l0,
            k0,
            po: Vec::new(),
            pc: Vec::new(),
            margin: 0.0,
        }
    }

    /// Reference gains for `a = 10`, `δ = 0.1`, certified on `model`.
    pub fn reference(model: &ModalModel) -> Result<Self> {
        certify(model, REFERENCE_L0.to_vec(), REFERENCE_K0.to_vec())
    }
}

fn check_dims(model: &ModalModel, l0: &[f64], k0: &[f64]) -> Result<()> {
    let n0 = model.n0();
    if l0.len() != n0 || k0.len() != n0 + 1 {
        return Err(Error::Dimension(format!(
            "gains need |L0| = {n0} and |K0| = {} (got {} and {})",
            n0 + 1,
            l0.len(),
            k0.len()
        )));
    }
    Ok(())
}

/// `A0 - L0 C0`.
pub fn observer_matrix(model: &ModalModel, l0: &DMatrix<f64>) -> DMatrix<f64> {
    &model.a0 - l0 * &model.c0
}

/// `Ã0 + B̃0 K0`.
pub fn controller_matrix(model: &ModalModel, k0: &DMatrix<f64>) -> DMatrix<f64> {
    &model.a_tilde0 + &model.b_tilde0 * k0
}

/// `P A + Aᵀ P + 2δ P`.
pub fn lyapunov_form(p: &DMatrix<f64>, a: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    symmetrize(&(p * a + a.transpose() * p + p * (2.0 * delta)))
}

fn normalise(p: DMatrix<f64>) -> DMatrix<f64> {
    let s = min_eig_sym(&p);
    symmetrize(&(p / s))
}

fn margin_of(po: &DMatrix<f64>, ao: &DMatrix<f64>, pc: &DMatrix<f64>, ac: &DMatrix<f64>, delta: f64) -> f64 {
    let mo = -max_eig_sym(&lyapunov_form(po, ao, delta));
    let mc = -max_eig_sym(&lyapunov_form(pc, ac, delta));
    mo.min(mc)
}

/// Certifies given gains by solving `(A + δI)ᵀP + P(A + δI) = -I` for each loop.
pub fn certify(model: &ModalModel, l0: Vec<f64>, k0: Vec<f64>) -> Result<GainSet> {
    check_dims(model, &l0, &k0)?;
    let delta = model.config.delta;
    let ao = observer_matrix(model, &DMatrix::from_column_slice(l0.len(), 1, &l0));
    let ac = controller_matrix(model, &DMatrix::from_row_slice(1, k0.len(), &k0));
    for (name, a) in [("observer", &ao), ("controller", &ac)] {
        let abscissa = spectral_abscissa(a);
        if abscissa >= -delta {
            return Err(Error::Synthesis {
                status: SolveStatus::Infeasible,
                detail: format!(
                    "{name} loop has spectral abscissa {abscissa:.6} which is not below -delta = {:.6}",
                    -delta
                ),
            });
        }
    }
    let shift = |a: &DMatrix<f64>| a + DMatrix::identity(a.nrows(), a.nrows()) * delta;
    let po = normalise(linalg::solve_lyapunov(&shift(&ao), &DMatrix::identity(ao.nrows(), ao.nrows()))?);
    let pc = normalise(linalg::solve_lyapunov(&shift(&ac), &DMatrix::identity(ac.nrows(), ac.nrows()))?);
    let margin = margin_of(&po, &ao, &pc, &ac, delta);
    Ok(GainSet {
        l0,
        k0,
        po: to_rows(&po),
        pc: to_rows(&pc),
        margin,
    })
}

fn solve_design(problem: &LmiProblem, objective: &[f64], what: &str) -> Result<Vec<f64>> {
    let out = sdp::minimize(problem, objective, &SolveOptions::default())?;
    match out.point {
        Some(p) if out.status == SolveStatus::Feasible => Ok(p),
        _ => Err(Error::Synthesis {
            status: out.status,
            detail: format!("{what} design LMI not solved (lower bound {:.3e})", out.lower_bound),
        }),
    }
}

/// Adds `I ⪯ X ⪯ ρI` for the symmetric variable `x` of order `n`.
fn bound_matrix(problem: &mut LmiProblem, x: crate::sdp::VarId, n: usize, name: &str) {
    let eye = DMatrix::identity(n, n);
    let mut lo = ConstraintBuilder::new(format!("{name} >= I"), n);
    lo.constant(0, 0, &eye).var_times(x, n, 0, 0, &(&eye * -0.5));
    problem.add_constraint(lo.build());
    let mut hi = ConstraintBuilder::new(format!("{name} <= rho I"), n);
    hi.constant(0, 0, &(&eye * -DESIGN_CONDITION_BOUND))
        .var_times(x, n, 0, 0, &(&eye * 0.5));
    problem.add_constraint(hi.build());
}

/// Adds `ν ≥ |y|²` as `[[-ν, yᵀ], [y, -I]] ⪯ 0` and returns the index of `ν`.
fn norm_epigraph(problem: &mut LmiProblem, ys: &[usize]) -> usize {
    let k = ys.len();
    let nu = problem.add_scalar("nu");
    let nu = problem.index(nu);
    let mut c = ConstraintBuilder::new("gain norm", k + 1);
    c.scalar(nu, 0, 0, &DMatrix::from_element(1, 1, -1.0))
        .constant(1, 1, &-DMatrix::identity(k, k));
    for (i, &y) in ys.iter().enumerate() {
        c.scalar(y, 0, 1 + i, &DMatrix::from_element(1, 1, 1.0));
    }
    problem.add_constraint(c.build());
    nu
}

/// Designs `L0` from `Po(A0 + δI) + (·)ᵀ - Y C0 - C0ᵀYᵀ ⪯ -ρ·margin_req·I`,
/// `I ⪯ Po ⪯ ρI`, minimising `|Y|²`; returns `(L0, Po)` with `L0 = Po⁻¹Y`.
pub fn design_observer_gain(
    a0: &DMatrix<f64>,
    c0: &DMatrix<f64>,
    delta: f64,
    margin_req: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n0 = a0.nrows();
    if c0.shape() != (1, n0) {
        return Err(Error::Dimension("C0 must be 1 x N0".into()));
    }
    if linalg::rank(&linalg::observability_matrix(a0, c0), 1e-12) < n0 {
        return Err(Error::Synthesis {
            status: SolveStatus::Infeasible,
            detail: "(A0, C0) is not observable".into(),
        });
    }
    let mut p = LmiProblem::new();
    let po = p.add_symmetric("Po", n0);
    let ys: Vec<usize> = (0..n0).map(|i| {
        let v = p.add_scalar(&format!("Y{i}"));
        p.index(v)
    }).collect();
    let shifted = a0 + DMatrix::identity(n0, n0) * delta;
    let mut c = ConstraintBuilder::new("observer decay", n0);
    c.var_times(po, n0, 0, 0, &shifted)
        .constant(0, 0, &(DMatrix::identity(n0, n0) * (DESIGN_CONDITION_BOUND * margin_req)));
    for (i, &y) in ys.iter().enumerate() {
        let mut e = DMatrix::zeros(n0, n0);
        for j in 0..n0 {
            e[(i, j)] = -c0[(0, j)];
        }
        c.scalar(y, 0, 0, &(&e + e.transpose()));
    }
    p.add_constraint(c.build());
    bound_matrix(&mut p, po, n0, "Po");
    let nu = norm_epigraph(&mut p, &ys);
    let mut objective = vec![0.0; p.num_vars()];
    objective[nu] = 1.0;
    let x = solve_design(&p, &objective, "observer")?;
    let pov = p.value(po, &x);
    let y = DMatrix::from_fn(n0, 1, |i, _| x[ys[i]]);
    let l0 = pov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Synthesis {
            status: SolveStatus::Inconclusive,
            detail: "Po not positive definite".into(),
        })?
        .solve(&y);
    Ok((l0, normalise(pov)))
}

/// Designs `K0` from `(Ã0 + δI)Q + Q(Ã0 + δI)ᵀ + B̃0 Y + YᵀB̃0ᵀ ⪯ -ρ·margin_req·I`,
/// `I ⪯ Q ⪯ ρI`, minimising `|Y|²`; returns `(K0, Pc)` with `K0 = Y Q⁻¹`, `Pc = Q⁻¹`.
pub fn design_controller_gain(
    a_tilde0: &DMatrix<f64>,
    b_tilde0: &DMatrix<f64>,
    delta: f64,
    margin_req: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a_tilde0.nrows();
    if b_tilde0.shape() != (n, 1) {
        return Err(Error::Dimension("B̃0 must be a column of length N0 + 1".into()));
    }
    if linalg::rank(&linalg::controllability_matrix(a_tilde0, b_tilde0), 1e-12) < n {
        return Err(Error::Synthesis {
            status: SolveStatus::Infeasible,
            detail: "(Ã0, B̃0) is not controllable".into(),
        });
    }
    let mut p = LmiProblem::new();
    let q = p.add_symmetric("Q", n);
    let ys: Vec<usize> = (0..n).map(|i| {
        let v = p.add_scalar(&format!("Y{i}"));
        p.index(v)
    }).collect();
    let shifted = a_tilde0 + DMatrix::identity(n, n) * delta;
    let mut c = ConstraintBuilder::new("controller decay", n);
    c.var_times(q, n, 0, 0, &shifted.transpose())
        .constant(0, 0, &(DMatrix::identity(n, n) * (DESIGN_CONDITION_BOUND * margin_req)));
    for (j, &y) in ys.iter().enumerate() {
        let mut e = DMatrix::zeros(n, n);
        for i in 0..n {
            e[(i, j)] = b_tilde0[(i, 0)];
        }
        c.scalar(y, 0, 0, &(&e + e.transpose()));
    }
    p.add_constraint(c.build());
    bound_matrix(&mut p, q, n, "Q");
    let nu = norm_epigraph(&mut p, &ys);
    let mut objective = vec![0.0; p.num_vars()];
    objective[nu] = 1.0;
    let x = solve_design(&p, &objective, "controller")?;
    let qv = p.value(q, &x);
    let qinv = qv.clone().try_inverse().ok_or_else(|| Error::Synthesis {
        status: SolveStatus::Inconclusive,
        detail: "Q is singular".into(),
    })?;
    let y = DMatrix::from_fn(1, n, |_, j| x[ys[j]]);
    Ok((y * &qinv, normalise(qinv)))
}

/// Designs both gains on `model` and certifies them.
pub fn design_gains(model: &ModalModel, margin_req: f64) -> Result<GainSet> {
    let delta = model.config.delta;
    let (l0, po) = design_observer_gain(&model.a0, &model.c0, delta, margin_req)?;
    let (k0, pc) = design_controller_gain(&model.a_tilde0, &model.b_tilde0, delta, margin_req)?;
    let ao = observer_matrix(model, &l0);
    let ac = controller_matrix(model, &k0);
    let margin = margin_of(&po, &ao, &pc, &ac, delta);
    if margin < margin_req {
        return Err(Error::Synthesis {
            status: SolveStatus::Inconclusive,
            detail: format!("certified margin {margin:.3e} below requested {margin_req:.3e}"),
        });
    }
    Ok(GainSet {
        l0: l0.iter().copied().collect(),
        k0: k0.iter().copied().collect(),
        po: to_rows(&po),
        pc: to_rows(&pc),
        margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    /// `λ_max` of the observer Lyapunov inequality (needs `< 0`), when `Po` is stored.
    pub observer_max_eig: Option<f64>,
    pub controller_max_eig: Option<f64>,
    /// Spectral abscissae of `A0 - L0 C0` and `Ã0 + B̃0 K0`.
    pub observer_abscissa: f64,
    pub controller_abscissa: f64,
    pub delta: f64,
    pub observer_ok: bool,
    pub controller_ok: bool,
}

impl GainReport {
    pub fn passed(&self) -> bool {
        self.observer_ok && self.controller_ok
    }
}

/// Recomputes both Lyapunov inequalities and the closed-loop spectral abscissae.
/// Gains without stored certificates are checked through the abscissae alone.
pub fn verify_gains(gains: &GainSet, model: &ModalModel) -> Result<GainReport> {
    check_dims(model, &gains.l0, &gains.k0)?;
    let delta = model.config.delta;
    let ao = observer_matrix(model, &gains.l0_matrix());
    let ac = controller_matrix(model, &gains.k0_matrix());
    let observer_abscissa = spectral_abscissa(&ao);
    let controller_abscissa = spectral_abscissa(&ac);
    let lyap = |rows: &[Vec<f64>], a: &DMatrix<f64>| -> Result<Option<f64>> {
        if rows.is_empty() {
            return Ok(None);
        }
        let p = from_rows(rows)?;
        if p.shape() != a.shape() {
            return Err(Error::Dimension("Lyapunov matrix shape".into()));
        }
        if min_eig_sym(&p) <= 0.0 {
            return Ok(Some(f64::INFINITY));
        }
        Ok(Some(max_eig_sym(&lyapunov_form(&p, a, delta))))
    };
    let om = lyap(&gains.po, &ao)?;
    let cm = lyap(&gains.pc, &ac)?;
    let observer_ok = observer_abscissa < -delta && om.is_none_or(|v| v < 0.0);
    let controller_ok = controller_abscissa < -delta && cm.is_none_or(|v| v < 0.0);
    Ok(GainReport {
        observer_max_eig: om,
        controller_max_eig: cm,
        observer_abscissa,
        controller_abscissa,
        delta,
        observer_ok,
        controller_ok,
    })
}
