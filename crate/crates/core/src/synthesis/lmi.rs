//! Stability LMIs for the continuous-time and sampled-data closed loops.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::closed_loop::{assemble_closed_loop, ClosedLoopMatrices};
use super::gains::{to_rows, GainSet};
use crate::error::{invalid, Error, Result};
use crate::modal::ModalModel;
use crate::sdp::{self, ConstraintBuilder, LmiProblem, SolveOptions, SolveOutcome, SolveStatus, VarId};

/// Decision variables satisfying the continuous (`w1`, `w2`, `alpha2` absent) or
/// sampled-data LMIs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiCertificate {
    pub p: Vec<Vec<f64>>,
    pub alpha1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w2: Option<f64>,
    /// Smallest gap `-λ_max` over all constraint blocks.
    pub margin: f64,
}

/// `4 / (√N π^{3/2})`.
fn tail_gain(n: usize) -> f64 {
    4.0 / ((n as f64).sqrt() * PI.powf(1.5))
}

fn one(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn check_matrices(m: &ClosedLoopMatrices, model: &ModalModel) -> Result<()> {
    if m.n != model.n() || m.n0 != model.n0() {
        return Err(Error::Dimension(format!(
            "closed-loop matrices built for (N0, N) = ({}, {}), model has ({}, {})",
            m.n0,
            m.n,
            model.n0(),
            model.n()
        )));
    }
    Ok(())
}

fn certificate_margin(problem: &LmiProblem, point: &[f64]) -> f64 {
    sdp::check_point(problem, point, 0.0)
        .map(|r| -r.worst())
        .unwrap_or(f64::NEG_INFINITY)
}

#[derive(Debug, Clone)]
pub struct ContinuousLmi {
    pub problem: LmiProblem,
    pub p: VarId,
    pub alpha1: VarId,
}

impl ContinuousLmi {
    pub fn certificate(&self, point: &[f64]) -> LmiCertificate {
        LmiCertificate {
            p: to_rows(&self.problem.value(self.p, point)),
            alpha1: point[self.problem.index(self.alpha1)],
            alpha2: None,
            w1: None,
            w2: None,
            margin: certificate_margin(&self.problem, point),
        }
    }
}

/// `[[Φ, P𝓛, 0], [*, -2(λ_{N+1} - a - δ), 1], [*, *, -α1 λ_{N+1}^{-3/4}]] ≺ 0`
/// with `Φ = PF + FᵀP + 2δP + 4α1/(√N π^{3/2}) K̃0ᵀK̃0`, plus `P ≻ 0`, `α1 > 0`.
pub fn build_continuous_lmi(m: &ClosedLoopMatrices, model: &ModalModel, delta: f64) -> Result<ContinuousLmi> {
    check_matrices(m, model)?;
    let n = m.dim();
    let big_n = model.n();
    let lam = model.lambda(big_n + 1);
    let a = model.config.a;
    let mut problem = LmiProblem::new();
    let p = problem.add_symmetric("P", n);
    let alpha1 = problem.add_scalar("alpha1");
    let ia = problem.index(alpha1);

    let mut c = ConstraintBuilder::new("continuous", n + 2);
    c.var_times(p, n, 0, 0, &(&m.f + DMatrix::identity(n, n) * delta))
        .scalar(ia, 0, 0, &(m.ktilde.transpose() * &m.ktilde * tail_gain(big_n)))
        .var_times(p, n, 0, n, &m.lcal)
        .constant_scalar(n, n, -2.0 * (lam - a - delta))
        .constant_scalar(n, n + 1, 1.0)
        .scalar(ia, n + 1, n + 1, &one(-lam.powf(-0.75)));
    problem.add_constraint(c.build());
    problem.require_positive(p);
    problem.require_positive(alpha1);
    Ok(ContinuousLmi { problem, p, alpha1 })
}

#[derive(Debug, Clone)]
pub struct SampledLmi {
    pub problem: LmiProblem,
    pub p: VarId,
    pub w1: VarId,
    pub alpha1: VarId,
    pub alpha2: VarId,
    pub w2: VarId,
    pub eps_y: f64,
    pub eps_u: f64,
}

impl SampledLmi {
    pub fn certificate(&self, point: &[f64]) -> LmiCertificate {
        let pr = &self.problem;
        LmiCertificate {
            p: to_rows(&pr.value(self.p, point)),
            alpha1: point[pr.index(self.alpha1)],
            alpha2: Some(point[pr.index(self.alpha2)]),
            w1: Some(to_rows(&pr.value(self.w1, point))),
            w2: Some(point[pr.index(self.w2)]),
            margin: certificate_margin(pr, point),
        }
    }
}

/// `τ² e^{2δ0 τ}`.
pub fn sampling_weight(tau: f64, delta0: f64) -> f64 {
    tau * tau * (2.0 * delta0 * tau).exp()
}

/// Sampled-data LMI `Ψ ≺ 0` in `η = col{X, ζ, Υy, K̂0Υu}` together with the tail LMI.
///
/// The `X` block carries `2(δ0 - δ1)P`: the Halanay term `-2δ1 V(t - τ_y)`
/// contributes `-2δ1 P` to that block on top of `2δ0 P`.
pub fn build_sampled_lmis(
    m: &ClosedLoopMatrices,
    model: &ModalModel,
    delta0: f64,
    delta1: f64,
    tau_my: f64,
    tau_mu: f64,
) -> Result<SampledLmi> {
    check_matrices(m, model)?;
    if !(delta0 > delta1 && delta1 > 0.0) {
        return Err(invalid(format!(
            "Halanay rates must satisfy delta0 > delta1 > 0 (got {delta0}, {delta1})"
        )));
    }
    if !(tau_my > 0.0 && tau_mu > 0.0) {
        return Err(invalid("sampling bounds must be positive"));
    }
    let n = m.dim();
    let big_n = model.n();
    let lam = model.lambda(big_n + 1);
    let a = model.config.a;
    let g = tail_gain(big_n);
    let eps_y = sampling_weight(tau_my, delta0);
    let eps_u = sampling_weight(tau_mu, delta0);

    let mut problem = LmiProblem::new();
    let p = problem.add_symmetric("P", n);
    let w1 = problem.add_symmetric("W1", n);
    let alpha1 = problem.add_scalar("alpha1");
    let alpha2 = problem.add_scalar("alpha2");
    let w2 = problem.add_scalar("W2");
    let (ia1, ia2, iw2) = (problem.index(alpha1), problem.index(alpha2), problem.index(w2));

    let d = 2 * n + 2;
    let (iz, iy, iu) = (n, n + 1, 2 * n + 1);
    let eye = DMatrix::identity(n, n);
    // R = [F, 𝓛, F1, -𝓑]
    let mut r = DMatrix::zeros(n, d);
    r.view_mut((0, 0), (n, n)).copy_from(&m.f);
    r.view_mut((0, iz), (n, 1)).copy_from(&m.lcal);
    r.view_mut((0, iy), (n, n)).copy_from(&m.f1);
    r.view_mut((0, iu), (n, 1)).copy_from(&(-&m.bcal));
    let kr = &m.khat * &r;

    let mut c = ConstraintBuilder::new("sampled", d);
    c.var_times(p, n, 0, 0, &(&m.f + &eye * (delta0 - delta1)))
        .scalar(ia1, 0, 0, &(m.ktilde.transpose() * &m.ktilde * g))
        .var_times(p, n, 0, iz, &m.lcal)
        .var_times(p, n, 0, iy, &(&m.f1 - &eye * (2.0 * delta1)))
        .var_times(p, n, 0, iu, &(-&m.bcal))
        .constant_scalar(iz, iz, -2.0 * delta1)
        .var_times(p, n, iy, iy, &(&eye * -delta1))
        .var_times(w1, n, iy, iy, &(&eye * (-PI * PI / 8.0)))
        .scalar(iw2, iu, iu, &one(-PI * PI / 4.0))
        .scalar(ia2, iu, iu, &one(g))
        .congruence(w1, &r.transpose(), eps_y)
        .scalar(iw2, 0, 0, &(kr.transpose() * &kr * eps_u));
    problem.add_constraint(c.build());

    // tail LMI under the congruence diag(s0, s1, s1), which keeps its entries O(1)
    let l34 = lam.powf(-0.75);
    let c0 = -lam + a + delta0;
    let s0 = 1.0 / c0.abs().max(1.0).sqrt();
    let s1 = 1.0 / l34.sqrt();
    let mut tail = ConstraintBuilder::new("tail", 3);
    tail.constant_scalar(0, 0, c0 * s0 * s0)
        .constant_scalar(0, 1, s0 * s1)
        .constant_scalar(0, 2, s0 * s1)
        .scalar(ia1, 1, 1, &one(-2.0))
        .scalar(ia2, 2, 2, &one(-2.0));
    problem.add_constraint(tail.build());

    for v in [p, w1, alpha1, alpha2, w2] {
        problem.require_positive(v);
    }
    Ok(SampledLmi {
        problem,
        p,
        w1,
        alpha1,
        alpha2,
        w2,
        eps_y,
        eps_u,
    })
}

/// Unique root of `d = δ0 - δ1 e^{2dh}` in `(0, δ0 - δ1]`.
pub fn halanay_rate(delta0: f64, delta1: f64, h: f64) -> Result<f64> {
    if !(delta0 > delta1 && delta1 > 0.0) {
        return Err(invalid(format!(
            "Halanay rates must satisfy delta0 > delta1 > 0 (got {delta0}, {delta1})"
        )));
    }
    if !(h >= 0.0) || !h.is_finite() {
        return Err(invalid("delay bound must be finite and nonnegative"));
    }
    if h == 0.0 {
        return Ok(delta0 - delta1);
    }
    let g = |d: f64| d - delta0 + delta1 * (2.0 * d * h).exp();
    let (mut lo, mut hi) = (0.0, delta0 - delta1);
    while hi - lo > 1e-14 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solver outcome together with the extracted certificate.
#[derive(Debug, Clone)]
pub struct Verification {
    pub outcome: SolveOutcome,
    pub certificate: Option<LmiCertificate>,
}

pub fn verify_continuous(model: &ModalModel, gains: &GainSet, opts: &SolveOptions) -> Result<Verification> {
    let m = assemble_closed_loop(model, gains)?;
    let lmi = build_continuous_lmi(&m, model, model.config.delta)?;
    let outcome = sdp::solve(&lmi.problem, opts)?;
    let certificate = outcome.point.as_deref().map(|x| lmi.certificate(x));
    Ok(Verification { outcome, certificate })
}

pub fn verify_sampled(
    model: &ModalModel,
    gains: &GainSet,
    tau_my: f64,
    tau_mu: f64,
    opts: &SolveOptions,
) -> Result<Verification> {
    let m = assemble_closed_loop(model, gains)?;
    let cfg = &model.config;
    let lmi = build_sampled_lmis(&m, model, cfg.delta0, cfg.delta1, tau_my, tau_mu)?;
    let outcome = sdp::solve(&lmi.problem, opts)?;
    let certificate = outcome.point.as_deref().map(|x| lmi.certificate(x));
    Ok(Verification { outcome, certificate })
}

/// Largest `τ_{M,u}` on the grid `{step, 2·step, ...}` (up to `max_tau`) at which the
/// sampled-data LMIs are feasible; `None` if infeasible at `step`.
/// An inconclusive probe aborts the search with [`Error::Inconclusive`].
#[allow(clippy::too_many_arguments)]
pub fn max_feasible_tau_u(
    model: &ModalModel,
    gains: &GainSet,
    tau_my: f64,
    delta0: f64,
    delta1: f64,
    grid_step: f64,
    max_tau: f64,
    opts: &SolveOptions,
) -> Result<Option<f64>> {
    if !(grid_step > 0.0) || !(max_tau >= grid_step) {
        return Err(invalid("grid step must be positive and not exceed the search limit"));
    }
    let m = assemble_closed_loop(model, gains)?;
    let tau_of = |k: u64| (k as f64 * grid_step * 1e9).round() / 1e9;
    let probe = |k: u64| -> Result<bool> {
        let tau = tau_of(k);
        let lmi = build_sampled_lmis(&m, model, delta0, delta1, tau_my, tau)?;
        let out = sdp::solve(&lmi.problem, opts)?;
        log::debug!(
            "N = {}, tau_y = {tau_my}, tau_u = {tau}: {} after {} iterations",
            model.n(),
            out.status,
            out.iterations
        );
        match out.status {
            SolveStatus::Feasible => Ok(true),
            SolveStatus::Infeasible => Ok(false),
            SolveStatus::Inconclusive => Err(Error::Inconclusive {
                tau,
                detail: format!("t = {:.3e}, lower bound {:.3e}", out.t, out.lower_bound),
            }),
        }
    };
    let kmax = (max_tau / grid_step + 1e-9).floor() as u64;
    if !probe(1)? {
        return Ok(None);
    }
    let mut lo = 1u64;
    let mut hi = None;
    let mut k = 2u64;
    while k <= kmax {
        if probe(k)? {
            lo = k;
            k *= 2;
        } else {
            hi = Some(k);
            break;
        }
    }
    let mut hi = match hi {
        Some(h) => h,
        None if lo == kmax => return Ok(Some(tau_of(lo))),
        None => {
            if probe(kmax)? {
                return Ok(Some(tau_of(kmax)));
            }
            kmax
        }
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(tau_of(lo)))
}
