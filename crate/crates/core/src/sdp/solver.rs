//! Primal-dual interior-point method (Nesterov-Todd scaling, Mehrotra
//! predictor-corrector) on the epigraph form `M_i(x) ⪯ t·I`.
//!
//! The dual iterate `y = (x, t)` stays strictly feasible throughout, so every
//! iterate is a valid point for the epigraph problem. Each decision scalar is
//! kept in a box `|x_a| ≤ bound`, which makes `t` bounded below and yields a
//! rigorous lower bound on `t` from any primal iterate.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::check::{check_point_margins, CheckReport};
use super::problem::{sym_pairs, unflatten, LmiProblem, Term, VarKind};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Relative gap and residual tolerance.
    pub tol: f64,
    /// Uniform strictness `λ_max(M_i(x)) < -margin`; `None` selects
    /// `1e-7 · (1 + ‖M₀ᵢ‖_∞)` per constraint and `1e-7` for positivity blocks.
    pub margin: Option<f64>,
    /// Box bound on every decision scalar.
    pub bound: f64,
    /// Fraction of the step to the boundary.
    pub step_fraction: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 120,
            tol: 1e-9,
            margin: None,
            bound: 1e4,
            step_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    /// A point passing the independent check was found.
    Feasible,
    /// Certified: no point inside the box satisfies the constraints.
    Infeasible,
    /// Neither certificate was obtained.
    Inconclusive,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Verified point (only for `Feasible`).
    pub point: Option<Vec<f64>>,
    /// Epigraph value `t` of `M_i(x) + ε_i I ⪯ t I` at the last feasibility iterate.
    pub t: f64,
    /// Certified lower bound on the optimal `t` within the box.
    pub lower_bound: f64,
    /// Largest per-block margin.
    pub margin: f64,
    /// Margins `ε_i`: constraints first, then positivity blocks.
    pub margins: Vec<f64>,
    pub iterations: usize,
    /// Objective value for [`minimize`].
    pub objective: Option<f64>,
    pub check: Option<CheckReport>,
    /// Whether the optimisation phase met its tolerances.
    pub converged: bool,
}

impl SolveOutcome {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Feasible
    }
}

struct Prod {
    offset: usize,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    pairs: Vec<(usize, usize)>,
}

struct Block {
    c: DMatrix<f64>,
    scalars: Vec<(usize, DMatrix<f64>)>,
    prods: Vec<Prod>,
}

struct LpRow {
    index: usize,
    sign: f64,
    c: f64,
}

/// Conic data in the form `S = C − Σ y_a A_a ⪰ 0`, `s = c − Σ y_a a_a ≥ 0`.
struct Compiled {
    ny: usize,
    blocks: Vec<Block>,
    lp: Vec<LpRow>,
    b: DVector<f64>,
}

struct Nt {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    v: DVector<f64>,
}

enum Mode<'a> {
    Feasibility { target: f64, margins: &'a [f64] },
    Optimize,
}

enum RunEnd {
    Found(Vec<f64>, CheckReport),
    Infeasible,
    Converged,
    Stalled,
}

struct RunOutput {
    y: DVector<f64>,
    end: RunEnd,
    iterations: usize,
    lower_bound: f64,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn pair_value(h: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    if i == j {
        h[(i, i)]
    } else {
        2.0 * h[(i, j)]
    }
}

impl Compiled {
    /// Blocks read `S_i = t I - M_i(x) - shift·ε_i I`; without `with_t` the
    /// epigraph variable is absent.
    fn new(
        problem: &LmiProblem,
        with_t: bool,
        margins: &[f64],
        shift: f64,
        bound: f64,
        objective: Option<&[f64]>,
    ) -> Self {
        let m = problem.num_vars();
        let ny = if with_t { m + 1 } else { m };
        let mut blocks = Vec::new();
        for (ci, c) in problem.constraints.iter().enumerate() {
            let d = c.dim();
            let cm = -&c.constant - DMatrix::identity(d, d) * (shift * margins[ci]);
            let mut scalars = Vec::new();
            let mut prods = Vec::new();
            for t in &c.terms {
                match t {
                    Term::Scalar { index, coeff } => scalars.push((*index, coeff.clone())),
                    Term::Product { var, left, right } => {
                        let v = problem.variable(*var);
                        prods.push(Prod {
                            offset: v.offset,
                            left: left.clone(),
                            right: right.clone(),
                            pairs: sym_pairs(v.dim),
                        });
                    }
                }
            }
            if with_t {
                scalars.push((m, -DMatrix::identity(d, d)));
            }
            blocks.push(Block { c: cm, scalars, prods });
        }
        let nc = problem.constraints.len();
        for (pi, id) in problem.positivity.iter().enumerate() {
            let v = problem.variable(*id);
            let d = v.dim;
            let mut scalars = Vec::new();
            let mut prods = Vec::new();
            match v.kind {
                VarKind::Scalar => scalars.push((v.offset, -DMatrix::identity(1, 1))),
                VarKind::Symmetric => prods.push(Prod {
                    offset: v.offset,
                    left: DMatrix::identity(d, d),
                    right: DMatrix::identity(d, d) * -0.5,
                    pairs: sym_pairs(d),
                }),
            }
            if with_t {
                scalars.push((m, -DMatrix::identity(d, d)));
            }
            let cm = DMatrix::identity(d, d) * -(shift * margins[nc + pi]);
            blocks.push(Block { c: cm, scalars, prods });
        }
        let mut lp = Vec::with_capacity(2 * m);
        for index in 0..m {
            lp.push(LpRow { index, sign: 1.0, c: bound });
            lp.push(LpRow { index, sign: -1.0, c: bound });
        }
        let mut b = DVector::zeros(ny);
        if with_t {
            b[m] = -1.0;
        }
        if let Some(obj) = objective {
            for (k, v) in obj.iter().enumerate() {
                b[k] = -v;
            }
        }
        Compiled { ny, blocks, lp, b }
    }

    fn block_at(&self, blk: &Block, y: &DVector<f64>) -> DMatrix<f64> {
        let d = blk.c.nrows();
        let mut out = DMatrix::zeros(d, d);
        for (k, a) in &blk.scalars {
            if y[*k] != 0.0 {
                out += a * y[*k];
            }
        }
        for p in &blk.prods {
            let n = p.left.ncols();
            let yv = unflatten(n, &y.as_slice()[p.offset..p.offset + p.pairs.len()]);
            let lyr = &p.left * yv * p.right.transpose();
            out += &lyr + lyr.transpose();
        }
        out
    }

    fn lp_at(&self, y: &DVector<f64>) -> Vec<f64> {
        self.lp.iter().map(|r| r.sign * y[r.index]).collect()
    }

    fn slack(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let ss = self
            .blocks
            .iter()
            .map(|b| sym(&(&b.c - self.block_at(b, y))))
            .collect();
        let sl = self
            .lp
            .iter()
            .zip(self.lp_at(y))
            .map(|(r, a)| r.c - a)
            .collect();
        (ss, sl)
    }

    fn a_of(&self, xs: &[DMatrix<f64>], xl: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.ny);
        for (blk, x) in self.blocks.iter().zip(xs) {
            for (k, a) in &blk.scalars {
                out[*k] += dot(a, x);
            }
            for p in &blk.prods {
                let rxl = p.right.transpose() * x * &p.left;
                let h = &rxl + rxl.transpose();
                for (q, &(i, j)) in p.pairs.iter().enumerate() {
                    out[p.offset + q] += pair_value(&h, i, j);
                }
            }
        }
        for (r, x) in self.lp.iter().zip(xl) {
            out[r.index] += r.sign * x;
        }
        out
    }

    fn schur(&self, nts: &[Nt], wl: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.ny, self.ny);
        for (blk, nt) in self.blocks.iter().zip(nts) {
            let w = &nt.w;
            let ws: Vec<DMatrix<f64>> = blk.scalars.iter().map(|(_, a)| w * a * w).collect();
            for (p, (ia, _)) in blk.scalars.iter().enumerate() {
                for (ib, ab) in &blk.scalars {
                    m[(*ia, *ib)] += dot(&ws[p], ab);
                }
                for pr in &blk.prods {
                    let g = pr.right.transpose() * &ws[p] * &pr.left;
                    let h = &g + g.transpose();
                    for (q, &(i, j)) in pr.pairs.iter().enumerate() {
                        let v = pair_value(&h, i, j);
                        m[(*ia, pr.offset + q)] += v;
                        m[(pr.offset + q, *ia)] += v;
                    }
                }
            }
            let wls: Vec<DMatrix<f64>> = blk.prods.iter().map(|p| w * &p.left).collect();
            let wrs: Vec<DMatrix<f64>> = blk.prods.iter().map(|p| w * &p.right).collect();
            for (p1, pr1) in blk.prods.iter().enumerate() {
                for (p2, pr2) in blk.prods.iter().enumerate() {
                    let a = pr1.right.transpose() * &wls[p2];
                    let b = pr2.right.transpose() * &wls[p1];
                    let c = pr1.right.transpose() * &wrs[p2];
                    let d = pr2.left.transpose() * &wls[p1];
                    product_pair(&mut m, pr1, pr2, &a, &b, &c, &d);
                }
            }
        }
        for (r, w) in self.lp.iter().zip(wl) {
            m[(r.index, r.index)] += w;
        }
        m
    }
}

/// Adds `2 Σ (A_qr B_sp + C_qr D_sp)` over the basis index pairs of both products.
fn product_pair(
    m: &mut DMatrix<f64>,
    pr1: &Prod,
    pr2: &Prod,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) {
    let n1 = a.nrows();
    let n2 = a.ncols();
    let (a, b, c, d) = (a.as_slice(), b.as_slice(), c.as_slice(), d.as_slice());
    // column-major: A[q, r] = a[q + r n1], B[s, p] = b[s + p n2]
    let f = |p: usize, q: usize, r: usize, s: usize| {
        a[q + r * n1] * b[s + p * n2] + c[q + r * n1] * d[s + p * n2]
    };
    for (k1, &(i, j)) in pr1.pairs.iter().enumerate() {
        let row = pr1.offset + k1;
        for (k2, &(k, l)) in pr2.pairs.iter().enumerate() {
            let mut v = f(i, j, k, l);
            if i != j {
                v += f(j, i, k, l);
            }
            if k != l {
                v += f(i, j, l, k);
                if i != j {
                    v += f(j, i, l, k);
                }
            }
            m[(row, pr2.offset + k2)] += 2.0 * v;
        }
    }
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Nt> {
    let lx = Cholesky::new(x.clone())?.l();
    let lsl = sym(&(lx.transpose() * s * &lx));
    let eig = SymmetricEigen::new(lsl);
    if eig.eigenvalues.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let n = x.nrows();
    let q = eig.eigenvectors;
    let quarter = eig.eigenvalues.map(|v| v.powf(0.25));
    let v = eig.eigenvalues.map(f64::sqrt);
    let mut g = &lx * &q;
    for j in 0..n {
        g.column_mut(j).scale_mut(1.0 / quarter[j]);
    }
    let linv = lx.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let mut ginv = q.transpose() * linv;
    for i in 0..n {
        ginv.row_mut(i).scale_mut(quarter[i]);
    }
    let w = sym(&(&g * g.transpose()));
    Some(Nt { g, ginv, w, v })
}

/// Largest `α` keeping `diag(v) + α Δ` positive semidefinite (∞ if unbounded).
fn max_step_scaled(v: &DVector<f64>, delta: &DMatrix<f64>) -> f64 {
    let n = v.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (delta[(i, j)] + delta[(j, i)]) / (v[i] * v[j]).sqrt();
        }
    }
    let lmin = m.symmetric_eigenvalues().min();
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn factor(m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let scale = m.diagonal().amax().max(1e-300);
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let mut reg = 1e-14 * scale;
    for _ in 0..4 {
        let mut mr = m.clone();
        for i in 0..mr.nrows() {
            mr[(i, i)] += reg;
        }
        if let Some(c) = Cholesky::new(mr) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

struct Directions {
    dy: DVector<f64>,
    dx: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dxl: Vec<f64>,
    dsl: Vec<f64>,
}

impl Compiled {
    fn directions(
        &self,
        chol: &Cholesky<f64, nalgebra::Dyn>,
        nts: &[Nt],
        wl: &[f64],
        rp: &DVector<f64>,
        rc: &[DMatrix<f64>],
        rcl: &[f64],
    ) -> Directions {
        let rhs = rp - self.a_of(rc, rcl);
        let mut dy = chol.solve(&rhs);
        let mut dir = self.expand(dy.clone(), nts, wl, rc, rcl);
        // refine against the unassembled operator: A(ΔX) should equal r_p
        for _ in 0..REFINEMENT_STEPS {
            let resid = rp - self.a_of(&dir.dx, &dir.dxl);
            if resid.amax() <= 1e-15 * (1.0 + rp.amax()) {
                break;
            }
            dy += chol.solve(&resid);
            dir = self.expand(dy.clone(), nts, wl, rc, rcl);
        }
        dir
    }

    fn expand(
        &self,
        dy: DVector<f64>,
        nts: &[Nt],
        wl: &[f64],
        rc: &[DMatrix<f64>],
        rcl: &[f64],
    ) -> Directions {
        let ds: Vec<DMatrix<f64>> = self.blocks.iter().map(|b| -sym(&self.block_at(b, &dy))).collect();
        let dx = rc
            .iter()
            .zip(&ds)
            .zip(nts)
            .map(|((r, d), nt)| sym(&(r - &nt.w * d * &nt.w)))
            .collect();
        let dsl: Vec<f64> = self.lp_at(&dy).into_iter().map(|v| -v).collect();
        let dxl = rcl.iter().zip(&dsl).zip(wl).map(|((r, d), w)| r - w * d).collect();
        Directions { dy, dx, ds, dxl, dsl }
    }

    fn step_lengths(&self, nts: &[Nt], xl: &[f64], sl: &[f64], dir: &Directions) -> (f64, f64, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        let mut dxt = Vec::with_capacity(nts.len());
        let mut dst = Vec::with_capacity(nts.len());
        for ((nt, dx), ds) in nts.iter().zip(&dir.dx).zip(&dir.ds) {
            let xt = &nt.ginv * dx * nt.ginv.transpose();
            let st = nt.g.transpose() * ds * &nt.g;
            ap = ap.min(max_step_scaled(&nt.v, &xt));
            ad = ad.min(max_step_scaled(&nt.v, &st));
            dxt.push(xt);
            dst.push(st);
        }
        for k in 0..xl.len() {
            if dir.dxl[k] < 0.0 {
                ap = ap.min(-xl[k] / dir.dxl[k]);
            }
            if dir.dsl[k] < 0.0 {
                ad = ad.min(-sl[k] / dir.dsl[k]);
            }
        }
        (ap, ad, dxt, dst)
    }

    fn run(
        &self,
        problem: &LmiProblem,
        mut y: DVector<f64>,
        mode: Mode,
        opts: &SolveOptions,
    ) -> Result<RunOutput> {
        let m = problem.num_vars();
        let mut xs: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .map(|b| DMatrix::identity(b.c.nrows(), b.c.nrows()))
            .collect();
        let mut xl = vec![1.0; self.lp.len()];
        let nu = (self.blocks.iter().map(|b| b.c.nrows()).sum::<usize>() + self.lp.len()) as f64;
        let bnorm = self.b.norm();
        let mut lower_bound = f64::NEG_INFINITY;
        let mut end = RunEnd::Stalled;
        let mut iterations = 0;
        for iter in 0..opts.max_iter {
            iterations = iter + 1;
            let (ss, sl) = self.slack(&y);
            if let Mode::Feasibility { target, margins } = mode {
                if y[m] < target {
                    let point = y.as_slice()[..m].to_vec();
                    let report = check_point_margins(problem, &point, margins)?;
                    if report.passed {
                        end = RunEnd::Found(point, report);
                        break;
                    }
                }
            }
            let rp = &self.b - self.a_of(&xs, &xl);
            let pobj: f64 = self.blocks.iter().zip(&xs).map(|(b, x)| dot(&b.c, x)).sum::<f64>()
                + self.lp.iter().zip(&xl).map(|(r, x)| r.c * x).sum::<f64>();
            let dobj = self.b.dot(&y);
            let gap: f64 = xs.iter().zip(&ss).map(|(x, s)| dot(x, s)).sum::<f64>()
                + xl.iter().zip(&sl).map(|(x, s)| x * s).sum::<f64>();
            let mu = gap / nu;
            if let Mode::Feasibility { .. } = mode {
                let rpt = rp[m];
                if 1.0 + rpt > 0.0 {
                    let rx: f64 = rp.as_slice()[..m].iter().map(|v| v.abs()).sum();
                    let lb = -(pobj + opts.bound * rx) / (1.0 + rpt);
                    lower_bound = lower_bound.max(lb);
                }
                if lower_bound > 0.0 {
                    end = RunEnd::Infeasible;
                    break;
                }
            }
            let pinf = rp.norm() / (1.0 + bnorm);
            let relgap = gap / (1.0 + pobj.abs() + dobj.abs());
            log::trace!(
                "iter {iter}: pobj {pobj:.6e} dobj {dobj:.6e} gap {gap:.3e} pinf {pinf:.3e}"
            );
            if pinf < opts.tol && relgap < opts.tol {
                end = RunEnd::Converged;
                break;
            }
            let nts: Option<Vec<Nt>> = xs.iter().zip(&ss).map(|(x, s)| nt_scaling(x, s)).collect();
            let Some(nts) = nts else {
                log::debug!("scaling failed at iteration {iter}");
                break;
            };
            let wl: Vec<f64> = xl.iter().zip(&sl).map(|(x, s)| x / s).collect();
            let Some(chol) = factor(self.schur(&nts, &wl)) else {
                log::debug!("normal equations singular at iteration {iter}");
                break;
            };

            let rc: Vec<DMatrix<f64>> = xs.iter().map(|x| -x).collect();
            let rcl: Vec<f64> = xl.iter().map(|x| -x).collect();
            let pred = self.directions(&chol, &nts, &wl, &rp, &rc, &rcl);
            let (ap, ad, dxt, dst) = self.step_lengths(&nts, &xl, &sl, &pred);
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let mut gap_aff = 0.0;
            for k in 0..xs.len() {
                gap_aff += dot(&(&xs[k] + &pred.dx[k] * ap), &(&ss[k] + &pred.ds[k] * ad));
            }
            for k in 0..xl.len() {
                gap_aff += (xl[k] + ap * pred.dxl[k]) * (sl[k] + ad * pred.dsl[k]);
            }
            let sigma = ((gap_aff / nu) / mu).clamp(0.0, 1.0).powi(3);
            let smu = sigma * mu;

            let mut rc2 = Vec::with_capacity(xs.len());
            for (k, nt) in nts.iter().enumerate() {
                let n = nt.v.len();
                let cross = &dxt[k] * &dst[k];
                let mut u = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let mut r = -0.5 * (cross[(i, j)] + cross[(j, i)]);
                        if i == j {
                            r += smu - nt.v[i] * nt.v[i];
                        }
                        u[(i, j)] = 2.0 * r / (nt.v[i] + nt.v[j]);
                    }
                }
                rc2.push(sym(&(&nt.g * u * nt.g.transpose())));
            }
            let rcl2: Vec<f64> = (0..xl.len())
                .map(|k| (smu - xl[k] * sl[k] - pred.dxl[k] * pred.dsl[k]) / sl[k])
                .collect();
            let corr = self.directions(&chol, &nts, &wl, &rp, &rc2, &rcl2);
            let (ap, ad, _, _) = self.step_lengths(&nts, &xl, &sl, &corr);
            let ap = (opts.step_fraction * ap).min(1.0);
            let ad = (opts.step_fraction * ad).min(1.0);
            for k in 0..xs.len() {
                xs[k] = sym(&(&xs[k] + &corr.dx[k] * ap));
            }
            for k in 0..xl.len() {
                xl[k] += ap * corr.dxl[k];
            }
            y += &corr.dy * ad;
            if ap.max(ad) < 1e-12 {
                log::debug!("step length collapsed at iteration {iter}");
                break;
            }
        }
        Ok(RunOutput {
            y,
            end,
            iterations,
            lower_bound,
        })
    }
}

/// Strictness margins for `problem`: constraints first, then positivity blocks.
pub fn margins(problem: &LmiProblem, uniform: Option<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = problem
        .constraints
        .iter()
        .map(|c| {
            uniform.unwrap_or_else(|| {
                let norm = c
                    .constant
                    .row_iter()
                    .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max);
                1e-7 * (1.0 + norm)
            })
        })
        .collect();
    out.extend(problem.positivity.iter().map(|_| uniform.unwrap_or(1e-7)));
    out
}

fn initial_t(problem: &LmiProblem) -> f64 {
    let lmax = problem
        .constraints
        .iter()
        .map(|c| super::jacobi::max_eigenvalue(&c.constant))
        .fold(0.0, f64::max);
    lmax + 1.0f64.max(problem.constant_norm())
}

const REFINEMENT_STEPS: usize = 2;

/// Margin inflation in the optimisation phase so its iterates pass the check strictly.
const PHASE_TWO_TIGHTENING: f64 = 1.001;

fn validate_options(opts: &SolveOptions) -> Result<()> {
    if !(opts.bound > 0.0 && opts.bound.is_finite()) {
        return Err(invalid("solver bound must be positive and finite"));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(invalid("solver tolerance and iteration limit must be positive"));
    }
    if !(opts.step_fraction > 0.0 && opts.step_fraction < 1.0) {
        return Err(invalid("step fraction must lie in (0, 1)"));
    }
    if let Some(m) = opts.margin {
        if !(m > 0.0) {
            return Err(invalid("margin must be positive"));
        }
    }
    Ok(())
}

fn feasibility(problem: &LmiProblem, opts: &SolveOptions, target: f64, margins: Vec<f64>) -> Result<SolveOutcome> {
    let m = problem.num_vars();
    let comp = Compiled::new(problem, true, &margins, 1.0, opts.bound, None);
    let mut y0 = DVector::zeros(m + 1);
    y0[m] = initial_t(problem);
    let out = comp.run(problem, y0, Mode::Feasibility { target, margins: &margins }, opts)?;
    let t = out.y[m];
    let (status, point, check) = match out.end {
        RunEnd::Found(p, r) => (SolveStatus::Feasible, Some(p), Some(r)),
        RunEnd::Infeasible => (SolveStatus::Infeasible, None, None),
        RunEnd::Converged | RunEnd::Stalled => (SolveStatus::Inconclusive, None, None),
    };
    Ok(SolveOutcome {
        status,
        point,
        t,
        lower_bound: out.lower_bound,
        margin: margins.iter().copied().fold(0.0, f64::max),
        margins,
        iterations: out.iterations,
        objective: None,
        check,
        converged: matches!(status, SolveStatus::Feasible | SolveStatus::Infeasible),
    })
}

/// Decides whether `M_i(x) ≺ -ε_i·I` for all constraints (and `X ≻ ε·I` for
/// positivity blocks) has a solution with `|x_a| ≤ bound`.
pub fn solve(problem: &LmiProblem, opts: &SolveOptions) -> Result<SolveOutcome> {
    problem.validate()?;
    validate_options(opts)?;
    feasibility(problem, opts, 0.0, margins(problem, opts.margin))
}

/// Minimises `objective · x` over the strictly feasible set (same margin and box
/// as [`solve`]). The returned point always passes the independent check.
pub fn minimize(problem: &LmiProblem, objective: &[f64], opts: &SolveOptions) -> Result<SolveOutcome> {
    problem.validate()?;
    validate_options(opts)?;
    if objective.len() != problem.num_vars() {
        return Err(invalid(format!(
            "objective has {} entries, problem has {} variables",
            objective.len(),
            problem.num_vars()
        )));
    }
    let eps = margins(problem, opts.margin);
    let slack = PHASE_TWO_TIGHTENING - 1.0;
    let target = -2.0 * slack * eps.iter().copied().fold(0.0, f64::max);
    let mut first = feasibility(problem, opts, target, eps.clone())?;
    let Some(start) = first.point.clone() else {
        return Ok(first);
    };
    let comp = Compiled::new(problem, false, &eps, PHASE_TWO_TIGHTENING, opts.bound, Some(objective));
    let out = comp.run(problem, DVector::from_vec(start.clone()), Mode::Optimize, opts)?;
    let candidate = out.y.as_slice().to_vec();
    let report = check_point_margins(problem, &candidate, &eps)?;
    let value = |p: &[f64]| p.iter().zip(objective).map(|(a, b)| a * b).sum::<f64>();
    first.iterations += out.iterations;
    if report.passed && value(&candidate) <= value(&start) {
        first.objective = Some(value(&candidate));
        first.point = Some(candidate);
        first.check = Some(report);
        first.converged = matches!(out.end, RunEnd::Converged);
    } else {
        first.objective = Some(value(&start));
        first.converged = false;
    }
    Ok(first)
}
