//! Spectral closed-loop simulation of the plant modes and the finite-dimensional observer.
//!
//! Each mode is advanced with the exact integrating factor `e^{(a-λ_n)h}`. Within a
//! step the control derivative and the innovation are frozen, so `u` is linear in time
//! and the forcing of every mode is affine, which the `φ1`/`φ2` functions integrate
//! exactly.

mod sampling;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::modal::quadrature::simpson;
use crate::modal::{eigenpair, input_coeff, output_coeff, ModalModel};
use crate::synthesis::GainSet;

pub use sampling::Sampling;

/// Default step bound.
pub const DEFAULT_DT: f64 = 1e-3;
/// Minimum default plant truncation.
pub const DEFAULT_MODES: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    /// `w₀(x) = x(1 - x)`, projected exactly.
    #[default]
    Parabola,
    /// Coefficients `w_1(0), w_2(0), ...`; missing entries are zero.
    Modes { values: Vec<f64> },
}

impl InitialCondition {
    pub fn coefficients(&self, m: usize) -> Result<Vec<f64>> {
        match self {
            InitialCondition::Parabola => Ok((1..=m).map(parabola_coeff).collect()),
            InitialCondition::Modes { values } => {
                if values.len() > m {
                    return Err(invalid(format!(
                        "{} initial coefficients given for {m} modes",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("initial coefficients must be finite"));
                }
                let mut out = values.clone();
                out.resize(m, 0.0);
                Ok(out)
            }
        }
    }
}

/// `⟨x(1-x), φ_n⟩ = 4√2 / (nπ)³` for odd `n`, zero otherwise.
fn parabola_coeff(n: usize) -> f64 {
    if n % 2 == 0 {
        0.0
    } else {
        let k = n as f64 * std::f64::consts::PI;
        4.0 * std::f64::consts::SQRT_2 / (k * k * k)
    }
}

/// Projects `f` onto `φ_1..φ_m` by Simpson quadrature.
pub fn project<F: Fn(f64) -> f64>(f: F, m: usize, intervals: usize) -> Result<Vec<f64>> {
    let (f0, f1) = (f(0.0), f(1.0));
    if f0.abs() > 1e-12 || f1.abs() > 1e-12 {
        return Err(invalid(format!(
            "initial function must vanish at both ends (got {f0}, {f1})"
        )));
    }
    let intervals = intervals.max(20 * m);
    (1..=m)
        .map(|n| {
            let e = eigenpair(n)?;
            Ok(simpson(|x| f(x) * e.phi(x), 0.0, 1.0, intervals))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Plant truncation `M`; `None` means `max(100, 3N)`.
    pub modes: Option<usize>,
    pub horizon: f64,
    /// Step bound; `None` means `min(1e-3, half the smallest sampling increment)`.
    pub dt: Option<f64>,
    pub initial: InitialCondition,
    pub sampling: Sampling,
    /// Forces `v ≡ 0` and switches off output injection.
    pub open_loop: bool,
    /// Keep every k-th step (the final step is always kept).
    pub store_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            modes: None,
            horizon: 10.0,
            dt: None,
            initial: InitialCondition::Parabola,
            sampling: Sampling::Continuous,
            open_loop: false,
            store_every: 1,
        }
    }
}

impl SimConfig {
    pub fn modes_for(&self, n: usize) -> usize {
        self.modes.unwrap_or(DEFAULT_MODES.max(3 * n))
    }
}

/// Stored samples of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Plant coefficients `w_1..w_M` per stored time.
    pub w: Vec<Vec<f64>>,
    /// Observer coefficients `ŵ_1..ŵ_N` per stored time.
    pub what: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    /// Control derivative in effect from each stored time on.
    pub v: Vec<f64>,
    /// `y = w(x*) + (1 - x*) u`.
    pub y: Vec<f64>,
    /// `Σ λ_n w_n²`.
    pub h1_sq: Vec<f64>,
    pub usq: Vec<f64>,
    /// `Σ_{N<n≤M} c_n w_n`.
    pub zeta: Vec<f64>,
    /// `Σ_{n>N} λ_n w_n²`.
    pub tail_h1_sq: Vec<f64>,
    /// `(t_j, v(t_j))` for every hold update (every step in continuous mode).
    pub v_updates: Vec<(f64, f64)>,
    pub lambdas: Vec<f64>,
    pub b: Vec<f64>,
    pub x_star: f64,
    pub n0: usize,
    pub n: usize,
    pub steps: usize,
}

/// Scalar series for decay-rate fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `Σ λ_n w_n² + u²`.
    H1PlusU,
    /// `Σ λ_n w_n²`.
    H1,
    /// `‖z‖²_{H¹}` with `z = w + (1 - x) u`.
    ZH1,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    /// `e_n = w_n - ŵ_n`, `n = 1..N`, at stored index `k`.
    pub fn error(&self, k: usize) -> Vec<f64> {
        self.what[k]
            .iter()
            .zip(&self.w[k])
            .map(|(h, w)| w - h)
            .collect()
    }

    /// `‖z‖²_{H¹} = Σ(1+λ_n)w_n² + 2u Σ b_n w_n + (4/3)u²`.
    pub fn z_h1_sq(&self, k: usize) -> f64 {
        let u = self.u[k];
        let mut acc = 0.0;
        let mut cross = 0.0;
        for ((w, l), b) in self.w[k].iter().zip(&self.lambdas).zip(&self.b) {
            acc += (1.0 + l) * w * w;
            cross += b * w;
        }
        acc + 2.0 * u * cross + 4.0 / 3.0 * u * u
    }

    pub fn series(&self, q: Quantity) -> Vec<f64> {
        match q {
            Quantity::H1PlusU => self.h1_sq.iter().zip(&self.usq).map(|(a, b)| a + b).collect(),
            Quantity::H1 => self.h1_sq.clone(),
            Quantity::ZH1 => (0..self.len()).map(|k| self.z_h1_sq(k)).collect(),
        }
    }

    /// `V = |X|²_P + Σ_{n>N} λ_n w_n²` with `X = [u, ŵ^{N0}, e^{N0}, ŵ^{tail}, e^{tail}]`.
    pub fn lyapunov(&self, p: &DMatrix<f64>) -> Result<Vec<f64>> {
        let dim = 2 * self.n + 1;
        if p.nrows() != dim || p.ncols() != dim {
            return Err(Error::Dimension(format!(
                "P is {}x{}, expected {dim}x{dim}",
                p.nrows(),
                p.ncols()
            )));
        }
        Ok((0..self.len())
            .map(|k| {
                let x = self.state_vector(k);
                (x.transpose() * p * &x)[(0, 0)] + self.tail_h1_sq[k]
            })
            .collect())
    }

    fn state_vector(&self, k: usize) -> DVector<f64> {
        let (n0, n) = (self.n0, self.n);
        let e = self.error(k);
        let wh = &self.what[k];
        let mut x = Vec::with_capacity(2 * n + 1);
        x.push(self.u[k]);
        x.extend_from_slice(&wh[..n0]);
        x.extend_from_slice(&e[..n0]);
        x.extend_from_slice(&wh[n0..]);
        x.extend_from_slice(&e[n0..]);
        DVector::from_vec(x)
    }

    /// Fitted rate over the trailing `window`, halved so it compares against `δ`.
    pub fn decay_rate(&self, q: Quantity, window: f64) -> Result<f64> {
        decay_rate_estimate(&self.times, &self.series(q), window)
    }

    /// Field `z(x, t_k)` on `grid` for every stored time.
    pub fn reconstruct_z(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|k| reconstruct_z(&self.w[k], self.u[k], grid))
            .collect()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["time", "u", "v", "y", "h1_sq", "usq", "zeta"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((1..=self.modes()).map(|i| format!("w_{i}")));
        h.extend((1..=self.n).map(|i| format!("what_{i}")));
        h
    }

    pub fn csv_row(&self, k: usize) -> Vec<f64> {
        let mut r = vec![
            self.times[k],
            self.u[k],
            self.v[k],
            self.y[k],
            self.h1_sq[k],
            self.usq[k],
            self.zeta[k],
        ];
        r.extend_from_slice(&self.w[k]);
        r.extend_from_slice(&self.what[k]);
        r
    }
}

/// `Σ(1 + λ_n) h_n²`.
pub fn h1_norm(coeffs: &[f64]) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let k = (i + 1) as f64 * std::f64::consts::PI;
            (1.0 + k * k) * h * h
        })
        .sum()
}

/// `z(x) = Σ w_n φ_n(x) + (1 - x) u`.
pub fn reconstruct_z(w: &[f64], u: f64, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&x| {
            let s: f64 = w
                .iter()
                .enumerate()
                .map(|(i, wn)| wn * eigenpair(i + 1).map(|e| e.phi(x)).unwrap_or(0.0))
                .sum();
            s + (1.0 - x) * u
        })
        .collect()
}

/// Least-squares slope of `ln q` on the trailing `window`, returned as `-slope / 2`.
pub fn decay_rate_estimate(times: &[f64], values: &[f64], window: f64) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::Dimension(format!(
            "{} times and {} values",
            times.len(),
            values.len()
        )));
    }
    let Some(&end) = times.last() else {
        return Err(Error::Analysis("empty series".into()));
    };
    if !(window > 0.0) {
        return Err(invalid("fit window must be positive"));
    }
    let start = end - window;
    let mut pts = Vec::new();
    for (&t, &q) in times.iter().zip(values) {
        if t + 1e-12 < start {
            continue;
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::Analysis(format!(
                "quantity {q} at t = {t} is not positive"
            )));
        }
        pts.push((t, q.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::Analysis("fewer than two samples in the fit window".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in &pts {
        sxy += (t - mt) * (y - my);
        sxx += (t - mt) * (t - mt);
    }
    if sxx == 0.0 {
        return Err(Error::Analysis("degenerate fit window".into()));
    }
    Ok(-0.5 * sxy / sxx)
}

/// `(e^{μh}, φ1, φ2)` with `φ1 = ∫_0^h e^{μ(h-s)} ds` and `φ2 = ∫_0^h e^{μ(h-s)} s ds`.
pub fn step_factors(mu: f64, h: f64) -> (f64, f64, f64) {
    let z = mu * h;
    if z.abs() < 1e-3 {
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        let mut zk = 1.0;
        let mut fact1 = 1.0;
        for k in 0..8 {
            fact1 *= (k + 1) as f64;
            f1 += zk / fact1;
            f2 += zk / (fact1 * (k + 2) as f64);
            zk *= z;
        }
        (z.exp(), h * f1, h * h * f2)
    } else {
        let em1 = z.exp_m1();
        (em1 + 1.0, em1 / mu, (em1 - z) / (mu * mu))
    }
}

/// Continuous measurement and control.
pub fn simulate_continuous(model: &ModalModel, gains: &GainSet, cfg: &SimConfig) -> Result<Trajectory> {
    if !cfg.sampling.is_continuous() {
        return Err(invalid("simulate_continuous needs continuous sampling"));
    }
    run(model, gains, cfg)
}

/// Sample-and-hold measurement with a generalized hold on the control derivative.
pub fn simulate_sampled(model: &ModalModel, gains: &GainSet, cfg: &SimConfig) -> Result<Trajectory> {
    if cfg.sampling.is_continuous() {
        return Err(invalid("simulate_sampled needs sampling sequences"));
    }
    run(model, gains, cfg)
}

/// Dispatches on `cfg.sampling`.
pub fn simulate(model: &ModalModel, gains: &GainSet, cfg: &SimConfig) -> Result<Trajectory> {
    run(model, gains, cfg)
}

fn step_grid(horizon: f64, dt: f64, events: &[f64]) -> Vec<f64> {
    let mut marks: Vec<f64> = events.iter().copied().filter(|t| *t < horizon).collect();
    marks.push(0.0);
    marks.push(horizon);
    marks.sort_by(f64::total_cmp);
    marks.dedup();
    let mut grid = vec![0.0];
    for pair in marks.windows(2) {
        let len = pair[1] - pair[0];
        let k = ((len / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        for i in 1..k {
            grid.push(pair[0] + len * i as f64 / k as f64);
        }
        grid.push(pair[1]);
    }
    grid
}

fn run(model: &ModalModel, gains: &GainSet, cfg: &SimConfig) -> Result<Trajectory> {
    let (n0, n) = (model.n0(), model.n());
    let a = model.config.a;
    let x_star = model.config.x_star;
    let m = cfg.modes_for(n);
    if m < n {
        return Err(invalid(format!("plant truncation M = {m} is below N = {n}")));
    }
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return Err(invalid(format!("horizon {} must be positive", cfg.horizon)));
    }
    if let Some(dt) = cfg.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("step {dt} must be positive")));
        }
    }
    if cfg.store_every == 0 {
        return Err(invalid("store_every must be at least 1"));
    }
    if gains.l0.len() != n0 || gains.k0.len() != n0 + 1 {
        return Err(Error::Dimension(format!(
            "gains have |L0| = {}, |K0| = {}, expected {n0} and {}",
            gains.l0.len(),
            gains.k0.len(),
            n0 + 1
        )));
    }

    let instants = cfg.sampling.instants(cfg.horizon)?;
    let dt = match (cfg.dt, &instants) {
        (Some(dt), _) => dt,
        (None, None) => DEFAULT_DT,
        (None, Some((s, t))) => {
            let smallest = s
                .windows(2)
                .chain(t.windows(2))
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            DEFAULT_DT.min(0.5 * smallest)
        }
    };
    let grid = match &instants {
        None => step_grid(cfg.horizon, dt, &[]),
        Some((s, t)) => {
            let mut ev = s.clone();
            ev.extend_from_slice(t);
            step_grid(cfg.horizon, dt, &ev)
        }
    };

    let lambdas: Vec<f64> = (1..=m).map(|k| eigenpair(k).map(|e| e.lambda)).collect::<Result<_>>()?;
    let b: Vec<f64> = (1..=m).map(input_coeff).collect::<Result<_>>()?;
    let c: Vec<f64> = (1..=m).map(|k| output_coeff(k, x_star)).collect::<Result<_>>()?;
    let r = 1.0 - x_star;
    let mut l = vec![0.0; n];
    if !cfg.open_loop {
        l[..n0].copy_from_slice(&gains.l0);
    }

    let mut w = cfg.initial.coefficients(m)?;
    let mut wh = vec![0.0; n];
    let mut u = 0.0;
    let mut v = 0.0;
    let mut iota = 0.0;

    let mut traj = Trajectory {
        times: Vec::new(),
        w: Vec::new(),
        what: Vec::new(),
        u: Vec::new(),
        v: Vec::new(),
        y: Vec::new(),
        h1_sq: Vec::new(),
        usq: Vec::new(),
        zeta: Vec::new(),
        tail_h1_sq: Vec::new(),
        v_updates: Vec::new(),
        lambdas: lambdas.clone(),
        b: b.clone(),
        x_star,
        n0,
        n,
        steps: grid.len() - 1,
    };

    let control = |u: f64, wh: &[f64]| -> f64 {
        gains.k0[0] * u + gains.k0[1..].iter().zip(wh).map(|(k, x)| k * x).sum::<f64>()
    };
    let innovation = |w: &[f64], wh: &[f64]| -> f64 {
        let est: f64 = c[..n].iter().zip(wh).map(|(c, x)| c * x).sum();
        let meas: f64 = c.iter().zip(w).map(|(c, x)| c * x).sum();
        est - meas
    };

    let (mut is, mut iu) = (0usize, 0usize);
    let mut cache_h = f64::NAN;
    let mut factors = vec![(0.0, 0.0, 0.0); m];

    for k in 0..grid.len() {
        let t = grid[k];
        let last = k + 1 == grid.len();
        if !last && !cfg.open_loop {
            match &instants {
                None => {
                    iota = innovation(&w, &wh);
                    v = control(u, &wh[..n0]);
                    traj.v_updates.push((t, v));
                }
                Some((s, tu)) => {
                    if is < s.len() && s[is] == t {
                        iota = innovation(&w, &wh);
                        is += 1;
                    }
                    if iu < tu.len() && tu[iu] == t {
                        v = control(u, &wh[..n0]);
                        traj.v_updates.push((t, v));
                        iu += 1;
                    }
                }
            }
        }
        if k % cfg.store_every == 0 || last {
            record(&mut traj, t, &w, &wh, u, v, &c, r, &lambdas, n);
        }
        if last {
            break;
        }
        let h = grid[k + 1] - t;
        if h != cache_h {
            for (f, lam) in factors.iter_mut().zip(&lambdas) {
                *f = step_factors(a - lam, h);
            }
            cache_h = h;
        }
        for i in 0..m {
            let (e, p1, p2) = factors[i];
            let f0 = a * b[i] * u - b[i] * v;
            let f1 = a * b[i] * v;
            w[i] = e * w[i] + f0 * p1 + f1 * p2;
            if i < n {
                wh[i] = e * wh[i] + (f0 - l[i] * iota) * p1 + f1 * p2;
            }
        }
        u += v * h;
        if !(u.is_finite() && w.iter().all(|x| x.is_finite())) {
            return Err(Error::Analysis(format!("state diverged at t = {}", grid[k + 1])));
        }
    }
    Ok(traj)
}

#[allow(clippy::too_many_arguments)]
fn record(
    traj: &mut Trajectory,
    t: f64,
    w: &[f64],
    wh: &[f64],
    u: f64,
    v: f64,
    c: &[f64],
    r: f64,
    lambdas: &[f64],
    n: usize,
) {
    let h1: f64 = w.iter().zip(lambdas).map(|(x, l)| l * x * x).sum();
    let tail: f64 = w[n..].iter().zip(&lambdas[n..]).map(|(x, l)| l * x * x).sum();
    let zeta: f64 = w[n..].iter().zip(&c[n..]).map(|(x, c)| c * x).sum();
    let y: f64 = w.iter().zip(c).map(|(x, c)| c * x).sum::<f64>() + r * u;
    traj.times.push(t);
    traj.w.push(w.to_vec());
    traj.what.push(wh.to_vec());
    traj.u.push(u);
    traj.v.push(v);
    traj.y.push(y);
    traj.h1_sq.push(h1);
    traj.usq.push(u * u);
    traj.zeta.push(zeta);
    traj.tail_h1_sq.push(tail);
}
