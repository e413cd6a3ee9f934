//! Spectral data of the Dirichlet Laplacian on `[0, 1]` and the reduced-order
//! matrices of the dynamically extended modal model.
//!
//! With `w = z - (1 - x) u` and `u̇ = v`, each mode obeys
//! `ẇ_n = (-λ_n + a) w_n + a b_n u - b_n v` where `λ_n = n²π²`,
//! `b_n = ⟨1 - x, φ_n⟩ = √(2/λ_n)` and the point sensor sees `c_n = φ_n(x*)`.

pub mod quadrature;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Default floor on `|c_n|` for the controlled modes.
pub const DEFAULT_ASSUMPTION_TOL: f64 = 1e-6;

/// `sin(π t)` with exact zeros at integer `t`.
pub(crate) fn sin_pi(t: f64) -> f64 {
    let mut r = t.rem_euclid(2.0);
    let mut sign = 1.0;
    if r >= 1.0 {
        r -= 1.0;
        sign = -1.0;
    }
    if r == 0.0 {
        return 0.0;
    }
    if r > 0.5 {
        r = 1.0 - r;
    }
    sign * (PI * r).sin()
}

/// Physical and design parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Reaction coefficient.
    pub a: f64,
    /// Sensor location in `(0, 1)`.
    pub x_star: f64,
    /// Target decay rate for the continuous-time design.
    pub delta: f64,
    /// Halanay rates, `delta0 > delta1 > 0`.
    pub delta0: f64,
    pub delta1: f64,
    /// Upper bounds on the measurement and hold sampling intervals.
    pub tau_my: f64,
    pub tau_mu: f64,
    /// Controller-model dimension.
    pub n0: usize,
    /// Observer dimension, `n >= n0`.
    pub n: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            a: 10.0,
            x_star: std::f64::consts::FRAC_1_SQRT_2,
            delta: 0.1,
            delta0: 6.0,
            delta1: 5.9,
            tau_my: 0.002,
            tau_mu: 0.048,
            n0: 1,
            n: 4,
        }
    }
}

impl SystemConfig {
    /// Builds a configuration whose `n0` is the smallest admissible value for `a` and `delta`.
    pub fn with_auto_n0(a: f64, x_star: f64, delta: f64, n: usize) -> Self {
        let n0 = select_n0(a, delta);
        Self {
            a,
            x_star,
            delta,
            n0,
            n: n.max(n0),
            ..Self::default()
        }
    }

    pub fn validate(&self, sampled: bool) -> Result<()> {
        if !(self.x_star > 0.0 && self.x_star < 1.0) {
            return Err(Error::Configuration(format!(
                "x_star = {} must lie in (0, 1)",
                self.x_star
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Configuration(format!("delta = {} must be nonnegative", self.delta)));
        }
        if !self.a.is_finite() {
            return Err(Error::Configuration("reaction coefficient must be finite".into()));
        }
        if self.n0 < 1 || self.n0 > self.n {
            return Err(Error::Configuration(format!(
                "dimensions must satisfy 1 <= n0 <= n (got n0 = {}, n = {})",
                self.n0, self.n
            )));
        }
        if sampled {
            if !(self.delta0 > self.delta1 && self.delta1 > 0.0) {
                return Err(Error::Configuration(format!(
                    "Halanay rates must satisfy delta0 > delta1 > 0 (got {} and {})",
                    self.delta0, self.delta1
                )));
            }
            if !(self.tau_my > 0.0 && self.tau_mu > 0.0) {
                return Err(Error::Configuration(
                    "sampling bounds tau_my and tau_mu must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `λ_n = n²π²`.
pub fn eigenvalue(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(invalid("mode index must be >= 1"));
    }
    let k = n as f64 * PI;
    Ok(k * k)
}

/// Dirichlet eigenpair `(λ_n, φ_n)` with `φ_n(x) = √2 sin(nπx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpair {
    pub index: usize,
    pub lambda: f64,
}

impl Eigenpair {
    pub fn phi(&self, x: f64) -> f64 {
        std::f64::consts::SQRT_2 * sin_pi(self.index as f64 * x)
    }

    pub fn dphi(&self, x: f64) -> f64 {
        let k = self.index as f64 * PI;
        std::f64::consts::SQRT_2 * k * (k * x).cos()
    }
}

pub fn eigenpair(n: usize) -> Result<Eigenpair> {
    Ok(Eigenpair {
        index: n,
        lambda: eigenvalue(n)?,
    })
}

/// `b_n = ⟨1 - x, φ_n⟩ = √2 / (nπ)`.
pub fn input_coeff(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(invalid("mode index must be >= 1"));
    }
    Ok(std::f64::consts::SQRT_2 / (n as f64 * PI))
}

/// `c_n = φ_n(x*)`.
pub fn output_coeff(n: usize, x_star: f64) -> Result<f64> {
    if !(x_star > 0.0 && x_star < 1.0) {
        return Err(invalid(format!("sensor location {x_star} outside (0, 1)")));
    }
    Ok(eigenpair(n)?.phi(x_star))
}

/// Smallest `N0 >= 1` with `-λ_n + a < -δ` for every `n > N0`.
pub fn select_n0(a: f64, delta: f64) -> usize {
    let mut n0 = 1usize;
    loop {
        let k = (n0 + 1) as f64 * PI;
        if k * k > a + delta {
            return n0;
        }
        n0 += 1;
    }
}

/// Index of the first controlled mode whose output coefficient is not above `tol`.
pub fn first_assumption1_violation(x_star: f64, n0: usize, tol: f64) -> Option<(usize, f64)> {
    (1..=n0).find_map(|n| {
        let c = eigenpair(n).map(|e| e.phi(x_star)).unwrap_or(0.0);
        (c.abs() <= tol).then_some((n, c))
    })
}

/// True iff `|c_n| > tol` for `n = 1..=n0`.
pub fn check_assumption1(x_star: f64, n0: usize, tol: f64) -> bool {
    first_assumption1_violation(x_star, n0, tol).is_none()
}

/// Integral bounds on the modal tails beyond `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBounds {
    /// Bound on `Σ_{n>N} b_n²`, equal to `2 / (π² N)`.
    pub b_sq: f64,
    /// Bound on `Σ_{n>N} λ_n^{-3/4}`, equal to `2 / (√N π^{3/2})`.
    pub lambda_34: f64,
}

pub fn tail_bounds(n: usize) -> Result<TailBounds> {
    if n < 1 {
        return Err(invalid("tail bounds need N >= 1"));
    }
    let nf = n as f64;
    Ok(TailBounds {
        b_sq: 2.0 / (PI * PI * nf),
        lambda_34: 2.0 / (nf.sqrt() * PI.powf(1.5)),
    })
}

/// Modal coefficients and reduced matrices for a fixed `(N0, N)` split.
#[derive(Debug, Clone)]
pub struct ModalModel {
    pub config: SystemConfig,
    /// `λ_1..λ_{N+1}`.
    pub lambdas: Vec<f64>,
    /// `b_1..b_{N+1}`.
    pub b: Vec<f64>,
    /// `c_1..c_{N+1}`.
    pub c: Vec<f64>,
    pub a0: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    pub c0: DMatrix<f64>,
    /// Column `[1, -b_1, ..., -b_{N0}]ᵀ`.
    pub b_tilde0: DMatrix<f64>,
    /// `[[0, 0], [a B0ᵀ, A0]]`.
    pub a_tilde0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub c1: DMatrix<f64>,
}

impl ModalModel {
    /// Builds the reduced matrices, checking the sensor placement with the default tolerance.
    pub fn new(config: &SystemConfig) -> Result<Self> {
        Self::with_tolerance(config, DEFAULT_ASSUMPTION_TOL)
    }

    pub fn with_tolerance(config: &SystemConfig, tol: f64) -> Result<Self> {
        config.validate(false)?;
        if let Some((index, value)) = first_assumption1_violation(config.x_star, config.n0, tol) {
            return Err(Error::Assumption { index, value, tol });
        }
        let (n0, n, a) = (config.n0, config.n, config.a);
        let lambdas: Vec<f64> = (1..=n + 1).map(|k| eigenvalue(k).unwrap()).collect();
        let b: Vec<f64> = (1..=n + 1).map(|k| input_coeff(k).unwrap()).collect();
        let c: Vec<f64> = (1..=n + 1)
            .map(|k| output_coeff(k, config.x_star).unwrap())
            .collect();

        let a0 = DMatrix::from_fn(n0, n0, |i, j| if i == j { a - lambdas[i] } else { 0.0 });
        let b0 = DMatrix::from_fn(1, n0, |_, j| b[j]);
        let c0 = DMatrix::from_fn(1, n0, |_, j| c[j]);
        let b_tilde0 = DMatrix::from_fn(n0 + 1, 1, |i, _| if i == 0 { 1.0 } else { -b[i - 1] });
        let mut a_tilde0 = DMatrix::zeros(n0 + 1, n0 + 1);
        for i in 0..n0 {
            a_tilde0[(i + 1, 0)] = a * b[i];
            a_tilde0[(i + 1, i + 1)] = a - lambdas[i];
        }
        let m1 = n - n0;
        let a1 = DMatrix::from_fn(m1, m1, |i, j| if i == j { a - lambdas[n0 + i] } else { 0.0 });
        let b1 = DMatrix::from_fn(m1, 1, |i, _| b[n0 + i]);
        let c1 = DMatrix::from_fn(1, m1, |_, j| c[n0 + j]);
        Ok(Self {
            config: config.clone(),
            lambdas,
            b,
            c,
            a0,
            b0,
            c0,
            b_tilde0,
            a_tilde0,
            a1,
            b1,
            c1,
        })
    }

    pub fn n0(&self) -> usize {
        self.config.n0
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    /// `λ_k` for `1 <= k <= N + 1`.
    pub fn lambda(&self, k: usize) -> f64 {
        self.lambdas[k - 1]
    }

    pub fn is_observable(&self) -> bool {
        let o = linalg::observability_matrix(&self.a0, &self.c0);
        linalg::rank(&o, 1e-12) == self.n0()
    }

    pub fn is_controllable(&self) -> bool {
        let k = linalg::controllability_matrix(&self.a_tilde0, &self.b_tilde0);
        linalg::rank(&k, 1e-12) == self.n0() + 1
    }
}
