use heatlmi_core::modal::eigenpair;
use heatlmi_core::modal::quadrature::simpson;
use heatlmi_core::sim::*;
use heatlmi_core::synthesis::*;
use heatlmi_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::f64::consts::PI;

fn model_with(a: f64, n: usize) -> ModalModel {
    ModalModel::new(&SystemConfig {
        a,
        n,
        ..SystemConfig::default()
    })
    .unwrap()
}

fn reference(n: usize) -> (ModalModel, GainSet) {
    let m = model_with(10.0, n);
    let g = GainSet::reference(&m).unwrap();
    (m, g)
}

fn zero_gains() -> GainSet {
    GainSet::uncertified(vec![0.0], vec![0.0, 0.0])
}

#[test]
fn open_loop_first_mode_grows_exactly() {
    let (m, g) = reference(4);
    let cfg = SimConfig {
        horizon: 2.0,
        modes: Some(12),
        initial: InitialCondition::Modes { values: vec![1.0] },
        open_loop: true,
        ..SimConfig::default()
    };
    let tr = simulate_continuous(&m, &g, &cfg).unwrap();
    for (t, w) in tr.times.iter().zip(&tr.w) {
        let exact = ((10.0 - PI * PI) * t).exp();
        assert!((w[0] - exact).abs() < 1e-12 * exact);
        assert!(w[1..].iter().all(|x| *x == 0.0));
    }
    assert!(tr.u.iter().all(|u| *u == 0.0));
}

#[test]
fn pure_decay_single_step() {
    let m = model_with(0.0, 4);
    let dt = 1e-3;
    let cfg = SimConfig {
        horizon: dt,
        dt: Some(dt),
        modes: Some(8),
        initial: InitialCondition::Modes { values: vec![1.0] },
        ..SimConfig::default()
    };
    let tr = simulate_continuous(&m, &zero_gains(), &cfg).unwrap();
    assert_eq!(tr.len(), 2);
    assert!((tr.w[1][0] - (-PI * PI * dt).exp()).abs() < 1e-10);
}

// Particular solution α + βt of ẇ = μw + f0 + f1 t plus the homogeneous part.
fn affine_oracle(mu: f64, w0: f64, f0: f64, f1: f64, h: f64) -> f64 {
    let beta = -f1 / mu;
    let alpha = (beta - f0) / mu;
    alpha + beta * h + (mu * h).exp() * (w0 - alpha)
}

proptest! {
    #[test]
    fn one_step_map_is_exact(
        mu in prop_oneof![-1e5f64..-0.5, 0.5f64..20.0],
        w0 in -1.0f64..1.0,
        f0 in -10.0f64..10.0,
        f1 in -10.0f64..10.0,
        h in 1e-5f64..0.05,
    ) {
        let (e, p1, p2) = step_factors(mu, h);
        let got = e * w0 + f0 * p1 + f1 * p2;
        let want = affine_oracle(mu, w0, f0, f1, h);
        let scale = 1.0 + w0.abs() + (f0.abs() + f1.abs()) / mu.abs();
        prop_assert!((got - want).abs() < 1e-12 * scale, "{got} vs {want}");
    }

    #[test]
    fn one_step_map_small_rates(mu in -0.5f64..0.5, w0 in -1.0f64..1.0, f0 in -10.0f64..10.0, h in 1e-5f64..0.05) {
        // constant forcing: w(h) = w0 + (μ w0 + f0) ∫ e^{μs} ds, series-free via expm1
        let (e, p1, _) = step_factors(mu, h);
        let got = e * w0 + f0 * p1;
        let want = if mu == 0.0 { w0 + f0 * h } else { w0 + (mu * w0 + f0) * (mu * h).exp_m1() / mu };
        prop_assert!((got - want).abs() < 1e-12 * (1.0 + w0.abs() + f0.abs()));
    }
}

#[test]
fn estimation_error_follows_its_own_dynamics() {
    let (m, g) = reference(4);
    let n = m.n();
    let dt = 1e-3;
    let cfg = SimConfig {
        horizon: 1.0,
        dt: Some(dt),
        modes: Some(n),
        ..SimConfig::default()
    };
    let tr = simulate_continuous(&m, &g, &cfg).unwrap();
    let a = m.config.a;
    let mut l = vec![0.0; n];
    l[..m.n0()].copy_from_slice(&g.l0);
    let mut e = tr.error(0);
    let mut worst: f64 = 0.0;
    for k in 1..tr.len() {
        let ce: f64 = e.iter().zip(&m.c).map(|(x, c)| x * c).sum();
        e = (0..n)
            .map(|i| {
                let mu = a - m.lambdas[i];
                (mu * dt).exp() * e[i] - l[i] * ce * (mu * dt).exp_m1() / mu
            })
            .collect();
        for (x, y) in e.iter().zip(tr.error(k)) {
            worst = worst.max((x - y).abs());
        }
    }
    assert!(worst < 1e-8, "{worst}");

    // first-order agreement with the exact error flow
    let ao = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { a - m.lambdas[i] } else { 0.0 };
        d - l[i] * m.c[j]
    });
    let e0 = nalgebra::DVector::from_vec(tr.error(0));
    let exact = (ao * 1.0).exp() * e0;
    let last = tr.error(tr.len() - 1);
    let gap = exact.iter().zip(&last).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 10.0 * dt * exact.amax().max(1e-3), "{gap}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn tail_output_is_dominated(seed in 0u64..1000, coeffs in prop::collection::vec(-1.0f64..1.0, 1..30)) {
        let (m, g) = reference(6);
        let cfg = SimConfig {
            horizon: 0.3,
            modes: Some(40),
            initial: InitialCondition::Modes { values: coeffs },
            sampling: Sampling::Jittered { tau_y: 0.01, tau_u: 0.03, seed },
            ..SimConfig::default()
        };
        let tr = simulate_sampled(&m, &g, &cfg).unwrap();
        for k in 0..tr.len() {
            prop_assert!(tr.zeta[k] * tr.zeta[k] <= tr.tail_h1_sq[k] * (1.0 + 1e-12) + 1e-300);
            prop_assert!(tr.h1_sq[k] >= 0.0 && tr.z_h1_sq(k) >= 0.0);
        }
    }
}

#[test]
fn generalized_hold_keeps_u_continuous() {
    let (m, g) = reference(6);
    let cfg = SimConfig {
        horizon: 1.0,
        sampling: Sampling::Jittered {
            tau_y: 0.004,
            tau_u: 0.048,
            seed: 3,
        },
        ..SimConfig::default()
    };
    let (_, tu) = cfg.sampling.instants(cfg.horizon).unwrap().unwrap();
    let tr = simulate_sampled(&m, &g, &cfg).unwrap();
    let updates: Vec<f64> = tr.v_updates.iter().map(|p| p.0).collect();
    assert_eq!(updates, tu);
    for k in 1..tr.len() {
        let h = tr.times[k] - tr.times[k - 1];
        let du = tr.u[k] - tr.u[k - 1];
        assert!((du - tr.v[k - 1] * h).abs() < 1e-12 * (1.0 + tr.u[k].abs()));
        if tr.v[k] != tr.v[k - 1] {
            assert!(tu.contains(&tr.times[k]), "v changed at {}", tr.times[k]);
        }
    }
}

fn sup_gap(a: &Trajectory, b: &Trajectory, at: &[f64]) -> f64 {
    let find = |tr: &Trajectory, t: f64| tr.times.iter().position(|s| (s - t).abs() < 1e-9).unwrap();
    at.iter()
        .map(|&t| {
            let (i, j) = (find(a, t), find(b, t));
            a.w[i]
                .iter()
                .zip(&b.w[j])
                .map(|(x, y)| (x - y).abs())
                .fold((a.u[i] - b.u[j]).abs(), f64::max)
        })
        .fold(0.0, f64::max)
}

#[test]
fn dense_sampling_converges_to_continuous() {
    let (m, g) = reference(4);
    let base = SimConfig {
        horizon: 1.0,
        modes: Some(30),
        ..SimConfig::default()
    };
    let reference = simulate_continuous(&m, &g, &SimConfig { dt: Some(1e-5), ..base.clone() }).unwrap();
    let checks: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
    let gaps: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&h| {
            let cfg = SimConfig {
                dt: Some(h),
                sampling: Sampling::Uniform { tau_y: h, tau_u: h },
                ..base.clone()
            };
            sup_gap(&simulate_sampled(&m, &g, &cfg).unwrap(), &reference, &checks)
        })
        .collect();
    for (pair, h) in gaps.windows(2).zip([4e-3, 2e-3]) {
        let ratio = pair[0] / pair[1];
        assert!((1.5..2.6).contains(&ratio), "gaps {gaps:?}");
        assert!(pair[0] < 5.0 * h);
    }
}

#[test]
fn lyapunov_function_decays_at_certified_rate() {
    let (m, g) = reference(4);
    let v = verify_continuous(&m, &g, &SolveOptions::default()).unwrap();
    let cert = v.certificate.unwrap();
    let pm = DMatrix::from_fn(cert.p.len(), cert.p.len(), |i, j| cert.p[i][j]);
    let tr = simulate_continuous(&m, &g, &SimConfig { horizon: 5.0, ..SimConfig::default() }).unwrap();
    let vs = tr.lyapunov(&pm).unwrap();
    for (t, val) in tr.times.iter().zip(&vs) {
        assert!(*val <= (-2.0 * 0.1 * t).exp() * vs[0] * 1.01, "t = {t}");
    }
    assert!(tr.lyapunov(&DMatrix::identity(3, 3)).is_err());
}

#[test]
fn doubling_truncation_barely_moves_the_rate() {
    let (m, g) = reference(4);
    let rate = |modes| {
        let cfg = SimConfig { modes: Some(modes), ..SimConfig::default() };
        simulate_continuous(&m, &g, &cfg).unwrap().decay_rate(Quantity::H1PlusU, 5.0).unwrap()
    };
    let (r1, r2) = (rate(100), rate(200));
    assert!((r1 - r2).abs() < 0.01 * r1.abs());
}

#[test]
fn decay_fits() {
    let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
    let q: Vec<f64> = t.iter().map(|t| (-0.6 * t).exp()).collect();
    assert!((decay_rate_estimate(&t, &q, 10.0).unwrap() - 0.3).abs() < 1e-6);
    let long: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.1).collect();
    let q: Vec<f64> = long.iter().map(|t| (1.0 + t) * (-0.6 * t).exp()).collect();
    assert!((decay_rate_estimate(&long, &q, 400.0).unwrap() - 0.3).abs() < 0.01);
    let mut bad = vec![1.0; 5];
    bad[3] = 0.0;
    let ts = [0.0, 1.0, 2.0, 3.0, 4.0];
    assert!(matches!(decay_rate_estimate(&ts, &bad, 10.0), Err(Error::Analysis(_))));
    assert!(decay_rate_estimate(&ts, &[1.0; 5], 0.0).is_err());

    let (m, g) = reference(4);
    let open = SimConfig { open_loop: true, ..SimConfig::default() };
    let r = simulate_continuous(&m, &g, &open).unwrap().decay_rate(Quantity::H1PlusU, 5.0).unwrap();
    assert!(r < 0.0);
}

#[test]
fn norms_and_field_reconstruction() {
    assert!((h1_norm(&[1.0]) - (1.0 + PI * PI)).abs() < 1e-12);
    let grid: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
    let w = [0.3, -0.2, 0.1];
    let z = reconstruct_z(&w, 0.0, &grid);
    for (x, zx) in grid.iter().zip(&z) {
        let direct: f64 = w.iter().enumerate().map(|(i, c)| c * eigenpair(i + 1).unwrap().phi(*x)).sum();
        assert!((zx - direct).abs() < 1e-14);
    }
    let z1 = reconstruct_z(&w, 0.5, &[0.0, 1.0]);
    assert!((z1[0] - 0.5).abs() < 1e-14 && z1[1].abs() < 1e-14);
}

#[test]
fn z_norm_matches_quadrature() {
    let (m, g) = reference(4);
    let cfg = SimConfig { horizon: 0.5, modes: Some(12), ..SimConfig::default() };
    let tr = simulate_continuous(&m, &g, &cfg).unwrap();
    let k = tr.len() - 1;
    let (w, u) = (tr.w[k].clone(), tr.u[k]);
    let pairs: Vec<_> = (1..=w.len()).map(|i| eigenpair(i).unwrap()).collect();
    let z = |x: f64| pairs.iter().zip(&w).map(|(e, c)| c * e.phi(x)).sum::<f64>() + (1.0 - x) * u;
    let dz = |x: f64| pairs.iter().zip(&w).map(|(e, c)| c * e.dphi(x)).sum::<f64>() - u;
    let quad = simpson(|x| z(x).powi(2) + dz(x).powi(2), 0.0, 1.0, 4000);
    assert!((tr.z_h1_sq(k) - quad).abs() < 1e-8 * quad);
}

#[test]
fn argument_errors() {
    let (m, g) = reference(6);
    let bad_dt = SimConfig { dt: Some(0.0), ..SimConfig::default() };
    assert!(simulate_continuous(&m, &g, &bad_dt).is_err());
    let few = SimConfig { modes: Some(5), ..SimConfig::default() };
    assert!(simulate_continuous(&m, &g, &few).is_err());
    let sampled = SimConfig {
        sampling: Sampling::Uniform { tau_y: 0.01, tau_u: 0.01 },
        ..SimConfig::default()
    };
    assert!(simulate_continuous(&m, &g, &sampled).is_err());
    assert!(simulate_sampled(&m, &g, &SimConfig::default()).is_err());
    let unordered = SimConfig {
        horizon: 0.1,
        sampling: Sampling::Explicit {
            tau_y: 0.1,
            tau_u: 0.1,
            s: vec![0.0, 0.06, 0.05],
            t: vec![0.0, 0.05],
        },
        ..SimConfig::default()
    };
    assert!(matches!(simulate_sampled(&m, &g, &unordered), Err(Error::InvalidArgument(_))));
    assert_eq!(SimConfig::default().modes_for(40), 120);
}
