use heatlmi_core::linalg::{eigenvalues, max_eig_sym, min_eig_sym};
use heatlmi_core::sdp::{check_point, margins, check_point_margins, solve};
use heatlmi_core::synthesis::*;
use heatlmi_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::f64::consts::PI;

fn model(n: usize) -> ModalModel {
    let cfg = SystemConfig {
        n,
        ..SystemConfig::default()
    };
    ModalModel::new(&cfg).unwrap()
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

// Eigenvalues of [[p, q], [r, s]] from the characteristic polynomial.
fn eig2(p: f64, q: f64, r: f64, s: f64) -> (f64, f64) {
    let tr = p + s;
    let det = p * s - q * r;
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        (tr / 2.0, tr / 2.0)
    } else {
        (tr / 2.0 + disc.sqrt(), tr / 2.0 - disc.sqrt())
    }
}

#[test]
fn observer_gain_threshold() {
    let m = model(4);
    let c1 = (PI / 2f64.sqrt()).sin() * 2f64.sqrt();
    let threshold = (10.0 - PI * PI + 0.1) / c1;
    assert!((threshold - 0.2045).abs() < 5e-4);
    let k0 = REFERENCE_K0.to_vec();
    let pass = verify_gains(&GainSet::uncertified(vec![threshold + 1e-3], k0.clone()), &m).unwrap();
    let fail = verify_gains(&GainSet::uncertified(vec![threshold - 1e-3], k0), &m).unwrap();
    assert!(pass.observer_ok && !fail.observer_ok);
}

#[test]
fn reference_gains_pass_with_oracle_spectrum() {
    let m = model(4);
    let g = GainSet::reference(&m).unwrap();
    let r = verify_gains(&g, &m).unwrap();
    assert!(r.passed());
    let b1 = 2f64.sqrt() / PI;
    let (k1, k2) = (REFERENCE_K0[0], REFERENCE_K0[1]);
    let (e1, e2) = eig2(k1, k2, 10.0 * b1 - b1 * k1, 10.0 - PI * PI - b1 * k2);
    assert!((e1.max(e2) - r.controller_abscissa).abs() < 1e-10);
    assert!((r.controller_abscissa + 1.17).abs() < 0.01);
    let c1 = 2f64.sqrt() * (PI / 2f64.sqrt()).sin();
    assert!((r.observer_abscissa - (10.0 - PI * PI - 0.7062 * c1)).abs() < 1e-12);
    assert!((r.observer_abscissa + 0.665).abs() < 2e-3);
}

#[test]
fn zero_gains_fail() {
    let m = model(4);
    let r = verify_gains(&GainSet::uncertified(vec![0.0], vec![0.0, 0.0]), &m).unwrap();
    assert!(!r.observer_ok && !r.controller_ok);
    assert!(r.observer_abscissa > 0.0);
}

#[test]
fn gain_dimensions_are_checked() {
    let m = model(4);
    assert!(verify_gains(&GainSet::uncertified(vec![0.7, 0.1], vec![0.0, 0.0]), &m).is_err());
    assert!(assemble_closed_loop(&m, &GainSet::uncertified(vec![0.7], vec![0.0])).is_err());
}

#[test]
fn designed_gains_are_certified() {
    let m = model(4);
    let g = design_gains(&m, 0.1).unwrap();
    assert!(g.margin >= 0.1 - 1e-9);
    let r = verify_gains(&g, &m).unwrap();
    assert!(r.passed());
    assert!(r.observer_max_eig.unwrap() <= -g.margin + 1e-9);
    assert!(r.controller_max_eig.unwrap() <= -g.margin + 1e-9);
    assert!(min_eig_sym(&g.po_matrix().unwrap()) > 0.0);
    assert!(min_eig_sym(&g.pc_matrix().unwrap()) > 0.0);
}

#[test]
fn zero_decay_with_stable_plant() {
    let cfg = SystemConfig {
        a: -5.0,
        delta: 0.0,
        n: 3,
        ..SystemConfig::default()
    };
    let m = ModalModel::new(&cfg).unwrap();
    assert_eq!(m.n0(), 1);
    let g = design_gains(&m, 0.1).unwrap();
    let r = verify_gains(&g, &m).unwrap();
    assert!(r.passed());
    assert!(r.observer_abscissa < 0.0 && r.controller_abscissa < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn lyapunov_inequality_is_homogeneous(c in 0.01f64..100.0) {
        let m = model(4);
        let g = GainSet::reference(&m).unwrap();
        for (p, a) in [
            (g.po_matrix().unwrap(), observer_matrix(&m, &g.l0_matrix())),
            (g.pc_matrix().unwrap(), controller_matrix(&m, &g.k0_matrix())),
        ] {
            let base = max_eig_sym(&lyapunov_form(&p, &a, 0.1));
            let scaled = max_eig_sym(&lyapunov_form(&(&p * c), &a, 0.1));
            prop_assert!(base < 0.0);
            prop_assert!((scaled - c * base).abs() <= 1e-9 * c * base.abs().max(1.0));
        }
    }
}

#[test]
fn block_spectrum_identity() {
    for n in [1, 4, 6, 14] {
        let m = model(n);
        let g = GainSet::reference(&m).unwrap();
        let cl = assemble_closed_loop(&m, &g).unwrap();
        assert_eq!(cl.f.nrows(), 2 * n + 1);
        let mut full = eigenvalues(&cl.f);
        let blocks: Vec<_> = cl
            .diagonal_blocks()
            .iter()
            .filter(|b| b.nrows() > 0)
            .flat_map(eigenvalues)
            .collect();
        assert_eq!(blocks.len(), full.len());
        for z in blocks {
            let (k, d) = full
                .iter()
                .enumerate()
                .map(|(k, w)| (k, (w - z).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 1e-8, "N = {n}: eigenvalue {z} unmatched (gap {d:.2e})");
            full.swap_remove(k);
        }
        let abscissa = eigenvalues(&cl.f).iter().map(|z| z.re).fold(f64::MIN, f64::max);
        assert!(abscissa < -m.config.delta);
    }
}

#[test]
fn degenerate_split_has_no_tail_blocks() {
    let m = model(1);
    let cl = assemble_closed_loop(&m, &GainSet::reference(&m).unwrap()).unwrap();
    assert_eq!(cl.dim(), 3);
    let [_, _, a1, a1b] = cl.diagonal_blocks();
    assert_eq!(a1.nrows(), 0);
    assert_eq!(a1b.nrows(), 0);
}

#[test]
fn output_injection_structure() {
    let m = model(6);
    let g = GainSet::reference(&m).unwrap();
    let cl = assemble_closed_loop(&m, &g).unwrap();
    let n0 = m.n0();
    assert_eq!(cl.lcal.nrows(), cl.dim());
    assert_eq!(cl.lcal[(0, 0)], 0.0);
    assert_eq!(cl.lcal[(1, 0)], g.l0[0]);
    assert_eq!(cl.lcal[(2, 0)], -g.l0[0]);
    for i in 2 * n0 + 1..cl.dim() {
        assert_eq!(cl.lcal[(i, 0)], 0.0);
    }
    let mut cbar = DMatrix::zeros(1, cl.dim());
    for k in 0..n0 {
        cbar[(0, n0 + 1 + k)] = m.c[k];
    }
    for k in n0..m.n() {
        cbar[(0, m.n() + 1 + k)] = m.c[k];
    }
    assert!((&cl.f1 - &cl.lcal * cbar).abs().max() < 1e-15);
    assert_eq!(cl.bcal[(0, 0)], -1.0);
    assert_eq!(cl.khat.columns(0, n0 + 1), g.k0_matrix());
    assert_eq!(cl.ktilde[(0, 0)], g.k0[0] - m.config.a);
}

#[test]
fn continuous_problem_is_affine() {
    let m = model(4);
    let cl = assemble_closed_loop(&m, &GainSet::reference(&m).unwrap()).unwrap();
    let lmi = build_continuous_lmi(&cl, &m, 0.1).unwrap();
    let pr = &lmi.problem;
    let nv = pr.num_vars();
    let x: Vec<f64> = (0..nv).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.1).collect();
    let y: Vec<f64> = (0..nv).map(|i| ((i * 3 % 13) as f64 - 6.0) * 0.2).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
    let zero = vec![0.0; nv];
    let (ex, ey, exy, e0) = (
        pr.evaluate(&x).unwrap(),
        pr.evaluate(&y).unwrap(),
        pr.evaluate(&xy).unwrap(),
        pr.evaluate(&zero).unwrap(),
    );
    for i in 0..ex.len() {
        let diff = &exy[i] - (&ex[i] + &ey[i] - &e0[i]);
        assert!(diff.abs().max() < 1e-10);
    }
}

#[test]
fn continuous_feasible_for_reference_and_designed_gains() {
    let m = model(4);
    for g in [GainSet::reference(&m).unwrap(), design_gains(&m, 0.1).unwrap()] {
        let v = verify_continuous(&m, &g, &opts()).unwrap();
        assert_eq!(v.outcome.status, SolveStatus::Feasible);
        let cert = v.certificate.unwrap();
        assert!(cert.margin > 0.0);
        assert!(cert.alpha1 > 0.0);
        let cl = assemble_closed_loop(&m, &g).unwrap();
        let lmi = build_continuous_lmi(&cl, &m, 0.1).unwrap();
        let point = v.outcome.point.unwrap();
        let report = check_point_margins(&lmi.problem, &point, &margins(&lmi.problem, None)).unwrap();
        assert!(report.passed);
        let p = lmi.problem.value(lmi.p, &point);
        assert!(min_eig_sym(&p) > 0.0);
    }
}

#[test]
fn sampled_feasible_and_infeasible_cells() {
    let m = model(6);
    let g = GainSet::reference(&m).unwrap();
    let ok = verify_sampled(&m, &g, 0.002, 0.048, &opts()).unwrap();
    assert_eq!(ok.outcome.status, SolveStatus::Feasible);
    let cert = ok.certificate.unwrap();
    assert!(cert.alpha2.unwrap() > 0.0 && cert.w2.unwrap() > 0.0);
    let bad = verify_sampled(&m, &g, 0.002, 0.2, &opts()).unwrap();
    assert_eq!(bad.outcome.status, SolveStatus::Infeasible);
    assert!(bad.outcome.lower_bound > 0.0);
}

#[test]
fn certificate_survives_shrinking_sampling_bounds() {
    let m = model(6);
    let g = GainSet::reference(&m).unwrap();
    let cl = assemble_closed_loop(&m, &g).unwrap();
    let big = build_sampled_lmis(&cl, &m, 6.0, 5.9, 0.006, 0.04).unwrap();
    let out = solve(&big.problem, &opts()).unwrap();
    assert!(out.is_feasible());
    let x = out.point.unwrap();
    let eb = big.problem.evaluate(&x).unwrap();
    for (ty, tu) in [(0.002, 0.04), (0.006, 0.01), (0.001, 0.001)] {
        let small = build_sampled_lmis(&cl, &m, 6.0, 5.9, ty, tu).unwrap();
        let es = small.problem.evaluate(&x).unwrap();
        for (b, s) in eb.iter().zip(&es) {
            // larger bounds give the larger matrix
            assert!(min_eig_sym(&(b - s)) > -1e-9 * (1.0 + b.abs().max()));
        }
        let worst = check_point(&small.problem, &x, 0.0).unwrap().worst();
        assert!(worst < 0.0);
    }
}

#[test]
fn sampled_rates_must_be_ordered() {
    let m = model(6);
    let cl = assemble_closed_loop(&m, &GainSet::reference(&m).unwrap()).unwrap();
    assert!(build_sampled_lmis(&cl, &m, 5.9, 5.9, 0.002, 0.01).is_err());
    assert!(build_sampled_lmis(&cl, &m, 5.0, 5.9, 0.002, 0.01).is_err());
    assert!(build_sampled_lmis(&cl, &m, 6.0, 5.9, 0.0, 0.01).is_err());
}

fn halanay_oracle(d0: f64, d1: f64, h: f64) -> f64 {
    // contraction d <- d0 - d1 e^{2dh} for small h
    let mut d = d0 - d1;
    for _ in 0..200 {
        d = d0 - d1 * (2.0 * d * h).exp();
    }
    d
}

#[test]
fn halanay_values() {
    let d = halanay_rate(6.0, 5.9, 0.01).unwrap();
    assert!((d - halanay_oracle(6.0, 5.9, 0.01)).abs() < 1e-10);
    assert!((d - 0.08944).abs() < 1e-3);
    assert_eq!(halanay_rate(6.0, 5.9, 0.0).unwrap(), 6.0 - 5.9);
    assert!((halanay_rate(6.0, 1e-12, 0.01).unwrap() - 6.0).abs() < 1e-9);
    assert!(halanay_rate(5.9, 6.0, 0.01).is_err());
    assert!(halanay_rate(6.0, 6.0, 0.01).is_err());
    assert!(halanay_rate(6.0, 5.9, -1.0).is_err());
}

proptest! {
    #[test]
    fn halanay_root_is_bracketed(d1 in 0.1f64..10.0, gap in 0.01f64..5.0, h in 1e-4f64..0.5) {
        let d0 = d1 + gap;
        let g = |d: f64| d - d0 + d1 * (2.0 * d * h).exp();
        prop_assert!(g(0.0) < 0.0);
        prop_assert!(g(d0 - d1 + 1e-9) > 0.0);
        let r = halanay_rate(d0, d1, h).unwrap();
        prop_assert!(r > 0.0 && r <= d0 - d1);
        prop_assert!(g(r).abs() < 1e-9);
    }
}

#[test]
fn max_tau_u_is_nonincreasing_in_tau_y() {
    let m = model(6);
    let g = GainSet::reference(&m).unwrap();
    let mut prev = f64::INFINITY;
    for ty in [0.002, 0.008, 0.016] {
        let t = max_feasible_tau_u(&m, &g, ty, 6.0, 5.9, 0.001, 0.2, &opts())
            .unwrap()
            .unwrap_or(0.0);
        assert!(t <= prev + 1e-12, "tau_y = {ty}: {t} > {prev}");
        prev = t;
    }
}

#[test]
fn sweep_arguments_are_checked() {
    let m = model(6);
    let g = GainSet::reference(&m).unwrap();
    assert!(max_feasible_tau_u(&m, &g, 0.002, 6.0, 5.9, 0.0, 0.2, &opts()).is_err());
    assert!(max_feasible_tau_u(&m, &g, 0.002, 6.0, 5.9, 0.01, 0.001, &opts()).is_err());
}
