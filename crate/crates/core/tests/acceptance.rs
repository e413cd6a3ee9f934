//! Acceptance criteria, one line each. Exits nonzero if any criterion fails.

use heatlmi_core::linalg::eigenvalues;
use heatlmi_core::sdp::{check_point_margins, margins, solve};
use heatlmi_core::sim::*;
use heatlmi_core::synthesis::*;
use heatlmi_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Mutex;
use std::time::{Duration, Instant};

const WORKERS: usize = 4;
const TABLE_N: [usize; 5] = [6, 8, 10, 12, 14];
const TABLE_TAU_Y: [f64; 8] = [0.002, 0.004, 0.006, 0.008, 0.010, 0.012, 0.014, 0.016];
// rows τ_{M,y}, columns N; None is a dash
const TABLE: [[Option<f64>; 5]; 8] = [
    [Some(0.048), Some(0.051), Some(0.052), Some(0.053), Some(0.055)],
    [Some(0.044), Some(0.047), Some(0.050), Some(0.051), Some(0.053)],
    [Some(0.036), Some(0.041), Some(0.044), Some(0.047), Some(0.049)],
    [Some(0.029), Some(0.035), Some(0.038), Some(0.041), Some(0.042)],
    [Some(0.021), Some(0.028), Some(0.031), Some(0.034), Some(0.036)],
    [Some(0.008), Some(0.019), Some(0.024), Some(0.027), Some(0.029)],
    [None, Some(0.010), Some(0.015), Some(0.018), Some(0.021)],
    [None, None, Some(0.005), Some(0.009), Some(0.012)],
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn model(n: usize) -> ModalModel {
    ModalModel::new(&SystemConfig {
        n,
        ..SystemConfig::default()
    })
    .unwrap()
}

fn timed(budget: Duration, f: impl FnOnce() -> Result<Outcome>) -> Outcome {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    match out {
        Ok(o) => Outcome {
            pass: o.pass && elapsed < budget,
            detail: format!("{} [{elapsed:.2?} of {budget:?}]", o.detail),
        },
        Err(e) => Outcome {
            pass: false,
            detail: format!("error: {e} [{elapsed:.2?}]"),
        },
    }
}

fn continuous_feasibility() -> Result<Outcome> {
    let m = model(4);
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, g) in [
        ("designed", design_gains(&m, 0.1)?),
        ("printed", GainSet::reference(&m)?),
    ] {
        let v = verify_continuous(&m, &g, &SolveOptions::default())?;
        let margin = v.certificate.as_ref().map_or(0.0, |c| c.margin);
        pass &= v.outcome.status == SolveStatus::Feasible && margin > 0.0;
        parts.push(format!("{label} gains {} (margin {margin:.3e})", v.outcome.status));
    }
    Ok(Outcome {
        pass,
        detail: parts.join(", "),
    })
}

fn printed_gain_spectrum() -> Result<Outcome> {
    let m = model(4);
    let g = GainSet::reference(&m)?;
    let re = eigenvalues(&controller_matrix(&m, &g.k0_matrix()))
        .iter()
        .map(|z| z.re)
        .fold(f64::MIN, f64::max);
    Ok(Outcome {
        pass: re <= -0.1,
        detail: format!("max Re eig(Ã0 + B̃0 K0) = {re:.4}"),
    })
}

fn table() -> Result<Outcome> {
    let cells: Vec<(usize, usize)> = (0..TABLE_TAU_Y.len())
        .flat_map(|r| (0..TABLE_N.len()).map(move |c| (r, c)))
        .collect();
    let results = Mutex::new(vec![vec![None; TABLE_N.len()]; TABLE_TAU_Y.len()]);
    let errors = Mutex::new(Vec::new());
    let next = Mutex::new(0usize);
    let models: Vec<ModalModel> = TABLE_N.iter().map(|&n| model(n)).collect();
    std::thread::scope(|s| {
        for _ in 0..WORKERS {
            s.spawn(|| loop {
                let k = {
                    let mut g = next.lock().unwrap();
                    let k = *g;
                    *g += 1;
                    k
                };
                let Some(&(r, c)) = cells.get(k) else { break };
                let m = &models[c];
                let g = GainSet::reference(m).unwrap();
                match max_feasible_tau_u(m, &g, TABLE_TAU_Y[r], 6.0, 5.9, 0.001, 0.2, &SolveOptions::default()) {
                    Ok(v) => results.lock().unwrap()[r][c] = v,
                    Err(e) => errors.lock().unwrap().push(format!("N = {}, tau_y = {}: {e}", TABLE_N[c], TABLE_TAU_Y[r])),
                }
            });
        }
    });
    let results = results.into_inner().unwrap();
    let errors = errors.into_inner().unwrap();
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    println!("      tau_y | {}", TABLE_N.map(|n| format!("N={n:<4}")).join(" "));
    let mut agree = 0;
    for (r, row) in results.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&TABLE[r])
            .map(|(got, want)| format!("{}/{}", show(*got), show(*want)))
            .collect();
        println!("      {:.3} | {}", TABLE_TAU_Y[r], cells.join(" "));
        for (got, want) in row.iter().zip(&TABLE[r]) {
            let ok = match (got, want) {
                (None, None) => true,
                (Some(g), Some(w)) => (g - w).abs() <= (0.15 * w).max(0.003),
                _ => false,
            };
            agree += ok as usize;
        }
    }
    let value = |v: Option<f64>| v.unwrap_or(0.0);
    let mono_n = results
        .iter()
        .all(|row| row.windows(2).all(|p| value(p[1]) >= value(p[0])));
    let mono_y = (0..TABLE_N.len()).all(|c| (1..TABLE_TAU_Y.len()).all(|r| value(results[r][c]) <= value(results[r - 1][c])));
    for e in &errors {
        println!("      error: {e}");
    }
    Ok(Outcome {
        pass: errors.is_empty() && agree == 40 && mono_n && mono_y,
        detail: format!(
            "{agree}/40 cells within tolerance, nondecreasing in N: {mono_n}, nonincreasing in tau_y: {mono_y}, {} errors (computed/published above)",
            errors.len()
        ),
    })
}

fn tail_bounds_hold() -> Result<Outcome> {
    let mut worst = f64::INFINITY;
    for n in 1..=50usize {
        let b = modal::tail_bounds(n)?;
        let (mut sb, mut sl) = (0.0, 0.0);
        for k in (n + 1..=n + 1_000_000).rev() {
            let kp = k as f64 * PI;
            sb += 2.0 / (kp * kp);
            sl += (kp * kp).powf(-0.75);
        }
        worst = worst.min(b.b_sq - sb).min(b.lambda_34 - sl);
    }
    Ok(Outcome {
        pass: worst > 0.0,
        detail: format!("smallest bound minus partial sum over N = 1..50: {worst:.3e}"),
    })
}

fn halanay() -> Result<Outcome> {
    let d = halanay_rate(6.0, 5.9, 0.01)?;
    let d0 = halanay_rate(6.0, 5.9, 0.0)?;
    let (mut lo, mut hi) = (0.0f64, 0.1f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - 6.0 + 5.9 * (0.02 * mid).exp() < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Outcome {
        pass: (d - 0.08944).abs() <= 1e-3 && (d - lo).abs() < 1e-9 && d0 == 6.0 - 5.9,
        detail: format!("delta_tau(0.01) = {d:.6} (oracle {lo:.6}), delta_tau(0) = {d0}"),
    })
}

fn continuous_decay(keep: &mut Vec<Trajectory>) -> Result<Outcome> {
    let m = model(4);
    let g = GainSet::reference(&m)?;
    let cfg = SimConfig {
        modes: Some(100),
        horizon: 10.0,
        ..SimConfig::default()
    };
    let closed = simulate_continuous(&m, &g, &cfg)?;
    let open = simulate_continuous(&m, &g, &SimConfig { open_loop: true, ..cfg })?;
    let rate = closed.decay_rate(Quantity::H1PlusU, 5.0)?;
    let growth = -2.0 * open.decay_rate(Quantity::H1PlusU, 5.0)?;
    let target = 2.0 * (10.0 - PI * PI);
    keep.extend([closed, open]);
    Ok(Outcome {
        pass: 2.0 * rate >= 0.9 * 2.0 * 0.1 && (growth - target).abs() <= 0.05 * target,
        detail: format!(
            "closed-loop log-slope {:.4} (need <= {:.4}), open-loop growth {growth:.4} vs {target:.4}",
            -2.0 * rate,
            -0.9 * 0.2
        ),
    })
}

fn sampled_decay(keep: &mut Vec<Trajectory>) -> Result<Outcome> {
    let m = model(6);
    let g = GainSet::reference(&m)?;
    let cfg = SimConfig {
        sampling: Sampling::Jittered {
            tau_y: 0.002,
            tau_u: 0.048,
            seed: 2024,
        },
        ..SimConfig::default()
    };
    let tr = simulate_sampled(&m, &g, &cfg)?;
    let rate = tr.decay_rate(Quantity::H1PlusU, 5.0)?;
    let dtau = halanay_rate(6.0, 5.9, 0.002)?;
    keep.push(tr);
    Ok(Outcome {
        pass: rate >= 0.8 * dtau,
        detail: format!("fitted rate {rate:.4} vs 0.8 delta_tau = {:.4}", 0.8 * dtau),
    })
}

fn properties(trajectories: &[&Trajectory]) -> Result<Outcome> {
    let mut failures = Vec::new();

    // SDP soundness on the continuous and sampled problems
    for n in [4, 6] {
        let m = model(n);
        let g = GainSet::reference(&m)?;
        let cl = assemble_closed_loop(&m, &g)?;
        let problems = [
            build_continuous_lmi(&cl, &m, 0.1)?.problem,
            build_sampled_lmis(&cl, &m, 6.0, 5.9, 0.002, 0.04)?.problem,
        ];
        for pr in problems {
            let out = solve(&pr, &SolveOptions::default())?;
            if let (true, Some(x)) = (out.is_feasible(), out.point.as_ref()) {
                if !check_point_margins(&pr, x, &margins(&pr, None))?.passed {
                    failures.push(format!("soundness N = {n}"));
                }
            }
        }

        // block-spectrum identity
        let mut full = eigenvalues(&cl.f);
        for z in cl.diagonal_blocks().iter().filter(|b| b.nrows() > 0).flat_map(eigenvalues) {
            let (k, d) = full
                .iter()
                .enumerate()
                .map(|(k, w)| (k, (w - z).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if d >= 1e-8 {
                failures.push(format!("spectrum N = {n}: {z} off by {d:.1e}"));
            }
            full.swap_remove(k);
        }
    }

    // certificate monotonicity
    let m = model(6);
    let cl = assemble_closed_loop(&m, &GainSet::reference(&m)?)?;
    let big = build_sampled_lmis(&cl, &m, 6.0, 5.9, 0.006, 0.04)?;
    let out = solve(&big.problem, &SolveOptions::default())?;
    match out.point {
        Some(x) if out.is_feasible() => {
            let eb = big.problem.evaluate(&x)?;
            let small = build_sampled_lmis(&cl, &m, 6.0, 5.9, 0.003, 0.02)?;
            for (b, s) in eb.iter().zip(small.problem.evaluate(&x)?) {
                if linalg::min_eig_sym(&(b - s)) < -1e-9 * (1.0 + b.abs().max()) {
                    failures.push("monotonicity".into());
                }
            }
        }
        _ => failures.push("monotonicity probe not feasible".into()),
    }

    // ζ-bound and hold continuity along the acceptance trajectories
    for tr in trajectories {
        for k in 0..tr.len() {
            if tr.zeta[k] * tr.zeta[k] > tr.tail_h1_sq[k] * (1.0 + 1e-12) {
                failures.push(format!("zeta bound at t = {}", tr.times[k]));
                break;
            }
        }
        for k in 1..tr.len() {
            let du = tr.u[k] - tr.u[k - 1] - tr.v[k - 1] * (tr.times[k] - tr.times[k - 1]);
            if du.abs() > 1e-12 * (1.0 + tr.u[k].abs()) {
                failures.push(format!("u jumps at t = {}", tr.times[k]));
                break;
            }
        }
    }

    // one-step exactness
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let mu = -rng.random_range(0.5..1e5);
        let (w0, f0, f1, h) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(1e-5..0.05),
        );
        let (e, p1, p2) = step_factors(mu, h);
        let beta = -f1 / mu;
        let alpha = (beta - f0) / mu;
        let want = alpha + beta * h + (mu * h).exp() * (w0 - alpha);
        let scale = 1.0 + w0.abs() + (f0.abs() + f1.abs()) / mu.abs();
        if (e * w0 + f0 * p1 + f1 * p2 - want).abs() >= 1e-12 * scale {
            failures.push(format!("one-step map at mu = {mu}, h = {h}"));
            break;
        }
    }

    Ok(Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "soundness, spectrum identity, zeta bound, hold continuity, monotonicity, one-step exactness".into()
        } else {
            failures.join("; ")
        },
    })
}

fn main() {
    let mut report: Vec<(usize, &str, Outcome)> = Vec::new();
    report.push((1, "continuous feasibility, N = 4", timed(Duration::from_secs(10), continuous_feasibility)));
    report.push((2, "printed controller gain spectrum", timed(Duration::from_secs(1), printed_gain_spectrum)));
    report.push((4, "tail bounds, N = 1..50", timed(Duration::from_secs(5), tail_bounds_hold)));
    report.push((5, "Halanay root", timed(Duration::from_millis(1), halanay)));

    let mut trajectories = Vec::new();
    report.push((6, "continuous closed-loop decay", timed(Duration::from_secs(30), || continuous_decay(&mut trajectories))));
    report.push((7, "sampled closed-loop decay", timed(Duration::from_secs(60), || sampled_decay(&mut trajectories))));
    let refs: Vec<&Trajectory> = trajectories.iter().collect();
    report.push((8, "property suites", timed(Duration::from_secs(600), || properties(&refs))));
    report.push((3, "table of maximal tau_u", timed(Duration::from_secs(1800), table)));

    report.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (k, name, o) in &report {
        println!("criterion {k} ({name}): {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", report.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", report.len());
}
