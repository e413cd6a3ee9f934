//! Subcommand pipelines. Each writes its artifacts plus `effective-config.toml` into `cfg.out`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use heatlmi_core::sim::{simulate, Quantity};
use heatlmi_core::synthesis::{
    design_gains, halanay_rate, max_feasible_tau_u, verify_continuous, verify_gains, verify_sampled,
    GainReport,
};
use heatlmi_core::{GainSet, ModalModel, SolveStatus, SystemConfig};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{GainSource, RunConfig, VerifyMode};
use crate::error::{exit, CliError};
use crate::report::{self, Cell, Plot};

/// Exit code and the text printed to stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub code: i32,
    pub summary: String,
}

fn prepare(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("effective-config.toml"), cfg.to_toml()?)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn model_for(cfg: &RunConfig, n: usize) -> Result<ModalModel, CliError> {
    let system = SystemConfig {
        n,
        ..cfg.system.to_system()
    };
    Ok(ModalModel::new(&system)?)
}

/// Gains from the configured source.
pub fn load_gains(cfg: &RunConfig, model: &ModalModel) -> Result<GainSet, CliError> {
    match &cfg.gains.source {
        GainSource::Printed => {
            if model.n0() != 1 {
                return Err(CliError::Config(format!(
                    "printed gains need N0 = 1 (configured N0 = {})",
                    model.n0()
                )));
            }
            Ok(GainSet::reference(model)?)
        }
        GainSource::Designed => Ok(design_gains(model, cfg.gains.margin)?),
        GainSource::File(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read gains {}: {e}", path.display())))?;
            let g: GainSet = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid gains file {}: {e}", path.display())))?;
            if g.l0.len() != model.n0() || g.k0.len() != model.n0() + 1 {
                return Err(CliError::Config(format!(
                    "gains file has |L0| = {}, |K0| = {} but N0 = {}",
                    g.l0.len(),
                    g.k0.len(),
                    model.n0()
                )));
            }
            Ok(g)
        }
    }
}

fn describe(report: &GainReport) -> String {
    format!(
        "observer abscissa = {:.6} ({}), controller abscissa = {:.6} ({})",
        report.observer_abscissa,
        if report.observer_ok { "pass" } else { "fail" },
        report.controller_abscissa,
        if report.controller_ok { "pass" } else { "fail" },
    )
}

pub fn cmd_design(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    prepare(cfg)?;
    let model = model_for(cfg, cfg.system.n)?;
    let gains = design_gains(&model, cfg.gains.margin)?;
    let check = verify_gains(&gains, &model)?;
    write_json(&cfg.out.join("gains.json"), &gains)?;
    let summary = format!(
        "N0 = {}\nN = {}\nL0 = {:?}\nK0 = {:?}\nmargin = {:.6e}\n{}\n",
        model.n0(),
        model.n(),
        gains.l0,
        gains.k0,
        gains.margin,
        describe(&check)
    );
    fs::write(cfg.out.join("design.txt"), &summary)?;
    Ok(CommandOutput {
        code: if check.passed() { exit::OK } else { exit::INFEASIBLE },
        summary,
    })
}

#[derive(Serialize)]
struct VerifyReport {
    mode: VerifyMode,
    status: SolveStatus,
    margin: Option<f64>,
    t: f64,
    lower_bound: f64,
    iterations: usize,
    tau_my: Option<f64>,
    tau_mu: Option<f64>,
    delta_tau: Option<f64>,
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    prepare(cfg)?;
    let model = model_for(cfg, cfg.system.n)?;
    let gains = load_gains(cfg, &model)?;
    let s = &cfg.system;
    let (v, sampled) = match cfg.verify.mode {
        VerifyMode::Continuous => (verify_continuous(&model, &gains, &cfg.solver)?, false),
        VerifyMode::Sampled => {
            model.config.validate(true)?;
            (verify_sampled(&model, &gains, s.tau_my, s.tau_mu, &cfg.solver)?, true)
        }
    };
    let delta_tau = if sampled {
        Some(halanay_rate(s.delta0, s.delta1, s.tau_my)?)
    } else {
        None
    };
    let report = VerifyReport {
        mode: cfg.verify.mode,
        status: v.outcome.status,
        margin: v.certificate.as_ref().map(|c| c.margin),
        t: v.outcome.t,
        lower_bound: v.outcome.lower_bound,
        iterations: v.outcome.iterations,
        tau_my: sampled.then_some(s.tau_my),
        tau_mu: sampled.then_some(s.tau_mu),
        delta_tau,
    };
    write_json(&cfg.out.join("verify.json"), &report)?;
    if let Some(c) = &v.certificate {
        write_json(&cfg.out.join("certificate.json"), c)?;
    }
    let mut summary = format!("status = {}\n", v.outcome.status);
    if let Some(m) = report.margin {
        summary += &format!("margin = {m:.6e}\n");
    }
    if let Some(d) = delta_tau {
        summary += &format!("delta_tau = {d:.6}\n");
    }
    let code = match v.outcome.status {
        SolveStatus::Feasible => exit::OK,
        SolveStatus::Infeasible => exit::INFEASIBLE,
        SolveStatus::Inconclusive => exit::INCONCLUSIVE,
    };
    Ok(CommandOutput { code, summary })
}

/// Table cells, rows `cfg.sweep.tau_y`, columns `cfg.sweep.n`.
pub fn sweep_cells(cfg: &RunConfig) -> Result<Vec<Vec<Cell>>, CliError> {
    let sw = &cfg.sweep;
    let setups: Vec<Result<(ModalModel, GainSet), String>> = sw
        .n
        .iter()
        .map(|&n| {
            let m = model_for(cfg, n).map_err(|e| e.to_string())?;
            let g = load_gains(cfg, &m).map_err(|e| e.to_string())?;
            Ok((m, g))
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..sw.tau_y.len())
        .flat_map(|r| (0..sw.n.len()).map(move |c| (r, c)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Other(e.to_string()))?;
    let flat: Vec<Cell> = pool.install(|| {
        jobs.par_iter()
            .map(|&(r, c)| {
                let (m, g) = match &setups[c] {
                    Ok(s) => (&s.0, &s.1),
                    Err(e) => return Cell::Error(e.clone()),
                };
                let ty = sw.tau_y[r];
                let res = max_feasible_tau_u(
                    m,
                    g,
                    ty,
                    cfg.system.delta0,
                    cfg.system.delta1,
                    sw.grid_step,
                    sw.max_tau,
                    &cfg.solver,
                );
                info!("N = {}, tau_y = {ty}: {res:?}", sw.n[c]);
                match res {
                    Ok(Some(v)) => Cell::Value(v),
                    Ok(None) => Cell::Infeasible,
                    Err(e) => Cell::Error(e.to_string()),
                }
            })
            .collect()
    });
    if sw.n.is_empty() {
        return Ok(Vec::new());
    }
    Ok(flat.chunks(sw.n.len()).map(|c| c.to_vec()).collect())
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    prepare(cfg)?;
    let sw = &cfg.sweep;
    if !(sw.grid_step > 0.0) || !(sw.max_tau >= sw.grid_step) {
        return Err(CliError::Config("sweep needs 0 < grid_step <= max_tau".into()));
    }
    let cells = sweep_cells(cfg)?;
    let mut buf = Vec::new();
    report::write_table(&sw.n, &sw.tau_y, &cells, &mut buf)?;
    fs::write(cfg.out.join("table.csv"), &buf)?;
    let mut summary = String::from_utf8(buf).map_err(|e| CliError::Other(e.to_string()))?;
    let mut errors = 0;
    for (r, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if let Cell::Error(e) = cell {
                errors += 1;
                warn!("N = {}, tau_y = {}: {e}", sw.n[c], sw.tau_y[r]);
                summary += &format!("error at N = {}, tau_y = {}: {e}\n", sw.n[c], sw.tau_y[r]);
            }
        }
    }
    Ok(CommandOutput {
        code: if errors > 0 { exit::INCONCLUSIVE } else { exit::OK },
        summary,
    })
}

#[derive(Serialize)]
struct SimulationReport {
    sampled: bool,
    modes: usize,
    steps: usize,
    fit_window: f64,
    fitted_rate: f64,
    reference_rate: f64,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    prepare(cfg)?;
    let model = model_for(cfg, cfg.system.n)?;
    let gains = load_gains(cfg, &model)?;
    let traj = simulate(&model, &gains, &cfg.sim).map_err(|e| match e {
        heatlmi_core::Error::InvalidArgument(_) | heatlmi_core::Error::Dimension(_) => CliError::from(e),
        other => CliError::Simulation(other.to_string()),
    })?;
    let sampled = cfg.sim.sampling.bounds();
    let reference_rate = match sampled {
        Some((ty, _)) => halanay_rate(cfg.system.delta0, cfg.system.delta1, ty)?,
        None => cfg.system.delta,
    };
    let window = 0.5 * cfg.sim.horizon;
    let fitted_rate = traj
        .decay_rate(Quantity::H1PlusU, window)
        .map_err(|e| CliError::Simulation(e.to_string()))?;

    report::write_trajectory(&traj, BufWriter::new(File::create(cfg.out.join("trajectory.csv"))?))?;
    report::write_field(&traj, 51, 100, BufWriter::new(File::create(cfg.out.join("field.csv"))?))?;
    let q = traj.series(Quantity::H1PlusU);
    let logq: Vec<f64> = q.iter().map(|v| v.ln()).collect();
    let label = if sampled.is_some() {
        format!("slope -2 delta_tau = {:.4}", -2.0 * reference_rate)
    } else {
        format!("slope -2 delta = {:.4}", -2.0 * reference_rate)
    };
    let svg = report::svg(&Plot {
        title: &format!("log(|w|²_H1 + u²), fitted rate {fitted_rate:.4}"),
        x_label: "t",
        y_label: "log(|w|²_H1 + u²)",
        x: &traj.times,
        y: &logq,
        reference: Some((logq[0], -2.0 * reference_rate, &label)),
    });
    fs::write(cfg.out.join("decay.svg"), svg)?;
    let rep = SimulationReport {
        sampled: sampled.is_some(),
        modes: traj.modes(),
        steps: traj.steps,
        fit_window: window,
        fitted_rate,
        reference_rate,
    };
    write_json(&cfg.out.join("simulation.json"), &rep)?;
    Ok(CommandOutput {
        code: exit::OK,
        summary: format!(
            "modes = {}\nsteps = {}\nfitted rate = {fitted_rate:.6}\nreference rate = {reference_rate:.6}\n",
            rep.modes, rep.steps
        ),
    })
}

/// `δ_τ` for the configured `delta0`, `delta1` and delay `h` (default `tau_my`).
pub fn cmd_halanay(cfg: &RunConfig, h: Option<f64>) -> Result<CommandOutput, CliError> {
    let h = h.unwrap_or(cfg.system.tau_my);
    let d = halanay_rate(cfg.system.delta0, cfg.system.delta1, h)?;
    Ok(CommandOutput {
        code: exit::OK,
        summary: format!("delta_tau = {d:.10}\n"),
    })
}
