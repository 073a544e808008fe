//! Execution of the subcommands and emission of their artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kerrtraj::analysis::ensemble::{ensemble_average_with, EnsembleOptions};
use kerrtraj::analysis::histogram::{find_modes, stationary_window, Histogram};
use kerrtraj::analysis::switches::detect_switches;
use kerrtraj::analysis::wigner::wigner;
use kerrtraj::counting::run_counting;
use kerrtraj::fock::{annihilation, number_op, parity_op, quadratures, Expectation};
use kerrtraj::homodyne::run_homodyne;
use kerrtraj::master_eq::{evolve_me, fit_two_component, solve_steady_state, Liouvillian, MasterEquationSolver, SteadyState};
use kerrtraj::{DensityMatrix, Protocol, RunSettings, StateVector, TrajectoryRecord};
use serde_json::{json, Value};

use crate::config::{parse_config, RunConfig, Scenario};
use crate::{svg, Cli, CliError, Command, Figure};

/// Bins of the stationary histograms.
const HISTOGRAM_BINS: usize = 60;
/// Hysteresis of the switch detector.
const HYSTERESIS: f64 = 0.5;

/// Runs a parsed command line and returns the directories written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let flags = cli.common.overrides();
    let file = cli.common.config.as_deref();
    match &cli.command {
        Command::SteadyState => {
            let cfg = parse_config(file, &flags, Scenario::SteadyState, None)?;
            run_task(&cfg, "steady-state", |cfg, out| steady_state_task(cfg, out))
        }
        Command::Evolve => {
            let cfg = parse_config(file, &flags, Scenario::MeEvolve, None)?;
            run_task(&cfg, "evolve", evolve_task)
        }
        Command::Traj { protocol } => {
            let protocol = Protocol::from(*protocol);
            let default = match protocol {
                Protocol::Counting => Scenario::Fig1aCounting,
                Protocol::Homodyne => Scenario::Fig1bcHomodyne,
            };
            let cfg = parse_config(file, &flags, default, Some(protocol))?;
            check_protocol(&cfg, protocol)?;
            run_task(&cfg, "traj", |cfg, out| trajectory_task(cfg, protocol, out))
        }
        Command::Ensemble { protocol } => {
            let protocol = Protocol::from(*protocol);
            let cfg = parse_config(file, &flags, Scenario::Ensemble, Some(protocol))?;
            check_protocol(&cfg, protocol)?;
            run_task(&cfg, "ensemble", |cfg, out| ensemble_task(cfg, protocol, out))
        }
        Command::Wigner { extent, resolution } => {
            if !(*extent > 0.0 && extent.is_finite()) || *resolution < 2 {
                return Err(CliError::Config("wigner needs extent > 0 and resolution >= 2".into()));
            }
            let cfg = parse_config(file, &flags, Scenario::Wigner, None)?;
            run_task(&cfg, "wigner", |cfg, out| wigner_task(cfg, *extent, *resolution, out))
        }
        Command::Reproduce { figure } => {
            let parts: &[(Scenario, Protocol, &str)] = match figure {
                Figure::Fig1a => &[(Scenario::Fig1aCounting, Protocol::Counting, "fig1a")],
                Figure::Fig1bc => &[(Scenario::Fig1bcHomodyne, Protocol::Homodyne, "fig1bc")],
                Figure::Fig2 => &[
                    (Scenario::Fig2aCounting1ph, Protocol::Counting, "fig2a"),
                    (Scenario::Fig2bHomodyne1ph, Protocol::Homodyne, "fig2b"),
                ],
            };
            let mut dirs = Vec::new();
            for &(scenario, protocol, name) in parts {
                let mut part_flags = flags.clone();
                part_flags.scenario = Some(scenario);
                let mut cfg = parse_config(file, &part_flags, scenario, Some(protocol))?;
                cfg.output_dir = cfg.output_dir.join(name);
                dirs.extend(run_task(&cfg, "reproduce", |cfg, out| trajectory_task(cfg, protocol, out))?);
            }
            Ok(dirs)
        }
    }
}

fn check_protocol(cfg: &RunConfig, protocol: Protocol) -> Result<(), CliError> {
    match cfg.scenario.protocol() {
        Some(p) if p != protocol => Err(CliError::Config(format!(
            "scenario {} is a {p} scenario, not {protocol}",
            cfg.scenario.name()
        ))),
        _ => Ok(()),
    }
}

/// Collects the artifacts of one task.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("json serializes");
        text.push('\n');
        self.write(name, text)
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, buf)
    }
}

/// Creates the output directory, echoes the configuration, runs `task` and
/// writes the manifest.
fn run_task(
    cfg: &RunConfig,
    command: &str,
    task: impl FnOnce(&RunConfig, &mut Output) -> Result<(), CliError>,
) -> Result<Vec<PathBuf>, CliError> {
    let start = Instant::now();
    fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Output {
        dir: cfg.output_dir.clone(),
        files: Vec::new(),
    };
    out.write("config.toml", cfg.to_toml())?;
    log::info!("{command}: scenario {}, writing to {}", cfg.scenario.name(), cfg.output_dir.display());
    task(cfg, &mut out)?;
    let manifest = json!({
        "program": "kerrtraj",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "scenario": cfg.scenario.name(),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "inputs": cfg,
        "outputs": out.files,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    fs::write(
        cfg.output_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("json serializes") + "\n",
    )?;
    Ok(vec![cfg.output_dir.clone()])
}

fn complex(z: kerrtraj::C64) -> Value {
    json!([z.re, z.im])
}

fn steady_state_summary(ss: &SteadyState) -> Result<Value, CliError> {
    let rho = &ss.rho;
    let n_max = rho.n_max();
    let a = annihilation(n_max)?;
    let (vals, _) = rho.eigen();
    let top: Vec<f64> = vals.iter().rev().take(5).copied().collect();
    let (fit, fit_error) = match fit_two_component(rho) {
        Ok(fit) => (serde_json::to_value(&fit).expect("fit serializes"), Value::Null),
        Err(e) => (Value::Null, Value::String(e.to_string())),
    };
    let m = rho.matrix();
    let rows = |f: fn(&kerrtraj::C64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
    };
    Ok(json!({
        "residual": ss.residual,
        "slowest_rate": ss.slowest_rate(),
        "expectations": {
            "n": rho.expval(&number_op(n_max)?)?.re,
            "parity": rho.expval(&parity_op(n_max)?)?.re,
            "a": complex(rho.expval(&a)?),
            "a2": complex(rho.expval(&(&a * &a))?),
        },
        "purity": rho.purity(),
        "top_eigenvalues": top,
        "fit": fit,
        "fit_error": fit_error,
        "rho_real": rows(|z| z.re),
        "rho_imag": rows(|z| z.im),
    }))
}

fn solve(cfg: &RunConfig) -> Result<SteadyState, CliError> {
    cfg.params.validate_dissipative().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(solve_steady_state(&Liouvillian::from_params(&cfg.params)?)?)
}

fn steady_state_task(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let ss = solve(cfg)?;
    let mut summary = steady_state_summary(&ss)?;
    summary["params"] = serde_json::to_value(cfg.params).expect("params serialize");
    out.write_json("steady_state.json", &summary)
}

fn evolve_task(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let l = Liouvillian::from_params(&cfg.params)?;
    let rho0 = StateVector::vacuum(cfg.params.n_max)?.projector();
    let stride = ((cfg.sample_every / cfg.dt).round() as usize).max(1);
    let series = evolve_me(&rho0, &l, cfg.t_final, cfg.dt, stride)?;
    let n_max = cfg.params.n_max;
    let (x_op, p_op) = quadratures(n_max)?;
    let (num, par) = (number_op(n_max)?, parity_op(n_max)?);
    let mut cols: [Vec<f64>; 6] = Default::default();
    for (t, rho) in &series {
        cols[0].push(*t);
        cols[1].push(rho.expval(&x_op)?.re);
        cols[2].push(rho.expval(&p_op)?.re);
        cols[3].push(rho.expval(&par)?.re);
        cols[4].push(rho.expval(&num)?.re);
        cols[5].push(rho.purity());
    }
    out.write("me_evolve.csv", columns_csv("t,x,p,parity,n,purity", &cols))?;
    out.write(
        "me_evolve.svg",
        svg::line_plot(
            "Master equation from the vacuum",
            "t [1/eta]",
            &cols[0],
            &[("<x>", &cols[1]), ("<p>", &cols[2]), ("<P>", &cols[3]), ("<n>", &cols[4])],
        ),
    )
}

fn columns_csv(header: &str, cols: &[Vec<f64>]) -> String {
    let mut text = format!("# time in units of 1/eta\n{header}\n");
    for i in 0..cols[0].len() {
        let row: Vec<String> = cols.iter().map(|c| kerrtraj::record::fmt17(c[i])).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

fn trajectory_task(cfg: &RunConfig, protocol: Protocol, out: &mut Output) -> Result<(), CliError> {
    let settings = RunSettings {
        t_final: cfg.t_final,
        dt: cfg.dt,
        sample_every: cfg.sample_every,
        seed: cfg.seed,
        trajectory: 0,
    };
    let rec = match protocol {
        Protocol::Counting => run_counting(&cfg.params, &settings)?,
        Protocol::Homodyne => run_homodyne(&cfg.params, &settings)?,
    };
    out.write_with("trajectory.csv", |w| rec.write_csv(w))?;
    if protocol == Protocol::Counting {
        out.write("events.json", rec.events_json() + "\n")?;
    }
    let metadata = trajectory_metadata(cfg, &rec)?;
    out.write_json("metadata.json", &metadata)?;

    if rec.sample_times.last().is_some_and(|&t| t > cfg.burn_in) {
        let window = stationary_window(&rec.x, &rec.sample_times, cfg.burn_in);
        let hist = Histogram::new(window, None, HISTOGRAM_BINS)?;
        out.write_json(
            "histogram_x.json",
            &json!({ "burn_in": cfg.burn_in, "edges": hist.edges, "counts": hist.counts, "modes": find_modes(&hist) }),
        )?;
        out.write("histogram_x.svg", svg::histogram_plot("Stationary distribution of <x>", "<x>", &hist))?;
    }
    let title = format!("{} trajectory, scenario {}, seed {}", protocol, cfg.scenario.name(), cfg.seed);
    out.write(
        "trajectory.svg",
        svg::line_plot(
            &title,
            "t [1/eta]",
            &rec.sample_times,
            &[("<x>", &rec.x), ("<p>", &rec.p), ("<P>", &rec.parity), ("<n>", &rec.n)],
        ),
    )
}

/// Seed, settings, event counts and switch statistics. The switch level is
/// 1 for the parity under counting, and `x0` from the steady-state fit for
/// `<x>` under homodyne detection.
fn trajectory_metadata(cfg: &RunConfig, rec: &TrajectoryRecord) -> Result<Value, CliError> {
    let ones = rec.one_photon_events().count();
    let mut meta = json!({
        "protocol": rec.protocol,
        "scenario": cfg.scenario.name(),
        "seed": rec.seed(),
        "t_final": cfg.t_final,
        "dt": cfg.dt,
        "sample_every": cfg.sample_every,
        "params": cfg.params,
        "n_samples": rec.len(),
        "time_unit": "1/eta",
    });
    if rec.len() < 2 {
        return Ok(meta);
    }
    match rec.protocol {
        Protocol::Counting => {
            meta["events"] = json!({ "1ph": ones, "2ph": rec.events.len() - ones });
            let report = detect_switches(&rec.parity, &rec.sample_times, 1.0, HYSTERESIS)?;
            meta["parity_switches"] = serde_json::to_value(&report).expect("report serializes");
        }
        Protocol::Homodyne => {
            meta["max_norm_drift"] = json!(rec.max_norm_drift);
            let fit = solve(cfg).ok().and_then(|ss| fit_two_component(&ss.rho).ok());
            match fit {
                Some(fit) => {
                    let report = detect_switches(&rec.x, &rec.sample_times, fit.x0(), HYSTERESIS)?;
                    meta["x0"] = json!(fit.x0());
                    meta["phase_switches"] = serde_json::to_value(&report).expect("report serializes");
                }
                None => meta["phase_switches"] = Value::Null,
            }
        }
    }
    Ok(meta)
}

fn ensemble_task(cfg: &RunConfig, protocol: Protocol, out: &mut Output) -> Result<(), CliError> {
    let points = cfg.grid_points;
    let t_grid: Vec<f64> = (0..points).map(|k| cfg.t_final * k as f64 / (points - 1) as f64).collect();
    let mut opts = EnsembleOptions::new(protocol, cfg.params, cfg.n_traj, t_grid, cfg.seed);
    opts.dt = cfg.dt;
    opts.workers = cfg.workers;
    let ens = ensemble_average_with(&opts)?;
    out.write_with("ensemble.csv", |w| ens.write_csv(w))?;

    let l = Liouvillian::from_params(&cfg.params)?;
    let solver = MasterEquationSolver::new(&l, 1e-3_f64.min(cfg.dt.max(1e-4)))?;
    let rho0 = StateVector::vacuum(cfg.params.n_max)?.projector();
    let me: Vec<DensityMatrix> = solver.evolve_at(&rho0, &ens.times)?;
    let n_max = cfg.params.n_max;
    let (num, par) = (number_op(n_max)?, parity_op(n_max)?);
    let mut n_me = Vec::new();
    let mut p_me = Vec::new();
    for rho in &me {
        n_me.push(rho.expval(&num)?.re);
        p_me.push(rho.expval(&par)?.re);
    }
    out.write("me_reference.csv", columns_csv("t,n,parity", &[ens.times.clone(), n_me.clone(), p_me.clone()]))?;
    let z = |mean: &[f64], se: &[f64], reference: &[f64]| {
        mean.iter()
            .zip(se)
            .zip(reference)
            .filter(|((_, s), _)| **s > 0.0)
            .map(|((m, s), r)| (m - r).abs() / s)
            .fold(0.0f64, f64::max)
    };
    let metadata = json!({
        "protocol": protocol,
        "n_traj": cfg.n_traj,
        "seed": cfg.seed,
        "dt": cfg.dt,
        "params": cfg.params,
        "grid_points": points,
        "max_z_n": z(&ens.mean.n, &ens.stderr.n, &n_me),
        "max_z_parity": z(&ens.mean.parity, &ens.stderr.parity, &p_me),
        "time_unit": "1/eta",
    });
    out.write_json("metadata.json", &metadata)?;
    out.write(
        "ensemble.svg",
        svg::line_plot(
            &format!("{protocol} ensemble of {} trajectories", cfg.n_traj),
            "t [1/eta]",
            &ens.times,
            &[("<n>", &ens.mean.n), ("<n> master eq.", &n_me), ("<P>", &ens.mean.parity), ("<P> master eq.", &p_me)],
        ),
    )
}

fn wigner_task(cfg: &RunConfig, extent: f64, resolution: usize, out: &mut Output) -> Result<(), CliError> {
    let ss = solve(cfg)?;
    let mut summary = steady_state_summary(&ss)?;
    summary["params"] = serde_json::to_value(cfg.params).expect("params serialize");
    out.write_json("steady_state.json", &summary)?;
    let grid = wigner(&ss.rho, (-extent, extent), (-extent, extent), (resolution, resolution))?;
    out.write_with("wigner.csv", |w| grid.write_csv(w))?;
    out.write("wigner.svg", svg::wigner_heatmap("Wigner function of the steady state", &grid))
}

/// Error report written next to the artifacts of a failed run.
pub fn write_error_report(dir: &Path, err: &CliError) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let report = json!({
        "kind": err.kind(),
        "exit_code": err.exit_code(),
        "message": err.to_string(),
    });
    fs::write(dir.join("error.json"), serde_json::to_string_pretty(&report).expect("json serializes") + "\n")
}
