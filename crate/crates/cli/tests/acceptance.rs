//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! with a failure status if any criterion fails.
//!
//! Runs with `cargo test -p kerrtraj-cli --test acceptance`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use kerrtraj::analysis::ensemble::{ensemble_average_with, EnsembleOptions, EnsembleResult};
use kerrtraj::analysis::histogram::{find_modes, stationary_window, Histogram};
use kerrtraj::analysis::switches::{check_parity_events, detect_switches};
use kerrtraj::analysis::wigner::wigner_at;
use kerrtraj::counting::run_counting;
use kerrtraj::fock::{
    annihilation, cat_state, coherent_state, number_op, parity_op, Expectation,
};
use kerrtraj::homodyne::run_homodyne;
use kerrtraj::master_eq::{
    build_liouvillian, evolve_me, fit_two_component, solve_steady_state, Liouvillian, MasterEquationSolver,
};
use kerrtraj::{DensityMatrix, ModelParams, Operator, Parity, Protocol, RunSettings, StateVector, TrajectoryRecord, C64};
use nalgebra::DVector;

const BURN_IN: f64 = 50.0;
const T_FINAL: f64 = 500.0;
const HYSTERESIS: f64 = 0.5;
const HISTOGRAM_BINS: usize = 60;

/// Outcome of one criterion: the individual checks and their details.
struct Verdict {
    checks: Vec<(String, bool)>,
}

impl Verdict {
    fn new() -> Self {
        Verdict { checks: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.checks.push((detail, ok));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn runtime(v: &mut Verdict, start: Instant, limit: Duration) {
    let took = start.elapsed();
    v.check(took < limit, format!("runtime {:.1} s < {} s", took.as_secs_f64(), limit.as_secs()));
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn steady_rho(params: &ModelParams) -> DensityMatrix {
    solve_steady_state(&Liouvillian::from_params(params).unwrap()).unwrap().rho
}

fn reference_x0() -> f64 {
    fit_two_component(&steady_rho(&ModelParams::two_photon_reference())).unwrap().x0()
}

fn trajectory(protocol: Protocol, params: &ModelParams, seed: u64) -> TrajectoryRecord {
    let settings = RunSettings::new(protocol, T_FINAL, seed);
    match protocol {
        Protocol::Counting => run_counting(params, &settings).unwrap(),
        Protocol::Homodyne => run_homodyne(params, &settings).unwrap(),
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut v = Verdict::new();
    let params = ModelParams::two_photon_reference();
    let ss = solve_steady_state(&Liouvillian::from_params(&params).unwrap()).unwrap();
    let fit = fit_two_component(&ss.rho).unwrap();
    let (pp, pm) = (fit.p_plus, fit.p_minus);
    v.check(pp + pm >= 0.95, format!("p+ + p- = {:.6} >= 0.95", pp + pm));
    v.check((pp - pm).abs() <= 0.1, format!("|p+ - p-| = {:.6} <= 0.1", (pp - pm).abs()));
    let pol = fit.parity_plus.abs().min(fit.parity_minus.abs());
    v.check(pol >= 0.9, format!("min |<P>| of dominant eigenvectors = {pol:.6} >= 0.9"));
    v.check(fit.fidelity >= 0.95, format!("cat-mixture fidelity = {:.8} >= 0.95", fit.fidelity));
    let a = ss.rho.expval(&annihilation(params.n_max).unwrap()).unwrap().norm();
    v.check(a < 1e-10, format!("|Tr[rho a]| = {a:.2e} < 1e-10"));
    runtime(&mut v, start, Duration::from_secs(10));
    v
}

/// Longest stretch of consecutive samples with `|P| > 0.99`, in time.
fn longest_polarized_run(times: &[f64], parity: &[f64]) -> f64 {
    let mut best = 0.0f64;
    let mut since: Option<f64> = None;
    for (&t, &p) in times.iter().zip(parity) {
        if p.abs() > 0.99 {
            let t0 = *since.get_or_insert(t);
            best = best.max(t - t0);
        } else {
            since = None;
        }
    }
    best
}

/// Returns the verdict and the counting censored mean dwell for criterion 3.
fn criterion_2() -> (Verdict, f64) {
    let start = Instant::now();
    let mut v = Verdict::new();
    let params = ModelParams::two_photon_reference();
    let rec = trajectory(Protocol::Counting, &params, 1);
    let window = stationary_window(&rec.parity, &rec.sample_times, BURN_IN);
    let polarized = window.iter().filter(|p| p.abs() > 0.99).count() as f64 / window.len() as f64;
    v.check(polarized >= 0.99, format!("fraction of |<P>| > 0.99 after burn-in = {polarized:.5} >= 0.99"));
    let ones: Vec<_> = rec.one_photon_events().copied().collect();
    let check = check_parity_events(&rec.sample_times, &rec.parity, &ones, 0.0).unwrap();
    v.check(
        check.consistent() && check.sign_changes > 0,
        format!(
            "{} sign changes vs {} one-photon events, {} mismatched intervals",
            check.sign_changes,
            check.events,
            check.mismatches.len()
        ),
    );
    let max_q = rec.x.iter().chain(&rec.p).fold(0.0f64, |m, q| m.max(q.abs()));
    v.check(max_q < 0.5, format!("max |<x>|, |<p>| = {max_q:.2e} < 0.5"));
    let report = detect_switches(&rec.parity, &rec.sample_times, 1.0, HYSTERESIS).unwrap();
    let dwell = report.censored_mean_dwell().unwrap_or(f64::NAN);
    runtime(&mut v, start, Duration::from_secs(60));
    (v, dwell)
}

/// Independent homodyne trajectories pooled for the stationary statistics.
const HOMODYNE_POOL: u64 = 16;

fn criterion_3(counting_dwell: f64) -> Verdict {
    let start = Instant::now();
    let mut v = Verdict::new();
    let params = ModelParams::two_photon_reference();
    let x0 = reference_x0();
    let mut xs = Vec::new();
    let mut parity_sum = 0.0;
    let mut parity_count = 0usize;
    let (mut committed, mut switches) = (0.0, 0usize);
    let (mut above, mut below) = (0usize, 0usize);
    for seed in 1..=HOMODYNE_POOL {
        let rec = trajectory(Protocol::Homodyne, &params, seed);
        let x = stationary_window(&rec.x, &rec.sample_times, BURN_IN);
        let p = stationary_window(&rec.parity, &rec.sample_times, BURN_IN);
        parity_sum += p.iter().sum::<f64>();
        parity_count += p.len();
        xs.extend_from_slice(x);
        let report = detect_switches(&rec.x, &rec.sample_times, x0, HYSTERESIS).unwrap();
        if let Some(t0) = report.committed_at {
            committed += report.end_time - t0;
            switches += report.n_switches;
        }
        above += x.iter().filter(|&&q| q >= HYSTERESIS * x0).count();
        below += x.iter().filter(|&&q| q <= -HYSTERESIS * x0).count();
    }
    let mean_parity = parity_sum / parity_count as f64;
    v.check(mean_parity.abs() < 0.2, format!("|time-averaged <P>| = {:.4} < 0.2", mean_parity.abs()));

    let hist = Histogram::new(&xs, None, HISTOGRAM_BINS).unwrap();
    let modes = find_modes(&hist);
    let locations: Vec<f64> = modes.iter().map(|m| m.location).collect();
    let near = |target: f64| locations.iter().any(|&l| (l - target).abs() <= 0.1 * x0);
    v.check(
        modes.len() == 2 && near(x0) && near(-x0) && above > 0 && below > 0,
        format!(
            "modes of <x> at {:?} (x0 = {x0:.4}); samples beyond +/-{:.3}: {above}/{below}",
            locations.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>(),
            HYSTERESIS * x0
        ),
    );
    let homodyne_dwell = committed / switches.max(1) as f64;
    let ratio = homodyne_dwell / counting_dwell;
    v.check(
        ratio > 5.0,
        format!(
            "homodyne dwell {homodyne_dwell:.1} ({switches} switches) / counting dwell {counting_dwell:.2} = {ratio:.1} > 5"
        ),
    );
    runtime(&mut v, start, Duration::from_secs(300));
    v
}

fn me_reference(params: &ModelParams, times: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let solver = MasterEquationSolver::new(&Liouvillian::from_params(params).unwrap(), 1e-3).unwrap();
    let rho0 = StateVector::vacuum(params.n_max).unwrap().projector();
    let (num, par) = (number_op(params.n_max).unwrap(), parity_op(params.n_max).unwrap());
    solver
        .evolve_at(&rho0, times)
        .unwrap()
        .iter()
        .map(|rho| (rho.expval(&num).unwrap().re, rho.expval(&par).unwrap().re))
        .unzip()
}

fn ensemble(protocol: Protocol, params: &ModelParams, n_traj: u64, grid: &[f64], seed: u64) -> EnsembleResult {
    ensemble_average_with(&EnsembleOptions::new(protocol, *params, n_traj, grid.to_vec(), seed)).unwrap()
}

/// Largest `|mean - reference| / stderr` and whether every point is within
/// five standard errors.
fn within_five_se(mean: &[f64], se: &[f64], reference: &[f64]) -> (bool, f64) {
    let mut ok = true;
    let mut worst = 0.0f64;
    for ((m, s), r) in mean.iter().zip(se).zip(reference) {
        let dev = (m - r).abs();
        ok &= dev <= 5.0 * s + 1e-9;
        if *s > 0.0 {
            worst = worst.max(dev / s);
        }
    }
    (ok, worst)
}

/// Replicate ensembles per size in the error-scaling fit.
const SCALING_REPLICATES: u64 = 8;

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut v = Verdict::new();
    let params = ModelParams::two_photon_reference();
    // 50 points, multiples of both default steps.
    let grid: Vec<f64> = (0..50).map(|k| 0.2 * k as f64).collect();
    let (n_me, p_me) = me_reference(&params, &grid);
    for (protocol, seed) in [(Protocol::Counting, 4001), (Protocol::Homodyne, 4002)] {
        let ens = ensemble(protocol, &params, 500, &grid, seed);
        let (ok_n, z_n) = within_five_se(&ens.mean.n, &ens.stderr.n, &n_me);
        let (ok_p, z_p) = within_five_se(&ens.mean.parity, &ens.stderr.parity, &p_me);
        v.check(
            ok_n && ok_p,
            format!("{protocol}, 500 trajectories: max z of <n> = {z_n:.2}, of <P> = {z_p:.2} (limit 5)"),
        );
    }

    // Root-mean-square deviation from the master equation over the grid
    // (t > 0), both observables and all replicates.
    let sizes = [50u64, 200, 800];
    let mut log_n = Vec::new();
    let mut log_err = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let mut sq = 0.0;
        let mut count = 0usize;
        for r in 0..SCALING_REPLICATES {
            let ens = ensemble(Protocol::Counting, &params, n, &grid, 5000 + 100 * i as u64 + r);
            for k in 1..grid.len() {
                sq += (ens.mean.n[k] - n_me[k]).powi(2) + (ens.mean.parity[k] - p_me[k]).powi(2);
                count += 2;
            }
        }
        log_n.push((n as f64).ln());
        log_err.push((sq / count as f64).sqrt().ln());
    }
    let slope = least_squares_slope(&log_n, &log_err);
    v.check(
        (slope + 0.5).abs() <= 0.1,
        format!("error scaling exponent over n_traj in {sizes:?} = {slope:.3} (target -0.5 +/- 0.1)"),
    );
    runtime(&mut v, start, Duration::from_secs(600));
    v
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let mut v = Verdict::new();
    let params = ModelParams::one_photon_reference();
    let rec = trajectory(Protocol::Counting, &params, 1);
    let longest = longest_polarized_run(&rec.sample_times, &rec.parity);
    let bound = 1.0 / params.gamma;
    v.check(longest <= bound, format!("longest |<P>| > 0.99 stretch = {longest:.2} <= 1/gamma = {bound}"));

    let rec = trajectory(Protocol::Homodyne, &params, 1);
    let x = stationary_window(&rec.x, &rec.sample_times, BURN_IN);
    let modes = find_modes(&Histogram::new(x, None, HISTOGRAM_BINS).unwrap());
    v.check(
        modes.len() == 1,
        format!(
            "{} mode(s) of <x> at {:?}",
            modes.len(),
            modes.iter().map(|m| format!("{:.4}", m.location)).collect::<Vec<_>>()
        ),
    );
    let fit = fit_two_component(&steady_rho(&params));
    v.check(
        matches!(fit, Err(kerrtraj::Error::FitNotApplicable(_))),
        match fit {
            Err(e) => format!("fit: {e}"),
            Ok(f) => format!("fit unexpectedly applicable: {f:?}"),
        },
    );
    runtime(&mut v, start, Duration::from_secs(120));
    v
}

fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    (a - b).max_abs()
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut v = Verdict::new();
    let n_max = 15;
    let a = annihilation(n_max).unwrap();
    let p = parity_op(n_max).unwrap();

    let comm = a.commutator(&a.dagger()).unwrap();
    let mut diag = vec![c(1.0, 0.0); n_max + 1];
    diag[n_max] = c(-(n_max as f64), 0.0);
    let err = max_abs_diff(&comm, &Operator::from_diagonal(&diag).unwrap());
    v.check(err <= 1e-12, format!("[a, a+] - diag(1,...,1,-n_max): {err:.1e} <= 1e-12"));

    let err = (&(&p * &a) + &(&a * &p)).max_abs();
    v.check(err <= 1e-12, format!("Pa + aP: {err:.1e} <= 1e-12"));

    // Every |alpha|^2 <= n_max/2, both parities, a few phases.
    let mut worst = (0.0f64, 0.0, Parity::Even);
    for k in 1..=30 {
        let r2 = 0.25 * k as f64;
        for phase in [0.0, 0.7, 2.0] {
            let alpha = C64::from_polar(r2.sqrt(), phase);
            for parity in [Parity::Even, Parity::Odd] {
                let from = cat_state(alpha, parity, n_max).unwrap();
                let to = cat_state(alpha, parity.flipped(), n_max).unwrap();
                let loss = 1.0 - from.apply_normalized(&a).unwrap().fidelity(&to).unwrap();
                if loss > worst.0 {
                    worst = (loss, r2, parity);
                }
            }
        }
    }
    v.check(
        worst.0 <= 1e-8,
        format!(
            "cat flip over |alpha|^2 <= {}: worst infidelity {:.2e} at |alpha|^2 = {}, {:?} -> {:?} (limit 1e-8)",
            n_max as f64 / 2.0,
            worst.0,
            worst.1,
            worst.2,
            worst.2.flipped()
        ),
    );

    let two_photon = steady_rho(&ModelParams::two_photon_reference());
    let odd_cat = cat_state(c(1.3, -0.4), Parity::Odd, n_max).unwrap().projector();
    let mixed = DensityMatrix::mixture(&[
        (0.3, &coherent_state(c(0.5, 0.2), n_max).unwrap()),
        (0.7, &StateVector::fock(3, n_max).unwrap()),
    ])
    .unwrap();
    let err = [two_photon, odd_cat, mixed]
        .iter()
        .map(|rho| {
            (wigner_at(rho, 0.0, 0.0) - 2.0 / std::f64::consts::PI * rho.expval(&p).unwrap().re).abs()
        })
        .fold(0.0, f64::max);
    v.check(err <= 1e-8, format!("W(0,0) - (2/pi)<P>: {err:.1e} <= 1e-8"));

    let vacuum = StateVector::vacuum(n_max).unwrap().projector();
    let err = (wigner_at(&vacuum, 0.0, 0.0) - 2.0 / std::f64::consts::PI).abs();
    v.check(err <= 1e-6, format!("vacuum W(0,0) - 2/pi: {err:.1e} <= 1e-6"));

    // Raw trace of the propagated vec(rho), before any renormalization.
    let params = ModelParams::two_photon_reference();
    let l = Liouvillian::from_params(&params).unwrap();
    let dt = 1e-3;
    let solver = MasterEquationSolver::new(&l, dt).unwrap();
    let rho0 = StateVector::vacuum(n_max).unwrap().projector();
    let mut state = DVector::from_column_slice(rho0.matrix().as_slice());
    let dim = n_max + 1;
    let mut drift = 0.0f64;
    for k in 1..=100 {
        solver.advance(&mut state, 100);
        let t = k as f64 * 100.0 * dt;
        let tr: C64 = (0..dim).map(|i| state[i * dim + i]).sum();
        drift = drift.max((tr - c(1.0, 0.0)).norm() / t.max(1.0));
    }
    v.check(drift <= 1e-8, format!("trace drift per unit time over t <= 10: {drift:.1e} <= 1e-8"));

    let gamma: f64 = 1.0;
    let a = annihilation(n_max).unwrap();
    let l = build_liouvillian(&Operator::zeros(n_max).unwrap(), &[&a * gamma.sqrt()]).unwrap();
    let one = StateVector::fock(1, n_max).unwrap().projector();
    let num = number_op(n_max).unwrap();
    let err = evolve_me(&one, &l, 5.0, 1e-3, 100)
        .unwrap()
        .iter()
        .map(|(t, rho)| (rho.expval(&num).unwrap().re - (-gamma * t).exp()).abs())
        .fold(0.0, f64::max);
    v.check(err <= 1e-6, format!("<n>(t) - exp(-gamma t) from |1>: {err:.1e} <= 1e-6"));
    runtime(&mut v, start, Duration::from_secs(10));
    v
}

/// Every file below `dir` except the run manifest and the configuration
/// echo, which record the output path and worker count.
fn data_artifacts(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap();
            if path.is_dir() {
                stack.push(path);
            } else if name != "manifest.json" && name != "config.toml" {
                let bytes = fs::read(&path).unwrap();
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let mut v = Verdict::new();
    let root = tempfile::tempdir().unwrap();
    let scenarios: &[&[&str]] = &[
        &["steady-state"],
        &["evolve", "--t-final", "5"],
        &["wigner", "--resolution", "41"],
        &["reproduce", "fig1a"],
        &["reproduce", "fig1bc", "--t-final", "100"],
        &["reproduce", "fig2", "--t-final", "100"],
        &["ensemble", "--protocol", "counting", "--n-traj", "100", "--seed", "11"],
        &["ensemble", "--protocol", "homodyne", "--n-traj", "24", "--t-final", "2", "--seed", "12"],
    ];
    for (i, args) in scenarios.iter().enumerate() {
        let mut runs = Vec::new();
        for (j, workers) in ["1", "1", "4", "4"].iter().enumerate() {
            let out = root.path().join(format!("s{i}-r{j}"));
            let status = Command::new(env!("CARGO_BIN_EXE_kerrtraj"))
                .args(*args)
                .args(["--workers", workers, "--output-dir"])
                .arg(&out)
                .env("RUST_LOG", "error")
                .stdout(Stdio::null())
                .status()
                .unwrap();
            assert!(status.success(), "kerrtraj {args:?} failed");
            runs.push(data_artifacts(&out));
        }
        let identical = runs.iter().all(|r| *r == runs[0]) && !runs[0].is_empty();
        v.check(
            identical,
            format!("{}: {} artifacts identical over workers 1, 1, 4, 4", args.join(" "), runs[0].len()),
        );
    }
    runtime(&mut v, start, Duration::from_secs(600));
    v
}

fn report(n: usize, title: &str, v: &Verdict) -> bool {
    let ok = v.passed();
    println!("{} criterion {n}: {title}", if ok { "PASS" } else { "FAIL" });
    for (detail, pass) in &v.checks {
        println!("    [{}] {detail}", if *pass { "ok" } else { "fail" });
    }
    ok
}

fn main() {
    let mut ok = true;
    ok &= report(1, "steady-state bimodality", &criterion_1());
    let (c2, counting_dwell) = criterion_2();
    ok &= report(2, "counting-trajectory parity switching", &c2);
    ok &= report(3, "homodyne phase switching", &criterion_3(counting_dwell));
    ok &= report(4, "unraveling consistency", &criterion_4());
    ok &= report(5, "one-photon control case", &criterion_5());
    ok &= report(6, "exact algebraic invariants", &criterion_6());
    ok &= report(7, "determinism", &criterion_7());
    if !ok {
        std::process::exit(1);
    }
}
