//! Trajectory ensembles averaged on a time grid.
//!
//! Trajectory `k` draws from the random streams `(seed, k)`. Trajectories are
//! grouped in fixed blocks of consecutive indices; each block is accumulated
//! sequentially, and block accumulators are combined in block order. The
//! floating-point result therefore does not depend on how many workers run
//! the blocks.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::counting::simulate_counting;
use crate::fock::{DensityMatrix, StateVector, C64};
use crate::homodyne::simulate_homodyne;
use crate::model::ModelParams;
use crate::record::{fmt17, Protocol};
use crate::stepper::Observables;
use crate::{Error, Result};

/// Trajectories per block.
pub const BLOCK_SIZE: u64 = 8;

#[derive(Clone, Debug)]
pub struct EnsembleOptions {
    pub protocol: Protocol,
    pub params: ModelParams,
    pub n_traj: u64,
    /// Sampling times; each is rounded to the nearest step.
    pub t_grid: Vec<f64>,
    pub seed: u64,
    pub dt: f64,
    /// Worker threads; `0` uses the available parallelism.
    pub workers: usize,
    /// Also accumulate `|psi><psi|` at every grid time.
    pub density_matrices: bool,
    /// Initial state; the vacuum when `None`.
    pub psi0: Option<StateVector>,
}

impl EnsembleOptions {
    pub fn new(protocol: Protocol, params: ModelParams, n_traj: u64, t_grid: Vec<f64>, seed: u64) -> Self {
        EnsembleOptions {
            protocol,
            params,
            n_traj,
            t_grid,
            seed,
            dt: protocol.default_dt(),
            workers: 0,
            density_matrices: false,
            psi0: None,
        }
    }
}

/// Per-time values of the four tracked observables.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub parity: Vec<f64>,
    pub n: Vec<f64>,
}

impl ObservableSeries {
    fn push(&mut self, v: [f64; 4]) {
        self.x.push(v[0]);
        self.p.push(v[1]);
        self.parity.push(v[2]);
        self.n.push(v[3]);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleResult {
    pub protocol: Protocol,
    pub n_traj: u64,
    pub seed: u64,
    /// Grid times after rounding to the step.
    pub times: Vec<f64>,
    pub mean: ObservableSeries,
    /// Standard errors of the means, `sqrt(s^2 / N)` with the unbiased sample
    /// variance; NaN for a single trajectory.
    pub stderr: ObservableSeries,
    #[serde(skip)]
    pub density: Option<Vec<DensityMatrix>>,
}

impl EnsembleResult {
    /// Columns `t` and, per observable, mean and standard error.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# time in units of 1/eta; {} trajectories, protocol = {}", self.n_traj, self.protocol)?;
        writeln!(w, "t,x,x_se,p,p_se,parity,parity_se,n,n_se")?;
        let (m, s) = (&self.mean, &self.stderr);
        for k in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                fmt17(self.times[k]),
                fmt17(m.x[k]),
                fmt17(s.x[k]),
                fmt17(m.p[k]),
                fmt17(s.p[k]),
                fmt17(m.parity[k]),
                fmt17(s.parity[k]),
                fmt17(m.n[k]),
                fmt17(s.n[k]),
            )?;
        }
        Ok(())
    }
}

#[derive(Clone)]
struct Accumulator {
    sum: Vec<[f64; 4]>,
    sum_sq: Vec<[f64; 4]>,
    rho: Option<Vec<DMatrix<C64>>>,
}

impl Accumulator {
    fn new(points: usize, dim: usize, density: bool) -> Self {
        Accumulator {
            sum: vec![[0.0; 4]; points],
            sum_sq: vec![[0.0; 4]; points],
            rho: density.then(|| vec![DMatrix::zeros(dim, dim); points]),
        }
    }

    fn add_state(&mut self, k: usize, psi: &DVector<C64>) {
        let o = Observables::of(psi);
        let v = [o.x, o.p, o.parity, o.n];
        for i in 0..4 {
            self.sum[k][i] += v[i];
            self.sum_sq[k][i] += v[i] * v[i];
        }
        if let Some(rho) = self.rho.as_mut() {
            rho[k].gerc(C64::from(1.0), psi, psi, C64::from(1.0));
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            for i in 0..4 {
                a[i] += b[i];
            }
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            for i in 0..4 {
                a[i] += b[i];
            }
        }
        if let (Some(a), Some(b)) = (self.rho.as_mut(), other.rho.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Ensemble average from the vacuum with the protocol's default step,
/// density matrices included.
pub fn ensemble_average(
    protocol: Protocol,
    params: &ModelParams,
    n_traj: u64,
    t_grid: &[f64],
    seed: u64,
) -> Result<EnsembleResult> {
    let mut opts = EnsembleOptions::new(protocol, *params, n_traj, t_grid.to_vec(), seed);
    opts.density_matrices = true;
    ensemble_average_with(&opts)
}

pub fn ensemble_average_with(opts: &EnsembleOptions) -> Result<EnsembleResult> {
    opts.params.validate()?;
    if opts.n_traj == 0 {
        return Err(Error::invalid("n_traj", "must be at least 1"));
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::invalid("dt", format!("{} must be positive", opts.dt)));
    }
    if opts.t_grid.is_empty() {
        return Err(Error::invalid("t_grid", "is empty"));
    }
    let mut grid_steps = Vec::with_capacity(opts.t_grid.len());
    for &t in &opts.t_grid {
        let s = (t / opts.dt).round();
        if !(s >= 0.0 && s.is_finite()) || grid_steps.last().is_some_and(|&l| s < l as f64) {
            return Err(Error::invalid("t_grid", "times must be non-negative and non-decreasing"));
        }
        grid_steps.push(s as u64);
    }
    let psi0 = match &opts.psi0 {
        Some(psi) => psi.clone(),
        None => StateVector::vacuum(opts.params.n_max)?,
    };
    if psi0.dim() != opts.params.n_max + 1 {
        return Err(Error::DimensionMismatch {
            expected: opts.params.n_max + 1,
            found: psi0.dim(),
        });
    }

    let n_blocks = opts.n_traj.div_ceil(BLOCK_SIZE);
    let run_block = |b: u64| -> Result<Accumulator> {
        let mut acc = Accumulator::new(grid_steps.len(), psi0.dim(), opts.density_matrices);
        let first = b * BLOCK_SIZE;
        let last = (first + BLOCK_SIZE).min(opts.n_traj);
        for k in first..last {
            run_one(opts, &psi0, &grid_steps, k, &mut acc).map_err(|e| Error::Trajectory {
                seed: opts.seed,
                trajectory: k,
                source: Box::new(e),
            })?;
        }
        Ok(acc)
    };
    let workers = if opts.workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        opts.workers
    };
    let blocks: Vec<Result<Accumulator>> = if workers == 1 {
        (0..n_blocks).map(run_block).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?;
        pool.install(|| (0..n_blocks).into_par_iter().map(run_block).collect())
    };

    let mut total = Accumulator::new(grid_steps.len(), psi0.dim(), opts.density_matrices);
    for block in blocks {
        total.merge(&block?);
    }
    finish(opts, &grid_steps, total)
}

fn run_one(
    opts: &EnsembleOptions,
    psi0: &StateVector,
    grid_steps: &[u64],
    trajectory: u64,
    acc: &mut Accumulator,
) -> Result<()> {
    let n_steps = *grid_steps.last().expect("grid is non-empty");
    let mut next = 0;
    let observe = |step: u64, psi: &DVector<C64>| {
        while next < grid_steps.len() && grid_steps[next] == step {
            acc.add_state(next, psi);
            next += 1;
        }
    };
    match opts.protocol {
        Protocol::Counting => simulate_counting(
            &opts.params,
            psi0,
            opts.dt,
            n_steps,
            opts.seed,
            trajectory,
            observe,
            |_| {},
        ),
        Protocol::Homodyne => simulate_homodyne(
            &opts.params,
            psi0,
            opts.dt,
            n_steps,
            opts.seed,
            trajectory,
            observe,
            |_, _, _, _| {},
        ),
    }
}

fn finish(opts: &EnsembleOptions, grid_steps: &[u64], total: Accumulator) -> Result<EnsembleResult> {
    let n = opts.n_traj as f64;
    let mut mean = ObservableSeries::default();
    let mut stderr = ObservableSeries::default();
    for (s, q) in total.sum.iter().zip(&total.sum_sq) {
        let mut m = [0.0; 4];
        let mut e = [f64::NAN; 4];
        for i in 0..4 {
            m[i] = s[i] / n;
            if opts.n_traj > 1 {
                let var = ((q[i] - n * m[i] * m[i]) / (n - 1.0)).max(0.0);
                e[i] = (var / n).sqrt();
            }
        }
        mean.push(m);
        stderr.push(e);
    }
    let density = match total.rho {
        Some(sums) => Some(
            sums.into_iter()
                .map(|m| DensityMatrix::new(m / C64::from(n)))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(EnsembleResult {
        protocol: opts.protocol,
        n_traj: opts.n_traj,
        seed: opts.seed,
        times: grid_steps.iter().map(|&s| s as f64 * opts.dt).collect(),
        mean,
        stderr,
        density,
    })
}
