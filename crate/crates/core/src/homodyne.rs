//! Ideal homodyne trajectories: the diffusive stochastic Schrödinger equation
//! with one real Wiener channel per loss operator, integrated by
//! Euler–Maruyama and renormalized after every step.
//!
//! With `e_k = <J_k + J_k^dag>` the update is
//!
//! ```text
//! dpsi = -i H psi dt
//!      + sum_k [ (J_k - e_k/2) psi dW_k
//!              - (1/2)(J_k^dag J_k - e_k J_k + e_k^2/4) psi dt ]
//! ```
//!
//! and the measured current of channel `k` obeys `I_k dt = e_k dt + dW_k`.

use nalgebra::DVector;

use crate::fock::{Operator, StateVector, C64};
use crate::model::{Channel, JumpOperator, ModelParams};
use crate::record::{Protocol, RunSettings, TrajectoryRecord};
use crate::rng::WienerStream;
use crate::stepper::{is_finite, Observables, SparseOp};
use crate::{Error, Result};

struct ChannelOps {
    slot: usize,
    jump: SparseOp,
    jpsi: DVector<C64>,
}

/// Reusable Euler–Maruyama integrator for one `(H, {J_k}, dt)` triple.
pub struct HomodyneStepper {
    /// `-i H - (1/2) sum_k J_k^dag J_k`
    drift: SparseOp,
    channels: Vec<ChannelOps>,
    dt: f64,
    scratch: DVector<C64>,
}

impl HomodyneStepper {
    pub fn new(h: &Operator, jumps: &[JumpOperator], dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("{dt} must be positive")));
        }
        let dim = h.dim();
        let mut drift = h.matrix() * C64::new(0.0, -1.0);
        let mut channels = Vec::with_capacity(jumps.len());
        for j in jumps {
            if j.op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: j.op.dim(),
                });
            }
            drift -= (j.op.matrix().adjoint() * j.op.matrix()) * C64::from(0.5);
            channels.push(ChannelOps {
                slot: channel_slot(j.channel),
                jump: SparseOp::from_dense(j.op.matrix()),
                jpsi: DVector::zeros(dim),
            });
        }
        Ok(HomodyneStepper {
            drift: SparseOp::from_dense(&drift),
            channels,
            dt,
            scratch: DVector::zeros(dim),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `<J_k + J_k^dag>` per channel slot (`[1ph, 2ph]`); absent channels
    /// read zero.
    pub fn expectations(&mut self, psi: &DVector<C64>) -> [f64; 2] {
        let mut e = [0.0; 2];
        for ch in &mut self.channels {
            ch.jump.apply(&mut ch.jpsi, psi);
            e[ch.slot] = 2.0 * psi.dotc(&ch.jpsi).re;
        }
        e
    }

    /// One step in place. `dw` is indexed by channel slot. Returns the
    /// channel expectations at the start of the step and the norm of the
    /// state before renormalization.
    pub fn step(&mut self, psi: &mut DVector<C64>, dw: [f64; 2], time: f64) -> Result<([f64; 2], f64)> {
        let e = self.expectations(psi);
        let dt = self.dt;
        self.drift.apply(&mut self.scratch, psi);
        self.scratch *= C64::from(dt);
        let mut own = 1.0;
        for ch in &self.channels {
            let (ek, dwk) = (e[ch.slot], dw[ch.slot]);
            self.scratch.axpy(C64::from(dwk + 0.5 * ek * dt), &ch.jpsi, C64::from(1.0));
            own -= 0.5 * ek * dwk + 0.125 * ek * ek * dt;
        }
        self.scratch.axpy(C64::from(own), psi, C64::from(1.0));
        let norm = self.scratch.norm();
        if !is_finite(&self.scratch) || !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::IntegrationFailure {
                time,
                reason: format!("state norm became {norm}"),
            });
        }
        self.scratch /= C64::from(norm);
        std::mem::swap(psi, &mut self.scratch);
        Ok((e, norm))
    }
}

fn channel_slot(channel: Channel) -> usize {
    channel.index() as usize - 1
}

/// One homodyne step with externally supplied increments `dw = [dW_1ph,
/// dW_2ph]`. Builds a fresh integrator; use [`HomodyneStepper`] in loops.
pub fn step_homodyne(
    psi: &StateVector,
    h: &Operator,
    jumps: &[JumpOperator],
    dt: f64,
    dw: [f64; 2],
) -> Result<StateVector> {
    step_homodyne_with_norm(psi, h, jumps, dt, dw).map(|(s, _)| s)
}

/// Like [`step_homodyne`], also returning the norm before renormalization.
pub fn step_homodyne_with_norm(
    psi: &StateVector,
    h: &Operator,
    jumps: &[JumpOperator],
    dt: f64,
    dw: [f64; 2],
) -> Result<(StateVector, f64)> {
    if psi.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi.dim(),
        });
    }
    let mut stepper = HomodyneStepper::new(h, jumps, dt)?;
    let mut amps = psi.amplitudes().clone();
    let (_, norm) = stepper.step(&mut amps, dw, 0.0)?;
    Ok((StateVector::from_normalized(amps), norm))
}

/// Per-step currents `I_k = <J_k + J_k^dag>(psi_i) + dW_k[i] / dt` for each
/// channel in `jumps`, in the order given. `dw[k]` is the increment series of
/// `jumps[k]`.
pub fn homodyne_currents(
    psi_series: &[StateVector],
    dw: &[Vec<f64>],
    jumps: &[JumpOperator],
    dt: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("{dt} must be positive")));
    }
    if dw.len() != jumps.len() {
        return Err(Error::DimensionMismatch {
            expected: jumps.len(),
            found: dw.len(),
        });
    }
    if let Some(bad) = dw.iter().find(|s| s.len() != psi_series.len()) {
        return Err(Error::DimensionMismatch {
            expected: psi_series.len(),
            found: bad.len(),
        });
    }
    let mut out = Vec::with_capacity(jumps.len());
    for (j, incs) in jumps.iter().zip(dw) {
        let mut series = Vec::with_capacity(incs.len());
        for (psi, &d) in psi_series.iter().zip(incs) {
            let jpsi = psi.apply(&j.op)?;
            let e = 2.0 * psi.amplitudes().dotc(&jpsi).re;
            series.push(e + d / dt);
        }
        out.push(series);
    }
    Ok(out)
}

/// Runs one homodyne trajectory for `n_steps` steps. `observe(step, psi)` is
/// called for the initial state and after every step; `on_step(step, e, dw,
/// norm)` after every step with the expectations at its start, the
/// increments used and the norm before renormalization.
pub(crate) fn simulate_homodyne(
    params: &ModelParams,
    psi0: &StateVector,
    dt: f64,
    n_steps: u64,
    seed: u64,
    trajectory: u64,
    mut observe: impl FnMut(u64, &DVector<C64>),
    mut on_step: impl FnMut(u64, [f64; 2], [f64; 2], f64),
) -> Result<()> {
    params.validate()?;
    let h = params.hamiltonian()?;
    if psi0.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi0.dim(),
        });
    }
    let jumps = params.jump_operators()?;
    let mut stepper = HomodyneStepper::new(&h, &jumps, dt)?;
    let mut wiener = WienerStream::new(seed, trajectory, dt);
    let mut psi = psi0.amplitudes().clone();
    observe(0, &psi);
    for step in 1..=n_steps {
        let dw = wiener.next_increments();
        let (e, norm) = stepper.step(&mut psi, dw, (step - 1) as f64 * dt)?;
        on_step(step, e, dw, norm);
        observe(step, &psi);
    }
    Ok(())
}

/// Homodyne trajectory starting from the vacuum.
pub fn run_homodyne(params: &ModelParams, settings: &RunSettings) -> Result<TrajectoryRecord> {
    let psi0 = StateVector::vacuum(params.n_max)?;
    run_homodyne_from(params, &psi0, settings)
}

/// Stored currents are averages of `I_k` over each sampling interval ending
/// at the sample time; the first sample holds `<J_k + J_k^dag>` of the
/// initial state.
pub fn run_homodyne_from(
    params: &ModelParams,
    psi0: &StateVector,
    settings: &RunSettings,
) -> Result<TrajectoryRecord> {
    settings.validate()?;
    let stride = settings.stride();
    let n_steps = settings.n_steps();
    let dt = settings.dt;
    let mut record = TrajectoryRecord::new(Protocol::Homodyne, *params, *settings);
    let mut currents = [Vec::new(), Vec::new()];
    let mut acc = [0.0; 2];
    let mut acc_steps = 0u64;
    let mut drift: f64 = 0.0;
    let mut first = true;
    simulate_homodyne(
        params,
        psi0,
        dt,
        n_steps,
        settings.seed,
        settings.trajectory,
        |step, psi| {
            if step % stride == 0 || step == n_steps {
                record.push(step as f64 * dt, Observables::of(psi));
            }
        },
        |step, e, dw, norm| {
            if first {
                currents[0].push(e[0]);
                currents[1].push(e[1]);
                first = false;
            }
            drift = drift.max((norm - 1.0).abs());
            for k in 0..2 {
                acc[k] += e[k] * dt + dw[k];
            }
            acc_steps += 1;
            if step % stride == 0 || step == n_steps {
                let span = acc_steps as f64 * dt;
                for k in 0..2 {
                    currents[k].push(acc[k] / span);
                }
                acc = [0.0; 2];
                acc_steps = 0;
            }
        },
    )?;
    record.currents = Some(currents);
    record.max_norm_drift = drift;
    record.validate()?;
    Ok(record)
}
