//! Photon-counting quantum trajectories.
//!
//! Each step of length `dt` draws one uniform variate `u`. With
//! `P_k = <J_k^dag J_k> dt`, a one-photon click happens if `u < P_1`, a
//! two-photon click if `P_1 <= u < P_1 + P_2`; the state then becomes
//! `normalize(J_k psi)`. Otherwise the state advances by one RK4 step under
//! `H_eff = H - (i/2) sum_k J_k^dag J_k` and is renormalized. At most one
//! click is registered per step.

use nalgebra::DVector;
use rand::RngCore;

use crate::fock::{Operator, StateVector, C64};
use crate::model::{Channel, JumpOperator, ModelParams};
use crate::record::{JumpEvent, Protocol, RunSettings, TrajectoryRecord};
use crate::rng::{self, COUNTING_SLOT};
use crate::stepper::{is_finite, rk4_propagator, Observables, SparseOp};
use crate::{Error, Result};

/// Upper bound on the total click probability of a single step.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

struct ChannelOps {
    channel: Channel,
    jump: SparseOp,
    rate: SparseOp,
}

/// Reusable integrator for one `(H, {J_k}, dt)` triple.
pub struct CountingStepper {
    no_jump: SparseOp,
    channels: Vec<ChannelOps>,
    dt: f64,
    scratch: DVector<C64>,
    probs: Vec<f64>,
}

impl CountingStepper {
    pub fn new(h: &Operator, jumps: &[JumpOperator], dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("{dt} must be positive")));
        }
        let dim = h.dim();
        let mut h_eff = h.matrix().clone();
        let mut channels = Vec::with_capacity(jumps.len());
        for j in jumps {
            if j.op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: j.op.dim(),
                });
            }
            let rate = j.op.matrix().adjoint() * j.op.matrix();
            h_eff -= &rate * C64::new(0.0, 0.5);
            channels.push(ChannelOps {
                channel: j.channel,
                jump: SparseOp::from_dense(j.op.matrix()),
                rate: SparseOp::from_dense(&rate),
            });
        }
        let generator = h_eff * C64::new(0.0, -1.0);
        Ok(CountingStepper {
            no_jump: SparseOp::from_dense(&rk4_propagator(&generator, dt)),
            channels,
            dt,
            scratch: DVector::zeros(dim),
            probs: vec![0.0; jumps.len()],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Click probabilities `P_k = <J_k^dag J_k> dt` in channel order.
    pub fn jump_probabilities(&mut self, psi: &DVector<C64>) -> &[f64] {
        for (prob, ch) in self.probs.iter_mut().zip(&self.channels) {
            ch.rate.apply(&mut self.scratch, psi);
            *prob = psi.dotc(&self.scratch).re * self.dt;
        }
        &self.probs
    }

    /// Advances the normalized state `psi` in place given the step's uniform
    /// variate `u`, returning the channel that clicked, if any.
    pub fn step(&mut self, psi: &mut DVector<C64>, u: f64, time: f64) -> Result<Option<Channel>> {
        self.jump_probabilities(psi);
        let total: f64 = self.probs.iter().sum();
        if total > MAX_JUMP_PROBABILITY {
            return Err(Error::StepTooLarge {
                probability: total,
                limit: MAX_JUMP_PROBABILITY,
            });
        }
        let mut threshold = 0.0;
        let mut fired = None;
        for (k, &p) in self.probs.iter().enumerate() {
            threshold += p;
            if u < threshold {
                fired = Some(k);
                break;
            }
        }
        let op = match fired {
            Some(k) => &self.channels[k].jump,
            None => &self.no_jump,
        };
        op.apply(&mut self.scratch, psi);
        let norm = self.scratch.norm();
        if !(norm > 0.0 && norm.is_finite()) || !is_finite(&self.scratch) {
            return Err(Error::IntegrationFailure {
                time,
                reason: format!("state norm became {norm}"),
            });
        }
        self.scratch /= C64::from(norm);
        std::mem::swap(psi, &mut self.scratch);
        Ok(fired.map(|k| self.channels[k].channel))
    }
}

/// One counting step from `psi` at time `t`. Builds a fresh integrator; use
/// [`CountingStepper`] in loops.
pub fn step_counting(
    psi: &StateVector,
    h: &Operator,
    jumps: &[JumpOperator],
    dt: f64,
    t: f64,
    rng: &mut impl RngCore,
) -> Result<(StateVector, Option<JumpEvent>)> {
    if psi.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi.dim(),
        });
    }
    let mut stepper = CountingStepper::new(h, jumps, dt)?;
    let mut amps = psi.amplitudes().clone();
    let fired = stepper.step(&mut amps, rng::uniform(rng), t)?;
    let event = fired.map(|channel| JumpEvent { time: t + dt, channel });
    Ok((StateVector::from_normalized(amps), event))
}

/// Runs one counting trajectory from `psi0` for `n_steps` steps, calling
/// `observe(step, psi)` for the initial state and after every step, and
/// `on_click` for each registered click.
pub(crate) fn simulate_counting(
    params: &ModelParams,
    psi0: &StateVector,
    dt: f64,
    n_steps: u64,
    seed: u64,
    trajectory: u64,
    mut observe: impl FnMut(u64, &DVector<C64>),
    mut on_click: impl FnMut(JumpEvent),
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
    let mut stepper = CountingStepper::new(&h, &jumps, dt)?;
    let mut rng = rng::stream(seed, trajectory, COUNTING_SLOT);
    let mut psi = psi0.amplitudes().clone();

    let initial: f64 = stepper.jump_probabilities(&psi).iter().sum();
    if initial > MAX_JUMP_PROBABILITY {
        return Err(Error::StepTooLarge {
            probability: initial,
            limit: MAX_JUMP_PROBABILITY,
        });
    }

    observe(0, &psi);
    for step in 1..=n_steps {
        let t = (step - 1) as f64 * dt;
        let u = rng::uniform(&mut rng);
        if let Some(channel) = stepper.step(&mut psi, u, t)? {
            on_click(JumpEvent {
                time: step as f64 * dt,
                channel,
            });
        }
        observe(step, &psi);
    }
    Ok(())
}

/// Counting trajectory starting from the vacuum.
pub fn run_counting(params: &ModelParams, settings: &RunSettings) -> Result<TrajectoryRecord> {
    let psi0 = StateVector::vacuum(params.n_max)?;
    run_counting_from(params, &psi0, settings)
}

pub fn run_counting_from(
    params: &ModelParams,
    psi0: &StateVector,
    settings: &RunSettings,
) -> Result<TrajectoryRecord> {
    settings.validate()?;
    let stride = settings.stride();
    let n_steps = settings.n_steps();
    let mut record = TrajectoryRecord::new(Protocol::Counting, *params, *settings);
    let mut events = Vec::new();
    simulate_counting(
        params,
        psi0,
        settings.dt,
        n_steps,
        settings.seed,
        settings.trajectory,
        |step, psi| {
            if step % stride == 0 || step == n_steps {
                record.push(step as f64 * settings.dt, Observables::of(psi));
            }
        },
        |event| events.push(event),
    )?;
    record.events = events;
    record.validate()?;
    Ok(record)
}
