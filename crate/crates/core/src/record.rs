//! Trajectory records and their on-disk formats.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::model::{Channel, ModelParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Counting,
    Homodyne,
}

impl Protocol {
    pub fn default_dt(self) -> f64 {
        match self {
            Protocol::Counting => 1e-3,
            Protocol::Homodyne => 1e-4,
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::Counting => f.write_str("counting"),
            Protocol::Homodyne => f.write_str("homodyne"),
        }
    }
}

/// A detector click.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// End of the step in which the jump happened, in `1/eta`.
    #[serde(rename = "t")]
    pub time: f64,
    pub channel: Channel,
}

/// Time grid and seeding of a single trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub t_final: f64,
    pub dt: f64,
    /// Sampling interval in `1/eta`; rounded to a whole number of steps.
    pub sample_every: f64,
    pub seed: u64,
    /// Index selecting the random streams within `seed`.
    pub trajectory: u64,
}

impl RunSettings {
    pub fn new(protocol: Protocol, t_final: f64, seed: u64) -> Self {
        RunSettings {
            t_final,
            dt: protocol.default_dt(),
            sample_every: 0.1,
            seed,
            trajectory: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("t_final", format!("{} must be positive", self.t_final)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.sample_every > 0.0 && self.sample_every.is_finite()) {
            return Err(Error::invalid(
                "sample_every",
                format!("{} must be positive", self.sample_every),
            ));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_final / self.dt).round() as u64
    }

    /// Steps between samples, at least one.
    pub fn stride(&self) -> u64 {
        ((self.sample_every / self.dt).round() as u64).max(1)
    }
}

/// Sampled observables of one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub protocol: Protocol,
    pub params: ModelParams,
    pub settings: RunSettings,
    pub sample_times: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub parity: Vec<f64>,
    pub n: Vec<f64>,
    /// Detector clicks (counting only).
    pub events: Vec<JumpEvent>,
    /// Homodyne currents `[I_1ph, I_2ph]` averaged over each sampling
    /// interval (homodyne only).
    pub currents: Option<[Vec<f64>; 2]>,
    /// Largest `|‖psi‖ - 1|` seen before renormalization.
    pub max_norm_drift: f64,
}

impl TrajectoryRecord {
    pub(crate) fn new(protocol: Protocol, params: ModelParams, settings: RunSettings) -> Self {
        TrajectoryRecord {
            protocol,
            params,
            settings,
            sample_times: Vec::new(),
            x: Vec::new(),
            p: Vec::new(),
            parity: Vec::new(),
            n: Vec::new(),
            events: Vec::new(),
            currents: match protocol {
                Protocol::Counting => None,
                Protocol::Homodyne => Some([Vec::new(), Vec::new()]),
            },
            max_norm_drift: 0.0,
        }
    }

    pub(crate) fn push(&mut self, t: f64, obs: crate::stepper::Observables) {
        self.sample_times.push(t);
        self.x.push(obs.x);
        self.p.push(obs.p);
        self.parity.push(obs.parity);
        self.n.push(obs.n);
    }

    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.settings.seed
    }

    pub fn one_photon_events(&self) -> impl Iterator<Item = &JumpEvent> {
        self.events.iter().filter(|e| e.channel == Channel::OnePhoton)
    }

    /// Checks series lengths, `|<P>| <= 1`, and event ordering.
    pub fn validate(&self) -> Result<()> {
        let len = self.len();
        let mut lengths = vec![self.x.len(), self.p.len(), self.parity.len(), self.n.len()];
        if let Some(c) = &self.currents {
            lengths.extend(c.iter().map(Vec::len));
        }
        if let Some(&bad) = lengths.iter().find(|&&l| l != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: bad,
            });
        }
        if let Some(p) = self.parity.iter().find(|p| p.abs() > 1.0 + 1e-9) {
            return Err(Error::invalid("parity", format!("|<P>| = {p} exceeds 1")));
        }
        if self.events.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::invalid("events", "event times are not strictly increasing"));
        }
        Ok(())
    }

    /// CSV with header `t,x,p,parity,n` (plus `I1,I2` for homodyne), preceded
    /// by a `#` comment giving the time unit. Values carry 17 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# time in units of 1/eta; protocol = {}", self.protocol)?;
        match &self.currents {
            None => writeln!(w, "t,x,p,parity,n")?,
            Some(_) => writeln!(w, "t,x,p,parity,n,I1,I2")?,
        }
        for i in 0..self.len() {
            write!(
                w,
                "{},{},{},{},{}",
                fmt17(self.sample_times[i]),
                fmt17(self.x[i]),
                fmt17(self.p[i]),
                fmt17(self.parity[i]),
                fmt17(self.n[i]),
            )?;
            if let Some([i1, i2]) = &self.currents {
                write!(w, ",{},{}", fmt17(i1[i]), fmt17(i2[i]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Event log as `[{"t": ..., "channel": "1ph" | "2ph"}, ...]`.
    pub fn events_json(&self) -> String {
        serde_json::to_string_pretty(&self.events).expect("events serialize")
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
