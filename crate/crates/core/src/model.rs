//! Hamiltonians and jump operators of the driven Kerr resonator, in the frame
//! rotating at the cavity frequency and in units of the two-photon loss rate.

use serde::{Deserialize, Serialize};

use crate::fock::{annihilation, Operator, C64};
use crate::{Error, Result};

/// Physical parameters. Rates and drive amplitudes are in units of `eta`.
#[allow(non_snake_case)]
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Kerr interaction.
    pub U: f64,
    /// Two-photon drive amplitude.
    pub G: f64,
    /// One-photon drive amplitude.
    pub F: f64,
    /// One-photon loss rate.
    pub gamma: f64,
    /// Two-photon loss rate.
    pub eta: f64,
    pub n_max: usize,
}

impl ModelParams {
    /// `U = 1, G = 5, gamma = 0.1, eta = 1, n_max = 15`.
    pub fn two_photon_reference() -> Self {
        ModelParams {
            U: 1.0,
            G: 5.0,
            F: 0.0,
            gamma: 0.1,
            eta: 1.0,
            n_max: 15,
        }
    }

    /// `U = 1, F = 5, G = 0, gamma = 0.1, eta = 1, n_max = 15`.
    pub fn one_photon_reference() -> Self {
        ModelParams {
            U: 1.0,
            G: 0.0,
            F: 5.0,
            gamma: 0.1,
            eta: 1.0,
            n_max: 15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.U, self.G, self.F, self.gamma, self.eta];
        let names = ["U", "G", "F", "gamma", "eta"];
        for (v, name) in finite.iter().zip(names) {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("{v} is not finite")));
            }
        }
        if self.gamma < 0.0 {
            return Err(Error::invalid("gamma", format!("rate {} is negative", self.gamma)));
        }
        if self.eta < 0.0 {
            return Err(Error::invalid("eta", format!("rate {} is negative", self.eta)));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidDimension(self.n_max));
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate), and additionally requires some
    /// dissipation.
    pub fn validate_dissipative(&self) -> Result<()> {
        self.validate()?;
        if self.gamma == 0.0 && self.eta == 0.0 {
            return Err(Error::invalid("gamma", "gamma and eta are both zero"));
        }
        Ok(())
    }

    /// Full Hamiltonian with both drive terms; equals
    /// [`hamiltonian_two_photon`] when `F = 0` and [`hamiltonian_one_photon`]
    /// when `G = 0`.
    pub fn hamiltonian(&self) -> Result<Operator> {
        let a = annihilation(self.n_max)?;
        let ad = a.dagger();
        let a2 = &a * &a;
        let ad2 = &ad * &ad;
        let kerr = (&ad2 * &a2).scale(C64::from(self.U / 2.0));
        let two = (&ad2 + &a2).scale(C64::from(self.G / 2.0));
        let one = (&ad + &a).scale(C64::from(self.F));
        Ok(&(&kerr + &two) + &one)
    }

    pub fn jump_operators(&self) -> Result<Vec<JumpOperator>> {
        jump_operators(self)
    }
}

/// `H = (U/2) a^dag a^dag a a + (G/2)(a^dag a^dag + a a)`.
pub fn hamiltonian_two_photon(params: &ModelParams) -> Result<Operator> {
    ModelParams { F: 0.0, ..*params }.hamiltonian()
}

/// `H = (U/2) a^dag a^dag a a + F (a^dag + a)`.
pub fn hamiltonian_one_photon(params: &ModelParams) -> Result<Operator> {
    ModelParams { G: 0.0, ..*params }.hamiltonian()
}

/// Loss channel monitored by the detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "1ph")]
    OnePhoton,
    #[serde(rename = "2ph")]
    TwoPhoton,
}

impl Channel {
    pub fn label(self) -> &'static str {
        match self {
            Channel::OnePhoton => "1ph",
            Channel::TwoPhoton => "2ph",
        }
    }

    /// Index used to key the channel's random stream.
    pub fn index(self) -> u64 {
        match self {
            Channel::OnePhoton => 1,
            Channel::TwoPhoton => 2,
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpOperator {
    pub channel: Channel,
    pub op: Operator,
}

/// `J_1 = sqrt(gamma) a` and `J_2 = sqrt(eta) a^2`; zero-rate channels are
/// left out.
pub fn jump_operators(params: &ModelParams) -> Result<Vec<JumpOperator>> {
    params.validate()?;
    let a = annihilation(params.n_max)?;
    let mut jumps = Vec::with_capacity(2);
    if params.gamma > 0.0 {
        jumps.push(JumpOperator {
            channel: Channel::OnePhoton,
            op: a.scale(C64::from(params.gamma.sqrt())),
        });
    }
    if params.eta > 0.0 {
        jumps.push(JumpOperator {
            channel: Channel::TwoPhoton,
            op: (&a * &a).scale(C64::from(params.eta.sqrt())),
        });
    }
    Ok(jumps)
}
