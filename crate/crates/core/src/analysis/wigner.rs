//! Wigner function as a displaced parity,
//! `W(beta) = (2/pi) Tr[rho D(beta) P D(-beta)]` with `beta = x + i p`.
//!
//! Since `D(beta) P D(-beta) = D(2 beta) P`, each grid point is
//! `(2/pi) sum_{m,n} (-1)^n rho_{nm} <m|D(2 beta)|n>`, evaluated with the
//! closed-form matrix elements of the untruncated displacement. This stays
//! exact far from the origin, where a truncated matrix exponential does not.

use std::f64::consts::FRAC_2_PI;
use std::io::{self, Write};

use serde::Serialize;

use crate::fock::{displacement_element, DensityMatrix, C64};
use crate::record::fmt17;
use crate::{Error, Result};

/// Allowed deviation of the grid integral from one before a support warning.
pub const SUPPORT_TOLERANCE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    /// Row-major in `x`: `values[i * p_axis.len() + j] = W(x_i, p_j)`.
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p_axis.len() + j]
    }

    fn spacing(axis: &[f64]) -> f64 {
        if axis.len() < 2 {
            0.0
        } else {
            (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
        }
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let (nx, np) = (self.x_axis.len(), self.p_axis.len());
        let weight = |k: usize, n: usize| if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        let mut sum = 0.0;
        for i in 0..nx {
            for j in 0..np {
                sum += weight(i, nx) * weight(j, np) * self.at(i, j);
            }
        }
        sum * Self::spacing(&self.x_axis) * Self::spacing(&self.p_axis)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmin(&self) -> (f64, f64) {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (k, &v)| if v < best.1 { (k, v) } else { best });
        let np = self.p_axis.len();
        (self.x_axis[k / np], self.p_axis[k % np])
    }

    /// Grid point of the largest value.
    pub fn argmax(&self) -> (f64, f64) {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
        let np = self.p_axis.len();
        (self.x_axis[k / np], self.p_axis[k % np])
    }

    /// Long format `x,p,W`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,p,W")?;
        for (i, &x) in self.x_axis.iter().enumerate() {
            for (j, &p) in self.p_axis.iter().enumerate() {
                writeln!(w, "{},{},{}", fmt17(x), fmt17(p), fmt17(self.at(i, j)))?;
            }
        }
        Ok(())
    }
}

fn axis(range: (f64, f64), n: usize, name: &'static str) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(name, format!("empty range [{lo}, {hi}]")));
    }
    if n < 2 {
        return Err(Error::invalid(name, "needs at least two points"));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|k| lo + k as f64 * step).collect())
}

/// `W` at a single phase-space point.
pub fn wigner_at(rho: &DensityMatrix, x: f64, p: f64) -> f64 {
    let m = rho.matrix();
    let dim = rho.dim();
    let beta2 = C64::new(2.0 * x, 2.0 * p);
    let mut acc = C64::new(0.0, 0.0);
    for n in 0..dim {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        for k in 0..dim {
            acc += m[(n, k)] * displacement_element(k, n, beta2) * sign;
        }
    }
    FRAC_2_PI * acc.re
}

/// Evaluates `W` on a `resolution.0 x resolution.1` grid spanning the given
/// ranges. Logs a warning when the grid integral is off by more than
/// [`SUPPORT_TOLERANCE`], i.e. when the state is not contained in the grid.
pub fn wigner(
    rho: &DensityMatrix,
    x_range: (f64, f64),
    p_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<WignerGrid> {
    let x_axis = axis(x_range, resolution.0, "x_range")?;
    let p_axis = axis(p_range, resolution.1, "p_range")?;
    let mut values = Vec::with_capacity(x_axis.len() * p_axis.len());
    for &x in &x_axis {
        for &p in &p_axis {
            values.push(wigner_at(rho, x, p));
        }
    }
    let grid = WignerGrid { x_axis, p_axis, values };
    let integral = grid.integral();
    if (integral - 1.0).abs() > SUPPORT_TOLERANCE {
        log::warn!("Wigner grid integral is {integral:.4}; the grid does not cover the state");
    }
    Ok(grid)
}

/// 101 x 101 points over `[-4, 4]^2`.
pub fn wigner_default(rho: &DensityMatrix) -> Result<WignerGrid> {
    wigner(rho, (-4.0, 4.0), (-4.0, 4.0), (101, 101))
}
