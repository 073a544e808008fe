//! Small helpers shared by the trajectory integrators.

use nalgebra::{DMatrix, DVector};

use crate::fock::{C64, ZERO};

/// `<x>`, `<p>`, `<P>` and `<n>` of a pure state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observables {
    pub x: f64,
    pub p: f64,
    pub parity: f64,
    pub n: f64,
}

impl Observables {
    /// Read directly off the Fock amplitudes; `psi` must be normalized.
    pub fn of(psi: &DVector<C64>) -> Self {
        let mut a_mean = ZERO;
        let mut parity = 0.0;
        let mut n = 0.0;
        for k in 0..psi.len() {
            let pk = psi[k].norm_sqr();
            parity += if k % 2 == 0 { pk } else { -pk };
            n += k as f64 * pk;
            if k + 1 < psi.len() {
                a_mean += psi[k].conj() * psi[k + 1] * ((k + 1) as f64).sqrt();
            }
        }
        // <x> = Re<a>, <p> = Im<a>
        Observables {
            x: a_mean.re,
            p: a_mean.im,
            parity,
            n,
        }
    }
}

/// Compressed-row copy of a small matrix without its exact zeros. The model
/// operators are banded, so this beats a dense product by a wide margin.
#[derive(Clone, Debug)]
pub(crate) struct SparseOp {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOp {
    pub(crate) fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut row_start = Vec::with_capacity(m.nrows() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        SparseOp { row_start, cols, vals }
    }

    /// `out = self * v`.
    #[inline]
    pub(crate) fn apply(&self, out: &mut DVector<C64>, v: &DVector<C64>) {
        let v = v.as_slice();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            *o = acc;
        }
    }
}

pub(crate) fn is_finite(v: &DVector<C64>) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Fourth-order Taylor polynomial of `exp(m dt)`, i.e. one classical RK4 step
/// of the linear equation `dv/dt = m v`.
pub(crate) fn rk4_propagator(m: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
    let n = m.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let hm = m * C64::from(dt);
    let mut step = id.clone();
    for k in (1..=4).rev() {
        step = &id + (&hm * step) * C64::from(1.0 / k as f64);
    }
    step
}
