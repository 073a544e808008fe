//! Linear algebra on the truncated Fock space `{|0>, ..., |n_max>}`.
//!
//! Everything is dense: the Hilbert-space dimension stays below ~64 in all
//! intended runs.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;

/// Norm deficit of a truncated coherent state above which a warning is logged.
pub const TRUNCATION_WARN_THRESHOLD: f64 = 1e-6;

/// Tolerances of the [`DensityMatrix`] invariants.
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = -1e-8;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

fn check_n_max(n_max: usize) -> Result<()> {
    if n_max < 1 {
        return Err(Error::InvalidDimension(n_max));
    }
    Ok(())
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Photon-number parity sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flipped(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn of(n: usize) -> Parity {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Normalizes `amps`. Fails if the vector is too short or has zero norm.
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        check_n_max(amps.len().saturating_sub(1))?;
        let norm = amps.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::DegenerateState(format!(
                "cannot normalize a vector of norm {norm}"
            )));
        }
        Ok(StateVector { amps: amps / C64::from(norm) })
    }

    pub fn from_amplitudes(amps: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amps))
    }

    /// Fock state `|n>`.
    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        check_n_max(n_max)?;
        if n > n_max {
            return Err(Error::invalid("n", format!("{n} exceeds n_max = {n_max}")));
        }
        let mut amps = DVector::from_element(n_max + 1, ZERO);
        amps[n] = ONE;
        Ok(StateVector { amps })
    }

    pub fn vacuum(n_max: usize) -> Result<Self> {
        Self::fock(0, n_max)
    }

    /// Wraps an already unit-norm vector. The caller guarantees normalization.
    pub(crate) fn from_normalized(amps: DVector<C64>) -> Self {
        debug_assert!((amps.norm() - 1.0).abs() < 1e-8);
        StateVector { amps }
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn n_max(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// Pure-state fidelity `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Unnormalized `op |self>`.
    pub fn apply(&self, op: &Operator) -> Result<DVector<C64>> {
        check_dim(op.dim(), self.dim())?;
        Ok(&op.matrix * &self.amps)
    }

    /// `normalize(op |self>)`; fails if `op` annihilates the state.
    pub fn apply_normalized(&self, op: &Operator) -> Result<StateVector> {
        StateVector::new(self.apply(op)?)
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: &self.amps * self.amps.adjoint(),
        }
    }
}

/// A dense square operator. Hermiticity is not required.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        check_dim(matrix.nrows(), matrix.ncols())?;
        check_n_max(matrix.nrows().saturating_sub(1))?;
        Ok(Operator { matrix })
    }

    pub fn zeros(n_max: usize) -> Result<Self> {
        check_n_max(n_max)?;
        Ok(Operator {
            matrix: DMatrix::zeros(n_max + 1, n_max + 1),
        })
    }

    pub fn identity(n_max: usize) -> Result<Self> {
        check_n_max(n_max)?;
        Ok(Operator {
            matrix: DMatrix::identity(n_max + 1, n_max + 1),
        })
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_max(&self) -> usize {
        self.dim() - 1
    }

    pub fn dagger(&self) -> Operator {
        Operator {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs_diff(&self.matrix, &self.matrix.adjoint()) <= tol
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Operator {
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        })
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Operator {
            matrix: &self.matrix * factor,
        }
    }

    pub fn try_add(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Operator {
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn try_mul(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Operator {
            matrix: &self.matrix * &other.matrix,
        })
    }
}

// The arithmetic impls panic on dimension mismatch like nalgebra does; use the
// `try_*` methods where dimensions are not known to agree.
impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        Operator {
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        Operator {
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        Operator {
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(C64::from(rhs))
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-ONE)
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates the density-matrix invariants.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        check_dim(matrix.nrows(), matrix.ncols())?;
        check_n_max(matrix.nrows().saturating_sub(1))?;
        let herm = max_abs_diff(&matrix, &matrix.adjoint());
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (max |rho - rho^dag| = {herm:e})"
            )));
        }
        let rho = DensityMatrix { matrix };
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace = {tr}")));
        }
        let min = rho.min_eigenvalue();
        if min < POSITIVITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<C64>) -> Self {
        DensityMatrix { matrix }
    }

    /// Weighted mixture `sum_k w_k |psi_k><psi_k|`. Weights must be
    /// non-negative and sum to one.
    pub fn mixture(components: &[(f64, &StateVector)]) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::invalid("components", "empty mixture"));
        };
        let dim = first.dim();
        let mut matrix = DMatrix::zeros(dim, dim);
        for &(w, psi) in components {
            check_dim(dim, psi.dim())?;
            if w < 0.0 {
                return Err(Error::invalid("weight", format!("{w} is negative")));
            }
            matrix += (&psi.amps * psi.amps.adjoint()) * C64::from(w);
        }
        Self::new(matrix)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_max(&self) -> usize {
        self.dim() - 1
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        hermitian_eigen(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let eig = SymmetricEigen::new(hermitize(&self.matrix));
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Photon-number distribution `rho_nn`.
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    /// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
    pub fn fidelity(&self, other: &DensityMatrix) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        let sqrt_rho = hermitian_sqrt(&self.matrix);
        let inner = &sqrt_rho * &other.matrix * &sqrt_rho;
        let (vals, _) = hermitian_eigen(&inner);
        let root_sum: f64 = vals.iter().map(|&v| clipped_sqrt(v)).sum();
        Ok(root_sum * root_sum)
    }

    /// Clamps eigenvalues in `[POSITIVITY_TOL, 0)` to zero and restores unit
    /// trace. Fails if an eigenvalue lies below the tolerance.
    pub(crate) fn clamp_positive(matrix: DMatrix<C64>) -> Result<Self> {
        let matrix = hermitize(&matrix);
        let (vals, vecs) = hermitian_eigen(&matrix);
        let min = vals.first().copied().unwrap_or(0.0);
        if min < POSITIVITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        if min >= 0.0 {
            let tr = matrix.trace().re;
            return Ok(DensityMatrix {
                matrix: matrix / C64::from(tr),
            });
        }
        let clamped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            clamped.len(),
            clamped.iter().map(|&v| C64::from(v / total)),
        ));
        Ok(DensityMatrix {
            matrix: &vecs * diag * vecs.adjoint(),
        })
    }
}

/// Anything an expectation value can be taken in.
pub trait Expectation {
    fn expval(&self, obs: &Operator) -> Result<C64>;
}

impl Expectation for StateVector {
    fn expval(&self, obs: &Operator) -> Result<C64> {
        check_dim(obs.dim(), self.dim())?;
        Ok(self.amps.dotc(&(&obs.matrix * &self.amps)))
    }
}

impl Expectation for DensityMatrix {
    fn expval(&self, obs: &Operator) -> Result<C64> {
        check_dim(obs.dim(), self.dim())?;
        // Tr[rho O] = sum_ij rho_ij O_ji
        let mut acc = ZERO;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.matrix[(i, j)] * obs.matrix[(j, i)];
            }
        }
        Ok(acc)
    }
}

/// `<psi|O|psi>` or `Tr[rho O]`.
pub fn expval<S: Expectation + ?Sized>(state: &S, obs: &Operator) -> Result<C64> {
    state.expval(obs)
}

pub fn annihilation(n_max: usize) -> Result<Operator> {
    check_n_max(n_max)?;
    let mut m = DMatrix::zeros(n_max + 1, n_max + 1);
    for n in 1..=n_max {
        m[(n - 1, n)] = C64::from((n as f64).sqrt());
    }
    Ok(Operator { matrix: m })
}

pub fn creation(n_max: usize) -> Result<Operator> {
    Ok(annihilation(n_max)?.dagger())
}

pub fn number_op(n_max: usize) -> Result<Operator> {
    check_n_max(n_max)?;
    let diag: Vec<C64> = (0..=n_max).map(|n| C64::from(n as f64)).collect();
    Operator::from_diagonal(&diag)
}

/// `exp(i pi a^dag a)`, diagonal `(-1)^n`.
pub fn parity_op(n_max: usize) -> Result<Operator> {
    check_n_max(n_max)?;
    let diag: Vec<C64> = (0..=n_max).map(|n| C64::from(Parity::of(n).sign())).collect();
    Operator::from_diagonal(&diag)
}

/// `x = (a^dag + a)/2` and `p = i(a^dag - a)/2`.
pub fn quadratures(n_max: usize) -> Result<(Operator, Operator)> {
    let a = annihilation(n_max)?;
    let ad = a.dagger();
    let x = (&ad + &a).scale(C64::from(0.5));
    let p = (&ad - &a).scale(I * 0.5);
    Ok((x, p))
}

/// Unnormalized Fock amplitudes `alpha^n / sqrt(n!)` by the recurrence
/// `c_{n+1} = c_n alpha / sqrt(n+1)`.
fn coherent_amplitudes(alpha: C64, n_max: usize) -> DVector<C64> {
    let mut amps = DVector::from_element(n_max + 1, ZERO);
    let mut c = ONE;
    amps[0] = c;
    for n in 1..=n_max {
        c = c * alpha / (n as f64).sqrt();
        amps[n] = c;
    }
    amps
}

/// Probability mass of the untruncated coherent state above `n_max`.
pub fn truncation_deficit(alpha: C64, n_max: usize) -> f64 {
    let amps = coherent_amplitudes(alpha, n_max);
    let kept = amps.norm_squared() * (-alpha.norm_sqr()).exp();
    (1.0 - kept).max(0.0)
}

/// Truncated, renormalized coherent state `|alpha>`.
///
/// Logs a warning when the discarded Poisson tail exceeds
/// [`TRUNCATION_WARN_THRESHOLD`].
pub fn coherent_state(alpha: C64, n_max: usize) -> Result<StateVector> {
    check_n_max(n_max)?;
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::invalid("alpha", format!("{alpha} is not finite")));
    }
    let deficit = truncation_deficit(alpha, n_max);
    if deficit > TRUNCATION_WARN_THRESHOLD {
        log::warn!(
            "coherent state alpha = {alpha} loses {deficit:.3e} of its norm at n_max = {n_max}"
        );
    }
    StateVector::new(coherent_amplitudes(alpha, n_max))
}

/// Cat state `C^±_alpha ∝ |alpha> ± |-alpha>`.
///
/// Only the Fock amplitudes of the requested parity survive, so the state is
/// an exact parity eigenstate.
pub fn cat_state(alpha: C64, parity: Parity, n_max: usize) -> Result<StateVector> {
    check_n_max(n_max)?;
    if alpha == ZERO && parity == Parity::Odd {
        return Err(Error::DegenerateState(
            "odd cat state is undefined at alpha = 0".into(),
        ));
    }
    let mut amps = coherent_amplitudes(alpha, n_max);
    for (n, c) in amps.iter_mut().enumerate() {
        if Parity::of(n) != parity {
            *c = ZERO;
        }
    }
    StateVector::new(amps)
}

/// Truncated displacement operator `exp(beta a^dag - beta* a)`, obtained by
/// exponentiating the Hermitian generator through its eigendecomposition.
///
/// The generator is truncated, so matrix elements near `n_max` differ from
/// the infinite-dimensional operator once `|beta|^2` is comparable to `n_max`;
/// see [`displacement_elements`] for the exact elements.
pub fn displacement(beta: C64, n_max: usize) -> Result<Operator> {
    let a = annihilation(n_max)?;
    // beta a^dag - beta* a = i K with K Hermitian
    let gen = &a.dagger().scale(beta) - &a.scale(beta.conj());
    let k = gen.matrix() * (-I);
    let (vals, vecs) = hermitian_eigen(&k);
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| C64::new(0.0, v).exp()),
    ));
    Ok(Operator {
        matrix: &vecs * phases * vecs.adjoint(),
    })
}

/// Generalized Laguerre polynomial `L_n^{(k)}(x)` by three-term recurrence.
pub(crate) fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let j = j as f64;
        let next = ((2.0 * j + 1.0 + k - x) * cur - (j + k) * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `<m|D(beta)|n>` of the untruncated displacement operator.
pub fn displacement_element(m: usize, n: usize, beta: C64) -> C64 {
    let x = beta.norm_sqr();
    let gauss = (-0.5 * x).exp();
    let (lo, hi) = if m >= n { (n, m) } else { (m, n) };
    // sqrt(lo!/hi!)
    let ratio = ((lo + 1)..=hi).fold(1.0, |acc, j| acc / (j as f64).sqrt());
    let base = if m >= n { beta } else { -beta.conj() };
    let power = base.powu((hi - lo) as u32);
    power * (ratio * gauss * laguerre(lo, hi - lo, x))
}

/// Block `{0..n_max}` of the untruncated displacement operator `D(beta)`.
/// Not unitary for large `|beta|`, but exact element by element.
pub fn displacement_elements(beta: C64, n_max: usize) -> Result<Operator> {
    check_n_max(n_max)?;
    let dim = n_max + 1;
    Ok(Operator {
        matrix: DMatrix::from_fn(dim, dim, |m, n| displacement_element(m, n, beta)),
    })
}

/// Serializes a complex number as `[re, im]`.
pub fn serialize_complex<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    [z.re, z.im].serialize(s)
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub(crate) fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::from(0.5)
}

/// Eigenpairs of a Hermitian matrix sorted by ascending eigenvalue.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

fn hermitian_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (vals, vecs) = hermitian_eigen(m);
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| C64::from(clipped_sqrt(v))),
    ));
    &vecs * diag * vecs.adjoint()
}

/// Eigenvalues below this are rounding noise of unit-trace matrices; their
/// square roots would otherwise be of order 1e-8.
const EIGEN_NOISE: f64 = 1e-14;

fn clipped_sqrt(v: f64) -> f64 {
    if v < EIGEN_NOISE {
        0.0
    } else {
        v.sqrt()
    }
}
