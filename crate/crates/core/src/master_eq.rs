//! Lindblad master equation: Liouvillian construction, time propagation,
//! steady state and its two-component decomposition.
//!
//! The generator is stored in the standard convention
//! `d rho/dt = -i[H, rho] + sum_k (J_k rho J_k^dag - {J_k^dag J_k, rho}/2)`
//! acting on column-stacked density matrices, `vec(A X B) = (B^T ⊗ A) vec(X)`.

use nalgebra::{DMatrix, DVector, Schur, SVD};

use crate::fock::{
    annihilation, cat_state, hermitize, parity_op, DensityMatrix, Expectation,
    Operator, Parity, StateVector, C64, ONE, ZERO,
};
use crate::model::ModelParams;
use crate::stepper::rk4_propagator;
use crate::{Error, Result};

/// Eigenvalues with modulus below this are treated as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;
/// Maximum entry of `L rho_ss` accepted for a steady state.
pub const STEADY_STATE_RESIDUAL_TOL: f64 = 1e-10;
/// Allowed trace drift per unit time during propagation.
pub const TRACE_DRIFT_PER_TIME: f64 = 1e-8;
/// Minimum `|<P>|` of each dominant eigenvector for the cat-mixture fit.
pub const PARITY_POLARIZATION_MIN: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct Liouvillian {
    matrix: DMatrix<C64>,
    dim: usize,
}

impl Liouvillian {
    /// Liouvillian of the model, with the Hamiltonian from
    /// [`ModelParams::hamiltonian`].
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        let h = params.hamiltonian()?;
        let jumps: Vec<Operator> = params.jump_operators()?.into_iter().map(|j| j.op).collect();
        build_liouvillian(&h, &jumps)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Hilbert-space dimension `D`; the superoperator is `D^2 x D^2`.
    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    /// `L rho`, as a (generally not unit-trace) matrix.
    pub fn apply(&self, rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.nrows(),
            });
        }
        let out = &self.matrix * vectorize(rho);
        Ok(unvectorize(&out, self.dim))
    }

    /// All eigenvalues, sorted by increasing modulus.
    pub fn spectrum(&self) -> Vec<C64> {
        let schur = Schur::new(self.matrix.clone());
        // Complex Schur form is upper triangular: the diagonal is the spectrum.
        let (_, t) = schur.unpack();
        let mut eig: Vec<C64> = t.diagonal().iter().copied().collect();
        eig.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        eig
    }
}

pub(crate) fn vectorize(m: &DMatrix<C64>) -> DVector<C64> {
    // nalgebra storage is column-major, which is exactly column stacking.
    DVector::from_column_slice(m.as_slice())
}

pub(crate) fn unvectorize(v: &DVector<C64>, dim: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Builds the generator `-i[H, .] + sum_k D[J_k]`.
pub fn build_liouvillian(h: &Operator, jumps: &[Operator]) -> Result<Liouvillian> {
    let dim = h.dim();
    for j in jumps {
        if j.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: j.dim(),
            });
        }
    }
    let id = DMatrix::<C64>::identity(dim, dim);
    let hm = h.matrix();
    let minus_i = C64::new(0.0, -1.0);
    let mut l = (id.kronecker(hm) - hm.transpose().kronecker(&id)) * minus_i;
    for j in jumps {
        let jm = j.matrix();
        let jdj = jm.adjoint() * jm;
        l += jm.conjugate().kronecker(jm);
        l -= (id.kronecker(&jdj) + jdj.transpose().kronecker(&id)) * C64::from(0.5);
    }
    Ok(Liouvillian { matrix: l, dim })
}

/// Fixed-step fourth-order Runge–Kutta propagator for `d vec(rho)/dt = L vec(rho)`.
///
/// For a constant linear generator one RK4 step is the degree-four Taylor
/// polynomial of `exp(L dt)`, which is precomputed once.
pub struct MasterEquationSolver {
    step: DMatrix<C64>,
    dim: usize,
    dt: f64,
}

impl MasterEquationSolver {
    pub fn new(l: &Liouvillian, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("{dt} must be positive")));
        }
        // RK4 is unstable once |lambda dt| exceeds ~2.78 on the real axis; the
        // diagonal gives a cheap lower bound on the spectral radius.
        let stiff = l.matrix.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if stiff * dt > 2.5 {
            return Err(Error::IntegrationFailure {
                time: 0.0,
                reason: format!("dt * |L| = {:.3} is outside the RK4 stability region", stiff * dt),
            });
        }
        Ok(MasterEquationSolver {
            step: rk4_propagator(&l.matrix, dt),
            dim: l.dim,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `vec(rho)` by `steps` RK4 steps in place.
    pub fn advance(&self, state: &mut DVector<C64>, steps: u64) {
        let mut scratch = DVector::zeros(state.len());
        for _ in 0..steps {
            scratch.gemv(ONE, &self.step, state, ZERO);
            std::mem::swap(state, &mut scratch);
        }
    }

    fn snapshot(&self, state: &DVector<C64>, time: f64) -> Result<DensityMatrix> {
        if state.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::IntegrationFailure {
                time,
                reason: "non-finite density matrix".into(),
            });
        }
        let m = unvectorize(state, self.dim);
        let drift = (m.trace() - ONE).norm();
        if drift > TRACE_DRIFT_PER_TIME * time.max(1.0) {
            return Err(Error::IntegrationFailure {
                time,
                reason: format!("trace drifted by {drift:e}"),
            });
        }
        DensityMatrix::clamp_positive(m).map_err(|e| Error::IntegrationFailure {
            time,
            reason: e.to_string(),
        })
    }

    /// Snapshots at the requested times, each rounded to the nearest step.
    /// Times must be non-decreasing.
    pub fn evolve_at(&self, rho0: &DensityMatrix, times: &[f64]) -> Result<Vec<DensityMatrix>> {
        if rho0.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho0.dim(),
            });
        }
        let mut state = vectorize(rho0.matrix());
        let mut current = 0u64;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let target = (t / self.dt).round();
            if !(target >= current as f64) {
                return Err(Error::invalid("times", "must be non-negative and non-decreasing"));
            }
            let target = target as u64;
            self.advance(&mut state, target - current);
            current = target;
            out.push(self.snapshot(&state, current as f64 * self.dt)?);
        }
        Ok(out)
    }
}

/// Integrates from `rho0` to `t_final`, returning `(t, rho(t))` every
/// `stride` steps plus the final time.
pub fn evolve_me(
    rho0: &DensityMatrix,
    l: &Liouvillian,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<Vec<(f64, DensityMatrix)>> {
    if !(t_final > 0.0) {
        return Err(Error::invalid("t_final", format!("{t_final} must be positive")));
    }
    if stride == 0 {
        return Err(Error::invalid("stride", "must be at least 1"));
    }
    let solver = MasterEquationSolver::new(l, dt)?;
    let n_steps = (t_final / dt).round() as u64;
    let mut steps: Vec<u64> = (0..=n_steps).step_by(stride).collect();
    if steps.last() != Some(&n_steps) {
        steps.push(n_steps);
    }
    let times: Vec<f64> = steps.iter().map(|&s| s as f64 * dt).collect();
    let snaps = solver.evolve_at(rho0, &times)?;
    Ok(times.into_iter().zip(snaps).collect())
}

/// Steady state together with the diagnostics of its computation.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// Max entry of `L rho`.
    pub residual: f64,
    /// Liouvillian eigenvalues sorted by modulus; the first is the zero mode.
    pub spectrum: Vec<C64>,
}

impl SteadyState {
    /// Slowest nonzero relaxation rate, `-Re lambda_1`.
    pub fn slowest_rate(&self) -> Option<f64> {
        self.spectrum.get(1).map(|z| -z.re)
    }
}

/// Unique zero mode of `l`, Hermitized and trace-normalized.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    solve_steady_state(l).map(|s| s.rho)
}

pub fn solve_steady_state(l: &Liouvillian) -> Result<SteadyState> {
    let spectrum = l.spectrum();
    let zeros = spectrum.iter().filter(|z| z.norm() < ZERO_EIGENVALUE_TOL).count();
    if zeros != 1 {
        return Err(Error::MultipleSteadyStates {
            count: zeros,
            tol: ZERO_EIGENVALUE_TOL,
        });
    }

    // The null vector is the right singular vector of the smallest singular value.
    let svd = SVD::new(l.matrix.clone(), false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let null: DVector<C64> = v_t.row(idx).adjoint();

    let mut m = hermitize(&unvectorize(&null, l.dim));
    let tr = m.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::DegenerateState("null vector is traceless".into()));
    }
    m /= tr;
    let rho = DensityMatrix::clamp_positive(m)?;
    let residual = l
        .apply(rho.matrix())?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if residual > STEADY_STATE_RESIDUAL_TOL {
        return Err(Error::DegenerateState(format!(
            "steady-state residual {residual:e} exceeds {STEADY_STATE_RESIDUAL_TOL:e}"
        )));
    }
    Ok(SteadyState {
        rho,
        residual,
        spectrum,
    })
}

/// Decomposition `rho ≈ p+ |C+_alpha><C+_alpha| + p- |C-_alpha><C-_alpha|`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TwoComponentFit {
    pub p_plus: f64,
    pub p_minus: f64,
    /// Principal square root of `Tr[rho a^2]`, serialized as `[re, im]`.
    #[serde(serialize_with = "crate::fock::serialize_complex")]
    pub alpha: C64,
    /// Uhlmann fidelity between `rho` and the reconstructed cat mixture.
    pub fidelity: f64,
    /// `<P>` of the eigenvectors assigned to `p_plus` and `p_minus`.
    pub parity_plus: f64,
    pub parity_minus: f64,
}

impl TwoComponentFit {
    /// `|Re alpha|`, the location of the two peaks of `<x>`.
    pub fn x0(&self) -> f64 {
        self.alpha.re.abs()
    }
}

pub fn fit_two_component(rho: &DensityMatrix) -> Result<TwoComponentFit> {
    let n_max = rho.n_max();
    let (vals, vecs) = rho.eigen();
    let d = vals.len();
    let parity = parity_op(n_max)?;
    let top: Vec<(f64, f64)> = [d - 1, d - 2]
        .iter()
        .map(|&k| {
            let v = StateVector::from_normalized(vecs.column(k).into_owned());
            (vals[k], v.expval(&parity).map(|z| z.re).unwrap_or(0.0))
        })
        .collect();
    for &(_, par) in &top {
        if par.abs() < PARITY_POLARIZATION_MIN {
            return Err(Error::FitNotApplicable(format!(
                "dominant eigenvector has <P> = {par:.4}, not parity-polarized"
            )));
        }
    }
    let (plus, minus) = match (top[0].1 > 0.0, top[1].1 > 0.0) {
        (true, false) => (top[0], top[1]),
        (false, true) => (top[1], top[0]),
        _ => {
            return Err(Error::FitNotApplicable(
                "both dominant eigenvectors lie in the same parity sector".into(),
            ))
        }
    };

    let a = annihilation(n_max)?;
    let alpha = rho.expval(&(&a * &a))?.sqrt();
    let fidelity = if alpha.norm() == 0.0 {
        0.0
    } else {
        let even = cat_state(alpha, Parity::Even, n_max)?;
        let odd = cat_state(alpha, Parity::Odd, n_max)?;
        let mut mix = even.projector().matrix() * C64::from(plus.0);
        mix += odd.projector().matrix() * C64::from(minus.0);
        let total = plus.0 + minus.0;
        let model = DensityMatrix::from_matrix_unchecked(mix / C64::from(total));
        rho.fidelity(&model)?
    };
    Ok(TwoComponentFit {
        p_plus: plus.0,
        p_minus: minus.0,
        alpha,
        fidelity,
        parity_plus: plus.1,
        parity_minus: minus.1,
    })
}

/// The superoperator `rho -> P rho P`.
pub fn parity_superoperator(n_max: usize) -> Result<DMatrix<C64>> {
    let p = parity_op(n_max)?;
    Ok(p.matrix().transpose().kronecker(p.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, max_abs_diff, number_op, StateVector};
    use crate::model::jump_operators;

    fn fock_projector(n: usize, n_max: usize) -> DensityMatrix {
        StateVector::fock(n, n_max).unwrap().projector()
    }

    #[test]
    fn empty_generator_is_zero() {
        let h = Operator::zeros(3).unwrap();
        let l = build_liouvillian(&h, &[]).unwrap();
        assert!(l.matrix().iter().all(|z| *z == ZERO));
    }

    #[test]
    fn single_photon_decay_of_fock_projectors() {
        let h = Operator::zeros(4).unwrap();
        let j1 = annihilation(4).unwrap();
        let l = build_liouvillian(&h, &[j1]).unwrap();
        let vac = l.apply(fock_projector(0, 4).matrix()).unwrap();
        assert!(vac.iter().all(|z| z.norm() < 1e-15));

        let out = l.apply(fock_projector(1, 4).matrix()).unwrap();
        let mut expected = DMatrix::zeros(5, 5);
        expected[(0, 0)] = ONE;
        expected[(1, 1)] = -ONE;
        assert!(max_abs_diff(&out, &expected) < 1e-14);
    }

    #[test]
    fn mismatched_jump_dimension_is_rejected() {
        let h = Operator::zeros(3).unwrap();
        let j = annihilation(4).unwrap();
        assert!(matches!(
            build_liouvillian(&h, &[j]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn trace_is_a_left_null_vector() {
        let l = Liouvillian::from_params(&ModelParams::two_photon_reference()).unwrap();
        let d = l.hilbert_dim();
        let mut tr_row = DVector::<C64>::zeros(d * d);
        for i in 0..d {
            tr_row[i * d + i] = ONE;
        }
        let left = l.matrix().transpose() * tr_row;
        assert!(left.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn liouvillian_commutes_with_parity_superoperator() {
        let params = ModelParams::two_photon_reference();
        let l = Liouvillian::from_params(&params).unwrap();
        let s = parity_superoperator(params.n_max).unwrap();
        let comm = l.matrix() * &s - &s * l.matrix();
        assert!(comm.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn decay_law_of_a_single_photon() {
        let gamma = 0.7;
        let params = ModelParams {
            U: 0.0,
            G: 0.0,
            F: 0.0,
            gamma,
            eta: 0.0,
            n_max: 4,
        };
        let l = Liouvillian::from_params(&params).unwrap();
        let n = number_op(4).unwrap();
        let series = evolve_me(&fock_projector(1, 4), &l, 5.0, 1e-3, 100).unwrap();
        for (t, rho) in &series {
            let mean = rho.expval(&n).unwrap().re;
            assert!((mean - (-gamma * t).exp()).abs() < 1e-6, "t = {t}");
            assert!((rho.trace().re - 1.0).abs() < 1e-8);
        }
        assert!((series.last().unwrap().0 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let params = ModelParams { n_max: 8, ..ModelParams::two_photon_reference() };
        let l = Liouvillian::from_params(&params).unwrap();
        let ss = steady_state(&l).unwrap();
        let series = evolve_me(&ss, &l, 1.0, 1e-3, 250).unwrap();
        for (_, rho) in series {
            assert!(max_abs_diff(rho.matrix(), ss.matrix()) < 1e-8);
        }
    }

    #[test]
    fn undriven_cavity_relaxes_to_vacuum() {
        let params = ModelParams {
            U: 1.0,
            G: 0.0,
            F: 0.0,
            gamma: 0.3,
            eta: 1.0,
            n_max: 6,
        };
        let rho = steady_state(&Liouvillian::from_params(&params).unwrap()).unwrap();
        assert!(max_abs_diff(rho.matrix(), fock_projector(0, 6).matrix()) < 1e-10);
    }

    #[test]
    fn zero_one_photon_loss_has_several_steady_states() {
        let params = ModelParams { gamma: 0.0, n_max: 8, ..ModelParams::two_photon_reference() };
        let err = steady_state(&Liouvillian::from_params(&params).unwrap()).unwrap_err();
        assert!(matches!(err, Error::MultipleSteadyStates { count, .. } if count > 1), "{err}");
    }

    #[test]
    fn fit_round_trips_a_synthetic_cat_mixture() {
        let alpha = C64::new(2.0, 0.0);
        let even = cat_state(alpha, Parity::Even, 30).unwrap();
        let odd = cat_state(alpha, Parity::Odd, 30).unwrap();
        let rho = DensityMatrix::mixture(&[(0.5, &even), (0.5, &odd)]).unwrap();
        let fit = fit_two_component(&rho).unwrap();
        assert!((fit.p_plus - 0.5).abs() < 1e-8);
        assert!((fit.p_minus - 0.5).abs() < 1e-8);
        assert!((fit.alpha - alpha).norm() < 1e-8, "{fit:?}");
        assert!((fit.fidelity - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fit_rejects_unpolarized_states() {
        let c = coherent_state(C64::new(1.0, 0.2), 12).unwrap();
        let v = StateVector::vacuum(12).unwrap();
        let rho = DensityMatrix::mixture(&[(0.6, &c), (0.4, &v)]).unwrap();
        assert!(matches!(fit_two_component(&rho), Err(Error::FitNotApplicable(_))));
    }

    #[test]
    fn solver_rejects_unstable_steps() {
        let l = Liouvillian::from_params(&ModelParams::two_photon_reference()).unwrap();
        assert!(matches!(
            MasterEquationSolver::new(&l, 0.1),
            Err(Error::IntegrationFailure { .. })
        ));
        let jumps = jump_operators(&ModelParams::two_photon_reference()).unwrap();
        assert_eq!(jumps.len(), 2);
    }
}
