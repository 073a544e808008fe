//! Steady-state and master-equation values checked against numbers computed
//! independently (dense linear solve with the trace constraint, and
//! `scipy.linalg.expm` of the Liouvillian) and frozen here.

use kerrtraj::fock::{annihilation, number_op, parity_op, Expectation};
use kerrtraj::master_eq::{evolve_me, fit_two_component, solve_steady_state, Liouvillian, MasterEquationSolver};
use kerrtraj::{DensityMatrix, Error, ModelParams, StateVector, C64};

const TWO_PHOTON_P_PLUS: f64 = 0.5009656980574615;
const TWO_PHOTON_P_MINUS: f64 = 0.4989763842567514;
const TWO_PHOTON_A2: (f64, f64) = (-2.4642649182583494, -2.4993457016356224);
const TWO_PHOTON_ALPHA: (f64, f64) = (0.7230579050164181, -1.728316421337563);
const TWO_PHOTON_N: f64 = 3.508075548152261;
// Against the cat mixture renormalized to unit trace.
const TWO_PHOTON_FIDELITY: f64 = 0.9999365275612193;

const ONE_PHOTON_A: (f64, f64) = (-1.0569098321794392, -1.0816838323212963);
const ONE_PHOTON_N: f64 = 2.4774000140147105;
const ONE_PHOTON_TOP: [f64; 3] = [0.913640821150824, 0.080992907116256, 0.00517762877426];

/// `(t, <n>, <P>)` from the vacuum under the two-photon reference model.
const EVOLUTION: [(f64, f64, f64); 5] = [
    (0.5, 2.892780255731242, 0.8805408954869377),
    (1.0, 3.468422654740802, 0.6354103417297359),
    (2.0, 3.505319581369952, 0.3172991052770253),
    (5.0, 3.5078017493049134, 0.04044663596752368),
    (10.0, 3.5080673466877026, 0.003172890284478036),
];

fn c(z: (f64, f64)) -> C64 {
    C64::new(z.0, z.1)
}

#[test]
fn two_photon_steady_state_matches_frozen_solution() {
    let params = ModelParams::two_photon_reference();
    let ss = solve_steady_state(&Liouvillian::from_params(&params).unwrap()).unwrap();
    assert!(ss.residual < 1e-10);
    let rho = &ss.rho;
    let a = annihilation(15).unwrap();
    assert!(rho.expval(&a).unwrap().norm() < 1e-10);
    assert!((rho.expval(&(&a * &a)).unwrap() - c(TWO_PHOTON_A2)).norm() < 1e-8);
    assert!((rho.expval(&number_op(15).unwrap()).unwrap().re - TWO_PHOTON_N).abs() < 1e-8);

    let fit = fit_two_component(rho).unwrap();
    assert!((fit.p_plus - TWO_PHOTON_P_PLUS).abs() < 1e-8);
    assert!((fit.p_minus - TWO_PHOTON_P_MINUS).abs() < 1e-8);
    assert!((fit.alpha - c(TWO_PHOTON_ALPHA)).norm() < 1e-8);
    assert!((fit.fidelity - TWO_PHOTON_FIDELITY).abs() < 1e-6, "{}", fit.fidelity);
    assert!(fit.parity_plus > 0.99 && fit.parity_minus < -0.99);
}

#[test]
fn slow_mode_of_the_two_photon_model() {
    let params = ModelParams::two_photon_reference();
    let ss = solve_steady_state(&Liouvillian::from_params(&params).unwrap()).unwrap();
    let rate = ss.slowest_rate().unwrap();
    assert!((rate - 1.44044e-4).abs() < 1e-8, "{rate}");
    assert!((-ss.spectrum[2].re - 0.7016).abs() < 1e-3);
}

#[test]
fn one_photon_steady_state_matches_frozen_solution() {
    let params = ModelParams::one_photon_reference();
    let ss = solve_steady_state(&Liouvillian::from_params(&params).unwrap()).unwrap();
    let rho = &ss.rho;
    assert!((rho.expval(&annihilation(15).unwrap()).unwrap() - c(ONE_PHOTON_A)).norm() < 1e-8);
    assert!((rho.expval(&number_op(15).unwrap()).unwrap().re - ONE_PHOTON_N).abs() < 1e-8);
    let (vals, _) = rho.eigen();
    for (k, expected) in ONE_PHOTON_TOP.iter().enumerate() {
        assert!((vals[vals.len() - 1 - k] - expected).abs() < 1e-8);
    }
    assert!(matches!(fit_two_component(rho), Err(Error::FitNotApplicable(_))));
}

#[test]
fn master_equation_from_vacuum_matches_frozen_propagation() {
    let params = ModelParams::two_photon_reference();
    let l = Liouvillian::from_params(&params).unwrap();
    let solver = MasterEquationSolver::new(&l, 1e-3).unwrap();
    let rho0 = StateVector::vacuum(15).unwrap().projector();
    let times: Vec<f64> = EVOLUTION.iter().map(|e| e.0).collect();
    let snaps = solver.evolve_at(&rho0, &times).unwrap();
    let (num, par) = (number_op(15).unwrap(), parity_op(15).unwrap());
    for (rho, &(t, n, p)) in snaps.iter().zip(&EVOLUTION) {
        let n_rk4 = rho.expval(&num).unwrap().re;
        let p_rk4 = rho.expval(&par).unwrap().re;
        assert!((n_rk4 - n).abs() < 1e-7, "t = {t}: {n_rk4} vs {n}");
        assert!((p_rk4 - p).abs() < 1e-7, "t = {t}: {p_rk4} vs {p}");
        assert!((rho.trace().re - 1.0).abs() < 1e-8 * t.max(1.0));
    }
}

#[test]
fn evolve_me_samples_the_requested_stride() {
    let params = ModelParams { n_max: 6, ..ModelParams::two_photon_reference() };
    let l = Liouvillian::from_params(&params).unwrap();
    let rho0 = StateVector::vacuum(6).unwrap().projector();
    let out = evolve_me(&rho0, &l, 1.05, 1e-3, 100).unwrap();
    let times: Vec<f64> = out.iter().map(|(t, _)| *t).collect();
    assert_eq!(times.len(), 12);
    assert!((times[10] - 1.0).abs() < 1e-12);
    assert!((times[11] - 1.05).abs() < 1e-12);
    assert!(out.iter().all(|(_, r)| r.min_eigenvalue() >= 0.0));
}

#[test]
fn relaxation_reaches_the_steady_state() {
    let params = ModelParams { n_max: 10, gamma: 0.5, ..ModelParams::two_photon_reference() };
    let l = Liouvillian::from_params(&params).unwrap();
    let ss = solve_steady_state(&l).unwrap();
    let rho0: DensityMatrix = StateVector::vacuum(10).unwrap().projector();
    let out = evolve_me(&rho0, &l, 40.0, 1e-3, 40_000).unwrap();
    let late = &out.last().unwrap().1;
    assert!(late.fidelity(&ss.rho).unwrap() > 1.0 - 1e-6);
}
