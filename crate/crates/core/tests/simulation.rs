mod common;

use nlslab::simulate::{
    calibrate_dt, conservation_run, decay_fit, growth_exponent, run_dispersive, run_stability_experiment,
    wellposedness_growth_check, Perturbation, PerturbationShape, SimulationConfig,
};
use nlslab::{closed_form_profile, make_grid, ComplexField, Error};
use num_complex::Complex64;

use common::cubic;

#[test]
fn soliton_is_stationary_and_mass_is_conserved() {
    let g = make_grid(30.0, 512).unwrap();
    let p = closed_form_profile(3.0, 2.0, &g).unwrap();
    let (dt, err) = calibrate_dt(&p, &cubic(), 1e-8, 0.05).unwrap();
    assert!(err < 1e-8);
    let r = conservation_run(&p, &cubic(), dt, 1000).unwrap();
    assert!(r.profile_error < 1e-8, "{r:?}");
    assert!(r.mass_drift_per_unit_time < 1e-12, "{r:?}");
}

fn short_config(amplitude: f64) -> SimulationConfig {
    SimulationConfig {
        grid: make_grid(30.0, 512).unwrap(),
        h: 2.0,
        t_end: 22.0,
        dt: Some(1e-3),
        sample_interval: 0.5,
        perturbation: Perturbation { shape: PerturbationShape::GaussianBump { width: 1.0 }, amplitude, seed: 1 },
        ..SimulationConfig::default()
    }
}

#[test]
fn unperturbed_run_has_no_radiation() {
    let r = run_stability_experiment(&SimulationConfig { dt: None, absorber: None, ..short_config(0.0) }, None).unwrap();
    let worst = r.chi.iter().map(|c| c.linf).fold(0.0, f64::max);
    assert!(worst < 1e-7, "{worst}");
    assert!(r.trajectory.iter().all(|s| (s.omega + 1.0).abs() < 1e-7));
    assert!(!r.outside_perturbative_regime);
}

#[test]
fn large_perturbation_is_flagged() {
    match run_stability_experiment(&SimulationConfig { t_end: 4.0, ..short_config(0.5) }, None) {
        Ok(r) => assert!(r.outside_perturbative_regime),
        Err(e) => assert!(matches!(e, Error::RunFailed { .. } | Error::BlowUp { .. }), "{e}"),
    }
}

#[test]
fn weighted_growth_oracles() {
    let g = make_grid(30.0, 512).unwrap();
    let p = closed_form_profile(3.0, 2.0, &g).unwrap();
    let u0 = ComplexField::from_real(g, &p.phi);
    let still = run_dispersive(&u0, &cubic(), 5e-3, 20.0, 0.5).unwrap();
    let q = growth_exponent(&still.growth.iter().map(|s| (s.t, s.x_u)).collect::<Vec<_>>(), (1.0, 20.0)).unwrap();
    assert!(q.abs() < 0.01, "{q}");

    let g = make_grid(1500.0, 8192).unwrap();
    let u0 = ComplexField::from_fn(g, |x| Complex64::new(0.05 * (-x * x).exp(), 0.0));
    let run = run_dispersive(&u0, &cubic(), 0.01, 100.0, 0.5).unwrap();
    let rep = wellposedness_growth_check(&run.growth, (1.0, 100.0)).unwrap();
    assert!((0.9..=1.1).contains(&rep.q_x_u), "{rep:?}");
    assert!(rep.pass);
    assert!(matches!(
        wellposedness_growth_check(&run.growth[..3], (1.0, 100.0)),
        Err(Error::InsufficientHorizon(_))
    ));
}

#[test]
fn decay_fit_tolerates_oscillation() {
    let wiggly: Vec<(f64, f64)> = (10..2000).map(|k| {
        let t = 0.1 * k as f64;
        (t, t.powf(-0.75) * (1.0 + t.sin() / t))
    }).collect();
    let f = decay_fit(&wiggly, (1.0, 200.0)).unwrap();
    assert!((f.exponent + 0.75).abs() < 0.05, "{f:?}");
    let flat: Vec<(f64, f64)> = (1..100).map(|k| (k as f64, 3.0)).collect();
    assert!(decay_fit(&flat, (1.0, 100.0)).unwrap().exponent.abs() < 1e-12);
}
