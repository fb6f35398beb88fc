mod common;

use nlslab::funcalc::{
    branch_pow, build_contour, compare_to_free, continuous_projector, fractional_power_apply, resolvent_apply,
    ContourOptions,
};
use nlslab::linop::{discrete_spectrum, LinearizedOperator};
use nlslab::{make_grid, Error, SpinorField};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{cubic_operator, random_smooth_spinor};

#[test]
fn free_plane_wave_power() {
    let g = make_grid(20.0, 128).unwrap();
    let h0 = LinearizedOperator::free(2.0, g);
    let k = g.wavenumbers()[5];
    let wave: Vec<Complex64> = g.xs().iter().map(|x| Complex64::from_polar(1.0, k * x)).collect();
    let x = SpinorField::new(g, wave.clone(), wave.clone()).unwrap();
    let s = 1.5;
    let gam = build_contour(&h0, Some(s), 1e-12, None, ContourOptions::default()).unwrap();
    let y = fractional_power_apply(&h0, s, &x, &gam).unwrap();
    let up = branch_pow(Complex64::new(h0.tau + k * k, 0.0), 0.75);
    let lo = branch_pow(Complex64::new(-h0.tau - k * k, 0.0), 0.75);
    let err = (0..g.n())
        .map(|j| (y.upper[j] - up * wave[j]).norm().max((y.lower[j] - lo * wave[j]).norm()))
        .fold(0.0, f64::max);
    assert!(err < 1e-6 * up.norm(), "{err}");
}

#[test]
fn contour_metadata_and_s_range() {
    let h = cubic_operator(25.0, 256);
    let spectrum = discrete_spectrum(&h).unwrap();
    let gam = build_contour(&h, Some(1.75), 1e-8, Some(&spectrum), ContourOptions::default()).unwrap();
    assert!(gam.a > 0.0 && gam.a < gam.tau);
    assert!(gam.truncation_radius.is_some());
    assert!(matches!(
        build_contour(&h, Some(2.5), 1e-8, Some(&spectrum), ContourOptions::default()),
        Err(Error::SOutOfRange(_))
    ));
}

#[test]
fn resolvent_at_zero_is_on_spectrum() {
    let h = cubic_operator(25.0, 256);
    let x = h.xi2().unwrap();
    assert!(matches!(resolvent_apply(&h, Complex64::new(0.0, 0.0), &x), Err(Error::LambdaOnSpectrum(_))));
}

#[test]
fn kernel_is_annihilated_and_projector_is_orthogonal() {
    let h = cubic_operator(25.0, 256);
    let spectrum = discrete_spectrum(&h).unwrap();
    let s = 1.751;
    let gs = build_contour(&h, Some(s), 1e-12, Some(&spectrum), ContourOptions::default()).unwrap();
    let gam = build_contour(&h, None, 1e-12, Some(&spectrum), ContourOptions::default()).unwrap();
    let xi = [h.xi1().unwrap(), h.xi2().unwrap()];
    for x in &xi {
        let y = fractional_power_apply(&h, s, x, &gs).unwrap();
        assert!(y.l2() < 1e-6 * x.l2(), "{}", y.l2());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = random_smooth_spinor(h.grid, &mut rng);
    let pv = continuous_projector(&h, &gam).apply(&v).unwrap();
    for w in &xi {
        let pairing = pv.inner(&w.theta3());
        assert!(pairing.norm() < 1e-8, "{pairing}");
    }
}

#[test]
fn difference_from_free_power_stays_bounded() {
    let h = cubic_operator(25.0, 256);
    let spectrum = discrete_spectrum(&h).unwrap();
    let s = 1.751;
    let gs = build_contour(&h, Some(s), 1e-12, Some(&spectrum), ContourOptions::default()).unwrap();
    let g = h.grid;
    let mut ratios = Vec::new();
    for k in 1..=32 {
        let kk = 0.35 * k as f64;
        let up: Vec<Complex64> = g.xs().iter().map(|x| (-x * x).exp() * Complex64::from_polar(1.0, kk * x)).collect();
        let x = SpinorField::new(g, up.clone(), up).unwrap();
        ratios.push(compare_to_free(&h, s, &x, &gs).unwrap().over_l2);
    }
    let first = ratios[..4].iter().cloned().fold(0.0, f64::max);
    let last = ratios[28..].iter().cloned().fold(0.0, f64::max);
    assert!(ratios.iter().all(|r| r.is_finite()));
    assert!(last <= 2.0 * first.max(1e-3), "{ratios:?}");
    let zero = SpinorField::zeros(g);
    assert_eq!(compare_to_free(&h, s, &zero, &gs).unwrap().over_l2, 0.0);
}
