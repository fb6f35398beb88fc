//! Property tests for grid operations, multipliers and the linearized
//! operator.

mod common;

use nlslab::commutator::{u_apply, Direction};
use nlslab::grid::{fft_in_place, galilean_multiplier, ifft_in_place, inner, spectral_derivative};
use nlslab::{make_grid, ComplexField, SpinorField};
use num_complex::Complex64;
use proptest::prelude::*;

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-4.0..4.0f64, 0.5..2.0f64, -3.0..3.0f64, -1.0..1.0f64), 1..4)
}

fn field(n: usize, terms: &[(f64, f64, f64, f64)]) -> ComplexField {
    let g = make_grid(20.0, n).unwrap();
    ComplexField::from_fn(g, |x| {
        terms
            .iter()
            .map(|&(c, w, k, a)| Complex64::new(a, 0.5) * (-((x - c) / w).powi(2)).exp() * Complex64::from_polar(1.0, k * x))
            .sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval(terms in coeffs()) {
        let f = field(256, &terms);
        let mut hat = f.values.clone();
        fft_in_place(&mut hat);
        let n = f.grid.n() as f64;
        let h = f.grid.spacing();
        let spectral = (h / n * hat.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        prop_assert!((spectral - f.l2()).abs() <= 1e-12 * f.l2().max(1e-300));
        ifft_in_place(&mut hat);
        let back = hat.iter().zip(&f.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(back <= 1e-13 * f.linf().max(1e-300));
    }

    #[test]
    fn derivative_is_antisymmetric_and_consistent(terms in coeffs(), other in coeffs()) {
        // fine enough that the Nyquist mode carries no energy
        let f = field(512, &terms);
        let g = field(512, &other);
        let df = spectral_derivative(&f, 1).unwrap();
        let dg = spectral_derivative(&g, 1).unwrap();
        let h = f.grid.spacing();
        let lhs = inner(&df.values, &g.values, h);
        let rhs = -inner(&f.values, &dg.values, h);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
        let d2 = spectral_derivative(&f, 2).unwrap();
        let dd = spectral_derivative(&df, 1).unwrap();
        let gap = d2.sub(&dd).l2();
        prop_assert!(gap <= 1e-10 * (1.0 + d2.l2()));
    }

    #[test]
    fn galilean_multiplier_is_unimodular(t in 0.05..500.0f64) {
        let g = make_grid(20.0, 128).unwrap();
        let m = galilean_multiplier(t, &g).unwrap();
        prop_assert!(m.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        prop_assert!(m[g.origin()] == Complex64::new(1.0, 0.0));
    }

    #[test]
    fn u_is_unitary(terms in coeffs(), t in 20.0..400.0f64) {
        let f = field(128, &terms);
        let x = SpinorField::new(f.grid, f.values.clone(), f.conj().values).unwrap();
        let y = u_apply(t, &x, Direction::Forward, 20.0).unwrap();
        prop_assert!((y.l2() - x.l2()).abs() <= 1e-13 * x.l2());
        let z = u_apply(t, &y, Direction::Backward, 20.0).unwrap();
        prop_assert!(z.sub(&x).l2() <= 1e-13 * x.l2());
    }

    #[test]
    fn theta3_is_an_involution_and_isometry(terms in coeffs()) {
        let f = field(128, &terms);
        let x = SpinorField::new(f.grid, f.values.clone(), f.values.iter().map(|z| z * 0.5).collect()).unwrap();
        let t = x.theta3();
        prop_assert!((t.l2() - x.l2()).abs() <= 1e-14 * x.l2());
        prop_assert!(t.theta3().sub(&x).l2() == 0.0);
        prop_assert!(t.upper == x.upper);
    }

    #[test]
    fn operator_is_linear(a in coeffs(), b in coeffs(), re in -2.0..2.0f64, im in -2.0..2.0f64) {
        let h = common::cubic_operator(25.0, 256);
        let fa = field(256, &a);
        let fb = field(256, &b);
        let g = h.grid;
        let x = SpinorField::new(g, fa.values.clone(), fb.values.clone()).unwrap();
        let y = SpinorField::new(g, fb.values.clone(), fa.conj().values).unwrap();
        let c = Complex64::new(re, im);
        let lhs = h.apply(&x.axpy(c, &y));
        let rhs = h.apply(&x).axpy(c, &h.apply(&y));
        prop_assert!(lhs.sub(&rhs).l2() <= 1e-11 * (1.0 + lhs.l2()));
    }

    #[test]
    fn conjugation_symmetry_of_h(terms in coeffs()) {
        // H anticommutes with the swap-and-conjugate map on spinors.
        let h = common::cubic_operator(25.0, 256);
        let f = field(256, &terms);
        let x = SpinorField::new(h.grid, f.values.clone(), f.values.iter().map(|z| z * Complex64::new(0.2, -0.4)).collect()).unwrap();
        let swap = |s: &SpinorField| {
            SpinorField::new(s.grid, s.lower.iter().map(|z| z.conj()).collect(), s.upper.iter().map(|z| z.conj()).collect()).unwrap()
        };
        let lhs = h.apply(&swap(&x));
        let rhs = swap(&h.apply(&x)).scale(Complex64::new(-1.0, 0.0));
        prop_assert!(lhs.sub(&rhs).l2() <= 1e-11 * (1.0 + lhs.l2()));
    }
}
