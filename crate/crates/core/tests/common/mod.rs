#![allow(dead_code)]

use nlslab::linop::{assemble_h, LinearizedOperator};
use nlslab::{closed_form_profile, make_grid, GridSpec, NonlinearitySpec, SpinorField};
use num_complex::Complex64;
use rand::Rng;

pub fn cubic() -> NonlinearitySpec {
    NonlinearitySpec::pure_power(3.0).unwrap()
}

/// Linearized operator of the cubic soliton with `α = 2`.
pub fn cubic_operator(l: f64, n: usize) -> LinearizedOperator {
    let g = make_grid(l, n).unwrap();
    let p = closed_form_profile(3.0, 2.0, &g).unwrap();
    assemble_h(&p, &cubic())
}

fn smooth_component(g: &GridSpec, rng: &mut impl Rng) -> Vec<Complex64> {
    let terms: Vec<(f64, f64, f64, Complex64)> = (0..3)
        .map(|_| {
            let c = rng.gen_range(-3.0..3.0);
            let w = rng.gen_range(0.7..2.0);
            let k = rng.gen_range(-2.0..2.0);
            let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (c, w, k, a)
        })
        .collect();
    g.xs()
        .iter()
        .map(|&x| {
            terms
                .iter()
                .map(|&(c, w, k, a)| a * (-((x - c) / w).powi(2)).exp() * Complex64::from_polar(1.0, k * x))
                .sum()
        })
        .collect()
}

/// Sum of three random modulated Gaussians in each component.
pub fn random_smooth_spinor(g: GridSpec, rng: &mut impl Rng) -> SpinorField {
    let up = smooth_component(&g, rng);
    let lo = smooth_component(&g, rng);
    SpinorField::new(g, up, lo).unwrap()
}
