mod common;

use nlslab::modulation::{
    d4_integral_form, direct_forcing, evaluate_d_terms, g_field, leading_jacobian, lemma_rate_bound, limit_parameters,
    orthogonality_jacobian, radiation, solve_orthogonality, ModulationState, NewtonOptions, ReferenceState,
};
use nlslab::profile::ProfileFamily;
use nlslab::{make_grid, ComplexField};
use num_complex::Complex64;

use common::cubic;

fn family() -> ProfileFamily {
    ProfileFamily::new(&cubic(), make_grid(30.0, 512).unwrap())
}

/// `e^{−iβ}(φ(α) + f)` with a small even, complex `f` of sup norm `amp`.
fn manufactured(fam: &ProfileFamily, alpha: f64, beta: f64, amp: f64) -> ComplexField {
    let phi = fam.values(alpha).unwrap();
    let rot = Complex64::from_polar(1.0, -beta);
    let vals = fam
        .grid
        .xs()
        .iter()
        .zip(&phi)
        .map(|(&x, &p)| rot * (p + amp * Complex64::new(1.0, 0.4) * (-(x * x) / 3.0).exp() * (0.8 * x).cos()))
        .collect();
    ComplexField { grid: fam.grid, values: vals }
}

fn max_rel(a: &ComplexField, b: &ComplexField) -> f64 {
    a.sub(b).l2() / b.l2().max(1e-300)
}

#[test]
fn newton_converges_fast_on_manufactured_data() {
    let fam = family();
    let u = manufactured(&fam, 2.0, 0.3, 1e-3);
    let guess = ModulationState::soliton(20.0, 2.0, 0.3);
    let st = solve_orthogonality(&fam, &u, 20.0, &guess, &NewtonOptions::default()).unwrap();
    assert!(st.newton_iters <= 5, "{st:?}");
    assert!(st.ortho_residuals.0.abs() < 1e-10 && st.ortho_residuals.1.abs() < 1e-10, "{st:?}");
    assert!((st.alpha - 2.0).abs() < 1e-2);
}

#[test]
fn jacobian_approaches_leading_part() {
    let fam = family();
    let lead = leading_jacobian(2.0, 2.0);
    let mut ratios = Vec::new();
    for &t in &[20.0, 200.0, 2000.0] {
        for &amp in &[1e-2, 1e-3, 0.0] {
            let u = manufactured(&fam, 2.0, 0.0, amp);
            let st = ModulationState::soliton(t, 2.0, 0.0);
            let j = orthogonality_jacobian(&fam, &st, &u, t).unwrap();
            let diff = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| (j[a][b] - lead[a][b]).powi(2)).sum::<f64>().sqrt();
            let f = radiation(&fam, &u, &st).unwrap();
            ratios.push(diff / (f.l2() + 1.0 / t));
        }
    }
    let c = ratios[0].max(ratios[1]).max(ratios[2]);
    assert!(ratios.iter().all(|r| *r <= 2.0 * c), "{ratios:?}");
}

#[test]
fn coincident_parameters_leave_only_d4() {
    let fam = family();
    let u = manufactured(&fam, 2.0, 0.4, 1e-2);
    let now = ModulationState { t: 25.0, beta: 0.4, ..ModulationState::soliton(25.0, 2.0, 0.4) };
    let reference = ReferenceState::from_state(&now);
    let g = g_field(&fam, &u, &now, &reference).unwrap();
    let d = evaluate_d_terms(&fam, &g, &now, (0.0, 0.0), &reference).unwrap();
    for term in [&d.d0, &d.d1, &d.d2, &d.d3] {
        assert!(term.linf() == 0.0, "{}", term.linf());
    }
    assert!(d.d4.linf() > 0.0);
    let zero = ComplexField::zeros(fam.grid);
    let dz = evaluate_d_terms(&fam, &zero, &now, (0.0, 0.0), &reference).unwrap();
    assert_eq!(dz.d4.linf(), 0.0);
}

#[test]
fn d4_two_formulas_agree() {
    let fam = family();
    let u = manufactured(&fam, 2.05, 1.1, 3e-2);
    let now = ModulationState::soliton(30.0, 2.05, 1.1);
    let reference = ReferenceState { t1: 20.0, alpha1: 2.0, beta1: 0.2 };
    let g = g_field(&fam, &u, &now, &reference).unwrap();
    let d = evaluate_d_terms(&fam, &g, &now, (1e-4, -2e-4), &reference).unwrap();
    let integral = d4_integral_form(&fam, &g, &now, &reference).unwrap();
    assert!(max_rel(&integral, &d.d4) < 1e-9, "{}", max_rel(&integral, &d.d4));
}

#[test]
fn d_terms_reconstruct_the_forcing() {
    let fam = family();
    let u = manufactured(&fam, 1.97, -0.6, 2e-2);
    let now = ModulationState::soliton(40.0, 1.97, -0.6);
    let reference = ReferenceState { t1: 20.0, alpha1: 2.0, beta1: 0.1 };
    let rates = (3e-4, -1e-4);
    let g = g_field(&fam, &u, &now, &reference).unwrap();
    let total = evaluate_d_terms(&fam, &g, &now, rates, &reference).unwrap().total();
    let direct = direct_forcing(&fam, &u, &now, rates, &reference).unwrap();
    assert!(max_rel(&total, &direct) < 1e-9, "{}", max_rel(&total, &direct));
}

#[test]
fn rate_bound_terms() {
    let fam = family();
    let zero = ComplexField::zeros(fam.grid);
    assert_eq!(lemma_rate_bound(&zero, 100.0, &cubic()), 0.0);
    let f = ComplexField::from_fn(fam.grid, |x| Complex64::new(1e-2 * (-x * x).exp(), 0.0));
    let b = lemma_rate_bound(&f, 100.0, &cubic());
    assert!(b >= 1e-4 && b < 1e-3, "{b}");
}

#[test]
fn synthetic_limits_are_recovered() {
    let (w_inf, h) = (-1.0, 20.0);
    let series: Vec<ModulationState> = (0..=760)
        .map(|k| {
            let t = h + 0.5 * k as f64;
            let omega = w_inf + t.powf(-1.5);
            ModulationState { t, beta: 0.0, omega, gamma: 0.0, alpha: 2.0 * (-omega).sqrt(), ortho_residuals: (0.0, 0.0), newton_iters: 0 }
        })
        .collect();
    let lp = limit_parameters(&series).unwrap();
    assert!((lp.omega_plus - w_inf).abs() < 1e-6, "{lp:?}");
    // ω(h)·h on [0, h] plus ∫_h^∞ t^{-3/2}
    let exact = 3.0 / h.sqrt();
    assert!((lp.gamma_plus - exact).abs() <= lp.gamma_uncertainty, "{lp:?} exact {exact}");
    assert!(limit_parameters(&series[..2]).is_err());
}
