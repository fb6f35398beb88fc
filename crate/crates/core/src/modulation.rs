//! Modulation decomposition `u = e^{−iβ}(φ(·;α) + f)`.
//!
//! `α` and `β` are fixed by the two orthogonality conditions
//! `r₁ = Re∫ f M(−t) φ = 0` and `r₂ = Im∫ f M(−t) v₂ = 0`,
//! `v₂ = −(2/α) φ_α`, `M(t) = e^{ix²/4t}`. With `ω = −α²/4` the phase is
//! `β(t) = ∫₀ᵗ ω + γ(t)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::commutator::m_factor;
use crate::error::{Error, Result};
use crate::funcalc::gauss_legendre;
use crate::grid::{derivative_in_place, lp_norm, ComplexField, GridSpec};
use crate::nonlinearity::NonlinearitySpec;
use crate::profile::{ProfileFamily, ProfileJet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub t: f64,
    pub beta: f64,
    pub omega: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub ortho_residuals: (f64, f64),
    pub newton_iters: usize,
}

impl ModulationState {
    /// State of the exact soliton `e^{−iβ}φ(·;α)` at time `t`, with
    /// `ω = −α²/4` on `[0, t]`.
    pub fn soliton(t: f64, alpha: f64, beta: f64) -> Self {
        let omega = -alpha * alpha / 4.0;
        Self { t, beta, omega, gamma: beta - omega * t, alpha, ortho_residuals: (0.0, 0.0), newton_iters: 0 }
    }

    pub fn tau(&self) -> f64 {
        self.alpha * self.alpha / 4.0
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Absolute residual target relative to `‖u‖₂`.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Relative half-width of the α scan used when Newton fails.
    pub scan_width: f64,
    pub scan_points: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iters: 30, scan_width: 0.5, scan_points: 12 }
    }
}

/// Sum of `a·b` times the grid spacing.
fn integrate(a: &[Complex64], b: &[Complex64], h: f64) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<Complex64>() * h
}

struct Workspace {
    mbar: Vec<Complex64>,
    h: f64,
}

impl Workspace {
    fn new(grid: &GridSpec, t: f64) -> Self {
        Self { mbar: grid.xs().iter().map(|&x| m_factor(-t, x)).collect(), h: grid.spacing() }
    }

    /// `(r₁, r₂)` and the Jacobian in `(α, β)` order.
    fn evaluate(&self, u: &[Complex64], beta: f64, jet: &ProfileJet, with_jacobian: bool) -> ((f64, f64), [[f64; 2]; 2]) {
        let a = jet.alpha;
        let rot = Complex64::from_polar(1.0, beta);
        let w: Vec<Complex64> = u.iter().map(|z| rot * z).collect();
        let f: Vec<Complex64> = w.iter().zip(&jet.phi).map(|(z, p)| z - p).collect();
        let fm: Vec<Complex64> = f.iter().zip(&self.mbar).map(|(z, m)| z * m).collect();
        let phi: Vec<Complex64> = jet.phi.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        let v2: Vec<Complex64> = jet.phi_alpha.iter().map(|&p| Complex64::new(-2.0 / a * p, 0.0)).collect();
        let r1 = integrate(&fm, &phi, self.h).re;
        let r2 = integrate(&fm, &v2, self.h).im;
        if !with_jacobian {
            return ((r1, r2), [[0.0; 2]; 2]);
        }
        let wm: Vec<Complex64> = w.iter().zip(&self.mbar).map(|(z, m)| z * m).collect();
        let pa: Vec<Complex64> = jet.phi_alpha.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        let pam: Vec<Complex64> = pa.iter().zip(&self.mbar).map(|(z, m)| z * m).collect();
        let dv2: Vec<Complex64> = jet
            .phi_alpha
            .iter()
            .zip(&jet.phi_alpha2)
            .map(|(&p1, &p2)| Complex64::new(2.0 / (a * a) * p1 - 2.0 / a * p2, 0.0))
            .collect();
        let i = Complex64::new(0.0, 1.0);
        let j11 = (-integrate(&pam, &phi, self.h) + integrate(&fm, &pa, self.h)).re;
        let j12 = (i * integrate(&wm, &phi, self.h)).re;
        let j21 = (-integrate(&pam, &v2, self.h) + integrate(&fm, &dv2, self.h)).im;
        let j22 = (i * integrate(&wm, &v2, self.h)).im;
        ((r1, r2), [[j11, j12], [j21, j22]])
    }
}

/// Leading part `diag(−m'/2, −m'/α)` of the Jacobian, `m = ‖φ‖₂²`.
pub fn leading_jacobian(mass_dalpha: f64, alpha: f64) -> [[f64; 2]; 2] {
    [[-0.5 * mass_dalpha, 0.0], [0.0, -mass_dalpha / alpha]]
}

/// Full Jacobian of `(r₁, r₂)` with respect to `(α, β)` at `state`.
pub fn orthogonality_jacobian(
    family: &ProfileFamily,
    state: &ModulationState,
    u: &ComplexField,
    t: f64,
) -> Result<[[f64; 2]; 2]> {
    let jet = family.jet(state.alpha)?;
    let ws = Workspace::new(&family.grid, t);
    Ok(ws.evaluate(&u.values, state.beta, &jet, true).1)
}

/// Orthogonality residuals `(r₁, r₂)` of `u` at `(α, β)`.
pub fn orthogonality_residuals(family: &ProfileFamily, u: &ComplexField, t: f64, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let jet = family.jet(alpha)?;
    let ws = Workspace::new(&family.grid, t);
    Ok(ws.evaluate(&u.values, beta, &jet, false).0)
}

fn mass_dalpha(jet: &ProfileJet, h: f64) -> f64 {
    2.0 * jet.phi.iter().zip(&jet.phi_alpha).map(|(a, b)| a * b).sum::<f64>() * h
}

fn newton(
    family: &ProfileFamily,
    ws: &Workspace,
    u: &[Complex64],
    start: (f64, f64),
    tol: f64,
    max_iters: usize,
) -> Result<(f64, f64, (f64, f64), usize)> {
    let (mut alpha, mut beta) = start;
    let mut jet = family.jet(alpha)?;
    let md = mass_dalpha(&jet, ws.h);
    if md.abs() < 1e-8 {
        return Err(Error::JacobianSingular(md));
    }
    let mut last = f64::INFINITY;
    for it in 0..=max_iters {
        let (r, j) = ws.evaluate(u, beta, &jet, true);
        let rn = r.0.abs().max(r.1.abs());
        last = rn;
        if rn < tol {
            return Ok((alpha, beta, r, it));
        }
        if it == max_iters {
            break;
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 * (j[0][0].abs() + j[1][1].abs()).powi(2).max(1e-300) {
            return Err(Error::JacobianSingular(det));
        }
        let da = -(j[1][1] * r.0 - j[0][1] * r.1) / det;
        let db = -(-j[1][0] * r.0 + j[0][0] * r.1) / det;
        // Damped step on the max-norm of the residual.
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let na = alpha + lam * da;
            if na > 0.0 {
                if let Ok(nj) = family.jet(na) {
                    let (nr, _) = ws.evaluate(u, beta + lam * db, &nj, false);
                    let nn = nr.0.abs().max(nr.1.abs());
                    if nn < rn || nn < tol {
                        alpha = na;
                        beta += lam * db;
                        jet = nj;
                        accepted = true;
                        break;
                    }
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NewtonDiverged { iters: max_iters, residual: last })
}

fn unwrap_near(beta: f64, target: f64) -> f64 {
    beta - 2.0 * PI * ((beta - target) / (2.0 * PI)).round()
}

/// Solves the orthogonality conditions for `(α, β)` starting from `guess`.
/// On Newton failure an α scan around the guess supplies new starts.
pub fn solve_orthogonality(
    family: &ProfileFamily,
    u: &ComplexField,
    t: f64,
    guess: &ModulationState,
    opts: &NewtonOptions,
) -> Result<ModulationState> {
    let tol = opts.rel_tol * u.l2().max(1e-300);
    let ws = Workspace::new(&family.grid, t);
    let attempt = newton(family, &ws, &u.values, (guess.alpha, guess.beta), tol, opts.max_iters);
    let solved = match attempt {
        Ok(v) => v,
        Err(Error::JacobianSingular(d)) => return Err(Error::JacobianSingular(d)),
        Err(first) => {
            let mut starts: Vec<f64> = (1..=opts.scan_points)
                .flat_map(|k| {
                    let d = opts.scan_width * guess.alpha * k as f64 / opts.scan_points as f64;
                    [guess.alpha - d, guess.alpha + d]
                })
                .filter(|a| *a > 0.0)
                .collect();
            starts.sort_by(|a, b| (a - guess.alpha).abs().total_cmp(&(b - guess.alpha).abs()));
            let mut found = None;
            for a0 in starts {
                if let Ok(v) = newton(family, &ws, &u.values, (a0, guess.beta), tol, opts.max_iters) {
                    found = Some(v);
                    break;
                }
            }
            found.ok_or(first)?
        }
    };
    let (alpha, beta, r, iters) = solved;
    let beta = unwrap_near(beta, guess.beta);
    let omega = -alpha * alpha / 4.0;
    // γ = β − ∫₀ᵗ ω, advanced from the guess by the trapezoid rule.
    let int_prev = guess.beta - guess.gamma;
    let gamma = beta - int_prev - 0.5 * (omega + guess.omega) * (t - guess.t);
    Ok(ModulationState { t, beta, omega, gamma, alpha, ortho_residuals: r, newton_iters: iters })
}

/// `f = e^{iβ}u − φ(·;α)`.
pub fn radiation(family: &ProfileFamily, u: &ComplexField, state: &ModulationState) -> Result<ComplexField> {
    let phi = family.values(state.alpha)?;
    let rot = Complex64::from_polar(1.0, state.beta);
    Ok(ComplexField {
        grid: u.grid,
        values: u.values.iter().zip(&phi).map(|(z, p)| rot * z - p).collect(),
    })
}

// ---------------------------------------------------------------------------
// Rates

/// Right-hand side of the modulation-rate bound,
/// `‖f‖∞² + ‖f‖∞^{m−1}‖f‖_m + ‖f‖∞^{n−1}‖f‖_n + t^{−2}‖f‖∞ + t^{−1}‖f‖∞`.
pub fn lemma_rate_bound(f: &ComplexField, t: f64, nl: &NonlinearitySpec) -> f64 {
    let (m, n) = (nl.degree_small(), nl.degree_large());
    let h = f.grid.spacing();
    let inf = f.linf();
    let fm = lp_norm(&f.values, h, m);
    let fn_ = lp_norm(&f.values, h, n);
    inf * inf + inf.powf(m - 1.0) * fm + inf.powf(n - 1.0) * fn_ + inf / (t * t) + inf / t
}

/// `(γ', ω')` at each state by three-point differences (one-sided at the
/// ends), for non-uniform sampling.
pub fn measured_rates(series: &[ModulationState]) -> Vec<(f64, f64)> {
    let n = series.len();
    if n < 2 {
        return vec![(0.0, 0.0); n];
    }
    let d = |k: usize, get: &dyn Fn(&ModulationState) -> f64| -> f64 {
        let (i0, i1, i2) = if k == 0 {
            (0, 1, 2.min(n - 1))
        } else if k == n - 1 {
            (n.saturating_sub(3), n - 2, n - 1)
        } else {
            (k - 1, k, k + 1)
        };
        if i0 == i1 || i1 == i2 || n < 3 {
            return (get(&series[n - 1]) - get(&series[0])) / (series[n - 1].t - series[0].t);
        }
        // derivative of the interpolating quadratic at t_k
        let (t0, t1, t2) = (series[i0].t, series[i1].t, series[i2].t);
        let (y0, y1, y2) = (get(&series[i0]), get(&series[i1]), get(&series[i2]));
        let tk = series[k].t;
        y0 * (2.0 * tk - t1 - t2) / ((t0 - t1) * (t0 - t2))
            + y1 * (2.0 * tk - t0 - t2) / ((t1 - t0) * (t1 - t2))
            + y2 * (2.0 * tk - t0 - t1) / ((t2 - t0) * (t2 - t1))
    };
    (0..n).map(|k| (d(k, &|s| s.gamma), d(k, &|s| s.omega))).collect()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateSample {
    pub t: f64,
    pub bound: f64,
    /// `|γ'| + |ω'|`
    pub measured: f64,
}

/// Bound and measured rate at `state`; `rates` from [`measured_rates`].
pub fn modulation_rates(f: &ComplexField, state: &ModulationState, rates: (f64, f64), nl: &NonlinearitySpec) -> RateSample {
    RateSample { t: state.t, bound: lemma_rate_bound(f, state.t, nl), measured: rates.0.abs() + rates.1.abs() }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateFit {
    /// Smallest `C` with `measured ≤ C · bound` at every sample.
    pub fitted_c: f64,
    pub worst_ratio: f64,
    pub worst_t: f64,
    /// Largest ratio over the second half of the samples.
    pub late_ratio: f64,
}

pub fn fit_rate_constant(samples: &[RateSample]) -> RateFit {
    let ratio = |s: &RateSample| {
        if s.measured == 0.0 {
            0.0
        } else if s.bound == 0.0 {
            f64::INFINITY
        } else {
            s.measured / s.bound
        }
    };
    let mut fit = RateFit { fitted_c: 0.0, worst_ratio: 0.0, worst_t: f64::NAN, late_ratio: 0.0 };
    for (i, s) in samples.iter().enumerate() {
        let r = ratio(s);
        if r > fit.worst_ratio || fit.worst_t.is_nan() {
            fit.worst_ratio = r;
            fit.worst_t = s.t;
        }
        if 2 * i >= samples.len() {
            fit.late_ratio = fit.late_ratio.max(r);
        }
    }
    fit.fitted_c = fit.worst_ratio;
    fit
}

// ---------------------------------------------------------------------------
// D-terms

/// Forcing terms of the `g` equation `i g_t = H(α₁) g⃗ + D`, upper row.
#[derive(Debug, Clone)]
pub struct DTerms {
    pub d0: ComplexField,
    pub d1: ComplexField,
    pub d2: ComplexField,
    pub d3: ComplexField,
    pub d4: ComplexField,
    /// `Ω(x)`, constant in space; stored per point for export.
    pub omega_phase: Vec<f64>,
}

impl DTerms {
    pub fn total(&self) -> ComplexField {
        self.d0.add(&self.d1).add(&self.d2).add(&self.d3).add(&self.d4)
    }
}

/// Reference parameters `(α₁, β₁)` frozen at time `t₁`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReferenceState {
    pub t1: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl ReferenceState {
    pub fn from_state(s: &ModulationState) -> Self {
        Self { t1: s.t, alpha1: s.alpha, beta1: s.beta }
    }

    pub fn omega1(&self) -> f64 {
        -self.alpha1 * self.alpha1 / 4.0
    }

    /// `Ω = β(t) − ω₁ t − γ₁`, `γ₁ = β₁ − ω₁ t₁`.
    pub fn phase_mismatch(&self, beta: f64, t: f64) -> f64 {
        let w1 = self.omega1();
        beta - w1 * t - (self.beta1 - w1 * self.t1)
    }
}

fn potentials(nl: &NonlinearitySpec, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let v1 = phi.iter().map(|&p| -(nl.f(p * p) + nl.df(p * p) * p * p)).collect();
    let v2 = phi.iter().map(|&p| -nl.df(p * p) * p * p).collect();
    (v1, v2)
}

fn field(grid: GridSpec, v: Vec<Complex64>) -> ComplexField {
    ComplexField { grid, values: v }
}

/// `D₀..D₄` for the current state, its rates `(γ', ω')` and a reference.
pub fn evaluate_d_terms(
    family: &ProfileFamily,
    g: &ComplexField,
    now: &ModulationState,
    rates: (f64, f64),
    reference: &ReferenceState,
) -> Result<DTerms> {
    let nl = &family.nl;
    let grid = g.grid;
    let jet = family.jet(now.alpha)?;
    let phi1 = family.values(reference.alpha1)?;
    let (v1, v2) = potentials(nl, &jet.phi);
    let (w1, w2) = potentials(nl, &phi1);
    let om = reference.phase_mismatch(now.beta, now.t);
    let e = Complex64::from_polar(1.0, -om);
    let (gd, wd) = rates;
    let i = Complex64::new(0.0, 1.0);
    let n = grid.n();
    let mut d = [(); 5].map(|_| Vec::with_capacity(n));
    let e2 = Complex64::from_polar(1.0, -2.0 * om) - 1.0;
    for j in 0..n {
        let gj = g.values[j];
        d[0].push(e * (-gd * jet.phi[j] + i * (2.0 / now.alpha) * wd * jet.phi_alpha[j]));
        d[1].push((v1[j] - w1[j]) * gj);
        d[2].push(v2[j] * e2 * gj.conj());
        d[3].push((v2[j] - w2[j]) * gj.conj());
        d[4].push(-e * nl.remainder(jet.phi[j], gj / e));
    }
    let [d0, d1, d2, d3, d4] = d;
    Ok(DTerms {
        d0: field(grid, d0),
        d1: field(grid, d1),
        d2: field(grid, d2),
        d3: field(grid, d3),
        d4: field(grid, d4),
        omega_phase: vec![om; n],
    })
}

/// `D₄` from the integral form `−e^{−iΩ} ∫₀¹ (1−σ) Σ Aₖ(σ) dσ`, where with
/// `w = φ + σf`, `ρ = |w|²`:
/// `A₁ = F''(ρ)(w̄f)²w`, `A₂ = 2F''(ρ)ρ|f|²w`, `A₃ = F''(ρ)(wf̄)²w`,
/// `A₄ = 2F'(ρ)|f|²w`, `A₅ = 2F'(ρ)(w̄f + wf̄)f`.
pub fn d4_integral_form(family: &ProfileFamily, g: &ComplexField, now: &ModulationState, reference: &ReferenceState) -> Result<ComplexField> {
    let nl = &family.nl;
    let phi = family.values(now.alpha)?;
    let om = reference.phase_mismatch(now.beta, now.t);
    let e = Complex64::from_polar(1.0, -om);
    let (xs, ws) = gauss_legendre(24);
    let vals = phi
        .iter()
        .zip(&g.values)
        .map(|(&p, &gj)| {
            let f = gj / e;
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, wq) in xs.iter().zip(&ws) {
                let s = 0.5 * (x + 1.0);
                let w = p + s * f;
                let rho = w.norm_sqr();
                let (f1, f2) = (nl.df(rho), nl.d2f(rho));
                let a1 = f2 * (w.conj() * f).powi(2) * w;
                let a2 = 2.0 * f2 * rho * f.norm_sqr() * w;
                let a3 = f2 * (w * f.conj()).powi(2) * w;
                let a4 = 2.0 * f1 * f.norm_sqr() * w;
                let a5 = 2.0 * f1 * (w.conj() * f + w * f.conj()) * f;
                acc += 0.5 * wq * (1.0 - s) * (a1 + a2 + a3 + a4 + a5);
            }
            -e * acc
        })
        .collect();
    Ok(field(g.grid, vals))
}

/// `D` assembled directly from the equation for `u`:
/// `i g_t = Ω' g + e^{−iΩ}[−β' e^{iβ}u + e^{iβ}(−u'' − F(|u|²)u) − iα'φ_α]`
/// minus the upper row of `H(α₁) g⃗`.
pub fn direct_forcing(
    family: &ProfileFamily,
    u: &ComplexField,
    now: &ModulationState,
    rates: (f64, f64),
    reference: &ReferenceState,
) -> Result<ComplexField> {
    let nl = &family.nl;
    let grid = u.grid;
    let jet = family.jet(now.alpha)?;
    let phi1 = family.values(reference.alpha1)?;
    let (w1, w2) = potentials(nl, &phi1);
    let om = reference.phase_mismatch(now.beta, now.t);
    let e = Complex64::from_polar(1.0, -om);
    let rot = Complex64::from_polar(1.0, now.beta);
    let (gd, wd) = rates;
    let beta_dot = now.omega + gd;
    let alpha_dot = -2.0 * wd / now.alpha;
    let om_dot = now.omega + gd - reference.omega1();
    let tau1 = reference.alpha1 * reference.alpha1 / 4.0;
    let i = Complex64::new(0.0, 1.0);

    let mut uxx = u.values.clone();
    derivative_in_place(&mut uxx, &grid, 2);
    let g: Vec<Complex64> = u.values.iter().zip(&jet.phi).map(|(z, p)| e * (rot * z - p)).collect();
    let mut gxx = g.clone();
    derivative_in_place(&mut gxx, &grid, 2);
    let vals = (0..grid.n())
        .map(|j| {
            let uj = u.values[j];
            let iut = -uxx[j] - nl.f(uj.norm_sqr()) * uj;
            let igt = om_dot * g[j] + e * (-beta_dot * rot * uj + rot * iut - i * alpha_dot * jet.phi_alpha[j]);
            let hg = -gxx[j] + (tau1 + w1[j]) * g[j] + w2[j] * g[j].conj();
            igt - hg
        })
        .collect();
    Ok(field(grid, vals))
}

/// `g = e^{−iΩ}(e^{iβ}u − φ(α))`.
pub fn g_field(family: &ProfileFamily, u: &ComplexField, now: &ModulationState, reference: &ReferenceState) -> Result<ComplexField> {
    let f = radiation(family, u, now)?;
    let e = Complex64::from_polar(1.0, -reference.phase_mismatch(now.beta, now.t));
    Ok(f.scale(e))
}

// ---------------------------------------------------------------------------
// Limits

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LimitParameters {
    pub omega_plus: f64,
    /// `∫₀^∞ (ω − ω₊)`, with `ω = ω(h)` on `[0, h]`.
    pub gamma_plus: f64,
    /// Uncertainty of `ω₊`.
    pub tail_estimate: f64,
    /// Uncertainty of `γ₊`.
    pub gamma_uncertainty: f64,
    /// Late-time value of `γ(t)`.
    pub gamma_inf: f64,
    /// `γ_∞ + γ₊`, so that `β(t) − ω₊ t → phase_offset`.
    pub phase_offset: f64,
    /// Fitted decay exponent of `ω − ω₊`.
    pub omega_decay: f64,
}

/// Least-squares `(ω∞, c)` for `ω ≈ ω∞ + c t^{−q}` and its RMS residual.
fn fit_tail(ts: &[f64], ws: &[f64], q: f64) -> (f64, f64, f64) {
    let n = ts.len() as f64;
    let xs: Vec<f64> = ts.iter().map(|t| t.powf(-q)).collect();
    let (sx, sy) = (xs.iter().sum::<f64>(), ws.iter().sum::<f64>());
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ws).map(|(x, y)| x * y).sum();
    let den = n * sxx - sx * sx;
    let (w_inf, c) = if den.abs() < 1e-300 * n * sxx.max(1e-300) || den <= 0.0 {
        (sy / n, 0.0)
    } else {
        let c = (n * sxy - sx * sy) / den;
        ((sy - c * sx) / n, c)
    };
    let rms = (xs.iter().zip(ws).map(|(x, y)| (y - w_inf - c * x).powi(2)).sum::<f64>() / n).sqrt();
    (w_inf, c, rms)
}

fn best_fit(ts: &[f64], ws: &[f64]) -> (f64, f64, f64, f64) {
    // coarse grid in q then golden-section refinement
    let qs: Vec<f64> = (1..=80).map(|k| 0.05 * k as f64).collect();
    let mut best = (f64::INFINITY, 1.0);
    for &q in &qs {
        let r = fit_tail(ts, ws, q).2;
        if r < best.0 {
            best = (r, q);
        }
    }
    let (mut lo, mut hi) = ((best.1 - 0.05).max(0.01), best.1 + 0.05);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - gr * (hi - lo);
        let b = lo + gr * (hi - lo);
        if fit_tail(ts, ws, a).2 < fit_tail(ts, ws, b).2 {
            hi = b;
        } else {
            lo = a;
        }
    }
    let q = 0.5 * (lo + hi);
    let (w, c, r) = fit_tail(ts, ws, q);
    (w, c, r, q)
}

/// Extrapolated `ω₊`, `γ₊` and their uncertainties from a trajectory on
/// `[h, T]`, `T ≥ 10h`.
pub fn limit_parameters(series: &[ModulationState]) -> Result<LimitParameters> {
    if series.len() < 8 {
        return Err(Error::InsufficientHorizon(format!("{} samples", series.len())));
    }
    let h = series[0].t;
    let t_end = series[series.len() - 1].t;
    if t_end < 10.0 * h {
        return Err(Error::InsufficientHorizon(format!("T = {t_end} < 10h = {}", 10.0 * h)));
    }
    let ts: Vec<f64> = series.iter().map(|s| s.t).collect();
    let ws: Vec<f64> = series.iter().map(|s| s.omega).collect();
    let from = |frac: f64| ts.iter().position(|&t| t >= t_end * frac).unwrap_or(0);
    let i_half = from(0.5);
    let i_quarter = from(0.75);
    let (w_half, c, rms, q) = best_fit(&ts[i_half..], &ws[i_half..]);
    let (w_quarter, ..) = if ts.len() - i_quarter >= 4 { best_fit(&ts[i_quarter..], &ws[i_quarter..]) } else { (w_half, 0.0, 0.0, q) };
    let floor = 64.0 * f64::EPSILON * w_half.abs().max(1e-300);
    let tail_estimate = (w_half - w_quarter).abs().max(2.0 * rms).max(floor);
    let omega_plus = w_half;

    // ∫₀^T (ω − ω₊): constant on [0, h], trapezoid and Simpson on samples.
    let dev: Vec<f64> = ws.iter().map(|w| w - omega_plus).collect();
    let mut trap = dev[0] * h;
    for k in 1..ts.len() {
        trap += 0.5 * (dev[k] + dev[k - 1]) * (ts[k] - ts[k - 1]);
    }
    let mut simp = dev[0] * h;
    let mut k = 0;
    while k + 2 < ts.len() {
        let (a, b) = (ts[k + 1] - ts[k], ts[k + 2] - ts[k + 1]);
        let s = a + b;
        simp += s / 6.0 * ((2.0 - b / a) * dev[k] + s * s / (a * b) * dev[k + 1] + (2.0 - a / b) * dev[k + 2]);
        k += 2;
    }
    if k + 1 < ts.len() {
        simp += 0.5 * (dev[k] + dev[k + 1]) * (ts[k + 1] - ts[k]);
    }
    let remaining = c * t_end.powf(-q);
    let tail = if q > 1.0 {
        c * t_end.powf(1.0 - q) / (q - 1.0)
    } else if remaining.abs() <= tail_estimate {
        0.0
    } else {
        return Err(Error::InsufficientHorizon(format!(
            "omega still drifting (c T^-q = {remaining:.3e}) with exponent {q:.3} <= 1"
        )));
    };
    let gamma_plus = trap + tail;
    let gamma_uncertainty = (trap - simp).abs() + tail_estimate * t_end + 0.1 * tail.abs();
    let gamma_inf = series[series.len() - 1].gamma;
    Ok(LimitParameters {
        omega_plus,
        gamma_plus,
        tail_estimate,
        gamma_uncertainty,
        gamma_inf,
        phase_offset: gamma_inf + gamma_plus,
        omega_decay: q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::profile::soliton_field;

    fn family() -> ProfileFamily {
        let nl = NonlinearitySpec::pure_power(3.0).unwrap();
        ProfileFamily::new(&nl, make_grid(30.0, 512).unwrap())
    }

    #[test]
    fn exact_soliton_is_recovered() {
        let fam = family();
        let p = fam.profile(2.0).unwrap();
        let u = soliton_field(&p, 0.7);
        let guess = ModulationState::soliton(20.0, 1.9, 0.6);
        let s = solve_orthogonality(&fam, &u, 20.0, &guess, &NewtonOptions::default()).unwrap();
        assert!((s.alpha - 2.0).abs() < 1e-10, "{s:?}");
        assert!((s.beta - 0.7).abs() < 1e-10);
        assert!((s.omega + 1.0).abs() < 1e-9);
    }

    #[test]
    fn leading_jacobian_limit() {
        let fam = family();
        let p = fam.profile(2.0).unwrap();
        let u = soliton_field(&p, 0.0);
        let st = ModulationState::soliton(1e8, 2.0, 0.0);
        let j = orthogonality_jacobian(&fam, &st, &u, 1e8).unwrap();
        let l = leading_jacobian(2.0, 2.0);
        for a in 0..2 {
            for b in 0..2 {
                assert!((j[a][b] - l[a][b]).abs() < 1e-6, "{j:?}");
            }
        }
    }

    #[test]
    fn constant_omega_limits() {
        let series: Vec<ModulationState> = (0..50).map(|k| ModulationState::soliton(1.0 + k as f64, 2.0, 0.0)).collect();
        let lp = limit_parameters(&series).unwrap();
        assert!((lp.omega_plus + 1.0).abs() < 1e-14);
        assert!(lp.gamma_plus.abs() < 1e-12);
        assert!(limit_parameters(&series[..2]).is_err());
    }
}
