//! Ground states `φ'' = τφ − F(φ²)φ`, `τ = α²/4`, and their α-derivatives.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative_real, ComplexField, GridSpec};
use crate::nonlinearity::NonlinearitySpec;

/// Absolute L² tolerance on the stationary residual for `τ‖φ‖₂ ≤ 1`;
/// scaled by `τ‖φ‖₂` above that.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Accepted profiles must satisfy `φ(±L)` below this.
pub const DECAY_TOL: f64 = 1e-10;
/// Default α step for finite-difference derivatives.
pub const DEFAULT_DALPHA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ProfileSource {
    ClosedForm { p: f64 },
    Shooting { nl: NonlinearitySpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonProfile {
    pub alpha: f64,
    pub grid: GridSpec,
    pub phi: Vec<f64>,
    pub phi_alpha: Vec<f64>,
    pub omega: f64,
    pub mass: f64,
    pub mass_dalpha: f64,
    pub residual: f64,
    pub source: ProfileSource,
}

impl SolitonProfile {
    pub fn tau(&self) -> f64 {
        self.alpha * self.alpha / 4.0
    }

    pub fn phi_at_origin(&self) -> f64 {
        self.phi[self.grid.origin()]
    }

    /// `v₂ = −(2/α) φ_α`.
    pub fn v2(&self) -> Vec<f64> {
        self.phi_alpha.iter().map(|d| -2.0 / self.alpha * d).collect()
    }

    fn finish(&mut self) {
        let h = self.grid.spacing();
        self.mass = h * self.phi.iter().map(|p| p * p).sum::<f64>();
        self.mass_dalpha = 2.0 * h * self.phi.iter().zip(&self.phi_alpha).map(|(p, d)| p * d).sum::<f64>();
    }
}

/// `‖φ'' − τφ + F(φ²)φ‖₂` with spectral `φ''`.
pub fn stationary_residual(phi: &[f64], tau: f64, nl: &NonlinearitySpec, grid: &GridSpec) -> f64 {
    let d2 = derivative_real(phi, grid, 2);
    let h = grid.spacing();
    (h * phi
        .iter()
        .zip(&d2)
        .map(|(&p, &dd)| (dd - tau * p + nl.f(p * p) * p).powi(2))
        .sum::<f64>())
    .sqrt()
}

fn residual_tolerance(phi: &[f64], tau: f64, grid: &GridSpec) -> f64 {
    let l2 = (grid.spacing() * phi.iter().map(|p| p * p).sum::<f64>()).sqrt();
    RESIDUAL_TOL * (tau * l2).max(1.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Precondition(format!("alpha must be positive (no decay scale), got {alpha}")));
    }
    Ok(())
}

fn check_accept(phi: &[f64], tau: f64, nl: &NonlinearitySpec, grid: &GridSpec) -> Result<f64> {
    let edge = phi[0].abs().max(phi[grid.n() - 1].abs());
    if edge >= DECAY_TOL {
        return Err(Error::NotDecayed(edge));
    }
    let residual = stationary_residual(phi, tau, nl, grid);
    let tol = residual_tolerance(phi, tau, grid);
    if !(residual < tol) {
        return Err(Error::ResolutionInsufficient { residual, tol });
    }
    Ok(residual)
}

/// `φ(x) = A sech^{2/(p−1)}(Bx)` with `A = (τ(p+1)/2)^{1/(p−1)}`, `B = (p−1)α/4`.
pub fn closed_form_values(p: f64, alpha: f64, grid: &GridSpec) -> Vec<f64> {
    let tau = alpha * alpha / 4.0;
    let amp = (tau * (p + 1.0) / 2.0).powf(1.0 / (p - 1.0));
    let b = (p - 1.0) * alpha / 4.0;
    let q = 2.0 / (p - 1.0);
    grid.xs().into_iter().map(|x| amp * (1.0 / (b * x).cosh()).powf(q)).collect()
}

/// Analytic `∂φ/∂α` of the closed form.
pub fn closed_form_alpha_derivative(p: f64, alpha: f64, grid: &GridSpec) -> Vec<f64> {
    let tau = alpha * alpha / 4.0;
    let amp = (tau * (p + 1.0) / 2.0).powf(1.0 / (p - 1.0));
    let damp = amp * 2.0 / ((p - 1.0) * alpha);
    let b = (p - 1.0) * alpha / 4.0;
    let db = (p - 1.0) / 4.0;
    let q = 2.0 / (p - 1.0);
    grid.xs()
        .into_iter()
        .map(|x| {
            let s = (1.0 / (b * x).cosh()).powf(q);
            damp * s - amp * q * s * (b * x).tanh() * x * db
        })
        .collect()
}

pub fn closed_form_profile(p: f64, alpha: f64, grid: &GridSpec) -> Result<SolitonProfile> {
    check_alpha(alpha)?;
    let nl = NonlinearitySpec::pure_power(p)?;
    let tau = alpha * alpha / 4.0;
    let phi = closed_form_values(p, alpha, grid);
    let residual = check_accept(&phi, tau, &nl, grid)?;
    let mut prof = SolitonProfile {
        alpha,
        grid: *grid,
        phi,
        phi_alpha: closed_form_alpha_derivative(p, alpha, grid),
        omega: -tau,
        mass: 0.0,
        mass_dalpha: 0.0,
        residual,
        source: ProfileSource::ClosedForm { p },
    };
    prof.finish();
    Ok(prof)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    /// φ turned upward: amplitude too small.
    Rose,
    /// φ crossed zero: amplitude too large.
    Crossed,
    /// Neither before the end of the window.
    Undecided,
}

struct Shooter<'a> {
    nl: &'a NonlinearitySpec,
    tau: f64,
    dx: f64,
    x_end: f64,
}

impl Shooter<'_> {
    fn rhs(&self, y: f64) -> f64 {
        self.tau * y - self.nl.f(y * y) * y
    }

    fn drhs(&self, y: f64) -> f64 {
        let y2 = y * y;
        self.tau - self.nl.f(y2) - 2.0 * self.nl.df(y2) * y2
    }

    /// One RK4 step of `(y, y', δy, δy')`.
    fn step(&self, s: [f64; 4]) -> [f64; 4] {
        let f = |s: [f64; 4]| [s[1], self.rhs(s[0]), s[3], self.drhs(s[0]) * s[2]];
        let h = self.dx;
        let add = |a: [f64; 4], b: [f64; 4], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]];
        let k1 = f(s);
        let k2 = f(add(s, k1, h / 2.0));
        let k3 = f(add(s, k2, h / 2.0));
        let k4 = f(add(s, k3, h));
        [0, 1, 2, 3].map(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }

    fn classify(&self, c: f64) -> Shot {
        let mut s = [c, 0.0, 1.0, 0.0];
        let steps = (self.x_end / self.dx).ceil() as usize;
        for _ in 0..steps {
            s = self.step(s);
            if s[0] < 0.0 {
                return Shot::Crossed;
            }
            if s[1] > 0.0 {
                return Shot::Rose;
            }
        }
        Shot::Undecided
    }

    /// Integrates to the first step where `φ ≤ frac·c` (or `x_end`); returns
    /// the step count and final state.
    fn run_to_level(&self, c: f64, frac: f64, max_steps: Option<usize>) -> (usize, [f64; 4]) {
        let mut s = [c, 0.0, 1.0, 0.0];
        let steps = max_steps.unwrap_or((self.x_end / self.dx).ceil() as usize);
        for i in 0..steps {
            s = self.step(s);
            if max_steps.is_none() && (s[0] <= frac * c || s[1] > 0.0) {
                return (i + 1, s);
            }
        }
        (steps, s)
    }
}

/// Even positive homoclinic of `φ'' = τφ − F(φ²)φ` by shooting on `φ(0)`.
pub fn shoot_profile(nl: &NonlinearitySpec, alpha: f64, grid: &GridSpec) -> Result<SolitonProfile> {
    let phi = shoot_values(nl, alpha, grid)?;
    let tau = alpha * alpha / 4.0;
    let residual = check_accept(&phi, tau, nl, grid)?;
    let mut prof = SolitonProfile {
        alpha,
        grid: *grid,
        phi,
        phi_alpha: vec![0.0; grid.n()],
        omega: -tau,
        mass: 0.0,
        mass_dalpha: 0.0,
        residual,
        source: ProfileSource::Shooting { nl: nl.clone() },
    };
    prof.phi_alpha = alpha_derivative_fd(&prof.source, alpha, grid, DEFAULT_DALPHA)?;
    prof.finish();
    Ok(prof)
}

fn shoot_values(nl: &NonlinearitySpec, alpha: f64, grid: &GridSpec) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    nl.validate()?;
    let tau = alpha * alpha / 4.0;
    let hx = grid.spacing();
    let sub = (hx * tau.sqrt() / 2e-3).ceil().max(1.0) as usize;
    let shooter = Shooter { nl, tau, dx: hx / sub as f64, x_end: grid.half_width };

    // Energy φ'²/2 − τφ²/2 + G(φ²)/2 vanishes on the homoclinic; use its
    // sign at x = 0 to seed the bracket.
    let excess = |c: f64| nl.g(c * c) - tau * c * c;
    let mut lo = 1.0;
    let mut k = 0;
    while excess(lo) >= 0.0 || nl.f(lo * lo) >= 0.5 * tau {
        lo *= 0.5;
        k += 1;
        if k > 200 {
            return Err(Error::NoHomoclinic("no small amplitude with negative energy".into()));
        }
    }
    let mut hi = lo;
    k = 0;
    while excess(hi) <= 0.0 {
        hi *= 2.0;
        k += 1;
        if k > 200 || !hi.is_finite() {
            return Err(Error::NoHomoclinic("energy never turns positive".into()));
        }
    }
    if shooter.classify(lo) != Shot::Rose || shooter.classify(hi) != Shot::Crossed {
        return Err(Error::NoHomoclinic(format!("bracket [{lo}, {hi}] does not straddle the separatrix")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shooter.classify(mid) {
            Shot::Rose => lo = mid,
            Shot::Crossed => hi = mid,
            Shot::Undecided => {
                lo = mid;
                hi = mid;
                break;
            }
        }
    }
    let mut c = 0.5 * (lo + hi);

    // Newton polish on the decaying (Robin) condition at the matching point.
    let (m_steps, _) = shooter.run_to_level(c, 1e-6, None);
    for _ in 0..4 {
        let (_, s) = shooter.run_to_level(c, 0.0, Some(m_steps));
        let kappa = (tau - nl.f(s[0] * s[0])).max(0.0).sqrt();
        let g = s[1] + kappa * s[0];
        let dg = s[3] + kappa * s[2];
        if dg == 0.0 || !dg.is_finite() {
            break;
        }
        let next = c - g / dg;
        if !(next.is_finite() && (next - c).abs() <= 1e-6 * c) {
            break;
        }
        let done = (next - c).abs() <= 4.0 * f64::EPSILON * c;
        c = next;
        if done {
            break;
        }
    }

    // Record the trajectory at non-negative grid points, then splice the
    // linear tail beyond the matching point.
    let n = grid.n();
    let half = grid.origin();
    let n_pos = n - half + 1; // x = 0, h, ..., L
    let mut pos = vec![0.0; n_pos];
    pos[0] = c;
    let mut s = [c, 0.0, 1.0, 0.0];
    let mut step_count = 0usize;
    let mut matched: Option<(f64, f64)> = None;
    for (j, slot) in pos.iter_mut().enumerate().skip(1) {
        let xj = j as f64 * hx;
        if let Some((xm, phim)) = matched {
            *slot = phim * (-tau.sqrt() * (xj - xm)).exp();
            continue;
        }
        for _ in 0..sub {
            s = shooter.step(s);
            step_count += 1;
            if step_count == m_steps {
                matched = Some((step_count as f64 * shooter.dx, s[0]));
                break;
            }
        }
        *slot = match matched {
            Some((xm, phim)) => phim * (-tau.sqrt() * (xj - xm)).exp(),
            None => s[0],
        };
    }
    let mut phi = vec![0.0; n];
    for (j, v) in phi.iter_mut().enumerate() {
        let m = (j as i64 - half as i64).unsigned_abs() as usize;
        *v = pos[m];
    }
    if phi.iter().any(|v| !v.is_finite() || *v < -1e-14) {
        return Err(Error::NoHomoclinic("shot left the positive cone".into()));
    }
    Ok(phi.into_iter().map(|v| v.max(0.0)).collect())
}

/// φ on the grid for a given α, without acceptance checks.
pub fn profile_values(source: &ProfileSource, alpha: f64, grid: &GridSpec) -> Result<Vec<f64>> {
    match source {
        ProfileSource::ClosedForm { p } => {
            check_alpha(alpha)?;
            Ok(closed_form_values(*p, alpha, grid))
        }
        ProfileSource::Shooting { nl } => shoot_values(nl, alpha, grid),
    }
}

fn alpha_derivative_fd(source: &ProfileSource, alpha: f64, grid: &GridSpec, dalpha: f64) -> Result<Vec<f64>> {
    let d = |delta: f64| -> Result<Vec<f64>> {
        let plus = profile_values(source, alpha + delta, grid)?;
        let minus = profile_values(source, alpha - delta, grid)?;
        Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * delta)).collect())
    };
    let coarse = d(dalpha)?;
    let fine = d(dalpha / 2.0)?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

/// Richardson-extrapolated central difference `∂φ/∂α`, stored into the
/// profile (mass derivative refreshed).
pub fn profile_alpha_derivative(
    nl: &NonlinearitySpec,
    profile: &mut SolitonProfile,
    dalpha: f64,
) -> Result<Vec<f64>> {
    if !(1e-4..=1e-2).contains(&dalpha) {
        return Err(Error::Precondition(format!("dalpha out of range [1e-4, 1e-2]: {dalpha}")));
    }
    let source = match &profile.source {
        ProfileSource::ClosedForm { p } => ProfileSource::ClosedForm { p: *p },
        ProfileSource::Shooting { .. } => ProfileSource::Shooting { nl: nl.clone() },
    };
    let d = alpha_derivative_fd(&source, profile.alpha, &profile.grid, dalpha)?;
    profile.phi_alpha = d.clone();
    profile.finish();
    Ok(d)
}

/// `w = e^{−iβ} φ`.
pub fn soliton_field(profile: &SolitonProfile, beta: f64) -> ComplexField {
    let ph = Complex64::from_polar(1.0, -beta);
    ComplexField {
        grid: profile.grid,
        values: profile.phi.iter().map(|&p| ph * p).collect(),
    }
}

/// Profile data at one α: `φ`, `φ_α`, `φ_αα`.
#[derive(Debug, Clone)]
pub struct ProfileJet {
    pub alpha: f64,
    pub phi: Vec<f64>,
    pub phi_alpha: Vec<f64>,
    pub phi_alpha2: Vec<f64>,
}

/// A one-parameter family of ground states on a fixed grid.
#[derive(Debug, Clone)]
pub struct ProfileFamily {
    pub source: ProfileSource,
    pub nl: NonlinearitySpec,
    pub grid: GridSpec,
}

impl ProfileFamily {
    pub fn new(nl: &NonlinearitySpec, grid: GridSpec) -> Self {
        let source = match nl.as_pure_power() {
            Some(p) => ProfileSource::ClosedForm { p },
            None => ProfileSource::Shooting { nl: nl.clone() },
        };
        Self { source, nl: nl.clone(), grid }
    }

    pub fn shooting(nl: &NonlinearitySpec, grid: GridSpec) -> Self {
        Self { source: ProfileSource::Shooting { nl: nl.clone() }, nl: nl.clone(), grid }
    }

    pub fn profile(&self, alpha: f64) -> Result<SolitonProfile> {
        match &self.source {
            ProfileSource::ClosedForm { p } => closed_form_profile(*p, alpha, &self.grid),
            ProfileSource::Shooting { nl } => shoot_profile(nl, alpha, &self.grid),
        }
    }

    pub fn values(&self, alpha: f64) -> Result<Vec<f64>> {
        profile_values(&self.source, alpha, &self.grid)
    }

    /// `φ`, `φ_α` (Richardson central difference, analytic for closed
    /// forms) and `φ_αα` (Richardson second difference).
    pub fn jet(&self, alpha: f64) -> Result<ProfileJet> {
        check_alpha(alpha)?;
        let phi = self.values(alpha)?;
        let phi_alpha = match &self.source {
            ProfileSource::ClosedForm { p } => closed_form_alpha_derivative(*p, alpha, &self.grid),
            _ => alpha_derivative_fd(&self.source, alpha, &self.grid, DEFAULT_DALPHA)?,
        };
        let delta = 1e-2 * alpha.max(1e-2);
        let second = |d: f64| -> Result<Vec<f64>> {
            let p = self.values(alpha + d)?;
            let m = self.values(alpha - d)?;
            Ok((0..phi.len()).map(|j| (p[j] - 2.0 * phi[j] + m[j]) / (d * d)).collect())
        };
        let coarse = second(delta)?;
        let fine = second(delta / 2.0)?;
        let phi_alpha2 = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
        Ok(ProfileJet { alpha, phi, phi_alpha, phi_alpha2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn cubic_closed_form_oracles() {
        let g = make_grid(40.0, 1024).unwrap();
        let p = closed_form_profile(3.0, 2.0, &g).unwrap();
        assert!((p.phi_at_origin() - 2f64.sqrt()).abs() < 1e-12);
        assert!((p.mass - 4.0).abs() < 1e-8);
        assert!((p.mass_dalpha - 2.0).abs() < 1e-6);
        assert!(p.residual < 1e-8);
        assert_eq!(p.omega, -1.0);
    }

    #[test]
    fn coarse_grid_rejected() {
        let g = make_grid(40.0, 64).unwrap();
        assert!(matches!(
            closed_form_profile(3.0, 2.0, &g),
            Err(Error::ResolutionInsufficient { .. })
        ));
        let g = make_grid(5.0, 256).unwrap();
        assert!(matches!(closed_form_profile(3.0, 2.0, &g), Err(Error::NotDecayed(_))));
    }

    #[test]
    fn shooting_matches_closed_form() {
        let g = make_grid(40.0, 1024).unwrap();
        let nl = NonlinearitySpec::pure_power(3.0).unwrap();
        let s = shoot_profile(&nl, 2.0, &g).unwrap();
        let c = closed_form_profile(3.0, 2.0, &g).unwrap();
        let diff = s.phi.iter().zip(&c.phi).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-6, "max diff {diff}");
        assert!(s.residual < 1e-8);
        assert!(shoot_profile(&nl, 0.0, &g).is_err());
    }

    #[test]
    fn combined_profile_is_even_positive() {
        let g = make_grid(40.0, 1024).unwrap();
        let nl = NonlinearitySpec::combined(vec![(1.0, 1.0), (0.1, 2.0)]).unwrap();
        let s = shoot_profile(&nl, 2.0, &g).unwrap();
        assert!(s.residual < 1e-8, "residual {}", s.residual);
        assert!(s.phi.iter().all(|&v| v >= 0.0));
        let o = g.origin();
        for m in 1..o {
            assert!((s.phi[o + m] - s.phi[o - m]).abs() < 1e-10);
        }
    }

    #[test]
    fn alpha_derivative_checks() {
        let g = make_grid(40.0, 1024).unwrap();
        let nl = NonlinearitySpec::pure_power(3.0).unwrap();
        let mut p = shoot_profile(&nl, 2.0, &g).unwrap();
        let analytic = closed_form_alpha_derivative(3.0, 2.0, &g);
        let fd = profile_alpha_derivative(&nl, &mut p, 1e-3).unwrap();
        let o = g.origin();
        assert!(((fd[o] - analytic[o]) / analytic[o]).abs() < 1e-4);
        let hp = 1e-3;
        let mp = shoot_profile(&nl, 2.0 + hp, &g).unwrap().mass;
        let mm = shoot_profile(&nl, 2.0 - hp, &g).unwrap().mass;
        let dm = (mp - mm) / (2.0 * hp);
        assert!(((dm - p.mass_dalpha) / dm).abs() < 1e-4);
        assert!(profile_alpha_derivative(&nl, &mut p, 0.1).is_err());
    }

    #[test]
    fn soliton_phase() {
        let g = make_grid(30.0, 512).unwrap();
        let p = closed_form_profile(3.0, 2.0, &g).unwrap();
        let w0 = soliton_field(&p, 0.0);
        assert!(w0.values.iter().zip(&p.phi).all(|(w, f)| w.im == 0.0 && w.re == *f));
        let wpi = soliton_field(&p, std::f64::consts::PI);
        assert!(wpi.values.iter().zip(&p.phi).all(|(w, f)| (w + f).norm() < 1e-15));
        assert!((soliton_field(&p, 0.7).l2().powi(2) - p.mass).abs() < 1e-12);
    }
}
