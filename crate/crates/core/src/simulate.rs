//! Split-step evolution of `iu_t = −u_xx − F(|u|²)u` and the stability
//! experiment built on it.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative_in_place, fft_in_place, ifft_in_place, lp_norm, ComplexField, GridSpec};
use crate::linop::Verdict;
use crate::modulation::{
    limit_parameters, measured_rates, modulation_rates, radiation, solve_orthogonality, LimitParameters,
    ModulationState, NewtonOptions, RateSample,
};
use crate::nonlinearity::NonlinearitySpec;
use crate::profile::{ProfileFamily, SolitonProfile};

/// Amplitude above which a run is flagged as outside the perturbative regime.
pub const PERTURBATIVE_AMPLITUDE: f64 = 1e-2;

/// Damping layer `σ(x) = strength·((|x| − x_a)/(L − x_a))²` on `|x| > x_a`,
/// `x_a = (1 − width)L`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Absorber {
    pub width: f64,
    pub strength: f64,
}

impl Default for Absorber {
    fn default() -> Self {
        Self { width: 0.7, strength: 0.3 }
    }
}

impl Absorber {
    pub fn profile(&self, grid: &GridSpec) -> Vec<f64> {
        let l = grid.half_width;
        let xa = (1.0 - self.width) * l;
        grid.xs()
            .iter()
            .map(|&x| {
                let r = (x.abs() - xa) / (l - xa);
                if r > 0.0 {
                    self.strength * r * r
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Strang splitting: half nonlinear phase, full linear step, half nonlinear.
#[derive(Debug, Clone)]
pub struct SplitStepper {
    pub grid: GridSpec,
    pub nl: NonlinearitySpec,
    pub dt: f64,
    linear: Vec<Complex64>,
    damping: Option<Vec<f64>>,
    amp_limit: f64,
}

impl SplitStepper {
    pub fn new(grid: GridSpec, nl: NonlinearitySpec, dt: f64, absorber: Option<Absorber>) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::Precondition(format!("invalid time step {dt}")));
        }
        let linear = grid.wavenumbers().iter().map(|k| Complex64::from_polar(1.0, -k * k * dt)).collect();
        let damping = absorber.map(|a| a.profile(&grid).iter().map(|s| (-s * dt.abs()).exp()).collect());
        Ok(Self { grid, nl, dt, linear, damping, amp_limit: 1e6 })
    }

    fn nonlinear_half(&self, u: &mut [Complex64]) {
        let half = 0.5 * self.dt;
        for z in u.iter_mut() {
            *z *= Complex64::from_polar(1.0, half * self.nl.f(z.norm_sqr()));
        }
    }

    pub fn step(&self, u: &mut [Complex64]) {
        self.nonlinear_half(u);
        fft_in_place(u);
        for (z, m) in u.iter_mut().zip(&self.linear) {
            *z *= m;
        }
        ifft_in_place(u);
        self.nonlinear_half(u);
        if let Some(d) = &self.damping {
            for (z, s) in u.iter_mut().zip(d) {
                *z *= s;
            }
        }
    }

    /// `steps` steps with a blow-up guard; `t0` is only used in diagnostics.
    pub fn advance(&self, u: &mut [Complex64], steps: usize, t0: f64) -> Result<()> {
        for k in 0..steps {
            self.step(u);
            if k % 64 == 63 || k + 1 == steps {
                let m = u.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                if !m.is_finite() || m > self.amp_limit {
                    return Err(Error::BlowUp { t: t0 + (k + 1) as f64 * self.dt, max_amp: m });
                }
            }
        }
        Ok(())
    }
}

/// One Strang step of size `dt` (no absorber).
pub fn step_nls(u: &ComplexField, dt: f64, nl: &NonlinearitySpec) -> Result<ComplexField> {
    let st = SplitStepper::new(u.grid, nl.clone(), dt, None)?;
    let mut v = u.values.clone();
    st.advance(&mut v, 1, 0.0)?;
    Ok(ComplexField { grid: u.grid, values: v })
}

pub fn mass(u: &ComplexField) -> f64 {
    u.l2().powi(2)
}

/// `E[u] = ∫ |u'|² − G(|u|²)`.
pub fn energy(u: &ComplexField, nl: &NonlinearitySpec) -> f64 {
    let mut d = u.values.clone();
    derivative_in_place(&mut d, &u.grid, 1);
    let h = u.grid.spacing();
    d.iter().zip(&u.values).map(|(du, z)| du.norm_sqr() - nl.g(z.norm_sqr())).sum::<f64>() * h
}

/// Largest `dt = dt_max/2^k` whose soliton error over unit time is below
/// `target` relative to `‖φ‖₂`.
pub fn calibrate_dt(profile: &SolitonProfile, nl: &NonlinearitySpec, target: f64, dt_max: f64) -> Result<(f64, f64)> {
    let grid = profile.grid;
    let tau = profile.tau();
    let phi: Vec<Complex64> = profile.phi.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let norm = crate::grid::l2_norm(&phi, grid.spacing());
    let mut dt = dt_max;
    for _ in 0..16 {
        let steps = (1.0 / dt).round() as usize;
        let st = SplitStepper::new(grid, nl.clone(), 1.0 / steps as f64, None)?;
        let mut u = phi.clone();
        st.advance(&mut u, steps, 0.0)?;
        let rot = Complex64::from_polar(1.0, tau);
        let err: Vec<Complex64> = u.iter().zip(&phi).map(|(a, p)| a - rot * p).collect();
        let e = crate::grid::l2_norm(&err, grid.spacing()) / norm;
        if e < target {
            return Ok((1.0 / steps as f64, e));
        }
        dt /= 2.0;
    }
    Err(Error::StepUnderflow(format!("no dt >= {dt} meets soliton error {target:e}")))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConservationReport {
    pub dt: f64,
    pub steps: usize,
    pub mass_drift_per_unit_time: f64,
    pub energy_drift_per_unit_time: f64,
    /// `max ‖|u| − φ‖₂` over the run.
    pub profile_error: f64,
    /// `‖u − u₀‖₂/‖u₀‖₂` after `steps` steps forward and back.
    pub reversal_error: f64,
}

/// Evolves the exact soliton and measures conservation and reversibility.
pub fn conservation_run(profile: &SolitonProfile, nl: &NonlinearitySpec, dt: f64, steps: usize) -> Result<ConservationReport> {
    let grid = profile.grid;
    let u0 = ComplexField::from_real(grid, &profile.phi);
    let (m0, e0) = (mass(&u0), energy(&u0, nl));
    let fwd = SplitStepper::new(grid, nl.clone(), dt, None)?;
    let mut u = u0.values.clone();
    let mut prof_err = 0.0f64;
    let (mut max_dm, mut max_de) = (0.0f64, 0.0f64);
    let chunk = (steps / 20).max(1);
    let mut done = 0;
    while done < steps {
        let n = chunk.min(steps - done);
        fwd.advance(&mut u, n, done as f64 * dt)?;
        done += n;
        let f = ComplexField { grid, values: u.clone() };
        max_dm = max_dm.max((mass(&f) - m0).abs() / m0);
        max_de = max_de.max((energy(&f, nl) - e0).abs() / e0.abs().max(1e-300));
        let diff: Vec<Complex64> = u.iter().zip(&profile.phi).map(|(z, p)| Complex64::new(z.norm() - p, 0.0)).collect();
        prof_err = prof_err.max(crate::grid::l2_norm(&diff, grid.spacing()));
    }
    let t_total = steps as f64 * dt;
    let back = SplitStepper::new(grid, nl.clone(), -dt, None)?;
    back.advance(&mut u, steps, t_total)?;
    let diff: Vec<Complex64> = u.iter().zip(&u0.values).map(|(a, b)| a - b).collect();
    let rev = crate::grid::l2_norm(&diff, grid.spacing()) / u0.l2();
    Ok(ConservationReport {
        dt,
        steps,
        mass_drift_per_unit_time: max_dm / t_total.max(1.0),
        energy_drift_per_unit_time: max_de / t_total.max(1.0),
        profile_error: prof_err,
        reversal_error: rev,
    })
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PerturbationShape {
    /// `e^{−x²/(2w²)}`
    GaussianBump { width: f64 },
    /// `cos(πmx/L)`
    FourierMode { mode: usize },
    /// Seeded complex even field of modes `|k| ≤ k_cut` under a Gaussian
    /// envelope of width `width`.
    RandomEven { k_cut: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub shape: PerturbationShape,
    pub amplitude: f64,
    pub seed: u64,
}

impl Perturbation {
    /// Field with sup norm `amplitude` (zero if the amplitude is zero).
    pub fn field(&self, grid: &GridSpec) -> ComplexField {
        let xs = grid.xs();
        let raw: Vec<Complex64> = match self.shape {
            PerturbationShape::GaussianBump { width } => {
                xs.iter().map(|x| Complex64::new((-x * x / (2.0 * width * width)).exp(), 0.0)).collect()
            }
            PerturbationShape::FourierMode { mode } => {
                let k = std::f64::consts::PI * mode as f64 / grid.half_width;
                xs.iter().map(|x| Complex64::new((k * x).cos(), 0.0)).collect()
            }
            PerturbationShape::RandomEven { k_cut, width } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let dk = std::f64::consts::PI / grid.half_width;
                let modes = (k_cut / dk).floor() as usize;
                let coeffs: Vec<Complex64> =
                    (0..=modes).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                xs.iter()
                    .map(|&x| {
                        let env = (-x * x / (2.0 * width * width)).exp();
                        coeffs.iter().enumerate().map(|(m, c)| c * (dk * m as f64 * x).cos()).sum::<Complex64>() * env
                    })
                    .collect()
            }
        };
        let sup = raw.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let scale = if sup > 0.0 { self.amplitude / sup } else { 0.0 };
        ComplexField { grid: *grid, values: raw.iter().map(|z| z * scale).collect() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub grid: GridSpec,
    pub nl: NonlinearitySpec,
    pub alpha0: f64,
    pub beta0: f64,
    /// Start time `h`.
    pub h: f64,
    /// Time step; calibrated against the soliton when `None`.
    pub dt: Option<f64>,
    /// Soliton error per unit time targeted by the calibration.
    pub dt_target: f64,
    pub t_end: f64,
    pub perturbation: Perturbation,
    pub s: f64,
    /// Time between modulation samples, rounded to a whole number of steps.
    pub sample_interval: f64,
    pub absorber: Option<Absorber>,
    pub newton: NewtonOptions,
    /// Fraction of `[h, T]` treated as transient.
    pub transient_fraction: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec { half_width: 100.0, points: 1024 },
            nl: NonlinearitySpec::PurePower { p: 3.0 },
            alpha0: 2.0,
            beta0: 0.0,
            h: 20.0,
            dt: None,
            dt_target: 1e-8,
            t_end: 400.0,
            perturbation: Perturbation {
                shape: PerturbationShape::GaussianBump { width: 1.0 },
                amplitude: 1e-3,
                seed: 7,
            },
            s: 1.75 + 1e-3,
            sample_interval: 0.5,
            absorber: Some(Absorber::default()),
            newton: NewtonOptions::default(),
            transient_fraction: 0.25,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.nl.validate()?;
        if !(self.h >= 1.0) {
            return Err(Error::Precondition(format!("start time h = {} must be >= 1", self.h)));
        }
        if !(self.t_end > self.h) {
            return Err(Error::Precondition(format!("T = {} must exceed h = {}", self.t_end, self.h)));
        }
        if !(self.alpha0 > 0.0) {
            return Err(Error::Precondition(format!("alpha0 = {} must be positive", self.alpha0)));
        }
        if !(self.sample_interval > 0.0) {
            return Err(Error::Precondition("sample interval must be positive".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Precondition(format!("dt = {dt} must be positive")));
            }
        }
        crate::funcalc::check_s(self.s)
    }
}

// ---------------------------------------------------------------------------
// Results

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChiSample {
    pub t: f64,
    pub linf: f64,
    pub l2: f64,
    /// `‖χ‖_m`, `‖χ‖_n` for the small/large-amplitude degrees of `F`.
    pub lm: f64,
    pub ln: f64,
    /// `‖u − w(σ₊(t))‖_∞`, filled after the limits are known.
    pub linf_plus: f64,
    /// Running sup `𝓜(t)`.
    pub m_sup: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrowthSample {
    pub t: f64,
    /// `‖|x|u‖₂`
    pub x_u: f64,
    /// `‖|x|u'‖₂`
    pub x_du: f64,
    /// `‖|x|²u‖₂`
    pub x2_u: f64,
}

pub fn growth_sample(t: f64, u: &ComplexField) -> GrowthSample {
    let g = u.grid;
    let h = g.spacing();
    let xs = g.xs();
    let mut du = u.values.clone();
    derivative_in_place(&mut du, &g, 1);
    let w = |p: i32, v: &[Complex64]| (xs.iter().zip(v).map(|(x, z)| x.abs().powi(2 * p) * z.norm_sqr()).sum::<f64>() * h).sqrt();
    GrowthSample { t, x_u: w(1, &u.values), x_du: w(1, &du), x2_u: w(2, &u.values) }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    /// Standard error of the exponent.
    pub stderr: f64,
    pub window: (f64, f64),
}

/// Least-squares slope of `ln v` against `ln t` over `window`.
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series.iter().filter(|(t, _)| *t >= window.0 && *t <= window.1).copied().collect();
    if pts.iter().any(|(t, v)| !(*v > 0.0) || !(*t > 0.0)) {
        return Err(Error::Precondition("decay fit needs positive times and values".into()));
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientHorizon(format!("{} points in window", pts.len())));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let residual = (ss / n).sqrt();
    let stderr = if n > 2.0 && sxx > 0.0 { (ss / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    Ok(DecayFit { exponent: slope, residual, stderr, window })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub windows: usize,
    pub rel_tol: f64,
    pub window_maxima_increasing_steps: usize,
    pub worst_increase: f64,
    pub non_increasing: bool,
}

/// Splits the post-transient samples into `windows` equal time windows and
/// checks that window maxima never grow by more than `rel_tol`.
pub fn windowed_non_increasing(series: &[(f64, f64)], t_from: f64, windows: usize, rel_tol: f64) -> MonotoneCheck {
    let pts: Vec<(f64, f64)> = series.iter().filter(|(t, _)| *t >= t_from).copied().collect();
    let mut maxima = vec![0.0f64; windows];
    if let (Some(first), Some(last)) = (pts.first(), pts.last()) {
        let span = (last.0 - first.0).max(1e-300);
        for (t, v) in &pts {
            let k = (((t - first.0) / span) * windows as f64).floor().min(windows as f64 - 1.0) as usize;
            maxima[k] = maxima[k].max(*v);
        }
    }
    let mut bad = 0;
    let mut worst = 0.0f64;
    for w in maxima.windows(2) {
        let inc = (w[1] - w[0]) / w[0].max(1e-300);
        worst = worst.max(inc);
        if inc > rel_tol {
            bad += 1;
        }
    }
    MonotoneCheck { windows, rel_tol, window_maxima_increasing_steps: bad, worst_increase: worst, non_increasing: bad == 0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: SimulationConfig,
    pub dt: f64,
    pub dt_calibration_error: Option<f64>,
    pub spectral_verdict: Option<Verdict>,
    pub trajectory: Vec<ModulationState>,
    pub chi: Vec<ChiSample>,
    pub rates: Vec<RateSample>,
    pub growth: Vec<GrowthSample>,
    /// Final value of the running sup `𝓜`.
    pub m_sup: f64,
    pub limits: Option<LimitParameters>,
    pub limits_error: Option<String>,
    pub decay_fit: Option<DecayFit>,
    pub decay_fit_plus: Option<DecayFit>,
    pub chi_monotone: MonotoneCheck,
    pub max_ortho_residual: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub outside_perturbative_regime: bool,
    pub wall_time: f64,
}

fn japanese(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

/// Evolves `w(σ₀(h)) + perturbation` on `[h, T]`, tracking the modulation
/// parameters and the radiation `χ = u − w(σ(t))`.
pub fn run_stability_experiment(cfg: &SimulationConfig, spectral_verdict: Option<Verdict>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let clock = Instant::now();
    let grid = cfg.grid;
    let nl = &cfg.nl;
    let family = ProfileFamily::new(nl, grid);
    let profile = family.profile(cfg.alpha0)?;
    let (dt0, cal_err) = match cfg.dt {
        Some(dt) => (dt, None),
        None => {
            let (dt, e) = calibrate_dt(&profile, nl, cfg.dt_target, 0.05)?;
            (dt, Some(e))
        }
    };
    let span = cfg.t_end - cfg.h;
    let steps_per_sample = (cfg.sample_interval / dt0).round().max(1.0) as usize;
    let samples = (span / (steps_per_sample as f64 * dt0)).round().max(1.0) as usize;
    let dt = span / (samples * steps_per_sample) as f64;
    let stepper = SplitStepper::new(grid, nl.clone(), dt, cfg.absorber)?;

    let omega0 = -cfg.alpha0 * cfg.alpha0 / 4.0;
    let beta_h = cfg.beta0 + omega0 * cfg.h;
    let rot = Complex64::from_polar(1.0, -beta_h);
    let pert = cfg.perturbation.field(&grid);
    let mut u: Vec<Complex64> = profile.phi.iter().zip(&pert.values).map(|(p, d)| rot * p + d).collect();
    let uf = ComplexField { grid, values: u.clone() };
    let (mass_initial, energy_initial) = (mass(&uf), energy(&uf, nl));

    let (m_deg, n_deg) = (nl.degree_small(), nl.degree_large());
    let mut guess = ModulationState::soliton(cfg.h, cfg.alpha0, beta_h);
    let mut trajectory = Vec::with_capacity(samples + 1);
    let mut chi = Vec::with_capacity(samples + 1);
    let mut growth = Vec::with_capacity(samples + 1);
    let mut fields = Vec::with_capacity(samples + 1);
    let mut m_sup = 0.0f64;
    let mut max_res = 0.0f64;
    let h = grid.spacing();

    for k in 0..=samples {
        let t = cfg.h + (k * steps_per_sample) as f64 * dt;
        if k > 0 {
            stepper.advance(&mut u, steps_per_sample, t - steps_per_sample as f64 * dt).map_err(|e| Error::RunFailed {
                t,
                cause: Box::new(e),
                snapshot: format!("{guess:?}"),
            })?;
        }
        let uf = ComplexField { grid, values: u.clone() };
        let mut st = solve_orthogonality(&family, &uf, t, &guess, &cfg.newton).map_err(|e| Error::RunFailed {
            t,
            cause: Box::new(e),
            snapshot: format!("{guess:?}"),
        })?;
        if k == 0 {
            // ∫₀ʰ ω taken as ω(h)·h
            st.gamma = st.beta - st.omega * st.t;
        }
        let f = radiation(&family, &uf, &st)?;
        let (linf, l2) = (f.linf(), f.l2());
        let (lm, ln) = (lp_norm(&f.values, h, m_deg), lp_norm(&f.values, h, n_deg));
        m_sup = m_sup.max((lm + ln + linf) * japanese(t).powf(cfg.s));
        max_res = max_res.max(st.ortho_residuals.0.abs().max(st.ortho_residuals.1.abs()));
        chi.push(ChiSample { t, linf, l2, lm, ln, linf_plus: f64::NAN, m_sup });
        growth.push(growth_sample(t, &uf));
        trajectory.push(st);
        fields.push(f);
        guess = st;
    }

    let d = measured_rates(&trajectory);
    let rates: Vec<RateSample> =
        trajectory.iter().zip(&fields).zip(&d).map(|((st, f), r)| modulation_rates(f, st, *r, nl)).collect();

    let (limits, limits_error) = match limit_parameters(&trajectory) {
        Ok(l) => (Some(l), None),
        Err(e) => (None, Some(e.to_string())),
    };
    if let Some(lp) = &limits {
        let alpha_plus = 2.0 * (-lp.omega_plus).sqrt();
        let phi_plus = family.values(alpha_plus)?;
        for ((c, st), f) in chi.iter_mut().zip(&trajectory).zip(&fields) {
            // u = e^{−iβ}(φ(α) + f); compare with e^{−iβ₊}φ(α₊)
            let phi_now = family.values(st.alpha)?;
            let beta_plus = lp.omega_plus * st.t + lp.phase_offset;
            let r_now = Complex64::from_polar(1.0, -st.beta);
            let r_plus = Complex64::from_polar(1.0, -beta_plus);
            c.linf_plus = (0..grid.n())
                .map(|j| (r_now * (phi_now[j] + f.values[j]) - r_plus * phi_plus[j]).norm())
                .fold(0.0, f64::max);
        }
    }

    let t_from = cfg.h + cfg.transient_fraction * span;
    let linf_series: Vec<(f64, f64)> = chi.iter().map(|c| (c.t, c.linf)).collect();
    let decay = decay_fit(&linf_series, (t_from, cfg.t_end)).ok();
    let plus_series: Vec<(f64, f64)> = chi.iter().filter(|c| c.linf_plus.is_finite()).map(|c| (c.t, c.linf_plus)).collect();
    let decay_plus = decay_fit(&plus_series, (t_from, cfg.t_end)).ok();
    let chi_monotone = windowed_non_increasing(&linf_series, t_from, 6, 0.05);
    let uf = ComplexField { grid, values: u };
    Ok(ExperimentResult {
        config: cfg.clone(),
        dt,
        dt_calibration_error: cal_err,
        spectral_verdict,
        trajectory,
        chi,
        rates,
        growth,
        m_sup,
        limits,
        limits_error,
        decay_fit: decay,
        decay_fit_plus: decay_plus,
        chi_monotone,
        max_ortho_residual: max_res,
        mass_initial,
        mass_final: mass(&uf),
        energy_initial,
        energy_final: energy(&uf, nl),
        outside_perturbative_regime: cfg.perturbation.amplitude > PERTURBATIVE_AMPLITUDE,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// Weighted growth

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrowthReport {
    pub q_x_u: f64,
    pub q_x_du: f64,
    pub q_x2_u: f64,
    pub delta: f64,
    pub window: (f64, f64),
    pub pass: bool,
}

/// Exponent `q` of `C(1 + t^q)` growth: least-squares slope of `ln y`
/// against `ln(1 + t)` on the late half of the window in `ln t`.
pub fn growth_exponent(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let mid = (window.0.max(1e-12).ln() + window.1.ln()) / 2.0;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= mid.exp() && *t <= window.1)
        .map(|(t, y)| ((1.0 + t).ln(), y.ln()))
        .collect();
    if pts.len() < 3 || pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::InsufficientHorizon(format!("{} usable growth samples", pts.len())));
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(if sxx > 0.0 { sxy / sxx } else { 0.0 })
}

/// Growth exponents of the weighted norms, passing when they stay within
/// `δ = 0.25` of `1`, `3` and `4`.
pub fn wellposedness_growth_check(series: &[GrowthSample], window: (f64, f64)) -> Result<GrowthReport> {
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return Err(Error::InsufficientHorizon("empty series".into()));
    };
    if last.t < 2.0 * first.t.max(window.0) {
        return Err(Error::InsufficientHorizon(format!("T = {} < 2h", last.t)));
    }
    let pick = |f: fn(&GrowthSample) -> f64| series.iter().map(|s| (s.t, f(s))).collect::<Vec<_>>();
    let q1 = growth_exponent(&pick(|s| s.x_u), window)?;
    let q2 = growth_exponent(&pick(|s| s.x_du), window)?;
    let q3 = growth_exponent(&pick(|s| s.x2_u), window)?;
    let delta = 0.25;
    Ok(GrowthReport {
        q_x_u: q1,
        q_x_du: q2,
        q_x2_u: q3,
        delta,
        window,
        pass: q1 <= 1.0 + delta && q2 <= 3.0 + delta && q3 <= 4.0 + delta,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersiveRun {
    pub growth: Vec<GrowthSample>,
    pub mass_drift: f64,
}

/// Plain evolution of `u0` from `t = 0`, recording weighted norms every
/// `sample_interval`.
pub fn run_dispersive(
    u0: &ComplexField,
    nl: &NonlinearitySpec,
    dt: f64,
    t_end: f64,
    sample_interval: f64,
) -> Result<DispersiveRun> {
    let per = (sample_interval / dt).round().max(1.0) as usize;
    let samples = (t_end / (per as f64 * dt)).round() as usize;
    let st = SplitStepper::new(u0.grid, nl.clone(), dt, None)?;
    let mut u = u0.values.clone();
    let m0 = mass(u0);
    let mut growth = vec![growth_sample(0.0, u0)];
    for k in 1..=samples {
        st.advance(&mut u, per, ((k - 1) * per) as f64 * dt)?;
        let t = (k * per) as f64 * dt;
        growth.push(growth_sample(t, &ComplexField { grid: u0.grid, values: u.clone() }));
    }
    let mf = mass(&ComplexField { grid: u0.grid, values: u });
    Ok(DispersiveRun { growth, mass_drift: (mf - m0).abs() / m0 })
}
