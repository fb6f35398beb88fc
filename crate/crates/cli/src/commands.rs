use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use nlslab::commutator::{b_apply, b_apply_defining, VectorFieldOp};
use nlslab::funcalc::{
    build_contour, compare_to_free, continuous_projector, fractional_power_apply, fractional_power_apply_shifted,
    rel_diff, Contour, FreeComparison,
};
use nlslab::linop::{assemble_h, discrete_spectrum, verify_assumption_a3, A3Options, LinearizedOperator, Verdict};
use nlslab::profile::ProfileFamily;
use nlslab::simulate::run_stability_experiment;
use nlslab::{make_grid, NonlinearitySpec, SolitonProfile, SpinorField};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::Config;
use crate::output::{OutputDir, RunManifest};

pub struct Common {
    pub config_path: Option<PathBuf>,
    pub output: PathBuf,
    pub subcommand: &'static str,
}

impl Common {
    fn manifest(&self, clock: Instant, seeds: Vec<u64>) -> RunManifest {
        RunManifest {
            config_path: self.config_path.as_ref().map(|p| p.display().to_string()),
            output_dir: String::new(),
            subcommand: self.subcommand.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time: clock.elapsed().as_secs_f64(),
            seeds,
            outputs: Vec::new(),
        }
    }

    fn load(&self) -> anyhow::Result<Config> {
        let cfg = Config::load(self.config_path.as_deref())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn profile_for(cfg: &Config) -> anyhow::Result<SolitonProfile> {
    let grid = make_grid(cfg.grid.half_width, cfg.grid.points)?;
    Ok(ProfileFamily::new(&cfg.nonlinearity, grid).profile(cfg.profile.alpha)?)
}

fn operator_for(cfg: &Config) -> anyhow::Result<(SolitonProfile, LinearizedOperator)> {
    let p = profile_for(cfg)?;
    let h = assemble_h(&p, &cfg.nonlinearity);
    Ok((p, h))
}

/// Smooth probe spinor projected onto the continuous subspace.
fn probe_spinor(h: &LinearizedOperator, gamma: &Contour) -> anyhow::Result<SpinorField> {
    let g = h.grid;
    let up = g.xs().iter().map(|x| Complex64::new((-x * x / 2.0).exp(), 0.3 * x * (-x * x / 4.0).exp())).collect();
    let lo = g.xs().iter().map(|x| Complex64::new(0.5 * (-(x - 1.0).powi(2)).exp(), 0.0)).collect();
    let x = SpinorField::new(g, up, lo)?;
    Ok(continuous_projector(h, gamma).apply(&x)?)
}

#[derive(Serialize)]
struct ProfileSummary {
    alpha: f64,
    tau: f64,
    omega: f64,
    phi_at_origin: f64,
    mass: f64,
    mass_dalpha: f64,
    residual: f64,
    source: nlslab::profile::ProfileSource,
    half_width: f64,
    points: usize,
}

pub struct ProfileArgs {
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub half_width: Option<f64>,
    pub points: Option<usize>,
}

pub fn profile(common: &Common, args: &ProfileArgs) -> anyhow::Result<()> {
    let clock = Instant::now();
    let mut cfg = Config::load(common.config_path.as_deref())?;
    if let Some(p) = args.p {
        cfg.nonlinearity = NonlinearitySpec::pure_power(p)?;
    }
    if let Some(a) = args.alpha {
        cfg.profile.alpha = a;
    }
    if let Some(l) = args.half_width {
        cfg.grid.half_width = l;
    }
    if let Some(n) = args.points {
        cfg.grid.points = n;
    }
    cfg.validate()?;
    let p = profile_for(&cfg)?;
    let mut out = OutputDir::create(&common.output)?;
    let xs = p.grid.xs();
    out.write_csv(
        "profile.csv",
        &["x", "phi", "phi_alpha"],
        (0..xs.len()).map(|j| vec![xs[j], p.phi[j], p.phi_alpha[j]]),
    )?;
    out.write_json(
        "profile.json",
        &ProfileSummary {
            alpha: p.alpha,
            tau: p.tau(),
            omega: p.omega,
            phi_at_origin: p.phi_at_origin(),
            mass: p.mass,
            mass_dalpha: p.mass_dalpha,
            residual: p.residual,
            source: p.source.clone(),
            half_width: p.grid.half_width,
            points: p.grid.points,
        },
    )?;
    out.finish(common.manifest(clock, Vec::new()))
}

pub fn spectrum(common: &Common, refine: bool) -> anyhow::Result<()> {
    let clock = Instant::now();
    let cfg = common.load()?;
    let (_, h) = operator_for(&cfg)?;
    let report = verify_assumption_a3(&h, Some(&cfg.nonlinearity), A3Options { refine, ..A3Options::default() })?;
    let mut out = OutputDir::create(&common.output)?;
    out.write_csv("discrete_eigs.csv", &["re", "im"], report.discrete_eigs.iter().map(|l| vec![l.re, l.im]))?;
    out.write_json("spectrum.json", &report)?;
    if let Some(Verdict::Fail { reasons }) = &report.assumption_a3_verdict {
        eprintln!("spectral hypothesis fails: {}", reasons.join("; "));
    }
    out.finish(common.manifest(clock, Vec::new()))
}

#[derive(Serialize)]
struct FracpowSummary {
    s: f64,
    contour_apex: f64,
    contour_eps: f64,
    contour_radius: f64,
    contour_nodes: usize,
    /// Relative gap between the standard and the shifted contour forms.
    shifted_rel_diff: f64,
    free_comparison: FreeComparison,
}

pub fn fracpow(common: &Common, s: Option<f64>) -> anyhow::Result<()> {
    let clock = Instant::now();
    let cfg = common.load()?;
    let s = s.unwrap_or(cfg.simulation.s);
    let (_, h) = operator_for(&cfg)?;
    let spectrum = discrete_spectrum(&h)?;
    let gam0 = build_contour(&h, None, cfg.tolerances.contour, Some(&spectrum), cfg.contour)?;
    let gam = build_contour(&h, Some(s), cfg.tolerances.contour, Some(&spectrum), cfg.contour)?;
    let x = probe_spinor(&h, &gam0)?;
    let y = fractional_power_apply(&h, s, &x, &gam)?;
    let y2 = fractional_power_apply_shifted(&h, s, &x, &gam)?;
    let free = compare_to_free(&h, s, &x, &gam)?;
    let mut out = OutputDir::create(&common.output)?;
    let xs = h.grid.xs();
    out.write_csv(
        "fracpow.csv",
        &["x", "re_x1", "im_x1", "re_x2", "im_x2", "re_y1", "im_y1", "re_y2", "im_y2"],
        (0..xs.len()).map(|j| {
            vec![
                xs[j],
                x.upper[j].re,
                x.upper[j].im,
                x.lower[j].re,
                x.lower[j].im,
                y.upper[j].re,
                y.upper[j].im,
                y.lower[j].re,
                y.lower[j].im,
            ]
        }),
    )?;
    out.write_json(
        "fracpow.json",
        &FracpowSummary {
            s,
            contour_apex: gam.a,
            contour_eps: gam.eps,
            contour_radius: gam.radius,
            contour_nodes: gam.len(),
            shifted_rel_diff: rel_diff(&y2, &y),
            free_comparison: free,
        },
    )?;
    out.finish(common.manifest(clock, Vec::new()))
}

#[derive(Serialize)]
struct CommutatorSummary {
    s: f64,
    t: f64,
    dt: f64,
    identity: nlslab::commutator::IdentityResidual,
    /// Relative gap between the two forms of `B(s)`.
    b_forms_rel_diff: f64,
}

pub fn commutator(common: &Common, s: Option<f64>, t: Option<f64>, dt: f64) -> anyhow::Result<()> {
    let clock = Instant::now();
    let cfg = common.load()?;
    let s = s.unwrap_or(cfg.simulation.s);
    let hstart = cfg.simulation.h;
    let t = t.unwrap_or(hstart);
    let (_, h) = operator_for(&cfg)?;
    let spectrum = discrete_spectrum(&h)?;
    let gam0 = build_contour(&h, None, cfg.tolerances.contour, Some(&spectrum), cfg.contour)?;
    let gam = build_contour(&h, Some(s), cfg.tolerances.contour, Some(&spectrum), cfg.contour)?;
    let x = probe_spinor(&h, &gam0)?;
    let op = VectorFieldOp::new(&h, &gam, s, t, hstart)?;
    let identity = op.commutator_identity(&x, dt)?;
    let b1 = b_apply(&h, s, &x, &gam)?;
    let b2 = b_apply_defining(&h, s, &x, &gam)?;
    let mut out = OutputDir::create(&common.output)?;
    out.write_json("commutator.json", &CommutatorSummary { s, t, dt, identity, b_forms_rel_diff: rel_diff(&b1, &b2) })?;
    out.finish(common.manifest(clock, Vec::new()))
}

pub const TRAJECTORY_HEADER: [&str; 12] = [
    "t",
    "beta",
    "omega",
    "gamma",
    "alpha",
    "chi_inf",
    "chi_l2",
    "ortho_r1",
    "ortho_r2",
    "rate_bound",
    "rate_measured",
    "Msup",
];

pub struct VerdictGrid {
    pub skip: bool,
    pub half_width: f64,
    pub points: usize,
}

pub fn simulate(common: &Common, verdict_grid: &VerdictGrid) -> anyhow::Result<()> {
    let clock = Instant::now();
    let cfg = common.load()?;
    let sim = cfg.simulation_config();
    let verdict = if verdict_grid.skip {
        None
    } else {
        let grid = make_grid(verdict_grid.half_width, verdict_grid.points)?;
        let p = ProfileFamily::new(&cfg.nonlinearity, grid).profile(sim.alpha0)?;
        let h = assemble_h(&p, &cfg.nonlinearity);
        verify_assumption_a3(&h, Some(&cfg.nonlinearity), A3Options::default())?.assumption_a3_verdict
    };
    let res = run_stability_experiment(&sim, verdict).context("stability run")?;
    let mut out = OutputDir::create(&common.output)?;
    out.write_csv(
        "trajectory.csv",
        &TRAJECTORY_HEADER,
        res.trajectory.iter().zip(&res.chi).zip(&res.rates).map(|((st, c), r)| {
            vec![
                st.t,
                st.beta,
                st.omega,
                st.gamma,
                st.alpha,
                c.linf,
                c.l2,
                st.ortho_residuals.0,
                st.ortho_residuals.1,
                r.bound,
                r.measured,
                c.m_sup,
            ]
        }),
    )?;
    out.write_csv(
        "chi.csv",
        &["t", "chi_inf", "chi_l2", "chi_lm", "chi_ln", "chi_plus_inf", "Msup"],
        res.chi.iter().map(|c| vec![c.t, c.linf, c.l2, c.lm, c.ln, c.linf_plus, c.m_sup]),
    )?;
    out.write_json("result.json", &res)?;
    out.finish(common.manifest(clock, vec![sim.perturbation.seed]))
}

pub fn check(common: &Common, print_defaults: bool) -> anyhow::Result<()> {
    if print_defaults {
        print!("{}", Config::default().to_toml());
        return Ok(());
    }
    common.load()?;
    println!(
        "config {} is consistent",
        common.config_path.as_deref().map(Path::display).map(|d| d.to_string()).unwrap_or("<defaults>".into())
    );
    Ok(())
}
