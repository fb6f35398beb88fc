//! Contour-integral functional calculus for the linearized operator.
//!
//! `Γ` is a pair of wedges around the two halves of the essential spectrum,
//! `±(a + t(1 ± iε))`, `t ≥ 0`, each positively oriented. Powers use the
//! branch `λ^q = exp(q(ln|λ| + i arg λ))` with `arg λ ∈ (−π/2, 3π/2]`, whose
//! cut (the negative imaginary axis) runs between the wedges. On the left
//! wedge this gives `(−τ−k²)^q = (τ+k²)^q e^{iπq}`.
//!
//! Quadrature is composite Gauss–Legendre on geometrically growing panels
//! out to `|λ| ≈ R`. The remainder of each ray is integrated exactly term by
//! term through the Neumann series `(λ−H)^{-1} = Σ H^n λ^{-n-1}`, which
//! converges for `|λ| > ‖H‖`.

use std::f64::consts::PI;

use faer::{c64, Mat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fft_in_place, ifft_in_place, l2_norm, SpinorField};
use crate::linop::{LinearizedOperator, SpectralReport};
use crate::par::{self, pairwise_sum, Execution};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `λ^q` on the branch with cut along the negative imaginary axis.
pub fn branch_pow(lambda: Complex64, q: f64) -> Complex64 {
    let mut arg = lambda.im.atan2(lambda.re);
    if arg <= -PI / 2.0 {
        arg += 2.0 * PI;
    }
    (q * Complex64::new(lambda.norm().ln(), arg)).exp()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

// ---------------------------------------------------------------------------
// Resolvent

/// Diagonal of `(λ − H₀)^{-1}` in Fourier space, `(upper, lower)`.
fn free_resolvent_symbol(h: &LinearizedOperator, lambda: Complex64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let scale = 1.0 + lambda.norm();
    let mut up = Vec::with_capacity(h.grid.n());
    let mut lo = Vec::with_capacity(h.grid.n());
    for &k2 in h.ksq() {
        let e = h.tau + k2;
        let (a, b) = (lambda - e, lambda + e);
        if a.norm() < 1e-13 * scale || b.norm() < 1e-13 * scale {
            return Err(Error::LambdaOnSpectrum(format!("lambda = {lambda} hits the free spectrum")));
        }
        up.push(1.0 / a);
        lo.push(1.0 / b);
    }
    Ok((up, lo))
}

fn apply_symbol(v: &[Complex64], sym: &(Vec<Complex64>, Vec<Complex64>)) -> Vec<Complex64> {
    let n = sym.0.len();
    let mut out = v.to_vec();
    for (half, s) in [(0usize, &sym.0), (1, &sym.1)] {
        let buf = &mut out[half * n..(half + 1) * n];
        fft_in_place(buf);
        for (b, m) in buf.iter_mut().zip(s.iter()) {
            *b *= *m;
        }
        ifft_in_place(buf);
    }
    out
}

fn potential_stacked(h: &LinearizedOperator, v: &[Complex64]) -> Vec<Complex64> {
    let n = h.grid.n();
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * n];
    for j in 0..n {
        let (u, l) = (v[j], v[n + j]);
        out[j] = h.v1[j] * u + h.v2[j] * l;
        out[n + j] = -h.v2[j] * u - h.v1[j] * l;
    }
    out
}

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Restarted GMRES for `A y = b`.
fn gmres(
    op: &dyn Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    x0: Option<Vec<Complex64>>,
    tol: f64,
    restart: usize,
    max_restarts: usize,
) -> (Vec<Complex64>, f64) {
    let n = b.len();
    let bnorm = vnorm(b);
    let mut x = x0.unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); n]);
    if bnorm == 0.0 {
        return (vec![Complex64::new(0.0, 0.0); n], 0.0);
    }
    let mut rel = f64::INFINITY;
    for _ in 0..max_restarts {
        let ax = op(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let beta = vnorm(&r);
        rel = beta / bnorm;
        if rel <= tol {
            return (x, rel);
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut hess: Vec<Vec<Complex64>> = Vec::new();
        let mut cs: Vec<(Complex64, Complex64)> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = op(&basis[k]);
            let mut col = vec![Complex64::new(0.0, 0.0); k + 2];
            for _pass in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let hij = dot(q, &w);
                    col[i] += hij;
                    for (wj, qj) in w.iter_mut().zip(q) {
                        *wj -= hij * qj;
                    }
                }
            }
            let hn = vnorm(&w);
            col[k + 1] = Complex64::new(hn, 0.0);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let a = col[i];
                let bb = col[i + 1];
                col[i] = c.conj() * a + s.conj() * bb;
                col[i + 1] = -s * a + c * bb;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let d = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if d == 0.0 {
                (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
            } else {
                (a / d, bb / d)
            };
            col[k] = Complex64::new(d, 0.0);
            col[k + 1] = Complex64::new(0.0, 0.0);
            cs.push((c, s));
            let gk = g[k];
            g[k] = c.conj() * gk;
            g.push(-s * gk);
            hess.push(col);
            k_used = k + 1;
            let res = g[k + 1].norm() / bnorm;
            if res <= tol || hn <= 1e-300 {
                break;
            }
            basis.push(w.iter().map(|z| z / hn).collect());
        }
        // back substitution
        let m = k_used;
        let mut ycoef = vec![Complex64::new(0.0, 0.0); m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for j in i + 1..m {
                acc -= hess[j][i] * ycoef[j];
            }
            ycoef[i] = acc / hess[i][i];
        }
        for (j, yc) in ycoef.iter().enumerate() {
            for (xi, qi) in x.iter_mut().zip(&basis[j]) {
                *xi += yc * qi;
            }
        }
    }
    let ax = op(&x);
    let r: Vec<Complex64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    rel = rel.min(vnorm(&r) / bnorm);
    (x, rel)
}

/// `(λ − H) y` on stacked vectors.
fn shifted_apply(h: &LinearizedOperator, lambda: Complex64, y: &[Complex64]) -> Vec<Complex64> {
    let s = SpinorField::from_vec(h.grid, y);
    let hy = h.apply(&s).to_vec();
    y.iter().zip(&hy).map(|(a, b)| lambda * a - b).collect()
}

/// Relative residual demanded of every resolvent solve.
pub const RESOLVENT_TOL: f64 = 1e-10;

fn resolvent_stacked(h: &LinearizedOperator, lambda: Complex64, x: &[Complex64]) -> Result<Vec<Complex64>> {
    let sym = free_resolvent_symbol(h, lambda)?;
    let xnorm = vnorm(x);
    if xnorm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); x.len()]);
    }
    if h.is_free() {
        return Ok(apply_symbol(x, &sym));
    }
    let op = |v: &[Complex64]| -> Vec<Complex64> {
        let r0v = apply_symbol(&potential_stacked(h, v), &sym);
        v.iter().zip(&r0v).map(|(a, b)| a - b).collect()
    };
    let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
    let mut rhs = x.to_vec();
    for _ in 0..4 {
        let b = apply_symbol(&rhs, &sym);
        let (dy, _) = gmres(&op, &b, None, 1e-13, 120, 8);
        for (yi, d) in y.iter_mut().zip(&dy) {
            *yi += d;
        }
        let ly = shifted_apply(h, lambda, &y);
        rhs = x.iter().zip(&ly).map(|(a, b)| a - b).collect();
        let res = vnorm(&rhs) / xnorm;
        if res < RESOLVENT_TOL {
            return Ok(y);
        }
        if !res.is_finite() {
            break;
        }
    }
    let res = vnorm(&rhs) / xnorm;
    Err(Error::LambdaOnSpectrum(format!(
        "resolvent solve at lambda = {lambda} stalled at relative residual {res:.2e}"
    )))
}

/// `y = (λ − H)^{-1} x` with `‖(λ−H)y − x‖ < 1e-10 ‖x‖`.
pub fn resolvent_apply(h: &LinearizedOperator, lambda: Complex64, x: &SpinorField) -> Result<SpinorField> {
    let y = resolvent_stacked(h, lambda, &x.to_vec())?;
    Ok(SpinorField::from_vec(h.grid, &y))
}

// ---------------------------------------------------------------------------
// Contour

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContourOptions {
    pub eps: f64,
    /// Apex of the right wedge; chosen from the gap spectrum when `None`.
    pub a: Option<f64>,
    pub panel_ratio: f64,
    pub nodes_per_panel: usize,
    /// Length of the first panel; `min(a, τ−a)/2` when `None`.
    pub first_panel: Option<f64>,
    /// Quadrature stops at `|λ| ≈ radius_factor · ‖H‖`.
    pub radius_factor: f64,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            eps: 0.2,
            a: None,
            panel_ratio: 1.5,
            nodes_per_panel: 20,
            first_panel: None,
            radius_factor: 4.0,
        }
    }
}

impl ContourOptions {
    /// Same contour with every panel split in two.
    pub fn refined(&self) -> Self {
        Self {
            panel_ratio: self.panel_ratio.sqrt(),
            first_panel: self.first_panel.map(|f| f / 2.0),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContourNode {
    pub lambda: Complex64,
    /// `dλ` quadrature weight including orientation.
    pub weight: Complex64,
    /// `λ^{s/2−1}` when the contour was built for a given `s`.
    pub branch_value: Complex64,
}

/// Far end of a truncated ray; `sign = +1` if the ray runs outward.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailEnd {
    pub lambda: Complex64,
    pub sign: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Contour {
    pub a: f64,
    pub eps: f64,
    pub tau: f64,
    pub s: Option<f64>,
    /// Radius where quadrature hands over to the Neumann tail.
    pub radius: f64,
    /// `‖H‖` bound used for the tail.
    pub norm_bound: f64,
    /// Neumann terms kept in the tail.
    pub neumann_terms: usize,
    /// Bound on the dropped Neumann remainder relative to `‖y‖ R^{p}`.
    pub neumann_remainder: f64,
    /// Radius at which the plain truncation bound `R^{s/2−1}/(1−s/2)`
    /// drops below `tol` (the size a truncated contour would need).
    pub truncation_radius: Option<f64>,
    pub tol: f64,
    pub options: ContourOptions,
    pub nodes: Vec<ContourNode>,
    pub tails: Vec<TailEnd>,
    #[serde(skip, default = "Execution::available")]
    pub exec: Execution,
}

/// Chunk size for deterministic node summation.
const CHUNK: usize = 32;

pub fn check_s(s: f64) -> Result<()> {
    if !(s > 0.5 && s < 2.0) {
        return Err(Error::SOutOfRange(s));
    }
    Ok(())
}

/// Builds `Γ` for `h`, placing the apex between the gap spectrum and `τ`.
pub fn build_contour(
    h: &LinearizedOperator,
    s: Option<f64>,
    tol: f64,
    report: Option<&SpectralReport>,
    opts: ContourOptions,
) -> Result<Contour> {
    if let Some(s) = s {
        check_s(s)?;
    }
    let tau = h.tau;
    let gap = report.map(|r| r.discrete_eigs.clone()).unwrap_or_default();
    let max_re = gap.iter().fold(0.0f64, |m, l| m.max(l.re.abs()));
    if tau - max_re < 1e-3 * tau {
        return Err(Error::NoAdmissibleContour(format!(
            "gap eigenvalue with |Re| = {max_re:.6} crowds tau = {tau}"
        )));
    }
    let a = opts.a.unwrap_or(0.5 * (max_re + tau));
    if !(a > max_re && a < tau) {
        return Err(Error::NoAdmissibleContour(format!(
            "requested a = {a} not in ({max_re}, {tau})"
        )));
    }
    let eps = opts.eps;
    let contour_template = |l: Complex64| {
        let inside = |z: Complex64| z.re > a && z.im.abs() < eps * (z.re - a);
        inside(l) || inside(-l)
    };
    if let Some(bad) = gap.iter().find(|l| contour_template(**l)) {
        return Err(Error::NoAdmissibleContour(format!("gap eigenvalue {bad} enclosed by Γ")));
    }

    let norm_bound = h.norm_bound();
    let radius = opts.radius_factor * norm_bound.max(tau);
    let q = 1.0 / opts.radius_factor;
    let neumann_terms = ((1e-17f64).ln() / q.ln()).ceil() as usize;
    let neumann_remainder = q.powi(neumann_terms as i32 + 1) / (1.0 - q);

    let first = opts.first_panel.unwrap_or(0.5 * a.min(tau - a));
    let t_end = radius;
    let mut breaks = vec![0.0, first];
    while *breaks.last().unwrap() < t_end {
        let next = breaks.last().unwrap() * opts.panel_ratio;
        breaks.push(next.min(t_end));
    }
    let (gx, gw) = gauss_legendre(opts.nodes_per_panel);

    // (apex, direction, sign): sign +1 for rays traversed outward.
    let rays = [
        (Complex64::new(a, 0.0), Complex64::new(1.0, -eps), 1.0),
        (Complex64::new(a, 0.0), Complex64::new(1.0, eps), -1.0),
        (Complex64::new(-a, 0.0), Complex64::new(-1.0, eps), 1.0),
        (Complex64::new(-a, 0.0), Complex64::new(-1.0, -eps), -1.0),
    ];
    let mut nodes = Vec::new();
    let mut tails = Vec::new();
    for &(apex, dir, sign) in &rays {
        for w in breaks.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let half = 0.5 * (t1 - t0);
            let mid = 0.5 * (t1 + t0);
            for (x, wt) in gx.iter().zip(&gw) {
                let t = mid + half * x;
                let lambda = apex + dir * t;
                nodes.push(ContourNode {
                    lambda,
                    weight: dir * (sign * half * wt),
                    branch_value: s.map_or(Complex64::new(0.0, 0.0), |s| branch_pow(lambda, s / 2.0 - 1.0)),
                });
            }
        }
        tails.push(TailEnd { lambda: apex + dir * t_end, sign });
    }
    let truncation_radius = s.map(|s| {
        let e = s / 2.0 - 1.0;
        (tol * (1.0 - s / 2.0)).powf(1.0 / e)
    });
    Ok(Contour {
        a,
        eps,
        tau,
        s,
        radius,
        norm_bound,
        neumann_terms,
        neumann_remainder,
        truncation_radius,
        tol,
        options: opts,
        nodes,
        tails,
        exec: Execution::available(),
    })
}

impl Contour {
    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Whether `z` lies in the region enclosed by `Γ` (the essential side).
    pub fn encloses(&self, z: Complex64) -> bool {
        let inside = |w: Complex64| w.re > self.a && w.im.abs() < self.eps * (w.re - self.a);
        inside(z) || inside(-z)
    }

    /// Numerical winding number of `Γ` about `z` from `∮ dλ/(λ−z)`, with
    /// the wedge tails closed at infinity.
    pub fn winding_number(&self, z: Complex64) -> f64 {
        let mut acc: Complex64 = self.nodes.iter().map(|nd| nd.weight / (nd.lambda - z)).sum();
        // Each wedge's far ends are joined by an arc at infinity; the two
        // rays' log terms combine into the arc angle.
        for pair in self.tails.chunks(2) {
            let (out, back) = (pair[0].lambda - z, pair[1].lambda - z);
            let mut d = (back / out).arg();
            if d < 0.0 {
                d += 2.0 * PI;
            }
            acc += I * d;
        }
        (acc / (2.0 * PI * I)).re
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn tail_coeffs(&self, p: f64, extra: usize, n: usize) -> Complex64 {
        // ∫_tail λ^{p − n − extra} dλ over all rays
        let q = p - n as f64 - extra as f64;
        self.tails
            .iter()
            .map(|t| -t.sign * branch_pow(t.lambda, q + 1.0) / (q + 1.0))
            .sum()
    }

    /// `(1/2πi) ∫_Γ λ^p (λ−H)^{-1} y dλ` for each `y`. With
    /// `subtract_leading` the integrand is `λ^p[(λ−H)^{-1} − λ^{-1}] y`.
    pub fn resolvent_integral(
        &self,
        h: &LinearizedOperator,
        p: f64,
        ys: &[SpinorField],
        subtract_leading: bool,
    ) -> Result<Vec<SpinorField>> {
        let n0 = usize::from(subtract_leading);
        if p - n0 as f64 >= 0.0 {
            return Err(Error::Precondition(format!("power {p} too large for a convergent tail")));
        }
        let ystk: Vec<Vec<Complex64>> = ys.iter().map(|y| y.to_vec()).collect();
        let chunks: Vec<&[ContourNode]> = self.nodes.chunks(CHUNK).collect();
        let partial = par::map(self.exec, &chunks, |chunk| -> Result<Vec<Vec<Complex64>>> {
            let mut acc: Vec<Vec<Complex64>> = ystk.iter().map(|y| vec![Complex64::new(0.0, 0.0); y.len()]).collect();
            for nd in chunk.iter() {
                let c = nd.weight * branch_pow(nd.lambda, p);
                for (a, y) in acc.iter_mut().zip(&ystk) {
                    let z = resolvent_stacked(h, nd.lambda, y)?;
                    if subtract_leading {
                        let inv = 1.0 / nd.lambda;
                        for ((ai, zi), yi) in a.iter_mut().zip(&z).zip(y) {
                            *ai += c * (zi - inv * yi);
                        }
                    } else {
                        for (ai, zi) in a.iter_mut().zip(&z) {
                            *ai += c * zi;
                        }
                    }
                }
            }
            Ok(acc)
        });
        let partial: Vec<Vec<Vec<Complex64>>> = partial.into_iter().collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(ys.len());
        for (r, y) in ys.iter().enumerate() {
            let parts: Vec<Vec<Complex64>> = partial.iter().map(|p| p[r].clone()).collect();
            let mut sum = pairwise_sum(parts);
            // Neumann tail: Σ_n H^n y ∫ λ^{p−n−1}
            let pw = h.powers(y, self.neumann_terms + n0);
            for (nn, hy) in pw.iter().enumerate().skip(n0) {
                let c = self.tail_coeffs(p, 1, nn);
                for (si, v) in sum.iter_mut().zip(hy.to_vec()) {
                    *si += c * v;
                }
            }
            let scale = 1.0 / (2.0 * PI * I);
            out.push(SpinorField::from_vec(h.grid, &sum.iter().map(|v| v * scale).collect::<Vec<_>>()));
        }
        Ok(out)
    }

    /// `(1/2πi) ∫_Γ λ^p (λ−H)^{-1} M (λ−H)^{-1} y dλ`, `M` a pointwise
    /// 2×2 multiplier `[[m11, m12], [m21, m22]]`.
    pub fn sandwich_integral(
        &self,
        h: &LinearizedOperator,
        p: f64,
        m: &PointwiseMatrix,
        ys: &[SpinorField],
    ) -> Result<Vec<SpinorField>> {
        if p - 1.0 >= 0.0 {
            return Err(Error::Precondition(format!("power {p} too large for a convergent tail")));
        }
        let grid = h.grid;
        let ystk: Vec<Vec<Complex64>> = ys.iter().map(|y| y.to_vec()).collect();
        let chunks: Vec<&[ContourNode]> = self.nodes.chunks(CHUNK).collect();
        let partial = par::map(self.exec, &chunks, |chunk| -> Result<Vec<Vec<Complex64>>> {
            let mut acc: Vec<Vec<Complex64>> = ystk.iter().map(|y| vec![Complex64::new(0.0, 0.0); y.len()]).collect();
            for nd in chunk.iter() {
                let c = nd.weight * branch_pow(nd.lambda, p);
                for (a, y) in acc.iter_mut().zip(&ystk) {
                    let z1 = resolvent_stacked(h, nd.lambda, y)?;
                    let mz = m.apply_stacked(&z1);
                    let z2 = resolvent_stacked(h, nd.lambda, &mz)?;
                    for (ai, zi) in a.iter_mut().zip(&z2) {
                        *ai += c * zi;
                    }
                }
            }
            Ok(acc)
        });
        let partial: Vec<Vec<Vec<Complex64>>> = partial.into_iter().collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(ys.len());
        for (r, y) in ys.iter().enumerate() {
            let parts: Vec<Vec<Complex64>> = partial.iter().map(|p| p[r].clone()).collect();
            let mut sum = pairwise_sum(parts);
            // T_0 = M y, T_n = H T_{n-1} + M H^n y, weight ∫ λ^{p−n−2}
            let pw = h.powers(y, self.neumann_terms);
            let mut t = m.apply(&pw[0]);
            for nn in 0..=self.neumann_terms {
                if nn > 0 {
                    t = h.apply(&t).add(&m.apply(&pw[nn]));
                }
                let c = self.tail_coeffs(p, 2, nn);
                for (si, v) in sum.iter_mut().zip(t.to_vec()) {
                    *si += c * v;
                }
            }
            let scale = 1.0 / (2.0 * PI * I);
            out.push(SpinorField::from_vec(grid, &sum.iter().map(|v| v * scale).collect::<Vec<_>>()));
        }
        Ok(out)
    }
}

/// Pointwise 2×2 complex multiplier.
#[derive(Debug, Clone)]
pub struct PointwiseMatrix {
    pub m11: Vec<Complex64>,
    pub m12: Vec<Complex64>,
    pub m21: Vec<Complex64>,
    pub m22: Vec<Complex64>,
}

impl PointwiseMatrix {
    pub fn apply(&self, x: &SpinorField) -> SpinorField {
        x.map_pointwise(|j, u, l| (self.m11[j] * u + self.m12[j] * l, self.m21[j] * u + self.m22[j] * l))
    }

    fn apply_stacked(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.m11.len();
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * n];
        for j in 0..n {
            let (u, l) = (v[j], v[n + j]);
            out[j] = self.m11[j] * u + self.m12[j] * l;
            out[n + j] = self.m21[j] * u + self.m22[j] * l;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Functions of H

/// `H^{s/2} x = (1/2πi) ∫ λ^{s/2−1} (λ−H)^{-1} H x dλ`.
pub fn fractional_power_apply(h: &LinearizedOperator, s: f64, x: &SpinorField, gamma: &Contour) -> Result<SpinorField> {
    Ok(fractional_power_batch(h, s, std::slice::from_ref(x), gamma)?.remove(0))
}

pub fn fractional_power_batch(
    h: &LinearizedOperator,
    s: f64,
    xs: &[SpinorField],
    gamma: &Contour,
) -> Result<Vec<SpinorField>> {
    check_s(s)?;
    let hx: Vec<SpinorField> = xs.iter().map(|x| h.apply(x)).collect();
    gamma.resolvent_integral(h, s / 2.0 - 1.0, &hx, false)
}

/// Cross-check form `(1/2πi) ∫ λ^{s/2} [(λ−H)^{-1} − λ^{-1}] x dλ`.
pub fn fractional_power_apply_shifted(
    h: &LinearizedOperator,
    s: f64,
    x: &SpinorField,
    gamma: &Contour,
) -> Result<SpinorField> {
    check_s(s)?;
    Ok(gamma.resolvent_integral(h, s / 2.0, std::slice::from_ref(x), true)?.remove(0))
}

/// `[H]^β x = (1/2πi) ∫ λ^β (λ−H)^{-1} x dλ`, `β < 0`.
pub fn negative_power_apply(h: &LinearizedOperator, beta: f64, x: &SpinorField, gamma: &Contour) -> Result<SpinorField> {
    Ok(negative_power_batch(h, beta, std::slice::from_ref(x), gamma)?.remove(0))
}

pub fn negative_power_batch(
    h: &LinearizedOperator,
    beta: f64,
    xs: &[SpinorField],
    gamma: &Contour,
) -> Result<Vec<SpinorField>> {
    if !(beta < 0.0) {
        return Err(Error::Precondition(format!("negative power needs beta < 0, got {beta}")));
    }
    gamma.resolvent_integral(h, beta, xs, false)
}

/// `P_c x = (1/2πi) ∫ λ^{-1} (λ−H)^{-1} H x dλ`.
pub struct ContinuousProjector<'a> {
    pub h: &'a LinearizedOperator,
    pub gamma: &'a Contour,
}

pub fn continuous_projector<'a>(h: &'a LinearizedOperator, gamma: &'a Contour) -> ContinuousProjector<'a> {
    ContinuousProjector { h, gamma }
}

impl ContinuousProjector<'_> {
    pub fn apply(&self, x: &SpinorField) -> Result<SpinorField> {
        Ok(self.apply_batch(std::slice::from_ref(x))?.remove(0))
    }

    pub fn apply_batch(&self, xs: &[SpinorField]) -> Result<Vec<SpinorField>> {
        let hx: Vec<SpinorField> = xs.iter().map(|x| self.h.apply(x)).collect();
        self.gamma.resolvent_integral(self.h, -1.0, &hx, false)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FreeComparison {
    /// `‖H^{s/2}x − H₀^{s/2}x‖₂ / ‖x‖₂`
    pub over_l2: f64,
    /// `‖H^{s/2}x − H₀^{s/2}x‖₂ / ‖x‖_∞`
    pub over_linf: f64,
}

pub fn compare_to_free(h: &LinearizedOperator, s: f64, x: &SpinorField, gamma: &Contour) -> Result<FreeComparison> {
    let (n2, ninf) = (x.l2(), x.linf());
    if n2 == 0.0 {
        return Ok(FreeComparison { over_l2: 0.0, over_linf: 0.0 });
    }
    let hs = fractional_power_apply(h, s, x, gamma)?;
    let h0 = h.free_part();
    let h0s = fractional_power_apply(&h0, s, x, gamma)?;
    let d = hs.sub(&h0s).l2();
    Ok(FreeComparison { over_l2: d / n2, over_linf: d / ninf })
}

/// Exact `H₀^{q}` by its Fourier symbol `((τ+k²)^q, (−τ−k²)^q)` on the
/// contour branch.
pub fn free_power_symbol(h0: &LinearizedOperator, q: f64, x: &SpinorField) -> SpinorField {
    let up: Vec<Complex64> = h0.ksq().iter().map(|k2| branch_pow(Complex64::new(h0.tau + k2, 0.0), q)).collect();
    let lo: Vec<Complex64> = h0.ksq().iter().map(|k2| branch_pow(Complex64::new(-h0.tau - k2, 0.0), q)).collect();
    let out = apply_symbol(&x.to_vec(), &(up, lo));
    SpinorField::from_vec(h0.grid, &out)
}

// ---------------------------------------------------------------------------
// Resolvent norms

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResolventProbe {
    pub lambda: Complex64,
    pub norm_2to2: f64,
    /// `(Re√(τ−λ))^{-2} + (Re√(λ+τ))^{-2}`, without the constant.
    pub bound_rhs: f64,
    /// `‖(λ − H₀)^{-1}‖₂` for the continuous free operator.
    pub free_norm: f64,
}

pub fn resolvent_bound_shape(tau: f64, lambda: Complex64) -> f64 {
    let a = (Complex64::new(tau, 0.0) - lambda).sqrt().re;
    let b = (lambda + tau).sqrt().re;
    a.powi(-2) + b.powi(-2)
}

/// `1/dist(λ, (−∞,−τ] ∪ [τ,∞))`.
pub fn free_resolvent_norm(tau: f64, lambda: Complex64) -> f64 {
    let d = |c: f64, dir: f64| {
        let proj = (lambda.re * dir).max(c);
        (lambda - Complex64::new(proj * dir, 0.0)).norm()
    };
    1.0 / d(tau, 1.0).min(d(tau, -1.0))
}

/// `‖(λ−H)^{-1}‖₂` from the smallest singular value of the dense matrix.
pub fn resolvent_norm_dense(h: &LinearizedOperator, lambda: Complex64) -> Result<f64> {
    let m = h.dense_matrix();
    let n = m.nrows();
    let shifted = Mat::<c64>::from_fn(n, n, |i, j| {
        let v = Complex64::new(-m[(i, j)], 0.0);
        if i == j {
            v + lambda
        } else {
            v
        }
    });
    let sv = shifted.singular_values().map_err(|e| Error::EigenSolver(format!("{e:?}")))?;
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        return Err(Error::LambdaOnSpectrum(format!("singular at {lambda}")));
    }
    Ok(1.0 / smin)
}

pub fn resolvent_probe(h: &LinearizedOperator, lambda: Complex64) -> Result<ResolventProbe> {
    Ok(ResolventProbe {
        lambda,
        norm_2to2: resolvent_norm_dense(h, lambda)?,
        bound_rhs: resolvent_bound_shape(h.tau, lambda),
        free_norm: free_resolvent_norm(h.tau, lambda),
    })
}

/// Contour points where the free resolvent controls the potential:
/// `‖(λ−H₀)^{-1}‖ ‖V‖_∞ ≤ 1/2`.
pub fn gamma_one(h: &LinearizedOperator, gamma: &Contour) -> Vec<Complex64> {
    let v = h.potential_sup();
    gamma
        .nodes
        .iter()
        .map(|nd| nd.lambda)
        .filter(|&l| free_resolvent_norm(h.tau, l) * v <= 0.5)
        .collect()
}

/// Smallest `c` with `norm ≤ c · bound_rhs` over the sample.
pub fn fit_resolvent_constant(probes: &[ResolventProbe]) -> f64 {
    probes.iter().fold(0.0, |m, p| m.max(p.norm_2to2 / p.bound_rhs))
}

/// Relative `L²` distance helper for spinors.
pub fn rel_diff(a: &SpinorField, b: &SpinorField) -> f64 {
    let d = a.sub(b).l2();
    let s = b.l2().max(1e-300);
    d / s
}

/// `‖x‖₂` of a stacked vector with grid spacing.
pub fn stacked_l2(v: &[Complex64], h: f64) -> f64 {
    l2_norm(v, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn gl_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((s - 2.0 / 39.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn branch_values() {
        let z = branch_pow(Complex64::new(-4.0, 0.0), 0.5);
        assert!((z - Complex64::new(0.0, 2.0)).norm() < 1e-14);
        let z = branch_pow(Complex64::new(-4.0, -1e-12), 0.5);
        assert!((z - Complex64::new(0.0, 2.0)).norm() < 1e-10);
        let z = branch_pow(Complex64::new(4.0, 0.0), 0.5);
        assert!((z - 2.0).norm() < 1e-14);
    }

    #[test]
    fn free_resolvent_plane_wave() {
        let g = make_grid(10.0, 64).unwrap();
        let h = LinearizedOperator::free(2.0, g);
        let k = g.wavenumbers()[4];
        let f: Vec<Complex64> = g.xs().iter().map(|&x| Complex64::from_polar(1.0, k * x)).collect();
        let x = SpinorField::new(g, f.clone(), vec![Complex64::new(0.0, 0.0); 64]).unwrap();
        let lam = Complex64::new(0.5, 1.0);
        let y = resolvent_apply(&h, lam, &x).unwrap();
        for j in 0..64 {
            assert!((y.upper[j] - f[j] / (lam - k * k - 1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn s_range() {
        let g = make_grid(10.0, 64).unwrap();
        let h = LinearizedOperator::free(2.0, g);
        assert!(matches!(
            build_contour(&h, Some(2.5), 1e-8, None, ContourOptions::default()),
            Err(Error::SOutOfRange(_))
        ));
    }

    #[test]
    fn winding_numbers() {
        let g = make_grid(10.0, 64).unwrap();
        let h = LinearizedOperator::free(2.0, g);
        let c = build_contour(&h, Some(1.5), 1e-8, None, ContourOptions::default()).unwrap();
        assert_eq!(c.a, 0.5);
        assert!((c.winding_number(Complex64::new(0.0, 0.0))).abs() < 1e-8);
        assert!((c.winding_number(Complex64::new(0.3, 0.1))).abs() < 1e-8);
        assert!((c.winding_number(Complex64::new(3.0, 0.0)) - 1.0).abs() < 1e-8);
        assert!((c.winding_number(Complex64::new(-30.0, 0.5)) - 1.0).abs() < 1e-8);
        assert!(c.encloses(Complex64::new(2.0, 0.0)) && !c.encloses(Complex64::new(0.0, 0.0)));
    }
}
