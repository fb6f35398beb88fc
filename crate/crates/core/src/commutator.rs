//! The vector field `|J_V(t)|^s = U(t)(t²H)^{s/2}U(−t)` and the pieces of
//! its commutator with `i∂_t − H`.
//!
//! `U(t) = diag(M(t), M(−t))` with `M(t) = e^{ix²/4t}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcalc::{branch_pow, fractional_power_batch, Contour, PointwiseMatrix};
use crate::grid::{derivative_in_place, derivative_real, fft_in_place, ifft_in_place, GridSpec, SpinorField};
use crate::linop::LinearizedOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `U(t)`
    Forward,
    /// `U(−t)`
    Backward,
}

/// `M(t)(x) = e^{ix²/4t}`.
pub fn m_factor(t: f64, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x * x / (4.0 * t))
}

/// `U(±t) f`; `|t|` must be at least the start time `h_start`.
pub fn u_apply(t: f64, f: &SpinorField, dir: Direction, h_start: f64) -> Result<SpinorField> {
    if !(t.abs() >= h_start) || t == 0.0 {
        return Err(Error::Precondition(format!("|t| = {} below start time {h_start}", t.abs())));
    }
    let tt = match dir {
        Direction::Forward => t,
        Direction::Backward => -t,
    };
    Ok(u_raw(tt, f))
}

fn u_raw(t: f64, f: &SpinorField) -> SpinorField {
    let g = f.grid;
    f.map_pointwise(|j, u, l| {
        let m = m_factor(t, g.x(j));
        (m * u, m.conj() * l)
    })
}

/// Smooth mask equal to 1 on `|x| ≤ 0.8L` and decaying to 0 at `±L`.
pub fn taper_mask(grid: &GridSpec) -> Vec<f64> {
    let l = grid.half_width;
    grid.xs()
        .iter()
        .map(|&x| {
            let r = (x.abs() - 0.8 * l) / (0.2 * l);
            if r <= 0.0 {
                1.0
            } else if r >= 1.0 {
                0.0
            } else {
                (0.5 * std::f64::consts::PI * r).cos().powi(2)
            }
        })
        .collect()
}

/// `x ∂ₓ f` componentwise with the tapered sawtooth `x`.
pub fn x_dx(f: &SpinorField) -> SpinorField {
    let grid = f.grid;
    let xw: Vec<f64> = grid.xs().iter().zip(taper_mask(&grid)).map(|(x, m)| x * m).collect();
    let mut up = f.upper.clone();
    let mut lo = f.lower.clone();
    derivative_in_place(&mut up, &grid, 1);
    derivative_in_place(&mut lo, &grid, 1);
    for j in 0..grid.n() {
        up[j] *= xw[j];
        lo[j] *= xw[j];
    }
    SpinorField { grid, upper: up, lower: lo, conjugate_symmetric: false }
}

/// `V₃ + 2τθ₃` with `V₃ = 2V + xV'`, `V = [[V1, V2], [−V2, −V1]]`.
pub fn b_multiplier(h: &LinearizedOperator) -> PointwiseMatrix {
    let g = h.grid;
    let xs = g.xs();
    let d1 = derivative_real(&h.v1, &g, 1);
    let d2 = derivative_real(&h.v2, &g, 1);
    let n = g.n();
    let mut m = PointwiseMatrix {
        m11: Vec::with_capacity(n),
        m12: Vec::with_capacity(n),
        m21: Vec::with_capacity(n),
        m22: Vec::with_capacity(n),
    };
    for j in 0..n {
        let w1 = 2.0 * h.v1[j] + xs[j] * d1[j];
        let w2 = 2.0 * h.v2[j] + xs[j] * d2[j];
        m.m11.push(Complex64::new(w1 + 2.0 * h.tau, 0.0));
        m.m12.push(Complex64::new(w2, 0.0));
        m.m21.push(Complex64::new(-w2, 0.0));
        m.m22.push(Complex64::new(-w1 - 2.0 * h.tau, 0.0));
    }
    m
}

/// `B(s) f` as the double-resolvent integral of `V₃ + 2τθ₃`.
pub fn b_apply(h: &LinearizedOperator, s: f64, f: &SpinorField, gamma: &Contour) -> Result<SpinorField> {
    Ok(b_apply_batch(h, s, std::slice::from_ref(f), gamma)?.remove(0))
}

pub fn b_apply_batch(h: &LinearizedOperator, s: f64, fs: &[SpinorField], gamma: &Contour) -> Result<Vec<SpinorField>> {
    crate::funcalc::check_s(s)?;
    gamma.sandwich_integral(h, s / 2.0, &b_multiplier(h), fs)
}

/// `B(s) f = s H^{s/2} f + [x∂ₓ, H^{s/2}] f`.
pub fn b_apply_defining(h: &LinearizedOperator, s: f64, f: &SpinorField, gamma: &Contour) -> Result<SpinorField> {
    Ok(b_apply_defining_batch(h, s, std::slice::from_ref(f), gamma)?.remove(0))
}

pub fn b_apply_defining_batch(
    h: &LinearizedOperator,
    s: f64,
    fs: &[SpinorField],
    gamma: &Contour,
) -> Result<Vec<SpinorField>> {
    let mut inputs: Vec<SpinorField> = fs.to_vec();
    inputs.extend(fs.iter().map(x_dx));
    let out = fractional_power_batch(h, s, &inputs, gamma)?;
    let n = fs.len();
    Ok((0..n)
        .map(|i| {
            let hs = &out[i];
            hs.scale(Complex64::new(s, 0.0)).add(&x_dx(hs)).sub(&out[n + i])
        })
        .collect())
}

/// `B(s)` for `V = 0` from its Fourier symbol
/// `(sτ(τ+k²)^{s/2−1}, sτ(τ+k²)^{s/2−1}e^{iπs/2})`.
pub fn b_free_symbol(h0: &LinearizedOperator, s: f64, f: &SpinorField) -> SpinorField {
    let tau = h0.tau;
    let phase = branch_pow(Complex64::new(-1.0, 0.0), s / 2.0);
    let mut up = f.upper.clone();
    let mut lo = f.lower.clone();
    fft_in_place(&mut up);
    fft_in_place(&mut lo);
    for (j, &k2) in h0.ksq().iter().enumerate() {
        let m = s * tau * (tau + k2).powf(s / 2.0 - 1.0);
        up[j] *= m;
        lo[j] *= m * phase;
    }
    ifft_in_place(&mut up);
    ifft_in_place(&mut lo);
    SpinorField { grid: f.grid, upper: up, lower: lo, conjugate_symmetric: false }
}

/// `[V, U(t)] f`: off-diagonal, both entries `V2 (M(−t) − M(t))`.
pub fn v_u_commutator(h: &LinearizedOperator, t: f64, f: &SpinorField) -> SpinorField {
    let g = h.grid;
    f.map_pointwise(|j, u, l| {
        let m = m_factor(t, g.x(j));
        let c = h.v2[j] * (m.conj() - m);
        (c * l, c * u)
    })
}

/// `|J_V(t)|^s` at fixed `(s, t)` for a given operator and contour.
#[derive(Debug, Clone, Copy)]
pub struct VectorFieldOp<'a> {
    pub s: f64,
    pub t: f64,
    pub h_start: f64,
    pub h: &'a LinearizedOperator,
    pub contour: &'a Contour,
}

impl<'a> VectorFieldOp<'a> {
    pub fn new(h: &'a LinearizedOperator, contour: &'a Contour, s: f64, t: f64, h_start: f64) -> Result<Self> {
        crate::funcalc::check_s(s)?;
        if !(t >= h_start) {
            return Err(Error::Precondition(format!("t = {t} before start time {h_start}")));
        }
        if let Some(cs) = contour.s {
            if (cs - s).abs() > 1e-12 {
                return Err(Error::Precondition(format!("contour built for s = {cs}, operator uses {s}")));
            }
        }
        Ok(Self { s, t, h_start, h, contour })
    }

    pub fn at(&self, t: f64) -> Result<Self> {
        Self::new(self.h, self.contour, self.s, t, self.h_start)
    }

    /// `|J_V(t)|^s f = U(t) t^s H^{s/2} U(−t) f`.
    pub fn apply(&self, f: &SpinorField) -> Result<SpinorField> {
        Ok(self.apply_batch(std::slice::from_ref(f))?.remove(0))
    }

    pub fn apply_batch(&self, fs: &[SpinorField]) -> Result<Vec<SpinorField>> {
        let pulled: Vec<SpinorField> = fs.iter().map(|f| u_raw(-self.t, f)).collect();
        let hs = fractional_power_batch(self.h, self.s, &pulled, self.contour)?;
        let ts = self.t.powf(self.s);
        Ok(hs.iter().map(|g| u_raw(self.t, &g.scale(Complex64::new(ts, 0.0)))).collect())
    }

    /// `A f = −U(t)(t²H)^{s/2}[V,U(−t)]f − [V,U(t)](t²H)^{s/2}U(−t)f`.
    pub fn a_apply(&self, f: &SpinorField) -> Result<SpinorField> {
        let c1 = v_u_commutator(self.h, -self.t, f);
        let pulled = u_raw(-self.t, f);
        let out = fractional_power_batch(self.h, self.s, &[c1, pulled], self.contour)?;
        Ok(self.a_from_powers(&out[0], &out[1]))
    }

    fn a_from_powers(&self, hs_c1: &SpinorField, hs_pulled: &SpinorField) -> SpinorField {
        let ts = Complex64::new(self.t.powf(self.s), 0.0);
        let first = u_raw(self.t, &hs_c1.scale(ts));
        let second = v_u_commutator(self.h, self.t, &hs_pulled.scale(ts));
        first.add(&second).scale(Complex64::new(-1.0, 0.0))
    }

    /// Both sides of `[i∂_t − H, |J_V|^s] f = i t^{s−1} U(t)B(s)U(−t) f + A f`.
    pub fn commutator_identity(&self, f: &SpinorField, dt: f64) -> Result<IdentityResidual> {
        if !(dt > 1e-8 * self.t) {
            return Err(Error::StepUnderflow(format!("dt = {dt} at t = {}", self.t)));
        }
        if self.t - dt < self.h_start * 0.5 {
            return Err(Error::Precondition(format!("dt = {dt} too large at t = {}", self.t)));
        }
        let (t, s) = (self.t, self.s);
        let hf = self.h.apply(f);
        let inputs = vec![
            u_raw(-(t + dt), f),
            u_raw(-(t - dt), f),
            u_raw(-t, f),
            u_raw(-t, &hf),
            v_u_commutator(self.h, -t, f),
        ];
        let p = fractional_power_batch(self.h, s, &inputs, self.contour)?;
        let jplus = u_raw(t + dt, &p[0].scale(Complex64::new((t + dt).powf(s), 0.0)));
        let jminus = u_raw(t - dt, &p[1].scale(Complex64::new((t - dt).powf(s), 0.0)));
        let ts = Complex64::new(t.powf(s), 0.0);
        let jf = u_raw(t, &p[2].scale(ts));
        let jhf = u_raw(t, &p[3].scale(ts));
        let dtj = jplus.sub(&jminus).scale(Complex64::new(0.0, 1.0 / (2.0 * dt)));
        let lhs = dtj.sub(&self.h.apply(&jf)).add(&jhf);

        let b = b_apply(self.h, s, &inputs[2], self.contour)?;
        let rhs_b = u_raw(t, &b).scale(Complex64::new(0.0, t.powf(s - 1.0)));
        let a = self.a_from_powers(&p[4], &p[2]);
        let rhs = rhs_b.add(&a);
        let diff = lhs.sub(&rhs).l2();
        let scale = lhs.l2().max(rhs.l2());
        Ok(IdentityResidual {
            t,
            dt,
            lhs_norm: lhs.l2(),
            rhs_norm: rhs.l2(),
            a_norm: a.l2(),
            defect_norm: diff,
            relative: if scale > 0.0 { diff / scale } else { 0.0 },
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub t: f64,
    pub dt: f64,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub a_norm: f64,
    /// `‖LHS − RHS‖₂`, the measured size of any unexplained term.
    pub defect_norm: f64,
    pub relative: f64,
}

/// Relative residual of the commutator identity at `op.t`.
pub fn commutator_identity_residual(op: &VectorFieldOp, f: &SpinorField, dt: f64) -> Result<f64> {
    Ok(op.commutator_identity(f, dt)?.relative)
}

/// One row of the `‖f‖_∞ ≤ C t^{−s} ‖|J_V|^s f‖₂` probe.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayProbe {
    pub t: f64,
    pub sample: usize,
    pub linf: f64,
    /// `t^{−s} ‖|J_V|^s f‖₂`
    pub scaled_j: f64,
    pub ratio: f64,
}

/// Evaluates the decay probe on every `(t, f)` pair.
pub fn decay_probe(op: &VectorFieldOp, times: &[f64], fs: &[SpinorField]) -> Result<Vec<DecayProbe>> {
    let mut rows = Vec::new();
    for &t in times {
        let o = op.at(t)?;
        let js = o.apply_batch(fs)?;
        for (i, (f, j)) in fs.iter().zip(&js).enumerate() {
            let scaled = t.powf(-o.s) * j.l2();
            let linf = f.linf();
            rows.push(DecayProbe { t, sample: i, linf, scaled_j: scaled, ratio: linf / scaled });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn bump(g: GridSpec) -> SpinorField {
        let up = g.xs().iter().map(|x| Complex64::new((-x * x).exp(), 0.2 * x * (-x * x).exp())).collect();
        let lo = g.xs().iter().map(|x| Complex64::new(0.3 * (-0.5 * x * x).exp(), 0.0)).collect();
        SpinorField::new(g, up, lo).unwrap()
    }

    #[test]
    fn u_is_unitary_and_invertible() {
        let g = make_grid(20.0, 128).unwrap();
        let f = bump(g);
        let a = u_apply(25.0, &f, Direction::Forward, 20.0).unwrap();
        let b = u_apply(25.0, &a, Direction::Backward, 20.0).unwrap();
        assert!(b.sub(&f).l2() < 1e-15);
        assert!((a.l2() - f.l2()).abs() < 1e-14);
        assert_eq!(a.upper[g.origin()], f.upper[g.origin()]);
        assert!(u_apply(10.0, &f, Direction::Forward, 20.0).is_err());
    }

    #[test]
    fn free_commutator_with_u_vanishes() {
        let g = make_grid(20.0, 64).unwrap();
        let h = LinearizedOperator::free(2.0, g).with_potential(vec![-1.0; 64], vec![0.0; 64]);
        let f = bump(g);
        assert_eq!(v_u_commutator(&h, 30.0, &f).l2(), 0.0);
    }

    #[test]
    fn taper_is_one_in_the_bulk() {
        let g = make_grid(10.0, 64).unwrap();
        let m = taper_mask(&g);
        assert_eq!(m[g.origin()], 1.0);
        assert!(m[0] < 1e-12);
    }
}
