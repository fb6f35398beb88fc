//! Periodic grid on `[-L, L)`, Fourier differentiation, norms and the
//! Galilean phase `M(t) = exp(i x^2 / 4t)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid `x_j = -L + j h`, `h = 2L/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        make_grid(half_width, points)
    }

    pub fn n(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.x(j)).collect()
    }

    /// Index of the grid point `x = 0`.
    pub fn origin(&self) -> usize {
        self.points / 2
    }

    /// Angular wavenumbers in FFT order. The Nyquist entry is `-pi/h`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as i64;
        let dk = PI / self.half_width;
        (0..n)
            .map(|j| if j < n / 2 { j as f64 * dk } else { (j - n) as f64 * dk })
            .collect()
    }

    pub fn k_max(&self) -> f64 {
        PI / self.spacing()
    }
}

pub fn make_grid(half_width: f64, points: usize) -> Result<GridSpec> {
    if points < 16 || points % 2 != 0 {
        return Err(Error::InvalidGrid(format!(
            "N too small/odd: N = {points} (need even N >= 16)"
        )));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidGrid(format!("L must be positive, got {half_width}")));
    }
    Ok(GridSpec { half_width, points })
}

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<FftPair> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<FftPair>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(FftPair {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Unnormalized forward DFT in place.
pub fn fft_in_place(buf: &mut [Complex64]) {
    plans(buf.len()).forward.process(buf);
}

/// Inverse DFT in place, including the `1/N` factor.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    plans(n).inverse.process(buf);
    let s = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// Applies a Fourier multiplier `m(k_j)` to `values`.
pub fn apply_multiplier(values: &mut [Complex64], mult: &[Complex64]) {
    fft_in_place(values);
    for (v, m) in values.iter_mut().zip(mult) {
        *v *= *m;
    }
    ifft_in_place(values);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.points {
            return Err(Error::Precondition(format!(
                "field length {} does not match grid N = {}",
                values.len(),
                grid.points
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Precondition("field has non-finite entries".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.points] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Self {
        Self { grid, values: grid.xs().into_iter().map(f).collect() }
    }

    pub fn from_real(grid: GridSpec, re: &[f64]) -> Self {
        Self { grid, values: re.iter().map(|&r| Complex64::new(r, 0.0)).collect() }
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.conj()).collect() }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn l2(&self) -> f64 {
        l2_norm(&self.values, self.grid.spacing())
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `∫ a conj(b)` by the trapezoidal rule.
    pub fn inner(&self, other: &Self) -> Complex64 {
        inner(&self.values, &other.values, self.grid.spacing())
    }
}

pub fn l2_norm(v: &[Complex64], h: f64) -> f64 {
    (h * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

/// `h Σ a_j conj(b_j)`.
pub fn inner(a: &[Complex64], b: &[Complex64], h: f64) -> Complex64 {
    h * a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>()
}

/// Pair `(upper, lower)` on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinorField {
    pub grid: GridSpec,
    pub upper: Vec<Complex64>,
    pub lower: Vec<Complex64>,
    /// Set when the spinor is known to have the form `(f, conj f)`.
    pub conjugate_symmetric: bool,
}

impl SpinorField {
    pub fn new(grid: GridSpec, upper: Vec<Complex64>, lower: Vec<Complex64>) -> Result<Self> {
        if upper.len() != grid.points || lower.len() != grid.points {
            return Err(Error::Precondition("spinor component length mismatch".into()));
        }
        Ok(Self { grid, upper, lower, conjugate_symmetric: false })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.points];
        Self { grid, upper: z.clone(), lower: z, conjugate_symmetric: true }
    }

    /// `(f, conj f)`.
    pub fn from_scalar(f: &ComplexField) -> Self {
        Self {
            grid: f.grid,
            upper: f.values.clone(),
            lower: f.values.iter().map(|v| v.conj()).collect(),
            conjugate_symmetric: true,
        }
    }

    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.upper.iter().zip(&self.lower).all(|(a, b)| (a - b.conj()).norm() <= tol)
    }

    pub fn len(&self) -> usize {
        self.grid.points
    }

    pub fn is_empty(&self) -> bool {
        self.grid.points == 0
    }

    /// Stacked `[upper; lower]`.
    pub fn to_vec(&self) -> Vec<Complex64> {
        let mut v = self.upper.clone();
        v.extend_from_slice(&self.lower);
        v
    }

    pub fn from_vec(grid: GridSpec, v: &[Complex64]) -> Self {
        let n = grid.points;
        Self {
            grid,
            upper: v[..n].to_vec(),
            lower: v[n..2 * n].to_vec(),
            conjugate_symmetric: false,
        }
    }

    pub fn l2(&self) -> f64 {
        let h = self.grid.spacing();
        (l2_norm(&self.upper, h).powi(2) + l2_norm(&self.lower, h).powi(2)).sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.upper.iter().chain(&self.lower).fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `∫ (u1 conj v1 + u2 conj v2)`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let h = self.grid.spacing();
        inner(&self.upper, &other.upper, h) + inner(&self.lower, &other.lower, h)
    }

    /// `θ3 = diag(1, -1)`.
    pub fn theta3(&self) -> Self {
        Self {
            grid: self.grid,
            upper: self.upper.clone(),
            lower: self.lower.iter().map(|v| -v).collect(),
            conjugate_symmetric: false,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            upper: self.upper.iter().map(|v| v * c).collect(),
            lower: self.lower.iter().map(|v| v * c).collect(),
            conjugate_symmetric: self.conjugate_symmetric && c.im == 0.0,
        }
    }

    pub fn axpy(&self, c: Complex64, other: &Self) -> Self {
        Self {
            grid: self.grid,
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a + c * b).collect(),
            lower: self.lower.iter().zip(&other.lower).map(|(a, b)| a + c * b).collect(),
            conjugate_symmetric: false,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    pub fn map_pointwise(&self, f: impl Fn(usize, Complex64, Complex64) -> (Complex64, Complex64)) -> Self {
        let (upper, lower) = (0..self.len())
            .map(|j| f(j, self.upper[j], self.lower[j]))
            .unzip();
        Self { grid: self.grid, upper, lower, conjugate_symmetric: false }
    }
}

/// Fourier derivative of order 1 or 2. The Nyquist mode is dropped for
/// order 1 so real input stays real.
pub fn spectral_derivative(f: &ComplexField, order: u32) -> Result<ComplexField> {
    if order != 1 && order != 2 {
        return Err(Error::Precondition(format!("derivative order must be 1 or 2, got {order}")));
    }
    let mut values = f.values.clone();
    derivative_in_place(&mut values, &f.grid, order);
    Ok(ComplexField { grid: f.grid, values })
}

pub(crate) fn derivative_in_place(values: &mut [Complex64], grid: &GridSpec, order: u32) {
    let ks = grid.wavenumbers();
    let n = grid.points;
    let mult: Vec<Complex64> = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| match order {
            1 if j == n / 2 => Complex64::new(0.0, 0.0),
            1 => Complex64::new(0.0, k),
            _ => Complex64::new(-k * k, 0.0),
        })
        .collect();
    apply_multiplier(values, &mult);
}

pub fn derivative_real(v: &[f64], grid: &GridSpec, order: u32) -> Vec<f64> {
    let mut buf: Vec<Complex64> = v.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    derivative_in_place(&mut buf, grid, order);
    buf.iter().map(|z| z.re).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSuite {
    pub l2: f64,
    pub linf: f64,
    /// `(p, ‖u‖_p)` for each requested exponent.
    pub lp: Vec<(f64, f64)>,
    pub h2: f64,
    pub sigma: f64,
    pub weighted_x: f64,
    pub weighted_dx: f64,
    pub weighted_x2: f64,
    /// Largest `|u|` within 5% of the box edge; weighted norms are only
    /// meaningful when this is negligible.
    pub edge_max: f64,
}

impl NormSuite {
    pub fn lp(&self, p: f64) -> Option<f64> {
        self.lp.iter().find(|(q, _)| (*q - p).abs() < 1e-12).map(|&(_, v)| v)
    }

    pub fn weighted_reliable(&self) -> bool {
        self.edge_max <= 1e-8 * self.linf.max(1e-300)
    }
}

pub fn lp_norm(v: &[Complex64], h: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return v.iter().fold(0.0, |m, z| m.max(z.norm()));
    }
    (h * v.iter().map(|z| z.norm().powf(p)).sum::<f64>()).powf(1.0 / p)
}

pub fn norm_suite(f: &ComplexField, ps: &[f64]) -> NormSuite {
    let grid = f.grid;
    let h = grid.spacing();
    let n = grid.points;
    let l2 = f.l2();
    let linf = f.linf();
    let lp = ps.iter().map(|&p| (p, lp_norm(&f.values, h, p))).collect();

    let mut hat = f.values.clone();
    fft_in_place(&mut hat);
    let ks = grid.wavenumbers();
    let h2 = ((h / n as f64)
        * hat
            .iter()
            .zip(&ks)
            .map(|(c, &k)| (1.0 + k * k + k.powi(4)) * c.norm_sqr())
            .sum::<f64>())
    .sqrt();

    let xs = grid.xs();
    let dfdx = spectral_derivative(f, 1).expect("order 1");
    let wsum = |w: &dyn Fn(usize) -> f64| (h * (0..n).map(|j| w(j)).sum::<f64>()).sqrt();
    let weighted_x = wsum(&|j| xs[j] * xs[j] * f.values[j].norm_sqr());
    let weighted_dx = wsum(&|j| xs[j] * xs[j] * dfdx.values[j].norm_sqr());
    let weighted_x2 = wsum(&|j| xs[j].powi(4) * f.values[j].norm_sqr());
    let edge = 0.95 * grid.half_width;
    let edge_max = (0..n)
        .filter(|&j| xs[j].abs() >= edge)
        .fold(0.0, |m: f64, j| m.max(f.values[j].norm()));

    NormSuite {
        l2,
        linf,
        lp,
        h2,
        sigma: h2 + weighted_dx + weighted_x2,
        weighted_x,
        weighted_dx,
        weighted_x2,
        edge_max,
    }
}

/// Pointwise phases `exp(i x^2 / 4t)`.
pub fn galilean_multiplier(t: f64, grid: &GridSpec) -> Result<Vec<Complex64>> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("Galilean multiplier needs t > 0, got {t}")));
    }
    Ok(grid
        .xs()
        .into_iter()
        .map(|x| Complex64::from_polar(1.0, x * x / (4.0 * t)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_arithmetic() {
        let g = make_grid(40.0, 1024).unwrap();
        assert_eq!(g.spacing(), 0.078125);
        let g = make_grid(20.0, 512).unwrap();
        assert_eq!(g.x(0), -20.0);
        assert!((g.x(511) - (20.0 - 40.0 / 512.0)).abs() < 1e-14);
        assert!(make_grid(40.0, 15).is_err());
        assert!(make_grid(40.0, 8).is_err());
        assert!(make_grid(0.0, 64).is_err());
        assert_eq!(g.x(g.origin()), 0.0);
    }

    #[test]
    fn derivative_of_plane_wave() {
        let g = make_grid(10.0, 64).unwrap();
        let k = g.wavenumbers()[5];
        let f = ComplexField::from_fn(g, |x| Complex64::from_polar(1.0, k * x));
        let d = spectral_derivative(&f, 1).unwrap();
        for (dv, v) in d.values.iter().zip(&f.values) {
            assert!((dv - Complex64::new(0.0, k) * v).norm() < 1e-12);
        }
        let c = ComplexField::from_fn(g, |_| Complex64::new(3.0, -1.0));
        assert!(spectral_derivative(&c, 2).unwrap().linf() < 1e-12);
        assert!(spectral_derivative(&c, 3).is_err());
    }

    #[test]
    fn sech_second_derivative() {
        let g = make_grid(40.0, 1024).unwrap();
        let sech = |x: f64| 1.0 / x.cosh();
        let f = ComplexField::from_fn(g, |x| sech(x).into());
        let d = spectral_derivative(&f, 2).unwrap();
        let exact = ComplexField::from_fn(g, |x| (sech(x) - 2.0 * sech(x).powi(3)).into());
        assert!(d.sub(&exact).l2() / exact.l2() < 1e-10);
    }

    #[test]
    fn sech_mass_and_zero_norms() {
        let g = make_grid(40.0, 1024).unwrap();
        let f = ComplexField::from_fn(g, |x| (2f64.sqrt() / x.cosh()).into());
        let ns = norm_suite(&f, &[3.0]);
        assert!((ns.l2 * ns.l2 - 4.0).abs() < 1e-8);
        let z = norm_suite(&ComplexField::zeros(g), &[3.0, 4.0]);
        assert_eq!((z.l2, z.linf, z.h2, z.sigma, z.weighted_x2), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(z.lp(4.0), Some(0.0));
    }

    #[test]
    fn multiplier_limits() {
        let g = make_grid(40.0, 256).unwrap();
        let m = galilean_multiplier(1e12, &g).unwrap();
        let bound = 40.0f64.powi(2) / 4e12;
        assert!(m.iter().all(|z| (z - 1.0).norm() <= bound * (1.0 + 1e-9)));
        let m = galilean_multiplier(20.0, &g).unwrap();
        assert_eq!(m[g.origin()], Complex64::new(1.0, 0.0));
        assert!(galilean_multiplier(0.0, &g).is_err());
        assert!(galilean_multiplier(-1.0, &g).is_err());
    }
}
