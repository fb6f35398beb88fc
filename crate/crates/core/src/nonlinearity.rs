//! Nonlinearities `F(x) = Σ c_i x^{e_i}` evaluated at `x = |u|^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold on the small/large-argument degrees required by the
/// decay estimates.
pub const DEGREE_THRESHOLD: f64 = 26.0 / 7.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    /// `F(x) = x^{(p-1)/2}`, i.e. `F(|u|^2) u = |u|^{p-1} u`.
    PurePower { p: f64 },
    /// `F(x) = Σ coefficient * x^exponent`.
    Combined { terms: Vec<(f64, f64)> },
}

fn pow0(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        if e > 0.0 {
            0.0
        } else if e == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        x.powf(e)
    }
}

impl NonlinearitySpec {
    pub fn pure_power(p: f64) -> Result<Self> {
        let s = NonlinearitySpec::PurePower { p };
        s.validate()?;
        Ok(s)
    }

    pub fn combined(terms: Vec<(f64, f64)>) -> Result<Self> {
        let s = NonlinearitySpec::Combined { terms };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NonlinearitySpec::PurePower { p } if !(*p > 1.0) => {
                Err(Error::Precondition(format!("pure power needs p > 1, got {p}")))
            }
            NonlinearitySpec::Combined { terms } if terms.is_empty() => {
                Err(Error::Precondition("combined nonlinearity has no terms".into()))
            }
            NonlinearitySpec::Combined { terms } if terms.iter().any(|&(_, e)| !(e > 0.0)) => {
                Err(Error::Precondition("exponents must be positive so that F(0) = 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn terms(&self) -> Vec<(f64, f64)> {
        match self {
            NonlinearitySpec::PurePower { p } => vec![(1.0, (p - 1.0) / 2.0)],
            NonlinearitySpec::Combined { terms } => terms.clone(),
        }
    }

    /// `p` when the nonlinearity is a single power with unit coefficient.
    pub fn as_pure_power(&self) -> Option<f64> {
        match self {
            NonlinearitySpec::PurePower { p } => Some(*p),
            NonlinearitySpec::Combined { terms } if terms.len() == 1 && terms[0].0 == 1.0 => {
                Some(2.0 * terms[0].1 + 1.0)
            }
            _ => None,
        }
    }

    pub fn f(&self, x: f64) -> f64 {
        self.terms().iter().map(|&(c, e)| c * pow0(x, e)).sum()
    }

    pub fn df(&self, x: f64) -> f64 {
        self.terms().iter().map(|&(c, e)| c * e * pow0(x, e - 1.0)).sum()
    }

    pub fn d2f(&self, x: f64) -> f64 {
        self.terms()
            .iter()
            .map(|&(c, e)| c * e * (e - 1.0) * pow0(x, e - 2.0))
            .sum()
    }

    /// Primitive `G(x) = ∫_0^x F`.
    pub fn g(&self, x: f64) -> f64 {
        self.terms().iter().map(|&(c, e)| c * pow0(x, e + 1.0) / (e + 1.0)).sum()
    }

    /// Small-argument degree `m` (in `|F(|u|^2)u| ~ |u|^m`).
    pub fn degree_small(&self) -> f64 {
        let e = self.terms().iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        2.0 * e + 1.0
    }

    /// Large-argument degree `n`.
    pub fn degree_large(&self) -> f64 {
        let e = self.terms().iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        2.0 * e + 1.0
    }

    /// Whether both degrees exceed the threshold required by the decay
    /// estimates.
    pub fn degrees_admissible(&self) -> bool {
        self.degree_small() > DEGREE_THRESHOLD && self.degree_large() > DEGREE_THRESHOLD
    }

    /// Nonlinear remainder `F(|φ+f|²)(φ+f) − F(φ²)φ − F(φ²)f − F'(φ²)φ²(f + f̄)`.
    pub fn remainder(&self, phi: f64, f: num_complex::Complex64) -> num_complex::Complex64 {
        let w = f + phi;
        let p2 = phi * phi;
        w * self.f(w.norm_sqr()) - phi * self.f(p2) - f * self.f(p2) - self.df(p2) * p2 * (f + f.conj())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_evaluators() {
        let nl = NonlinearitySpec::pure_power(3.0).unwrap();
        assert_eq!(nl.f(0.0), 0.0);
        assert_eq!(nl.f(2.5), 2.5);
        assert_eq!(nl.df(7.0), 1.0);
        assert_eq!(nl.d2f(7.0), 0.0);
        assert_eq!(nl.g(2.0), 2.0);
        assert_eq!(nl.degree_small(), 3.0);
        assert!(!nl.degrees_admissible());
        assert_eq!(nl.as_pure_power(), Some(3.0));
    }

    #[test]
    fn combined_evaluators() {
        let nl = NonlinearitySpec::combined(vec![(1.0, 1.0), (0.1, 2.0)]).unwrap();
        assert!((nl.f(2.0) - 2.4).abs() < 1e-15);
        assert!((nl.df(2.0) - 1.4).abs() < 1e-15);
        assert!((nl.g(2.0) - (2.0 + 0.1 * 8.0 / 3.0)).abs() < 1e-15);
        assert_eq!(nl.degree_large(), 5.0);
        assert!(NonlinearitySpec::combined(vec![(1.0, 0.0)]).is_err());
        assert!(NonlinearitySpec::pure_power(1.0).is_err());
    }

    #[test]
    fn remainder_is_quadratic() {
        let nl = NonlinearitySpec::pure_power(5.0).unwrap();
        let f = num_complex::Complex64::new(0.3, -0.2);
        let r1 = nl.remainder(1.1, f * 1e-3).norm();
        let r2 = nl.remainder(1.1, f * 5e-4).norm();
        assert!((r1 / r2 - 4.0).abs() < 1e-2);
    }
}
