//! Polynomial U(1)-invariant potential `U(z) = sum_{n=1}^p u_n |z|^{2n}` and
//! the force `F = -grad U = alpha(|z|^2) z` it generates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{poly_eval, real_roots};

/// Coefficients `u_1..u_p` of `u(r) = sum u_n r^n`; there is no constant term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PolynomialPotential {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for PolynomialPotential {
    type Error = Error;
    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs)
    }
}

impl From<PolynomialPotential> for Vec<f64> {
    fn from(p: PolynomialPotential) -> Self {
        p.coeffs
    }
}

/// Constants of a lower bound `U(z) >= A - B|z|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub a: f64,
    pub b: f64,
}

impl PolynomialPotential {
    /// `coeffs[n-1]` multiplies `|z|^{2n}`. Requires `p >= 2` and `u_p > 0`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidPotential(format!(
                "degree p must be >= 2, got {} coefficient(s)",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential("coefficients must be finite".into()));
        }
        let lead = *coeffs.last().unwrap();
        if lead <= 0.0 {
            return Err(Error::InvalidPotential(format!(
                "leading coefficient must satisfy u_p > 0, got u_{} = {lead}",
                coeffs.len()
            )));
        }
        Ok(Self { coeffs })
    }

    /// Cubic mean-field force `F(z) = a z + b |z|^2 z`; `b < 0` is required for `u_2 > 0`.
    pub fn cubic(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![-a / 2.0, -b / 4.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// The degree `p`.
    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// `u(r)` for `r = |z|^2`.
    pub fn u(&self, r: f64) -> f64 {
        r * poly_eval(&self.coeffs, r)
    }

    /// `u'(r)`.
    pub fn u_prime(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * r + (i as f64 + 1.0) * c)
    }

    /// `alpha(r) = -2 u'(r)`.
    pub fn alpha(&self, r: f64) -> f64 {
        -2.0 * self.u_prime(r)
    }

    /// Ascending coefficients of `alpha` as a polynomial in `r`.
    pub fn alpha_coeffs(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| -2.0 * (i as f64 + 1.0) * c)
            .collect()
    }

    pub fn eval_u(&self, z: Complex64) -> f64 {
        self.u(z.norm_sqr())
    }

    pub fn eval_f(&self, z: Complex64) -> Complex64 {
        z * self.alpha(z.norm_sqr())
    }

    /// Largest deviation between `F(z)` and a central-difference gradient of `-U`
    /// taken along `Re z` and `Im z` with step `h`.
    pub fn gradient_check(&self, z: Complex64, h: f64) -> f64 {
        let dx = (self.eval_u(z + h) - self.eval_u(z - h)) / (2.0 * h);
        let dy = (self.eval_u(z + Complex64::i() * h) - self.eval_u(z - Complex64::i() * h)) / (2.0 * h);
        let f = self.eval_f(z);
        (f.re + dx).abs().max((f.im + dy).abs())
    }

    /// `A = min_{r >= 0} (u(r) + B r)`, so that `U(z) >= A - B |z|^2`.
    pub fn lower_bound_constants(&self, b: f64) -> Result<LowerBound> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "B",
                reason: format!("must be finite and >= 0, got {b}"),
            });
        }
        if *self.coeffs.last().unwrap() <= 0.0 {
            return Err(Error::InvalidPotential("u_p must be > 0".into()));
        }
        // d/dr (u(r) + B r) = u'(r) + B
        let mut deriv: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as f64 + 1.0) * c)
            .collect();
        deriv[0] += b;
        let shifted = |r: f64| self.u(r) + b * r;
        let a = real_roots(&deriv)
            .into_iter()
            .filter(|&r| r > 0.0)
            .map(shifted)
            .fold(shifted(0.0), f64::min);
        Ok(LowerBound { a, b })
    }
}

impl LowerBound {
    /// Whether `B < m^2 / (2 ||rho||^2)`, needed for the energy-norm bound.
    pub fn admissible(&self, mass: f64, rho_l2_sq: f64) -> bool {
        self.b < mass * mass / (2.0 * rho_l2_sq)
    }

    /// Upper bound on `||Psi||_E^2` in terms of the energy `H`.
    pub fn energy_norm_sq_bound(&self, energy: f64, mass: f64, rho_l2_sq: f64) -> f64 {
        let m2 = mass * mass;
        2.0 * m2 / (m2 - 2.0 * self.b * rho_l2_sq) * (energy - self.a)
    }
}
