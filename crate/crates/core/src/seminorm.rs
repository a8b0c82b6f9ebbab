//! Local smoothed energy seminorms.
//!
//! `||Psi||_{eps,R}^2 = ||(m^2-Delta)^{(1-eps)/2} (chi_R psi)||^2 + ||(m^2-Delta)^{-eps/2} (chi_R pi)||^2`
//! where `chi_R` is a raised-cosine cutoff equal to 1 on `|x| <= R` and 0 for
//! `|x| >= R + w`. With the cutoff disabled and `eps = 0` this is the global
//! energy norm.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::FieldState;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormSpec {
    pub epsilon: f64,
    /// Observation radius; `f64::INFINITY` disables the cutoff.
    pub radius: f64,
    pub cutoff_width: f64,
}

impl SeminormSpec {
    pub fn new(epsilon: f64, radius: f64, cutoff_width: f64) -> Self {
        Self {
            epsilon,
            radius,
            cutoff_width,
        }
    }

    /// Ball of radius `radius` with the default transition width `L/16`.
    pub fn with_default_width(grid: &Grid, epsilon: f64, radius: f64) -> Self {
        Self::new(epsilon, radius, grid.box_length() / 16.0)
    }

    /// No cutoff: the global `E^{-eps}` norm.
    pub fn uncut(epsilon: f64) -> Self {
        Self::new(epsilon, f64::INFINITY, 0.0)
    }

    pub fn is_uncut(&self) -> bool {
        self.radius.is_infinite()
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(invalid("epsilon", format!("must lie in [0, 1], got {}", self.epsilon)));
        }
        if self.is_uncut() {
            return Ok(());
        }
        if !(self.radius > 0.0) {
            return Err(invalid("radius", format!("must be positive, got {}", self.radius)));
        }
        if !(self.cutoff_width > 0.0) {
            return Err(invalid(
                "cutoff_width",
                format!("must be positive, got {}", self.cutoff_width),
            ));
        }
        let half = grid.box_length() / 2.0;
        if self.radius + self.cutoff_width >= half {
            return Err(invalid(
                "radius",
                format!("R + w = {} must be < L/2 = {half}", self.radius + self.cutoff_width),
            ));
        }
        Ok(())
    }

    /// Value of the cutoff at distance `r` from the origin.
    pub fn cutoff(&self, r: f64) -> f64 {
        if self.is_uncut() || r <= self.radius {
            1.0
        } else if r >= self.radius + self.cutoff_width {
            0.0
        } else {
            0.5 * (1.0 + (PI * (r - self.radius) / self.cutoff_width).cos())
        }
    }
}

/// Linear map `Psi -> (A psi, B pi)` whose L2 norm is the seminorm, kept in
/// raw-DFT form so inner products are cheap.
#[derive(Debug, Clone)]
pub struct SeminormOperator {
    spec: SeminormSpec,
    mass: f64,
    cutoff: Vec<f64>,
    psi_weight: Vec<f64>,
    pi_weight: Vec<f64>,
}

/// Image of a state under [`SeminormOperator`].
#[derive(Debug, Clone)]
pub struct Weighted {
    pub psi: Vec<Complex64>,
    pub pi: Vec<Complex64>,
}

impl SeminormOperator {
    pub fn new(grid: &Grid, spec: SeminormSpec, mass: f64) -> Result<Self> {
        spec.validate(grid)?;
        let m2 = mass * mass;
        let cutoff = grid.radius().iter().map(|&r| spec.cutoff(r)).collect();
        let psi_weight = grid
            .xi_sq()
            .iter()
            .map(|&k2| (k2 + m2).powf((1.0 - spec.epsilon) / 2.0))
            .collect();
        let pi_weight = grid
            .xi_sq()
            .iter()
            .map(|&k2| (k2 + m2).powf(-spec.epsilon / 2.0))
            .collect();
        Ok(Self {
            spec,
            mass,
            cutoff,
            psi_weight,
            pi_weight,
        })
    }

    pub fn spec(&self) -> &SeminormSpec {
        &self.spec
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    fn weigh(&self, grid: &Grid, field: &[Complex64], weight: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = field.iter().zip(&self.cutoff).map(|(z, c)| z * c).collect();
        grid.forward(&mut buf);
        for (v, w) in buf.iter_mut().zip(weight) {
            *v *= w;
        }
        buf
    }

    pub fn apply(&self, state: &FieldState) -> Result<Weighted> {
        let grid = state.grid();
        grid.check_len(self.cutoff.len())?;
        Ok(Weighted {
            psi: self.weigh(grid, &state.psi, &self.psi_weight),
            pi: self.weigh(grid, &state.pi, &self.pi_weight),
        })
    }

    /// Sesquilinear form `<a, b>` associated with the seminorm.
    pub fn inner(grid: &Grid, a: &Weighted, b: &Weighted) -> Complex64 {
        grid.spectral_inner(&a.psi, &b.psi) + grid.spectral_inner(&a.pi, &b.pi)
    }

    pub fn norm_sq(grid: &Grid, a: &Weighted) -> f64 {
        Self::inner(grid, a, a).re.max(0.0)
    }

    pub fn norm(&self, state: &FieldState) -> Result<f64> {
        let w = self.apply(state)?;
        Ok(Self::norm_sq(state.grid(), &w).sqrt())
    }
}

/// `||Psi||_{E^{-eps}, R}` for the given observation window.
pub fn local_seminorm(state: &FieldState, spec: &SeminormSpec, mass: f64) -> Result<f64> {
    SeminormOperator::new(state.grid(), *spec, mass)?.norm(state)
}

/// `sum_{R=1}^{R_max} 2^{-R} ||Psi||_{eps,R}`, truncated where `R + w` reaches `L/2`.
pub fn local_energy_metric(state: &FieldState, epsilon: f64, cutoff_width: f64, mass: f64) -> Result<f64> {
    let half = state.grid().box_length() / 2.0;
    let mut total = 0.0;
    let mut r = 1u32;
    while (r as f64) + cutoff_width < half {
        let spec = SeminormSpec::new(epsilon, r as f64, cutoff_width);
        total += 0.5f64.powi(r as i32) * local_seminorm(state, &spec, mass)?;
        r += 1;
    }
    Ok(total)
}
