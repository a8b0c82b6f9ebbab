//! An explicit two-frequency solution `psi = phi_0 sin(omega_0 t) + phi_1 sin(omega_1 t)`,
//! `omega_1 = 3 omega_0`, for a coupling whose transform vanishes on the
//! `omega_1` resonant shell and a cubic force `F(z) = a z + b |z|^2 z`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_with, Integrator, Model, Observers, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::field::{CouplingProfile, FieldState};
use crate::grid::Grid;
use crate::potential::PolynomialPotential;
use crate::roots::brent;
use crate::solitary::sigma;
use crate::spectral::{windowed_spectrum, Series, Taper};

/// Widths of the two Gaussians `g_1`, `g_2` in `xi`.
pub const NARROW_WIDTH: f64 = 1.0;
pub const WIDE_WIDTH: f64 = 3.0;

/// `rho` with `hat rho = scale (xi^2 - k_1^2)(g_1 + lambda g_2)` and `sigma(omega_1) = 0`.
#[derive(Debug, Clone)]
pub struct ShellCoupling {
    pub rho: CouplingProfile,
    pub omega1: f64,
    pub lambda: f64,
    /// Overall factor normalizing `sigma(omega_1 / 3)` to 1.
    pub scale: f64,
    pub wide_width: f64,
    /// Raw-DFT samples of `g_1 + lambda g_2`, i.e. `hat rho / (xi^2 - k_1^2)`.
    factor: Vec<Complex64>,
}

fn gaussian(k2: f64, width: f64) -> f64 {
    (-0.5 * k2 / (width * width)).exp()
}

/// Discrete `sigma(omega_1)` of the ansatz as a function of `lambda`.
fn ansatz_sigma(grid: &Grid, k1_sq: f64, wide: f64, lambda: f64) -> f64 {
    let cell = grid.cell_volume();
    let s: f64 = grid
        .xi_sq()
        .iter()
        .map(|&k2| {
            let g = gaussian(k2, NARROW_WIDTH) + lambda * gaussian(k2, wide);
            (k2 - k1_sq) * g * g
        })
        .sum();
    s * cell / grid.box_length().powi(grid.dim() as i32)
}

/// Solves for `lambda > 0` with `sigma(omega_1) = 0`, widening `g_2` if no sign change is found.
pub fn build_rho(grid: Arc<Grid>, mass: f64, omega1: f64) -> Result<ShellCoupling> {
    if !(mass > 0.0) {
        return Err(invalid("mass", "must be positive"));
    }
    if !(omega1 > mass && omega1 < 3.0 * mass) {
        return Err(invalid(
            "omega1",
            format!("must lie in (m, 3m) = ({mass}, {}), got {omega1}", 3.0 * mass),
        ));
    }
    let k1_sq = omega1 * omega1 - mass * mass;
    let mut wide = WIDE_WIDTH;
    let mut last_bracket = (0.0, 0.0);
    for _ in 0..6 {
        let f = |l: f64| ansatz_sigma(&grid, k1_sq, wide, l);
        let mut hi = 1e-3;
        let f0 = f(0.0);
        while hi < 1e6 && f(hi).signum() == f0.signum() {
            hi *= 2.0;
        }
        last_bracket = (0.0, hi);
        if f(hi).signum() != f0.signum() {
            let mut lo = 0.0;
            // tighten to the first sign change
            let mut probe = hi / 2.0;
            while probe > 1e-3 && f(probe).signum() != f0.signum() {
                probe /= 2.0;
            }
            if f(probe).signum() == f0.signum() {
                lo = probe;
            }
            let lambda = brent(f, lo, hi, 0.0)?;
            let unscaled = CouplingProfile::from_radial_spectrum(grid.clone(), |k2| {
                (k2 - k1_sq) * (gaussian(k2, NARROW_WIDTH) + lambda * gaussian(k2, wide))
            })?;
            // both shell conditions are invariant under scaling; fix sigma(omega_1 / 3) = 1
            let scale = 1.0 / sigma(&unscaled, mass, omega1 / 3.0)?.sqrt();
            let rho = CouplingProfile::from_radial_spectrum(grid.clone(), |k2| {
                scale * (k2 - k1_sq) * (gaussian(k2, NARROW_WIDTH) + lambda * gaussian(k2, wide))
            })?;
            let cell = grid.cell_volume();
            let factor: Vec<Complex64> = grid
                .xi_sq()
                .iter()
                .map(|&k2| {
                    Complex64::new(
                        scale * (gaussian(k2, NARROW_WIDTH) + lambda * gaussian(k2, wide)) / cell,
                        0.0,
                    )
                })
                .collect();
            return Ok(ShellCoupling {
                rho,
                omega1,
                lambda,
                scale,
                wide_width: wide,
                factor,
            });
        }
        log::info!("no sign change for g_2 width {wide}; widening");
        wide *= 1.5;
    }
    Err(Error::RootFinding {
        lo: last_bracket.0,
        hi: last_bracket.1,
        reason: "sigma(omega_1) does not change sign in lambda".into(),
    })
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub coupling: ShellCoupling,
    pub mass: f64,
    pub omega0: f64,
    pub omega1: f64,
    pub a: f64,
    pub b: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub phi0: Vec<Complex64>,
    pub phi1: Vec<Complex64>,
    pub initial: FieldState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSummary {
    pub omega0: f64,
    pub omega1: f64,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub shell_max: f64,
    pub phi0_norm: f64,
    pub phi1_norm: f64,
}

impl Counterexample {
    pub fn grid(&self) -> &Arc<Grid> {
        self.coupling.rho.grid()
    }

    /// `U(z) = -a/2 |z|^2 - b/4 |z|^4`, so that `F(z) = a z + b |z|^2 z`.
    pub fn potential(&self) -> Result<PolynomialPotential> {
        PolynomialPotential::cubic(self.a, self.b)
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(self.mass, self.coupling.rho.clone(), self.potential()?)
    }

    /// `phi_0 sin(omega_0 t) + phi_1 sin(omega_1 t)` and its time derivative.
    pub fn exact_at(&self, t: f64) -> FieldState {
        let (s0, c0) = (self.omega0 * t).sin_cos();
        let (s1, c1) = (self.omega1 * t).sin_cos();
        let psi = self.phi0.iter().zip(&self.phi1).map(|(a, b)| a * s0 + b * s1).collect();
        let pi = self
            .phi0
            .iter()
            .zip(&self.phi1)
            .map(|(a, b)| a * (self.omega0 * c0) + b * (self.omega1 * c1))
            .collect();
        FieldState::new(self.grid().clone(), psi, pi, t).expect("same grid")
    }

    pub fn summary(&self) -> CounterexampleSummary {
        let grid = self.grid();
        let k1 = (self.omega1 * self.omega1 - self.mass * self.mass).sqrt();
        CounterexampleSummary {
            omega0: self.omega0,
            omega1: self.omega1,
            a: self.a,
            b: self.b,
            lambda: self.coupling.lambda,
            sigma0: self.sigma0,
            sigma1: self.sigma1,
            shell_max: crate::solitary::shell_max(&self.coupling.rho, k1),
            phi0_norm: grid.l2_norm_sq(&self.phi0).sqrt(),
            phi1_norm: grid.l2_norm_sq(&self.phi1).sqrt(),
        }
    }

    /// Residuals of the two stationary equations, relative to `||phi_0||` and `||phi_1||`.
    pub fn residuals(&self) -> (f64, f64) {
        let grid = self.grid();
        let m2 = self.mass * self.mass;
        let rho_hat = self.coupling.rho.rho_hat();
        let s0 = self.sigma0;
        let resid = |phi: &[Complex64], w: f64, src: f64| -> f64 {
            let mut spec = grid.to_spectral(phi);
            for ((v, &k2), r) in spec.iter_mut().zip(grid.xi_sq()).zip(rho_hat) {
                *v = *v * (w * w - k2 - m2) + r * src;
            }
            grid.spectral_weighted_norm_sq(&spec, |_| 1.0).sqrt() / grid.l2_norm_sq(phi).sqrt()
        };
        (
            resid(&self.phi0, self.omega0, self.a * s0 + 0.75 * self.b * s0.powi(3)),
            resid(&self.phi1, self.omega1, -0.25 * self.b * s0.powi(3)),
        )
    }
}

/// Builds the profiles, the coefficient `a` and the initial datum `(0, omega_0 phi_0 + omega_1 phi_1)`.
pub fn build_multifreq(coupling: ShellCoupling, mass: f64, b: f64) -> Result<Counterexample> {
    if !(b < 0.0) {
        return Err(invalid("b", format!("must be negative, got {b}")));
    }
    let grid = coupling.rho.grid().clone();
    let omega1 = coupling.omega1;
    let omega0 = omega1 / 3.0;
    let sigma0 = sigma(&coupling.rho, mass, omega0)?;
    if !(sigma0 > 0.0) {
        return Err(Error::InadmissibleFrequency {
            omega: omega0,
            reason: format!("sigma(omega_0) = {sigma0} must be positive"),
        });
    }
    let sigma1 = sigma(&coupling.rho, mass, omega1)?;
    let a = (1.0 - 0.75 * b * sigma0.powi(3)) / sigma0;
    let m2 = mass * mass;
    let spec0: Vec<Complex64> = coupling
        .rho
        .rho_hat()
        .iter()
        .zip(grid.xi_sq())
        .map(|(r, &k2)| r / (k2 + m2 - omega0 * omega0))
        .collect();
    let c1 = -0.25 * b * sigma0.powi(3);
    // hat rho / (xi^2 + m^2 - omega_1^2) is exactly the stored factor
    let spec1: Vec<Complex64> = coupling.factor.iter().map(|g| g * c1).collect();
    let phi0 = grid.to_physical(&spec0);
    let phi1 = grid.to_physical(&spec1);
    if phi1.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            time: 0.0,
            what: "phi_1 profile".into(),
        });
    }
    let pi = phi0.iter().zip(&phi1).map(|(p, q)| p * omega0 + q * omega1).collect();
    let initial = FieldState::new(grid.clone(), vec![Complex64::new(0.0, 0.0); grid.len()], pi, 0.0)?;
    Ok(Counterexample {
        coupling,
        mass,
        omega0,
        omega1,
        a,
        b,
        sigma0,
        sigma1,
        phi0,
        phi1,
        initial,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub t_final: f64,
    /// Largest `||psi - psi_exact|| / (||phi_0|| + ||phi_1||)` over the samples.
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub first_failure_time: Option<f64>,
    /// Largest `|gamma(t) - sigma_0 sin(omega_0 t)|`.
    pub gamma_error: f64,
    /// Fractions of the `tilde f` mass within 1.5 bins of `±omega_0` and of `±3 omega_0`.
    pub forcing_mass_at_omega0: f64,
    pub forcing_mass_at_3omega0: f64,
    /// Concentration ratio of `tilde gamma` in the last window.
    pub gamma_concentration: f64,
    pub window_width: f64,
    pub passes: bool,
}

/// Evolves the counterexample datum and compares against the exact two-frequency solution.
pub fn verify_persistence(
    ce: &Counterexample,
    integ: &Integrator,
    t_final: f64,
    window_width: f64,
) -> Result<(PersistenceReport, Trajectory)> {
    let model = ce.model()?;
    let grid = ce.grid().clone();
    let scale = grid.l2_norm_sq(&ce.phi0).sqrt() + grid.l2_norm_sq(&ce.phi1).sqrt();
    let tolerance = 1e-3;
    let mut worst: f64 = 0.0;
    let mut first_failure = None;
    let mut gamma_error: f64 = 0.0;
    let traj = evolve_with(
        &ce.initial,
        &model,
        integ,
        t_final,
        &Observers::default(),
        |state, sample| {
            let exact = ce.exact_at(sample.t);
            let err = state.l2_distance(&exact)? / scale;
            if err >= tolerance && first_failure.is_none() {
                first_failure = Some(sample.t);
            }
            worst = worst.max(err);
            let g = Complex64::new(ce.sigma0 * (ce.omega0 * sample.t).sin(), 0.0);
            gamma_error = gamma_error.max((sample.gamma - g).norm());
            Ok(())
        },
    )?;

    let f = Series::forcing(&traj)?;
    let gamma = Series::gamma(&traj)?;
    let t_c = f.end_time() - 0.5 * window_width;
    let fspec = windowed_spectrum(&f, t_c, window_width, Taper::Hann)?;
    let gspec = windowed_spectrum(&gamma, t_c, window_width, Taper::Hann)?;
    let bin = fspec.bin_width();
    let near = |c: f64| fspec.fraction_where(|w| (w.abs() - c).abs() <= 1.5 * bin);
    let forcing_mass_at_omega0 = near(ce.omega0);
    let forcing_mass_at_3omega0 = near(3.0 * ce.omega0);
    let gamma_concentration = gspec.concentration_ratio();
    let passes = first_failure.is_none()
        && forcing_mass_at_omega0 > 0.01
        && forcing_mass_at_3omega0 > 0.01
        && forcing_mass_at_omega0 + forcing_mass_at_3omega0 > 0.99
        && gamma_concentration < 0.95;
    Ok((
        PersistenceReport {
            t_final,
            max_relative_error: worst,
            tolerance,
            first_failure_time: first_failure,
            gamma_error,
            forcing_mass_at_omega0,
            forcing_mass_at_3omega0,
            gamma_concentration,
            window_width: fspec.width,
            passes,
        },
        traj,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::solitary::shell_max;

    fn default_case() -> Counterexample {
        let g = make_grid(1, 2048, 128.0).unwrap();
        let c = build_rho(g, 1.0, 2.0).unwrap();
        build_multifreq(c, 1.0, -1.0).unwrap()
    }

    #[test]
    fn coupling_vanishes_on_shell_and_sigma1_is_zero() {
        let ce = default_case();
        let s = ce.summary();
        assert!(s.shell_max < 1e-10, "{}", s.shell_max);
        assert!(s.sigma1.abs() < 1e-8, "{}", s.sigma1);
        assert!(s.sigma0 > 0.0);
        assert!(s.lambda > 0.0);
        // independent quadrature of the ansatz integral at the solved lambda
        let k1_sq = 3.0;
        let h = 1e-3;
        let integral: f64 = (-20000..=20000)
            .map(|j| {
                let x = j as f64 * h;
                let g = gaussian(x * x, NARROW_WIDTH) + s.lambda * gaussian(x * x, ce.coupling.wide_width);
                let g = g * ce.coupling.scale;
                (x * x - k1_sq) * g * g
            })
            .sum::<f64>()
            * h
            / (2.0 * std::f64::consts::PI);
        assert!(integral.abs() < 1e-8, "{integral}");
    }

    #[test]
    fn stationary_residuals_and_orthogonality() {
        let ce = default_case();
        let (r0, r1) = ce.residuals();
        assert!(r0 < 1e-8 && r1 < 1e-8, "{r0} {r1}");
        let grid = ce.grid();
        let pair = ce.coupling.rho.pair(&ce.phi1).norm();
        let bound = 1e-8 * ce.coupling.rho.l2_norm_sq().sqrt() * grid.l2_norm_sq(&ce.phi1).sqrt();
        assert!(pair < bound, "{pair} vs {bound}");
        let p = ce.potential().unwrap();
        assert_eq!(p.degree(), 2);
        assert!(p.coeffs()[1] > 0.0);
    }

    #[test]
    fn exact_solution_matches_initial_datum() {
        let ce = default_case();
        let e = ce.exact_at(0.0);
        assert!(e.l2_distance(&ce.initial).unwrap() == 0.0);
        assert!(shell_max(&ce.coupling.rho, 3f64.sqrt()) < 1e-10);
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = make_grid(1, 256, 64.0).unwrap();
        assert!(build_rho(g.clone(), 1.0, 3.5).is_err());
        assert!(build_rho(g.clone(), 1.0, 0.5).is_err());
        let c = build_rho(g, 1.0, 2.0).unwrap();
        assert!(build_multifreq(c, 1.0, 0.5).is_err());
    }
}
