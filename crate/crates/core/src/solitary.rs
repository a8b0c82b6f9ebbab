//! Solitary waves `phi_omega(x) e^{-i omega t}` and the manifold they form.
//!
//! Every profile is `c Sigma(x, omega)` with `hat Sigma = hat rho / (xi^2 + m^2 - omega^2)`;
//! the amplitude obeys `sigma(omega) alpha(|c|^2 sigma(omega)^2) = 1` where
//! `sigma = <rho, Sigma>`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Model;
use crate::error::{invalid, Error, Result};
use crate::field::{charge, energy, CouplingProfile, FieldState};
use crate::potential::PolynomialPotential;
use crate::roots::{golden_min, poly_eval, real_roots};
use crate::seminorm::{SeminormOperator, SeminormSpec, Weighted};

/// Relative size of `|hat rho|` on a resonant shell below which the shell counts as a zero.
pub const SHELL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaCurve {
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZRhoSet {
    /// Positive frequencies `omega > m`; the set is symmetric under `omega -> -omega`.
    pub points: Vec<f64>,
    pub tolerance: f64,
    /// Set when a cluster of near-zeros is wider than the grid resolution.
    pub non_isolated: bool,
}

impl ZRhoSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `±omega` for every point, ascending.
    pub fn signed_points(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.points.iter().flat_map(|&w| [-w, w]).collect();
        out.sort_by(|a, b| a.total_cmp(b));
        out
    }
}

/// Discrete form of the endpoint condition `integral |hat rho|^2 / xi^4 < infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    /// `L^{-n} sum_{xi != 0} |hat rho|^2 / xi^4`.
    pub discrete_sum: f64,
    /// `|hat rho(0)| / max |hat rho|`; this mode is excluded from the sum.
    pub zero_mode_ratio: f64,
    /// Largest `|integral x_j rho| / integral |x||rho|`.
    pub first_moment_ratio: f64,
    pub passes: bool,
}

#[derive(Debug, Clone)]
pub struct SolitaryWave {
    pub omega: f64,
    pub amplitude: Complex64,
    pub sigma: f64,
    pub profile: Vec<Complex64>,
    pub energy: f64,
    pub charge: f64,
    /// `||(Delta - m^2 + omega^2) phi + rho F(<rho, phi>)|| / ||phi||`.
    pub residual: f64,
    state: FieldState,
}

impl SolitaryWave {
    /// Initial datum `(phi, -i omega phi)` at `t = 0`.
    pub fn state(&self) -> &FieldState {
        &self.state
    }

    /// Exact solution `(phi e^{-i omega t}, -i omega phi e^{-i omega t})`.
    pub fn exact_at(&self, t: f64) -> FieldState {
        let mut s = self.state.rotated(-self.omega * t);
        s.time = t;
        s
    }
}

fn check_mass(mass: f64) -> Result<()> {
    if mass > 0.0 && mass.is_finite() {
        Ok(())
    } else {
        Err(invalid("mass", format!("must be positive, got {mass}")))
    }
}

/// `max |hat rho(xi)|` over sample points on the sphere `|xi| = k`, by direct summation.
pub fn shell_max(rho: &CouplingProfile, k: f64) -> f64 {
    let dirs: Vec<Vec<f64>> = match rho.grid().dim() {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / 64.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let count = 128;
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|j| {
                    let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * j as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
    };
    dirs.par_iter()
        .map(|d| {
            let xi: Vec<f64> = d.iter().map(|c| c * k).collect();
            rho.rho_hat_at(&xi).norm()
        })
        .reduce(|| 0.0, f64::max)
}

fn max_rho_hat_continuous(rho: &CouplingProfile) -> f64 {
    rho.rho_hat_max() * rho.grid().cell_volume()
}

/// Checks that `sigma` is defined at the real frequency `omega`.
fn admit_real(rho: &CouplingProfile, mass: f64, omega: f64) -> Result<()> {
    check_mass(mass)?;
    if !omega.is_finite() {
        return Err(Error::InadmissibleFrequency {
            omega,
            reason: "not finite".into(),
        });
    }
    if omega.abs() <= mass {
        return Ok(());
    }
    let k = (omega * omega - mass * mass).sqrt();
    let on_shell = shell_max(rho, k);
    let scale = max_rho_hat_continuous(rho);
    if on_shell <= SHELL_TOLERANCE * scale {
        Ok(())
    } else {
        Err(Error::InadmissibleFrequency {
            omega,
            reason: format!("|omega| > m and hat rho does not vanish on the resonant shell (max {on_shell:.3e})"),
        })
    }
}

/// `L^{-n} sum |hat rho|^2 / (xi^2 + m^2 - omega^2)`, skipping lattice points
/// where the denominator is exactly zero.
fn sigma_sum(rho: &CouplingProfile, mass: f64, omega: Complex64) -> Complex64 {
    let grid = rho.grid();
    let m2 = mass * mass;
    let w2 = omega * omega;
    let s: Complex64 = rho
        .rho_hat()
        .iter()
        .zip(grid.xi_sq())
        .filter_map(|(r, &k2)| {
            let den = Complex64::new(k2 + m2, 0.0) - w2;
            (den != Complex64::new(0.0, 0.0)).then(|| r.norm_sqr() / den)
        })
        .sum();
    s * (grid.cell_volume() / grid.len() as f64)
}

/// `sigma(omega)` for real `omega` in `[-m, m]` or in `Z_rho`.
///
/// At `|omega| = m` the `xi = 0` mode is excluded; see [`endpoint_condition`].
pub fn sigma(rho: &CouplingProfile, mass: f64, omega: f64) -> Result<f64> {
    admit_real(rho, mass, omega)?;
    Ok(sigma_sum(rho, mass, Complex64::new(omega, 0.0)).re)
}

/// `sigma(omega)` for `Im omega > 0`, or real admissible `omega`.
pub fn sigma_complex(rho: &CouplingProfile, mass: f64, omega: Complex64) -> Result<Complex64> {
    if omega.im <= 0.0 {
        if omega.im == 0.0 {
            admit_real(rho, mass, omega.re)?;
        } else {
            return Err(Error::InadmissibleFrequency {
                omega: omega.re,
                reason: format!("Im omega = {} must be > 0", omega.im),
            });
        }
    }
    check_mass(mass)?;
    Ok(sigma_sum(rho, mass, omega))
}

pub fn sigma_curve(rho: &CouplingProfile, mass: f64, omegas: &[f64]) -> Result<SigmaCurve> {
    let values = omegas
        .par_iter()
        .map(|&w| sigma(rho, mass, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(SigmaCurve {
        omegas: omegas.to_vec(),
        values,
    })
}

/// Raw DFT of `Sigma(., omega)`.
fn sigma_profile_spectrum(rho: &CouplingProfile, mass: f64, omega: f64) -> Vec<Complex64> {
    let m2 = mass * mass;
    let w2 = omega * omega;
    rho.rho_hat()
        .iter()
        .zip(rho.grid().xi_sq())
        .map(|(r, &k2)| {
            let den = k2 + m2 - w2;
            if den == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                r / den
            }
        })
        .collect()
}

/// `Sigma(x, omega)`, the inverse transform of `hat rho / (xi^2 + m^2 - omega^2)`.
pub fn sigma_profile(rho: &CouplingProfile, mass: f64, omega: f64) -> Result<Vec<Complex64>> {
    admit_real(rho, mass, omega)?;
    Ok(rho.grid().to_physical(&sigma_profile_spectrum(rho, mass, omega)))
}

/// Frequencies `omega in (m, omega_max]` where `hat rho` vanishes on the resonant sphere.
///
/// In one dimension the two shell points are evaluated exactly and minima are
/// refined by golden-section search. In higher dimensions the shell is
/// replaced by the lattice band `| |xi| - k | <= dxi`, so zeros are only
/// resolved to the wavenumber spacing.
pub fn find_z_rho(rho: &CouplingProfile, mass: f64, omega_max: f64, tol: f64) -> Result<ZRhoSet> {
    check_mass(mass)?;
    if !(omega_max > mass) {
        return Err(invalid("omega_max", format!("must exceed m = {mass}, got {omega_max}")));
    }
    if !(tol >= 0.0) {
        return Err(invalid("tol", "must be >= 0"));
    }
    let grid = rho.grid();
    let dxi = grid.wavenumber_spacing();
    let k_max = (omega_max * omega_max - mass * mass).sqrt();
    let to_omega = |k: f64| (k * k + mass * mass).sqrt();

    let (hits, non_isolated) = if grid.dim() == 1 {
        scan_exact_shell(rho, k_max, dxi, tol)
    } else {
        scan_lattice_band(rho, k_max, dxi, tol)
    };
    if non_isolated {
        log::warn!("zero set of hat rho is not isolated at grid resolution; Z_rho may be infinite");
    }
    Ok(ZRhoSet {
        points: hits.into_iter().map(to_omega).filter(|&w| w <= omega_max).collect(),
        tolerance: tol,
        non_isolated,
    })
}

fn scan_exact_shell(rho: &CouplingProfile, k_max: f64, dxi: f64, tol: f64) -> (Vec<f64>, bool) {
    let step = dxi / 8.0;
    let count = (k_max / step).ceil() as usize;
    let ks: Vec<f64> = (1..=count).map(|j| (j as f64 * step).min(k_max)).collect();
    let s: Vec<f64> = ks.par_iter().map(|&k| shell_max(rho, k)).collect();

    let mut hits = Vec::new();
    let mut widest_run = 0.0f64;
    let mut run_start: Option<f64> = None;
    for (j, &k) in ks.iter().enumerate() {
        if s[j] < tol {
            run_start.get_or_insert(k);
            widest_run = widest_run.max(k - run_start.unwrap());
        } else {
            run_start = None;
        }
        let left = if j > 0 { s[j - 1] } else { f64::INFINITY };
        let right = s.get(j + 1).copied().unwrap_or(f64::INFINITY);
        if s[j] <= left && s[j] <= right {
            let lo = if j > 0 { ks[j - 1] } else { 0.5 * k };
            let hi = ks.get(j + 1).copied().unwrap_or(k);
            let k_star = golden_min(|k| shell_max(rho, k), lo, hi, 1e-13 * hi.max(1.0));
            if shell_max(rho, k_star) < tol {
                hits.push(k_star);
            }
        }
    }
    (cluster(hits, dxi), widest_run > 2.0 * dxi)
}

fn scan_lattice_band(rho: &CouplingProfile, k_max: f64, dxi: f64, tol: f64) -> (Vec<f64>, bool) {
    let grid = rho.grid();
    let cell = grid.cell_volume();
    let radial: Vec<(f64, f64)> = grid
        .xi_sq()
        .iter()
        .zip(rho.rho_hat())
        .map(|(&k2, r)| (k2.sqrt(), r.norm() * cell))
        .collect();
    let step = dxi / 2.0;
    let count = (k_max / step).ceil() as usize;
    let ks: Vec<f64> = (1..=count).map(|j| (j as f64 * step).min(k_max)).collect();
    let s: Vec<f64> = ks
        .par_iter()
        .map(|&k| {
            radial
                .iter()
                .filter(|(q, _)| (q - k).abs() <= dxi)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max)
        })
        .collect();
    let mut hits = Vec::new();
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for j in 0..=ks.len() {
        let below = j < ks.len() && s[j] < tol;
        match (below, start) {
            (true, None) => start = Some(j),
            (false, Some(a)) => {
                runs.push((ks[a], ks[j - 1]));
                start = None;
            }
            _ => {}
        }
    }
    let mut wide = false;
    for (a, b) in runs {
        wide |= b - a > 2.0 * dxi;
        hits.push(0.5 * (a + b));
    }
    (hits, wide)
}

fn cluster(mut points: Vec<f64>, resolution: f64) -> Vec<f64> {
    points.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        match out.last_mut() {
            Some(c) if p - c.last().unwrap() <= resolution => c.push(p),
            _ => out.push(vec![p]),
        }
    }
    out.into_iter()
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Nonnegative roots `r = |c|^2` of `s alpha(r s^2) = 1`, ascending.
pub fn solve_amplitudes(potential: &PolynomialPotential, s: f64) -> Result<Vec<f64>> {
    if s == 0.0 {
        return Err(Error::DegenerateSigma);
    }
    if !s.is_finite() {
        return Err(invalid("sigma", "must be finite"));
    }
    let s2 = s * s;
    let mut poly: Vec<f64> = potential
        .alpha_coeffs()
        .iter()
        .enumerate()
        .map(|(k, a)| a * s2.powi(k as i32))
        .collect();
    poly[0] -= 1.0 / s;
    let scale = poly.iter().map(|c| c.abs()).fold(0.0, f64::max);
    let mut roots: Vec<f64> = real_roots(&poly)
        .into_iter()
        .filter_map(|r| {
            if r >= 0.0 {
                Some(r)
            } else if poly_eval(&poly, 0.0).abs() <= 1e-14 * scale && r > -1e-12 {
                Some(0.0)
            } else {
                None
            }
        })
        .collect();
    roots.dedup();
    // r = 0 gives c = 0, the zero wave, which is not an amplitude root
    roots.retain(|&r| r > 0.0);
    Ok(roots)
}

/// Discrete check of the endpoint condition at `|omega| = m`.
///
/// For `n = 3` the integral converges for every Schwartz `rho`. For `n <= 2`
/// it converges exactly when `hat rho` vanishes to second order at the
/// origin, i.e. `integral rho = 0` and `integral x rho = 0`.
pub fn endpoint_condition(rho: &CouplingProfile) -> EndpointReport {
    let grid = rho.grid();
    let cell = grid.cell_volume();
    let sum: f64 = rho
        .rho_hat()
        .iter()
        .zip(grid.xi_sq())
        .filter(|(_, &k2)| k2 > 0.0)
        .map(|(r, &k2)| (r.norm_sqr() * cell * cell) / (k2 * k2))
        .sum::<f64>()
        / grid.box_length().powi(grid.dim() as i32);
    let zero_mode_ratio = rho.rho_hat()[0].norm() / rho.rho_hat_max();

    let mut moments = vec![0.0; grid.dim()];
    let mut weight = 0.0;
    for (idx, &v) in rho.values().iter().enumerate() {
        let x = grid.coords_of(idx);
        for (m, xj) in moments.iter_mut().zip(&x) {
            *m += xj * v;
        }
        weight += x.iter().map(|c| c * c).sum::<f64>().sqrt() * v.abs();
    }
    let first_moment_ratio = if weight > 0.0 {
        moments.iter().map(|m| m.abs()).fold(0.0, f64::max) / weight
    } else {
        0.0
    };
    let passes = grid.dim() >= 3 || (zero_mode_ratio <= 1e-10 && first_moment_ratio <= 1e-10);
    EndpointReport {
        discrete_sum: sum,
        zero_mode_ratio,
        first_moment_ratio,
        passes,
    }
}

/// Stationary-equation residual `||(Delta - m^2 + omega^2) phi + rho F(<rho, phi>)|| / ||phi||`.
pub fn stationary_residual(model: &Model, omega: f64, profile: &[Complex64]) -> Result<f64> {
    let grid = model.grid();
    grid.check_len(profile.len())?;
    let m2 = model.mass * model.mass;
    let w2 = omega * omega;
    let force = model.potential.eval_f(model.rho.pair(profile));
    let mut spec = grid.to_spectral(profile);
    for ((v, &k2), r) in spec.iter_mut().zip(grid.xi_sq()).zip(model.rho.rho_hat()) {
        *v = *v * (w2 - k2 - m2) + force * r;
    }
    let num = grid.spectral_weighted_norm_sq(&spec, |_| 1.0).sqrt();
    let den = grid.l2_norm_sq(profile).sqrt();
    Ok(if den > 0.0 { num / den } else { num })
}

/// Amplitude moduli `|c|^2` of the nonzero solitary waves at `omega`.
pub fn amplitude_branches(model: &Model, omega: f64) -> Result<Vec<f64>> {
    let s = sigma(&model.rho, model.mass, omega)?;
    solve_amplitudes(&model.potential, s)
}

/// The solitary wave at `omega` on amplitude branch `branch` (index into
/// [`amplitude_branches`]) with phase `theta`.
pub fn build_solitary(model: &Model, omega: f64, theta: f64, branch: usize) -> Result<SolitaryWave> {
    let s = sigma(&model.rho, model.mass, omega)?;
    if omega.abs() == model.mass {
        let report = endpoint_condition(&model.rho);
        if !report.passes {
            return Err(Error::InadmissibleFrequency {
                omega,
                reason: format!(
                    "endpoint condition fails on the grid (|hat rho(0)| ratio {:.3e}, first moment ratio {:.3e})",
                    report.zero_mode_ratio, report.first_moment_ratio
                ),
            });
        }
    }
    let roots = solve_amplitudes(&model.potential, s)?;
    if roots.is_empty() {
        return Err(Error::NoAdmissibleAmplitude { omega, sigma: s });
    }
    let r = *roots.get(branch).ok_or_else(|| {
        invalid(
            "branch",
            format!("{branch} out of range; {} branch(es) exist", roots.len()),
        )
    })?;
    let c = Complex64::from_polar(r.sqrt(), theta);
    let grid = model.grid().clone();
    let mut spec = sigma_profile_spectrum(&model.rho, model.mass, omega);
    for v in spec.iter_mut() {
        *v *= c;
    }
    let profile = grid.to_physical(&spec);
    let pi = profile.iter().map(|z| z * Complex64::new(0.0, -omega)).collect();
    let state = FieldState::new(grid, profile.clone(), pi, 0.0)?;
    let residual = stationary_residual(model, omega, &profile)?;
    Ok(SolitaryWave {
        omega,
        amplitude: c,
        sigma: s,
        energy: energy(&state, &model.rho, &model.potential, model.mass)?,
        charge: charge(&state),
        residual,
        profile,
        state,
    })
}

/// `count` uniformly spaced frequencies in `[-m + delta, m - delta]`, `delta = 0.01 m`.
pub fn default_omega_grid(mass: f64, count: usize) -> Vec<f64> {
    let edge = mass * 0.99;
    if count <= 1 {
        return vec![0.0];
    }
    (0..count)
        .map(|j| -edge + 2.0 * edge * j as f64 / (count - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDistance {
    pub distance: f64,
    /// `None` when the zero wave is closest.
    pub best_omega: Option<f64>,
    pub best_amplitude_sq: f64,
}

/// Precomputed images of the sampled solitary waves under a seminorm.
#[derive(Debug, Clone)]
pub struct ManifoldSampler {
    op: SeminormOperator,
    waves: Vec<(f64, f64, Weighted, f64)>,
}

impl ManifoldSampler {
    /// Samples every amplitude branch at every frequency of `omega_grid`.
    /// Frequencies without a nonzero wave contribute nothing.
    pub fn new(model: &Model, spec: SeminormSpec, omega_grid: &[f64]) -> Result<Self> {
        if omega_grid.is_empty() {
            return Err(invalid("omega_grid", "must not be empty"));
        }
        let grid = model.grid();
        let op = SeminormOperator::new(grid, spec, model.mass)?;
        let per_omega = omega_grid
            .par_iter()
            .map(|&w| -> Result<Vec<(f64, f64, Weighted, f64)>> {
                let branches = amplitude_branches(model, w)?;
                branches
                    .iter()
                    .enumerate()
                    .map(|(b, &r)| {
                        let wave = build_solitary(model, w, 0.0, b)?;
                        let img = op.apply(wave.state())?;
                        let n2 = SeminormOperator::norm_sq(grid, &img);
                        Ok((w, r, img, n2))
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            op,
            waves: per_omega.into_iter().flatten().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.waves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waves.is_empty()
    }

    /// Distance from `state` to the sampled manifold, minimizing over the phase in closed form.
    pub fn distance(&self, state: &FieldState) -> Result<ManifoldDistance> {
        let grid = state.grid();
        let img = self.op.apply(state)?;
        let n2 = SeminormOperator::norm_sq(grid, &img);
        // d^2 = |Psi|^2 + |s|^2 - 2|<s, Psi>| loses about sqrt(eps) relative
        // accuracy near the manifold, so near-optimal candidates are recomputed
        // from the difference vector.
        let scored: Vec<(usize, f64, Complex64)> = self
            .waves
            .iter()
            .enumerate()
            .map(|(j, (_, _, s, s2))| {
                let cross = SeminormOperator::inner(grid, s, &img);
                (j, (n2 + s2 - 2.0 * cross.norm()).max(0.0), cross)
            })
            .collect();
        let coarse_min = scored.iter().map(|c| c.1).fold(n2, f64::min);
        let mut best = ManifoldDistance {
            distance: n2.sqrt(),
            best_omega: None,
            best_amplitude_sq: 0.0,
        };
        let mut best_sq = n2;
        for (j, d2, cross) in scored {
            let (w, r, s, s2) = &self.waves[j];
            if d2 > coarse_min + 1e-12 * (n2 + s2) {
                continue;
            }
            let phase = if cross.norm() > 0.0 {
                cross / cross.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            let diff = Weighted {
                psi: img.psi.iter().zip(&s.psi).map(|(a, b)| a - b * phase).collect(),
                pi: img.pi.iter().zip(&s.pi).map(|(a, b)| a - b * phase).collect(),
            };
            let exact = SeminormOperator::norm_sq(grid, &diff);
            if exact < best_sq {
                best_sq = exact;
                best = ManifoldDistance {
                    distance: exact.sqrt(),
                    best_omega: Some(*w),
                    best_amplitude_sq: *r,
                };
            }
        }
        Ok(best)
    }
}

/// One-shot distance to the solitary manifold sampled on `omega_grid`.
pub fn manifold_distance(
    state: &FieldState,
    model: &Model,
    spec: SeminormSpec,
    omega_grid: &[f64],
) -> Result<ManifoldDistance> {
    ManifoldSampler::new(model, spec, omega_grid)?.distance(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::sync::Arc;

    fn gaussian_model(n: usize, l: f64) -> Model {
        let g = make_grid(1, n, l).unwrap();
        Model::new(
            1.0,
            CouplingProfile::gaussian(g, 1.0, 1.0).unwrap(),
            PolynomialPotential::new(vec![-1.0, 1.0]).unwrap(),
        )
        .unwrap()
    }

    /// Adaptive Simpson on `[a, b]`.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    #[test]
    fn sigma_matches_quadrature_at_zero() {
        let m = gaussian_model(2048, 128.0);
        let got = sigma(&m.rho, 1.0, 0.0).unwrap();
        let f = |xi: f64| 2.0 * PI * (-xi * xi).exp() / (xi * xi + 1.0) / (2.0 * PI);
        let want = simpson(&f, -12.0, 12.0, 1e-13);
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn sigma_is_even_and_increasing() {
        let m = gaussian_model(512, 64.0);
        for w in [0.1, 0.5, 0.9] {
            assert_eq!(sigma(&m.rho, 1.0, w).unwrap(), sigma(&m.rho, 1.0, -w).unwrap());
        }
        let s = |w| sigma(&m.rho, 1.0, w).unwrap();
        assert!(s(0.8) > s(0.3) && s(0.3) > s(0.0));
    }

    #[test]
    fn sigma_rejects_off_shell_frequency() {
        let m = gaussian_model(256, 32.0);
        assert!(matches!(
            sigma(&m.rho, 1.0, 1.5),
            Err(Error::InadmissibleFrequency { .. })
        ));
        let c = sigma_complex(&m.rho, 1.0, Complex64::new(1.5, 0.1)).unwrap();
        assert!(c.im > 0.0);
        assert!(sigma_complex(&m.rho, 1.0, Complex64::new(0.5, -0.1)).is_err());
    }

    #[test]
    fn sigma_profile_identities() {
        let m = gaussian_model(512, 64.0);
        let grid = m.grid();
        for w in [0.0, 0.5] {
            let prof = sigma_profile(&m.rho, 1.0, w).unwrap();
            assert!(prof.iter().all(|z| z.im.abs() < 1e-12));
            let pair = m.rho.pair(&prof);
            assert!((pair.re - sigma(&m.rho, 1.0, w).unwrap()).abs() < 1e-10);
            // (Delta - m^2 + omega^2) Sigma + rho = 0, operator applied spectrally
            let applied = grid.apply_multiplier(&prof, |k2| -(k2 + 1.0 - w * w));
            let resid = applied
                .iter()
                .zip(m.rho.values())
                .map(|(a, r)| (a + *r).norm())
                .fold(0.0, f64::max);
            assert!(resid < 1e-10, "{resid}");
        }
    }

    #[test]
    fn amplitude_examples() {
        let p = PolynomialPotential::new(vec![-1.0, 1.0]).unwrap();
        let r = solve_amplitudes(&p, 1.0).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.25).abs() < 1e-15);
        assert!(solve_amplitudes(&p, 0.4).unwrap().is_empty());
        let q = PolynomialPotential::new(vec![0.0, 1.0]).unwrap();
        assert!(solve_amplitudes(&q, 0.7).unwrap().is_empty());
        assert!(matches!(solve_amplitudes(&p, 0.0), Err(Error::DegenerateSigma)));
    }

    proptest::proptest! {
        #[test]
        fn amplitude_roots_satisfy_condition(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, c3 in 0.05f64..2.0, s in 0.05f64..3.0) {
            let p = PolynomialPotential::new(vec![c1, c2, c3]).unwrap();
            for r in solve_amplitudes(&p, s).unwrap() {
                let v = s * p.alpha(r * s * s);
                proptest::prop_assert!((v - 1.0).abs() < 1e-10, "{}", v);
            }
        }

        #[test]
        fn distance_is_phase_invariant(seed in 0u64..50, theta in 0.0f64..std::f64::consts::TAU) {
            let m = gaussian_model(256, 32.0);
            let st = crate::field::test_support::random_state(m.grid(), seed);
            let sampler = ManifoldSampler::new(&m, SeminormSpec::uncut(0.0), &default_omega_grid(1.0, 21)).unwrap();
            let a = sampler.distance(&st).unwrap().distance;
            let b = sampler.distance(&st.rotated(theta)).unwrap().distance;
            proptest::prop_assert!((a - b).abs() < 1e-10 * (1.0 + a));
        }
    }

    fn scaled_model(omega: f64) -> Model {
        let base = gaussian_model(1024, 64.0);
        let s = sigma(&base.rho, 1.0, omega).unwrap();
        Model::new(1.0, base.rho.scaled(1.0 / s.sqrt()).unwrap(), base.potential).unwrap()
    }

    #[test]
    fn build_solitary_residual_and_consistency() {
        let m = scaled_model(0.5);
        assert!((sigma(&m.rho, 1.0, 0.5).unwrap() - 1.0).abs() < 1e-12);
        let w = build_solitary(&m, 0.5, 0.0, 0).unwrap();
        assert!(w.residual < 1e-8, "{}", w.residual);
        assert!((w.amplitude.norm() - 0.5).abs() < 1e-12);
        let gamma = m.rho.pair(&w.profile);
        assert!((gamma - w.amplitude * w.sigma).norm() < 1e-10);
        let rot = build_solitary(&m, 0.5, 0.7, 0).unwrap();
        let phase = Complex64::from_polar(1.0, 0.7);
        for (a, b) in rot.profile.iter().zip(&w.profile) {
            assert!((a - b * phase).norm() < 1e-14);
        }
        assert!(build_solitary(&m, 0.5, 0.0, 1).is_err());
    }

    #[test]
    fn build_solitary_rejects_endpoint_for_gaussian() {
        let m = gaussian_model(256, 32.0);
        let rep = endpoint_condition(&m.rho);
        assert!(!rep.passes);
        assert!(build_solitary(&m, 1.0, 0.0, 0).is_err());
    }

    #[test]
    fn endpoint_condition_for_second_order_zero() {
        // hat rho = xi^2 exp(-xi^2/2) vanishes to second order at 0
        let g = make_grid(1, 512, 64.0).unwrap();
        let rho = CouplingProfile::from_radial_spectrum(g, |k2| k2 * (-k2 / 2.0).exp()).unwrap();
        let rep = endpoint_condition(&rho);
        assert!(rep.passes, "{rep:?}");
        assert!(rep.discrete_sum.is_finite() && rep.discrete_sum > 0.0);
    }

    #[test]
    fn z_rho_examples() {
        let m = gaussian_model(1024, 64.0);
        assert!(find_z_rho(&m.rho, 1.0, 3.0, 1e-10).unwrap().is_empty());
        assert!(find_z_rho(&m.rho, 1.0, 3.0, 0.0).unwrap().is_empty());

        let k1_sq = 3.0;
        let rho =
            CouplingProfile::from_radial_spectrum(m.grid().clone(), |k2| (k2 - k1_sq) * (-k2 / 2.0).exp()).unwrap();
        let z = find_z_rho(&rho, 1.0, 3.5, 1e-10).unwrap();
        assert_eq!(z.points.len(), 1, "{z:?}");
        assert!((z.points[0] - 2.0).abs() < m.grid().wavenumber_spacing());
        assert!(!z.non_isolated);
        // sigma is defined there
        assert!(sigma(&rho, 1.0, z.points[0]).is_ok());
    }

    #[test]
    fn z_rho_in_two_dimensions() {
        let g = make_grid(2, 128, 64.0).unwrap();
        let rho = CouplingProfile::from_radial_spectrum(g.clone(), |k2| (k2 - 3.0) * (-k2 / 2.0).exp()).unwrap();
        let z = find_z_rho(&rho, 1.0, 3.0, 0.1).unwrap();
        assert_eq!(z.points.len(), 1, "{z:?}");
        assert!((z.points[0] - 2.0).abs() < 2.0 * g.wavenumber_spacing());
    }

    #[test]
    fn manifold_distance_examples() {
        let m = scaled_model(0.5);
        let omegas = default_omega_grid(1.0, 201);
        let omega = omegas[150];
        let sampler = ManifoldSampler::new(&m, SeminormSpec::with_default_width(m.grid(), 0.0, 8.0), &omegas).unwrap();
        let wave = build_solitary(&m, omega, 1.1, 0).unwrap();
        let d = sampler.distance(wave.state()).unwrap();
        assert!(d.distance < 1e-8, "{d:?}");
        assert_eq!(d.best_omega, Some(omega));

        let zero = FieldState::zero(m.grid().clone());
        let d = sampler.distance(&zero).unwrap();
        assert_eq!(d.distance, 0.0);
        assert_eq!(d.best_omega, None);

        assert!(ManifoldSampler::new(&m, SeminormSpec::uncut(0.0), &[]).is_err());
    }

    #[test]
    fn perturbation_bound() {
        let m = scaled_model(0.5);
        let grid: &Arc<_> = m.grid();
        let omegas = default_omega_grid(1.0, 41);
        let spec = SeminormSpec::uncut(0.0);
        let sampler = ManifoldSampler::new(&m, spec, &omegas).unwrap();
        let wave = build_solitary(&m, omegas[30], 0.0, 0).unwrap();
        let op = SeminormOperator::new(grid, spec, 1.0).unwrap();
        let bump: Vec<Complex64> = grid
            .axis_coords()
            .iter()
            .map(|x| Complex64::new(0.0, (x - 3.0) * (-(x - 3.0).powi(2)).exp()))
            .collect();
        let e = FieldState::new(grid.clone(), bump.clone(), bump, 0.0).unwrap();
        let unit = e.rotated(0.0);
        let norm = op.norm(&unit).unwrap();
        for delta in [1e-3, 1e-2] {
            let pert = wave
                .state()
                .add_scaled(&unit, Complex64::new(delta / norm, 0.0))
                .unwrap();
            let d = sampler.distance(&pert).unwrap().distance;
            assert!(d <= delta * (1.0 + 1e-6), "{d} > {delta}");
        }
    }
}
