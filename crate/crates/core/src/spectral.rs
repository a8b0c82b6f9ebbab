//! Windowed time spectra of `gamma(t) = <rho, psi(t)>` and `f(t) = F(gamma(t))`.
//!
//! Transforms use the kernel `e^{+i omega t}`, so `e^{-i omega_+ t}` peaks at
//! `+omega_+`: `tilde s(omega_k) = dt sum_j w_j s_j e^{i omega_k t_j}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Model, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::field::CouplingProfile;
use crate::potential::PolynomialPotential;
use crate::roots::golden_min;
use crate::seminorm::SeminormSpec;
use crate::solitary::{default_omega_grid, ManifoldDistance, ManifoldSampler};

/// Mass fraction used for support endpoints in the convolution-support check.
pub const TITCHMARSH_MASS_FRACTION: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    Hann,
    Rectangular,
}

impl Taper {
    /// Periodic taper weights of length `n`.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Taper::Hann => (0..n)
                .map(|j| 0.5 * (1.0 - (2.0 * PI * j as f64 / n as f64).cos()))
                .collect(),
            Taper::Rectangular => vec![1.0; n],
        }
    }
}

/// Uniformly sampled complex signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Complex64>,
}

impl Series {
    pub fn new(t0: f64, dt: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn from_fn(t0: f64, dt: f64, count: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(t0, dt, (0..count).map(|j| f(t0 + j as f64 * dt)).collect())
    }

    pub fn gamma(traj: &Trajectory) -> Result<Self> {
        Self::new(
            traj.samples.first().map_or(0.0, |s| s.t),
            traj.sample_dt()?,
            traj.gamma(),
        )
    }

    pub fn forcing(traj: &Trajectory) -> Result<Self> {
        Self::new(
            traj.samples.first().map_or(0.0, |s| s.t),
            traj.sample_dt()?,
            traj.forcing(),
        )
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Sample range `[start, start + n)` covering `[t_c - T_w/2, t_c + T_w/2)`.
    fn window_range(&self, t_c: f64, t_w: f64) -> Result<(usize, usize)> {
        let n = (t_w / self.dt).round();
        if !(n >= 4.0) {
            return Err(Error::InvalidWindow(format!(
                "width {t_w} holds fewer than 4 samples of spacing {}",
                self.dt
            )));
        }
        let start = ((t_c - 0.5 * t_w - self.t0) / self.dt).round();
        if start < 0.0 || start + n > self.values.len() as f64 {
            return Err(Error::InvalidWindow(format!(
                "window [{}, {}) exceeds the series [{}, {}]",
                t_c - 0.5 * t_w,
                t_c + 0.5 * t_w,
                self.t0,
                self.end_time()
            )));
        }
        Ok((start as usize, n as usize))
    }

    /// `|dt sum w_j s_j e^{i omega t_j}|` at an arbitrary frequency.
    fn dtft_abs(&self, start: usize, w: &[f64], omega: f64) -> f64 {
        let s: Complex64 = w
            .iter()
            .enumerate()
            .map(|(j, wj)| self.values[start + j] * *wj * Complex64::from_polar(1.0, omega * self.time(start + j)))
            .sum();
        s.norm() * self.dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Ascending, spanning `[-pi/dt, pi/dt)`.
    pub freqs: Vec<f64>,
    pub amps: Vec<Complex64>,
    pub center: f64,
    pub width: f64,
    pub taper: Taper,
    pub sample_dt: f64,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        2.0 * PI / self.width
    }

    pub fn power(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `sum |amps|^2 d omega`.
    pub fn total_mass(&self) -> f64 {
        self.power().iter().sum::<f64>() * self.bin_width()
    }

    pub fn peak_index(&self) -> Option<usize> {
        let p = self.power();
        let (idx, max) = p
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        (max > 0.0).then_some(idx)
    }

    pub fn dominant_frequency(&self) -> Option<f64> {
        self.peak_index().map(|i| self.freqs[i])
    }

    /// Fraction of mass in the peak bin and its two neighbours.
    pub fn concentration_ratio(&self) -> f64 {
        let p = self.power();
        let total: f64 = p.iter().sum();
        match self.peak_index() {
            None => 0.0,
            Some(i) => {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(p.len() - 1);
                p[lo..=hi].iter().sum::<f64>() / total
            }
        }
    }

    /// Mass fraction at frequencies satisfying `outside`.
    pub fn fraction_where(&self, outside: impl Fn(f64) -> bool) -> f64 {
        let p = self.power();
        let total: f64 = p.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        p.iter()
            .zip(&self.freqs)
            .filter(|(_, &w)| outside(w))
            .map(|(v, _)| v)
            .sum::<f64>()
            / total
    }
}

/// Tapered DFT of the samples in `[t_c - T_w/2, t_c + T_w/2)`.
pub fn windowed_spectrum(series: &Series, t_c: f64, t_w: f64, taper: Taper) -> Result<Spectrum> {
    let (start, n) = series.window_range(t_c, t_w)?;
    let w = taper.weights(n);
    let mut buf: Vec<Complex64> = (0..n).map(|j| series.values[start + j] * w[j]).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);

    let t_start = series.time(start);
    let width = n as f64 * series.dt;
    let half = n / 2;
    let mut freqs = Vec::with_capacity(n);
    let mut amps = Vec::with_capacity(n);
    for idx in 0..n {
        // ascending order: k = -half, ..., n - half - 1
        let k = idx as i64 - half as i64;
        let bin = k.rem_euclid(n as i64) as usize;
        let omega = 2.0 * PI * k as f64 / width;
        freqs.push(omega);
        amps.push(buf[bin] * series.dt * Complex64::from_polar(1.0, omega * t_start));
    }
    Ok(Spectrum {
        freqs,
        amps,
        center: t_start + 0.5 * width,
        width,
        taper,
        sample_dt: series.dt,
    })
}

/// Equal-tailed interval holding `mass_fraction` of the spectral mass.
pub fn support_estimate(spec: &Spectrum, mass_fraction: f64) -> Result<(f64, f64)> {
    if !(mass_fraction > 0.0 && mass_fraction < 1.0) {
        return Err(invalid(
            "mass_fraction",
            format!("must lie in (0, 1), got {mass_fraction}"),
        ));
    }
    let p = spec.power();
    let total: f64 = p.iter().sum();
    if p.is_empty() || total == 0.0 {
        return Err(Error::InsufficientData("spectrum carries no mass".into()));
    }
    let tail = 0.5 * (1.0 - mass_fraction) * total;
    let mut acc = 0.0;
    let mut lo = 0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if acc > tail {
            lo = i;
            break;
        }
    }
    acc = 0.0;
    let mut hi = p.len() - 1;
    for (i, v) in p.iter().enumerate().rev() {
        acc += v;
        if acc > tail {
            hi = i;
            break;
        }
    }
    Ok((spec.freqs[lo], spec.freqs[hi]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCurve {
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
}

/// `R(eta) = (2 pi)^{-n} integral_{|xi| = eta} |hat rho|^2 dS`.
///
/// One dimension: exact two-point sum. Higher dimensions: mean of `|hat rho|^2`
/// over lattice points with `| |xi| - eta | <= dxi`, times the sphere area.
pub fn shell_weight(rho: &CouplingProfile, eta: f64) -> f64 {
    let grid = rho.grid();
    let n = grid.dim();
    if n == 1 {
        let a = rho.rho_hat_at(&[eta]).norm_sqr();
        let b = rho.rho_hat_at(&[-eta]).norm_sqr();
        return (a + b) / (2.0 * PI);
    }
    let cell = grid.cell_volume();
    let dxi = grid.wavenumber_spacing();
    let (sum, count) = grid
        .xi_sq()
        .iter()
        .zip(rho.rho_hat())
        .filter(|(&k2, _)| (k2.sqrt() - eta).abs() <= dxi)
        .fold((0.0, 0usize), |(s, c), (_, r)| (s + r.norm_sqr() * cell * cell, c + 1));
    if count == 0 {
        return 0.0;
    }
    let area = match n {
        2 => 2.0 * PI * eta,
        _ => 4.0 * PI * eta * eta,
    };
    sum / count as f64 * area / (2.0 * PI).powi(n as i32)
}

/// `M(omega) = R(|k(omega)|) / omega^2` with `k(omega)^2 = omega^2 - m^2`.
pub fn weight_curve(rho: &CouplingProfile, mass: f64, omegas: &[f64]) -> Result<WeightCurve> {
    if let Some(&w) = omegas.iter().find(|w| w.abs() <= mass) {
        return Err(Error::InadmissibleFrequency {
            omega: w,
            reason: "weight is defined only for |omega| > m".into(),
        });
    }
    let values = omegas
        .par_iter()
        .map(|&w| shell_weight(rho, (w * w - mass * mass).sqrt()) / (w * w))
        .collect();
    Ok(WeightCurve {
        omegas: omegas.to_vec(),
        values,
    })
}

/// `sum_{|omega| > m} |tilde f|^2 M(omega) d omega` over one spectrum.
pub fn weighted_forcing_mass(spec: &Spectrum, rho: &CouplingProfile, mass: f64) -> f64 {
    let outside: Vec<(f64, f64)> = spec
        .freqs
        .iter()
        .zip(spec.power())
        .filter(|(w, _)| w.abs() > mass)
        .map(|(w, p)| (*w, p))
        .collect();
    let omegas: Vec<f64> = outside.iter().map(|(w, _)| *w).collect();
    let curve = weight_curve(rho, mass, &omegas).expect("frequencies filtered to |omega| > m");
    outside.iter().zip(&curve.values).map(|((_, p), m)| p * m).sum::<f64>() * spec.bin_width()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TitchmarshReport {
    pub degree: usize,
    /// Support `[a, b]` of `tilde gamma`.
    pub gamma_support: (f64, f64),
    /// Support `[A, B]` of `tilde g`, `g = F(gamma)`.
    pub g_support: (f64, f64),
    pub predicted_sup: f64,
    pub predicted_inf: f64,
    pub bin_width: f64,
    pub sup_deviation_bins: f64,
    pub inf_deviation_bins: f64,
}

impl TitchmarshReport {
    pub fn within(&self, bins: f64) -> bool {
        self.sup_deviation_bins < bins && self.inf_deviation_bins < bins
    }
}

/// Compares the support of `tilde g` with `sup = p b - (p-1) a`, `inf = p a - (p-1) b`.
pub fn titchmarsh_check(
    gamma: &Series,
    potential: &PolynomialPotential,
    t_c: f64,
    t_w: f64,
    taper: Taper,
    mass_fraction: f64,
) -> Result<TitchmarshReport> {
    let g = gamma.map(|z| potential.eval_f(z));
    let sg = windowed_spectrum(gamma, t_c, t_w, taper)?;
    let sf = windowed_spectrum(&g, t_c, t_w, taper)?;
    let (a, b) = support_estimate(&sg, mass_fraction)?;
    let (lo, hi) = support_estimate(&sf, mass_fraction)?;
    let p = potential.degree() as f64;
    let predicted_sup = p * b - (p - 1.0) * a;
    let predicted_inf = p * a - (p - 1.0) * b;
    let nyquist = PI / gamma.dt;
    if predicted_sup >= nyquist || predicted_inf < -nyquist {
        return Err(Error::InvalidWindow(format!(
            "predicted band [{predicted_inf}, {predicted_sup}] exceeds the Nyquist range of +-{nyquist}"
        )));
    }
    let bin = sg.bin_width();
    Ok(TitchmarshReport {
        degree: potential.degree(),
        gamma_support: (a, b),
        g_support: (lo, hi),
        predicted_sup,
        predicted_inf,
        bin_width: bin,
        sup_deviation_bins: (hi - predicted_sup).abs() / bin,
        inf_deviation_bins: (lo - predicted_inf).abs() / bin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionConfig {
    pub window_width: f64,
    pub windows: usize,
    pub taper: Taper,
    /// Half-width, in bins, of the neighbourhoods of `[-m, m]` and of `Z_rho`.
    pub neighborhood_bins: f64,
    /// Signed points of `Z_rho`.
    pub z_rho: Vec<f64>,
    pub distance_norm: SeminormSpec,
    pub omega_grid: Vec<f64>,
}

impl AttractionConfig {
    pub fn new(model: &Model, window_width: f64) -> Self {
        Self {
            window_width,
            windows: 3,
            taper: Taper::Hann,
            neighborhood_bins: 3.0,
            z_rho: Vec::new(),
            distance_norm: SeminormSpec::with_default_width(model.grid(), 0.0, 8.0),
            omega_grid: default_omega_grid(model.mass, 201),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub center: f64,
    /// Window width after snapping to a whole number of periods of `omega_plus`.
    pub width: f64,
    pub omega_plus: f64,
    pub concentration_ratio: f64,
    pub outside_fraction: f64,
    pub weighted_forcing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSample {
    pub t: f64,
    #[serde(flatten)]
    pub distance: ManifoldDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionReport {
    pub trivial: bool,
    pub windows: Vec<WindowReport>,
    pub distances: Vec<DistanceSample>,
}

impl AttractionReport {
    pub fn late_concentration(&self) -> Option<f64> {
        self.windows.last().map(|w| w.concentration_ratio)
    }

    /// Distances never grow by more than `allowance` relative to the previous sample.
    pub fn distance_non_increasing(&self, allowance: f64) -> bool {
        self.distances
            .windows(2)
            .all(|w| w[1].distance.distance <= w[0].distance.distance * (1.0 + allowance))
    }

    /// Outside fractions never grow by more than `allowance` and end below where they start.
    pub fn outside_fraction_decreasing(&self, allowance: f64) -> bool {
        let f: Vec<f64> = self.windows.iter().map(|w| w.outside_fraction).collect();
        f.len() >= 2 && f.windows(2).all(|w| w[1] <= w[0] * (1.0 + allowance)) && f.last() < f.first()
    }
}

/// Peak frequency of the tapered window refined by maximizing the continuous transform.
fn refined_peak(series: &Series, start: usize, n: usize, taper: Taper) -> Option<f64> {
    let w = taper.weights(n);
    let t_c = series.time(start) + 0.5 * n as f64 * series.dt;
    let spec = windowed_spectrum(series, t_c, n as f64 * series.dt, taper).ok()?;
    let peak = spec.dominant_frequency()?;
    let bin = spec.bin_width();
    Some(golden_min(
        |om| -series.dtft_abs(start, &w, om),
        peak - bin,
        peak + bin,
        1e-10 * bin,
    ))
}

/// Spectrum over the largest sub-window (same centre) that holds a whole
/// number of periods of the dominant frequency, so a pure tone sits on a bin.
pub fn snapped_spectrum(series: &Series, t_c: f64, t_w: f64, taper: Taper) -> Result<(Spectrum, f64)> {
    let (start, n) = series.window_range(t_c, t_w)?;
    let omega = refined_peak(series, start, n, taper).unwrap_or(0.0);
    let periods = omega.abs() * series.dt / (2.0 * PI);
    let mut best = n;
    if periods > 0.0 {
        let mut best_err = f64::INFINITY;
        let lo = (n as f64 * 0.8) as usize;
        for m in (lo.max(4)..=n).rev() {
            let x = periods * m as f64;
            let err = (x - x.round()).abs();
            if err < best_err - 1e-12 {
                best_err = err;
                best = m;
            }
        }
    }
    let center = series.time(start) + 0.5 * n as f64 * series.dt;
    let offset = (n - best) / 2;
    let new_center = series.time(start + offset) + 0.5 * best as f64 * series.dt;
    debug_assert!((new_center - center).abs() <= series.dt);
    let spec = windowed_spectrum(series, new_center, best as f64 * series.dt, taper)?;
    Ok((spec, omega))
}

/// Late-time windows of `gamma` and distances of the stored snapshots to the solitary manifold.
pub fn attraction_report(traj: &Trajectory, model: &Model, cfg: &AttractionConfig) -> Result<AttractionReport> {
    let gamma = Series::gamma(traj)?;
    let forcing = Series::forcing(traj)?;
    let trivial = gamma.values.iter().all(|z| z.norm() == 0.0);
    if cfg.windows == 0 {
        return Err(invalid("windows", "must be >= 1"));
    }
    let t_end = gamma.end_time();
    let needed = cfg.windows as f64 * cfg.window_width;
    if needed > t_end - gamma.t0 + 1e-9 {
        return Err(Error::InsufficientData(format!(
            "{} windows of width {} need {needed} time units, trajectory spans {}",
            cfg.windows,
            cfg.window_width,
            t_end - gamma.t0
        )));
    }
    let mut windows = Vec::new();
    if !trivial {
        for k in (0..cfg.windows).rev() {
            let t_c = t_end - (k as f64 + 0.5) * cfg.window_width;
            let (spec, omega_plus) = snapped_spectrum(&gamma, t_c, cfg.window_width, cfg.taper)?;
            let reach = cfg.neighborhood_bins * spec.bin_width();
            let outside_fraction = spec
                .fraction_where(|w| w.abs() > model.mass + reach && cfg.z_rho.iter().all(|z| (w - z).abs() > reach));
            let fspec = windowed_spectrum(&forcing, spec.center, spec.width, cfg.taper)?;
            windows.push(WindowReport {
                center: spec.center,
                width: spec.width,
                omega_plus,
                concentration_ratio: spec.concentration_ratio(),
                outside_fraction,
                weighted_forcing: weighted_forcing_mass(&fspec, &model.rho, model.mass),
            });
        }
    }
    let mut distances = Vec::new();
    if !traj.snapshots.is_empty() {
        let mut grid = cfg.omega_grid.clone();
        grid.extend(&cfg.z_rho);
        let sampler = ManifoldSampler::new(model, cfg.distance_norm, &grid)?;
        distances = traj
            .snapshots
            .par_iter()
            .map(|s| {
                Ok(DistanceSample {
                    t: s.time,
                    distance: sampler.distance(s)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(AttractionReport {
        trivial,
        windows,
        distances,
    })
}
