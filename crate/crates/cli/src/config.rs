//! JSON run configuration.
//!
//! `grid` and `potential` are required; every other section has defaults.
//! Unknown keys are rejected and schema errors carry the offending field path.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mfkg_core::{
    build_rho, make_grid, CouplingProfile, Grid, Integrator, Model, Observers, PolynomialPotential, SeminormSpec,
    Sponge, Taper,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Simulate,
    Solitary,
    Sigma,
    Distance,
    Spectrum,
    Counterexample,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Solitary => "solitary",
            ExperimentKind::Sigma => "sigma",
            ExperimentKind::Distance => "distance",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Counterexample => "counterexample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "default_experiment")]
    pub experiment: ExperimentKind,
    /// Seed of the random initial data.
    #[serde(default)]
    pub seed: u64,
    /// Not echoed, so identical runs into different directories produce identical files.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub rho: RhoConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub observers: ObserverConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub sigma: SigmaConfig,
    #[serde(default)]
    pub solitary: SolitaryConfig,
    #[serde(default)]
    pub distance: DistanceConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub counterexample: CounterexampleConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// `[u_1, ..., u_p]`.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum RhoConfig {
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
    },
    /// JSON array of `N^n` real samples in row-major order.
    File { path: PathBuf },
    /// Coupling whose transform vanishes on the `omega1` shell; `omega1` defaults to `2m`.
    Counterexample {
        #[serde(default)]
        omega1: Option<f64>,
    },
}

impl Default for RhoConfig {
    fn default() -> Self {
        RhoConfig::Gaussian {
            amplitude: 1.0,
            width: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub sponge: Option<Sponge>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_final: default_t_final(),
            sponge: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    /// Steps between recorded samples.
    #[serde(default = "default_sample_stride")]
    pub sample_stride: usize,
    #[serde(default)]
    pub seminorms: Vec<SeminormConfig>,
    /// Samples between MFKG1 snapshots; 0 disables them.
    #[serde(default)]
    pub snapshot_stride: usize,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            sample_stride: default_sample_stride(),
            seminorms: Vec::new(),
            snapshot_stride: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeminormConfig {
    #[serde(default)]
    pub epsilon: f64,
    /// Omitted for the global norm.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Defaults to `L/16`.
    #[serde(default)]
    pub cutoff_width: Option<f64>,
}

impl SeminormConfig {
    pub fn spec(&self, grid: &Grid) -> SeminormSpec {
        match (self.radius, self.cutoff_width) {
            (None, _) => SeminormSpec::uncut(self.epsilon),
            (Some(r), None) => SeminormSpec::with_default_width(grid, self.epsilon, r),
            (Some(r), Some(w)) => SeminormSpec::new(self.epsilon, r, w),
        }
    }

    /// CSV column name.
    pub fn column(&self) -> String {
        let mut name = match self.radius {
            Some(r) => format!("seminorm_R{r}"),
            None => "seminorm_Rinf".to_string(),
        };
        if self.epsilon != 0.0 {
            name.push_str(&format!("_eps{}", self.epsilon));
        }
        name
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    /// Seeded band-limited noise; the seed is the top-level `seed`.
    Random {
        #[serde(default = "two")]
        band: f64,
        #[serde(default = "three")]
        envelope: f64,
        #[serde(default = "one")]
        energy_norm: f64,
    },
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        k: f64,
    },
    Solitary {
        omega: f64,
        #[serde(default)]
        branch: usize,
        #[serde(default)]
        theta: f64,
    },
    Snapshot {
        path: PathBuf,
    },
    Zero,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Random {
            band: 2.0,
            envelope: 3.0,
            energy_norm: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaConfig {
    /// Defaults to `-0.99 m`.
    #[serde(default)]
    pub omega_min: Option<f64>,
    /// Defaults to `0.99 m`.
    #[serde(default)]
    pub omega_max: Option<f64>,
    #[serde(default = "default_sigma_count")]
    pub count: usize,
    /// Upper end of the `Z_rho` search; defaults to `3m`.
    #[serde(default)]
    pub z_rho_max: Option<f64>,
    #[serde(default = "default_shell_tolerance")]
    pub z_rho_tolerance: f64,
}

impl Default for SigmaConfig {
    fn default() -> Self {
        Self {
            omega_min: None,
            omega_max: None,
            count: default_sigma_count(),
            z_rho_max: None,
            z_rho_tolerance: default_shell_tolerance(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolitaryConfig {
    #[serde(default = "half")]
    pub omega: f64,
    #[serde(default)]
    pub branch: usize,
    #[serde(default)]
    pub theta: f64,
}

impl Default for SolitaryConfig {
    fn default() -> Self {
        Self {
            omega: 0.5,
            branch: 0,
            theta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceConfig {
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
    #[serde(default = "default_distance_norm")]
    pub norm: SeminormConfig,
    #[serde(default = "default_omega_count")]
    pub omega_count: usize,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        Self {
            snapshot: None,
            norm: default_distance_norm(),
            omega_count: default_omega_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default)]
    pub trajectory: Option<PathBuf>,
    #[serde(default = "default_window")]
    pub window_width: f64,
    #[serde(default = "three_usize")]
    pub windows: usize,
    #[serde(default = "default_taper")]
    pub taper: Taper,
    #[serde(default = "three")]
    pub neighborhood_bins: f64,
    /// Mass fraction for the support endpoints.
    #[serde(default = "default_mass_fraction")]
    pub mass_fraction: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            trajectory: None,
            window_width: default_window(),
            windows: 3,
            taper: default_taper(),
            neighborhood_bins: 3.0,
            mass_fraction: default_mass_fraction(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    /// Defaults to `2m`.
    #[serde(default)]
    pub omega1: Option<f64>,
    #[serde(default = "minus_one")]
    pub b: f64,
    #[serde(default = "default_ce_t_final")]
    pub t_final: f64,
    #[serde(default = "default_ce_window")]
    pub window_width: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            omega1: None,
            b: -1.0,
            t_final: default_ce_t_final(),
            window_width: default_ce_window(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn three() -> f64 {
    3.0
}
fn three_usize() -> usize {
    3
}
fn half() -> f64 {
    0.5
}
fn minus_one() -> f64 {
    -1.0
}
fn default_experiment() -> ExperimentKind {
    ExperimentKind::Simulate
}
fn default_dt() -> f64 {
    0.01
}
fn default_t_final() -> f64 {
    100.0
}
fn default_sample_stride() -> usize {
    10
}
fn default_sigma_count() -> usize {
    199
}
fn default_shell_tolerance() -> f64 {
    mfkg_core::solitary::SHELL_TOLERANCE
}
fn default_omega_count() -> usize {
    201
}
fn default_distance_norm() -> SeminormConfig {
    SeminormConfig {
        epsilon: 0.0,
        radius: Some(8.0),
        cutoff_width: None,
    }
}
fn default_window() -> f64 {
    50.0
}
fn default_taper() -> Taper {
    Taper::Hann
}
fn default_mass_fraction() -> f64 {
    0.99
}
fn default_ce_t_final() -> f64 {
    50.0
}
fn default_ce_window() -> f64 {
    40.0
}

impl Default for RunConfig {
    /// One dimension, `N = 2048`, `L = 128`, `U(r) = -r + r^2`.
    fn default() -> Self {
        Self {
            grid: GridConfig {
                dim: 1,
                n: 2048,
                length: 128.0,
            },
            potential: PotentialConfig {
                coeffs: vec![-1.0, 1.0],
            },
            mass: 1.0,
            experiment: ExperimentKind::Simulate,
            seed: 0,
            output_dir: None,
            rho: RhoConfig::default(),
            integrator: IntegratorConfig::default(),
            observers: ObserverConfig::default(),
            initial: InitialConfig::default(),
            sigma: SigmaConfig::default(),
            solitary: SolitaryConfig::default(),
            distance: DistanceConfig::default(),
            spectrum: SpectrumConfig::default(),
            counterexample: CounterexampleConfig::default(),
        }
    }
}

/// Parses a configuration without validating it.
pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|source| CliError::Schema {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads, parses, fills mass-dependent defaults and validates.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = parse_config(&text, path)?;
    cfg.finalize();
    cfg.validate()?;
    Ok(cfg)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Fills defaults that depend on `mass`.
    pub fn finalize(&mut self) {
        let m = self.mass;
        self.sigma.omega_min.get_or_insert(-0.99 * m);
        self.sigma.omega_max.get_or_insert(0.99 * m);
        self.sigma.z_rho_max.get_or_insert(3.0 * m);
        self.counterexample.omega1.get_or_insert(2.0 * m);
        if let RhoConfig::Counterexample { omega1 } = &mut self.rho {
            omega1.get_or_insert(2.0 * m);
        }
    }

    /// Re-checks every cross-field constraint of the core types.
    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        let grid = self.make_grid()?;
        PolynomialPotential::new(self.potential.coeffs.clone())?;
        self.integrator()?.validate(&grid)?;
        positive("integrator.t_final", self.integrator.t_final)?;
        for s in &self.observers.seminorms {
            s.spec(&grid).validate(&grid)?;
        }
        self.distance.norm.spec(&grid).validate(&grid)?;
        if let RhoConfig::Gaussian { amplitude, width } = self.rho {
            if !amplitude.is_finite() {
                return Err(CliError::Invalid("rho.amplitude must be finite".into()));
            }
            positive("rho.width", width)?;
        }
        if let InitialConfig::Random {
            band,
            envelope,
            energy_norm,
        } = self.initial
        {
            self.random_data(band, envelope, energy_norm).validate()?;
        }
        let (lo, hi) = self.sigma_range();
        if !(lo <= hi) || self.sigma.count == 0 {
            return Err(CliError::Invalid(format!(
                "sigma range [{lo}, {hi}] with {} points is empty",
                self.sigma.count
            )));
        }
        positive("sigma.z_rho_tolerance", self.sigma.z_rho_tolerance)?;
        if self.distance.omega_count == 0 {
            return Err(CliError::Invalid("distance.omega_count must be >= 1".into()));
        }
        positive("spectrum.window_width", self.spectrum.window_width)?;
        if self.spectrum.windows == 0 {
            return Err(CliError::Invalid("spectrum.windows must be >= 1".into()));
        }
        if !(self.spectrum.mass_fraction > 0.0 && self.spectrum.mass_fraction < 1.0) {
            return Err(CliError::Invalid(format!(
                "spectrum.mass_fraction must lie in (0, 1), got {}",
                self.spectrum.mass_fraction
            )));
        }
        positive("counterexample.t_final", self.counterexample.t_final)?;
        positive("counterexample.window_width", self.counterexample.window_width)?;
        if self.experiment == ExperimentKind::Counterexample
            && self.counterexample.window_width > self.counterexample.t_final
        {
            return Err(CliError::Invalid(format!(
                "counterexample.window_width {} exceeds counterexample.t_final {}",
                self.counterexample.window_width, self.counterexample.t_final
            )));
        }
        Ok(())
    }

    pub fn make_grid(&self) -> Result<Arc<Grid>> {
        Ok(make_grid(self.grid.dim, self.grid.n, self.grid.length)?)
    }

    pub fn potential(&self) -> Result<PolynomialPotential> {
        Ok(PolynomialPotential::new(self.potential.coeffs.clone())?)
    }

    pub fn integrator(&self) -> Result<Integrator> {
        if self.observers.sample_stride == 0 {
            return Err(CliError::Invalid("observers.sample_stride must be >= 1".into()));
        }
        let mut integ = Integrator::new(self.integrator.dt, self.observers.sample_stride);
        integ.sponge = self.integrator.sponge;
        Ok(integ)
    }

    pub fn observers(&self, grid: &Grid) -> Observers {
        Observers {
            seminorms: self.observers.seminorms.iter().map(|s| s.spec(grid)).collect(),
            snapshot_stride: 0,
        }
    }

    pub fn coupling(&self, grid: &Arc<Grid>) -> Result<CouplingProfile> {
        match &self.rho {
            RhoConfig::Gaussian { amplitude, width } => {
                Ok(CouplingProfile::gaussian(grid.clone(), *amplitude, *width)?)
            }
            RhoConfig::File { path } => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let values: Vec<f64> = serde_json::from_str(&text).map_err(|e| CliError::Input {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
                if values.len() != grid.len() {
                    return Err(CliError::Input {
                        path: path.clone(),
                        reason: format!("expected {} samples, found {}", grid.len(), values.len()),
                    });
                }
                Ok(CouplingProfile::from_real(grid.clone(), values)?)
            }
            RhoConfig::Counterexample { omega1 } => {
                Ok(build_rho(grid.clone(), self.mass, omega1.unwrap_or(2.0 * self.mass))?.rho)
            }
        }
    }

    pub fn model(&self) -> Result<Model> {
        let grid = self.make_grid()?;
        Ok(Model::new(self.mass, self.coupling(&grid)?, self.potential()?)?)
    }

    pub fn random_data(&self, band: f64, envelope: f64, energy_norm: f64) -> mfkg_core::RandomData {
        mfkg_core::RandomData {
            seed: self.seed,
            band,
            envelope,
            energy_norm,
        }
    }

    pub fn sigma_range(&self) -> (f64, f64) {
        (
            self.sigma.omega_min.unwrap_or(-0.99 * self.mass),
            self.sigma.omega_max.unwrap_or(0.99 * self.mass),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Path::new("test.json"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let mut cfg =
            parse(r#"{"grid": {"dim": 1, "n": 256, "length": 32}, "potential": {"coeffs": [-1, 1]}}"#).unwrap();
        cfg.finalize();
        cfg.validate().unwrap();
        assert_eq!(cfg.integrator.dt, 0.01);
        assert_eq!(cfg.mass, 1.0);
        assert_eq!(cfg.experiment, ExperimentKind::Simulate);
        assert_eq!(cfg.rho, RhoConfig::default());
        assert_eq!(cfg.sigma.omega_max, Some(0.99));
        assert_eq!(cfg.counterexample.omega1, Some(2.0));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = parse(r#"{"grid": {"dim": 1, "n": 256, "length": 32}, "potential": {"coeffs": [-1, 1]}, "integrator": {"dtt": 1}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("integrator"), "{err}");
        let err = parse(r#"{"potential": {"coeffs": [1]}}"#).unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
        let err =
            parse(r#"{"grid": {"dim": "one", "n": 256, "length": 32}, "potential": {"coeffs": [1]}}"#).unwrap_err();
        assert!(err.to_string().contains("grid.dim"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn constraint_violations() {
        let base = r#"{"grid": {"dim": 1, "n": 256, "length": 32}, "potential": {"coeffs": [1, -1]}}"#;
        let err = parse(base).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("u_p > 0"), "{err}");
        assert_eq!(err.exit_code(), 4);
        let err = parse(r#"{"grid": {"dim": 4, "n": 8, "length": 8}, "potential": {"coeffs": [0, 1]}}"#)
            .unwrap()
            .validate()
            .unwrap_err();
        assert_eq!(err.exit_code(), 4);
        let err = parse(r#"{"grid": {"dim": 1, "n": 256, "length": 32}, "potential": {"coeffs": [0, 1]}, "integrator": {"dt": 0.5}}"#)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");
    }

    #[test]
    fn tagged_sections_parse() {
        let cfg = parse(
            r#"{"grid": {"dim": 1, "n": 256, "length": 32}, "potential": {"coeffs": [0, 1]},
                "rho": {"preset": "counterexample"}, "initial": {"kind": "solitary", "omega": 0.3},
                "integrator": {"sponge": {"inner_radius": 10, "strength": 0.3}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.rho, RhoConfig::Counterexample { omega1: None });
        assert!(matches!(cfg.initial, InitialConfig::Solitary { omega, .. } if omega == 0.3));
        assert!(cfg.integrator.sponge.is_some());
        assert!(parse(r#"{"grid": {"dim": 1, "n": 256, "length": 32}, "potential": {"coeffs": [0, 1]}, "rho": {"preset": "cube"}}"#).is_err());
    }

    #[test]
    fn seminorm_columns() {
        let s = SeminormConfig {
            epsilon: 0.0,
            radius: Some(8.0),
            cutoff_width: None,
        };
        assert_eq!(s.column(), "seminorm_R8");
        let s = SeminormConfig {
            epsilon: 0.5,
            radius: None,
            cutoff_width: None,
        };
        assert_eq!(s.column(), "seminorm_Rinf_eps0.5");
    }
}
