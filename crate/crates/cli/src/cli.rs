//! Command-line flags and their application on top of a configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mfkg_core::Sponge;

use crate::config::{parse_config, ExperimentKind, PotentialConfig, RunConfig, SeminormConfig};
use crate::error::{CliError, Result};

/// Thread count for the data-parallel loops.
pub const THREADS_ENV: &str = "MFKG_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "mfkg",
    version,
    about = "Mean-field Klein-Gordon simulator and analysis toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment named in the configuration file.
    Run(CommonArgs),
    /// Evolve initial data and record gamma, f, H, Q and local seminorms.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Energy norm of the random initial data.
        #[arg(long)]
        energy_norm: Option<f64>,
    },
    /// Build a solitary wave and report its stationary residual.
    Solitary {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, allow_hyphen_values = true)]
        omega: Option<f64>,
        #[arg(long)]
        branch: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
    },
    /// Tabulate sigma(omega) and locate Z_rho.
    Sigma {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, allow_hyphen_values = true)]
        omega_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        omega_max: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Distance of an MFKG1 snapshot to the solitary manifold.
    Distance {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Radius of the distance seminorm.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        omega_count: Option<usize>,
    },
    /// Windowed spectra of a trajectory CSV.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        window_width: Option<f64>,
        #[arg(long)]
        windows: Option<usize>,
    },
    /// Build and evolve the two-frequency solution.
    Counterexample {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        omega1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        /// Width of the spectral window at the end of the run.
        #[arg(long)]
        window_width: Option<f64>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Points per axis.
    #[arg(long)]
    pub n: Option<usize>,
    /// Box length.
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    /// Potential coefficients u_1,...,u_p.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Option<Vec<f64>>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long = "t-final", alias = "T")]
    pub t_final: Option<f64>,
    /// Enable the sponge with this inner radius.
    #[arg(long)]
    pub sponge_inner: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    pub sponge_strength: f64,
    #[arg(long, conflicts_with = "sponge_inner")]
    pub no_sponge: bool,
    /// Steps between samples.
    #[arg(long)]
    pub sample_stride: Option<usize>,
    /// Samples between snapshots.
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
    /// Record the local seminorm (epsilon 0) over a ball of this radius; repeatable.
    #[arg(long = "seminorm-radius")]
    pub seminorm_radius: Vec<f64>,
}

fn read_base(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            parse_config(&text, p)
        }
        None => Ok(RunConfig::default()),
    }
}

impl CommonArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = &self.out {
            cfg.output_dir = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.dim {
            cfg.grid.dim = v;
        }
        if let Some(v) = self.n {
            cfg.grid.n = v;
        }
        if let Some(v) = self.length {
            cfg.grid.length = v;
        }
        if let Some(v) = self.mass {
            cfg.mass = v;
        }
        if let Some(v) = &self.coeffs {
            cfg.potential = PotentialConfig { coeffs: v.clone() };
        }
        if let Some(v) = self.dt {
            cfg.integrator.dt = v;
        }
        if let Some(v) = self.t_final {
            if matches!(cfg.experiment, ExperimentKind::Counterexample) {
                cfg.counterexample.t_final = v;
            } else {
                cfg.integrator.t_final = v;
            }
        }
        if let Some(r) = self.sponge_inner {
            cfg.integrator.sponge = Some(Sponge {
                inner_radius: r,
                strength: self.sponge_strength,
            });
        }
        if self.no_sponge {
            cfg.integrator.sponge = None;
        }
        if let Some(v) = self.sample_stride {
            cfg.observers.sample_stride = v;
        }
        if let Some(v) = self.snapshot_stride {
            cfg.observers.snapshot_stride = v;
        }
        for &r in &self.seminorm_radius {
            cfg.observers.seminorms.push(SeminormConfig {
                epsilon: 0.0,
                radius: Some(r),
                cutoff_width: None,
            });
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Command {
    /// Experiment selected by the subcommand; `None` for `run`.
    pub fn kind(&self) -> Option<ExperimentKind> {
        Some(match self {
            Command::Run(_) => return None,
            Command::Simulate { .. } => ExperimentKind::Simulate,
            Command::Solitary { .. } => ExperimentKind::Solitary,
            Command::Sigma { .. } => ExperimentKind::Sigma,
            Command::Distance { .. } => ExperimentKind::Distance,
            Command::Spectrum { .. } => ExperimentKind::Spectrum,
            Command::Counterexample { .. } => ExperimentKind::Counterexample,
        })
    }

    /// Configuration file, then flag overrides, then mass-dependent defaults and validation.
    pub fn resolve(&self) -> Result<RunConfig> {
        let common = match self {
            Command::Run(c) => c,
            Command::Simulate { common, .. }
            | Command::Solitary { common, .. }
            | Command::Sigma { common, .. }
            | Command::Distance { common, .. }
            | Command::Spectrum { common, .. }
            | Command::Counterexample { common, .. } => common,
        };
        if matches!(self, Command::Run(_)) && common.config.is_none() {
            return Err(CliError::Invalid("`run` requires --config".into()));
        }
        let mut cfg = read_base(common.config.as_deref())?;
        if let Some(kind) = self.kind() {
            cfg.experiment = kind;
        }
        common.apply(&mut cfg);
        match self {
            Command::Run(_) => {}
            Command::Simulate { energy_norm, .. } => {
                if let (Some(e), crate::config::InitialConfig::Random { energy_norm, .. }) =
                    (*energy_norm, &mut cfg.initial)
                {
                    *energy_norm = e;
                }
            }
            Command::Solitary {
                omega, branch, theta, ..
            } => {
                set(&mut cfg.solitary.omega, *omega);
                set(&mut cfg.solitary.branch, *branch);
                set(&mut cfg.solitary.theta, *theta);
            }
            Command::Sigma {
                omega_min,
                omega_max,
                count,
                ..
            } => {
                if omega_min.is_some() {
                    cfg.sigma.omega_min = *omega_min;
                }
                if omega_max.is_some() {
                    cfg.sigma.omega_max = *omega_max;
                }
                set(&mut cfg.sigma.count, *count);
            }
            Command::Distance {
                snapshot,
                radius,
                omega_count,
                ..
            } => {
                if snapshot.is_some() {
                    cfg.distance.snapshot = snapshot.clone();
                }
                if radius.is_some() {
                    cfg.distance.norm.radius = *radius;
                }
                set(&mut cfg.distance.omega_count, *omega_count);
            }
            Command::Spectrum {
                trajectory,
                window_width,
                windows,
                ..
            } => {
                if trajectory.is_some() {
                    cfg.spectrum.trajectory = trajectory.clone();
                }
                set(&mut cfg.spectrum.window_width, *window_width);
                set(&mut cfg.spectrum.windows, *windows);
            }
            Command::Counterexample {
                omega1,
                b,
                window_width,
                ..
            } => {
                if omega1.is_some() {
                    cfg.counterexample.omega1 = *omega1;
                }
                set(&mut cfg.counterexample.b, *b);
                set(&mut cfg.counterexample.window_width, *window_width);
            }
        }
        cfg.finalize();
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads `MFKG_THREADS`; `None` when unset.
pub fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Invalid(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        Cli::try_parse_from(std::iter::once("mfkg").chain(args.iter().copied()))
            .unwrap()
            .command
    }

    #[test]
    fn flags_override_defaults() {
        let cfg = parse(&[
            "sigma",
            "--omega-min",
            "-0.5",
            "--count",
            "11",
            "--coeffs",
            "-2,1",
            "--mass",
            "2",
        ])
        .resolve()
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Sigma);
        assert_eq!(cfg.sigma.omega_min, Some(-0.5));
        assert_eq!(cfg.sigma.omega_max, Some(1.98));
        assert_eq!(cfg.sigma.count, 11);
        assert_eq!(cfg.potential.coeffs, vec![-2.0, 1.0]);
    }

    #[test]
    fn sponge_flags() {
        let cfg = parse(&["simulate", "--sponge-inner", "40"]).resolve().unwrap();
        assert_eq!(cfg.integrator.sponge.unwrap().strength, 0.3);
        assert!(Cli::try_parse_from(["mfkg", "simulate", "--sponge-inner", "40", "--no-sponge"]).is_err());
    }

    #[test]
    fn counterexample_final_time() {
        let cfg = parse(&["counterexample", "--t-final", "7", "--b", "-2", "--window-width", "5"])
            .resolve()
            .unwrap();
        assert_eq!(cfg.counterexample.t_final, 7.0);
        assert_eq!(cfg.counterexample.b, -2.0);
        assert!(parse(&["run"]).resolve().is_err());
    }
}
