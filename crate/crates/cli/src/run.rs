//! Experiment dispatch.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use mfkg_core::snapshot::{read_snapshot, write_snapshot_to};
use mfkg_core::solitary::amplitude_branches;
use mfkg_core::spectral::snapped_spectrum;
use mfkg_core::{
    attraction_report, build_multifreq, build_rho, build_solitary, default_omega_grid, endpoint_condition, evolve_with,
    find_z_rho, modulated_gaussian, sigma_curve, support_estimate, titchmarsh_check, verify_persistence,
    windowed_spectrum, AttractionConfig, Complex64, FieldState, Grid, ManifoldSampler, Model, Sample, Series,
    TitchmarshReport, Trajectory,
};
use serde::Serialize;

use crate::config::{ExperimentKind, InitialConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{Manifest, OutputDir};

pub const TRAJECTORY_COLUMNS: [&str; 7] = ["t", "re_gamma", "im_gamma", "re_f", "im_f", "H", "Q"];

#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

pub fn default_output_dir(kind: ExperimentKind) -> PathBuf {
    Path::new("mfkg-out").join(kind.name())
}

/// Runs `cfg.experiment`, echoes the resolved configuration and writes the manifest.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let root = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| default_output_dir(cfg.experiment));
    let mut out = OutputDir::create(&root)?;
    out.write_json("config.json", cfg)?;
    match cfg.experiment {
        ExperimentKind::Simulate => simulate(cfg, &mut out)?,
        ExperimentKind::Solitary => solitary(cfg, &mut out)?,
        ExperimentKind::Sigma => sigma(cfg, &mut out)?,
        ExperimentKind::Distance => distance(cfg, &mut out)?,
        ExperimentKind::Spectrum => spectrum(cfg, &mut out)?,
        ExperimentKind::Counterexample => counterexample(cfg, &mut out)?,
    }
    let manifest = out.finish(cfg.experiment.name())?;
    Ok(RunReport {
        experiment: cfg.experiment,
        output_dir: root,
        manifest,
    })
}

fn snapshot_bytes(state: &FieldState, mass: f64) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_snapshot_to(&mut buf, state, mass)?;
    Ok(buf)
}

fn load_snapshot(path: &Path, grid: &Grid, mass: f64) -> Result<FieldState> {
    let (state, stored_mass) = read_snapshot(path)?;
    if **state.grid() != *grid {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            reason: format!(
                "snapshot grid (dim {}, N {}, L {}) differs from the configured grid",
                state.grid().dim(),
                state.grid().points_per_axis(),
                state.grid().box_length()
            ),
        });
    }
    if stored_mass != mass {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            reason: format!("snapshot mass {stored_mass} differs from the configured mass {mass}"),
        });
    }
    Ok(state)
}

fn initial_state(cfg: &RunConfig, model: &Model) -> Result<FieldState> {
    let grid = model.grid();
    Ok(match &cfg.initial {
        InitialConfig::Random {
            band,
            envelope,
            energy_norm,
        } => cfg
            .random_data(*band, *envelope, *energy_norm)
            .generate(grid, cfg.mass)?,
        InitialConfig::Gaussian { amplitude, width, k } => modulated_gaussian(grid, *amplitude, *width, *k)?,
        InitialConfig::Solitary { omega, branch, theta } => {
            build_solitary(model, *omega, *theta, *branch)?.state().clone()
        }
        InitialConfig::Snapshot { path } => load_snapshot(path, grid, cfg.mass)?,
        InitialConfig::Zero => FieldState::zero(grid.clone()),
    })
}

fn trajectory_rows(samples: &[Sample]) -> impl Iterator<Item = Vec<f64>> + '_ {
    samples.iter().map(|s| {
        let mut row = vec![s.t, s.gamma.re, s.gamma.im, s.f.re, s.f.im, s.energy, s.charge];
        row.extend(&s.seminorms);
        row
    })
}

fn write_trajectory(out: &mut OutputDir, name: &str, samples: &[Sample], extra: &[String]) -> Result<()> {
    let mut header: Vec<String> = TRAJECTORY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(extra.iter().cloned());
    out.write_csv(name, &header, trajectory_rows(samples))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    samples: usize,
    t_final: f64,
    local_diagnostics: bool,
    initial_energy: f64,
    max_energy_drift: f64,
    relative_energy_drift: f64,
    max_charge_drift: f64,
    snapshots: Vec<String>,
}

fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let model = cfg.model()?;
    let grid = model.grid().clone();
    let integ = cfg.integrator()?;
    let state = initial_state(cfg, &model)?;
    let stride = cfg.observers.snapshot_stride;
    let mut snapshots: Vec<(f64, Vec<u8>)> = Vec::new();
    let mut sample_index = 0usize;
    let mut last: Option<FieldState> = None;
    let traj = evolve_with(
        &state,
        &model,
        &integ,
        cfg.integrator.t_final,
        &cfg.observers(&grid),
        |s, _| {
            if stride > 0 && sample_index.is_multiple_of(stride) {
                let mut buf = Vec::new();
                write_snapshot_to(&mut buf, s, cfg.mass)?;
                snapshots.push((s.time, buf));
            }
            sample_index += 1;
            last = Some(s.clone());
            Ok(())
        },
    )?;
    let columns: Vec<String> = cfg.observers.seminorms.iter().map(|s| s.column()).collect();
    write_trajectory(out, "trajectory.csv", &traj.samples, &columns)?;
    let mut names = Vec::new();
    for (k, (_, bytes)) in snapshots.iter().enumerate() {
        let name = format!("snapshots/snap_{k:05}.mfkg");
        out.write(&name, bytes)?;
        names.push(name);
    }
    if let Some(final_state) = last {
        out.write("final.mfkg", &snapshot_bytes(&final_state, cfg.mass)?)?;
    }
    let e0 = traj.samples.first().map_or(0.0, |s| s.energy);
    let drift = traj.max_energy_drift();
    out.write_json(
        "summary.json",
        &SimulationSummary {
            samples: traj.samples.len(),
            t_final: traj.samples.last().map_or(0.0, |s| s.t),
            local_diagnostics: traj.local_diagnostics,
            initial_energy: e0,
            max_energy_drift: drift,
            relative_energy_drift: if e0 != 0.0 { drift / e0.abs() } else { drift },
            max_charge_drift: traj.max_charge_drift(),
            snapshots: names,
        },
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolitaryReport {
    omega: f64,
    branch: usize,
    amplitude: Complex64,
    amplitude_sq_branches: Vec<f64>,
    sigma: f64,
    energy: f64,
    charge: f64,
    residual: f64,
}

fn solitary(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let model = cfg.model()?;
    let s = cfg.solitary;
    let wave = build_solitary(&model, s.omega, s.theta, s.branch)?;
    out.write_json(
        "solitary.json",
        &SolitaryReport {
            omega: wave.omega,
            branch: s.branch,
            amplitude: wave.amplitude,
            amplitude_sq_branches: amplitude_branches(&model, s.omega)?,
            sigma: wave.sigma,
            energy: wave.energy,
            charge: wave.charge,
            residual: wave.residual,
        },
    )?;
    out.write("solitary.mfkg", &snapshot_bytes(wave.state(), cfg.mass)?)?;
    Ok(())
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count)
        .map(|j| lo + (hi - lo) * j as f64 / (count - 1) as f64)
        .collect()
}

fn sigma(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let grid = cfg.make_grid()?;
    let rho = cfg.coupling(&grid)?;
    let (lo, hi) = cfg.sigma_range();
    let curve = sigma_curve(&rho, cfg.mass, &linspace(lo, hi, cfg.sigma.count))?;
    out.write_csv(
        "sigma.csv",
        &["omega".into(), "sigma".into()],
        curve.omegas.iter().zip(&curve.values).map(|(w, s)| [*w, *s]),
    )?;
    let z_rho = find_z_rho(
        &rho,
        cfg.mass,
        cfg.sigma.z_rho_max.unwrap_or(3.0 * cfg.mass),
        cfg.sigma.z_rho_tolerance,
    )?;
    #[derive(Serialize)]
    struct Report {
        z_rho: mfkg_core::ZRhoSet,
        endpoint: mfkg_core::solitary::EndpointReport,
    }
    out.write_json(
        "sigma_report.json",
        &Report {
            z_rho,
            endpoint: endpoint_condition(&rho),
        },
    )?;
    Ok(())
}

fn distance(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let path = cfg
        .distance
        .snapshot
        .as_ref()
        .ok_or_else(|| CliError::Invalid("distance.snapshot is required".into()))?;
    let model = cfg.model()?;
    let state = load_snapshot(path, model.grid(), cfg.mass)?;
    let spec = cfg.distance.norm.spec(model.grid());
    let sampler = ManifoldSampler::new(&model, spec, &default_omega_grid(cfg.mass, cfg.distance.omega_count))?;
    let d = sampler.distance(&state)?;
    #[derive(Serialize)]
    struct Report {
        time: f64,
        #[serde(flatten)]
        distance: mfkg_core::ManifoldDistance,
    }
    out.write_json(
        "distance.json",
        &Report {
            time: state.time,
            distance: d,
        },
    )?;
    Ok(())
}

/// Reads a trajectory CSV written by `simulate`; only the first seven columns are used.
pub fn read_trajectory(path: &Path) -> Result<Vec<Sample>> {
    let bad = |reason: String| CliError::Input {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() < TRAJECTORY_COLUMNS.len() || header.iter().zip(TRAJECTORY_COLUMNS).any(|(a, b)| a != b) {
        return Err(bad(format!("header must start with {}", TRAJECTORY_COLUMNS.join(","))));
    }
    let mut samples = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let v: Vec<f64> = record
            .iter()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        if v.len() < TRAJECTORY_COLUMNS.len() {
            return Err(bad(format!("row {} has {} columns", line + 2, v.len())));
        }
        samples.push(Sample {
            t: v[0],
            gamma: Complex64::new(v[1], v[2]),
            f: Complex64::new(v[3], v[4]),
            energy: v[5],
            charge: v[6],
            seminorms: v[7..].to_vec(),
        });
    }
    Ok(samples)
}

#[derive(Debug, Serialize)]
struct SpectrumWindow {
    center: f64,
    width: f64,
    dominant_frequency: f64,
    concentration_ratio: f64,
    outside_fraction: f64,
    weighted_forcing: f64,
    support: (f64, f64),
    titchmarsh: Option<TitchmarshReport>,
}

fn spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let path = cfg
        .spectrum
        .trajectory
        .as_ref()
        .ok_or_else(|| CliError::Invalid("spectrum.trajectory is required".into()))?;
    let model = cfg.model()?;
    let potential = cfg.potential()?;
    let sc = &cfg.spectrum;
    let traj = Trajectory {
        samples: read_trajectory(path)?,
        ..Default::default()
    };
    let z_rho = find_z_rho(
        &model.rho,
        cfg.mass,
        cfg.sigma.z_rho_max.unwrap_or(3.0 * cfg.mass),
        cfg.sigma.z_rho_tolerance,
    )?;
    let mut acfg = AttractionConfig::new(&model, sc.window_width);
    acfg.windows = sc.windows;
    acfg.taper = sc.taper;
    acfg.neighborhood_bins = sc.neighborhood_bins;
    acfg.z_rho = z_rho.signed_points();
    let report = attraction_report(&traj, &model, &acfg)?;
    let gamma = Series::gamma(&traj)?;
    let forcing = Series::forcing(&traj)?;
    let mut rows = Vec::new();
    let mut windows = Vec::new();
    for (k, w) in report.windows.iter().enumerate() {
        let (gspec, _) = snapped_spectrum(&gamma, w.center, w.width, sc.taper)?;
        let fspec = windowed_spectrum(&forcing, gspec.center, gspec.width, sc.taper)?;
        for ((om, gp), fp) in gspec.freqs.iter().zip(gspec.power()).zip(fspec.power()) {
            rows.push([k as f64, *om, gp, fp]);
        }
        let titchmarsh = match titchmarsh_check(
            &gamma,
            &potential,
            gspec.center,
            gspec.width,
            sc.taper,
            sc.mass_fraction,
        ) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("window {k}: no Titchmarsh comparison: {e}");
                None
            }
        };
        windows.push(SpectrumWindow {
            center: w.center,
            width: w.width,
            dominant_frequency: w.omega_plus,
            concentration_ratio: w.concentration_ratio,
            outside_fraction: w.outside_fraction,
            weighted_forcing: w.weighted_forcing,
            support: support_estimate(&gspec, sc.mass_fraction)?,
            titchmarsh,
        });
    }
    out.write_csv(
        "spectra.csv",
        &["window".into(), "omega".into(), "gamma_power".into(), "f_power".into()],
        rows,
    )?;
    #[derive(Serialize)]
    struct Report {
        trivial: bool,
        z_rho: Vec<f64>,
        windows: Vec<SpectrumWindow>,
    }
    out.write_json(
        "spectrum.json",
        &Report {
            trivial: report.trivial,
            z_rho: acfg.z_rho,
            windows,
        },
    )?;
    Ok(())
}

fn counterexample(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let grid: Arc<Grid> = cfg.make_grid()?;
    let c = cfg.counterexample;
    let coupling = build_rho(grid, cfg.mass, c.omega1.unwrap_or(2.0 * cfg.mass))?;
    let ce = build_multifreq(coupling, cfg.mass, c.b)?;
    let mut integ = cfg.integrator()?;
    integ.sponge = None;
    let (report, traj) = verify_persistence(&ce, &integ, c.t_final, c.window_width)?;
    let (r0, r1) = ce.residuals();
    #[derive(Serialize)]
    struct Spec {
        #[serde(flatten)]
        summary: mfkg_core::multifreq::CounterexampleSummary,
        residual_phi0: f64,
        residual_phi1: f64,
    }
    out.write_json(
        "counterexample.json",
        &Spec {
            summary: ce.summary(),
            residual_phi0: r0,
            residual_phi1: r1,
        },
    )?;
    write_trajectory(out, "trajectory.csv", &traj.samples, &[])?;
    out.write_json("persistence.json", &report)?;
    if !report.passes {
        log::warn!(
            "multi-frequency solution not tracked: max relative error {:e}",
            report.max_relative_error
        );
    }
    Ok(())
}
