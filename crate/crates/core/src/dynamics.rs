//! Time evolution by Strang splitting of two exactly solvable flows.
//!
//! The linear part `psi' = pi, pi' = (Delta - m^2) psi` is integrated exactly
//! mode by mode. The mean-field part `pi' = rho F(<rho, psi>)` leaves `psi`
//! untouched, so `<rho, psi>` is frozen and the flow is an exact affine kick.
//! Between samples the state lives in Fourier space; the kick only needs
//! `<rho, psi>`, which is a spectral inner product.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{CouplingProfile, FieldState};
use crate::grid::Grid;
use crate::potential::PolynomialPotential;
use crate::seminorm::{SeminormOperator, SeminormSpec};

/// Everything that defines the equation: mass, coupling and potential.
#[derive(Debug, Clone)]
pub struct Model {
    pub mass: f64,
    pub rho: CouplingProfile,
    pub potential: PolynomialPotential,
}

impl Model {
    pub fn new(mass: f64, rho: CouplingProfile, potential: PolynomialPotential) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid("mass", format!("must be positive, got {mass}")));
        }
        Ok(Self { mass, rho, potential })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.rho.grid()
    }
}

/// Absorbing layer: `psi` and `pi` are damped by `exp(-sigma(x) dt)` with
/// `sigma` ramping smoothly from 0 at `inner_radius` to `strength` at `L/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sponge {
    pub inner_radius: f64,
    pub strength: f64,
}

impl Sponge {
    pub fn profile(&self, grid: &Grid) -> Vec<f64> {
        let outer = grid.box_length() / 2.0;
        let width = outer - self.inner_radius;
        grid.radius()
            .iter()
            .map(|&r| {
                let u = ((r - self.inner_radius) / width).clamp(0.0, 1.0);
                self.strength * u * u * (3.0 - 2.0 * u)
            })
            .collect()
    }

    /// Smooth indicator of the undamped region, used for in-ball diagnostics.
    pub fn observation_ball(&self) -> SeminormSpec {
        SeminormSpec::new(0.0, 0.75 * self.inner_radius, 0.25 * self.inner_radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub dt: f64,
    pub sponge: Option<Sponge>,
    pub steps_per_sample: usize,
}

impl Integrator {
    pub fn new(dt: f64, steps_per_sample: usize) -> Self {
        Self {
            dt,
            sponge: None,
            steps_per_sample,
        }
    }

    pub fn with_sponge(mut self, sponge: Sponge) -> Self {
        self.sponge = Some(sponge);
        self
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.dt >= grid.spacing() {
            return Err(invalid(
                "dt",
                format!("must be smaller than the grid spacing h = {}", grid.spacing()),
            ));
        }
        if self.steps_per_sample == 0 {
            return Err(invalid("steps_per_sample", "must be >= 1"));
        }
        if let Some(s) = self.sponge {
            let half = grid.box_length() / 2.0;
            if !(s.inner_radius > 0.0 && s.inner_radius < half) {
                return Err(invalid(
                    "sponge.inner_radius",
                    format!("must lie in (0, L/2 = {half}), got {}", s.inner_radius),
                ));
            }
            if !(s.strength >= 0.0 && s.strength.is_finite()) {
                return Err(invalid("sponge.strength", format!("must be >= 0, got {}", s.strength)));
            }
        }
        Ok(())
    }
}

/// What to record along a trajectory besides `gamma`, `f`, `H`, `Q`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observers {
    pub seminorms: Vec<SeminormSpec>,
    /// Keep a full snapshot every this many samples; 0 disables snapshots.
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub gamma: Complex64,
    pub f: Complex64,
    pub energy: f64,
    pub charge: f64,
    pub seminorms: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub seminorm_specs: Vec<SeminormSpec>,
    /// `true` when energy and charge are restricted to the sponge-free ball.
    pub local_diagnostics: bool,
    pub snapshots: Vec<FieldState>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn gamma(&self) -> Vec<Complex64> {
        self.samples.iter().map(|s| s.gamma).collect()
    }

    pub fn forcing(&self) -> Vec<Complex64> {
        self.samples.iter().map(|s| s.f).collect()
    }

    /// Uniform sample spacing; fails if the series is not uniformly sampled.
    pub fn sample_dt(&self) -> Result<f64> {
        if self.samples.len() < 2 {
            return Err(Error::InsufficientData("fewer than two samples".into()));
        }
        let dt = self.samples[1].t - self.samples[0].t;
        for w in self.samples.windows(2) {
            if ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::InsufficientData("samples are not uniformly spaced".into()));
            }
        }
        Ok(dt)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.samples.first().map_or(0.0, |s| s.energy);
        self.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max)
    }

    pub fn max_charge_drift(&self) -> f64 {
        let q0 = self.samples.first().map_or(0.0, |s| s.charge);
        self.samples.iter().map(|s| (s.charge - q0).abs()).fold(0.0, f64::max)
    }
}

/// Per-mode coefficients of the free Klein-Gordon group over a fixed `tau`.
#[derive(Debug, Clone)]
struct FreePropagator {
    cos: Vec<f64>,
    sin_over_freq: Vec<f64>,
    freq_sin: Vec<f64>,
}

impl FreePropagator {
    fn new(grid: &Grid, mass: f64, tau: f64) -> Self {
        let m2 = mass * mass;
        let n = grid.len();
        let mut cos = Vec::with_capacity(n);
        let mut sin_over_freq = Vec::with_capacity(n);
        let mut freq_sin = Vec::with_capacity(n);
        for &k2 in grid.xi_sq() {
            let w = (k2 + m2).sqrt();
            let (s, c) = (w * tau).sin_cos();
            cos.push(c);
            sin_over_freq.push(s / w);
            freq_sin.push(w * s);
        }
        Self {
            cos,
            sin_over_freq,
            freq_sin,
        }
    }

    fn apply(&self, psi: &mut [Complex64], pi: &mut [Complex64]) {
        for i in 0..psi.len() {
            let (p, q) = (psi[i], pi[i]);
            psi[i] = p * self.cos[i] + q * self.sin_over_freq[i];
            pi[i] = q * self.cos[i] - p * self.freq_sin[i];
        }
    }
}

/// Exact free Klein-Gordon flow over time `tau`.
pub fn free_flow(state: &FieldState, tau: f64, mass: f64) -> FieldState {
    let grid = state.grid();
    let mut psi = grid.to_spectral(&state.psi);
    let mut pi = grid.to_spectral(&state.pi);
    FreePropagator::new(grid, mass, tau).apply(&mut psi, &mut pi);
    grid.inverse(&mut psi);
    grid.inverse(&mut pi);
    FieldState::new(grid.clone(), psi, pi, state.time + tau).expect("same grid")
}

/// Exact flow of `pi' = rho F(<rho, psi>)` over time `tau`.
pub fn kick(
    state: &FieldState,
    rho: &CouplingProfile,
    potential: &PolynomialPotential,
    tau: f64,
) -> Result<FieldState> {
    rho.grid().ensure_same(state.grid())?;
    let f = potential.eval_f(rho.pair(&state.psi)) * tau;
    let pi = state.pi.iter().zip(rho.values()).map(|(p, r)| p + f * *r).collect();
    FieldState::new(state.grid().clone(), state.psi.clone(), pi, state.time)
}

/// `kick(tau/2) . free_flow(tau) . kick(tau/2)` without damping; `tau` may be negative.
pub fn strang_step(state: &FieldState, model: &Model, tau: f64) -> Result<FieldState> {
    let mut s = SpectralState::from_physical(state);
    let prop = FreePropagator::new(model.grid(), model.mass, tau);
    s.strang(model, &prop, tau);
    Ok(s.to_physical())
}

/// One integrator step, including sponge damping when enabled.
pub fn step(state: &FieldState, model: &Model, integ: &Integrator) -> Result<FieldState> {
    model.grid().ensure_same(state.grid())?;
    let mut s = SpectralState::from_physical(state);
    let prop = FreePropagator::new(model.grid(), model.mass, integ.dt);
    s.strang(model, &prop, integ.dt);
    if let Some(sp) = integ.sponge {
        let damp = damping_factors(model.grid(), &sp, integ.dt);
        s.damp(&damp);
    }
    Ok(s.to_physical())
}

fn damping_factors(grid: &Grid, sponge: &Sponge, dt: f64) -> Vec<f64> {
    sponge.profile(grid).iter().map(|s| (-s * dt).exp()).collect()
}

/// Raw DFTs of `(psi, pi)` plus the time.
#[derive(Debug, Clone)]
struct SpectralState {
    grid: Arc<Grid>,
    psi: Vec<Complex64>,
    pi: Vec<Complex64>,
    time: f64,
}

impl SpectralState {
    fn from_physical(state: &FieldState) -> Self {
        let grid = state.grid().clone();
        Self {
            psi: grid.to_spectral(&state.psi),
            pi: grid.to_spectral(&state.pi),
            time: state.time,
            grid,
        }
    }

    fn zero(grid: Arc<Grid>, time: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            psi: vec![Complex64::new(0.0, 0.0); n],
            pi: vec![Complex64::new(0.0, 0.0); n],
            time,
        }
    }

    fn to_physical(&self) -> FieldState {
        FieldState::new(
            self.grid.clone(),
            self.grid.to_physical(&self.psi),
            self.grid.to_physical(&self.pi),
            self.time,
        )
        .expect("same grid")
    }

    fn gamma(&self, rho: &CouplingProfile) -> Complex64 {
        rho.pair_spectral(&self.psi)
    }

    /// `pi += amount * rho`.
    fn push(&mut self, rho: &CouplingProfile, amount: Complex64) {
        for (p, r) in self.pi.iter_mut().zip(rho.rho_hat()) {
            *p += amount * r;
        }
    }

    fn strang(&mut self, model: &Model, prop: &FreePropagator, tau: f64) {
        let half = 0.5 * tau;
        let f = model.potential.eval_f(self.gamma(&model.rho));
        self.push(&model.rho, f * half);
        prop.apply(&mut self.psi, &mut self.pi);
        let f = model.potential.eval_f(self.gamma(&model.rho));
        self.push(&model.rho, f * half);
        self.time += tau;
    }

    fn damp(&mut self, factors: &[f64]) {
        let grid = self.grid.clone();
        for field in [&mut self.psi, &mut self.pi] {
            grid.inverse(field);
            for (z, d) in field.iter_mut().zip(factors) {
                *z *= d;
            }
            grid.forward(field);
        }
    }
}

/// Computes the diagnostics recorded at each sample.
struct Recorder<'a> {
    model: &'a Model,
    seminorms: Vec<SeminormOperator>,
    ball: Option<Vec<f64>>,
}

impl<'a> Recorder<'a> {
    fn new(model: &'a Model, integ: &Integrator, observers: &Observers) -> Result<Self> {
        let grid = model.grid();
        let seminorms = observers
            .seminorms
            .iter()
            .map(|s| SeminormOperator::new(grid, *s, model.mass))
            .collect::<Result<Vec<_>>>()?;
        let ball = integ.sponge.map(|sp| {
            let spec = sp.observation_ball();
            grid.radius().iter().map(|&r| spec.cutoff(r)).collect()
        });
        Ok(Self { model, seminorms, ball })
    }

    fn sample(&self, spec: &SpectralState, phys: &FieldState) -> Result<Sample> {
        let grid = &spec.grid;
        let m2 = self.model.mass * self.model.mass;
        let gamma = spec.gamma(&self.model.rho);
        let f = self.model.potential.eval_f(gamma);
        let u = self.model.potential.eval_u(gamma);
        let (energy, charge) = match &self.ball {
            None => {
                let quad = grid.spectral_weighted_norm_sq(&spec.pi, |_| 1.0)
                    + grid.spectral_weighted_norm_sq(&spec.psi, |k2| k2 + m2);
                let q = (Complex64::new(0.0, 0.5)
                    * (grid.spectral_inner(&spec.psi, &spec.pi) - grid.spectral_inner(&spec.pi, &spec.psi)))
                .re;
                (0.5 * quad + u, q)
            }
            Some(chi) => local_energy_charge(grid, phys, &spec.psi, chi, self.model.mass, u),
        };
        let seminorms = self
            .seminorms
            .iter()
            .map(|op| op.norm(phys))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sample {
            t: spec.time,
            gamma,
            f,
            energy,
            charge,
            seminorms,
        })
    }
}

/// Energy and charge densities integrated against the weight `chi`.
fn local_energy_charge(
    grid: &Grid,
    phys: &FieldState,
    psi_hat: &[Complex64],
    chi: &[f64],
    mass: f64,
    u: f64,
) -> (f64, f64) {
    let m2 = mass * mass;
    let mut density: Vec<f64> = phys
        .pi
        .iter()
        .zip(&phys.psi)
        .map(|(p, q)| p.norm_sqr() + m2 * q.norm_sqr())
        .collect();
    let n = grid.points_per_axis();
    for axis in 0..grid.dim() {
        let stride = n.pow((grid.dim() - 1 - axis) as u32);
        let mut d: Vec<Complex64> = psi_hat
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let j = (idx / stride) % n;
                z * Complex64::new(0.0, grid.axis_wavenumbers()[j])
            })
            .collect();
        grid.inverse(&mut d);
        for (acc, z) in density.iter_mut().zip(&d) {
            *acc += z.norm_sqr();
        }
    }
    let h = grid.cell_volume();
    let energy = 0.5 * density.iter().zip(chi).map(|(e, c)| e * c).sum::<f64>() * h + u;
    let q: Complex64 = phys
        .psi
        .iter()
        .zip(&phys.pi)
        .zip(chi)
        .map(|((psi, pi), c)| (psi.conj() * pi - pi.conj() * psi) * *c)
        .sum();
    (energy, (Complex64::new(0.0, 0.5) * q).re * h)
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(invalid("t_final", format!("must be positive, got {t_final}")));
    }
    Ok((t_final / dt - 1e-9).ceil().max(1.0) as usize)
}

/// Runs `ceil(T/dt)` steps and records a sample every `steps_per_sample` steps
/// (and at the final step).
pub fn evolve(
    state: &FieldState,
    model: &Model,
    integ: &Integrator,
    t_final: f64,
    observers: &Observers,
) -> Result<Trajectory> {
    evolve_with(state, model, integ, t_final, observers, |_, _| Ok(()))
}

/// Like [`evolve`], additionally handing every sampled state to `callback`.
pub fn evolve_with<C>(
    state: &FieldState,
    model: &Model,
    integ: &Integrator,
    t_final: f64,
    observers: &Observers,
    mut callback: C,
) -> Result<Trajectory>
where
    C: FnMut(&FieldState, &Sample) -> Result<()>,
{
    let grid = model.grid().clone();
    grid.ensure_same(state.grid())?;
    integ.validate(&grid)?;
    let steps = step_count(t_final, integ.dt)?;
    let recorder = Recorder::new(model, integ, observers)?;
    let prop = FreePropagator::new(&grid, model.mass, integ.dt);
    let damp = integ.sponge.map(|sp| damping_factors(&grid, &sp, integ.dt));

    let t0 = state.time;
    let mut spec = SpectralState::from_physical(state);
    let mut traj = Trajectory {
        seminorm_specs: observers.seminorms.clone(),
        local_diagnostics: integ.sponge.is_some(),
        ..Default::default()
    };
    let mut record = |spec: &SpectralState, traj: &mut Trajectory| -> Result<()> {
        let phys = spec.to_physical();
        if !phys.is_finite() {
            return Err(Error::NonFinite {
                time: spec.time,
                what: "field state".into(),
            });
        }
        let sample = recorder.sample(spec, &phys)?;
        callback(&phys, &sample)?;
        let idx = traj.samples.len();
        if observers.snapshot_stride > 0 && idx.is_multiple_of(observers.snapshot_stride) {
            traj.snapshots.push(phys);
        }
        traj.samples.push(sample);
        Ok(())
    };

    record(&spec, &mut traj)?;
    for k in 1..=steps {
        spec.strang(model, &prop, integ.dt);
        spec.time = t0 + k as f64 * integ.dt;
        if let Some(d) = &damp {
            spec.damp(d);
        }
        let g = spec.gamma(&model.rho);
        if !(g.re.is_finite() && g.im.is_finite()) {
            return Err(Error::NonFinite {
                time: spec.time,
                what: "<rho, psi>".into(),
            });
        }
        if k % integ.steps_per_sample == 0 || k == steps {
            record(&spec, &mut traj)?;
        }
    }
    Ok(traj)
}

/// Result of evolving `psi = chi + phi` with `chi` free and `phi` driven by `rho f(t)`.
#[derive(Debug, Clone)]
pub struct SplitRun {
    pub full: Trajectory,
    pub chi: Trajectory,
    pub phi: Trajectory,
    /// Largest `||psi - chi - phi||_{L2} / max(||psi||_{L2}, tiny)` over the samples.
    pub superposition_error: f64,
    pub final_full: FieldState,
    pub final_chi: FieldState,
    pub final_phi: FieldState,
}

/// Evolves the full solution together with its free part `chi` (data `Psi0`)
/// and driven part `phi` (zero data, source `rho f(t)` with `f` taken from
/// the full solution at the same kick instants).
pub fn split_chi_phi(
    psi0: &FieldState,
    model: &Model,
    integ: &Integrator,
    t_final: f64,
    observers: &Observers,
) -> Result<SplitRun> {
    let grid = model.grid().clone();
    grid.ensure_same(psi0.grid())?;
    integ.validate(&grid)?;
    let steps = step_count(t_final, integ.dt)?;
    let recorder = Recorder::new(model, integ, observers)?;
    let prop = FreePropagator::new(&grid, model.mass, integ.dt);
    let damp = integ.sponge.map(|sp| damping_factors(&grid, &sp, integ.dt));

    let t0 = psi0.time;
    let mut full = SpectralState::from_physical(psi0);
    let mut chi = full.clone();
    let mut phi = SpectralState::zero(grid.clone(), t0);
    let make = || Trajectory {
        seminorm_specs: observers.seminorms.clone(),
        local_diagnostics: integ.sponge.is_some(),
        ..Default::default()
    };
    let (mut tf, mut tc, mut tp) = (make(), make(), make());
    let mut worst: f64 = 0.0;

    let mut record = |full: &SpectralState,
                      chi: &SpectralState,
                      phi: &SpectralState,
                      tf: &mut Trajectory,
                      tc: &mut Trajectory,
                      tp: &mut Trajectory|
     -> Result<(FieldState, FieldState, FieldState)> {
        let (pf, pc, pp) = (full.to_physical(), chi.to_physical(), phi.to_physical());
        if !pf.is_finite() {
            return Err(Error::NonFinite {
                time: full.time,
                what: "field state".into(),
            });
        }
        tf.samples.push(recorder.sample(full, &pf)?);
        tc.samples.push(recorder.sample(chi, &pc)?);
        tp.samples.push(recorder.sample(phi, &pp)?);
        let resid: Vec<Complex64> = pf
            .psi
            .iter()
            .zip(&pc.psi)
            .zip(&pp.psi)
            .map(|((a, b), c)| a - b - c)
            .collect();
        let scale = grid.l2_norm_sq(&pf.psi).sqrt().max(f64::MIN_POSITIVE);
        worst = worst.max(grid.l2_norm_sq(&resid).sqrt() / scale);
        Ok((pf, pc, pp))
    };

    let mut last = record(&full, &chi, &phi, &mut tf, &mut tc, &mut tp)?;
    let half = 0.5 * integ.dt;
    for k in 1..=steps {
        let f = model.potential.eval_f(full.gamma(&model.rho));
        full.push(&model.rho, f * half);
        phi.push(&model.rho, f * half);
        for s in [&mut full, &mut chi, &mut phi] {
            prop.apply(&mut s.psi, &mut s.pi);
        }
        let f = model.potential.eval_f(full.gamma(&model.rho));
        full.push(&model.rho, f * half);
        phi.push(&model.rho, f * half);
        let t = t0 + k as f64 * integ.dt;
        for s in [&mut full, &mut chi, &mut phi] {
            s.time = t;
            if let Some(d) = &damp {
                s.damp(d);
            }
        }
        if k % integ.steps_per_sample == 0 || k == steps {
            last = record(&full, &chi, &phi, &mut tf, &mut tc, &mut tp)?;
        }
    }
    let (final_full, final_chi, final_phi) = last;
    Ok(SplitRun {
        full: tf,
        chi: tc,
        phi: tp,
        superposition_error: worst,
        final_full,
        final_chi,
        final_phi,
    })
}
