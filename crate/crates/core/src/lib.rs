//! Pseudo-spectral simulation and analysis of the Klein-Gordon field with a
//! rank-one mean-field self-interaction
//! `psi_tt = Delta psi - m^2 psi + rho(x) F(<rho, psi>)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod initial;
pub mod multifreq;
pub mod potential;
pub mod roots;
pub mod seminorm;
pub mod snapshot;
pub mod solitary;
pub mod spectral;

pub use dynamics::{
    evolve, evolve_with, free_flow, kick, split_chi_phi, step, strang_step, Integrator, Model, Observers, Sample,
    SplitRun, Sponge, Trajectory,
};
pub use error::{Error, Result};
pub use field::{charge, energy, energy_norm, energy_norm_sq, inner_product, CouplingProfile, FieldState};
pub use grid::{make_grid, Grid};
pub use initial::{modulated_gaussian, RandomData};
pub use multifreq::{build_multifreq, build_rho, verify_persistence, Counterexample, PersistenceReport, ShellCoupling};
pub use potential::{LowerBound, PolynomialPotential};
pub use seminorm::{local_energy_metric, local_seminorm, SeminormOperator, SeminormSpec};
pub use snapshot::{read_snapshot, write_snapshot};
pub use solitary::{
    build_solitary, default_omega_grid, endpoint_condition, find_z_rho, manifold_distance, sigma, sigma_complex,
    sigma_curve, sigma_profile, solve_amplitudes, ManifoldDistance, ManifoldSampler, SigmaCurve, SolitaryWave, ZRhoSet,
};
pub use spectral::{
    attraction_report, support_estimate, titchmarsh_check, weight_curve, windowed_spectrum, AttractionConfig,
    AttractionReport, Series, Spectrum, Taper, TitchmarshReport, WeightCurve,
};

pub use num_complex::Complex64;
