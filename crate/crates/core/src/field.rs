//! Phase-space states `(psi, pi)`, the coupling profile `rho`, and the
//! quadratic functionals built on them.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::potential::PolynomialPotential;

/// A point `(psi, pi)` of phase space at time `time`.
#[derive(Debug, Clone)]
pub struct FieldState {
    grid: Arc<Grid>,
    pub psi: Vec<Complex64>,
    pub pi: Vec<Complex64>,
    pub time: f64,
}

impl FieldState {
    pub fn new(grid: Arc<Grid>, psi: Vec<Complex64>, pi: Vec<Complex64>, time: f64) -> Result<Self> {
        grid.check_len(psi.len())?;
        grid.check_len(pi.len())?;
        Ok(Self { grid, psi, pi, time })
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            psi: vec![Complex64::new(0.0, 0.0); n],
            pi: vec![Complex64::new(0.0, 0.0); n],
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Global phase rotation `(psi, pi) -> (e^{i theta} psi, e^{i theta} pi)`.
    pub fn rotated(&self, theta: f64) -> Self {
        let r = Complex64::from_polar(1.0, theta);
        Self {
            grid: self.grid.clone(),
            psi: self.psi.iter().map(|z| z * r).collect(),
            pi: self.pi.iter().map(|z| z * r).collect(),
            time: self.time,
        }
    }

    /// `self + scale * other`, keeping `self.time`.
    pub fn add_scaled(&self, other: &FieldState, scale: Complex64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            psi: self.psi.iter().zip(&other.psi).map(|(a, b)| a + scale * b).collect(),
            pi: self.pi.iter().zip(&other.pi).map(|(a, b)| a + scale * b).collect(),
            time: self.time,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.psi
            .iter()
            .chain(&self.pi)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `max(||psi - other.psi||, ||pi - other.pi||)` in L2.
    pub fn l2_distance(&self, other: &FieldState) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let d = |a: &[Complex64], b: &[Complex64]| -> f64 {
            let diff: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            self.grid.l2_norm_sq(&diff).sqrt()
        };
        Ok(d(&self.psi, &other.psi).max(d(&self.pi, &other.pi)))
    }
}

/// The real coupling function `rho` together with its cached raw DFT.
#[derive(Debug, Clone)]
pub struct CouplingProfile {
    grid: Arc<Grid>,
    rho: Vec<f64>,
    rho_hat: Vec<Complex64>,
    l2_norm_sq: f64,
}

impl CouplingProfile {
    pub fn from_real(grid: Arc<Grid>, rho: Vec<f64>) -> Result<Self> {
        grid.check_len(rho.len())?;
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(invalid("rho", "values must be finite"));
        }
        if rho.iter().all(|&v| v == 0.0) {
            return Err(invalid("rho", "must not vanish identically"));
        }
        let complex: Vec<Complex64> = rho.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let rho_hat = grid.to_spectral(&complex);
        let l2_norm_sq = rho.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume();
        Ok(Self {
            grid,
            rho,
            rho_hat,
            l2_norm_sq,
        })
    }

    /// `amplitude * exp(-|x|^2 / (2 width^2))` centred at the origin.
    pub fn gaussian(grid: Arc<Grid>, amplitude: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(invalid("width", format!("must be positive, got {width}")));
        }
        let rho = grid
            .radius()
            .iter()
            .map(|r| amplitude * (-0.5 * (r / width).powi(2)).exp())
            .collect();
        Self::from_real(grid, rho)
    }

    /// Builds `rho` from its continuous Fourier transform, given as a radial
    /// function of `|xi|^2` (so that `rho` is real and even).
    pub fn from_radial_spectrum(grid: Arc<Grid>, rho_hat: impl Fn(f64) -> f64) -> Result<Self> {
        let inv_cell = 1.0 / grid.cell_volume();
        let mut spec: Vec<Complex64> = grid
            .xi_sq()
            .iter()
            .map(|&k2| Complex64::new(rho_hat(k2) * inv_cell, 0.0))
            .collect();
        grid.inverse(&mut spec);
        let rho = spec.iter().map(|z| z.re).collect();
        Self::from_real(grid, rho)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    /// Raw DFT of `rho`; the continuous transform is `cell_volume() * rho_hat`.
    pub fn rho_hat(&self) -> &[Complex64] {
        &self.rho_hat
    }

    /// Continuous transform `hat rho(xi)` at a lattice index.
    pub fn rho_hat_continuous(&self, idx: usize) -> Complex64 {
        self.rho_hat[idx] * self.grid.cell_volume()
    }

    /// `hat rho(xi) = integral rho(x) e^{-i xi.x} dx` at an arbitrary wavevector,
    /// by direct summation over the lattice.
    pub fn rho_hat_at(&self, xi: &[f64]) -> Complex64 {
        assert_eq!(xi.len(), self.grid.dim());
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, &v) in self.rho.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let x = self.grid.coords_of(idx);
            let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
            acc += Complex64::from_polar(v, -phase);
        }
        acc * self.grid.cell_volume()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    /// Largest `|rho_hat|` over the lattice (raw DFT scale).
    pub fn rho_hat_max(&self) -> f64 {
        self.rho_hat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Same profile multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_real(self.grid.clone(), self.rho.iter().map(|v| v * factor).collect())
    }

    /// `<rho, f> = h^n sum rho f` for an arbitrary physical field on the same grid.
    pub fn pair(&self, field: &[Complex64]) -> Complex64 {
        let s: Complex64 = self.rho.iter().zip(field).map(|(r, z)| z * *r).sum();
        s * self.grid.cell_volume()
    }

    /// `<rho, f>` from the raw DFT of `f`.
    pub fn pair_spectral(&self, spectrum: &[Complex64]) -> Complex64 {
        self.grid.spectral_inner(&self.rho_hat, spectrum)
    }
}

/// `<rho, psi> = integral rho psi dx` (rho is real).
pub fn inner_product(rho: &CouplingProfile, state: &FieldState) -> Result<Complex64> {
    rho.grid.ensure_same(&state.grid)?;
    Ok(rho.pair(&state.psi))
}

/// `||grad psi||^2 + m^2 ||psi||^2`, computed from the Fourier symbol `|xi|^2 + m^2`.
fn h1_norm_sq(grid: &Grid, psi: &[Complex64], mass: f64) -> f64 {
    let spec = grid.to_spectral(psi);
    let m2 = mass * mass;
    grid.spectral_weighted_norm_sq(&spec, |k2| k2 + m2)
}

/// `||Psi||_E^2 = ||pi||^2 + ||grad psi||^2 + m^2 ||psi||^2`.
pub fn energy_norm_sq(state: &FieldState, mass: f64) -> f64 {
    state.grid.l2_norm_sq(&state.pi) + h1_norm_sq(&state.grid, &state.psi, mass)
}

pub fn energy_norm(state: &FieldState, mass: f64) -> f64 {
    energy_norm_sq(state, mass).sqrt()
}

/// `||Psi||_E` via `||(m^2 - Delta)^{1/2} psi||` applied in physical space.
pub fn energy_norm_sobolev(state: &FieldState, mass: f64) -> f64 {
    let m2 = mass * mass;
    let lifted = state.grid.apply_multiplier(&state.psi, |k2| (k2 + m2).sqrt());
    (state.grid.l2_norm_sq(&state.pi) + state.grid.l2_norm_sq(&lifted)).sqrt()
}

/// Hamiltonian `1/2 ||Psi||_E^2 + U(<rho, psi>)`.
pub fn energy(state: &FieldState, rho: &CouplingProfile, potential: &PolynomialPotential, mass: f64) -> Result<f64> {
    let gamma = inner_product(rho, state)?;
    Ok(0.5 * energy_norm_sq(state, mass) + potential.eval_u(gamma))
}

/// Charge `(i/2) integral (conj(psi) pi - conj(pi) psi) dx`.
pub fn charge(state: &FieldState) -> f64 {
    let s: Complex64 = state
        .psi
        .iter()
        .zip(&state.pi)
        .map(|(psi, pi)| psi.conj() * pi - pi.conj() * psi)
        .sum();
    (Complex64::new(0.0, 0.5) * s).re * state.grid.cell_volume()
}


#[cfg(test)]
mod tests {
    use super::test_support::random_state;
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn inner_product_examples() {
        let g = make_grid(1, 256, 64.0).unwrap();
        let rho = CouplingProfile::gaussian(g.clone(), 1.0, 1.0).unwrap();
        let zero = FieldState::zero(g.clone());
        assert_eq!(inner_product(&rho, &zero).unwrap(), c(0.0));

        let psi: Vec<Complex64> = rho.values().iter().map(|&v| c(v)).collect();
        let st = FieldState::new(g.clone(), psi, vec![c(0.0); g.len()], 0.0).unwrap();
        let v = inner_product(&rho, &st).unwrap();
        assert!((v.re - rho.l2_norm_sq()).abs() < 1e-12 && v.im == 0.0);

        // shifted Gaussian against a compensated direct-sum oracle
        let h = g.spacing();
        let shift = 4.0 * h;
        let psi: Vec<Complex64> = g
            .axis_coords()
            .iter()
            .map(|x| c((-0.5 * (x - shift).powi(2)).exp()))
            .collect();
        let st = FieldState::new(g.clone(), psi, vec![c(0.0); g.len()], 0.0).unwrap();
        let got = inner_product(&rho, &st).unwrap().re;
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for x in g.axis_coords() {
            let term = (-0.5 * x * x).exp() * (-0.5 * (x - shift).powi(2)).exp() * h;
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        assert!((got - sum).abs() < 1e-13);
        // and the closed form sqrt(pi) e^{-shift^2/4}
        assert!((got - PI.sqrt() * (-shift * shift / 4.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn inner_product_rejects_grid_mismatch() {
        let g1 = make_grid(1, 64, 16.0).unwrap();
        let g2 = make_grid(1, 64, 32.0).unwrap();
        let rho = CouplingProfile::gaussian(g1, 1.0, 1.0).unwrap();
        assert!(inner_product(&rho, &FieldState::zero(g2)).is_err());
    }

    #[test]
    fn energy_examples() {
        let g = make_grid(1, 256, 64.0).unwrap();
        let rho = CouplingProfile::gaussian(g.clone(), 1.0, 1.0).unwrap();
        let pot = PolynomialPotential::new(vec![-1.0, 1.0]).unwrap();
        assert_eq!(energy(&FieldState::zero(g.clone()), &rho, &pot, 1.0).unwrap(), 0.0);

        // single Fourier mode with unit L2 norm in pi
        let k = g.axis_wavenumbers()[5];
        let amp = 1.0 / g.box_length().sqrt();
        let pi: Vec<Complex64> = g
            .axis_coords()
            .iter()
            .map(|x| Complex64::from_polar(amp, k * x))
            .collect();
        let st = FieldState::new(g.clone(), vec![c(0.0); g.len()], pi, 0.0).unwrap();
        assert!((energy(&st, &rho, &pot, 1.0).unwrap() - 0.5).abs() < 1e-12);

        // Gaussian psi: closed-form integrals oracle
        // psi = e^{-x^2/2}: ||psi||^2 = sqrt(pi), ||psi'||^2 = sqrt(pi)/2, <rho,psi> = sqrt(pi)
        let psi: Vec<Complex64> = g.axis_coords().iter().map(|x| c((-0.5 * x * x).exp())).collect();
        let st = FieldState::new(g.clone(), psi, vec![c(0.0); g.len()], 0.0).unwrap();
        let sp = PI.sqrt();
        let gamma2 = sp * sp;
        let expected = 0.5 * (sp / 2.0 + sp) - gamma2 + gamma2 * gamma2;
        assert!((energy(&st, &rho, &pot, 1.0).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn charge_examples() {
        let g = make_grid(1, 128, 32.0).unwrap();
        assert_eq!(charge(&FieldState::zero(g.clone())), 0.0);
        let psi: Vec<Complex64> = g.axis_coords().iter().map(|x| c((-0.5 * x * x).exp())).collect();
        let omega = 0.7;
        let pi: Vec<Complex64> = psi.iter().map(|z| z * Complex64::new(0.0, -omega)).collect();
        let st = FieldState::new(g.clone(), psi.clone(), pi, 0.0).unwrap();
        // (i/2)(conj(psi)(-i w psi) - (i w conj(psi)) psi) = w |psi|^2
        let norm = g.l2_norm_sq(&psi);
        assert!((charge(&st) - omega * norm).abs() < 1e-13);
        let pi: Vec<Complex64> = psi.iter().map(|z| z * 2.5).collect();
        let st = FieldState::new(g.clone(), psi, pi, 0.0).unwrap();
        assert!(charge(&st).abs() < 1e-15);
    }

    #[test]
    fn energy_norm_examples() {
        let g = make_grid(1, 64, 16.0).unwrap();
        assert_eq!(energy_norm(&FieldState::zero(g.clone()), 1.0), 0.0);
        let amp = 1.0 / g.box_length().sqrt();
        let st = FieldState::new(g.clone(), vec![c(amp); g.len()], vec![c(0.0); g.len()], 0.0).unwrap();
        assert!((energy_norm(&st, 1.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn energy_norm_routes_agree() {
        for dim in 1..=3 {
            let n = if dim == 3 { 16 } else { 64 };
            let g = make_grid(dim, n, 24.0).unwrap();
            for seed in 0..3 {
                let st = random_state(&g, seed);
                let a = energy_norm(&st, 1.3);
                let b = energy_norm_sobolev(&st, 1.3);
                assert!((a - b).abs() <= 1e-10 * a, "dim {dim}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn transform_round_trip() {
        let g = make_grid(2, 32, 10.0).unwrap();
        for seed in 0..4 {
            let st = random_state(&g, seed);
            let back = g.to_physical(&g.to_spectral(&st.psi));
            let err: f64 = back
                .iter()
                .zip(&st.psi)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let scale: f64 = st.psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= 1e-12 * scale);
        }
    }

    #[test]
    fn coupling_transform_is_cached_forward_transform() {
        let g = make_grid(1, 128, 32.0).unwrap();
        let rho = CouplingProfile::from_radial_spectrum(g.clone(), |k2| (-k2 / 2.0).exp() * (2.0 * PI).sqrt()).unwrap();
        // inverse transform of sqrt(2 pi) e^{-xi^2/2} is e^{-x^2/2}
        for (v, x) in rho.values().iter().zip(g.axis_coords()) {
            assert!((v - (-0.5 * x * x).exp()).abs() < 1e-12);
        }
        let back = g.to_physical(rho.rho_hat());
        for (z, v) in back.iter().zip(rho.values()) {
            assert!((z.re - v).abs() < 1e-12 && z.im.abs() < 1e-12);
        }
        let direct = rho.rho_hat_at(&[0.4]);
        assert!((direct.re - (2.0 * PI).sqrt() * (-0.08f64).exp()).abs() < 1e-12);
        assert!(CouplingProfile::from_real(g.clone(), vec![0.0; g.len()]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn inner_product_is_linear(seed in 0u64..1000, a_re in -2.0f64..2.0, a_im in -2.0f64..2.0, b_re in -2.0f64..2.0) {
            let g = make_grid(1, 64, 20.0).unwrap();
            let rho = CouplingProfile::gaussian(g.clone(), 1.0, 1.5).unwrap();
            let s1 = random_state(&g, seed);
            let s2 = random_state(&g, seed + 1);
            let a = Complex64::new(a_re, a_im);
            let b = Complex64::new(b_re, 0.3);
            let mix: Vec<Complex64> = s1.psi.iter().zip(&s2.psi).map(|(x, y)| a * x + b * y).collect();
            let st = FieldState::new(g.clone(), mix, s1.pi.clone(), 0.0).unwrap();
            let lhs = inner_product(&rho, &st).unwrap();
            let rhs = a * inner_product(&rho, &s1).unwrap() + b * inner_product(&rho, &s2).unwrap();
            proptest::prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }

        #[test]
        fn energy_and_charge_are_phase_invariant(seed in 0u64..1000, theta in 0.0f64..6.3) {
            let g = make_grid(1, 64, 20.0).unwrap();
            let rho = CouplingProfile::gaussian(g.clone(), 1.0, 1.0).unwrap();
            let pot = PolynomialPotential::new(vec![-1.0, 1.0]).unwrap();
            let st = random_state(&g, seed);
            let rot = st.rotated(theta);
            let (e0, e1) = (energy(&st, &rho, &pot, 1.0).unwrap(), energy(&rot, &rho, &pot, 1.0).unwrap());
            proptest::prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs().max(1.0));
            let (q0, q1) = (charge(&st), charge(&rot));
            proptest::prop_assert!((q0 - q1).abs() <= 1e-12 * energy_norm_sq(&st, 1.0));
        }
    }
}
