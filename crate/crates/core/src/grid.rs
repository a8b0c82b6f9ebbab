//! Periodic tensor-product lattice standing in for `R^n`.
//!
//! Points are stored row-major (last axis fastest). Coordinates are signed
//! and wrapped, so index 0 along every axis sits at `x = 0` and the index
//! `N/2` sits at `x = -L/2`. With that placement the continuous Fourier
//! transform of a field centred at the origin is `h^n * DFT` with no extra
//! phase factor, which keeps every Fourier multiplier real.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid with `points_per_axis^dim` points on a box of side `box_length`.
#[derive(Clone)]
pub struct Grid {
    dim: usize,
    points_per_axis: usize,
    box_length: f64,
    spacing: f64,
    /// Signed wavenumber of each FFT index along one axis.
    axis_wavenumbers: Vec<f64>,
    /// Signed coordinate of each index along one axis.
    axis_coords: Vec<f64>,
    xi_sq: Vec<f64>,
    radius: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("points_per_axis", &self.points_per_axis)
            .field("box_length", &self.box_length)
            .finish()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-d grid, N={}, L={}",
            self.dim, self.points_per_axis, self.box_length
        )
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points_per_axis == other.points_per_axis && self.box_length == other.box_length
    }
}

/// Builds a grid; `N` must be a power of two and at least 8.
pub fn make_grid(dim: usize, points_per_axis: usize, box_length: f64) -> Result<Arc<Grid>> {
    Grid::new(dim, points_per_axis, box_length).map(Arc::new)
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, box_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points_per_axis must be a power of two >= 8, got {points_per_axis}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box_length must be positive, got {box_length}"
            )));
        }
        let n = points_per_axis;
        let spacing = box_length / n as f64;
        let signed = |j: usize| -> f64 {
            if j < n / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            }
        };
        let axis_wavenumbers: Vec<f64> = (0..n).map(|j| 2.0 * PI * signed(j) / box_length).collect();
        let axis_coords: Vec<f64> = (0..n).map(|j| signed(j) * spacing).collect();

        let total = n.pow(dim as u32);
        let mut xi_sq = vec![0.0; total];
        let mut radius = vec![0.0; total];
        for idx in 0..total {
            let mut rem = idx;
            let mut k2 = 0.0;
            let mut r2 = 0.0;
            for _ in 0..dim {
                let j = rem % n;
                rem /= n;
                k2 += axis_wavenumbers[j] * axis_wavenumbers[j];
                r2 += axis_coords[j] * axis_coords[j];
            }
            xi_sq[idx] = k2;
            radius[idx] = r2.sqrt();
        }

        let mut planner = FftPlanner::new();
        Ok(Self {
            dim,
            points_per_axis: n,
            box_length,
            spacing,
            axis_wavenumbers,
            axis_coords,
            xi_sq,
            radius,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of lattice points, `N^n`.
    pub fn len(&self) -> usize {
        self.xi_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi_sq.is_empty()
    }

    /// Volume element `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Spacing of the dual lattice, `2 pi / L`.
    pub fn wavenumber_spacing(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Signed per-axis wavenumbers `2 pi k / L`, `k = -N/2 .. N/2-1`, in increasing order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points_per_axis as i64;
        (-n / 2..n / 2).map(|k| 2.0 * PI * k as f64 / self.box_length).collect()
    }

    /// Per-axis wavenumbers in FFT storage order.
    pub fn axis_wavenumbers(&self) -> &[f64] {
        &self.axis_wavenumbers
    }

    /// Per-axis signed coordinates in storage order.
    pub fn axis_coords(&self) -> &[f64] {
        &self.axis_coords
    }

    /// `|xi|^2` for every spectral index.
    pub fn xi_sq(&self) -> &[f64] {
        &self.xi_sq
    }

    /// `|x|` for every lattice point.
    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    /// Signed coordinates of a flat index, axis 0 first.
    pub fn coords_of(&self, idx: usize) -> Vec<f64> {
        let n = self.points_per_axis;
        let mut out = vec![0.0; self.dim];
        let mut rem = idx;
        for a in (0..self.dim).rev() {
            out[a] = self.axis_coords[rem % n];
            rem /= n;
        }
        out
    }

    /// Wavevector of a flat spectral index, axis 0 first.
    pub fn wavevector_of(&self, idx: usize) -> Vec<f64> {
        let n = self.points_per_axis;
        let mut out = vec![0.0; self.dim];
        let mut rem = idx;
        for a in (0..self.dim).rev() {
            out[a] = self.axis_wavenumbers[rem % n];
            rem /= n;
        }
        out
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::GridMismatch {
                expected: format!("{} points ({self})", self.len()),
                found: format!("{len} points"),
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            });
        }
        Ok(())
    }

    /// Unnormalized forward DFT, `X_k = sum_j x_j e^{-i k.j}`, along every axis.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse DFT including the `1/N^n` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    pub fn to_spectral(&self, field: &[Complex64]) -> Vec<Complex64> {
        let mut out = field.to_vec();
        self.forward(&mut out);
        out
    }

    pub fn to_physical(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut out = spectrum.to_vec();
        self.inverse(&mut out);
        out
    }

    /// Applies the real Fourier multiplier `symbol(|xi|^2)` to a physical field.
    pub fn apply_multiplier(&self, field: &[Complex64], symbol: impl Fn(f64) -> f64) -> Vec<Complex64> {
        let mut buf = self.to_spectral(field);
        for (v, &k2) in buf.iter_mut().zip(&self.xi_sq) {
            *v *= symbol(k2);
        }
        self.inverse(&mut buf);
        buf
    }

    /// `h^n * sum conj(a) b` for physical fields.
    pub fn l2_inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let s: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        s * self.cell_volume()
    }

    pub fn l2_norm_sq(&self, a: &[Complex64]) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    /// `h^n / N^n * sum conj(A_k) B_k`: the physical L2 inner product computed from raw DFTs.
    pub fn spectral_inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let s: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        s * (self.cell_volume() / self.len() as f64)
    }

    /// Physical `||f||^2` from a raw DFT weighted by `weight(|xi|^2)`.
    pub fn spectral_weighted_norm_sq(&self, a: &[Complex64], weight: impl Fn(f64) -> f64) -> f64 {
        let s: f64 = a
            .iter()
            .zip(&self.xi_sq)
            .map(|(x, &k2)| weight(k2) * x.norm_sqr())
            .sum();
        s * (self.cell_volume() / self.len() as f64)
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "field length does not match grid");
        let n = self.points_per_axis;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // last axis is contiguous
        plan.process_with_scratch(data, &mut scratch);
        if self.dim == 1 {
            return;
        }
        let total = data.len();
        let mut lines = vec![Complex64::new(0.0, 0.0); total];
        for axis in 0..self.dim - 1 {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            // gather every line along `axis` into contiguous storage
            let mut line = 0;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for j in 0..n {
                        lines[line * n + j] = data[base + j * stride];
                    }
                    line += 1;
                }
            }
            plan.process_with_scratch(&mut lines, &mut scratch);
            let mut line = 0;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for j in 0..n {
                        data[base + j * stride] = lines[line * n + j];
                    }
                    line += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_lattice() {
        let g = make_grid(1, 8, 8.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        let ks = g.wavenumbers();
        assert_eq!(ks.len(), 8);
        for (i, k) in ks.iter().enumerate() {
            let expected = 2.0 * PI * (i as f64 - 4.0) / 8.0;
            assert!((k - expected).abs() < 1e-15);
        }
        assert_eq!(g.axis_coords()[4], -4.0);
    }

    #[test]
    fn two_dimensional_counts() {
        let g = make_grid(2, 16, 32.0).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.spacing(), 2.0);
        assert_eq!(g.cell_volume(), 4.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_grid(1, 7, 8.0).is_err());
        assert!(make_grid(1, 4, 8.0).is_err());
        assert!(make_grid(4, 8, 8.0).is_err());
        assert!(make_grid(0, 8, 8.0).is_err());
        assert!(make_grid(1, 8, -1.0).is_err());
    }

    #[test]
    fn multidimensional_transform_matches_direct_sum() {
        let g = make_grid(2, 8, 5.0).unwrap();
        let field: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let fast = g.to_spectral(&field);
        let n = 8;
        for k0 in 0..n {
            for k1 in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j0 in 0..n {
                    for j1 in 0..n {
                        let ph = -2.0 * PI * ((k0 * j0 + k1 * j1) as f64) / n as f64;
                        acc += field[j0 * n + j1] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - fast[k0 * n + k1]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn wavevector_and_coords_agree_with_caches() {
        let g = make_grid(3, 8, 3.0).unwrap();
        for idx in [0, 5, 77, 300, 511] {
            let k = g.wavevector_of(idx);
            let x = g.coords_of(idx);
            let k2: f64 = k.iter().map(|v| v * v).sum();
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((k2 - g.xi_sq()[idx]).abs() < 1e-12);
            assert!((r - g.radius()[idx]).abs() < 1e-12);
        }
    }
}
