//! Exact spherical averages of lattice spectra.
//!
//! The lattice transform `f̂(ξ) = h^d Σ f(x) e^{iξ·x}` is a trigonometric
//! polynomial, so
//! `∫_{S^{d-1}} f̂(ρw) conj(ĝ(ρw)) dw = h^{2d} Σ_Δ C(Δ) A_d(ρ|Δ|)`
//! with `C(Δ) = Σ_y f(y+Δ) conj(g(y))` and `A_d` the Fourier transform of
//! the unit-sphere measure. Grouping `Δ` by `|Δ|²/h²` leaves a short sum
//! per radius. Radial multipliers act as convolutions with radial kernels
//! built from the same angular transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{LapError, Result};
use crate::lattice::{fft_nd, Domain, Field, GridSpec};

/// `∫_{S^{d-1}} e^{i t w_1} dw`.
pub fn angular_transform(d: usize, t: f64) -> f64 {
    match d {
        2 => 2.0 * PI * libm::j0(t),
        3 => {
            if t.abs() < 1e-4 {
                4.0 * PI * (1.0 - t * t / 6.0)
            } else {
                4.0 * PI * t.sin() / t
            }
        }
        4 => {
            if t.abs() < 1e-4 {
                2.0 * PI * PI * (1.0 - t * t / 8.0)
            } else {
                4.0 * PI * PI * libm::j1(t) / t
            }
        }
        _ => panic!("angular transform defined for d in 2..=4"),
    }
}

/// Surface area of the unit sphere in `ℝ^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    angular_transform(d, 0.0)
}

/// The zero-padded `(2n)^d` lattice used for linear correlations.
#[derive(Debug, Clone)]
pub struct PaddedLattice {
    grid: GridSpec,
    padded: GridSpec,
    /// `|Δ|²/h²` for every padded index.
    q_of: Vec<u32>,
    /// Distinct values of `q` that occur, ascending.
    used: Vec<u32>,
    /// Position of each `q` in `used`.
    slot: Vec<u32>,
}

impl PaddedLattice {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        let n = grid.points();
        let padded = GridSpec::with_budget(grid.dim(), 2.0 * grid.half_width(), 2 * n, 1 << 26)?;
        let d = grid.dim();
        let mut q_of = Vec::with_capacity(padded.len());
        for k in 0..padded.len() {
            let idx = padded.multi_index(k);
            let q: i64 = idx[..d]
                .iter()
                .map(|&i| {
                    let o = offset(i, n);
                    o * o
                })
                .sum();
            q_of.push(q as u32);
        }
        let qmax = *q_of.iter().max().unwrap_or(&0) as usize;
        let mut present = vec![false; qmax + 1];
        for &q in &q_of {
            present[q as usize] = true;
        }
        let mut used = Vec::new();
        let mut slot = vec![u32::MAX; qmax + 1];
        for (q, &p) in present.iter().enumerate() {
            if p {
                slot[q] = used.len() as u32;
                used.push(q as u32);
            }
        }
        Ok(Self { grid: *grid, padded, q_of, used, slot })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Distances `h √q` of the distinct shells.
    pub fn distances(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        self.used.iter().map(|&q| h * (q as f64).sqrt()).collect()
    }

    /// Position of `q = |Δ|²/h²` in the tables indexed like [`Self::distances`].
    pub fn slot_of(&self, q: u32) -> Option<usize> {
        self.slot.get(q as usize).filter(|&&s| s != u32::MAX).map(|&s| s as usize)
    }

    pub fn shell_count(&self) -> usize {
        self.used.len()
    }

    fn pad(&self, f: &Field) -> Vec<Complex64> {
        let n = self.grid.points();
        let d = self.grid.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); self.padded.len()];
        for (k, v) in f.values().iter().enumerate() {
            let idx = self.grid.multi_index(k);
            let pk = idx[..d].iter().fold(0, |acc, &i| acc * 2 * n + i);
            out[pk] = *v;
        }
        out
    }

    fn check(&self, f: &Field) -> Result<()> {
        f.require(Domain::Physical)?;
        if *f.grid() != self.grid {
            return Err(LapError::GridMismatch);
        }
        Ok(())
    }

    /// Shell sums of the correlation `C(Δ) = Σ_y f(y+Δ) conj(g(y))`.
    pub fn shell_sums(&self, f: &Field, g: &Field) -> Result<ShellSums> {
        self.check(f)?;
        self.check(g)?;
        let mut a = self.pad(f);
        let mut b = self.pad(g);
        fft_nd(&mut a, &self.padded, FftDirection::Forward);
        fft_nd(&mut b, &self.padded, FftDirection::Forward);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y.conj();
        }
        fft_nd(&mut a, &self.padded, FftDirection::Inverse);
        let norm = 1.0 / self.padded.len() as f64;
        let mut sums = vec![Complex64::new(0.0, 0.0); self.used.len()];
        let peak = a.iter().map(|v| v.norm()).fold(0.0, f64::max) * norm;
        let mut reach = 0u32;
        for (k, v) in a.iter().enumerate() {
            let q = self.q_of[k];
            let c = v * norm;
            sums[self.slot[q as usize] as usize] += c;
            if c.norm() > 1e-14 * peak {
                reach = reach.max(q);
            }
        }
        let h = self.grid.spacing();
        Ok(ShellSums {
            d: self.grid.dim(),
            h,
            distances: self.distances(),
            sums,
            reach: h * (reach as f64).sqrt(),
        })
    }

    /// Padded spectrum of a kernel table (indexed like [`Self::distances`]).
    pub fn kernel_spectrum(&self, table: &[Complex64]) -> Result<Vec<Complex64>> {
        if table.len() != self.used.len() {
            return Err(LapError::LengthMismatch { expected: self.used.len(), found: table.len() });
        }
        let mut k: Vec<Complex64> = self.q_of.iter().map(|&q| table[self.slot[q as usize] as usize]).collect();
        fft_nd(&mut k, &self.padded, FftDirection::Forward);
        Ok(k)
    }

    /// `h^d Σ_y f(y) k_j(|x - y|)` at every node `x`, for kernels given by
    /// their padded spectra.
    pub fn convolve_spectra(&self, f: &Field, spectra: &[&[Complex64]]) -> Result<Vec<Field>> {
        self.check(f)?;
        let mut a = self.pad(f);
        fft_nd(&mut a, &self.padded, FftDirection::Forward);
        let n = self.grid.points();
        let d = self.grid.dim();
        let scale = self.grid.cell_volume() / self.padded.len() as f64;
        let mut out = Vec::with_capacity(spectra.len());
        for spec in spectra {
            if spec.len() != self.padded.len() {
                return Err(LapError::LengthMismatch { expected: self.padded.len(), found: spec.len() });
            }
            let mut k: Vec<Complex64> = spec.iter().zip(&a).map(|(x, y)| x * y).collect();
            fft_nd(&mut k, &self.padded, FftDirection::Inverse);
            let mut values = Vec::with_capacity(self.grid.len());
            for flat in 0..self.grid.len() {
                let idx = self.grid.multi_index(flat);
                let pk = idx[..d].iter().fold(0, |acc, &i| acc * 2 * n + i);
                values.push(k[pk] * scale);
            }
            out.push(Field::from_values(self.grid, Domain::Physical, values)?);
        }
        Ok(out)
    }

    /// `h^d Σ_y f(y) k_j(|x - y|)` for each kernel table `k_j` (indexed like
    /// [`Self::distances`]), evaluated at every node `x` of the grid.
    pub fn convolve(&self, f: &Field, kernels: &[Vec<Complex64>]) -> Result<Vec<Field>> {
        let spectra = kernels.iter().map(|t| self.kernel_spectrum(t)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[Complex64]> = spectra.iter().map(|s| s.as_slice()).collect();
        self.convolve_spectra(f, &refs)
    }
}

fn offset(i: usize, n: usize) -> i64 {
    if i < n {
        i as i64
    } else {
        i as i64 - 2 * n as i64
    }
}

/// Correlation shell sums of a pair of fields.
#[derive(Debug, Clone)]
pub struct ShellSums {
    d: usize,
    h: f64,
    distances: Vec<f64>,
    sums: Vec<Complex64>,
    reach: f64,
}

impl ShellSums {
    /// Largest `|Δ|` carrying a non-negligible correlation.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// `Φ(ρ) = ∫_{S^{d-1}} f̂(ρw) conj(ĝ(ρw)) dw`.
    pub fn spherical_mean(&self, rho: f64) -> Complex64 {
        let hd2 = self.h.powi(2 * self.d as i32);
        let s: Complex64 = self
            .distances
            .iter()
            .zip(&self.sums)
            .map(|(&r, c)| c * angular_transform(self.d, rho * r))
            .sum();
        s * hd2
    }

    /// `Ψ(ρ) = ρ^{d-1} Φ(ρ)`, the radial density of `∫ f̂ conj(ĝ) dξ`.
    pub fn radial_density(&self, rho: f64) -> Complex64 {
        self.spherical_mean(rho) * rho.powi(self.d as i32 - 1)
    }
}

/// Radial kernel tables `k_j(s) = (2π)^{-d} Σ_i c_j[i] ρ_i^{d-1} A_d(ρ_i s)`
/// at the given distances: the inverse transforms of radial multipliers
/// discretised by a radial rule with nodes `ρ_i` and weights folded in `c_j`.
pub fn radial_kernels(d: usize, nodes: &[f64], coefficients: &[Vec<Complex64>], distances: &[f64]) -> Vec<Vec<Complex64>> {
    let norm = (2.0 * PI).powi(-(d as i32));
    let scaled: Vec<Vec<Complex64>> = coefficients
        .iter()
        .map(|c| c.iter().zip(nodes).map(|(c, &r)| c * r.powi(d as i32 - 1) * norm).collect())
        .collect();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); distances.len()]; coefficients.len()];
    let mut ang = vec![0.0; nodes.len()];
    for (q, &s) in distances.iter().enumerate() {
        for (a, &r) in ang.iter_mut().zip(nodes) {
            *a = angular_transform(d, r * s);
        }
        for (j, c) in scaled.iter().enumerate() {
            out[j][q] = c.iter().zip(&ang).map(|(c, a)| c * a).sum();
        }
    }
    out
}

/// Largest `|ξ|` at which the lattice spectrum of `f` exceeds `rel` of its peak.
pub fn spectral_extent(f: &Field, rel: f64) -> Result<f64> {
    let spec = match f.domain() {
        Domain::Physical => f.forward()?,
        Domain::Spectral => f.clone(),
    };
    let peak = spec.max_abs();
    let grid = spec.grid();
    Ok(spec
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > rel * peak)
        .map(|(k, _)| grid.frequency_norm(k))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{sample, GridSpec};

    #[test]
    fn angular_transform_at_zero_is_area() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-14);
        // continuity across the small-argument branch
        for d in [3, 4] {
            assert!((angular_transform(d, 0.99e-4) - angular_transform(d, 1.01e-4)).abs() < 1e-9);
        }
    }

    #[test]
    fn spherical_mean_matches_direct_ring_sum() {
        let g = GridSpec::new(2, 6.0, 32).unwrap();
        let f = sample(|x| Complex64::new(1.0, x[0]) * (-(x[0] - 0.5).powi(2) - x[1] * x[1]).exp(), &g).unwrap();
        let h = sample(|x| (-(x[0] * x[0] + (x[1] + 0.3).powi(2)) / 1.5).exp() * Complex64::new(0.0, 1.0), &g).unwrap();
        let pl = PaddedLattice::new(&g).unwrap();
        let s = pl.shell_sums(&f, &h).unwrap();
        let direct = |xi: [f64; 2], u: &Field| -> Complex64 {
            let hd = g.cell_volume();
            (0..g.len())
                .map(|k| {
                    let x = g.node(k);
                    u.values()[k] * Complex64::from_polar(hd, xi[0] * x[0] + xi[1] * x[1])
                })
                .sum()
        };
        for rho in [0.3, 1.0, 2.2] {
            let n = 256;
            let mut ring = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let t = 2.0 * PI * j as f64 / n as f64;
                let xi = [rho * t.cos(), rho * t.sin()];
                ring += direct(xi, &f) * direct(xi, &h).conj();
            }
            ring *= 2.0 * PI / n as f64;
            let got = s.spherical_mean(rho);
            assert!((got - ring).norm() < 1e-10 * ring.norm().max(1e-3), "rho {rho}: {got} vs {ring}");
        }
    }

    #[test]
    fn convolution_with_delta_like_kernel() {
        // kernel equal to h^{-d} at distance 0 and zero elsewhere is the identity
        let g = GridSpec::new(3, 4.0, 16).unwrap();
        let f = sample(|x| Complex64::new(x[0], x[2]) * (-(x.iter().map(|v| v * v).sum::<f64>())).exp(), &g).unwrap();
        let pl = PaddedLattice::new(&g).unwrap();
        let mut k = vec![Complex64::new(0.0, 0.0); pl.shell_count()];
        k[0] = Complex64::new(1.0 / g.cell_volume(), 0.0);
        let out = pl.convolve(&f, &[k]).unwrap();
        assert!(out[0].rel_max_diff(&f).unwrap() < 1e-13);
    }
}
