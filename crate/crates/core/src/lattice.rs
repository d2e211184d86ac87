//! Periodic sampling grids on `[-L, L)^d` and the discrete Fourier transform.
//!
//! The transform follows the `+i` convention
//! `f̂(ξ) = ∫ f(x) e^{+iξ·x} dx`, discretised as `h^d Σ_x f(x) e^{+iξ_k·x}`.
//! The inverse uses `e^{-iξ·x}` with the `(2π)^{-d}` factor, so the pair is
//! exact on the lattice. To map onto the common `e^{-iξ·x}` convention,
//! reflect the frequency: `f̂_here(ξ) = f̂_common(-ξ)`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{LapError, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 4;

/// Default cap on `n^d`.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::with_budget(dim, half_width, points, DEFAULT_POINT_BUDGET)
    }

    pub fn with_budget(dim: usize, half_width: f64, points: usize, budget: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(LapError::InvalidGrid(format!("dimension {dim} not in 2..=4")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(LapError::InvalidGrid(format!("half width {half_width} must be > 0")));
        }
        if points < 16 || !points.is_multiple_of(2) {
            return Err(LapError::InvalidGrid(format!(
                "points per axis {points} must be even and >= 16"
            )));
        }
        let total = (points as u128).pow(dim as u32);
        if total > budget as u128 {
            return Err(LapError::InvalidGrid(format!(
                "{points}^{dim} = {total} points exceeds the budget of {budget}"
            )));
        }
        Ok(Self { dim, half_width, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node spacing `h = 2L/n`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Frequency step `Δξ = π/L`.
    pub fn freq_step(&self) -> f64 {
        PI / self.half_width
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn freq_cell_volume(&self) -> f64 {
        self.freq_step().powi(self.dim as i32)
    }

    /// Largest representable frequency magnitude per axis, `πn/(2L)`.
    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / (2.0 * self.half_width)
    }

    /// Physical coordinate of axis index `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Signed frequency index of FFT slot `k`.
    #[inline]
    pub fn freq_index(&self, k: usize) -> i64 {
        let n = self.points as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    #[inline]
    pub fn axis_frequency(&self, k: usize) -> f64 {
        self.freq_index(k) as f64 * self.freq_step()
    }

    /// Multi-index of a flat position; axis 0 varies slowest.
    #[inline]
    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.points;
            flat /= self.points;
        }
        idx
    }

    #[inline]
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn node(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.coord(idx[a]);
        }
        x
    }

    pub fn frequency(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut xi = [0.0; MAX_DIM];
        for a in 0..self.dim {
            xi[a] = self.axis_frequency(idx[a]);
        }
        xi
    }

    pub fn node_norm(&self, flat: usize) -> f64 {
        self.node(flat)[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn frequency_norm(&self, flat: usize) -> f64 {
        self.frequency(flat)[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Flat index of the origin node.
    pub fn origin(&self) -> usize {
        self.flat_index(&[self.points / 2; MAX_DIM])
    }

    /// Node map `x -> -x` (periodic, so `-L` maps to itself).
    pub fn mirror(&self, flat: usize) -> usize {
        let mut idx = self.multi_index(flat);
        for i in idx.iter_mut().take(self.dim) {
            *i = (self.points - *i) % self.points;
        }
        self.flat_index(&idx)
    }

    /// Frequency map `ξ -> -ξ`; the slot `-n/2` has no partner and maps to itself.
    pub fn freq_mirror(&self, flat: usize) -> usize {
        self.mirror(flat)
    }

    /// True for frequency slots whose negative is also on the lattice.
    pub fn has_freq_partner(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        idx[..self.dim].iter().all(|&k| k != self.points / 2)
    }

    /// Same box, twice the resolution.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.dim, self.half_width, self.points * 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Physical,
    Spectral,
}

/// Complex samples on a grid, tagged by domain. Immutable once built.
#[derive(Debug, Clone)]
pub struct Field {
    grid: GridSpec,
    domain: Domain,
    values: Arc<Vec<Complex64>>,
}

impl Field {
    pub fn from_values(grid: GridSpec, domain: Domain, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LapError::LengthMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, domain, values: Arc::new(values) })
    }

    pub fn zeros(grid: GridSpec, domain: Domain) -> Self {
        Self { grid, domain, values: Arc::new(vec![Complex64::new(0.0, 0.0); grid.len()]) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        Arc::try_unwrap(self.values).unwrap_or_else(|v| (*v).clone())
    }

    pub fn require(&self, domain: Domain) -> Result<()> {
        if self.domain != domain {
            return Err(LapError::WrongDomain { expected: domain, found: self.domain });
        }
        Ok(())
    }

    fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid || self.domain != other.domain {
            return Err(LapError::GridMismatch);
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(usize, Complex64) -> Complex64) -> Field {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(i, v)).collect();
        Field { grid: self.grid, domain: self.domain, values: Arc::new(values) }
    }

    pub fn scale(&self, c: Complex64) -> Field {
        self.map(|_, v| v * c)
    }

    pub fn conj(&self) -> Field {
        self.map(|_, v| v.conj())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &Field, b: Complex64) -> Result<Field> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(other.values.iter()).map(|(&x, &y)| a * x + b * y).collect();
        Ok(Field { grid: self.grid, domain: self.domain, values: Arc::new(values) })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// Pointwise product with another field on the same grid.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(other.values.iter()).map(|(&x, &y)| x * y).collect();
        Ok(Field { grid: self.grid, domain: self.domain, values: Arc::new(values) })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Measure-weighted `L²` norm in the field's own domain
    /// (`h^d` physically, `(2π)^{-d}Δξ^d` spectrally).
    pub fn l2_norm(&self) -> f64 {
        let w = match self.domain {
            Domain::Physical => self.grid.cell_volume(),
            Domain::Spectral => self.grid.freq_cell_volume() / (2.0 * PI).powi(self.grid.dim as i32),
        };
        (w * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `⟨f, g⟩ = ∫ f ḡ`, with the measure of the field's domain.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.same_grid(other)?;
        let w = match self.domain {
            Domain::Physical => self.grid.cell_volume(),
            Domain::Spectral => self.grid.freq_cell_volume() / (2.0 * PI).powi(self.grid.dim as i32),
        };
        let s: Complex64 = self.values.iter().zip(other.values.iter()).map(|(a, b)| a * b.conj()).sum();
        Ok(s * w)
    }

    /// Largest relative difference `max|f-g| / max|g|`.
    pub fn rel_max_diff(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        let diff = self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = other.max_abs().max(self.max_abs());
        Ok(if scale == 0.0 { diff } else { diff / scale })
    }

    /// Peak magnitude on the outermost node layer relative to the global
    /// peak. Physical test fields must keep this below `1e-10`.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let n = self.grid.points;
        let mut edge: f64 = 0.0;
        for (flat, v) in self.values.iter().enumerate() {
            let idx = self.grid.multi_index(flat);
            if idx[..self.grid.dim].iter().any(|&i| i == 0 || i == n - 1) {
                edge = edge.max(v.norm());
            }
        }
        edge / peak
    }

    pub fn is_decayed(&self) -> bool {
        self.boundary_ratio() <= BOX_DECAY_TOL
    }

    pub fn forward(&self) -> Result<Field> {
        forward_transform(self)
    }

    pub fn inverse(&self) -> Result<Field> {
        inverse_transform(self)
    }
}

/// Relative edge magnitude above which an experiment is flagged.
pub const BOX_DECAY_TOL: f64 = 1e-10;

/// Samples `f` at every node.
pub fn sample(f: impl Fn(&[f64]) -> Complex64, grid: &GridSpec) -> Result<Field> {
    let d = grid.dim();
    let mut values = Vec::with_capacity(grid.len());
    for flat in 0..grid.len() {
        let x = grid.node(flat);
        let v = f(&x[..d]);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(LapError::NonFiniteSample { coord: x[..d].to_vec(), value: v });
        }
        values.push(v);
    }
    Field::from_values(*grid, Domain::Physical, values)
}

/// Samples a real-valued function.
pub fn sample_real(f: impl Fn(&[f64]) -> f64, grid: &GridSpec) -> Result<Field> {
    sample(|x| Complex64::new(f(x), 0.0), grid)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, dir))
}

/// Unnormalised in-place FFT along every axis.
pub(crate) fn fft_nd(values: &mut [Complex64], grid: &GridSpec, dir: FftDirection) {
    let n = grid.points();
    let d = grid.dim();
    let fft = plan(n, dir);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..values.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                if stride == 1 {
                    fft.process_with_scratch(&mut values[start..start + n], &mut scratch);
                    continue;
                }
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = values[start + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, slot) in line.iter().enumerate() {
                    values[start + j * stride] = *slot;
                }
            }
        }
    }
}

/// Parity factor `Π_a (-1)^{k_a}` from placing node 0 at `-L`.
#[inline]
fn parity(grid: &GridSpec, flat: usize) -> f64 {
    let idx = grid.multi_index(flat);
    let s: usize = idx[..grid.dim()].iter().sum();
    if s.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

pub fn forward_transform(f: &Field) -> Result<Field> {
    f.require(Domain::Physical)?;
    let grid = *f.grid();
    let mut values = f.values().to_vec();
    // e^{+iξ_k x_j} = (-1)^k e^{+2πi kj/n}: the "inverse" FFT kernel.
    fft_nd(&mut values, &grid, FftDirection::Inverse);
    let hd = grid.cell_volume();
    for (flat, v) in values.iter_mut().enumerate() {
        *v *= hd * parity(&grid, flat);
    }
    Field::from_values(grid, Domain::Spectral, values)
}

pub fn inverse_transform(f: &Field) -> Result<Field> {
    f.require(Domain::Spectral)?;
    let grid = *f.grid();
    let mut values = f.values().to_vec();
    for (flat, v) in values.iter_mut().enumerate() {
        *v *= parity(&grid, flat);
    }
    fft_nd(&mut values, &grid, FftDirection::Forward);
    // (2π)^{-d} Δξ^d = (n h)^{-d}
    let norm = grid.freq_cell_volume() / (2.0 * std::f64::consts::PI).powi(grid.dim() as i32);
    for v in values.iter_mut() {
        *v *= norm;
    }
    Field::from_values(grid, Domain::Physical, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1, 1.0, 16).is_err());
        assert!(GridSpec::new(5, 1.0, 16).is_err());
        assert!(GridSpec::new(2, 0.0, 16).is_err());
        assert!(GridSpec::new(2, 1.0, 15).is_err());
        assert!(GridSpec::new(2, 1.0, 14).is_err());
        assert!(GridSpec::with_budget(3, 1.0, 64, 1000).is_err());
        let g = GridSpec::new(2, 10.0, 64).unwrap();
        assert_eq!(g.len(), 4096);
        assert!((g.spacing() - 0.3125).abs() < 1e-15);
        assert!((g.freq_step() - PI / 10.0).abs() < 1e-15);
    }

    #[test]
    fn frequency_lattice_covers_half_open_box() {
        let g = GridSpec::new(2, 5.0, 16).unwrap();
        let ks: Vec<i64> = (0..16).map(|k| g.freq_index(k)).collect();
        assert_eq!(*ks.iter().min().unwrap(), -8);
        assert_eq!(*ks.iter().max().unwrap(), 7);
        assert!((g.axis_frequency(8) + g.nyquist()).abs() < 1e-12);
    }

    #[test]
    fn constant_sample() {
        let g = GridSpec::new(3, 4.0, 16).unwrap();
        let f = sample(|_| c(1.0), &g).unwrap();
        assert!(f.values().iter().all(|v| *v == c(1.0)));
    }

    #[test]
    fn gaussian_peaks_at_origin_node() {
        let g = GridSpec::new(2, 10.0, 64).unwrap();
        let f = sample_real(|x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp(), &g).unwrap();
        let (imax, vmax) = f
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.re.partial_cmp(&b.1.re).unwrap())
            .unwrap();
        assert_eq!(imax, g.origin());
        assert_eq!(vmax.re, 1.0);
    }

    #[test]
    fn odd_function_is_antisymmetric_under_mirror() {
        let g = GridSpec::new(2, 6.0, 32).unwrap();
        let f = sample_real(|x| x[0] * (-(x[0] * x[0] + x[1] * x[1])).exp(), &g).unwrap();
        for flat in 0..g.len() {
            let idx = g.multi_index(flat);
            if idx[0] == 0 || idx[1] == 0 {
                continue;
            }
            let m = g.mirror(flat);
            assert!((f.values()[flat] + f.values()[m]).norm() < 1e-15);
        }
    }

    #[test]
    fn non_finite_sample_reports_coordinate() {
        let g = GridSpec::new(2, 2.0, 16).unwrap();
        let err = sample_real(|x| if x[0] == 0.0 && x[1] == 0.0 { f64::NAN } else { 1.0 }, &g).unwrap_err();
        match err {
            LapError::NonFiniteSample { coord, .. } => assert_eq!(coord, vec![0.0, 0.0]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn wrong_domain_is_rejected() {
        let g = GridSpec::new(2, 2.0, 16).unwrap();
        let f = Field::zeros(g, Domain::Spectral);
        assert!(matches!(forward_transform(&f), Err(LapError::WrongDomain { .. })));
        let p = Field::zeros(g, Domain::Physical);
        assert!(matches!(inverse_transform(&p), Err(LapError::WrongDomain { .. })));
    }

    #[test]
    fn spectral_delta_gives_constant() {
        let g = GridSpec::new(2, 3.0, 16).unwrap();
        let mut v = vec![c(0.0); g.len()];
        v[0] = c(1.0);
        let f = Field::from_values(g, Domain::Spectral, v).unwrap().inverse().unwrap();
        let expected = 1.0 / (2.0 * g.half_width()).powi(2);
        assert!(f.values().iter().all(|z| (z - c(expected)).norm() < 1e-15));
    }

    #[test]
    fn even_real_field_has_real_transform() {
        let g = GridSpec::new(2, 8.0, 32).unwrap();
        let f = sample_real(|x| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 3.0).exp(), &g).unwrap();
        let ft = f.forward().unwrap();
        let peak = ft.max_abs();
        assert!(ft.values().iter().all(|z| z.im.abs() <= 1e-10 * peak));
    }
}
