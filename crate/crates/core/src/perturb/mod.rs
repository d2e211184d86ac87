//! Perturbations `H_m = P_m(D) + V`: potentials, the Birman–Schwinger
//! solve for the perturbed resolvent, eigenvalue scans and diagnostics.

pub mod admissible;
pub mod solve;
pub mod spectrum;
pub mod sweep;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LapError, Result};
use crate::lattice::{Domain, Field, GridSpec};
use crate::spaces::{lorentz_norm_of, LorentzExponents};

pub use admissible::{admissibility_check, AdmissibilityConfig, AdmissibilityReport, SmallnessEntry, SmallnessRow};
pub use solve::{bs_solve, BsMethod, BsSolve, FreeResolvent, SolveFlag};
pub use spectrum::{
    candidates_match, eigen_scan, lanczos_lowest, rellich_profile, symmetry_defect, Candidate, EigenScan, RitzPair,
    ScanConfig,
};
pub use sweep::{lap_perturbed_sweep, CellSolve, NeumannCheck, PerturbedSweep, PerturbedSweepConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PotentialClass {
    WeakLorentz { q: f64 },
    BoundedCompact,
    Custom,
}

/// Lower end of the admissible weak-Lorentz exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QmRule {
    /// `q ≥ d/(2m)` when `d > 2m`.
    Closed(f64),
    /// `q > 1` when `d ≤ 2m`.
    OpenAbove(f64),
}

pub fn q_m(d: usize, m: u32) -> QmRule {
    if d > 2 * m as usize {
        QmRule::Closed(d as f64 / (2.0 * m as f64))
    } else {
        QmRule::OpenAbove(1.0)
    }
}

/// Checks `q` against `[q_m, (d+1)/2]` with the case split of [`q_m`].
pub fn validate_exponent(q: f64, d: usize, m: u32) -> Result<()> {
    let hi = (d as f64 + 1.0) / 2.0;
    let ok_lo = match q_m(d, m) {
        QmRule::Closed(lo) => q >= lo,
        QmRule::OpenAbove(lo) => q > lo,
    };
    if !(ok_lo && q <= hi) {
        return Err(LapError::InvalidParameter(format!(
            "q = {q} outside the admissible range {:?} .. {hi} for d = {d}, m = {m}",
            q_m(d, m)
        )));
    }
    Ok(())
}

/// A real potential sampled on the grid.
#[derive(Debug, Clone)]
pub struct Potential {
    field: Field,
    class: PotentialClass,
    support: Vec<usize>,
    support_radius: f64,
}

impl Potential {
    pub fn new(field: Field, class: PotentialClass) -> Result<Self> {
        field.require(Domain::Physical)?;
        let grid = *field.grid();
        let mut support = Vec::new();
        let mut radius: f64 = 0.0;
        let mut values = Vec::with_capacity(grid.len());
        for (k, v) in field.values().iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(LapError::NonFiniteSample { coord: grid.node(k)[..grid.dim()].to_vec(), value: *v });
            }
            if v.im != 0.0 {
                return Err(LapError::InvalidParameter(format!("potential must be real, got {v} at node {k}")));
            }
            if v.re != 0.0 {
                support.push(k);
                radius = radius.max(grid.node_norm(k));
            }
            values.push(Complex64::new(v.re, 0.0));
        }
        if let PotentialClass::WeakLorentz { q } = class {
            if !(q >= 1.0) {
                return Err(LapError::InvalidParameter(format!("weak Lorentz exponent must be >= 1, got {q}")));
            }
        }
        Ok(Self { field: Field::from_values(grid, Domain::Physical, values)?, class, support, support_radius: radius })
    }

    pub fn zero(grid: &GridSpec) -> Self {
        Self::new(Field::zeros(*grid, Domain::Physical), PotentialClass::BoundedCompact).expect("zero is valid")
    }

    /// `-depth · 1_{|x| ≤ radius}`.
    pub fn square_well(grid: &GridSpec, depth: f64, radius: f64) -> Result<Self> {
        let f = crate::lattice::sample_real(|x| if norm(x) <= radius { -depth } else { 0.0 }, grid)?;
        Self::new(f, PotentialClass::BoundedCompact)
    }

    /// `amplitude · exp(-|x|²/(2σ²))`, set to zero where the Gaussian
    /// factor is below `1e-16`.
    pub fn gaussian(grid: &GridSpec, amplitude: f64, sigma: f64) -> Result<Self> {
        let f = crate::lattice::sample_real(
            |x| {
                let g = (-norm(x).powi(2) / (2.0 * sigma * sigma)).exp();
                if g < 1e-16 {
                    0.0
                } else {
                    amplitude * g
                }
            },
            grid,
        )?;
        Self::new(f, PotentialClass::BoundedCompact)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn grid(&self) -> &GridSpec {
        self.field.grid()
    }

    pub fn class(&self) -> PotentialClass {
        self.class
    }

    /// Nodes where `V ≠ 0`, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.field.max_abs()
    }

    /// Validates the declared class against `(d, m)`.
    pub fn check_class(&self, m: u32) -> Result<()> {
        match self.class {
            PotentialClass::WeakLorentz { q } => validate_exponent(q, self.grid().dim(), m),
            _ => Ok(()),
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        self.field.values()[k].re
    }

    pub fn multiply(&self, u: &Field) -> Result<Field> {
        u.mul(&self.field)
    }

    pub fn weak_norm(&self, q: f64) -> Result<f64> {
        let mags: Vec<f64> = self.field.values().iter().map(|v| v.norm()).collect();
        Ok(lorentz_norm_of(&mags, self.grid().cell_volume(), LorentzExponents::weak(q)?))
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `V_J = Σ_{j ≤ J} j^{-1/q} 1_{E_j}` with concentric shells `E_j` of
/// grid measure `1/ln(1+j)`, ordered outward.
#[derive(Debug, Clone)]
pub struct ExamplePotential {
    pub q: f64,
    pub j_max: usize,
    pub potential: Potential,
    /// Shell index `j ≥ 1` of each node, 0 outside every shell.
    pub shell_of: Vec<u32>,
    /// Grid measure of each shell.
    pub measures: Vec<f64>,
}

/// Shells must hold at least this many nodes so rounding stays below 1%.
pub const MIN_SHELL_NODES: usize = 50;

pub fn example_potential(q: f64, j_max: usize, grid: &GridSpec) -> Result<ExamplePotential> {
    if !(q >= 1.0) {
        return Err(LapError::InvalidParameter(format!("q must be >= 1, got {q}")));
    }
    if j_max == 0 {
        return Err(LapError::InvalidParameter("J must be >= 1".into()));
    }
    let cell = grid.cell_volume();
    let counts: Vec<usize> = (1..=j_max).map(|j| (1.0 / ((1.0 + j as f64).ln() * cell)).round() as usize).collect();
    if let Some(c) = counts.last() {
        if *c < MIN_SHELL_NODES {
            return Err(LapError::InvalidParameter(format!(
                "grid too coarse: shell {j_max} would hold {c} nodes (need {MIN_SHELL_NODES})"
            )));
        }
    }
    let mut order: Vec<usize> = (0..grid.len()).filter(|&k| grid.node_norm(k) < grid.half_width()).collect();
    order.sort_by(|&a, &b| grid.node_norm(a).total_cmp(&grid.node_norm(b)).then(a.cmp(&b)));
    let needed: usize = counts.iter().sum();
    if needed > order.len() {
        return Err(LapError::BoxTooSmall { needed: needed as f64 * cell, available: order.len() as f64 * cell });
    }
    let mut shell_of = vec![0u32; grid.len()];
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut pos = 0;
    for (j, &c) in counts.iter().enumerate() {
        let amp = ((j + 1) as f64).powf(-1.0 / q);
        for &k in &order[pos..pos + c] {
            shell_of[k] = (j + 1) as u32;
            values[k] = Complex64::new(amp, 0.0);
        }
        pos += c;
    }
    let field = Field::from_values(*grid, Domain::Physical, values)?;
    Ok(ExamplePotential {
        q,
        j_max,
        potential: Potential::new(field, PotentialClass::WeakLorentz { q })?,
        shell_of,
        measures: counts.iter().map(|&c| c as f64 * cell).collect(),
    })
}

impl ExamplePotential {
    /// `Σ_{lo < j ≤ hi} j^{-1/q} 1_{E_j}`.
    pub fn band(&self, lo: usize, hi: usize) -> Result<Potential> {
        let f = self.potential.field().map(|k, v| {
            let j = self.shell_of[k] as usize;
            if j > lo && j <= hi {
                v
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Potential::new(f, PotentialClass::WeakLorentz { q: self.q })
    }

    /// `V_N`.
    pub fn truncation(&self, n: usize) -> Result<Potential> {
        self.band(0, n)
    }

    /// `V_J - V_N`.
    pub fn tail(&self, n: usize) -> Result<Potential> {
        self.band(n, self.j_max)
    }
}

/// `sup_t t · |{Σ_{lo<j≤hi} j^{-1/q} 1_{E_j} > t}|^{1/q}` for shells of
/// exact measure `1/ln(1+j)`: the direct evaluation of the tail chain.
pub fn example_tail_bound(q: f64, lo: usize, hi: usize) -> f64 {
    let mut acc = 0.0;
    let mut best: f64 = 0.0;
    for j in lo + 1..=hi {
        acc += 1.0 / (1.0 + j as f64).ln();
        best = best.max((j as f64).powf(-1.0 / q) * acc.powf(1.0 / q));
    }
    best
}
