//! Boundary values `R_0^m(λ ± i0)` of the free resolvent.
//!
//! Pairings and applications are reduced to one-dimensional integrals in
//! `ρ = |ξ|` of the exact spherical averages of lattice spectra (see
//! [`shells`]). The `plemelj` backend integrates the interpolated radial
//! density against the principal value and the delta mass of
//! `1/(ρ^{2m} - λ)`; the `epsilon_limit` backend integrates against
//! `1/(ρ^{2m} - λ ∓ iε)` and extrapolates `ε -> 0`.

pub mod kernel;
pub mod radial;
pub mod shells;
pub mod sphere;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LapError, Result};
use crate::lattice::{Field, GridSpec};
use crate::multiplier::{shell_radius, RadialFn};
use crate::quadrature::richardson;
use crate::spaces::{mu_weight, WeightParams};

pub use kernel::{decay_scan, graph_and_weight, kernel_k_plus, DecayRow, DecayTable, GraphPoint, KernelSample};
pub use radial::{plemelj_weights, resolvent_weights, RadialGrid, PANEL_ORDER};
pub use shells::{angular_transform, radial_kernels, spectral_extent, PaddedLattice, ShellSums};
pub use sphere::{SpectralSampler, SphereQuadrature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Plemelj,
    EpsilonLimit,
}

/// Relative spectral threshold defining the radial extent of a field.
pub const SPECTRAL_CUTOFF: f64 = 1e-14;

/// Parameters of a boundary-value evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub lambda: f64,
    pub m: u32,
    pub sign: Sign,
    pub backend: Backend,
    /// Admissible levels are `[δ, 1/δ]`.
    pub delta: f64,
    /// Geometric sequence used by the `epsilon_limit` backend.
    pub eps_sequence: Vec<f64>,
    /// Relative tolerance of the backend cross-check in `boundary_apply`.
    pub cross_check_tol: f64,
    /// Evaluate the other backend in `boundary_apply` and compare.
    pub cross_check: bool,
}

/// `ε_k = 0.1 · 2^{-k}`, `k = 0..6`.
pub fn default_eps_sequence() -> Vec<f64> {
    (0..6).map(|k| 0.1 * 0.5f64.powi(k)).collect()
}

impl BoundarySpec {
    pub fn new(lambda: f64, m: u32, sign: Sign) -> Self {
        Self {
            lambda,
            m,
            sign,
            backend: Backend::Plemelj,
            delta: 0.1,
            eps_sequence: default_eps_sequence(),
            cross_check_tol: 1e-4,
            cross_check: true,
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(LapError::InvalidParameter(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        if self.m == 0 {
            return Err(LapError::InvalidParameter("m must be >= 1".into()));
        }
        let (lo, hi) = (self.delta, 1.0 / self.delta);
        if !(self.lambda >= lo && self.lambda <= hi) {
            return Err(LapError::LambdaOutOfRange { lambda: self.lambda, lo, hi });
        }
        if self.eps_sequence.len() < 2 || self.eps_sequence.iter().any(|&e| !(e > 0.0)) {
            return Err(LapError::InvalidParameter("eps_sequence needs at least two positive entries".into()));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        shell_radius(self.lambda, self.m)
    }

    fn eps_ratio(&self) -> f64 {
        self.eps_sequence[1] / self.eps_sequence[0]
    }
}

/// `1/|∇P_m|` on the level set `{P_m = λ}`.
pub fn coarea_factor(lambda: f64, m: u32) -> f64 {
    let r = shell_radius(lambda, m);
    1.0 / (2.0 * m as f64 * r.powi(2 * m as i32 - 1))
}

/// The radial integration problem shared by pairings and applications.
#[derive(Debug, Clone, Copy)]
enum Target {
    OffAxis(Complex64),
    Boundary { lambda: f64, sign: Sign, backend: Backend },
}

/// Result of `boundary_pairing`.
#[derive(Debug, Clone, Serialize)]
pub struct Pairing {
    pub value: Complex64,
    /// `± iπ (2π)^{-d} ∫ δ(P_m - λ) f̂ conj(ĝ) dξ` (plemelj backend).
    pub surface: Option<Complex64>,
    /// `(2π)^{-d} p.v.∫ f̂ conj(ĝ) / (P_m - λ) dξ` (plemelj backend).
    pub principal: Option<Complex64>,
    pub backend: Backend,
    /// Difference of the last two Richardson diagonals (epsilon backend).
    pub extrapolation_spread: Option<f64>,
    pub radial_nodes: usize,
    pub rho_max: f64,
}

/// Width of radial panels resolving oscillations `e^{iρs}` for `s ≤ reach`.
fn panel_width(reach: f64) -> f64 {
    (6.0 / reach.max(1.0)).min(0.5)
}

fn grid_for(target: &Target, m: u32, rho_max: f64, width: f64) -> Result<RadialGrid> {
    let centre = match *target {
        Target::Boundary { lambda, .. } => Some(shell_radius(lambda, m)),
        Target::OffAxis(z) if z.re > 0.0 => Some(shell_radius(z.re, m)),
        Target::OffAxis(_) => None,
    };
    match centre {
        Some(r) => RadialGrid::centred(r, rho_max, width, PANEL_ORDER),
        None => RadialGrid::uniform(rho_max, width, PANEL_ORDER),
    }
}

/// Radial extent used for a set of fields: their spectral extent plus a
/// margin, capped at the Nyquist radius.
fn rho_max_for(fields: &[&Field]) -> Result<f64> {
    let grid = fields[0].grid();
    let mut ext: f64 = 0.0;
    for f in fields {
        ext = ext.max(spectral_extent(f, SPECTRAL_CUTOFF)?);
    }
    Ok((ext + 2.0 * grid.freq_step()).min(grid.nyquist()))
}

/// Nodal values of the radial density with an interpolation check; panels
/// are halved until off-node values agree to `1e-10` relative.
fn resolved_density(sums: &ShellSums, target: &Target, m: u32, rho_max: f64) -> Result<(RadialGrid, Vec<Complex64>)> {
    let mut width = panel_width(sums.reach());
    let mut last = f64::INFINITY;
    for _ in 0..4 {
        let grid = grid_for(target, m, rho_max, width)?;
        let psi: Vec<Complex64> = grid.nodes().iter().map(|&r| sums.radial_density(r)).collect();
        let scale = psi.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let err = grid
            .check_points()
            .iter()
            .map(|&t| (grid.interpolate(&psi, t) - sums.radial_density(t)).norm())
            .fold(0.0, f64::max)
            / scale;
        if err <= 1e-10 {
            return Ok((grid, psi));
        }
        last = err;
        width *= 0.5;
    }
    Err(LapError::Resolution { what: "radial density interpolation".into(), estimate: last, tol: 1e-10 })
}

/// Reusable per-grid state for boundary computations.
#[derive(Debug, Clone)]
pub struct BoundaryContext {
    lattice: PaddedLattice,
}

impl BoundaryContext {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        Ok(Self { lattice: PaddedLattice::new(grid)? })
    }

    pub fn grid(&self) -> &GridSpec {
        self.lattice.grid()
    }

    pub fn lattice(&self) -> &PaddedLattice {
        &self.lattice
    }

    fn norm(&self) -> f64 {
        (2.0 * PI).powi(-(self.grid().dim() as i32))
    }

    /// `⟨R_0^m(λ ± i0) f, g⟩ = ∫ [R_0 f] conj(g) dx`.
    pub fn pairing(&self, f: &Field, g: &Field, spec: &BoundarySpec) -> Result<Pairing> {
        spec.validate()?;
        let sums = self.lattice.shell_sums(f, g)?;
        let rho_max = rho_max_for(&[f, g])?;
        let target = Target::Boundary { lambda: spec.lambda, sign: spec.sign, backend: spec.backend };
        let (grid, psi) = resolved_density(&sums, &target, spec.m, rho_max)?;
        let norm = self.norm();
        let dot = |w: &[Complex64]| -> Complex64 { w.iter().zip(&psi).map(|(w, p)| w * p).sum::<Complex64>() * norm };
        match spec.backend {
            Backend::Plemelj => {
                let w = plemelj_weights(&grid, spec.m, spec.lambda);
                let principal: Complex64 = w.pv.iter().zip(&psi).map(|(w, p)| p * *w).sum::<Complex64>() * norm;
                let r = spec.radius();
                let surface = Complex64::new(0.0, spec.sign.value() * PI)
                    * norm
                    * sums.radial_density(r)
                    * coarea_factor(spec.lambda, spec.m);
                Ok(Pairing {
                    value: principal + surface,
                    surface: Some(surface),
                    principal: Some(principal),
                    backend: Backend::Plemelj,
                    extrapolation_spread: None,
                    radial_nodes: grid.len(),
                    rho_max: grid.rho_max(),
                })
            }
            Backend::EpsilonLimit => {
                let mut samples = Vec::with_capacity(spec.eps_sequence.len());
                for &eps in &spec.eps_sequence {
                    let z = Complex64::new(spec.lambda, spec.sign.value() * eps);
                    samples.push(vec![dot(&resolvent_weights(&grid, spec.m, z)?)]);
                }
                let rich = richardson(&samples, spec.eps_ratio(), samples.len() - 1);
                Ok(Pairing {
                    value: rich.value[0],
                    surface: None,
                    principal: None,
                    backend: Backend::EpsilonLimit,
                    extrapolation_spread: Some(rich.spread),
                    radial_nodes: grid.len(),
                    rho_max: grid.rho_max(),
                })
            }
        }
    }

    /// `⟨R_0^m(z) f, g⟩` for `z` off `[0, ∞)`, by the same radial rule.
    pub fn resolvent_pairing(&self, f: &Field, g: &Field, z: Complex64, m: u32) -> Result<Complex64> {
        let sums = self.lattice.shell_sums(f, g)?;
        let rho_max = rho_max_for(&[f, g])?;
        let target = Target::OffAxis(z);
        let (grid, psi) = resolved_density(&sums, &target, m, rho_max)?;
        let w = resolvent_weights(&grid, m, z)?;
        Ok(w.iter().zip(&psi).map(|(w, p)| w * p).sum::<Complex64>() * self.norm())
    }

    /// Radial weights of the target on `grid`, one vector per ε in the
    /// epsilon backend.
    fn target_weights(&self, grid: &RadialGrid, m: u32, target: &Target, eps: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        match *target {
            Target::OffAxis(z) => Ok(vec![resolvent_weights(grid, m, z)?]),
            Target::Boundary { lambda, sign, backend: Backend::Plemelj } => {
                Ok(vec![plemelj_weights(grid, m, lambda).combined(sign.value())])
            }
            Target::Boundary { lambda, sign, backend: Backend::EpsilonLimit } => eps
                .iter()
                .map(|&e| resolvent_weights(grid, m, Complex64::new(lambda, sign.value() * e)))
                .collect(),
        }
    }

    /// Kernel tables of `σ_j(D) R` for every profile `σ_j`, plus the
    /// table of `(P_m(D) - z) R` used as a residual check, for fields whose
    /// spectrum lies in `|ξ| ≤ rho_max`.
    fn operator(&self, m: u32, target: &Target, eps: &[f64], profiles: &[RadialFn], rho_max: f64) -> Result<RadialOperator> {
        let g = self.grid();
        let reach = (g.dim() as f64).sqrt() * 2.0 * g.half_width();
        let rho_max = rho_max.min(g.nyquist());
        let grid = grid_for(target, m, rho_max, panel_width(reach))?;
        let z_of = |e: f64| -> Complex64 {
            match *target {
                Target::OffAxis(z) => z,
                Target::Boundary { lambda, sign, backend: Backend::EpsilonLimit } => Complex64::new(lambda, sign.value() * e),
                Target::Boundary { lambda, .. } => Complex64::new(lambda, 0.0),
            }
        };
        let weight_sets = self.target_weights(&grid, m, target, eps)?;
        let distances = self.lattice.distances();
        let mut per_eps = Vec::with_capacity(weight_sets.len());
        for (k, w) in weight_sets.iter().enumerate() {
            let z = z_of(eps.get(k).copied().unwrap_or(0.0));
            let mut coeffs: Vec<Vec<Complex64>> = profiles
                .iter()
                .map(|p| w.iter().zip(grid.nodes()).map(|(w, &r)| w * p(r)).collect())
                .collect();
            coeffs.push(
                w.iter().zip(grid.nodes()).map(|(w, &r)| w * (Complex64::new(r.powi(2 * m as i32), 0.0) - z)).collect(),
            );
            let tables = radial_kernels(g.dim(), grid.nodes(), &coeffs, &distances);
            per_eps.push(tables.concat());
        }
        let (flat, spread) = if per_eps.len() == 1 {
            (per_eps.pop().unwrap(), None)
        } else {
            let ratio = eps[1] / eps[0];
            let rich = richardson(&per_eps, ratio, per_eps.len() - 1);
            let spread = rich.spread / rich.scale.max(1e-300);
            (rich.value, Some(spread))
        };
        let mut spectra = flat
            .chunks(distances.len())
            .map(|c| self.lattice.kernel_spectrum(c))
            .collect::<Result<Vec<_>>>()?;
        let residual_spectrum = spectra.pop().unwrap();
        Ok(RadialOperator { spectra, residual_spectrum, rho_max, radial_nodes: grid.len(), extrapolation_spread: spread })
    }

    /// Kernel of `R_0^m(z)` restricted to `|ξ| ≤ rho_max`, as a table over
    /// the lattice distances `h √q`.
    pub fn resolvent_kernel_table(&self, z: Complex64, m: u32, rho_max: f64) -> Result<Vec<Complex64>> {
        if z.im == 0.0 && z.re >= 0.0 {
            return Err(LapError::OnSpectrum { z, distance: 0.0 });
        }
        let g = self.grid();
        let reach = (g.dim() as f64).sqrt() * 2.0 * g.half_width();
        let target = Target::OffAxis(z);
        let grid = grid_for(&target, m, rho_max.min(g.nyquist()), panel_width(reach))?;
        let w = resolvent_weights(&grid, m, z)?;
        Ok(radial_kernels(g.dim(), grid.nodes(), &[w], &self.lattice.distances()).pop().unwrap())
    }

    /// Precomputed `σ_j(D) R_0^m(z)`.
    pub fn resolvent_operator(&self, z: Complex64, m: u32, profiles: &[RadialFn], rho_max: f64) -> Result<RadialOperator> {
        if z.im == 0.0 && z.re >= 0.0 {
            return Err(LapError::OnSpectrum { z, distance: 0.0 });
        }
        self.operator(m, &Target::OffAxis(z), &[], profiles, rho_max)
    }

    /// Precomputed `σ_j(D) R_0^m(λ ± i0)` for the given backend.
    pub fn boundary_operator(&self, spec: &BoundarySpec, backend: Backend, profiles: &[RadialFn], rho_max: f64) -> Result<RadialOperator> {
        spec.validate()?;
        let target = Target::Boundary { lambda: spec.lambda, sign: spec.sign, backend };
        self.operator(spec.m, &target, &spec.eps_sequence, profiles, rho_max)
    }

    /// Applies a precomputed operator; the residual column measures how
    /// well `(P_m(D) - z)` undoes it on `f`.
    pub fn apply(&self, op: &RadialOperator, f: &Field) -> Result<RadialApply> {
        let mut spectra: Vec<&[Complex64]> = op.spectra.iter().map(|s| s.as_slice()).collect();
        spectra.push(&op.residual_spectrum);
        let mut fields = self.lattice.convolve_spectra(f, &spectra)?;
        let synth = fields.pop().unwrap();
        let residual = synth.rel_max_diff(f)?;
        Ok(RadialApply { fields, residual, extrapolation_spread: op.extrapolation_spread })
    }

    /// The selected outputs of a precomputed operator, without the residual.
    pub fn apply_outputs(&self, op: &RadialOperator, f: &Field, which: &[usize]) -> Result<Vec<Field>> {
        let spectra: Vec<&[Complex64]> = which.iter().map(|&k| op.spectra[k].as_slice()).collect();
        self.lattice.convolve_spectra(f, &spectra)
    }

    /// `σ_j(D) R_0^m(z) f` on the grid for every profile, with the
    /// continuum resolvent (no periodic wrap-around).
    pub fn apply_resolvent(&self, f: &Field, z: Complex64, m: u32, profiles: &[RadialFn]) -> Result<RadialApply> {
        let op = self.resolvent_operator(z, m, profiles, rho_max_for(&[f])?)?;
        self.apply(&op, f)
    }

    /// `σ_j(D) R_0^m(λ ± i0) f` on the grid for every profile.
    pub fn apply_boundary(&self, f: &Field, spec: &BoundarySpec, backend: Backend, profiles: &[RadialFn]) -> Result<RadialApply> {
        let op = self.boundary_operator(spec, backend, profiles, rho_max_for(&[f])?)?;
        self.apply(&op, f)
    }


    /// `u = R_0^m(λ ± i0) f` with the configured backend, cross-checked
    /// against the other one when requested.
    pub fn boundary_apply(&self, f: &Field, spec: &BoundarySpec) -> Result<BoundaryApply> {
        let one: RadialFn = std::sync::Arc::new(|_| Complex64::new(1.0, 0.0));
        let main = self.apply_boundary(f, spec, spec.backend, std::slice::from_ref(&one))?;
        let u = main.fields.into_iter().next().unwrap();
        let mut out = BoundaryApply {
            u,
            residual: main.residual,
            backend: spec.backend,
            alternate: None,
            disagreement: None,
            flagged: false,
        };
        if spec.cross_check {
            let other = match spec.backend {
                Backend::Plemelj => Backend::EpsilonLimit,
                Backend::EpsilonLimit => Backend::Plemelj,
            };
            let alt = self.apply_boundary(f, spec, other, std::slice::from_ref(&one))?;
            let v = alt.fields.into_iter().next().unwrap();
            let diff = out.u.rel_max_diff(&v)?;
            out.flagged = diff > spec.cross_check_tol;
            out.disagreement = Some(diff);
            out.alternate = Some(v);
        }
        Ok(out)
    }
}

/// Kernel tables of radial multipliers composed with a resolvent.
#[derive(Debug, Clone)]
pub struct RadialOperator {
    spectra: Vec<Vec<Complex64>>,
    residual_spectrum: Vec<Complex64>,
    pub rho_max: f64,
    pub radial_nodes: usize,
    pub extrapolation_spread: Option<f64>,
}

impl RadialOperator {
    pub fn outputs(&self) -> usize {
        self.spectra.len()
    }
}

/// Radial extent covering every field of a set (see [`SPECTRAL_CUTOFF`]).
pub fn spectral_reach(fields: &[&Field]) -> Result<f64> {
    rho_max_for(fields)
}

/// Output of a radial resolvent application.
#[derive(Debug, Clone)]
pub struct RadialApply {
    pub fields: Vec<Field>,
    /// Max-norm relative defect of `(P_m(D) - z) u = f`.
    pub residual: f64,
    pub extrapolation_spread: Option<f64>,
}

/// Output of `boundary_apply`.
#[derive(Debug, Clone)]
pub struct BoundaryApply {
    pub u: Field,
    /// Max-norm relative defect of `(P_m(D) - λ) u = f`.
    pub residual: f64,
    pub backend: Backend,
    /// The other backend's result when a cross-check was run.
    pub alternate: Option<Field>,
    pub disagreement: Option<f64>,
    /// Set when the backends disagree beyond the tolerance.
    pub flagged: bool,
}

pub fn boundary_pairing(f: &Field, g: &Field, spec: &BoundarySpec) -> Result<Pairing> {
    BoundaryContext::new(f.grid())?.pairing(f, g, spec)
}

pub fn boundary_apply(f: &Field, spec: &BoundarySpec) -> Result<BoundaryApply> {
    BoundaryContext::new(f.grid())?.boundary_apply(f, spec)
}

/// Largest `μ(x_d)/μ(y_d)` over `y_d < x_d` with both in `[-a, a]`: the
/// ratio met when the weight is moved across the support `H(x_d - y_d)` of
/// the kernel. Reported, not asserted.
pub fn mu_support_ratio(w: WeightParams, a: f64, steps: usize) -> f64 {
    let pts: Vec<f64> = (0..=steps).map(|k| -a + 2.0 * a * k as f64 / steps as f64).collect();
    let mut best: f64 = 1.0;
    for (i, &y) in pts.iter().enumerate() {
        for &x in &pts[i + 1..] {
            best = best.max(mu_weight(x.abs(), w) / mu_weight(y.abs(), w));
        }
    }
    best
}
