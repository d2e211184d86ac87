//! `(I + R_0(z) V) u = R_0(z) f` by a matrix-free solve on the support of `V`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Potential;
use crate::boundary::{Backend, BoundaryContext, BoundarySpec, RadialOperator};
use crate::error::{LapError, Result};
use crate::krylov::{gmres, neumann, spectral_radius, KrylovOutcome};
use crate::lattice::{Domain, Field, GridSpec};
use crate::multiplier::{apply_symbol, check_off_lattice_spectrum, free_resolvent, polyharmonic, RadialFn};

/// Application of the free resolvent `R_0^m(z)`.
pub struct FreeResolvent<'a> {
    pub z: Complex64,
    pub m: u32,
    grid: GridSpec,
    kind: Kind<'a>,
}

enum Kind<'a> {
    /// Periodic lattice multiplier `1/(P_m(ξ) - z)`.
    Lattice,
    /// Continuum kernel on the lattice, restricted to `|ξ| ≤ rho_max`.
    Continuum { ctx: &'a BoundaryContext, op: RadialOperator },
}

fn unit() -> RadialFn {
    Arc::new(|_| Complex64::new(1.0, 0.0))
}

impl<'a> FreeResolvent<'a> {
    pub fn lattice(grid: &GridSpec, z: Complex64, m: u32) -> Result<Self> {
        check_off_lattice_spectrum(z, m, grid)?;
        Ok(Self { z, m, grid: *grid, kind: Kind::Lattice })
    }

    /// `extra` profiles `σ_j` are carried along so that `σ_j(D) R_0 f`
    /// comes out of the same kernel build (see [`Self::apply_extra`]).
    pub fn continuum(ctx: &'a BoundaryContext, z: Complex64, m: u32, extra: &[RadialFn], rho_max: f64) -> Result<Self> {
        let mut profiles = vec![unit()];
        profiles.extend_from_slice(extra);
        let op = ctx.resolvent_operator(z, m, &profiles, rho_max)?;
        Ok(Self { z, m, grid: *ctx.grid(), kind: Kind::Continuum { ctx, op } })
    }

    /// `R_0^m(λ ± i0)` with the plemelj backend.
    pub fn boundary(ctx: &'a BoundaryContext, spec: &BoundarySpec, extra: &[RadialFn], rho_max: f64) -> Result<Self> {
        let mut profiles = vec![unit()];
        profiles.extend_from_slice(extra);
        let op = ctx.boundary_operator(spec, Backend::Plemelj, &profiles, rho_max)?;
        Ok(Self { z: Complex64::new(spec.lambda, 0.0), m: spec.m, grid: *ctx.grid(), kind: Kind::Continuum { ctx, op } })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.kind, Kind::Lattice)
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        match &self.kind {
            Kind::Lattice => free_resolvent(self.z, self.m, f),
            Kind::Continuum { ctx, op } => Ok(ctx.apply_outputs(op, f, &[0])?.pop().unwrap()),
        }
    }

    /// `σ_j(D) R_0 f` for the extra profiles of a continuum resolvent.
    pub fn apply_extra(&self, f: &Field) -> Result<Vec<Field>> {
        match &self.kind {
            Kind::Lattice => Err(LapError::InvalidParameter("lattice resolvent carries no extra profiles".into())),
            Kind::Continuum { ctx, op } => {
                let which: Vec<usize> = (1..op.outputs()).collect();
                ctx.apply_outputs(op, f, &which)
            }
        }
    }

    fn on_support(&self, v: &Potential, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let w = scatter(v, x);
        let out = self.apply(&w)?;
        Ok(v.support().iter().map(|&k| out.values()[k]).collect())
    }

    /// The map `x ↦ (R_0 V x)|_S` on the support `S` of `V`.
    pub fn bs_map<'b>(&'b self, v: &'b Potential) -> impl FnMut(&[Complex64]) -> Result<Vec<Complex64>> + 'b {
        move |x: &[Complex64]| self.on_support(v, x)
    }
}

/// `V · x` with `x` given on the support of `V`.
pub(crate) fn scatter(v: &Potential, x: &[Complex64]) -> Field {
    let grid = *v.grid();
    let mut w = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (&k, &xv) in v.support().iter().zip(x) {
        w[k] = xv * v.value(k);
    }
    Field::from_values(grid, Domain::Physical, w).expect("grid length")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BsMethod {
    Gmres,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveFlag {
    NonConvergence,
    EigenvalueProximity,
}

/// Smallest admissible `σ_min(I + R_0 V)` before a solve is flagged.
pub const PROXIMITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct BsSolve {
    pub z: Complex64,
    #[serde(skip)]
    pub u: Field,
    /// `‖(I + R_0 V) u - R_0 f‖ / ‖R_0 f‖` in `ℓ²` of the grid.
    pub residual: f64,
    /// `‖(P_m(D) + V - z) u - f‖ / ‖f‖`, lattice resolvent only.
    pub defining_residual: Option<f64>,
    pub method: BsMethod,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub sigma_min: f64,
    pub support_size: usize,
    pub flag: Option<SolveFlag>,
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn bs_solve(r0: &FreeResolvent, v: &Potential, f: &Field, tol: f64, method: BsMethod) -> Result<BsSolve> {
    if v.grid() != r0.grid() || f.grid() != r0.grid() {
        return Err(LapError::GridMismatch);
    }
    let rf = r0.apply(f)?;
    if v.is_zero() {
        return Ok(BsSolve {
            z: r0.z,
            u: rf,
            residual: 0.0,
            defining_residual: None,
            method,
            iterations: 0,
            history: Vec::new(),
            sigma_min: 1.0,
            support_size: 0,
            flag: None,
        });
    }
    let b: Vec<Complex64> = v.support().iter().map(|&k| rf.values()[k]).collect();
    let inner_tol = 0.1 * tol;
    let out: KrylovOutcome = match method {
        BsMethod::Gmres => gmres(r0.bs_map(v), &b, inner_tol, 80, 800)?,
        BsMethod::Neumann => neumann(r0.bs_map(v), &b, inner_tol, 4000)?,
    };
    let u = r0.apply(&f.sub(&scatter(v, &out.x))?)?;
    let rvu = r0.apply(&v.multiply(&u)?)?;
    let defect: Vec<Complex64> =
        u.values().iter().zip(rvu.values()).zip(rf.values()).map(|((a, b), c)| a + b - c).collect();
    let scale = l2(rf.values()).max(f64::MIN_POSITIVE);
    let residual = l2(&defect) / scale;
    let defining_residual = if r0.is_lattice() {
        let pu = apply_symbol(&polyharmonic(r0.m), &u)?;
        let vu = v.multiply(&u)?;
        let d: Vec<Complex64> = pu
            .values()
            .iter()
            .zip(u.values())
            .zip(vu.values())
            .zip(f.values())
            .map(|(((p, u), w), f)| p - r0.z * u + w - f)
            .collect();
        Some(l2(&d) / l2(f.values()).max(f64::MIN_POSITIVE))
    } else {
        None
    };
    let flag = if out.sigma_min < PROXIMITY_TOL {
        Some(SolveFlag::EigenvalueProximity)
    } else if !out.converged || !(residual <= tol) {
        Some(SolveFlag::NonConvergence)
    } else {
        None
    };
    Ok(BsSolve {
        z: r0.z,
        u,
        residual,
        defining_residual,
        method,
        iterations: out.iterations,
        history: out.history,
        sigma_min: out.sigma_min,
        support_size: v.support().len(),
        flag,
    })
}

/// Spectral radius of `R_0 V` on the support of `V`, by power iteration
/// from `R_0 f`.
pub fn contraction_rate(r0: &FreeResolvent, v: &Potential, f: &Field, iters: usize) -> Result<f64> {
    if v.is_zero() {
        return Ok(0.0);
    }
    let rf = r0.apply(f)?;
    let start: Vec<Complex64> = v.support().iter().map(|&k| rf.values()[k]).collect();
    spectral_radius(r0.bs_map(v), &start, iters)
}
