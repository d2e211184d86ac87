//! `X -> X*` proxy sweep of the perturbed resolvent `(I + R_0 V)^{-1} R_0`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::solve::{bs_solve, BsMethod, FreeResolvent};
use super::Potential;
use crate::boundary::{spectral_reach, BoundaryContext, BoundarySpec};
use crate::error::{LapError, Result};
use crate::lattice::Field;
use crate::spaces::{xstar_parts_from, CompositeNormConfig};
use crate::sweep::{cell_from_parts, denominators, hole, xstar_profiles, SweepCell, SweepConfig, SweepReport};

/// Solver diagnostics of one cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellSolve {
    pub lambda: f64,
    pub eps: f64,
    pub max_residual: f64,
    pub max_iterations: usize,
    pub min_sigma: f64,
    pub flagged: usize,
    /// `max_f ‖R_0 V R_0 f‖_{X*} / ‖R_0 f‖_{X*}`.
    pub q_proxy: f64,
}

/// Comparison with the geometric-series bound `sup_0 / (1 - q)`.
#[derive(Debug, Clone, Serialize)]
pub struct NeumannCheck {
    /// Largest `q_proxy` over the cells.
    pub q_proxy: f64,
    pub free_sup: f64,
    pub perturbed_sup: f64,
    /// `free_sup / (1 - q_proxy)`, infinite when `q_proxy ≥ 1`.
    pub bound: f64,
    /// `perturbed_sup ≤ 1.1 · bound`.
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbedSweep {
    pub report: SweepReport,
    /// The free sweep on the same cells and operators.
    pub free: SweepReport,
    pub solves: Vec<CellSolve>,
    pub neumann: NeumannCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbedSweepConfig {
    pub sweep: SweepConfig,
    pub tol: f64,
    pub method: BsMethod,
    /// Eigenvalue candidates the interval must avoid.
    pub excluded: Vec<f64>,
    pub margin: f64,
}

fn cell(
    ctx: &BoundaryContext,
    v: &Potential,
    cfg: &PerturbedSweepConfig,
    fields: &[Field],
    dens: &[f64],
    rho_max: f64,
    lambda: f64,
    eps: f64,
) -> Result<(SweepCell, SweepCell, CellSolve)> {
    let s = &cfg.sweep;
    let norm_cfg = CompositeNormConfig::new(s.m, ctx.grid().dim(), lambda)?;
    let profiles = xstar_profiles(&norm_cfg);
    let r0 = if eps == 0.0 {
        let spec = BoundarySpec::new(lambda, s.m, s.sign).with_delta(s.delta);
        FreeResolvent::boundary(ctx, &spec, &profiles, rho_max)
    } else {
        FreeResolvent::continuum(ctx, Complex64::new(lambda, s.sign.value() * eps), s.m, &profiles, rho_max)
    };
    let r0 = match r0 {
        Ok(r) => r,
        Err(e) => {
            let info = CellSolve {
                lambda,
                eps,
                max_residual: f64::NAN,
                max_iterations: 0,
                min_sigma: f64::NAN,
                flagged: fields.len(),
                q_proxy: f64::NAN,
            };
            return Ok((hole(lambda, eps, e.to_string()), hole(lambda, eps, e.to_string()), info));
        }
    };
    let mut parts = Vec::with_capacity(fields.len());
    let mut free_parts = Vec::with_capacity(fields.len());
    let mut info = CellSolve {
        lambda,
        eps,
        max_residual: 0.0,
        max_iterations: 0,
        min_sigma: f64::INFINITY,
        flagged: 0,
        q_proxy: 0.0,
    };
    for f in fields {
        let free = r0.apply_extra(f)?;
        let free_x = xstar_parts_from(&free[0], &free[1], &norm_cfg)?.norm();
        if !v.is_zero() {
            let u0 = r0.apply(f)?;
            let t = r0.apply_extra(&v.multiply(&u0)?)?;
            let tx = xstar_parts_from(&t[0], &t[1], &norm_cfg)?.norm();
            info.q_proxy = info.q_proxy.max(tx / free_x);
        }
        let sol = bs_solve(&r0, v, f, cfg.tol, cfg.method)?;
        info.max_residual = info.max_residual.max(sol.residual);
        info.max_iterations = info.max_iterations.max(sol.iterations);
        info.min_sigma = info.min_sigma.min(sol.sigma_min);
        if sol.flag.is_some() {
            info.flagged += 1;
        }
        let p = if v.is_zero() {
            free.clone()
        } else {
            r0.apply_extra(&f.sub(&v.multiply(&sol.u)?)?)?
        };
        let mut it = p.into_iter();
        parts.push((it.next().unwrap(), it.next().unwrap()));
        let mut it = free.into_iter();
        free_parts.push((it.next().unwrap(), it.next().unwrap()));
    }
    let pert = if info.flagged > 0 {
        hole(lambda, eps, format!("{} of {} solves flagged", info.flagged, fields.len()))
    } else {
        cell_from_parts(lambda, eps, &parts, dens, &norm_cfg, info.max_residual)?
    };
    let free = cell_from_parts(lambda, eps, &free_parts, dens, &norm_cfg, 0.0)?;
    Ok((pert, free, info))
}

/// Perturbed sweep with the continuum resolvent; refuses intervals within
/// `margin` of an excluded eigenvalue candidate.
pub fn lap_perturbed_sweep(
    ctx: &BoundaryContext,
    v: &Potential,
    cfg: &PerturbedSweepConfig,
    fields: &[Field],
) -> Result<PerturbedSweep> {
    let s = &cfg.sweep;
    s.validate()?;
    if v.grid() != ctx.grid() {
        return Err(LapError::GridMismatch);
    }
    let lo = s.lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = s.lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if let Some(c) = cfg.excluded.iter().find(|&&c| c >= lo - cfg.margin && c <= hi + cfg.margin) {
        return Err(LapError::InvalidParameter(format!(
            "interval [{lo}, {hi}] lies within {} of eigenvalue candidate {c}",
            cfg.margin
        )));
    }
    let levels = s.eps_levels();
    let refs: Vec<&Field> = fields.iter().collect();
    let rho_max = if fields.is_empty() {
        ctx.grid().nyquist()
    } else if v.is_zero() {
        spectral_reach(&refs)?
    } else {
        ctx.grid().nyquist()
    };
    let d = ctx.grid().dim();
    let dens: Vec<Vec<f64>> = s
        .lambdas
        .par_iter()
        .map(|&l| denominators(fields, &CompositeNormConfig::new(s.m, d, l)?))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64, f64)> =
        s.lambdas.iter().enumerate().flat_map(|(i, &l)| levels.iter().map(move |&e| (i, l, e))).collect();
    let out: Vec<(SweepCell, SweepCell, CellSolve)> = jobs
        .par_iter()
        .map(|&(i, l, e)| cell(ctx, v, cfg, fields, &dens[i], rho_max, l, e))
        .collect::<Result<_>>()?;
    let mut pert = Vec::with_capacity(out.len());
    let mut free = Vec::with_capacity(out.len());
    let mut solves = Vec::with_capacity(out.len());
    for (p, f, c) in out {
        pert.push(p);
        free.push(f);
        solves.push(c);
    }
    let report = SweepReport::from_cells(pert, &levels);
    let free = SweepReport::from_cells(free, &levels);
    let q = solves.iter().map(|c| c.q_proxy).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let bound = if q < 1.0 { free.sup / (1.0 - q) } else { f64::INFINITY };
    let neumann = NeumannCheck {
        q_proxy: q,
        free_sup: free.sup,
        perturbed_sup: report.sup,
        bound,
        holds: report.sup <= 1.1 * bound,
    };
    Ok(PerturbedSweep { report, free, solves, neumann })
}
