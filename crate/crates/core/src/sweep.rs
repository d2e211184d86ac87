//! `X -> X*` proxy sweeps over `(λ, ε)` for the free resolvent.
//!
//! A cell's proxy is `max_f ‖R(λ ± iε) f‖_{X*} / ‖f‖_X^{upper}` over the
//! test family. The numerator components `S_θ u` and `S_m u` are produced
//! directly by the radial operator, so no periodic wrap-around enters.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{spectral_reach, Backend, BoundaryContext, BoundarySpec, RadialOperator, Sign};
use crate::error::{LapError, Result};
use crate::lattice::Field;
use crate::multiplier::{bessel, RadialFn};
use crate::spaces::{x_norm_upper, xstar_parts_from, CompositeNormConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub m: u32,
    pub delta: f64,
    pub lambdas: Vec<f64>,
    pub eps: Vec<f64>,
    pub sign: Sign,
    /// Also evaluate `ε = 0` with the plemelj backend.
    pub include_boundary: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(LapError::InvalidParameter(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        for &l in &self.lambdas {
            if !(l >= self.delta && l <= 1.0 / self.delta) {
                return Err(LapError::LambdaOutOfRange { lambda: l, lo: self.delta, hi: 1.0 / self.delta });
            }
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(LapError::InvalidParameter("eps values must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Evaluated `ε` values, `0` last when the boundary is included.
    pub fn eps_levels(&self) -> Vec<f64> {
        let mut e = self.eps.clone();
        if self.include_boundary {
            e.push(0.0);
        }
        e
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub eps: f64,
    /// `NaN` when the cell is a hole.
    pub proxy: f64,
    /// Family member attaining the proxy.
    pub argmax: usize,
    pub xstar_lorentz: f64,
    pub xstar_bstar: f64,
    pub x_upper: f64,
    /// Largest residual of the defining equation over the family.
    pub residual: f64,
    pub hole: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsSup {
    pub eps: f64,
    pub sup: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub sup_by_eps: Vec<EpsSup>,
    pub sup: f64,
    /// `max/min` of the per-ε sups over the positive ε values.
    pub drift: f64,
    /// The same ratio over the last decade `[ε_min, 10 ε_min]`.
    pub last_decade_drift: f64,
    pub holes: usize,
}

impl SweepReport {
    pub fn from_cells(cells: Vec<SweepCell>, eps_levels: &[f64]) -> Self {
        let mut sup_by_eps = Vec::new();
        for &e in eps_levels {
            let mut best = EpsSup { eps: e, sup: f64::NAN, lambda: f64::NAN };
            for c in cells.iter().filter(|c| c.eps == e && c.hole.is_none()) {
                if best.sup.is_nan() || c.proxy > best.sup {
                    best.sup = c.proxy;
                    best.lambda = c.lambda;
                }
            }
            sup_by_eps.push(best);
        }
        let sup = sup_by_eps.iter().map(|s| s.sup).filter(|v| v.is_finite()).fold(f64::NAN, f64::max);
        let ratio = |sel: &dyn Fn(f64) -> bool| -> f64 {
            let vals: Vec<f64> =
                sup_by_eps.iter().filter(|s| sel(s.eps) && s.sup.is_finite()).map(|s| s.sup).collect();
            if vals.is_empty() {
                return f64::NAN;
            }
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            hi / lo
        };
        let e_min = eps_levels.iter().cloned().filter(|&e| e > 0.0).fold(f64::INFINITY, f64::min);
        let drift = ratio(&|e| e > 0.0);
        let last_decade_drift = ratio(&|e| e > 0.0 && e <= 10.0 * e_min * (1.0 + 1e-12));
        let holes = cells.iter().filter(|c| c.hole.is_some()).count();
        Self { cells, sup_by_eps, sup, drift, last_decade_drift, holes }
    }
}

/// Profiles `[S_θ, S_m]` of the `X*` components.
pub fn xstar_profiles(cfg: &CompositeNormConfig) -> Vec<RadialFn> {
    vec![
        bessel(cfg.theta()).radial_profile().expect("radial"),
        bessel(cfg.m as f64).radial_profile().expect("radial"),
    ]
}

/// `X` upper bounds of every family member with the band splitting centred
/// on `r(λ)`.
pub fn denominators(fields: &[Field], cfg: &CompositeNormConfig) -> Result<Vec<f64>> {
    fields.iter().map(|f| Ok(x_norm_upper(f, cfg, None)?.value)).collect()
}

/// The operator computing `[S_θ, S_m] R(λ ± iε)` (`ε = 0`: boundary value).
pub fn cell_operator(
    ctx: &BoundaryContext,
    m: u32,
    lambda: f64,
    eps: f64,
    sign: Sign,
    delta: f64,
    profiles: &[RadialFn],
    rho_max: f64,
) -> Result<RadialOperator> {
    if eps == 0.0 {
        let spec = BoundarySpec::new(lambda, m, sign).with_delta(delta);
        ctx.boundary_operator(&spec, Backend::Plemelj, profiles, rho_max)
    } else {
        ctx.resolvent_operator(Complex64::new(lambda, sign.value() * eps), m, profiles, rho_max)
    }
}

/// Proxy of one cell from the `X*` components of `R f` for every member.
pub(crate) fn cell_from_parts(
    lambda: f64,
    eps: f64,
    parts: &[(Field, Field)],
    denoms: &[f64],
    cfg: &CompositeNormConfig,
    residual: f64,
) -> Result<SweepCell> {
    let mut cell = SweepCell {
        lambda,
        eps,
        proxy: f64::NEG_INFINITY,
        argmax: 0,
        xstar_lorentz: 0.0,
        xstar_bstar: 0.0,
        x_upper: 0.0,
        residual,
        hole: None,
    };
    for (k, ((lor, bs), &den)) in parts.iter().zip(denoms).enumerate() {
        let p = xstar_parts_from(lor, bs, cfg)?;
        let ratio = p.norm() / den;
        if ratio > cell.proxy {
            cell.proxy = ratio;
            cell.argmax = k;
            cell.xstar_lorentz = p.lorentz;
            cell.xstar_bstar = p.bstar;
            cell.x_upper = den;
        }
    }
    Ok(cell)
}

pub(crate) fn hole(lambda: f64, eps: f64, why: String) -> SweepCell {
    SweepCell {
        lambda,
        eps,
        proxy: f64::NAN,
        argmax: 0,
        xstar_lorentz: f64::NAN,
        xstar_bstar: f64::NAN,
        x_upper: f64::NAN,
        residual: f64::NAN,
        hole: Some(why),
    }
}

/// Free sweep. Cells are computed in parallel and reported in
/// `(λ, ε)` order.
pub fn free_sweep(ctx: &BoundaryContext, cfg: &SweepConfig, fields: &[Field]) -> Result<SweepReport> {
    cfg.validate()?;
    let d = ctx.grid().dim();
    let levels = cfg.eps_levels();
    if fields.is_empty() {
        return Ok(SweepReport::from_cells(Vec::new(), &levels));
    }
    let refs: Vec<&Field> = fields.iter().collect();
    let rho_max = spectral_reach(&refs)?;
    let jobs: Vec<(f64, f64)> = cfg.lambdas.iter().flat_map(|&l| levels.iter().map(move |&e| (l, e))).collect();
    let dens: Vec<Vec<f64>> = cfg
        .lambdas
        .par_iter()
        .map(|&l| denominators(fields, &CompositeNormConfig::new(cfg.m, d, l)?))
        .collect::<Result<_>>()?;
    let cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(lambda, eps)| {
            let norm_cfg = CompositeNormConfig::new(cfg.m, d, lambda)?;
            let li = cfg.lambdas.iter().position(|&l| l == lambda).unwrap();
            let profiles = xstar_profiles(&norm_cfg);
            let op = match cell_operator(ctx, cfg.m, lambda, eps, cfg.sign, cfg.delta, &profiles, rho_max) {
                Ok(op) => op,
                Err(e) => return Ok(hole(lambda, eps, e.to_string())),
            };
            let mut parts = Vec::with_capacity(fields.len());
            let mut residual: f64 = 0.0;
            for f in fields {
                let out = ctx.apply(&op, f)?;
                residual = residual.max(out.residual);
                let mut it = out.fields.into_iter();
                parts.push((it.next().unwrap(), it.next().unwrap()));
            }
            cell_from_parts(lambda, eps, &parts, &dens[li], &norm_cfg, residual)
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport::from_cells(cells, &levels))
}
