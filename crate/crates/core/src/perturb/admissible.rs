//! Measured instances of the admissibility properties of a potential.

use num_complex::Complex64;
use serde::Serialize;

use super::{Potential, PotentialClass};
use crate::error::Result;
use crate::lattice::Field;
use crate::spaces::{weighted, x_norm_upper, xstar_norm, CompositeNormConfig, WeightParams};

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityConfig {
    pub m: u32,
    /// Level centring the band splittings of the `X` upper bound.
    pub lambda_ref: f64,
    /// `(N, γ)` pairs of the weights `μ_{N,γ}`.
    pub weights: Vec<(f64, f64)>,
    /// Candidate `ε`, tried from the smallest up.
    pub eps_grid: Vec<f64>,
    /// Largest `A` accepted as finite.
    pub a_budget: f64,
    /// Property (2) passes when every weight admits some `ε ≤ eps_target`.
    pub eps_target: f64,
}

impl AdmissibilityConfig {
    pub fn new(m: u32, lambda_ref: f64) -> Self {
        Self {
            m,
            lambda_ref,
            weights: vec![(0.0, 1.0), (1.0, 0.5), (1.0, 0.1)],
            eps_grid: vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            a_budget: 1e6,
            eps_target: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallnessEntry {
    pub eps: f64,
    /// `A_{N,ε} = max_u (‖μVu‖_X - ε‖μu‖_{X*})_+ / ‖u 1_{|x|≤R}‖`.
    pub a: f64,
    /// Family member attaining `A`.
    pub argmax: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallnessRow {
    pub n: f64,
    pub gamma: f64,
    pub r: f64,
    pub table: Vec<SmallnessEntry>,
    /// Smallest `ε` on the grid whose `A` is within budget.
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub class: PotentialClass,
    pub symmetry_defect: f64,
    /// `A_1 = |V|^{1/2}`, `B_1 = sgn(V)|V|^{1/2}`.
    pub factorization: String,
    pub factorization_defect: f64,
    pub smallness: Vec<SmallnessRow>,
    pub family_size: usize,
    pub symmetric: bool,
    pub small: bool,
    pub factorizable: bool,
}

fn max_rel(a: Complex64, b: Complex64, scale: f64) -> f64 {
    if scale == 0.0 {
        (a - b).norm()
    } else {
        (a - b).norm() / scale
    }
}

pub fn admissibility_check(v: &Potential, family: &[Field], cfg: &AdmissibilityConfig) -> Result<AdmissibilityReport> {
    let d = v.grid().dim();
    let norm_cfg = CompositeNormConfig::new(cfg.m, d, cfg.lambda_ref)?;
    let vf: Vec<Field> = family.iter().map(|f| v.multiply(f)).collect::<Result<_>>()?;
    let mut sym: f64 = 0.0;
    let mut fac: f64 = 0.0;
    let half = v.field().map(|_, x| Complex64::new(x.re.abs().sqrt(), 0.0));
    let signed = v.field().map(|_, x| Complex64::new(x.re.signum() * x.re.abs().sqrt(), 0.0));
    for i in 0..family.len() {
        let bf = family[i].mul(&signed)?;
        for j in 0..family.len() {
            let scale = vf[i].l2_norm() * family[j].l2_norm();
            let lhs = vf[i].inner(&family[j])?;
            sym = sym.max(max_rel(lhs, family[i].inner(&vf[j])?, scale));
            let ag = family[j].mul(&half)?;
            fac = fac.max(max_rel(lhs, bf.inner(&ag)?, scale));
        }
    }
    let radius = v.support_radius();
    let local: Vec<f64> = family
        .iter()
        .map(|u| {
            let g = u.grid();
            (u.values()
                .iter()
                .enumerate()
                .filter(|(k, _)| g.node_norm(*k) <= radius)
                .map(|(_, c)| c.norm_sqr())
                .sum::<f64>()
                * g.cell_volume())
            .sqrt()
        })
        .collect();
    let mut eps_sorted = cfg.eps_grid.clone();
    eps_sorted.sort_by(|a, b| a.total_cmp(b));
    let mut rows = Vec::new();
    for &(n, gamma) in &cfg.weights {
        let w = WeightParams::new(n, gamma)?;
        let mut lhs = Vec::with_capacity(family.len());
        let mut rhs = Vec::with_capacity(family.len());
        for (u, vu) in family.iter().zip(&vf) {
            lhs.push(if v.is_zero() { 0.0 } else { x_norm_upper(&weighted(vu, w, 1.0)?, &norm_cfg, None)?.value });
            rhs.push(xstar_norm(&weighted(u, w, 1.0)?, &norm_cfg)?);
        }
        let a_of = |eps: f64| -> (f64, usize) {
            let mut best = (0.0, 0);
            for k in 0..family.len() {
                let excess = lhs[k] - eps * rhs[k];
                if excess > 0.0 {
                    let a = if local[k] > 0.0 { excess / local[k] } else { f64::INFINITY };
                    if a > best.0 {
                        best = (a, k);
                    }
                }
            }
            best
        };
        let table: Vec<SmallnessEntry> = eps_sorted
            .iter()
            .map(|&e| {
                let (a, argmax) = a_of(e);
                SmallnessEntry { eps: e, a, argmax }
            })
            .collect();
        let eps = table.iter().find(|t| t.a <= cfg.a_budget).map(|t| t.eps);
        let row = SmallnessRow { n, gamma, r: radius, table, eps };
        rows.push(row);
    }
    let small = rows.iter().all(|r| r.eps.is_some_and(|e| e <= cfg.eps_target));
    Ok(AdmissibilityReport {
        class: v.class(),
        symmetry_defect: sym,
        factorization: "A1 = |V|^(1/2), B1 = sgn(V)|V|^(1/2)".into(),
        factorization_defect: fac,
        smallness: rows,
        family_size: family.len(),
        symmetric: sym <= 1e-10,
        small,
        factorizable: fac <= 1e-10,
    })
}
