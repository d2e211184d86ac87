//! The subcommands. Each returns its tables, a JSON result block and a status.

use std::f64::consts::SQRT_2;

use lap_core::boundary::{decay_scan, BoundaryContext, BoundarySpec};
use lap_core::family::{FamilySpec, TestFamily};
use lap_core::lattice::sample_real;
use lap_core::perturb::spectrum::MAX_SCAN_SUPPORT;
use lap_core::perturb::{
    admissibility_check, candidates_match, eigen_scan, example_potential, example_tail_bound, lanczos_lowest,
    lap_perturbed_sweep, AdmissibilityConfig, EigenScan, PerturbedSweepConfig, Potential, ScanConfig,
};
use lap_core::spaces::{
    b_norm, bstar_norm, embedding_ratios, lorentz_norm, lp_norm, x_norm_upper, xstar_norm, CompositeNormConfig,
    DyadicShells, LorentzExponents, Splitting,
};
use lap_core::sweep::{free_sweep, SweepConfig, SweepReport};
use lap_core::{Field, GridSpec};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, FieldKind, PotentialKind};
use crate::error::CliError;
use crate::output::{num, Table};

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    Holes(usize),
    Failed(Vec<String>),
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed(_) => 3,
            Status::Holes(_) => 4,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Status::Ok => "ok".into(),
            Status::Holes(n) => format!("completed with {n} holes"),
            Status::Failed(v) => format!("criteria failed: {}", v.join("; ")),
        }
    }

    fn from_checks(holes: usize, failures: Vec<String>) -> Self {
        if holes > 0 {
            Status::Holes(holes)
        } else if !failures.is_empty() {
            Status::Failed(failures)
        } else {
            Status::Ok
        }
    }
}

pub struct Outcome {
    pub tables: Vec<Table>,
    pub results: Value,
    pub status: Status,
}

fn grid_of(cfg: &ExperimentConfig) -> Result<GridSpec, CliError> {
    Ok(GridSpec::new(cfg.grid.dim, cfg.grid.half_width, cfg.grid.points)?)
}

fn family_of(cfg: &ExperimentConfig, grid: &GridSpec) -> Result<Vec<Field>, CliError> {
    let f = &cfg.family;
    let spec = FamilySpec {
        count: f.count,
        sigma: f.sigma,
        modulation: f.modulation,
        translation: f.translation,
        seed: f.seed,
    };
    Ok(TestFamily::new(grid.dim(), spec)?.fields(grid)?)
}

fn potential_of(cfg: &ExperimentConfig, grid: &GridSpec) -> Result<Potential, CliError> {
    let p = &cfg.potential;
    Ok(match p.kind {
        PotentialKind::Zero => Potential::zero(grid),
        PotentialKind::SquareWell => Potential::square_well(grid, p.depth, p.radius)?,
        PotentialKind::Gaussian => Potential::gaussian(grid, p.amplitude, p.sigma)?,
        PotentialKind::Example => example_potential(p.q, p.j_max, grid)?.potential,
    })
}

fn named_fields(cfg: &ExperimentConfig, grid: &GridSpec) -> Result<Vec<(String, Field)>, CliError> {
    let mut out = Vec::new();
    for kind in &cfg.fields {
        match kind {
            FieldKind::Family => {
                for (i, f) in family_of(cfg, grid)?.into_iter().enumerate() {
                    out.push((format!("family[{i}]"), f));
                }
            }
            FieldKind::UnitBall => {
                let f = sample_real(|x| if x.iter().map(|v| v * v).sum::<f64>() < 1.0 { 1.0 } else { 0.0 }, grid)?;
                out.push(("unit_ball".into(), f));
            }
            FieldKind::Shells => {
                let shells = DyadicShells::new(grid)?;
                for j in 0..shells.count() {
                    let f = sample_real(|_| 0.0, grid)?.map(|k, _| {
                        Complex64::new(if shells.shell_of(k) == j { 1.0 } else { 0.0 }, 0.0)
                    });
                    out.push((format!("shell[{j}]"), f));
                }
            }
        }
    }
    Ok(out)
}

fn splitting_label(s: &Splitting) -> String {
    match s {
        Splitting::Witness => "witness".into(),
        Splitting::AllLorentz => "all_lorentz".into(),
        Splitting::AllB => "all_b".into(),
        Splitting::Band { width } => format!("band:{width}"),
    }
}

pub fn norms(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let grid = grid_of(cfg)?;
    let d = grid.dim();
    let ncfg = CompositeNormConfig::new(cfg.m, d, cfg.lambda_ref)?;
    let mut t = Table::new(
        "norms",
        vec![
            "field", "l2", "lorentz_pd_2", "lorentz_pdprime_2", "b", "bstar", "xstar", "x_upper", "x_splitting",
            "b_embedding", "dual_embedding",
        ],
    );
    let limit = SQRT_2 * (1.0 + cfg.tolerances.embedding_slack);
    let (mut worst_b, mut worst_dual): (f64, f64) = (0.0, 0.0);
    for (name, f) in named_fields(cfg, &grid)? {
        let emb = embedding_ratios(&f)?;
        let up = x_norm_upper(&f, &ncfg, None)?;
        worst_b = worst_b.max(emb.b_embedding);
        worst_dual = worst_dual.max(emb.dual_embedding);
        t.push(vec![
            name,
            num(lp_norm(&f, 2.0)?),
            num(lorentz_norm(&f, LorentzExponents::restriction(d))?),
            num(lorentz_norm(&f, LorentzExponents::restriction_dual(d))?),
            num(b_norm(&f)?),
            num(bstar_norm(&f)?),
            num(xstar_norm(&f, &ncfg)?),
            num(up.value),
            splitting_label(&up.splitting),
            num(emb.b_embedding),
            num(emb.dual_embedding),
        ]);
    }
    let mut failures = Vec::new();
    if worst_b > limit {
        failures.push(format!("B embedding ratio {worst_b} exceeds sqrt(2)"));
    }
    if worst_dual > limit {
        failures.push(format!("dual embedding ratio {worst_dual} exceeds sqrt(2)"));
    }
    let results = json!({
        "fields": t.rows.len(),
        "max_b_embedding": worst_b,
        "max_dual_embedding": worst_dual,
        "embedding_limit": limit,
    });
    Ok(Outcome { tables: vec![t], results, status: Status::from_checks(0, failures) })
}

pub fn resolvent(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let grid = grid_of(cfg)?;
    let ctx = BoundaryContext::new(&grid)?;
    let fields = family_of(cfg, &grid)?;
    let mut t = Table::new(
        "resolvent",
        vec!["field", "lambda", "sign", "residual", "disagreement", "flagged", "pairing_re", "pairing_im"],
    );
    let mut failures = Vec::new();
    let sign = cfg.sign;
    for &lambda in &cfg.lambdas {
        let spec = BoundarySpec::new(lambda, cfg.m, sign).with_delta(cfg.delta);
        for (i, f) in fields.iter().enumerate() {
            let out = ctx.boundary_apply(f, &spec)?;
            let p = out.u.inner(f)?;
            if out.residual > cfg.tolerances.apply_residual {
                failures.push(format!("field {i}, lambda {lambda}: residual {:e}", out.residual));
            }
            if out.flagged {
                failures.push(format!("field {i}, lambda {lambda}: backends disagree by {:e}", out.disagreement.unwrap_or(f64::NAN)));
            }
            if sign.value() * p.im < -1e-10 {
                failures.push(format!("field {i}, lambda {lambda}: imaginary part has the wrong sign"));
            }
            t.push(vec![
                i.to_string(),
                num(lambda),
                format!("{sign:?}").to_lowercase(),
                num(out.residual),
                num(out.disagreement.unwrap_or(f64::NAN)),
                out.flagged.to_string(),
                num(p.re),
                num(p.im),
            ]);
        }
    }
    let worst = t.rows.iter().map(|r| r[3].parse::<f64>().unwrap_or(f64::NAN)).fold(0.0, f64::max);
    let results = json!({ "cells": t.rows.len(), "max_residual": worst });
    Ok(Outcome { tables: vec![t], results, status: Status::from_checks(0, failures) })
}

pub fn kernel(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let k = &cfg.kernel;
    let d = cfg.grid.dim;
    if !(d == 2 || d == 3) {
        return Err(CliError::Validation(format!("grid.dim: kernel scans need d in {{2, 3}}, got {d}")));
    }
    let tab = decay_scan(k.lambda, cfg.m, d, &k.radii, &k.directions, k.tol)?;
    let mut t = Table::new("kernel", vec!["direction_deg", "radius", "x", "abs_k", "normalized", "error", "flagged"]);
    for r in &tab.rows {
        let x: Vec<String> = r.x.iter().map(|v| num(*v)).collect();
        t.push(vec![
            num(r.direction_deg),
            num(r.radius),
            x.join(" "),
            num(r.abs_k),
            num(r.normalized),
            num(r.error),
            r.flagged.to_string(),
        ]);
    }
    let flagged = tab.rows.iter().filter(|r| r.flagged).count();
    let mut failures = Vec::new();
    if !tab.rows.is_empty() && (tab.band.0 > k.band || tab.band.1 > k.band) {
        failures.push(format!("normalized column leaves the factor-{} band: {:?}", k.band, tab.band));
    }
    let results = json!({
        "rows": tab.rows.len(),
        "max_normalized": tab.max_normalized,
        "median_normalized": tab.median_normalized,
        "band": [tab.band.0, tab.band.1],
        "flagged": flagged,
    });
    Ok(Outcome { tables: vec![t], results, status: Status::from_checks(flagged, failures) })
}

fn sweep_config(cfg: &ExperimentConfig) -> SweepConfig {
    SweepConfig {
        m: cfg.m,
        delta: cfg.delta,
        lambdas: cfg.lambdas.clone(),
        eps: cfg.eps.clone(),
        sign: cfg.sign,
        include_boundary: cfg.include_boundary,
    }
}

fn report_json(r: &SweepReport) -> Value {
    json!({
        "sup": r.sup,
        "drift": r.drift,
        "last_decade_drift": r.last_decade_drift,
        "holes": r.holes,
        "sup_by_eps": r.sup_by_eps,
    })
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let grid = grid_of(cfg)?;
    let ctx = BoundaryContext::new(&grid)?;
    let fields = family_of(cfg, &grid)?;
    let v = potential_of(cfg, &grid)?;
    let scfg = sweep_config(cfg);
    scfg.validate()?;
    let mut t = Table::new(
        "sweep",
        vec![
            "lambda", "eps", "proxy", "argmax", "xstar_lorentz", "xstar_bstar", "x_upper", "residual", "max_iterations",
            "min_sigma", "q_proxy", "hole",
        ],
    );
    let (report, extra) = if v.is_zero() {
        (free_sweep(&ctx, &scfg, &fields)?, Value::Null)
    } else {
        let excluded = excluded_levels(cfg, &ctx, &v)?;
        let scanned = excluded.is_some();
        let excluded = excluded.unwrap_or_default();
        let pcfg = PerturbedSweepConfig {
            sweep: scfg,
            tol: cfg.tolerances.bs_tol,
            method: cfg.method,
            excluded: excluded.clone(),
            margin: cfg.spectrum.margin,
        };
        let out = lap_perturbed_sweep(&ctx, &v, &pcfg, &fields)?;
        let extra = json!({
            "excluded": excluded,
            "exclusion_scan": if scanned { "done".to_string() } else { format!("skipped: support {} > {}", v.support().len(), cfg.spectrum.max_support) },
            "free": report_json(&out.free),
            "neumann": out.neumann,
            "solves": out.solves,
        });
        (out.report, extra)
    };
    let solves = extra.get("solves").and_then(|s| s.as_array()).cloned().unwrap_or_default();
    for (k, c) in report.cells.iter().enumerate() {
        let s = solves.get(k);
        let pick = |key: &str| s.and_then(|s| s.get(key)).map(|v| v.to_string()).unwrap_or_default();
        t.push(vec![
            num(c.lambda),
            num(c.eps),
            num(c.proxy),
            c.argmax.to_string(),
            num(c.xstar_lorentz),
            num(c.xstar_bstar),
            num(c.x_upper),
            num(c.residual),
            pick("max_iterations"),
            pick("min_sigma"),
            pick("q_proxy"),
            c.hole.clone().unwrap_or_default(),
        ]);
    }
    let mut failures = Vec::new();
    if !(report.last_decade_drift < cfg.tolerances.drift) {
        failures.push(format!("last-decade drift {} >= {}", report.last_decade_drift, cfg.tolerances.drift));
    }
    let mut results = report_json(&report);
    results["perturbed"] = extra;
    Ok(Outcome { tables: vec![t], results, status: Status::from_checks(report.holes, failures) })
}

/// Positive-axis candidates near the sweep interval; `None` when the support is too large to scan.
fn excluded_levels(cfg: &ExperimentConfig, ctx: &BoundaryContext, v: &Potential) -> Result<Option<Vec<f64>>, CliError> {
    if v.support().len() > cfg.spectrum.max_support.min(MAX_SCAN_SUPPORT) {
        return Ok(None);
    }
    if cfg.lambdas.is_empty() {
        return Ok(Some(Vec::new()));
    }
    let lo = cfg.lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cfg.lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let margin = cfg.spectrum.margin;
    let a = (lo - 2.0 * margin).max(0.5 * lo);
    let mut sc = ScanConfig::new(cfg.m, (a, hi + 2.0 * margin), cfg.spectrum.eps_probe, cfg.spectrum.steps);
    sc.threshold = cfg.spectrum.threshold;
    Ok(Some(eigen_scan(Some(ctx), v, &sc)?.candidates.iter().map(|c| c.lambda).collect()))
}

fn scan(cfg: &ExperimentConfig, ctx: &BoundaryContext, v: &Potential, eps: f64, sign: lap_core::boundary::Sign) -> Result<EigenScan, CliError> {
    let s = &cfg.spectrum;
    let mut sc = ScanConfig::new(cfg.m, s.interval, eps, s.steps);
    sc.threshold = s.threshold;
    sc.sign = sign;
    Ok(eigen_scan(Some(ctx), v, &sc)?)
}

pub fn spectrum(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let grid = grid_of(cfg)?;
    let ctx = BoundaryContext::new(&grid)?;
    let v = potential_of(cfg, &grid)?;
    let s = &cfg.spectrum;
    let main = scan(cfg, &ctx, &v, s.eps_probe, cfg.sign)?;
    let flipped = scan(cfg, &ctx, &v, s.eps_probe, cfg.sign.flip())?;
    let halved = scan(cfg, &ctx, &v, 0.5 * s.eps_probe, cfg.sign)?;
    let oracle = if main.candidates.iter().any(|c| c.lambda < 0.0) {
        Some(lanczos_lowest(&v, cfg.m, 600, 1e-10)?)
    } else {
        None
    };
    let lowest = main.candidates.iter().map(|c| c.lambda).filter(|l| *l < 0.0).fold(f64::INFINITY, f64::min);
    let mut t = Table::new(
        "spectrum",
        vec!["lambda", "depth", "grid_lambda", "flipped_lambda", "halved_lambda", "stable", "oracle", "rel_err"],
    );
    for (k, c) in main.candidates.iter().enumerate() {
        let fl = flipped.candidates.get(k).map(|x| num(x.lambda)).unwrap_or_default();
        let hv = halved.candidates.get(k).map(|x| x.lambda);
        let stable = hv.is_some_and(|h| (h - c.lambda).abs() < main.step);
        let (o, err) = match (&oracle, c.lambda == lowest) {
            (Some(o), true) => (num(o.value), num(((c.lambda - o.value) / o.value).abs())),
            _ => (String::new(), String::new()),
        };
        t.push(vec![
            num(c.lambda),
            num(c.depth),
            num(c.grid_lambda),
            fl,
            hv.map(num).unwrap_or_default(),
            stable.to_string(),
            o,
            err,
        ]);
    }
    let mut profile = Table::new("spectrum_profile", vec!["lambda", "sigma_min"]);
    for (l, sv) in &main.profile {
        profile.push(vec![num(*l), num(*sv)]);
    }
    let mut failures = Vec::new();
    if let Some(o) = &oracle {
        let rel = ((lowest - o.value) / o.value).abs();
        if rel > s.oracle_tol {
            failures.push(format!("lowest candidate {lowest} vs oracle {} (rel {rel:e})", o.value));
        }
        if o.value < -v.sup_norm() {
            failures.push(format!("oracle eigenvalue {} below -sup|V|", o.value));
        }
    }
    if !candidates_match(&main, &flipped, main.step) {
        failures.push("candidate sets of the two signs differ".into());
    }
    if !candidates_match(&main, &halved, main.step) {
        failures.push("candidates move by more than one step when eps_probe is halved".into());
    }
    let results = json!({
        "candidates": main.candidates,
        "flipped": flipped.candidates,
        "halved": halved.candidates,
        "step": main.step,
        "support_size": main.support_size,
        "warnings": main.warnings,
        "oracle": oracle.as_ref().map(|o| json!({"value": o.value, "residual": o.residual, "iterations": o.iterations})),
    });
    Ok(Outcome { tables: vec![t, profile], results, status: Status::from_checks(0, failures) })
}

pub fn potential(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let grid = grid_of(cfg)?;
    let fields = family_of(cfg, &grid)?;
    let p = &cfg.potential;
    let example = if p.kind == PotentialKind::Example { Some(example_potential(p.q, p.j_max, &grid)?) } else { None };
    let v = match &example {
        Some(e) => e.potential.clone(),
        None => potential_of(cfg, &grid)?,
    };
    let rep = admissibility_check(&v, &fields, &AdmissibilityConfig::new(cfg.m, cfg.lambda_ref))?;
    let mut t = Table::new("potential", vec!["n", "gamma", "r", "eps", "a", "argmax", "selected"]);
    for row in &rep.smallness {
        for e in &row.table {
            t.push(vec![
                num(row.n),
                num(row.gamma),
                num(row.r),
                num(e.eps),
                num(e.a),
                e.argmax.to_string(),
                (row.eps == Some(e.eps)).to_string(),
            ]);
        }
    }
    let mut tables = vec![t];
    let mut failures = Vec::new();
    if !rep.symmetric {
        failures.push(format!("symmetry defect {:e}", rep.symmetry_defect));
    }
    if !rep.factorizable {
        failures.push(format!("factorization defect {:e}", rep.factorization_defect));
    }
    let mut tail_json = Value::Null;
    if let Some(ex) = &example {
        let mut tail = Table::new("potential_tail", vec!["n", "tail_weak_norm", "chain_bound", "log_scaled"]);
        let mut prev = f64::INFINITY;
        let mut scaled = Vec::new();
        let mut n = 1;
        while n <= 64 && n < ex.j_max {
            let w = ex.tail(n)?.weak_norm(p.q)?;
            let s = w * (2.0 + n as f64).ln().powf(1.0 / p.q);
            if !(w < prev) {
                failures.push(format!("tail norm not decreasing at N = {n}"));
            }
            prev = w;
            scaled.push(s);
            tail.push(vec![n.to_string(), num(w), num(example_tail_bound(p.q, n, ex.j_max)), num(s)]);
            n *= 2;
        }
        let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
        if !scaled.is_empty() && hi > 2.0 * lo {
            failures.push(format!("log-scaled tail leaves a factor-2 band: [{lo}, {hi}]"));
        }
        tail_json = json!({ "scaled_min": lo, "scaled_max": hi, "measures": ex.measures.len() });
        tables.push(tail);
    }
    let results = json!({ "report": rep, "tail": tail_json });
    Ok(Outcome { tables, results, status: Status::from_checks(0, failures) })
}
