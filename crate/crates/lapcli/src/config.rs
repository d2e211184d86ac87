//! Experiment configuration: defaults, JSON file, `--set` overrides.

use lap_core::boundary::Sign;
use lap_core::perturb::BsMethod;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 2, half_width: 16.0, points: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub count: usize,
    pub sigma: f64,
    pub modulation: f64,
    pub translation: f64,
    pub seed: u64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        let f = lap_core::family::FamilySpec::default();
        Self { count: f.count, sigma: f.sigma, modulation: f.modulation, translation: f.translation, seed: f.seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Family,
    UnitBall,
    Shells,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    SquareWell,
    Gaussian,
    Example,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    /// Square well: `V = -depth` on `|x| ≤ radius`.
    pub depth: f64,
    pub radius: f64,
    /// Gaussian: `amplitude · exp(-|x|²/(2σ²))`.
    pub amplitude: f64,
    pub sigma: f64,
    /// Example potential exponent and truncation.
    pub q: f64,
    pub j_max: usize,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { kind: PotentialKind::Zero, depth: 5.0, radius: 1.0, amplitude: 0.1, sigma: 1.0, q: 2.0, j_max: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub lambda: f64,
    pub radii: Vec<f64>,
    pub directions: Vec<f64>,
    pub tol: f64,
    /// Largest admitted `max/median` and `median/min` of the normalized column.
    pub band: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            radii: vec![5.0, 7.5, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0],
            directions: vec![0.0, 15.0, 25.0],
            tol: 1e-8,
            band: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub interval: (f64, f64),
    pub eps_probe: f64,
    pub steps: usize,
    pub threshold: f64,
    /// Relative tolerance of the oracle match.
    pub oracle_tol: f64,
    /// Margin kept between a perturbed sweep and any candidate.
    pub margin: f64,
    /// Largest support of `V` for which `sweep` scans for excluded levels.
    pub max_support: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { interval: (-4.9, -0.05), eps_probe: 1e-3, steps: 97, threshold: 0.1, oracle_tol: 0.01, margin: 0.1, max_support: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub bs_tol: f64,
    pub apply_residual: f64,
    pub embedding_slack: f64,
    /// Largest admitted drift of the sweep sup over the last ε decade.
    pub drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { bs_tol: 1e-8, apply_residual: 1e-6, embedding_slack: 1e-6, drift: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub m: u32,
    pub delta: f64,
    /// Level centring the band splittings of the `X` upper bound.
    pub lambda_ref: f64,
    pub lambdas: Vec<f64>,
    pub eps: Vec<f64>,
    pub sign: Sign,
    pub include_boundary: bool,
    pub fields: Vec<FieldKind>,
    pub family: FamilyConfig,
    pub potential: PotentialConfig,
    pub method: BsMethod,
    pub kernel: KernelConfig,
    pub spectrum: SpectrumConfig,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            m: 1,
            delta: 0.5,
            lambda_ref: 1.0,
            lambdas: vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
            eps: vec![0.1, 0.01, 0.001],
            sign: Sign::Plus,
            include_boundary: true,
            fields: vec![FieldKind::Family],
            family: FamilyConfig::default(),
            potential: PotentialConfig::default(),
            method: BsMethod::Gmres,
            kernel: KernelConfig::default(),
            spectrum: SpectrumConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `path.to.key=value`; the value is parsed as JSON, else taken as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--set {assignment}: expected key=value")))?;
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Validation(format!("--set {path}: '{}' is not a section", keys[..i].join("."))))?;
        if !obj.contains_key(*key) {
            return Err(CliError::Validation(format!("--set {path}: unknown field '{key}'")));
        }
        node = obj.get_mut(*key).unwrap();
    }
    *node = parse_scalar(raw);
    Ok(())
}

/// Defaults, then the config file, then `--set` overrides in order.
pub fn resolve(file: Option<&Value>, sets: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut doc = serde_json::to_value(ExperimentConfig::default()).expect("defaults serialize");
    if let Some(v) = file {
        let parsed: ExperimentConfig =
            serde_json::from_value(v.clone()).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        doc = serde_json::to_value(parsed).expect("config serializes");
    }
    for s in sets {
        apply_override(&mut doc, s)?;
    }
    serde_json::from_value(doc).map_err(|e| CliError::Validation(format!("config: {e}")))
}

fn check(ok: bool, field: &str, msg: impl Into<String>, errs: &mut Vec<String>) {
    if !ok {
        errs.push(format!("{field}: {}", msg.into()));
    }
}

impl ExperimentConfig {
    /// Field-level validation; every failing field is reported.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut e = Vec::new();
        let g = &self.grid;
        check((2..=4).contains(&g.dim), "grid.dim", format!("must lie in 2..=4, got {}", g.dim), &mut e);
        check(g.half_width > 0.0 && g.half_width.is_finite(), "grid.half_width", "must be > 0", &mut e);
        check(g.points >= 16 && g.points.is_multiple_of(2), "grid.points", format!("must be even and >= 16, got {}", g.points), &mut e);
        check(self.m >= 1, "m", "must be >= 1", &mut e);
        check(self.delta > 0.0 && self.delta <= 1.0, "delta", format!("must lie in (0, 1], got {}", self.delta), &mut e);
        check(self.lambda_ref > 0.0, "lambda_ref", "must be > 0", &mut e);
        for (i, &l) in self.lambdas.iter().enumerate() {
            check(
                l >= self.delta && l <= 1.0 / self.delta,
                &format!("lambdas[{i}]"),
                format!("{l} outside [delta, 1/delta]"),
                &mut e,
            );
        }
        for (i, &v) in self.eps.iter().enumerate() {
            check(v > 0.0 && v <= 1.0, &format!("eps[{i}]"), format!("{v} outside (0, 1]"), &mut e);
        }
        check(self.family.sigma > 0.0, "family.sigma", "must be > 0", &mut e);
        check(self.family.translation >= 0.0, "family.translation", "must be >= 0", &mut e);
        check(self.family.modulation >= 0.0, "family.modulation", "must be >= 0", &mut e);
        let p = &self.potential;
        check(p.depth.is_finite(), "potential.depth", "must be finite", &mut e);
        check(p.radius > 0.0, "potential.radius", "must be > 0", &mut e);
        check(p.sigma > 0.0, "potential.sigma", "must be > 0", &mut e);
        check(p.q >= 1.0, "potential.q", "must be >= 1", &mut e);
        check(p.j_max >= 1, "potential.j_max", "must be >= 1", &mut e);
        let k = &self.kernel;
        check(k.lambda >= self.delta && k.lambda <= 1.0 / self.delta, "kernel.lambda", "outside [delta, 1/delta]", &mut e);
        check(k.radii.iter().all(|r| *r >= 0.0), "kernel.radii", "must be >= 0", &mut e);
        check(k.tol > 0.0, "kernel.tol", "must be > 0", &mut e);
        let s = &self.spectrum;
        check(s.interval.0 < s.interval.1, "spectrum.interval", "must be ordered", &mut e);
        check(s.eps_probe > 0.0, "spectrum.eps_probe", "must be > 0", &mut e);
        check(s.steps >= 2, "spectrum.steps", "must be >= 2", &mut e);
        check(s.margin >= 0.0, "spectrum.margin", "must be >= 0", &mut e);
        let t = &self.tolerances;
        check(t.bs_tol > 0.0, "tolerances.bs_tol", "must be > 0", &mut e);
        if e.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(e.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = resolve(None, &["grid.points=128".into(), "potential.kind=square_well".into(), "lambdas=[1.0]".into()]).unwrap();
        assert_eq!(cfg.grid.points, 128);
        assert_eq!(cfg.potential.kind, PotentialKind::SquareWell);
        assert_eq!(cfg.lambdas, vec![1.0]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(resolve(None, &["grid.size=3".into()]).is_err());
        let doc: Value = serde_json::json!({"grid": {"dims": 2}});
        assert!(resolve(Some(&doc), &[]).is_err());
    }

    #[test]
    fn validation_names_fields() {
        let cfg = resolve(None, &["delta=1.5".into(), "grid.points=15".into()]).unwrap();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("delta") && msg.contains("grid.points"));
    }
}
