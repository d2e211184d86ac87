//! Norm evaluators: `L^p`, Lorentz `L^{p,q}`, the dyadic `B`/`B*` pair,
//! the composite `X`/`X*` norms and the weight `μ_{N,γ}`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LapError, Result};
use crate::lattice::{Domain, Field, GridSpec};
use crate::multiplier::{apply_symbol, bessel, shell_radius, smooth_step, Symbol};

/// Lorentz exponents; `q = None` encodes `q = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzExponents {
    pub p: f64,
    pub q: Option<f64>,
}

impl LorentzExponents {
    pub fn new(p: f64, q: Option<f64>) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(LapError::InvalidParameter(format!("Lorentz p must exceed 1, got {p}")));
        }
        if let Some(q) = q {
            if !(q.is_finite() && q >= 1.0) {
                return Err(LapError::InvalidParameter(format!("Lorentz q must be >= 1, got {q}")));
            }
        }
        Ok(Self { p, q })
    }

    pub fn weak(p: f64) -> Result<Self> {
        Self::new(p, None)
    }

    /// `L^{p_d, 2}`.
    pub fn restriction(d: usize) -> Self {
        Self { p: p_d(d), q: Some(2.0) }
    }

    /// `L^{p_d', 2}`.
    pub fn restriction_dual(d: usize) -> Self {
        Self { p: p_d_prime(d), q: Some(2.0) }
    }
}

/// `p_d = (2d+2)/(d+3)`.
pub fn p_d(d: usize) -> f64 {
    (2 * d + 2) as f64 / (d + 3) as f64
}

/// `p_d' = (2d+2)/(d-1)`.
pub fn p_d_prime(d: usize) -> f64 {
    (2 * d + 2) as f64 / (d - 1) as f64
}

/// `(i^s - (i-1)^s)` for `i ≥ 1` without cancellation.
fn power_increment(i: usize, s: f64) -> f64 {
    if i == 1 {
        return 1.0;
    }
    let prev = (i - 1) as f64;
    prev.powf(s) * (s * (1.0 / prev).ln_1p()).exp_m1()
}

/// Lorentz quasi-norm of a list of magnitudes, each carrying measure `cell`.
/// The rearrangement is a step function, so the integral is an exact sum.
pub fn lorentz_norm_of(magnitudes: &[f64], cell: f64, exps: LorentzExponents) -> f64 {
    let mut a: Vec<f64> = magnitudes.iter().copied().filter(|v| *v > 0.0).collect();
    a.sort_unstable_by(|x, y| y.total_cmp(x));
    let p = exps.p;
    match exps.q {
        None => a
            .iter()
            .enumerate()
            .map(|(i, v)| v * ((i + 1) as f64 * cell).powf(1.0 / p))
            .fold(0.0, f64::max),
        Some(q) => {
            let s = q / p;
            let scale = cell.powf(s) * p / q;
            let sum: f64 = a.iter().enumerate().map(|(i, v)| v.powf(q) * power_increment(i + 1, s)).sum();
            (scale * sum).powf(1.0 / q)
        }
    }
}

fn magnitudes(f: &Field) -> Result<Vec<f64>> {
    f.require(Domain::Physical)?;
    Ok(f.values().iter().map(|v| v.norm()).collect())
}

pub fn lorentz_norm(f: &Field, exps: LorentzExponents) -> Result<f64> {
    Ok(lorentz_norm_of(&magnitudes(f)?, f.grid().cell_volume(), exps))
}

/// Plain `L^p` norm with cell-volume weights; `p = ∞` gives the max.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    f.require(Domain::Physical)?;
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let s: f64 = f.values().iter().map(|v| v.norm().powf(p)).sum();
    Ok((s * f.grid().cell_volume()).powf(1.0 / p))
}

/// Dyadic shells `D_0 = {|x| < 1}`, `D_j = {2^{j-1} ≤ |x| < 2^j}`.
///
/// A node on `|x| = 2^j` belongs to the outer shell. Every shell met by
/// the grid is kept, including partial shells reaching into the corners.
#[derive(Debug, Clone)]
pub struct DyadicShells {
    grid: GridSpec,
    shell_of: Vec<u16>,
    count: usize,
}

/// Shell index of a point at distance `r` from the origin.
pub fn shell_index(r: f64) -> usize {
    if r < 1.0 {
        return 0;
    }
    let mut j = 1;
    let mut upper = 2.0;
    while r >= upper {
        upper *= 2.0;
        j += 1;
    }
    j
}

impl DyadicShells {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        if grid.half_width() < 2.0 {
            return Err(LapError::InvalidGrid(format!(
                "half_width {} cannot contain the shell 1 <= |x| < 2",
                grid.half_width()
            )));
        }
        let shell_of: Vec<u16> = (0..grid.len()).map(|k| shell_index(grid.node_norm(k)) as u16).collect();
        let count = shell_of.iter().copied().max().unwrap_or(0) as usize + 1;
        Ok(Self { grid: *grid, shell_of, count })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn shell_of(&self, flat: usize) -> usize {
        self.shell_of[flat] as usize
    }

    /// `‖f‖_{L²(D_j)}` for every shell.
    pub fn shell_l2(&self, f: &Field) -> Result<Vec<f64>> {
        f.require(Domain::Physical)?;
        if *f.grid() != self.grid {
            return Err(LapError::GridMismatch);
        }
        let mut acc = vec![0.0; self.count];
        for (v, &j) in f.values().iter().zip(&self.shell_of) {
            acc[j as usize] += v.norm_sqr();
        }
        let hd = self.grid.cell_volume();
        Ok(acc.into_iter().map(|s| (s * hd).sqrt()).collect())
    }

    pub fn b_norm(&self, f: &Field) -> Result<f64> {
        Ok(self.shell_l2(f)?.iter().enumerate().map(|(j, n)| 2f64.powf(j as f64 / 2.0) * n).sum())
    }

    pub fn bstar_norm(&self, f: &Field) -> Result<f64> {
        Ok(self
            .shell_l2(f)?
            .iter()
            .enumerate()
            .map(|(j, n)| 2f64.powf(-(j as f64) / 2.0) * n)
            .fold(0.0, f64::max))
    }
}

pub fn b_norm(f: &Field) -> Result<f64> {
    DyadicShells::new(f.grid())?.b_norm(f)
}

pub fn bstar_norm(f: &Field) -> Result<f64> {
    DyadicShells::new(f.grid())?.bstar_norm(f)
}

/// `‖f(·, x_d)‖_{L²(ℝ^{d-1})}` for each node value of the last coordinate.
pub fn slice_l2(f: &Field) -> Result<Vec<f64>> {
    f.require(Domain::Physical)?;
    let grid = f.grid();
    let n = grid.points();
    let mut acc = vec![0.0; n];
    for (k, v) in f.values().iter().enumerate() {
        acc[k % n] += v.norm_sqr();
    }
    let w = grid.spacing().powi(grid.dim() as i32 - 1);
    Ok(acc.into_iter().map(|s| (s * w).sqrt()).collect())
}

/// `∫ ‖f(·, x_d)‖_{L²} dx_d`.
pub fn slice_integral(f: &Field) -> Result<f64> {
    Ok(slice_l2(f)?.iter().sum::<f64>() * f.grid().spacing())
}

/// `sup_{x_d} ‖f(·, x_d)‖_{L²}`.
pub fn slice_sup(f: &Field) -> Result<f64> {
    Ok(slice_l2(f)?.into_iter().fold(0.0, f64::max))
}

/// Ratios `slice_integral / b_norm` and `bstar_norm / slice_sup`, both at most `√2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmbeddingRatios {
    pub b_embedding: f64,
    pub dual_embedding: f64,
}

pub fn embedding_ratios(f: &Field) -> Result<EmbeddingRatios> {
    let shells = DyadicShells::new(f.grid())?;
    let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    Ok(EmbeddingRatios {
        b_embedding: ratio(slice_integral(f)?, shells.b_norm(f)?),
        dual_embedding: ratio(shells.bstar_norm(f)?, slice_sup(f)?),
    })
}

/// Parameters of `μ_{N,γ}(t) = (1+t²)^N / (1+γt²)^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightParams {
    pub n: f64,
    pub gamma: f64,
}

impl WeightParams {
    pub fn new(n: f64, gamma: f64) -> Result<Self> {
        if !(n.is_finite() && n >= 0.0) {
            return Err(LapError::InvalidParameter(format!("weight exponent N must be >= 0, got {n}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(LapError::InvalidParameter(format!("weight gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(Self { n, gamma })
    }
}

pub fn mu_weight(t: f64, w: WeightParams) -> f64 {
    let t2 = t * t;
    ((1.0 + t2) / (1.0 + w.gamma * t2)).powf(w.n)
}

/// Multiplies `f` pointwise by `μ(|x|)^power`.
pub fn weighted(f: &Field, w: WeightParams, power: f64) -> Result<Field> {
    f.require(Domain::Physical)?;
    let grid = *f.grid();
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| v * mu_weight(grid.node_norm(k), w).powf(power))
        .collect();
    Field::from_values(grid, Domain::Physical, values)
}

/// Parameters of the composite norms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeNormConfig {
    pub m: u32,
    pub d: usize,
    /// Level whose shell `|ξ| = r(λ)` centres the splitting search.
    pub lambda_ref: f64,
    /// Relative half-widths of the band splittings tried by `x_norm_upper`.
    pub split_widths: Vec<f64>,
}

impl CompositeNormConfig {
    pub fn new(m: u32, d: usize, lambda_ref: f64) -> Result<Self> {
        if m == 0 {
            return Err(LapError::InvalidParameter("m must be >= 1".into()));
        }
        if !(2..=4).contains(&d) {
            return Err(LapError::InvalidParameter(format!("dimension {d} outside 2..=4")));
        }
        if !(lambda_ref > 0.0) {
            return Err(LapError::InvalidParameter(format!("lambda_ref must be > 0, got {lambda_ref}")));
        }
        Ok(Self { m, d, lambda_ref, split_widths: vec![0.05, 0.1, 0.2, 0.35, 0.5, 0.8] })
    }

    /// `θ_{m,d} = m - d/(d+1)`.
    pub fn theta(&self) -> f64 {
        self.m as f64 - self.d as f64 / (self.d as f64 + 1.0)
    }
}

/// The two components of the `X*` norm.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct XStarParts {
    /// `‖S_θ u‖_{L^{p_d', 2}}`
    pub lorentz: f64,
    /// `‖S_m u‖_{B*}`
    pub bstar: f64,
}

impl XStarParts {
    pub fn norm(&self) -> f64 {
        self.lorentz.max(self.bstar)
    }
}

pub fn xstar_norm_parts(u: &Field, cfg: &CompositeNormConfig) -> Result<XStarParts> {
    u.require(Domain::Physical)?;
    let lor = apply_symbol(&bessel(cfg.theta()), u)?;
    let bs = apply_symbol(&bessel(cfg.m as f64), u)?;
    xstar_parts_from(&lor, &bs, cfg)
}

/// `X*` components from precomputed `S_θ u` and `S_m u`.
pub fn xstar_parts_from(s_theta_u: &Field, s_m_u: &Field, cfg: &CompositeNormConfig) -> Result<XStarParts> {
    Ok(XStarParts {
        lorentz: lorentz_norm(s_theta_u, LorentzExponents::restriction_dual(cfg.d))?,
        bstar: bstar_norm(s_m_u)?,
    })
}

/// `max(‖S_θ u‖_{L^{p_d',2}}, ‖S_m u‖_{B*})`.
pub fn xstar_norm(u: &Field, cfg: &CompositeNormConfig) -> Result<f64> {
    Ok(xstar_norm_parts(u, cfg)?.norm())
}

/// Which splitting produced an `X` upper bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    Witness,
    AllLorentz,
    AllB,
    Band { width: f64 },
}

/// An upper bound for the sum-space norm `‖f‖_X`.
#[derive(Debug, Clone, Serialize)]
pub struct XUpper {
    pub value: f64,
    pub lorentz_part: f64,
    pub b_part: f64,
    pub splitting: Splitting,
    pub is_upper_bound: bool,
}

fn split_cost(f1: Option<&Field>, f2: Option<&Field>, cfg: &CompositeNormConfig) -> Result<(f64, f64)> {
    let lor = match f1 {
        Some(f) => lorentz_norm(&apply_symbol(&bessel(-cfg.theta()), f)?, LorentzExponents::restriction(cfg.d))?,
        None => 0.0,
    };
    let b = match f2 {
        Some(f) => b_norm(&apply_symbol(&bessel(-(cfg.m as f64)), f)?)?,
        None => 0.0,
    };
    Ok((lor, b))
}

/// Smooth radial band around `|ξ| = r`: 1 where `||ξ|/r - 1| ≤ w`, 0 beyond `2w`.
pub fn band_symbol(r: f64, w: f64) -> Symbol {
    Symbol::radial(format!("band({r},{w})"), true, move |rho| {
        let dev = (rho / r - 1.0).abs();
        Complex64::new(smooth_step((2.0 - dev / w).min(1.0)), 0.0)
    })
}

/// Upper bound for `‖f‖_X = inf ‖S_{-θ} f_1‖_{L^{p_d,2}} + ‖S_{-m} f_2‖_B`.
///
/// With a witness `(f_1, f_2)` the bound is evaluated on it; otherwise the
/// smallest value over the trivial splittings and a family of band splittings
/// around `|ξ| = r(λ_ref)` is returned.
pub fn x_norm_upper(f: &Field, cfg: &CompositeNormConfig, witness: Option<(&Field, &Field)>) -> Result<XUpper> {
    f.require(Domain::Physical)?;
    if let Some((f1, f2)) = witness {
        let defect = f1.add(f2)?.sub(f)?.max_abs();
        let scale = f.max_abs().max(f64::MIN_POSITIVE);
        if defect > 1e-10 * scale {
            return Err(LapError::WitnessMismatch(defect / scale));
        }
        let (lor, b) = split_cost(Some(f1), Some(f2), cfg)?;
        return Ok(XUpper { value: lor + b, lorentz_part: lor, b_part: b, splitting: Splitting::Witness, is_upper_bound: true });
    }
    if f.max_abs() == 0.0 {
        return Ok(XUpper { value: 0.0, lorentz_part: 0.0, b_part: 0.0, splitting: Splitting::AllLorentz, is_upper_bound: true });
    }
    let mut best = {
        let (lor, _) = split_cost(Some(f), None, cfg)?;
        XUpper { value: lor, lorentz_part: lor, b_part: 0.0, splitting: Splitting::AllLorentz, is_upper_bound: true }
    };
    let (_, b) = split_cost(None, Some(f), cfg)?;
    if b < best.value {
        best = XUpper { value: b, lorentz_part: 0.0, b_part: b, splitting: Splitting::AllB, is_upper_bound: true };
    }
    let r = shell_radius(cfg.lambda_ref, cfg.m);
    for &w in &cfg.split_widths {
        let f2 = apply_symbol(&band_symbol(r, w), f)?;
        let f1 = f.sub(&f2)?;
        let (lor, b) = split_cost(Some(&f1), Some(&f2), cfg)?;
        if lor + b < best.value {
            best = XUpper { value: lor + b, lorentz_part: lor, b_part: b, splitting: Splitting::Band { width: w }, is_upper_bound: true };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{sample, sample_real};

    fn gaussian(grid: &GridSpec, s: f64) -> Field {
        sample_real(|x| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s * s)).exp(), grid).unwrap()
    }

    #[test]
    fn restriction_exponents() {
        assert_eq!(p_d(3), 8.0 / 6.0);
        assert_eq!(p_d_prime(3), 4.0);
        assert!((1.0 / p_d(2) + 1.0 / p_d_prime(2) - 1.0).abs() < 1e-15);
        assert!(LorentzExponents::new(1.0, Some(2.0)).is_err());
        assert!(LorentzExponents::new(2.0, Some(0.5)).is_err());
    }

    #[test]
    fn indicator_lorentz_norms() {
        let cell = 0.01;
        let vals = vec![1.0; 300];
        let a: f64 = 3.0;
        for p in [1.5, 2.0, 4.0] {
            let weak = lorentz_norm_of(&vals, cell, LorentzExponents::weak(p).unwrap());
            assert!((weak - a.powf(1.0 / p)).abs() < 1e-12);
            for q in [1.0, 2.0, 7.0] {
                let v = lorentz_norm_of(&vals, cell, LorentzExponents::new(p, Some(q)).unwrap());
                let exact = (p / q).powf(1.0 / q) * a.powf(1.0 / p);
                assert!((v - exact).abs() < 1e-12 * exact, "p={p} q={q}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn diagonal_lorentz_is_lp() {
        let g = GridSpec::new(2, 6.0, 32).unwrap();
        let f = sample(|x| Complex64::new(x[0], 1.0) * (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp(), &g).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let a = lorentz_norm(&f, LorentzExponents::new(p, Some(p)).unwrap()).unwrap();
            let b = lp_norm(&f, p).unwrap();
            assert!((a - b).abs() < 1e-10 * b);
        }
    }

    #[test]
    fn shell_membership_ties_go_outward() {
        assert_eq!(shell_index(0.0), 0);
        assert_eq!(shell_index(0.999), 0);
        assert_eq!(shell_index(1.0), 1);
        assert_eq!(shell_index(1.999), 1);
        assert_eq!(shell_index(2.0), 2);
        assert_eq!(shell_index(4.0), 3);
    }

    #[test]
    fn unit_ball_indicator() {
        let g = GridSpec::new(2, 4.0, 64).unwrap();
        let f = sample_real(|x| if x[0] * x[0] + x[1] * x[1] < 1.0 { 1.0 } else { 0.0 }, &g).unwrap();
        let count = f.values().iter().filter(|v| v.re > 0.0).count() as f64;
        let volume = count * g.cell_volume();
        let b = b_norm(&f).unwrap();
        let bs = bstar_norm(&f).unwrap();
        assert!((b - volume.sqrt()).abs() < 1e-14);
        assert!((bs - volume.sqrt()).abs() < 1e-14);
        // grid volume approximates π
        assert!((volume - std::f64::consts::PI).abs() < 0.15);
    }

    #[test]
    fn single_shell_field() {
        let g = GridSpec::new(2, 8.0, 64).unwrap();
        let f = sample_real(|x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if (2.0..4.0).contains(&r) { 1.0 + x[0] } else { 0.0 }
        }, &g)
        .unwrap();
        let l2 = lp_norm(&f, 2.0).unwrap();
        assert!((b_norm(&f).unwrap() - 2.0 * l2).abs() < 1e-12 * l2);
        assert!((bstar_norm(&f).unwrap() - 0.5 * l2).abs() < 1e-12 * l2);
    }

    #[test]
    fn shells_need_room() {
        assert!(DyadicShells::new(&GridSpec::new(2, 1.5, 16).unwrap()).is_err());
    }

    #[test]
    fn mu_examples() {
        let w = WeightParams::new(1.0, 0.01).unwrap();
        assert!((mu_weight(10.0, w) - 50.5).abs() < 1e-12);
        assert_eq!(mu_weight(0.0, WeightParams::new(2.0, 0.1).unwrap()), 1.0);
        assert_eq!(mu_weight(7.0, WeightParams::new(2.0, 1.0).unwrap()), 1.0);
        assert!(WeightParams::new(1.0, 0.0).is_err());
        assert!(WeightParams::new(-1.0, 0.5).is_err());
    }

    #[test]
    fn theta_formula() {
        let c = CompositeNormConfig::new(2, 3, 1.0).unwrap();
        assert_eq!(c.theta(), 2.0 - 3.0 / 4.0);
    }

    #[test]
    fn xstar_is_max_of_parts() {
        let g = GridSpec::new(3, 8.0, 32).unwrap();
        let f = gaussian(&g, 1.0);
        let cfg = CompositeNormConfig::new(1, 3, 1.0).unwrap();
        let parts = xstar_norm_parts(&f, &cfg).unwrap();
        let lor = lorentz_norm(
            &apply_symbol(&bessel(cfg.theta()), &f).unwrap(),
            LorentzExponents::new(4.0, Some(2.0)).unwrap(),
        )
        .unwrap();
        let bs = bstar_norm(&apply_symbol(&bessel(1.0), &f).unwrap()).unwrap();
        assert_eq!(parts.lorentz, lor);
        assert_eq!(parts.bstar, bs);
        assert_eq!(xstar_norm(&f, &cfg).unwrap(), lor.max(bs));
        assert_eq!(xstar_norm(&Field::zeros(g, Domain::Physical), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn x_upper_bounds() {
        let g = GridSpec::new(2, 16.0, 64).unwrap();
        let cfg = CompositeNormConfig::new(1, 2, 1.0).unwrap();
        let zero = Field::zeros(g, Domain::Physical);
        assert_eq!(x_norm_upper(&zero, &cfg, None).unwrap().value, 0.0);

        let f = gaussian(&g, 1.0);
        let best = x_norm_upper(&f, &cfg, None).unwrap();
        let all_lor = x_norm_upper(&f, &cfg, Some((&f, &zero))).unwrap().value;
        let all_b = x_norm_upper(&f, &cfg, Some((&zero, &f))).unwrap().value;
        assert!(best.is_upper_bound);
        assert!(best.value <= all_lor.min(all_b));

        let bad = f.scale(Complex64::new(0.5, 0.0));
        assert!(matches!(x_norm_upper(&f, &cfg, Some((&bad, &zero))), Err(LapError::WitnessMismatch(_))));
    }
}
