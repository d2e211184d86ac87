//! Fourier multipliers on the lattice: the polyharmonic symbol `P_m`,
//! Bessel potentials `S_α`, the smooth shell cutoff `χ_λ` and the free
//! resolvent off the spectrum.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{LapError, Result};
use crate::lattice::{Domain, Field, GridSpec};

pub type RadialFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
type GeneralFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

#[derive(Clone)]
enum Rule {
    Radial(RadialFn),
    General(GeneralFn),
}

/// A multiplier symbol `ξ -> σ(ξ)`.
#[derive(Clone)]
pub struct Symbol {
    name: String,
    smooth: bool,
    rule: Rule,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol").field("name", &self.name).field("smooth", &self.smooth).finish()
    }
}

impl Symbol {
    pub fn radial(name: impl Into<String>, smooth: bool, f: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), smooth, rule: Rule::Radial(Arc::new(f)) }
    }

    pub fn general(
        name: impl Into<String>,
        smooth: bool,
        f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), smooth, rule: Rule::General(Arc::new(f)) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        match &self.rule {
            Rule::Radial(f) => f(xi.iter().map(|v| v * v).sum::<f64>().sqrt()),
            Rule::General(f) => f(xi),
        }
    }

    /// The profile `|ξ| -> σ` when the symbol is rotation invariant.
    pub fn radial_profile(&self) -> Option<RadialFn> {
        match &self.rule {
            Rule::Radial(f) => Some(f.clone()),
            Rule::General(_) => None,
        }
    }

    pub fn eval_radial(&self, rho: f64) -> Option<Complex64> {
        match &self.rule {
            Rule::Radial(f) => Some(f(rho)),
            Rule::General(_) => None,
        }
    }

    /// Pointwise product.
    pub fn times(&self, other: &Symbol) -> Symbol {
        let name = format!("{}*{}", self.name, other.name);
        let smooth = self.smooth && other.smooth;
        match (&self.rule, &other.rule) {
            (Rule::Radial(a), Rule::Radial(b)) => {
                let (a, b) = (a.clone(), b.clone());
                Symbol::radial(name, smooth, move |r| a(r) * b(r))
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                Symbol::general(name, smooth, move |xi| a.eval(xi) * b.eval(xi))
            }
        }
    }
}

pub fn constant(c: Complex64) -> Symbol {
    Symbol::radial(format!("const({c})"), true, move |_| c)
}

/// `P_m(ξ) = |ξ|^{2m}`.
pub fn polyharmonic(m: u32) -> Symbol {
    Symbol::radial(format!("P_{m}"), true, move |r| Complex64::new(r.powi(2 * m as i32), 0.0))
}

/// Bessel potential `S_α`: `(1 + |ξ|²)^{α/2}`.
pub fn bessel(alpha: f64) -> Symbol {
    Symbol::radial(format!("S_{alpha}"), true, move |r| Complex64::new((1.0 + r * r).powf(alpha / 2.0), 0.0))
}

/// `r(λ) = λ^{1/2m}`, the radius of the level set `{P_m = λ}`.
pub fn shell_radius(lambda: f64, m: u32) -> f64 {
    lambda.powf(1.0 / (2.0 * m as f64))
}

pub fn apply_symbol(sym: &Symbol, f: &Field) -> Result<Field> {
    let spectral = match f.domain() {
        Domain::Physical => f.forward()?,
        Domain::Spectral => f.clone(),
    };
    let grid = *f.grid();
    let d = grid.dim();
    let mut values = spectral.into_values();
    for (flat, v) in values.iter_mut().enumerate() {
        let xi = grid.frequency(flat);
        let s = sym.eval(&xi[..d]);
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(LapError::NonFiniteSymbol(xi[..d].to_vec()));
        }
        *v *= s;
    }
    let out = Field::from_values(grid, Domain::Spectral, values)?;
    match f.domain() {
        Domain::Physical => out.inverse(),
        Domain::Spectral => Ok(out),
    }
}

/// Distance from `z` to the half line `[0, ∞)`.
pub fn distance_to_spectrum(z: Complex64) -> f64 {
    if z.re >= 0.0 {
        z.im.abs()
    } else {
        z.norm()
    }
}

/// `R_0^m(z) f = [(P_m(ξ) - z)^{-1} f̂]^∨` on the lattice.
pub fn free_resolvent(z: Complex64, m: u32, f: &Field) -> Result<Field> {
    let grid = *f.grid();
    check_off_lattice_spectrum(z, m, &grid)?;
    apply_symbol(&resolvent_symbol(z, m), f)
}

pub fn resolvent_symbol(z: Complex64, m: u32) -> Symbol {
    Symbol::radial(format!("R_0^{m}({z})"), true, move |r| 1.0 / (Complex64::new(r.powi(2 * m as i32), 0.0) - z))
}

/// Rejects `z` on `[0, ∞)` or within `1e-8 (1 + |z|)` of a lattice value of `P_m`.
pub fn check_off_lattice_spectrum(z: Complex64, m: u32, grid: &GridSpec) -> Result<()> {
    let threshold = 1e-8 * (1.0 + z.norm());
    let dist = distance_to_spectrum(z);
    if dist <= threshold {
        return Err(LapError::OnSpectrum { z, distance: dist });
    }
    if z.re >= 0.0 && z.im.abs() <= threshold.max(1e-6) {
        let mut nearest = f64::INFINITY;
        for flat in 0..grid.len() {
            let p = grid.frequency_norm(flat).powi(2 * m as i32);
            nearest = nearest.min((Complex64::new(p, 0.0) - z).norm());
        }
        if nearest <= threshold {
            return Err(LapError::OnSpectrum { z, distance: nearest });
        }
    }
    Ok(())
}

/// `C^∞` step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, built from `exp(-1/t)`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Parameters of the shell cutoff `χ_λ`: equal to 1 where
/// `P_m ∈ [3λ/4, 5λ/4]` and 0 outside `(λ/2, 3λ/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub lambda: f64,
    pub m: u32,
}

impl CutoffSpec {
    pub fn new(lambda: f64, m: u32) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(LapError::InvalidParameter(format!("cutoff needs lambda > 0, got {lambda}")));
        }
        if m == 0 {
            return Err(LapError::InvalidParameter("m must be >= 1".into()));
        }
        Ok(Self { lambda, m })
    }

    /// `χ_λ` as a function of `s = P_m(ξ)`.
    pub fn of_level(&self, s: f64) -> f64 {
        let t = s / self.lambda;
        if t <= 0.5 || t >= 1.5 {
            0.0
        } else if t < 0.75 {
            smooth_step((t - 0.5) * 4.0)
        } else if t <= 1.25 {
            1.0
        } else {
            smooth_step((1.5 - t) * 4.0)
        }
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.of_level(rho.powi(2 * self.m as i32))
    }

    /// Radii bounding the support.
    pub fn support(&self) -> (f64, f64) {
        (shell_radius(0.5 * self.lambda, self.m), shell_radius(1.5 * self.lambda, self.m))
    }

    /// Radii bounding the plateau.
    pub fn plateau(&self) -> (f64, f64) {
        (shell_radius(0.75 * self.lambda, self.m), shell_radius(1.25 * self.lambda, self.m))
    }

    pub fn symbol(&self) -> Symbol {
        let spec = *self;
        Symbol::radial(format!("chi_{}", self.lambda), true, move |r| Complex64::new(spec.value(r), 0.0))
    }

    /// Checks that the support is resolved by at least 8 lattice
    /// frequencies radially and lies inside the frequency box.
    pub fn check_resolved(&self, grid: &GridSpec) -> Result<()> {
        let (lo, hi) = self.support();
        let width = hi - lo;
        let resolved = width / grid.freq_step();
        if resolved < 8.0 || hi >= grid.nyquist() {
            let required_half_width = (8.0 * std::f64::consts::PI / width).max(grid.half_width());
            let min_points = 2.0 * required_half_width * hi / std::f64::consts::PI * 1.25;
            let required_points = (min_points.ceil() as usize).max(16).next_power_of_two();
            return Err(LapError::UnresolvedShell {
                lambda: self.lambda,
                resolved,
                required_half_width,
                required_points,
            });
        }
        Ok(())
    }
}

/// The cutoff symbol, validated against the lattice.
pub fn chi_lambda(spec: &CutoffSpec, grid: &GridSpec) -> Result<Symbol> {
    spec.check_resolved(grid)?;
    Ok(spec.symbol())
}

/// `sup_ξ |(1-χ_λ)(ξ)(1+|ξ|²)^m / (|ξ|^{2m} - λ)|` over the lattice frequencies.
pub fn nonsingular_symbol_sup(spec: &CutoffSpec, grid: &GridSpec) -> f64 {
    let m = spec.m as i32;
    (0..grid.len())
        .map(|flat| {
            let r = grid.frequency_norm(flat);
            let chi = spec.value(r);
            if chi >= 1.0 {
                return 0.0;
            }
            ((1.0 - chi) * (1.0 + r * r).powi(m) / (r.powi(2 * m) - spec.lambda)).abs()
        })
        .fold(0.0, f64::max)
}
