//! Panel-wise Chebyshev interpolation in `ρ = |ξ|` and product-integration
//! weights for `∫ Ψ(ρ) / (ρ^{2m} - z) dρ`.

use num_complex::Complex64;

use crate::error::{LapError, Result};
use crate::quadrature::{adaptive_vec, ChebyshevBasis, GaussLegendre};

/// Chebyshev nodes per panel.
pub const PANEL_ORDER: usize = 16;

/// Panels covering `[0, ρ_max]`, with an optional panel centred on the
/// singular radius.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    panels: Vec<(f64, f64)>,
    basis: ChebyshevBasis,
    nodes: Vec<f64>,
    centre: Option<f64>,
}

fn split(a: f64, b: f64, width: f64, out: &mut Vec<(f64, f64)>) {
    if b <= a {
        return;
    }
    let k = ((b - a) / width).ceil().max(1.0) as usize;
    let step = (b - a) / k as f64;
    for i in 0..k {
        let lo = a + i as f64 * step;
        let hi = if i + 1 == k { b } else { a + (i + 1) as f64 * step };
        out.push((lo, hi));
    }
}

impl RadialGrid {
    fn build(panels: Vec<(f64, f64)>, p: usize, centre: Option<f64>) -> Self {
        let basis = ChebyshevBasis::new(p);
        let mut nodes = Vec::with_capacity(panels.len() * p);
        for &(a, b) in &panels {
            for &t in &basis.nodes {
                nodes.push(0.5 * (a + b) + 0.5 * (b - a) * t);
            }
        }
        Self { panels, basis, nodes, centre }
    }

    /// Equal panels of width at most `width`.
    pub fn uniform(rho_max: f64, width: f64, p: usize) -> Result<Self> {
        if !(rho_max > 0.0 && width > 0.0) {
            return Err(LapError::InvalidParameter(format!("radial grid needs rho_max, width > 0 ({rho_max}, {width})")));
        }
        let mut panels = Vec::new();
        split(0.0, rho_max, width, &mut panels);
        Ok(Self::build(panels, p, None))
    }

    /// Panels with one of them symmetric about `r`.
    pub fn centred(r: f64, rho_max: f64, width: f64, p: usize) -> Result<Self> {
        if !(r > 0.0 && width > 0.0) {
            return Err(LapError::InvalidParameter(format!("radial grid needs r, width > 0 ({r}, {width})")));
        }
        let a = (0.25 * r).min(0.5 * width);
        let top = rho_max.max(r + a + width);
        let mut panels = Vec::new();
        split(0.0, r - a, width, &mut panels);
        panels.push((r - a, r + a));
        split(r + a, top, width, &mut panels);
        Ok(Self::build(panels, p, Some(r)))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn panels(&self) -> &[(f64, f64)] {
        &self.panels
    }

    pub fn order(&self) -> usize {
        self.basis.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn centre(&self) -> Option<f64> {
        self.centre
    }

    pub fn rho_max(&self) -> f64 {
        self.panels.last().map(|p| p.1).unwrap_or(0.0)
    }

    /// Largest panel width.
    pub fn width(&self) -> f64 {
        self.panels.iter().map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    fn panel_of(&self, rho: f64) -> Option<usize> {
        self.panels.iter().position(|&(a, b)| rho >= a && rho <= b)
    }

    fn lagrange(&self, panel: usize, rho: f64, out: &mut [f64]) {
        let (a, b) = self.panels[panel];
        self.basis.lagrange((2.0 * rho - a - b) / (b - a), out);
    }

    /// Interpolant of nodal values at `rho`; zero outside the grid.
    pub fn interpolate(&self, values: &[Complex64], rho: f64) -> Complex64 {
        let Some(k) = self.panel_of(rho) else {
            return Complex64::new(0.0, 0.0);
        };
        let p = self.order();
        let mut l = vec![0.0; p];
        self.lagrange(k, rho, &mut l);
        values[k * p..(k + 1) * p].iter().zip(&l).map(|(v, w)| v * w).sum()
    }

    /// Off-node check points: the midpoints between consecutive nodes of
    /// every panel, returned panel-major.
    pub fn check_points(&self) -> Vec<f64> {
        let p = self.order();
        let mut out = Vec::new();
        for k in 0..self.panels.len() {
            for j in 0..p - 1 {
                out.push(0.5 * (self.nodes[k * p + j] + self.nodes[k * p + j + 1]));
            }
        }
        out
    }
}

/// `(ρ^{2m} - r^{2m}) / (ρ - r)` evaluated without cancellation.
fn quotient(rho: f64, r: f64, m: u32) -> f64 {
    let n = 2 * m as i32;
    (0..n).map(|k| rho.powi(k) * r.powi(n - 1 - k)).sum()
}

/// Split weights for the boundary value `1/(ρ^{2m} - λ ∓ i0)`: the total
/// weight is `pv ± iπ delta`.
#[derive(Debug, Clone)]
pub struct PlemeljWeights {
    pub pv: Vec<f64>,
    pub delta: Vec<f64>,
}

impl PlemeljWeights {
    pub fn combined(&self, sign: f64) -> Vec<Complex64> {
        self.pv
            .iter()
            .zip(&self.delta)
            .map(|(&p, &d)| Complex64::new(p, sign * std::f64::consts::PI * d))
            .collect()
    }
}

/// Product-integration weights of the interpolant against the principal
/// value and the delta mass of `1/(ρ^{2m} - λ)`.
///
/// On panels at or near `r = λ^{1/2m}` the integrand is rewritten as
/// `(g(ρ) - g(r))/(ρ - r) + g(r)/(ρ - r)` with `g = ℓ/q` smooth; the
/// second piece integrates to a logarithm.
pub fn plemelj_weights(grid: &RadialGrid, m: u32, lambda: f64) -> PlemeljWeights {
    let r = lambda.powf(1.0 / (2.0 * m as f64));
    let p = grid.order();
    let gl = GaussLegendre::new(2 * p);
    let mut pv = vec![0.0; grid.len()];
    let mut delta = vec![0.0; grid.len()];
    let mut l = vec![0.0; p];
    let mut lr = vec![0.0; p];
    let qr = quotient(r, r, m);
    for (k, &(a, b)) in grid.panels().iter().enumerate() {
        let half = 0.5 * (b - a);
        let near = r > a - half && r < b + half;
        let w = &mut pv[k * p..(k + 1) * p];
        if near {
            grid.lagrange(k, r, &mut lr);
            for (rho, wt) in gl.mapped(a, b) {
                grid.lagrange(k, rho, &mut l);
                let q = quotient(rho, r, m);
                for j in 0..p {
                    w[j] += wt * (l[j] / q - lr[j] / qr) / (rho - r);
                }
            }
            let log = ((b - r) / (a - r)).abs().ln();
            for j in 0..p {
                w[j] += lr[j] / qr * log;
            }
            if r > a && r < b {
                for j in 0..p {
                    delta[k * p + j] = lr[j] / qr;
                }
            }
        } else {
            for (rho, wt) in gl.mapped(a, b) {
                grid.lagrange(k, rho, &mut l);
                let s = 1.0 / (rho.powi(2 * m as i32) - lambda);
                for j in 0..p {
                    w[j] += wt * l[j] * s;
                }
            }
        }
    }
    PlemeljWeights { pv, delta }
}

/// Weights for `∫ Ψ(ρ)/(ρ^{2m} - z) dρ` at `z` off `[0, ∞)`.
pub fn resolvent_weights(grid: &RadialGrid, m: u32, z: Complex64) -> Result<Vec<Complex64>> {
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(LapError::OnSpectrum { z, distance: 0.0 });
    }
    let p = grid.order();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    let root = if z.re > 0.0 { Some(z.re.powf(1.0 / (2.0 * m as f64))) } else { None };
    let mut l = vec![0.0; p];
    for (k, &(a, b)) in grid.panels().iter().enumerate() {
        let breaks: Vec<f64> = root.into_iter().filter(|&t| t > a && t < b).collect();
        let res = adaptive_vec(
            |rho, buf| {
                grid.lagrange(k, rho, &mut l);
                let s = 1.0 / (Complex64::new(rho.powi(2 * m as i32), 0.0) - z);
                for j in 0..p {
                    buf[j] = s * l[j];
                }
            },
            p,
            a,
            b,
            &breaks,
            1e-300,
            1e-13,
            400,
        );
        out[k * p..(k + 1) * p].copy_from_slice(&res.value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(w: &[Complex64], grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Complex64 {
        grid.nodes().iter().zip(w).map(|(&r, w)| w * f(r)).sum()
    }

    #[test]
    fn centred_grid_layout() {
        let g = RadialGrid::centred(1.0, 5.0, 0.4, 16).unwrap();
        let (a, b) = g.panels().iter().copied().find(|&(a, b)| a < 1.0 && b > 1.0).unwrap();
        assert!((a + b - 2.0).abs() < 1e-15);
        assert!(g.width() <= 0.4 + 1e-12);
        assert!(g.rho_max() >= 5.0);
        for w in g.panels().windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
    }

    #[test]
    fn interpolation_is_spectral() {
        let g = RadialGrid::uniform(4.0, 0.5, 16).unwrap();
        let vals: Vec<Complex64> = g.nodes().iter().map(|&r| Complex64::new((3.0 * r).sin(), r * r)).collect();
        for &t in &g.check_points() {
            let e = g.interpolate(&vals, t) - Complex64::new((3.0 * t).sin(), t * t);
            assert!(e.norm() < 1e-12);
        }
    }

    #[test]
    fn principal_value_of_gaussian() {
        // p.v.∫_0^∞ e^{-ρ²} /(ρ² - 1) dρ; oracle from adaptive quadrature of
        // the symmetrized integrand around ρ = 1.
        let g = RadialGrid::centred(1.0, 8.0, 0.25, 16).unwrap();
        let w = plemelj_weights(&g, 1, 1.0);
        let f = |r: f64| (-r * r).exp();
        let pv: f64 = g.nodes().iter().zip(&w.pv).map(|(&r, w)| w * f(r)).sum();
        let (sym, _) = crate::quadrature::adaptive(
            |s| Complex64::new(f(1.0 + s) / ((1.0 + s) * (1.0 + s) - 1.0) + f(1.0 - s) / ((1.0 - s) * (1.0 - s) - 1.0), 0.0),
            0.0,
            1.0,
            &[],
            1e-15,
            1e-13,
        );
        let (tail, _) = crate::quadrature::adaptive(|r| Complex64::new(f(r) / (r * r - 1.0), 0.0), 2.0, 12.0, &[], 1e-16, 1e-13);
        let oracle = sym.re + tail.re;
        assert!((pv - oracle).abs() < 1e-11, "{pv} vs {oracle}");
        // delta weights reproduce Ψ(r)/(2 m r^{2m-1})
        let dsum: f64 = g.nodes().iter().zip(&w.delta).map(|(&r, d)| d * f(r)).sum();
        assert!((dsum - f(1.0) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn epsilon_weights_approach_plemelj() {
        for m in [1u32, 2] {
            let lambda: f64 = 1.7;
            let r = lambda.powf(0.5 / m as f64);
            let g = RadialGrid::centred(r, 6.0, 0.3, 16).unwrap();
            let f = |t: f64| t * t * (-(t - 0.5) * (t - 0.5)).exp();
            let plem = apply(&plemelj_weights(&g, m, lambda).combined(1.0), &g, f);
            let eps = apply(&resolvent_weights(&g, m, Complex64::new(lambda, 1e-7)).unwrap(), &g, f);
            assert!((plem - eps).norm() < 1e-5 * plem.norm(), "m={m}: {plem} vs {eps}");
        }
    }

    #[test]
    fn off_axis_weights_match_direct_integral() {
        let g = RadialGrid::uniform(6.0, 0.5, 16).unwrap();
        let z = Complex64::new(-0.7, 0.2);
        let w = resolvent_weights(&g, 2, z).unwrap();
        let f = |t: f64| (-t * t).exp() * (1.0 + t);
        let got = apply(&w, &g, f);
        let (want, _) = crate::quadrature::adaptive(|t| f(t) / (Complex64::new(t.powi(4), 0.0) - z), 0.0, 6.0, &[], 1e-16, 1e-13);
        assert!((got - want).norm() < 1e-12);
        assert!(resolvent_weights(&g, 1, Complex64::new(1.0, 0.0)).is_err());
    }
}
