//! The outgoing kernel `K_λ⁺` of the singular part, written over the
//! north-pole graph chart `ξ_d = φ_λ(ξ')` of the level set.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LapError, Result};
use crate::multiplier::{shell_radius, smooth_step, CutoffSpec};
use crate::quadrature::{adaptive, GaussLegendre};

/// Patch cutoff in `|ξ'|/r`: 1 up to this value...
pub const PATCH_INNER: f64 = 0.5;
/// ...and 0 from this value on.
pub const PATCH_OUTER: f64 = 0.8;

/// Smooth patch cutoff `η(t)` localising the chart near the north pole.
pub fn patch(t: f64) -> f64 {
    1.0 - smooth_step((t - PATCH_INNER) / (PATCH_OUTER - PATCH_INNER))
}

/// The graph `φ_λ(ξ')` and weight `Q_λ(ξ') = χ_λ / ∂_{ξ_d} P_m` at a point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GraphPoint {
    pub phi: f64,
    pub q: f64,
    pub chi: f64,
    pub patch: f64,
}

pub fn graph_and_weight(lambda: f64, m: u32, xi_prime: &[f64]) -> Result<GraphPoint> {
    let spec = CutoffSpec::new(lambda, m)?;
    let norm = xi_prime.iter().map(|v| v * v).sum::<f64>().sqrt();
    graph_at(&spec, norm)
}

fn graph_at(spec: &CutoffSpec, s: f64) -> Result<GraphPoint> {
    let r = shell_radius(spec.lambda, spec.m);
    if s >= r {
        return Err(LapError::OutsideChart { norm: s, radius: r });
    }
    let phi = (r * r - s * s).sqrt();
    let rho = (s * s + phi * phi).sqrt();
    let chi = spec.value(rho);
    let dpd = 2.0 * spec.m as f64 * rho.powi(2 * spec.m as i32 - 2) * phi;
    Ok(GraphPoint { phi, q: chi / dpd, chi, patch: patch(s / r) })
}

/// One evaluation of `K_λ⁺`.
#[derive(Debug, Clone, Serialize)]
pub struct KernelSample {
    pub x: Vec<f64>,
    pub value: Complex64,
    pub error: f64,
    pub flagged: bool,
    pub nodes: usize,
}

/// Radial profile `s -> Q_λ(s) η(s/r)` on `[0, PATCH_OUTER r]`.
fn weight(spec: &CutoffSpec, s: f64) -> (f64, f64) {
    let g = graph_at(spec, s).expect("inside the patch");
    (g.phi, g.q * g.patch)
}

/// `K_λ⁺(x) = (2π)^{1-d} i H(x_d) ∫ e^{i(x_d φ_λ(ξ') + x'·ξ')} Q_λ(ξ') η dξ'`
/// for `d ∈ {2, 3}`. The rotation invariance of the integrand reduces it to
/// one radial integral; composite Gauss–Legendre panels are doubled until
/// two successive values agree to `tol` relative.
pub fn kernel_k_plus(lambda: f64, m: u32, x: &[f64], tol: f64) -> Result<KernelSample> {
    let d = x.len();
    if !(d == 2 || d == 3) {
        return Err(LapError::InvalidParameter(format!("kernel implemented for d = 2, 3, got {d}")));
    }
    let spec = CutoffSpec::new(lambda, m)?;
    let xd = x[d - 1];
    if xd < 0.0 {
        return Ok(KernelSample { x: x.to_vec(), value: Complex64::new(0.0, 0.0), error: 0.0, flagged: false, nodes: 0 });
    }
    let xp = x[..d - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = shell_radius(lambda, m);
    let top = PATCH_OUTER * r;
    // d = 2: ∫_{-top}^{top} e^{i x_1 t} ...; d = 3: 2π ∫_0^{top} J0(s|x'|) s ...
    let (lo, ang_x) = if d == 2 { (-top, x[0]) } else { (0.0, xp) };
    let integrand = |s: f64| -> Complex64 {
        let (phi, w) = weight(&spec, s.abs());
        if d == 2 {
            Complex64::from_polar(w, xd * phi + ang_x * s)
        } else {
            Complex64::from_polar(w * s * 2.0 * PI * libm::j0(ang_x * s), xd * phi)
        }
    };
    let omega = 1.4 * xd + ang_x + 1.0;
    let order = 20;
    let gl = GaussLegendre::new(order);
    let mut panels = ((omega * (top - lo) / PI).ceil() as usize).max(4);
    let integrate = |panels: usize| -> Complex64 {
        let w = (top - lo) / panels as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..panels {
            let a = lo + k as f64 * w;
            for (s, wt) in gl.mapped(a, a + w) {
                acc += integrand(s) * wt;
            }
        }
        acc
    };
    let prefactor = Complex64::new(0.0, (2.0 * PI).powi(1 - d as i32));
    let mut prev = integrate(panels);
    let budget = 1 << 16;
    loop {
        panels *= 2;
        let cur = integrate(panels);
        let err = (cur - prev).norm();
        let done = err <= tol * cur.norm().max(1e-300);
        if done || panels * order >= budget {
            return Ok(KernelSample {
                x: x.to_vec(),
                value: prefactor * cur,
                error: err * prefactor.norm(),
                flagged: !done,
                nodes: panels * order,
            });
        }
        prev = cur;
    }
}

/// `K_λ⁺(0)` by adaptive quadrature of the non-oscillatory integrand.
pub fn kernel_at_origin_oracle(lambda: f64, m: u32, d: usize) -> Result<Complex64> {
    let spec = CutoffSpec::new(lambda, m)?;
    let r = shell_radius(lambda, m);
    let top = PATCH_OUTER * r;
    let (v, _) = adaptive(
        |s| {
            let (_, w) = weight(&spec, s);
            let jac = if d == 2 { 2.0 } else { 2.0 * PI * s };
            Complex64::new(w * jac, 0.0)
        },
        0.0,
        top,
        &[PATCH_INNER * r],
        1e-16,
        1e-13,
    );
    Ok(Complex64::new(0.0, (2.0 * PI).powi(1 - d as i32)) * v)
}

/// One row of a decay scan.
#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub direction_deg: f64,
    pub radius: f64,
    pub x: Vec<f64>,
    pub abs_k: f64,
    pub normalized: f64,
    pub error: f64,
    pub flagged: bool,
}

/// `|K_λ⁺(x)|(1+|x|)^{(d-1)/2}` along rays.
#[derive(Debug, Clone, Serialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Largest normalized value: the empirical decay constant.
    pub max_normalized: f64,
    pub median_normalized: f64,
    /// `max/median` and `median/min` of the normalized column.
    pub band: (f64, f64),
}

/// Point at distance `radius` along the ray tilted by `deg` from the `x_d` axis.
pub fn ray_point(d: usize, deg: f64, radius: f64) -> Vec<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    let mut x = vec![0.0; d];
    x[0] = radius * s;
    x[d - 1] = radius * c;
    x
}

pub fn decay_scan(lambda: f64, m: u32, d: usize, radii: &[f64], directions_deg: &[f64], tol: f64) -> Result<DecayTable> {
    let jobs: Vec<(f64, f64)> = directions_deg.iter().flat_map(|&a| radii.iter().map(move |&r| (a, r))).collect();
    let rows: Result<Vec<DecayRow>> = jobs
        .par_iter()
        .map(|&(deg, radius)| {
            let x = ray_point(d, deg, radius);
            let s = kernel_k_plus(lambda, m, &x, tol)?;
            let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let abs_k = s.value.norm();
            Ok(DecayRow {
                direction_deg: deg,
                radius,
                x,
                abs_k,
                normalized: abs_k * (1.0 + norm_x).powf((d as f64 - 1.0) / 2.0),
                error: s.error,
                flagged: s.flagged,
            })
        })
        .collect();
    let rows = rows?;
    let mut col: Vec<f64> = rows.iter().map(|r| r.normalized).collect();
    col.sort_by(|a, b| a.total_cmp(b));
    let (max, median, band) = if col.is_empty() {
        (0.0, 0.0, (1.0, 1.0))
    } else {
        let median = if col.len() % 2 == 1 {
            col[col.len() / 2]
        } else {
            0.5 * (col[col.len() / 2 - 1] + col[col.len() / 2])
        };
        let max = *col.last().unwrap();
        let min = col[0];
        (max, median, (max / median, if min > 0.0 { median / min } else { f64::INFINITY }))
    };
    Ok(DecayTable { rows, max_normalized: max, median_normalized: median, band })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_examples() {
        let g = graph_and_weight(1.0, 1, &[0.6]).unwrap();
        assert!((g.phi - 0.8).abs() < 1e-15);
        let pole = graph_and_weight(2.0, 2, &[0.0, 0.0]).unwrap();
        let r = 2f64.powf(0.25);
        assert!((pole.phi - r).abs() < 1e-15);
        assert!((pole.q - 1.0 / (4.0 * r.powi(3))).abs() < 1e-15);
        assert!(matches!(graph_and_weight(1.0, 1, &[1.0]), Err(LapError::OutsideChart { .. })));
        for m in [1u32, 2] {
            for s in [0.0, 0.1, 0.4, 0.7] {
                let g = graph_and_weight(1.3, m, &[s, 0.2]).unwrap();
                let level = (s * s + 0.04 + g.phi * g.phi).powi(m as i32);
                assert!((level - 1.3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_vanishes_below_the_hyperplane() {
        let s = kernel_k_plus(1.0, 1, &[0.3, -1.0], 1e-8).unwrap();
        assert_eq!(s.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn kernel_at_origin_matches_oracle() {
        for d in [2usize, 3] {
            for m in [1u32, 2] {
                let x = vec![0.0; d];
                let k = kernel_k_plus(1.0, m, &x, 1e-12).unwrap();
                let o = kernel_at_origin_oracle(1.0, m, d).unwrap();
                assert!((k.value - o).norm() < 1e-8 * o.norm(), "d={d} m={m}");
            }
        }
    }

    #[test]
    fn three_dimensional_kernel_matches_helmholtz_far_field() {
        // m = 1, λ = 1: along the axis K ~ e^{i|x|}/(4π|x|).
        let k = kernel_k_plus(1.0, 1, &[0.0, 0.0, 200.0], 1e-10).unwrap();
        let want = 1.0 / (4.0 * PI * 200.0);
        assert!((k.value.norm() - want).abs() < 0.02 * want, "{} vs {want}", k.value.norm());
    }

    #[test]
    fn empty_scan() {
        let t = decay_scan(1.0, 1, 2, &[], &[0.0], 1e-8).unwrap();
        assert!(t.rows.is_empty());
        let one = decay_scan(1.0, 1, 2, &[0.0], &[0.0], 1e-10).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert!((one.rows[0].normalized - one.rows[0].abs_k).abs() < 1e-15);
    }
}
