//! Surface quadrature on `{|ξ| = r}` and direct evaluation of the lattice
//! transform at arbitrary frequencies.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LapError, Result};
use crate::lattice::{Domain, Field};
use crate::quadrature::GaussLegendre;

/// Nodes and weights for the surface measure `dσ_r` on the sphere of
/// radius `r = λ^{1/2m}`, with the coarea factor `1/(2m r^{2m-1})` kept
/// separate or folded into the weights.
#[derive(Debug, Clone, Serialize)]
pub struct SphereQuadrature {
    pub dim: usize,
    pub radius: f64,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub coarea: f64,
    pub coarea_folded: bool,
}

impl SphereQuadrature {
    /// `angular` is the number of angles in `d = 2` and the number of polar
    /// Gauss–Legendre nodes in `d = 3` (with twice as many azimuths).
    pub fn new(dim: usize, lambda: f64, m: u32, angular: usize, fold_coarea: bool) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(LapError::InvalidParameter(format!("sphere needs lambda > 0, got {lambda}")));
        }
        if angular < 2 {
            return Err(LapError::InvalidParameter("sphere quadrature needs at least 2 angular nodes".into()));
        }
        let r = lambda.powf(1.0 / (2.0 * m as f64));
        let coarea = 1.0 / (2.0 * m as f64 * r.powi(2 * m as i32 - 1));
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        match dim {
            2 => {
                let n = angular;
                for j in 0..n {
                    let t = 2.0 * PI * j as f64 / n as f64;
                    nodes.push([r * t.cos(), r * t.sin(), 0.0]);
                    weights.push(2.0 * PI * r / n as f64);
                }
            }
            3 => {
                let gl = GaussLegendre::new(angular);
                let n_az = 2 * angular;
                for (&c, &w) in gl.nodes.iter().zip(&gl.weights) {
                    let s = (1.0 - c * c).sqrt();
                    for j in 0..n_az {
                        let phi = 2.0 * PI * j as f64 / n_az as f64;
                        nodes.push([r * s * phi.cos(), r * s * phi.sin(), r * c]);
                        weights.push(r * r * w * 2.0 * PI / n_az as f64);
                    }
                }
            }
            _ => return Err(LapError::InvalidParameter(format!("sphere quadrature implemented for d = 2, 3, got {dim}"))),
        }
        if fold_coarea {
            weights.iter_mut().for_each(|w| *w *= coarea);
        }
        Ok(Self { dim, radius: r, nodes, weights, coarea, coarea_folded: fold_coarea })
    }

    /// `∫ F dσ_r`, or `∫ F δ(P_m - λ) dξ` when the coarea factor is folded in.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> Complex64) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| f(&x[..self.dim]) * *w).sum()
    }
}

/// Direct evaluation of `h^d Σ f(x) e^{iξ·x}` at off-lattice frequencies,
/// restricted to the nodes where `f` is non-negligible.
#[derive(Debug, Clone)]
pub struct SpectralSampler {
    dim: usize,
    h: f64,
    cell: f64,
    runs: Vec<Run>,
}

#[derive(Debug, Clone)]
struct Run {
    start: [f64; 4],
    values: Vec<Complex64>,
}

impl SpectralSampler {
    pub fn new(f: &Field) -> Result<Self> {
        f.require(Domain::Physical)?;
        let grid = *f.grid();
        let n = grid.points();
        let cut = 1e-14 * f.max_abs();
        let mut runs = Vec::new();
        for row in 0..grid.len() / n {
            let vals = &f.values()[row * n..(row + 1) * n];
            let Some(first) = vals.iter().position(|v| v.norm() > cut) else { continue };
            let last = vals.iter().rposition(|v| v.norm() > cut).unwrap();
            runs.push(Run { start: grid.node(row * n + first), values: vals[first..=last].to_vec() });
        }
        Ok(Self { dim: grid.dim(), h: grid.spacing(), cell: grid.cell_volume(), runs })
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        let d = self.dim;
        let step = Complex64::from_polar(1.0, xi[d - 1] * self.h);
        let mut total = Complex64::new(0.0, 0.0);
        for run in &self.runs {
            let phase0: f64 = (0..d).map(|a| xi[a] * run.start[a]).sum();
            let mut ph = Complex64::from_polar(1.0, phase0);
            let mut acc = Complex64::new(0.0, 0.0);
            for v in &run.values {
                acc += v * ph;
                ph *= step;
            }
            total += acc;
        }
        total * self.cell
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{sample, GridSpec};

    #[test]
    fn weights_sum_to_area_and_nodes_lie_on_sphere() {
        for (d, area) in [(2usize, 2.0 * PI), (3, 4.0 * PI)] {
            let q = SphereQuadrature::new(d, 2.0, 1, 12, false).unwrap();
            let r = 2f64.sqrt();
            let s: f64 = q.weights.iter().sum();
            assert!((s - area * r.powi(d as i32 - 1)).abs() < 1e-12);
            for x in &q.nodes {
                let n = x[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((n - r).abs() < 1e-12);
            }
            let folded = SphereQuadrature::new(d, 2.0, 1, 12, true).unwrap();
            let sf: f64 = folded.weights.iter().sum();
            assert!((sf - s * q.coarea).abs() < 1e-12);
        }
    }

    #[test]
    fn polynomial_exactness_in_3d() {
        let q = SphereQuadrature::new(3, 1.0, 2, 8, false).unwrap();
        // ∫_{S²} z² dσ = 4π/3
        let v = q.integrate(|x| Complex64::new(x[2] * x[2], 0.0));
        assert!((v.re - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn sampler_matches_lattice_transform() {
        let g = GridSpec::new(2, 5.0, 32).unwrap();
        let f = sample(|x| Complex64::new(x[1], 1.0) * (-(x[0] * x[0] + x[1] * x[1])).exp(), &g).unwrap();
        let s = SpectralSampler::new(&f).unwrap();
        let spec = f.forward().unwrap();
        for k in [0usize, 5, 77, 300, 1000] {
            let xi = g.frequency(k);
            assert!((s.eval(&xi[..2]) - spec.values()[k]).norm() < 1e-12);
        }
    }
}
