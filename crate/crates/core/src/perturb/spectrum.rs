//! Eigenvalue candidates from the smallest singular value of the
//! Birman–Schwinger matrix, and a direct Lanczos oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::Potential;
use crate::boundary::{BoundaryContext, Sign};
use crate::error::{LapError, Result};
use crate::lattice::{Domain, Field, GridSpec};
use crate::multiplier::{apply_symbol, free_resolvent, polyharmonic};

#[derive(Debug, Clone, Serialize)]
pub struct ScanConfig {
    pub m: u32,
    pub interval: (f64, f64),
    pub eps_probe: f64,
    pub steps: usize,
    pub sign: Sign,
    /// Local minima of `σ_min` below this value are candidates.
    pub threshold: f64,
}

impl ScanConfig {
    pub fn new(m: u32, interval: (f64, f64), eps_probe: f64, steps: usize) -> Self {
        Self { m, interval, eps_probe, steps, sign: Sign::Plus, threshold: 0.1 }
    }

    pub fn step(&self) -> f64 {
        (self.interval.1 - self.interval.0) / self.steps as f64
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.interval;
        if !(a < b) || (a <= 0.0 && b >= 0.0) {
            return Err(LapError::InvalidParameter(format!("scan interval [{a}, {b}] must be ordered and avoid 0")));
        }
        if !(self.eps_probe > 0.0) || self.steps < 2 {
            return Err(LapError::InvalidParameter("scan needs eps_probe > 0 and at least 2 steps".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    /// Refined location.
    pub lambda: f64,
    /// `σ_min` at the refined location.
    pub depth: f64,
    /// The scan node where the dip was detected.
    pub grid_lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenScan {
    pub candidates: Vec<Candidate>,
    /// `(λ, σ_min)` on the scan grid.
    pub profile: Vec<(f64, f64)>,
    pub step: f64,
    pub eps_probe: f64,
    pub sign: Sign,
    pub support_size: usize,
    pub warnings: Vec<String>,
}

/// Largest support handled by the dense scan.
pub const MAX_SCAN_SUPPORT: usize = 4000;

/// Green's function of the free resolvent, evaluated at lattice offsets.
enum Green {
    /// Periodic lattice values indexed like the grid, centred at the origin node.
    Lattice(Field),
    /// Continuum kernel table over `q = |Δ|²/h²`.
    Continuum(Vec<Complex64>),
}

struct BsMatrix<'a> {
    grid: GridSpec,
    v: &'a Potential,
    idx: Vec<[usize; 4]>,
    ctx: Option<&'a BoundaryContext>,
}

impl<'a> BsMatrix<'a> {
    fn green(&self, z: Complex64, m: u32) -> Result<Green> {
        if z.re < 0.0 {
            let mut delta = Field::zeros(self.grid, Domain::Physical).into_values();
            delta[self.grid.origin()] = Complex64::new(1.0 / self.grid.cell_volume(), 0.0);
            let delta = Field::from_values(self.grid, Domain::Physical, delta)?;
            Ok(Green::Lattice(free_resolvent(z, m, &delta)?))
        } else {
            let ctx = self
                .ctx
                .ok_or_else(|| LapError::InvalidParameter("positive-axis scans need a boundary context".into()))?;
            Ok(Green::Continuum(ctx.resolvent_kernel_table(z, m, self.grid.nyquist())?))
        }
    }

    fn sigma_min(&self, z: Complex64, m: u32) -> Result<f64> {
        let g = self.green(z, m)?;
        let n = self.grid.points();
        let d = self.grid.dim();
        let half = n / 2;
        let cell = self.grid.cell_volume();
        let s = self.v.support();
        let amp: Vec<f64> = s.iter().map(|&k| self.v.value(k).abs().sqrt()).collect();
        let sgn: Vec<f64> = s.iter().map(|&k| self.v.value(k).signum()).collect();
        let lookup = |i: usize, j: usize| -> Complex64 {
            let (a, b) = (&self.idx[i], &self.idx[j]);
            match &g {
                Green::Lattice(f) => {
                    let mut flat = 0;
                    for ax in 0..d {
                        let o = (a[ax] + n + half - b[ax]) % n;
                        flat = flat * n + o;
                    }
                    f.values()[flat]
                }
                Green::Continuum(t) => {
                    let q: usize = (0..d).map(|ax| (a[ax] as i64 - b[ax] as i64).pow(2) as usize).sum();
                    let ctx = self.ctx.unwrap();
                    t[ctx.lattice().slot_of(q as u32).expect("offset inside the padded lattice")]
                }
            }
        };
        let len = s.len();
        let mat = DMatrix::from_fn(len, len, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) + lookup(i, j) * (amp[i] * amp[j] * sgn[j] * cell)
        });
        Ok(mat.singular_values().iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// Scans `σ_min(I + |V|^{1/2} R_0(λ ± iε_probe) V^{1/2})` over the
/// interval, with `V^{1/2} = sgn(V)|V|^{1/2}`. On the negative axis the
/// lattice resolvent is used (the operator of [`lanczos_lowest`]); on the
/// positive axis the continuum kernel restricted to `|ξ| ≤` Nyquist.
pub fn eigen_scan(ctx: Option<&BoundaryContext>, v: &Potential, cfg: &ScanConfig) -> Result<EigenScan> {
    cfg.validate()?;
    let grid = *v.grid();
    let s = v.support();
    if s.len() > MAX_SCAN_SUPPORT {
        return Err(LapError::InvalidParameter(format!(
            "support of {} nodes exceeds the dense scan limit {MAX_SCAN_SUPPORT}",
            s.len()
        )));
    }
    let mut warnings = Vec::new();
    if !s.is_empty() && s.len() < 8 {
        warnings.push(format!("support holds {} nodes; dips may be unresolved", s.len()));
    }
    let bs = BsMatrix { grid, v, idx: s.iter().map(|&k| grid.multi_index(k)).collect(), ctx };
    let step = cfg.step();
    let lambdas: Vec<f64> = (0..=cfg.steps).map(|k| cfg.interval.0 + step * k as f64).collect();
    let z_of = |l: f64| Complex64::new(l, cfg.sign.value() * cfg.eps_probe);
    let sigma = |l: f64| -> Result<f64> {
        if s.is_empty() {
            Ok(1.0)
        } else {
            bs.sigma_min(z_of(l), cfg.m)
        }
    };
    let profile: Vec<(f64, f64)> =
        lambdas.par_iter().map(|&l| Ok((l, sigma(l)?))).collect::<Result<Vec<_>>>()?;
    let mut candidates = Vec::new();
    for k in 1..profile.len() - 1 {
        let (l, v0) = profile[k];
        if v0 < cfg.threshold && v0 < profile[k - 1].1 && v0 <= profile[k + 1].1 {
            let (lam, depth) = golden_min(&sigma, profile[k - 1].0, profile[k + 1].0, 1e-10 * (1.0 + l.abs()))?;
            candidates.push(Candidate { lambda: lam, depth, grid_lambda: l });
        }
    }
    Ok(EigenScan { candidates, profile, step, eps_probe: cfg.eps_probe, sign: cfg.sign, support_size: s.len(), warnings })
}

fn golden_min(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Whether two scans report the same candidates within `tol`.
pub fn candidates_match(a: &EigenScan, b: &EigenScan, tol: f64) -> bool {
    a.candidates.len() == b.candidates.len()
        && a.candidates.iter().zip(&b.candidates).all(|(x, y)| (x.lambda - y.lambda).abs() <= tol)
}

fn apply_h(v: &Potential, m: u32, u: &Field) -> Result<Field> {
    apply_symbol(&polyharmonic(m), u)?.add(&v.multiply(u)?)
}

/// Lowest eigenpair of the lattice operator `P_m(D) + V`.
#[derive(Debug, Clone, Serialize)]
pub struct RitzPair {
    pub value: f64,
    #[serde(skip)]
    pub vector: Field,
    /// `‖H x - θ x‖` for the unit-norm Ritz vector.
    pub residual: f64,
    pub iterations: usize,
}

/// Lanczos with full reorthogonalisation, started from a centred Gaussian.
pub fn lanczos_lowest(v: &Potential, m: u32, max_iter: usize, tol: f64) -> Result<RitzPair> {
    let grid = *v.grid();
    let start = crate::lattice::sample_real(|x| (-x.iter().map(|c| c * c).sum::<f64>()).exp(), &grid)?;
    let nrm = |f: &[f64]| f.iter().map(|c| c * c).sum::<f64>().sqrt();
    let to_field = |x: &[f64]| -> Field {
        Field::from_values(grid, Domain::Physical, x.iter().map(|&c| Complex64::new(c, 0.0)).collect()).unwrap()
    };
    let mut q0: Vec<f64> = start.values().iter().map(|c| c.re).collect();
    let n0 = nrm(&q0);
    q0.iter_mut().for_each(|c| *c /= n0);
    let mut basis = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best = None;
    for it in 0..max_iter {
        let hq = apply_h(v, m, &to_field(&basis[it]))?;
        let mut w: Vec<f64> = hq.values().iter().map(|c| c.re).collect();
        let a: f64 = w.iter().zip(&basis[it]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = nrm(&w);
        let k = alpha.len();
        if k.is_multiple_of(5) || b < 1e-14 || it + 1 == max_iter {
            let t = DMatrix::from_fn(k, k, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (imin, &theta) =
                eig.eigenvalues.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).unwrap();
            // Lanczos residual estimate |β_k y_k|.
            let est = (b * eig.eigenvectors[(k - 1, imin)]).abs();
            if est <= tol * theta.abs().max(1.0) || b < 1e-14 || it + 1 == max_iter {
                let mut x = vec![0.0; grid.len()];
                for (j, q) in basis.iter().enumerate().take(k) {
                    let c = eig.eigenvectors[(j, imin)];
                    x.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
                }
                let xf = to_field(&x);
                let hx = apply_h(v, m, &xf)?;
                let res = hx.values().iter().zip(xf.values()).map(|(h, u)| (h - u * theta).norm_sqr()).sum::<f64>().sqrt();
                best = Some(RitzPair { value: theta, vector: xf, residual: res, iterations: k });
                break;
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|c| c / b).collect());
    }
    best.ok_or_else(|| LapError::InvalidParameter("lanczos produced no Ritz pair".into()))
}

/// Largest `|⟨Hφ, ψ⟩ - ⟨φ, Hψ⟩| / (‖Hφ‖‖ψ‖ + ‖φ‖‖Hψ‖)` over the pairs.
pub fn symmetry_defect(v: &Potential, m: u32, fields: &[Field]) -> Result<f64> {
    let hs: Vec<Field> = fields.iter().map(|f| apply_h(v, m, f)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..fields.len() {
        for j in 0..fields.len() {
            let a = hs[i].inner(&fields[j])?;
            let b = fields[i].inner(&hs[j])?;
            let scale = hs[i].l2_norm() * fields[j].l2_norm() + fields[i].l2_norm() * hs[j].l2_norm();
            if scale > 0.0 {
                worst = worst.max((a - b).norm() / scale);
            }
        }
    }
    Ok(worst)
}

/// `(R, R^{-1} ∫_{|x| ≤ R} |u|²)` for each radius.
pub fn rellich_profile(u: &Field, radii: &[f64]) -> Vec<(f64, f64)> {
    let g = u.grid();
    radii
        .iter()
        .map(|&r| {
            let s: f64 = u
                .values()
                .iter()
                .enumerate()
                .filter(|(k, _)| g.node_norm(*k) <= r)
                .map(|(_, v)| v.norm_sqr())
                .sum();
            (r, s * g.cell_volume() / r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_scan_has_no_candidates() {
        let g = GridSpec::new(2, 4.0, 16).unwrap();
        let s = eigen_scan(None, &Potential::zero(&g), &ScanConfig::new(1, (-2.0, -0.1), 1e-3, 20)).unwrap();
        assert!(s.candidates.is_empty());
        assert!(s.profile.iter().all(|p| p.1 == 1.0));
    }

    #[test]
    fn interval_must_avoid_zero() {
        let g = GridSpec::new(2, 4.0, 16).unwrap();
        assert!(eigen_scan(None, &Potential::zero(&g), &ScanConfig::new(1, (-1.0, 1.0), 1e-3, 20)).is_err());
    }

    #[test]
    fn lanczos_free_ground_state_is_zero_mode() {
        let g = GridSpec::new(2, 4.0, 16).unwrap();
        let r = lanczos_lowest(&Potential::square_well(&g, 0.0, 1.0).unwrap(), 1, 60, 1e-10).unwrap();
        assert!(r.value.abs() < 1e-8);
    }
}
