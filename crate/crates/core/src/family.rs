//! The versioned test family: Gaussians modulated near a reference shell
//! and translated, drawn from a seeded stream.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LapError, Result};
use crate::lattice::{sample, Field, GridSpec};

/// Bumped whenever the sampling rule changes.
pub const FAMILY_VERSION: &str = "gmt-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub count: usize,
    /// Base width; members draw from `[0.75, 1.25]` times it.
    pub sigma: f64,
    /// Reference modulation radius; members draw from `[0.8, 1.2]` times it.
    pub modulation: f64,
    /// Translations are drawn per axis from `[-translation, translation]`.
    pub translation: f64,
    pub seed: u64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self { count: 8, sigma: 1.5, modulation: 1.0, translation: 1.0, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub sigma: f64,
    pub frequency: Vec<f64>,
    pub centre: Vec<f64>,
}

impl Member {
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for a in 0..x.len() {
            r2 += (x[a] - self.centre[a]).powi(2);
            phase += self.frequency[a] * x[a];
        }
        Complex64::from_polar((-r2 / (2.0 * self.sigma * self.sigma)).exp(), phase)
    }

    pub fn field(&self, grid: &GridSpec) -> Result<Field> {
        if grid.dim() != self.centre.len() {
            return Err(LapError::InvalidParameter(format!(
                "member lives in d = {}, grid has d = {}",
                self.centre.len(),
                grid.dim()
            )));
        }
        sample(|x| self.eval(x), grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFamily {
    pub version: String,
    pub dim: usize,
    pub spec: FamilySpec,
    pub members: Vec<Member>,
}

fn unit_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

impl TestFamily {
    /// Member 0 is the centred, unmodulated Gaussian of width `sigma`.
    pub fn new(dim: usize, spec: FamilySpec) -> Result<Self> {
        if !(spec.sigma > 0.0) || spec.modulation < 0.0 || spec.translation < 0.0 {
            return Err(LapError::InvalidParameter("family needs sigma > 0 and non-negative modulation, translation".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut members = Vec::with_capacity(spec.count);
        for k in 0..spec.count {
            if k == 0 {
                members.push(Member { sigma: spec.sigma, frequency: vec![0.0; dim], centre: vec![0.0; dim] });
                continue;
            }
            let sigma = spec.sigma * rng.gen_range(0.75..1.25);
            let a = spec.modulation * rng.gen_range(0.8..1.2);
            let frequency = unit_direction(&mut rng, dim).into_iter().map(|c| a * c).collect();
            let centre = (0..dim)
                .map(|_| if spec.translation > 0.0 { rng.gen_range(-spec.translation..spec.translation) } else { 0.0 })
                .collect();
            members.push(Member { sigma, frequency, centre });
        }
        Ok(Self { version: FAMILY_VERSION.to_string(), dim, spec, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Samples every member; fails if one does not decay inside the box.
    pub fn fields(&self, grid: &GridSpec) -> Result<Vec<Field>> {
        self.members
            .iter()
            .map(|m| {
                let f = m.field(grid)?;
                if !f.is_decayed() {
                    return Err(LapError::InvalidParameter(format!(
                        "family member with centre {:?} and sigma {} does not decay inside the box (edge ratio {:e})",
                        m.centre,
                        m.sigma,
                        f.boundary_ratio()
                    )));
                }
                Ok(f)
            })
            .collect()
    }
}
