//! One-dimensional quadrature building blocks.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use num_complex::Complex64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

thread_local! {
    static GL_CACHE: RefCell<HashMap<usize, Rc<GaussLegendre>>> = RefCell::new(HashMap::new());
}

impl GaussLegendre {
    pub fn new(n: usize) -> Rc<GaussLegendre> {
        GL_CACHE.with(|c| {
            c.borrow_mut().entry(n).or_insert_with(|| Rc::new(Self::compute(n))).clone()
        })
    }

    fn compute(n: usize) -> GaussLegendre {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&t, &w)| (mid + half * t, half * w))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: Vec<Complex64>,
    error: f64,
}

fn gk15<F: FnMut(f64, &mut [Complex64])>(f: &mut F, dim: usize, a: f64, b: f64, buf: &mut [Complex64]) -> Segment {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let zero = Complex64::new(0.0, 0.0);
    let mut kron = vec![zero; dim];
    let mut gauss = vec![zero; dim];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &s in pts {
            f(mid + s * half * x, buf);
            for c in 0..dim {
                kron[c] += buf[c] * wk;
                if j % 2 == 1 {
                    gauss[c] += buf[c] * WG[j / 2];
                }
            }
        }
    }
    let mut error: f64 = 0.0;
    for c in 0..dim {
        kron[c] *= half;
        gauss[c] *= half;
        error = error.max((kron[c] - gauss[c]).norm());
    }
    Segment { a, b, value: kron, error }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Adaptive {
    pub value: Vec<Complex64>,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod (7/15) for a vector of complex integrands.
/// `f(x, out)` writes all `dim` components at `x`. `breaks` are interior
/// points where the integrand is known to be rough.
pub fn adaptive_vec<F: FnMut(f64, &mut [Complex64])>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Adaptive {
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut segs: Vec<Segment> =
        cuts.windows(2).map(|w| gk15(&mut f, dim, w[0], w[1], &mut buf)).collect();
    loop {
        let mut total = vec![Complex64::new(0.0, 0.0); dim];
        let mut err = 0.0;
        for s in &segs {
            for c in 0..dim {
                total[c] += s.value[c];
            }
            err += s.error;
        }
        let scale = total.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let target = abs_tol.max(rel_tol * scale);
        if err <= target || segs.len() >= max_segments {
            return Adaptive { value: total, error: err, converged: err <= target };
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .unwrap();
        let s = segs.swap_remove(worst);
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            segs.push(s);
            let mut total = vec![Complex64::new(0.0, 0.0); dim];
            for s in &segs {
                for c in 0..dim {
                    total[c] += s.value[c];
                }
            }
            return Adaptive { value: total, error: err, converged: false };
        }
        segs.push(gk15(&mut f, dim, s.a, m, &mut buf));
        segs.push(gk15(&mut f, dim, m, s.b, &mut buf));
    }
}

/// Scalar convenience wrapper around [`adaptive_vec`].
pub fn adaptive<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> (Complex64, f64) {
    let r = adaptive_vec(|x, out| out[0] = f(x), 1, a, b, breaks, abs_tol, rel_tol, 4000);
    (r.value[0], r.error)
}

/// Chebyshev points of the first kind on `[-1, 1]` with barycentric weights.
#[derive(Debug, Clone)]
pub struct ChebyshevBasis {
    pub nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl ChebyshevBasis {
    pub fn new(p: usize) -> Self {
        let nodes = (0..p).map(|j| -((2 * j + 1) as f64 * PI / (2 * p) as f64).cos()).collect();
        let bary = (0..p)
            .map(|j| {
                let s = ((2 * j + 1) as f64 * PI / (2 * p) as f64).sin();
                if j % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect();
        Self { nodes, bary }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// All Lagrange basis polynomials at `t ∈ [-1, 1]`.
    pub fn lagrange(&self, t: f64, out: &mut [f64]) {
        for (j, &tj) in self.nodes.iter().enumerate() {
            if t == tj {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[j] = 1.0;
                return;
            }
        }
        let mut denom = 0.0;
        for (j, &tj) in self.nodes.iter().enumerate() {
            let q = self.bary[j] / (t - tj);
            out[j] = q;
            denom += q;
        }
        out.iter_mut().for_each(|v| *v /= denom);
    }
}

/// Neville–Richardson table for values sampled at `ε_k = ε_0 ρ^k`,
/// extrapolating the polynomial-in-ε model to `ε = 0`.
#[derive(Debug, Clone)]
pub struct Richardson {
    pub value: Vec<Complex64>,
    /// Max-norm difference between the last two diagonal entries.
    pub spread: f64,
    /// Max-norm size of the extrapolated vector.
    pub scale: f64,
}

pub fn richardson(samples: &[Vec<Complex64>], ratio: f64, max_order: usize) -> Richardson {
    assert!(!samples.is_empty());
    let dim = samples[0].len();
    let mut table: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(samples.len());
    for (k, s) in samples.iter().enumerate() {
        let mut row = vec![s.clone()];
        for j in 1..=k.min(max_order) {
            let factor = ratio.powi(-(j as i32)) - 1.0;
            let prev_row = &table[k - 1];
            let cur = &row[j - 1];
            let old = &prev_row[j - 1];
            let next: Vec<Complex64> = (0..dim).map(|c| cur[c] + (cur[c] - old[c]) / factor).collect();
            row.push(next);
        }
        table.push(row);
    }
    let last = table.last().unwrap();
    let best = last.last().unwrap().clone();
    let spread = if table.len() >= 2 {
        let prev = table[table.len() - 2].last().unwrap();
        best.iter().zip(prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let scale = best.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Richardson { value: best, spread, scale }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 33] {
            let gl = GaussLegendre::new(n);
            let sum: f64 = gl.weights.iter().sum();
            assert!((sum - 2.0).abs() < 1e-13, "n={n}");
            // exact through degree 2n-1
            let deg = 2 * n - 1;
            let approx: f64 = gl.nodes.iter().zip(&gl.weights).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((approx - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        // ∫_{-1}^{1} ε/(x²+ε²) dx = 2 atan(1/ε)
        let eps = 1e-4;
        let (v, _) = adaptive(|x| Complex64::new(eps / (x * x + eps * eps), 0.0), -1.0, 1.0, &[], 1e-12, 1e-12);
        assert!((v.re - 2.0 * (1.0 / eps).atan()).abs() < 1e-9);
    }

    #[test]
    fn chebyshev_basis_partitions_unity() {
        let b = ChebyshevBasis::new(12);
        let mut l = vec![0.0; 12];
        for t in [-1.0, -0.3, 0.0, 0.77, 1.0] {
            b.lagrange(t, &mut l);
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn richardson_recovers_polynomial_limit() {
        let f = |e: f64| vec![Complex64::new(3.0 + 2.0 * e - 5.0 * e * e + e.powi(3), e)];
        let samples: Vec<_> = (0..5).map(|k| f(0.1 * 0.5f64.powi(k))).collect();
        let r = richardson(&samples, 0.5, 8);
        assert!((r.value[0] - Complex64::new(3.0, 0.0)).norm() < 1e-13);
    }
}
