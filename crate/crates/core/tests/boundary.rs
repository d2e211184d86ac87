use std::f64::consts::PI;
use std::sync::Arc;

use lap_core::boundary::{
    decay_scan, mu_support_ratio, spectral_reach, Backend, BoundaryContext, BoundarySpec, Sign, SpectralSampler,
};
use lap_core::family::{FamilySpec, TestFamily};
use lap_core::lattice::{forward_transform, sample};
use lap_core::multiplier::{CutoffSpec, RadialFn};
use lap_core::quadrature::richardson;
use lap_core::spaces::{b_norm, bstar_norm, WeightParams};
use lap_core::{Field, GridSpec};
use num_complex::Complex64;

fn grid2() -> GridSpec {
    GridSpec::new(2, 16.0, 64).unwrap()
}

fn family(grid: &GridSpec, sigma: f64, count: usize) -> Vec<Field> {
    let spec = FamilySpec { count, sigma, ..FamilySpec::default() };
    TestFamily::new(grid.dim(), spec).unwrap().fields(grid).unwrap()
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn plemelj_matches_independent_epsilon_limit() {
    for (grid, sigma) in [(grid2(), 1.5), (GridSpec::new(3, 8.0, 32).unwrap(), 0.8)] {
        let ctx = BoundaryContext::new(&grid).unwrap();
        let fam = family(&grid, sigma, 4);
        for m in [1, 2] {
            for lambda in [0.5, 1.0, 2.0] {
                for (i, j) in [(0, 0), (1, 2), (3, 1)] {
                    let spec = BoundarySpec::new(lambda, m, Sign::Plus);
                    let p = ctx.pairing(&fam[i], &fam[j], &spec).unwrap();
                    // Richardson over ⟨R_0(λ + iε) f, g⟩ computed off the axis
                    let eps: Vec<f64> = (0..8).map(|k| 0.1 * 0.5f64.powi(k)).collect();
                    let samples: Vec<Vec<Complex64>> = eps
                        .iter()
                        .map(|&e| vec![ctx.resolvent_pairing(&fam[i], &fam[j], Complex64::new(lambda, e), m).unwrap()])
                        .collect();
                    let limit = richardson(&samples, 0.5, samples.len() - 1).value[0];
                    let err = rel(p.value, limit);
                    assert!(err < 1e-4, "d={} m={m} λ={lambda} ({i},{j}): {err:e}", grid.dim());
                }
            }
        }
    }
}

#[test]
fn surface_term_matches_circle_quadrature() {
    let grid = grid2();
    let f = family(&grid, 1.5, 1).remove(0);
    let spec = BoundarySpec::new(1.0, 1, Sign::Plus);
    let p = BoundaryContext::new(&grid).unwrap().pairing(&f, &f, &spec).unwrap();
    let sampler = SpectralSampler::new(&f).unwrap();
    let n = 512;
    let r = 1.0;
    let circle: f64 = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            sampler.eval(&[r * t.cos(), r * t.sin()]).norm_sqr()
        })
        .sum::<f64>()
        * 2.0
        * PI
        * r
        / n as f64;
    let want = PI * (2.0 * PI).powi(-2) * circle / (2.0 * r);
    assert!((p.value.im - want).abs() < 1e-6 * want, "{} vs {want}", p.value.im);
    assert!((p.surface.unwrap().im - want).abs() < 1e-6 * want);
}

#[test]
fn imaginary_part_is_nonnegative() {
    let grid = grid2();
    let ctx = BoundaryContext::new(&grid).unwrap();
    for f in family(&grid, 1.5, 8) {
        for lambda in [0.5, 1.0, 2.0] {
            for m in [1, 2] {
                let p = ctx.pairing(&f, &f, &BoundarySpec::new(lambda, m, Sign::Plus)).unwrap();
                assert!(p.value.im >= -1e-10);
                let q = ctx.pairing(&f, &f, &BoundarySpec::new(lambda, m, Sign::Minus)).unwrap();
                assert!(q.value.im <= 1e-10);
            }
        }
    }
}

#[test]
fn off_shell_spectrum_gives_plain_integral() {
    let grid = grid2();
    let f = sample(|x| Complex64::from_polar((-(x[0] * x[0] + x[1] * x[1]) / 8.0).exp(), 4.0 * x[0]), &grid).unwrap();
    let g = sample(|x| Complex64::from_polar((-(x[0] * x[0] + x[1] * x[1]) / 8.0).exp(), 4.0 * x[0] + 0.3 * x[1]), &grid).unwrap();
    let spec = BoundarySpec::new(1.0, 1, Sign::Plus);
    let p = BoundaryContext::new(&grid).unwrap().pairing(&f, &g, &spec).unwrap();
    let (fh, gh) = (forward_transform(&f).unwrap(), forward_transform(&g).unwrap());
    let plain: Complex64 = (0..grid.len())
        .map(|k| fh.values()[k] * gh.values()[k].conj() / (grid.frequency_norm(k).powi(2) - 1.0))
        .sum::<Complex64>()
        * grid.freq_cell_volume()
        * (2.0 * PI).powi(-2);
    assert!(p.surface.unwrap().norm() < 1e-9 * plain.norm());
    assert!(rel(p.principal.unwrap(), plain) < 1e-9, "{:e}", rel(p.principal.unwrap(), plain));
}

#[test]
fn backends_agree_on_family() {
    let grid = grid2();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let fam = family(&grid, 1.5, 6);
    for m in [1, 2] {
        for lambda in [0.5, 1.0, 2.0] {
            for i in 0..fam.len() {
                let j = (i + 1) % fam.len();
                let spec = BoundarySpec::new(lambda, m, Sign::Plus);
                let a = ctx.pairing(&fam[i], &fam[j], &spec).unwrap();
                let b = ctx.pairing(&fam[i], &fam[j], &spec.clone().with_backend(Backend::EpsilonLimit)).unwrap();
                assert!(rel(a.value, b.value) < 1e-4);
            }
        }
    }
}

#[test]
fn apply_solves_defining_relation() {
    let grid = grid2();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let fam = family(&grid, 1.5, 3);
    for m in [1, 2] {
        for f in &fam {
            let out = ctx.boundary_apply(f, &BoundarySpec::new(1.0, m, Sign::Plus)).unwrap();
            assert!(out.residual <= 1e-6, "m={m}: {:e}", out.residual);
            assert!(!out.flagged, "disagreement {:?}", out.disagreement);
        }
    }
}

#[test]
fn sign_swap_is_conjugation() {
    let grid = grid2();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let f = family(&grid, 1.5, 1).remove(0);
    let plus = ctx.boundary_apply(&f, &BoundarySpec::new(1.0, 1, Sign::Plus)).unwrap().u;
    let minus = ctx.boundary_apply(&f.conj(), &BoundarySpec::new(1.0, 1, Sign::Minus)).unwrap().u;
    assert!(minus.rel_max_diff(&plus.conj()).unwrap() < 1e-8);
}

#[test]
fn pairing_is_half_holder_in_lambda() {
    let grid = grid2();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let fam = family(&grid, 1.5, 2);
    let lambdas: Vec<f64> = (0..=40).map(|k| 0.8 + 0.01 * k as f64).collect();
    let vals: Vec<Complex64> = lambdas
        .iter()
        .map(|&l| ctx.pairing(&fam[0], &fam[1], &BoundarySpec::new(l, 1, Sign::Plus)).unwrap().value)
        .collect();
    let quotient = |step: usize| -> f64 {
        (0..vals.len() - step)
            .map(|k| (vals[k + step] - vals[k]).norm() / (lambdas[k + step] - lambdas[k]).sqrt())
            .fold(0.0, f64::max)
    };
    let (c1, c2, c4) = (quotient(1), quotient(2), quotient(4));
    assert!(c1.is_finite() && c1 <= 2.0 * c2.max(c4) && c2 <= 2.0 * c4.max(c1));
}

fn shell_bump(grid: &GridSpec, radius: f64, freq: f64) -> Field {
    sample(
        |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            Complex64::from_polar((-(r - radius).powi(2) / 0.5).exp(), freq * x[0])
        },
        grid,
    )
    .unwrap()
}

#[test]
fn singular_part_maps_b_to_bstar_uniformly() {
    let grid = GridSpec::new(2, 32.0, 128).unwrap();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let fields: Vec<Field> = [1.5, 3.0, 6.0, 12.0]
        .iter()
        .flat_map(|&r| [0.8, 1.0, 1.3].map(|k| shell_bump(&grid, r, k)))
        .collect();
    let refs: Vec<&Field> = fields.iter().collect();
    let reach = spectral_reach(&refs).unwrap();
    let mut consts = Vec::new();
    for lambda in [0.5, 1.0, 2.0] {
        let cut = CutoffSpec::new(lambda, 1).unwrap();
        let chi: RadialFn = Arc::new(move |r| Complex64::new(cut.value(r), 0.0));
        let spec = BoundarySpec::new(lambda, 1, Sign::Plus).with_delta(0.5);
        let op = ctx.boundary_operator(&spec, Backend::Plemelj, &[chi], reach).unwrap();
        let c = fields
            .iter()
            .map(|f| bstar_norm(&ctx.apply_outputs(&op, f, &[0]).unwrap()[0]).unwrap() / b_norm(f).unwrap())
            .fold(0.0, f64::max);
        consts.push(c);
    }
    let (lo, hi) = consts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    assert!(hi / lo <= 2.0, "{consts:?}");
}

#[test]
fn kernel_decays_along_the_axis() {
    for (d, m) in [(2, 1), (3, 1), (2, 2)] {
        let tab = decay_scan(1.0, m, d, &[5.0, 10.0, 20.0, 40.0], &[0.0], 1e-8).unwrap();
        assert!(tab.rows.windows(2).all(|w| w[1].abs_k < w[0].abs_k), "d={d} m={m}");
        assert!(tab.rows.iter().all(|r| !r.flagged));
        assert!(tab.band.0 <= 3.0 && tab.band.1 <= 3.0, "d={d} m={m}: {:?}", tab.band);
    }
}

#[test]
fn decay_scan_edge_cases() {
    let empty = decay_scan(1.0, 1, 2, &[], &[0.0, 15.0], 1e-8).unwrap();
    assert!(empty.rows.is_empty());
    let origin = decay_scan(1.0, 1, 3, &[0.0], &[0.0], 1e-10).unwrap();
    assert_eq!(origin.rows.len(), 1);
    assert_eq!(origin.rows[0].normalized, origin.rows[0].abs_k);
    let below = decay_scan(1.0, 1, 2, &[3.0], &[180.0], 1e-8).unwrap();
    assert_eq!(below.rows[0].abs_k, 0.0);
}

#[test]
fn weight_ratio_on_kernel_support_is_reported() {
    assert_eq!(mu_support_ratio(WeightParams::new(1.0, 1.0).unwrap(), 10.0, 200), 1.0);
    let r = mu_support_ratio(WeightParams::new(1.0, 0.01).unwrap(), 10.0, 200);
    assert!(r > 1.0 && r <= 100.0);
}
