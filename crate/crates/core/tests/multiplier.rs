use lap_core::family::{FamilySpec, TestFamily};
use lap_core::lattice::sample_real;
use lap_core::multiplier::{
    apply_symbol, bessel, chi_lambda, free_resolvent, nonsingular_symbol_sup, polyharmonic, CutoffSpec,
};
use lap_core::spaces::{b_norm, bstar_norm, lorentz_norm, weighted, LorentzExponents, WeightParams};
use lap_core::{Field, GridSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn ratios(fam: &[Field], w: WeightParams, power: f64, sym: &lap_core::multiplier::Symbol) -> [f64; 3] {
    let e = LorentzExponents::restriction(2);
    let mut r = [0f64; 3];
    for f in fam {
        let out = weighted(&apply_symbol(sym, &weighted(f, w, -power).unwrap()).unwrap(), w, power).unwrap();
        r[0] = r[0].max(lorentz_norm(&out, e).unwrap() / lorentz_norm(f, e).unwrap());
        r[1] = r[1].max(b_norm(&out).unwrap() / b_norm(f).unwrap());
        r[2] = r[2].max(bstar_norm(&out).unwrap() / bstar_norm(f).unwrap());
    }
    r
}

#[test]
fn weighted_multipliers_are_bounded_uniformly_in_gamma() {
    let grid = GridSpec::new(2, 64.0, 256).unwrap();
    let fam = TestFamily::new(2, FamilySpec::default()).unwrap().fields(&grid).unwrap();
    let sym = chi_lambda(&CutoffSpec::new(1.0, 1).unwrap(), &grid).unwrap().times(&bessel(1.0));
    for n in [1.0, 2.0] {
        for power in [1.0, -1.0] {
            let limit = ratios(&fam, WeightParams::new(n, 1e-12).unwrap(), power, &sym);
            let plain = ratios(&fam, WeightParams::new(n, 1.0).unwrap(), power, &sym);
            let mut prev = None;
            for gamma in [0.1, 0.01, 1e-3] {
                let r = ratios(&fam, WeightParams::new(n, gamma).unwrap(), power, &sym);
                for k in 0..3 {
                    assert!(r[k].is_finite() && r[k] <= limit[k].max(plain[k]) * 1.01, "N={n} power={power} gamma={gamma}: {r:?} vs {limit:?}");
                }
                prev = Some(r);
            }
            if power < 0.0 {
                let r = prev.unwrap();
                for k in 0..3 {
                    assert!(limit[k] <= 2.0 * r[k], "N={n}: {r:?} vs {limit:?}");
                }
            }
        }
    }
}

#[test]
fn nonsingular_part_bounded_over_lambda_range() {
    let grid = GridSpec::new(2, 64.0, 512).unwrap();
    for m in [1, 2] {
        let delta: f64 = 0.5;
        let sups: Vec<f64> = (0..=20)
            .map(|k| {
                let lambda = delta * (1.0 / (delta * delta)).powf(k as f64 / 20.0);
                nonsingular_symbol_sup(&CutoffSpec::new(lambda, m).unwrap(), &grid)
            })
            .collect();
        let max = sups.iter().cloned().fold(0.0, f64::max);
        assert!(max.is_finite() && max < 100.0, "m={m}: {sups:?}");
    }
}

#[test]
fn resolvent_of_bessel_pair_inverts_polyharmonic() {
    let grid = GridSpec::new(3, 6.0, 32).unwrap();
    let f = sample_real(|x| (-x.iter().map(|v| v * v).sum::<f64>()).exp(), &grid).unwrap();
    for m in [1, 2] {
        let z = Complex64::new(0.7, 0.3);
        let u = free_resolvent(z, m, &f).unwrap();
        let back = apply_symbol(&polyharmonic(m), &u).unwrap().sub(&u.scale(z)).unwrap();
        assert!(back.rel_max_diff(&f).unwrap() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cutoff_plateau_and_support(lambda in 0.1f64..10.0, m in 1u32..3, s in 0.0f64..2.0) {
        let spec = CutoffSpec::new(lambda, m).unwrap();
        let v = spec.of_level(s * lambda);
        prop_assert!((0.0..=1.0).contains(&v));
        if (0.75..=1.25).contains(&s) {
            prop_assert_eq!(v, 1.0);
        }
        if !(0.5..=1.5).contains(&s) {
            prop_assert_eq!(v, 0.0);
        }
    }
}
