use lap_core::boundary::{BoundaryContext, Sign};
use lap_core::family::{FamilySpec, TestFamily};
use lap_core::lattice::sample_real;
use lap_core::multiplier::free_resolvent;
use lap_core::perturb::solve::contraction_rate;
use lap_core::perturb::{
    admissibility_check, bs_solve, candidates_match, eigen_scan, example_potential, example_tail_bound,
    lanczos_lowest, lap_perturbed_sweep, rellich_profile, symmetry_defect, AdmissibilityConfig, BsMethod,
    FreeResolvent, PerturbedSweepConfig, Potential, ScanConfig,
};
use lap_core::spaces::{weighted, xstar_norm, CompositeNormConfig, LorentzExponents, WeightParams};
use lap_core::sweep::{free_sweep, SweepConfig};
use lap_core::{Field, GridSpec};
use num_complex::Complex64;

fn well_grid(n: usize) -> GridSpec {
    GridSpec::new(3, 6.0, n).unwrap()
}

fn gaussian(grid: &GridSpec, s: f64) -> Field {
    sample_real(|x| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s * s)).exp(), grid).unwrap()
}

#[test]
fn zero_potential_reduces_to_free_resolvent() {
    let grid = GridSpec::new(2, 8.0, 32).unwrap();
    let f = gaussian(&grid, 1.0);
    let z = Complex64::new(-0.5, 0.2);
    let r0 = FreeResolvent::lattice(&grid, z, 1).unwrap();
    let sol = bs_solve(&r0, &Potential::zero(&grid), &f, 1e-10, BsMethod::Gmres).unwrap();
    assert_eq!(sol.iterations, 0);
    assert_eq!(sol.u.values(), free_resolvent(z, 1, &f).unwrap().values());
}

#[test]
fn zero_potential_sweep_matches_free_sweep() {
    let grid = GridSpec::new(2, 16.0, 64).unwrap();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let fields = TestFamily::new(2, FamilySpec { count: 3, ..FamilySpec::default() }).unwrap().fields(&grid).unwrap();
    let sweep = SweepConfig { m: 1, delta: 0.5, lambdas: vec![0.5, 1.0, 2.0], eps: vec![0.1, 0.01], sign: Sign::Plus, include_boundary: true };
    let free = free_sweep(&ctx, &sweep, &fields).unwrap();
    let cfg = PerturbedSweepConfig { sweep, tol: 1e-8, method: BsMethod::Gmres, excluded: vec![], margin: 0.0 };
    let pert = lap_perturbed_sweep(&ctx, &Potential::zero(&grid), &cfg, &fields).unwrap();
    for (a, b) in free.cells.iter().zip(&pert.report.cells) {
        assert!((a.proxy - b.proxy).abs() <= 1e-8 * a.proxy, "{} {}", a.proxy, b.proxy);
    }
}

#[test]
fn square_well_solve_satisfies_defining_relation() {
    let grid = well_grid(32);
    let v = Potential::square_well(&grid, 5.0, 1.0).unwrap();
    let f = gaussian(&grid, 0.8);
    let r0 = FreeResolvent::lattice(&grid, Complex64::new(-0.5, 0.0), 1).unwrap();
    let sol = bs_solve(&r0, &v, &f, 1e-8, BsMethod::Gmres).unwrap();
    assert!(sol.flag.is_none());
    assert!(sol.residual <= 1e-8);
    assert!(sol.defining_residual.unwrap() <= 1e-8, "{:?}", sol.defining_residual);
}

#[test]
fn neumann_iterations_follow_contraction_rate() {
    let grid = GridSpec::new(2, 16.0, 64).unwrap();
    let v = Potential::gaussian(&grid, 0.1, 1.0).unwrap();
    let f = gaussian(&grid, 1.0);
    let r0 = FreeResolvent::lattice(&grid, Complex64::new(-0.5, 0.0), 1).unwrap();
    let rho = contraction_rate(&r0, &v, &f, 200).unwrap();
    assert!(rho < 0.5);
    let tol = 1e-10;
    let sol = bs_solve(&r0, &v, &f, tol, BsMethod::Neumann).unwrap();
    assert!(sol.flag.is_none());
    let predicted = (0.1 * tol).ln() / rho.ln();
    let ratio = sol.iterations as f64 / predicted;
    assert!((0.5..=2.0).contains(&ratio), "{} iterations vs {predicted:.1}", sol.iterations);
}

#[test]
fn square_well_candidate_matches_lanczos() {
    let grid = well_grid(32);
    let v = Potential::square_well(&grid, 5.0, 1.0).unwrap();
    let direct = lanczos_lowest(&v, 1, 400, 1e-10).unwrap();
    assert!(direct.value >= -v.sup_norm() && direct.value < 0.0);
    let cfg = ScanConfig::new(1, (-4.9, -0.05), 1e-3, 97);
    let plus = eigen_scan(None, &v, &cfg).unwrap();
    let lowest = plus.candidates.iter().map(|c| c.lambda).fold(f64::INFINITY, f64::min);
    assert!(((lowest - direct.value) / direct.value).abs() < 0.01, "{lowest} vs {}", direct.value);
    let minus = eigen_scan(None, &v, &ScanConfig { sign: Sign::Minus, ..cfg.clone() }).unwrap();
    assert!(candidates_match(&plus, &minus, plus.step));
    let half = eigen_scan(None, &v, &ScanConfig { eps_probe: 5e-4, ..cfg }).unwrap();
    assert!(candidates_match(&plus, &half, plus.step));
}

#[test]
fn free_operator_has_no_candidates() {
    let grid = GridSpec::new(2, 8.0, 32).unwrap();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let scan = eigen_scan(Some(&ctx), &Potential::zero(&grid), &ScanConfig::new(1, (0.2, 3.0), 1e-3, 20)).unwrap();
    assert!(scan.candidates.is_empty());
}

#[test]
fn hamiltonian_is_symmetric() {
    let grid = well_grid(32);
    let v = Potential::square_well(&grid, 5.0, 1.0).unwrap();
    let fields = TestFamily::new(3, FamilySpec { count: 4, sigma: 0.8, ..FamilySpec::default() }).unwrap().fields(&grid).unwrap();
    for m in [1, 2] {
        assert!(symmetry_defect(&v, m, &fields).unwrap() <= 1e-10);
    }
}

#[test]
fn eigenfunction_is_localized_and_decays_stably() {
    let mut ratios = Vec::new();
    for n in [24, 48] {
        let grid = well_grid(n);
        let v = Potential::square_well(&grid, 5.0, 1.0).unwrap();
        let pair = lanczos_lowest(&v, 1, 600, 1e-10).unwrap();
        let u = &pair.vector;
        let prof = rellich_profile(u, &[2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(prof.windows(2).all(|w| w[1].1 < w[0].1), "{prof:?}");
        let cfg = CompositeNormConfig::new(1, 3, 1.0).unwrap();
        let wu = weighted(u, WeightParams::new(1.0, 1e-12).unwrap(), 1.0).unwrap();
        ratios.push(xstar_norm(&wu, &cfg).unwrap() / xstar_norm(u, &cfg).unwrap());
    }
    assert!(ratios.iter().all(|r| r.is_finite()));
    assert!(ratios[0].max(ratios[1]) / ratios[0].min(ratios[1]) <= 2.0, "{ratios:?}");
}

#[test]
fn small_potential_obeys_neumann_bound() {
    let grid = GridSpec::new(2, 16.0, 64).unwrap();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let v = Potential::gaussian(&grid, 0.1, 1.0).unwrap();
    let fields = TestFamily::new(2, FamilySpec { count: 4, ..FamilySpec::default() }).unwrap().fields(&grid).unwrap();
    let sweep = SweepConfig { m: 1, delta: 0.5, lambdas: vec![0.5, 1.0, 2.0], eps: vec![0.1, 0.01], sign: Sign::Plus, include_boundary: true };
    let cfg = PerturbedSweepConfig { sweep, tol: 1e-8, method: BsMethod::Gmres, excluded: vec![], margin: 0.0 };
    let out = lap_perturbed_sweep(&ctx, &v, &cfg, &fields).unwrap();
    assert!(out.report.holes == 0);
    assert!(out.solves.iter().all(|c| c.max_residual <= 1e-8));
    assert!(out.neumann.q_proxy <= 0.5);
    assert!(out.neumann.holds, "{:?}", out.neumann);
    assert!(out.report.sup <= 2.0 * out.free.sup);
}

#[test]
fn sweep_refuses_interval_near_candidate() {
    let grid = GridSpec::new(2, 8.0, 32).unwrap();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let sweep = SweepConfig { m: 1, delta: 0.5, lambdas: vec![0.5, 2.0], eps: vec![0.1], sign: Sign::Plus, include_boundary: false };
    let cfg = PerturbedSweepConfig { sweep, tol: 1e-8, method: BsMethod::Gmres, excluded: vec![1.2], margin: 0.05 };
    let fields = vec![gaussian(&grid, 1.0)];
    assert!(lap_perturbed_sweep(&ctx, &Potential::zero(&grid), &cfg, &fields).is_err());
}

#[test]
fn example_shells_follow_the_weak_lorentz_chain() {
    let grid = GridSpec::new(3, 3.2, 64).unwrap();
    let one = example_potential(2.0, 1, &grid).unwrap();
    assert!((one.measures[0] * 2f64.ln() - 1.0).abs() < 0.01);
    assert!((one.potential.sup_norm() - 1.0).abs() < 1e-15);
    let ex = example_potential(2.0, 256, &grid).unwrap();
    for (j, m) in ex.measures.iter().enumerate() {
        assert!((m * (2.0 + j as f64).ln() - 1.0).abs() < 0.01);
    }
    let weak: Vec<f64> = [4, 16, 64].iter().map(|&j| ex.truncation(j).unwrap().weak_norm(2.0).unwrap()).collect();
    assert!(weak.iter().all(|&w| w < 2.0 * weak[0]), "{weak:?}");
    let mut prev = f64::INFINITY;
    for n in [1, 2, 4, 8, 16, 32, 64] {
        let tail = ex.tail(n).unwrap().weak_norm(2.0).unwrap();
        let chain = example_tail_bound(2.0, n, 256);
        assert!((tail - chain).abs() < 0.01 * chain, "N={n}: {tail} vs {chain}");
        assert!(tail < prev);
        let scaled = tail * (2.0 + n as f64).ln().sqrt();
        assert!((0.5..=2.0).contains(&scaled), "N={n}: {scaled}");
        prev = tail;
    }
    let e = LorentzExponents::weak(2.0).unwrap();
    assert!(e.q.is_none());
}

#[test]
fn admissibility_reports() {
    let grid = well_grid(32);
    let fam = TestFamily::new(3, FamilySpec { count: 4, sigma: 0.8, ..FamilySpec::default() }).unwrap().fields(&grid).unwrap();
    let cfg = AdmissibilityConfig::new(1, 1.0);
    let zero = admissibility_check(&Potential::zero(&grid), &fam, &cfg).unwrap();
    assert_eq!(zero.symmetry_defect, 0.0);
    assert!(zero.smallness.iter().all(|r| r.eps == Some(0.0) && r.table[0].a == 0.0));
    let well = admissibility_check(&Potential::square_well(&grid, 5.0, 1.0).unwrap(), &fam, &cfg).unwrap();
    assert!(well.symmetric && well.factorizable && well.factorization_defect <= 1e-10);
    let coarse = GridSpec::new(3, 3.2, 64).unwrap();
    let fam = TestFamily::new(3, FamilySpec { count: 3, sigma: 0.4, translation: 0.3, ..FamilySpec::default() })
        .unwrap()
        .fields(&coarse)
        .unwrap();
    let ex = example_potential(2.0, 16, &coarse).unwrap();
    let rep = admissibility_check(&ex.potential, &fam, &cfg).unwrap();
    assert_eq!(rep.smallness.len(), cfg.weights.len());
    assert!(rep.factorizable);
    for row in &rep.smallness {
        assert!(row.table.windows(2).all(|w| w[1].a <= w[0].a));
    }
}
