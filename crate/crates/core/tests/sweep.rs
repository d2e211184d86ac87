use lap_core::boundary::{BoundaryContext, Sign};
use lap_core::family::{FamilySpec, TestFamily};
use lap_core::perturb::{lap_perturbed_sweep, BsMethod, PerturbedSweepConfig, Potential};
use lap_core::sweep::{free_sweep, SweepConfig};
use lap_core::GridSpec;

fn config(lambdas: Vec<f64>, eps: Vec<f64>) -> SweepConfig {
    SweepConfig { m: 1, delta: 0.5, lambdas, eps, sign: Sign::Plus, include_boundary: true }
}

#[test]
fn free_sweep_is_uniform_and_deterministic() {
    let grid = GridSpec::new(2, 16.0, 64).unwrap();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let fields = TestFamily::new(2, FamilySpec { count: 4, ..FamilySpec::default() }).unwrap().fields(&grid).unwrap();
    let cfg = config(vec![0.5, 1.0, 2.0], vec![0.1, 0.01, 0.001]);
    let a = free_sweep(&ctx, &cfg, &fields).unwrap();
    let b = free_sweep(&ctx, &cfg, &fields).unwrap();
    assert_eq!(a.cells.len(), 12);
    assert_eq!(a.holes, 0);
    assert!(a.cells.iter().all(|c| c.proxy.is_finite() && c.proxy > 0.0));
    assert!(a.last_decade_drift < 2.0 && a.drift < 2.0, "{} {}", a.drift, a.last_decade_drift);
    let bits = |r: &lap_core::sweep::SweepReport| r.cells.iter().map(|c| c.proxy.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn sweep_rejects_levels_outside_delta_window() {
    let grid = GridSpec::new(2, 8.0, 32).unwrap();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let fields = TestFamily::new(2, FamilySpec { count: 1, sigma: 1.0, ..FamilySpec::default() }).unwrap().fields(&grid).unwrap();
    assert!(free_sweep(&ctx, &config(vec![3.0], vec![0.1]), &fields).is_err());
    assert!(free_sweep(&ctx, &config(vec![1.0], vec![0.0]), &fields).is_err());
}

#[test]
fn square_well_sweep_is_uniform_in_eps() {
    let grid = GridSpec::new(3, 6.0, 32).unwrap();
    let ctx = BoundaryContext::new(&grid).unwrap();
    let v = Potential::square_well(&grid, 5.0, 1.0).unwrap();
    let fields = TestFamily::new(3, FamilySpec { count: 3, sigma: 0.8, ..FamilySpec::default() }).unwrap().fields(&grid).unwrap();
    let cfg = PerturbedSweepConfig {
        sweep: config(vec![0.5, 1.0, 2.0], vec![0.1, 0.01]),
        tol: 1e-8,
        method: BsMethod::Gmres,
        excluded: vec![-0.99],
        margin: 0.1,
    };
    let out = lap_perturbed_sweep(&ctx, &v, &cfg, &fields).unwrap();
    assert_eq!(out.report.holes, 0);
    assert!(out.solves.iter().all(|c| c.max_residual <= 1e-8));
    assert!(out.report.last_decade_drift < 2.0, "{}", out.report.last_decade_drift);
}
