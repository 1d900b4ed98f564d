use carleman_lab::geometry::{DomainLayout, OuterDomain, RadialInterface, Vec2};
use carleman_lab::inverse::{
    bk_recover_f, initial_time_derivative, misfit, random_perturbation, reconstruct, stability_sweep,
    InstanceSettings, InverseProblemInstance, Misfit, NoiseSpec, ReconstructionSettings, ReconstructionStatus,
    StabilitySettings,
};
use carleman_lab::pde_solver::{solve_linearized, solve_time_derivative, Dirichlet, Grid2D, SpaceTimeField};
use carleman_lab::weight::{build_weight, build_weight_unchecked, verify_hypotheses, Hypothesis, PiecewiseCoefficient, VerifySettings};
use carleman_lab::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disk_grid(a1: f64, a2: f64, nx: usize) -> (Grid2D, RadialInterface, DomainLayout) {
    let iface = RadialInterface::disk(Vec2::ZERO, 1.0, 256).unwrap();
    let layout = DomainLayout::new(OuterDomain::square(1.2), iface.clone()).unwrap();
    let grid = Grid2D::new(&layout, PiecewiseCoefficient::new(a1, a2).unwrap(), nx).unwrap();
    (grid, iface, layout)
}

fn planted_bump(grid: &Grid2D, amp: f64) -> Vec<f64> {
    grid.sample(|x| amp * (-(x - Vec2::new(0.2, -0.1)).norm_sq() / (2.0 * 0.25 * 0.25)).exp())
}

fn initial_data(grid: &Grid2D) -> Vec<Complex64> {
    grid.sample(|x| Complex64::new(2.0 + (2.0 * x.x).cos() * (3.0 * x.y).cos(), 0.0))
}

fn settings(dt: f64, noise: Option<NoiseSpec>) -> InstanceSettings {
    InstanceSettings {
        horizon: 1.0,
        dt,
        r: 0.5,
        dirichlet: Dirichlet::FromInitial,
        noise,
        q_bound: 10.0,
    }
}

fn instance(nx: usize, dt: f64, noise: Option<NoiseSpec>) -> InverseProblemInstance {
    let (grid, _, _) = disk_grid(2.0, 1.0, nx);
    let p = planted_bump(&grid, 1.0);
    let y0 = initial_data(&grid);
    InverseProblemInstance::new(grid, p, y0, settings(dt, noise)).unwrap()
}

fn interior_direction(grid: &Grid2D, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut d = vec![0.0; grid.n_nodes()];
    for (k, _) in grid.interior() {
        d[k] = rng.random_range(-1.0..1.0);
    }
    d
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

proptest! {
    #[test]
    fn bk_inversion_is_the_identity_on_real_fields(
        f in prop::collection::vec(-5.0..5.0f64, 1..64),
        phases in prop::collection::vec(0.0..std::f64::consts::TAU, 64),
        moduli in prop::collection::vec(0.5..4.0f64, 64),
    ) {
        let r0: Vec<Complex64> = (0..f.len()).map(|k| Complex64::from_polar(moduli[k], phases[k])).collect();
        let v0: Vec<Complex64> = f.iter().zip(&r0).map(|(&fk, &r)| Complex64::new(0.0, -fk) * r).collect();
        let back = bk_recover_f(&v0, &r0, 0.5).unwrap();
        for (a, b) in back.iter().zip(&f) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

#[test]
fn bk_inversion_rejects_small_initial_factor() {
    let r0 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.1)];
    let v0 = vec![Complex64::default(); 2];
    assert!(matches!(bk_recover_f(&v0, &r0, 0.5), Err(Error::SingularR0 { .. })));
    assert_eq!(bk_recover_f(&v0, &r0, 0.05).unwrap(), vec![0.0, 0.0]);
}

fn r_closed(x: Vec2, t: f64) -> Complex64 {
    Complex64::new(2.0 + (2.0 * x.x).cos() * (3.0 * x.y).cos(), 0.0) * Complex64::new(0.0, t * (1.0 + x.x)).exp()
}

fn r_closed_dt(x: Vec2, t: f64) -> Complex64 {
    Complex64::new(0.0, 1.0 + x.x) * r_closed(x, t)
}

fn sampled(g: &Grid2D, n: usize, dt: f64, w: impl Fn(Vec2, f64) -> Complex64) -> SpaceTimeField {
    let mut out = SpaceTimeField::zeros(g.n_nodes(), n, dt, 0.0);
    for m in 0..=n {
        for (k, v) in out.snapshot_mut(m).iter_mut().enumerate() {
            *v = w(g.point(k), m as f64 * dt);
        }
    }
    out
}

fn bump_in_omega1(g: &Grid2D) -> Vec<f64> {
    g.sample(|x| {
        let r2 = (x - Vec2::new(0.1, -0.1)).norm_sq() / 0.36;
        if r2 < 1.0 {
            (1.0 - r2).powi(4)
        } else {
            0.0
        }
    })
}

/// Relative error of `f` recovered from the solved derivative system and
/// from the difference quotient of the linearized solution.
fn bk_errors(nx: usize, dt: f64) -> (f64, f64) {
    let (g, _, _) = disk_grid(2.0, 1.0, nx);
    let q = g.sample(|x| 0.5 * (-x.norm_sq()).exp());
    let f = bump_in_omega1(&g);
    let n = 4;
    let t = n as f64 * dt;
    let r = sampled(&g, n, dt, r_closed);
    let rp = sampled(&g, n, dt, r_closed_dt);
    let rel = |fh: Vec<f64>| {
        let d: Vec<f64> = fh.iter().zip(&f).map(|(a, b)| a - b).collect();
        g.l2_norm_real(&d) / g.l2_norm_real(&f)
    };
    let v = solve_time_derivative(&g, &q, &f, &rp, r.snapshot(0), t, dt).unwrap();
    let direct = rel(bk_recover_f(v.snapshot(0), r.snapshot(0), 0.5).unwrap());
    let u = solve_linearized(&g, &q, &f, &r, t, dt).unwrap();
    let quotient = rel(bk_recover_f(&initial_time_derivative(&u).unwrap(), r.snapshot(0), 0.5).unwrap());
    (direct, quotient)
}

#[test]
fn bk_recovers_planted_source_and_refines() {
    let (direct, coarse) = bk_errors(32, 0.01);
    assert!(direct <= 1e-12, "{direct}");
    let (_, fine) = bk_errors(64, 0.005);
    assert!(coarse < 0.1, "{coarse}");
    assert!(fine < 0.6 * coarse, "{coarse} -> {fine}");
}

#[test]
fn instance_validates_inputs() {
    let (grid, _, _) = disk_grid(2.0, 1.0, 16);
    let p = planted_bump(&grid, 1.0);
    let low = grid.sample(|x| Complex64::new(0.2 + x.x.abs(), 0.0));
    assert!(InverseProblemInstance::new(grid.clone(), p.clone(), low, settings(0.05, None)).is_err());
    let mixed = grid.sample(|x| Complex64::new(2.0, x.x));
    assert!(InverseProblemInstance::new(grid.clone(), p.clone(), mixed, settings(0.05, None)).is_err());
    let big = grid.sample(|_| 20.0);
    assert!(InverseProblemInstance::new(grid.clone(), big, initial_data(&grid), settings(0.05, None)).is_err());
    let imaginary = grid.sample(|x| Complex64::new(0.0, 2.0 + x.y));
    assert!(InverseProblemInstance::new(grid, p, imaginary, settings(0.05, None)).is_ok());
}

#[test]
fn misfit_vanishes_at_the_truth() {
    let inst = instance(16, 0.05, None);
    let zero = vec![0.0; inst.grid().n_nodes()];
    assert!(misfit(inst.p(), &inst, 0.0, &zero).unwrap() <= 1e-24);
    assert!(misfit(inst.p(), &inst, 0.5, inst.p()).unwrap() <= 1e-24);
    assert!(misfit(&zero, &inst, 0.0, &zero).unwrap() > 1e-3);
}

#[test]
fn misfit_is_continuous_and_quadratic_at_the_truth() {
    let inst = instance(16, 0.05, None);
    let zero = vec![0.0; inst.grid().n_nodes()];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let d = interior_direction(inst.grid(), &mut rng);
        let j: Vec<f64> = [1e-2, 5e-3]
            .iter()
            .map(|&e| misfit(&axpy(e, &d, inst.p()), &inst, 0.0, &zero).unwrap())
            .collect();
        assert!(j[0] > 0.0 && j[0] < 1.0);
        let ratio = j[0] / j[1];
        assert!((3.8..4.2).contains(&ratio), "{j:?}");
    }
}

#[test]
fn adjoint_gradient_matches_central_differences() {
    let inst = instance(16, 0.05, None);
    let (grid, _, _) = disk_grid(2.0, 1.0, 16);
    let q = grid.sample(|x| 0.3 * (2.0 * x.x).sin());
    let q_ref = grid.sample(|x| 0.1 * x.y);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for beta in [0.0, 1e-2] {
        let m = Misfit::new(&inst, beta, q_ref.clone()).unwrap();
        let (_, grad) = m.value_and_gradient(&q).unwrap();
        for _ in 0..5 {
            let d = interior_direction(&grid, &mut rng);
            let step = 1e-5;
            let fd = (m.value(&axpy(step, &d, &q)).unwrap() - m.value(&axpy(-step, &d, &q)).unwrap()) / (2.0 * step);
            let adj: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
            assert!((adj - fd).abs() <= 1e-3 * fd.abs(), "β = {beta}: adjoint {adj}, fd {fd}");
        }
    }
}

#[test]
fn reconstruction_from_the_truth_stops_immediately() {
    let inst = instance(16, 0.05, None);
    let res = reconstruct(&inst, inst.p(), 1e-6, ReconstructionSettings::default()).unwrap();
    assert_eq!(res.iterations, 0);
    assert_eq!(res.status, ReconstructionStatus::Converged);
    assert_eq!(res.relative_error, 0.0);
}

#[test]
fn reconstruction_reports_a_stall_instead_of_failing() {
    let inst = instance(16, 0.05, None);
    let zero = vec![0.0; inst.grid().n_nodes()];
    let s = ReconstructionSettings {
        max_backtracks: 1,
        initial_step: 1e6,
        ..Default::default()
    };
    let res = reconstruct(&inst, &zero, 0.0, s).unwrap();
    assert!(matches!(res.status, ReconstructionStatus::StalledReconstruction { iteration: 0, .. }));
    assert_eq!(res.q_hat, zero);
}

#[test]
fn noiseless_planted_bump_is_recovered() {
    let inst = instance(32, 0.02, None);
    let zero = vec![0.0; inst.grid().n_nodes()];
    let res = reconstruct(&inst, &zero, 1e-6, ReconstructionSettings::default()).unwrap();
    assert!(res.iterations <= 100);
    assert!(res.relative_error <= 0.05, "{}", res.relative_error);
    assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn one_percent_noise_degrades_reconstruction_by_at_most_three_times() {
    let zero_of = |inst: &InverseProblemInstance| vec![0.0; inst.grid().n_nodes()];
    let clean = instance(32, 0.02, None);
    let base = reconstruct(&clean, &zero_of(&clean), 1e-6, ReconstructionSettings::default()).unwrap();
    let noisy = instance(32, 0.02, Some(NoiseSpec { level: 0.01, seed: 3 }));
    let res = reconstruct(&noisy, &zero_of(&noisy), 1e-6, ReconstructionSettings::default()).unwrap();
    assert!(
        res.relative_error <= 3.0 * base.relative_error,
        "noiseless {:.3e}, noisy {:.3e}",
        base.relative_error,
        res.relative_error
    );
}

#[test]
fn stability_sweep_is_lipschitz() {
    let (_, iface, layout) = disk_grid(2.0, 1.0, 32);
    let weight = build_weight(&iface, Vec2::new(-0.3, 0.0), PiecewiseCoefficient::new(2.0, 1.0).unwrap(), 1.0, (0.1, 0.2)).unwrap();
    let report = verify_hypotheses(&weight, &layout, VerifySettings::default());
    let inst = instance(32, 0.02, None).with_certification(report);
    let sweep = stability_sweep(&inst, StabilitySettings::default()).unwrap();
    assert_eq!(sweep.records.len(), 30);
    assert!(sweep.empirical_c.is_finite() && sweep.empirical_c > 0.0);
    assert!(sweep.empirical_c <= 10.0 * sweep.median_ratio);
    assert!((sweep.loglog_slope - 1.0).abs() <= 0.2, "{}", sweep.loglog_slope);
    assert!(sweep.certified);
}

#[test]
fn trace_distance_is_linear_for_small_perturbations() {
    let inst = instance(24, 0.02, None);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let delta = random_perturbation(inst.grid(), 1e-3, &mut rng).unwrap();
    let one = inst.trace_distance(&axpy(1.0, &delta, inst.p())).unwrap();
    let two = inst.trace_distance(&axpy(2.0, &delta, inst.p())).unwrap();
    assert!((two / one - 2.0).abs() <= 0.2, "{}", two / one);
}

#[test]
fn reversed_jump_runs_but_is_uncertified() {
    let (grid, iface, layout) = disk_grid(1.0, 2.0, 24);
    let weight = build_weight_unchecked(&iface, Vec2::new(-0.3, 0.0), grid.coeff(), 1.0, (0.1, 0.2)).unwrap();
    let report = verify_hypotheses(&weight, &layout, VerifySettings::default());
    assert!(!report.get(Hypothesis::H2).unwrap().ok);
    let p = planted_bump(&grid, 1.0);
    let y0 = initial_data(&grid);
    let inst = InverseProblemInstance::new(grid, p, y0, settings(0.05, None)).unwrap().with_certification(report);
    let s = StabilitySettings {
        n_perturbations: 6,
        ..Default::default()
    };
    let sweep = stability_sweep(&inst, s).unwrap();
    assert_eq!(sweep.records.len(), 6);
    assert!(!sweep.certified);
}
