use carleman_lab::carleman_check::{
    apply_p_direct, apply_p_split, carleman_ratio, compact_bump, conjugate, constant_sweep, constant_sweep_clamped,
    l2_sq, support_mask, weighted_norm_sq, SweepTable, TestField,
};
use carleman_lab::geometry::{DomainLayout, OuterDomain, RadialInterface, Region, Vec2};
use carleman_lab::pde_solver::{Grid2D, SpaceTimeField};
use carleman_lab::weight::{build_epsilon_pair, CarlemanParams, EpsilonPair, PiecewiseCoefficient};
use num_complex::Complex64;
use proptest::prelude::*;

const T: f64 = 1.0;

fn layout() -> (DomainLayout, RadialInterface, PiecewiseCoefficient) {
    let iface = RadialInterface::disk(Vec2::ZERO, 1.0, 128).unwrap();
    let layout = DomainLayout::new(OuterDomain::square(1.2), iface.clone()).unwrap();
    (layout, iface, PiecewiseCoefficient::new(2.0, 1.0).unwrap())
}

fn pair(iface: &RadialInterface, coeff: PiecewiseCoefficient) -> EpsilonPair {
    build_epsilon_pair(iface, [Vec2::new(-0.3, 0.0), Vec2::new(0.3, 0.0)], coeff, 1.0).unwrap()
}

fn bump_field(grid: &Grid2D, n_steps: usize, center: Vec2, radius: f64, freq: (f64, f64)) -> SpaceTimeField {
    let dt = 2.0 * T / n_steps as f64;
    let mut v = SpaceTimeField::zeros(grid.n_nodes(), n_steps, dt, -T);
    let b: Vec<f64> = (0..grid.n_nodes()).map(|k| compact_bump(grid.point(k), center, radius)).collect();
    for n in 0..=n_steps {
        let t = v.time(n);
        let e = Complex64::from_polar(1.0 + 0.5 * (freq.0 * t).sin(), freq.1 * t);
        for (o, &bk) in v.snapshot_mut(n).iter_mut().zip(&b) {
            *o = bk * e;
        }
    }
    v
}

fn identity_defect(nx: usize, center: Vec2, radius: f64, freq: (f64, f64)) -> f64 {
    let (layout, iface, coeff) = layout();
    let grid = Grid2D::new(&layout, coeff, nx).unwrap();
    let pair = pair(&iface, coeff);
    let q = grid.sample(|x| 0.5 * (-x.norm_sq()).exp());
    let pts: Vec<Vec2> = (0..grid.n_nodes()).map(|k| grid.point(k)).collect();
    let params = CarlemanParams::from_samples(&pair.weight_refs(), &pts, 1.0, 1.0, T).unwrap();
    let v = bump_field(&grid, 64 * nx / 24, center, radius, freq);
    let cf = conjugate(&grid, &v, &pair.weights[0], &params, None).unwrap();
    let diff = apply_p_direct(&cf, &grid, &q).difference(&apply_p_split(&cf, &grid, &q)).unwrap();
    (l2_sq(&diff, &grid, cf.table()) / l2_sq(cf.w(), &grid, cf.table())).sqrt()
}

#[test]
fn sweep_time_clamp_defaults_to_a_sixty_fourth_and_is_validated() {
    let (layout, iface, coeff) = layout();
    let grid = Grid2D::new(&layout, coeff, 16).unwrap();
    let pair = pair(&iface, coeff);
    let q = vec![0.0; grid.n_nodes()];
    let fields = [TestField {
        id: "bump".into(),
        v: bump_field(&grid, 32, Vec2::new(0.2, 0.1), 0.4, (1.0, 2.0)),
    }];
    let sweep = |clamp: Option<f64>| match clamp {
        None => constant_sweep(&grid, &fields, &[10.0, 20.0], &[1.0], pair.weight_refs(), T, &q),
        Some(d) => constant_sweep_clamped(&grid, &fields, &[10.0, 20.0], &[1.0], pair.weight_refs(), T, d, &q),
    };
    let default = sweep(None).unwrap();
    let explicit = sweep(Some(T / 64.0)).unwrap();
    assert_eq!(default.sup_ratio, explicit.sup_ratio);
    let wide = sweep(Some(T / 4.0)).unwrap();
    let rows = |t: &SweepTable| -> Vec<f64> { t.rows.iter().map(|r| r.report.log_ratio).collect() };
    assert_eq!(rows(&default), rows(&explicit));
    // a wider clamp trims more of the time tails, whose relative weight is reported
    let tails = |t: &SweepTable| t.rows.iter().map(|r| r.report.tail_weight).fold(0.0, f64::max);
    assert!(rows(&wide).iter().all(|r| r.is_finite()));
    assert!(tails(&wide) <= 1.0 && tails(&default) <= tails(&wide), "{} {}", tails(&default), tails(&wide));
    for bad in [0.0, -0.1, T, 2.0 * T] {
        assert!(sweep(Some(bad)).is_err(), "{bad}");
    }
}

#[test]
fn conjugation_identity_holds_to_discretization_error() {
    let fields = [
        (Vec2::new(0.0, 0.45), 0.4, (1.3, 1.7)),
        (Vec2::new(-0.1, -0.5), 0.35, (0.7, 2.5)),
        (Vec2::new(0.5, -0.3), 0.3, (1.9, 0.9)),
    ];
    for (c, r, freq) in fields {
        let e: Vec<f64> = [24, 48, 96].iter().map(|&n| identity_defect(n, c, r, freq)).collect();
        for pair in e.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 1.0, "defects {e:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn report_is_quadratic_in_the_field(re in -3.0..3.0_f64, im in -3.0..3.0_f64, s in 1.0..30.0_f64) {
        prop_assume!(re.abs() + im.abs() > 0.1);
        let (layout, iface, coeff) = layout();
        let grid = Grid2D::new(&layout, coeff, 12).unwrap();
        let pair = pair(&iface, coeff);
        let q = vec![0.3; grid.n_nodes()];
        let pts: Vec<Vec2> = (0..grid.n_nodes()).map(|k| grid.point(k)).collect();
        let params = CarlemanParams::from_samples(&pair.weight_refs(), &pts, s, 1.0, T).unwrap();
        let v = bump_field(&grid, 16, Vec2::new(0.0, 0.45), 0.4, (1.0, 1.0));
        let c = Complex64::new(re, im);
        let a = carleman_ratio(&grid, &v, pair.weight_refs(), &params, &q).unwrap();
        let b = carleman_ratio(&grid, &v.map(|z| c * z), pair.weight_refs(), &params, &q).unwrap();
        prop_assert!((a.log_ratio - b.log_ratio).abs() < 1e-9);
        prop_assert!((b.lhs - c.norm_sqr() * a.lhs).abs() <= 1e-10 * b.lhs);
        prop_assert!(a.lhs >= 0.0 && a.rhs_residual >= 0.0 && a.rhs_boundary >= 0.0);
    }

    #[test]
    fn weighted_norm_splits_over_subdomains(cx in -0.4..0.4_f64, cy in -0.4..0.4_f64, s in 0.5..5.0_f64) {
        let (layout, iface, coeff) = layout();
        let grid = Grid2D::new(&layout, coeff, 16).unwrap();
        let pair = pair(&iface, coeff);
        let pts: Vec<Vec2> = (0..grid.n_nodes()).map(|k| grid.point(k)).collect();
        let params = CarlemanParams::from_samples(&pair.weight_refs(), &pts, s, 1.0, T).unwrap();
        // the bump crosses Γ₁
        let v = bump_field(&grid, 16, Vec2::new(cx, cy), 0.9, (1.0, 0.5));
        // reference on the support only, so w does not underflow next to Γ
        let probe = conjugate(&grid, &v, &pair.weights[1], &params, None).unwrap();
        let phi_ref = probe.table().min_phi_on(&support_mask(&v));
        let cf = conjugate(&grid, &v, &pair.weights[1], &params, Some(phi_ref)).unwrap();
        let all = weighted_norm_sq(&cf, &grid, None);
        let parts = weighted_norm_sq(&cf, &grid, Some(Region::Inner)) + weighted_norm_sq(&cf, &grid, Some(Region::Outer));
        prop_assert!(all > 0.0);
        prop_assert!((all - parts).abs() <= 1e-12 * all);
    }
}
