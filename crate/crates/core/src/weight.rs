//! Transmission Carleman weight `ψ = η·ā·μ² + M`, the time weights `θ`, `φ`,
//! and numerical certification of the interface and pseudoconvexity conditions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundarySample, DomainLayout, RadialInterface, Region, Sym2, Vec2};

/// Default `M₂`; only `M₁ − M₂ = a₁ − a₂` is constrained.
pub const DEFAULT_M2: f64 = 1.0;
/// Relative headroom of `α` above the sampled maximum of `e^{λψ}`.
pub const ALPHA_HEADROOM: f64 = 1.05;
/// Safety factor applied to the strict bound on the ε-pair radius.
pub const EPSILON_SAFETY: f64 = 0.9;
/// Samples used when re-expressing the interface about a weight center.
const RECENTER_SAMPLES: usize = 4096;

/// Coefficient `a`, equal to `a1` on `Ω₁` and `a2` on `Ω₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCoefficient {
    pub a1: f64,
    pub a2: f64,
}

impl PiecewiseCoefficient {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "coefficients must be positive (a1 = {a1}, a2 = {a2})"
            )));
        }
        Ok(Self { a1, a2 })
    }

    pub fn value(&self, region: Region) -> f64 {
        match region {
            Region::Inner => self.a1,
            _ => self.a2,
        }
    }

    /// `ā`: the coefficient of the *other* subdomain.
    pub fn swapped(&self, region: Region) -> f64 {
        match region {
            Region::Inner => self.a2,
            _ => self.a1,
        }
    }
}

/// Radial cutoff `η(|x − c|)`: zero inside `r_inner`, one outside `r_outer`,
/// joined by the quintic ramp `10u³ − 15u⁴ + 6u⁵` (C², flat at both ends).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub center: Vec2,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl Cutoff {
    pub fn new(center: Vec2, r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(r_inner > 0.0 && r_outer > r_inner) {
            return Err(Error::InvalidInput(format!(
                "cutoff radii must satisfy 0 < r_inner < r_outer (got {r_inner}, {r_outer})"
            )));
        }
        Ok(Self {
            center,
            r_inner,
            r_outer,
        })
    }

    /// Profile value and first two radial derivatives at distance `r`.
    pub fn profile(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.r_inner {
            return (0.0, 0.0, 0.0);
        }
        if r >= self.r_outer {
            return (1.0, 0.0, 0.0);
        }
        let w = self.r_outer - self.r_inner;
        let u = (r - self.r_inner) / w;
        let u2 = u * u;
        let value = u2 * u * (10.0 - 15.0 * u + 6.0 * u2);
        let d1 = 30.0 * u2 * (1.0 - u) * (1.0 - u) / w;
        let d2 = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / (w * w);
        (value, d1, d2)
    }

    /// `(η, ∇η, D²η)` at `x`.
    pub fn eval(&self, x: Vec2) -> (f64, Vec2, Sym2) {
        let d = x - self.center;
        let r = d.norm();
        let (value, d1, d2) = self.profile(r);
        if d1 == 0.0 && d2 == 0.0 {
            return (value, Vec2::ZERO, Sym2::default());
        }
        let e = (1.0 / r) * d;
        let radial = e.sym_product(e);
        let tangential = Sym2::new(1.0 - radial.xx, -radial.xy, 1.0 - radial.yy);
        (value, d1 * e, radial.scale(d2) + tangential.scale(d1 / r))
    }
}

/// `ψ` with its gradient and Hessian at one point, on one side of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightSample {
    pub psi: f64,
    pub grad: Vec2,
    pub hess: Sym2,
}

impl WeightSample {
    pub fn laplacian(&self) -> f64 {
        self.hess.trace()
    }
}

/// Anything that supplies a time-independent spatial weight `ψ` for the
/// Carleman machinery.
pub trait WeightField: Send + Sync {
    /// Evaluates `ψ` at `x` using the formula of subdomain `side`.
    fn sample(&self, x: Vec2, side: Region) -> WeightSample;

    /// Subdomain in which the weight's own formula places `x`.
    fn side(&self, x: Vec2) -> Region;

    fn psi(&self, x: Vec2) -> f64 {
        self.sample(x, self.side(x)).psi
    }
}

/// The transmission weight built around a center `x0` inside `Ω₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionWeight {
    center: Vec2,
    /// The interface written as a radial function about `center`.
    interface: RadialInterface,
    coeff: PiecewiseCoefficient,
    m1: f64,
    m2: f64,
    cutoff: Cutoff,
}

/// Builds the weight centered at `x0`. `M₁ = M₂ + a₁ − a₂`.
pub fn build_weight(
    interface: &RadialInterface,
    x0: Vec2,
    coeff: PiecewiseCoefficient,
    m2: f64,
    cutoff_radii: (f64, f64),
) -> Result<TransmissionWeight> {
    if coeff.a1 <= coeff.a2 {
        return Err(Error::JumpSign {
            a1: coeff.a1,
            a2: coeff.a2,
        });
    }
    build_weight_unchecked(interface, x0, coeff, m2, cutoff_radii)
}

/// Same construction without the `a1 > a2` requirement. Used for negative
/// controls where the hypothesis report is expected to flag the jump sign.
pub fn build_weight_unchecked(
    interface: &RadialInterface,
    x0: Vec2,
    coeff: PiecewiseCoefficient,
    m2: f64,
    cutoff_radii: (f64, f64),
) -> Result<TransmissionWeight> {
    if !(m2 > 0.0) {
        return Err(Error::InvalidInput(format!("M2 must be positive, got {m2}")));
    }
    let cutoff = Cutoff::new(x0, cutoff_radii.0, cutoff_radii.1)?;
    let recentered = interface.recentered(x0, RECENTER_SAMPLES.max(interface.n_samples()))?;
    let (closest, _) = interface.distance_extremes(x0);
    if cutoff.r_outer >= closest {
        return Err(Error::Geometry(format!(
            "cutoff ball of radius {} around ({}, {}) is not inside Ω₁ (distance to Γ₁ = {closest})",
            cutoff.r_outer, x0.x, x0.y
        )));
    }
    let m1 = m2 + coeff.a1 - coeff.a2;
    Ok(TransmissionWeight {
        center: x0,
        interface: recentered,
        coeff,
        m1,
        m2,
        cutoff,
    })
}

impl TransmissionWeight {
    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn coeff(&self) -> PiecewiseCoefficient {
        self.coeff
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn cutoff(&self) -> &Cutoff {
        &self.cutoff
    }

    /// Value of `ψ` on the interface, `a₂ + M₁ = a₁ + M₂`.
    pub fn interface_value(&self) -> f64 {
        self.coeff.a2 + self.m1
    }

    fn offset(&self, side: Region) -> f64 {
        match side {
            Region::Inner => self.m1,
            _ => self.m2,
        }
    }
}

impl WeightField for TransmissionWeight {
    fn side(&self, x: Vec2) -> Region {
        match self.interface.gauge(x) {
            Ok(mu) if mu >= 1.0 => Region::Outer,
            _ => Region::Inner,
        }
    }

    fn sample(&self, x: Vec2, side: Region) -> WeightSample {
        let abar = self.coeff.swapped(side);
        let m = self.offset(side);
        let (eta, grad_eta, hess_eta) = self.cutoff.eval(x);
        if eta == 0.0 && grad_eta == Vec2::ZERO {
            return WeightSample {
                psi: m,
                ..Default::default()
            };
        }
        // outside the inner cutoff radius, so the gauge is regular here
        let mu = self.interface.gauge(x).expect("gauge regular off center");
        let g = mu * mu;
        let grad_g = self.interface.gauge_sq_gradient(x).expect("regular");
        let hess_g = self.interface.gauge_hessian(x).expect("regular");
        let hess = hess_g.scale(eta)
            + grad_eta.sym_product(grad_g).scale(2.0)
            + hess_eta.scale(g);
        WeightSample {
            psi: eta * abar * g + m,
            grad: abar * (eta * grad_g + g * grad_eta),
            hess: hess.scale(abar),
        }
    }
}

/// Parameters of the time-dependent weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanParams {
    pub s: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub time_clamp: f64,
}

impl CarlemanParams {
    /// Chooses `α` as `1.05 × max e^{λψ}` over the given points and all weights,
    /// and the default clamp `T/64`.
    pub fn from_samples(
        weights: &[&dyn WeightField],
        points: &[Vec2],
        s: f64,
        lambda: f64,
        horizon: f64,
    ) -> Result<Self> {
        if !(s > 0.0 && lambda > 0.0 && horizon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "need s, λ, T > 0 (got {s}, {lambda}, {horizon})"
            )));
        }
        let max_psi = weights
            .iter()
            .flat_map(|w| points.iter().map(move |&p| w.psi(p)))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            s,
            lambda,
            alpha: ALPHA_HEADROOM * (lambda * max_psi).exp(),
            horizon,
            time_clamp: horizon / 64.0,
        })
    }

    pub fn with_s(self, s: f64) -> Self {
        Self { s, ..self }
    }

    /// Replaces the clamp `δₜ`; requires `0 < δₜ < T`.
    pub fn with_time_clamp(self, time_clamp: f64) -> Result<Self> {
        if !(time_clamp > 0.0 && time_clamp < self.horizon) {
            return Err(Error::InvalidInput(format!(
                "time clamp must lie in (0, T = {}), got {time_clamp}",
                self.horizon
            )));
        }
        Ok(Self { time_clamp, ..self })
    }

    /// Largest admissible `|t|`.
    pub fn time_limit(&self) -> f64 {
        self.horizon - self.time_clamp
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let limit = self.time_limit();
        if t.abs() > limit * (1.0 + 1e-12) {
            return Err(Error::TimeSingular { t, limit });
        }
        Ok((self.horizon - t) * (self.horizon + t))
    }
}

/// `θ(x, t) = e^{λψ(x)} / ((T − t)(T + t))`.
pub fn eval_theta(weight: &dyn WeightField, params: &CarlemanParams, x: Vec2, t: f64) -> Result<f64> {
    let den = params.check_time(t)?;
    Ok((params.lambda * weight.psi(x)).exp() / den)
}

/// `φ(x, t) = (α − e^{λψ(x)}) / ((T − t)(T + t))`.
pub fn eval_phi(weight: &dyn WeightField, params: &CarlemanParams, x: Vec2, t: f64) -> Result<f64> {
    let den = params.check_time(t)?;
    Ok((params.alpha - (params.lambda * weight.psi(x)).exp()) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    #[serde(rename = "Tr")]
    Transmission,
    H1,
    H2,
    H3,
    H4,
    H5,
    #[serde(rename = "strong_convexity")]
    StrongConvexity,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Hypothesis::Transmission => "Tr",
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
            Hypothesis::H4 => "H4",
            Hypothesis::H5 => "H5",
            Hypothesis::StrongConvexity => "strong_convexity",
        };
        f.write_str(s)
    }
}

/// One certified condition. `value` is the raw extremal quantity that was
/// measured; `margin` is signed so that `ok == (margin > 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub name: Hypothesis,
    pub ok: bool,
    pub value: f64,
    pub margin: f64,
    pub worst_point: Vec2,
}

impl HypothesisRecord {
    fn new(name: Hypothesis, value: f64, margin: f64, worst_point: Vec2) -> Self {
        Self {
            name,
            ok: margin > 0.0,
            value,
            margin,
            worst_point,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct HypothesisReport {
    pub records: Vec<HypothesisRecord>,
}

impl HypothesisReport {
    pub fn all_ok(&self) -> bool {
        self.records.iter().all(|r| r.ok)
    }

    pub fn get(&self, name: Hypothesis) -> Option<&HypothesisRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisRecord> {
        self.records.iter().filter(|r| !r.ok)
    }
}

/// Sampling density for [`verify_hypotheses`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifySettings {
    /// Interior grid points per dimension (≥ 64).
    pub grid_resolution: usize,
    /// Interface samples (≥ 256).
    pub interface_samples: usize,
    /// Tolerance on the equality conditions (Tr, H1).
    pub tolerance: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            grid_resolution: 128,
            interface_samples: 512,
            tolerance: 1e-8,
        }
    }
}

/// Checks (Tr), (H1)–(H4) and strong convexity of `Γ₁` on sampled points.
///
/// Interface conditions use one-sided analytic gradients at points of the
/// layout's interface. (H3) and (H4) are checked on interior grid points
/// outside the weight's outer cutoff ball; (H4) is the sufficient form
/// `2a²D²ψ ≻ 0`, which drops the nonnegative `λ` term and uses `∇a = 0` in
/// each subdomain.
pub fn verify_hypotheses(
    weight: &TransmissionWeight,
    layout: &DomainLayout,
    settings: VerifySettings,
) -> HypothesisReport {
    let coeff = weight.coeff();
    let mut records = Vec::with_capacity(6);

    let conv = layout
        .interface
        .certify_strong_convexity(crate::geometry::DEFAULT_CONVEXITY_SCAN);
    records.push(HypothesisRecord::new(
        Hypothesis::StrongConvexity,
        conv.min_curvature,
        conv.min_curvature,
        layout.interface.point(conv.worst_angle),
    ));

    let n_iface = settings.interface_samples.max(256);
    let level = weight.interface_value();
    let (mut h1_dev, mut h1_pt) = (0.0_f64, Vec2::ZERO);
    let (mut tr_res, mut tr_pt) = (0.0_f64, Vec2::ZERO);
    let (mut h2_max, mut h2_pt) = (f64::NEG_INFINITY, Vec2::ZERO);
    for k in 0..n_iface {
        let t = 2.0 * PI * k as f64 / n_iface as f64;
        let p = layout.interface.point(t);
        let nu1 = layout.interface.normal(t);
        let inner = weight.sample(p, Region::Inner);
        let outer = weight.sample(p, Region::Outer);
        let dev = (inner.psi - outer.psi)
            .abs()
            .max((inner.psi - level).abs())
            .max((outer.psi - level).abs());
        if dev > h1_dev {
            h1_dev = dev;
            h1_pt = p;
        }
        let dn1 = inner.grad.dot(nu1);
        let dn2 = -outer.grad.dot(nu1);
        let res = (coeff.a1 * dn1 + coeff.a2 * dn2).abs();
        if res > tr_res {
            tr_res = res;
            tr_pt = p;
        }
        if dn1 + dn2 > h2_max {
            h2_max = dn1 + dn2;
            h2_pt = p;
        }
    }
    let tol = settings.tolerance;
    // Tr covers both lines: continuity of ψ and of the flux
    let tr_value = tr_res.max(h1_dev);
    records.push(HypothesisRecord::new(
        Hypothesis::Transmission,
        tr_value,
        tol - tr_value,
        if tr_res >= h1_dev { tr_pt } else { h1_pt },
    ));
    records.push(HypothesisRecord::new(Hypothesis::H1, h1_dev, tol - h1_dev, h1_pt));
    records.push(HypothesisRecord::new(Hypothesis::H2, h2_max, -h2_max, h2_pt));

    let (h3, h3_pt, h4, h4_pt) = scan_interior(weight, layout, settings.grid_resolution.max(64));
    records.push(HypothesisRecord::new(Hypothesis::H3, h3, h3, h3_pt));
    records.push(HypothesisRecord::new(Hypothesis::H4, h4, h4, h4_pt));

    HypothesisReport { records }
}

fn scan_interior(
    weight: &TransmissionWeight,
    layout: &DomainLayout,
    res: usize,
) -> (f64, Vec2, f64, Vec2) {
    let (lo, hi) = bounding_box(layout);
    let coeff = weight.coeff();
    let (mut h3, mut h3_pt) = (f64::INFINITY, Vec2::ZERO);
    let (mut h4, mut h4_pt) = (f64::INFINITY, Vec2::ZERO);
    for i in 0..res {
        for j in 0..res {
            let p = Vec2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / res as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / res as f64,
            );
            if !layout.outer.contains(p) || (p - weight.center()).norm() <= weight.cutoff().r_outer {
                continue;
            }
            let region = layout.region(p);
            if layout.classify(p, 1e-9) == Region::Interface {
                continue;
            }
            let s = weight.sample(p, region);
            let g = s.grad.norm();
            if g < h3 {
                h3 = g;
                h3_pt = p;
            }
            let a = coeff.value(region);
            let e = s.hess.scale(2.0 * a * a).min_eigenvalue();
            if e < h4 {
                h4 = e;
                h4_pt = p;
            }
        }
    }
    (h3, h3_pt, h4, h4_pt)
}

fn bounding_box(layout: &DomainLayout) -> (Vec2, Vec2) {
    match layout.outer {
        crate::geometry::OuterDomain::Rectangle {
            x_min,
            x_max,
            y_min,
            y_max,
        } => (Vec2::new(x_min, y_min), Vec2::new(x_max, y_max)),
        crate::geometry::OuterDomain::Disk { center, radius } => (
            center - Vec2::new(radius, radius),
            center + Vec2::new(radius, radius),
        ),
    }
}

/// Two weights centered at distinct interior points with the radius `ε` that
/// makes each dominate the other near the other's center.
#[derive(Debug, Clone)]
pub struct EpsilonPair {
    pub weights: [TransmissionWeight; 2],
    pub epsilon: f64,
    /// Half distance between the centers.
    pub half_distance: f64,
    /// Distance from each center to `Γ₁`.
    pub alpha: [f64; 2],
    /// Largest distance from each center to `Γ₁`.
    pub reach: [f64; 2],
    /// `ψ^j − ψ^k` scanned on `B_ε(x_k)`.
    pub h5: [HypothesisRecord; 2],
}

impl EpsilonPair {
    pub fn weight_refs(&self) -> [&dyn WeightField; 2] {
        [&self.weights[0], &self.weights[1]]
    }
}

/// Builds the pair centered at `x1`, `x2` with
/// `ε = 0.9·min(dα₁/D₂, dα₂/D₁, d)` and cutoff radii `(ε/2, ε)`, then scans
/// the domination condition on both balls.
pub fn build_epsilon_pair(
    interface: &RadialInterface,
    centers: [Vec2; 2],
    coeff: PiecewiseCoefficient,
    m2: f64,
) -> Result<EpsilonPair> {
    let [x1, x2] = centers;
    let d = 0.5 * (x1 - x2).norm();
    if d < crate::geometry::CENTER_EPS {
        return Err(Error::DegeneratePair);
    }
    for x in centers {
        if interface.gauge(x).map(|m| m >= 1.0).unwrap_or(false) {
            return Err(Error::Geometry(format!(
                "center ({}, {}) is not inside Ω₁",
                x.x, x.y
            )));
        }
    }
    let (alpha1, reach1) = interface.distance_extremes(x1);
    let (alpha2, reach2) = interface.distance_extremes(x2);
    let epsilon = EPSILON_SAFETY * (d * alpha1 / reach2).min(d * alpha2 / reach1).min(d);
    let radii = (0.5 * epsilon, epsilon);
    let w1 = build_weight(interface, x1, coeff, m2, radii)?;
    let w2 = build_weight(interface, x2, coeff, m2, radii)?;
    let h5 = [
        domination_scan(&w2, &w1, x1, epsilon),
        domination_scan(&w1, &w2, x2, epsilon),
    ];
    Ok(EpsilonPair {
        weights: [w1, w2],
        epsilon,
        half_distance: d,
        alpha: [alpha1, alpha2],
        reach: [reach1, reach2],
        h5,
    })
}

/// `min (ψ^j − ψ^k)` over a 64² grid restricted to `B_ε(x_k)`.
fn domination_scan(
    dominant: &TransmissionWeight,
    other: &TransmissionWeight,
    ball_center: Vec2,
    radius: f64,
) -> HypothesisRecord {
    let n = 64;
    let (mut min, mut at) = (f64::INFINITY, ball_center);
    for i in 0..n {
        for j in 0..n {
            let p = ball_center
                + Vec2::new(
                    radius * (2.0 * (i as f64 + 0.5) / n as f64 - 1.0),
                    radius * (2.0 * (j as f64 + 0.5) / n as f64 - 1.0),
                );
            if (p - ball_center).norm() >= radius {
                continue;
            }
            let gap = dominant.psi(p) - other.psi(p);
            if gap < min {
                min = gap;
                at = p;
            }
        }
    }
    HypothesisRecord::new(Hypothesis::H5, min, min, at)
}

/// Outer-boundary samples where `∇ψ · ν > 0`.
pub fn sigma_plus(weight: &dyn WeightField, samples: &[BoundarySample]) -> Vec<BoundarySample> {
    samples
        .iter()
        .filter(|b| weight.sample(b.point, weight.side(b.point)).grad.dot(b.normal) > 0.0)
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OuterDomain;

    fn disk(r: f64) -> RadialInterface {
        RadialInterface::disk(Vec2::ZERO, r, 64).unwrap()
    }

    fn coeff(a1: f64, a2: f64) -> PiecewiseCoefficient {
        PiecewiseCoefficient::new(a1, a2).unwrap()
    }

    #[test]
    fn cutoff_profile_is_c2_and_bounded() {
        let c = Cutoff::new(Vec2::ZERO, 0.1, 0.3).unwrap();
        assert_eq!(c.profile(0.05), (0.0, 0.0, 0.0));
        assert_eq!(c.profile(0.5), (1.0, 0.0, 0.0));
        for &r in &[0.1 + 1e-9, 0.3 - 1e-9] {
            let (_, d1, d2) = c.profile(r);
            assert!(d1.abs() < 1e-6 && d2.abs() < 1e-5);
        }
        let h = 1e-6;
        for k in 1..40 {
            let r = 0.1 + 0.005 * k as f64;
            let (v, d1, d2) = c.profile(r);
            assert!((0.0..=1.0).contains(&v));
            assert!(d1 >= 0.0);
            let fd1 = (c.profile(r + h).0 - c.profile(r - h).0) / (2.0 * h);
            let fd2 = (c.profile(r + h).1 - c.profile(r - h).1) / (2.0 * h);
            assert!((fd1 - d1).abs() < 1e-6 && (fd2 - d2).abs() < 1e-4);
        }
    }

    #[test]
    fn disk_weight_levels() {
        let w = build_weight(&disk(1.0), Vec2::ZERO, coeff(2.0, 1.0), 1.0, (0.1, 0.2)).unwrap();
        assert_eq!(w.m1(), 2.0);
        for k in 0..32 {
            let p = Vec2::polar(1.0, 0.2 * k as f64);
            assert!((w.sample(p, Region::Inner).psi - 3.0).abs() < 1e-12);
            assert!((w.sample(p, Region::Outer).psi - 3.0).abs() < 1e-12);
        }
        let at_center = w.sample(Vec2::ZERO, Region::Inner);
        assert_eq!(at_center.psi, 2.0);
        assert_eq!(at_center.grad, Vec2::ZERO);
    }

    #[test]
    fn jump_sign_and_geometry_errors() {
        assert!(matches!(
            build_weight(&disk(1.0), Vec2::ZERO, coeff(1.0, 2.0), 1.0, (0.1, 0.2)),
            Err(Error::JumpSign { .. })
        ));
        assert!(matches!(
            build_weight(&disk(1.0), Vec2::new(0.7, 0.0), coeff(2.0, 1.0), 1.0, (0.2, 0.4)),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let iface = RadialInterface::fourier(Vec2::ZERO, 1.0, &[(3, 0.05)], 256).unwrap();
        let w = build_weight(&iface, Vec2::new(0.1, -0.05), coeff(2.0, 1.0), 1.0, (0.1, 0.3)).unwrap();
        let h = 1e-4;
        // inside the cutoff shell, inside Ω₁ away from Γ₁, and in Ω₂
        for &p in &[Vec2::new(0.25, 0.05), Vec2::new(-0.5, 0.3), Vec2::new(1.3, 0.4)] {
            let side = w.side(p);
            let f = |q: Vec2| w.sample(q, side).psi;
            let s = w.sample(p, side);
            let ex = Vec2::new(h, 0.0);
            let ey = Vec2::new(0.0, h);
            let gx = (f(p + ex) - f(p - ex)) / (2.0 * h);
            let gy = (f(p + ey) - f(p - ey)) / (2.0 * h);
            assert!((s.grad.x - gx).abs() < 1e-6 && (s.grad.y - gy).abs() < 1e-6);
            let fxx = (f(p + ex) - 2.0 * f(p) + f(p - ex)) / (h * h);
            let fyy = (f(p + ey) - 2.0 * f(p) + f(p - ey)) / (h * h);
            let fxy = (f(p + ex + ey) - f(p + ex - ey) - f(p - ex + ey) + f(p - ex - ey)) / (4.0 * h * h);
            assert!((s.hess.xx - fxx).abs() < 1e-3, "{p:?}: {} vs {fxx}", s.hess.xx);
            assert!((s.hess.xy - fxy).abs() < 1e-3);
            assert!((s.hess.yy - fyy).abs() < 1e-3);
        }
    }

    #[test]
    fn time_weights() {
        let w = build_weight(&disk(1.0), Vec2::ZERO, coeff(2.0, 1.0), 1.0, (0.1, 0.2)).unwrap();
        let pts = [Vec2::new(0.5, 0.5), Vec2::new(1.4, 1.4)];
        let params = CarlemanParams::from_samples(&[&w], &pts, 10.0, 1e-12, 2.0).unwrap();
        let x = Vec2::new(0.3, 0.2);
        assert!((eval_theta(&w, &params, x, 0.0).unwrap() - 0.25).abs() < 1e-10);
        let params = CarlemanParams::from_samples(&[&w], &pts, 10.0, 1.5, 2.0).unwrap();
        for &t in &[0.0, 0.3, 1.9] {
            let a = eval_theta(&w, &params, x, t).unwrap();
            let b = eval_theta(&w, &params, x, -t).unwrap();
            assert_eq!(a, b);
            assert!(eval_phi(&w, &params, x, t).unwrap() > 0.0);
        }
        let phi0 = eval_phi(&w, &params, x, 0.0).unwrap();
        let e = (params.lambda * w.psi(x)).exp();
        assert!((phi0 * 4.0 + e - params.alpha).abs() < 1e-10 * params.alpha);
        assert!(matches!(
            eval_theta(&w, &params, x, 1.99),
            Err(Error::TimeSingular { .. })
        ));
    }

    #[test]
    fn disk_hypotheses_pass_with_analytic_values() {
        let layout = DomainLayout::new(OuterDomain::square(1.5), disk(1.0)).unwrap();
        let w = build_weight(&layout.interface, Vec2::ZERO, coeff(2.0, 1.0), 1.0, (0.1, 0.2)).unwrap();
        let rep = verify_hypotheses(&w, &layout, VerifySettings { grid_resolution: 64, ..Default::default() });
        assert!(rep.all_ok(), "{rep:?}");
        let h2 = rep.get(Hypothesis::H2).unwrap();
        assert!((h2.value + 2.0).abs() < 1e-10);
        assert!(rep.get(Hypothesis::Transmission).unwrap().value < 1e-12);
        // 2a²·ā·(2/R²): 16 inside, 8 outside
        assert!((rep.get(Hypothesis::H4).unwrap().value - 8.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_jump_fails_h2() {
        let layout = DomainLayout::new(OuterDomain::square(1.5), disk(1.0)).unwrap();
        let w = build_weight_unchecked(&layout.interface, Vec2::ZERO, coeff(1.0, 2.0), 1.0, (0.1, 0.2))
            .unwrap();
        let rep = verify_hypotheses(&w, &layout, VerifySettings { grid_resolution: 64, ..Default::default() });
        let h2 = rep.get(Hypothesis::H2).unwrap();
        assert!(!h2.ok);
        assert!((h2.value - 2.0).abs() < 1e-10);
        assert!(rep.get(Hypothesis::Transmission).unwrap().ok);
    }

    #[test]
    fn epsilon_pair_on_disk() {
        let pair = build_epsilon_pair(
            &disk(1.0),
            [Vec2::new(-0.3, 0.0), Vec2::new(0.3, 0.0)],
            coeff(2.0, 1.0),
            1.0,
        )
        .unwrap();
        let expected = 0.9 * 0.3 * 0.7 / 1.3;
        assert!((pair.epsilon - expected).abs() < 1e-10);
        assert!(pair.h5.iter().all(|r| r.ok && r.margin > 0.0));
        assert!(matches!(
            build_epsilon_pair(&disk(1.0), [Vec2::ZERO, Vec2::ZERO], coeff(2.0, 1.0), 1.0),
            Err(Error::DegeneratePair)
        ));
    }

    #[test]
    fn sigma_plus_sets() {
        let w = build_weight(&disk(1.0), Vec2::ZERO, coeff(2.0, 1.0), 1.0, (0.1, 0.2)).unwrap();
        let outer = OuterDomain::Disk { center: Vec2::ZERO, radius: 3.0 };
        let samples = outer.boundary_samples(512);
        assert_eq!(sigma_plus(&w, &samples).len(), 512);
        assert!(sigma_plus(&w, &[]).is_empty());

        // center pushed toward the bottom of Γ₁ in a wide box: the dilated
        // level curves tilt away from the top side far from the center
        let off = build_weight(&disk(1.0), Vec2::new(0.0, -0.9), coeff(2.0, 1.0), 1.0, (0.02, 0.05)).unwrap();
        let wide = OuterDomain::Rectangle { x_min: -4.0, x_max: 4.0, y_min: -1.2, y_max: 1.2 };
        let plus = sigma_plus(&off, &wide.boundary_samples(512));
        assert!(!plus.is_empty() && plus.len() < 512, "{}", plus.len());
        assert!(plus.iter().all(|b| off.sample(b.point, Region::Outer).grad.dot(b.normal) > 0.0));
    }
}
