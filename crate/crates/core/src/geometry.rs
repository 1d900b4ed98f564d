//! Plane geometry of the interior domain: a star-shaped interface stored as a
//! periodic radial function around a center, its gauge `μ(x) = |x − c| / ρ(θ(x))`,
//! the polar curvature formula and the Hessian of `μ²`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;
/// Points closer than this to the center are rejected by the gauge evaluators.
pub const CENTER_EPS: f64 = 1e-12;
/// Default number of angles scanned when certifying strong convexity.
pub const DEFAULT_CONVEXITY_SCAN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Symmetrized outer product `½(a ⊗ b + b ⊗ a)`.
    pub fn sym_product(self, o: Vec2) -> Sym2 {
        Sym2::new(self.x * o.x, 0.5 * (self.x * o.y + self.y * o.x), self.y * o.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self * v.x, self * v.y)
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(c * self.xx, c * self.xy, c * self.yy)
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let rad = half_diff.hypot(self.xy);
        (mean - rad, mean + rad)
    }

    pub fn min_eigenvalue(self) -> f64 {
        self.eigenvalues().0
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// `Q M Qᵀ` with `Q` the rotation by `angle`.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let xx = c * c * self.xx - 2.0 * c * s * self.xy + s * s * self.yy;
        let xy = c * s * (self.xx - self.yy) + (c * c - s * s) * self.xy;
        let yy = s * s * self.xx + 2.0 * c * s * self.xy + c * c * self.yy;
        Self::new(xx, xy, yy)
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

/// C² periodic cubic spline on uniform nodes `θ_k = 2πk/n`.
#[derive(Debug, Clone, PartialEq)]
struct PeriodicSpline {
    values: Vec<f64>,
    second: Vec<f64>,
    step: f64,
}

impl PeriodicSpline {
    fn new(values: Vec<f64>) -> Self {
        let n = values.len();
        let step = TWO_PI / n as f64;
        let rhs: Vec<f64> = (0..n)
            .map(|k| {
                let prev = values[(k + n - 1) % n];
                let next = values[(k + 1) % n];
                6.0 * (next - 2.0 * values[k] + prev) / (step * step)
            })
            .collect();
        let second = solve_cyclic_tridiagonal(1.0, 4.0, 1.0, &rhs);
        Self {
            values,
            second,
            step,
        }
    }

    /// Value, first and second derivative at `theta`.
    fn eval(&self, theta: f64) -> (f64, f64, f64) {
        let n = self.values.len();
        let h = self.step;
        let wrapped = theta.rem_euclid(TWO_PI);
        let mut k = (wrapped / h).floor() as usize;
        if k >= n {
            k = n - 1;
        }
        let t = wrapped - k as f64 * h;
        let k1 = (k + 1) % n;
        let (y0, y1) = (self.values[k], self.values[k1]);
        let (m0, m1) = (self.second[k], self.second[k1]);
        let ht = h - t;
        let c0 = y0 / h - m0 * h / 6.0;
        let c1 = y1 / h - m1 * h / 6.0;
        let value = m0 * ht * ht * ht / (6.0 * h) + m1 * t * t * t / (6.0 * h) + c0 * ht + c1 * t;
        let d1 = -m0 * ht * ht / (2.0 * h) + m1 * t * t / (2.0 * h) - c0 + c1;
        let d2 = m0 * ht / h + m1 * t / h;
        (value, d1, d2)
    }
}

/// Solves the cyclic system `sub·x_{k−1} + diag·x_k + sup·x_{k+1} = rhs_k`
/// (indices mod n) with Sherman–Morrison on top of the Thomas algorithm.
fn solve_cyclic_tridiagonal(sub: f64, diag: f64, sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let gamma = -diag;
    let mut b = vec![diag; n];
    b[0] = diag - gamma;
    b[n - 1] = diag - sup * sub / gamma;
    let x = thomas(sub, &b, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = sub;
    let z = thomas(sub, &b, sup, &u);
    let fact = (x[0] + sup * x[n - 1] / gamma) / (1.0 + z[0] + sup * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(sub: f64, diag: &[f64], sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub * c[i - 1];
        c[i] = sup / m;
        d[i] = (rhs[i] - sub * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Polar data `(ρ, ρ_θ, ρ_θθ)` of the interface at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSample {
    pub rho: f64,
    pub d_rho: f64,
    pub dd_rho: f64,
}

/// Star-shaped closed curve `c + ρ(θ)(cos θ, sin θ)` with a periodic spline for `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialInterface {
    center: Vec2,
    spline: PeriodicSpline,
}

impl RadialInterface {
    /// Builds an interface from radii sampled at the uniform angles `2πk/n`.
    pub fn from_radii(center: Vec2, radii: Vec<f64>) -> Result<Self> {
        if radii.len() < 16 {
            return Err(Error::InvalidInterface(format!(
                "need at least 16 samples, got {}",
                radii.len()
            )));
        }
        if let Some((k, r)) = radii
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::InvalidInterface(format!(
                "radius {r} at sample {k} is not positive"
            )));
        }
        Ok(Self {
            center,
            spline: PeriodicSpline::new(radii),
        })
    }

    /// Builds an interface from `(angle, radius)` pairs; the angles must be the
    /// uniform grid `2πk/n`, in order.
    pub fn from_samples(center: Vec2, samples: &[(f64, f64)]) -> Result<Self> {
        let n = samples.len();
        if n < 16 {
            return Err(Error::InvalidInterface(format!(
                "need at least 16 samples, got {n}"
            )));
        }
        let step = TWO_PI / n as f64;
        for (k, (angle, _)) in samples.iter().enumerate() {
            if (angle - k as f64 * step).abs() > 1e-9 {
                return Err(Error::InvalidInterface(format!(
                    "angle {angle} at sample {k} is not on the uniform grid (expected {})",
                    k as f64 * step
                )));
            }
        }
        Self::from_radii(center, samples.iter().map(|s| s.1).collect())
    }

    /// Samples `radius(θ)` at `n` uniform angles.
    pub fn from_fn(center: Vec2, n: usize, radius: impl Fn(f64) -> f64) -> Result<Self> {
        let step = TWO_PI / n as f64;
        Self::from_radii(center, (0..n).map(|k| radius(k as f64 * step)).collect())
    }

    pub fn disk(center: Vec2, radius: f64, n: usize) -> Result<Self> {
        Self::from_fn(center, n, |_| radius)
    }

    /// `ρ(θ) = c0 + Σ c_k cos(kθ)`.
    pub fn fourier(center: Vec2, c0: f64, modes: &[(u32, f64)], n: usize) -> Result<Self> {
        Self::from_fn(center, n, |t| {
            c0 + modes
                .iter()
                .map(|&(k, c)| c * (k as f64 * t).cos())
                .sum::<f64>()
        })
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn n_samples(&self) -> usize {
        self.spline.values.len()
    }

    pub fn radii(&self) -> &[f64] {
        &self.spline.values
    }

    pub fn sample(&self, theta: f64) -> RadialSample {
        let (rho, d_rho, dd_rho) = self.spline.eval(theta);
        RadialSample { rho, d_rho, dd_rho }
    }

    pub fn rho(&self, theta: f64) -> f64 {
        self.spline.eval(theta).0
    }

    pub fn point(&self, theta: f64) -> Vec2 {
        self.center + Vec2::polar(self.rho(theta), theta)
    }

    /// Outward unit normal of the curve at parameter `theta`.
    pub fn normal(&self, theta: f64) -> Vec2 {
        let s = self.sample(theta);
        let (sn, cs) = theta.sin_cos();
        let tangent = Vec2::new(s.d_rho * cs - s.rho * sn, s.d_rho * sn + s.rho * cs);
        let n = Vec2::new(tangent.y, -tangent.x);
        (1.0 / n.norm()) * n
    }

    /// Curvature of the polar curve, `(ρ² + 2ρ_θ² − ρρ_θθ) / (ρ² + ρ_θ²)^{3/2}`.
    pub fn curvature(&self, theta: f64) -> f64 {
        let s = self.sample(theta);
        let num = s.rho * s.rho + 2.0 * s.d_rho * s.d_rho - s.rho * s.dd_rho;
        let den = (s.rho * s.rho + s.d_rho * s.d_rho).powf(1.5);
        num / den
    }

    /// Minimum curvature over a uniform angle scan and whether it is positive.
    /// The scan uses at least four angles per spline sample.
    pub fn certify_strong_convexity(&self, n_scan: usize) -> ConvexityReport {
        let n = n_scan.max(4 * self.n_samples());
        let (min_curvature, worst_angle) = (0..n)
            .map(|k| {
                let t = TWO_PI * k as f64 / n as f64;
                (self.curvature(t), t)
            })
            .fold((f64::INFINITY, 0.0), |acc, c| if c.0 < acc.0 { c } else { acc });
        ConvexityReport {
            min_curvature,
            worst_angle,
            ok: min_curvature > 0.0,
        }
    }

    fn polar_of(&self, x: Vec2) -> Result<(f64, f64)> {
        let d = x - self.center;
        let r = d.norm();
        if r < CENTER_EPS {
            return Err(Error::GaugeSingular);
        }
        Ok((r, d.angle()))
    }

    /// Gauge `μ(x) = |x − c| / ρ(θ(x))`.
    pub fn gauge(&self, x: Vec2) -> Result<f64> {
        let (r, theta) = self.polar_of(x)?;
        Ok(r / self.rho(theta))
    }

    /// Gradient of `μ²`.
    pub fn gauge_sq_gradient(&self, x: Vec2) -> Result<Vec2> {
        let (r, theta) = self.polar_of(x)?;
        let s = self.sample(theta);
        let radial = 2.0 * r / (s.rho * s.rho);
        let angular = -2.0 * r * s.d_rho / (s.rho * s.rho * s.rho);
        let (sn, cs) = theta.sin_cos();
        Ok(Vec2::new(
            radial * cs - angular * sn,
            radial * sn + angular * cs,
        ))
    }

    /// Hessian of `μ²` (no coefficient factor): the polar Hessian
    /// `(2/ρ²)[[1, −ρ_θ/ρ], [−ρ_θ/ρ, (3ρ_θ² − ρρ_θθ + ρ²)/ρ²]]` rotated by `θ(x)`.
    /// It is homogeneous of degree zero about the center.
    pub fn gauge_hessian(&self, x: Vec2) -> Result<Sym2> {
        let (_, theta) = self.polar_of(x)?;
        Ok(self.polar_gauge_hessian(theta).rotated(theta))
    }

    /// The Hessian of `μ²` in the polar frame `(e_r, e_θ)` at angle `theta`.
    pub fn polar_gauge_hessian(&self, theta: f64) -> Sym2 {
        let s = self.sample(theta);
        let rho2 = s.rho * s.rho;
        let b = s.d_rho / s.rho;
        let c = (3.0 * s.d_rho * s.d_rho - s.rho * s.dd_rho + rho2) / rho2;
        Sym2::new(1.0, -b, c).scale(2.0 / rho2)
    }

    /// Eigenvalue pair `(r₁, r₂)` of the polar Hessian from the closed form:
    /// `d = (3ρ_θ² − ρρ_θθ + 2ρ²)/ρ²`, `m = (2ρ_θ² − ρρ_θθ + ρ²)/ρ²`,
    /// `r₂ = ½(d + √(d² − 4m))`, `r₁ = m / r₂`, both scaled by `2/ρ²`.
    pub fn gauge_hessian_eigen_closed_form(&self, theta: f64) -> (f64, f64) {
        let s = self.sample(theta);
        let rho2 = s.rho * s.rho;
        let d = (3.0 * s.d_rho * s.d_rho - s.rho * s.dd_rho + 2.0 * rho2) / rho2;
        let m = (2.0 * s.d_rho * s.d_rho - s.rho * s.dd_rho + rho2) / rho2;
        let r2 = 0.5 * (d + (d * d - 4.0 * m).max(0.0).sqrt());
        let r1 = m / r2;
        let scale = 2.0 / rho2;
        (scale * r1, scale * r2)
    }

    /// Smallest eigenvalue of `D²(μ²)` over scanned points with
    /// `mu_min ≤ μ ≤ mu_max` (angles × a few gauge levels).
    pub fn hessian_lower_bound(&self, mu_min: f64, mu_max: f64, n_scan: usize) -> f64 {
        let levels: Vec<f64> = if mu_max > mu_min {
            (0..5)
                .map(|k| mu_min + (mu_max - mu_min) * k as f64 / 4.0)
                .collect()
        } else {
            vec![mu_min]
        };
        let n = n_scan.max(1);
        let mut best = f64::INFINITY;
        for k in 0..n {
            let theta = TWO_PI * k as f64 / n as f64;
            let rho = self.rho(theta);
            for &mu in &levels {
                let x = self.center + Vec2::polar(mu * rho, theta);
                if let Ok(h) = self.gauge_hessian(x) {
                    best = best.min(h.min_eigenvalue());
                }
            }
        }
        best
    }

    /// Radial representation of the same curve about another interior point.
    /// Each new radius is the exit distance of the ray from `new_center`,
    /// found by bisection on the gauge (requires a convex interior).
    pub fn recentered(&self, new_center: Vec2, n: usize) -> Result<Self> {
        if (new_center - self.center).norm() < CENTER_EPS {
            return Ok(self.clone());
        }
        let mu0 = self.gauge(new_center)?;
        if mu0 >= 1.0 {
            return Err(Error::Geometry(format!(
                "point ({}, {}) is not inside the interface",
                new_center.x, new_center.y
            )));
        }
        let max_rho = self
            .spline
            .values
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);
        let far = 2.0 * (max_rho * 1.5 + (new_center - self.center).norm());
        let radii = (0..n)
            .map(|k| {
                let u = Vec2::polar(1.0, TWO_PI * k as f64 / n as f64);
                let (mut lo, mut hi) = (0.0, far);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let mu = self.gauge(new_center + mid * u).unwrap_or(0.0);
                    if mu < 1.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 * far {
                        break;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        Self::from_radii(new_center, radii)
    }

    /// Closest and farthest distance from `x` to the curve (dense scan refined
    /// by golden-section search on the angle).
    pub fn distance_extremes(&self, x: Vec2) -> (f64, f64) {
        let dist = |t: f64| (self.point(t) - x).norm();
        let n = 4 * self.n_samples().max(1024);
        let step = TWO_PI / n as f64;
        let (mut tmin, mut tmax) = (0.0, 0.0);
        let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..n {
            let t = k as f64 * step;
            let d = dist(t);
            if d < dmin {
                dmin = d;
                tmin = t;
            }
            if d > dmax {
                dmax = d;
                tmax = t;
            }
        }
        let dmin = golden_min(dist, tmin - step, tmin + step).min(dmin);
        let dmax = (-golden_min(|t| -dist(t), tmax - step, tmax + step)).max(dmax);
        (dmin, dmax)
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub min_curvature: f64,
    pub worst_angle: f64,
    pub ok: bool,
}

/// Outer domain `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OuterDomain {
    Rectangle {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    Disk {
        center: Vec2,
        radius: f64,
    },
}

/// A point of the outer boundary with its outward normal and arc-length weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: Vec2,
    pub normal: Vec2,
    pub weight: f64,
}

impl OuterDomain {
    pub fn square(half_width: f64) -> Self {
        OuterDomain::Rectangle {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }

    /// Signed distance to the boundary, positive inside.
    pub fn inner_distance(&self, x: Vec2) -> f64 {
        match *self {
            OuterDomain::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => (x.x - x_min)
                .min(x_max - x.x)
                .min(x.y - y_min)
                .min(y_max - x.y),
            OuterDomain::Disk { center, radius } => radius - (x - center).norm(),
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.inner_distance(x) > 0.0
    }

    pub fn perimeter(&self) -> f64 {
        match *self {
            OuterDomain::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => 2.0 * ((x_max - x_min) + (y_max - y_min)),
            OuterDomain::Disk { radius, .. } => TWO_PI * radius,
        }
    }

    /// `n` boundary samples; on a rectangle they are spread over the sides
    /// proportionally to length, at side midpoints of equal sub-segments.
    pub fn boundary_samples(&self, n: usize) -> Vec<BoundarySample> {
        match *self {
            OuterDomain::Disk { center, radius } => (0..n)
                .map(|k| {
                    let t = TWO_PI * k as f64 / n as f64;
                    let normal = Vec2::polar(1.0, t);
                    BoundarySample {
                        point: center + radius * normal,
                        normal,
                        weight: TWO_PI * radius / n as f64,
                    }
                })
                .collect(),
            OuterDomain::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                let ds = self.perimeter() / n as f64;
                (0..n)
                    .map(|k| {
                        let s = (k as f64 + 0.5) * ds;
                        let w = x_max - x_min;
                        let h = y_max - y_min;
                        let (point, normal) = if s < w {
                            (Vec2::new(x_min + s, y_min), Vec2::new(0.0, -1.0))
                        } else if s < w + h {
                            (Vec2::new(x_max, y_min + (s - w)), Vec2::new(1.0, 0.0))
                        } else if s < 2.0 * w + h {
                            (Vec2::new(x_max - (s - w - h), y_max), Vec2::new(0.0, 1.0))
                        } else {
                            (
                                Vec2::new(x_min, y_max - (s - 2.0 * w - h)),
                                Vec2::new(-1.0, 0.0),
                            )
                        };
                        BoundarySample {
                            point,
                            normal,
                            weight: ds,
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// `Ω₁`, where `μ < 1`.
    Inner,
    /// `Ω₂ = Ω \ closure(Ω₁)`.
    Outer,
    /// Points with `|μ − 1|` within the requested band.
    Interface,
}

/// Outer domain together with the interior interface.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainLayout {
    pub outer: OuterDomain,
    pub interface: RadialInterface,
}

impl DomainLayout {
    /// Checks that the interface stays strictly inside the outer domain.
    /// Both outer shapes are convex and the interface is a closed star-shaped
    /// curve, so the exterior part `Ω₂` is connected once this holds.
    pub fn new(outer: OuterDomain, interface: RadialInterface) -> Result<Self> {
        let gap = interface_gap(&outer, &interface);
        if gap <= 0.0 {
            return Err(Error::Geometry(format!(
                "interface is not strictly inside the outer domain (min gap {gap})"
            )));
        }
        if !outer.contains(interface.center()) {
            return Err(Error::Geometry("interface center outside Ω".into()));
        }
        Ok(Self { outer, interface })
    }

    /// Minimum distance between the interface and the outer boundary.
    pub fn interface_gap(&self) -> f64 {
        interface_gap(&self.outer, &self.interface)
    }

    /// `Ω₁` when `μ < 1`, else `Ω₂`; the center itself belongs to `Ω₁`.
    pub fn region(&self, x: Vec2) -> Region {
        match self.interface.gauge(x) {
            Ok(mu) if mu >= 1.0 => Region::Outer,
            _ => Region::Inner,
        }
    }

    /// Like [`region`](Self::region) but reports points with `|μ − 1| ≤ band` as
    /// interface points.
    pub fn classify(&self, x: Vec2, band: f64) -> Region {
        match self.interface.gauge(x) {
            Ok(mu) if (mu - 1.0).abs() <= band => Region::Interface,
            Ok(mu) if mu > 1.0 => Region::Outer,
            _ => Region::Inner,
        }
    }
}

fn interface_gap(outer: &OuterDomain, interface: &RadialInterface) -> f64 {
    let n = 8 * interface.n_samples().max(128);
    (0..n)
        .map(|k| outer.inner_distance(interface.point(TWO_PI * k as f64 / n as f64)))
        .fold(f64::INFINITY, f64::min)
}
