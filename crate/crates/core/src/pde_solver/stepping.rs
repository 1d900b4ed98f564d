use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::banded::BandedLu;
use super::grid::Grid2D;
use crate::error::{Error, Result};
use crate::geometry::Vec2;

const I: Complex64 = Complex64::new(0.0, 1.0);
/// Tolerance on the `t = 0` compatibility check of [`extend_time`].
pub const EXTENSION_TOL: f64 = 1e-12;

/// Complex values on all grid nodes at equally spaced times `t0 + n·dt`,
/// `n = 0..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    n_nodes: usize,
    n_steps: usize,
    dt: f64,
    t0: f64,
    values: Vec<Complex64>,
}

impl SpaceTimeField {
    pub fn zeros(n_nodes: usize, n_steps: usize, dt: f64, t0: f64) -> Self {
        Self {
            n_nodes,
            n_steps,
            dt,
            t0,
            values: vec![Complex64::default(); n_nodes * (n_steps + 1)],
        }
    }

    pub fn from_values(n_nodes: usize, n_steps: usize, dt: f64, t0: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != n_nodes * (n_steps + 1) {
            return Err(Error::InvalidInput(format!(
                "expected {} values for {} nodes and {} steps, got {}",
                n_nodes * (n_steps + 1),
                n_nodes,
                n_steps,
                values.len()
            )));
        }
        Ok(Self {
            n_nodes,
            n_steps,
            dt,
            t0,
            values,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_times(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn snapshot(&self, n: usize) -> &[Complex64] {
        &self.values[n * self.n_nodes..(n + 1) * self.n_nodes]
    }

    pub fn snapshot_mut(&mut self, n: usize) -> &mut [Complex64] {
        &mut self.values[n * self.n_nodes..(n + 1) * self.n_nodes]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// `self − other`, requiring matching layouts.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            ..self.clone()
        })
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n_nodes != other.n_nodes || self.n_steps != other.n_steps || (self.dt - other.dt).abs() > 1e-14 * self.dt {
            return Err(Error::InvalidInput("space-time fields have different layouts".into()));
        }
        Ok(())
    }

    /// Largest modulus over all nodes and times.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Discrete `L²(Ω × (t0, t0 + n_steps·dt))` norm: interior nodes in space,
    /// trapezoid rule in time.
    pub fn l2_norm(&self, grid: &Grid2D) -> f64 {
        let mut acc = 0.0;
        for n in 0..self.n_times() {
            let w = if n == 0 || n == self.n_steps { 0.5 } else { 1.0 };
            acc += w * grid.l2_norm(self.snapshot(n)).powi(2);
        }
        (acc * self.dt).sqrt()
    }
}

/// Dirichlet data on `Γ`.
#[derive(Clone, Default)]
pub enum Dirichlet {
    /// Homogeneous data.
    #[default]
    Zero,
    /// Boundary values of the initial field, held fixed in time.
    FromInitial,
    /// `h(x, t)` evaluated at boundary nodes.
    Function(Arc<dyn Fn(Vec2, f64) -> Complex64 + Send + Sync>),
}

impl std::fmt::Debug for Dirichlet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dirichlet::Zero => f.write_str("Zero"),
            Dirichlet::FromInitial => f.write_str("FromInitial"),
            Dirichlet::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Number of steps covering `[0, horizon]` with a step no larger than `dt`,
/// and the resulting uniform step.
pub fn time_steps(horizon: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidStep(format!("dt must be positive, got {dt}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidStep(format!("horizon must be positive, got {horizon}")));
    }
    let n = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    Ok((n, horizon / n as f64))
}

/// Factored Crank–Nicolson propagator for `iy' + div(a∇y) + p·y = F` on a grid.
///
/// With `K = div_h(a∇_h) + diag(p)` restricted to interior nodes, one step solves
/// `(iI/dt + ½K) yⁿ⁺¹ = (iI/dt − ½K) yⁿ + ½(Fⁿ + Fⁿ⁺¹)` plus boundary couplings.
#[derive(Debug, Clone)]
pub struct CrankNicolson<'g> {
    grid: &'g Grid2D,
    potential: Vec<f64>,
    dt: f64,
    lu: BandedLu,
}

impl<'g> CrankNicolson<'g> {
    pub fn new(grid: &'g Grid2D, potential: &[f64], dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidStep(format!("dt must be positive, got {dt}")));
        }
        if potential.len() != grid.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "potential has {} values for {} nodes",
                potential.len(),
                grid.n_nodes()
            )));
        }
        if potential.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("potential is not finite".into()));
        }
        let (nx, ny) = grid.dims();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let mut m = BandedLu::zeros(grid.n_interior(), nx - 1);
        for j in 1..ny {
            for i in 1..nx {
                let r = grid.interior_index(i, j).expect("interior node");
                let faces = [
                    (grid.face_x(i, j), grid.interior_index(i + 1, j)),
                    (grid.face_x(i - 1, j), grid.interior_index(i - 1, j)),
                    (grid.face_y(i, j), grid.interior_index(i, j + 1)),
                    (grid.face_y(i, j - 1), grid.interior_index(i, j - 1)),
                ];
                let mut diag = potential[grid.index(i, j)];
                for (a, nb) in faces {
                    diag -= a * inv_h2;
                    if let Some(c) = nb {
                        m.add(r, c, Complex64::new(0.5 * a * inv_h2, 0.0));
                    }
                }
                m.add(r, r, Complex64::new(0.5 * diag, 1.0 / dt));
            }
        }
        Ok(Self {
            grid,
            potential: potential.to_vec(),
            dt,
            lu: m.factor()?,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Solves `M x = b` for `M = iI/dt + ½K` on interior unknowns.
    pub fn solve(&self, b: &mut [Complex64]) {
        self.lu.solve_in_place(b);
    }

    /// Solves `Mᴴ x = b`; `M` is complex symmetric so `Mᴴ = conj(M)`.
    pub fn solve_adjoint(&self, b: &mut [Complex64]) {
        self.lu.solve_conj_in_place(b);
    }

    /// Advances one step. `next` must carry the new boundary values on entry;
    /// `source` is `(Fⁿ, Fⁿ⁺¹)` on all nodes.
    pub fn step(&self, prev: &[Complex64], next: &mut [Complex64], source: Option<(&[Complex64], &[Complex64])>) {
        let g = self.grid;
        // interior rows of K applied to prev plus the couplings to the new boundary values
        let mut z = prev.to_vec();
        for b in g.boundary() {
            z[b.index] += next[b.index];
        }
        let kz = g.apply_operator(&z, &self.potential);
        let mut rhs = vec![Complex64::default(); g.n_interior()];
        for (k, r) in g.interior() {
            let mut v = prev[k] * (I / self.dt) - 0.5 * kz[k];
            if let Some((f0, f1)) = source {
                v += 0.5 * (f0[k] + f1[k]);
            }
            rhs[r] = v;
        }
        self.lu.solve_in_place(&mut rhs);
        for (k, r) in g.interior() {
            next[k] = rhs[r];
        }
    }

    /// Runs from `initial` over `n_steps` steps starting at `t0`.
    pub fn run(
        &self,
        initial: &[Complex64],
        dirichlet: &Dirichlet,
        source: Option<&dyn Fn(usize, &mut [Complex64])>,
        n_steps: usize,
        t0: f64,
    ) -> Result<SpaceTimeField> {
        let g = self.grid;
        if initial.len() != g.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "initial field has {} values for {} nodes",
                initial.len(),
                g.n_nodes()
            )));
        }
        let mut field = SpaceTimeField::zeros(g.n_nodes(), n_steps, self.dt, t0);
        field.snapshot_mut(0).copy_from_slice(initial);
        let boundary_values = |field: &mut SpaceTimeField, n: usize| {
            let t = t0 + n as f64 * self.dt;
            for b in g.boundary() {
                let v = match dirichlet {
                    Dirichlet::Zero => Complex64::default(),
                    Dirichlet::FromInitial => initial[b.index],
                    Dirichlet::Function(h) => h(b.point, t),
                };
                field.snapshot_mut(n)[b.index] = v;
            }
            for c in corners(g) {
                field.snapshot_mut(n)[c] = match dirichlet {
                    Dirichlet::Zero => Complex64::default(),
                    Dirichlet::FromInitial => initial[c],
                    Dirichlet::Function(h) => h(g.point(c), t),
                };
            }
        };
        boundary_values(&mut field, 0);
        let mut f_prev = vec![Complex64::default(); g.n_nodes()];
        let mut f_next = vec![Complex64::default(); g.n_nodes()];
        if let Some(src) = source {
            src(0, &mut f_prev);
        }
        for n in 0..n_steps {
            boundary_values(&mut field, n + 1);
            let (head, tail) = field.values.split_at_mut((n + 1) * g.n_nodes());
            let prev = &head[n * g.n_nodes()..];
            let next = &mut tail[..g.n_nodes()];
            match source {
                Some(src) => {
                    src(n + 1, &mut f_next);
                    self.step(prev, next, Some((&f_prev, &f_next)));
                    std::mem::swap(&mut f_prev, &mut f_next);
                }
                None => self.step(prev, next, None),
            }
        }
        if field.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite values in the solution".into()));
        }
        Ok(field)
    }
}

fn corners(g: &Grid2D) -> [usize; 4] {
    let (nx, ny) = g.dims();
    [g.index(0, 0), g.index(nx, 0), g.index(0, ny), g.index(nx, ny)]
}

/// Solves `iy' + div(a∇y) + p·y = 0`, `y(0) = y0`, `y = h` on `Γ`, on `[0, horizon]`.
pub fn solve_forward(
    grid: &Grid2D,
    p: &[f64],
    y0: &[Complex64],
    dirichlet: &Dirichlet,
    horizon: f64,
    dt: f64,
) -> Result<SpaceTimeField> {
    let (n, dt) = time_steps(horizon, dt)?;
    CrankNicolson::new(grid, p, dt)?.run(y0, dirichlet, None, n, 0.0)
}

/// Solves `iu' + div(a∇u) + q·u = f·R` with zero initial and boundary data.
pub fn solve_linearized(
    grid: &Grid2D,
    q: &[f64],
    f: &[f64],
    r: &SpaceTimeField,
    horizon: f64,
    dt: f64,
) -> Result<SpaceTimeField> {
    let (n, dt) = time_steps(horizon, dt)?;
    check_source(grid, f, r, n, dt)?;
    let zero = vec![Complex64::default(); grid.n_nodes()];
    let src = |m: usize, out: &mut [Complex64]| {
        for (k, (o, &rv)) in out.iter_mut().zip(r.snapshot(m)).enumerate() {
            *o = f[k] * rv;
        }
    };
    CrankNicolson::new(grid, q, dt)?.run(&zero, &Dirichlet::Zero, Some(&src), n, 0.0)
}

/// Solves `iv' + div(a∇v) + q·v = f·R'` with `v(0) = −i·f·R(0)` and zero
/// boundary data: the time derivative of the [`solve_linearized`] solution.
pub fn solve_time_derivative(
    grid: &Grid2D,
    q: &[f64],
    f: &[f64],
    r_prime: &SpaceTimeField,
    r0: &[Complex64],
    horizon: f64,
    dt: f64,
) -> Result<SpaceTimeField> {
    let (n, dt) = time_steps(horizon, dt)?;
    check_source(grid, f, r_prime, n, dt)?;
    if r0.len() != grid.n_nodes() {
        return Err(Error::InvalidInput("R(·, 0) has the wrong length".into()));
    }
    let mut v0: Vec<Complex64> = r0.iter().zip(f).map(|(&r, &fk)| -I * fk * r).collect();
    for b in grid.boundary() {
        v0[b.index] = Complex64::default();
    }
    let src = |m: usize, out: &mut [Complex64]| {
        for (k, (o, &rv)) in out.iter_mut().zip(r_prime.snapshot(m)).enumerate() {
            *o = f[k] * rv;
        }
    };
    CrankNicolson::new(grid, q, dt)?.run(&v0, &Dirichlet::Zero, Some(&src), n, 0.0)
}

fn check_source(grid: &Grid2D, f: &[f64], r: &SpaceTimeField, n: usize, dt: f64) -> Result<()> {
    if f.len() != grid.n_nodes() || r.n_nodes() != grid.n_nodes() {
        return Err(Error::InvalidInput("source fields do not match the grid".into()));
    }
    if r.n_steps() != n || (r.dt() - dt).abs() > 1e-12 * dt {
        return Err(Error::InvalidInput(format!(
            "source has {} steps of {}, solver needs {} steps of {}",
            r.n_steps(),
            r.dt(),
            n,
            dt
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("f is not finite".into()));
    }
    Ok(())
}

/// `y' = i(div(a∇y) + p·y)` read off the equation at interior nodes, for
/// each snapshot of a solution with time-independent boundary data.
pub fn equation_time_derivative(grid: &Grid2D, p: &[f64], y: &SpaceTimeField) -> SpaceTimeField {
    let mut out = SpaceTimeField::zeros(y.n_nodes(), y.n_steps(), y.dt(), y.t0());
    for n in 0..y.n_times() {
        let ky = grid.apply_operator(y.snapshot(n), p);
        for (o, v) in out.snapshot_mut(n).iter_mut().zip(ky) {
            *o = I * v;
        }
    }
    out
}

/// Largest deviation of `v` from the central time difference of `u` over
/// interior time nodes, relative to `max |v|`.
pub fn derivative_mismatch(u: &SpaceTimeField, v: &SpaceTimeField) -> Result<f64> {
    u.check_compatible(v)?;
    let mut worst = 0.0_f64;
    for n in 1..u.n_steps() {
        let (a, b, c) = (u.snapshot(n + 1), u.snapshot(n - 1), v.snapshot(n));
        for k in 0..u.n_nodes() {
            worst = worst.max(((a[k] - b[k]) / (2.0 * u.dt()) - c[k]).norm());
        }
    }
    Ok(worst / v.max_abs().max(f64::MIN_POSITIVE))
}

/// Which hypothesis on `R(·, 0)` fixes the reflection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionMode {
    RealR0,
    ImaginaryR0,
}

/// Whether the field plays the role of the solution `v` or of the factor `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    Solution,
    Source,
}

impl ExtensionMode {
    /// `σ` in `w(−t) = σ·conj(w(t))`.
    pub fn sign(self, role: FieldRole) -> f64 {
        match (self, role) {
            (ExtensionMode::RealR0, FieldRole::Solution) => -1.0,
            (ExtensionMode::RealR0, FieldRole::Source) => 1.0,
            (ExtensionMode::ImaginaryR0, FieldRole::Solution) => 1.0,
            (ExtensionMode::ImaginaryR0, FieldRole::Source) => -1.0,
        }
    }
}

/// Extends a field on `[0, T]` to `[−T, T]` by `w(−t) = σ·conj(w(t))`.
pub fn extend_time(field: &SpaceTimeField, mode: ExtensionMode, role: FieldRole) -> Result<SpaceTimeField> {
    if field.t0().abs() > 1e-14 {
        return Err(Error::InvalidInput(format!("field must start at t = 0, starts at {}", field.t0())));
    }
    let sigma = mode.sign(role);
    let w0 = field.snapshot(0);
    let scale = w0.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let mismatch = w0.iter().map(|&v| (v - sigma * v.conj()).norm()).fold(0.0, f64::max);
    if mismatch > EXTENSION_TOL * scale {
        return Err(Error::Extension(format!(
            "w(0) ≠ {}conj(w(0)), deviation {mismatch:e}",
            if sigma < 0.0 { "−" } else { "" }
        )));
    }
    let n = field.n_steps();
    let mut out = SpaceTimeField::zeros(field.n_nodes(), 2 * n, field.dt(), -field.time(n));
    for m in 0..=n {
        out.snapshot_mut(n + m).copy_from_slice(field.snapshot(m));
        for (o, &v) in out.snapshot_mut(n - m).iter_mut().zip(field.snapshot(m)) {
            *o = sigma * v.conj();
        }
    }
    // the t = 0 slot keeps the original values exactly
    out.snapshot_mut(n).copy_from_slice(field.snapshot(0));
    Ok(out)
}

/// The `t ≥ 0` half of a field on a symmetric interval.
pub fn restrict_nonnegative(field: &SpaceTimeField) -> Result<SpaceTimeField> {
    let n = field.n_steps();
    if !n.is_multiple_of(2) || (field.time(n / 2)).abs() > 1e-9 * field.dt() {
        return Err(Error::InvalidInput("field is not on a symmetric time interval".into()));
    }
    let half = n / 2;
    let values = field.values()[half * field.n_nodes()..].to_vec();
    SpaceTimeField::from_values(field.n_nodes(), half, field.dt(), 0.0, values)
}

/// Jump of the flux `a ∂y/∂x` across the interface along grid row `j`.
///
/// At each crossing between nodes `i` and `i + 1`, the derivative on each side
/// is extrapolated to the crossing point from the three nearest nodes of that
/// side (second order for one-sided smooth data); returns the largest
/// `|a₋ ∂y₋ − a₊ ∂y₊|`.
pub fn interface_flux_jump(grid: &Grid2D, y: &[Complex64], j: usize) -> f64 {
    let (nx, _) = grid.dims();
    let h = grid.h();
    let layout = grid.layout();
    let row = |i: usize| y[grid.index(i, j)];
    let mut worst = 0.0_f64;
    for i in 2..nx.saturating_sub(2) {
        let (ka, kb) = (grid.index(i, j), grid.index(i + 1, j));
        let (ra, rb) = (grid.region(ka), grid.region(kb));
        if ra == rb {
            continue;
        }
        // crossing offset s ∈ (0, 1) from node i
        let (p, q) = (grid.point(ka), grid.point(kb));
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if layout.region(p + mid * (q - p)) == ra {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        // quadratic through nodes at offsets 0, −1, −2 (left) or 1, 2, 3 (right), derivative at s
        let left = quadratic_slope([row(i), row(i - 1), row(i - 2)], s) / h;
        let right = quadratic_slope([row(i + 1), row(i + 2), row(i + 3)], -(s - 1.0)) / -h;
        let jump = grid.coeff().value(ra) * left - grid.coeff().value(rb) * right;
        worst = worst.max(jump.norm());
    }
    worst
}

/// Derivative at offset `s` of the quadratic through values at offsets 0, −1, −2
/// (unit spacing, increasing away from index 0 in the negative direction).
fn quadratic_slope(v: [Complex64; 3], s: f64) -> Complex64 {
    // p(x) = v0 + b x + c x², p(−1) = v1, p(−2) = v2
    let c = 0.5 * (v[2] - 2.0 * v[1] + v[0]);
    let b = v[0] - v[1] + c;
    b + 2.0 * c * s
}
