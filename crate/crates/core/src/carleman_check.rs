//! Both sides of the global Carleman estimate for an ε-pair of weights,
//! evaluated on grid fields over the clamped interval `|t| ≤ T − δₜ`.
//!
//! All weighted quantities are computed with `w = e^{−s(φ − φ_ref)} v` where
//! `φ_ref` is the smallest `φ` over the pair, the clamped times and the
//! nodes that carry `v` or its boundary flux.
//! Every term is quadratic in `w`, so the shift multiplies both sides by the
//! same factor `e^{2sφ_ref}`; reports carry `log_scale = −2sφ_ref` to undo it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Region, Vec2};
use crate::pde_solver::{extend_time, solve_forward, Dirichlet, ExtensionMode, FieldRole, Grid2D, SpaceTimeField};
use crate::weight::{CarlemanParams, WeightField};

const I: Complex64 = Complex64::new(0.0, 1.0);
/// Relative tolerance on the field's time interval matching `(−T, T)`.
const INTERVAL_TOL: f64 = 1e-9;

/// Spatial part of a weight sampled at grid nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
struct NodeWeight {
    psi: f64,
    grad: Vec2,
    laplacian: f64,
    a: f64,
}

/// A weight resolved on a grid and on the time levels of a field over `(−T, T)`.
#[derive(Debug, Clone)]
pub struct WeightTable {
    nodes: Vec<NodeWeight>,
    /// `∇ψ·ν > 0` per boundary sample of the grid.
    sigma_plus: Vec<bool>,
    params: CarlemanParams,
    times: Vec<f64>,
    dt: f64,
    /// First and last time level inside the clamp.
    window: (usize, usize),
}

impl WeightTable {
    /// Samples `weight` at the nodes of `grid`, each node on its own side of Γ₁,
    /// for `n_steps` steps over `[−T, T]`.
    pub fn new(grid: &Grid2D, weight: &dyn WeightField, params: &CarlemanParams, n_steps: usize) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::InvalidInput("need at least two time steps".into()));
        }
        let coeff = grid.coeff();
        let nodes = (0..grid.n_nodes())
            .map(|k| {
                let side = grid.region(k);
                let sample = weight.sample(grid.point(k), side);
                NodeWeight {
                    psi: sample.psi,
                    grad: sample.grad,
                    laplacian: sample.laplacian(),
                    a: coeff.value(side),
                }
            })
            .collect();
        let sigma_plus = grid
            .boundary()
            .iter()
            .map(|b| weight.sample(b.point, Region::Outer).grad.dot(b.normal) > 0.0)
            .collect();
        let horizon = params.horizon;
        let dt = 2.0 * horizon / n_steps as f64;
        let times: Vec<f64> = (0..=n_steps).map(|n| -horizon + n as f64 * dt).collect();
        let limit = params.time_limit() * (1.0 + 1e-12);
        let inside: Vec<usize> = (0..=n_steps).filter(|&n| times[n].abs() <= limit).collect();
        let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else {
            return Err(Error::InvalidInput("no time level inside the clamp".into()));
        };
        if last - first < 2 {
            return Err(Error::InvalidInput("fewer than three time levels inside the clamp".into()));
        }
        Ok(Self {
            nodes,
            sigma_plus,
            params: *params,
            times,
            dt,
            window: (first, last),
        })
    }

    pub fn params(&self) -> &CarlemanParams {
        &self.params
    }

    /// First and last clamped time level.
    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    /// Which boundary samples lie in `Σ₊`.
    pub fn sigma_plus(&self) -> &[bool] {
        &self.sigma_plus
    }

    fn tau(&self, n: usize) -> f64 {
        let t = self.times[n];
        let h = self.params.horizon;
        (h - t) * (h + t)
    }

    fn exp_lpsi(&self, k: usize) -> f64 {
        (self.params.lambda * self.nodes[k].psi).exp()
    }

    /// `φ` at node `k` and level `n`; `+∞` at `t = ±T`.
    pub fn phi(&self, k: usize, n: usize) -> f64 {
        let tau = self.tau(n);
        if tau <= 0.0 {
            return f64::INFINITY;
        }
        (self.params.alpha - self.exp_lpsi(k)) / tau
    }

    pub fn theta(&self, k: usize, n: usize) -> f64 {
        self.exp_lpsi(k) / self.tau(n)
    }

    /// `∇φ = −λ e^{λψ} ∇ψ / τ`.
    fn grad_phi(&self, k: usize, n: usize) -> Vec2 {
        (-self.params.lambda * self.exp_lpsi(k) / self.tau(n)) * self.nodes[k].grad
    }

    /// `φ' = (α − e^{λψ}) 2t / τ²`.
    fn phi_t(&self, k: usize, n: usize) -> f64 {
        let tau = self.tau(n);
        (self.params.alpha - self.exp_lpsi(k)) * 2.0 * self.times[n] / (tau * tau)
    }

    /// `div(a∇φ) = −aλ e^{λψ}(λ|∇ψ|² + Δψ) / τ` away from Γ₁.
    fn div_a_grad_phi(&self, k: usize, n: usize) -> f64 {
        let nw = self.nodes[k];
        let l = self.params.lambda;
        -nw.a * l * self.exp_lpsi(k) * (l * nw.grad.norm_sq() + nw.laplacian) / self.tau(n)
    }

    /// Smallest `φ` over the grid and the clamped levels.
    pub fn min_phi(&self) -> f64 {
        let (first, last) = self.window;
        (first..=last)
            .flat_map(|n| (0..self.nodes.len()).map(move |k| (k, n)))
            .map(|(k, n)| self.phi(k, n))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest `φ` over the clamped levels and the nodes where `mask` holds.
    pub fn min_phi_on(&self, mask: &[bool]) -> f64 {
        let (first, last) = self.window;
        (first..=last)
            .flat_map(|n| (0..self.nodes.len()).filter(|&k| mask[k]).map(move |k| (k, n)))
            .map(|(k, n)| self.phi(k, n))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest `φ` on the first and last clamped levels where `mask` holds;
    /// the tails beyond the clamp carry at most `e^{−2s(φ − φ_ref)}` of the
    /// reference weight there.
    fn min_phi_at_clamp_on(&self, mask: &[bool]) -> f64 {
        let (first, last) = self.window;
        (0..self.nodes.len())
            .filter(|&k| mask[k])
            .flat_map(|k| [self.phi(k, first), self.phi(k, last)])
            .fold(f64::INFINITY, f64::min)
    }
}

/// `w = e^{−s(φ − φ_ref)} v` with the weight table it was built from.
#[derive(Debug, Clone)]
pub struct ConjugatedField {
    w: SpaceTimeField,
    v: SpaceTimeField,
    table: WeightTable,
    phi_ref: f64,
}

impl ConjugatedField {
    pub fn w(&self) -> &SpaceTimeField {
        &self.w
    }

    /// The field before conjugation.
    pub fn v(&self) -> &SpaceTimeField {
        &self.v
    }

    pub fn table(&self) -> &WeightTable {
        &self.table
    }

    pub fn phi_ref(&self) -> f64 {
        self.phi_ref
    }

    /// `ln` of the factor relating quadratic quantities of the shifted `w`
    /// to those of `e^{−sφ} v`: `−2sφ_ref`.
    pub fn log_scale(&self) -> f64 {
        -2.0 * self.table.params.s * self.phi_ref
    }

    fn s(&self) -> f64 {
        self.table.params.s
    }
}

/// `z·e^{e}` evaluated in log space; results below `1e-300` in modulus flush to zero.
fn scaled(z: Complex64, e: f64) -> Complex64 {
    let m = z.norm();
    if m == 0.0 || e == f64::NEG_INFINITY {
        return Complex64::default();
    }
    let l = e + m.ln();
    if l < -690.0 {
        return Complex64::default();
    }
    if e.abs() < 700.0 {
        z * e.exp()
    } else {
        let f = l.exp();
        let part = |c: f64| if c == 0.0 { 0.0 } else { c / m * f };
        Complex64::new(part(z.re), part(z.im))
    }
}

fn check_field(grid: &Grid2D, v: &SpaceTimeField, params: &CarlemanParams) -> Result<()> {
    let h = params.horizon;
    if v.n_nodes() != grid.n_nodes() {
        return Err(Error::InvalidInput("field does not match the grid".into()));
    }
    if (v.t0() + h).abs() > INTERVAL_TOL * h || (v.time(v.n_steps()) - h).abs() > INTERVAL_TOL * h {
        return Err(Error::InvalidInput(format!(
            "field must span [−T, T] = [{}, {}], spans [{}, {}]",
            -h,
            h,
            v.t0(),
            v.time(v.n_steps())
        )));
    }
    Ok(())
}

/// Nodes where `v` is nonzero at some time.
pub fn support_mask(v: &SpaceTimeField) -> Vec<bool> {
    let mut mask = vec![false; v.n_nodes()];
    for n in 0..v.n_times() {
        for (m, z) in mask.iter_mut().zip(v.snapshot(n)) {
            *m |= *z != Complex64::default();
        }
    }
    mask
}

/// `w = e^{−s(φ − φ_ref)} v`; `φ_ref` defaults to the minimum of `φ` over the
/// support of `v` and the boundary nodes next to it.
/// Levels at `t = ±T` get `w = 0`, the limit of the weight.
pub fn conjugate(
    grid: &Grid2D,
    v: &SpaceTimeField,
    weight: &dyn WeightField,
    params: &CarlemanParams,
    phi_ref: Option<f64>,
) -> Result<ConjugatedField> {
    check_field(grid, v, params)?;
    let table = WeightTable::new(grid, weight, params, v.n_steps())?;
    let phi_ref = phi_ref.unwrap_or_else(|| reference_phi(grid, &[&table], v));
    Ok(conjugate_with(&table, v, phi_ref))
}

/// Smallest `φ` over the tables on the support of `v` and on the boundary
/// nodes whose normal stencil reaches it; zero for `v ≡ 0`.
/// Support of `v` widened to the boundary nodes it touches.
fn reference_mask(grid: &Grid2D, v: &SpaceTimeField) -> Vec<bool> {
    let mut mask = support_mask(v);
    for b in grid.boundary() {
        if mask[b.inward[0]] || mask[b.inward[1]] {
            mask[b.index] = true;
        }
    }
    mask
}

fn reference_phi(grid: &Grid2D, tables: &[&WeightTable], v: &SpaceTimeField) -> f64 {
    let mask = reference_mask(grid, v);
    let m = tables.iter().map(|t| t.min_phi_on(&mask)).fold(f64::INFINITY, f64::min);
    if m.is_finite() {
        m
    } else {
        0.0
    }
}

/// [`conjugate`] with a prebuilt table and an explicit shift.
pub fn conjugate_with(table: &WeightTable, v: &SpaceTimeField, phi_ref: f64) -> ConjugatedField {
    let s = table.params.s;
    let mut w = SpaceTimeField::zeros(v.n_nodes(), v.n_steps(), v.dt(), v.t0());
    for n in 0..v.n_times() {
        if table.tau(n) <= 0.0 && s != 0.0 {
            continue;
        }
        let src = v.snapshot(n);
        for (k, out) in w.snapshot_mut(n).iter_mut().enumerate() {
            *out = if s == 0.0 {
                src[k]
            } else {
                scaled(src[k], -s * (table.phi(k, n) - phi_ref))
            };
        }
    }
    ConjugatedField {
        w,
        v: v.clone(),
        table: table.clone(),
        phi_ref,
    }
}

/// Central-difference gradient at an interior node.
fn grad_c(grid: &Grid2D, y: &[Complex64], i: usize, j: usize) -> (Complex64, Complex64) {
    let inv = 0.5 / grid.h();
    (
        (y[grid.index(i + 1, j)] - y[grid.index(i - 1, j)]) * inv,
        (y[grid.index(i, j + 1)] - y[grid.index(i, j - 1)]) * inv,
    )
}

fn for_window(cf: &ConjugatedField, grid: &Grid2D, mut f: impl FnMut(usize, usize, usize, usize) -> Complex64) -> SpaceTimeField {
    let w = &cf.w;
    let mut out = SpaceTimeField::zeros(w.n_nodes(), w.n_steps(), w.dt(), w.t0());
    let (first, last) = cf.table.window;
    let (nx, ny) = grid.dims();
    for n in first..=last {
        for j in 1..ny {
            for i in 1..nx {
                let k = grid.index(i, j);
                out.snapshot_mut(n)[k] = f(n, k, i, j);
            }
        }
    }
    out
}

/// `P₁w = iw' + div(a∇w) + s²a|∇φ|²w` at interior nodes and clamped levels.
pub fn apply_p1(cf: &ConjugatedField, grid: &Grid2D) -> SpaceTimeField {
    let t = &cf.table;
    let s = cf.s();
    let zero = vec![0.0; grid.n_nodes()];
    let (first, last) = t.window;
    let div: Vec<Vec<Complex64>> = (first..=last).map(|n| grid.apply_operator(cf.w.snapshot(n), &zero)).collect();
    for_window(cf, grid, |n, k, _, _| {
        let w = &cf.w;
        let wt = (w.snapshot(n + 1)[k] - w.snapshot(n - 1)[k]) / (2.0 * t.dt);
        let c = w.snapshot(n)[k];
        I * wt + div[n - first][k] + s * s * t.nodes[k].a * t.grad_phi(k, n).norm_sq() * c
    })
}

/// `P₂w = isφ'w + 2sa∇φ·∇w + s div(a∇φ) w` at interior nodes and clamped levels.
pub fn apply_p2(cf: &ConjugatedField, grid: &Grid2D) -> SpaceTimeField {
    let t = &cf.table;
    let s = cf.s();
    for_window(cf, grid, |n, k, i, j| {
        let y = cf.w.snapshot(n);
        let c = y[k];
        let (gx, gy) = grad_c(grid, y, i, j);
        let gp = t.grad_phi(k, n);
        I * s * t.phi_t(k, n) * c
            + 2.0 * s * t.nodes[k].a * (gp.x * gx + gp.y * gy)
            + s * t.div_a_grad_phi(k, n) * c
    })
}

/// `P₁w + P₂w + qw`, the conjugated operator assembled from its split.
pub fn apply_p_split(cf: &ConjugatedField, grid: &Grid2D, q: &[f64]) -> SpaceTimeField {
    let p1 = apply_p1(cf, grid);
    let p2 = apply_p2(cf, grid);
    let mut out = p1;
    let (first, last) = cf.table.window;
    for n in first..=last {
        let (a, w) = (p2.snapshot(n), cf.w.snapshot(n));
        for (k, o) in out.snapshot_mut(n).iter_mut().enumerate() {
            let (i, j) = grid.ij(k);
            if !grid.is_boundary(i, j) {
                *o += a[k] + q[k] * w[k];
            }
        }
    }
    out
}

/// `e^{−sφ} L_h(e^{sφ} w) = e^{−s(φ − φ_ref)} L_h v` with `L_h` the solver's
/// spatial stencil and a central difference in time, evaluated from `v` so
/// that nothing depends on the split.
pub fn apply_p_direct(cf: &ConjugatedField, grid: &Grid2D, q: &[f64]) -> SpaceTimeField {
    let t = &cf.table;
    let s = cf.s();
    let v = &cf.v;
    let (first, last) = t.window;
    let spatial: Vec<Vec<Complex64>> = (first..=last).map(|n| grid.apply_operator(v.snapshot(n), q)).collect();
    for_window(cf, grid, |n, k, _, _| {
        let lv = I * (v.snapshot(n + 1)[k] - v.snapshot(n - 1)[k]) / (2.0 * t.dt) + spatial[n - first][k];
        scaled(lv, -s * (t.phi(k, n) - cf.phi_ref))
    })
}

/// Trapezoid weight of node `k` in space.
fn space_weight(grid: &Grid2D, k: usize) -> f64 {
    let (nx, ny) = grid.dims();
    let (i, j) = grid.ij(k);
    let fx = if i == 0 || i == nx { 0.5 } else { 1.0 };
    let fy = if j == 0 || j == ny { 0.5 } else { 1.0 };
    fx * fy * grid.cell_area()
}

fn time_weights(table: &WeightTable) -> impl Iterator<Item = (usize, f64)> + '_ {
    let (first, last) = table.window;
    (first..=last).map(move |n| (n, if n == first || n == last { 0.5 * table.dt } else { table.dt }))
}

/// `∫∫ |f|²` over the space grid and the clamped levels (trapezoid rules).
pub fn l2_sq(field: &SpaceTimeField, grid: &Grid2D, table: &WeightTable) -> f64 {
    let ws: Vec<f64> = (0..grid.n_nodes()).map(|k| space_weight(grid, k)).collect();
    time_weights(table)
        .map(|(n, wt)| wt * field.snapshot(n).iter().zip(&ws).map(|(v, w)| w * v.norm_sqr()).sum::<f64>())
        .sum()
}

/// Nodal gradient: central inside, one-sided at the boundary.
fn grad_nodal(grid: &Grid2D, y: &[Complex64], k: usize) -> (Complex64, Complex64) {
    let (nx, ny) = grid.dims();
    let (i, j) = grid.ij(k);
    let h = grid.h();
    let d = |lo: usize, hi: usize, span: f64| (y[hi] - y[lo]) / (span * h);
    let gx = if i == 0 {
        d(k, grid.index(1, j), 1.0)
    } else if i == nx {
        d(grid.index(nx - 1, j), k, 1.0)
    } else {
        d(grid.index(i - 1, j), grid.index(i + 1, j), 2.0)
    };
    let gy = if j == 0 {
        d(k, grid.index(i, 1), 1.0)
    } else if j == ny {
        d(grid.index(i, ny - 1), k, 1.0)
    } else {
        d(grid.index(i, j - 1), grid.index(i, j + 1), 2.0)
    };
    (gx, gy)
}

/// `s³λ⁴ ∫∫ θ³|w|² + sλ ∫∫ θ|∇w|²` over the nodes of `region` (all of `Ω`
/// when `None`), trapezoid rules in space and over the clamped levels.
pub fn weighted_norm_sq(cf: &ConjugatedField, grid: &Grid2D, region: Option<Region>) -> f64 {
    let t = &cf.table;
    let (s, l) = (t.params.s, t.params.lambda);
    let mut acc = 0.0;
    for (n, wt) in time_weights(t) {
        let y = cf.w.snapshot(n);
        for k in 0..grid.n_nodes() {
            if region.is_some_and(|r| grid.region(k) != r) {
                continue;
            }
            let theta = t.theta(k, n);
            let (gx, gy) = grad_nodal(grid, y, k);
            let term = s.powi(3) * l.powi(4) * theta.powi(3) * y[k].norm_sqr()
                + s * l * theta * (gx.norm_sqr() + gy.norm_sqr());
            acc += wt * space_weight(grid, k) * term;
        }
    }
    acc
}

/// `sλ ∫∫_{Σ₊} θ |a ∂w/∂ν|²` with `∂w/∂ν = e^{−sφ} ∂v/∂ν` (as `v = 0` on Γ),
/// the normal derivative taken by the solver's one-sided stencil.
pub fn boundary_term(cf: &ConjugatedField, grid: &Grid2D) -> f64 {
    let t = &cf.table;
    let (s, l) = (t.params.s, t.params.lambda);
    let a2 = grid.coeff().a2;
    let mut acc = 0.0;
    for (n, wt) in time_weights(t) {
        let y = cf.v.snapshot(n);
        for (b, &plus) in grid.boundary().iter().zip(&t.sigma_plus) {
            if !plus {
                continue;
            }
            let k = b.index;
            let dv = (3.0 * y[k] - 4.0 * y[b.inward[0]] + y[b.inward[1]]) / (2.0 * grid.h());
            let dw = scaled(a2 * dv, -s * (t.phi(k, n) - cf.phi_ref));
            acc += wt * b.weight * t.theta(k, n) * dw.norm_sqr();
        }
    }
    s * l * acc
}

/// Running `ln Σ eˣ`, so sums of terms far outside the `f64` range keep
/// their relative sizes.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    acc: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum {
        max: f64::NEG_INFINITY,
        acc: 0.0,
    };

    fn add_ln(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.acc = self.acc * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.acc += (x - self.max).exp();
        }
    }

    /// Adds `weight·|z|²·e^{log_factor}`.
    fn add(&mut self, weight: f64, z: Complex64, log_factor: f64) {
        let m = weight * z.norm_sqr();
        if m > 0.0 {
            self.add_ln(m.ln() + log_factor);
        }
    }

    fn merge(&mut self, other: LogSum) {
        if other.acc > 0.0 {
            self.add_ln(other.ln());
        }
    }

    fn ln(&self) -> f64 {
        if self.acc > 0.0 {
            self.max + self.acc.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// `w` on a stencil, rescaled by `e^{s(r − φ_ref)}` with `r` the smallest
/// `φ` among the stencil's nonzero values, so every entry is at most `|v|`.
struct LocalW<'a> {
    v: &'a SpaceTimeField,
    table: &'a WeightTable,
    r: f64,
}

impl<'a> LocalW<'a> {
    fn new(v: &'a SpaceTimeField, table: &'a WeightTable, stencil: &[(usize, usize)]) -> Option<Self> {
        let r = stencil
            .iter()
            .filter(|&&(k, n)| v.snapshot(n)[k] != Complex64::default())
            .map(|&(k, n)| table.phi(k, n))
            .fold(f64::INFINITY, f64::min);
        if table.params.s == 0.0 {
            return Some(Self { v, table, r: 0.0 });
        }
        r.is_finite().then_some(Self { v, table, r })
    }

    fn at(&self, k: usize, n: usize) -> Complex64 {
        let z = self.v.snapshot(n)[k];
        let s = self.table.params.s;
        if s == 0.0 || z == Complex64::default() {
            return z;
        }
        let p = self.table.phi(k, n);
        if p.is_infinite() {
            return Complex64::default();
        }
        z * (-s * (p - self.r)).exp()
    }

    /// `ln` of the factor turning squared local values into squared `w` values.
    fn log_factor(&self, phi_ref: f64) -> f64 {
        -2.0 * self.table.params.s * (self.r - phi_ref)
    }
}

/// `ln` of the shifted `‖P₁w‖² + ‖P₂w‖² + ‖w‖²_{λ,s,ψ}`, `‖P w‖²` (split form)
/// and the boundary term for one weight.
fn log_components(grid: &Grid2D, v: &SpaceTimeField, table: &WeightTable, q: &[f64], phi_ref: f64) -> [LogSum; 3] {
    let (s, l) = (table.params.s, table.params.lambda);
    let h = grid.h();
    let (nx, ny) = grid.dims();
    let ws: Vec<f64> = (0..grid.n_nodes()).map(|k| space_weight(grid, k)).collect();
    let levels: Vec<(usize, f64)> = time_weights(table).collect();
    let per_level: Vec<[LogSum; 3]> = levels
        .par_iter()
        .map(|&(n, wt)| {
            let (mut lhs, mut res, mut bd) = (LogSum::EMPTY, LogSum::EMPTY, LogSum::EMPTY);
            // interior: P₁, P₂ and the residual
            for j in 1..ny {
                for i in 1..nx {
                    let k = grid.index(i, j);
                    let (e, wst, nth, sth) = (grid.index(i + 1, j), grid.index(i - 1, j), grid.index(i, j + 1), grid.index(i, j - 1));
                    let stencil = [(k, n), (k, n - 1), (k, n + 1), (e, n), (wst, n), (nth, n), (sth, n)];
                    let Some(lw) = LocalW::new(v, table, &stencil) else {
                        continue;
                    };
                    let c = lw.at(k, n);
                    let wtd = (lw.at(k, n + 1) - lw.at(k, n - 1)) / (2.0 * table.dt);
                    let (we, ww, wn, wsth) = (lw.at(e, n), lw.at(wst, n), lw.at(nth, n), lw.at(sth, n));
                    let flux = grid.face_x(i, j) * (we - c) - grid.face_x(i - 1, j) * (c - ww)
                        + grid.face_y(i, j) * (wn - c)
                        - grid.face_y(i, j - 1) * (c - wsth);
                    let nw = table.nodes[k];
                    let gp = table.grad_phi(k, n);
                    let (gx, gy) = ((we - ww) / (2.0 * h), (wn - wsth) / (2.0 * h));
                    let p1 = I * wtd + flux / (h * h) + s * s * nw.a * gp.norm_sq() * c;
                    let p2 = I * s * table.phi_t(k, n) * c
                        + 2.0 * s * nw.a * (gp.x * gx + gp.y * gy)
                        + s * table.div_a_grad_phi(k, n) * c;
                    let f = lw.log_factor(phi_ref);
                    let wq = wt * ws[k];
                    lhs.add(wq, p1, f);
                    lhs.add(wq, p2, f);
                    res.add(wq, p1 + p2 + q[k] * c, f);
                }
            }
            // weighted norm over all nodes
            for k in 0..grid.n_nodes() {
                let (i, j) = grid.ij(k);
                let xs = if i == 0 { [k, grid.index(1, j)] } else if i == nx { [grid.index(nx - 1, j), k] } else { [grid.index(i - 1, j), grid.index(i + 1, j)] };
                let ys = if j == 0 { [k, grid.index(i, 1)] } else if j == ny { [grid.index(i, ny - 1), k] } else { [grid.index(i, j - 1), grid.index(i, j + 1)] };
                let stencil = [(k, n), (xs[0], n), (xs[1], n), (ys[0], n), (ys[1], n)];
                let Some(lw) = LocalW::new(v, table, &stencil) else {
                    continue;
                };
                let span = |a: [usize; 2]| if a[0] == k || a[1] == k { h } else { 2.0 * h };
                let gx = (lw.at(xs[1], n) - lw.at(xs[0], n)) / span(xs);
                let gy = (lw.at(ys[1], n) - lw.at(ys[0], n)) / span(ys);
                let theta = table.theta(k, n);
                let f = lw.log_factor(phi_ref);
                let wq = wt * ws[k];
                lhs.add(wq * s.powi(3) * l.powi(4) * theta.powi(3), lw.at(k, n), f);
                lhs.add(wq * s * l * theta, gx, f);
                lhs.add(wq * s * l * theta, gy, f);
            }
            // Σ₊ flux of v, weighted at the boundary node
            let y = v.snapshot(n);
            for (b, &plus) in grid.boundary().iter().zip(&table.sigma_plus) {
                if plus {
                    let dv = grid.coeff().a2 * (3.0 * y[b.index] - 4.0 * y[b.inward[0]] + y[b.inward[1]]) / (2.0 * h);
                    bd.add(s * l * wt * b.weight * table.theta(b.index, n), dv, -2.0 * s * (table.phi(b.index, n) - phi_ref));
                }
            }
            [lhs, res, bd]
        })
        .collect();
    let mut out = [LogSum::EMPTY; 3];
    for part in per_level {
        for (o, p) in out.iter_mut().zip(part) {
            o.merge(p);
        }
    }
    out
}

/// Both sides of the estimate for one field, summed over the pair.
///
/// The quadratic components are reported after the shift by `φ_ref` and may
/// underflow to zero when one side dominates by more than the `f64` range;
/// `log_ratio` is assembled in log space and stays finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanReport {
    /// `Σₖ ‖P₁wᵏ‖² + ‖P₂wᵏ‖² + ‖wᵏ‖²_{λ,s,ψᵏ}`.
    pub lhs: f64,
    /// `Σₖ ‖Pwᵏ‖²`.
    pub rhs_residual: f64,
    /// `Σₖ sλ ∫∫_{Σ₊ᵏ} θᵏ |a ∂wᵏ/∂ν|²`.
    pub rhs_boundary: f64,
    /// `lhs / (rhs_residual + rhs_boundary)`, zero when both sides vanish.
    pub ratio: f64,
    /// `ln ratio`; `−∞` when `lhs = 0`.
    pub log_ratio: f64,
    pub s: f64,
    pub lambda: f64,
    /// Every quadratic component is `e^{log_scale}` times the unshifted value.
    pub log_scale: f64,
    /// Largest relative weight `e^{−2s(φ − φ_ref)}` reached at the clamp.
    pub tail_weight: f64,
}

/// Tables for both members of a pair on one time grid.
pub fn pair_tables(
    grid: &Grid2D,
    pair: [&dyn WeightField; 2],
    params: &CarlemanParams,
    n_steps: usize,
) -> Result<[WeightTable; 2]> {
    Ok([
        WeightTable::new(grid, pair[0], params, n_steps)?,
        WeightTable::new(grid, pair[1], params, n_steps)?,
    ])
}

/// Evaluates the estimate for `v` (zero on Γ, defined on `[−T, T]`).
pub fn carleman_ratio(
    grid: &Grid2D,
    v: &SpaceTimeField,
    pair: [&dyn WeightField; 2],
    params: &CarlemanParams,
    q: &[f64],
) -> Result<CarlemanReport> {
    check_field(grid, v, params)?;
    let tables = pair_tables(grid, pair, params, v.n_steps())?;
    carleman_ratio_with(grid, v, &tables, q)
}

/// [`carleman_ratio`] with prebuilt tables.
pub fn carleman_ratio_with(grid: &Grid2D, v: &SpaceTimeField, tables: &[WeightTable; 2], q: &[f64]) -> Result<CarlemanReport> {
    if q.len() != grid.n_nodes() {
        return Err(Error::InvalidInput("potential does not match the grid".into()));
    }
    let params = tables[0].params;
    let phi_ref = reference_phi(grid, &[&tables[0], &tables[1]], v);
    let mask = reference_mask(grid, v);
    let (mut lhs, mut residual, mut boundary) = (LogSum::EMPTY, LogSum::EMPTY, LogSum::EMPTY);
    let mut tail = 0.0_f64;
    for table in tables {
        let [l, r, b] = log_components(grid, v, table, q, phi_ref);
        lhs.merge(l);
        residual.merge(r);
        boundary.merge(b);
        tail = tail.max((-2.0 * params.s * (table.min_phi_at_clamp_on(&mask) - phi_ref)).exp());
    }
    let mut rhs = residual;
    rhs.merge(boundary);
    let (ln_lhs, ln_rhs) = (lhs.ln(), rhs.ln());
    let log_ratio = if ln_rhs > f64::NEG_INFINITY {
        ln_lhs - ln_rhs
    } else if ln_lhs == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        return Err(Error::InequalityViolation { lhs: ln_lhs.exp() });
    };
    if log_ratio.is_nan() || log_ratio == f64::INFINITY {
        return Err(Error::InvalidInput(format!("non-finite ratio (ln lhs {ln_lhs}, ln rhs {ln_rhs})")));
    }
    Ok(CarlemanReport {
        lhs: ln_lhs.exp(),
        rhs_residual: residual.ln().exp(),
        rhs_boundary: boundary.ln().exp(),
        ratio: log_ratio.exp(),
        log_ratio,
        s: params.s,
        lambda: params.lambda,
        log_scale: -2.0 * params.s * phi_ref,
        tail_weight: tail,
    })
}

/// A named field in `Z` (zero on Γ) over `[−T, T]`.
#[derive(Debug, Clone)]
pub struct TestField {
    pub id: String,
    pub v: SpaceTimeField,
}

/// One `(field, s, λ)` evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub field_id: String,
    #[serde(flatten)]
    pub report: CarlemanReport,
}

/// Result of a sweep over fields and `(s, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// `(s, λ, max ratio over fields)`.
    pub max_by_params: Vec<(f64, f64, f64)>,
    /// Largest ratio over everything.
    pub sup_ratio: f64,
    /// `(s, max ratio over fields and λ)` on the upper half of the s-range.
    pub upper_sups: Vec<(f64, f64)>,
    /// Whether consecutive entries of `upper_sups` differ by less than
    /// [`STABILIZATION_TOL`] relative.
    pub stabilized: bool,
}

/// Relative change allowed between consecutive sups in the upper s-range.
pub const STABILIZATION_TOL: f64 = 0.1;

/// Evaluates every field at every `(s, λ)`; `α` is fixed per `λ` from the pair
/// over the grid nodes. Rows are ordered by `(λ, s, field)` regardless of
/// the parallel schedule. The time clamp is `T/64`.
pub fn constant_sweep(
    grid: &Grid2D,
    fields: &[TestField],
    s_values: &[f64],
    lambda_values: &[f64],
    pair: [&dyn WeightField; 2],
    horizon: f64,
    q: &[f64],
) -> Result<SweepTable> {
    constant_sweep_clamped(grid, fields, s_values, lambda_values, pair, horizon, horizon / 64.0, q)
}

/// [`constant_sweep`] with an explicit time clamp `δₜ`.
#[allow(clippy::too_many_arguments)]
pub fn constant_sweep_clamped(
    grid: &Grid2D,
    fields: &[TestField],
    s_values: &[f64],
    lambda_values: &[f64],
    pair: [&dyn WeightField; 2],
    horizon: f64,
    time_clamp: f64,
    q: &[f64],
) -> Result<SweepTable> {
    let mut s_sorted = s_values.to_vec();
    s_sorted.sort_by(f64::total_cmp);
    if fields.is_empty() || s_sorted.is_empty() || lambda_values.is_empty() {
        return Ok(SweepTable {
            rows: Vec::new(),
            max_by_params: Vec::new(),
            sup_ratio: 0.0,
            upper_sups: Vec::new(),
            stabilized: true,
        });
    }
    let points: Vec<Vec2> = (0..grid.n_nodes()).map(|k| grid.point(k)).collect();
    let mut rows = Vec::new();
    let mut max_by_params = Vec::new();
    for &lambda in lambda_values {
        let base = CarlemanParams::from_samples(&pair, &points, 1.0, lambda, horizon)?.with_time_clamp(time_clamp)?;
        for &s in &s_sorted {
            let params = base.with_s(s);
            // tables depend only on the time grid, so fields sharing it share them
            let mut tables: Vec<(usize, [WeightTable; 2])> = Vec::new();
            for field in fields {
                check_field(grid, &field.v, &params)?;
                let n = field.v.n_steps();
                if !tables.iter().any(|(m, _)| *m == n) {
                    tables.push((n, pair_tables(grid, pair, &params, n)?));
                }
            }
            let reports: Vec<Result<CarlemanReport>> = fields
                .par_iter()
                .map(|field| {
                    let n = field.v.n_steps();
                    let (_, t) = tables.iter().find(|(m, _)| *m == n).expect("table built above");
                    carleman_ratio_with(grid, &field.v, t, q)
                })
                .collect();
            let mut worst = 0.0_f64;
            for (field, report) in fields.iter().zip(reports) {
                let report = report?;
                worst = worst.max(report.ratio);
                rows.push(SweepRow {
                    field_id: field.id.clone(),
                    report,
                });
            }
            max_by_params.push((s, lambda, worst));
        }
    }
    let sup_ratio = max_by_params.iter().map(|m| m.2).fold(0.0, f64::max);
    let upper = &s_sorted[s_sorted.len() / 2..];
    let upper_sups: Vec<(f64, f64)> = upper
        .iter()
        .map(|&s| {
            let m = max_by_params.iter().filter(|m| m.0 == s).map(|m| m.2).fold(0.0, f64::max);
            (s, m)
        })
        .collect();
    let stabilized = upper_sups
        .windows(2)
        .all(|w| (w[1].1 - w[0].1).abs() < STABILIZATION_TOL * w[0].1.abs().max(f64::MIN_POSITIVE) || (w[0].1 == 0.0 && w[1].1 == 0.0));
    Ok(SweepTable {
        rows,
        max_by_params,
        sup_ratio,
        upper_sups,
        stabilized,
    })
}

/// Compact bump `(1 − |x − c|²/r²)⁴₊`, C³ across its rim.
pub fn compact_bump(x: Vec2, center: Vec2, radius: f64) -> f64 {
    let u = 1.0 - (x - center).norm_sq() / (radius * radius);
    if u > 0.0 {
        u.powi(4)
    } else {
        0.0
    }
}

/// Sizes of the generated test-field suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub n_solved: usize,
    pub n_manufactured: usize,
    pub seed: u64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            n_solved: 5,
            n_manufactured: 5,
            seed: 7,
        }
    }
}

/// Random ball of radius in `[0.15, 0.3]·L` (L the short side of Ω) that
/// stays in one subdomain, clear of Γ₁ and Γ.
fn random_ball(grid: &Grid2D, rng: &mut ChaCha8Rng) -> Result<(Vec2, f64)> {
    let (lo, hi) = rectangle(grid)?;
    let short = (hi.x - lo.x).min(hi.y - lo.y);
    let layout = grid.layout();
    for _ in 0..10_000 {
        let r = short * rng.random_range(0.15..0.3);
        let c = Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        let margin = r + 2.0 * grid.h();
        if c.x - margin < lo.x || c.x + margin > hi.x || c.y - margin < lo.y || c.y + margin > hi.y {
            continue;
        }
        let side = layout.region(c);
        let clear = (0..64).all(|m| {
            let p = c + Vec2::polar(margin, m as f64 * std::f64::consts::TAU / 64.0);
            layout.region(p) == side
        });
        if clear {
            return Ok((c, r));
        }
    }
    Err(Error::Geometry("no room for a test bump away from the interfaces".into()))
}

fn rectangle(grid: &Grid2D) -> Result<(Vec2, Vec2)> {
    match grid.layout().outer {
        crate::geometry::OuterDomain::Rectangle {
            x_min,
            x_max,
            y_min,
            y_max,
        } => Ok((Vec2::new(x_min, y_min), Vec2::new(x_max, y_max))),
        _ => Err(Error::Geometry("test fields need a rectangular Ω".into())),
    }
}

/// Solved fields (zero Dirichlet data, real initial bumps, reflected to
/// `[−T, 0]` so they solve the equation on the whole interval) followed by
/// manufactured fields `b(x)·e(t)` with `b` a compact bump inside one
/// subdomain. `n_steps` counts steps over `[−T, T]` and must be even.
pub fn generate_test_suite(
    grid: &Grid2D,
    q: &[f64],
    horizon: f64,
    n_steps: usize,
    spec: SuiteSpec,
) -> Result<Vec<TestField>> {
    if n_steps < 4 || !n_steps.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("need an even step count ≥ 4, got {n_steps}")));
    }
    let (lo, hi) = rectangle(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dt = 2.0 * horizon / n_steps as f64;
    let mut fields = Vec::with_capacity(spec.n_solved + spec.n_manufactured);
    for id in 0..spec.n_solved {
        let bumps: Vec<(Vec2, f64, f64)> = (0..2)
            .map(|_| {
                let c = Vec2::new(
                    rng.random_range(0.7 * lo.x + 0.3 * hi.x..0.3 * lo.x + 0.7 * hi.x),
                    rng.random_range(0.7 * lo.y + 0.3 * hi.y..0.3 * lo.y + 0.7 * hi.y),
                );
                (c, rng.random_range(0.1..0.3) * (hi.x - lo.x), rng.random_range(0.5..1.5))
            })
            .collect();
        let y0: Vec<Complex64> = grid.sample(|x| {
            let envelope = (x.x - lo.x) * (hi.x - x.x) * (x.y - lo.y) * (hi.y - x.y)
                / (0.0625 * (hi.x - lo.x).powi(2) * (hi.y - lo.y).powi(2));
            let g: f64 = bumps
                .iter()
                .map(|&(c, w, amp)| amp * (-(x - c).norm_sq() / (2.0 * w * w)).exp())
                .sum();
            Complex64::new(envelope * g, 0.0)
        });
        let y = solve_forward(grid, q, &y0, &Dirichlet::Zero, horizon, dt)?;
        // real data: y(−t) = conj(y(t)) solves the same equation
        let v = extend_time(&y, ExtensionMode::RealR0, FieldRole::Source)?;
        fields.push(TestField {
            id: format!("solved-{id}"),
            v,
        });
    }
    for id in 0..spec.n_manufactured {
        let (c, r) = random_ball(grid, &mut rng)?;
        let (omega, nu) = (rng.random_range(0.5..2.0), rng.random_range(0.5..3.0));
        let b: Vec<f64> = (0..grid.n_nodes()).map(|k| compact_bump(grid.point(k), c, r)).collect();
        let mut v = SpaceTimeField::zeros(grid.n_nodes(), n_steps, dt, -horizon);
        for n in 0..=n_steps {
            let t = v.time(n);
            let e = (1.0 + 0.5 * (omega * t).sin()) * Complex64::from_polar(1.0, nu * t);
            for (o, &bk) in v.snapshot_mut(n).iter_mut().zip(&b) {
                *o = bk * e;
            }
        }
        fields.push(TestField {
            id: format!("manufactured-{id}"),
            v,
        });
    }
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainLayout, OuterDomain, RadialInterface, Sym2};
    use crate::weight::{build_epsilon_pair, EpsilonPair, PiecewiseCoefficient, WeightSample};

    const T: f64 = 1.0;

    struct Setup {
        grid: Grid2D,
        pair: EpsilonPair,
        q: Vec<f64>,
    }

    fn setup(nx: usize) -> Setup {
        let iface = RadialInterface::disk(Vec2::ZERO, 1.0, 128).unwrap();
        let layout = DomainLayout::new(OuterDomain::square(1.2), iface.clone()).unwrap();
        let coeff = PiecewiseCoefficient::new(2.0, 1.0).unwrap();
        let grid = Grid2D::new(&layout, coeff, nx).unwrap();
        let pair = build_epsilon_pair(&iface, [Vec2::new(-0.3, 0.0), Vec2::new(0.3, 0.0)], coeff, 1.0).unwrap();
        let q = grid.sample(|x| 0.5 * (-x.norm_sq()).exp());
        Setup { grid, pair, q }
    }

    fn params(st: &Setup, s: f64, lambda: f64) -> CarlemanParams {
        let pts: Vec<Vec2> = (0..st.grid.n_nodes()).map(|k| st.grid.point(k)).collect();
        CarlemanParams::from_samples(&st.pair.weight_refs(), &pts, s.max(1.0), lambda, T)
            .unwrap()
            .with_s(s)
    }

    /// Bump inside Ω₁ times a complex time envelope, on `[−T, T]`.
    fn manufactured(grid: &Grid2D, n_steps: usize) -> SpaceTimeField {
        let dt = 2.0 * T / n_steps as f64;
        let mut v = SpaceTimeField::zeros(grid.n_nodes(), n_steps, dt, -T);
        for n in 0..=n_steps {
            let t = v.time(n);
            let e = Complex64::from_polar(1.0 + 0.5 * (1.3 * t).sin(), 1.7 * t);
            for (k, o) in v.snapshot_mut(n).iter_mut().enumerate() {
                *o = compact_bump(grid.point(k), Vec2::new(0.0, 0.45), 0.4) * e;
            }
        }
        v
    }

    struct Flat(f64);

    impl WeightField for Flat {
        fn sample(&self, _: Vec2, _: Region) -> WeightSample {
            WeightSample {
                psi: self.0,
                grad: Vec2::ZERO,
                hess: Sym2::default(),
            }
        }

        fn side(&self, _: Vec2) -> Region {
            Region::Inner
        }
    }

    #[test]
    fn zero_weight_parameter_leaves_the_field_unchanged() {
        let st = setup(16);
        let v = manufactured(&st.grid, 16);
        let cf = conjugate(&st.grid, &v, &st.pair.weights[0], &params(&st, 0.0, 1.0), None).unwrap();
        assert_eq!(cf.w(), &v);
    }

    #[test]
    fn multiplying_back_recovers_the_field() {
        let st = setup(16);
        let v = manufactured(&st.grid, 32);
        let p = params(&st, 3.0, 1.0);
        let cf = conjugate(&st.grid, &v, &st.pair.weights[0], &p, None).unwrap();
        let mut checked = 0;
        for n in 0..v.n_times() {
            for k in 0..v.n_nodes() {
                let w = cf.w().snapshot(n)[k];
                if w.norm() > 1e-200 {
                    let back = w * (p.s * (cf.table().phi(k, n) - cf.phi_ref())).exp();
                    let orig = v.snapshot(n)[k];
                    assert!((back - orig).norm() <= 1e-12 * orig.norm());
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn conjugated_field_is_negligible_at_the_clamp() {
        let st = setup(16);
        let v = manufactured(&st.grid, 64);
        let cf = conjugate(&st.grid, &v, &st.pair.weights[1], &params(&st, 20.0, 2.0), None).unwrap();
        let (first, last) = cf.table().window();
        for n in [first, last] {
            assert!(cf.w().snapshot(n).iter().all(|w| w.norm() < 1e-100));
        }
        // machine zero at t = ±T
        assert!(cf.w().snapshot(0).iter().all(|w| *w == Complex64::default()));
    }

    #[test]
    fn zero_field_has_zero_images() {
        let st = setup(12);
        let v = SpaceTimeField::zeros(st.grid.n_nodes(), 16, 2.0 * T / 16.0, -T);
        let cf = conjugate(&st.grid, &v, &st.pair.weights[0], &params(&st, 10.0, 1.0), None).unwrap();
        assert_eq!(apply_p1(&cf, &st.grid).max_abs(), 0.0);
        assert_eq!(apply_p2(&cf, &st.grid).max_abs(), 0.0);
        assert_eq!(weighted_norm_sq(&cf, &st.grid, None), 0.0);
    }

    #[test]
    fn without_weight_the_split_is_the_plain_operator() {
        let st = setup(12);
        let v = manufactured(&st.grid, 16);
        let cf = conjugate(&st.grid, &v, &st.pair.weights[0], &params(&st, 0.0, 1.0), None).unwrap();
        assert_eq!(apply_p2(&cf, &st.grid).max_abs(), 0.0);
        let p1 = apply_p1(&cf, &st.grid);
        let zero = vec![0.0; st.grid.n_nodes()];
        let (first, last) = cf.table().window();
        for n in first..=last {
            let div = st.grid.apply_operator(v.snapshot(n), &zero);
            for (k, _) in st.grid.interior() {
                let wt = (v.snapshot(n + 1)[k] - v.snapshot(n - 1)[k]) / (2.0 * v.dt());
                let expect = Complex64::new(0.0, 1.0) * wt + div[k];
                assert!((p1.snapshot(n)[k] - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
            }
        }
    }

    #[test]
    fn weighted_norm_is_quadratic_and_additive() {
        let st = setup(16);
        let v = manufactured(&st.grid, 32);
        let p = params(&st, 2.0, 1.0);
        let w = &st.pair.weights[0];
        let phi_ref = conjugate(&st.grid, &v, w, &p, None).unwrap().phi_ref();
        let c = Complex64::new(2.0, -3.0);
        let base = conjugate(&st.grid, &v, w, &p, Some(phi_ref)).unwrap();
        let scaled_cf = conjugate(&st.grid, &v.map(|z| c * z), w, &p, Some(phi_ref)).unwrap();
        let n0 = weighted_norm_sq(&base, &st.grid, None);
        assert!(n0 > 0.0);
        let n1 = weighted_norm_sq(&scaled_cf, &st.grid, None);
        assert!((n1 - c.norm_sqr() * n0).abs() <= 1e-12 * n1);
        let inner = weighted_norm_sq(&base, &st.grid, Some(Region::Inner));
        let outer = weighted_norm_sq(&base, &st.grid, Some(Region::Outer));
        assert!((inner + outer - n0).abs() <= 1e-12 * n0);
    }

    #[test]
    fn weighted_norm_of_a_flat_weight_matches_the_time_quadrature() {
        let st = setup(12);
        let (s, lambda, psi) = (0.5, 1.0, 1.0);
        let flat = Flat(psi);
        let p = CarlemanParams::from_samples(&[&flat], &[Vec2::ZERO], s, lambda, T).unwrap();
        let n_steps = 128;
        let dt = 2.0 * T / n_steps as f64;
        // v = e^{sφ(t)} makes w ≡ 1 on the clamped levels
        let phi = |t: f64| (p.alpha - (lambda * psi).exp()) / ((T - t) * (T + t));
        let mut v = SpaceTimeField::zeros(st.grid.n_nodes(), n_steps, dt, -T);
        for n in 1..n_steps {
            let t = v.time(n);
            v.snapshot_mut(n).fill(Complex64::new((s * (phi(t) - phi(0.0))).exp(), 0.0));
        }
        let cf = conjugate(&st.grid, &v, &flat, &p, Some(phi(0.0))).unwrap();
        let got = weighted_norm_sq(&cf, &st.grid, None);
        let limit = T - T / 64.0;
        let times: Vec<f64> = (0..=n_steps)
            .map(|n| -T + n as f64 * dt)
            .filter(|t| t.abs() <= limit * (1.0 + 1e-12))
            .collect();
        let last = times.len() - 1;
        let integral: f64 = times
            .iter()
            .enumerate()
            .map(|(m, &t)| {
                let wt = if m == 0 || m == last { 0.5 * dt } else { dt };
                wt / ((T - t) * (T + t)).powi(3)
            })
            .sum();
        let area = 2.4 * 2.4;
        let expect = s.powi(3) * lambda.powi(4) * (3.0 * lambda * psi).exp() * area * integral;
        assert!((got - expect).abs() <= 1e-8 * expect, "{got} vs {expect}");
    }

    #[test]
    fn ratio_of_zero_field_is_zero() {
        let st = setup(12);
        let v = SpaceTimeField::zeros(st.grid.n_nodes(), 16, 2.0 * T / 16.0, -T);
        let r = carleman_ratio(&st.grid, &v, st.pair.weight_refs(), &params(&st, 10.0, 1.0), &st.q).unwrap();
        assert_eq!((r.lhs, r.rhs_residual, r.rhs_boundary, r.ratio), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn ratio_is_invariant_under_scaling() {
        let st = setup(16);
        let v = manufactured(&st.grid, 32);
        let p = params(&st, 10.0, 1.0);
        let r1 = carleman_ratio(&st.grid, &v, st.pair.weight_refs(), &p, &st.q).unwrap();
        let r2 = carleman_ratio(&st.grid, &v.map(|z| 2.0 * z), st.pair.weight_refs(), &p, &st.q).unwrap();
        assert!(r1.ratio > 0.0);
        assert!((r1.ratio - r2.ratio).abs() <= 1e-12 * r1.ratio);
        assert!((r2.lhs - 4.0 * r1.lhs).abs() <= 1e-12 * r2.lhs);
        assert!((r2.rhs_residual - 4.0 * r1.rhs_residual).abs() <= 1e-12 * r2.rhs_residual);
    }

    #[test]
    fn log_assembly_matches_the_shifted_fields() {
        let st = setup(16);
        let v = manufactured(&st.grid, 32);
        let p = params(&st, 2.0, 1.0);
        let tables = pair_tables(&st.grid, st.pair.weight_refs(), &p, v.n_steps()).unwrap();
        let r = carleman_ratio_with(&st.grid, &v, &tables, &st.q).unwrap();
        let phi_ref = -r.log_scale / (2.0 * p.s);
        let (mut lhs, mut res) = (0.0, 0.0);
        for t in &tables {
            let cf = conjugate_with(t, &v, phi_ref);
            lhs += l2_sq(&apply_p1(&cf, &st.grid), &st.grid, t)
                + l2_sq(&apply_p2(&cf, &st.grid), &st.grid, t)
                + weighted_norm_sq(&cf, &st.grid, None);
            res += l2_sq(&apply_p_split(&cf, &st.grid, &st.q), &st.grid, t);
        }
        assert!((lhs - r.lhs).abs() <= 1e-9 * lhs, "{lhs} vs {}", r.lhs);
        assert!((res - r.rhs_residual).abs() <= 1e-9 * res);
    }

    #[test]
    fn solved_field_has_finite_positive_ratio() {
        let st = setup(24);
        let fields = generate_test_suite(
            &st.grid,
            &st.q,
            T,
            64,
            SuiteSpec {
                n_solved: 1,
                n_manufactured: 0,
                seed: 3,
            },
        )
        .unwrap();
        let r = carleman_ratio(&st.grid, &fields[0].v, st.pair.weight_refs(), &params(&st, 20.0, 2.0), &st.q).unwrap();
        // the Σ₊ term dominates by far more than the f64 range
        assert!(r.log_ratio.is_finite());
        assert!(r.rhs_boundary > 0.0);
    }

    #[test]
    fn sweep_of_nothing_is_empty() {
        let st = setup(12);
        let t = constant_sweep(&st.grid, &[], &[10.0], &[1.0], st.pair.weight_refs(), T, &st.q).unwrap();
        assert!(t.rows.is_empty() && t.max_by_params.is_empty());
    }

    #[test]
    fn sweep_of_a_zero_field_is_all_zero() {
        let st = setup(12);
        let field = TestField {
            id: "zero".into(),
            v: SpaceTimeField::zeros(st.grid.n_nodes(), 16, 2.0 * T / 16.0, -T),
        };
        let t = constant_sweep(&st.grid, &[field], &[10.0, 20.0], &[1.0, 2.0], st.pair.weight_refs(), T, &st.q).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!(t.rows.iter().all(|r| r.report.ratio == 0.0));
        assert_eq!(t.sup_ratio, 0.0);
    }

    #[test]
    fn suite_fields_vanish_on_the_boundary() {
        let st = setup(16);
        let fields = generate_test_suite(&st.grid, &st.q, T, 16, SuiteSpec::default()).unwrap();
        assert_eq!(fields.len(), 10);
        for f in &fields {
            for n in 0..f.v.n_times() {
                assert!(st.grid.boundary().iter().all(|b| f.v.snapshot(n)[b.index] == Complex64::default()));
            }
            assert!(f.v.max_abs() > 0.0);
        }
    }

    #[test]
    fn log_sum_handles_extreme_exponents() {
        let mut a = LogSum::EMPTY;
        assert_eq!(a.ln(), f64::NEG_INFINITY);
        a.add_ln(-1e9);
        a.add_ln(-1e9 + 2.0_f64.ln());
        assert!((a.ln() - (-1e9 + 3.0_f64.ln())).abs() < 1e-6);
        a.add_ln(5.0);
        assert!((a.ln() - 5.0).abs() < 1e-12);
    }
}
