use num_complex::Complex64;

use super::grid::Grid2D;
use super::stepping::SpaceTimeField;
use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Boundary flux samples on `Γ × [t0, t0 + n_steps·dt]`, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    points: Vec<Vec2>,
    normals: Vec<Vec2>,
    weights: Vec<f64>,
    dt: f64,
    n_times: usize,
    values: Vec<Complex64>,
}

impl BoundaryTrace {
    /// A trace on `grid`'s boundary samples with the given values
    /// (`n_times` blocks of one value per sample).
    pub fn on_grid(grid: &Grid2D, dt: f64, n_times: usize, values: Vec<Complex64>) -> Result<Self> {
        let b = grid.boundary();
        if values.len() != b.len() * n_times {
            return Err(Error::InvalidTrace(format!(
                "expected {} values, got {}",
                b.len() * n_times,
                values.len()
            )));
        }
        Ok(Self {
            points: b.iter().map(|s| s.point).collect(),
            normals: b.iter().map(|s| s.normal).collect(),
            weights: b.iter().map(|s| s.weight).collect(),
            dt,
            n_times,
            values,
        })
    }

    /// Same samples and time grid as `other`, new values.
    ///
    /// # Panics
    /// If the number of values differs from `other`'s.
    pub fn on_grid_like(other: &Self, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), other.values.len(), "value count must match");
        Self {
            values,
            ..other.clone()
        }
    }

    pub fn n_samples(&self) -> usize {
        self.points.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    /// Arc-length quadrature weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at_time(&self, n: usize) -> &[Complex64] {
        let m = self.n_samples();
        &self.values[n * m..(n + 1) * m]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.points != other.points || self.n_times != other.n_times {
            return Err(Error::InvalidTrace("traces live on different samples".into()));
        }
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            ..self.clone()
        })
    }

    fn check_h1(&self) -> Result<()> {
        if self.n_times < 3 {
            return Err(Error::InvalidTrace(format!(
                "need at least 3 time levels, got {}",
                self.n_times
            )));
        }
        Ok(())
    }

    /// `∂ₜg` at level `n` for sample `s`: central inside, second-order
    /// one-sided at the ends.
    fn time_derivative(&self, s: usize, n: usize) -> Complex64 {
        let m = self.n_samples();
        let g = |k: usize| self.values[k * m + s];
        let last = self.n_times - 1;
        let d = if n == 0 {
            -3.0 * g(0) + 4.0 * g(1) - g(2)
        } else if n == last {
            3.0 * g(last) - 4.0 * g(last - 1) + g(last - 2)
        } else {
            g(n + 1) - g(n - 1)
        };
        d / (2.0 * self.dt)
    }

    fn time_weight(&self, n: usize) -> f64 {
        if n == 0 || n == self.n_times - 1 {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    /// `W g` for the Gram operator of the discrete `H¹(0,T;L²(Γ))` form, so that
    /// `‖g‖² = Re Σ conj(g)·(W g)`; used for gradients of trace misfits.
    pub fn h1l2_gram_apply(&self) -> Result<Self> {
        self.check_h1()?;
        let m = self.n_samples();
        let last = self.n_times - 1;
        let mut out = vec![Complex64::default(); self.values.len()];
        for s in 0..m {
            let ws = self.weights[s];
            for n in 0..self.n_times {
                out[n * m + s] += ws * self.time_weight(n) * self.values[n * m + s];
                // transpose of the difference stencil
                let r = ws * self.time_weight(n) * self.time_derivative(s, n) / (2.0 * self.dt);
                let stencil: &[(usize, f64)] = if n == 0 {
                    &[(0, -3.0), (1, 4.0), (2, -1.0)]
                } else if n == last {
                    &[(last, 3.0), (last - 1, -4.0), (last - 2, 1.0)]
                } else {
                    &[(n + 1, 1.0), (n - 1, -1.0)]
                };
                for &(k, c) in stencil {
                    out[k * m + s] += c * r;
                }
            }
        }
        Ok(Self {
            values: out,
            ..self.clone()
        })
    }
}

/// `a₂ ∂y/∂ν` at the boundary samples of `grid` for every time level, using
/// the second-order one-sided difference `(3y₀ − 4y₁ + y₂)/(2h)`.
pub fn neumann_trace(field: &SpaceTimeField, grid: &Grid2D) -> BoundaryTrace {
    let a2 = grid.coeff().a2;
    let h = grid.h();
    let b = grid.boundary();
    let mut values = Vec::with_capacity(b.len() * field.n_times());
    for n in 0..field.n_times() {
        let y = field.snapshot(n);
        values.extend(
            b.iter()
                .map(|s| a2 * (3.0 * y[s.index] - 4.0 * y[s.inward[0]] + y[s.inward[1]]) / (2.0 * h)),
        );
    }
    BoundaryTrace::on_grid(grid, field.dt(), field.n_times(), values).expect("sizes match by construction")
}

/// `sqrt(∫ ‖g‖²_{L²(Γ)} + ‖∂ₜg‖²_{L²(Γ)} dt)` with the trapezoid rule in time
/// and arc-length weights on `Γ`.
pub fn h1l2_boundary_norm(trace: &BoundaryTrace) -> Result<f64> {
    trace.check_h1()?;
    let m = trace.n_samples();
    let mut acc = 0.0;
    for n in 0..trace.n_times() {
        let wt = trace.time_weight(n);
        for s in 0..m {
            let g = trace.values[n * m + s];
            acc += wt * trace.weights[s] * (g.norm_sqr() + trace.time_derivative(s, n).norm_sqr());
        }
    }
    Ok(acc.sqrt())
}
