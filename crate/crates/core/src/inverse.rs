//! The inverse potential problem: Neumann measurements of one solution,
//! the Bukhgeim–Klibanov initial-value inversion, a least-squares misfit with
//! its discrete adjoint gradient, reconstruction by L-BFGS and the empirical
//! stability sweep.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OuterDomain, Vec2};
use crate::pde_solver::{h1l2_boundary_norm, neumann_trace, time_steps, BoundaryTrace, CrankNicolson, Dirichlet, Grid2D, SpaceTimeField};
use crate::weight::HypothesisReport;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default lower bound for `|y₀|` and `|R(·, 0)|` on unit-scale data.
pub const DEFAULT_LOWER_BOUND: f64 = 0.5;

/// Whether `y₀` is real or purely imaginary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Real,
    Imaginary,
}

/// Additive complex Gaussian noise on the trace with
/// `E|n|² = (level · rms(d))²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
}

/// Time discretization, data bounds and noise for an instance.
#[derive(Debug, Clone)]
pub struct InstanceSettings {
    pub horizon: f64,
    pub dt: f64,
    /// Required lower bound on `|y₀|`.
    pub r: f64,
    pub dirichlet: Dirichlet,
    pub noise: Option<NoiseSpec>,
    /// `L∞` bound defining the admissible potentials.
    pub q_bound: f64,
}

/// One measurement `d = a₂ ∂y(p)/∂ν` on `Γ × (0, T)` for a known potential.
#[derive(Debug, Clone)]
pub struct InverseProblemInstance {
    grid: Grid2D,
    p: Vec<f64>,
    y0: Vec<Complex64>,
    kind: InitialKind,
    settings: InstanceSettings,
    n_steps: usize,
    dt: f64,
    clean: BoundaryTrace,
    data: BoundaryTrace,
    certification: Option<HypothesisReport>,
}

impl InverseProblemInstance {
    pub fn new(grid: Grid2D, p: Vec<f64>, y0: Vec<Complex64>, settings: InstanceSettings) -> Result<Self> {
        if p.len() != grid.n_nodes() || y0.len() != grid.n_nodes() {
            return Err(Error::InvalidInput("p and y0 must have one value per node".into()));
        }
        let min = y0.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if !(settings.r > 0.0) || min < settings.r {
            return Err(Error::InvalidInput(format!("min |y0| = {min} is below r = {}", settings.r)));
        }
        let scale = y0.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let kind = if y0.iter().all(|z| z.im.abs() <= 1e-14 * scale) {
            InitialKind::Real
        } else if y0.iter().all(|z| z.re.abs() <= 1e-14 * scale) {
            InitialKind::Imaginary
        } else {
            return Err(Error::InvalidInput("y0 must be real valued or purely imaginary".into()));
        };
        let bound = settings.q_bound;
        if p.iter().any(|v| !(v.abs() <= bound)) {
            return Err(Error::InvalidInput(format!("‖p‖∞ exceeds the bound {bound}")));
        }
        let (n_steps, dt) = time_steps(settings.horizon, settings.dt)?;
        let y = CrankNicolson::new(&grid, &p, dt)?.run(&y0, &settings.dirichlet, None, n_steps, 0.0)?;
        let clean = neumann_trace(&y, &grid);
        let data = match settings.noise {
            Some(noise) => add_noise(&clean, noise)?,
            None => clean.clone(),
        };
        Ok(Self {
            grid,
            p,
            y0,
            kind,
            settings,
            n_steps,
            dt,
            clean,
            data,
            certification: None,
        })
    }

    /// Attaches the weight certification used to label stability sweeps.
    pub fn with_certification(mut self, report: HypothesisReport) -> Self {
        self.certification = Some(report);
        self
    }

    pub fn certification(&self) -> Option<&HypothesisReport> {
        self.certification.as_ref()
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn p_inf(&self) -> f64 {
        self.p.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn y0(&self) -> &[Complex64] {
        &self.y0
    }

    pub fn kind(&self) -> InitialKind {
        self.kind
    }

    pub fn settings(&self) -> &InstanceSettings {
        &self.settings
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// The measured trace, noisy when noise was requested.
    pub fn data(&self) -> &BoundaryTrace {
        &self.data
    }

    /// The noiseless trace of `p`.
    pub fn clean_data(&self) -> &BoundaryTrace {
        &self.clean
    }

    fn check_potential(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.grid.n_nodes() {
            return Err(Error::InvalidInput("potential does not match the grid".into()));
        }
        let bound = self.settings.q_bound;
        if q.iter().any(|v| !(v.abs() <= bound)) {
            return Err(Error::InvalidInput(format!("‖q‖∞ exceeds the bound {bound}")));
        }
        Ok(())
    }

    /// `y(q)` on `[0, T]`.
    pub fn solve(&self, q: &[f64]) -> Result<SpaceTimeField> {
        self.check_potential(q)?;
        CrankNicolson::new(&self.grid, q, self.dt)?.run(&self.y0, &self.settings.dirichlet, None, self.n_steps, 0.0)
    }

    /// `a₂ ∂y(q)/∂ν` on `Γ × [0, T]`.
    pub fn trace(&self, q: &[f64]) -> Result<BoundaryTrace> {
        Ok(neumann_trace(&self.solve(q)?, &self.grid))
    }

    /// `‖a₂∂νy(q) − a₂∂νy(p)‖_{H¹(0,T;L²(Γ))}` against the noiseless trace.
    pub fn trace_distance(&self, q: &[f64]) -> Result<f64> {
        h1l2_boundary_norm(&self.trace(q)?.difference(&self.clean)?)
    }
}

fn add_noise(trace: &BoundaryTrace, noise: NoiseSpec) -> Result<BoundaryTrace> {
    if !(noise.level >= 0.0) {
        return Err(Error::InvalidInput(format!("noise level must be nonnegative, got {}", noise.level)));
    }
    let n = trace.values().len().max(1) as f64;
    let rms = (trace.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / n).sqrt();
    let sigma = noise.level * rms / 2.0_f64.sqrt();
    if sigma == 0.0 {
        return Ok(trace.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let values: Vec<Complex64> = trace
        .values()
        .iter()
        .map(|&v| v + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    Ok(BoundaryTrace::on_grid_like(trace, values))
}

/// Inverts `v(·, 0) = −i f R(·, 0)`: `f = Re(i v₀ / R₀)`.
pub fn bk_recover_f(v0: &[Complex64], r0: &[Complex64], r0_min: f64) -> Result<Vec<f64>> {
    if v0.len() != r0.len() {
        return Err(Error::InvalidInput("v0 and R0 differ in length".into()));
    }
    let min = r0.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min < r0_min {
        return Err(Error::SingularR0 { min, r0: r0_min });
    }
    Ok(v0.iter().zip(r0).map(|(&v, &r)| (I * v / r).re).collect())
}

/// `∂ₜu(·, 0)` by the second-order one-sided difference.
pub fn initial_time_derivative(u: &SpaceTimeField) -> Result<Vec<Complex64>> {
    if u.n_steps() < 2 {
        return Err(Error::InvalidInput("need at least two time steps".into()));
    }
    let (a, b, c) = (u.snapshot(0), u.snapshot(1), u.snapshot(2));
    Ok((0..u.n_nodes()).map(|k| (-3.0 * a[k] + 4.0 * b[k] - c[k]) / (2.0 * u.dt())).collect())
}

/// `½‖a₂∂νy(q) − d‖²_{H¹(0,T;L²(Γ))} + ½β‖q − q_ref‖²_{L²(Ω)}`.
#[derive(Debug, Clone)]
pub struct Misfit<'a> {
    instance: &'a InverseProblemInstance,
    beta: f64,
    q_ref: Vec<f64>,
}

impl<'a> Misfit<'a> {
    pub fn new(instance: &'a InverseProblemInstance, beta: f64, q_ref: Vec<f64>) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidInput(format!("β must be nonnegative, got {beta}")));
        }
        instance.check_potential(&q_ref)?;
        Ok(Self { instance, beta, q_ref })
    }

    fn regularization(&self, q: &[f64]) -> f64 {
        let g = &self.instance.grid;
        let d: Vec<f64> = q.iter().zip(&self.q_ref).map(|(a, b)| a - b).collect();
        0.5 * self.beta * g.l2_norm_real(&d).powi(2)
    }

    pub fn value(&self, q: &[f64]) -> Result<f64> {
        let r = self.instance.trace(q)?.difference(&self.instance.data)?;
        Ok(0.5 * h1l2_boundary_norm(&r)?.powi(2) + self.regularization(q))
    }

    /// Value and the gradient with respect to the nodal values of `q`, by one
    /// forward and one adjoint Crank–Nicolson sweep.
    pub fn value_and_gradient(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        let inst = self.instance;
        inst.check_potential(q)?;
        let g = &inst.grid;
        let cn = CrankNicolson::new(g, q, inst.dt)?;
        let y = cn.run(&inst.y0, &inst.settings.dirichlet, None, inst.n_steps, 0.0)?;
        let r = neumann_trace(&y, g).difference(&inst.data)?;
        let value = 0.5 * h1l2_boundary_norm(&r)?.powi(2) + self.regularization(q);
        let wr = r.h1l2_gram_apply()?;

        // μⁿ = Bᵀ(W r)ⁿ on interior unknowns; B is the one-sided flux stencil
        let n_int = g.n_interior();
        let interior_of = |k: usize| {
            let (i, j) = g.ij(k);
            g.interior_index(i, j).expect("inward nodes are interior")
        };
        let c = g.coeff().a2 / (2.0 * g.h());
        let mu = |n: usize| {
            let mut out = vec![Complex64::default(); n_int];
            for (b, &w) in g.boundary().iter().zip(wr.at_time(n)) {
                out[interior_of(b.inward[0])] += -4.0 * c * w;
                out[interior_of(b.inward[1])] += c * w;
            }
            out
        };
        let full = |x: &[Complex64]| {
            let mut v = vec![Complex64::default(); g.n_nodes()];
            for (k, r) in g.interior() {
                v[k] = x[r];
            }
            v
        };

        let mut grad = vec![0.0; g.n_nodes()];
        let n_steps = inst.n_steps;
        let mut lambda = mu(n_steps);
        cn.solve_adjoint(&mut lambda);
        for n in (1..=n_steps).rev() {
            let (yn, yp) = (y.snapshot(n), y.snapshot(n - 1));
            for (k, r) in g.interior() {
                grad[k] += (lambda[r].conj() * (yn[k] + yp[k])).re * -0.5;
            }
            if n == 1 {
                break;
            }
            // Mᴴλⁿ⁻¹ = μⁿ⁻¹ + Nᴴλⁿ with Nᴴ = −M
            let kl = g.apply_operator(&full(&lambda), q);
            let mut rhs = mu(n - 1);
            for (k, r) in g.interior() {
                rhs[r] -= lambda[r] * (I / inst.dt) + 0.5 * kl[k];
            }
            cn.solve_adjoint(&mut rhs);
            lambda = rhs;
        }
        let area = g.cell_area();
        for (k, _) in g.interior() {
            grad[k] += self.beta * area * (q[k] - self.q_ref[k]);
        }
        Ok((value, grad))
    }
}

/// Convenience wrapper around [`Misfit::value`].
pub fn misfit(q: &[f64], instance: &InverseProblemInstance, beta: f64, q_ref: &[f64]) -> Result<f64> {
    Misfit::new(instance, beta, q_ref.to_vec())?.value(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSettings {
    pub max_iter: usize,
    /// Stop when `‖∇J‖ ≤ grad_tol · ‖∇J(q₀)‖`.
    pub grad_tol: f64,
    /// L-BFGS history length.
    pub memory: usize,
    pub max_backtracks: usize,
    /// Length in `L∞` of the first (steepest descent) trial step.
    pub initial_step: f64,
}

impl Default for ReconstructionSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-6,
            memory: 10,
            max_backtracks: 40,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReconstructionStatus {
    Converged,
    MaxIterations,
    /// No decrease after full backtracking.
    StalledReconstruction { iteration: usize, gradient_norm: f64, last_step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub q_hat: Vec<f64>,
    pub iterations: usize,
    pub initial_misfit: f64,
    pub final_misfit: f64,
    pub beta: f64,
    /// `‖q̂ − p‖ / ‖p‖` over interior nodes (`‖q̂ − p‖` when `p = 0`).
    pub relative_error: f64,
    pub status: ReconstructionStatus,
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS with Armijo backtracking on the misfit, regularized towards `q₀`.
pub fn reconstruct(
    instance: &InverseProblemInstance,
    q0: &[f64],
    beta: f64,
    settings: ReconstructionSettings,
) -> Result<ReconstructionResult> {
    const ARMIJO: f64 = 1e-4;
    let misfit = Misfit::new(instance, beta, q0.to_vec())?;
    let bound = instance.settings.q_bound;
    let mut q = q0.to_vec();
    let (mut j, mut grad) = misfit.value_and_gradient(&q)?;
    let initial_misfit = j;
    let g0 = dot(&grad, &grad).sqrt();
    let mut history = vec![j];
    let mut memory: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut status = ReconstructionStatus::MaxIterations;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        let gn = dot(&grad, &grad).sqrt();
        if gn == 0.0 || gn <= settings.grad_tol * g0 {
            status = ReconstructionStatus::Converged;
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        let gamma = match memory.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => settings.initial_step / grad.iter().fold(0.0_f64, |m, g| m.max(g.abs())),
        };
        d.iter_mut().for_each(|di| *di *= gamma);
        for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&grad, &d);
        if !(slope < 0.0) {
            memory.clear();
            let scale = settings.initial_step / grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
            d = grad.iter().map(|g| -scale * g).collect();
            slope = dot(&grad, &d);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            let trial: Vec<f64> = q.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            if trial.iter().all(|v| v.abs() <= bound) {
                let jt = misfit.value(&trial)?;
                if jt <= j + ARMIJO * step * slope {
                    accepted = Some((trial, jt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((trial, _)) = accepted else {
            status = ReconstructionStatus::StalledReconstruction {
                iteration: iterations,
                gradient_norm: gn,
                last_step: step,
            };
            break;
        };
        let (jn, gnext) = misfit.value_and_gradient(&trial)?;
        let s: Vec<f64> = trial.iter().zip(&q).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnext.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if memory.len() == settings.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        q = trial;
        j = jn;
        grad = gnext;
        iterations += 1;
        history.push(j);
    }
    let relative_error = relative_l2(instance.grid(), &q, instance.p());
    Ok(ReconstructionResult {
        q_hat: q,
        iterations,
        initial_misfit,
        final_misfit: j,
        beta,
        relative_error,
        status,
        history,
    })
}

fn relative_l2(grid: &Grid2D, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let num = grid.l2_norm_real(&d);
    let den = grid.l2_norm_real(b);
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Smooth random perturbation: three Gaussian bumps at random centers in the
/// middle 60% of Ω, scaled to `‖δ‖∞ = amplitude`.
pub fn random_perturbation(grid: &Grid2D, amplitude: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let OuterDomain::Rectangle {
        x_min,
        x_max,
        y_min,
        y_max,
    } = grid.layout().outer
    else {
        return Err(Error::Geometry("perturbations need a rectangular Ω".into()));
    };
    let (lx, ly) = (x_max - x_min, y_max - y_min);
    let bumps: Vec<(Vec2, f64, f64)> = (0..3)
        .map(|_| {
            let c = Vec2::new(
                x_min + lx * rng.random_range(0.2..0.8),
                y_min + ly * rng.random_range(0.2..0.8),
            );
            let w = lx.min(ly) * rng.random_range(0.08..0.2);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (c, w, sign * rng.random_range(0.5..1.0))
        })
        .collect();
    let raw: Vec<f64> = grid.sample(|x| {
        bumps
            .iter()
            .map(|&(c, w, a)| a * (-(x - c).norm_sq() / (2.0 * w * w)).exp())
            .sum()
    });
    let peak = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(raw);
    }
    Ok(raw.iter().map(|v| amplitude * v / peak).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilitySettings {
    pub n_perturbations: usize,
    /// Amplitudes are log-spaced over this range.
    pub amplitudes: (f64, f64),
    pub seed: u64,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        Self {
            n_perturbations: 30,
            amplitudes: (1e-3, 1e-1),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub member: usize,
    pub amplitude: f64,
    /// `‖p − q‖_{L²(Ω)}`.
    pub potential_distance: f64,
    /// `‖a₂∂νy(p) − a₂∂νy(q)‖_{H¹(0,T;L²(Γ))}`.
    pub trace_distance: f64,
    /// `potential_distance / trace_distance`, absent when the trace distance is 0.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySweep {
    pub records: Vec<StabilityRecord>,
    /// Largest ratio.
    pub empirical_c: f64,
    pub median_ratio: f64,
    /// Least-squares slope of `ln ‖p − q‖` against `ln ‖trace difference‖`.
    pub loglog_slope: f64,
    /// Whether the attached weight certification passed; `false` when absent.
    pub certified: bool,
}

/// Log-spaced amplitudes over `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|m| lo * (hi / lo).powf(m as f64 / (n - 1) as f64)).collect(),
    }
}

/// Solves for `q = p + δ` over a seeded ensemble of smooth perturbations and
/// records both distances. Members run in parallel; records keep member order.
pub fn stability_sweep(instance: &InverseProblemInstance, settings: StabilitySettings) -> Result<StabilitySweep> {
    let (lo, hi) = settings.amplitudes;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidInput(format!("bad amplitude range [{lo}, {hi}]")));
    }
    let grid = instance.grid();
    let bound = instance.settings.q_bound;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let members: Vec<(usize, f64, Vec<f64>)> = log_spaced(lo, hi, settings.n_perturbations)
        .into_iter()
        .enumerate()
        .map(|(m, a)| {
            let delta = random_perturbation(grid, a, &mut rng)?;
            let q: Vec<f64> = instance.p.iter().zip(&delta).map(|(p, d)| (p + d).clamp(-bound, bound)).collect();
            Ok((m, a, q))
        })
        .collect::<Result<_>>()?;
    let results: Vec<Result<Option<StabilityRecord>>> = members
        .par_iter()
        .map(|(m, a, q)| {
            let diff: Vec<f64> = q.iter().zip(&instance.p).map(|(x, y)| x - y).collect();
            let potential_distance = grid.l2_norm_real(&diff);
            if potential_distance == 0.0 {
                return Ok(None);
            }
            let trace_distance = instance.trace_distance(q)?;
            Ok(Some(StabilityRecord {
                member: *m,
                amplitude: *a,
                potential_distance,
                trace_distance,
                ratio: (trace_distance > 0.0).then(|| potential_distance / trace_distance),
            }))
        })
        .collect();
    let mut records = Vec::new();
    for r in results {
        if let Some(rec) = r? {
            records.push(rec);
        }
    }
    let mut ratios: Vec<f64> = records.iter().filter_map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let empirical_c = ratios.last().copied().unwrap_or(0.0);
    let median_ratio = median(&ratios);
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.trace_distance > 0.0)
        .map(|r| (r.trace_distance.ln(), r.potential_distance.ln()))
        .collect();
    let loglog_slope = least_squares_slope(&points);
    let certified = instance.certification.as_ref().is_some_and(|c| c.all_ok());
    Ok(StabilitySweep {
        records,
        empirical_c,
        median_ratio,
        loglog_slope,
        certified,
    })
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

/// Slope of the least-squares line through `(x, y)`; NaN for fewer than two
/// distinct abscissae.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
