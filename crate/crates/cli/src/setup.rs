//! Turns a validated configuration into domain objects.

use carleman_lab::geometry::{DomainLayout, OuterDomain, RadialInterface, Vec2};
use carleman_lab::pde_solver::{Dirichlet, Grid2D};
use carleman_lab::weight::{
    build_epsilon_pair, build_weight_unchecked, verify_hypotheses, EpsilonPair, HypothesisReport, PiecewiseCoefficient,
    TransmissionWeight, VerifySettings,
};
use num_complex::Complex64;

use crate::config::{BoundarySpec, ExperimentConfig, InterfaceSpec, ScalarSpec};
use crate::CliError;

fn vec2(v: [f64; 2]) -> Vec2 {
    Vec2::new(v[0], v[1])
}

fn at(path: &str) -> impl Fn(carleman_lab::Error) -> CliError + '_ {
    move |e| CliError::schema(path, e.to_string())
}

pub fn interface(cfg: &ExperimentConfig) -> Result<RadialInterface, CliError> {
    let path = "geometry.interface";
    match &cfg.geometry.interface {
        InterfaceSpec::Disk { radius, center, samples } => {
            RadialInterface::disk(vec2(*center), *radius, *samples).map_err(at(path))
        }
        InterfaceSpec::Fourier {
            c0,
            modes,
            center,
            samples,
        } => RadialInterface::fourier(vec2(*center), *c0, modes, *samples).map_err(at(path)),
        InterfaceSpec::File { path: file, center } => {
            let text = std::fs::read_to_string(file)
                .map_err(|e| CliError::schema("geometry.interface.path", format!("{file}: {e}")))?;
            let mut samples = Vec::new();
            for (n, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let parsed: Option<(f64, f64)> = line
                    .split_once(',')
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                let pair = parsed.ok_or_else(|| {
                    CliError::schema("geometry.interface.path", format!("{file}:{}: expected `theta,rho`", n + 1))
                })?;
                samples.push(pair);
            }
            RadialInterface::from_samples(vec2(*center), &samples).map_err(at(path))
        }
    }
}

pub fn layout(cfg: &ExperimentConfig) -> Result<DomainLayout, CliError> {
    let o = cfg.geometry.outer;
    let outer = OuterDomain::Rectangle {
        x_min: o.x_min,
        x_max: o.x_max,
        y_min: o.y_min,
        y_max: o.y_max,
    };
    DomainLayout::new(outer, interface(cfg)?).map_err(at("geometry"))
}

pub fn coefficient(cfg: &ExperimentConfig) -> Result<PiecewiseCoefficient, CliError> {
    PiecewiseCoefficient::new(cfg.physics.a1, cfg.physics.a2).map_err(at("physics.a1"))
}

pub fn grid(cfg: &ExperimentConfig, layout: &DomainLayout, nx: usize) -> Result<Grid2D, CliError> {
    Grid2D::new(layout, coefficient(cfg)?, nx).map_err(at("physics.nx"))
}

pub fn scalar_field(grid: &Grid2D, spec: &ScalarSpec) -> Vec<f64> {
    match *spec {
        ScalarSpec::Zero => vec![0.0; grid.n_nodes()],
        ScalarSpec::Constant { value } => vec![value; grid.n_nodes()],
        ScalarSpec::Gaussian {
            amplitude,
            center,
            width,
        } => {
            let c = vec2(center);
            grid.sample(|x| amplitude * (-(x - c).norm_sq() / (2.0 * width * width)).exp())
        }
        ScalarSpec::CosProduct { base, amplitude, k } => {
            grid.sample(|x| base + amplitude * (k[0] * x.x).cos() * (k[1] * x.y).cos())
        }
    }
}

pub fn initial_data(cfg: &ExperimentConfig, grid: &Grid2D) -> Vec<Complex64> {
    let rot = if cfg.physics.y0.imaginary {
        Complex64::new(0.0, 1.0)
    } else {
        Complex64::new(1.0, 0.0)
    };
    scalar_field(grid, &cfg.physics.y0.profile).into_iter().map(|v| rot * v).collect()
}

pub fn dirichlet(cfg: &ExperimentConfig) -> Dirichlet {
    match cfg.physics.h {
        BoundarySpec::Zero => Dirichlet::Zero,
        BoundarySpec::FromInitial => Dirichlet::FromInitial,
    }
}

/// The weight at `x0`, built without the jump-sign guard so that a reversed
/// jump reaches the hypothesis report instead of failing early.
pub fn single_weight(cfg: &ExperimentConfig, layout: &DomainLayout) -> Result<TransmissionWeight, CliError> {
    let c = &cfg.carleman;
    build_weight_unchecked(
        &layout.interface,
        vec2(cfg.geometry.x0),
        coefficient(cfg)?,
        c.m2,
        (c.cutoff[0], c.cutoff[1]),
    )
    .map_err(at("geometry.x0"))
}

/// Hypotheses of the weight at `x0`, plus the pair's domination records when
/// the pair can be built.
pub fn certify(cfg: &ExperimentConfig, layout: &DomainLayout) -> Result<(HypothesisReport, Option<EpsilonPair>), CliError> {
    let weight = single_weight(cfg, layout)?;
    let mut report = verify_hypotheses(&weight, layout, VerifySettings::default());
    let pair = if report.all_ok() {
        let pair = build_epsilon_pair(
            &layout.interface,
            [vec2(cfg.geometry.x1), vec2(cfg.geometry.x2)],
            coefficient(cfg)?,
            cfg.carleman.m2,
        )
        .map_err(at("geometry.x1"))?;
        report.records.extend(pair.h5);
        Some(pair)
    } else {
        None
    };
    Ok((report, pair))
}
