//! The six experiments.

use carleman_lab::carleman_check::{constant_sweep_clamped, generate_test_suite, SuiteSpec};
use carleman_lab::geometry::DEFAULT_CONVEXITY_SCAN;
use carleman_lab::inverse::{
    reconstruct, stability_sweep, InstanceSettings, InverseProblemInstance, NoiseSpec, ReconstructionSettings,
    StabilitySettings,
};
use carleman_lab::pde_solver::io::{read_binary, write_binary, write_field_csv, write_trace_csv, Precision};
use carleman_lab::pde_solver::{h1l2_boundary_norm, neumann_trace, solve_forward, SpaceTimeField};
use carleman_lab::weight::HypothesisReport;
use serde_json::{json, Value};

use crate::artifacts::{config_hash, Artifacts, Plot, Series};
use crate::config::ExperimentConfig;
use crate::setup;
use crate::CliError;

const REGULARITY_NOTE: &str =
    "y(p) in H1(0,T;Linf(Omega)) is not certified on the grid; smooth data is used as a proxy";

fn num(v: f64) -> String {
    format!("{v}")
}

fn hypothesis_failure(report: HypothesisReport, doc: Value) -> CliError {
    CliError::Hypothesis { report, document: doc }
}

pub fn geometry_check(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let iface = setup::interface(cfg)?;
    let conv = iface.certify_strong_convexity(DEFAULT_CONVEXITY_SCAN);
    let hessian_lower_bound = iface.hessian_lower_bound(0.5, 1.5, 1024);
    let mut out = Artifacts::new("geometry-check", cfg)?;
    let doc = out.json(
        "geometry.json",
        json!({
            "min_curvature": conv.min_curvature,
            "worst_angle": conv.worst_angle,
            "hessian_lower_bound": hessian_lower_bound,
            "ok": conv.ok,
        }),
    )?;
    if !conv.ok {
        return Err(hypothesis_failure(HypothesisReport::default(), doc));
    }
    Ok(doc)
}

pub fn weight_verify(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let layout = setup::layout(cfg)?;
    let (report, pair) = setup::certify(cfg, &layout)?;
    let mut out = Artifacts::new("weight-verify", cfg)?;
    let doc = out.json(
        "weights.json",
        json!({
            "ok": report.all_ok(),
            "records": report.records,
            "epsilon": pair.as_ref().map(|p| p.epsilon),
        }),
    )?;
    if !report.all_ok() {
        return Err(hypothesis_failure(report, doc));
    }
    Ok(doc)
}

pub fn solve_forward_cmd(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let layout = setup::layout(cfg)?;
    let grid = setup::grid(cfg, &layout, cfg.physics.nx)?;
    let mut out = Artifacts::new("solve-forward", cfg)?;
    // the forward solve depends only on these two blocks
    let key = config_hash(&(&cfg.geometry, &cfg.physics));
    let cache_dir = out.dir.join("cache");
    std::fs::create_dir_all(&cache_dir).map_err(|e| CliError::io(&cache_dir, e))?;
    let cache = cache_dir.join(format!("forward-{key}.clsf"));
    let cached = cache.exists();
    let field: SpaceTimeField = if cached {
        let file = std::fs::File::open(&cache).map_err(|e| CliError::io(&cache, e))?;
        read_binary(std::io::BufReader::new(file))?.0
    } else {
        let p = setup::scalar_field(&grid, &cfg.physics.p);
        let y0 = setup::initial_data(cfg, &grid);
        let y = solve_forward(&grid, &p, &y0, &setup::dirichlet(cfg), cfg.physics.horizon, cfg.physics.dt)?;
        let mut buf = Vec::new();
        write_binary(&mut buf, &y, grid.dims(), Precision::Complex128)?;
        std::fs::write(&cache, buf).map_err(|e| CliError::io(&cache, e))?;
        y
    };
    let trace = neumann_trace(&field, &grid);
    let mut buf = Vec::new();
    write_field_csv(&mut buf, &field, &grid)?;
    out.csv_text("field.csv", &String::from_utf8(buf).expect("ascii csv"))?;
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &trace, field.t0())?;
    out.csv_text("trace.csv", &String::from_utf8(buf).expect("ascii csv"))?;
    let (nx, ny) = grid.dims();
    out.json(
        "forward.json",
        json!({
            "nx": nx,
            "ny": ny,
            "n_steps": field.n_steps(),
            "dt": field.dt(),
            "cached": cached,
            "cache_file": cache.file_name().map(|n| n.to_string_lossy().into_owned()),
            "l2_initial": grid.l2_norm(field.snapshot(0)),
            "l2_final": grid.l2_norm(field.snapshot(field.n_steps())),
            "max_abs": field.max_abs(),
            "trace_h1l2_norm": h1l2_boundary_norm(&trace)?,
        }),
    )
}

pub fn carleman_sweep(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let layout = setup::layout(cfg)?;
    let (report, pair) = setup::certify(cfg, &layout)?;
    let mut out = Artifacts::new("carleman-sweep", cfg)?;
    let pair = match pair {
        Some(pair) if report.all_ok() => pair,
        _ => {
            let doc = out.json("weights.json", json!({ "ok": false, "records": report.records }))?;
            return Err(hypothesis_failure(report, doc));
        }
    };
    let c = &cfg.carleman;
    let grid = setup::grid(cfg, &layout, c.nx.unwrap_or(cfg.physics.nx))?;
    let q = setup::scalar_field(&grid, &cfg.physics.p);
    let spec = SuiteSpec {
        n_solved: c.n_solved,
        n_manufactured: c.n_manufactured,
        seed: c.seed,
    };
    let fields = generate_test_suite(&grid, &q, cfg.physics.horizon, c.n_steps, spec)?;
    let horizon = cfg.physics.horizon;
    let delta_t = c.delta_t.unwrap_or(horizon / 64.0);
    let table = constant_sweep_clamped(&grid, &fields, &c.s, &c.lambda, pair.weight_refs(), horizon, delta_t, &q)?;
    let tail_weight = table.rows.iter().map(|r| r.report.tail_weight).fold(0.0, f64::max);
    out.csv(
        "carleman_sweep.csv",
        &["field_id", "s", "lambda", "lhs", "rhs_residual", "rhs_boundary", "ratio", "log_ratio", "log_scale"],
        table.rows.iter().map(|r| {
            let p = &r.report;
            vec![
                r.field_id.clone(),
                num(p.s),
                num(p.lambda),
                num(p.lhs),
                num(p.rhs_residual),
                num(p.rhs_boundary),
                num(p.ratio),
                num(p.log_ratio),
                num(p.log_scale),
            ]
        }),
    )?;
    let series = c
        .lambda
        .iter()
        .map(|&l| Series {
            label: format!("lambda = {l}"),
            points: table.max_by_params.iter().filter(|m| m.1 == l).map(|m| (m.0, m.2)).collect(),
            line: true,
        })
        .collect();
    out.svg(
        "carleman_ratio.svg",
        &Plot {
            title: "Carleman ratio, max over test fields".into(),
            x_label: "s".into(),
            y_label: "lhs / rhs".into(),
            log_x: true,
            log_y: false,
            series,
        },
    )?;
    out.json(
        "carleman_sweep.json",
        json!({
            "sup_ratio": table.sup_ratio,
            "stabilized": table.stabilized,
            "upper_sups": table.upper_sups,
            "max_by_params": table.max_by_params,
            "n_fields": fields.len(),
            "delta_t": delta_t,
            "max_tail_weight": tail_weight,
            "epsilon": pair.epsilon,
        }),
    )
}

fn instance(cfg: &ExperimentConfig, with_noise: bool) -> Result<(InverseProblemInstance, bool), CliError> {
    let layout = setup::layout(cfg)?;
    let grid = setup::grid(cfg, &layout, cfg.physics.nx)?;
    let (report, _) = setup::certify(cfg, &layout)?;
    let certified = report.all_ok();
    let p = setup::scalar_field(&grid, &cfg.physics.p);
    let y0 = setup::initial_data(cfg, &grid);
    let settings = InstanceSettings {
        horizon: cfg.physics.horizon,
        dt: cfg.physics.dt,
        r: cfg.physics.r,
        dirichlet: setup::dirichlet(cfg),
        noise: cfg
            .inverse
            .noise
            .filter(|_| with_noise)
            .map(|n| NoiseSpec { level: n.level, seed: n.seed }),
        q_bound: cfg.physics.q_bound,
    };
    let inst = InverseProblemInstance::new(grid, p, y0, settings)
        .map_err(|e| CliError::schema("physics", e.to_string()))?
        .with_certification(report);
    Ok((inst, certified))
}

pub fn invert(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let (inst, certified) = instance(cfg, true)?;
    let grid = inst.grid();
    let q0 = setup::scalar_field(grid, &cfg.inverse.q0);
    let settings = ReconstructionSettings {
        max_iter: cfg.inverse.max_iter,
        ..Default::default()
    };
    let res = reconstruct(&inst, &q0, cfg.inverse.beta, settings)?;
    let mut out = Artifacts::new("invert", cfg)?;
    out.csv(
        "reconstruction.csv",
        &["i", "j", "x", "y", "p", "q0", "q_hat"],
        (0..grid.n_nodes()).map(|k| {
            let (i, j) = grid.ij(k);
            let x = grid.point(k);
            vec![i.to_string(), j.to_string(), num(x.x), num(x.y), num(inst.p()[k]), num(q0[k]), num(res.q_hat[k])]
        }),
    )?;
    out.csv(
        "history.csv",
        &["iteration", "misfit"],
        res.history.iter().enumerate().map(|(n, j)| vec![n.to_string(), num(*j)]),
    )?;
    out.svg(
        "history.svg",
        &Plot {
            title: "Misfit history".into(),
            x_label: "iteration".into(),
            y_label: "misfit".into(),
            log_x: false,
            log_y: true,
            series: vec![Series {
                label: format!("beta = {}", res.beta),
                points: res.history.iter().enumerate().map(|(n, j)| (n as f64, *j)).collect(),
                line: true,
            }],
        },
    )?;
    out.json(
        "reconstruction.json",
        json!({
            "iterations": res.iterations,
            "initial_misfit": res.initial_misfit,
            "final_misfit": res.final_misfit,
            "beta": res.beta,
            "relative_error": res.relative_error,
            "status": res.status,
            "certified": certified,
            "notes": [REGULARITY_NOTE],
        }),
    )
}

pub fn stability(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let (inst, _) = instance(cfg, false)?;
    let inv = &cfg.inverse;
    let settings = StabilitySettings {
        n_perturbations: inv.n_perturbations,
        amplitudes: (inv.amplitudes[0], inv.amplitudes[1]),
        seed: inv.seed,
    };
    let sweep = stability_sweep(&inst, settings)?;
    let mut out = Artifacts::new("stability", cfg)?;
    out.csv(
        "stability.csv",
        &["member", "amplitude", "potential_distance", "trace_distance", "ratio"],
        sweep.records.iter().map(|r| {
            vec![
                r.member.to_string(),
                num(r.amplitude),
                num(r.potential_distance),
                num(r.trace_distance),
                r.ratio.map(num).unwrap_or_default(),
            ]
        }),
    )?;
    let points: Vec<(f64, f64)> = sweep.records.iter().map(|r| (r.trace_distance, r.potential_distance)).collect();
    let logs: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    let mut series = vec![Series {
        label: "members".into(),
        points: points.clone(),
        line: false,
    }];
    if logs.len() >= 2 && sweep.loglog_slope.is_finite() {
        let n = logs.len() as f64;
        let (mx, my) = (logs.iter().map(|p| p.0).sum::<f64>() / n, logs.iter().map(|p| p.1).sum::<f64>() / n);
        let (lo, hi) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let fit = |x: f64| (x.exp(), (my + sweep.loglog_slope * (x - mx)).exp());
        series.push(Series {
            label: format!("fit, slope {:.3}", sweep.loglog_slope),
            points: vec![fit(lo), fit(hi)],
            line: true,
        });
    }
    out.svg(
        "stability.svg",
        &Plot {
            title: "Stability sweep".into(),
            x_label: "trace distance, H1(0,T;L2(Gamma))".into(),
            y_label: "potential distance, L2(Omega)".into(),
            log_x: true,
            log_y: true,
            series,
        },
    )?;
    out.json(
        "stability.json",
        json!({
            "empirical_C": sweep.empirical_c,
            "median_ratio": sweep.median_ratio,
            "loglog_slope": sweep.loglog_slope,
            "certified": sweep.certified,
            "n": sweep.records.len(),
            "seed": inv.seed,
            "notes": [REGULARITY_NOTE],
        }),
    )
}
