use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"
[geometry]
outer = { x_min = -1.2, x_max = 1.2, y_min = -1.2, y_max = 1.2 }
interface = { kind = "disk", radius = 1.0 }
x0 = [-0.3, 0.0]
x1 = [-0.3, 0.0]
x2 = [0.3, 0.0]

[physics]
a1 = 2.0
a2 = 1.0
p = { kind = "gaussian", amplitude = 1.0, center = [0.2, -0.1], width = 0.25 }
y0 = { profile = { kind = "cos_product", base = 2.0, amplitude = 1.0, k = [2.0, 3.0] } }
T = 1.0
nx = 16
dt = 0.05

[carleman]
s = [10.0, 20.0]
lambda = [1.0]
n_steps = 16
n_solved = 1
n_manufactured = 2

[inverse]
max_iter = 5
n_perturbations = 6

[output]
directory = "out"
"#;

struct Run {
    dir: TempDir,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = TempDir::new().unwrap();
        std::fs::write(dir.path().join("config.toml"), config).unwrap();
        Run { dir }
    }

    fn exec(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_carleman-lab"))
            .args(args)
            .arg("--config")
            .arg(self.dir.path().join("config.toml"))
            .env("CARLEMAN_LAB_OUTPUT_ROOT", self.dir.path())
            .output()
            .unwrap()
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Header row after the `#` metadata line.
fn csv_header(text: &str) -> Vec<String> {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# carleman-lab "));
    lines.next().unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn geometry_check_reports_unit_curvature_for_the_disk() {
    let run = Run::new(SMALL);
    let o = run.exec(&["geometry-check"]);
    assert_eq!(o.status.code(), Some(0));
    let doc = stdout_json(&o);
    assert_eq!(doc["ok"], true);
    assert!((doc["min_curvature"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(doc["meta"]["command"], "geometry-check");
    assert_eq!(doc["meta"]["config_hash"].as_str().unwrap().len(), 64);
    assert!(run.out().join("geometry.json").exists());
}

#[test]
fn weight_verify_passes_and_the_reversed_jump_exits_three() {
    let run = Run::new(SMALL);
    let o = run.exec(&["weight-verify"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["ok"], true);

    let reversed = Run::new(&SMALL.replace("a1 = 2.0\na2 = 1.0", "a1 = 1.0\na2 = 2.0"));
    let o = reversed.exec(&["weight-verify"]);
    assert_eq!(o.status.code(), Some(3));
    let doc = stdout_json(&o);
    assert_eq!(doc["ok"], false);
    let failed: Vec<&str> = doc["records"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["ok"] == false)
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"H2"), "{failed:?}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("H2"));
    assert_eq!(reversed.exec(&["carleman-sweep"]).status.code(), Some(3));
}

#[test]
fn schema_errors_exit_two_with_the_field_path() {
    let cases = [
        (SMALL.replace("dt = 0.05", "dt = \"fast\""), "physics.dt"),
        (SMALL.replace("dt = 0.05", "dt = 0.0"), "physics.dt"),
        (SMALL.replace("a1 = 2.0", "a1 = 2.0\nmass = 1.0"), "physics"),
        (SMALL.replace("s = [10.0, 20.0]", "s = [10.0, -1.0]"), "carleman.s"),
        (SMALL.replace("kind = \"disk\"", "kind = \"square\""), "geometry.interface"),
        (SMALL.replace("n_steps = 16", "n_steps = 16\ndelta_t = 1.5"), "carleman.delta_t"),
    ];
    for (text, path) in cases {
        let o = Run::new(&text).exec(&["geometry-check"]);
        assert_eq!(o.status.code(), Some(2), "{path}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(path), "{path}: {err}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_carleman-lab"))
        .args(["geometry-check", "--config", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn carleman_sweep_writes_the_table_plot_and_summary() {
    let run = Run::new(SMALL);
    let o = run.exec(&["carleman-sweep", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = stdout_json(&o);
    for key in ["sup_ratio", "stabilized", "upper_sups", "max_by_params", "n_fields", "delta_t", "max_tail_weight", "epsilon", "meta"] {
        assert!(doc.get(key).is_some(), "{key}");
    }
    assert_eq!(doc["n_fields"], 3);
    assert_eq!(doc["delta_t"], 1.0 / 64.0);
    let csv = read(&run.out().join("carleman_sweep.csv"));
    assert_eq!(
        csv_header(&csv),
        ["field_id", "s", "lambda", "lhs", "rhs_residual", "rhs_boundary", "ratio", "log_ratio", "log_scale"]
    );
    assert_eq!(csv.lines().count(), 2 + 3 * 2);
    let svg = read(&run.out().join("carleman_ratio.svg"));
    assert!(svg.contains("config_sha256="));
}

#[test]
fn stability_is_reproducible_for_a_fixed_seed() {
    let run = Run::new(SMALL);
    let first = run.exec(&["stability", "--n", "4", "--seed", "11"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let a = read(&run.out().join("stability.csv"));
    let second = run.exec(&["stability", "--n", "4", "--seed", "11"]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(a, read(&run.out().join("stability.csv")));
    assert_eq!(
        csv_header(&a),
        ["member", "amplitude", "potential_distance", "trace_distance", "ratio"]
    );
    assert_eq!(a.lines().count(), 2 + 4);
    let doc = stdout_json(&second);
    assert_eq!(doc["n"], 4);
    assert_eq!(doc["seed"], 11);
    assert_eq!(doc["certified"], true);

    let other = run.exec(&["stability", "--n", "4", "--seed", "12"]);
    assert_eq!(other.status.code(), Some(0));
    assert_ne!(a, read(&run.out().join("stability.csv")));
}

#[test]
fn forward_solve_is_cached_by_configuration() {
    let run = Run::new(SMALL);
    let first = stdout_json(&run.exec(&["solve-forward"]));
    assert_eq!(first["cached"], false);
    let second = stdout_json(&run.exec(&["solve-forward"]));
    assert_eq!(second["cached"], true);
    assert_eq!(first["l2_final"], second["l2_final"]);
    assert_eq!(first["trace_h1l2_norm"], second["trace_h1l2_norm"]);
    let header = csv_header(&read(&run.out().join("field.csv")));
    assert_eq!(header[..2], ["step", "t"]);
    assert!(run.out().join("trace.csv").exists());

    // a change outside geometry and physics keeps the cached solve
    std::fs::write(run.dir.path().join("config.toml"), SMALL.replace("max_iter = 5", "max_iter = 6")).unwrap();
    assert_eq!(stdout_json(&run.exec(&["solve-forward"]))["cached"], true);
    std::fs::write(run.dir.path().join("config.toml"), SMALL.replace("dt = 0.05", "dt = 0.025")).unwrap();
    assert_eq!(stdout_json(&run.exec(&["solve-forward"]))["cached"], false);
}

#[test]
fn invert_reduces_the_misfit_and_labels_certification() {
    let run = Run::new(SMALL);
    let o = run.exec(&["invert"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = stdout_json(&o);
    assert!(doc["final_misfit"].as_f64().unwrap() < doc["initial_misfit"].as_f64().unwrap());
    assert_eq!(doc["certified"], true);
    assert!(!doc["notes"].as_array().unwrap().is_empty());
    let header = csv_header(&read(&run.out().join("reconstruction.csv")));
    assert_eq!(header, ["i", "j", "x", "y", "p", "q0", "q_hat"]);
    assert!(run.out().join("history.svg").exists());

    let reversed = Run::new(&SMALL.replace("a1 = 2.0\na2 = 1.0", "a1 = 1.0\na2 = 2.0"));
    let o = reversed.exec(&["invert"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["certified"], false);
}

#[test]
fn output_formats_can_be_restricted() {
    let run = Run::new(&SMALL.replace("directory = \"out\"", "directory = \"out\"\nformats = [\"json\"]"));
    assert_eq!(run.exec(&["stability", "--n", "3"]).status.code(), Some(0));
    assert!(run.out().join("stability.json").exists());
    assert!(!run.out().join("stability.csv").exists());
    assert!(!run.out().join("stability.svg").exists());
}
