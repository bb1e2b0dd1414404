//! End-to-end tests of the compiled binary: exit codes, output files,
//! fingerprint headers, and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dgtime() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dgtime"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    dgtime()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) {
    fs::write(dir.join(name), content).unwrap();
}

const SCALAR_SOLVE: &str = r#"
[problem]
source = "builtin-scalar"

[time]
t_end = 10.0
dt = 0.1
degree = 3

[output]
dir = "out"
samples = 101
"#;

#[test]
fn solve_scalar_hits_the_exact_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "run.toml", SCALAR_SOLVE);
    let out = run_in(dir.path(), &["solve", "--config", "run.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(lines.next().unwrap(), "t,side,u_1,w_1");
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(last[1], "left");
    let u: f64 = last[2].parse().unwrap();
    let exact = (-30.0f64).exp() + (-20.0f64).exp();
    assert!(
        (u - exact).abs() < 1e-8,
        "u(10) = {u:.6e}, exact = {exact:.6e}"
    );

    // Diagnostics and energy reports exist and carry the fingerprint.
    for name in ["out/diagnostics.csv", "out/energy.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.lines().next().unwrap().contains("config:"), "{name}");
    }
}

#[test]
fn solve_output_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "run.toml", SCALAR_SOLVE);
    assert!(run_in(dir.path(), &["solve", "--config", "run.toml", "--out", "a"]).status.success());
    assert!(run_in(dir.path(), &["solve", "--config", "run.toml", "--out", "b"]).status.success());
    let a = fs::read(dir.path().join("a/trajectory.csv")).unwrap();
    let b = fs::read(dir.path().join("b/trajectory.csv")).unwrap();
    // The fingerprint differs only in output.dir, which is part of the
    // config; compare everything after the header line.
    let strip = |bytes: &[u8]| {
        let text = String::from_utf8(bytes.to_vec()).unwrap();
        text.lines().skip(1).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip(&a), strip(&b));

    // Re-running the identical config into the same directory is bitwise
    // reproducible, fingerprint included.
    assert!(run_in(dir.path(), &["solve", "--config", "run.toml", "--out", "a"]).status.success());
    let a2 = fs::read(dir.path().join("a/trajectory.csv")).unwrap();
    assert_eq!(a, a2);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    // n_slabs in the file; --dt replaces it, --degree and --solver / --tol
    // replace the corresponding sections.
    write(
        dir.path(),
        "run.toml",
        r#"
[problem]
source = "builtin-scalar"

[time]
t_end = 1.0
n_slabs = 7
degree = 4

[output]
dir = "out"
samples = 5
"#,
    );
    let out = run_in(
        dir.path(),
        &[
            "solve",
            "--config",
            "run.toml",
            "--dt",
            "0.5",
            "--degree",
            "1",
            "--solver",
            "gmres",
            "--tol",
            "1e-10",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.contains("\"dt\":0.5"), "{header}");
    assert!(header.contains("\"n_slabs\":null"), "{header}");
    assert!(header.contains("\"degree\":1"), "{header}");
    assert!(header.contains("\"method\":\"gmres\""), "{header}");
    assert!(header.contains("\"tol\":1e-10"), "{header}");
    // Two slabs of length 0.5: the interior boundary produces a left and a
    // right row, so 5 samples become 6 rows.
    assert_eq!(text.lines().count(), 2 + 6);

    // GMRES ran: the diagnostics column reports nonzero iterations.
    let diag = fs::read_to_string(dir.path().join("out/diagnostics.csv")).unwrap();
    let iters: usize = diag
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(iters > 0);
}

#[test]
fn invalid_config_exits_2_without_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.toml",
        r#"
[problem]
source = "builtin-scalar"

[time]
t_end = 10.0
n_slabs = 0
degree = 3

[output]
dir = "out"
"#,
    );
    let out = run_in(dir.path(), &["solve", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("out").exists(), "no partial outputs on config errors");
}

#[test]
fn non_divisible_dt_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.toml",
        r#"
[problem]
source = "builtin-scalar"

[time]
t_end = 1.0
dt = 0.3
degree = 2

[output]
dir = "out"
"#,
    );
    let out = run_in(dir.path(), &["solve", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_slabs"));
}

#[test]
fn unknown_config_keys_fail_closed() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.toml",
        r#"
[problem]
source = "builtin-scalar"

[time]
t_end = 10.0
dt = 0.1
degree = 3
definitely_not_a_key = 1
"#,
    );
    let out = run_in(dir.path(), &["solve", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("definitely_not_a_key"));
}

#[test]
fn missing_config_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["solve"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn matrix_market_dimension_mismatch_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "P.mtx",
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 2 1.0\n",
    );
    write(
        dir.path(),
        "L.mtx",
        "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 1.0\n2 2 1.0\n3 3 1.0\n",
    );
    write(
        dir.path(),
        "K.mtx",
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 2 1.0\n",
    );
    write(
        dir.path(),
        "run.toml",
        r#"
[problem]
source = "matrix-market"

[problem.matrix_market]
p = "P.mtx"
l = "L.mtx"
k = "K.mtx"

[time]
t_end = 1.0
dt = 0.1
degree = 1

[output]
dir = "out"
"#,
    );
    let out = run_in(dir.path(), &["solve", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("L.mtx"), "stderr should name the file: {stderr}");
}

#[test]
fn convergence_needs_three_levels_and_an_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "two_levels.toml",
        r#"
[problem]
source = "builtin-scalar"

[time]
t_end = 2.0
dt = 0.5
degree = 2

[study]
kind = "dt-refinement"
levels = 2

[output]
dir = "out"
"#,
    );
    let out = run_in(dir.path(), &["convergence", "--config", "two_levels.toml"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // A matrix-market source has no exact solution to study against.
    write(
        dir.path(),
        "P.mtx",
        "%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 1.0\n",
    );
    write(
        dir.path(),
        "mm.toml",
        r#"
[problem]
source = "matrix-market"

[problem.matrix_market]
p = "P.mtx"
l = "P.mtx"
k = "P.mtx"

[time]
t_end = 1.0
dt = 0.25
degree = 1

[study]
kind = "dt-refinement"
levels = 3

[output]
dir = "out"
"#,
    );
    let out = run_in(dir.path(), &["convergence", "--config", "mm.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exact"));
}

#[test]
fn scalar_convergence_reports_have_the_documented_shape() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "conv.toml",
        r#"
[problem]
source = "builtin-scalar"

[time]
t_end = 10.0
dt = 0.5
degree = 2

[study]
kind = "dt-refinement"
levels = 4
degrees = [2, 3]

[output]
dir = "out"
"#,
    );
    let out = run_in(dir.path(), &["convergence", "--config", "conv.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for r in [2, 3] {
        let text = fs::read_to_string(dir.path().join(format!("out/convergence_r{r}.csv"))).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("# kind=dt-refinement"));
        assert!(header.contains(&format!("expected_rate={}.500000", r)));
        assert!(header.contains("config:"));
        assert_eq!(lines.next().unwrap(), "level,control,energy_error,pair_rate,floor");
        assert_eq!(lines.count(), 4);
        // Errors decrease monotonically under halving.
        let errors: Vec<f64> = text
            .lines()
            .skip(2)
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    }
}

#[test]
fn wave1d_r_study_errors_decay_monotonically() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "rstudy.toml",
        r#"
[problem]
source = "builtin-wave1d"

[problem.wave1d]
n_elements = 200
zeta = 1.0

[time]
t_end = 1.0
dt = 0.1
degree = 1

[study]
kind = "r-refinement"
r_min = 1
r_max = 3

[output]
dir = "out"
"#,
    );
    let out = run_in(dir.path(), &["convergence", "--config", "rstudy.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/convergence_r_study.csv")).unwrap();
    let errors: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errors.len(), 3);
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn benchmark_reports_the_conditioning_gap() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bench.toml",
        r#"
[problem]
source = "builtin-wave1d"

[problem.wave1d]
n_elements = 101
zeta = 0.0

[time]
t_end = 1.0
dt = 0.01
degree = 2

[output]
dir = "out"
"#,
    );
    let out = run_in(dir.path(), &["benchmark", "--config", "bench.toml", "--seed", "42"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/benchmark.csv")).unwrap();
    let get = |key: &str| -> f64 {
        text.lines()
            .find(|l| l.starts_with(&format!("{key},")))
            .unwrap_or_else(|| panic!("{key} missing"))
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap()
    };
    let (cond_m, cond_mhat) = (get("cond_m"), get("cond_mhat"));
    assert!(
        cond_mhat <= 1e-3 * cond_m,
        "conditioning gap too small: {cond_mhat:.3e} vs {cond_m:.3e}"
    );
    assert!(get("gmres_iterations_physical") < 200.0);
}

#[test]
fn benchmark_degree_zero_scalar_condition_is_one() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bench0.toml",
        r#"
[problem]
source = "builtin-scalar"

[time]
t_end = 1.0
dt = 0.25
degree = 0

[output]
dir = "out"
"#,
    );
    let out = run_in(dir.path(), &["benchmark", "--config", "bench0.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/benchmark.csv")).unwrap();
    let cond: f64 = text
        .lines()
        .find(|l| l.starts_with("cond_mhat,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((cond - 1.0).abs() < 1e-12, "1x1 matrix condition {cond}");
}

#[test]
fn benchmark_zero_rhs_takes_zero_iterations() {
    let dir = tempfile::tempdir().unwrap();
    // Zero initial data and zero forcing give a zero first-slab system.
    write(
        dir.path(),
        "I.mtx",
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 2 1.0\n",
    );
    write(
        dir.path(),
        "zero.toml",
        r#"
[problem]
source = "matrix-market"

[problem.matrix_market]
p = "I.mtx"
l = "I.mtx"
k = "I.mtx"

[time]
t_end = 1.0
dt = 0.1
degree = 2

[output]
dir = "out"
"#,
    );
    let out = run_in(dir.path(), &["benchmark", "--config", "zero.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/benchmark.csv")).unwrap();
    assert!(text.contains("gmres_iterations_physical,0"));
}

#[test]
fn export_then_ingest_round_trip_solves() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "export.toml",
        r#"
[problem]
source = "builtin-wave1d"

[problem.wave1d]
n_elements = 12
zeta = 0.5

[time]
t_end = 1.0
dt = 0.1
degree = 2

[output]
dir = "mats"
"#,
    );
    let out = run_in(dir.path(), &["export-matrices", "--config", "export.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["P.mtx", "L.mtx", "K.mtx", "u0.mtx", "u1.mtx"] {
        assert!(dir.path().join("mats").join(f).exists(), "{f} missing");
    }

    write(
        dir.path(),
        "ingest.toml",
        r#"
[problem]
source = "matrix-market"

[problem.matrix_market]
p = "mats/P.mtx"
l = "mats/L.mtx"
k = "mats/K.mtx"
u0 = "mats/u0.mtx"
u1 = "mats/u1.mtx"

[time]
t_end = 1.0
dt = 0.1
degree = 2

[solver]
method = "gmres"

[output]
dir = "out"
samples = 11
"#,
    );
    let out = run_in(dir.path(), &["solve", "--config", "ingest.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    // 11 interior dofs -> 1 + 2*11 data columns.
    assert!(text.lines().nth(1).unwrap().split(',').count() == 2 + 22);
}
