use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const QUADRATIC: &str = "\
setting    = real2
box        = 0, 0 .. 1, 1
resolution = 33
delta      = pi/4
h          = expr: pi/2
phi        = expr: 0.5*(x1^2 + x2^2)
usub       = expr: 0.5*(x1^2 + x2^2)
";

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems")
}

fn lagphase(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lagphase")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_spec(dir: &Path, text: &str) -> String {
    let p = dir.join("problem.txt");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn quadratic_solve_recovers_half_square_norm() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), QUADRATIC);
    let out = dir.path().join("out");
    let (code, stderr) = lagphase(&["--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");

    let rows = read_csv(&out.join("solution.csv"));
    assert_eq!(rows.len(), 33 * 33);
    let err = rows
        .iter()
        .map(|r| (r[2] - 0.5 * (r[0] * r[0] + r[1] * r[1])).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-8, "max error {err}");

    let r = report(&out);
    assert_eq!(r["status"], "ok");
    let solve = &r["solve"];
    for key in ["residual_sup_F", "residual_sup_G", "A_used", "delta", "path", "wall_time", "verification"] {
        assert!(!solve[key].is_null(), "missing {key}");
    }
    assert_eq!(solve["path"].as_array().unwrap().last().unwrap()["t"].as_f64(), Some(1.0));
    assert_eq!(solve["verification"]["pass"], true);
    assert_eq!(r["artifacts"][0], "solution.csv");
}

#[test]
fn report_numbers_use_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let spec = problems().join("complex1.txt");
    let (code, stderr) = lagphase(&["--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let text = fs::read_to_string(out.join("report.json")).unwrap();
    let delta_line = text.lines().find(|l| l.contains("\"delta\"")).unwrap();
    assert!(delta_line.contains("1.0000000000000000e0"), "{delta_line}");
    let first = fs::read_to_string(out.join("solution.csv")).unwrap();
    let row = first.lines().nth(20).unwrap();
    for field in row.split(',') {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{row}");
    }
}

#[test]
fn parse_errors_exit_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &QUADRATIC.replace("expr: pi/2", "expr: pi/(2"));
    let out = dir.path().join("out");
    let (code, stderr) = lagphase(&["--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 5, column"), "{stderr}");
    let r = report(&out);
    assert_eq!(r["status"], "validation_error");
    assert!(r["error"].as_str().unwrap().contains("unclosed '('"));
}

#[test]
fn invariant_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let spec = write_spec(dir.path(), &QUADRATIC.replace("expr: pi/2", "expr: 0.5 + 0.5*x1"));
    let (code, stderr) = lagphase(&["--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("h below supercritical band at node (1,1)"), "{stderr}");
}

#[test]
fn bad_flags_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let (code, stderr) = lagphase(&["--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("requires --spec"), "{stderr}");

    let spec = write_spec(dir.path(), QUADRATIC);
    let (code, stderr) = lagphase(&["--spec", &spec, "--out", out, "--tol", "-1"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("tolerances must be positive"), "{stderr}");

    let (code, _) = lagphase(&["--spec", &spec, "--command", "bogus"]);
    assert_eq!(code, 2);

    let (code, stderr) = lagphase(&["--spec", &spec, "--out", out, "--command", "forward"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("requires --field"), "{stderr}");
}

#[test]
fn failing_subsolution_exits_one_with_margin() {
    let dir = tempfile::tempdir().unwrap();
    let text = QUADRATIC.replace("0.5*(x1^2 + x2^2)", "0.1*(x1^2 + x2^2)");
    let spec = write_spec(dir.path(), &text);
    let out = dir.path().join("out");
    let (code, _) = lagphase(&["--spec", &spec, "--out", out.to_str().unwrap(), "--command", "verify-subsolution"]);
    assert_eq!(code, 1);
    let r = report(&out);
    assert_eq!(r["status"], "verification_failed");
    let sub = &r["subsolution"];
    assert_eq!(sub["pass"], false);
    assert_eq!(sub["boundary_exact"], true);
    // Constant Hessian 0.2·I: F = 2 atan(0.2) everywhere.
    let want = 2.0 * 0.2f64.atan() - std::f64::consts::FRAC_PI_2;
    assert!((sub["margin"].as_f64().unwrap() - want).abs() < 1e-12);
    let margin = read_csv(&out.join(sub["margin_field"].as_str().unwrap()));
    assert_eq!(margin.len(), 33 * 33);
    assert!(margin.iter().filter(|r| !r[2].is_nan()).all(|r| (r[2] - want).abs() < 1e-12));

    // The solver refuses the same problem.
    let (code, stderr) = lagphase(&["--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("subsolution"), "{stderr}");
    assert_eq!(report(&out)["status"], "solver_error");
}

#[test]
fn passing_subsolution_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let spec = problems().join("bumped_real2.txt");
    let (code, stderr) =
        lagphase(&["--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--command", "verify-subsolution"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(report(&out)["subsolution"]["margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn suites_with_fixed_seed_pass_and_embed_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (code, stderr) = lagphase(&["--command", "suites", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let r = report(&out);
    assert_eq!(r["seed"], 7);
    let suites = r["suites"].as_array().unwrap();
    let names: Vec<&str> = suites.iter().map(|s| s["suite"].as_str().unwrap()).collect();
    for prefix in ["cone_facts", "concavity", "schur_horn", "det_identity", "cns", "linearization"] {
        assert!(names.iter().any(|n| n.starts_with(prefix)), "{prefix} missing from {names:?}");
    }
    assert!(suites.iter().all(|s| s["pass"] == true && s["failures"].as_array().unwrap().is_empty()));
}

#[test]
fn forward_evaluates_operator_on_a_field() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), QUADRATIC);
    let solved = dir.path().join("solved");
    let (code, _) = lagphase(&["--spec", &spec, "--out", solved.to_str().unwrap()]);
    assert_eq!(code, 0);
    let field = solved.join("solution.csv");
    let out = dir.path().join("fwd");
    let (code, stderr) = lagphase(&[
        "--spec",
        &spec,
        "--out",
        out.to_str().unwrap(),
        "--command",
        "forward",
        "--field",
        field.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let rows = read_csv(&out.join("forward.csv"));
    let interior: Vec<f64> = rows.iter().map(|r| r[2]).filter(|v| !v.is_nan()).collect();
    assert_eq!(interior.len(), 31 * 31);
    assert!(interior.iter().all(|v| (v - std::f64::consts::FRAC_PI_2).abs() < 1e-9));
}

#[test]
fn check_cone_on_subsolution_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let spec = problems().join("bumped_real2.txt");
    let out = dir.path().join("out");
    let (code, stderr) =
        lagphase(&["--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--command", "check-cone"]);
    assert_eq!(code, 0, "{stderr}");
    let cone = &report(&out)["cone"];
    assert_eq!(cone["suite"], "hessian_cone");
    assert_eq!(cone["cases"], 31 * 31);

    // A saddle is outside the cone.
    let saddle = dir.path().join("saddle.csv");
    let text: String = std::iter::once("x1,x2,value\n".to_string())
        .chain((0..33 * 33).map(|k| {
            let (i, j) = (k % 33, k / 33);
            let (x, y) = (-1.0 + i as f64 / 16.0, -1.0 + j as f64 / 16.0);
            format!("{x:.16e},{y:.16e},{:.16e}\n", x * x - y * y)
        }))
        .collect();
    fs::write(&saddle, text).unwrap();
    let (code, _) = lagphase(&[
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--command",
        "check-cone",
        "--field",
        saddle.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert_eq!(report(&out)["cone"]["pass"], false);
}

#[test]
fn csv_fields_are_read_relative_to_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let spec = write_spec(dir.path(), QUADRATIC);
    assert_eq!(lagphase(&["--spec", &spec, "--out", first.to_str().unwrap()]).0, 0);
    fs::create_dir(dir.path().join("data")).unwrap();
    fs::copy(first.join("solution.csv"), dir.path().join("data/u.csv")).unwrap();
    let text = QUADRATIC
        .replace("phi        = expr: 0.5*(x1^2 + x2^2)", "phi        = csv: data/u.csv")
        .replace("usub       = expr: 0.5*(x1^2 + x2^2)", "usub       = csv: data/u.csv");
    let spec = write_spec(dir.path(), &text);
    let second = dir.path().join("second");
    let (code, stderr) = lagphase(&["--spec", &spec, "--out", second.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(
        fs::read(first.join("solution.csv")).unwrap(),
        fs::read(second.join("solution.csv")).unwrap()
    );
}

fn strip_timings(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timings");
    if let Some(s) = v["solve"].as_object_mut() {
        s.remove("wall_time");
    }
    v
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = problems().join("bumped_real2.txt");
    let spec = spec.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(lagphase(&["--spec", spec, "--out", a.to_str().unwrap(), "--seed", "3"]).0, 0);
    assert_eq!(lagphase(&["--spec", spec, "--out", b.to_str().unwrap(), "--seed", "3"]).0, 0);
    assert_eq!(fs::read(a.join("solution.csv")).unwrap(), fs::read(b.join("solution.csv")).unwrap());
    assert_eq!(strip_timings(report(&a)), strip_timings(report(&b)));
    assert!(report(&a)["solve"]["total_newton_iters"].as_u64().unwrap() > 0);
}

#[test]
fn tolerance_and_iteration_overrides_reach_newton() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let spec = problems().join("bumped_real2.txt");
    let (code, _) = lagphase(&[
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--tol",
        "1e-6",
        "--max-iters",
        "7",
    ]);
    assert_eq!(code, 0);
    let r = report(&out);
    assert_eq!(r["newton"]["residual_tol"].as_f64(), Some(1e-6));
    assert_eq!(r["newton"]["max_iters"], 7);
}
