//! Exit-code and artifact contract of the `epilab` binary, exercised with
//! small fast configs, plus validation of report.json against the
//! published schema.

use std::path::Path;
use std::process::Command;

fn epilab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_epilab"))
}

const SMALL_GRID: &str = r#"
[grid]
dim = 1
lo = -2.0
hi = 2.0
h = 0.1
value_lo = -2.0
value_hi = 2.0
h_v = 0.1
"#;

fn passing_config() -> String {
    format!(
        r#"
tester = "rcs-convergence"
seed = 5
n_samples = 200
tol = 0.01
{SMALL_GRID}
[scenario]
id = "deterministic-atom"
atom = 0.5
seq_len = 6

[panel]
kind = "unions"

[[panel.unions]]
balls = [{{ center = [0.5], r = 0.2 }}]

[[panel.unions]]
balls = [{{ center = [-1.0], r = 0.3 }}, {{ center = [1.0], r = 0.3 }}]
"#
    )
}

fn failing_config() -> String {
    format!(
        r#"
tester = "rcs-convergence"
seed = 5
n_samples = 200
tol = 0.01
{SMALL_GRID}
[scenario]
id = "alternating-singletons"
seq_len = 16

[panel]
kind = "unions"

[[panel.unions]]
balls = [{{ center = [-1.0], r = 0.1 }}]
"#
    )
}

fn hypothesis_config() -> String {
    // the double-well limit has two minimizers, so the uniqueness
    // hypothesis of the two-sided solution-set tester fails
    format!(
        r#"
tester = "argmin-fell"
seed = 5
n_samples = 100
tol = 0.05
eta = 0.01
{SMALL_GRID}
[scenario]
id = "s4-double-well"
seq_len = 4

[panel]
kind = "unions"

[[panel.unions]]
balls = [{{ center = [0.0], r = 0.5 }}]

[tightness_k]
kind = "window"
"#
    )
}

fn run_in(dir: &Path, config: &str) -> (i32, String, String) {
    let cfg_path = dir.join("exp.toml");
    std::fs::write(&cfg_path, config).unwrap();
    let out = epilab()
        .arg("run")
        .arg(&cfg_path)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn exit_codes_cover_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run_in(dir.path(), &passing_config());
    assert_eq!(code, 0, "pass maps to 0:\n{stdout}");
    assert!(stdout.contains("verdict: pass"));

    let (code, stdout, _) = run_in(dir.path(), &failing_config());
    assert_eq!(code, 1, "fail maps to 1:\n{stdout}");

    let (code, stdout, _) = run_in(dir.path(), &hypothesis_config());
    assert_eq!(code, 2, "hypothesis-not-met maps to 2:\n{stdout}");

    // unknown scenario
    let bad = passing_config().replace("deterministic-atom", "no-such-scenario");
    let (code, _, stderr) = run_in(dir.path(), &bad);
    assert_eq!(code, 3, "unknown scenario maps to 3");
    assert!(stderr.contains("config error"));

    // malformed toml
    let (code, _, stderr) = run_in(dir.path(), "tester = [");
    assert_eq!(code, 3);
    assert!(stderr.contains("config error"));

    // structurally valid toml, missing required panel
    let mut no_panel = String::new();
    for line in passing_config().lines() {
        if line.contains("panel") || line.contains("balls") {
            break;
        }
        no_panel.push_str(line);
        no_panel.push('\n');
    }
    let (code, _, _) = run_in(dir.path(), &no_panel);
    assert_eq!(code, 3, "missing panel maps to 3");

    // unreadable config path
    let out = epilab().arg("run").arg("/no/such/config.toml").output().unwrap();
    assert_eq!(out.status.code().unwrap(), 3);

    // library scenarios are one-dimensional: a 2-d grid is a config error,
    // not a crash
    let two_d = passing_config().replace(
        "dim = 1\nlo = -2.0\nhi = 2.0",
        "dim = 2\nlo = [-2.0, -2.0]\nhi = [2.0, 2.0]",
    );
    let (code, _, stderr) = run_in(dir.path(), &two_d);
    assert_eq!(code, 3, "2-d grid with a 1-d scenario maps to 3: {stderr}");
    assert!(stderr.contains("one-dimensional"));

    // degenerate scenario parameters are config errors too
    let bad_sd = format!(
        r#"
tester = "tightness"
seed = 1
n_samples = 50
{SMALL_GRID}
[scenario]
id = "s3-random-quadratic"
seq_len = 4
noise_sd = -1.0
"#
    );
    let (code, _, _) = run_in(dir.path(), &bad_sd);
    assert_eq!(code, 3);
}

#[test]
fn artifacts_are_written_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, passing_config()).unwrap();
    for sub in ["a", "b"] {
        let status = epilab()
            .arg("run")
            .arg(&cfg_path)
            .arg("--out-dir")
            .arg(dir.path().join(sub))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["report.json", "series.csv", "summary.txt"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let csv = std::fs::read_to_string(dir.path().join("a/series.csv")).unwrap();
    assert!(csv.starts_with("index,panel_id,estimate,std_error\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, passing_config()).unwrap();
    let status = epilab()
        .arg("run")
        .arg(&cfg_path)
        .env("EPILAB_OUT_DIR", dir.path().join("from-env"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("from-env/report.json").exists());
}

#[test]
fn list_is_deterministic_sorted_and_tagged() {
    let out1 = epilab().arg("list").output().unwrap();
    let out2 = epilab().arg("list").output().unwrap();
    assert_eq!(out1.stdout, out2.stdout);
    let text = String::from_utf8(out1.stdout).unwrap();
    for id in [
        "s1-shrinking-singleton",
        "s2-uniform-singleton",
        "s3-random-quadratic",
        "s4-double-well",
        "s5-localized-dip",
    ] {
        assert!(text.contains(id), "listing misses {id}");
    }
    let ids: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with(' ') && !l.is_empty())
        .collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted, "listing must be sorted");
    // every scenario names its parameters and at least one tester
    assert_eq!(
        text.matches("exercises: ").count(),
        ids.len(),
        "every entry lists its testers"
    );
    assert_eq!(text.matches("parameters: ").count(), ids.len());
    for line in text.lines().filter(|l| l.trim_start().starts_with("exercises:")) {
        assert!(line.trim_end().len() > "exercises:".len() + 2);
    }
}

#[test]
fn epi_dist_demo_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        r#"
tester = "epi-dist"
seed = 21
n_samples = 400
tol = 0.05
screen_kappa = 0.05
epi_mode = "le"
{SMALL_GRID}
[scenario]
id = "s3-random-quadratic"
seq_len = 4

[[epi_panel]]
events = [{{ x = [0.0], r = 0.5, alpha = -0.8 }}]

[[epi_panel]]
events = [{{ x = [0.5], r = 0.3, alpha = -0.5 }}, {{ x = [-0.5], r = 0.3, alpha = 0.2 }}]
"#
    );
    let (code, stdout, stderr) = run_in(dir.path(), &config);
    assert_eq!(code, 0, "stdout: {stdout} stderr: {stderr}");
}

#[test]
fn tightness_and_upper_fell_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    let tight = format!(
        r#"
tester = "tightness"
seed = 3
n_samples = 300
eta = 0.01
{SMALL_GRID}
[scenario]
id = "s3-random-quadratic"
seq_len = 4
noise_sd = 0.4

[tightness_k]
kind = "window"
"#
    );
    let (code, _, stderr) = run_in(dir.path(), &tight);
    assert_eq!(code, 0, "{stderr}");

    let upper = format!(
        r#"
tester = "argmin-upper-fell"
seed = 3
n_samples = 300
tol = 0.05
{SMALL_GRID}
[scenario]
id = "s5-localized-dip"
seq_len = 8

[[compact_panel]]
sets = [{{ kind = "window" }}]

[[compact_panel]]
sets = [{{ kind = "ball", center = [0.0], r = 0.5 }}]
"#
    );
    let (code, _, stderr) = run_in(dir.path(), &upper);
    assert_eq!(code, 0, "{stderr}");
}

// ---------------------------------------------------------------------------
// schema validation (minimal draft-07 subset walker)

fn validate(schema: &serde_json::Value, root: &serde_json::Value, value: &serde_json::Value, path: &str) -> Vec<String> {
    use serde_json::Value;
    let mut errors = Vec::new();
    let schema = if let Some(reference) = schema.get("$ref").and_then(Value::as_str) {
        let key = reference.trim_start_matches("#/definitions/");
        &root["definitions"][key]
    } else {
        schema
    };
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            errors.push(format!("{path}: {value} not in enum"));
        }
        return errors;
    }
    match schema.get("type").and_then(Value::as_str) {
        Some("object") => {
            let Value::Object(map) = value else {
                errors.push(format!("{path}: expected object"));
                return errors;
            };
            if let Some(required) = schema.get("required").and_then(Value::as_array) {
                for key in required.iter().filter_map(Value::as_str) {
                    if !map.contains_key(key) {
                        errors.push(format!("{path}: missing required key {key}"));
                    }
                }
            }
            let props = schema.get("properties").and_then(Value::as_object);
            for (key, sub) in map {
                match props.and_then(|p| p.get(key)) {
                    Some(subschema) => {
                        errors.extend(validate(subschema, root, sub, &format!("{path}.{key}")))
                    }
                    None => {
                        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
                            errors.push(format!("{path}: unexpected key {key}"));
                        }
                    }
                }
            }
        }
        Some("array") => {
            let Value::Array(items) = value else {
                errors.push(format!("{path}: expected array"));
                return errors;
            };
            if let Some(item_schema) = schema.get("items") {
                for (i, item) in items.iter().enumerate() {
                    errors.extend(validate(item_schema, root, item, &format!("{path}[{i}]")));
                }
            }
        }
        Some("string") => {
            if !value.is_string() {
                errors.push(format!("{path}: expected string"));
            }
        }
        Some("number") => {
            if !value.is_number() {
                errors.push(format!("{path}: expected number"));
            }
        }
        Some("integer") => {
            let ok = value.as_i64().is_some() || value.as_u64().is_some();
            if !ok {
                errors.push(format!("{path}: expected integer"));
            }
        }
        Some("boolean") => {
            if !value.is_boolean() {
                errors.push(format!("{path}: expected boolean"));
            }
        }
        other => errors.push(format!("{path}: unsupported schema type {other:?}")),
    }
    errors
}

#[test]
fn report_json_validates_against_published_schema() {
    let schema: serde_json::Value = serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    // one statistical report and one screen report cover both shapes
    for (name, config) in [
        ("pass", passing_config()),
        ("hyp", hypothesis_config()),
        (
            "screen",
            format!(
                r#"
tester = "continuity-screen"
seed = 2
n_samples = 500
{SMALL_GRID}
[scenario]
id = "deterministic-atom"
atom = 0.5
seq_len = 1

[continuity]
center = [0.0]
radii = [0.3, 0.5, 0.7]
delta = 0.1
kappa = 0.02
use_analytic = true
"#
            ),
        ),
    ] {
        let sub = dir.path().join(name);
        std::fs::create_dir_all(&sub).unwrap();
        let (_, _, stderr) = run_in(&sub, &config);
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(sub.join("out/report.json")).unwrap())
                .unwrap_or_else(|e| panic!("{name}: {e}; stderr {stderr}"));
        let errors = validate(&schema, &schema, &report, "$");
        assert!(errors.is_empty(), "{name}: schema violations: {errors:?}");
    }
}
