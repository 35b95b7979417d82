use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corrdyn"))
}

fn write(dir: &TempDir, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(args: &[&str], cfg: &Path) -> Output {
    bin().args(args).arg("--config").arg(cfg).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let r = rows(text);
    let k = r[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    r[1..].iter().map(|row| row[k].parse().unwrap()).collect()
}

fn linear_chain(gl: f64, gg: f64) -> Value {
    json!({ "L": 4, "J": 1.0, "gamma_l": gl, "gamma_g": gg })
}

fn pair_chain() -> Value {
    json!({ "L": 4, "J": 1.0, "gamma_l": 0.5, "gamma_g": 0.5, "gamma_t": 0.5 })
}

#[test]
fn evolve_recursion_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        &json!({ "model": linear_chain(0.1, 0.2), "times": { "start": 0.0, "stop": 50.0, "count": 11 } }),
    );
    let o = run(&["evolve", "--method", "recursion", "--compare-oracle"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("compare-oracle: PASS"));
    let text = stdout(&o);
    assert_eq!(rows(&text)[0][..3], ["t", "n1_re", "n1_im"]);
    assert_eq!(column(&text, "t").len(), 11);
    let n1nl = column(&text, "n1nL_re");
    assert!(n1nl.windows(2).all(|w| w[1] >= w[0] - 1e-12), "not monotone: {n1nl:?}");
}

#[test]
fn recursion_refused_with_pair_dissipation() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &json!({ "model": pair_chain(), "times": [0.0, 1.0, 5.0] }));
    let o = run(&["evolve", "--method", "recursion"], &cfg);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("quadratic dissipators present"));
    let o = run(&["evolve", "--method", "reduced", "--compare-oracle", "--tol", "1e-7"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "a.json", &json!({ "model": linear_chain(0.1, 0.2), "times": [] }));
    assert_eq!(run(&["evolve"], &empty).status.code(), Some(2));
    let empty_space = write(
        &dir,
        "b.json",
        &json!({ "model": linear_chain(0.1, 0.2), "times": { "start": 0.0, "stop": 1.0, "count": 0 } }),
    );
    assert_eq!(run(&["evolve"], &empty_space).status.code(), Some(2));
    let unknown = write(&dir, "c.json", &json!({ "model": linear_chain(0.1, 0.2), "tims": [1.0] }));
    assert_eq!(run(&["evolve"], &unknown).status.code(), Some(2));
    let bad_site = write(
        &dir,
        "d.json",
        &json!({
            "model": linear_chain(0.1, 0.2),
            "times": [1.0],
            "observables": [{ "name": "x", "kind": "n", "sites": [5] }],
        }),
    );
    assert_eq!(run(&["evolve"], &bad_site).status.code(), Some(2));
    let negative = write(&dir, "e.json", &json!({ "model": linear_chain(-0.1, 0.2), "times": [1.0] }));
    assert_eq!(run(&["evolve"], &negative).status.code(), Some(2));
    let p = dir.path().join("missing.json");
    assert_eq!(run(&["evolve"], &p).status.code(), Some(2));
    assert_eq!(bin().arg("evolve").output().unwrap().status.code(), Some(2));
}

#[test]
fn closure_violation_exits_three() {
    let dir = TempDir::new().unwrap();
    let z = json!([[0.0, 0.0], [0.0, 0.0]]);
    let mut u = vec![vec![json!([0.0, 0.0]); 4]; 4];
    u[0][1] = json!([1.0, 0.0]);
    u[1][0] = json!([-1.0, 0.0]);
    u[2][3] = json!([0.0, 1.0]);
    u[3][2] = json!([0.0, -1.0]);
    let model = json!({
        "L": 2,
        "h": [[z[0].clone(), json!([1.0, 0.0])], [json!([1.0, 0.0]), z[0].clone()]],
        "quadratic": [{ "U": u }],
    });
    let cfg = write(&dir, "c.json", &json!({ "model": model, "times": [1.0] }));
    let o = run(&["evolve", "--method", "reduced"], &cfg);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = run(&["validate"], &cfg);
    assert!(o.status.success());
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rep["closure"]["closed"], json!(false));
}

#[test]
fn oracle_size_guard_exits_four() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        &json!({ "model": { "L": 8, "J": 1.0, "gamma_l": 0.1 }, "times": [1.0] }),
    );
    assert_eq!(run(&["evolve", "--method", "oracle"], &cfg).status.code(), Some(4));
    assert!(run(&["evolve", "--method", "recursion"], &cfg).status.success());
}

#[test]
fn output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        &json!({ "model": pair_chain(), "times": { "start": 0.0, "stop": 10.0, "count": 7 } }),
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = bin().args(["evolve", "--config"]).arg(&cfg).arg("--out").arg(out).output().unwrap();
        assert!(o.status.success() && o.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read(&a).unwrap(), run(&["evolve"], &cfg).stdout);
}

#[test]
fn fcs_with_zero_weight_is_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        &json!({ "model": linear_chain(0.1, 0.2), "fcs": { "coef": 0.0, "time": 5.0 } }),
    );
    let o = run(&["fcs"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "quantity,re,im\nln_fcs,0,0\n");
}

#[test]
fn fcs_over_a_time_grid_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        &json!({ "model": linear_chain(0.2, 0.1), "initial": "full", "times": [0.0, 2.5, 5.0] }),
    );
    let o = run(&["fcs", "--compare-oracle"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(column(&stdout(&o), "t"), vec![0.0, 2.5, 5.0]);
    // Fully occupied: ln exp((2/L)·2) = 1 at t = 0.
    assert!((column(&stdout(&o), "ln_fcs_re")[0] - 1.0).abs() < 1e-12);
    assert_eq!(run(&["fcs", "--method", "reduced"], &cfg).status.code(), Some(3));
}

#[test]
fn odd_spectrum_rows_are_conjectured() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &json!({ "model": pair_chain() }));
    let o = run(&["spectrum", "--method", "reduced", "--parity", "odd", "--compare-oracle"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&stdout(&o));
    assert_eq!(r[0], ["re", "im", "parity", "sector", "multiplicity", "conjectured"]);
    assert!(r.len() > 1);
    assert!(r[1..].iter().all(|row| row[2] == "odd" && row[5] == "true"));
    let rep: Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(rep["pass"], json!(true));
}

#[test]
fn even_spectrum_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &json!({ "model": pair_chain(), "parity": "even" }));
    let o = run(&["spectrum", "--method", "reduced", "--compare-oracle"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(rep["count"], json!(128));
    assert!(rep["max_distance"].as_f64().unwrap() < 1e-6);
    let r = rows(&stdout(&o));
    assert!(r[1..].iter().all(|row| row[2] == "even" && row[5] == "false"));
}

#[test]
fn analytic_and_sector_spectra_agree() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &json!({ "model": { "L": 3, "J": 1.0, "gamma_l": 0.3, "gamma_g": 0.2 } }));
    let values = |o: &Output| -> Vec<(f64, f64)> {
        rows(&stdout(o))[1..]
            .iter()
            .flat_map(|r| std::iter::repeat_n((r[0].parse().unwrap(), r[1].parse().unwrap()), r[4].parse().unwrap()))
            .collect()
    };
    let a = run(&["spectrum", "--method", "recursion"], &cfg);
    let s = run(&["spectrum", "--method", "reduced"], &cfg);
    assert!(a.status.success() && s.status.success(), "{}{}", stderr(&a), stderr(&s));
    let (a, mut s) = (values(&a), values(&s));
    assert_eq!(a.len(), s.len());
    for x in &a {
        let k = (0..s.len())
            .min_by(|&i, &j| (s[i].0 - x.0).hypot(s[i].1 - x.1).total_cmp(&(s[j].0 - x.0).hypot(s[j].1 - x.1)))
            .unwrap();
        let y = s.swap_remove(k);
        assert!((x.0 - y.0).hypot(x.1 - y.1) < 1e-8, "{x:?} vs {y:?}");
    }
}

#[test]
fn steady_state_densities() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &json!({ "model": pair_chain() }));
    let o = run(&["steady", "--compare-oracle"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&stdout(&o));
    let get = |name: &str| -> f64 { r.iter().find(|row| row[0] == name).unwrap()[1].parse().unwrap() };
    assert!((get("n1") - 1.0 / 3.0).abs() < 1e-10);
    assert!((get("nL") - 2.0 / 3.0).abs() < 1e-10);
}

#[test]
fn cases_stack_under_a_case_column() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        &json!({
            "model": { "L": 4, "J": 1.0 },
            "times": [0.0, 3.0],
            "observables": [
                { "name": "n1nL", "kind": "nn", "sites": [1, 4] },
                { "name": "n1nL_wick", "kind": "nn_wick", "sites": [1, 4] },
            ],
            "cases": [
                { "name": "slow", "model": { "gamma_l": 0.1, "gamma_g": 0.2 } },
                { "name": "ghz", "initial": "ghz", "model": { "gamma_l": 0.2, "gamma_g": 0.1 } },
            ],
        }),
    );
    let o = run(&["evolve", "--compare-oracle"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&stdout(&o));
    assert_eq!(r[0][..3], ["case", "t", "n1nL_re"]);
    let names: Vec<&str> = r[1..].iter().map(|row| row[0].as_str()).collect();
    assert_eq!(names, ["slow", "slow", "ghz", "ghz"]);
    let exact = column(&stdout(&o), "n1nL_re");
    let wick = column(&stdout(&o), "n1nL_wick_re");
    // Wick is exact for the Gaussian vacuum and fails for GHZ at finite time.
    assert!((exact[1] - wick[1]).abs() < 1e-12);
    assert!((exact[3] - wick[3]).abs() > 1e-3);

    let bad = write(&dir, "d.json", &json!({ "model": { "L": 4, "J": 1.0 }, "cases": [{ "model": {} }] }));
    assert_eq!(run(&["evolve"], &bad).status.code(), Some(2));
}

#[test]
fn cov_study_symmetry_and_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        &json!({ "cov_study": { "L": 4, "J": 1.0, "a": 0.5, "gamma_t": 0.5, "deltas": [-0.5, 0.0, 0.5] } }),
    );
    let o = run(&["cov-study"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&stdout(&o))[0], ["delta", "gamma_l", "gamma_g", "gamma_t", "cov_re"]);
    assert_eq!(column(&stdout(&o), "delta"), vec![-0.5, 0.0, 0.5]);
    let cov = column(&stdout(&o), "cov_re");
    assert!((cov[0] - cov[2]).abs() < 1e-10);
    assert!(stderr(&o).contains("cov signs:"));

    let grid = write(
        &dir,
        "g.json",
        &json!({ "cov_study": { "L": 4, "J": 1.0, "gamma_t": "mean", "gamma_l": [0.2, 0.4], "gamma_g": [0.2, 0.4, 0.6] } }),
    );
    let o = run(&["cov-study"], &grid);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(column(&stdout(&o), "gamma_t"), vec![0.2, 0.30000000000000004, 0.4, 0.30000000000000004, 0.4, 0.5]);
    let bad = write(&dir, "b.json", &json!({ "cov_study": { "L": 4, "J": 1.0, "gamma_t": "median", "a": 0.5, "deltas": [0.0] } }));
    assert_eq!(run(&["cov-study"], &bad).status.code(), Some(2));
}

#[test]
fn dump_structure_emits_json() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &json!({ "model": pair_chain() }));
    let o = run(&["dump-structure"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.is_object());
}

#[test]
fn shipped_examples_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        n += 1;
        let text = std::fs::read_to_string(&p).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert!(!doc["description"].as_str().unwrap_or("").is_empty(), "{}", p.display());
        if doc.get("model").is_some() {
            let o = run(&["validate"], &p);
            assert!(o.status.success(), "{}: {}", p.display(), stderr(&o));
        }
    }
    assert!(n >= 9);
}
