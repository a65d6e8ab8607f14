use std::f64::consts::{LOG2_E, PI};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infoloss")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(p).unwrap();
    assert!(!text.contains('\r'));
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let j = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[j].parse().unwrap()).collect()
}

// Normal tail: erfc by Taylor series below 2.5, continued fraction above.
fn q_function(z: f64) -> f64 {
    let x = z / 2f64.sqrt();
    let erfc = if x < 2.5 {
        let (mut sum, mut term, mut n) = (0.0, x, 0.0f64);
        loop {
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
            n += 1.0;
            term *= -x * x / n;
        }
        1.0 - 2.0 / PI.sqrt() * sum
    } else {
        let mut t = x;
        for k in (1..=300).rev() {
            t = x + (k as f64 / 2.0) / t;
        }
        (-x * x).exp() / (PI.sqrt() * t)
    };
    0.5 * erfc
}

fn loss_of(dir: &TempDir, name: &str, config: &str) -> f64 {
    let cfg = write(dir, name, config);
    let out = dir.path().join(format!("{name}.out.json"));
    let o = run(&["loss", s(&cfg), "--json", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    let x = v["x_route"]["loss_bits"].as_f64().unwrap();
    let w = v["w_route"]["loss_bits"].as_f64().unwrap();
    assert!((x - w).abs() < 1e-4);
    x
}

#[test]
fn loss_examples() {
    let dir = TempDir::new().unwrap();
    let m = loss_of(
        &dir,
        "m.json",
        r#"{"function":{"kind":"catalog","name":"magnitude"},"density":{"kind":"normal","sigma":1}}"#,
    );
    assert!((m - 1.0).abs() < 1e-3);
    let q =
        loss_of(&dir, "q.json", r#"{"function":{"kind":"catalog","name":"sqlin"},"density":{"kind":"uniform","a":1}}"#);
    assert!((q - 0.922).abs() < 1e-3);
    let i = loss_of(
        &dir,
        "i.json",
        r#"{"function":{"kind":"catalog","name":"identity"},"density":{"kind":"uniform","a":1}}"#,
    );
    assert_eq!(i, 0.0);
}

#[test]
fn polynomial_and_piecewise_functions() {
    let dir = TempDir::new().unwrap();
    let p = loss_of(
        &dir,
        "p.json",
        r#"{"function":{"kind":"polynomial","coeffs":[0,0,1]},"density":{"kind":"normal","sigma":1}}"#,
    );
    assert!((p - 1.0).abs() < 1e-3);
    let pw = loss_of(
        &dir,
        "pw.json",
        r#"{"function":{"kind":"piecewise","pieces":[{"hi":0,"coeffs":[0,-1]},{"lo":0,"coeffs":[0,1]}]},
            "density":{"kind":"table","points":[[-1,1],[1,1]]}}"#,
    );
    assert!((pw - 1.0).abs() < 1e-3);
}

#[test]
fn table_density_from_csv_file() {
    let dir = TempDir::new().unwrap();
    write(&dir, "pdf.csv", "x,pdf\n-1,0.5\n1,0.5\n");
    let q = loss_of(
        &dir,
        "t.json",
        r#"{"function":{"kind":"catalog","name":"sqlin"},"density":{"kind":"table","csv":"pdf.csv"}}"#,
    );
    assert!((q - 0.922).abs() < 1e-3);
}

#[test]
fn cubic_sweep_bound_column() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"function":{"kind":"catalog","name":"cubic"},"density":{"kind":"normal","sigma":1},
            "sweep":{"param":"density.sigma","log_grid":{"lo":1,"hi":100,"n":25}}}"#,
    );
    let csv = dir.path().join("c.csv");
    let o = run(&["sweep", s(&cfg), "--csv", s(&csv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&csv);
    assert_eq!(rows[0], ["param", "loss_quadrature", "loss_mc", "mc_stderr", "bound1", "bound2", "bound3", "status"]);
    assert_eq!(rows.len(), 26);
    let sigma = column(&rows, "param");
    let bound1 = column(&rows, "bound1");
    let loss = column(&rows, "loss_quadrature");
    for k in 0..25 {
        let want = (1.0 - 2.0 * q_function(20.0 / (3f64.sqrt() * sigma[k]))) * 3f64.log2();
        assert!((bound1[k] - want).abs() <= 1e-6, "sigma {}: {} vs {want}", sigma[k], bound1[k]);
        assert!(loss[k] <= bound1[k]);
        if k > 0 {
            assert!(bound1[k] <= bound1[k - 1]);
        }
    }
    assert!(column(&rows, "loss_mc").iter().all(|v| v.is_nan()));
}

#[test]
fn sqlin_sweep_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "q.json",
        r#"{"function":{"kind":"catalog","name":"sqlin"},"density":{"kind":"uniform","a":1},
            "quadrature":{"abs_tol":1e-8},"sweep":{"param":"density.a","values":[1,2,4]}}"#,
    );
    let csv = dir.path().join("q.csv");
    assert_eq!(code(&run(&["sweep", s(&cfg), "--csv", s(&csv)])), 0);
    let rows = csv_rows(&csv);
    for (a, l) in column(&rows, "param").into_iter().zip(column(&rows, "loss_quadrature")) {
        let r = a.sqrt();
        let want = (4.0 * a + 4.0 * r + 1.0) / (8.0 * a) * (2.0 * r + 1.0).log2()
            - (2.0 * r).log2() / 2.0
            - LOG2_E / (4.0 * r);
        assert!((l - want).abs() <= 1e-4, "a={a}: {l} vs {want}");
    }
}

#[test]
fn single_point_sweep_equals_loss() {
    let dir = TempDir::new().unwrap();
    let body = r#"{"function":{"kind":"catalog","name":"sqlin"},"density":{"kind":"uniform","a":2},
                   "sweep":{"param":"density.a","values":[2]}}"#;
    let cfg = write(&dir, "one.json", body);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(code(&run(&["sweep", s(&cfg), "--csv", s(&a)])), 0);
    assert_eq!(code(&run(&["loss", s(&cfg), "--csv", s(&b)])), 0);
    let sweep = csv_rows(&a);
    let loss = csv_rows(&b);
    assert_eq!(loss[1][0], "quadrature_x");
    assert_eq!(sweep[1][1], loss[1][1]);
    assert_eq!(sweep[1][4..7], loss[1][3..6]);
}

#[test]
fn failed_sweep_points_are_flagged() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "f.json",
        r#"{"function":{"kind":"catalog","name":"magnitude"},"density":{"kind":"normal","sigma":1},
            "sweep":{"param":"density.sigma","values":[1,-1]}}"#,
    );
    let csv = dir.path().join("f.csv");
    assert_eq!(code(&run(&["sweep", s(&cfg), "--csv", s(&csv)])), 3);
    let rows = csv_rows(&csv);
    assert_eq!(rows[1][7], "ok");
    assert_eq!(rows[2][1], "NaN");
    assert!(rows[2][7].starts_with("failed"));
}

#[test]
fn dumped_config_reproduces_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "r.json",
        r#"{"function":{"kind":"catalog","name":"sqlin"},"density":{"kind":"uniform","a":1},
            "mc":{"n_samples":20000},"sweep":{"param":"density.a","lin_grid":{"lo":1,"hi":3,"n":3}}}"#,
    );
    let dumped = dir.path().join("dumped.json");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let o = run(&["sweep", s(&cfg), "--seed", "11", "--csv", s(&a), "--dump-config", s(&dumped)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&dumped)["mc"]["seed"], 11);
    assert_eq!(code(&run(&["sweep", s(&dumped), "--csv", s(&b)])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(column(&csv_rows(&a), "loss_mc").iter().all(|v| v.is_finite()));
}

#[test]
fn cascade_stages() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"density":{"kind":"normal","sigma":1},
            "cascade":{"stages":[{"kind":"catalog","name":"magnitude"},{"kind":"catalog","name":"identity"}]}}"#,
    );
    let out = dir.path().join("c.out.json");
    assert_eq!(code(&run(&["cascade", s(&cfg), "--json", s(&out)])), 0);
    let v = json(&out);
    let stages = v["stages"]["stage_losses_bits"].as_array().unwrap();
    assert!((stages[0].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(stages[1].as_f64().unwrap(), 0.0);
}

#[test]
fn mc_constant_integrand() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "m.json",
        r#"{"function":{"kind":"catalog","name":"magnitude"},"density":{"kind":"normal","sigma":1},
            "mc":{"n_samples":100000,"seed":7}}"#,
    );
    let out = dir.path().join("m.out.json");
    assert_eq!(code(&run(&["mc", s(&cfg), "--json", s(&out)])), 0);
    assert_eq!(json(&out)["estimate_bits"].as_f64(), Some(1.0));
}

#[test]
fn randomized_commands_need_a_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "m.json",
        r#"{"function":{"kind":"catalog","name":"magnitude"},"density":{"kind":"normal","sigma":1},
            "mc":{"n_samples":100000}}"#,
    );
    assert_eq!(code(&run(&["mc", s(&cfg)])), 2);
    assert_eq!(code(&run(&["mc", s(&cfg), "--seed", "1"])), 0);
}

#[test]
fn oracle_levels() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "o.json",
        r#"{"function":{"kind":"catalog","name":"magnitude"},"density":{"kind":"normal","sigma":1},
            "mc":{"n_samples":50000,"seed":3},"histogram":{"y_bins":8,"refinement_levels":3}}"#,
    );
    let csv = dir.path().join("o.csv");
    assert_eq!(code(&run(&["oracle", s(&cfg), "--csv", s(&csv)])), 0);
    let rows = csv_rows(&csv);
    assert_eq!(rows[0], ["level", "bins", "estimate_bits"]);
    assert_eq!(column(&rows, "bins"), [8.0, 16.0, 32.0]);
    assert!(column(&rows, "estimate_bits").iter().all(|v| (v - 1.0).abs() < 0.01));
}

#[test]
fn build_tight_table_and_loss() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "t.json", r#"{"density":{"kind":"uniform","a":1},"tight":{"L":3}}"#);
    let (csv, out) = (dir.path().join("t.csv"), dir.path().join("t.out.json"));
    assert_eq!(code(&run(&["build-tight", s(&cfg), "--csv", s(&csv), "--json", s(&out)])), 0);
    let rows = csv_rows(&csv);
    assert_eq!(rows[0], ["x", "y", "branch"]);
    assert_eq!(rows.len(), 258);
    assert!(column(&rows, "y").iter().all(|y| (0.0..=1.0 / 3.0).contains(y)));
    let v = json(&out);
    assert!((v["loss"]["loss_bits"].as_f64().unwrap() - 3f64.log2()).abs() < 1e-3);
    assert_eq!(v["tightness"]["bound3_tight"], true);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let unknown = write(&dir, "u.json", r#"{"density":{"kind":"normal","sigma":1},"bogus":1}"#);
    assert_eq!(code(&run(&["loss", s(&unknown)])), 2);
    assert_eq!(code(&run(&["loss", s(&dir.path().join("missing.json"))])), 2);
    let no_fn = write(&dir, "n.json", r#"{"density":{"kind":"normal","sigma":1}}"#);
    assert_eq!(code(&run(&["loss", s(&no_fn)])), 2);
    let mismatch = write(
        &dir,
        "x.json",
        r#"{"function":{"kind":"catalog","name":"cosine","params":{"L":2}},"density":{"kind":"normal","sigma":1}}"#,
    );
    assert_eq!(code(&run(&["loss", s(&mismatch)])), 3);
    let starved = write(
        &dir,
        "s.json",
        r#"{"function":{"kind":"catalog","name":"sqlin"},"density":{"kind":"normal","sigma":1},
            "quadrature":{"abs_tol":1e-300,"rel_tol":0,"max_depth":10}}"#,
    );
    assert_eq!(code(&run(&["loss", s(&starved)])), 4);
}
