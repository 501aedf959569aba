use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bnpmeta"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let o = run(args, cwd);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

/// Data rows of a metadata-stamped csv, header first.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const MIXTURE: &str = "model = \"mixture\"\nn = 40\np = 1\nbeta = [0.0, 0.0]\nlocations = [-2.0, 2.0]\nintercept_var = 0.01\nmembership_slope = 20\n";

#[test]
fn es_falconer_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["es", "--kind", "falconer", "--values", "0.8,100,0.55,100", "--out", "es"], dir.path());
    let rows = csv_rows(&dir.path().join("es/es.csv"));
    assert!(out.contains("es,var"));
    let es: f64 = rows[1][4].parse().unwrap();
    let var: f64 = rows[1][5].parse().unwrap();
    assert!((es - 0.5).abs() < 1e-12);
    assert!((var - 0.0246442).abs() < 1e-6);
}

#[test]
fn es_table_reports_bad_row() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "rho,n\n0.3,50\n1.5,20\n");
    let o = run(&["es", "--kind", "fisher", "--data", "t.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));
}

#[test]
fn diagnose_flags_bimodal_sample() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sim.toml", MIXTURE);
    ok(&["simulate", "--spec", "sim.toml", "--seed", "4", "--out", "sim"], dir.path());
    ok(&["diagnose", "--data", "sim/data.csv", "--out", "diag", "--svg"], dir.path());
    let n = json(&dir.path().join("diag/normality.json"));
    assert_eq!(n["anderson_darling"]["reject_at_05"], true);
    assert_eq!(n["kde_modes"].as_array().unwrap().len(), 2);
    let svg = fs::read_to_string(dir.path().join("diag/kde.svg")).unwrap();
    assert!(svg.starts_with("<!--") && svg.contains("command: diagnose"));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sim.toml", MIXTURE);
    ok(&["simulate", "--spec", "sim.toml", "--seed", "9", "--out", "a"], dir.path());
    ok(&["simulate", "--spec", "sim.toml", "--seed", "9", "--out", "b"], dir.path());
    ok(&["simulate", "--spec", "sim.toml", "--seed", "10", "--out", "c"], dir.path());
    let read = |d: &str| fs::read(dir.path().join(d).join("data.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(csv_rows(&dir.path().join("a/data.csv"))[0], ["study", "y", "var", "x1"]);
}

#[test]
fn fit_is_reproducible_and_matches_weighted_mean() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "d.csv", "study,y,var\nA,0.2,0.04\nB,0.6,0.01\n");
    write(dir.path(), "fe.toml", "model = \"fe\"\n");
    let args = |out: &'static str| ["fit", "--data", "d.csv", "--spec", "fe.toml", "--keep", "2000", "--burn", "200", "--seed", "5", "--out", out];
    ok(&args("a"), dir.path());
    ok(&args("b"), dir.path());
    for f in ["draws.csv", "summary.csv", "report.json", "run.json"] {
        let read = |d: &str| fs::read_to_string(dir.path().join(d).join(f)).unwrap();
        assert_eq!(read("a"), read("b"), "{f}");
    }
    // precision-weighted mean (0.2/0.04 + 0.6/0.01) / (1/0.04 + 1/0.01)
    let target = (0.2 / 0.04 + 0.6 / 0.01) / (1.0 / 0.04 + 1.0 / 0.01);
    let rows = csv_rows(&dir.path().join("a/summary.csv"));
    let beta0 = rows.iter().find(|r| r[0] == "beta0").unwrap();
    let mean: f64 = beta0[1].parse().unwrap();
    let mcse: f64 = beta0[6].parse().unwrap();
    assert!((mean - target).abs() < 3.0 * mcse + 1e-12, "{mean} vs {target} (mcse {mcse})");
    let draws = fs::read_to_string(dir.path().join("a/draws.csv")).unwrap();
    assert!(draws.starts_with("# bnpmeta") && draws.contains("# seed: 5"));
}

#[test]
fn unstable_fit_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "d.csv", "study,y,var\nA,0.2,0.04\nB,0.6,0.01\nC,-0.1,0.09\n");
    write(dir.path(), "re.toml", "model = \"re2l\"\n");
    let base = ["fit", "--data", "d.csv", "--spec", "re.toml", "--keep", "400", "--burn", "50", "--mcci-threshold", "1e-9"];
    let o = run(&[&base[..], &["--out", "a"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(dir.path().join("a/run.json").exists());
    let o = run(&[&base[..], &["--out", "b", "--allow-unstable"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("b/run.json"))["stable"], false);
}

#[test]
fn predict_and_compare_on_simulated_runs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "sim.toml", MIXTURE);
    write(p, "fe.toml", "model = \"fe\"\ncovariates = \"all\"\n");
    write(p, "re.toml", "model = \"re2l\"\n");
    write(p, "bnp.toml", "model = \"bnp\"\ncovariates = \"all\"\n");
    ok(&["simulate", "--spec", "sim.toml", "--seed", "3", "--out", "sim"], p);
    for (spec, out) in [("fe.toml", "fe"), ("re.toml", "re"), ("bnp.toml", "bnp")] {
        ok(&["fit", "--data", "sim/data.csv", "--spec", spec, "--keep", "1000", "--burn", "300", "--out", out, "--allow-unstable"], p);
    }

    ok(&["predict", "--run", "bnp", "--x", "x1=0.5", "--sweep", "x1", "--sweep-points", "5", "--out", "pred"], p);
    let m = json(&p.join("pred/moments.json"));
    assert!((m["grid_integral"].as_f64().unwrap() - 1.0).abs() < 0.01);
    let sweep = csv_rows(&p.join("pred/sweep.csv"));
    assert_eq!(sweep.len(), 6);
    for r in &sweep[1..] {
        let q: Vec<f64> = r[1..].iter().map(|v| v.parse().unwrap()).collect();
        assert!(q[0] <= q[1] && q[1] <= q[2]);
    }
    let o = run(&["predict", "--run", "bnp", "--x", "x9=1", "--out", "bad"], p);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown covariate `x9`"));

    ok(&["compare", "--runs", "re", "bnp", "fe", "--out", "cmp", "--allow-unstable"], p);
    let c = json(&p.join("cmp/comparison.json"));
    let rows = c["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let ds: Vec<f64> = rows.iter().map(|r| r["d"].as_f64().unwrap()).collect();
    assert!(ds.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(rows.iter().map(|r| r["rank"].as_u64().unwrap()).collect::<Vec<_>>(), [1, 2, 3]);
    assert!(fs::read_to_string(p.join("cmp/comparison.txt")).unwrap().contains("# config_hash: "));

    ok(&["simulate", "--spec", "sim.toml", "--seed", "4", "--out", "sim2"], p);
    ok(&["fit", "--data", "sim2/data.csv", "--spec", "fe.toml", "--keep", "500", "--out", "other", "--allow-unstable"], p);
    let o = run(&["compare", "--runs", "fe", "other", "--out", "cmp2"], p);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different datasets"));
}

#[test]
fn weights_demo_spread() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["weights-demo", "--sigma", "0.05,2", "--out", "w", "--svg"], dir.path());
    let rows = csv_rows(&dir.path().join("w/weights.csv"));
    let weights = |s: &str| -> Vec<f64> { rows[1..].iter().filter(|r| r[0] == s).map(|r| r[2].parse().unwrap()).collect() };
    assert!(weights("0.05").iter().any(|w| *w > 0.99));
    assert!(weights("2").iter().filter(|w| **w > 0.05).count() >= 5);
    assert!(dir.path().join("w/density.svg").exists());
}
