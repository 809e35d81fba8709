use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wealth-causal"))
}

fn run_in(dir: &Path, out: &str, args: &[&str]) -> Output {
    bin().current_dir(dir).arg("--out").arg(out).args(args).output().expect("spawn")
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "exit {:?}\nstderr: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn header(dir: &Path, rel: &str) -> String {
    read(dir, rel).lines().next().unwrap_or("").to_string()
}

fn rows(dir: &Path, rel: &str) -> Vec<Vec<String>> {
    read(dir, rel).lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

/// Every file name and its bytes, sorted.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn toy_assets(dir: &Path) -> PathBuf {
    let path = dir.join("assets.csv");
    let mut s = String::from("household_id,cluster_id,year,has_electricity,has_radio,rooms\n");
    let data = [
        (1, 0, 1), (1, 1, 3), (0, 0, 1), (1, 1, 4), (0, 1, 2),
        (1, 0, 2), (0, 0, 1), (1, 1, 5), (0, 1, 1), (1, 1, 3),
    ];
    for (k, (e, r, m)) in data.iter().enumerate() {
        s.push_str(&format!("h{k},c{},2015,{e},{r},{m}\n", k / 5));
    }
    fs::write(&path, s).unwrap();
    path
}

fn two_by_two(dir: &Path) -> (PathBuf, PathBuf) {
    let panel = dir.join("panel.csv");
    let treat = dir.join("treat.csv");
    fs::write(&panel, "unit_id,year,value\nt,2010,1.5\nt,2011,4.25\nc,2010,2\nc,2011,3.5\n").unwrap();
    fs::write(&treat, "unit_id,first_treat_year\nt,2011\nc,\n").unwrap();
    (panel, treat)
}

#[test]
fn two_unit_prints_the_group_mean_dd() {
    let tmp = TempDir::new().unwrap();
    let (panel, treat) = two_by_two(tmp.path());
    let o = run_in(
        tmp.path(),
        "o",
        &["estimate", "--estimator", "dd", "--mode", "two-unit", "--panel", panel.to_str().unwrap(), "--treatment", treat.to_str().unwrap()],
    );
    let stdout = ok(&o);
    let beta = (4.25 - 1.5) - (3.5 - 2.0);
    assert_eq!(stdout.trim(), format!("beta = {beta}"));
    let r = rows(&tmp.path().join("o"), "two_unit.csv");
    assert_eq!(r[0][4].parse::<f64>().unwrap(), beta);
}

#[test]
fn dd_effects_have_the_documented_header() {
    let tmp = TempDir::new().unwrap();
    let (panel, treat) = two_by_two(tmp.path());
    let o = run_in(
        tmp.path(),
        "o",
        &["estimate", "--estimator", "dd", "--reps", "0", "--panel", panel.to_str().unwrap(), "--treatment", treat.to_str().unwrap()],
    );
    ok(&o);
    let out = tmp.path().join("o");
    assert_eq!(header(&out, "effects.csv"), "unit_id,year,observed,counterfactual,effect");
    let svg = read(&out, "counterfactual.svg");
    assert!(svg.contains("<!-- data series=\"treated\"\nx,y\n2010,1.5\n2011,4.25\n-->"));
}

#[test]
fn lambda_grid_writes_the_cv_trace() {
    let tmp = TempDir::new().unwrap();
    let o = run_in(tmp.path(), "o", &["estimate", "--demo", "--estimator", "mc", "--lambda-grid", "0.5,0.05,0.005", "--reps", "0"]);
    ok(&o);
    let trace = rows(&tmp.path().join("o"), "cv_trace.csv");
    let lambdas: Vec<f64> = trace.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(lambdas, vec![0.5, 0.05, 0.005]);
    assert!(trace.iter().all(|r| r[1].parse::<f64>().unwrap().is_finite()));
}

#[test]
fn estimate_is_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let args = ["estimate", "--demo", "--estimator", "mc", "--reps", "6", "--seed", "3"];
    let mut a = vec!["--threads", "1"];
    a.extend(args);
    let mut b = vec!["--threads", "4"];
    b.extend(args);
    let sa = ok(&run_in(tmp.path(), "a", &a));
    let sb = ok(&run_in(tmp.path(), "b", &b));
    assert_eq!(sa, sb);
    let (da, db) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(snapshot(&da), snapshot(&db));
    assert_eq!(header(&da, "draws.csv"), "rep,year,ate");
    assert_eq!(header(&da, "summary.csv"), "year,mean,lo95,hi95");
}

#[test]
fn effective_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    ok(&run_in(tmp.path(), "a", &["simulate", "--seed", "5", "--studies", "size", "--size-reps", "30", "--periods", "8"]));
    let echo = tmp.path().join("a/effective_config.toml");
    let text = fs::read_to_string(&echo).unwrap();
    assert!(text.contains("command = \"simulate\""));
    assert!(text.contains("seed = 5"));
    ok(&run_in(tmp.path(), "b", &["--config", echo.to_str().unwrap(), "simulate"]));
    assert_eq!(snapshot(&tmp.path().join("a")), snapshot(&tmp.path().join("b")));
}

#[test]
fn simulate_bias_curves_header_and_threads() {
    let tmp = TempDir::new().unwrap();
    let args = ["simulate", "--studies", "pretrend", "--reps", "3", "--rates", "0,0.25", "--periods", "8"];
    let mut a = vec!["--threads", "1"];
    a.extend(args);
    let mut b = vec!["--threads", "3"];
    b.extend(args);
    ok(&run_in(tmp.path(), "a", &a));
    ok(&run_in(tmp.path(), "b", &b));
    let da = tmp.path().join("a");
    assert_eq!(snapshot(&da), snapshot(&tmp.path().join("b")));
    assert_eq!(header(&da, "bias_curves.csv"), "t_periods,rate,estimator,bias,mc_se");
    assert!(read(&da, "bias_curves.svg").contains("<!-- data series="));
}

#[test]
fn sweep_loss_headers() {
    let tmp = TempDir::new().unwrap();
    ok(&run_in(tmp.path(), "o", &["sweep-loss", "--lambda-b", "0,1", "--epochs", "3", "--train-n", "300"]));
    let out = tmp.path().join("o");
    assert_eq!(header(&out, "sweep.csv"), "lambda_b,phi,r2");
    assert_eq!(header(&out, "history_0.csv"), "epoch,mse,l2,eb,total");
    assert_eq!(rows(&out, "sweep.csv").len(), 2);
}

#[test]
fn index_of_toy_table_has_mean_zero() {
    let tmp = TempDir::new().unwrap();
    let input = toy_assets(tmp.path());
    ok(&run_in(tmp.path(), "o", &["index", "--input", input.to_str().unwrap()]));
    let r = rows(&tmp.path().join("o"), "household_index.csv");
    assert_eq!(r.len(), 10);
    let mean: f64 = r.iter().map(|x| x[3].parse::<f64>().unwrap()).sum::<f64>() / 10.0;
    assert!(mean.abs() < 1e-12, "{mean}");
    assert_eq!(rows(&tmp.path().join("o"), "loadings.csv").len(), 3);
}

#[test]
fn index_exclusion_drops_the_column() {
    let tmp = TempDir::new().unwrap();
    let input = toy_assets(tmp.path());
    ok(&run_in(tmp.path(), "o", &["index", "--input", input.to_str().unwrap(), "--exclude", "has_electricity"]));
    let names: Vec<String> = rows(&tmp.path().join("o"), "loadings.csv").into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(names, vec!["has_radio", "rooms"]);
}

#[test]
fn empty_asset_file_fails_with_input_code() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("empty.csv");
    fs::write(&input, "").unwrap();
    let o = run_in(tmp.path(), "o", &["index", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[estimate]\nbogus = 1\n").unwrap();
    let o = run_in(tmp.path(), "o", &["--config", cfg.to_str().unwrap(), "estimate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    assert_eq!(run_in(tmp.path(), "o", &["estimate", "--frobnicate"]).status.code(), Some(2));

    let o = run_in(tmp.path(), "o", &["estimate", "--panel", "nope.csv", "--treatment", "nope.csv"]);
    assert_eq!(o.status.code(), Some(3));

    // Staggered adoption is rejected by the estimators.
    let panel = tmp.path().join("stag.csv");
    let treat = tmp.path().join("stag_t.csv");
    let mut s = String::from("unit_id,year,value\n");
    for u in ["a", "b", "c"] {
        for y in 2010..2014 {
            s.push_str(&format!("{u},{y},{}\n", y - 2010));
        }
    }
    fs::write(&panel, s).unwrap();
    fs::write(&treat, "unit_id,first_treat_year\na,2011\nb,2012\nc,\n").unwrap();
    let o = run_in(
        tmp.path(),
        "o",
        &["estimate", "--estimator", "dd", "--reps", "0", "--panel", panel.to_str().unwrap(), "--treatment", treat.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn assign_groups_by_distance() {
    let tmp = TempDir::new().unwrap();
    // Lines along the equator; 0.01 degree of latitude is about 1.1 km.
    let units = tmp.path().join("units.csv");
    fs::write(&units, "unit_id,lon,lat\nnear,0.5,0.01\nfar,0.5,0.5\nold,2.5,0.01\n").unwrap();
    let grid = tmp.path().join("grid.geojson");
    fs::write(
        &grid,
        r#"{"type":"FeatureCollection","features":[
{"type":"Feature","properties":{"vintage":2012},"geometry":{"type":"LineString","coordinates":[[0,0],[1,0]]}},
{"type":"Feature","properties":{"vintage":2008},"geometry":{"type":"LineString","coordinates":[[2,0],[3,0]]}}]}"#,
    )
    .unwrap();
    ok(&run_in(tmp.path(), "o", &["assign", "--units", units.to_str().unwrap(), "--grid", grid.to_str().unwrap()]));
    let out = tmp.path().join("o");
    assert_eq!(header(&out, "assignment.csv"), "unit_id,group,first_treat_year,dist_2008_km,dist_2012_km");
    let r = rows(&out, "assignment.csv");
    let group = |id: &str| r.iter().find(|x| x[0] == id).unwrap()[1].clone();
    assert_eq!(group("near"), "treated");
    assert_eq!(group("far"), "control");
    assert_eq!(group("old"), "excluded");
    let t = read(&out, "treatment.csv");
    assert!(t.contains("near,2012"));
    assert!(!t.contains("old"));
}
