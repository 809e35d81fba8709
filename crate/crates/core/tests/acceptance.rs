//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
//! its measured quantities and wall time; the process fails if any line fails.

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wealth_causal::bias_loss::{
    heteroscedastic_task, loss_and_gradient, sample_quintile_bias, sweep_lambda_b, Architecture, LossConfig,
    SurrogateParams, LAMBDA_B_SWEEP,
};
use wealth_causal::bootstrap::{ate_timepath, bootstrap_ate, BootstrapConfig, CountryScenario};
use wealth_causal::estimators::{
    dd_twfe, matrix_complete, matrix_complete_lenient, mc_cv_lambda, mc_default_grid, scen_fit, soft_threshold,
    EnetOptions, McOptions, McSettings, ScenMode, Tuning,
};
use wealth_causal::validation::{
    generate_panel, kfold_control_cv, simulate_berkson, simulate_pretrend, simulate_pretrend_rejection, SimScenario,
};
use wealth_causal::wealth_index::{build_index, quintile_bounds};
use wealth_causal::{AssetTable, Estimator, PanelMatrix};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_panel(rng: &mut ChaCha8Rng, n: usize, t: usize) -> PanelMatrix {
    let y = Array2::from_shape_fn((n, t), |_| rng.gen_range(-3.0..3.0));
    let mut p = PanelMatrix::from_values(y);
    let treated = rng.gen_range(1..n);
    let start = rng.gen_range(1..t);
    for i in 0..treated {
        p.set_treated(i, start);
    }
    p
}

fn c1_affine_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (n, t) = (rng.gen_range(3..30), rng.gen_range(2..12));
        let p = random_panel(&mut rng, n, t);
        let (alpha, phi) = (rng.gen_range(-5.0..5.0), rng.gen_range(-3.0..3.0));
        let mut q = p.clone();
        q.values.mapv_inplace(|v| alpha + phi * v);
        let b = dd_twfe(&p).map_err(|e| e.to_string())?.beta;
        let bq = dd_twfe(&q).map_err(|e| e.to_string())?.beta;
        worst = worst.max((bq - phi * b).abs());
    }
    ensure(worst < 1e-10, format!("max |dd(a+pY) - p dd(Y)| = {worst:.2e}"))
}

fn c2_two_by_two() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (n, t) = (rng.gen_range(2..15), 2);
        let p = random_panel(&mut rng, n, t);
        let treated = p.treated_units();
        let controls = p.control_units();
        let mean = |units: &[usize], s: usize| units.iter().map(|&i| p.values[[i, s]]).sum::<f64>() / units.len() as f64;
        let oracle = (mean(&treated, 1) - mean(&treated, 0)) - (mean(&controls, 1) - mean(&controls, 0));
        let b = dd_twfe(&p).map_err(|e| e.to_string())?.beta;
        worst = worst.max((b - oracle).abs());
    }
    ensure(worst < 1e-10, format!("max |twfe - group means| = {worst:.2e}"))
}

fn mask(rng: &mut ChaCha8Rng, p: &mut PanelMatrix, share: f64) -> Vec<(usize, usize)> {
    let (n, t) = p.values.dim();
    let mut masked = Vec::new();
    for i in 0..n {
        for s in 0..t {
            if rng.gen_bool(share) {
                p.observed[[i, s]] = false;
                masked.push((i, s));
            }
        }
    }
    masked
}

fn c3_soft_impute() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);

    let y = Array2::from_shape_fn((15, 9), |_| rng.gen_range(-2.0..2.0));
    let full = PanelMatrix::from_values(y.clone());
    let fit = matrix_complete(&full, 0.0, &McOptions::default()).map_err(|e| e.to_string())?;
    let identity = (&fit.l_hat - &y).iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut worst_rise = 0.0f64;
    for _ in 0..20 {
        let (n, t) = (rng.gen_range(5..25), rng.gen_range(4..12));
        let mut p = PanelMatrix::from_values(Array2::from_shape_fn((n, t), |_| rng.gen_range(-2.0..2.0)));
        mask(&mut rng, &mut p, 0.2);
        let lambda = rng.gen_range(0.001..0.5);
        let f = matrix_complete_lenient(&p, lambda, &McOptions::default(), None).map_err(|e| e.to_string())?;
        for w in f.objective_trace.windows(2) {
            worst_rise = worst_rise.max((w[1] - w[0]) / w[0].abs().max(1e-300));
        }
    }

    let u: Vec<f64> = (0..20).map(|_| rng.gen_range(0.5..2.0)).collect();
    let v: Vec<f64> = (0..10).map(|_| rng.gen_range(0.5..2.0)).collect();
    let y1 = Array2::from_shape_fn((20, 10), |(i, s)| u[i] * v[s]);
    let mut p1 = PanelMatrix::from_values(y1.clone());
    let m1 = mask(&mut rng, &mut p1, 0.15);
    let f1 = matrix_complete_lenient(&p1, 1e-6, &McOptions { tol: 1e-10, max_iter: 20_000 }, None).map_err(|e| e.to_string())?;
    let num: f64 = m1.iter().map(|&(i, s)| (f1.l_hat[[i, s]] - y1[[i, s]]).powi(2)).sum();
    let den: f64 = m1.iter().map(|&(i, s)| y1[[i, s]].powi(2)).sum();
    let rel = (num / den).sqrt();

    let a: Vec<[f64; 2]> = (0..50).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let b: Vec<[f64; 2]> = (0..20).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let y2 = Array2::from_shape_fn((50, 20), |(i, s)| a[i][0] * b[s][0] + a[i][1] * b[s][1]);
    let mut p2 = PanelMatrix::from_values(y2.clone());
    let m2 = mask(&mut rng, &mut p2, 0.15);
    let grid = mc_default_grid(&p2).map_err(|e| e.to_string())?;
    let cv = mc_cv_lambda(&p2, &grid, 0.1, 3, 1, &McOptions::default()).map_err(|e| e.to_string())?;
    let f2 = matrix_complete_lenient(&p2, cv.lambda, &McOptions::default(), None).map_err(|e| e.to_string())?;
    let rmse = (m2.iter().map(|&(i, s)| (f2.l_hat[[i, s]] - y2[[i, s]]).powi(2)).sum::<f64>() / m2.len() as f64).sqrt();

    ensure(
        identity < 1e-10 && worst_rise <= 1e-12 && rel < 1e-3 && rmse < 0.05,
        format!(
            "identity {identity:.1e}, max objective rise {worst_rise:.1e}, rank-1 rel rmse {rel:.1e}, rank-2 rmse {rmse:.4} at lambda {:.2e}",
            cv.lambda
        ),
    )
}

fn orthonormal_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < p {
        let mut c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = c.iter().sum::<f64>() / n as f64;
        c.iter_mut().for_each(|v| *v -= m);
        for q in &cols {
            let d: f64 = c.iter().zip(q).map(|(a, b)| a * b).sum();
            c.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(c.into_iter().map(|v| v / norm).collect());
        }
    }
    let scale = (n as f64).sqrt();
    Array2::from_shape_fn((n, p), |(i, j)| cols[j][i] * scale)
}

fn c4_orthonormal_scen() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (n, p) = (rng.gen_range(12..40), rng.gen_range(2..6));
        let alpha = rng.gen_range(0.0..=1.0);
        let lambda = rng.gen_range(0.0..1.5);
        let x = orthonormal_design(&mut rng, n, p);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let ybar = y.iter().sum::<f64>() / n as f64;
        let values = Array2::from_shape_fn((n + 1, p + 1), |(i, s)| match (i, s) {
            (0, _) => 0.0,
            (i, s) if s < p => x[[i - 1, s]],
            (i, _) => y[i - 1],
        });
        let mut panel = PanelMatrix::from_values(values);
        panel.set_treated(0, p);
        let fit = scen_fit(&panel, alpha, lambda, ScenMode::Transposed, &EnetOptions::default()).map_err(|e| e.to_string())?;
        for (j, w) in fit.weights[0].iter().enumerate() {
            let b: f64 = (0..n).map(|i| x[[i, j]] * (y[i] - ybar)).sum::<f64>() / n as f64;
            let oracle = soft_threshold(b, lambda * alpha) / (1.0 + lambda * (1.0 - alpha));
            worst = worst.max((w - oracle).abs());
        }
    }
    ensure(worst < 1e-6, format!("max |w - soft threshold| = {worst:.2e}"))
}

fn quick_mc() -> Estimator {
    Estimator::Mc(McSettings { lambda: Tuning::Cv(vec![]), cv_reps: 1, ..Default::default() })
}

fn c5_pretrend_bias() -> Outcome {
    let scn = SimScenario { selection_correlated: true, seed: 11, ..Default::default() };
    let dd = simulate_pretrend(&scn, &[20], &[0.1, 0.175, 0.25], 200, &[Estimator::Dd]).map_err(|e| e.to_string())?;
    let mc = simulate_pretrend(&scn, &[20], &[0.25], 200, &[quick_mc()]).map_err(|e| e.to_string())?;
    let (dd25, mc25) = (&dd[2], &mc[0]);
    let monotone = dd.windows(2).all(|w| w[1].bias > w[0].bias);
    ensure(
        mc25.bias.abs() < dd25.bias.abs() && dd25.bias > 3.0 * dd25.mc_se && monotone,
        format!(
            "rate 0.25: dd {:.3} (se {:.3}), mc {:.3} (se {:.3}); dd over rates {:.3} {:.3} {:.3}",
            dd25.bias, dd25.mc_se, mc25.bias, mc25.mc_se, dd[0].bias, dd[1].bias, dd[2].bias
        ),
    )
}

fn c6_berkson() -> Outcome {
    let run = |alpha: f64| {
        let scn = SimScenario { berkson: Some((alpha, 0.6)), seed: 12, ..Default::default() };
        simulate_berkson(&scn, 200, &[Estimator::Dd, quick_mc()]).map_err(|e| e.to_string())
    };
    let zero = run(0.0)?;
    let shifted = run(3.0)?;
    let (dd, mc) = (zero[0].mean_estimate, zero[1].mean_estimate);
    let drift = zero.iter().zip(&shifted).map(|(a, b)| (a.mean_estimate - b.mean_estimate).abs()).fold(0.0, f64::max);
    ensure(
        (0.58..=0.62).contains(&dd) && (mc - dd).abs() < 0.05 && drift < 1e-6,
        format!("dd {dd:.4}, mc {mc:.4}, max change under alpha shift {drift:.1e}"),
    )
}

fn c7_bias_penalty() -> Outcome {
    let (x, y) = heteroscedastic_task::<f64>(4000, 11);
    let (xv, yv) = heteroscedastic_task::<f64>(2000, 12);
    let cfg = LossConfig { lambda_r: 1e-4, lambda_b: 0.0, learning_rate: 0.02, epochs: 40, seed: 1, ..LossConfig::reference() };
    let points = sweep_lambda_b((x.view(), &y), (xv.view(), &yv), &cfg, Architecture::Linear, &LAMBDA_B_SWEEP)
        .map_err(|e| e.to_string())?;
    let zero = &points[0];
    let five = points.iter().find(|p| p.lambda_b == 5.0).ok_or("sweep lacks lambda_b = 5")?;
    ensure(
        (five.phi - 1.0).abs() < 0.5 * (zero.phi - 1.0).abs() && five.r2 <= zero.r2,
        format!("phi {:.4} -> {:.4}, r2 {:.4} -> {:.4}", zero.phi, five.phi, zero.r2, five.r2),
    )
}

fn c8_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let (x, y) = heteroscedastic_task::<f64>(90, 3);
    let cuts = quintile_bounds(&y).map_err(|e| e.to_string())?;
    let cfg = LossConfig { lambda_r: 0.01, lambda_b: 5.0, ..LossConfig::reference() };
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 20 {
        let params = if checked % 2 == 0 {
            SurrogateParams::Linear {
                weights: Array1::from_shape_fn(x.ncols(), |_| rng.gen_range(-1.0..1.0)),
                intercept: rng.gen_range(-0.5..0.5),
            }
        } else {
            let h = 4;
            SurrogateParams::Mlp {
                w1: Array2::from_shape_fn((h, x.ncols()), |_| rng.gen_range(-1.0..1.0)),
                b1: Array1::from_shape_fn(h, |_| rng.gen_range(-0.5..0.5)),
                w2: Array1::from_shape_fn(h, |_| rng.gen_range(-1.0..1.0)),
                b2: rng.gen_range(-0.5..0.5),
            }
        };
        // Skip points where the largest quintile bias is nearly tied.
        let preds = params.predict_all(x.view());
        let mut sq: Vec<f64> =
            sample_quintile_bias(&preds, &y, &cuts).map_err(|e| e.to_string())?.iter().flatten().map(|b| b * b).collect();
        sq.sort_by(|a, b| b.total_cmp(a));
        if sq[0] - sq[1] < 1e-2 {
            continue;
        }
        let (_, grad) = loss_and_gradient(&params, x.view(), &y, &cuts, &cfg).map_err(|e| e.to_string())?;
        let flat = params.flatten();
        // Large enough that rounding in a loss of order 10 stays below the tolerance.
        let h = 1e-5;
        for k in 0..flat.len() {
            let eval = |d: f64| {
                let mut f = flat.clone();
                f[k] += d;
                loss_and_gradient(&params.with_flat(&f), x.view(), &y, &cuts, &cfg).map(|r| r.0.total)
            };
            let numeric = (eval(h).map_err(|e| e.to_string())? - eval(-h).map_err(|e| e.to_string())?) / (2.0 * h);
            worst = worst.max((grad[k] - numeric).abs() / grad[k].abs().max(numeric.abs()).max(1e-3));
        }
        checked += 1;
    }
    ensure(worst < 1e-5, format!("max relative error {worst:.2e} over 20 points"))
}

fn c9_kfold() -> Outcome {
    let scn = SimScenario { n_units: 300, n_periods: 11, noise_sd: 0.4, seed: 4, treat_share: 0.1, ..Default::default() };
    let sim = generate_panel::<f64>(&scn, 0).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["dd", "mc", "scen"] {
        let est = Estimator::from_name(name).map_err(|e| e.to_string())?;
        let r = kfold_control_cv(&sim.panel, 10, &est, None).map_err(|e| e.to_string())?;
        let worst = r.mean_difference.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        ok &= worst < 0.01;
        parts.push(format!("{name} {worst:.1e}"));
    }
    ensure(ok, format!("max per-year |mean diff|: {}", parts.join(", ")))
}

fn c10_country_bootstrap() -> Outcome {
    let mc = Estimator::from_name("mc").map_err(|e| e.to_string())?;
    let cfg = BootstrapConfig { reps: 100, seed: 7, ..Default::default() };
    let run = |scn: CountryScenario| -> Result<_, String> {
        let (skeleton, ens) = scn.generate::<f64>().map_err(|e| e.to_string())?;
        bootstrap_ate(&ens, &skeleton, &mc, &cfg).map_err(|e| e.to_string())
    };
    let big = run(CountryScenario::default())?;
    let small = run(CountryScenario { n_control: 888, n_treated: 76, ..Default::default() })?;
    let (_, lo, hi) = big.headline();
    let (_, slo, shi) = small.headline();
    let path = ate_timepath(&big);
    let monotone = path.windows(2).all(|w| w[1].mean > w[0].mean);
    let means: Vec<String> = path.iter().map(|r| format!("{:.3}", r.mean)).collect();
    ensure(
        lo <= 0.19 && 0.19 <= hi && hi - lo < shi - slo && monotone,
        format!(
            "ci ({lo:.3}, {hi:.3}) width {:.3} vs {:.3}; timepath {}",
            hi - lo,
            shi - slo,
            means.join(" ")
        ),
    )
}

fn c11_pretrend_size() -> Outcome {
    let scn = SimScenario { seed: 13, ..Default::default() };
    let r = simulate_pretrend_rejection(&scn, 1000).map_err(|e| e.to_string())?;
    ensure((r.reject_95 - 0.05).abs() <= 0.02, format!("rejection rate {:.3} at 95%, {:.3} at 90%", r.reject_95, r.reject_90))
}

fn c12_wealth_index() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let (h, a) = (500, 8);
    let latent: Vec<f64> = (0..h).map(|_| noise.sample(&mut rng)).collect();
    let scores = Array2::from_shape_fn((h, a), |(i, j)| {
        let z = latent[i] + noise.sample(&mut rng);
        if j % 2 == 0 {
            f64::from(z > 0.0)
        } else {
            (z + 3.0).clamp(1.0, 5.0).round()
        }
    });
    let table = AssetTable {
        household_ids: (0..h).map(|i| format!("h{i}")).collect(),
        cluster_ids: (0..h).map(|i| format!("c{}", i % 25)).collect(),
        years: vec![2015; h],
        asset_names: (0..a).map(|j| format!("asset{j}")).collect(),
        scores,
    };
    let idx = build_index(&table, &[]).map_err(|e| e.to_string())?;
    let n = idx.household.len() as f64;
    let mean = idx.household.sum() / n;
    let sd = (idx.household.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    ensure(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, format!("mean {mean:.1e}, sd - 1 {:.1e}", sd - 1.0))
}

/// Runs every subcommand three times (1 thread, 4 threads, 4 threads again)
/// and compares stdout and every output file byte for byte.
fn c13_cli_reruns() -> Outcome {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let write = |name: &str, body: String| std::fs::write(root.join(name), body).map_err(|e| e.to_string());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut assets = String::from("household_id,cluster_id,year,has_electricity,has_radio,rooms,floor\n");
    for h in 0..60 {
        let w: f64 = rng.gen();
        let b = |rng: &mut ChaCha8Rng| u8::from(rng.gen::<f64>() < w);
        assets.push_str(&format!(
            "h{h},c{},{},{},{},{},{}\n",
            h % 6,
            2014 + h % 2,
            b(&mut rng),
            b(&mut rng),
            1 + (w * 4.0) as u32,
            b(&mut rng)
        ));
    }
    write("assets.csv", assets)?;
    let mut units = String::from("unit_id,lon,lat,density\n");
    for k in 0..40 {
        units.push_str(&format!("u{k},{},{},{}\n", rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 0.1, rng.gen::<f64>() * 500.0));
    }
    write("units.csv", units)?;
    write(
        "grid.geojson",
        r#"{"type":"FeatureCollection","features":[
{"type":"Feature","properties":{"vintage":2011},"geometry":{"type":"LineString","coordinates":[[0,0],[1,0.05]]}},
{"type":"Feature","properties":{"vintage":2009},"geometry":{"type":"LineString","coordinates":[[2,0],[3,0.02]]}}]}"#
            .into(),
    )?;
    let path = |n: &str| root.join(n).to_string_lossy().into_owned();
    let commands: Vec<Vec<String>> = [
        vec!["index", "--input", &path("assets.csv"), "--exclude", "floor"],
        vec!["estimate", "--demo", "--estimator", "mc", "--reps", "10"],
        vec!["estimate", "--demo", "--estimator", "scen", "--reps", "0"],
        vec!["validate", "--demo", "--folds", "3", "--placebo-runs", "3"],
        vec!["simulate", "--reps", "3", "--rates", "0,0.25", "--periods", "8", "--size-reps", "40"],
        vec!["sweep-loss", "--lambda-b", "0,1,5", "--epochs", "5", "--train-n", "500"],
        vec!["assign", "--units", &path("units.csv"), "--grid", &path("grid.geojson")],
    ]
    .iter()
    .map(|c| c.iter().map(|s| s.to_string()).collect())
    .collect();

    let snapshot = |dir: &std::path::Path| -> Result<Vec<(String, Vec<u8>)>, String> {
        let mut files = Vec::new();
        for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            files.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).map_err(|e| e.to_string())?));
        }
        files.sort();
        Ok(files)
    };
    let mut n_files = 0;
    for (k, cmd) in commands.iter().enumerate() {
        let mut reference = None;
        for (run, threads) in ["1", "4", "4"].iter().enumerate() {
            let out = root.join(format!("run{k}_{run}"));
            let mut args = vec!["wealth-causal".to_string(), "--seed".into(), "21".into(), "--threads".into(), threads.to_string()];
            args.extend(["--out".to_string(), out.to_string_lossy().into_owned()]);
            args.extend(cmd.iter().cloned());
            let (code, stdout) = wealth_causal_cli::run_captured(&args);
            if code != 0 {
                return Err(format!("`{}` exited with {code}", cmd.join(" ")));
            }
            let files = snapshot(&out)?;
            match &reference {
                None => {
                    n_files += files.len();
                    reference = Some((stdout, files));
                }
                Some((s0, f0)) => {
                    if *s0 != stdout {
                        return Err(format!("`{}`: stdout differs on run {run}", cmd[0]));
                    }
                    if *f0 != files {
                        let bad: Vec<&str> = f0
                            .iter()
                            .filter(|(n, b)| !files.iter().any(|(m, c)| m == n && c == b))
                            .map(|(n, _)| n.as_str())
                            .collect();
                        return Err(format!("`{}`: files differ on run {run}: {bad:?}", cmd[0]));
                    }
                }
            }
        }
    }
    Ok(format!("{} commands x 3 runs (threads 1, 4, 4), {n_files} files identical", commands.len()))
}

fn main() {
    let criteria: Vec<(&str, &str, u64, fn() -> Outcome)> = vec![
        ("1", "DD affine invariance", 5, c1_affine_invariance),
        ("2", "TWFE equals 2x2 group means", 1, c2_two_by_two),
        ("3", "soft-impute identity, monotone objective, low-rank recovery", 30, c3_soft_impute),
        ("4", "SC-EN orthonormal closed form", 5, c4_orthonormal_scen),
        ("5", "pre-trend bias of DD and MC", 120, c5_pretrend_bias),
        ("6", "Berkson attenuation", 120, c6_berkson),
        ("7", "bias penalty moves slope to one", 120, c7_bias_penalty),
        ("8", "loss gradient vs central differences", 5, c8_gradient),
        ("9", "k-fold control CV", 60, c9_kfold),
        ("10", "country bootstrap", 600, c10_country_bootstrap),
        ("11", "pre-trend test size", 60, c11_pretrend_size),
        ("12", "wealth index standardization", 5, c12_wealth_index),
        ("13", "CLI byte-identical reruns", 300, c13_cli_reruns),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {id:>2} {name}: {detail} [{:.2}s / {budget}s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
