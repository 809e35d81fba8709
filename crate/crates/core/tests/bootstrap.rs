use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wealth_causal::bootstrap::{
    ate_timepath, bootstrap_ate, percentile_interval, write_draws, write_summary, BootstrapConfig, CountryScenario,
};
use wealth_causal::{Estimator, PanelMatrix, SplitEnsemble};

fn small_country(seed: u64) -> (PanelMatrix, SplitEnsemble) {
    CountryScenario { n_control: 80, n_treated: 20, seed, ..Default::default() }.generate().unwrap()
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn noiseless_single_split_has_degenerate_interval() {
    let (n, t, start) = (12, 6, 3);
    let effect = 0.37;
    let y = Array2::from_shape_fn((n, t), |(i, s)| {
        let base = 0.1 * i as f64 + 0.05 * s as f64;
        if i < 4 && s >= start { base + effect } else { base }
    });
    let mut skeleton = PanelMatrix::from_values(y.clone());
    for i in 0..4 {
        skeleton.set_treated(i, start);
    }
    let ens = SplitEnsemble::new(vec![y]).unwrap();
    let s = bootstrap_ate(&ens, &skeleton, &Estimator::Dd, &BootstrapConfig { reps: 25, seed: 3, ..Default::default() }).unwrap();
    for d in s.draws.iter().flatten() {
        assert!((d - effect).abs() < 1e-10);
    }
    for k in 0..s.periods.len() {
        assert!((s.hi[k] - s.lo[k]).abs() < 1e-10);
    }
}

#[test]
fn diagnostic_mode_equals_direct_estimate() {
    let (skeleton, ens) = small_country(1);
    let one = SplitEnsemble::new(vec![ens.splits()[2].clone()]).unwrap();
    let mut panel = skeleton.clone();
    panel.values = one.splits()[0].clone();
    let cfg = BootstrapConfig { reps: 3, resample: false, ..Default::default() };
    for name in ["dd", "scen", "mc"] {
        let est = Estimator::from_name(name).unwrap();
        let s = bootstrap_ate(&one, &skeleton, &est, &cfg).unwrap();
        let (fixed, _) = est.resolved(&panel).unwrap();
        let direct = fixed.estimate(&panel).unwrap();
        for (k, &period) in s.periods.iter().enumerate() {
            let want = direct.effects.period_ate(period).unwrap();
            for d in &s.draws {
                assert_eq!(d[k], want, "{name}");
            }
        }
    }
}

#[test]
fn interval_is_recoverable_from_the_draw_file() {
    let (skeleton, ens) = small_country(2);
    let s = bootstrap_ate(&ens, &skeleton, &Estimator::from_name("mc").unwrap(), &BootstrapConfig { reps: 40, seed: 9, ..Default::default() }).unwrap();
    let mut buf = Vec::new();
    write_draws(&mut buf, &s).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let mut by_year: std::collections::BTreeMap<i32, Vec<f64>> = Default::default();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        by_year.entry(rec[1].parse().unwrap()).or_default().push(rec[2].parse().unwrap());
    }
    assert_eq!(by_year.len(), s.periods.len());
    for (k, year) in s.period_labels.iter().enumerate() {
        let draws = &by_year[year];
        assert_eq!(draws.len(), 40);
        let (lo, hi) = percentile_interval(draws);
        assert_eq!(lo.to_bits(), s.lo[k].to_bits());
        assert_eq!(hi.to_bits(), s.hi[k].to_bits());
        assert!(s.lo[k] <= s.mean[k] && s.mean[k] <= s.hi[k]);
        assert!(draws.contains(&s.lo[k]) && draws.contains(&s.hi[k]));
    }
    let mut summary = Vec::new();
    write_summary(&mut summary, &s).unwrap();
    assert!(String::from_utf8(summary).unwrap().starts_with("year,mean,lo95,hi95\n"));
}

#[test]
fn replicates_do_not_depend_on_thread_count() {
    let (skeleton, ens) = small_country(3);
    let cfg = BootstrapConfig { reps: 16, seed: 4, ..Default::default() };
    let est = Estimator::from_name("scen").unwrap();
    let a = in_pool(1, || bootstrap_ate(&ens, &skeleton, &est, &cfg).unwrap());
    let b = in_pool(4, || bootstrap_ate(&ens, &skeleton, &est, &cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn interval_orders_around_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.gen_range(1..150);
        let draws: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (lo, hi) = percentile_interval(&draws);
        assert!(lo <= hi);
        let below = draws.iter().filter(|&&d| d < lo).count() as f64;
        assert!(below <= 0.025 * n as f64);
    }
}

#[test]
fn ramping_effect_gives_increasing_path_and_constant_effect_a_flat_one() {
    let ramp = CountryScenario { n_control: 300, n_treated: 60, seed: 6, ..Default::default() };
    let (sk, ens) = ramp.generate().unwrap();
    let s = bootstrap_ate(&ens, &sk, &Estimator::Dd, &BootstrapConfig { reps: 30, seed: 1, ..Default::default() }).unwrap();
    let path = ate_timepath(&s);
    assert_eq!(path.iter().map(|r| r.offset).collect::<Vec<_>>(), vec![3, 4, 5, 6]);
    assert_eq!(path[0].year, 2013);
    assert!(path.windows(2).all(|w| w[1].mean > w[0].mean));

    // Two post years keep both rows, the later one carrying the full effect.
    let short = CountryScenario { adoption_year: 2015, ..ramp };
    let (sk, ens) = short.generate().unwrap();
    let s = bootstrap_ate(&ens, &sk, &Estimator::Dd, &BootstrapConfig { reps: 30, seed: 1, ..Default::default() }).unwrap();
    let path = ate_timepath(&s);
    assert_eq!(path.iter().map(|r| r.year).collect::<Vec<_>>(), vec![2015, 2016]);
    assert!(path[1].lo <= 0.19 && 0.19 <= path[1].hi);
}

#[test]
fn failing_replicates_abort_after_the_retry_cap() {
    // Only one control is observed after adoption, so resampled panels without
    // it have no post-period control cell and the replicate cannot be estimated.
    let y = Array2::from_shape_fn((6, 4), |(i, s)| (i + s) as f64);
    let mut skeleton = PanelMatrix::from_values(y.clone());
    skeleton.set_treated(0, 2);
    skeleton.set_treated(1, 2);
    for i in 3..6 {
        skeleton.observed[[i, 2]] = false;
        skeleton.observed[[i, 3]] = false;
    }
    let ens = SplitEnsemble::new(vec![y]).unwrap();
    let cfg = BootstrapConfig { reps: 40, retry_cap: 1, seed: 2, ..Default::default() };
    let err = bootstrap_ate(&ens, &skeleton, &Estimator::Dd, &cfg).unwrap_err();
    assert!(matches!(err, wealth_causal::Error::BootstrapAborted { attempts: 1, .. }), "{err}");
}
