use bellspace_core::inequality::{chsh_01, evaluate_table, InequalityId};
use bellspace_core::models::{threshold_photon_lhv, Model, QuantumPairModel};
use bellspace_core::rational;
use bellspace_core::sim::{coincidence_filter, estimate, estimate_table, run_experiment, DetectionMode, RunConfig};
use bellspace_core::spaces::{Angle, Settings};
use bellspace_core::table::PAIRS;

const SIGMA: f64 = 3.0;

fn quantum(settings: Settings) -> Model {
    Model::Quantum(QuantumPairModel { settings })
}

#[test]
fn aligned_analyzers_agree_perfectly() {
    let s = Settings::new(Angle::from_degrees(0), Angle::from_degrees(45), Angle::from_degrees(0), Angle::from_degrees(90))
        .unwrap();
    let log = run_experiment(&quantum(s), &RunConfig::new(100_000, 21)).unwrap();
    let aligned: Vec<_> = log.rows.iter().filter(|r| r.alpha == 0 && r.beta == 0).collect();
    assert!(aligned.len() > 20_000);
    // P(A=B) is exactly 1 here, so the 3σ band has zero width.
    assert!(aligned.iter().all(|r| r.a == r.b));
}

#[test]
fn half_efficiency_keeps_a_quarter() {
    let mut cfg = RunConfig::new(200_000, 22);
    cfg.eta = 0.5;
    let log = run_experiment(&quantum(Settings::tsirelson()), &cfg).unwrap();
    let kept = coincidence_filter(&log).unwrap().rows.len() as f64;
    let n = log.rows.len() as f64;
    let se = (0.25 * 0.75 / n).sqrt();
    assert!((kept / n - 0.25).abs() <= SIGMA * se, "{}", kept / n);
}

#[test]
fn near_unit_efficiency_matches_analytic_table() {
    let mut cfg = RunConfig::new(400_000, 23);
    cfg.eta = 0.999;
    let model = quantum(Settings::tsirelson());
    let log = coincidence_filter(&run_experiment(&model, &cfg).unwrap()).unwrap();
    let est = estimate_table(&log).unwrap();
    let exact = model.table_f64();
    let se = est.stderr.unwrap();
    for (i, j) in PAIRS {
        assert!((est.p11[i][j] - exact.p11[i][j]).abs() <= SIGMA * se.p11[i][j]);
    }
    for k in 0..2 {
        assert!((est.pa[k] - 0.5).abs() <= SIGMA * se.pa[k]);
        assert!((est.pb[k] - 0.5).abs() <= SIGMA * se.pb[k]);
    }
}

#[test]
fn threshold_model_estimate_matches_exact_value() {
    let lhv = threshold_photon_lhv(360, Settings::tsirelson()).unwrap();
    let exact = rational::to_f64(&chsh_01(&lhv.table()).unwrap().exact_value().unwrap());
    let model = Model::Lhv(lhv);
    let log = run_experiment(&model, &RunConfig::new(1_000_000, 24)).unwrap();
    let r = evaluate_table(&estimate_table(&log).unwrap(), InequalityId::Two).unwrap();
    assert!((r.value - exact).abs() <= SIGMA * r.stderr.unwrap(), "{} vs {exact}", r.value);
    assert!(!r.violated);
    assert!((-1.0..=0.0).contains(&exact));
}

#[test]
fn no_signaling_in_data() {
    let models = [quantum(Settings::tsirelson()), Model::Lhv(threshold_photon_lhv(90, Settings::tsirelson()).unwrap())];
    for model in models {
        let e = estimate(&run_experiment(&model, &RunConfig::new(200_000, 25)).unwrap()).unwrap();
        for i in 0..2 {
            let (x, y) = (e.pa_given[i][0], e.pa_given[i][1]);
            assert!((x.p - y.p).abs() <= SIGMA * (x.stderr.powi(2) + y.stderr.powi(2)).sqrt());
            let (x, y) = (e.pb_given[0][i], e.pb_given[1][i]);
            assert!((x.p - y.p).abs() <= SIGMA * (x.stderr.powi(2) + y.stderr.powi(2)).sqrt());
        }
    }
}

#[test]
fn stderr_scales_as_inverse_sqrt() {
    let model = quantum(Settings::tsirelson());
    let se: Vec<f64> = [1_000u64, 10_000, 100_000]
        .iter()
        .map(|&n| estimate(&run_experiment(&model, &RunConfig::new(n, 26)).unwrap()).unwrap().p11[0][0].stderr)
        .collect();
    for w in se.windows(2) {
        let ratio = w[0] / w[1] / 10f64.sqrt();
        assert!((1.0 / 1.5..=1.5).contains(&ratio), "{ratio}");
    }
}

#[test]
fn conspiratorial_detection_breaks_fair_sampling() {
    let lhv = threshold_photon_lhv(360, Settings::tsirelson()).unwrap();
    let model = Model::Lhv(lhv);
    let mut cfg = RunConfig::new(200_000, 27);
    cfg.mode = DetectionMode::Conspiratorial;
    cfg.eta = 0.7;
    let all = run_experiment(&model, &cfg).unwrap();
    let kept = coincidence_filter(&all).unwrap();
    let r = evaluate_table(&estimate_table(&kept).unwrap(), InequalityId::Two).unwrap();
    assert!(r.violated, "{}", r.value);
    // The detection flags ignored, the same rows satisfy the bound.
    let r = evaluate_table(&estimate_table(&all).unwrap(), InequalityId::Two).unwrap();
    assert!(!r.violated, "{}", r.value);
}

#[test]
fn unit_efficiency_keeps_every_row() {
    let log = run_experiment(&quantum(Settings::tsirelson()), &RunConfig::new(10_000, 28)).unwrap();
    assert_eq!(coincidence_filter(&log).unwrap(), log);
}

#[test]
fn same_seed_same_log() {
    let cfg = RunConfig::new(5_000, 29);
    let a = run_experiment(&quantum(Settings::tsirelson()), &cfg).unwrap();
    let b = run_experiment(&quantum(Settings::tsirelson()), &cfg).unwrap();
    assert_eq!(a, b);
    let c = run_experiment(&quantum(Settings::tsirelson()), &RunConfig::new(5_000, 30)).unwrap();
    assert_ne!(a.rows, c.rows);
}
