use std::collections::BTreeMap;
use std::fs;

use apsel_core::experiment::{
    self, aggregate, DatasetSource, ExperimentConfig, Manifest, Method, SweepAxis, SweepParameter,
};
use apsel_core::localize::LocalizationReport;
use apsel_core::synth::SyntheticConfig;
use apsel_core::thread_pool_with;

fn small_config(aps: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        dataset: DatasetSource::Synthetic(SyntheticConfig {
            samples: 1200,
            access_points: aps,
            reference_points: 90,
            seed: 3,
            ..Default::default()
        }),
        k: 5,
        trials: 2,
        samplers: vec![Method::Sa, Method::Sqa, Method::AllAps],
        ..Default::default()
    };
    c.anneal.num_reads = 24;
    c.anneal.num_sweeps = 60;
    c
}

#[test]
fn aggregates_recompute_from_written_artifacts() {
    let cfg = small_config(30);
    let outcome = experiment::run(&cfg).unwrap();
    assert_eq!(outcome.artifacts.len(), 2 * 3);
    let dir = tempfile::tempdir().unwrap();
    let manifest = experiment::write_outputs(&outcome, dir.path()).unwrap();

    // Every hashed artifact is on disk with the recorded digest.
    for (rel, digest) in &manifest.artifacts {
        let bytes = fs::read(dir.path().join(rel)).unwrap();
        assert_eq!(&experiment::sha256_hex(&bytes), digest, "{rel}");
    }
    for rel in &manifest.volatile {
        assert!(dir.path().join(rel).exists(), "{rel}");
    }
    let on_disk: Manifest =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
    assert_eq!(manifest.seeds, vec![cfg.seed, cfg.seed + 1]);

    // Mean error per method, rebuilt from the per-trial localization files.
    let mut by_method: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for method in ["sa", "sqa", "all-aps"] {
        for trial in 0..2 {
            let path = dir.path().join(format!("localization_{method}_{trial}.json"));
            let r: LocalizationReport = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
            let mean = r.per_query_error_m.iter().sum::<f64>() / r.per_query_error_m.len() as f64;
            assert!((mean - r.mean_error_m).abs() < 1e-9);
            by_method.entry(method.into()).or_default().push(r.mean_error_m);
        }
        assert!(dir.path().join(format!("selection_{method}_0.json")).exists() || method == "all-aps");
    }
    let csv = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, experiment::AGGREGATE_COLUMNS);
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let v = &by_method[f[col("method")]];
        let want = v.iter().sum::<f64>() / v.len() as f64;
        let got: f64 = f[col("mean_error_m_mean")].parse().unwrap();
        assert!((got - want).abs() < 1e-9 * (1.0 + want), "{line}");
    }

    let records: Vec<_> = outcome.records().cloned().collect();
    assert_eq!(aggregate(&records, &|_| cfg.k), outcome.aggregates);
}

#[test]
fn reruns_and_thread_counts_reproduce_every_artifact() {
    let cfg = small_config(24);
    let manifest = |threads: usize| {
        thread_pool_with(threads).unwrap().install(|| {
            let dir = tempfile::tempdir().unwrap();
            let outcome = experiment::run(&cfg).unwrap();
            let m = experiment::write_outputs(&outcome, dir.path()).unwrap();
            let samples: Vec<_> = outcome.artifacts.iter().map(|a| a.samples.as_ref().map(|s| s.rows.clone())).collect();
            (m.artifacts, samples)
        })
    };
    let a = manifest(1);
    assert_eq!(a, manifest(1));
    assert_eq!(a, manifest(4));
}

#[test]
fn exact_reference_below_enumeration_limit() {
    let mut cfg = small_config(16);
    cfg.samplers = vec![Method::Exact, Method::Sa];
    cfg.trials = 1;
    let outcome = experiment::run(&cfg).unwrap();
    let exact = outcome.record(None, 0, Method::Exact).unwrap();
    let sa = outcome.record(None, 0, Method::Sa).unwrap();
    assert_eq!(exact.reference_energy, exact.best_energy);
    assert_eq!(sa.reference_energy, exact.best_energy);
    assert_eq!(exact.p_success, Some(1.0));
    assert!(sa.best_energy.unwrap() >= exact.best_energy.unwrap() - 1e-9);
}

#[test]
fn sampler_sweep_points_share_one_reference() {
    let mut cfg = small_config(40);
    cfg.samplers = vec![Method::Sa];
    cfg.trials = 1;
    cfg.sweep = Some(SweepAxis {
        parameter: SweepParameter::Sweeps,
        values: vec!["2".into(), "200".into()],
    });
    let outcome = experiment::sweep(&cfg).unwrap();
    let short = outcome.record(Some("2"), 0, Method::Sa).unwrap();
    let long = outcome.record(Some("200"), 0, Method::Sa).unwrap();
    let best = short.best_energy.unwrap().min(long.best_energy.unwrap());
    assert_eq!(short.reference_energy, Some(best));
    assert_eq!(long.reference_energy, Some(best));

    // Different penalties are different problems with their own reference.
    cfg.sweep = Some(SweepAxis {
        parameter: SweepParameter::Eta,
        values: vec!["1".into(), "4".into()],
    });
    let outcome = experiment::sweep(&cfg).unwrap();
    for v in ["1", "4"] {
        let r = outcome.record(Some(v), 0, Method::Sa).unwrap();
        assert_eq!(r.reference_energy, r.best_energy);
    }
}

#[test]
fn budget_above_ap_count_is_a_config_error() {
    let mut cfg = small_config(10);
    cfg.k = 11;
    let e = experiment::run(&cfg).unwrap_err();
    assert_eq!(e.kind(), apsel_core::ErrorKind::Config);
}
