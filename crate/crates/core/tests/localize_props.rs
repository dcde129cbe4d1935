mod common;

use apsel_core::dataset::{self, FingerprintDataset};
use apsel_core::localize::{self, error_3d, LocalizerConfig, Position};
use common::{toy_dataset, ND};
use proptest::prelude::*;

fn naive_predict(train: &FingerprintDataset, q: &[f64], subset: &[usize], k: usize) -> Position {
    let mut d: Vec<(f64, usize)> = (0..train.m())
        .map(|s| {
            let dist = subset.iter().map(|&a| (train.rss(s, a) - q[a]).powi(2)).sum::<f64>();
            (dist, s)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nb = &d[..k];
    let lat = nb.iter().map(|&(_, i)| train.latitude()[i]).sum::<f64>() / k as f64;
    let lon = nb.iter().map(|&(_, i)| train.longitude()[i]).sum::<f64>() / k as f64;
    let mut votes: Vec<(u32, usize, usize)> = Vec::new();
    for (rank, &(_, i)) in nb.iter().enumerate() {
        let f = train.floor()[i];
        match votes.iter_mut().find(|v| v.0 == f) {
            Some(v) => v.1 += 1,
            None => votes.push((f, 1, rank)),
        }
    }
    let floor = votes.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2))).unwrap().0;
    Position { lat, lon, floor }
}

fn with_constant_column(d: &FingerprintDataset, value: f64) -> FingerprintDataset {
    let n = d.n() + 1;
    let rss = (0..d.m())
        .flat_map(|s| d.row(s).iter().copied().chain(std::iter::once(value)).collect::<Vec<_>>())
        .collect();
    let mut ids = d.ap_ids().to_vec();
    ids.push(format!("WAP{n:03}"));
    FingerprintDataset::new(
        rss,
        ids,
        d.latitude().to_vec(),
        d.longitude().to_vec(),
        d.floor().to_vec(),
        ND,
    )
    .unwrap()
}

#[test]
fn toy_set_matches_full_scan() {
    let d = toy_dataset(5, 4, 3);
    let all: Vec<usize> = (0..4).collect();
    let queries = toy_dataset(6, 4, 11);
    for k in 1..=5 {
        let cfg = LocalizerConfig { k_neighbors: k, ..Default::default() };
        for s in 0..queries.m() {
            let q = queries.row(s);
            let got = localize::predict(&d, q, &all, &cfg).unwrap();
            let want = naive_predict(&d, q, &all, k);
            assert_eq!(got.floor, want.floor);
            assert!((got.lat - want.lat).abs() < 1e-12 && (got.lon - want.lon).abs() < 1e-12);
        }
    }
}

#[test]
fn self_matching_gives_zero_error() {
    let d = toy_dataset(40, 6, 5).normalize_labels().unwrap();
    let s = dataset::split(&d, 0.3, 2).unwrap();
    let same = dataset::DatasetSplit { test: s.train.clone(), test_indices: s.train_indices.clone(), ..s };
    let cfg = LocalizerConfig { k_neighbors: 1, ..Default::default() };
    // Duplicate fingerprints could make a different sample the nearest, so
    // only check when every training row is unique.
    let rows: std::collections::HashSet<Vec<u64>> = (0..same.train.m())
        .map(|i| same.train.row(i).iter().map(|v| v.to_bits()).collect())
        .collect();
    assert_eq!(rows.len(), same.train.m());
    let r = localize::evaluate(&same, &(0..6).collect::<Vec<_>>(), &cfg).unwrap();
    assert!(r.mean_error_m.abs() < 1e-9, "{}", r.mean_error_m);
    assert_eq!(r.floor_accuracy, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_naive_scan(m in 3usize..40, n in 1usize..10, seed in any::<u64>(), k in 1usize..4) {
        let d = toy_dataset(m, n, seed);
        let q = toy_dataset(3, n, seed ^ 0x55);
        prop_assume!(k <= m);
        let subset: Vec<usize> = (0..n).filter(|i| i % 2 == 0 || n == 1).collect();
        let cfg = LocalizerConfig { k_neighbors: k, ..Default::default() };
        for s in 0..q.m() {
            let got = localize::predict(&d, q.row(s), &subset, &cfg).unwrap();
            let want = naive_predict(&d, q.row(s), &subset, k);
            prop_assert_eq!(got.floor, want.floor);
            prop_assert!((got.lat - want.lat).abs() < 1e-9);
            prop_assert!((got.lon - want.lon).abs() < 1e-9);
        }
    }

    #[test]
    fn subset_order_does_not_matter(m in 3usize..40, n in 2usize..10, seed in any::<u64>(), rot in 0usize..10) {
        let d = toy_dataset(m, n, seed);
        let q = toy_dataset(4, n, seed.wrapping_add(1));
        let subset: Vec<usize> = (0..n).collect();
        let mut permuted = subset.clone();
        permuted.rotate_left(rot % n);
        permuted.reverse();
        let cfg = LocalizerConfig::default();
        prop_assume!(cfg.k_neighbors <= m);
        for s in 0..q.m() {
            let a = localize::predict(&d, q.row(s), &subset, &cfg).unwrap();
            let b = localize::predict(&d, q.row(s), &permuted, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn constant_ap_changes_nothing(m in 3usize..40, n in 1usize..8, seed in any::<u64>(), c in -100i32..-20) {
        let d = toy_dataset(m, n, seed);
        let q = toy_dataset(4, n, seed.wrapping_mul(3));
        let extended = with_constant_column(&d, c as f64);
        let cfg = LocalizerConfig::default();
        prop_assume!(cfg.k_neighbors <= m);
        let base: Vec<usize> = (0..n).collect();
        let more: Vec<usize> = (0..=n).collect();
        for s in 0..q.m() {
            let mut row = q.row(s).to_vec();
            let a = localize::predict(&d, &row, &base, &cfg).unwrap();
            row.push(-60.0);
            let b = localize::predict(&extended, &row, &more, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn error_3d_is_a_metric(
        p in (-50.0f64..50.0, -50.0f64..50.0, 0u32..5),
        q in (-50.0f64..50.0, -50.0f64..50.0, 0u32..5),
        r in (-50.0f64..50.0, -50.0f64..50.0, 0u32..5),
        h in 0.5f64..5.0,
    ) {
        let pos = |t: (f64, f64, u32)| Position { lat: t.0, lon: t.1, floor: t.2 };
        let (p, q, r) = (pos(p), pos(q), pos(r));
        prop_assert_eq!(error_3d(&p, &p, h), 0.0);
        prop_assert_eq!(error_3d(&p, &q, h), error_3d(&q, &p, h));
        if p != q {
            prop_assert!(error_3d(&p, &q, h) > 0.0);
        }
        prop_assert!(error_3d(&p, &r, h) <= error_3d(&p, &q, h) + error_3d(&q, &r, h) + 1e-9);
    }
}
