mod common;

use apsel_core::anneal::{self, AnnealConfig, SampleSet, Sampler};
use apsel_core::qubo::{self, brute_force, QuboModel};
use apsel_core::thread_pool_with;
use common::random_instance;

const ALPHAS: [f64; 3] = [0.5, 0.8, 1.0];
const ETAS: [f64; 2] = [1.0, 2.0];

fn energies(s: &SampleSet) -> Vec<f64> {
    s.rows
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.energy, r.occurrences))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_err(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64 / v.len() as f64).sqrt()
}

#[test]
fn reported_energies_revalidate_and_counts_add_up() {
    for seed in 0..6 {
        let inst = random_instance(16, seed, &ALPHAS, &ETAS);
        for sampler in [Sampler::Sa, Sampler::Sqa] {
            let cfg = AnnealConfig { num_reads: 64, num_sweeps: 50, seed, ..Default::default() };
            let s = anneal::sample(&inst.model, sampler, &cfg).unwrap();
            assert_eq!(s.num_reads(), 64);
            for r in &s.rows {
                assert!((inst.model.energy(&r.x).unwrap() - r.energy).abs() < 1e-9);
            }
            assert!(s.rows.windows(2).all(|w| (w[0].energy, &w[0].x) < (w[1].energy, &w[1].x)));
        }
    }
}

#[test]
fn reproducible_across_runs_and_thread_counts() {
    let inst = random_instance(40, 7, &ALPHAS, &ETAS);
    for sampler in [Sampler::Sa, Sampler::Sqa] {
        let cfg = AnnealConfig { num_reads: 40, num_sweeps: 80, seed: 99, ..Default::default() };
        let run = |threads| {
            thread_pool_with(threads)
                .unwrap()
                .install(|| anneal::sample(&inst.model, sampler, &cfg).unwrap())
                .rows
        };
        let a = run(1);
        assert_eq!(a, run(1));
        assert_eq!(a, run(3));
        let other = AnnealConfig { seed: 100, ..cfg };
        assert_ne!(a, anneal::sample(&inst.model, sampler, &other).unwrap().rows);
    }
}

#[test]
fn longer_anneals_do_not_hurt_on_average() {
    let inst = random_instance(50, 2024, &[0.8], &[2.0]);
    for sampler in [Sampler::Sa, Sampler::Sqa] {
        let best = |sweeps: usize| -> f64 {
            let per_trial: Vec<f64> = (0..20)
                .map(|seed| {
                    let cfg = AnnealConfig { num_reads: 20, num_sweeps: sweeps, seed, ..Default::default() };
                    anneal::sample(&inst.model, sampler, &cfg).unwrap().best().energy
                })
                .collect();
            mean(&per_trial)
        };
        let (short, long) = (best(10), best(1000));
        assert!(long <= short, "{sampler}: {long} > {short}");
    }
}

#[test]
fn single_hot_sweep_is_worse_than_annealing() {
    let inst = random_instance(30, 5, &[0.5], &[2.0]);
    let full = AnnealConfig { num_reads: 400, num_sweeps: 300, seed: 1, ..Default::default() };
    let random = AnnealConfig { num_sweeps: 1, beta: 0.1, beta_hot: 0.1, ..full };
    let e_full = energies(&anneal::sample(&inst.model, Sampler::Sa, &full).unwrap());
    let e_rand = energies(&anneal::sample(&inst.model, Sampler::Sa, &random).unwrap());
    let gap = mean(&e_rand) - mean(&e_full);
    let se = (std_err(&e_rand).powi(2) + std_err(&e_full).powi(2)).sqrt();
    assert!(gap > 5.0 * se, "gap {gap}, se {se}");
}

#[test]
fn sqa_keeps_up_with_sa_on_small_instances() {
    let (mut sqa_hits, mut sa_hits, mut sqa_only, mut sa_only) = (0, 0, 0, 0);
    for seed in 0..20u64 {
        let inst = random_instance(10, 1000 + seed, &[0.0, 0.5, 0.8, 1.0], &[1.0, 2.0, 8.0]);
        let ground = brute_force(&inst.model).unwrap().energy;
        let cfg = AnnealConfig { num_reads: 100, num_sweeps: 200, seed, ..Default::default() };
        let hit = |s| anneal::sample(&inst.model, s, &cfg).unwrap().best().energy <= ground + 1e-9;
        let (a, b) = (hit(Sampler::Sqa), hit(Sampler::Sa));
        sqa_hits += a as usize;
        sa_hits += b as usize;
        sqa_only += (a && !b) as usize;
        sa_only += (b && !a) as usize;
    }
    // Two-sided sign test on the discordant pairs.
    let discordant = sqa_only + sa_only;
    let tail: f64 = (0..=sqa_only.min(sa_only))
        .map(|i| binomial(discordant, i) / 2f64.powi(discordant as i32))
        .sum();
    let p = (2.0 * tail).min(1.0);
    println!("sqa {sqa_hits}/20, sa {sa_hits}/20, sign test p = {p:.3}");
    assert!(sqa_hits >= sa_hits || p > 0.05);
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn strong_field_decouples_slices_into_independent_replicas() {
    // With a transverse field this large the slice coupling is negligible for the
    // whole anneal, so each slice is an independent Metropolis chain at beta / P
    // and the read-out is the best of P such chains.
    let inst = random_instance(12, 77, &[0.5], &[1.0]);
    let p = 4;
    let sqa = AnnealConfig {
        num_reads: 1500,
        num_sweeps: 30,
        beta: 4.0,
        gamma: 1e4,
        trotter_slices: p,
        seed: 3,
        ..Default::default()
    };
    assert!(anneal::trotter_coupling(sqa.beta, sqa.gamma * 0.01, p) < 1e-30);
    let sa = AnnealConfig { num_reads: 6000, beta: 1.0, beta_hot: 1.0, seed: 4, ..sqa };
    let e_sqa = energies(&anneal::sample(&inst.model, Sampler::Sqa, &sqa).unwrap());
    let e_sa = energies(&anneal::sample(&inst.model, Sampler::Sa, &sa).unwrap());
    // CDF of the minimum of P draws from the single-chain distribution.
    let cdf = |v: &[f64], e: f64| v.iter().filter(|&&x| x <= e + 1e-12).count() as f64 / v.len() as f64;
    let mut support: Vec<f64> = e_sqa.iter().chain(&e_sa).copied().collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    let ks = support
        .iter()
        .map(|&e| {
            let best_of_p = 1.0 - (1.0 - cdf(&e_sa, e)).powi(p as i32);
            (cdf(&e_sqa, e) - best_of_p).abs()
        })
        .fold(0.0, f64::max);
    // 99.9% two-sample bound with n = 1500 against the (noisier) derived CDF.
    let bound = 1.95 * (1.0 / 1500.0 + p as f64 / 6000.0).sqrt();
    assert!(ks < bound, "ks {ks} >= {bound}");
}

#[test]
fn exact_sampler_matches_brute_force() {
    let inst = random_instance(12, 8, &ALPHAS, &ETAS);
    let exact = brute_force(&inst.model).unwrap();
    let sel = anneal::select(&inst.model, Sampler::Exact, &AnnealConfig::default()).unwrap();
    let picked: Vec<usize> = (0..12).filter(|&i| exact.x[i]).collect();
    assert_eq!(sel.selected, picked);
    assert_eq!(sel.best_energy, exact.energy);
    assert_eq!(sel.achieved_k, picked.len());
}

#[test]
fn worked_instance_solved_by_sqa() {
    use apsel_core::analysis::{ImportanceVector, Metric, RedundancyMatrix};
    let imp = ImportanceVector::from_raw(Metric::Entropy, vec![1.0, 0.5, 0.0], Some(vec![true; 3]));
    let red = RedundancyMatrix::from_dense(
        3,
        vec![1.0, 0.8, 0.0, 0.8, 1.0, 0.0, 0.0, 0.0, 1.0],
        vec![true; 3],
    )
    .unwrap();
    let m = qubo::build(&imp, &red, 0.5, 2.0, 2).unwrap();
    let cfg = AnnealConfig { num_reads: 50, num_sweeps: 200, seed: 5, ..Default::default() };
    let sel = anneal::select(&m, Sampler::Sqa, &cfg).unwrap();
    assert_eq!(sel.selected, vec![0, 2]);
    assert!((sel.best_energy + 0.5).abs() < 1e-12);
}

#[test]
fn tts_grows_with_sweeps_once_every_read_succeeds() {
    let sample = |model: &QuboModel, sweeps| {
        let cfg = AnnealConfig { num_reads: 200, num_sweeps: sweeps, seed: 2, ..Default::default() };
        anneal::sample(model, Sampler::Sa, &cfg).unwrap()
    };
    // First instance where 100 sweeps already solve every read.
    let (inst, ground) = (0..50)
        .map(|seed| {
            let inst = random_instance(8, seed, &[0.8], &[2.0]);
            let ground = brute_force(&inst.model).unwrap().energy;
            (inst, ground)
        })
        .find(|(inst, ground)| sample(&inst.model, 100).success_probability(*ground) == 1.0)
        .expect("no easy instance");
    let short = sample(&inst.model, 100);
    let long = sample(&inst.model, 2000);
    assert_eq!(long.success_probability(ground), 1.0);
    let tts = |s| anneal::tts(s, ground, 0.99).unwrap().unwrap();
    assert!(tts(&long) > tts(&short));
}
