//! Synthetic radio maps shaped like UJIIndoorLoc.
//!
//! Three multi-storey buildings, access points inside them plus a share of
//! overheard APs that are never detected, and RSS drawn from a log-distance
//! path-loss model with floor/wall attenuation, per-location shadowing and
//! per-sample noise. Readings below the detection floor become "not detected".
//! The output uses the same projected-meter coordinate frame as the real
//! dataset so the whole pipeline can run without it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FingerprintDataset, MIN_OBSERVABLE_DBM};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub samples: usize,
    pub access_points: usize,
    /// Fraction of APs placed far outside every building (never heard).
    pub unheard_fraction: f64,
    pub reference_points: usize,
    pub floor_height_m: f64,
    pub not_detected_value: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            samples: 21_048,
            access_points: 520,
            unheard_fraction: 0.1,
            reference_points: 930,
            floor_height_m: 3.0,
            not_detected_value: -105.0,
            seed: 20_140_101,
        }
    }
}

struct Building {
    x0: f64,
    y0: f64,
    width: f64,
    depth: f64,
    floors: u32,
}

const BUILDINGS: [Building; 3] = [
    Building {
        x0: 0.0,
        y0: 150.0,
        width: 110.0,
        depth: 70.0,
        floors: 4,
    },
    Building {
        x0: 130.0,
        y0: 80.0,
        width: 110.0,
        depth: 70.0,
        floors: 4,
    },
    Building {
        x0: 260.0,
        y0: 0.0,
        width: 120.0,
        depth: 80.0,
        floors: 5,
    },
];

// Origin of the projected frame, close to the real campus.
const LON0: f64 = -7691.0;
const LAT0: f64 = 4_864_746.0;

struct Emitter {
    building: Option<usize>,
    x: f64,
    y: f64,
    floor: u32,
    tx_dbm: f64,
    exponent: f64,
}

pub fn generate(cfg: &SyntheticConfig) -> Result<FingerprintDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.access_points;
    let n_unheard = ((n as f64) * cfg.unheard_fraction).round() as usize;
    let n_heard = n - n_unheard;

    let total_area: f64 = BUILDINGS.iter().map(|b| b.width * b.depth * b.floors as f64).sum();
    let pick_building = |rng: &mut ChaCha8Rng| -> usize {
        let mut u = rng.random::<f64>() * total_area;
        for (i, b) in BUILDINGS.iter().enumerate() {
            let a = b.width * b.depth * b.floors as f64;
            if u < a {
                return i;
            }
            u -= a;
        }
        BUILDINGS.len() - 1
    };

    let tx = Normal::new(-38.0, 5.0).expect("valid normal");
    let mut emitters = Vec::with_capacity(n);
    for _ in 0..n_heard {
        let bi = pick_building(&mut rng);
        let b = &BUILDINGS[bi];
        emitters.push(Emitter {
            building: Some(bi),
            x: b.x0 + rng.random::<f64>() * b.width,
            y: b.y0 + rng.random::<f64>() * b.depth,
            floor: rng.random_range(0..b.floors),
            tx_dbm: tx.sample(&mut rng),
            exponent: rng.random_range(2.6..3.6),
        });
    }
    for _ in 0..n_unheard {
        emitters.push(Emitter {
            building: None,
            x: 2000.0 + rng.random::<f64>() * 500.0,
            y: 2000.0 + rng.random::<f64>() * 500.0,
            floor: 0,
            tx_dbm: -60.0,
            exponent: 3.5,
        });
    }
    // Interleave so unheard APs are scattered across column ids like the real data.
    for i in (1..emitters.len()).rev() {
        let j = rng.random_range(0..=i);
        emitters.swap(i, j);
    }

    struct RefPoint {
        building: usize,
        x: f64,
        y: f64,
        floor: u32,
    }
    let rps: Vec<RefPoint> = (0..cfg.reference_points.max(1))
        .map(|_| {
            let bi = pick_building(&mut rng);
            let b = &BUILDINGS[bi];
            RefPoint {
                building: bi,
                x: b.x0 + rng.random::<f64>() * b.width,
                y: b.y0 + rng.random::<f64>() * b.depth,
                floor: rng.random_range(0..b.floors),
            }
        })
        .collect();

    // Static multipath per (reference point, AP).
    let shadow = Normal::new(0.0, 6.0).expect("valid normal");
    let mean_rss: Vec<f64> = rps
        .iter()
        .flat_map(|rp| {
            emitters
                .iter()
                .map(|e| {
                    let dz = (rp.floor as f64 - e.floor as f64) * cfg.floor_height_m;
                    let d = ((rp.x - e.x).powi(2) + (rp.y - e.y).powi(2) + dz * dz)
                        .sqrt()
                        .max(1.0);
                    let mut loss = 10.0 * e.exponent * d.log10();
                    loss += 14.0 * (rp.floor as f64 - e.floor as f64).abs();
                    if e.building != Some(rp.building) {
                        loss += 18.0;
                    }
                    e.tx_dbm - loss
                })
                .collect::<Vec<_>>()
        })
        .map(|v| v + shadow.sample(&mut rng))
        .collect();

    let noise = Normal::new(0.0, 3.5).expect("valid normal");
    let jitter = Normal::new(0.0, 1.5).expect("valid normal");
    let m = cfg.samples;
    let mut rss = Vec::with_capacity(m * n);
    let mut latitude = Vec::with_capacity(m);
    let mut longitude = Vec::with_capacity(m);
    let mut floor = Vec::with_capacity(m);
    for s in 0..m {
        // Every reference point is visited before any is repeated.
        let r = if s < rps.len() {
            s
        } else {
            rng.random_range(0..rps.len())
        };
        let rp = &rps[r];
        for a in 0..n {
            let v = mean_rss[r * n + a] + noise.sample(&mut rng);
            let dropped = rng.random::<f64>() < 0.03;
            let v = v.round();
            rss.push(if dropped || v < MIN_OBSERVABLE_DBM {
                cfg.not_detected_value
            } else {
                v.min(0.0)
            });
        }
        longitude.push(LON0 + rp.x + jitter.sample(&mut rng));
        latitude.push(LAT0 + rp.y + jitter.sample(&mut rng));
        floor.push(rp.floor);
    }
    let ap_ids = (1..=n).map(|i| format!("WAP{i:03}")).collect();
    FingerprintDataset::new(rss, ap_ids, latitude, longitude, floor, cfg.not_detected_value)
}
