//! Regenerates the synthetic stand-in datasets shipped under data/.
//!
//! The two public chronic-disease benchmarks this toolkit targets cannot be
//! redistributed here, so the repo ships generated tables with the same
//! shape (sample count, feature count, class balance, value ranges) and a
//! comparable difficulty level. The draw is fully deterministic; rerunning
//! this tool reproduces the shipped files byte for byte. See data/README.md
//! for how to swap in the original UCI files.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

const PID_SEED: u64 = 0x7015_2a11;
const HEART_SEED: u64 = 0x4ea1_7000;

struct Sample {
    latent: [f64; 4],
    score: f64,
}

/// Draw latent factors and a nonlinear risk score per sample, then assign
/// exactly `positives` positive labels to the highest scores.
fn draw_population(n: usize, positives: usize, seed: u64) -> (Vec<Sample>, Vec<usize>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let u: [f64; 4] = [
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        ];
        let score = 1.0 * u[0] + 0.8 * u[1] + 0.55 * u[0] * u[1] + 0.45 * (u[1] * u[1] - 1.0)
            + 0.5 * (1.4 * u[2]).sin();
        samples.push(Sample { latent: u, score });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[b].score.partial_cmp(&samples[a].score).unwrap());
    let mut labels = vec![0usize; n];
    for &i in order.iter().take(positives) {
        labels[i] = 1;
    }
    (samples, labels)
}

struct FeatureSpec {
    /// Latent mixing weights (u1..u4).
    mix: [f64; 4],
    /// Independent noise level relative to the mixed signal.
    noise: f64,
    /// Output transform: shift + scale, then an optional shaping rule.
    shift: f64,
    scale: f64,
    kind: FeatureKind,
}

enum FeatureKind {
    Continuous { decimals: usize },
    Integer { min: i64, max: i64 },
    /// Thresholds on the raw value, producing ordinal codes.
    Ordinal { cuts: Vec<f64>, codes: Vec<i64> },
}

fn render_feature(spec: &FeatureSpec, s: &Sample, rng: &mut ChaCha20Rng) -> String {
    let noise: f64 = StandardNormal.sample(rng);
    let mixed: f64 = spec
        .mix
        .iter()
        .zip(&s.latent)
        .map(|(w, u)| w * u)
        .sum::<f64>()
        + spec.noise * noise;
    let value = spec.shift + spec.scale * mixed;
    match &spec.kind {
        FeatureKind::Continuous { decimals } => format!("{value:.decimals$}"),
        FeatureKind::Integer { min, max } => {
            format!("{}", (value.round() as i64).clamp(*min, *max))
        }
        FeatureKind::Ordinal { cuts, codes } => {
            let mut idx = 0;
            for (i, c) in cuts.iter().enumerate() {
                if mixed > *c {
                    idx = i + 1;
                }
            }
            format!("{}", codes[idx])
        }
    }
}

fn write_csv(
    path: &PathBuf,
    samples: &[Sample],
    labels: &[usize],
    specs: &[FeatureSpec],
    label_values: [i64; 2],
    seed: u64,
) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x00c5_f00d);
    let mut out = String::new();
    for (s, &label) in samples.iter().zip(labels) {
        let cells: Vec<String> = specs.iter().map(|f| render_feature(f, s, &mut rng)).collect();
        let _ = writeln!(out, "{},{}", cells.join(","), label_values[label]);
    }
    std::fs::write(path, out).expect("write dataset");
    println!("wrote {}", path.display());
}

fn pid_specs() -> Vec<FeatureSpec> {
    vec![
        // pregnancies: weak signal, integer
        FeatureSpec {
            mix: [0.0, 0.25, 0.45, 0.0],
            noise: 0.85,
            shift: 3.8,
            scale: 3.2,
            kind: FeatureKind::Integer { min: 0, max: 17 },
        },
        // glucose: strongest marker
        FeatureSpec {
            mix: [0.85, 0.25, 0.0, 0.0],
            noise: 0.50,
            shift: 121.0,
            scale: 30.0,
            kind: FeatureKind::Integer { min: 44, max: 199 },
        },
        // blood pressure: mostly noise
        FeatureSpec {
            mix: [0.15, 0.2, 0.0, 0.1],
            noise: 0.95,
            shift: 69.0,
            scale: 18.0,
            kind: FeatureKind::Integer { min: 24, max: 122 },
        },
        // skin fold: correlated with the second factor
        FeatureSpec {
            mix: [0.0, 0.5, 0.0, 0.2],
            noise: 0.85,
            shift: 21.0,
            scale: 14.0,
            kind: FeatureKind::Integer { min: 0, max: 99 },
        },
        // serum level: noisy view of the interaction carrier
        FeatureSpec {
            mix: [0.35, 0.45, 0.0, 0.0],
            noise: 0.85,
            shift: 92.0,
            scale: 95.0,
            kind: FeatureKind::Integer { min: 0, max: 846 },
        },
        // body mass index
        FeatureSpec {
            mix: [0.2, 0.75, 0.0, 0.0],
            noise: 0.60,
            shift: 32.0,
            scale: 6.8,
            kind: FeatureKind::Continuous { decimals: 1 },
        },
        // pedigree-style score
        FeatureSpec {
            mix: [0.3, 0.0, 0.45, 0.0],
            noise: 0.80,
            shift: 0.47,
            scale: 0.30,
            kind: FeatureKind::Continuous { decimals: 3 },
        },
        // age
        FeatureSpec {
            mix: [0.4, 0.0, 0.6, 0.0],
            noise: 0.70,
            shift: 33.0,
            scale: 11.0,
            kind: FeatureKind::Integer { min: 21, max: 81 },
        },
    ]
}

fn heart_specs() -> Vec<FeatureSpec> {
    vec![
        // age
        FeatureSpec {
            mix: [0.45, 0.0, 0.5, 0.0],
            noise: 0.70,
            shift: 54.0,
            scale: 9.0,
            kind: FeatureKind::Integer { min: 29, max: 77 },
        },
        // sex flag: latent-independent
        FeatureSpec {
            mix: [0.0, 0.0, 0.0, 1.0],
            noise: 0.30,
            shift: 0.0,
            scale: 1.0,
            kind: FeatureKind::Ordinal { cuts: vec![0.25], codes: vec![0, 1] },
        },
        // chest-pain type: strong ordinal marker
        FeatureSpec {
            mix: [0.8, 0.3, 0.0, 0.0],
            noise: 0.55,
            shift: 0.0,
            scale: 1.0,
            kind: FeatureKind::Ordinal {
                cuts: vec![-0.8, 0.1, 0.9],
                codes: vec![1, 2, 3, 4],
            },
        },
        // resting pressure
        FeatureSpec {
            mix: [0.25, 0.2, 0.0, 0.15],
            noise: 0.90,
            shift: 131.0,
            scale: 17.0,
            kind: FeatureKind::Integer { min: 94, max: 200 },
        },
        // cholesterol: weak
        FeatureSpec {
            mix: [0.2, 0.15, 0.1, 0.0],
            noise: 0.95,
            shift: 249.0,
            scale: 51.0,
            kind: FeatureKind::Integer { min: 126, max: 564 },
        },
        // fasting sugar flag: mostly noise
        FeatureSpec {
            mix: [0.1, 0.1, 0.0, 0.0],
            noise: 1.0,
            shift: 0.0,
            scale: 1.0,
            kind: FeatureKind::Ordinal { cuts: vec![1.05], codes: vec![0, 1] },
        },
        // resting ecg code
        FeatureSpec {
            mix: [0.3, 0.25, 0.0, 0.0],
            noise: 0.85,
            shift: 0.0,
            scale: 1.0,
            kind: FeatureKind::Ordinal { cuts: vec![-0.1, 1.0], codes: vec![0, 1, 2] },
        },
        // peak rate achieved: strong inverse marker
        FeatureSpec {
            mix: [-0.75, -0.3, -0.15, 0.0],
            noise: 0.55,
            shift: 149.0,
            scale: 20.0,
            kind: FeatureKind::Integer { min: 71, max: 202 },
        },
        // exercise-pain flag
        FeatureSpec {
            mix: [0.65, 0.25, 0.0, 0.0],
            noise: 0.70,
            shift: 0.0,
            scale: 1.0,
            kind: FeatureKind::Ordinal { cuts: vec![0.55], codes: vec![0, 1] },
        },
        // st depression
        FeatureSpec {
            mix: [0.7, 0.35, 0.0, 0.0],
            noise: 0.65,
            shift: 1.05,
            scale: 0.95,
            kind: FeatureKind::Continuous { decimals: 1 },
        },
        // st slope code
        FeatureSpec {
            mix: [0.55, 0.3, 0.0, 0.0],
            noise: 0.80,
            shift: 0.0,
            scale: 1.0,
            kind: FeatureKind::Ordinal { cuts: vec![-0.4, 1.2], codes: vec![1, 2, 3] },
        },
        // vessel count
        FeatureSpec {
            mix: [0.75, 0.0, 0.25, 0.0],
            noise: 0.70,
            shift: 0.0,
            scale: 1.0,
            kind: FeatureKind::Ordinal {
                cuts: vec![0.55, 1.2, 1.9],
                codes: vec![0, 1, 2, 3],
            },
        },
        // perfusion code
        FeatureSpec {
            mix: [0.6, 0.35, 0.0, 0.0],
            noise: 0.75,
            shift: 0.0,
            scale: 1.0,
            kind: FeatureKind::Ordinal { cuts: vec![0.0, 0.9], codes: vec![3, 6, 7] },
        },
    ]
}

fn main() {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"));
    std::fs::create_dir_all(&out_dir).expect("create data dir");

    // 768 samples, 8 features, 500 negative / 268 positive, labels {0, 1}.
    let (samples, labels) = draw_population(768, 268, PID_SEED);
    write_csv(
        &out_dir.join("pid.csv"),
        &samples,
        &labels,
        &pid_specs(),
        [0, 1],
        PID_SEED,
    );

    // 270 samples, 13 features, 150 absence / 120 presence, labels {1, 2}.
    let (samples, labels) = draw_population(270, 120, HEART_SEED);
    write_csv(
        &out_dir.join("heart.csv"),
        &samples,
        &labels,
        &heart_specs(),
        [1, 2],
        HEART_SEED,
    );
}
