//! Analytic stand-in for training. All table values are whole multiples of
//! 1e-4, so the noise-free score is computed exactly in integer units and
//! converted with a single division.

use super::{Directive, FeatureEffects, ProfileKind};
use crate::arch::{encode, ArchGenotype, Op, Pooling, LearningRate};
use crate::hash::fnv1a64;

const UNIT: i64 = 10_000;

fn base(kind: ProfileKind) -> i64 {
    match kind {
        ProfileKind::HomophilousNode => 7000,
        ProfileKind::HeterophilousNode => 3000,
        ProfileKind::GraphMolecule => 6000,
        ProfileKind::Ranking => 5000,
    }
}

fn op_bonus(kind: ProfileKind, op: Op) -> i64 {
    match kind {
        ProfileKind::HomophilousNode => match op {
            Op::Gcn => 400,
            Op::Gat => 500,
            Op::Sage => 300,
            Op::Gin => 100,
            Op::Cheb => 200,
            Op::Linear => -200,
        },
        ProfileKind::HeterophilousNode => match op {
            Op::Sage => 500,
            Op::Cheb => 300,
            Op::Gat => 200,
            Op::Gin => 200,
            Op::Gcn => 0,
            Op::Linear => 100,
        },
        ProfileKind::GraphMolecule => match op {
            Op::Gin => 500,
            Op::Gat => 300,
            Op::Gcn => 200,
            Op::Sage => 200,
            Op::Cheb => 100,
            Op::Linear => -200,
        },
        ProfileKind::Ranking => 0,
    }
}

fn preferred_dim(kind: ProfileKind) -> u32 {
    match kind {
        ProfileKind::HeterophilousNode => 128,
        _ => 64,
    }
}

fn feature_units(plan: &[Directive], effects: &FeatureEffects) -> i64 {
    let raw: i64 = plan
        .iter()
        .map(|d| {
            if effects.helpful.contains(d) {
                100
            } else if effects.harmful.contains(d) {
                -100
            } else {
                0
            }
        })
        .sum();
    raw.clamp(-200, 200)
}

/// Noise-free score as an exact fraction `(numerator, denominator)`.
fn fraction(g: &ArchGenotype, kind: ProfileKind, plan: &[Directive], effects: &FeatureEffects) -> (i64, i64) {
    let layers = g.num_layers().max(1) as i64;
    let mut flat = base(kind);
    if !g.skips.is_empty() {
        flat += 300;
    }
    if g.hidden_dim == preferred_dim(kind) {
        flat += 200;
    }
    flat -= 25 * (i64::from(g.dropout_steps) - 10).abs();
    flat -= 200 * (layers - 4).max(0);
    if g.lr == LearningRate::Lr0_005 {
        flat += 100;
    }
    if kind == ProfileKind::GraphMolecule && g.pooling == Pooling::None {
        flat -= 1000;
    }
    flat += feature_units(plan, effects);
    let ops: i64 = g.layers.iter().map(|&op| op_bonus(kind, op)).sum();
    (layers * flat + ops, layers * UNIT)
}

/// The score before noise and clamping.
pub fn noise_free_fitness(g: &ArchGenotype, kind: ProfileKind, plan: &[Directive], effects: &FeatureEffects) -> f64 {
    let (num, den) = fraction(g, kind, plan, effects);
    num as f64 / den as f64
}

/// Hash-derived noise in `[-0.5, 0.5] × noise_scale`.
pub fn noise_term(key: &str, noise_scale: f64) -> f64 {
    if noise_scale == 0.0 {
        return 0.0;
    }
    let bucket = fnv1a64(key.as_bytes()) % 1001;
    (bucket as f64 / 1000.0 - 0.5) * noise_scale
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

pub fn surrogate_fitness(
    g: &ArchGenotype,
    kind: ProfileKind,
    plan: &[Directive],
    effects: &FeatureEffects,
    noise_scale: f64,
) -> f64 {
    clamp01(noise_free_fitness(g, kind, plan, effects) + noise_term(&encode(g), noise_scale))
}

/// Score for one evaluation seed; the seed only moves the noise draw.
pub fn surrogate_fitness_seeded(
    g: &ArchGenotype,
    kind: ProfileKind,
    plan: &[Directive],
    effects: &FeatureEffects,
    noise_scale: f64,
    seed: u64,
) -> f64 {
    let key = format!("{}|seed={seed}", encode(g));
    clamp01(noise_free_fitness(g, kind, plan, effects) + noise_term(&key, noise_scale))
}
