//! Mutation and crossover.

use super::genotype::*;
use super::space::SearchSpace;
use crate::rng::SplitMix64;

/// Result of [`mutate`]. `changed` is false only when no gene of the input
/// has an alternative value in the space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutation {
    pub genotype: ArchGenotype,
    pub changed: bool,
}

#[derive(Debug, Clone, Copy)]
enum Gene {
    Layer(usize),
    Dim,
    Activation,
    Dropout,
    Skips,
    Pooling,
    Lr,
    WeightDecay,
    Epochs,
}

fn alternatives<T: Copy + PartialEq>(allowed: &[T], current: T) -> Vec<T> {
    allowed.iter().copied().filter(|v| *v != current).collect()
}

fn mutable_genes(g: &ArchGenotype, space: &SearchSpace) -> Vec<Gene> {
    let mut genes = Vec::new();
    for (i, op) in g.layers.iter().enumerate() {
        if space.allowed_ops.iter().any(|o| o != op) {
            genes.push(Gene::Layer(i));
        }
    }
    let has_alt = |n: usize| n > 0;
    if has_alt(alternatives(&space.allowed_dims, g.hidden_dim).len()) {
        genes.push(Gene::Dim);
    }
    if has_alt(alternatives(&space.allowed_activations, g.activation).len()) {
        genes.push(Gene::Activation);
    }
    if has_alt(alternatives(&space.allowed_dropout_steps, g.dropout_steps).len()) {
        genes.push(Gene::Dropout);
    }
    if space.allow_skips && !g.layers.is_empty() {
        genes.push(Gene::Skips);
    }
    if has_alt(alternatives(space.allowed_pooling(), g.pooling).len()) {
        genes.push(Gene::Pooling);
    }
    if has_alt(alternatives(&space.allowed_lrs, g.lr).len()) {
        genes.push(Gene::Lr);
    }
    if has_alt(alternatives(&space.allowed_weight_decays, g.weight_decay).len()) {
        genes.push(Gene::WeightDecay);
    }
    if has_alt(alternatives(&space.allowed_epochs, g.epochs).len()) {
        genes.push(Gene::Epochs);
    }
    genes
}

/// Changes exactly one gene, chosen uniformly among the genes that have an
/// alternative value in `space`; the new value is uniform over the
/// alternatives. A skip mutation toggles one uniformly chosen eligible pair.
pub fn mutate(g: &ArchGenotype, space: &SearchSpace, rng: &mut SplitMix64) -> Mutation {
    let genes = mutable_genes(g, space);
    if genes.is_empty() {
        return Mutation {
            genotype: g.clone(),
            changed: false,
        };
    }
    let mut out = g.clone();
    match *rng.choose(&genes) {
        Gene::Layer(i) => out.layers[i] = *rng.choose(&alternatives(&space.allowed_ops, g.layers[i])),
        Gene::Dim => out.hidden_dim = *rng.choose(&alternatives(&space.allowed_dims, g.hidden_dim)),
        Gene::Activation => {
            out.activation = *rng.choose(&alternatives(&space.allowed_activations, g.activation))
        }
        Gene::Dropout => {
            out.dropout_steps =
                *rng.choose(&alternatives(&space.allowed_dropout_steps, g.dropout_steps))
        }
        Gene::Skips => {
            let pair = *rng.choose(&g.eligible_skips());
            if !out.skips.remove(&pair) {
                out.skips.insert(pair);
            }
        }
        Gene::Pooling => out.pooling = *rng.choose(&alternatives(space.allowed_pooling(), g.pooling)),
        Gene::Lr => out.lr = *rng.choose(&alternatives(&space.allowed_lrs, g.lr)),
        Gene::WeightDecay => {
            out.weight_decay =
                *rng.choose(&alternatives(&space.allowed_weight_decays, g.weight_decay))
        }
        Gene::Epochs => out.epochs = *rng.choose(&alternatives(&space.allowed_epochs, g.epochs)),
    }
    Mutation {
        genotype: out,
        changed: true,
    }
}

/// Recombines two parents from the same space.
///
/// The layer list is a single-point cut: a prefix of one parent followed by
/// the other parent's layers from the same position on, so every layer keeps
/// its position. Scalar genes are taken from either parent with equal
/// probability. The skip set comes whole from one parent, minus pairs that
/// point past the child's last layer.
pub fn crossover(a: &ArchGenotype, b: &ArchGenotype, rng: &mut SplitMix64) -> ArchGenotype {
    let (head, tail) = if rng.chance(0.5) { (a, b) } else { (b, a) };
    let cut = rng.below(head.layers.len().max(tail.layers.len()) + 1);
    let keep = cut.min(head.layers.len());
    let mut layers = head.layers[..keep].to_vec();
    if keep < tail.layers.len() {
        layers.extend_from_slice(&tail.layers[keep..]);
    }
    let depth = layers.len() as u8;

    let pick = |rng: &mut SplitMix64| rng.chance(0.5);
    let hidden_dim = if pick(rng) { a.hidden_dim } else { b.hidden_dim };
    let activation = if pick(rng) { a.activation } else { b.activation };
    let dropout_steps = if pick(rng) { a.dropout_steps } else { b.dropout_steps };
    let skip_source = if pick(rng) { &a.skips } else { &b.skips };
    let skips = skip_source.iter().copied().filter(|&(_, to)| to <= depth).collect();
    let pooling = if pick(rng) { a.pooling } else { b.pooling };
    let lr = if pick(rng) { a.lr } else { b.lr };
    let weight_decay = if pick(rng) { a.weight_decay } else { b.weight_decay };
    let epochs = if pick(rng) { a.epochs } else { b.epochs };

    ArchGenotype {
        layers,
        hidden_dim,
        activation,
        dropout_steps,
        skips,
        pooling,
        lr,
        weight_decay,
        epochs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{decode, encode, sample, validate};

    fn segments(s: &str) -> Vec<&str> {
        s.split(';').collect()
    }

    #[test]
    fn mutation_changes_exactly_one_segment() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        let mut rng = SplitMix64::new(17);
        for _ in 0..2000 {
            let g = sample(&space, &mut rng);
            let m = mutate(&g, &space, &mut rng);
            assert!(m.changed);
            let (before, after) = (encode(&g), encode(&m.genotype));
            let diffs = segments(&before)
                .iter()
                .zip(segments(&after))
                .filter(|(x, y)| *x != y)
                .count();
            assert_eq!(diffs, 1, "{before} -> {after}");
            if g.layers != m.genotype.layers {
                let changed_layers = g
                    .layers
                    .iter()
                    .zip(&m.genotype.layers)
                    .filter(|(x, y)| x != y)
                    .count();
                assert_eq!(changed_layers, 1);
            }
            assert!(validate(&m.genotype, TaskType::NodeClassification, &space).is_empty());
            assert_eq!(m.genotype.pooling, Pooling::None);
        }
    }

    #[test]
    fn singleton_space_flags_unchanged() {
        let space = SearchSpace {
            task_type: TaskType::NodeClassification,
            allowed_ops: vec![Op::Gcn],
            max_layers: 1,
            allowed_dims: vec![64],
            allow_skips: false,
            allowed_activations: vec![Activation::Relu],
            allowed_dropout_steps: vec![10],
            allowed_lrs: vec![LearningRate::Lr0_01],
            allowed_weight_decays: vec![WeightDecay::Wd0],
            allowed_epochs: vec![Epochs::E100],
        };
        let g = decode("v1;ops=gcn;dim=64;act=relu;drop=0.50;skips=;pool=none;lr=0.01;wd=0;ep=100")
            .unwrap();
        let m = mutate(&g, &space, &mut SplitMix64::new(1));
        assert!(!m.changed);
        assert_eq!(m.genotype, g);
    }

    #[test]
    fn crossover_of_identical_parents_is_identity() {
        let space = SearchSpace::full(TaskType::GraphClassification);
        let mut rng = SplitMix64::new(23);
        for _ in 0..200 {
            let g = sample(&space, &mut rng);
            assert_eq!(crossover(&g, &g, &mut rng), g);
        }
    }

    #[test]
    fn child_genes_come_from_parents() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        let mut rng = SplitMix64::new(29);
        for _ in 0..1000 {
            let a = sample(&space, &mut rng);
            let b = sample(&space, &mut rng);
            let c = crossover(&a, &b, &mut rng);
            for (i, op) in c.layers.iter().enumerate() {
                assert!(a.layers.get(i) == Some(op) || b.layers.get(i) == Some(op));
            }
            assert!(c.hidden_dim == a.hidden_dim || c.hidden_dim == b.hidden_dim);
            assert!(c.activation == a.activation || c.activation == b.activation);
            assert!(c.dropout_steps == a.dropout_steps || c.dropout_steps == b.dropout_steps);
            assert!(c.lr == a.lr || c.lr == b.lr);
            assert!(c.weight_decay == a.weight_decay || c.weight_decay == b.weight_decay);
            assert!(c.epochs == a.epochs || c.epochs == b.epochs);
            let depth = c.layers.len() as u8;
            let trimmed = |s: &std::collections::BTreeSet<(u8, u8)>| {
                s.iter().copied().filter(|&(_, to)| to <= depth).collect()
            };
            assert!(c.skips == trimmed(&a.skips) || c.skips == trimmed(&b.skips));
            assert!(validate(&c, TaskType::NodeClassification, &space).is_empty());
        }
    }
}
