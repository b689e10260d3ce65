use serde::{Deserialize, Serialize};

use super::genotype::*;
use crate::rng::SplitMix64;

/// The set of genotypes a search may visit.
///
/// Genes without an explicit restriction in the configuration default to
/// their full alphabet; pooling is always derived from the task type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub task_type: TaskType,
    pub allowed_ops: Vec<Op>,
    pub max_layers: usize,
    pub allowed_dims: Vec<u32>,
    pub allow_skips: bool,
    #[serde(default = "all_activations")]
    pub allowed_activations: Vec<Activation>,
    #[serde(default = "all_dropouts")]
    pub allowed_dropout_steps: Vec<u8>,
    #[serde(default = "all_lrs")]
    pub allowed_lrs: Vec<LearningRate>,
    #[serde(default = "all_wds")]
    pub allowed_weight_decays: Vec<WeightDecay>,
    #[serde(default = "all_epochs")]
    pub allowed_epochs: Vec<Epochs>,
}

fn all_activations() -> Vec<Activation> {
    Activation::ALL.to_vec()
}
fn all_dropouts() -> Vec<u8> {
    (0..=DROPOUT_STEPS).collect()
}
fn all_lrs() -> Vec<LearningRate> {
    LearningRate::ALL.to_vec()
}
fn all_wds() -> Vec<WeightDecay> {
    WeightDecay::ALL.to_vec()
}
fn all_epochs() -> Vec<Epochs> {
    Epochs::ALL.to_vec()
}

impl SearchSpace {
    /// Every operator, up to six layers, every width, skips allowed.
    pub fn full(task_type: TaskType) -> Self {
        Self {
            task_type,
            allowed_ops: Op::ALL.to_vec(),
            max_layers: MAX_LAYERS,
            allowed_dims: DIMS.to_vec(),
            allow_skips: true,
            allowed_activations: all_activations(),
            allowed_dropout_steps: all_dropouts(),
            allowed_lrs: all_lrs(),
            allowed_weight_decays: all_wds(),
            allowed_epochs: all_epochs(),
        }
    }

    pub fn allowed_pooling(&self) -> &'static [Pooling] {
        self.task_type.allowed_pooling()
    }

    /// Problems with the space itself (empty alphabets, out-of-range values).
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.allowed_ops.is_empty() {
            out.push("allowed_ops is empty".to_string());
        }
        if self.max_layers == 0 || self.max_layers > MAX_LAYERS {
            out.push(format!("max_layers must be in 1..={MAX_LAYERS}"));
        }
        if self.allowed_dims.is_empty() {
            out.push("allowed_dims is empty".to_string());
        }
        for dim in &self.allowed_dims {
            if !DIMS.contains(dim) {
                out.push(format!("hidden dim {dim} is not one of {DIMS:?}"));
            }
        }
        if self.allowed_activations.is_empty()
            || self.allowed_dropout_steps.is_empty()
            || self.allowed_lrs.is_empty()
            || self.allowed_weight_decays.is_empty()
            || self.allowed_epochs.is_empty()
        {
            out.push("every training gene needs at least one allowed value".to_string());
        }
        if self.allowed_dropout_steps.iter().any(|&d| d > DROPOUT_STEPS) {
            out.push("dropout steps must be in 0..=20".to_string());
        }
        out
    }
}

/// Lists every way `g` falls outside `space` or breaks the pooling rule for
/// `task_type`. An empty list means the genotype is valid.
pub fn validate(g: &ArchGenotype, task_type: TaskType, space: &SearchSpace) -> Vec<String> {
    let mut violations = Vec::new();
    let depth = g.layers.len();
    if depth == 0 || depth > space.max_layers.min(MAX_LAYERS) {
        violations.push(format!(
            "layer count {depth} outside 1..={}",
            space.max_layers.min(MAX_LAYERS)
        ));
    }
    for op in &g.layers {
        if !space.allowed_ops.contains(op) {
            violations.push(format!("op {op} not in allowed ops"));
        }
    }
    if !space.allowed_dims.contains(&g.hidden_dim) {
        violations.push(format!("hidden dim {} not allowed", g.hidden_dim));
    }
    if !space.allowed_activations.contains(&g.activation) {
        violations.push(format!("activation {} not allowed", g.activation));
    }
    if !space.allowed_dropout_steps.contains(&g.dropout_steps) {
        violations.push(format!("dropout {:.2} not allowed", g.dropout()));
    }
    if !g.skips.is_empty() && !space.allow_skips {
        violations.push("skip connections not allowed".to_string());
    }
    for &(from, to) in &g.skips {
        if from >= to || usize::from(to) > depth {
            violations.push(format!("skip {from}-{to} out of range"));
        }
    }
    if task_type.is_graph_level() && g.pooling == Pooling::None {
        violations.push("graph-level task requires pooling".to_string());
    }
    if !task_type.is_graph_level() && g.pooling != Pooling::None {
        violations.push("node-level task forbids pooling".to_string());
    }
    if !space.allowed_lrs.contains(&g.lr) {
        violations.push(format!("lr {} not allowed", g.lr));
    }
    if !space.allowed_weight_decays.contains(&g.weight_decay) {
        violations.push(format!("weight decay {} not allowed", g.weight_decay));
    }
    if !space.allowed_epochs.contains(&g.epochs) {
        violations.push(format!("epochs {} not allowed", g.epochs));
    }
    violations
}

/// Draws a genotype gene by gene, uniformly over each allowed alphabet.
/// Each eligible skip pair is included with probability 0.5 when skips are allowed.
pub fn sample(space: &SearchSpace, rng: &mut SplitMix64) -> ArchGenotype {
    let depth = 1 + rng.below(space.max_layers.min(MAX_LAYERS));
    let layers = (0..depth).map(|_| *rng.choose(&space.allowed_ops)).collect();
    let hidden_dim = *rng.choose(&space.allowed_dims);
    let activation = *rng.choose(&space.allowed_activations);
    let dropout_steps = *rng.choose(&space.allowed_dropout_steps);
    let skips = if space.allow_skips {
        eligible_skips(depth)
            .into_iter()
            .filter(|_| rng.chance(0.5))
            .collect()
    } else {
        Default::default()
    };
    let pooling = *rng.choose(space.allowed_pooling());
    let lr = *rng.choose(&space.allowed_lrs);
    let weight_decay = *rng.choose(&space.allowed_weight_decays);
    let epochs = *rng.choose(&space.allowed_epochs);
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
    use crate::arch::decode;

    fn two_gcn() -> ArchGenotype {
        decode("v1;ops=gcn,gcn;dim=64;act=relu;drop=0.50;skips=;pool=none;lr=0.005;wd=0.0005;ep=200")
            .unwrap()
    }

    #[test]
    fn valid_node_genotype_has_no_violations() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        assert!(validate(&two_gcn(), TaskType::NodeClassification, &space).is_empty());
    }

    #[test]
    fn graph_task_without_pooling() {
        let space = SearchSpace::full(TaskType::GraphClassification);
        assert_eq!(
            validate(&two_gcn(), TaskType::GraphClassification, &space),
            vec!["graph-level task requires pooling".to_string()]
        );
    }

    #[test]
    fn op_outside_space_is_named() {
        let mut space = SearchSpace::full(TaskType::NodeClassification);
        space.allowed_ops = vec![Op::Gcn, Op::Sage];
        let mut g = two_gcn();
        g.layers[1] = Op::Gat;
        let violations = validate(&g, TaskType::NodeClassification, &space);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("gat"));
    }

    #[test]
    fn singleton_space_sample() {
        let mut space = SearchSpace::full(TaskType::NodeClassification);
        space.allowed_ops = vec![Op::Gcn];
        space.max_layers = 1;
        space.allowed_dims = vec![64];
        let mut rng = SplitMix64::new(3);
        for _ in 0..20 {
            let g = sample(&space, &mut rng);
            assert_eq!(g.layers, vec![Op::Gcn]);
            assert_eq!(g.hidden_dim, 64);
        }
    }

    #[test]
    fn samples_validate() {
        let mut rng = SplitMix64::new(11);
        for task in TaskType::ALL {
            let space = SearchSpace::full(*task);
            for _ in 0..1000 {
                let g = sample(&space, &mut rng);
                assert_eq!(validate(&g, *task, &space), Vec::<String>::new());
            }
        }
    }

    #[test]
    fn no_skips_when_disallowed() {
        let mut space = SearchSpace::full(TaskType::NodeClassification);
        space.allow_skips = false;
        let mut rng = SplitMix64::new(5);
        assert!((0..500).all(|_| sample(&space, &mut rng).skips.is_empty()));
    }
}
