//! Turns retrieved architecture-design facets into starting genotypes.

use super::genotype::*;
use super::space::{validate, SearchSpace};
use crate::knowledge::{FacetType, RankedKnowledge};

const OP_PRIORITY: [Op; 6] = [Op::Gcn, Op::Gat, Op::Sage, Op::Gin, Op::Cheb, Op::Linear];

fn op_keyword(token: &str) -> Option<Op> {
    Some(match token {
        "gcn" | "gcnconv" => Op::Gcn,
        "sage" | "graphsage" | "sageconv" => Op::Sage,
        "gat" | "gatconv" => Op::Gat,
        "gin" | "ginconv" => Op::Gin,
        "cheb" | "chebnet" | "chebconv" => Op::Cheb,
        "linear" | "mlp" => Op::Linear,
        _ => return None,
    })
}

fn is_skip_keyword(token: &str) -> bool {
    matches!(
        token,
        "skip" | "skips" | "residual" | "residuals" | "connection" | "connections" | "jumping"
    )
}

fn pooling_keyword(token: &str) -> Option<Pooling> {
    Some(match token {
        "pooling" | "readout" | "mean" => Pooling::Mean,
        "max" => Pooling::Max,
        "sum" | "add" => Pooling::Sum,
        _ => return None,
    })
}

fn prefer<T: Copy + PartialEq>(allowed: &[T], wanted: T) -> T {
    if allowed.contains(&wanted) {
        wanted
    } else {
        allowed[0]
    }
}

/// Builds one genotype per architecture-design facet that mentions at least
/// one keyword usable in `space`: operator names fill the layer list (a
/// single named operator is stacked twice), a skip/residual/connection
/// mention adds an input-to-output skip, and a mentioned width is used when
/// allowed. Facets whose keywords are all filtered out contribute nothing.
pub fn seed_from_knowledge(items: &RankedKnowledge, space: &SearchSpace) -> Vec<ArchGenotype> {
    items
        .entries
        .iter()
        .filter(|e| e.facet_type == FacetType::ArchitectureDesign)
        .filter_map(|e| genotype_from_text(&e.text, space))
        .collect()
}

fn genotype_from_text(text: &str, space: &SearchSpace) -> Option<ArchGenotype> {
    let lowered = text.to_lowercase();
    let tokens: Vec<&str> = lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect();

    let mut ops: Vec<Op> = Vec::new();
    for op in tokens.iter().filter_map(|t| op_keyword(t)) {
        if space.allowed_ops.contains(&op) && !ops.contains(&op) {
            ops.push(op);
        }
    }
    let wants_skip = space.allow_skips && tokens.iter().any(|t| is_skip_keyword(t));
    let dim = tokens
        .iter()
        .filter_map(|t| t.parse::<u32>().ok())
        .find(|d| space.allowed_dims.contains(d));
    let pooling = if space.task_type.is_graph_level() {
        tokens.iter().find_map(|t| pooling_keyword(t))
    } else {
        None
    };
    if ops.is_empty() && !wants_skip && dim.is_none() && pooling.is_none() {
        return None;
    }

    let max_layers = space.max_layers.clamp(1, MAX_LAYERS);
    let layers = match ops.len() {
        0 => {
            let op = OP_PRIORITY
                .into_iter()
                .find(|op| space.allowed_ops.contains(op))?;
            vec![op; 2.min(max_layers)]
        }
        1 => vec![ops[0]; 2.min(max_layers)],
        _ => ops.into_iter().take(max_layers).collect(),
    };
    let depth = layers.len() as u8;
    let skips = if wants_skip {
        [(0, depth)].into_iter().collect()
    } else {
        Default::default()
    };
    let g = ArchGenotype {
        layers,
        hidden_dim: dim.unwrap_or_else(|| prefer(&space.allowed_dims, 64)),
        activation: prefer(&space.allowed_activations, Activation::Relu),
        dropout_steps: prefer(&space.allowed_dropout_steps, 10),
        skips,
        pooling: pooling.unwrap_or_else(|| prefer(space.allowed_pooling(), Pooling::Mean)),
        lr: prefer(&space.allowed_lrs, LearningRate::Lr0_005),
        weight_decay: prefer(&space.allowed_weight_decays, WeightDecay::Wd0_0005),
        epochs: prefer(&space.allowed_epochs, Epochs::E200),
    };
    validate(&g, space.task_type, space).is_empty().then_some(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{RankedEntry, ResourceType};

    fn ranked(texts: &[(FacetType, &str)]) -> RankedKnowledge {
        RankedKnowledge {
            entries: texts
                .iter()
                .enumerate()
                .map(|(i, (facet, text))| RankedEntry {
                    item_id: format!("item-{i}"),
                    doc_id: "doc".into(),
                    facet_type: *facet,
                    resource_type: ResourceType::Paper,
                    text: text.to_string(),
                    cosine_score: 1.0,
                    final_score: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn skip_and_sage_facet() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        let items = ranked(&[(
            FacetType::ArchitectureDesign,
            "skip connections improve node classification with sage",
        )]);
        let seeds = seed_from_knowledge(&items, &space);
        assert_eq!(seeds.len(), 1);
        assert!(seeds[0].layers.contains(&Op::Sage));
        assert!(!seeds[0].skips.is_empty());
    }

    #[test]
    fn empty_items_give_no_seeds() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        assert!(seed_from_knowledge(&RankedKnowledge::default(), &space).is_empty());
    }

    #[test]
    fn pooling_only_facet_ignored_for_node_tasks() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        let items = ranked(&[(FacetType::ArchitectureDesign, "use pooling")]);
        assert!(seed_from_knowledge(&items, &space).is_empty());

        let graph_space = SearchSpace::full(TaskType::GraphClassification);
        let seeds = seed_from_knowledge(&items, &graph_space);
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].pooling, Pooling::Mean);
    }

    #[test]
    fn non_architecture_facets_ignored() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        let items = ranked(&[(FacetType::DatasetUsage, "gcn with skip connections")]);
        assert!(seed_from_knowledge(&items, &space).is_empty());
    }

    #[test]
    fn disallowed_ops_and_dims_filtered() {
        let mut space = SearchSpace::full(TaskType::NodeClassification);
        space.allowed_ops = vec![Op::Gcn];
        space.allowed_dims = vec![32];
        space.allow_skips = false;
        let items = ranked(&[(FacetType::ArchitectureDesign, "gat with 256 hidden units and skip")]);
        assert!(seed_from_knowledge(&items, &space).is_empty());
        let items = ranked(&[(FacetType::ArchitectureDesign, "stack gat and gcn layers, width 32")]);
        let seeds = seed_from_knowledge(&items, &space);
        assert_eq!(seeds[0].layers, vec![Op::Gcn, Op::Gcn]);
        assert_eq!(seeds[0].hidden_dim, 32);
    }
}
