mod common;

use archon_core::arch::{crossover, decode, encode, mutate, sample, validate, SearchSpace, TaskType};
use archon_core::eval::{surrogate_fitness, surrogate_fitness_seeded, DatasetRegistry, Directive, ProfileKind};
use archon_core::knowledge::{post_rank, top_per_type, FacetType, RankedEntry, ResourceType, Stage, WeightTable};
use archon_core::rng::SplitMix64;
use proptest::prelude::*;

fn task() -> impl Strategy<Value = TaskType> {
    prop_oneof![
        Just(TaskType::NodeClassification),
        Just(TaskType::GraphClassification),
        Just(TaskType::LinkRanking),
    ]
}

fn entry(id: usize, resource: ResourceType, cosine: f64) -> RankedEntry {
    RankedEntry {
        item_id: format!("i{id:03}"),
        doc_id: "d".into(),
        facet_type: FacetType::ArchitectureDesign,
        resource_type: resource,
        text: String::new(),
        cosine_score: cosine,
        final_score: 0.0,
    }
}

proptest! {
    #[test]
    fn sampled_genotypes_round_trip_and_validate(t in task(), seed in any::<u64>()) {
        let space = SearchSpace::full(t);
        let g = sample(&space, &mut SplitMix64::new(seed));
        prop_assert!(validate(&g, t, &space).is_empty());
        let s = encode(&g);
        prop_assert_eq!(decode(&s).unwrap(), g);
        prop_assert_eq!(encode(&decode(&s).unwrap()), s);
    }

    #[test]
    fn variation_stays_inside_the_space(t in task(), seed in any::<u64>()) {
        let space = SearchSpace::full(t);
        let mut rng = SplitMix64::new(seed);
        let a = sample(&space, &mut rng);
        let b = sample(&space, &mut rng);
        let m = mutate(&a, &space, &mut rng);
        prop_assert!(validate(&m.genotype, t, &space).is_empty());
        prop_assert_eq!(m.changed, m.genotype != a);
        let child = crossover(&a, &b, &mut rng);
        prop_assert!(validate(&child, t, &space).is_empty(), "{}", encode(&child));
    }

    #[test]
    fn surrogate_is_a_clamped_deterministic_score(
        seed in any::<u64>(),
        noise in 0.0f64..5.0,
        eval_seed in 1u64..10,
        kind_index in 0usize..4,
    ) {
        let kind = ProfileKind::ALL[kind_index];
        let space = SearchSpace::full(kind.task_type());
        let g = sample(&space, &mut SplitMix64::new(seed));
        let effects = DatasetRegistry::builtin().feature_effects(kind);
        let plan = [Directive::NormalizeFeatures, Directive::AddDegreeFeature];
        let a = surrogate_fitness(&g, kind, &plan, &effects, noise);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(a, surrogate_fitness(&g, kind, &plan, &effects, noise));
        let s = surrogate_fitness_seeded(&g, kind, &plan, &effects, noise, eval_seed);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn post_rank_is_bounded_sorted_and_drawn_from_the_per_type_heads(
        scores in proptest::collection::vec((0usize..4, 0u8..20), 0..80),
        per_type_k in 1usize..6,
        final_k in 1usize..12,
        stage_index in 0usize..3,
    ) {
        let candidates: Vec<RankedEntry> = scores
            .iter()
            .enumerate()
            .map(|(i, (r, c))| entry(i, ResourceType::ALL[*r], f64::from(*c) / 20.0))
            .collect();
        let stage = Stage::ALL[stage_index];
        let kept = top_per_type(candidates.clone(), per_type_k);
        let ranked = post_rank(kept.clone(), stage, final_k, &WeightTable::default()).unwrap();
        prop_assert!(ranked.len() <= final_k);
        for pair in ranked.entries.windows(2) {
            let ordered = pair[0].final_score > pair[1].final_score
                || (pair[0].final_score == pair[1].final_score && pair[0].item_id < pair[1].item_id);
            prop_assert!(ordered);
        }
        for e in &ranked.entries {
            let same_type: Vec<&RankedEntry> =
                candidates.iter().filter(|c| c.resource_type == e.resource_type).collect();
            let better = same_type
                .iter()
                .filter(|c| c.cosine_score > e.cosine_score
                    || (c.cosine_score == e.cosine_score && c.item_id < e.item_id))
                .count();
            prop_assert!(better < per_type_k);
        }
    }
}
