use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::KnowledgeError;

macro_rules! text_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{}`", stringify!($name), other)),
                }
            }
        }
    };
}

text_enum!(ResourceType {
    Paper => "paper",
    Docs => "docs",
    Leaderboard => "leaderboard",
    ExperimentReport => "experiment-report",
});

text_enum!(FacetType {
    ArchitectureDesign => "architecture-design",
    DatasetUsage => "dataset-usage",
    TrainingTechnique => "training-technique",
    EvaluationResult => "evaluation-result",
});

text_enum!(Stage {
    DataAgent => "data-agent",
    ConfigurationAgent => "configuration-agent",
    PlanningReview => "planning-review",
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub resource_type: ResourceType,
    pub title: String,
    pub body: String,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseSummary {
    pub doc_id: String,
    pub problem: String,
    pub approach: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeItem {
    pub item_id: String,
    pub doc_id: String,
    pub facet_type: FacetType,
    pub resource_type: ResourceType,
    pub text: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub query_text: String,
    pub stage: Stage,
    pub per_type_k: usize,
    pub final_k: usize,
}

impl RetrievalQuery {
    pub const DEFAULT_PER_TYPE_K: usize = 5;
    pub const DEFAULT_FINAL_K: usize = 8;

    pub fn new(query_text: impl Into<String>, stage: Stage) -> Self {
        Self {
            query_text: query_text.into(),
            stage,
            per_type_k: Self::DEFAULT_PER_TYPE_K,
            final_k: Self::DEFAULT_FINAL_K,
        }
    }

    pub fn with_k(mut self, per_type_k: usize, final_k: usize) -> Self {
        self.per_type_k = per_type_k;
        self.final_k = final_k;
        self
    }
}

/// Which knowledge base a retrieval looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    #[default]
    All,
    Prior,
    Experiment,
}

impl Scope {
    pub fn admits(self, resource: ResourceType) -> bool {
        match self {
            Scope::All => true,
            Scope::Prior => resource != ResourceType::ExperimentReport,
            Scope::Experiment => resource == ResourceType::ExperimentReport,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub item_id: String,
    pub doc_id: String,
    pub facet_type: FacetType,
    pub resource_type: ResourceType,
    pub text: String,
    pub cosine_score: f64,
    pub final_score: f64,
}

/// Sorted by `final_score` descending, ties by `item_id` ascending.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedKnowledge {
    pub entries: Vec<RankedEntry>,
}

impl RankedKnowledge {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.item_id.as_str()).collect()
    }
}

/// Multiplier applied to a candidate's cosine score, per stage and source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    weights: BTreeMap<Stage, BTreeMap<ResourceType, f64>>,
}

impl WeightTable {
    pub fn from_map(weights: BTreeMap<Stage, BTreeMap<ResourceType, f64>>) -> Self {
        Self { weights }
    }

    /// The same weight everywhere; post-ranking then keeps cosine order.
    pub fn uniform(weight: f64) -> Self {
        let per_type: BTreeMap<ResourceType, f64> =
            ResourceType::ALL.iter().map(|r| (*r, weight)).collect();
        Self {
            weights: Stage::ALL.iter().map(|s| (*s, per_type.clone())).collect(),
        }
    }

    pub fn weight(&self, stage: Stage, resource: ResourceType) -> Result<f64, KnowledgeError> {
        self.weights
            .get(&stage)
            .ok_or_else(|| KnowledgeError::Config(format!("no weights configured for stage {stage}")))?
            .get(&resource)
            .copied()
            .ok_or_else(|| {
                KnowledgeError::Config(format!("no weight for {resource} at stage {stage}"))
            })
    }

    pub fn set(&mut self, stage: Stage, resource: ResourceType, weight: f64) {
        self.weights.entry(stage).or_default().insert(resource, weight);
    }
}

impl Default for WeightTable {
    fn default() -> Self {
        use ResourceType::*;
        let rows = [
            (Stage::DataAgent, [(Docs, 1.0), (Paper, 0.9), (ExperimentReport, 0.8), (Leaderboard, 0.6)]),
            (
                Stage::ConfigurationAgent,
                [(Paper, 1.0), (ExperimentReport, 1.0), (Leaderboard, 0.9), (Docs, 0.7)],
            ),
            (
                Stage::PlanningReview,
                [(ExperimentReport, 1.0), (Leaderboard, 0.8), (Paper, 0.6), (Docs, 0.4)],
            ),
        ];
        Self {
            weights: rows
                .into_iter()
                .map(|(stage, row)| (stage, row.into_iter().collect()))
                .collect(),
        }
    }
}
