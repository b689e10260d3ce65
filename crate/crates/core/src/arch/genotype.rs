use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const MAX_LAYERS: usize = 6;
pub const DIMS: [u32; 5] = [16, 32, 64, 128, 256];
/// Dropout is stored as a step count; the rate is `steps * 0.05`.
pub const DROPOUT_STEPS: u8 = 20;

macro_rules! keyword_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
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

keyword_enum!(
    /// Message-passing (or plain) layer operator.
    Op {
        Gcn => "gcn",
        Sage => "sage",
        Gat => "gat",
        Gin => "gin",
        Cheb => "cheb",
        Linear => "linear",
    }
);

keyword_enum!(Activation { Relu => "relu", Elu => "elu", Tanh => "tanh" });

keyword_enum!(Pooling { None => "none", Mean => "mean", Max => "max", Sum => "sum" });

keyword_enum!(LearningRate { Lr0_01 => "0.01", Lr0_005 => "0.005", Lr0_001 => "0.001" });

keyword_enum!(WeightDecay { Wd0 => "0", Wd0_0005 => "0.0005", Wd0_001 => "0.001" });

keyword_enum!(Epochs { E100 => "100", E200 => "200", E300 => "300" });

keyword_enum!(
    TaskType {
        NodeClassification => "node-classification",
        GraphClassification => "graph-classification",
        LinkRanking => "link-ranking",
    }
);

impl TaskType {
    pub fn is_graph_level(self) -> bool {
        matches!(self, TaskType::GraphClassification)
    }

    pub fn allowed_pooling(self) -> &'static [Pooling] {
        if self.is_graph_level() {
            &[Pooling::Mean, Pooling::Max, Pooling::Sum]
        } else {
            &[Pooling::None]
        }
    }
}

impl LearningRate {
    pub fn value(self) -> f64 {
        match self {
            LearningRate::Lr0_01 => 0.01,
            LearningRate::Lr0_005 => 0.005,
            LearningRate::Lr0_001 => 0.001,
        }
    }
}

impl WeightDecay {
    pub fn value(self) -> f64 {
        match self {
            WeightDecay::Wd0 => 0.0,
            WeightDecay::Wd0_0005 => 0.0005,
            WeightDecay::Wd0_001 => 0.001,
        }
    }
}

impl Epochs {
    pub fn value(self) -> u32 {
        match self {
            Epochs::E100 => 100,
            Epochs::E200 => 200,
            Epochs::E300 => 300,
        }
    }
}

/// A complete architecture plus its training hyperparameters.
///
/// `skips` holds `(from, to)` block indices where block 0 is the input and
/// block `i` is the output of layer `i`. Pairs are strictly increasing, so
/// the connection graph is acyclic by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArchGenotype {
    pub layers: Vec<Op>,
    pub hidden_dim: u32,
    pub activation: Activation,
    pub dropout_steps: u8,
    pub skips: BTreeSet<(u8, u8)>,
    pub pooling: Pooling,
    pub lr: LearningRate,
    pub weight_decay: WeightDecay,
    pub epochs: Epochs,
}

impl ArchGenotype {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn dropout(&self) -> f64 {
        f64::from(self.dropout_steps) * 0.05
    }

    /// All `(from, to)` pairs a skip may connect for the current depth.
    pub fn eligible_skips(&self) -> Vec<(u8, u8)> {
        eligible_skips(self.layers.len())
    }
}

pub(crate) fn eligible_skips(num_layers: usize) -> Vec<(u8, u8)> {
    let l = num_layers as u8;
    (0..l)
        .flat_map(|from| (from + 1..=l).map(move |to| (from, to)))
        .collect()
}

impl fmt::Display for ArchGenotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::encode(self))
    }
}

impl Serialize for ArchGenotype {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&super::encode(self))
    }
}

impl<'de> Deserialize<'de> for ArchGenotype {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        super::decode(&s).map_err(serde::de::Error::custom)
    }
}
