//! Dataset registry and graph profiling.
//!
//! A registry manifest (`registry.json`) lists per-kind feature effects and
//! the datasets, each stored in its own directory:
//!
//! * `nodes.tsv`: `node<TAB>label<TAB>f1,f2,...[<TAB>graph]`
//! * `edges.tsv`: `src<TAB>dst`, each undirected edge once
//! * `graphs.tsv`: `graph<TAB>label` (graph-level datasets only)
//! * `train.txt`, `val.txt`, `test.txt`: one node (or graph) id per line

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Directive, EvalError, GraphProfile, ProfileKind};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEffects {
    pub helpful: Vec<Directive>,
    pub harmful: Vec<Directive>,
}

#[derive(Debug, Clone, Deserialize)]
struct ManifestDataset {
    dataset: String,
    kind: ProfileKind,
    dir: String,
    #[serde(default)]
    homophily_estimate: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct Manifest {
    kinds: BTreeMap<ProfileKind, FeatureEffects>,
    datasets: Vec<ManifestDataset>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: u64,
    pub label: i64,
    pub features: Vec<f64>,
    pub graph: Option<u64>,
}

/// Parsed contents of a dataset directory.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphData {
    pub nodes: Vec<Node>,
    pub edges: Vec<(u64, u64)>,
    pub graph_labels: BTreeMap<u64, i64>,
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

pub struct DatasetFiles<'a> {
    pub nodes: &'a str,
    pub edges: &'a str,
    pub graphs: Option<&'a str>,
    pub train: &'a str,
    pub val: &'a str,
    pub test: &'a str,
}

fn bad(file: &str, line: usize, message: impl std::fmt::Display) -> EvalError {
    EvalError::Dataset(format!("{file}:{line}: {message}"))
}

fn parse_ids(file: &str, text: &str) -> Result<Vec<u64>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse().map_err(|e| bad(file, i + 1, e)))
        .collect()
}

impl GraphData {
    pub fn parse(files: &DatasetFiles<'_>) -> Result<Self, EvalError> {
        let mut nodes = Vec::new();
        for (i, line) in files.nodes.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 || cols.len() > 4 {
                return Err(bad("nodes.tsv", i + 1, "expected 3 or 4 columns"));
            }
            let features = cols[2]
                .split(',')
                .map(|x| x.parse::<f64>().map_err(|e| bad("nodes.tsv", i + 1, e)))
                .collect::<Result<Vec<_>, _>>()?;
            nodes.push(Node {
                id: cols[0].parse().map_err(|e| bad("nodes.tsv", i + 1, e))?,
                label: cols[1].parse().map_err(|e| bad("nodes.tsv", i + 1, e))?,
                features,
                graph: cols
                    .get(3)
                    .map(|g| g.parse().map_err(|e| bad("nodes.tsv", i + 1, e)))
                    .transpose()?,
            });
        }
        let known: BTreeSet<u64> = nodes.iter().map(|n| n.id).collect();
        let mut edges = Vec::new();
        for (i, line) in files.edges.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let (a, b) = line
                .split_once('\t')
                .ok_or_else(|| bad("edges.tsv", i + 1, "expected src<TAB>dst"))?;
            let a: u64 = a.parse().map_err(|e| bad("edges.tsv", i + 1, e))?;
            let b: u64 = b.parse().map_err(|e| bad("edges.tsv", i + 1, e))?;
            if !known.contains(&a) || !known.contains(&b) {
                return Err(bad("edges.tsv", i + 1, "edge endpoint is not a node"));
            }
            edges.push((a, b));
        }
        let mut graph_labels = BTreeMap::new();
        if let Some(graphs) = files.graphs {
            for (i, line) in graphs.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
                let (g, label) = line
                    .split_once('\t')
                    .ok_or_else(|| bad("graphs.tsv", i + 1, "expected graph<TAB>label"))?;
                graph_labels.insert(
                    g.parse().map_err(|e| bad("graphs.tsv", i + 1, e))?,
                    label.parse().map_err(|e| bad("graphs.tsv", i + 1, e))?,
                );
            }
        }
        Ok(Self {
            nodes,
            edges,
            graph_labels,
            train: parse_ids("train.txt", files.train)?,
            val: parse_ids("val.txt", files.val)?,
            test: parse_ids("test.txt", files.test)?,
        })
    }

    pub fn load_dir(dir: &Path) -> Result<Self, EvalError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| EvalError::Dataset(format!("{}: {e}", dir.join(name).display())))
        };
        let graphs = dir.join("graphs.tsv").exists().then(|| read("graphs.tsv")).transpose()?;
        let (nodes, edges, train, val, test) = (
            read("nodes.tsv")?,
            read("edges.tsv")?,
            read("train.txt")?,
            read("val.txt")?,
            read("test.txt")?,
        );
        Self::parse(&DatasetFiles {
            nodes: &nodes,
            edges: &edges,
            graphs: graphs.as_deref(),
            train: &train,
            val: &val,
            test: &test,
        })
    }

    /// Fraction of edges whose endpoints share a label.
    pub fn edge_homophily(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        let labels: BTreeMap<u64, i64> = self.nodes.iter().map(|n| (n.id, n.label)).collect();
        let agreeing = self
            .edges
            .iter()
            .filter(|(a, b)| labels[a] == labels[b])
            .count();
        agreeing as f64 / self.edges.len() as f64
    }

    pub fn feature_dim(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.features.len())
    }

    pub fn num_classes(&self, kind: ProfileKind) -> usize {
        let labels: BTreeSet<i64> = if kind == ProfileKind::GraphMolecule {
            self.graph_labels.values().copied().collect()
        } else {
            self.nodes.iter().map(|n| n.label).collect()
        };
        labels.len()
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, Default)]
pub struct DatasetRegistry {
    profiles: BTreeMap<String, GraphProfile>,
    effects: BTreeMap<ProfileKind, FeatureEffects>,
}

macro_rules! builtin_files {
    ($dir:literal, $graphs:expr) => {
        DatasetFiles {
            nodes: include_str!(concat!("../../fixtures/datasets/", $dir, "/nodes.tsv")),
            edges: include_str!(concat!("../../fixtures/datasets/", $dir, "/edges.tsv")),
            graphs: $graphs,
            train: include_str!(concat!("../../fixtures/datasets/", $dir, "/train.txt")),
            val: include_str!(concat!("../../fixtures/datasets/", $dir, "/val.txt")),
            test: include_str!(concat!("../../fixtures/datasets/", $dir, "/test.txt")),
        }
    };
}

impl DatasetRegistry {
    /// The shipped toy datasets: `toy-cora`, `toy-actor`, `toy-mol`.
    pub fn builtin() -> Self {
        let manifest: Manifest =
            serde_json::from_str(include_str!("../../fixtures/datasets/registry.json"))
                .expect("builtin registry manifest parses");
        let mut registry = Self {
            profiles: BTreeMap::new(),
            effects: manifest.kinds,
        };
        for entry in manifest.datasets {
            let files = match entry.dir.as_str() {
                "toy-cora" => builtin_files!("toy-cora", None),
                "toy-actor" => builtin_files!("toy-actor", None),
                "toy-mol" => builtin_files!(
                    "toy-mol",
                    Some(include_str!("../../fixtures/datasets/toy-mol/graphs.tsv"))
                ),
                other => panic!("builtin registry names unknown directory {other}"),
            };
            let data = GraphData::parse(&files).expect("builtin dataset parses");
            registry.insert_profile(&entry, &data);
        }
        registry
    }

    /// Loads a registry manifest and the dataset directories it names.
    pub fn load(manifest_path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(manifest_path)
            .map_err(|e| EvalError::Dataset(format!("{}: {e}", manifest_path.display())))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| EvalError::Dataset(format!("{}: {e}", manifest_path.display())))?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let mut registry = Self {
            profiles: BTreeMap::new(),
            effects: manifest.kinds,
        };
        for entry in &manifest.datasets {
            let data = GraphData::load_dir(&base.join(&entry.dir))?;
            registry.insert_profile(entry, &data);
        }
        Ok(registry)
    }

    /// Adds the datasets of `other`, which win on name clashes.
    pub fn merge(&mut self, other: DatasetRegistry) {
        self.profiles.extend(other.profiles);
        self.effects.extend(other.effects);
    }

    fn insert_profile(&mut self, entry: &ManifestDataset, data: &GraphData) {
        let profile = GraphProfile {
            dataset: entry.dataset.clone(),
            kind: entry.kind,
            num_nodes: data.nodes.len(),
            num_edges: data.edges.len(),
            feature_dim: data.feature_dim(),
            num_classes: data.num_classes(entry.kind),
            homophily_estimate: entry
                .homophily_estimate
                .unwrap_or_else(|| round2(data.edge_homophily())),
        };
        self.profiles.insert(entry.dataset.clone(), profile);
    }

    pub fn graph_profile(&self, dataset: &str) -> Result<GraphProfile, EvalError> {
        self.profiles
            .get(dataset)
            .cloned()
            .ok_or_else(|| EvalError::UnknownDataset(dataset.to_string()))
    }

    pub fn contains(&self, dataset: &str) -> bool {
        self.profiles.contains_key(dataset)
    }

    pub fn datasets(&self) -> Vec<String> {
        self.profiles.keys().cloned().collect()
    }

    pub fn feature_effects(&self, kind: ProfileKind) -> FeatureEffects {
        self.effects.get(&kind).cloned().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_cora_profile() {
        let registry = DatasetRegistry::builtin();
        let profile = registry.graph_profile("toy-cora").unwrap();
        assert_eq!(profile.kind, ProfileKind::HomophilousNode);
        assert_eq!(profile.homophily_estimate, 0.81);
        assert_eq!(profile.num_nodes, 70);
        assert_eq!(profile.num_edges, 100);
        assert_eq!(profile.feature_dim, 8);
        assert_eq!(profile.num_classes, 7);
        assert_eq!(registry.graph_profile("toy-cora").unwrap(), profile);
    }

    #[test]
    fn frozen_homophily_matches_edge_label_agreement() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/datasets");
        let registry = DatasetRegistry::builtin();
        for name in ["toy-cora", "toy-actor", "toy-mol"] {
            let data = GraphData::load_dir(&root.join(name)).unwrap();
            let frozen = registry.graph_profile(name).unwrap().homophily_estimate;
            assert_eq!(round2(data.edge_homophily()), frozen, "{name}");
        }
        let cora = GraphData::load_dir(&root.join("toy-cora")).unwrap();
        assert_eq!(cora.edge_homophily(), 0.81);
    }

    #[test]
    fn loading_manifest_from_disk_matches_builtin() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/datasets/registry.json");
        let loaded = DatasetRegistry::load(&root).unwrap();
        let builtin = DatasetRegistry::builtin();
        for name in builtin.datasets() {
            assert_eq!(loaded.graph_profile(&name).unwrap(), builtin.graph_profile(&name).unwrap());
        }
    }

    #[test]
    fn unknown_dataset() {
        assert!(matches!(
            DatasetRegistry::builtin().graph_profile("ogbn-arxiv"),
            Err(EvalError::UnknownDataset(_))
        ));
    }

    #[test]
    fn molecule_classes_come_from_graph_labels() {
        let profile = DatasetRegistry::builtin().graph_profile("toy-mol").unwrap();
        assert_eq!(profile.kind, ProfileKind::GraphMolecule);
        assert_eq!(profile.num_classes, 2);
    }
}
