//! Decision-tree NIDS: load a pre-trained model, classify flow records with
//! integer `<=` threshold walks, and compile models to P4-style source.
//!
//! Models arrive as "dtm-1" JSON text: a flat list of internal nodes and
//! leaves sharing one id namespace. Thresholds are unsigned integers; a
//! model trained with fractional thresholds must be floored to integers
//! before export, since the target pipeline has no floating point.

mod p4;

pub use p4::{compile_to_p4, CompileError};

use serde::Deserialize;
use thiserror::Error;

use crate::catalog::{FeatureId, FeatureMask};
use crate::flowtable::FlowRecord;

/// Hard ceiling on tree depth; keeps emitted code reviewable.
pub const MAX_DEPTH: u32 = 32;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format {0:?}, expected \"dtm-1\"")]
    BadFormat(String),
    #[error("id {0} is declared more than once")]
    DuplicateId(u32),
    #[error("node {node}: unknown feature {feature:?}")]
    UnknownFeature { node: u32, feature: String },
    #[error("node {node}: threshold {threshold} exceeds {feature} width (max {max})")]
    ThresholdOverflow { node: u32, feature: FeatureId, threshold: u64, max: u64 },
    #[error("leaf {leaf}: label {label} is not 0 or 1")]
    BadLabel { leaf: u32, label: u64 },
    #[error("node {node}: {reason}")]
    MalformedTree { node: u32, reason: String },
    #[error("tree depth {depth} exceeds the supported maximum {MAX_DEPTH}")]
    TooDeep { depth: u32 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    format: String,
    root: u32,
    #[serde(default)]
    nodes: Vec<RawNode>,
    #[serde(default)]
    leaves: Vec<RawLeaf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: u32,
    feature: String,
    threshold: u64,
    left: u32,
    right: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLeaf {
    id: u32,
    label: u64,
}

/// Child pointer inside the packed model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ChildRef {
    Node(u32),
    Leaf(u32),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PackedNode {
    pub(crate) feature: FeatureId,
    pub(crate) threshold: u64,
    /// children[0] = left (condition true), children[1] = right.
    pub(crate) children: [ChildRef; 2],
    /// Id from the model file, for diagnostics.
    pub(crate) orig_id: u32,
}

/// A validated, immutable decision-tree model.
#[derive(Debug, Clone)]
pub struct DecisionTreeModel {
    pub(crate) nodes: Vec<PackedNode>,
    pub(crate) leaf_labels: Vec<u8>,
    pub(crate) leaf_ids: Vec<u32>,
    pub(crate) root: ChildRef,
    depth: u32,
    features: FeatureMask,
}

/// One comparison along a classification path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub feature: FeatureId,
    pub threshold: u64,
    pub went_left: bool,
}

/// Classification outcome with the traversed path for explainability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    /// 0 benign, 1 malicious.
    pub label: u8,
    /// Id (from the model file) of the leaf reached.
    pub leaf_id: u32,
    pub path: Vec<PathStep>,
}

/// Structural counts for a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelStats {
    /// Maximum number of comparisons on any root-to-leaf path.
    pub depth: u32,
    /// Internal nodes plus leaves.
    pub node_count: usize,
    pub distinct_features: usize,
    /// Register reads the compiled pipeline performs: one per distinct
    /// feature.
    pub register_reads: usize,
}

enum Entry {
    Node(usize),
    Leaf(usize),
}

/// Parse and validate dtm-1 model text.
pub fn load_model(text: &str) -> Result<DecisionTreeModel, ModelError> {
    let raw: RawModel = serde_json::from_str(text)?;
    if raw.format != "dtm-1" {
        return Err(ModelError::BadFormat(raw.format));
    }

    // One id namespace across nodes and leaves.
    let mut by_id = std::collections::HashMap::new();
    for (i, n) in raw.nodes.iter().enumerate() {
        if by_id.insert(n.id, Entry::Node(i)).is_some() {
            return Err(ModelError::DuplicateId(n.id));
        }
    }
    for (i, l) in raw.leaves.iter().enumerate() {
        if by_id.insert(l.id, Entry::Leaf(i)).is_some() {
            return Err(ModelError::DuplicateId(l.id));
        }
    }

    // Per-entry checks before walking the structure, so a bad feature name
    // is reported as such even if the node is also mis-linked.
    let mut features = FeatureMask::empty();
    let mut packed_nodes = Vec::with_capacity(raw.nodes.len());
    for n in &raw.nodes {
        let feature = FeatureId::from_name(&n.feature).ok_or_else(|| {
            ModelError::UnknownFeature { node: n.id, feature: n.feature.clone() }
        })?;
        if n.threshold > feature.max_value() {
            return Err(ModelError::ThresholdOverflow {
                node: n.id,
                feature,
                threshold: n.threshold,
                max: feature.max_value(),
            });
        }
        features.insert(feature);
        packed_nodes.push(PackedNode {
            feature,
            threshold: n.threshold,
            // Placeholder; resolved after the reachability walk.
            children: [ChildRef::Leaf(0); 2],
            orig_id: n.id,
        });
    }
    let mut leaf_labels = Vec::with_capacity(raw.leaves.len());
    let mut leaf_ids = Vec::with_capacity(raw.leaves.len());
    for l in &raw.leaves {
        if l.label > 1 {
            return Err(ModelError::BadLabel { leaf: l.id, label: l.label });
        }
        leaf_labels.push(l.label as u8);
        leaf_ids.push(l.id);
    }

    let resolve = |parent: u32, child: u32| -> Result<ChildRef, ModelError> {
        match by_id.get(&child) {
            Some(Entry::Node(i)) => Ok(ChildRef::Node(*i as u32)),
            Some(Entry::Leaf(i)) => Ok(ChildRef::Leaf(*i as u32)),
            None => Err(ModelError::MalformedTree {
                node: parent,
                reason: format!("child {child} is not a declared node or leaf"),
            }),
        }
    };

    let root = match by_id.get(&raw.root) {
        Some(Entry::Node(i)) => ChildRef::Node(*i as u32),
        Some(Entry::Leaf(i)) => ChildRef::Leaf(*i as u32),
        None => {
            return Err(ModelError::MalformedTree {
                node: raw.root,
                reason: "root id is not a declared node or leaf".to_string(),
            })
        }
    };

    // Iterative walk from the root: resolves children, rejects shared
    // children and cycles (both manifest as a second visit), measures depth.
    let mut node_seen = vec![false; raw.nodes.len()];
    let mut leaf_seen = vec![false; raw.leaves.len()];
    let mut max_depth = 0u32;
    let mut stack = vec![(root, 0u32)];
    while let Some((cur, depth)) = stack.pop() {
        match cur {
            ChildRef::Leaf(i) => {
                let i = i as usize;
                if leaf_seen[i] {
                    return Err(ModelError::MalformedTree {
                        node: leaf_ids[i],
                        reason: "reached by more than one path".to_string(),
                    });
                }
                leaf_seen[i] = true;
                max_depth = max_depth.max(depth);
            }
            ChildRef::Node(i) => {
                let i = i as usize;
                if node_seen[i] {
                    return Err(ModelError::MalformedTree {
                        node: packed_nodes[i].orig_id,
                        reason: "reached by more than one path (shared child or cycle)"
                            .to_string(),
                    });
                }
                node_seen[i] = true;
                if depth + 1 > MAX_DEPTH {
                    return Err(ModelError::TooDeep { depth: depth + 1 });
                }
                let id = packed_nodes[i].orig_id;
                let left = resolve(id, raw.nodes[i].left)?;
                let right = resolve(id, raw.nodes[i].right)?;
                packed_nodes[i].children = [left, right];
                stack.push((left, depth + 1));
                stack.push((right, depth + 1));
            }
        }
    }
    if let Some(i) = node_seen.iter().position(|seen| !seen) {
        return Err(ModelError::MalformedTree {
            node: packed_nodes[i].orig_id,
            reason: "unreachable from root".to_string(),
        });
    }
    if let Some(i) = leaf_seen.iter().position(|seen| !seen) {
        return Err(ModelError::MalformedTree {
            node: leaf_ids[i],
            reason: "unreachable from root".to_string(),
        });
    }

    Ok(DecisionTreeModel {
        nodes: packed_nodes,
        leaf_labels,
        leaf_ids,
        root,
        depth: max_depth,
        features,
    })
}

impl DecisionTreeModel {
    /// Walk the tree and return the leaf label without building a path or
    /// touching the record. The hot path for in-band classification.
    #[inline]
    pub fn classify_label(&self, record: &FlowRecord) -> u8 {
        let mut cur = self.root;
        loop {
            match cur {
                ChildRef::Leaf(i) => return self.leaf_labels[i as usize],
                ChildRef::Node(i) => {
                    let n = &self.nodes[i as usize];
                    let went_right = record.feature(n.feature) > n.threshold;
                    cur = n.children[went_right as usize];
                }
            }
        }
    }

    /// Classify with full path reporting; also writes the label into the
    /// record's malicious flag, mirroring the register write the compiled
    /// pipeline performs.
    pub fn classify(&self, record: &mut FlowRecord) -> Verdict {
        let mut path = Vec::with_capacity(self.depth as usize);
        let mut cur = self.root;
        loop {
            match cur {
                ChildRef::Leaf(i) => {
                    let label = self.leaf_labels[i as usize];
                    record.malicious_flag = label;
                    return Verdict { label, leaf_id: self.leaf_ids[i as usize], path };
                }
                ChildRef::Node(i) => {
                    let n = &self.nodes[i as usize];
                    let went_left = record.feature(n.feature) <= n.threshold;
                    path.push(PathStep { feature: n.feature, threshold: n.threshold, went_left });
                    cur = n.children[usize::from(!went_left)];
                }
            }
        }
    }

    /// Mask of every feature referenced by some node.
    pub fn feature_mask(&self) -> FeatureMask {
        self.features
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn stats(&self) -> ModelStats {
        ModelStats {
            depth: self.depth,
            node_count: self.nodes.len() + self.leaf_labels.len(),
            distinct_features: self.features.len(),
            register_reads: self.features.len(),
        }
    }

    /// Root node's (feature, threshold), if the root is an internal node.
    pub fn root_condition(&self) -> Option<(FeatureId, u64)> {
        match self.root {
            ChildRef::Node(i) => {
                let n = &self.nodes[i as usize];
                Some((n.feature, n.threshold))
            }
            ChildRef::Leaf(_) => None,
        }
    }
}

/// Shorthand for model_stats(model).
pub fn model_stats(model: &DecisionTreeModel) -> ModelStats {
    model.stats()
}
