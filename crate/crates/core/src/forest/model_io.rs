//! JSON model documents.
//!
//! ```json
//! {"format_version": 1, "class_names": [...], "feature_names": [...],
//!  "hyperparams": {...},
//!  "trees": [{"split": {"f": 3, "t": 0.41, "l": {...}, "r": {...}}}, {"leaf": {"hist": [12, 0]}}]}
//! ```
//!
//! Thresholds are written in shortest round-trip decimal form and parsed
//! back to the identical `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Forest, Hyperparams, Tree, TreeNode};
use crate::error::{Error, Result};
use crate::fsutil;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct ForestOut<'a> {
    format_version: u32,
    class_names: &'a [String],
    feature_names: &'a [String],
    hyperparams: &'a Hyperparams,
    trees: Vec<TreeNode>,
}

#[derive(Deserialize)]
struct ForestIn {
    class_names: Vec<String>,
    feature_names: Vec<String>,
    hyperparams: Hyperparams,
    trees: Vec<TreeNode>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn serialize(forest: &Forest) -> String {
    let doc = ForestOut {
        format_version: FORMAT_VERSION,
        class_names: &forest.class_names,
        feature_names: &forest.feature_names,
        hyperparams: &forest.hyperparams,
        trees: forest.trees.iter().map(Tree::to_node).collect(),
    };
    serde_json::to_string(&doc).expect("forest serializes")
}

fn parse<'de, T: Deserialize<'de>>(text: &'de str) -> std::result::Result<T, serde_json::Error> {
    // Unbounded trees nest deeper than serde_json's default limit.
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let value = T::deserialize(&mut de)?;
    de.end()?;
    Ok(value)
}

pub fn deserialize(text: &str) -> Result<Forest> {
    let probe: VersionProbe = parse(text).map_err(|e| Error::Model(e.to_string()))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::ModelVersion {
            found: probe.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let doc: ForestIn = parse(text).map_err(|e| Error::Model(e.to_string()))?;
    let n_features = doc.feature_names.len();
    let n_classes = doc.class_names.len();
    let trees = doc
        .trees
        .iter()
        .map(|t| Tree::from_node(t, n_features, n_classes))
        .collect::<Result<Vec<_>>>()?;
    Forest::from_parts(trees, doc.class_names, doc.feature_names, doc.hyperparams)
}

pub fn save_model(forest: &Forest, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), serialize(forest).as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Forest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    deserialize(&text)
}
