//! Random-forest classification built from scratch.
//!
//! Each tree is grown on a bootstrap sample of the training set (size N,
//! drawn with replacement) and considers `mtry` randomly chosen features per
//! split. Trees vote; a class's probability is its share of the votes.
//!
//! Tree `i` draws from its own RNG stream seeded with
//! `seed ^ splitmix64(i)`, so the forest depends only on the data and the
//! hyperparameters, not on how many threads grew it.

mod cv;
mod dataset;
mod model_io;
mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassRaster, NODATA_CLASS};
use crate::error::{Error, Result};
use crate::indices::FeatureStack;

pub use cv::{cross_validate, stratified_folds, CvReport};
pub use dataset::{training_set_from_scene, LABEL_UNLABELED};
pub use model_io::{deserialize, load_model, save_model, serialize, FORMAT_VERSION};
pub use tree::{gini, Tree, TreeNode};

/// Labeled samples, row-major `N × F`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Vec<f32>,
    labels: Vec<u8>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

impl TrainingSet {
    pub fn new(
        features: Vec<f32>,
        labels: Vec<u8>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        let f = feature_names.len();
        if n == 0 {
            return Err(Error::Training("no samples".into()));
        }
        if f == 0 {
            return Err(Error::Training("no features".into()));
        }
        if features.len() != n * f {
            return Err(Error::Training(format!(
                "{} feature values for {n} samples of {f} features",
                features.len()
            )));
        }
        if class_names.is_empty() || class_names.len() > NODATA_CLASS as usize {
            return Err(Error::Training(format!("{} classes", class_names.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= class_names.len()) {
            return Err(Error::Training(format!(
                "label {bad} outside {} classes",
                class_names.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite value in sample {} feature {}",
                i / f,
                i % f
            )));
        }
        Ok(TrainingSet {
            features,
            labels,
            class_names,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let f = self.feature_count();
        &self.features[i * f..(i + 1) * f]
    }

    #[inline]
    pub(crate) fn value(&self, sample: usize, feature: usize) -> f32 {
        self.features[sample * self.feature_names.len() + feature]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<TrainingSet> {
        let mut features = Vec::with_capacity(indices.len() * self.feature_count());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        TrainingSet::new(
            features,
            labels,
            self.class_names.clone(),
            self.feature_names.clone(),
        )
    }

    /// Appends `other`, which must share class and feature names.
    pub fn extend(&mut self, other: &TrainingSet) -> Result<()> {
        if other.class_names != self.class_names || other.feature_names != self.feature_names {
            return Err(Error::Training(
                "cannot merge training sets with different classes or features".into(),
            ));
        }
        self.features.extend_from_slice(&other.features);
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means ⌊√F⌋.
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            mtry: None,
            seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn with_seed(seed: u64) -> Self {
        Hyperparams {
            seed,
            ..Default::default()
        }
    }

    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1))
    }

    /// Checks constraints and returns a copy with `mtry` made explicit.
    pub fn resolve(&self, n_features: usize) -> Result<Hyperparams> {
        if self.n_trees == 0 {
            return Err(Error::Hyperparams("n_trees must be positive".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Hyperparams(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Hyperparams("max_depth must be positive".into()));
        }
        let mtry = self.resolved_mtry(n_features);
        if mtry == 0 || mtry > n_features {
            return Err(Error::Hyperparams(format!(
                "mtry {mtry} must lie in 1..={n_features}"
            )));
        }
        Ok(Hyperparams {
            mtry: Some(mtry),
            ..self.clone()
        })
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ splitmix64(tree_index as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    hyperparams: Hyperparams,
}

/// Grows the forest, parallel across trees on the current rayon pool.
pub fn train_forest(data: &TrainingSet, hp: &Hyperparams) -> Result<Forest> {
    let hp = hp.resolve(data.feature_count())?;
    let params = tree::GrowParams {
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
        mtry: hp.mtry.expect("resolved"),
    };
    let n = data.len();
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(hp.seed, t);
            let bag: Vec<u32> = (0..n).map(|_| rng.random_range(0..n) as u32).collect();
            tree::grow(data, bag, &params, &mut rng)
        })
        .collect();
    Ok(Forest {
        trees,
        class_names: data.class_names.clone(),
        feature_names: data.feature_names.clone(),
        hyperparams: hp,
    })
}

/// Bootstrap indices tree `tree_index` is grown on.
pub fn bootstrap_sample(n: usize, seed: u64, tree_index: usize) -> Vec<usize> {
    let mut rng = tree_rng(seed, tree_index);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

impl Forest {
    pub fn from_parts(
        trees: Vec<Tree>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
        hyperparams: Hyperparams,
    ) -> Result<Forest> {
        if trees.is_empty() {
            return Err(Error::Model("forest has no trees".into()));
        }
        if hyperparams.n_trees != trees.len() {
            return Err(Error::Model(format!(
                "hyperparams say {} trees, found {}",
                hyperparams.n_trees,
                trees.len()
            )));
        }
        for t in &trees {
            if t.max_feature().is_some_and(|f| f >= feature_names.len()) {
                return Err(Error::Model("tree references an unknown feature".into()));
            }
            if t.leaf_histograms()
                .iter()
                .any(|h| h.len() != class_names.len())
            {
                return Err(Error::Model(
                    "leaf histogram arity differs from class count".into(),
                ));
            }
        }
        Ok(Forest {
            trees,
            class_names,
            feature_names,
            hyperparams,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    fn check_input(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.feature_names.len() {
            return Err(Error::Arity {
                expected: self.feature_names.len(),
                actual: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    #[inline]
    fn vote_into(&self, x: &[f32], votes: &mut [u32]) {
        votes.iter_mut().for_each(|v| *v = 0);
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
    }

    /// Number of trees voting for each class; sums to `n_trees`.
    pub fn votes(&self, x: &[f32]) -> Result<Vec<u32>> {
        self.check_input(x)?;
        let mut votes = vec![0; self.class_names.len()];
        self.vote_into(x, &mut votes);
        Ok(votes)
    }

    pub fn predict_proba(&self, x: &[f32]) -> Result<Vec<f64>> {
        let n = self.trees.len() as f64;
        Ok(self.votes(x)?.into_iter().map(|v| v as f64 / n).collect())
    }

    /// Winning class (ties to the lowest index) and its vote fraction.
    pub fn predict(&self, x: &[f32]) -> Result<(usize, f64)> {
        let votes = self.votes(x)?;
        let (class, top) = argmax(&votes);
        Ok((class, top as f64 / self.trees.len() as f64))
    }
}

fn argmax(votes: &[u32]) -> (usize, u32) {
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    (best, votes[best])
}

/// Classifies every usable pixel of `stack`; unusable pixels become nodata.
pub fn predict_raster(forest: &Forest, stack: &FeatureStack) -> Result<ClassRaster> {
    if stack.feature_names() != forest.feature_names() {
        return Err(Error::FeatureMismatch {
            expected: forest.feature_names.clone(),
            actual: stack.feature_names().to_vec(),
        });
    }
    let (w, h) = (stack.width(), stack.height());
    let n_classes = forest.class_names.len();
    let n_trees = forest.trees.len() as f32;
    let mut class_ids = vec![NODATA_CLASS; w * h];
    let mut confidence = vec![0f32; w * h];
    class_ids
        .par_chunks_mut(w)
        .zip(confidence.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (ids, conf))| {
            let mut x_buf = vec![0f32; stack.feature_count()];
            let mut votes = vec![0u32; n_classes];
            for x in 0..w {
                let i = y * w + x;
                if !stack.valid().bits()[i] {
                    continue;
                }
                stack.pixel_into(i, &mut x_buf);
                forest.vote_into(&x_buf, &mut votes);
                let (class, top) = argmax(&votes);
                ids[x] = class as u8;
                conf[x] = top as f32 / n_trees;
            }
        });
    ClassRaster::new(w, h, class_ids, confidence, forest.class_names.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BinaryMask;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn two_clouds() -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2u8 {
            let cx = if class == 0 { -5.0 } else { 5.0 };
            for _ in 0..100 {
                features.push(cx + rng.random_range(-1.0f32..1.0));
                features.push(cx + rng.random_range(-1.0f32..1.0));
                labels.push(class);
            }
        }
        TrainingSet::new(features, labels, names("c", 2), names("f", 2)).unwrap()
    }

    #[test]
    fn separated_clouds_fit_perfectly() {
        let data = two_clouds();
        let forest = train_forest(&data, &Hyperparams::with_seed(1)).unwrap();
        assert_eq!(forest.n_trees(), 100);
        for i in 0..data.len() {
            let (c, _) = forest.predict(data.sample(i)).unwrap();
            assert_eq!(c, data.labels()[i] as usize);
        }
    }

    #[test]
    fn single_class_gives_leaf_trees() {
        let data = TrainingSet::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1, 1],
            names("c", 3),
            names("f", 2),
        )
        .unwrap();
        let forest = train_forest(&data, &Hyperparams::with_seed(0)).unwrap();
        assert!(forest.trees().iter().all(Tree::is_leaf));
        assert_eq!(
            forest.predict_proba(&[9.0, 9.0]).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
        assert_eq!(forest.predict(&[0.0, 0.0]).unwrap(), (1, 1.0));
    }

    #[test]
    fn one_leaf_tree_votes_majority() {
        let tree = Tree::from_node(
            &TreeNode::Leaf {
                histogram: vec![3, 7],
            },
            1,
            2,
        )
        .unwrap();
        let hp = Hyperparams {
            n_trees: 1,
            ..Default::default()
        };
        let forest = Forest::from_parts(vec![tree], names("c", 2), names("f", 1), hp).unwrap();
        assert_eq!(forest.predict_proba(&[0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn vote_fractions() {
        let leaf = |c: usize| {
            let mut h = vec![0, 0];
            h[c] = 1;
            Tree::from_node(&TreeNode::Leaf { histogram: h }, 1, 2).unwrap()
        };
        let mut trees: Vec<Tree> = (0..9).map(|_| leaf(0)).collect();
        trees.push(leaf(1));
        let hp = Hyperparams {
            n_trees: 10,
            ..Default::default()
        };
        let forest = Forest::from_parts(trees, names("c", 2), names("f", 1), hp).unwrap();
        let p = forest.predict_proba(&[0.0]).unwrap();
        assert_eq!(p[0], 0.9);
        assert_eq!(forest.votes(&[0.0]).unwrap().iter().sum::<u32>(), 10);
    }

    #[test]
    fn rejects_bad_input_vectors() {
        let forest = train_forest(&two_clouds(), &Hyperparams::with_seed(1)).unwrap();
        assert!(matches!(
            forest.predict_proba(&[1.0]),
            Err(Error::Arity { .. })
        ));
        assert!(matches!(
            forest.predict_proba(&[1.0, f32::NAN]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn hyperparam_validation() {
        let data = two_clouds();
        let bad = Hyperparams {
            mtry: Some(3),
            ..Default::default()
        };
        assert!(matches!(
            train_forest(&data, &bad),
            Err(Error::Hyperparams(_))
        ));
        let bad = Hyperparams {
            min_samples_leaf: 0,
            ..Default::default()
        };
        assert!(train_forest(&data, &bad).is_err());
        assert_eq!(Hyperparams::default().resolved_mtry(9), 3);
    }

    #[test]
    fn bootstrap_bags_have_size_n() {
        for t in 0..10 {
            let bag = bootstrap_sample(200, 5, t);
            assert_eq!(bag.len(), 200);
            let distinct: std::collections::HashSet<_> = bag.iter().collect();
            assert!(distinct.len() < 200, "out-of-bag set should be nonempty");
        }
        assert_ne!(bootstrap_sample(50, 5, 0), bootstrap_sample(50, 5, 1));
    }

    #[test]
    fn min_samples_leaf_respected() {
        let data = two_clouds();
        let hp = Hyperparams {
            n_trees: 5,
            min_samples_leaf: 7,
            ..Default::default()
        };
        let forest = train_forest(&data, &hp).unwrap();
        for t in forest.trees() {
            for h in t.leaf_histograms() {
                assert!(h.iter().sum::<u32>() >= 7);
            }
        }
        let shallow = Hyperparams {
            n_trees: 5,
            max_depth: Some(1),
            ..Default::default()
        };
        let forest = train_forest(&data, &shallow).unwrap();
        assert!(forest.trees().iter().all(|t| t.depth() <= 1));
    }

    #[test]
    fn raster_prediction_marks_invalid_pixels() {
        let data = two_clouds();
        let forest = train_forest(&data, &Hyperparams::with_seed(2)).unwrap();
        let valid = BinaryMask::from_bits(3, 1, vec![true, false, true]).unwrap();
        let stack = FeatureStack::new(
            names("f", 2),
            vec![vec![-5.0, f32::NAN, 5.0], vec![-5.0, f32::NAN, 5.0]],
            valid,
        )
        .unwrap();
        let cr = predict_raster(&forest, &stack).unwrap();
        assert_eq!(cr.class_ids(), &[0, NODATA_CLASS, 1]);
        assert_eq!(cr.confidence()[1], 0.0);
        assert_eq!(cr.confidence()[0], 1.0);

        let none = FeatureStack::new(
            names("f", 2),
            vec![vec![0.0; 3], vec![0.0; 3]],
            BinaryMask::new(3, 1),
        )
        .unwrap();
        assert_eq!(predict_raster(&forest, &none).unwrap().valid_count(), 0);

        let wrong =
            FeatureStack::new(names("g", 2), vec![vec![0.0; 3]; 2], BinaryMask::new(3, 1)).unwrap();
        assert!(matches!(
            predict_raster(&forest, &wrong),
            Err(Error::FeatureMismatch { .. })
        ));
    }
}
