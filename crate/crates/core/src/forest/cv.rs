use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{train_forest, Hyperparams, TrainingSet};
use crate::error::{Error, Result};

// Keeps the fold shuffle stream apart from the per-tree streams.
const FOLD_STREAM: u64 = 0x5eed_f01d_0000_0001;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    /// Mean of the per-fold overall accuracies.
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub class_names: Vec<String>,
    /// `confusion[truth][predicted]`, summed over folds.
    pub confusion: Vec<Vec<u64>>,
}

/// Fold index of every sample. Each class is shuffled with the seeded RNG and
/// dealt round-robin; the deal continues across classes so folds stay balanced.
pub fn stratified_folds(data: &TrainingSet, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Training(format!("k must be at least 2, got {k}")));
    }
    if data.len() < k {
        return Err(Error::Training(format!(
            "{} samples for {k} folds",
            data.len()
        )));
    }
    let counts = data.class_counts();
    for (class, &count) in counts.iter().enumerate() {
        if count > 0 && count < k {
            return Err(Error::ClassTooSmall {
                class: data.class_names()[class].clone(),
                count,
                k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ FOLD_STREAM);
    let mut folds = vec![0; data.len()];
    let mut next = 0;
    for class in 0..counts.len() {
        let mut members: Vec<usize> = (0..data.len())
            .filter(|&i| data.labels()[i] as usize == class)
            .collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

/// Stratified k-fold cross-validation. Every fold trains with `hp` unchanged.
pub fn cross_validate(data: &TrainingSet, hp: &Hyperparams, k: usize) -> Result<CvReport> {
    hp.resolve(data.feature_count())?;
    let folds = stratified_folds(data, k, hp.seed)?;
    let n_classes = data.class_names().len();
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    let mut fold_accuracies = Vec::with_capacity(k);

    for fold in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..data.len()).partition(|&i| folds[i] == fold);
        let forest = train_forest(&data.subset(&train)?, hp)?;
        let mut correct = 0;
        for &i in &test {
            let (pred, _) = forest.predict(data.sample(i))?;
            let truth = data.labels()[i] as usize;
            confusion[truth][pred] += 1;
            correct += usize::from(pred == truth);
        }
        fold_accuracies.push(correct as f64 / test.len() as f64);
    }

    Ok(CvReport {
        k,
        seed: hp.seed,
        accuracy: fold_accuracies.iter().sum::<f64>() / k as f64,
        fold_accuracies,
        class_names: data.class_names().to_vec(),
        confusion,
    })
}
