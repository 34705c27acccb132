//! Deterministic train/holdout splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use clinsvm::encoding::LabeledDataset;

/// Splits off a held-out fraction with a seeded shuffle. Row order within
/// each side follows the original dataset, so reruns with the same seed are
/// identical. The training side must keep at least one row of each class.
pub fn split_holdout(
    dataset: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), String> {
    let l = dataset.len();
    let n_test = ((fraction * l as f64).floor() as usize).max(1);
    if n_test >= l {
        return Err(format!(
            "holdout of {n_test} rows leaves no training data (dataset has {l})"
        ));
    }
    let mut indices: Vec<usize> = (0..l).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut test_idx = indices[..n_test].to_vec();
    let mut train_idx = indices[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();

    let take = |idx: &[usize]| -> Result<LabeledDataset, String> {
        let vectors = idx.iter().map(|&i| dataset.vectors()[i].clone()).collect();
        let labels = idx.iter().map(|&i| dataset.labels()[i]).collect();
        match dataset.scaling() {
            Some(scaling) => LabeledDataset::with_scaling(vectors, labels, scaling.to_vec()),
            None => LabeledDataset::new(vectors, labels),
        }
        .map_err(|e| e.to_string())
    };
    let train = take(&train_idx)?;
    let test = take(&test_idx)?;
    let (pos, neg) = train.class_counts();
    if pos == 0 || neg == 0 {
        return Err("holdout split left the training side with a single class; try another seed or a smaller fraction".into());
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clinsvm::encoding::{FeatureVector, Label};

    fn dataset(n: usize) -> LabeledDataset {
        let vectors = (0..n)
            .map(|i| FeatureVector::new(vec![i as f64]).unwrap())
            .collect();
        let labels = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect();
        LabeledDataset::new(vectors, labels).unwrap()
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let data = dataset(20);
        let (train_a, test_a) = split_holdout(&data, 0.3, 9).unwrap();
        let (train_b, test_b) = split_holdout(&data, 0.3, 9).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(test_a.len(), 6);
        assert_eq!(train_a.len() + test_a.len(), 20);

        let (train_c, _) = split_holdout(&data, 0.3, 10).unwrap();
        assert_ne!(train_a, train_c);
    }

    #[test]
    fn tiny_fractions_still_hold_out_one_row() {
        let data = dataset(10);
        let (train, test) = split_holdout(&data, 0.01, 0).unwrap();
        assert_eq!(test.len(), 1);
        assert_eq!(train.len(), 9);
    }

    #[test]
    fn overlarge_holdout_is_rejected() {
        let data = dataset(3);
        assert!(split_holdout(&data, 0.9, 0).is_err());
    }
}
