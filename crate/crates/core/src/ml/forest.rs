//! Random forest of bootstrap-sampled CART trees split on Gini impurity.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Features, MLDataset, MLError, Model};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum Tree<T> {
    /// Share of experts among the training samples that reached the leaf.
    Leaf(T),
    Split {
        feature: usize,
        threshold: T,
        left: Box<Tree<T>>,
        right: Box<Tree<T>>,
    },
}

impl<T: Scalar> Tree<T> {
    pub fn score(&self, x: &Features<T>) -> T {
        let mut node = self;
        loop {
            match node {
                Tree::Leaf(p) => return *p,
                Tree::Split { feature, threshold, left, right } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest<T> {
    pub trees: Vec<Tree<T>>,
}

struct Grower<'a, T> {
    xs: &'a [Features<T>],
    ys: &'a [bool],
    max_depth: Option<usize>,
    max_features: usize,
}

fn gini<T: Scalar>(positives: usize, total: usize) -> T {
    if total == 0 {
        return T::zero();
    }
    let p = T::of_usize(positives) / T::of_usize(total);
    T::of(2.0) * p * (T::one() - p)
}

impl<T: Scalar> Grower<'_, T> {
    fn grow(&self, samples: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> Tree<T> {
        let positives = samples.iter().filter(|&&i| self.ys[i]).count();
        let leaf = Tree::Leaf(T::of_usize(positives) / T::of_usize(samples.len().max(1)));
        if positives == 0 || positives == samples.len() || self.max_depth.is_some_and(|d| depth >= d) {
            return leaf;
        }
        let parent = gini::<T>(positives, samples.len());
        let n = T::of_usize(samples.len());
        let mut best: Option<(T, usize, T)> = None;
        let mut features = sample(rng, 4, self.max_features).into_vec();
        features.sort_unstable();
        for feature in features {
            samples.sort_by(|&a, &b| {
                self.xs[a][feature].partial_cmp(&self.xs[b][feature]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
            });
            let mut left_pos = 0;
            for split in 1..samples.len() {
                left_pos += usize::from(self.ys[samples[split - 1]]);
                let (lo, hi) = (self.xs[samples[split - 1]][feature], self.xs[samples[split]][feature]);
                if lo == hi {
                    continue;
                }
                let right = samples.len() - split;
                let impurity =
                    (T::of_usize(split) * gini::<T>(left_pos, split) + T::of_usize(right) * gini::<T>(positives - left_pos, right)) / n;
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    best = Some((impurity, feature, (lo + hi) / T::of(2.0)));
                }
            }
        }
        let Some((impurity, feature, threshold)) = best else { return leaf };
        if impurity >= parent {
            return leaf;
        }
        let (mut left, mut right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| self.xs[i][feature] <= threshold);
        Tree::Split {
            feature,
            threshold,
            left: Box::new(self.grow(&mut left, depth + 1, rng)),
            right: Box::new(self.grow(&mut right, depth + 1, rng)),
        }
    }
}

impl<T: Scalar> RandomForest<T> {
    /// Tree `t` draws from stream `t` of a ChaCha generator seeded with `seed`.
    pub fn fit(data: &MLDataset<T>, trees: usize, max_depth: Option<usize>, max_features: usize, seed: u64) -> Result<Self, MLError> {
        if data.is_empty() {
            return Err(MLError::EmptyDataset);
        }
        if !data.has_both_classes() {
            return Err(MLError::SingleClassData);
        }
        let xs: Vec<Features<T>> = data.rows.iter().map(|r| r.features).collect();
        let ys = data.labels();
        let grower = Grower { xs: &xs, ys: &ys, max_depth, max_features: max_features.clamp(1, 4) };
        let trees = (0..trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let mut bootstrap: Vec<usize> = (0..xs.len()).map(|_| rng.gen_range(0..xs.len())).collect();
                grower.grow(&mut bootstrap, 0, &mut rng)
            })
            .collect();
        Ok(Self { trees })
    }
}

impl<T: Scalar> Model<T> for RandomForest<T> {
    fn predict_score(&self, x: &Features<T>) -> T {
        self.trees.iter().map(|t| t.score(x)).sum::<T>() / T::of_usize(self.trees.len().max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::testdata::{row, separable};

    #[test]
    fn depth_zero_stump_predicts_majority() {
        let rows = (0..50).map(|i| row([i as f64, 0.0, 0.0, 0.0], i % 5 != 0)).collect();
        let data = MLDataset::new(rows).unwrap();
        let forest = RandomForest::fit(&data, 1, Some(0), 4, 0).unwrap();
        assert_eq!(forest.trees[0].depth(), 0);
        assert!(data.rows.iter().all(|r| forest.predict(&r.features)));
    }

    #[test]
    fn fits_separable_data() {
        let data = separable(200, 2);
        let forest = RandomForest::fit(&data, 25, Some(4), 2, 9).unwrap();
        let correct = data.rows.iter().filter(|r| forest.predict(&r.features) == r.label).count();
        assert!(correct >= 198);
        assert!(forest.trees.iter().all(|t| t.depth() <= 4));
    }

    #[test]
    fn seeded_fit_is_reproducible() {
        let data = separable(80, 3);
        let a = RandomForest::fit(&data, 10, None, 2, 5).unwrap();
        let b = RandomForest::fit(&data, 10, None, 2, 5).unwrap();
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn single_class_is_rejected() {
        let data = MLDataset::new(vec![row([0.0; 4], false), row([1.0; 4], false)]).unwrap();
        assert_eq!(RandomForest::fit(&data, 3, None, 2, 0).unwrap_err(), MLError::SingleClassData);
    }

    #[test]
    fn scores_stay_in_unit_interval() {
        let data = separable(60, 8);
        let forest = RandomForest::fit(&data, 7, Some(3), 1, 1).unwrap();
        for r in &data.rows {
            let s = forest.predict_score(&r.features);
            assert!((0.0..=1.0).contains(&s));
        }
    }
}
