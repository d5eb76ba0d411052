//! k-nearest neighbours.

use super::{Distance, Features, MLDataset, Model};
use crate::num::Scalar;

#[derive(Debug, Clone)]
pub struct Knn<T> {
    k: usize,
    distance: Distance,
    points: Vec<Features<T>>,
    labels: Vec<bool>,
}

impl<T: Scalar> Knn<T> {
    pub fn fit(data: &MLDataset<T>, k: usize, distance: Distance) -> Self {
        Self { k, distance, points: data.rows.iter().map(|r| r.features).collect(), labels: data.labels() }
    }

    fn dist(&self, a: &Features<T>, b: &Features<T>) -> T {
        match self.distance {
            Distance::Euclidean => a.iter().zip(b).map(|(x, y)| (*x - *y).powi(2)).sum::<T>(),
            Distance::Manhattan => a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum::<T>(),
        }
    }
}

impl<T: Scalar> Model<T> for Knn<T> {
    /// Share of experts among the `k` nearest training points; equal
    /// distances are broken by training order.
    fn predict_score(&self, x: &Features<T>) -> T {
        let mut order: Vec<(T, usize)> = self.points.iter().enumerate().map(|(i, p)| (self.dist(p, x), i)).collect();
        let k = self.k.min(order.len());
        if k == 0 {
            return T::zero();
        }
        let cmp = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1));
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
        }
        let experts = order[..k].iter().filter(|(_, i)| self.labels[*i]).count();
        T::of_usize(experts) / T::of_usize(k)
    }
}
