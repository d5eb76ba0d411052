//! Zero-mean, unit-variance scaling of the continuous columns.

use serde::{Deserialize, Serialize};

use super::{Features, MLDataset, MLError, FA_COLUMN, FEATURE_NAMES};
use crate::num::Scalar;

/// A continuous column that was constant on the fitting data and is left unscaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroVariance {
    pub feature: &'static str,
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler<T> {
    pub mean: Features<T>,
    pub std: Features<T>,
    /// Columns that are transformed; `fa` and constant columns are not.
    pub scaled: [bool; 4],
}

impl<T: Scalar> Scaler<T> {
    pub fn fit(data: &MLDataset<T>) -> Result<(Self, Vec<ZeroVariance>), MLError> {
        if data.is_empty() {
            return Err(MLError::EmptyDataset);
        }
        let n = T::of_usize(data.len());
        let mut mean = [T::zero(); 4];
        let mut std = [T::one(); 4];
        let mut scaled = [false; 4];
        let mut warnings = Vec::new();
        for c in (0..4).filter(|&c| c != FA_COLUMN) {
            let m = data.rows.iter().map(|r| r.features[c]).sum::<T>() / n;
            let var = data.rows.iter().map(|r| (r.features[c] - m).powi(2)).sum::<T>() / n;
            mean[c] = m;
            if var > T::zero() {
                std[c] = var.sqrt();
                scaled[c] = true;
            } else {
                log::warn!("feature `{}` has zero variance; left unscaled", FEATURE_NAMES[c]);
                warnings.push(ZeroVariance { feature: FEATURE_NAMES[c] });
            }
        }
        Ok((Self { mean, std, scaled }, warnings))
    }

    pub fn transform(&self, x: &Features<T>) -> Features<T> {
        let mut out = *x;
        for c in 0..4 {
            if self.scaled[c] {
                out[c] = (x[c] - self.mean[c]) / self.std[c];
            }
        }
        out
    }

    pub fn transform_dataset(&self, data: &MLDataset<T>) -> MLDataset<T> {
        let mut out = data.clone();
        for row in &mut out.rows {
            row.features = self.transform(&row.features);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized<T> {
    pub dataset: MLDataset<T>,
    pub scaler: Scaler<T>,
    pub warnings: Vec<ZeroVariance>,
}

/// Fit a [`Scaler`] on `data` and apply it.
pub fn standardize<T: Scalar>(data: &MLDataset<T>) -> Result<Standardized<T>, MLError> {
    let (scaler, warnings) = Scaler::fit(data)?;
    Ok(Standardized { dataset: scaler.transform_dataset(data), scaler, warnings })
}
