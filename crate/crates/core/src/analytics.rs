//! Spearman rank correlation between development variables and declared knowledge.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::features::{FeatureVector, VARIABLES};
use crate::num::{mean, Scalar};

/// Largest sample for which the exact permutation test is allowed.
pub const MAX_PERMUTATION_N: usize = 10;

pub const KNOWLEDGE: &str = "knowledge";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("inputs have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("{0} samples; at least 3 are needed")]
    TooFewSamples(usize),
    #[error("input is constant; rank correlation is undefined")]
    ConstantInput,
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("exact permutation test limited to n <= {MAX_PERMUTATION_N}, got {0}")]
    TooLargeForPermutation(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Two-sided Student t approximation with n - 2 degrees of freedom.
    #[default]
    TApproximation,
    /// Exact two-sided test over all n! pairings.
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult<T> {
    pub variable: String,
    pub rho: T,
    pub p_value: T,
    pub n: usize,
}

/// 1-based ranks, tied values sharing the mean of their positions.
pub fn ranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![T::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let rank = T::of_usize(start + 1 + end) / T::of(2.0);
        for &i in &order[start..end] {
            out[i] = rank;
        }
        start = end;
    }
    out
}

fn check<T: Scalar>(x: &[T], y: &[T]) -> Result<(), AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AnalyticsError::TooFewSamples(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalyticsError::NonFinite);
    }
    Ok(())
}

fn centered<T: Scalar>(values: &[T]) -> Vec<T> {
    let m = mean(values);
    values.iter().map(|v| *v - m).collect()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Spearman's rho with a t-approximation p-value.
pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<CorrelationResult<T>, AnalyticsError> {
    spearman_with(x, y, PValueMethod::TApproximation)
}

pub fn spearman_with<T: Scalar>(x: &[T], y: &[T], method: PValueMethod) -> Result<CorrelationResult<T>, AnalyticsError> {
    check(x, y)?;
    let n = x.len();
    let (rx, ry) = (centered(&ranks(x)), centered(&ranks(y)));
    let (sxx, syy) = (dot(&rx, &rx), dot(&ry, &ry));
    if sxx == T::zero() || syy == T::zero() {
        return Err(AnalyticsError::ConstantInput);
    }
    let norm = (sxx * syy).sqrt();
    let rho = (dot(&rx, &ry) / norm).max(-T::one()).min(T::one());
    let p_value = match method {
        PValueMethod::TApproximation => t_p_value(rho, n),
        PValueMethod::Permutation => permutation_p_value(&rx, &ry, norm, rho)?,
    };
    Ok(CorrelationResult { variable: String::new(), rho, p_value, n })
}

fn t_p_value<T: Scalar>(rho: T, n: usize) -> T {
    let r = rho.to_f64_lossy();
    if r.abs() >= 1.0 {
        return T::zero();
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    T::of((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

/// Share of the n! pairings whose |rho| is at least the observed |rho|.
fn permutation_p_value<T: Scalar>(rx: &[T], ry: &[T], norm: T, rho: T) -> Result<T, AnalyticsError> {
    let n = rx.len();
    if n > MAX_PERMUTATION_N {
        return Err(AnalyticsError::TooLargeForPermutation(n));
    }
    let target = rho.abs() - T::of(1e-9);
    let mut perm = ry.to_vec();
    let (mut hits, mut total) = (0u64, 0u64);
    let mut tally = |p: &[T]| {
        total += 1;
        if (dot(rx, p) / norm).abs() >= target {
            hits += 1;
        }
    };
    // Heap's algorithm
    let mut c = vec![0usize; n];
    tally(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            tally(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(T::of(hits as f64 / total as f64))
}

/// Symmetric matrix of pairwise Spearman results.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<T> {
    pub variables: Vec<String>,
    /// `cells[i][j]` correlates `variables[i]` with `variables[j]`.
    pub cells: Vec<Vec<Result<CorrelationResult<T>, AnalyticsError>>>,
}

/// Columns of the twelve variables over `rows`, in [`VARIABLES`] order.
pub fn variable_columns<T: Scalar>(rows: &[&FeatureVector]) -> Vec<(String, Vec<T>)> {
    VARIABLES.iter().enumerate().map(|(c, name)| (name.to_string(), rows.iter().map(|f| T::of(f.values()[c])).collect())).collect()
}

/// Pairwise correlations of the twelve variables, plus knowledge when given.
pub fn correlation_matrix<T: Scalar>(rows: &[&FeatureVector], knowledge: Option<&[T]>) -> Result<CorrelationMatrix<T>, AnalyticsError> {
    if rows.len() < 3 {
        return Err(AnalyticsError::TooFewSamples(rows.len()));
    }
    let mut columns = variable_columns::<T>(rows);
    if let Some(k) = knowledge {
        if k.len() != rows.len() {
            return Err(AnalyticsError::LengthMismatch(rows.len(), k.len()));
        }
        columns.push((KNOWLEDGE.to_string(), k.to_vec()));
    }
    let m = columns.len();
    let upper: Vec<Vec<Result<CorrelationResult<T>, AnalyticsError>>> =
        (0..m).into_par_iter().map(|i| (i..m).map(|j| spearman(&columns[i].1, &columns[j].1)).collect()).collect();
    let cells = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    upper[a][b - a].clone().map(|r| CorrelationResult { variable: format!("{}~{}", columns[i].0, columns[j].0), ..r })
                })
                .collect()
        })
        .collect();
    Ok(CorrelationMatrix { variables: columns.into_iter().map(|(name, _)| name).collect(), cells })
}

/// Correlation of each variable with knowledge, sorted by rho ascending;
/// variables whose correlation is undefined come last with their error.
pub fn knowledge_correlations<T: Scalar>(
    rows: &[&FeatureVector],
    knowledge: &[T],
) -> Vec<(String, Result<CorrelationResult<T>, AnalyticsError>)> {
    knowledge_correlations_with(rows, knowledge, PValueMethod::default())
}

pub fn knowledge_correlations_with<T: Scalar>(
    rows: &[&FeatureVector],
    knowledge: &[T],
    method: PValueMethod,
) -> Vec<(String, Result<CorrelationResult<T>, AnalyticsError>)> {
    let mut out: Vec<(String, Result<CorrelationResult<T>, AnalyticsError>)> = variable_columns::<T>(rows)
        .into_par_iter()
        .map(|(name, column)| {
            let result = spearman_with(&column, knowledge, method).map(|r| CorrelationResult { variable: name.clone(), ..r });
            (name, result)
        })
        .collect();
    out.sort_by(|a, b| match (&a.1, &b.1) {
        (Ok(x), Ok(y)) => x.rho.partial_cmp(&y.rho).unwrap_or(std::cmp::Ordering::Equal),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => std::cmp::Ordering::Equal,
    });
    out
}
