//! Attribute embeddings from raw column values.
//!
//! Each column is summarized by ten statistics (count, mean, std, min, max,
//! median, skewness proxy, kurtosis proxy, missing fraction, cardinality
//! ratio). Every statistic is rank-normalized across the columns of the
//! dataset into `[0, 1]`, and the resulting vector is scaled into the unit
//! ball.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{cap_norm, AttributeEmbedding};

pub const N_FEATURES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawColumn {
    pub name: String,
    /// Cell values as text; `None` or an empty string counts as missing.
    pub values: Vec<Option<String>>,
}

/// Unnormalized statistics of one column, in the order listed above.
pub fn column_statistics(values: &[Option<String>]) -> [f64; N_FEATURES] {
    let present: Vec<&str> = values
        .iter()
        .filter_map(|v| v.as_deref())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    let mut nums: Vec<f64> = present
        .iter()
        .filter_map(|v| v.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .collect();
    nums.sort_by(f64::total_cmp);

    let total = values.len().max(1) as f64;
    let missing = 1.0 - present.len() as f64 / total;
    let distinct: HashSet<&str> = present.iter().copied().collect();
    let cardinality = if present.is_empty() {
        0.0
    } else {
        distinct.len() as f64 / present.len() as f64
    };

    let mut stats = [0.0; N_FEATURES];
    stats[0] = present.len() as f64;
    stats[8] = missing;
    stats[9] = cardinality;
    if nums.is_empty() {
        return stats;
    }
    let k = nums.len() as f64;
    let mean = nums.iter().sum::<f64>() / k;
    let m2 = nums.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
    let m4 = nums.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / k;
    let std = m2.sqrt();
    let mid = nums.len() / 2;
    let median = if nums.len().is_multiple_of(2) {
        (nums[mid - 1] + nums[mid]) / 2.0
    } else {
        nums[mid]
    };
    stats[1] = mean;
    stats[2] = std;
    stats[3] = nums[0];
    stats[4] = nums[nums.len() - 1];
    stats[5] = median;
    if std > 0.0 {
        stats[6] = 3.0 * (mean - median) / std;
        stats[7] = m4 / (m2 * m2) - 3.0;
    }
    stats
}

/// Average ranks of `xs` scaled to `[0, 1]`; a single value maps to 0.5.
fn rank_normalize(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n == 1 {
        return vec![0.5];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg / (n - 1) as f64;
        }
        i = j + 1;
    }
    ranks
}

/// Embeddings for a dataset's columns, indexed in input order.
pub fn embed_columns(columns: &[RawColumn]) -> Result<Vec<AttributeEmbedding>> {
    if columns.is_empty() {
        return Err(invalid("no columns to embed"));
    }
    let stats: Vec<[f64; N_FEATURES]> = columns.iter().map(|c| column_statistics(&c.values)).collect();
    let mut normalized = vec![vec![0.0; N_FEATURES]; columns.len()];
    for f in 0..N_FEATURES {
        let col: Vec<f64> = stats.iter().map(|s| s[f]).collect();
        for (row, r) in normalized.iter_mut().zip(rank_normalize(&col)) {
            row[f] = r;
        }
    }
    columns
        .iter()
        .zip(normalized)
        .enumerate()
        .map(|(i, (c, v))| AttributeEmbedding::new(i, c.name.clone(), cap_norm(v)))
        .collect()
}
