//! SMOTE: synthetic minority oversampling by interpolating between a
//! minority row and one of its nearest minority neighbors.
//!
//! Synthesis is split in two steps. [`plan_smote`] decides which pairs to
//! interpolate and where (a list of [`SyntheticSample`]s over original row
//! indices); materializers then build dense or sparse rows from the plan.
//! Neural training uses the plan directly so that large flattened inputs
//! never have to be held in memory at once.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, SparseMatrix};
use crate::util::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority/majority ratio after synthesis, in (0, 1].
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 1 {
            return Err(Error::InvalidConfig("SMOTE k_neighbors must be >= 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "SMOTE target_ratio must be in (0, 1], got {}",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborLists {
    /// Neighbors of each row, nearest first, as row indices.
    pub neighbors: Vec<Vec<usize>>,
    pub effective_k: usize,
    /// Set when the requested k exceeded `rows - 1` and was capped.
    pub capped: bool,
}

pub fn nearest_minority_neighbors(minority: &Matrix, k: usize) -> Result<NeighborLists> {
    neighbors_by(minority.rows(), k, |a, b| squared_euclidean(minority.row(a), minority.row(b)))
}

fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Brute-force k nearest neighbors over `n` rows with a caller-supplied
/// distance; ties go to the lower row index.
pub fn neighbors_by<D>(n: usize, k: usize, dist: D) -> Result<NeighborLists>
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    use rayon::prelude::*;
    if n < 2 {
        return Err(Error::InsufficientMinority { found: n });
    }
    if k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    let effective_k = k.min(n - 1);
    let capped = effective_k < k;
    if capped {
        log::warn!("SMOTE k = {k} exceeds {} available neighbors; using k = {effective_k}", n - 1);
    }
    let neighbors = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)).collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(effective_k);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    Ok(NeighborLists {
        neighbors,
        effective_k,
        capped,
    })
}

/// One synthetic row: `row(base) + u * (row(neighbor) - row(base))`, with
/// both indices referring to original rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub base: usize,
    pub neighbor: usize,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmotePlan {
    pub minority_label: u8,
    pub majority_count: usize,
    pub minority_count: usize,
    pub effective_k: usize,
    pub synthetics: Vec<SyntheticSample>,
}

/// `ceil(ratio * majority) - minority`, floored at zero.
pub fn synthetic_count(majority: usize, minority: usize, ratio: f64) -> usize {
    // The epsilon absorbs products such as 0.3 * 10 = 3.0000000000000004.
    let target = (ratio * majority as f64 - 1e-9).ceil().max(0.0) as usize;
    target.saturating_sub(minority)
}

/// Plans SMOTE synthetics for labels `y`, measuring distances between
/// original rows with `dist`. Bases cycle over minority rows in order; each
/// synthetic draws its neighbor and then its offset from the seeded stream.
pub fn plan_smote<D>(y: &[u8], config: &SmoteConfig, dist: D) -> Result<SmotePlan>
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    config.validate()?;
    let ones = y.iter().filter(|&&l| l == 1).count();
    let zeros = y.len() - ones;
    if ones == 0 || zeros == 0 {
        return Err(Error::SingleClass);
    }
    let minority_label = if ones <= zeros { 1 } else { 0 };
    let minority_rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let (minority_count, majority_count) = (minority_rows.len(), y.len() - minority_rows.len());
    if minority_count < 2 {
        return Err(Error::InsufficientMinority { found: minority_count });
    }

    let lists = neighbors_by(minority_count, config.k_neighbors, |a, b| {
        dist(minority_rows[a], minority_rows[b])
    })?;
    let count = synthetic_count(majority_count, minority_count, config.target_ratio);
    let mut rng = seeded_rng(config.seed, 0);
    let synthetics = (0..count)
        .map(|s| {
            let local = s % minority_count;
            let nbs = &lists.neighbors[local];
            let pick = nbs[rng.gen_range(0..nbs.len())];
            let u: f64 = rng.gen();
            SyntheticSample {
                base: minority_rows[local],
                neighbor: minority_rows[pick],
                u,
            }
        })
        .collect();
    Ok(SmotePlan {
        minority_label,
        majority_count,
        minority_count,
        effective_k: lists.effective_k,
        synthetics,
    })
}

/// Appends synthetic minority rows after the original rows.
pub fn smote_oversample(x: &Matrix, y: &[u8], config: &SmoteConfig) -> Result<(Matrix, Vec<u8>)> {
    check_len(x.rows(), y.len())?;
    let plan = plan_smote(y, config, |a, b| squared_euclidean(x.row(a), x.row(b)))?;
    let mut out = x.clone();
    let mut labels = y.to_vec();
    let mut buf = vec![0.0; x.cols()];
    for s in &plan.synthetics {
        let (base, nb) = (x.row(s.base), x.row(s.neighbor));
        for ((o, a), b) in buf.iter_mut().zip(base).zip(nb) {
            *o = a + s.u * (b - a);
        }
        out.push_row(&buf)?;
        labels.push(plan.minority_label);
    }
    Ok((out, labels))
}

/// Sparse-row variant of [`smote_oversample`]; identical arithmetic.
pub fn smote_oversample_sparse(
    x: &SparseMatrix,
    y: &[u8],
    config: &SmoteConfig,
) -> Result<(SparseMatrix, Vec<u8>)> {
    check_len(x.nrows(), y.len())?;
    let plan = plan_smote(y, config, |a, b| x.rows[a].squared_distance(&x.rows[b]))?;
    let mut out = x.clone();
    let mut labels = y.to_vec();
    for s in &plan.synthetics {
        out.rows
            .push(x.rows[s.base].interpolate(&x.rows[s.neighbor], s.u));
        labels.push(plan.minority_label);
    }
    Ok((out, labels))
}

fn check_len(rows: usize, labels: usize) -> Result<()> {
    if rows != labels {
        return Err(Error::DimensionMismatch {
            context: "feature rows vs labels",
            expected: rows,
            found: labels,
        });
    }
    Ok(())
}
