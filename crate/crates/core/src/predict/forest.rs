//! Random-forest regression: bootstrap-aggregated CART trees.

use std::io::{Read, Write};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureImportance, FeatureMatrix, FitReport, ModelKind};
use crate::error::{Error, Result};
use crate::stats;
use crate::suscept::Metric;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_features: usize,
    /// `None` grows trees until the other limits stop them.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl ForestParams {
    pub fn iar_default(seed: u64) -> Self {
        ForestParams {
            n_estimators: 750,
            max_features: 4,
            max_depth: Some(70),
            min_samples_split: 5,
            min_samples_leaf: 2,
            seed,
        }
    }

    pub fn sar_default(seed: u64) -> Self {
        ForestParams {
            n_estimators: 800,
            max_features: 4,
            max_depth: Some(80),
            min_samples_split: 10,
            min_samples_leaf: 2,
            seed,
        }
    }

    pub fn for_metric(metric: Metric, seed: u64) -> Self {
        match metric {
            Metric::Iar => Self::iar_default(seed),
            Metric::Sar => Self::sar_default(seed),
        }
    }

    pub fn validate(&self, n_cols: usize) -> Result<()> {
        let positive = [
            ("n_estimators", self.n_estimators),
            ("max_features", self.max_features),
            ("min_samples_split", self.min_samples_split),
            ("min_samples_leaf", self.min_samples_leaf),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidArgument("max_depth must be positive".into()));
        }
        if self.max_features > n_cols {
            return Err(Error::InvalidArgument(format!(
                "max_features {} exceeds the {n_cols} available columns",
                self.max_features
            )));
        }
        Ok(())
    }
}

/// One node record; leaves have no column, threshold or children.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub column: Option<usize>,
    pub threshold: Option<f64>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    /// Mean target of the training rows reaching this node.
    pub leaf_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match (node.column, node.threshold, node.left, node.right) {
                (Some(c), Some(t), Some(l), Some(r)) => i = if row[c] <= t { l } else { r },
                _ => return node.leaf_value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match (t.nodes[i].left, t.nodes[i].right) {
                (Some(l), Some(r)) => 1 + go(t, l).max(go(t, r)),
                _ => 0,
            }
        }
        go(self, 0)
    }
}

struct Split {
    column: usize,
    threshold: f64,
    gain: f64,
    n_left: usize,
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    n_cols: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn best_split_on(&self, rows: &[usize], column: usize) -> Option<Split> {
        let mut pairs: Vec<(f64, f64)> = rows.iter().map(|&r| (self.x[r][column], self.y[r])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let base = total * total / n as f64;
        let leaf = self.params.min_samples_leaf;
        let mut best: Option<Split> = None;
        let mut left_sum = 0.0;
        for i in 1..n {
            left_sum += pairs[i - 1].1;
            if i < leaf || n - i < leaf || pairs[i - 1].0 == pairs[i].0 {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64 - base;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let (lo, hi) = (pairs[i - 1].0, pairs[i].0);
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Split { column, threshold, gain, n_left: i });
            }
        }
        best.filter(|b| b.gain > 0.0)
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        let mut order: Vec<usize> = (0..self.n_cols).collect();
        order.shuffle(&mut self.rng);
        let mut start = 0;
        let mut end = self.params.max_features;
        // Fall back to the remaining columns when the sampled ones cannot split.
        while start < self.n_cols {
            let mut group = order[start..end].to_vec();
            group.sort_unstable();
            let mut best: Option<Split> = None;
            for c in group {
                if let Some(s) = self.best_split_on(rows, c) {
                    let better = match &best {
                        None => true,
                        Some(b) => s.gain > b.gain,
                    };
                    if better {
                        best = Some(s);
                    }
                }
            }
            if best.is_some() {
                return best;
            }
            start = end;
            end = (end + self.params.max_features).min(self.n_cols);
        }
        None
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len();
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / n as f64;
        let id = self.nodes.len();
        self.nodes.push(TreeNode { column: None, threshold: None, left: None, right: None, leaf_value: mean });
        let y0 = self.y[rows[0]];
        let stop = n < self.params.min_samples_split
            || n < 2 * self.params.min_samples_leaf
            || self.params.max_depth.is_some_and(|d| depth >= d)
            || rows.iter().all(|&r| self.y[r] == y0);
        if stop {
            return id;
        }
        let Some(split) = self.best_split(&rows) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x[r][split.column] <= split.threshold);
        debug_assert_eq!(left.len(), split.n_left);
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        let node = &mut self.nodes[id];
        node.column = Some(split.column);
        node.threshold = Some(split.threshold);
        node.left = Some(l);
        node.right = Some(r);
        id
    }
}

fn fit_tree(x: &[Vec<f64>], y: &[f64], params: &ForestParams, n_cols: usize, tree_idx: usize) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(tree_idx as u64);
    let n = x.len();
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut b = TreeBuilder { x, y, params, n_cols, rng, nodes: Vec::new() };
    b.build(rows, 0);
    Tree { nodes: b.nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub version: u32,
    pub columns: Vec<String>,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(train: &FeatureMatrix, params: &ForestParams) -> Result<Self> {
        params.validate(train.n_cols())?;
        if train.n_rows() == 0 {
            return Err(Error::InsufficientData("empty training set".into()));
        }
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| fit_tree(&train.data, &train.target, params, train.n_cols(), t))
            .collect();
        Ok(RandomForest {
            version: MODEL_FORMAT_VERSION,
            columns: train.columns.clone(),
            params: *params,
            trees,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.par_iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn r2(&self, m: &FeatureMatrix) -> Option<f64> {
        stats::r2_score(&m.target, &self.predict(&m.data))
    }

    pub fn to_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn from_json<R: Read>(r: R) -> Result<Self> {
        let forest: RandomForest = serde_json::from_reader(r)?;
        if forest.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                forest.version
            )));
        }
        let n_cols = forest.columns.len();
        for t in &forest.trees {
            let n = t.nodes.len();
            let bad = t.nodes.is_empty()
                || t.nodes.iter().any(|node| {
                    node.column.is_some_and(|c| c >= n_cols)
                        || node.left.is_some_and(|l| l >= n)
                        || node.right.is_some_and(|r| r >= n)
                });
            if bad {
                return Err(Error::Format("malformed tree in model file".into()));
            }
        }
        Ok(forest)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestFit {
    pub forest: RandomForest,
    pub report: FitReport,
}

/// Fits on `train`, reports R^2 on both splits and permutation importances
/// (`n_shuffles` per column) on `test`.
pub fn fit_forest(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    params: &ForestParams,
    metric: Metric,
    n_shuffles: usize,
) -> Result<ForestFit> {
    if test.n_rows() == 0 {
        return Err(Error::InsufficientData("empty test set".into()));
    }
    let forest = RandomForest::fit(train, params)?;
    let importances = permutation_importance(&forest, test, n_shuffles, params.seed)?;
    let report = FitReport {
        model: ModelKind::Forest,
        metric,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        rows_dropped: train.rows_dropped,
        r2_train: forest.r2(train),
        r2_test: forest.r2(test),
        coefficients: None,
        params: Some(*params),
        importances: Some(importances),
        vif: None,
    };
    Ok(ForestFit { forest, report })
}

fn sample_params<R: Rng>(rng: &mut R, n_cols: usize, seed: u64) -> ForestParams {
    const DEPTHS: [Option<usize>; 11] = [
        Some(10),
        Some(20),
        Some(30),
        Some(40),
        Some(50),
        Some(60),
        Some(70),
        Some(80),
        Some(90),
        Some(100),
        None,
    ];
    ForestParams {
        n_estimators: 100 + 50 * rng.random_range(0..=18),
        max_features: rng.random_range(1..=n_cols),
        max_depth: DEPTHS[rng.random_range(0..DEPTHS.len())],
        min_samples_split: [2, 5, 10][rng.random_range(0..3)],
        min_samples_leaf: [1, 2, 4][rng.random_range(0..3)],
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrial {
    pub params: ForestParams,
    /// Mean R^2 over folds where it is defined.
    pub cv_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: ForestParams,
    pub best_cv_r2: Option<f64>,
    pub trials: Vec<SearchTrial>,
}

/// Mean k-fold cross-validated R^2 of `params` on `m`.
pub fn cross_val_r2(m: &FeatureMatrix, params: &ForestParams, folds: usize, seed: u64) -> Result<Option<f64>> {
    let n = m.n_rows();
    if folds < 2 || n < folds {
        return Err(Error::InsufficientData(format!("{n} rows cannot be split into {folds} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut scores = Vec::new();
    for f in 0..folds {
        let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
        let test: Vec<usize> = idx[lo..hi].to_vec();
        let train: Vec<usize> = idx[..lo].iter().chain(&idx[hi..]).copied().collect();
        let forest = RandomForest::fit(&m.subset(&train), params)?;
        if let Some(r2) = forest.r2(&m.subset(&test)) {
            scores.push(r2);
        }
    }
    Ok((!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64))
}

/// Random search over the forest hyperparameter grid; the best mean
/// cross-validated R^2 wins, earlier trials winning ties.
pub fn random_search(m: &FeatureMatrix, n_settings: usize, folds: usize, seed: u64) -> Result<SearchResult> {
    if n_settings == 0 {
        return Err(Error::InvalidArgument("n_settings must be positive".into()));
    }
    if m.n_cols() == 0 {
        return Err(Error::InvalidArgument("feature matrix has no columns".into()));
    }
    if folds < 2 || m.n_rows() < folds {
        return Err(Error::InsufficientData(format!("{} rows cannot be split into {folds} folds", m.n_rows())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(n_settings);
    for _ in 0..n_settings {
        let params = sample_params(&mut rng, m.n_cols(), seed);
        let cv_r2 = cross_val_r2(m, &params, folds, seed)?;
        log::debug!("search {params:?} -> {cv_r2:?}");
        trials.push(SearchTrial { params, cv_r2 });
    }
    let mut best = 0;
    for (i, t) in trials.iter().enumerate() {
        let score = t.cv_r2.unwrap_or(f64::NEG_INFINITY);
        if score > trials[best].cv_r2.unwrap_or(f64::NEG_INFINITY) {
            best = i;
        }
    }
    Ok(SearchResult { best: trials[best].params, best_cv_r2: trials[best].cv_r2, trials })
}

fn loss(y: &[f64], pred: &[f64]) -> f64 {
    // 1 - R^2, or the mean squared error when y is constant
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sst > 0.0 {
        sse / sst
    } else {
        sse / y.len() as f64
    }
}

/// Mean drop in R^2 when one column of `data` is shuffled, sorted from most
/// to least important. Importances can be negative.
pub fn permutation_importance(
    forest: &RandomForest,
    data: &FeatureMatrix,
    n_shuffles: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    if data.n_rows() == 0 {
        return Err(Error::InsufficientData("no rows to permute".into()));
    }
    if n_shuffles == 0 {
        return Err(Error::InvalidArgument("n_shuffles must be positive".into()));
    }
    let base = loss(&data.target, &forest.predict(&data.data));
    let n = data.n_rows();
    let mut out: Vec<FeatureImportance> = (0..data.n_cols())
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut total = 0.0;
            for _ in 0..n_shuffles {
                let perm = index::sample(&mut rng, n, n).into_vec();
                let shuffled: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        let mut r = data.data[i].clone();
                        r[j] = data.data[perm[i]][j];
                        r
                    })
                    .collect();
                total += loss(&data.target, &forest.predict(&shuffled)) - base;
            }
            FeatureImportance { feature: data.columns[j].clone(), importance: total / n_shuffles as f64 }
        })
        .collect();
    // stable sort keeps column order among equal importances
    out.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    Ok(out)
}
