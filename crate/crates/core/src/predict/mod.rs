//! Predicting a user's susceptibility from friends' scores, account
//! metadata and network position.

mod forest;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use forest::{
    fit_forest, permutation_importance, random_search, ForestFit, ForestParams, RandomForest, SearchResult, SearchTrial, Tree,
    TreeNode, cross_val_r2, MODEL_FORMAT_VERSION,
};

use crate::analytics;
use crate::error::{Error, Result};
use crate::netbuild::{FeatureReport, FriendshipNetwork};
use crate::stats::{self, OlsFit};
use crate::suscept::{Metric, ScoreTable};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
/// `1 - R^2` below this marks a column as perfectly collinear.
pub const COLLINEAR_TOLERANCE: f64 = 1e-10;

pub const FEATURE_COLUMNS: [&str; 9] = [
    "friends_iar",
    "friends_sar",
    "followers_count",
    "friends_count",
    "favorites_count",
    "statuses_count",
    "degree_centrality",
    "eigenvector_centrality",
    "clustering_coefficient",
];

/// Dense row-major design matrix with a regression target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<String>,
    pub data: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    /// Candidate rows removed for an undefined feature or target.
    pub rows_dropped: usize,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, rows: Vec<String>, data: Vec<Vec<f64>>, target: Vec<f64>) -> Result<Self> {
        if rows.len() != data.len() {
            return Err(Error::LengthMismatch(rows.len(), data.len()));
        }
        if target.len() != data.len() {
            return Err(Error::LengthMismatch(data.len(), target.len()));
        }
        if let Some(r) = data.iter().find(|r| r.len() != columns.len()) {
            return Err(Error::LengthMismatch(columns.len(), r.len()));
        }
        if data.iter().flatten().chain(&target).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature matrix contains a non-finite value".into()));
        }
        Ok(FeatureMatrix { columns, rows, data, target, rows_dropped: 0 })
    }

    /// Columns named by `names`, one per slice, with generated row ids.
    pub fn from_columns(names: &[&str], columns: &[Vec<f64>], target: Vec<f64>) -> Result<Self> {
        let n = target.len();
        let data = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
        FeatureMatrix::new(
            names.iter().map(|s| s.to_string()).collect(),
            (0..n).map(|i| format!("r{i}")).collect(),
            data,
            target,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.data.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.iter().map(|r| r[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn subset(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            data: idx.iter().map(|&i| self.data[i].clone()).collect(),
            target: idx.iter().map(|&i| self.target[i]).collect(),
            rows_dropped: self.rows_dropped,
        }
    }

    /// Seeded shuffle split into `(train, test)`.
    pub fn train_test_split(&self, test_fraction: f64, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!("test fraction must be in (0, 1), got {test_fraction}")));
        }
        let n = self.n_rows();
        let n_test = (n as f64 * test_fraction).round() as usize;
        if n_test == 0 || n_test == n {
            return Err(Error::InsufficientData(format!("{n} rows cannot be split with test fraction {test_fraction}")));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (test, train) = idx.split_at(n_test);
        Ok((self.subset(train), self.subset(test)))
    }
}

/// Rows are network nodes with a defined target, defined friend averages
/// for both metrics and account metadata.
pub fn build_feature_matrix(
    net: &FriendshipNetwork,
    table: &ScoreTable,
    features: &FeatureReport,
    metric: Metric,
) -> Result<FeatureMatrix> {
    if features.features.len() != net.node_count() {
        return Err(Error::LengthMismatch(net.node_count(), features.features.len()));
    }
    let iar = analytics::align_scores(net, &table.metric(Metric::Iar));
    let sar = analytics::align_scores(net, &table.metric(Metric::Sar));
    let f_iar = analytics::weighted_friend_average(net, &iar)?;
    let f_sar = analytics::weighted_friend_average(net, &sar)?;
    let own = match metric {
        Metric::Iar => &iar,
        Metric::Sar => &sar,
    };
    let (mut rows, mut data, mut target) = (Vec::new(), Vec::new(), Vec::new());
    let mut dropped = 0;
    for (i, id) in net.nodes().iter().enumerate() {
        let meta = table.get(id).and_then(|r| r.meta.as_ref());
        let (Some(y), Some(fi), Some(fs), Some(meta)) = (own[i], f_iar[i], f_sar[i], meta) else {
            dropped += 1;
            continue;
        };
        let nf = &features.features[i];
        rows.push(id.clone());
        target.push(y);
        data.push(vec![
            fi,
            fs,
            meta.followers_count as f64,
            meta.friends_count as f64,
            meta.favorites_count as f64,
            meta.statuses_count as f64,
            nf.degree_centrality,
            nf.eigenvector_centrality,
            nf.clustering_coefficient,
        ]);
    }
    let mut m = FeatureMatrix::new(FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(), rows, data, target)?;
    m.rows_dropped = dropped;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Forest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub feature: String,
    /// `None` when the column is perfectly collinear with the others.
    pub vif: Option<f64>,
    pub collinear: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelKind,
    pub metric: Metric,
    pub n_train: usize,
    pub n_test: usize,
    pub rows_dropped: usize,
    /// `None` when the target is constant on that split.
    pub r2_train: Option<f64>,
    pub r2_test: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<OlsFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ForestParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importances: Option<Vec<FeatureImportance>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vif: Option<Vec<VifEntry>>,
}

/// `s_user = b0 + b1 * s_friends` over all given users.
pub fn fit_friend_linear(user: &[f64], friend_avg: &[f64], metric: Metric) -> Result<FitReport> {
    let fit = stats::ols_simple(friend_avg, user)?;
    let pred: Vec<f64> = friend_avg.iter().map(|x| fit.predict(*x)).collect();
    Ok(FitReport {
        model: ModelKind::Linear,
        metric,
        n_train: user.len(),
        n_test: 0,
        rows_dropped: 0,
        r2_train: stats::r2_score(user, &pred),
        r2_test: None,
        coefficients: Some(fit),
        params: None,
        importances: None,
        vif: None,
    })
}

/// Friend-average linear model fit on `train` and scored on `test`.
pub fn fit_friend_linear_split(train: &FeatureMatrix, test: &FeatureMatrix, metric: Metric) -> Result<FitReport> {
    let col = match metric {
        Metric::Iar => "friends_iar",
        Metric::Sar => "friends_sar",
    };
    let j = train
        .column_index(col)
        .ok_or_else(|| Error::InvalidArgument(format!("feature matrix has no {col} column")))?;
    let mut report = fit_friend_linear(&train.target, &train.column(j), metric)?;
    let fit = report.coefficients.as_ref().expect("linear fit");
    let pred: Vec<f64> = test.column(j).iter().map(|x| fit.predict(*x)).collect();
    report.r2_test = stats::r2_score(&test.target, &pred);
    report.n_test = test.n_rows();
    report.rows_dropped = train.rows_dropped;
    Ok(report)
}

/// Variance inflation factor of every column against all others.
pub fn compute_vif(features: &FeatureMatrix) -> Result<Vec<VifEntry>> {
    let p = features.n_cols();
    if features.n_rows() < p + 2 {
        return Err(Error::InsufficientData(format!(
            "VIF over {p} columns needs at least {} rows, got {}",
            p + 2,
            features.n_rows()
        )));
    }
    let cols: Vec<Vec<f64>> = (0..p).map(|j| features.column(j)).collect();
    if cols.iter().any(|c| c.iter().all(|v| *v == c[0])) {
        return Err(Error::ConstantVector);
    }
    (0..p)
        .map(|j| {
            let others: Vec<&[f64]> = (0..p).filter(|&k| k != j).map(|k| cols[k].as_slice()).collect();
            let r2 = stats::multiple_r2(&cols[j], &others)?;
            let collinear = 1.0 - r2 < COLLINEAR_TOLERANCE;
            Ok(VifEntry {
                feature: features.columns[j].clone(),
                vif: (!collinear).then(|| 1.0 / (1.0 - r2)),
                collinear,
            })
        })
        .collect()
}

/// `feature,importance`
pub fn write_importances_csv<W: Write>(importances: &[FeatureImportance], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "importance"])?;
    for imp in importances {
        w.write_record([imp.feature.clone(), imp.importance.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn planted(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y = x.iter().map(|v| 0.1 + 0.6 * v + noise.sample(&mut rng)).collect();
        (x, y)
    }

    #[test]
    fn linear_recovers_planted_slope() {
        let (x, y) = planted(10_000, 1);
        let fit = fit_friend_linear(&y, &x, Metric::Iar).unwrap().coefficients.unwrap();
        assert!((0.58..=0.62).contains(&fit.slope));
        assert!((fit.slope - 0.6).abs() < 3.0 * fit.slope_se);
        assert!((fit.intercept - 0.1).abs() < 3.0 * fit.intercept_se);
    }

    #[test]
    fn linear_identity_fixture() {
        let x = vec![0.1, 0.4, 0.2, 0.9, 0.5];
        let r = fit_friend_linear(&x, &x, Metric::Sar).unwrap();
        let fit = r.coefficients.unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((r.r2_train.unwrap() - 1.0).abs() < 1e-12);
        assert!(fit_friend_linear(&[0.1, 0.2], &[0.3, 0.4], Metric::Iar).is_err());
    }

    fn hadamard8() -> Vec<Vec<f64>> {
        // rows 1..4 of the 8x8 Sylvester Hadamard matrix: centered and orthogonal
        let h = |i: usize, j: usize| if (i & j).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        (1..5).map(|i| (0..8).map(|j| h(i, j)).collect()).collect()
    }

    #[test]
    fn vif_orthogonal_is_one() {
        let cols = hadamard8();
        let m = FeatureMatrix::from_columns(&["a", "b", "c"], &cols[..3], vec![0.0; 8]).unwrap();
        for e in compute_vif(&m).unwrap() {
            assert!((e.vif.unwrap() - 1.0).abs() < 1e-9, "{e:?}");
        }
    }

    #[test]
    fn vif_correlated_pair() {
        let z = hadamard8();
        let x2: Vec<f64> = z[0].iter().zip(&z[1]).map(|(a, b)| 0.8 * a + 0.6 * b).collect();
        let m = FeatureMatrix::from_columns(&["x1", "x2", "x3"], &[z[0].clone(), x2, z[2].clone()], vec![0.0; 8]).unwrap();
        let v = compute_vif(&m).unwrap();
        let expected = 1.0 / (1.0 - 0.64);
        assert!((v[0].vif.unwrap() - expected).abs() < 1e-9);
        assert!((v[1].vif.unwrap() - expected).abs() < 1e-9);
        assert!((v[2].vif.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vif_duplicate_is_flagged() {
        let z = hadamard8();
        let m = FeatureMatrix::from_columns(&["a", "b", "c"], &[z[0].clone(), z[0].clone(), z[1].clone()], vec![0.0; 8])
            .unwrap();
        let v = compute_vif(&m).unwrap();
        assert!(v[0].collinear && v[1].collinear && v[0].vif.is_none());
        assert!(!v[2].collinear);
        let constant = FeatureMatrix::from_columns(&["a", "b"], &[vec![1.0; 8], z[0].clone()], vec![0.0; 8]).unwrap();
        assert!(matches!(compute_vif(&constant), Err(Error::ConstantVector)));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let m = FeatureMatrix::from_columns(&["x"], std::slice::from_ref(&x), x.clone()).unwrap();
        let (tr, te) = m.train_test_split(0.2, 4).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (80, 20));
        assert_eq!(m.train_test_split(0.2, 4).unwrap().1, te);
        let mut all: Vec<f64> = tr.target.iter().chain(&te.target).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, m.target);
        assert!(m.train_test_split(0.0, 1).is_err());
    }

    #[test]
    fn importances_csv() {
        let mut buf = Vec::new();
        let imps = vec![FeatureImportance { feature: "a".into(), importance: 0.5 }];
        write_importances_csv(&imps, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "feature,importance\na,0.5\n");
    }

    #[test]
    fn feature_matrix_from_network() {
        use crate::ingest::UserMeta;
        use crate::suscept::{ScoreRow, SusceptibilityScore};
        let net = crate::testutil::graph(3, &[(0, 1), (1, 2)]);
        let rows = (0..3)
            .map(|i| ScoreRow {
                score: SusceptibilityScore {
                    user: format!("n{i:03}"),
                    iar: Some(0.25 * (i + 1) as f64),
                    sar: if i == 2 { None } else { Some(0.5) },
                    n_exposed: 1,
                    n_adopted: 1,
                    n_influence_driven: 0,
                },
                meta: Some(UserMeta {
                    user: format!("n{i:03}"),
                    followers_count: i as u64,
                    friends_count: 1,
                    statuses_count: 2,
                    favorites_count: 3,
                }),
            })
            .collect();
        let table = ScoreTable { rows };
        let feats = crate::netbuild::node_features(&net).unwrap();
        let m = build_feature_matrix(&net, &table, &feats, Metric::Iar).unwrap();
        // n002 has a defined iar, and its only friend n001 has sar 0.5
        assert_eq!(m.rows, vec!["n000", "n001", "n002"]);
        assert_eq!(m.data[0][..2], [0.5, 0.5]);
        assert_eq!(m.data[1][..2], [0.5, 0.5]);
        let m = build_feature_matrix(&net, &table, &feats, Metric::Sar).unwrap();
        assert_eq!(m.rows_dropped, 1);
        assert_eq!(m.columns, FEATURE_COLUMNS);
    }
}
