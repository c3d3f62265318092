//! Gradient-boosted regression trees for binary classification.
//!
//! Second-order boosting on logistic loss with leaf-wise (best gain first)
//! growth, exact greedy split search over midpoints of sorted unique values,
//! L1/L2 regularized leaf values, per-tree row and column subsampling, and a
//! learned default direction for missing values.

mod grow;
mod search;
mod tree;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::pairfeat::{FeatureMatrix, FeatureValue};
use crate::{Error, Result};

pub use grow::{train_gbdt, Dataset};
pub use search::{random_search, run_trial, select_best, QUniform, SearchOutcome, SearchSpace, Trial, TrialStatus};
pub use tree::{Node, RegressionTree};

pub use crate::stats::{logloss, roc_auc};

/// Tag written into every serialized model.
pub const MODEL_FORMAT: &str = "mentorlens-gbdt/1";

/// `sigmoid(±35)` is still distinguishable from 0 and 1 in `f64`.
pub const MAX_MARGIN: f64 = 35.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub num_leaves: u32,
    pub colsample_bytree: f64,
    pub subsample: f64,
    pub min_child_samples: u32,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
    /// `None` means unlimited depth.
    pub max_depth: Option<u32>,
    pub n_rounds: u32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            num_leaves: 31,
            colsample_bytree: 1.0,
            subsample: 1.0,
            min_child_samples: 20,
            min_child_weight: 1e-3,
            reg_alpha: 0.0,
            reg_lambda: 0.0,
            max_depth: None,
            n_rounds: 500,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("must be >= 0, got {}", self.learning_rate));
        }
        if self.num_leaves < 2 {
            return bad("num_leaves", format!("must be >= 2, got {}", self.num_leaves));
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return bad("colsample_bytree", format!("must be in (0, 1], got {}", self.colsample_bytree));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample", format!("must be in (0, 1], got {}", self.subsample));
        }
        if self.min_child_samples < 1 {
            return bad("min_child_samples", "must be >= 1".to_string());
        }
        for (name, v) in [
            ("min_child_weight", self.min_child_weight),
            ("reg_alpha", self.reg_alpha),
            ("reg_lambda", self.reg_lambda),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(name, format!("must be >= 0, got {v}"));
            }
        }
        if self.max_depth == Some(0) {
            return bad("max_depth", "must be >= 1 or unlimited".to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format: String,
    pub schema: Vec<String>,
    /// Log-odds of the training positive rate.
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl GbdtModel {
    fn check_schema(&self, schema: &[String]) -> Result<()> {
        if schema.len() != self.schema.len() {
            return Err(Error::SchemaMismatch {
                expected: self.schema.len(),
                found: schema.len(),
            });
        }
        if let Some((i, (e, f))) = self.schema.iter().zip(schema).enumerate().find(|(_, (e, f))| e != f) {
            return Err(Error::SchemaNameMismatch {
                index: i,
                expected: e.clone(),
                found: f.clone(),
            });
        }
        Ok(())
    }

    /// Raw log-odds for one row: `base + lr * sum(tree outputs)`.
    pub fn margin(&self, row: &[FeatureValue]) -> Result<f64> {
        if row.len() != self.schema.len() {
            return Err(Error::SchemaMismatch {
                expected: self.schema.len(),
                found: row.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(|f| row[f])).sum();
        Ok(self.base_score + self.learning_rate * sum)
    }

    /// `sigmoid(margin)`, with the margin clamped to `±MAX_MARGIN` so the
    /// result stays strictly inside `(0, 1)` in floating point.
    pub fn predict_proba(&self, row: &[FeatureValue]) -> Result<f64> {
        Ok(math::sigmoid(self.margin(row)?.clamp(-MAX_MARGIN, MAX_MARGIN)))
    }

    /// Probabilities for every row, in row order.
    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_schema(&m.schema)?;
        m.rows().iter().map(|r| self.predict_proba(r)).collect()
    }

    /// Total realized split gain per feature, in schema order.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut gains = alloc::vec![0.0; self.schema.len()];
        for t in &self.trees {
            for n in &t.nodes {
                if let Node::Split { feature, gain, .. } = n {
                    gains[*feature as usize] += gain;
                }
            }
        }
        self.schema.iter().cloned().zip(gains).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy(n: usize) -> FeatureMatrix {
        let schema = vec!["x".to_string(), "z".to_string()];
        let rows: Vec<Vec<FeatureValue>> = (0..n)
            .map(|i| vec![Some(i as f64), if i % 3 == 0 { None } else { Some((i % 5) as f64) }])
            .collect();
        let labels = (0..n).map(|i| i >= n / 2).collect();
        FeatureMatrix::from_rows(schema, rows, Some(labels)).unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            min_child_samples: 1,
            n_rounds: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_rounds_predicts_base_rate() {
        let m = toy(40);
        let labels = m.labels.clone().unwrap();
        let model = train_gbdt(&m, &labels, &TrainConfig { n_rounds: 0, ..cfg() }).unwrap();
        assert!(model.trees.is_empty());
        for p in model.predict_matrix(&m).unwrap() {
            assert!((p - 0.5).abs() < 1e-15);
        }
        assert!(model.feature_importance().iter().all(|(_, g)| *g == 0.0));
    }

    #[test]
    fn zero_learning_rate_keeps_base_rate() {
        let m = toy(30);
        let mut labels = m.labels.clone().unwrap();
        labels[0] = true; // 16/30 positive
        let model = train_gbdt(&m, &labels, &TrainConfig { learning_rate: 0.0, ..cfg() }).unwrap();
        assert!(!model.trees.is_empty());
        let base = 16.0 / 30.0;
        for p in model.predict_matrix(&m).unwrap() {
            assert!((p - base).abs() < 1e-12);
        }
    }

    #[test]
    fn single_split_has_one_important_feature() {
        let m = toy(40);
        let labels = m.labels.clone().unwrap();
        let model = train_gbdt(&m, &labels, &TrainConfig { num_leaves: 2, n_rounds: 1, ..cfg() }).unwrap();
        let imp = model.feature_importance();
        assert_eq!(imp.iter().filter(|(_, g)| *g > 0.0).count(), 1);
        assert_eq!(imp[0].0, "x");
    }

    #[test]
    fn errors() {
        let m = toy(10);
        let all_pos = vec![true; 10];
        assert_eq!(train_gbdt(&m, &all_pos, &cfg()).unwrap_err(), Error::SingleClass);
        let labels = m.labels.clone().unwrap();
        assert!(train_gbdt(&m, &labels[..5], &cfg()).is_err());
        assert!(train_gbdt(&m, &labels, &TrainConfig { num_leaves: 1, ..cfg() }).is_err());
        let model = train_gbdt(&m, &labels, &cfg()).unwrap();
        assert!(model.predict_proba(&[Some(1.0)]).is_err());
        let other = FeatureMatrix::from_rows(vec!["x".into(), "w".into()], vec![], None).unwrap();
        assert!(matches!(model.predict_matrix(&other), Err(Error::SchemaNameMismatch { index: 1, .. })));
    }

    #[test]
    fn probabilities_in_open_interval() {
        let m = toy(60);
        let labels = m.labels.clone().unwrap();
        let model = train_gbdt(&m, &labels, &TrainConfig { n_rounds: 200, learning_rate: 1.0, ..cfg() }).unwrap();
        for p in model.predict_matrix(&m).unwrap() {
            assert!(p > 0.0 && p < 1.0);
        }
    }
}
