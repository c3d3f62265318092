use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grow::Dataset;
use super::{GbdtModel, TrainConfig};
use crate::math;
use crate::pairfeat::FeatureMatrix;
use crate::stats::roc_auc;
use crate::{Error, Result};

/// `round(U(low, high) / step) * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QUniform {
    pub low: f64,
    pub high: f64,
    pub step: f64,
}

impl QUniform {
    pub const fn new(low: f64, high: f64, step: f64) -> Self {
        Self { low, high, step }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u = self.low + (self.high - self.low) * rng.random::<f64>();
        let v = math::round(u / self.step) * self.step;
        // strip representation noise such as 0.7000000000000001
        math::round(v * 1e9) / 1e9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n_iterations: u32,
    pub learning_rate: Vec<f64>,
    /// `num_leaves = 2^q`.
    pub num_leaves_log2: QUniform,
    pub colsample_bytree: QUniform,
    pub subsample: QUniform,
    /// `min_child_samples = 2^q`.
    pub min_child_samples_log2: QUniform,
    /// `min_child_weight = 10^q`.
    pub min_child_weight_log10: QUniform,
    /// Either 0 or `10^q`, chosen evenly.
    pub reg_alpha_log10: QUniform,
    pub reg_lambda_log10: QUniform,
    /// Either unlimited or `2^q`, chosen evenly.
    pub max_depth_log2: QUniform,
    /// Rounds per trial; not searched.
    pub n_rounds: u32,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            n_iterations: 50,
            learning_rate: vec![0.1, 0.05, 0.01, 0.005, 0.001],
            num_leaves_log2: QUniform::new(2.0, 7.0, 1.0),
            colsample_bytree: QUniform::new(0.4, 1.0, 0.1),
            subsample: QUniform::new(0.4, 1.0, 0.1),
            min_child_samples_log2: QUniform::new(0.0, 7.0, 1.0),
            min_child_weight_log10: QUniform::new(-6.0, 0.0, 1.0),
            reg_alpha_log10: QUniform::new(-6.0, 1.0, 1.0),
            reg_lambda_log10: QUniform::new(-6.0, 1.0, 1.0),
            max_depth_log2: QUniform::new(1.0, 4.0, 1.0),
            n_rounds: TrainConfig::default().n_rounds,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_empty() {
            return Err(Error::InvalidParameter {
                name: "learning_rate",
                reason: "no choices".into(),
            });
        }
        if self.n_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "n_iterations",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }

    /// One config drawn from the space; `seed` becomes the trainer seed.
    pub fn sample<R: Rng>(&self, rng: &mut R, seed: u64) -> TrainConfig {
        let pow2 = |q: f64| math::powi(2.0, q as i32) as u32;
        let pow10 = |q: f64| math::powi(10.0, q as i32);
        let learning_rate = self.learning_rate[rng.random_range(0..self.learning_rate.len())];
        let num_leaves = pow2(self.num_leaves_log2.sample(rng)).max(2);
        let colsample_bytree = self.colsample_bytree.sample(rng).clamp(0.1, 1.0);
        let subsample = self.subsample.sample(rng).clamp(0.1, 1.0);
        let min_child_samples = pow2(self.min_child_samples_log2.sample(rng)).max(1);
        let min_child_weight = pow10(self.min_child_weight_log10.sample(rng));
        let mut zero_or_pow10 = |q: &QUniform| {
            let pick = rng.random_bool(0.5);
            let v = pow10(q.sample(rng));
            if pick {
                v
            } else {
                0.0
            }
        };
        let reg_alpha = zero_or_pow10(&self.reg_alpha_log10);
        let reg_lambda = zero_or_pow10(&self.reg_lambda_log10);
        let limited = rng.random_bool(0.5);
        let depth = pow2(self.max_depth_log2.sample(rng)).max(1);
        TrainConfig {
            learning_rate,
            num_leaves,
            colsample_bytree,
            subsample,
            min_child_samples,
            min_child_weight,
            reg_alpha,
            reg_lambda,
            max_depth: limited.then_some(depth),
            n_rounds: self.n_rounds,
            seed,
        }
    }

    /// The full trial sequence for `seed`, in trial order.
    pub fn sample_configs(&self, seed: u64) -> Vec<TrainConfig> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.n_iterations as u64)
            .map(|i| self.sample(&mut rng, seed.wrapping_add(i)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub config: TrainConfig,
    pub val_auc: Option<f64>,
    pub status: TrialStatus,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_index: usize,
    pub best_config: TrainConfig,
    pub best_model: GbdtModel,
    pub trials: Vec<Trial>,
}

/// Trains one config and scores it on the validation matrix.
pub fn run_trial(
    index: usize,
    config: &TrainConfig,
    train: &Dataset,
    train_labels: &[bool],
    val: &FeatureMatrix,
    val_labels: &[bool],
) -> (Trial, Option<GbdtModel>) {
    let result = train.train(train_labels, config).and_then(|model| {
        let scores = model.predict_matrix(val)?;
        let auc = roc_auc(&scores, val_labels)?;
        Ok((model, auc))
    });
    match result {
        Ok((model, auc)) => (
            Trial {
                index,
                config: config.clone(),
                val_auc: Some(auc),
                status: TrialStatus::Ok,
            },
            Some(model),
        ),
        Err(e) => (
            Trial {
                index,
                config: config.clone(),
                val_auc: None,
                status: TrialStatus::Failed(e.to_string()),
            },
            None,
        ),
    }
}

/// Position of the highest validation AUC; ties go to the earlier trial.
pub fn select_best(trials: &[Trial]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in trials.iter().enumerate() {
        if let Some(auc) = t.val_auc {
            if best.is_none_or(|(_, b)| auc > b) {
                best = Some((i, auc));
            }
        }
    }
    best.map(|(i, _)| i).ok_or(Error::AllTrialsFailed(trials.len()))
}

/// Sequential random search; see [`SearchSpace::sample_configs`] for the trial sequence.
pub fn random_search(
    space: &SearchSpace,
    train: &FeatureMatrix,
    train_labels: &[bool],
    val: &FeatureMatrix,
    val_labels: &[bool],
    seed: u64,
) -> Result<SearchOutcome> {
    space.validate()?;
    let ds = Dataset::from_matrix(train);
    let mut trials = Vec::with_capacity(space.n_iterations as usize);
    let mut best_model: Option<(usize, GbdtModel)> = None;
    for (i, config) in space.sample_configs(seed).iter().enumerate() {
        let (trial, model) = run_trial(i, config, &ds, train_labels, val, val_labels);
        trials.push(trial);
        let better = match (&best_model, trials[i].val_auc) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some((b, _)), Some(auc)) => auc > trials[*b].val_auc.unwrap_or(f64::NEG_INFINITY),
        };
        if better {
            best_model = model.map(|m| (i, m));
        }
    }
    let best_index = select_best(&trials)?;
    let (_, best_model) = best_model.expect("select_best found a successful trial");
    Ok(SearchOutcome {
        best_index,
        best_config: trials[best_index].config.clone(),
        best_model,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairfeat::FeatureValue;
    use alloc::vec;

    #[test]
    fn sampled_configs_are_valid_and_on_grid() {
        let space = SearchSpace {
            n_iterations: 500,
            ..Default::default()
        };
        let configs = space.sample_configs(7);
        assert_eq!(configs.len(), 500);
        for c in &configs {
            c.validate().unwrap();
            assert!(c.num_leaves.is_power_of_two() && (4..=128).contains(&c.num_leaves));
            assert!(c.min_child_samples.is_power_of_two() && c.min_child_samples <= 128);
            let tenths = c.subsample * 10.0;
            assert_eq!(tenths, tenths.round());
            assert!((0.4..=1.0).contains(&c.colsample_bytree));
            assert!(c.max_depth.is_none_or(|d| [2, 4, 8, 16].contains(&d)));
        }
        assert!(configs.iter().any(|c| c.reg_alpha == 0.0));
        assert!(configs.iter().any(|c| c.max_depth.is_none()));
        assert_eq!(configs, space.sample_configs(7));
        assert_ne!(configs, space.sample_configs(8));
    }

    #[test]
    fn select_best_prefers_earlier_on_ties() {
        let t = |i: usize, auc: Option<f64>| Trial {
            index: i,
            config: TrainConfig::default(),
            val_auc: auc,
            status: if auc.is_some() { TrialStatus::Ok } else { TrialStatus::Failed("x".into()) },
        };
        assert_eq!(select_best(&[t(0, Some(0.7)), t(1, Some(0.9)), t(2, Some(0.9))]).unwrap(), 1);
        assert_eq!(select_best(&[t(0, None), t(1, Some(0.1))]).unwrap(), 1);
        assert_eq!(select_best(&[t(0, None)]).unwrap_err(), Error::AllTrialsFailed(1));
    }

    fn data(n: usize, offset: usize) -> (FeatureMatrix, Vec<bool>) {
        let rows: Vec<Vec<FeatureValue>> = (0..n)
            .map(|i| {
                let j = i + offset;
                vec![Some((j * 7 % 13) as f64), Some((j % 5) as f64)]
            })
            .collect();
        let labels: Vec<bool> = (0..n).map(|i| ((i + offset) * 7 % 13) > 6).collect();
        let m = FeatureMatrix::from_rows(vec!["a".into(), "b".into()], rows, None).unwrap();
        (m, labels)
    }

    #[test]
    fn search_is_deterministic_and_picks_max() {
        let (tr, ytr) = data(80, 0);
        let (va, yva) = data(40, 3);
        let space = SearchSpace {
            n_iterations: 6,
            n_rounds: 10,
            ..Default::default()
        };
        let a = random_search(&space, &tr, &ytr, &va, &yva, 3).unwrap();
        let b = random_search(&space, &tr, &ytr, &va, &yva, 3).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.best_model, b.best_model);
        let max = a.trials.iter().filter_map(|t| t.val_auc).fold(f64::MIN, f64::max);
        assert_eq!(a.trials[a.best_index].val_auc, Some(max));

        let one = random_search(&SearchSpace { n_iterations: 1, ..space }, &tr, &ytr, &va, &yva, 3).unwrap();
        assert_eq!(one.best_index, 0);
        assert_eq!(one.best_config, a.trials[0].config);
    }

    #[test]
    fn failing_trials_are_logged() {
        let (tr, ytr) = data(30, 0);
        let (va, _) = data(10, 0);
        let single = vec![true; 10];
        let space = SearchSpace {
            n_iterations: 3,
            n_rounds: 2,
            ..Default::default()
        };
        let err = random_search(&space, &tr, &ytr, &va, &single, 0).unwrap_err();
        assert_eq!(err, Error::AllTrialsFailed(3));
    }
}
