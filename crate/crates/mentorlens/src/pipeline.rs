//! Parallel drivers over the core algorithms. Every function here returns the
//! same result regardless of the size of the rayon pool it runs in.

use std::collections::BTreeMap;
use std::sync::Mutex;

use mentorlens_core::cohort::{candidate_mentors_ix, group_folds, group_split_by_key, LabeledPair};
use mentorlens_core::corpus::{AuthorIx, AuthorRecord, Corpus, GoldPair};
use mentorlens_core::gbdt::{
    roc_auc, run_trial, select_best, Dataset, GbdtModel, SearchSpace, Trial, TrainConfig,
};
use mentorlens_core::glm::AuthorCovariates;
use mentorlens_core::graph::{build_graph, graph_features, node_metrics, MentorshipGraph, ScoredEdge, GRAPH_FEATURES};
use mentorlens_core::linker::{LinkReport, LinkResult, Linker};
use mentorlens_core::pairfeat::{extract_pair_features_ix, FeatureMatrix, FeatureValue, STAGE1_FEATURES};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::NodeMetricsRow;

/// Runs `f` inside a pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    let pool = b.build().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn link(corpus: &Corpus, gold: &[GoldPair]) -> (Vec<LinkResult>, LinkReport) {
    let linker = Linker::new(corpus);
    let outcomes: Vec<_> = gold.par_iter().map(|g| linker.link_pair(g)).collect();
    let mut report = LinkReport::default();
    let mut linked = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        report.record(&o);
        if let Ok(r) = o {
            linked.push(r);
        }
    }
    (linked, report)
}

/// Every `(candidate mentor, mentee)` pair, by mentee then candidate.
pub fn candidate_pool(corpus: &Corpus, k: u32) -> Vec<(AuthorIx, AuthorIx)> {
    let mentees: Vec<AuthorIx> = corpus.author_ixs().collect();
    mentees
        .par_iter()
        .map(|&m| candidate_mentors_ix(corpus, m, k).into_iter().map(|c| (c, m)).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn resolve(corpus: &Corpus, pairs: &[(String, String)]) -> Result<Vec<(AuthorIx, AuthorIx)>> {
    pairs
        .iter()
        .map(|(a, b)| Ok((corpus.require_author(a)?, corpus.require_author(b)?)))
        .collect()
}

pub fn labeled_ids(pairs: &[LabeledPair]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|p| (p.mentor_candidate_id.clone(), p.mentee_id.clone()))
        .collect()
}

/// Stage-1 features for each pair, in order.
pub fn featurize(
    corpus: &Corpus,
    pairs: &[(AuthorIx, AuthorIx)],
    percent: f64,
    labels: Option<Vec<bool>>,
) -> Result<FeatureMatrix> {
    let rows = pairs
        .par_iter()
        .map(|&(a, b)| extract_pair_features_ix(corpus, a, b, percent).map(|v| v.values))
        .collect::<std::result::Result<Vec<Vec<FeatureValue>>, _>>()?;
    Ok(FeatureMatrix::from_rows(
        STAGE1_FEATURES.iter().map(|s| s.to_string()).collect(),
        rows,
        labels,
    )?)
}

pub fn predict(model: &GbdtModel, m: &FeatureMatrix) -> Result<Vec<f64>> {
    // schema check once, then rows in parallel
    model.predict_matrix(&FeatureMatrix::new(m.schema.clone()))?;
    Ok(m.rows()
        .par_iter()
        .map(|r| model.predict_proba(r))
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Graph features for each pair, in order.
pub fn graph_matrix(graph: &MentorshipGraph, pairs: &[(String, String)]) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<FeatureValue>> = pairs
        .par_iter()
        .map(|(a, b)| graph_features(graph, a, b).values)
        .collect();
    Ok(FeatureMatrix::from_rows(
        GRAPH_FEATURES.iter().map(|s| s.to_string()).collect(),
        rows,
        None,
    )?)
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_index: usize,
    pub model: GbdtModel,
    pub trials: Vec<Trial>,
}

impl SearchResult {
    pub fn best_config(&self) -> &TrainConfig {
        &self.trials[self.best_index].config
    }

    pub fn best_auc(&self) -> f64 {
        self.trials[self.best_index].val_auc.unwrap_or(f64::NAN)
    }
}

/// Random search with trials spread over the pool. The trial sequence and the
/// winner (highest validation AUC, earliest on ties) match the sequential search.
pub fn random_search(
    space: &SearchSpace,
    train: &FeatureMatrix,
    train_labels: &[bool],
    val: &FeatureMatrix,
    val_labels: &[bool],
    seed: u64,
) -> Result<SearchResult> {
    space.validate()?;
    let ds = Dataset::from_matrix(train);
    let configs = space.sample_configs(seed);
    let best: Mutex<Option<(usize, f64, GbdtModel)>> = Mutex::new(None);
    let trials: Vec<Trial> = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let (trial, model) = run_trial(i, c, &ds, train_labels, val, val_labels);
            if let (Some(auc), Some(model)) = (trial.val_auc, model) {
                let mut guard = best.lock().expect("no panics while holding the lock");
                let better = match &*guard {
                    None => true,
                    Some((j, b, _)) => auc > *b || (auc == *b && i < *j),
                };
                if better {
                    *guard = Some((i, auc, model));
                }
            }
            trial
        })
        .collect();
    let best_index = select_best(&trials)?;
    let (i, _, model) = best
        .into_inner()
        .expect("no panics while holding the lock")
        .ok_or_else(|| Error::Internal("search kept no model".into()))?;
    debug_assert_eq!(i, best_index);
    Ok(SearchResult {
        best_index,
        model,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub space: SearchSpace,
    pub val_fraction: f64,
    pub seed: u64,
    /// Folds used to produce out-of-fold stage-1 scores for the training rows.
    pub oof_folds: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            space: SearchSpace::default(),
            val_fraction: 0.2,
            seed: 42,
            oof_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub train_rows: usize,
    pub validation_rows: usize,
    pub train_mentees: usize,
    pub validation_mentees: usize,
    pub stage1_val_auc: f64,
    pub stage2_val_auc: f64,
    pub stage1_best_trial: usize,
    pub stage2_best_trial: usize,
    pub stage1_failed_trials: usize,
    pub stage2_failed_trials: usize,
    pub graph_edges: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub stage1: SearchResult,
    pub stage2: SearchResult,
    pub summary: TrainSummary,
    /// Stage-1 and stage-2 validation scores, in validation row order.
    pub validation_scores: (Vec<f64>, Vec<f64>),
}

fn distinct<'a>(keys: impl Iterator<Item = &'a str>) -> usize {
    let mut v: Vec<&str> = keys.collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Two-stage training.
///
/// Rows are split by mentee. Stage 1 is searched on the training rows. The
/// stage-1 graph weights training pairs by out-of-fold scores of the winning
/// config, and every other pair (validation and inference pool) by the final
/// stage-1 model, so stage 2 never trains on scores a model made for its own
/// training rows. Stage 2 is searched on stage-1 plus graph features.
pub fn train_two_stage(
    labeled: &[LabeledPair],
    labeled_x: &FeatureMatrix,
    pool: &[(String, String)],
    pool_x: &FeatureMatrix,
    settings: &TrainSettings,
) -> Result<TrainOutcome> {
    if labeled.len() != labeled_x.n_rows() {
        return Err(Error::Data(format!(
            "{} labeled pairs but {} feature rows",
            labeled.len(),
            labeled_x.n_rows()
        )));
    }
    if pool.len() != pool_x.n_rows() {
        return Err(Error::Data(format!(
            "{} candidate pairs but {} feature rows",
            pool.len(),
            pool_x.n_rows()
        )));
    }
    let labels: Vec<bool> = labeled.iter().map(|p| p.label).collect();
    let keys: Vec<&str> = labeled.iter().map(|p| p.mentee_id.as_str()).collect();
    let split = group_split_by_key(&keys, settings.val_fraction, settings.seed)?;
    let pick = |idx: &[usize]| -> Vec<bool> { idx.iter().map(|&i| labels[i]).collect() };
    let (y_tr, y_va) = (pick(&split.train), pick(&split.validation));
    let x_tr = labeled_x.select_rows(&split.train);
    let x_va = labeled_x.select_rows(&split.validation);

    let stage1 = random_search(&settings.space, &x_tr, &y_tr, &x_va, &y_va, settings.seed)?;

    // out-of-fold stage-1 scores for the training rows
    let train_keys: Vec<&str> = split.train.iter().map(|&i| keys[i]).collect();
    let folds = group_folds(&train_keys, settings.oof_folds.max(2), settings.seed);
    let ds_config = stage1.best_config().clone();
    let fold_scores: Vec<Vec<(usize, f64)>> = (0..settings.oof_folds.max(2))
        .into_par_iter()
        .map(|f| -> Result<Vec<(usize, f64)>> {
            let inside: Vec<usize> = (0..split.train.len()).filter(|&i| folds[i] != f).collect();
            let held: Vec<usize> = (0..split.train.len()).filter(|&i| folds[i] == f).collect();
            if held.is_empty() {
                return Ok(Vec::new());
            }
            let y_in: Vec<bool> = inside.iter().map(|&i| y_tr[i]).collect();
            let model = match Dataset::from_matrix(&x_tr.select_rows(&inside)).train(&y_in, &ds_config) {
                Ok(m) => m,
                // a fold with one class falls back to the full stage-1 model
                Err(mentorlens_core::Error::SingleClass) => stage1.model.clone(),
                Err(e) => return Err(e.into()),
            };
            let held_x = x_tr.select_rows(&held);
            let s = model.predict_matrix(&held_x)?;
            Ok(held.into_iter().zip(s).collect())
        })
        .collect::<Result<_>>()?;
    let mut oof = vec![f64::NAN; split.train.len()];
    for (i, s) in fold_scores.into_iter().flatten() {
        oof[i] = s;
    }

    let s1_va = predict(&stage1.model, &x_va)?;
    let s1_pool = predict(&stage1.model, pool_x)?;
    let mut weights: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for ((a, b), &w) in pool.iter().zip(&s1_pool) {
        weights.insert((a, b), w);
    }
    for (j, &i) in split.validation.iter().enumerate() {
        let p = &labeled[i];
        weights.insert((&p.mentor_candidate_id, &p.mentee_id), s1_va[j]);
    }
    for (j, &i) in split.train.iter().enumerate() {
        let p = &labeled[i];
        weights.insert((&p.mentor_candidate_id, &p.mentee_id), oof[j]);
    }
    let graph = build_graph(weights.iter().map(|(&(a, b), &w)| (a, b, w)))?;

    let ids = |idx: &[usize]| -> Vec<(String, String)> {
        idx.iter()
            .map(|&i| (labeled[i].mentor_candidate_id.clone(), labeled[i].mentee_id.clone()))
            .collect()
    };
    let x2_tr = x_tr.hconcat(&graph_matrix(&graph, &ids(&split.train))?)?;
    let x2_va = x_va.hconcat(&graph_matrix(&graph, &ids(&split.validation))?)?;
    let stage2 = random_search(&settings.space, &x2_tr, &y_tr, &x2_va, &y_va, settings.seed.wrapping_add(1))?;
    let s2_va = predict(&stage2.model, &x2_va)?;

    let failed = |r: &SearchResult| r.trials.iter().filter(|t| t.val_auc.is_none()).count();
    let summary = TrainSummary {
        train_rows: split.train.len(),
        validation_rows: split.validation.len(),
        train_mentees: distinct(split.train.iter().map(|&i| keys[i])),
        validation_mentees: distinct(split.validation.iter().map(|&i| keys[i])),
        stage1_val_auc: roc_auc(&s1_va, &y_va)?,
        stage2_val_auc: roc_auc(&s2_va, &y_va)?,
        stage1_best_trial: stage1.best_index,
        stage2_best_trial: stage2.best_index,
        stage1_failed_trials: failed(&stage1),
        stage2_failed_trials: failed(&stage2),
        graph_edges: graph.num_edges(),
    };
    Ok(TrainOutcome {
        stage1,
        stage2,
        summary,
        validation_scores: (s1_va, s2_va),
    })
}

/// Scores the pool with stage 1, builds the graph over all pool pairs, and
/// rescores with stage 2. Output order is pool order.
pub fn infer(
    pool: &[(String, String)],
    pool_x: &FeatureMatrix,
    stage1: &GbdtModel,
    stage2: &GbdtModel,
) -> Result<Vec<ScoredEdge>> {
    if pool.len() != pool_x.n_rows() {
        return Err(Error::Data(format!(
            "{} candidate pairs but {} feature rows",
            pool.len(),
            pool_x.n_rows()
        )));
    }
    let s1 = predict(stage1, pool_x)?;
    let graph = build_graph(pool.iter().zip(&s1).map(|((a, b), &w)| (a.as_str(), b.as_str(), w)))?;
    let x2 = pool_x.hconcat(&graph_matrix(&graph, pool)?)?;
    let s2 = predict(stage2, &x2)?;
    Ok(pool
        .iter()
        .zip(s1.into_iter().zip(s2))
        .map(|((a, b), (w1, w2))| ScoredEdge {
            mentor_id: a.clone(),
            mentee_id: b.clone(),
            stage1_score: w1,
            stage2_score: w2,
        })
        .collect())
}

/// Graph with the released (stage-2) edge weights.
pub fn final_graph(edges: &[ScoredEdge]) -> Result<MentorshipGraph> {
    Ok(build_graph(
        edges.iter().map(|e| (e.mentor_id.as_str(), e.mentee_id.as_str(), e.stage2_score)),
    )?)
}

/// Metrics for every listed author, in the given order.
pub fn metrics_rows<'a>(graph: &MentorshipGraph, authors: impl Iterator<Item = &'a str>) -> Vec<NodeMetricsRow> {
    authors.map(|a| NodeMetricsRow::new(a, &node_metrics(graph, a))).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateReport {
    pub authors: usize,
    pub missing_citation_count: usize,
    pub missing_metrics: usize,
}

/// GLM rows joining author metadata with node metrics. Authors without a
/// citation count are left out; a missing paper count falls back to `corpus_counts`.
pub fn glm_covariates(
    authors: &[AuthorRecord],
    corpus_counts: &BTreeMap<String, u64>,
    metrics: &[NodeMetricsRow],
) -> (Vec<AuthorCovariates>, CovariateReport) {
    let by_id: BTreeMap<&str, &NodeMetricsRow> = metrics.iter().map(|m| (m.author_id.as_str(), m)).collect();
    let mut report = CovariateReport {
        authors: authors.len(),
        ..Default::default()
    };
    let mut rows = Vec::with_capacity(authors.len());
    for a in authors {
        let Some(citations) = a.citation_count else {
            report.missing_citation_count += 1;
            continue;
        };
        let Some(m) = by_id.get(a.author_id.as_str()) else {
            report.missing_metrics += 1;
            continue;
        };
        let papers = a
            .paper_count
            .or_else(|| corpus_counts.get(&a.author_id).copied())
            .unwrap_or(0);
        rows.push(AuthorCovariates {
            author_id: a.author_id.clone(),
            h_index: a.h_index,
            field_of_study: a.field().to_string(),
            paper_count: papers as f64,
            citation_count: citations as f64,
            menteeship_sum: m.menteeship_sum,
            menteeship_mean: m.menteeship_mean,
            mentorship_sum: m.mentorship_sum,
            mentorship_mean: m.mentorship_mean,
        });
    }
    (rows, report)
}
