//! Weighted directed mentorship graph (edges point mentor to mentee), its
//! per-node metrics, the graph features fed to the second-stage model, and
//! two-stage inference over the candidate pool.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::cohort::candidate_pool;
use crate::corpus::{AuthorIx, Corpus};
use crate::gbdt::GbdtModel;
use crate::pairfeat::{extract_matrix, FeatureMatrix, FeatureValue, STAGE1_FEATURES};
use crate::{Error, Result};

pub const GRAPH_FEATURES: [&str; 20] = [
    "coa_out_min",
    "coa_in_min",
    "mte_out_min",
    "mte_in_min",
    "coa_out_max",
    "coa_in_max",
    "mte_out_max",
    "mte_in_max",
    "coa_out_sum",
    "coa_in_sum",
    "mte_out_sum",
    "mte_in_sum",
    "mte_weight_sum",
    "coa_weight_sum",
    "mte_avg_in",
    "mte_avg_out",
    "coa_avg_in",
    "coa_avg_out",
    "mte_ratio_in_out",
    "coa_ratio_in_out",
];

/// Stage-1 columns followed by the graph columns.
pub fn stage2_schema() -> Vec<String> {
    STAGE1_FEATURES.iter().chain(GRAPH_FEATURES.iter()).map(|s| s.to_string()).collect()
}

/// Running aggregate over one direction of a node's edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideAgg {
    pub count: u32,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for SideAgg {
    fn default() -> Self {
        Self {
            count: 0,
            sum: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl SideAgg {
    pub fn push(&mut self, w: f64) {
        self.count += 1;
        self.sum += w;
        self.min = self.min.min(w);
        self.max = self.max.max(w);
    }

    pub fn merge(&mut self, other: &SideAgg) {
        self.count += other.count;
        self.sum += other.sum;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    /// Min, or 0 for an empty side.
    pub fn min_or_zero(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.min
        }
    }

    pub fn max_or_zero(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.max
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeAgg {
    pub incoming: SideAgg,
    pub outgoing: SideAgg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub mentor: String,
    pub mentee: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MentorshipGraph {
    /// Sorted by (mentor, mentee), so each node's out-edges are contiguous.
    edges: Vec<Edge>,
    out_ranges: BTreeMap<String, Range<usize>>,
    nodes: BTreeMap<String, NodeAgg>,
}

/// Builds the graph; the result does not depend on input order.
pub fn build_graph<I, S>(edges: I) -> Result<MentorshipGraph>
where
    I: IntoIterator<Item = (S, S, f64)>,
    S: Into<String>,
{
    let mut edges: Vec<Edge> = edges
        .into_iter()
        .map(|(a, b, w)| Edge {
            mentor: a.into(),
            mentee: b.into(),
            weight: w,
        })
        .collect();
    for e in &edges {
        if !(0.0..=1.0).contains(&e.weight) {
            return Err(Error::WeightOutOfRange {
                mentor: e.mentor.clone(),
                mentee: e.mentee.clone(),
                weight: e.weight,
            });
        }
        if e.mentor == e.mentee {
            return Err(Error::SameAuthor(e.mentor.clone()));
        }
    }
    edges.sort_by(|a, b| (&a.mentor, &a.mentee).cmp(&(&b.mentor, &b.mentee)));
    if let Some(w) = edges.windows(2).find(|w| w[0].mentor == w[1].mentor && w[0].mentee == w[1].mentee) {
        return Err(Error::DuplicateEdge {
            mentor: w[0].mentor.clone(),
            mentee: w[0].mentee.clone(),
        });
    }
    let mut nodes: BTreeMap<String, NodeAgg> = BTreeMap::new();
    let mut out_ranges: BTreeMap<String, Range<usize>> = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        nodes.entry(e.mentor.clone()).or_default().outgoing.push(e.weight);
        nodes.entry(e.mentee.clone()).or_default().incoming.push(e.weight);
        out_ranges.entry(e.mentor.clone()).or_insert(i..i).end = i + 1;
    }
    Ok(MentorshipGraph {
        edges,
        out_ranges,
        nodes,
    })
}

impl MentorshipGraph {
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    /// Aggregates for `id`; an absent node has two empty sides.
    pub fn aggregates(&self, id: &str) -> NodeAgg {
        self.nodes.get(id).copied().unwrap_or_default()
    }

    pub fn out_edges(&self, id: &str) -> &[Edge] {
        self.out_ranges.get(id).map_or(&[], |r| &self.edges[r.clone()])
    }

    pub fn weight(&self, mentor: &str, mentee: &str) -> Option<f64> {
        let out = self.out_edges(mentor);
        out.binary_search_by(|e| e.mentee.as_str().cmp(mentee))
            .ok()
            .map(|i| out[i].weight)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    /// Total incoming weight (mentorship received).
    pub menteeship_sum: f64,
    pub menteeship_mean: f64,
    /// Total outgoing weight (mentorship given).
    pub mentorship_sum: f64,
    pub mentorship_mean: f64,
    pub in_degree: u32,
    pub out_degree: u32,
}

pub fn node_metrics(graph: &MentorshipGraph, author_id: &str) -> NodeMetrics {
    let agg = graph.aggregates(author_id);
    NodeMetrics {
        menteeship_sum: agg.incoming.sum,
        menteeship_mean: agg.incoming.mean().unwrap_or(0.0),
        mentorship_sum: agg.outgoing.sum,
        mentorship_mean: agg.outgoing.mean().unwrap_or(0.0),
        in_degree: agg.incoming.count,
        out_degree: agg.outgoing.count,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphFeatureVector {
    /// In [`GRAPH_FEATURES`] order.
    pub values: Vec<FeatureValue>,
}

impl GraphFeatureVector {
    pub fn get(&self, name: &str) -> FeatureValue {
        let i = GRAPH_FEATURES.iter().position(|f| *f == name)?;
        self.values[i]
    }
}

fn ratio(num: f64, den: f64) -> FeatureValue {
    (den != 0.0).then(|| num / den)
}

/// The 20 graph features of a pair, from the two endpoints' aggregates.
pub fn graph_features(graph: &MentorshipGraph, mentor_candidate_id: &str, mentee_id: &str) -> GraphFeatureVector {
    let c = graph.aggregates(mentor_candidate_id);
    let m = graph.aggregates(mentee_id);
    let values = [
        Some(c.outgoing.min_or_zero()),
        Some(c.incoming.min_or_zero()),
        Some(m.outgoing.min_or_zero()),
        Some(m.incoming.min_or_zero()),
        Some(c.outgoing.max_or_zero()),
        Some(c.incoming.max_or_zero()),
        Some(m.outgoing.max_or_zero()),
        Some(m.incoming.max_or_zero()),
        Some(c.outgoing.sum),
        Some(c.incoming.sum),
        Some(m.outgoing.sum),
        Some(m.incoming.sum),
        Some(m.incoming.sum + m.outgoing.sum),
        Some(c.incoming.sum + c.outgoing.sum),
        m.incoming.mean(),
        m.outgoing.mean(),
        c.incoming.mean(),
        c.outgoing.mean(),
        ratio(m.incoming.sum, m.outgoing.sum),
        ratio(c.incoming.sum, c.outgoing.sum),
    ];
    GraphFeatureVector { values: values.to_vec() }
}

/// Graph features for each `(mentor, mentee)` pair, in order.
pub fn graph_matrix<S: AsRef<str>>(graph: &MentorshipGraph, pairs: &[(S, S)]) -> Result<FeatureMatrix> {
    let mut m = FeatureMatrix::new(GRAPH_FEATURES.iter().map(|s| s.to_string()).collect());
    for (a, b) in pairs {
        m.push_row(graph_features(graph, a.as_ref(), b.as_ref()).values)?;
    }
    Ok(m)
}

/// Out-neighbors with weight strictly above `threshold`, heaviest first, then by ID.
pub fn mentees_above(graph: &MentorshipGraph, mentor_id: &str, threshold: f64) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = graph
        .out_edges(mentor_id)
        .iter()
        .filter(|e| e.weight > threshold)
        .map(|e| (e.mentee.clone(), e.weight))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MentorshipSum,
    MenteeshipSum,
    MentorshipMean,
    MenteeshipMean,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::MentorshipSum,
        Metric::MenteeshipSum,
        Metric::MentorshipMean,
        Metric::MenteeshipMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::MentorshipSum => "mentorship_sum",
            Metric::MenteeshipSum => "menteeship_sum",
            Metric::MentorshipMean => "mentorship_mean",
            Metric::MenteeshipMean => "menteeship_mean",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn of(self, m: &NodeMetrics) -> f64 {
        match self {
            Metric::MentorshipSum => m.mentorship_sum,
            Metric::MenteeshipSum => m.menteeship_sum,
            Metric::MentorshipMean => m.mentorship_mean,
            Metric::MenteeshipMean => m.menteeship_mean,
        }
    }
}

/// The `n` highest nodes by `metric`; ties by ID.
pub fn top_by_metric(graph: &MentorshipGraph, metric: Metric, n: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = graph
        .node_ids()
        .map(|id| (id.to_string(), metric.of(&node_metrics(graph, id))))
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(n);
    all
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdge {
    pub mentor_id: String,
    pub mentee_id: String,
    pub stage1_score: f64,
    pub stage2_score: f64,
}

/// Graph features from stage-1 scores, appended to the stage-1 matrix and scored by `stage2`.
pub fn stage2_scores(
    stage2: &GbdtModel,
    stage1_matrix: &FeatureMatrix,
    ids: &[(&str, &str)],
    graph: &MentorshipGraph,
) -> Result<Vec<f64>> {
    let x = stage1_matrix.hconcat(&graph_matrix(graph, ids)?)?;
    stage2.predict_matrix(&x)
}

/// Scores every candidate pair with both stages. Output order is the candidate
/// pool order (by mentee, then candidate).
pub fn infer_two_stage(
    corpus: &Corpus,
    stage1: &GbdtModel,
    stage2: &GbdtModel,
    percent: f64,
    k: u32,
) -> Result<Vec<ScoredEdge>> {
    let pool: Vec<(AuthorIx, AuthorIx)> = candidate_pool(corpus, k);
    let x1 = extract_matrix(corpus, &pool, percent)?;
    let s1 = stage1.predict_matrix(&x1)?;
    let ids: Vec<(&str, &str)> = pool
        .iter()
        .map(|&(a, b)| (corpus.author_id(a), corpus.author_id(b)))
        .collect();
    let graph = build_graph(ids.iter().zip(&s1).map(|(&(a, b), &w)| (a, b, w)))?;
    let s2 = stage2_scores(stage2, &x1, &ids, &graph)?;
    Ok(ids
        .iter()
        .zip(s1.iter().zip(&s2))
        .map(|(&(a, b), (&w1, &w2))| ScoredEdge {
            mentor_id: a.to_string(),
            mentee_id: b.to_string(),
            stage1_score: w1,
            stage2_score: w2,
        })
        .collect())
}
