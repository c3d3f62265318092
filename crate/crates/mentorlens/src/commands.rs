//! One function per subcommand. Each reads its inputs from the workdir (or the
//! configured corpus paths), computes, and publishes all of its outputs at once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use mentorlens_core::cohort::build_training_pairs;
use mentorlens_core::corpus::Corpus;
use mentorlens_core::gbdt::{GbdtModel, TrainConfig};
use mentorlens_core::glm::{build_design, fit_negbin_glm, interpret_multiplicative, DesignReport};
use mentorlens_core::graph::{stage2_schema, top_by_metric, Metric};
use mentorlens_core::linker::LinkReport;
use mentorlens_core::pairfeat::{FeatureMatrix, STAGE1_FEATURES};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::{self, Outputs};
use crate::pipeline::{self, CovariateReport, TrainSummary};
use crate::synth::{self, SynthConfig};

pub const PAPERS: &str = "papers.jsonl";
pub const AUTHORS: &str = "authors.jsonl";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const LINKED: &str = "linked_pairs.csv";
pub const LINK_REPORT_TXT: &str = "link_report.txt";
pub const LINK_REPORT_JSON: &str = "link_report.json";
pub const TRAINING_PAIRS: &str = "training_pairs.csv";
pub const CANDIDATE_PAIRS: &str = "candidate_pairs.csv";
pub const TRAINING_REPORT: &str = "training_report.json";
pub const FEATURES_TRAIN: &str = "features_train.csv";
pub const FEATURES_POOL: &str = "features_pool.csv";
pub const MODEL_STAGE1: &str = "model_stage1.json";
pub const MODEL_STAGE2: &str = "model_stage2.json";
pub const TRIALS_STAGE1: &str = "trials_stage1.csv";
pub const TRIALS_STAGE2: &str = "trials_stage2.csv";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const EDGES: &str = "edges.tsv";
pub const NODE_METRICS: &str = "node_metrics.csv";
pub const GLM_RESULTS: &str = "glm_results.csv";
pub const GLM_REPORT: &str = "glm_report.json";
pub const REPORT: &str = "report.md";

/// How many mentors `report` lists per metric.
const TOP_MENTORS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub papers: usize,
    pub authors: usize,
    /// Authors that appear only in paper author lists.
    pub placeholder_authors: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub authorships: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub summary: TrainSummary,
    pub stage1_config: TrainConfig,
    pub stage2_config: TrainConfig,
    pub search_iterations: u32,
    pub n_rounds: u32,
    pub seed: u64,
    pub dense_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmReport {
    pub covariates: CovariateReport,
    pub design: DesignReport,
    pub reference_field: String,
    pub alpha: f64,
    pub converged: bool,
    pub iterations: u32,
    pub log_likelihood: f64,
    pub n_obs: usize,
}

fn corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    let papers = cfg.path(PAPERS);
    if !papers.exists() {
        return Err(Error::MissingInput {
            path: papers,
            hint: "run `mentorlens ingest` first".into(),
        });
    }
    io::load_corpus(&papers, Some(&cfg.path(AUTHORS)))
}

pub fn synth(cfg: &PipelineConfig, synth_cfg: &SynthConfig, out: Option<PathBuf>) -> Result<Vec<PathBuf>> {
    let dir = out.unwrap_or_else(|| cfg.synth_dir());
    let corpus = synth::generate(synth_cfg)?;
    synth::write(&corpus, &dir)
}

pub fn ingest(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let authors_path = cfg.authors_input();
    let corpus = io::load_corpus(&cfg.papers_input(), authors_path.as_deref())?;
    let supplied = match &authors_path {
        Some(p) => io::read_authors(p)?.len(),
        None => 0,
    };
    let (papers, authors) = corpus.into_records();
    let report = IngestReport {
        papers: papers.len(),
        authors: authors.len(),
        placeholder_authors: authors.len() - supplied,
        first_year: papers.first().map_or(0, |p| p.year),
        last_year: papers.last().map_or(0, |p| p.year),
        authorships: papers.iter().map(|p| p.authors.len()).sum(),
    };
    let mut out = Outputs::new();
    out.add(cfg.path(PAPERS), io::papers_jsonl(&papers)?);
    out.add(cfg.path(AUTHORS), io::authors_jsonl(&authors)?);
    out.add(cfg.path(INGEST_REPORT), io::json_bytes(&report)?);
    out.commit()
}

fn link_report_text(r: &LinkReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "gold pairs: {}", r.total);
    let _ = writeln!(s, "linked: {}", r.linked);
    let _ = writeln!(s, "no mentee match: {}", r.no_mentee_match);
    let _ = writeln!(s, "no mentor match: {}", r.no_mentor_match);
    let _ = writeln!(s, "ambiguity degree histogram:");
    for (d, n) in &r.ambiguity_histogram {
        let _ = writeln!(s, "  {d}: {n}");
    }
    s
}

pub fn link(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let corpus = corpus(cfg)?;
    let gold = io::read_gold(&cfg.gold_input())?;
    let (links, report) = pipeline::link(&corpus, &gold);
    let mut out = Outputs::new();
    out.add(cfg.path(LINKED), io::linked_csv(&links)?);
    out.add(cfg.path(LINK_REPORT_TXT), link_report_text(&report).into_bytes());
    out.add(cfg.path(LINK_REPORT_JSON), io::json_bytes(&report)?);
    out.commit()
}

pub fn candidates(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let corpus = corpus(cfg)?;
    let linked = io::read_linked(&cfg.path(LINKED))?;
    let gold: Vec<(String, String)> = linked.into_iter().map(|l| (l.mentor_id, l.mentee_id)).collect();
    let training = build_training_pairs(&corpus, &gold, cfg.k, cfg.max_negatives);
    let pool: Vec<(String, String)> = pipeline::candidate_pool(&corpus, cfg.k)
        .into_iter()
        .map(|(a, b)| (corpus.author_id(a).to_string(), corpus.author_id(b).to_string()))
        .collect();
    let mut out = Outputs::new();
    out.add(cfg.path(TRAINING_PAIRS), io::labeled_pairs_csv(&training.pairs)?);
    out.add(cfg.path(CANDIDATE_PAIRS), io::pool_csv(&pool)?);
    out.add(cfg.path(TRAINING_REPORT), io::json_bytes(&training.report)?);
    out.commit()
}

pub fn featurize(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let corpus = corpus(cfg)?;
    let labeled = io::read_pairs(&cfg.path(TRAINING_PAIRS))?;
    let pool = io::read_pairs(&cfg.path(CANDIDATE_PAIRS))?;
    let lab_ix = pipeline::resolve(&corpus, &pipeline::labeled_ids(&labeled))?;
    let pool_ix = pipeline::resolve(&corpus, &pipeline::labeled_ids(&pool))?;
    let labels = labeled.iter().map(|p| p.label).collect();
    let x_train = pipeline::featurize(&corpus, &lab_ix, cfg.dense_percent, Some(labels))?;
    let x_pool = pipeline::featurize(&corpus, &pool_ix, cfg.dense_percent, None)?;
    let mut out = Outputs::new();
    out.add(cfg.path(FEATURES_TRAIN), io::features_csv(&x_train)?);
    out.add(cfg.path(FEATURES_POOL), io::features_csv(&x_pool)?);
    out.commit()
}

fn stage1_schema() -> Vec<String> {
    STAGE1_FEATURES.iter().map(|s| s.to_string()).collect()
}

fn check_rows(what: &str, pairs: usize, m: &FeatureMatrix) -> Result<()> {
    if pairs != m.n_rows() {
        return Err(Error::Data(format!(
            "{what}: {pairs} pairs but {} feature rows; rerun `mentorlens featurize`",
            m.n_rows()
        )));
    }
    Ok(())
}

pub fn train(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let schema = stage1_schema();
    let x_train = io::read_features(&cfg.path(FEATURES_TRAIN), &schema)?;
    let x_pool = io::read_features(&cfg.path(FEATURES_POOL), &schema)?;
    let labeled = io::read_pairs(&cfg.path(TRAINING_PAIRS))?;
    let pool = pipeline::labeled_ids(&io::read_pairs(&cfg.path(CANDIDATE_PAIRS))?);
    check_rows(TRAINING_PAIRS, labeled.len(), &x_train)?;
    check_rows(CANDIDATE_PAIRS, pool.len(), &x_pool)?;
    if let Some(l) = &x_train.labels {
        if l.iter().zip(&labeled).any(|(a, p)| *a != p.label) {
            return Err(Error::Data(format!(
                "labels in {FEATURES_TRAIN} disagree with {TRAINING_PAIRS}; rerun `mentorlens featurize`"
            )));
        }
    }
    let outcome = pipeline::train_two_stage(&labeled, &x_train, &pool, &x_pool, &cfg.train_settings())?;
    let report = TrainReport {
        summary: outcome.summary.clone(),
        stage1_config: outcome.stage1.best_config().clone(),
        stage2_config: outcome.stage2.best_config().clone(),
        search_iterations: cfg.search_iterations,
        n_rounds: cfg.n_rounds,
        seed: cfg.seed,
        dense_percent: cfg.dense_percent,
    };
    let mut out = Outputs::new();
    out.add(cfg.path(MODEL_STAGE1), io::model_json(&outcome.stage1.model)?);
    out.add(cfg.path(MODEL_STAGE2), io::model_json(&outcome.stage2.model)?);
    out.add(cfg.path(TRIALS_STAGE1), io::trials_csv(&outcome.stage1.trials)?);
    out.add(cfg.path(TRIALS_STAGE2), io::trials_csv(&outcome.stage2.trials)?);
    out.add(cfg.path(TRAIN_REPORT), io::json_bytes(&report)?);
    out.commit()
}

fn load_models(cfg: &PipelineConfig) -> Result<(GbdtModel, GbdtModel)> {
    let s1 = io::read_model(&cfg.path(MODEL_STAGE1))?;
    let s2 = io::read_model(&cfg.path(MODEL_STAGE2))?;
    if s1.schema != stage1_schema() {
        return Err(Error::Data(format!("{MODEL_STAGE1} was not trained on stage-1 features")));
    }
    if s2.schema != stage2_schema() {
        return Err(Error::Data(format!("{MODEL_STAGE2} was not trained on stage-2 features")));
    }
    Ok((s1, s2))
}

pub fn infer(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let (s1, s2) = load_models(cfg)?;
    let pool = pipeline::labeled_ids(&io::read_pairs(&cfg.path(CANDIDATE_PAIRS))?);
    let x_pool = io::read_features(&cfg.path(FEATURES_POOL), &stage1_schema())?;
    check_rows(CANDIDATE_PAIRS, pool.len(), &x_pool)?;
    let edges = pipeline::infer(&pool, &x_pool, &s1, &s2)?;
    let mut out = Outputs::new();
    out.add(cfg.path(EDGES), io::edges_tsv(&edges));
    out.commit()
}

pub fn graph_metrics(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let corpus = corpus(cfg)?;
    let edges = io::read_edges(&cfg.path(EDGES))?;
    let graph = pipeline::final_graph(&edges)?;
    let rows = pipeline::metrics_rows(&graph, corpus.authors().iter().map(|a| a.author_id.as_str()));
    let mut out = Outputs::new();
    out.add(cfg.path(NODE_METRICS), io::node_metrics_csv(&rows)?);
    out.commit()
}

pub fn glm(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let corpus = corpus(cfg)?;
    let metrics = io::read_node_metrics(&cfg.path(NODE_METRICS))?;
    let counts: BTreeMap<String, u64> = corpus
        .author_ixs()
        .map(|a| (corpus.author_id(a).to_string(), corpus.papers_of(a).len() as u64))
        .collect();
    let (rows, cov_report) = pipeline::glm_covariates(corpus.authors(), &counts, &metrics);
    let design = build_design(rows)?;
    let result = fit_negbin_glm(&design, cfg.glm_alpha)?;
    let report = GlmReport {
        covariates: cov_report,
        design: design.report.clone(),
        reference_field: design.reference_field.clone(),
        alpha: result.alpha,
        converged: result.converged,
        iterations: result.iterations,
        log_likelihood: result.log_likelihood,
        n_obs: result.n_obs,
    };
    let mut out = Outputs::new();
    out.add(cfg.path(GLM_RESULTS), io::glm_csv(&result)?);
    out.add(cfg.path(GLM_REPORT), io::json_bytes(&report)?);
    out.commit()
}

#[derive(Debug, Deserialize)]
struct GlmRow {
    covariate: String,
    coef: f64,
    std_err: f64,
    z: f64,
    p: f64,
    ci_lo: f64,
    ci_hi: f64,
}

fn read_glm_rows(path: &std::path::Path) -> Result<Vec<GlmRow>> {
    let f = io::open_input(path, "run `mentorlens glm` first")?;
    let mut rdr = csv::Reader::from_reader(f);
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Data(format!("{}: {e}", path.display()))))
        .collect()
}

/// Markdown summary of a finished run.
pub fn report(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let link: LinkReport = io::read_json(&cfg.path(LINK_REPORT_JSON), "run `mentorlens link` first")?;
    let train: TrainReport = io::read_json(&cfg.path(TRAIN_REPORT), "run `mentorlens train` first")?;
    let (_, s2) = load_models(cfg)?;
    let edges = io::read_edges(&cfg.path(EDGES))?;
    let graph = pipeline::final_graph(&edges)?;
    let glm_rows = read_glm_rows(&cfg.path(GLM_RESULTS))?;
    let glm: GlmReport = io::read_json(&cfg.path(GLM_REPORT), "run `mentorlens glm` first")?;

    let mut s = String::new();
    let _ = writeln!(s, "# Mentorship inference report\n");
    let _ = writeln!(s, "## Linking\n");
    let _ = writeln!(s, "| gold pairs | linked | no mentee match | no mentor match |");
    let _ = writeln!(s, "|---|---|---|---|");
    let _ = writeln!(
        s,
        "| {} | {} | {} | {} |\n",
        link.total, link.linked, link.no_mentee_match, link.no_mentor_match
    );
    let hist: Vec<String> = link.ambiguity_histogram.iter().map(|(d, n)| format!("{d}: {n}")).collect();
    let _ = writeln!(s, "Ambiguity degrees: {}\n", hist.join(", "));

    let t = &train.summary;
    let _ = writeln!(s, "## Classifier\n");
    let _ = writeln!(
        s,
        "{} training rows ({} mentees), {} validation rows ({} mentees). {} search iterations of {} rounds, seed {}.\n",
        t.train_rows,
        t.train_mentees,
        t.validation_rows,
        t.validation_mentees,
        train.search_iterations,
        train.n_rounds,
        train.seed
    );
    let _ = writeln!(s, "| stage | validation AUC | best trial | failed trials | learning rate | leaves |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for (name, auc, best, failed, c) in [
        ("1", t.stage1_val_auc, t.stage1_best_trial, t.stage1_failed_trials, &train.stage1_config),
        ("2", t.stage2_val_auc, t.stage2_best_trial, t.stage2_failed_trials, &train.stage2_config),
    ] {
        let _ = writeln!(
            s,
            "| {name} | {auc:.4} | {best} | {failed} | {} | {} |",
            c.learning_rate, c.num_leaves
        );
    }
    let _ = writeln!(s, "\nTop stage-2 features by split gain:\n");
    let mut imp = s2.feature_importance();
    imp.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    for (name, gain) in imp.iter().filter(|(_, g)| *g > 0.0).take(10) {
        let _ = writeln!(s, "- `{name}`: {gain:.3}");
    }

    let _ = writeln!(s, "\n## Mentorship graph\n");
    let _ = writeln!(s, "{} scored edges over {} authors.\n", graph.num_edges(), graph.num_nodes());
    for metric in [Metric::MentorshipSum, Metric::MentorshipMean] {
        let _ = writeln!(s, "Top mentors by `{}`:\n", metric.name());
        let _ = writeln!(s, "| author | value |");
        let _ = writeln!(s, "|---|---|");
        for (id, v) in top_by_metric(&graph, metric, TOP_MENTORS) {
            let _ = writeln!(s, "| {id} | {v:.4} |");
        }
        let _ = writeln!(s);
    }

    let _ = writeln!(s, "## Citation model\n");
    let _ = writeln!(
        s,
        "Negative binomial, alpha {}, {} authors after {} outlier drops and {} without h-index; reference field `{}`; converged: {} in {} iterations.\n",
        glm.alpha,
        glm.n_obs,
        glm.design.outliers.dropped,
        glm.design.missing_h_index,
        glm.reference_field,
        glm.converged,
        glm.iterations
    );
    let _ = writeln!(s, "| covariate | coef | exp(coef) | std err | z | p | 95% CI |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|");
    for r in &glm_rows {
        let _ = writeln!(
            s,
            "| {} | {:.4} | {:.4} | {:.4} | {:.2} | {:.4} | [{:.4}, {:.4}] |",
            r.covariate,
            r.coef,
            interpret_multiplicative(r.coef),
            r.std_err,
            r.z,
            r.p,
            r.ci_lo,
            r.ci_hi
        );
    }
    let mut out = Outputs::new();
    out.add(cfg.path(REPORT), s.into_bytes());
    out.commit()
}
