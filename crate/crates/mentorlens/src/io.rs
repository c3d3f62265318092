//! File formats: JSONL corpus records, CSV tables, JSON models, and the
//! all-or-nothing output writer every subcommand uses.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::Datelike;
use mentorlens_core::cohort::LabeledPair;
use mentorlens_core::corpus::{AuthorRecord, Corpus, GoldPair, PaperRecord};
use mentorlens_core::gbdt::{GbdtModel, Trial, TrialStatus, MODEL_FORMAT};
use mentorlens_core::glm::GlmResult;
use mentorlens_core::graph::{NodeMetrics, ScoredEdge};
use mentorlens_core::linker::LinkResult;
use mentorlens_core::pairfeat::{FeatureMatrix, FeatureValue};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Collects output files in memory and publishes them together. Nothing is
/// written unless every output was produced, and a failed commit removes what
/// it already renamed into place.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut done: Vec<PathBuf> = Vec::new();
        let result = (|| {
            for (path, bytes) in &self.files {
                let dir = match path.parent() {
                    Some(d) if !d.as_os_str().is_empty() => d,
                    _ => Path::new("."),
                };
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
                tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
                tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
                done.push(path.clone());
            }
            Ok(())
        })();
        match result {
            Ok(()) => Ok(done),
            Err(e) => {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                Err(e)
            }
        }
    }
}

/// Opens an input, turning "not found" into an actionable error.
pub fn open_input(path: &Path, hint: &str) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput {
            path: path.to_path_buf(),
            hint: hint.to_string(),
        },
        _ => Error::io(path, e),
    })
}

pub fn current_year() -> i32 {
    chrono::Utc::now().year()
}

fn read_jsonl<T: DeserializeOwned>(path: &Path, hint: &str) -> Result<Vec<T>> {
    let reader = BufReader::new(open_input(path, hint)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

fn to_jsonl<T: Serialize>(records: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| Error::Internal(e.to_string()))?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn read_papers(path: &Path) -> Result<Vec<PaperRecord>> {
    read_jsonl(path, "pass the papers file with --papers or set `papers` in the config")
}

pub fn read_authors(path: &Path) -> Result<Vec<AuthorRecord>> {
    read_jsonl(path, "pass the authors file with --authors or set `authors` in the config")
}

pub fn papers_jsonl(papers: &[PaperRecord]) -> Result<Vec<u8>> {
    to_jsonl(papers)
}

pub fn authors_jsonl(authors: &[AuthorRecord]) -> Result<Vec<u8>> {
    to_jsonl(authors)
}

/// Loads and validates a corpus; years may run up to next year.
pub fn load_corpus(papers: &Path, authors: Option<&Path>) -> Result<Corpus> {
    let p = read_papers(papers)?;
    let a = match authors {
        Some(path) => read_authors(path)?,
        None => Vec::new(),
    };
    Ok(Corpus::new(p, a, current_year() + 1)?)
}

fn csv_reader(path: &Path, hint: &str) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(open_input(path, hint)?))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: e.to_string(),
    }
}

fn read_csv<T: DeserializeOwned>(path: &Path, hint: &str) -> Result<Vec<T>> {
    let mut rdr = csv_reader(path, hint)?;
    rdr.deserialize().map(|r| r.map_err(|e| csv_error(path, e))).collect()
}

fn to_csv<T: Serialize>(records: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Internal(e.to_string()))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

pub fn read_gold(path: &Path) -> Result<Vec<GoldPair>> {
    read_csv(path, "pass the gold pairs CSV (mentor,mentee,source) with --gold or set `gold` in the config")
}

pub fn gold_csv(gold: &[GoldPair]) -> Result<Vec<u8>> {
    to_csv(gold, &["mentor", "mentee", "source"])
}

pub fn read_linked(path: &Path) -> Result<Vec<LinkResult>> {
    read_csv(path, "run `mentorlens link` first")
}

pub fn linked_csv(links: &[LinkResult]) -> Result<Vec<u8>> {
    to_csv(
        links,
        &["mentor_id", "mentee_id", "copub_count_at_link", "ambiguity_degree", "source"],
    )
}

#[derive(serde::Deserialize, Serialize)]
struct PairRow {
    mentor_candidate_id: String,
    mentee_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
}

pub fn labeled_pairs_csv(pairs: &[LabeledPair]) -> Result<Vec<u8>> {
    let rows: Vec<PairRow> = pairs
        .iter()
        .map(|p| PairRow {
            mentor_candidate_id: p.mentor_candidate_id.clone(),
            mentee_id: p.mentee_id.clone(),
            label: Some(p.label as u8),
        })
        .collect();
    to_csv(&rows, &["mentor_candidate_id", "mentee_id", "label"])
}

pub fn pool_csv(pairs: &[(String, String)]) -> Result<Vec<u8>> {
    let rows: Vec<PairRow> = pairs
        .iter()
        .map(|(a, b)| PairRow {
            mentor_candidate_id: a.clone(),
            mentee_id: b.clone(),
            label: None,
        })
        .collect();
    to_csv(&rows, &["mentor_candidate_id", "mentee_id"])
}

/// Reads a candidate file; a missing label column yields `false` labels.
pub fn read_pairs(path: &Path) -> Result<Vec<LabeledPair>> {
    let rows: Vec<PairRow> = read_csv(path, "run `mentorlens candidates` first")?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let label = match r.label {
                None | Some(0) => false,
                Some(1) => true,
                Some(v) => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: i as u64 + 2,
                        reason: format!("label must be 0 or 1, got {v}"),
                    })
                }
            };
            Ok(LabeledPair {
                mentor_candidate_id: r.mentor_candidate_id,
                mentee_id: r.mentee_id,
                label,
            })
        })
        .collect()
}

/// Header = schema (plus `label` when labels are present); missing values are empty cells.
pub fn features_csv(m: &FeatureMatrix) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header: Vec<&str> = m.schema.iter().map(String::as_str).collect();
    if m.labels.is_some() {
        header.push("label");
    }
    w.write_record(&header).map_err(|e| Error::Internal(e.to_string()))?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for (i, row) in m.rows().iter().enumerate() {
        rec.clear();
        rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        if let Some(l) = &m.labels {
            rec.push(if l[i] { "1" } else { "0" }.to_string());
        }
        w.write_record(&rec).map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

pub fn read_features(path: &Path, schema: &[String]) -> Result<FeatureMatrix> {
    let mut rdr = csv_reader(path, "run `mentorlens featurize` first")?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let has_label = header.len() == schema.len() + 1 && &header[schema.len()] == "label";
    let cols: Vec<&str> = header.iter().take(schema.len()).collect();
    if cols.len() != schema.len() || (header.len() != schema.len() && !has_label) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected {} feature columns, found {}", schema.len(), header.len()),
        });
    }
    if let Some((i, (got, want))) = cols.iter().zip(schema).enumerate().find(|(_, (g, w))| **g != w.as_str()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("column {i} is `{got}`, expected `{want}`"),
        });
    }
    let mut m = FeatureMatrix::new(schema.to_vec());
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i as u64 + 2;
        let bad = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut row: Vec<FeatureValue> = Vec::with_capacity(schema.len());
        for cell in rec.iter().take(schema.len()) {
            row.push(if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|e| bad(format!("`{cell}`: {e}")))?)
            });
        }
        if has_label {
            labels.push(match &rec[schema.len()] {
                "1" => true,
                "0" => false,
                other => return Err(bad(format!("label must be 0 or 1, got `{other}`"))),
            });
        }
        m.push_row(row).map_err(|e| bad(e.to_string()))?;
    }
    if has_label {
        m.labels = Some(labels);
    }
    Ok(m)
}

pub fn model_json(model: &GbdtModel) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec(model).map_err(|e| Error::Internal(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn read_model(path: &Path) -> Result<GbdtModel> {
    let f = open_input(path, "run `mentorlens train` first")?;
    let model: GbdtModel = serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        reason: e.to_string(),
    })?;
    if model.format != MODEL_FORMAT {
        return Err(Error::Data(format!(
            "{}: unsupported model format `{}` (expected `{MODEL_FORMAT}`)",
            path.display(),
            model.format
        )));
    }
    Ok(model)
}

pub fn trials_csv(trials: &[Trial]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let header = [
        "trial",
        "learning_rate",
        "num_leaves",
        "colsample_bytree",
        "subsample",
        "min_child_samples",
        "min_child_weight",
        "reg_alpha",
        "reg_lambda",
        "max_depth",
        "n_rounds",
        "seed",
        "val_auc",
        "status",
    ];
    w.write_record(header).map_err(|e| Error::Internal(e.to_string()))?;
    for t in trials {
        let c = &t.config;
        let status = match &t.status {
            TrialStatus::Ok => "ok".to_string(),
            TrialStatus::Failed(msg) => format!("failed: {msg}"),
        };
        w.write_record([
            t.index.to_string(),
            c.learning_rate.to_string(),
            c.num_leaves.to_string(),
            c.colsample_bytree.to_string(),
            c.subsample.to_string(),
            c.min_child_samples.to_string(),
            c.min_child_weight.to_string(),
            c.reg_alpha.to_string(),
            c.reg_lambda.to_string(),
            c.max_depth.map_or("unlimited".to_string(), |d| d.to_string()),
            c.n_rounds.to_string(),
            c.seed.to_string(),
            t.val_auc.map(|a| a.to_string()).unwrap_or_default(),
            status,
        ])
        .map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

pub fn edges_tsv(edges: &[ScoredEdge]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(edges.len() * 48);
    for e in edges {
        writeln!(
            buf,
            "{}\t{}\t{:.6}\t{:.6}",
            e.mentor_id, e.mentee_id, e.stage1_score, e.stage2_score
        )
        .expect("writing to a Vec cannot fail");
    }
    buf
}

pub fn read_edges(path: &Path) -> Result<Vec<ScoredEdge>> {
    let reader = BufReader::new(open_input(path, "run `mentorlens infer` first")?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            reason,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 tab-separated fields, found {}", f.len())));
        }
        let score = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
        out.push(ScoredEdge {
            mentor_id: f[0].to_string(),
            mentee_id: f[1].to_string(),
            stage1_score: score(f[2])?,
            stage2_score: score(f[3])?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct NodeMetricsRow {
    pub author_id: String,
    pub menteeship_sum: f64,
    pub menteeship_mean: f64,
    pub mentorship_sum: f64,
    pub mentorship_mean: f64,
    pub in_degree: u32,
    pub out_degree: u32,
}

impl NodeMetricsRow {
    pub fn new(author_id: &str, m: &NodeMetrics) -> Self {
        Self {
            author_id: author_id.to_string(),
            menteeship_sum: m.menteeship_sum,
            menteeship_mean: m.menteeship_mean,
            mentorship_sum: m.mentorship_sum,
            mentorship_mean: m.mentorship_mean,
            in_degree: m.in_degree,
            out_degree: m.out_degree,
        }
    }
}

pub fn node_metrics_csv(rows: &[NodeMetricsRow]) -> Result<Vec<u8>> {
    to_csv(
        rows,
        &[
            "author_id",
            "menteeship_sum",
            "menteeship_mean",
            "mentorship_sum",
            "mentorship_mean",
            "in_degree",
            "out_degree",
        ],
    )
}

pub fn read_node_metrics(path: &Path) -> Result<Vec<NodeMetricsRow>> {
    read_csv(path, "run `mentorlens graph-metrics` first")
}

pub fn glm_csv(result: &GlmResult) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["covariate", "coef", "std_err", "z", "p", "ci_lo", "ci_hi"])
        .map_err(|e| Error::Internal(e.to_string()))?;
    for c in &result.coefficients {
        w.write_record([
            c.name.clone(),
            format!("{:.6}", c.coef),
            format!("{:.6}", c.std_err),
            format!("{:.4}", c.z),
            format!("{:.4}", c.p_value),
            format!("{:.6}", c.ci_lo),
            format!("{:.6}", c.ci_hi),
        ])
        .map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, hint: &str) -> Result<T> {
    let f = open_input(path, hint)?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_round_trip_with_missing_and_labels() {
        let schema = vec!["a".to_string(), "b".to_string()];
        let rows = vec![vec![Some(0.1), None], vec![Some(1e-300), Some(-2.5)]];
        let m = FeatureMatrix::from_rows(schema.clone(), rows, Some(vec![true, false])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(&path, features_csv(&m).unwrap()).unwrap();
        let back = read_features(&path, &schema).unwrap();
        assert_eq!(back, m);
        let err = read_features(&path, &["a".to_string(), "c".to_string()]).unwrap_err();
        assert!(err.to_string().contains("column 1"));
    }

    #[test]
    fn jsonl_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        fs::write(&path, "{\"paper_id\":\"p\",\"year\":2000,\"authors\":[\"a\"]}\n\nnot json\n").unwrap();
        let err = read_papers(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let missing = read_papers(&dir.path().join("nope.jsonl")).unwrap_err();
        assert!(matches!(missing, Error::MissingInput { .. }));
        assert_eq!(missing.exit_code(), 2);
    }

    #[test]
    fn outputs_commit_all_or_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("a.txt");
        let mut out = Outputs::new();
        out.add(&good, b"x".to_vec());
        // a directory cannot be replaced by a file
        fs::create_dir(dir.path().join("blocked")).unwrap();
        fs::write(dir.path().join("blocked/keep"), b"").unwrap();
        out.add(dir.path().join("blocked"), b"y".to_vec());
        assert!(out.commit().is_err());
        assert!(!good.exists());
    }

    #[test]
    fn edges_have_six_decimals() {
        let e = ScoredEdge {
            mentor_id: "m".into(),
            mentee_id: "e".into(),
            stage1_score: 0.5,
            stage2_score: 1.0 / 3.0,
        };
        assert_eq!(String::from_utf8(edges_tsv(&[e])).unwrap(), "m\te\t0.500000\t0.333333\n");
    }
}
