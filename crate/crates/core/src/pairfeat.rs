//! Stage-1 pairwise features for a `(candidate mentor, mentee)` pair.
//!
//! Conventions shared by every feature:
//! * "till end" counts papers with `year <= end` of the (dense) period;
//! * "years" features are `last - first + 1` of a history truncated at the period end;
//! * "before" means `year < start`, "after" is cumulative through `end`;
//! * positions are 1-based over the pair's co-publications;
//! * a ratio with a zero denominator is `None` (missing).

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cohort::{CopubPeriod, DensePeriod, LabeledPair};
use crate::corpus::{AuthorIx, Corpus};
use crate::{Error, Result};

/// A feature value; `None` is the missing marker.
pub type FeatureValue = Option<f64>;

/// Canonical stage-1 column order. Changing it requires bumping [`SCHEMA_VERSION`].
pub const STAGE1_FEATURES: [&str; 42] = [
    // publication
    "copub_count",
    "total_mte_pubs",
    "total_coa_pubs",
    "mte_copub_total",
    "coa_copub_total",
    "mte_copub_prcnt",
    "coa_copub_prcnt",
    "ratio_mte_coa",
    "copub_years",
    "mte_years",
    "coa_years",
    "mte_copub_years_prcnt",
    "coa_copub_years_prcnt",
    "dense_mte_copub_total",
    "dense_coa_copub_total",
    "dense_total_coa_pubs",
    "dense_total_mte_pubs",
    "dense_copub_count",
    "dense_mte_copub_prcnt",
    "dense_coa_copub_prcnt",
    "dense_ratio_mte_coa",
    "dense_mte_years",
    "dense_coa_years",
    "dense_mte_copub_years_prcnt",
    "dense_coa_copub_years_prcnt",
    "coa_pubs_before_copub",
    "mte_pubs_before_copub",
    // co-author
    "mentee_coauthors_before_copub",
    "mentor_coauthors_before_copub",
    "mentee_coauthors_after_copub",
    "mentor_coauthors_after_copub",
    "mentee_coauthors_copub",
    "mentor_coauthors_copub",
    "ratio_mentee_mentor_coauthors",
    "ratio_mentee_mentor_coauthors_before",
    "ratio_mentee_mentor_coauthors_after",
    // position
    "mentee_min_position",
    "mentor_min_position",
    "mentee_max_position",
    "mentor_max_position",
    "mentee_avg_position",
    "mentor_avg_position",
];

pub const SCHEMA_VERSION: &str = "stage1-v1";

pub fn stage1_index(name: &str) -> Option<usize> {
    STAGE1_FEATURES.iter().position(|&f| f == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatureVector {
    pub values: Vec<FeatureValue>,
}

impl PairFeatureVector {
    pub fn get(&self, name: &str) -> FeatureValue {
        stage1_index(name).and_then(|i| self.values[i])
    }
}

fn ratio(num: f64, den: f64) -> FeatureValue {
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// Computes the stage-1 vector for `mentor` (the candidate) and `mentee`.
pub fn extract_pair_features_ix(
    corpus: &Corpus,
    mentor: AuthorIx,
    mentee: AuthorIx,
    percent: f64,
) -> Result<PairFeatureVector> {
    let copubs = if mentor == mentee {
        Vec::new()
    } else {
        corpus.copubs_ix(mentor, mentee)
    };
    if copubs.is_empty() {
        return Err(Error::NoCopublications {
            mentor: corpus.author_id(mentor).to_string(),
            mentee: corpus.author_id(mentee).to_string(),
        });
    }
    let years: Vec<i32> = copubs.iter().map(|&p| corpus.paper(p).year).collect();
    let full = CopubPeriod::from_years(&years)?;
    let dense = DensePeriod::from_years(&years, percent)?;
    let (start, end) = (full.start_year, full.end_year);
    let (d_start, d_end) = (dense.start_year, dense.end_year);

    let till = |a: AuthorIx, until: i32| corpus.count_before(a, until.saturating_add(1)) as f64;
    let within = |a: AuthorIx, lo: i32, hi: i32| corpus.count_in(a, lo, hi) as f64;
    let active_years = |a: AuthorIx, until: i32| -> f64 {
        match (corpus.first_year(a), corpus.last_year_until(a, until)) {
            (Some(f), Some(l)) => (l - f + 1) as f64,
            _ => 0.0,
        }
    };
    let coauthors = |a: AuthorIx, lo: i32, hi: i32| corpus.coauthors_ix(a, lo, hi).len() as f64;

    let copub_count = full.copub_count as f64;
    let total_mte = till(mentee, end);
    let total_coa = till(mentor, end);
    let mte_copub_total = within(mentee, start, end);
    let coa_copub_total = within(mentor, start, end);
    let copub_years = full.years() as f64;
    let mte_years = active_years(mentee, end);
    let coa_years = active_years(mentor, end);

    let dense_mte_copub_total = within(mentee, d_start, d_end);
    let dense_coa_copub_total = within(mentor, d_start, d_end);
    let dense_total_coa = till(mentor, d_end);
    let dense_total_mte = till(mentee, d_end);
    let dense_copub_count = dense.dense_copub_count as f64;
    let dense_years = dense.years() as f64;
    let dense_mte_years = active_years(mentee, d_end);
    let dense_coa_years = active_years(mentor, d_end);

    let mte_before = corpus.count_before(mentee, start) as f64;
    let coa_before = corpus.count_before(mentor, start) as f64;

    let mte_co_before = coauthors(mentee, i32::MIN, start - 1);
    let coa_co_before = coauthors(mentor, i32::MIN, start - 1);
    let mte_co_after = coauthors(mentee, i32::MIN, end);
    let coa_co_after = coauthors(mentor, i32::MIN, end);
    let mte_co_copub = coauthors(mentee, start, end);
    let coa_co_copub = coauthors(mentor, start, end);

    let mut mte_pos = (usize::MAX, 0usize, 0usize);
    let mut coa_pos = (usize::MAX, 0usize, 0usize);
    for &p in &copubs {
        for (who, acc) in [(mentee, &mut mte_pos), (mentor, &mut coa_pos)] {
            let pos = corpus.position(p, who).expect("co-publication lists both authors");
            acc.0 = acc.0.min(pos);
            acc.1 = acc.1.max(pos);
            acc.2 += pos;
        }
    }
    let n = copubs.len() as f64;

    let values = alloc::vec![
        Some(copub_count),
        Some(total_mte),
        Some(total_coa),
        Some(mte_copub_total),
        Some(coa_copub_total),
        ratio(copub_count, mte_copub_total),
        ratio(copub_count, coa_copub_total),
        ratio(total_mte, total_coa),
        Some(copub_years),
        Some(mte_years),
        Some(coa_years),
        ratio(copub_years, mte_years),
        ratio(copub_years, coa_years),
        Some(dense_mte_copub_total),
        Some(dense_coa_copub_total),
        Some(dense_total_coa),
        Some(dense_total_mte),
        Some(dense_copub_count),
        ratio(dense_copub_count, dense_mte_copub_total),
        ratio(dense_copub_count, dense_coa_copub_total),
        ratio(dense_total_mte, dense_total_coa),
        Some(dense_mte_years),
        Some(dense_coa_years),
        ratio(dense_years, dense_mte_years),
        ratio(dense_years, dense_coa_years),
        Some(coa_before),
        Some(mte_before),
        Some(mte_co_before),
        Some(coa_co_before),
        Some(mte_co_after),
        Some(coa_co_after),
        Some(mte_co_copub),
        Some(coa_co_copub),
        ratio(mte_co_copub, coa_co_copub),
        ratio(mte_co_before, coa_co_before),
        ratio(mte_co_after, coa_co_after),
        Some(mte_pos.0 as f64),
        Some(coa_pos.0 as f64),
        Some(mte_pos.1 as f64),
        Some(coa_pos.1 as f64),
        Some(mte_pos.2 as f64 / n),
        Some(coa_pos.2 as f64 / n),
    ];
    debug_assert_eq!(values.len(), STAGE1_FEATURES.len());
    Ok(PairFeatureVector { values })
}

pub fn extract_pair_features(
    corpus: &Corpus,
    mentor_candidate_id: &str,
    mentee_id: &str,
    percent: f64,
) -> Result<PairFeatureVector> {
    let mentor = corpus.require_author(mentor_candidate_id)?;
    let mentee = corpus.require_author(mentee_id)?;
    extract_pair_features_ix(corpus, mentor, mentee, percent)
}

/// Resolves labeled pairs to `(mentor, mentee)` indices.
pub fn resolve_pairs(corpus: &Corpus, pairs: &[LabeledPair]) -> Result<Vec<(AuthorIx, AuthorIx)>> {
    pairs
        .iter()
        .map(|p| Ok((corpus.require_author(&p.mentor_candidate_id)?, corpus.require_author(&p.mentee_id)?)))
        .collect()
}

/// Row-major feature table with a fixed column schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub schema: Vec<String>,
    rows: Vec<Vec<FeatureValue>>,
    pub labels: Option<Vec<bool>>,
}

impl FeatureMatrix {
    pub fn new(schema: Vec<String>) -> Self {
        Self {
            schema,
            rows: Vec::new(),
            labels: None,
        }
    }

    pub fn stage1() -> Self {
        Self::new(STAGE1_FEATURES.iter().map(|s| s.to_string()).collect())
    }

    pub fn from_rows(schema: Vec<String>, rows: Vec<Vec<FeatureValue>>, labels: Option<Vec<bool>>) -> Result<Self> {
        for r in &rows {
            check_row(&schema, r)?;
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::InvalidParameter {
                    name: "labels",
                    reason: alloc::format!("{} labels for {} rows", l.len(), rows.len()),
                });
            }
        }
        Ok(Self { schema, rows, labels })
    }

    pub fn push_row(&mut self, row: Vec<FeatureValue>) -> Result<()> {
        check_row(&self.schema, &row)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn rows(&self) -> &[Vec<FeatureValue>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[FeatureValue] {
        &self.rows[i]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Appends the columns of `other` (same row count) to the right; labels are kept from `self`.
    pub fn hconcat(&self, other: &FeatureMatrix) -> Result<Self> {
        if other.n_rows() != self.n_rows() {
            return Err(Error::SchemaMismatch {
                expected: self.n_rows(),
                found: other.n_rows(),
            });
        }
        let mut schema = self.schema.clone();
        schema.extend(other.schema.iter().cloned());
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        Ok(Self {
            schema,
            rows,
            labels: self.labels.clone(),
        })
    }
}

fn check_row(schema: &[String], row: &[FeatureValue]) -> Result<()> {
    if row.len() != schema.len() {
        return Err(Error::SchemaMismatch {
            expected: schema.len(),
            found: row.len(),
        });
    }
    if let Some(v) = row.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "feature value",
            reason: alloc::format!("non-finite value {v}; use the missing marker instead"),
        });
    }
    Ok(())
}

/// Sequential extraction; row order equals `pairs` order.
pub fn extract_matrix(corpus: &Corpus, pairs: &[(AuthorIx, AuthorIx)], percent: f64) -> Result<FeatureMatrix> {
    let mut m = FeatureMatrix::stage1();
    for &(mentor, mentee) in pairs {
        m.push_row(extract_pair_features_ix(corpus, mentor, mentee, percent)?.values)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{corpus, paper};
    use alloc::vec;

    fn f(v: &PairFeatureVector, name: &str) -> FeatureValue {
        assert!(stage1_index(name).is_some(), "unknown feature {name}");
        v.get(name)
    }

    #[test]
    fn schema_is_unique() {
        let mut names: Vec<&str> = STAGE1_FEATURES.to_vec();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 42);
    }

    #[test]
    fn basic_period_features() {
        let c = corpus(vec![
            paper("s1", 1995, &["m"]),
            paper("c1", 2001, &["e", "x", "m"]),
            paper("c2", 2003, &["e", "y", "m"]),
        ]);
        let v = extract_pair_features(&c, "m", "e", 80.0).unwrap();
        assert_eq!(f(&v, "copub_count"), Some(2.0));
        assert_eq!(f(&v, "copub_years"), Some(3.0));
        assert_eq!(f(&v, "mte_copub_prcnt"), Some(1.0));
        assert_eq!(f(&v, "coa_copub_prcnt"), Some(1.0));
        assert_eq!(f(&v, "total_coa_pubs"), Some(3.0));
        assert_eq!(f(&v, "coa_years"), Some(9.0));
        for side in ["mentor", "mentee"] {
            let expect = if side == "mentor" { 3.0 } else { 1.0 };
            assert_eq!(f(&v, &alloc::format!("{side}_min_position")), Some(expect));
            assert_eq!(f(&v, &alloc::format!("{side}_max_position")), Some(expect));
            assert_eq!(f(&v, &alloc::format!("{side}_avg_position")), Some(expect));
        }
        // Nobody co-authored before 2001: the before-ratio is undefined.
        assert_eq!(f(&v, "mentee_coauthors_before_copub"), Some(0.0));
        assert_eq!(f(&v, "ratio_mentee_mentor_coauthors_before"), None);
        assert_eq!(f(&v, "mentee_coauthors_copub"), Some(3.0));
        assert_eq!(f(&v, "ratio_mentee_mentor_coauthors"), Some(1.0));
    }

    #[test]
    fn zero_copubs_is_an_error() {
        let c = corpus(vec![paper("a", 2000, &["m"]), paper("b", 2000, &["e"])]);
        assert!(matches!(
            extract_pair_features(&c, "m", "e", 80.0),
            Err(Error::NoCopublications { .. })
        ));
    }

    #[test]
    fn matrix_basics() {
        let c = corpus(vec![paper("a", 2000, &["m", "e"]), paper("b", 2001, &["e", "m"])]);
        let m = extract_matrix(&c, &[], 80.0).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (0, 42));
        let (mi, ei) = (c.author_ix("m").unwrap(), c.author_ix("e").unwrap());
        let m = extract_matrix(&c, &[(mi, ei), (ei, mi)], 80.0).unwrap();
        let swapped = extract_matrix(&c, &[(ei, mi), (mi, ei)], 80.0).unwrap();
        assert_eq!(m.row(0), swapped.row(1));
        assert_eq!(m.row(1), swapped.row(0));
        let mut bad = FeatureMatrix::stage1();
        assert!(bad.push_row(vec![Some(1.0)]).is_err());
        assert!(bad.push_row(vec![Some(f64::NAN); 42]).is_err());
    }
}
