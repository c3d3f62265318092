//! Co-publication periods, candidate mentors and labeled training pairs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AuthorIx, Corpus, PaperRecord};
use crate::math;
use crate::{Error, Result};

/// Default co-publication threshold `k`.
pub const DEFAULT_MIN_COPUBS: u32 = 2;
/// Default dense-window coverage percent `P`.
pub const DEFAULT_DENSE_PERCENT: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopubPeriod {
    pub start_year: i32,
    pub end_year: i32,
    pub copub_count: u32,
}

impl CopubPeriod {
    pub fn from_years(years: &[i32]) -> Result<Self> {
        let (Some(&lo), Some(&hi)) = (years.iter().min(), years.iter().max()) else {
            return Err(Error::EmptyInput("co-publication list"));
        };
        Ok(Self {
            start_year: lo,
            end_year: hi,
            copub_count: years.len() as u32,
        })
    }

    /// Inclusive length in years.
    pub fn years(&self) -> i32 {
        self.end_year - self.start_year + 1
    }
}

/// Shortest year window holding at least `P`% of a pair's co-publications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensePeriod {
    pub start_year: i32,
    pub end_year: i32,
    pub dense_copub_count: u32,
    pub fraction_covered: f64,
}

impl DensePeriod {
    /// `percent` must lie in `(60, 100]`. Among minimal-length windows the earliest wins.
    pub fn from_years(years: &[i32], percent: f64) -> Result<Self> {
        validate_percent(percent)?;
        if years.is_empty() {
            return Err(Error::EmptyInput("co-publication list"));
        }
        let mut ys = years.to_vec();
        ys.sort_unstable();
        let n = ys.len();
        let need = required_copubs(percent, n);

        let mut best = (ys[need - 1] - ys[0], ys[0]);
        for i in 1..=n - need {
            let span = ys[i + need - 1] - ys[i];
            if span < best.0 {
                best = (span, ys[i]);
            }
        }
        let (span, start) = best;
        let end = start + span;
        let lo = ys.partition_point(|&y| y < start);
        let hi = ys.partition_point(|&y| y <= end);
        let covered = (hi - lo) as u32;
        Ok(Self {
            start_year: start,
            end_year: end,
            dense_copub_count: covered,
            fraction_covered: covered as f64 / n as f64,
        })
    }

    pub fn years(&self) -> i32 {
        self.end_year - self.start_year + 1
    }
}

pub fn validate_percent(percent: f64) -> Result<()> {
    if !(percent > 60.0 && percent <= 100.0) {
        return Err(Error::InvalidParameter {
            name: "P",
            reason: format!("dense coverage percent must be in (60, 100], got {percent}"),
        });
    }
    Ok(())
}

/// `ceil(P/100 * n)`, guarded against representation error for integral products.
pub fn required_copubs(percent: f64, n: usize) -> usize {
    let exact = percent * n as f64 / 100.0;
    (math::ceil(exact - 1e-9) as usize).clamp(1, n)
}

pub fn copub_period(copubs: &[&PaperRecord]) -> Result<CopubPeriod> {
    let years: Vec<i32> = copubs.iter().map(|p| p.year).collect();
    CopubPeriod::from_years(&years)
}

pub fn dense_copub_period(copubs: &[&PaperRecord], percent: f64) -> Result<DensePeriod> {
    let years: Vec<i32> = copubs.iter().map(|p| p.year).collect();
    DensePeriod::from_years(&years, percent)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub mentee_id: String,
    pub candidates: BTreeSet<String>,
    pub k: u32,
}

/// Co-authors of `mentee` that (a) published strictly more than the mentee
/// before their first shared year, (b) started publishing strictly earlier, and
/// (c) share at least `k` papers. Sorted by author index.
pub fn candidate_mentors_ix(corpus: &Corpus, mentee: AuthorIx, k: u32) -> Vec<AuthorIx> {
    let Some(mentee_first) = corpus.first_year(mentee) else {
        return Vec::new();
    };
    // co-author -> (shared papers, first shared year)
    let mut shared: BTreeMap<AuthorIx, (u32, i32)> = BTreeMap::new();
    for &p in corpus.papers_of(mentee) {
        let year = corpus.paper(p).year;
        for &c in corpus.paper_authors(p) {
            if c != mentee {
                shared.entry(c).or_insert((0, year)).0 += 1;
            }
        }
    }
    shared
        .into_iter()
        .filter(|&(c, (n, first_copub))| {
            n >= k
                && corpus.first_year(c).is_some_and(|f| f < mentee_first)
                && corpus.count_before(c, first_copub) > corpus.count_before(mentee, first_copub)
        })
        .map(|(c, _)| c)
        .collect()
}

pub fn candidate_mentors(corpus: &Corpus, mentee_id: &str, k: u32) -> Result<CandidateSet> {
    let mentee = corpus.require_author(mentee_id)?;
    Ok(CandidateSet {
        mentee_id: mentee_id.to_string(),
        candidates: candidate_mentors_ix(corpus, mentee, k)
            .into_iter()
            .map(|c| corpus.author_id(c).to_string())
            .collect(),
        k,
    })
}

/// The inference pool: every `(candidate mentor, mentee)` pair in the corpus,
/// ordered by mentee then candidate.
pub fn candidate_pool(corpus: &Corpus, k: u32) -> Vec<(AuthorIx, AuthorIx)> {
    corpus
        .author_ixs()
        .flat_map(|m| candidate_mentors_ix(corpus, m, k).into_iter().map(move |c| (c, m)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledPair {
    pub mentor_candidate_id: String,
    pub mentee_id: String,
    pub label: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub gold_pairs: u64,
    pub positives: u64,
    pub negatives: u64,
    /// Gold pairs sharing fewer than `k` papers.
    pub dropped_below_k: u64,
    /// Gold pairs naming an author absent from the corpus.
    pub dropped_unknown: u64,
    pub duplicate_gold: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSet {
    /// Sorted by `(mentee_id, mentor_candidate_id)`.
    pub pairs: Vec<LabeledPair>,
    pub report: TrainingReport,
}

/// Positives are linked gold `(mentor, mentee)` pairs with at least `k` shared
/// papers; negatives are each gold mentee's candidate mentors minus all of its
/// gold mentors. `max_negatives_per_mentee` keeps the first candidates in ID order.
pub fn build_training_pairs(
    corpus: &Corpus,
    gold: &[(String, String)],
    k: u32,
    max_negatives_per_mentee: Option<usize>,
) -> TrainingSet {
    let mut report = TrainingReport {
        gold_pairs: gold.len() as u64,
        ..Default::default()
    };
    // mentee -> all gold mentors (including those dropped below k)
    let mut gold_mentors: BTreeMap<AuthorIx, BTreeSet<AuthorIx>> = BTreeMap::new();
    let mut positives: BTreeSet<(AuthorIx, AuthorIx)> = BTreeSet::new();
    for (mentor, mentee) in gold {
        let (Some(mtr), Some(mte)) = (corpus.author_ix(mentor), corpus.author_ix(mentee)) else {
            report.dropped_unknown += 1;
            continue;
        };
        if mtr == mte {
            report.dropped_unknown += 1;
            continue;
        }
        if !gold_mentors.entry(mte).or_default().insert(mtr) {
            report.duplicate_gold += 1;
            continue;
        }
        if (corpus.copubs_ix(mtr, mte).len() as u32) < k {
            report.dropped_below_k += 1;
            continue;
        }
        positives.insert((mte, mtr));
    }

    let mut pairs = Vec::new();
    for (&mte, mentors) in &gold_mentors {
        let mut negs: Vec<AuthorIx> = candidate_mentors_ix(corpus, mte, k)
            .into_iter()
            .filter(|c| !mentors.contains(c))
            .collect();
        if let Some(cap) = max_negatives_per_mentee {
            negs.truncate(cap);
        }
        for c in negs {
            pairs.push(LabeledPair {
                mentor_candidate_id: corpus.author_id(c).to_string(),
                mentee_id: corpus.author_id(mte).to_string(),
                label: false,
            });
        }
    }
    for &(mte, mtr) in &positives {
        pairs.push(LabeledPair {
            mentor_candidate_id: corpus.author_id(mtr).to_string(),
            mentee_id: corpus.author_id(mte).to_string(),
            label: true,
        });
    }
    pairs.sort_by(|a, b| {
        (&a.mentee_id, &a.mentor_candidate_id).cmp(&(&b.mentee_id, &b.mentor_candidate_id))
    });
    pairs.dedup_by(|a, b| a.mentee_id == b.mentee_id && a.mentor_candidate_id == b.mentor_candidate_id);
    report.positives = pairs.iter().filter(|p| p.label).count() as u64;
    report.negatives = pairs.len() as u64 - report.positives;
    TrainingSet { pairs, report }
}

/// Row indices of a mentee-grouped split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Splits rows so that every mentee's rows land on one side. The number of
/// validation mentees is `round(val_fraction * mentees)`, clamped so each side
/// keeps at least one mentee.
pub fn group_split(pairs: &[LabeledPair], val_fraction: f64, seed: u64) -> Result<Split> {
    let keys: Vec<&str> = pairs.iter().map(|p| p.mentee_id.as_str()).collect();
    group_split_by_key(&keys, val_fraction, seed)
}

pub fn group_split_by_key<K: Ord>(keys: &[K], val_fraction: f64, seed: u64) -> Result<Split> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidParameter {
            name: "val_fraction",
            reason: format!("must be in (0, 1), got {val_fraction}"),
        });
    }
    let mut groups: Vec<&K> = keys.iter().collect();
    groups.sort();
    groups.dedup();
    if groups.len() < 2 {
        return Err(Error::TooFewGroups(groups.len()));
    }
    let n_val = (math::round(val_fraction * groups.len() as f64) as usize).clamp(1, groups.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    let held: BTreeSet<&K> = groups[..n_val].iter().copied().collect();
    let (mut train, mut validation) = (Vec::new(), Vec::new());
    for (i, k) in keys.iter().enumerate() {
        if held.contains(k) {
            validation.push(i);
        } else {
            train.push(i);
        }
    }
    Ok(Split { train, validation })
}

/// Group k-fold assignment: `fold_of[i]` for every row, folds balanced by group count.
pub fn group_folds<K: Ord>(keys: &[K], folds: usize, seed: u64) -> Vec<usize> {
    let mut groups: Vec<&K> = keys.iter().collect();
    groups.sort();
    groups.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    let fold: BTreeMap<&K, usize> = groups.iter().enumerate().map(|(i, &g)| (g, i % folds.max(1))).collect();
    keys.iter().map(|k| fold[k]).collect()
}
