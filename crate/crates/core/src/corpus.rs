//! Immutable, indexed bibliographic corpus.
//!
//! Papers are stored in chronological `(year, paper_id)` order so a paper's
//! index doubles as its position in every publication history. Authors are
//! stored sorted by ID. Both are addressed internally by dense indices
//! ([`PaperIx`], [`AuthorIx`]); string-keyed wrappers cover the public queries.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Earliest accepted publication year.
pub const MIN_YEAR: i32 = 1500;

/// Field-of-study label used when none is known.
pub const UNKNOWN_FIELD: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub year: i32,
    /// Authorship order; position 1 is the first author.
    pub authors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorRecord {
    pub author_id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_of_study: Option<String>,
}

impl AuthorRecord {
    /// Record synthesized for an author that only appears in paper author lists.
    pub fn placeholder(author_id: &str) -> Self {
        Self {
            author_id: author_id.to_string(),
            name: author_id.to_string(),
            paper_count: None,
            citation_count: None,
            h_index: None,
            field_of_study: Some(UNKNOWN_FIELD.to_string()),
        }
    }

    pub fn field(&self) -> &str {
        self.field_of_study.as_deref().unwrap_or(UNKNOWN_FIELD)
    }
}

/// A gold mentor–mentee pair. Either side may be a display name or a corpus author ID.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldPair {
    pub mentor: String,
    pub mentee: String,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AuthorIx(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PaperIx(pub u32);

impl AuthorIx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl PaperIx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    papers: Vec<PaperRecord>,
    paper_authors: Vec<Vec<AuthorIx>>,
    authors: Vec<AuthorRecord>,
    author_lookup: BTreeMap<String, AuthorIx>,
    author_papers: Vec<Vec<PaperIx>>,
    author_years: Vec<Vec<i32>>,
}

impl Corpus {
    /// Validates the records and builds every index.
    ///
    /// `max_year` is the latest admissible publication year (normally the
    /// current year plus one); it is a parameter because this crate has no clock.
    pub fn new(papers: Vec<PaperRecord>, authors: Vec<AuthorRecord>, max_year: i32) -> Result<Self> {
        if papers.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut papers = papers;
        for p in &papers {
            validate_paper(p, max_year)?;
        }
        papers.sort_by(|a, b| (a.year, &a.paper_id).cmp(&(b.year, &b.paper_id)));
        for w in papers.windows(2) {
            if w[0].paper_id == w[1].paper_id {
                return Err(Error::DuplicatePaper(w[0].paper_id.clone()));
            }
        }
        // Same ID in two different years sorts apart; catch those too.
        let mut ids: Vec<&str> = papers.iter().map(|p| p.paper_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicatePaper(w[0].to_string()));
        }

        let mut by_id: BTreeMap<String, AuthorRecord> = BTreeMap::new();
        for a in authors {
            validate_author(&a)?;
            if by_id.contains_key(&a.author_id) {
                return Err(Error::InvalidRecord {
                    record: a.author_id.clone(),
                    reason: "duplicate author_id".into(),
                });
            }
            by_id.insert(a.author_id.clone(), a);
        }
        for p in &papers {
            for a in &p.authors {
                if !by_id.contains_key(a) {
                    by_id.insert(a.clone(), AuthorRecord::placeholder(a));
                }
            }
        }

        let authors: Vec<AuthorRecord> = by_id.into_values().collect();
        let author_lookup: BTreeMap<String, AuthorIx> = authors
            .iter()
            .enumerate()
            .map(|(i, a)| (a.author_id.clone(), AuthorIx(i as u32)))
            .collect();

        let mut author_papers = alloc::vec![Vec::new(); authors.len()];
        let mut author_years = alloc::vec![Vec::new(); authors.len()];
        let mut paper_authors = Vec::with_capacity(papers.len());
        for (pi, p) in papers.iter().enumerate() {
            let ixs: Vec<AuthorIx> = p.authors.iter().map(|a| author_lookup[a]).collect();
            for &a in &ixs {
                author_papers[a.index()].push(PaperIx(pi as u32));
                author_years[a.index()].push(p.year);
            }
            paper_authors.push(ixs);
        }

        Ok(Self {
            papers,
            paper_authors,
            authors,
            author_lookup,
            author_papers,
            author_years,
        })
    }

    /// Consumes the corpus, returning its records (papers chronologically, authors by ID).
    pub fn into_records(self) -> (Vec<PaperRecord>, Vec<AuthorRecord>) {
        (self.papers, self.authors)
    }

    pub fn num_papers(&self) -> usize {
        self.papers.len()
    }

    pub fn num_authors(&self) -> usize {
        self.authors.len()
    }

    /// Papers in `(year, paper_id)` order.
    pub fn papers(&self) -> &[PaperRecord] {
        &self.papers
    }

    /// Authors in ID order.
    pub fn authors(&self) -> &[AuthorRecord] {
        &self.authors
    }

    pub fn author_ixs(&self) -> impl Iterator<Item = AuthorIx> + '_ {
        (0..self.authors.len() as u32).map(AuthorIx)
    }

    pub fn author_ix(&self, author_id: &str) -> Option<AuthorIx> {
        self.author_lookup.get(author_id).copied()
    }

    pub fn require_author(&self, author_id: &str) -> Result<AuthorIx> {
        self.author_ix(author_id)
            .ok_or_else(|| Error::UnknownAuthor(author_id.to_string()))
    }

    pub fn author(&self, a: AuthorIx) -> &AuthorRecord {
        &self.authors[a.index()]
    }

    pub fn author_id(&self, a: AuthorIx) -> &str {
        &self.authors[a.index()].author_id
    }

    pub fn paper(&self, p: PaperIx) -> &PaperRecord {
        &self.papers[p.index()]
    }

    pub fn paper_authors(&self, p: PaperIx) -> &[AuthorIx] {
        &self.paper_authors[p.index()]
    }

    /// The author's papers, chronological.
    pub fn papers_of(&self, a: AuthorIx) -> &[PaperIx] {
        &self.author_papers[a.index()]
    }

    /// Publication years aligned with [`Corpus::papers_of`] (non-decreasing).
    pub fn years_of(&self, a: AuthorIx) -> &[i32] {
        &self.author_years[a.index()]
    }

    pub fn first_year(&self, a: AuthorIx) -> Option<i32> {
        self.author_years[a.index()].first().copied()
    }

    /// Number of the author's papers with `lo <= year <= hi`.
    pub fn count_in(&self, a: AuthorIx, lo: i32, hi: i32) -> usize {
        let ys = self.years_of(a);
        if lo > hi {
            return 0;
        }
        let start = ys.partition_point(|&y| y < lo);
        let end = ys.partition_point(|&y| y <= hi);
        end - start
    }

    /// Number of the author's papers with `year < year_exclusive`.
    pub fn count_before(&self, a: AuthorIx, year_exclusive: i32) -> usize {
        self.years_of(a).partition_point(|&y| y < year_exclusive)
    }

    /// Last publication year `<= until`, if any.
    pub fn last_year_until(&self, a: AuthorIx, until: i32) -> Option<i32> {
        let ys = self.years_of(a);
        let n = ys.partition_point(|&y| y <= until);
        if n == 0 {
            None
        } else {
            Some(ys[n - 1])
        }
    }

    pub fn pub_history(&self, author_id: &str, until_year: Option<i32>) -> Result<Vec<&PaperRecord>> {
        let a = self.require_author(author_id)?;
        let ys = self.years_of(a);
        let n = match until_year {
            Some(u) => ys.partition_point(|&y| y <= u),
            None => ys.len(),
        };
        Ok(self.papers_of(a)[..n].iter().map(|&p| self.paper(p)).collect())
    }

    /// Papers listing both authors, chronological.
    pub fn copubs_ix(&self, a: AuthorIx, b: AuthorIx) -> Vec<PaperIx> {
        let (xs, ys) = (self.papers_of(a), self.papers_of(b));
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < xs.len() && j < ys.len() {
            match xs[i].cmp(&ys[j]) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    out.push(xs[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    pub fn copublications(&self, a: &str, b: &str) -> Result<Vec<&PaperRecord>> {
        if a == b {
            return Err(Error::SameAuthor(a.to_string()));
        }
        let (ai, bi) = (self.require_author(a)?, self.require_author(b)?);
        Ok(self.copubs_ix(ai, bi).into_iter().map(|p| self.paper(p)).collect())
    }

    /// Distinct co-authors on the author's papers with `lo <= year <= hi`, sorted.
    pub fn coauthors_ix(&self, a: AuthorIx, lo: i32, hi: i32) -> Vec<AuthorIx> {
        let ys = self.years_of(a);
        if lo > hi {
            return Vec::new();
        }
        let start = ys.partition_point(|&y| y < lo);
        let end = ys.partition_point(|&y| y <= hi);
        let mut out: Vec<AuthorIx> = self.papers_of(a)[start..end]
            .iter()
            .flat_map(|&p| self.paper_authors(p).iter().copied())
            .filter(|&c| c != a)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn coauthors_in_window(&self, author_id: &str, year_lo: i32, year_hi: i32) -> Result<BTreeSet<&str>> {
        if year_lo > year_hi {
            return Err(Error::InvertedWindow { lo: year_lo, hi: year_hi });
        }
        let a = self.require_author(author_id)?;
        Ok(self
            .coauthors_ix(a, year_lo, year_hi)
            .into_iter()
            .map(|c| self.author_id(c))
            .collect())
    }

    /// Every co-author of `a` with the number of papers they share, keyed by index.
    pub fn coauthor_counts(&self, a: AuthorIx) -> BTreeMap<AuthorIx, u32> {
        let mut counts = BTreeMap::new();
        for &p in self.papers_of(a) {
            for &c in self.paper_authors(p) {
                if c != a {
                    *counts.entry(c).or_insert(0) += 1;
                }
            }
        }
        counts
    }

    /// 1-based authorship position of `a` on paper `p`.
    pub fn position(&self, p: PaperIx, a: AuthorIx) -> Option<usize> {
        self.paper_authors(p).iter().position(|&x| x == a).map(|i| i + 1)
    }
}

fn validate_paper(p: &PaperRecord, max_year: i32) -> Result<()> {
    let bad = |reason: String| Error::InvalidRecord {
        record: p.paper_id.clone(),
        reason,
    };
    if p.paper_id.is_empty() {
        return Err(Error::InvalidRecord {
            record: "<empty paper_id>".into(),
            reason: "paper_id must be non-empty".into(),
        });
    }
    if p.year < MIN_YEAR || p.year > max_year {
        return Err(bad(format!("year {} outside [{MIN_YEAR}, {max_year}]", p.year)));
    }
    if p.authors.is_empty() {
        return Err(bad("no authors".into()));
    }
    let mut seen: Vec<&str> = p.authors.iter().map(String::as_str).collect();
    seen.sort_unstable();
    if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
        return Err(bad(format!("author {} listed twice", w[0])));
    }
    if seen.iter().any(|a| a.is_empty()) {
        return Err(bad("empty author id".into()));
    }
    Ok(())
}

fn validate_author(a: &AuthorRecord) -> Result<()> {
    if a.author_id.is_empty() {
        return Err(Error::InvalidRecord {
            record: "<empty author_id>".into(),
            reason: "author_id must be non-empty".into(),
        });
    }
    if let (Some(h), Some(n)) = (a.h_index, a.paper_count) {
        if h > n {
            return Err(Error::InvalidRecord {
                record: a.author_id.clone(),
                reason: format!("h_index {h} exceeds paper_count {n}"),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn paper(id: &str, year: i32, authors: &[&str]) -> PaperRecord {
        PaperRecord {
            paper_id: id.into(),
            year,
            authors: authors.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub(crate) fn corpus(papers: Vec<PaperRecord>) -> Corpus {
        Corpus::new(papers, vec![], 2100).unwrap()
    }

    #[test]
    fn history_sorted_by_year() {
        let c = corpus(vec![
            paper("p3", 2005, &["a1", "a2"]),
            paper("p1", 2001, &["a1"]),
            paper("p2", 2003, &["a3", "a1"]),
        ]);
        let h = c.pub_history("a1", None).unwrap();
        let years: Vec<i32> = h.iter().map(|p| p.year).collect();
        assert_eq!(years, vec![2001, 2003, 2005]);
        assert_eq!(c.pub_history("a1", Some(2003)).unwrap().len(), 2);
        assert!(matches!(c.pub_history("zz", None), Err(Error::UnknownAuthor(_))));
    }

    #[test]
    fn empty_and_invalid_inputs() {
        assert_eq!(Corpus::new(vec![], vec![], 2100).unwrap_err(), Error::EmptyCorpus);
        let err = Corpus::new(vec![paper("bad", 99999, &["a"])], vec![], 2100).unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { ref record, .. } if record == "bad"));
        let err = Corpus::new(vec![paper("p", 2000, &["a", "a"])], vec![], 2100).unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { .. }));
        let err = Corpus::new(
            vec![paper("p", 2000, &["a"]), paper("p", 2001, &["b"])],
            vec![],
            2100,
        )
        .unwrap_err();
        assert_eq!(err, Error::DuplicatePaper("p".into()));
    }

    #[test]
    fn author_without_papers_has_empty_history() {
        let lonely = AuthorRecord {
            author_id: "z".into(),
            name: "Zed".into(),
            paper_count: Some(0),
            citation_count: None,
            h_index: Some(0),
            field_of_study: None,
        };
        let c = Corpus::new(vec![paper("p", 2000, &["a"])], vec![lonely], 2100).unwrap();
        assert!(c.pub_history("z", None).unwrap().is_empty());
        // placeholder synthesized for "a"
        assert_eq!(c.author(c.author_ix("a").unwrap()).name, "a");
        assert_eq!(c.author(c.author_ix("a").unwrap()).field(), UNKNOWN_FIELD);
    }

    #[test]
    fn h_index_above_paper_count_rejected() {
        let a = AuthorRecord {
            author_id: "a".into(),
            name: "A".into(),
            paper_count: Some(2),
            citation_count: None,
            h_index: Some(3),
            field_of_study: None,
        };
        assert!(Corpus::new(vec![paper("p", 2000, &["a"])], vec![a], 2100).is_err());
    }

    #[test]
    fn copublications_and_windows() {
        let c = corpus(vec![
            paper("p1", 2001, &["a", "b", "c"]),
            paper("p2", 2002, &["a", "d"]),
            paper("p3", 2004, &["b", "a"]),
            paper("p4", 2004, &["e"]),
        ]);
        let ids: Vec<&str> = c.copublications("a", "b").unwrap().iter().map(|p| p.paper_id.as_str()).collect();
        assert_eq!(ids, vec!["p1", "p3"]);
        assert!(c.copublications("a", "e").unwrap().is_empty());
        assert_eq!(c.copublications("a", "a").unwrap_err(), Error::SameAuthor("a".into()));
        let co = c.coauthors_in_window("a", 2001, 2001).unwrap();
        assert_eq!(co.into_iter().collect::<Vec<_>>(), vec!["b", "c"]);
        assert!(c.coauthors_in_window("a", 1990, 2000).unwrap().is_empty());
        assert!(matches!(
            c.coauthors_in_window("a", 2005, 2001),
            Err(Error::InvertedWindow { .. })
        ));
        assert_eq!(c.position(PaperIx(2), c.author_ix("a").unwrap()), Some(2));
    }
}
