//! Linking gold mentor–mentee name pairs to corpus author IDs.
//!
//! Mentees are resolved first. For every corpus author whose name matches the
//! mentee, that author's co-authors are scanned for the mentor; among all
//! matched `(mentee, mentor)` pairs the one with the most shared papers wins,
//! and remaining ties go to the lexicographically smallest ID pair.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{AuthorIx, Corpus, GoldPair};
use crate::{Error, Result};

/// Lowercases, folds diacritics to base letters, turns punctuation into
/// separators and collapses whitespace.
pub fn normalize_name(raw: &str) -> String {
    let mut folded = String::with_capacity(raw.len());
    for c in raw.chars().flat_map(char::to_lowercase).nfd() {
        if is_combining_mark(c) {
            continue;
        }
        match c {
            'ß' => folded.push_str("ss"),
            'æ' => folded.push_str("ae"),
            'œ' => folded.push_str("oe"),
            'ø' => folded.push('o'),
            'ł' => folded.push('l'),
            'đ' | 'ð' => folded.push('d'),
            'þ' => folded.push_str("th"),
            'ı' => folded.push('i'),
            c if c.is_alphanumeric() => folded.push(c),
            _ => folded.push(' '),
        }
    }
    let mut out = String::with_capacity(folded.len());
    for tok in folded.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// Surname (last token) must be equal; each given-name token of the query
/// must equal the candidate token at the same position, or be a single-letter
/// initial of it. Extra candidate given names are allowed, extra query tokens are not.
pub fn names_match(query: &str, candidate: &str) -> bool {
    let q = normalize_name(query);
    let c = normalize_name(candidate);
    let q: Vec<&str> = q.split(' ').filter(|t| !t.is_empty()).collect();
    let c: Vec<&str> = c.split(' ').filter(|t| !t.is_empty()).collect();
    tokens_match(&q, &c)
}

fn tokens_match(q: &[&str], c: &[&str]) -> bool {
    let (Some((qs, qg)), Some((cs, cg))) = (q.split_last(), c.split_last()) else {
        return false;
    };
    if qs != cs || qg.len() > cg.len() {
        return false;
    }
    qg.iter().zip(cg).all(|(qt, ct)| {
        qt == ct || (qt.chars().count() == 1 && ct.starts_with(qt))
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkResult {
    pub mentor_id: String,
    pub mentee_id: String,
    pub copub_count_at_link: u32,
    /// Number of competing `(mentee, mentor)` ID pairs that matched.
    pub ambiguity_degree: u32,
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkReport {
    pub total: u64,
    pub linked: u64,
    pub no_mentee_match: u64,
    pub no_mentor_match: u64,
    /// ambiguity degree -> number of linked pairs
    pub ambiguity_histogram: BTreeMap<u32, u64>,
}

impl LinkReport {
    pub fn record(&mut self, outcome: &Result<LinkResult>) {
        self.total += 1;
        match outcome {
            Ok(r) => {
                self.linked += 1;
                *self.ambiguity_histogram.entry(r.ambiguity_degree).or_insert(0) += 1;
            }
            Err(Error::NoMenteeMatch(_)) => self.no_mentee_match += 1,
            Err(_) => self.no_mentor_match += 1,
        }
    }

    pub fn merge(&mut self, other: &LinkReport) {
        self.total += other.total;
        self.linked += other.linked;
        self.no_mentee_match += other.no_mentee_match;
        self.no_mentor_match += other.no_mentor_match;
        for (&k, &v) in &other.ambiguity_histogram {
            *self.ambiguity_histogram.entry(k).or_insert(0) += v;
        }
    }
}

/// Name index over a corpus.
#[derive(Debug)]
pub struct Linker<'c> {
    corpus: &'c Corpus,
    normalized: Vec<String>,
    by_surname: BTreeMap<String, Vec<AuthorIx>>,
}

impl<'c> Linker<'c> {
    pub fn new(corpus: &'c Corpus) -> Self {
        let normalized: Vec<String> = corpus.authors().iter().map(|a| normalize_name(&a.name)).collect();
        let mut by_surname: BTreeMap<String, Vec<AuthorIx>> = BTreeMap::new();
        for (i, n) in normalized.iter().enumerate() {
            if let Some(s) = n.rsplit(' ').next().filter(|s| !s.is_empty()) {
                by_surname.entry(s.to_string()).or_default().push(AuthorIx(i as u32));
            }
        }
        Self {
            corpus,
            normalized,
            by_surname,
        }
    }

    fn author_matches(&self, query_tokens: &[&str], a: AuthorIx) -> bool {
        let c: Vec<&str> = self.normalized[a.index()].split(' ').filter(|t| !t.is_empty()).collect();
        tokens_match(query_tokens, &c)
    }

    /// Corpus authors a gold-side string refers to: the ID itself if it is one,
    /// otherwise every author whose name matches.
    fn resolve(&self, who: &str) -> Vec<AuthorIx> {
        if let Some(a) = self.corpus.author_ix(who) {
            return alloc::vec![a];
        }
        let norm = normalize_name(who);
        let q: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
        let Some(surname) = q.last() else {
            return Vec::new();
        };
        self.by_surname
            .get(*surname)
            .map(|v| v.iter().copied().filter(|&a| self.author_matches(&q, a)).collect())
            .unwrap_or_default()
    }

    pub fn link_pair(&self, gold: &GoldPair) -> Result<LinkResult> {
        let mentees = self.resolve(&gold.mentee);
        if mentees.is_empty() {
            return Err(Error::NoMenteeMatch(gold.mentee.clone()));
        }
        let mentor_id = self.corpus.author_ix(&gold.mentor);
        let mentor_norm = normalize_name(&gold.mentor);
        let mentor_q: Vec<&str> = mentor_norm.split(' ').filter(|t| !t.is_empty()).collect();

        // (mentee, mentor, shared papers)
        let mut matched: Vec<(AuthorIx, AuthorIx, u32)> = Vec::new();
        for &mte in &mentees {
            for (coa, n) in self.corpus.coauthor_counts(mte) {
                let hit = match mentor_id {
                    Some(m) => coa == m,
                    None => self.author_matches(&mentor_q, coa),
                };
                if hit {
                    matched.push((mte, coa, n));
                }
            }
        }
        // Author indices follow ID order, so the smallest index pair is the
        // lexicographically smallest ID pair.
        let best = matched
            .iter()
            .copied()
            .max_by(|x, y| x.2.cmp(&y.2).then_with(|| (y.0, y.1).cmp(&(x.0, x.1))));
        match best {
            None => Err(Error::NoMentorMatch {
                mentor: gold.mentor.clone(),
                mentee: gold.mentee.clone(),
            }),
            Some((mte, mtr, n)) => Ok(LinkResult {
                mentor_id: self.corpus.author_id(mtr).to_string(),
                mentee_id: self.corpus.author_id(mte).to_string(),
                copub_count_at_link: n,
                ambiguity_degree: matched.len() as u32,
                source: gold.source.clone(),
            }),
        }
    }

    /// Links every pair in input order; failures are only counted.
    pub fn link_all(&self, gold: &[GoldPair]) -> (Vec<LinkResult>, LinkReport) {
        let mut report = LinkReport::default();
        let mut out = Vec::new();
        for g in gold {
            let r = self.link_pair(g);
            report.record(&r);
            if let Ok(r) = r {
                out.push(r);
            }
        }
        (out, report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::paper;
    use crate::corpus::AuthorRecord;
    use alloc::vec;
    use proptest::prelude::*;

    fn author(id: &str, name: &str) -> AuthorRecord {
        AuthorRecord {
            author_id: id.into(),
            name: name.into(),
            paper_count: None,
            citation_count: None,
            h_index: None,
            field_of_study: None,
        }
    }

    fn gold(mentor: &str, mentee: &str) -> GoldPair {
        GoldPair {
            mentor: mentor.into(),
            mentee: mentee.into(),
            source: "test".into(),
        }
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_name("José  GARCÍA-Lopez"), "jose garcia lopez");
        assert_eq!(normalize_name(""), "");
        assert_eq!(normalize_name("  Straße, Ø. "), "strasse o");
        assert_eq!(normalize_name("J.R.R. Tolkien"), "j r r tolkien");
    }

    #[test]
    fn matching_rules() {
        assert!(names_match("J. Smith", "John Smith"));
        assert!(!names_match("John Smith", "Jane Smith"));
        assert!(!names_match("John A Smith", "John Smith"));
        assert!(names_match("John Smith", "John A. Smith"));
        assert!(!names_match("Smith John", "John Smith"));
        assert!(!names_match("", "John Smith"));
        assert!(names_match("jose garcia", "José García"));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize_name(&s);
            prop_assert_eq!(normalize_name(&once), once);
        }
    }

    fn two_candidate_corpus() -> Corpus {
        // Two authors named "Ann Lee"; a1 shares 3 papers with mentor m, a2 shares 1.
        Corpus::new(
            vec![
                paper("p1", 2001, &["a1", "m"]),
                paper("p2", 2002, &["a1", "m"]),
                paper("p3", 2003, &["a1", "m"]),
                paper("p4", 2003, &["a2", "m"]),
                paper("p5", 2004, &["a2", "x"]),
            ],
            vec![
                author("a1", "Ann Lee"),
                author("a2", "Ann Lee"),
                author("m", "Mark Brown"),
                author("x", "Xavier Brown"),
            ],
            2100,
        )
        .unwrap()
    }

    #[test]
    fn most_copublished_candidate_wins() {
        let c = two_candidate_corpus();
        let l = Linker::new(&c);
        let r = l.link_pair(&gold("M. Brown", "Ann Lee")).unwrap();
        assert_eq!((r.mentee_id.as_str(), r.mentor_id.as_str()), ("a1", "m"));
        assert_eq!(r.copub_count_at_link, 3);
        assert_eq!(r.ambiguity_degree, 2);
    }

    #[test]
    fn failure_classes() {
        let c = two_candidate_corpus();
        let l = Linker::new(&c);
        assert!(matches!(l.link_pair(&gold("Mark Brown", "Nobody")), Err(Error::NoMenteeMatch(_))));
        assert!(matches!(
            l.link_pair(&gold("Zoe Quinn", "Ann Lee")),
            Err(Error::NoMentorMatch { .. })
        ));
        let (out, rep) = l.link_all(&[
            gold("M. Brown", "Ann Lee"),
            gold("Mark Brown", "Nobody"),
            gold("Zoe Quinn", "Ann Lee"),
        ]);
        assert_eq!(out.len(), 1);
        assert_eq!((rep.total, rep.linked, rep.no_mentee_match, rep.no_mentor_match), (3, 1, 1, 1));
        assert_eq!(rep.ambiguity_histogram.get(&2), Some(&1));
    }

    #[test]
    fn ids_pass_through() {
        let c = two_candidate_corpus();
        let l = Linker::new(&c);
        let r = l.link_pair(&gold("m", "a2")).unwrap();
        assert_eq!((r.mentee_id.as_str(), r.mentor_id.as_str(), r.copub_count_at_link), ("a2", "m", 1));
        assert_eq!(r.ambiguity_degree, 1);
        let (out, rep) = l.link_all(&[]);
        assert!(out.is_empty());
        assert_eq!(rep, LinkReport::default());
        // An ID paired with itself can never be its own co-author.
        assert!(l.link_pair(&gold("m", "m")).is_err());
    }

    #[test]
    fn deterministic_tie_break_by_ids() {
        // a1 and a2 both share one paper with a "Brown"; smallest (mentee, mentor) wins.
        let c = Corpus::new(
            vec![paper("p1", 2001, &["a2", "m"]), paper("p2", 2001, &["a1", "x"])],
            vec![
                author("a1", "Ann Lee"),
                author("a2", "Ann Lee"),
                author("m", "Mark Brown"),
                author("x", "Max Brown"),
            ],
            2100,
        )
        .unwrap();
        let l = Linker::new(&c);
        let g = gold("M Brown", "Ann Lee");
        let r = l.link_pair(&g).unwrap();
        assert_eq!((r.mentee_id.as_str(), r.mentor_id.as_str()), ("a1", "x"));
        assert_eq!(l.link_pair(&g).unwrap(), r);
    }
}
