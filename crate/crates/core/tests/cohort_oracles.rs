use std::collections::{BTreeMap, BTreeSet};

use mentorlens_core::cohort::{
    build_training_pairs, candidate_mentors, copub_period, group_split, CopubPeriod, DensePeriod, LabeledPair,
};
use mentorlens_core::corpus::{AuthorRecord, Corpus, GoldPair, PaperRecord};
use mentorlens_core::linker::{names_match, Linker};
use mentorlens_core::pairfeat::extract_pair_features;
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GIVEN: &[&str] = &["Ana", "Bo", "Cy", "Dee"];
const SURNAME: &[&str] = &["Lee", "Kim", "Okafor"];

fn random_records(seed: u64, n_authors: usize, n_papers: usize) -> (Vec<PaperRecord>, Vec<AuthorRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let authors: Vec<AuthorRecord> = (0..n_authors)
        .map(|i| {
            let g = GIVEN[rng.random_range(0..GIVEN.len())];
            let s = SURNAME[rng.random_range(0..SURNAME.len())];
            AuthorRecord {
                author_id: format!("a{i:03}"),
                name: if rng.random_bool(0.3) { format!("{} {s}", &g[..1]) } else { format!("{g} {s}") },
                paper_count: None,
                citation_count: None,
                h_index: None,
                field_of_study: None,
            }
        })
        .collect();
    // staggered career starts make criterion (b) bite
    let start: Vec<i32> = (0..n_authors).map(|_| rng.random_range(1990..2010)).collect();
    let papers = (0..n_papers)
        .map(|p| {
            let k = rng.random_range(1..=4);
            let mut who: Vec<usize> = (0..n_authors).collect();
            who.shuffle(&mut rng);
            who.truncate(k);
            let lo = who.iter().map(|&a| start[a]).max().unwrap();
            PaperRecord {
                paper_id: format!("p{p:04}"),
                year: rng.random_range(lo..=2015.max(lo)),
                authors: who.iter().map(|&a| format!("a{a:03}")).collect(),
            }
        })
        .collect();
    (papers, authors)
}

fn build(seed: u64, n_authors: usize, n_papers: usize) -> (Corpus, Vec<PaperRecord>) {
    let (papers, authors) = random_records(seed, n_authors, n_papers);
    (Corpus::new(papers.clone(), authors, 2030).unwrap(), papers)
}

/// Candidate criteria evaluated straight from the paper list.
fn brute_candidates(papers: &[PaperRecord], mentee: &str, k: u32) -> BTreeSet<String> {
    let has = |p: &PaperRecord, a: &str| p.authors.iter().any(|x| x == a);
    let first = |a: &str| papers.iter().filter(|p| has(p, a)).map(|p| p.year).min();
    let before = |a: &str, y: i32| papers.iter().filter(|p| has(p, a) && p.year < y).count();
    let Some(mentee_first) = first(mentee) else { return BTreeSet::new() };
    let coauthors: BTreeSet<&str> = papers
        .iter()
        .filter(|p| has(p, mentee))
        .flat_map(|p| p.authors.iter().map(String::as_str))
        .filter(|a| *a != mentee)
        .collect();
    coauthors
        .into_iter()
        .filter(|c| {
            let shared: Vec<i32> = papers.iter().filter(|p| has(p, mentee) && has(p, c)).map(|p| p.year).collect();
            let first_shared = *shared.iter().min().unwrap();
            shared.len() as u32 >= k
                && first(c).unwrap() < mentee_first
                && before(c, first_shared) > before(mentee, first_shared)
        })
        .map(str::to_string)
        .collect()
}

#[test]
fn candidates_match_brute_force_filter() {
    for seed in 0..20 {
        let (corpus, papers) = build(seed, 30, 160);
        for k in [1, 2, 3] {
            let mut total = 0;
            for a in corpus.authors() {
                let got = candidate_mentors(&corpus, &a.author_id, k).unwrap();
                assert!(!got.candidates.contains(&a.author_id));
                let want = brute_candidates(&papers, &a.author_id, k);
                assert_eq!(got.candidates, want, "seed {seed} k {k} mentee {}", a.author_id);
                total += want.len();
            }
            if k == 1 {
                assert!(total > 0, "seed {seed} produced no candidates at all");
            }
        }
    }
}

#[test]
fn candidates_ignore_paper_order() {
    let (papers, authors) = random_records(7, 25, 120);
    let a = Corpus::new(papers.clone(), authors.clone(), 2030).unwrap();
    let mut shuffled = papers;
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    shuffled.reverse();
    let b = Corpus::new(shuffled, authors, 2030).unwrap();
    for r in a.authors() {
        assert_eq!(
            candidate_mentors(&a, &r.author_id, 2).unwrap(),
            candidate_mentors(&b, &r.author_id, 2).unwrap()
        );
    }
}

#[test]
fn corpus_queries_match_scans() {
    let (corpus, papers) = build(3, 20, 100);
    let has = |p: &PaperRecord, a: &str| p.authors.iter().any(|x| x == a);
    let ids: Vec<String> = corpus.authors().iter().map(|a| a.author_id.clone()).collect();
    for a in &ids {
        let hist: Vec<&str> = corpus.pub_history(a, Some(2005)).unwrap().iter().map(|p| p.paper_id.as_str()).collect();
        let mut want: Vec<&PaperRecord> = papers.iter().filter(|p| has(p, a) && p.year <= 2005).collect();
        want.sort_by(|x, y| (x.year, &x.paper_id).cmp(&(y.year, &y.paper_id)));
        assert_eq!(hist, want.iter().map(|p| p.paper_id.as_str()).collect::<Vec<_>>());

        let window: BTreeSet<&str> = corpus.coauthors_in_window(a, 1998, 2006).unwrap();
        let want: BTreeSet<&str> = papers
            .iter()
            .filter(|p| has(p, a) && (1998..=2006).contains(&p.year))
            .flat_map(|p| p.authors.iter().map(String::as_str))
            .filter(|x| x != a)
            .collect();
        assert_eq!(window, want);

        for b in &ids {
            if a == b {
                continue;
            }
            let got: BTreeSet<&str> = corpus.copublications(a, b).unwrap().iter().map(|p| p.paper_id.as_str()).collect();
            let want: BTreeSet<&str> =
                papers.iter().filter(|p| has(p, a) && has(p, b)).map(|p| p.paper_id.as_str()).collect();
            assert_eq!(got, want);
            if !want.is_empty() {
                let shared = corpus.copublications(a, b).unwrap();
                let years: Vec<i32> = shared.iter().map(|p| p.year).collect();
                assert_eq!(
                    copub_period(&shared).unwrap(),
                    CopubPeriod {
                        start_year: *years.iter().min().unwrap(),
                        end_year: *years.iter().max().unwrap(),
                        copub_count: years.len() as u32
                    }
                );
                let f = extract_pair_features(&corpus, a, b, 80.0).unwrap();
                assert_eq!(f.get("copub_count"), Some(want.len() as f64));
            }
        }
    }
}

#[test]
fn training_pairs_match_candidate_enumeration() {
    for seed in 0..10 {
        let (corpus, papers) = build(100 + seed, 30, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<String> = corpus.authors().iter().map(|a| a.author_id.clone()).collect();
        let mut gold: Vec<(String, String)> = Vec::new();
        for _ in 0..12 {
            let mte = ids[rng.random_range(0..ids.len())].clone();
            let cands: Vec<String> = brute_candidates(&papers, &mte, 2).into_iter().collect();
            if let Some(m) = cands.choose(&mut rng) {
                gold.push((m.clone(), mte));
            }
        }
        let set = build_training_pairs(&corpus, &gold, 2, None);
        let pos: BTreeSet<(&str, &str)> = set
            .pairs
            .iter()
            .filter(|p| p.label)
            .map(|p| (p.mentor_candidate_id.as_str(), p.mentee_id.as_str()))
            .collect();
        let neg: BTreeSet<(&str, &str)> = set
            .pairs
            .iter()
            .filter(|p| !p.label)
            .map(|p| (p.mentor_candidate_id.as_str(), p.mentee_id.as_str()))
            .collect();
        assert!(pos.is_disjoint(&neg));
        let mut gold_by_mentee: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (m, e) in &gold {
            gold_by_mentee.entry(e.as_str()).or_default().insert(m.as_str());
        }
        let mut want_neg = BTreeSet::new();
        for (e, ms) in &gold_by_mentee {
            for c in brute_candidates(&papers, e, 2) {
                if !ms.contains(c.as_str()) {
                    want_neg.insert((c, e.to_string()));
                }
            }
        }
        let neg_owned: BTreeSet<(String, String)> = neg.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert_eq!(neg_owned, want_neg, "seed {seed}");
        let unique_gold: BTreeSet<&(String, String)> = gold.iter().collect();
        assert_eq!(pos.len(), unique_gold.len());
    }
}

/// Smallest-span window over all candidate `[s, e]`, earliest start on ties.
fn brute_dense(years: &[i32], percent: u32) -> (i32, i32, usize) {
    let n = years.len();
    let need = (percent as usize * n).div_ceil(100);
    let (lo, hi) = (*years.iter().min().unwrap(), *years.iter().max().unwrap());
    for span in 0..=(hi - lo) {
        for s in lo..=hi - span {
            let c = years.iter().filter(|&&y| s <= y && y <= s + span).count();
            if c >= need {
                return (s, s + span, c);
            }
        }
    }
    unreachable!("the full period always qualifies")
}

proptest! {
    #[test]
    fn dense_window_matches_brute_force(
        years in prop::collection::vec(1980i32..2020, 1..=60),
        pi in 0usize..3,
    ) {
        let percent = [61u32, 80, 100][pi];
        let d = DensePeriod::from_years(&years, percent as f64).unwrap();
        let (s, e, c) = brute_dense(&years, percent);
        prop_assert_eq!((d.start_year, d.end_year, d.dense_copub_count as usize), (s, e, c));
        prop_assert!((d.fraction_covered - c as f64 / years.len() as f64).abs() < 1e-15);
        if percent == 100 {
            let full = CopubPeriod::from_years(&years).unwrap();
            prop_assert_eq!((d.start_year, d.end_year), (full.start_year, full.end_year));
        }
    }

    #[test]
    fn group_split_keeps_mentees_together(
        mentees in prop::collection::vec(0u8..30, 2..200),
        frac in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let pairs: Vec<LabeledPair> = mentees
            .iter()
            .enumerate()
            .map(|(i, m)| LabeledPair { mentor_candidate_id: format!("c{i}"), mentee_id: format!("m{m}"), label: i % 2 == 0 })
            .collect();
        let distinct: BTreeSet<&u8> = mentees.iter().collect();
        match group_split(&pairs, frac, seed) {
            Err(_) => prop_assert!(distinct.len() < 2),
            Ok(s) => {
                let side = |idx: &[usize]| -> BTreeSet<String> { idx.iter().map(|&i| pairs[i].mentee_id.clone()).collect() };
                prop_assert!(side(&s.train).is_disjoint(&side(&s.validation)));
                prop_assert_eq!(s.train.len() + s.validation.len(), pairs.len());
                prop_assert_eq!(group_split(&pairs, frac, seed).unwrap(), s);
            }
        }
    }
}

/// Every (mentee match, co-author mentor match) pair, from names and papers alone.
fn brute_link(corpus: &Corpus, papers: &[PaperRecord], g: &GoldPair) -> Option<(String, String, u32, u32)> {
    let refers = |who: &str, a: &AuthorRecord| {
        if corpus.author_ix(who).is_some() {
            a.author_id == who
        } else {
            names_match(who, &a.name)
        }
    };
    let mut hits: Vec<(String, String, u32)> = Vec::new();
    for e in corpus.authors().iter().filter(|a| refers(&g.mentee, a)) {
        for m in corpus.authors().iter().filter(|a| a.author_id != e.author_id && refers(&g.mentor, a)) {
            let shared = papers
                .iter()
                .filter(|p| p.authors.contains(&e.author_id) && p.authors.contains(&m.author_id))
                .count() as u32;
            if shared > 0 {
                hits.push((m.author_id.clone(), e.author_id.clone(), shared));
            }
        }
    }
    let n = hits.len() as u32;
    hits.into_iter()
        .min_by(|a, b| b.2.cmp(&a.2).then_with(|| (&a.1, &a.0).cmp(&(&b.1, &b.0))))
        .map(|(m, e, s)| (m, e, s, n))
}

#[test]
fn linker_matches_exhaustive_search() {
    let mut linked = 0;
    for seed in 0..10 {
        let (corpus, papers) = build(500 + seed, 40, 150);
        let linker = Linker::new(&corpus);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names: Vec<String> = corpus.authors().iter().map(|a| a.name.clone()).collect();
        let ids: Vec<String> = corpus.authors().iter().map(|a| a.author_id.clone()).collect();
        for _ in 0..60 {
            let pick = |rng: &mut ChaCha8Rng| -> String {
                let i = rng.random_range(0..names.len());
                match rng.random_range(0..3) {
                    0 => ids[i].clone(),
                    1 => names[i].to_uppercase(),
                    _ => names[i].clone(),
                }
            };
            let g = GoldPair { mentor: pick(&mut rng), mentee: pick(&mut rng), source: "t".into() };
            let got = linker.link_pair(&g).ok().map(|r| {
                (r.mentor_id, r.mentee_id, r.copub_count_at_link, r.ambiguity_degree)
            });
            let want = brute_link(&corpus, &papers, &g);
            assert_eq!(got, want, "seed {seed} gold {g:?}");
            linked += got.is_some() as usize;
        }
    }
    assert!(linked > 50, "only {linked} gold pairs linked");
}
