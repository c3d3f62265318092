//! Seeded synthetic corpora with planted mentor–mentee pairs.
//!
//! Mentors have long careers and publish from their first year. Each mentee's
//! first paper is a co-publication with its mentor, so every planted pair
//! satisfies the candidate criteria. Noise authors, academic siblings and later
//! collaborations with other senior authors supply hard negatives.

use std::collections::BTreeSet;
use std::path::Path;

use mentorlens_core::corpus::{AuthorRecord, GoldPair, PaperRecord, UNKNOWN_FIELD};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Outputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_mentors: usize,
    pub mentees_per_mentor: usize,
    /// The first mentor gets this many times the usual number of mentees.
    pub mega_mentor_factor: usize,
    pub noise_authors: usize,
    pub career_span_years: (i32, i32),
    pub mentee_overlap_years: (i32, i32),
    pub copubs_per_mentorship: (u32, u32),
    pub first_year: i32,
    pub last_year: i32,
    pub seed: u64,
    pub fos_labels: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_mentors: 200,
            mentees_per_mentor: 5,
            mega_mentor_factor: 10,
            noise_authors: 1500,
            career_span_years: (25, 40),
            mentee_overlap_years: (3, 6),
            copubs_per_mentorship: (2, 8),
            first_year: 1965,
            last_year: 2020,
            seed: 42,
            fos_labels: [
                "computer science",
                "biology",
                "medicine",
                "physics",
                "chemistry",
                "psychology",
                "economics",
                "mathematics",
                UNKNOWN_FIELD,
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Usage(format!("infeasible synth config: {msg}")));
        if self.n_mentors == 0 || self.mentees_per_mentor == 0 {
            return bad("need at least one mentor and one mentee per mentor".into());
        }
        if self.mega_mentor_factor == 0 {
            return bad("mega_mentor_factor must be >= 1".into());
        }
        let (c0, c1) = self.copubs_per_mentorship;
        if c0 < 2 || c0 > c1 {
            return bad(format!("copubs_per_mentorship {c0}..{c1} must have 2 <= min <= max"));
        }
        let (o0, o1) = self.mentee_overlap_years;
        if o0 < 1 || o0 > o1 {
            return bad(format!("mentee_overlap_years {o0}..{o1} must have 1 <= min <= max"));
        }
        let (s0, s1) = self.career_span_years;
        if s0 < o1 + 5 || s0 > s1 {
            return bad(format!(
                "career_span_years {s0}..{s1} must have min <= max and min >= max overlap + 5"
            ));
        }
        if self.last_year - self.first_year < o1 + 5 {
            return bad(format!(
                "years {}..{} leave no room for a mentorship",
                self.first_year, self.last_year
            ));
        }
        if self.fos_labels.is_empty() {
            return bad("fos_labels is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub papers: Vec<PaperRecord>,
    pub authors: Vec<AuthorRecord>,
    pub gold: Vec<GoldPair>,
    /// Planted `(mentor_id, mentee_id)` pairs, sorted.
    pub truth: Vec<(String, String)>,
    /// Author ID of the mentor with the most mentees.
    pub mega_mentor: String,
}

const GIVEN: &[&str] = &[
    "Ada", "Alan", "Amira", "Ana", "Anders", "Aiko", "Bao", "Beatriz", "Bjorn", "Carla", "Chen", "Chiara", "Dara",
    "David", "Dmitri", "Elena", "Emeka", "Eun", "Fatima", "Felix", "Grace", "Hana", "Hugo", "Ines", "Ivan", "Jae",
    "James", "José", "Julia", "Kai", "Kavya", "Lars", "Lea", "Leo", "Li", "Lucia", "Malik", "Marco", "Maria", "Mei",
    "Nadia", "Nikhil", "Noor", "Olga", "Omar", "Pablo", "Priya", "Rafael", "Rin", "Rosa", "Sami", "Sara", "Sofia",
    "Tariq", "Teodor", "Uma", "Viktor", "Wen", "Yara", "Yusuf", "Zoe", "Zoltán",
];

const SURNAME_A: &[&str] = &[
    "Ab", "Ber", "Cal", "Dor", "Eck", "Fal", "Gar", "Hal", "Ives", "Jor", "Kal", "Lin", "Mor", "Nor", "Oka", "Pel",
    "Quin", "Ros", "Sal", "Tor", "Ul", "Var", "Wal", "Xu", "Yam", "Zel", "Mül", "Søn", "Łuk", "Brå",
];

const SURNAME_B: &[&str] = &[
    "ard", "berg", "castle", "dottir", "ez", "field", "gren", "holm", "ido", "jian", "kova", "ler", "mann", "nen",
    "oglu", "ptra", "quist", "rsen", "son", "tani", "ucci", "vic", "wood", "yev", "zaki",
];

#[derive(Debug, Clone)]
struct Person {
    name: String,
    field: String,
    first: i32,
    last: i32,
    /// log-scale citation level
    impact: f64,
}

struct Gen {
    rng: ChaCha8Rng,
    people: Vec<Person>,
    names: BTreeSet<String>,
    /// (year, author indices in order)
    papers: Vec<(i32, Vec<usize>)>,
}

impl Gen {
    fn name(&mut self) -> String {
        loop {
            let g = *GIVEN.choose(&mut self.rng).expect("nonempty");
            let s = format!(
                "{}{}",
                SURNAME_A.choose(&mut self.rng).expect("nonempty"),
                SURNAME_B.choose(&mut self.rng).expect("nonempty")
            );
            // a middle initial widens the name space
            let full = if self.rng.random_bool(0.5) {
                let m = (b'A' + self.rng.random_range(0..26u8)) as char;
                format!("{g} {m}. {s}")
            } else {
                format!("{g} {s}")
            };
            if self.names.insert(full.clone()) {
                return full;
            }
        }
    }

    fn person(&mut self, field: String, first: i32, last: i32, impact: f64) -> usize {
        let name = self.name();
        self.people.push(Person {
            name,
            field,
            first,
            last,
            impact,
        });
        self.people.len() - 1
    }

    fn poisson(&mut self, lambda: f64) -> u32 {
        if lambda <= 0.0 {
            return 0;
        }
        Poisson::new(lambda).expect("positive rate").sample(&mut self.rng) as u32
    }

    fn paper(&mut self, year: i32, authors: Vec<usize>) {
        let mut seen = BTreeSet::new();
        let authors: Vec<usize> = authors.into_iter().filter(|a| seen.insert(*a)).collect();
        self.papers.push((year, authors));
    }

    /// A random author from `pool` active in `year`, if one turns up quickly.
    fn active_from(&mut self, pool: &[usize], year: i32) -> Option<usize> {
        for _ in 0..24 {
            let &a = pool.choose(&mut self.rng)?;
            let p = &self.people[a];
            if p.first <= year && year <= p.last {
                return Some(a);
            }
        }
        None
    }
}

/// Generates a corpus; identical configs give identical output.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let c = config;
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(c.seed),
        people: Vec::new(),
        names: BTreeSet::new(),
        papers: Vec::new(),
    };
    let fields: Vec<String> = c.fos_labels.clone();
    let (o_min, o_max) = c.mentee_overlap_years;

    // noise authors first so mentors and mentees can pick collaborators
    let mut noise = Vec::with_capacity(c.noise_authors);
    for _ in 0..c.noise_authors {
        let first = g.rng.random_range(c.first_year..=c.last_year - 2);
        let last = (first + g.rng.random_range(3..=30)).min(c.last_year);
        let field = fields.choose(&mut g.rng).expect("nonempty").clone();
        let impact = g.rng.random_range(1.2..2.0);
        noise.push(g.person(field, first, last, impact));
    }

    let mut mentors = Vec::with_capacity(c.n_mentors);
    for i in 0..c.n_mentors {
        let span = g.rng.random_range(c.career_span_years.0..=c.career_span_years.1);
        let latest_start = (c.last_year - o_max - 5).max(c.first_year);
        let first = if i == 0 {
            c.first_year
        } else {
            g.rng.random_range(c.first_year..=latest_start.min(c.last_year - 20).max(c.first_year))
        };
        let last = if i == 0 { c.last_year } else { (first + span).min(c.last_year) };
        let field = fields.choose(&mut g.rng).expect("nonempty").clone();
        let impact = g.rng.random_range(1.8..2.6);
        mentors.push(g.person(field, first, last, impact));
    }

    // mentors' own publication records
    for &m in &mentors {
        let (first, last) = (g.people[m].first, g.people[m].last);
        let rate = g.rng.random_range(0.8..2.2);
        for year in first..=last {
            let n = g.poisson(rate) + u32::from(year == first);
            for _ in 0..n {
                let mut authors = Vec::new();
                for _ in 0..g.rng.random_range(0..=3) {
                    let pool = if g.rng.random_bool(0.8) { &noise } else { &mentors };
                    if let Some(a) = g.active_from(pool, year) {
                        authors.push(a);
                    }
                }
                authors.push(m);
                g.paper(year, authors);
            }
        }
    }

    // planted mentorships
    let mut truth_ix: Vec<(usize, usize)> = Vec::new();
    let mut mentees_of: Vec<Vec<usize>> = vec![Vec::new(); mentors.len()];
    for (mi, &m) in mentors.iter().enumerate() {
        let count = c.mentees_per_mentor * if mi == 0 { c.mega_mentor_factor } else { 1 };
        let (mfirst, mlast) = (g.people[m].first, g.people[m].last);
        for _ in 0..count {
            let overlap = g.rng.random_range(o_min..=o_max);
            let lo = mfirst + 4;
            let hi = (mlast - overlap + 1).max(lo).min(c.last_year - overlap + 1);
            let t0 = g.rng.random_range(lo..=hi.max(lo));
            let career_end = (t0 + overlap + g.rng.random_range(3..=20)).min(c.last_year);
            let field = if g.rng.random_bool(0.9) {
                g.people[m].field.clone()
            } else {
                fields.choose(&mut g.rng).expect("nonempty").clone()
            };
            let impact = g.people[m].impact - 0.3 + g.rng.random_range(0.0..0.4);
            let e = g.person(field, t0, career_end.max(t0), impact);
            truth_ix.push((m, e));
            mentees_of[mi].push(e);

            let window_end = (t0 + overlap - 1).min(c.last_year);
            // another senior author sharing part of the supervision
            let co_advisor = if g.rng.random_bool(0.4) {
                g.active_from(&mentors, t0).filter(|&o| o != m && g.people[o].first < t0)
            } else {
                None
            };
            let n_copubs = g.rng.random_range(c.copubs_per_mentorship.0..=c.copubs_per_mentorship.1);
            for k in 0..n_copubs {
                let year = if k == 0 { t0 } else { g.rng.random_range(t0..=window_end) };
                let mut middle = Vec::new();
                if g.rng.random_bool(0.5) {
                    // a peer of similar seniority
                    let peers: Vec<usize> = noise
                        .iter()
                        .copied()
                        .filter(|&a| (-6..=2).contains(&(g.people[a].first - t0)) && g.people[a].last >= year)
                        .take(64)
                        .collect();
                    if let Some(&p) = peers.choose(&mut g.rng) {
                        middle.push(p);
                    }
                }
                if g.rng.random_bool(0.3) {
                    let sibs: Vec<usize> = mentees_of[mi]
                        .iter()
                        .copied()
                        .filter(|&s| s != e && g.people[s].first <= year && g.people[s].last >= year)
                        .collect();
                    if let Some(&s) = sibs.choose(&mut g.rng) {
                        middle.push(s);
                    }
                }
                if let Some(co) = co_advisor {
                    if g.rng.random_bool(0.5) {
                        middle.push(co);
                    }
                }
                let mut authors = vec![e];
                authors.extend(middle);
                if g.rng.random_bool(0.8) {
                    authors.push(m);
                } else {
                    let pos = g.rng.random_range(0..authors.len());
                    authors.insert(pos, m);
                }
                g.paper(year, authors);
            }

            // mentee's own work during and after the mentorship
            for year in t0..=g.people[e].last {
                let rate = if year <= window_end { 0.4 } else { 0.7 };
                for _ in 0..g.poisson(rate) {
                    let mut authors = vec![e];
                    for _ in 0..g.rng.random_range(0..=2) {
                        if let Some(a) = g.active_from(&noise, year) {
                            authors.push(a);
                        }
                    }
                    if year > window_end && g.rng.random_bool(0.12) {
                        authors.push(m);
                    }
                    g.paper(year, authors);
                }
            }

            // a later collaboration with another senior author
            if g.rng.random_bool(0.6) && g.people[e].last > window_end {
                let other = *mentors.choose(&mut g.rng).expect("nonempty");
                let (of, ol) = (g.people[other].first, g.people[other].last);
                let lo = (window_end + 1).max(of);
                let hi = g.people[e].last.min(ol);
                if other != m && of < t0 && lo <= hi {
                    for _ in 0..g.rng.random_range(2..=5) {
                        let year = g.rng.random_range(lo..=hi);
                        let mut authors = vec![e, other];
                        if g.rng.random_bool(0.5) {
                            authors.swap(0, 1);
                        }
                        g.paper(year, authors);
                    }
                }
            }
        }
    }

    // noise authors' own papers
    for &a in &noise {
        let (first, last) = (g.people[a].first, g.people[a].last);
        for year in first..=last {
            let n = g.poisson(0.3) + u32::from(year == first);
            for _ in 0..n {
                let mut authors = vec![a];
                for _ in 0..g.rng.random_range(0..=2) {
                    if let Some(b) = g.active_from(&noise, year) {
                        authors.push(b);
                    }
                }
                authors.shuffle(&mut g.rng);
                g.paper(year, authors);
            }
        }
    }

    finish(g, truth_ix, mentors[0], c)
}

fn finish(mut g: Gen, truth_ix: Vec<(usize, usize)>, mega: usize, c: &SynthConfig) -> Result<SynthCorpus> {
    // opaque IDs that reveal nothing about roles
    let n = g.people.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut g.rng);
    let ids: Vec<String> = perm.iter().map(|&k| format!("a{:06}", k + 1)).collect();

    let mut order: Vec<(i32, u64, usize)> = g
        .papers
        .iter()
        .enumerate()
        .map(|(i, (y, _))| (*y, g.rng.random::<u64>(), i))
        .collect();
    order.sort();
    let mut papers = Vec::with_capacity(order.len());
    let mut per_author: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &(year, _, i)) in order.iter().enumerate() {
        let authors = &g.papers[i].1;
        for &a in authors {
            per_author[a].push(k);
        }
        papers.push(PaperRecord {
            paper_id: format!("p{:07}", k + 1),
            year,
            authors: authors.iter().map(|&a| ids[a].clone()).collect(),
        });
    }

    let mut authors = Vec::with_capacity(n);
    for (a, p) in g.people.iter().enumerate() {
        let count = per_author[a].len() as u64;
        let lognormal = LogNormal::new(p.impact, 1.0).expect("finite parameters");
        let mut cites: Vec<u64> = (0..count).map(|_| lognormal.sample(&mut g.rng).floor() as u64).collect();
        cites.sort_unstable_by(|x, y| y.cmp(x));
        let h = cites.iter().enumerate().take_while(|(i, &c)| c > *i as u64).count() as u64;
        let field = if g.rng.random_bool(0.05) { UNKNOWN_FIELD.to_string() } else { p.field.clone() };
        authors.push(AuthorRecord {
            author_id: ids[a].clone(),
            name: p.name.clone(),
            paper_count: Some(count),
            citation_count: Some(cites.iter().sum()),
            h_index: Some(h),
            field_of_study: Some(field),
        });
    }
    authors.sort_by(|x, y| x.author_id.cmp(&y.author_id));

    let mut truth: Vec<(String, String)> = truth_ix.iter().map(|&(m, e)| (ids[m].clone(), ids[e].clone())).collect();
    truth.sort();

    // gold pairs mostly by display name, some abbreviated, some by ID
    let mut gold = Vec::with_capacity(truth_ix.len());
    for &(m, e) in &truth_ix {
        let r: f64 = g.rng.random();
        let mentee = if r < 0.1 {
            ids[e].clone()
        } else if r < 0.3 {
            abbreviate(&g.people[e].name)
        } else {
            g.people[e].name.clone()
        };
        gold.push(GoldPair {
            mentor: g.people[m].name.clone(),
            mentee,
            source: format!("synth-{}", c.seed),
        });
    }

    Ok(SynthCorpus {
        papers,
        authors,
        gold,
        truth,
        mega_mentor: ids[mega].clone(),
    })
}

/// "Maria K. Lindqvist" -> "M. Lindqvist".
fn abbreviate(name: &str) -> String {
    let parts: Vec<&str> = name.split_whitespace().collect();
    match parts.as_slice() {
        [first, .., last] => format!("{}. {last}", first.chars().next().unwrap_or('X')),
        _ => name.to_string(),
    }
}

pub fn truth_csv(truth: &[(String, String)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mentor_id", "mentee_id"]).map_err(|e| Error::Internal(e.to_string()))?;
    for (a, b) in truth {
        w.write_record([a, b]).map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

pub fn read_truth(path: &Path) -> Result<Vec<(String, String)>> {
    let f = io::open_input(path, "run `mentorlens synth` first")?;
    let mut rdr = csv::Reader::from_reader(f);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        out.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(out)
}

/// Writes `papers.jsonl`, `authors.jsonl`, `gold.csv` and `truth.csv` into `dir`.
pub fn write(corpus: &SynthCorpus, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Outputs::new();
    out.add(dir.join("papers.jsonl"), io::papers_jsonl(&corpus.papers)?);
    out.add(dir.join("authors.jsonl"), io::authors_jsonl(&corpus.authors)?);
    out.add(dir.join("gold.csv"), io::gold_csv(&corpus.gold)?);
    out.add(dir.join("truth.csv"), truth_csv(&corpus.truth)?);
    out.commit()
}
