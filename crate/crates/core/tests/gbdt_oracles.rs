use mentorlens_core::gbdt::{logloss, roc_auc, train_gbdt, GbdtModel, Node, TrainConfig};
use mentorlens_core::pairfeat::{FeatureMatrix, FeatureValue};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, f: usize, missing: f64) -> (FeatureMatrix, Vec<bool>) {
    let schema: Vec<String> = (0..f).map(|j| format!("f{j}")).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<FeatureValue> = (0..f)
            .map(|_| {
                if rng.random_bool(missing) {
                    None
                } else if rng.random_bool(0.3) {
                    // coarse values produce ties
                    Some(rng.random_range(0..5) as f64)
                } else {
                    Some(rng.random_range(-3.0..3.0))
                }
            })
            .collect();
        let signal = row[0].unwrap_or(0.0) + 0.5 * row[f - 1].unwrap_or(1.0);
        labels.push(signal + rng.random_range(-2.0..2.0) > 0.5);
        rows.push(row);
    }
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        labels[0] = !labels[0];
    }
    (FeatureMatrix::from_rows(schema, rows, None).unwrap(), labels)
}

fn thresholded(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

fn score(g: f64, h: f64, c: &TrainConfig) -> f64 {
    let t = thresholded(g, c.reg_alpha);
    t * t / (h + c.reg_lambda)
}

struct OracleSplit {
    gain: f64,
}

/// Every (feature, cut between distinct values, missing side) evaluated from scratch.
fn exhaustive_best(m: &FeatureMatrix, y: &[bool], c: &TrainConfig) -> Option<OracleSplit> {
    let n = m.n_rows();
    let rate = y.iter().filter(|&&v| v).count() as f64 / n as f64;
    let g: Vec<f64> = y.iter().map(|&v| rate - if v { 1.0 } else { 0.0 }).collect();
    let h = vec![rate * (1.0 - rate); n];
    let (gt, ht): (f64, f64) = (g.iter().sum(), h.iter().sum());
    let parent = score(gt, ht, c);
    let mut best: Option<OracleSplit> = None;
    for f in 0..m.n_cols() {
        let mut vals: Vec<f64> = m.rows().iter().filter_map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = w[0] + (w[1] - w[0]) / 2.0;
            for missing_left in [false, true] {
                let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0u32);
                for (i, r) in m.rows().iter().enumerate() {
                    let left = match r[f] {
                        Some(v) => v <= thr,
                        None => missing_left,
                    };
                    if left {
                        gl += g[i];
                        hl += h[i];
                        nl += 1;
                    }
                }
                let nr = n as u32 - nl;
                let (gr, hr) = (gt - gl, ht - hl);
                if nl < c.min_child_samples || nr < c.min_child_samples || hl < c.min_child_weight || hr < c.min_child_weight
                {
                    continue;
                }
                let gain = 0.5 * (score(gl, hl, c) + score(gr, hr, c) - parent);
                if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                    best = Some(OracleSplit { gain });
                }
            }
        }
    }
    best
}

fn stump_config(rng: &mut ChaCha8Rng) -> TrainConfig {
    TrainConfig {
        learning_rate: 1.0,
        num_leaves: 2,
        n_rounds: 1,
        min_child_samples: rng.random_range(1..6),
        min_child_weight: [0.0, 1e-3, 0.5][rng.random_range(0..3)],
        reg_lambda: [0.0, 0.1, 1.0][rng.random_range(0..3)],
        reg_alpha: [0.0, 0.05, 0.5][rng.random_range(0..3)],
        ..TrainConfig::default()
    }
}

#[test]
fn stump_matches_exhaustive_split_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..50 {
        let n = rng.random_range(2..=200);
        let f = rng.random_range(1..=10);
        let (m, y) = random_matrix(&mut rng, n, f, 0.15);
        let c = stump_config(&mut rng);
        let model = train_gbdt(&m, &y, &c).unwrap();
        let tree = &model.trees[0];
        match (exhaustive_best(&m, &y, &c), &tree.nodes[0]) {
            (None, Node::Leaf { .. }) => {}
            (Some(o), Node::Split { gain, feature, threshold, default_left, .. }) => {
                assert!((o.gain - gain).abs() <= 1e-9 * o.gain.max(1.0), "case {case}: {} vs {gain}", o.gain);
                // the chosen split must reproduce its own gain when recomputed
                let left: Vec<bool> = m
                    .rows()
                    .iter()
                    .map(|r| r[*feature as usize].map_or(*default_left, |v| v <= *threshold))
                    .collect();
                let rate = y.iter().filter(|&&v| v).count() as f64 / n as f64;
                let (mut gl, mut hl, mut gt, mut ht) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    let g = rate - if y[i] { 1.0 } else { 0.0 };
                    let h = rate * (1.0 - rate);
                    gt += g;
                    ht += h;
                    if left[i] {
                        gl += g;
                        hl += h;
                    }
                }
                let recomputed = 0.5 * (score(gl, hl, &c) + score(gt - gl, ht - hl, &c) - score(gt, ht, &c));
                assert!((recomputed - gain).abs() <= 1e-9 * gain.max(1.0), "case {case}");
            }
            (o, root) => panic!("case {case}: oracle {:?} but root {root:?}", o.map(|o| o.gain)),
        }
    }
}

#[test]
fn logloss_never_increases_without_subsampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..20 {
        let (n, f) = (rng.random_range(20..150), rng.random_range(1..6));
        let (m, y) = random_matrix(&mut rng, n, f, 0.1);
        let c = TrainConfig {
            learning_rate: [0.05, 0.1, 0.3][case % 3],
            num_leaves: rng.random_range(2..16),
            min_child_samples: rng.random_range(1..5),
            reg_lambda: 1.0,
            n_rounds: 200,
            seed: case as u64,
            ..TrainConfig::default()
        };
        let model = train_gbdt(&m, &y, &c).unwrap();
        let mut partial = GbdtModel {
            trees: Vec::new(),
            ..model.clone()
        };
        let mut prev = logloss(&partial.predict_matrix(&m).unwrap(), &y).unwrap();
        for t in &model.trees {
            partial.trees.push(t.clone());
            let cur = logloss(&partial.predict_matrix(&m).unwrap(), &y).unwrap();
            assert!(cur <= prev + 1e-9, "case {case}: {prev} -> {cur}");
            prev = cur;
        }
    }
}

fn auc_quadratic(s: &[f64], y: &[bool]) -> f64 {
    let mut num = 0.0;
    let (mut p, mut n) = (0.0, 0.0);
    for i in 0..s.len() {
        if y[i] {
            p += 1.0;
        } else {
            n += 1.0;
        }
    }
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] && !y[j] {
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / (p * n)
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count(
        pairs in prop::collection::vec((0u8..8, any::<bool>()), 2..300)
    ) {
        let s: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 7.0).collect();
        let y: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(y.iter().any(|&v| v) && y.iter().any(|&v| !v));
        let fast = roc_auc(&s, &y).unwrap();
        prop_assert!((fast - auc_quadratic(&s, &y)).abs() <= 1e-12);
        let lin: Vec<f64> = s.iter().map(|x| 2.0 * x + 1.0).collect();
        let cube: Vec<f64> = s.iter().map(|x| x * x * x).collect();
        prop_assert_eq!(roc_auc(&lin, &y).unwrap(), fast);
        prop_assert_eq!(roc_auc(&cube, &y).unwrap(), fast);
    }

    #[test]
    fn trees_respect_growth_limits(seed in 0u64..1000, leaves in 2u32..40, depth in prop::option::of(1u32..6), mcs in 1u32..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, y) = random_matrix(&mut rng, 120, 4, 0.2);
        let c = TrainConfig {
            num_leaves: leaves,
            max_depth: depth,
            min_child_samples: mcs,
            min_child_weight: 0.01,
            n_rounds: 5,
            subsample: 0.8,
            colsample_bytree: 0.75,
            seed,
            ..TrainConfig::default()
        };
        let model = train_gbdt(&m, &y, &c).unwrap();
        for t in &model.trees {
            prop_assert!(t.num_leaves() <= leaves as usize);
            if let Some(d) = depth {
                prop_assert!(t.depth() <= d as usize);
            }
            for n in &t.nodes {
                if let Node::Leaf { count, hessian, .. } = n {
                    if t.nodes.len() > 1 {
                        prop_assert!(*count >= mcs);
                        prop_assert!(*hessian >= 0.01);
                    }
                }
            }
            // every split's count is the sum of its children's
            for n in &t.nodes {
                if let Node::Split { left, right, count, .. } = n {
                    let c_of = |i: u32| match &t.nodes[i as usize] {
                        Node::Split { count, .. } | Node::Leaf { count, .. } => *count,
                    };
                    prop_assert_eq!(c_of(*left) + c_of(*right), *count);
                }
            }
        }
    }

    #[test]
    fn batch_prediction_equals_row_by_row(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, y) = random_matrix(&mut rng, 80, 3, 0.25);
        let c = TrainConfig { n_rounds: 20, min_child_samples: 2, num_leaves: 6, seed, ..TrainConfig::default() };
        let model = train_gbdt(&m, &y, &c).unwrap();
        let batch = model.predict_matrix(&m).unwrap();
        for (i, row) in m.rows().iter().enumerate() {
            prop_assert_eq!(batch[i].to_bits(), model.predict_proba(row).unwrap().to_bits());
        }
    }
}

#[test]
fn importance_is_the_sum_of_split_gains() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (m, y) = random_matrix(&mut rng, 150, 5, 0.1);
    let c = TrainConfig {
        n_rounds: 30,
        min_child_samples: 3,
        num_leaves: 8,
        ..TrainConfig::default()
    };
    let model = train_gbdt(&m, &y, &c).unwrap();
    let mut expect = vec![0.0; 5];
    fn walk(nodes: &[Node], i: usize, acc: &mut [f64]) {
        if let Node::Split { feature, gain, left, right, .. } = &nodes[i] {
            acc[*feature as usize] += gain;
            walk(nodes, *left as usize, acc);
            walk(nodes, *right as usize, acc);
        }
    }
    for t in &model.trees {
        walk(&t.nodes, 0, &mut expect);
    }
    for ((_, got), want) in model.feature_importance().iter().zip(&expect) {
        assert!((got - want).abs() <= 1e-9 * want.max(1.0));
    }
    assert!(expect.iter().any(|&g| g > 0.0));
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (m, y) = random_matrix(&mut rng, 100, 4, 0.1);
    let c = TrainConfig {
        n_rounds: 25,
        subsample: 0.6,
        colsample_bytree: 0.5,
        min_child_samples: 2,
        seed: 9,
        ..TrainConfig::default()
    };
    assert_eq!(train_gbdt(&m, &y, &c).unwrap(), train_gbdt(&m, &y, &c).unwrap());
}
