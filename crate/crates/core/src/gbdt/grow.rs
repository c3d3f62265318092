use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{Node, RegressionTree};
use super::{GbdtModel, TrainConfig, MAX_MARGIN, MODEL_FORMAT};
use crate::math;
use crate::pairfeat::FeatureMatrix;
use crate::{Error, Result};

/// Column-major training data with every feature presorted once.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Vec<String>,
    n_rows: usize,
    /// `NaN` marks a missing value.
    columns: Vec<Vec<f64>>,
    /// Non-missing rows per feature, ascending by value then row.
    sorted: Vec<Vec<u32>>,
    /// Missing rows per feature, ascending.
    missing: Vec<Vec<u32>>,
}

impl Dataset {
    pub fn from_matrix(m: &FeatureMatrix) -> Self {
        let n_rows = m.n_rows();
        let n_features = m.n_cols();
        let mut columns = vec![Vec::with_capacity(n_rows); n_features];
        for row in m.rows() {
            for (f, v) in row.iter().enumerate() {
                columns[f].push(v.unwrap_or(f64::NAN));
            }
        }
        let mut sorted = Vec::with_capacity(n_features);
        let mut missing = Vec::with_capacity(n_features);
        for col in &columns {
            let (mut present, absent): (Vec<u32>, Vec<u32>) =
                (0..n_rows as u32).partition(|&r| !col[r as usize].is_nan());
            present.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            sorted.push(present);
            missing.push(absent);
        }
        Self {
            schema: m.schema.clone(),
            n_rows,
            columns,
            sorted,
            missing,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    fn value(&self, row: usize, feature: usize) -> Option<f64> {
        let v = self.columns[feature][row];
        if v.is_nan() {
            None
        } else {
            Some(v)
        }
    }

    /// Boosts `config.n_rounds` trees on this data.
    pub fn train(&self, labels: &[bool], config: &TrainConfig) -> Result<GbdtModel> {
        config.validate()?;
        if labels.len() != self.n_rows {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: format!("{} labels for {} rows", labels.len(), self.n_rows),
            });
        }
        if self.n_rows < 2 {
            return Err(Error::InvalidParameter {
                name: "rows",
                reason: format!("need at least 2 rows, got {}", self.n_rows),
            });
        }
        let n_pos = labels.iter().filter(|&&y| y).count();
        if n_pos == 0 || n_pos == self.n_rows {
            return Err(Error::SingleClass);
        }
        let rate = n_pos as f64 / self.n_rows as f64;
        let base_score = math::ln(rate / (1.0 - rate));
        let lr = config.learning_rate;

        let n = self.n_rows;
        let n_feat = self.n_features();
        let bag_size = ((math::round(config.subsample * n as f64)) as usize).clamp(1, n);
        let feat_size = ((math::round(config.colsample_bytree * n_feat as f64)) as usize).clamp(1, n_feat.max(1));

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut tree_sum = vec![0.0f64; n];
        let mut grad = vec![0.0f64; n];
        let mut hess = vec![0.0f64; n];
        let mut trees = Vec::with_capacity(config.n_rounds as usize);
        let params = SplitParams::from(config);
        let mut scratch = vec![false; n];

        for _ in 0..config.n_rounds {
            for i in 0..n {
                let p = math::sigmoid((base_score + lr * tree_sum[i]).clamp(-MAX_MARGIN, MAX_MARGIN));
                grad[i] = p - if labels[i] { 1.0 } else { 0.0 };
                hess[i] = p * (1.0 - p);
            }
            let rows: Vec<u32> = if bag_size < n {
                let mut r: Vec<u32> = sample(&mut rng, n, bag_size).into_iter().map(|i| i as u32).collect();
                r.sort_unstable();
                r
            } else {
                (0..n as u32).collect()
            };
            let feats: Vec<usize> = if feat_size < n_feat {
                let mut f = sample(&mut rng, n_feat, feat_size).into_vec();
                f.sort_unstable();
                f
            } else {
                (0..n_feat).collect()
            };
            let tree = Grower {
                ds: self,
                grad: &grad,
                hess: &hess,
                params: &params,
                go_left: &mut scratch,
                rows: Vec::new(),
                sorted: Vec::new(),
                missing: Vec::new(),
                tmp: Vec::new(),
            }
            .grow(&rows, &feats);
            for (i, s) in tree_sum.iter_mut().enumerate() {
                *s += tree.predict(|f| self.value(i, f));
            }
            trees.push(tree);
        }
        Ok(GbdtModel {
            format: MODEL_FORMAT.into(),
            schema: self.schema.clone(),
            base_score,
            learning_rate: lr,
            trees,
        })
    }
}

/// Trains a model on `matrix` with one label per row.
pub fn train_gbdt(matrix: &FeatureMatrix, labels: &[bool], config: &TrainConfig) -> Result<GbdtModel> {
    config.validate()?;
    if labels.len() != matrix.n_rows() {
        return Err(Error::InvalidParameter {
            name: "labels",
            reason: format!("{} labels for {} rows", labels.len(), matrix.n_rows()),
        });
    }
    Dataset::from_matrix(matrix).train(labels, config)
}

struct SplitParams {
    lambda: f64,
    alpha: f64,
    min_count: u32,
    min_hess: f64,
    num_leaves: u32,
    max_depth: Option<u32>,
}

impl From<&TrainConfig> for SplitParams {
    fn from(c: &TrainConfig) -> Self {
        Self {
            lambda: c.reg_lambda,
            alpha: c.reg_alpha,
            min_count: c.min_child_samples,
            min_hess: c.min_child_weight,
            num_leaves: c.num_leaves,
            max_depth: c.max_depth,
        }
    }
}

impl SplitParams {
    #[inline]
    fn thresholded(&self, g: f64) -> f64 {
        if g > self.alpha {
            g - self.alpha
        } else if g < -self.alpha {
            g + self.alpha
        } else {
            0.0
        }
    }

    /// `T(G)^2 / (H + lambda)` with `T` the L1 soft threshold.
    #[inline]
    fn score(&self, g: f64, h: f64) -> f64 {
        let den = h + self.lambda;
        if den <= 0.0 {
            return 0.0;
        }
        let t = self.thresholded(g);
        t * t / den
    }

    /// Newton step `-T(G) / (H + lambda)`.
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        let den = h + self.lambda;
        if den <= 0.0 {
            return 0.0;
        }
        -self.thresholded(g) / den
    }

    #[inline]
    fn admissible(&self, n: u32, h: f64) -> bool {
        n >= self.min_count && h >= self.min_hess
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    default_left: bool,
    gain: f64,
}

/// An open leaf owns the range `lo..hi` of the row buffer and `mlo[j]..mhi[j]`,
/// `slo[j]..shi[j]` of each per-feature buffer.
struct Leaf {
    node: usize,
    depth: u32,
    lo: usize,
    hi: usize,
    /// Per selected feature: present rows `s[j]` and missing rows `m[j]`.
    s: Vec<(usize, usize)>,
    m: Vec<(usize, usize)>,
    g: f64,
    h: f64,
    best: Option<Split>,
}

impl Leaf {
    fn n_rows(&self) -> usize {
        self.hi - self.lo
    }
}

struct Grower<'a> {
    ds: &'a Dataset,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a SplitParams,
    go_left: &'a mut [bool],
    rows: Vec<u32>,
    /// Per selected feature, present rows sorted by value within each leaf range.
    sorted: Vec<Vec<u32>>,
    missing: Vec<Vec<u32>>,
    tmp: Vec<u32>,
}

impl Grower<'_> {
    fn sums(&self, rows: &[u32]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        })
    }

    fn grow(mut self, rows: &[u32], feats: &[usize]) -> RegressionTree {
        let mut in_bag = vec![false; self.ds.n_rows];
        for &r in rows {
            in_bag[r as usize] = true;
        }
        let all_in = rows.len() == self.ds.n_rows;
        let filter = |list: &Vec<u32>| -> Vec<u32> {
            if all_in {
                list.clone()
            } else {
                list.iter().copied().filter(|&r| in_bag[r as usize]).collect()
            }
        };
        self.sorted = feats.iter().map(|&f| filter(&self.ds.sorted[f])).collect();
        self.missing = feats.iter().map(|&f| filter(&self.ds.missing[f])).collect();
        self.rows = rows.to_vec();
        let (g, h) = self.sums(rows);
        let mut root = Leaf {
            node: 0,
            depth: 0,
            lo: 0,
            hi: rows.len(),
            s: self.sorted.iter().map(|l| (0, l.len())).collect(),
            m: self.missing.iter().map(|l| (0, l.len())).collect(),
            g,
            h,
            best: None,
        };
        root.best = self.best_split(&root, feats);

        let mut nodes = vec![Node::Leaf {
            value: 0.0,
            count: 0,
            hessian: 0.0,
        }];
        let mut open = vec![root];
        let mut n_leaves = 1u32;
        while n_leaves < self.params.num_leaves {
            let pick = open
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.best.map(|b| (i, b.gain, l.node)))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)));
            let Some((i, _, _)) = pick else { break };
            let leaf = open.swap_remove(i);
            let split = leaf.best.expect("picked leaves have a split");
            let (left, right) = self.partition(&leaf, &split);
            let (l_id, r_id) = (nodes.len(), nodes.len() + 1);
            nodes[leaf.node] = Node::Split {
                feature: split.feature as u32,
                threshold: split.threshold,
                default_left: split.default_left,
                left: l_id as u32,
                right: r_id as u32,
                gain: split.gain,
                count: leaf.n_rows() as u32,
                hessian: leaf.h,
            };
            n_leaves += 1;
            let last_split = n_leaves >= self.params.num_leaves;
            for (id, mut child) in [(l_id, left), (r_id, right)] {
                nodes.push(Node::Leaf {
                    value: 0.0,
                    count: 0,
                    hessian: 0.0,
                });
                child.node = id;
                child.depth = leaf.depth + 1;
                if !last_split {
                    child.best = self.best_split(&child, feats);
                }
                open.push(child);
            }
        }
        for leaf in open {
            nodes[leaf.node] = Node::Leaf {
                value: self.params.leaf_value(leaf.g, leaf.h),
                count: leaf.n_rows() as u32,
                hessian: leaf.h,
            };
        }
        RegressionTree { nodes }
    }

    /// Stable in-place partition of `buf[lo..hi]`; returns the left length.
    fn split_range(go: &[bool], tmp: &mut Vec<u32>, buf: &mut [u32], lo: usize, hi: usize) -> usize {
        tmp.clear();
        let mut w = lo;
        for i in lo..hi {
            let r = buf[i];
            if go[r as usize] {
                buf[w] = r;
                w += 1;
            } else {
                tmp.push(r);
            }
        }
        buf[w..hi].copy_from_slice(tmp);
        w - lo
    }

    fn partition(&mut self, leaf: &Leaf, split: &Split) -> (Leaf, Leaf) {
        let col = &self.ds.columns[split.feature];
        for &r in &self.rows[leaf.lo..leaf.hi] {
            let v = col[r as usize];
            self.go_left[r as usize] = if v.is_nan() { split.default_left } else { v <= split.threshold };
        }
        let go = &*self.go_left;
        let nl = Self::split_range(go, &mut self.tmp, &mut self.rows, leaf.lo, leaf.hi);
        let k = leaf.s.len();
        let (mut s_l, mut s_r) = (Vec::with_capacity(k), Vec::with_capacity(k));
        let (mut m_l, mut m_r) = (Vec::with_capacity(k), Vec::with_capacity(k));
        for j in 0..k {
            let (lo, hi) = leaf.s[j];
            let n = Self::split_range(go, &mut self.tmp, &mut self.sorted[j], lo, hi);
            s_l.push((lo, lo + n));
            s_r.push((lo + n, hi));
            let (lo, hi) = leaf.m[j];
            let n = Self::split_range(go, &mut self.tmp, &mut self.missing[j], lo, hi);
            m_l.push((lo, lo + n));
            m_r.push((lo + n, hi));
        }
        let mid = leaf.lo + nl;
        let (gl, hl) = self.sums(&self.rows[leaf.lo..mid]);
        let (gr, hr) = self.sums(&self.rows[mid..leaf.hi]);
        let mk = |lo, hi, s, m, g, h| Leaf {
            node: 0,
            depth: 0,
            lo,
            hi,
            s,
            m,
            g,
            h,
            best: None,
        };
        (mk(leaf.lo, mid, s_l, m_l, gl, hl), mk(mid, leaf.hi, s_r, m_r, gr, hr))
    }

    /// Best admissible split of `leaf`: features ascending, thresholds ascending,
    /// missing-right before missing-left; only strictly better gains replace.
    fn best_split(&self, leaf: &Leaf, feats: &[usize]) -> Option<Split> {
        let p = self.params;
        if p.max_depth.is_some_and(|d| leaf.depth >= d) {
            return None;
        }
        let n_node = leaf.n_rows() as u32;
        if n_node < 2 * p.min_count {
            return None;
        }
        let parent = p.score(leaf.g, leaf.h);
        let mut best: Option<Split> = None;
        let mut best_gain = 0.0f64;
        for (j, &f) in feats.iter().enumerate() {
            let list = &self.sorted[j][leaf.s[j].0..leaf.s[j].1];
            let missing = &self.missing[j][leaf.m[j].0..leaf.m[j].1];
            if list.len() < 2 {
                continue;
            }
            let col = &self.ds.columns[f];
            let (gm, hm) = self.sums(missing);
            let nm = missing.len() as u32;
            let (g_present, h_present) = (leaf.g - gm, leaf.h - hm);
            let n_present = list.len() as u32;
            let (mut gl, mut hl, mut nl) = (0.0f64, 0.0f64, 0u32);
            for i in 0..list.len() - 1 {
                let r = list[i] as usize;
                gl += self.grad[r];
                hl += self.hess[r];
                nl += 1;
                let v = col[r];
                let next = col[list[i + 1] as usize];
                if v == next {
                    continue;
                }
                let (gr, hr, nr) = (g_present - gl, h_present - hl, n_present - nl);
                let mut consider = |lg: f64, lh: f64, ln: u32, rg: f64, rh: f64, rn: u32, default_left: bool| {
                    if !p.admissible(ln, lh) || !p.admissible(rn, rh) {
                        return;
                    }
                    let gain = 0.5 * (p.score(lg, lh) + p.score(rg, rh) - parent);
                    if gain > best_gain {
                        best_gain = gain;
                        best = Some(Split {
                            feature: f,
                            threshold: midpoint(v, next),
                            default_left,
                            gain,
                        });
                    }
                };
                if nm == 0 {
                    consider(gl, hl, nl, gr, hr, nr, nl >= nr);
                } else {
                    consider(gl, hl, nl, gr + gm, hr + hm, nr + nm, false);
                    consider(gl + gm, hl + hm, nl + nm, gr, hr, nr, true);
                }
            }
        }
        best
    }
}

/// Midpoint of consecutive distinct values, never rounding up onto `hi`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}
