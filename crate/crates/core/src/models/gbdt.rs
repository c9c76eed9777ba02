//! Gradient-boosted regression trees on the logistic loss.
//!
//! Trees are grown level by level with exact greedy splits on sparse
//! columns: the split criterion is variance reduction of the gradient
//! residuals and leaf values are single Newton steps.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::RoadTypeLabel;
use crate::error::{Error, Result};
use crate::textpipe::FeatureVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_trees: usize,
    pub subsample: f64,
    pub min_leaf: usize,
    /// L2 penalty in the Newton leaf denominator.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, max_depth: 7, n_trees: 300, subsample: 0.8, min_leaf: 5, lambda: 1.0, seed: 42 }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config("learning_rate must lie in (0, 1]".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config("subsample must lie in (0, 1]".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf { value: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x.get(*feature) <= *threshold { *left as usize } else { *right as usize };
                }
            }
        }
    }

    fn scale(&mut self, f: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= f;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub config: GbdtConfig,
    /// Prior log-odds of the intersection class.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub dim: usize,
    pub space: u64,
    /// Mean training log-loss before the first tree and after each tree.
    pub train_loss: Vec<f64>,
}

impl GbdtModel {
    pub fn raw_score(&self, x: &FeatureVector) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn probability(&self, x: &FeatureVector) -> f64 {
        sigmoid(self.raw_score(x))
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_loss(f: &[f64], y: &[f64]) -> f64 {
    // log(1 + exp(-s f)) with s = +-1, computed stably
    f.iter()
        .zip(y)
        .map(|(&fi, &yi)| {
            let m = if yi > 0.5 { fi } else { -fi };
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        })
        .sum::<f64>()
        / f.len() as f64
}

/// Column-major copy of the nonzero entries, each column sorted by value.
struct Columns {
    cols: Vec<Vec<(u32, f64)>>,
}

impl Columns {
    fn new(x: &[FeatureVector], dim: usize) -> Self {
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); dim];
        for (r, v) in x.iter().enumerate() {
            for (f, val) in v.iter() {
                cols[f as usize].push((r as u32, val));
            }
        }
        for c in &mut cols {
            c.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        }
        Self { cols }
    }
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: u32,
    threshold: f64,
}

#[derive(Clone, Copy, Default)]
struct Scan {
    nnz_cnt: usize,
    nnz_sum: f64,
    left_cnt: usize,
    left_sum: f64,
    prev: Option<f64>,
    zeros_done: bool,
}

struct Grower<'a> {
    cols: &'a Columns,
    x: &'a [FeatureVector],
    cfg: &'a GbdtConfig,
}

impl Grower<'_> {
    fn grow(&self, rows: &[usize], resid: &[f64], hess: &[f64]) -> Tree {
        let n = self.x.len();
        // node id per row in the current frontier; usize::MAX = inactive
        let mut slot = vec![usize::MAX; n];
        for &r in rows {
            slot[r] = 0;
        }
        let mut tree = Tree { nodes: vec![Node::Leaf { value: 0.0 }] };
        let mut frontier: Vec<usize> = vec![0];
        for _depth in 0..self.cfg.max_depth {
            if frontier.is_empty() {
                break;
            }
            let k = frontier.len();
            let mut cnt = vec![0usize; k];
            let mut sum = vec![0.0; k];
            for &r in rows {
                if slot[r] != usize::MAX {
                    cnt[slot[r]] += 1;
                    sum[slot[r]] += resid[r];
                }
            }
            let parent: Vec<f64> = (0..k).map(|s| if cnt[s] > 0 { sum[s] * sum[s] / cnt[s] as f64 } else { 0.0 }).collect();
            let mut best: Vec<Option<Best>> = vec![None; k];
            let mut scan = vec![Scan::default(); k];
            let mut touched: Vec<usize> = Vec::new();
            let min_leaf = self.cfg.min_leaf.max(1);

            for (f, col) in self.cols.cols.iter().enumerate() {
                if col.is_empty() {
                    continue;
                }
                touched.clear();
                for &(r, _) in col {
                    let s = slot[r as usize];
                    if s == usize::MAX {
                        continue;
                    }
                    if scan[s].nnz_cnt == 0 {
                        touched.push(s);
                    }
                    scan[s].nnz_cnt += 1;
                    scan[s].nnz_sum += resid[r as usize];
                }
                let consider = |sc: &mut Scan, s: usize, next: f64, best: &mut Option<Best>| {
                    if let Some(prev) = sc.prev {
                        if next > prev {
                            let (lc, rc) = (sc.left_cnt, cnt[s] - sc.left_cnt);
                            if lc >= min_leaf && rc >= min_leaf {
                                let rs = sum[s] - sc.left_sum;
                                let gain = sc.left_sum * sc.left_sum / lc as f64 + rs * rs / rc as f64 - parent[s];
                                if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                                    *best = Some(Best { gain, feature: f as u32, threshold: 0.5 * (prev + next) });
                                }
                            }
                        }
                    }
                };
                let add_zeros = |sc: &mut Scan, s: usize, best: &mut Option<Best>| {
                    sc.zeros_done = true;
                    let zc = cnt[s] - sc.nnz_cnt;
                    if zc > 0 {
                        consider(sc, s, 0.0, best);
                        sc.left_cnt += zc;
                        sc.left_sum += sum[s] - sc.nnz_sum;
                        sc.prev = Some(0.0);
                    }
                };
                for &(r, v) in col {
                    let s = slot[r as usize];
                    if s == usize::MAX {
                        continue;
                    }
                    let mut sc = scan[s];
                    if !sc.zeros_done && v > 0.0 {
                        add_zeros(&mut sc, s, &mut best[s]);
                    }
                    consider(&mut sc, s, v, &mut best[s]);
                    sc.left_cnt += 1;
                    sc.left_sum += resid[r as usize];
                    sc.prev = Some(v);
                    scan[s] = sc;
                }
                for &s in &touched {
                    let mut sc = scan[s];
                    if !sc.zeros_done {
                        add_zeros(&mut sc, s, &mut best[s]);
                    }
                    scan[s] = Scan::default();
                }
            }

            let mut next_frontier = Vec::new();
            let mut child_slot = vec![(usize::MAX, usize::MAX); k];
            for (s, b) in best.iter().enumerate() {
                if let Some(b) = b {
                    let node = frontier[s];
                    let l = tree.nodes.len();
                    tree.nodes.push(Node::Leaf { value: 0.0 });
                    tree.nodes.push(Node::Leaf { value: 0.0 });
                    tree.nodes[node] = Node::Split { feature: b.feature, threshold: b.threshold, left: l as u32, right: l as u32 + 1 };
                    child_slot[s] = (next_frontier.len(), next_frontier.len() + 1);
                    next_frontier.push(l);
                    next_frontier.push(l + 1);
                }
            }
            // finalize leaves that did not split
            let mut leaf_rows: Vec<Vec<usize>> = vec![Vec::new(); k];
            for &r in rows {
                let s = slot[r];
                if s == usize::MAX {
                    continue;
                }
                match best[s] {
                    Some(b) => {
                        let (l, rr) = child_slot[s];
                        slot[r] = if self.x[r].get(b.feature) <= b.threshold { l } else { rr };
                    }
                    None => {
                        leaf_rows[s].push(r);
                        slot[r] = usize::MAX;
                    }
                }
            }
            for (s, rs) in leaf_rows.iter().enumerate() {
                if best[s].is_none() {
                    tree.nodes[frontier[s]] = Node::Leaf { value: self.leaf_value(rs, resid, hess) };
                }
            }
            frontier = next_frontier;
        }
        if !frontier.is_empty() {
            let mut leaf_rows: Vec<Vec<usize>> = vec![Vec::new(); frontier.len()];
            for &r in rows {
                if slot[r] != usize::MAX {
                    leaf_rows[slot[r]].push(r);
                }
            }
            for (s, rs) in leaf_rows.iter().enumerate() {
                tree.nodes[frontier[s]] = Node::Leaf { value: self.leaf_value(rs, resid, hess) };
            }
        }
        tree
    }

    fn leaf_value(&self, rows: &[usize], resid: &[f64], hess: &[f64]) -> f64 {
        let g: f64 = rows.iter().map(|&r| resid[r]).sum();
        let h: f64 = rows.iter().map(|&r| hess[r]).sum();
        let d = h + self.cfg.lambda;
        if d <= 0.0 {
            0.0
        } else {
            self.cfg.learning_rate * g / d
        }
    }
}

/// Trains the ensemble. Deterministic given `cfg.seed`. Each tree's leaf
/// values are halved until the full training loss does not increase.
pub fn train_gbdt(x: &[FeatureVector], labels: &[RoadTypeLabel], cfg: &GbdtConfig) -> Result<GbdtModel> {
    cfg.validate()?;
    if x.is_empty() || x.len() != labels.len() {
        return Err(Error::EmptyCorpus);
    }
    if labels.iter().all(|l| *l == labels[0]) {
        return Err(Error::DegenerateLabels);
    }
    let (dim, space) = (x[0].dim, x[0].space);
    if let Some(v) = x.iter().find(|v| v.space != space) {
        return Err(Error::VocabularyMismatch { expected: space, actual: v.space });
    }
    let n = x.len();
    let y: Vec<f64> = labels.iter().map(|l| if l.is_intersection() { 1.0 } else { 0.0 }).collect();
    let p0 = y.iter().sum::<f64>() / n as f64;
    let base_score = (p0 / (1.0 - p0)).ln();
    let mut f = vec![base_score; n];
    let mut losses = vec![log_loss(&f, &y)];
    let cols = Columns::new(x, dim);
    let grower = Grower { cols: &cols, x, cfg };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_sample = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut resid = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..cfg.n_trees {
        for i in 0..n {
            let p = sigmoid(f[i]);
            resid[i] = y[i] - p;
            hess[i] = p * (1.0 - p);
        }
        let rows: Vec<usize> = if n_sample == n {
            (0..n).collect()
        } else {
            let mut r = sample(&mut rng, n, n_sample).into_vec();
            r.sort_unstable();
            r
        };
        let mut tree = grower.grow(&rows, &resid, &hess);
        let out: Vec<f64> = x.iter().map(|v| tree.predict(v)).collect();
        let prev = *losses.last().unwrap();
        let mut shrink = 1.0;
        let mut cand: Vec<f64>;
        let mut loss;
        loop {
            cand = f.iter().zip(&out).map(|(a, b)| a + shrink * b).collect();
            loss = log_loss(&cand, &y);
            if loss <= prev || shrink < 1e-6 {
                break;
            }
            shrink *= 0.5;
        }
        if loss > prev {
            shrink = 0.0;
            cand = f.clone();
            loss = prev;
        }
        if shrink != 1.0 {
            tree.scale(shrink);
        }
        f = cand;
        losses.push(loss);
        trees.push(tree);
    }
    Ok(GbdtModel { config: cfg.clone(), base_score, trees, dim, space, train_loss: losses })
}
