//! Support vector classifier: dual SMO with second-order working-set
//! selection for kernels, and a primal stochastic subgradient solver for
//! large linear problems.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::calibrate::Platt;
use super::split::stratified_split;
use crate::corpus::RoadTypeLabel;
use crate::error::{Error, Result};
use crate::textpipe::FeatureVector;

const TAU: f64 = 1e-12;
/// Above this many vectors the Gram matrix is not precomputed.
const GRAM_LIMIT: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub kernel: KernelKind,
    pub c: f64,
    pub gamma: f64,
    pub tolerance: f64,
    /// SMO stops after `max_passes * n` pair updates; the linear solver runs
    /// `max_passes` epochs.
    pub max_passes: usize,
    /// Fraction of training data held out to fit the Platt map.
    pub calibration_fraction: f64,
    /// Training sets larger than this use the linear primal solver.
    pub linear_threshold: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Rbf,
            c: 10.0,
            gamma: 0.01,
            tolerance: 1e-3,
            max_passes: 10,
            calibration_fraction: 0.1,
            linear_threshold: 10_000,
            seed: 42,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.gamma > 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::Config("svm requires c > 0, gamma > 0, tolerance > 0".into()));
        }
        if !(0.0..1.0).contains(&self.calibration_fraction) {
            return Err(Error::Config("calibration_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SvmParams {
    /// `f(x) = sum coef_i K(sv_i, x) + bias`, with `coef_i = alpha_i * y_i`.
    Dual { kernel: KernelKind, gamma: f64, support: Vec<FeatureVector>, coef: Vec<f64>, bias: f64 },
    /// `f(x) = w . x + bias`.
    Primal { w: Vec<f64>, bias: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub config: SvmConfig,
    pub params: SvmParams,
    pub platt: Platt,
    pub dim: usize,
    pub space: u64,
    /// SMO pair updates performed (0 for the primal solver).
    pub iterations: usize,
    pub converged: bool,
}

fn kernel_value(kind: KernelKind, gamma: f64, a: &FeatureVector, a_sq: f64, b: &FeatureVector, b_sq: f64) -> f64 {
    let d = a.dot(b);
    match kind {
        KernelKind::Linear => d,
        KernelKind::Rbf => (-gamma * (a_sq + b_sq - 2.0 * d).max(0.0)).exp(),
    }
}

impl SvmModel {
    pub fn decision(&self, x: &FeatureVector) -> f64 {
        match &self.params {
            SvmParams::Dual { kernel, gamma, support, coef, bias } => {
                let x_sq = x.squared_norm();
                support
                    .iter()
                    .zip(coef)
                    .map(|(sv, c)| c * kernel_value(*kernel, *gamma, sv, sv.squared_norm(), x, x_sq))
                    .sum::<f64>()
                    + bias
            }
            SvmParams::Primal { w, bias } => x.iter().map(|(i, v)| w.get(i as usize).copied().unwrap_or(0.0) * v).sum::<f64>() + bias,
        }
    }

    /// Dual variables `alpha_i` of the support vectors and `sum alpha_i y_i`.
    pub fn dual_summary(&self) -> Option<(Vec<f64>, f64)> {
        match &self.params {
            SvmParams::Dual { coef, .. } => Some((coef.iter().map(|c| c.abs()).collect(), coef.iter().sum())),
            SvmParams::Primal { .. } => None,
        }
    }

    pub fn n_support(&self) -> usize {
        match &self.params {
            SvmParams::Dual { support, .. } => support.len(),
            SvmParams::Primal { .. } => 0,
        }
    }
}

struct KernelCache<'a> {
    x: &'a [FeatureVector],
    sq: Vec<f64>,
    kind: KernelKind,
    gamma: f64,
    gram: Option<Vec<f64>>,
    rows: HashMap<usize, Vec<f64>>,
    order: Vec<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a [FeatureVector], kind: KernelKind, gamma: f64) -> Self {
        let n = x.len();
        let sq: Vec<f64> = x.iter().map(|v| v.squared_norm()).collect();
        let mut cache = Self { x, sq, kind, gamma, gram: None, rows: HashMap::new(), order: Vec::new(), capacity: (GRAM_LIMIT * GRAM_LIMIT / n.max(1)).max(2) };
        if n <= GRAM_LIMIT {
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let k = cache.compute(i, j);
                    g[i * n + j] = k;
                    g[j * n + i] = k;
                }
            }
            cache.gram = Some(g);
        }
        cache
    }

    fn compute(&self, i: usize, j: usize) -> f64 {
        kernel_value(self.kind, self.gamma, &self.x[i], self.sq[i], &self.x[j], self.sq[j])
    }

    fn diag(&self, i: usize) -> f64 {
        self.compute(i, i)
    }

    fn row(&mut self, i: usize) -> &[f64] {
        let n = self.x.len();
        if self.gram.is_some() {
            return &self.gram.as_ref().unwrap()[i * n..(i + 1) * n];
        }
        if !self.rows.contains_key(&i) {
            if self.rows.len() >= self.capacity {
                let evict = self.order.remove(0);
                self.rows.remove(&evict);
            }
            let r: Vec<f64> = (0..n).map(|j| self.compute(i, j)).collect();
            self.rows.insert(i, r);
            self.order.push(i);
        }
        &self.rows[&i]
    }
}

/// Result of the bare dual solver.
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `min 1/2 a'Qa - e'a` s.t. `0 <= a <= C`, `y'a = 0`.
pub(crate) fn smo(x: &[FeatureVector], y: &[f64], cfg: &SvmConfig) -> DualSolution {
    let n = x.len();
    let c = cfg.c;
    let mut kc = KernelCache::new(x, cfg.kernel, cfg.gamma);
    let qd: Vec<f64> = (0..n).map(|i| kc.diag(i)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = cfg.max_passes.max(1) * n.max(1000);
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut gi: Option<usize> = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && v >= gmax {
                gmax = v;
                gi = Some(t);
            }
        }
        let Some(i) = gi else {
            converged = true;
            break;
        };
        let ki: Vec<f64> = kc.row(i).to_vec();
        // j: second-order choice in I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut gj: Option<usize> = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = (qd[i] + qd[t] - 2.0 * ki[t]).max(TAU);
                let obj = -(diff * diff) / quad;
                if obj <= best {
                    best = obj;
                    gj = Some(t);
                }
            }
        }
        if gmax + gmax2 < cfg.tolerance {
            converged = true;
            break;
        }
        let Some(j) = gj else {
            converged = true;
            break;
        };
        let kj: Vec<f64> = kc.row(j).to_vec();
        let (ai, aj) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * ki[j];
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
        }
        iterations += 1;
    }

    // bias: average over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    DualSolution { alpha, bias: -rho, iterations, converged }
}

fn pegasos(x: &[FeatureVector], y: &[f64], dim: usize, cfg: &SvmConfig) -> (Vec<f64>, f64) {
    // bias is the weight of a constant feature stored at index `dim`
    let n = x.len();
    let lambda = 1.0 / (cfg.c * n as f64);
    let mut w = vec![0.0; dim + 1];
    let mut scale = 1.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = 0usize;
    for _ in 0..cfg.max_passes.max(1) {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * (t + 1) as f64);
            let raw = x[i].iter().map(|(k, v)| w[k as usize] * v).sum::<f64>() + w[dim];
            let margin = y[i] * scale * raw;
            scale *= 1.0 - eta * lambda;
            if margin < 1.0 {
                let step = eta * y[i] / scale;
                for (k, v) in x[i].iter() {
                    w[k as usize] += step * v;
                }
                w[dim] += step;
            }
            if scale < 1e-6 {
                for v in &mut w {
                    *v *= scale;
                }
                scale = 1.0;
            }
        }
    }
    for v in &mut w {
        *v *= scale;
    }
    let bias = w.pop().unwrap_or(0.0);
    (w, bias)
}

fn check_inputs(x: &[FeatureVector], labels: &[RoadTypeLabel]) -> Result<(usize, u64)> {
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
    Ok((dim, space))
}

/// Trains on `1 - calibration_fraction` of the data and fits the Platt map on
/// the held-out rest (stratified, seeded).
pub fn train_svm(x: &[FeatureVector], labels: &[RoadTypeLabel], cfg: &SvmConfig) -> Result<SvmModel> {
    cfg.validate()?;
    let (dim, space) = check_inputs(x, labels)?;
    let (fit_idx, cal_idx) = if cfg.calibration_fraction > 0.0 {
        stratified_split(labels, cfg.calibration_fraction, cfg.seed)
    } else {
        ((0..x.len()).collect(), Vec::new())
    };
    let fx: Vec<FeatureVector> = fit_idx.iter().map(|&i| x[i].clone()).collect();
    let fl: Vec<RoadTypeLabel> = fit_idx.iter().map(|&i| labels[i]).collect();
    if fl.iter().all(|l| *l == fl[0]) {
        return Err(Error::DegenerateLabels);
    }
    let fy: Vec<f64> = fl.iter().map(|l| l.sign()).collect();

    let mut model = if fx.len() > cfg.linear_threshold {
        let (w, bias) = pegasos(&fx, &fy, dim, cfg);
        SvmModel { config: cfg.clone(), params: SvmParams::Primal { w, bias }, platt: Platt::default(), dim, space, iterations: 0, converged: true }
    } else {
        let sol = smo(&fx, &fy, cfg);
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for (i, a) in sol.alpha.iter().enumerate() {
            if *a > 0.0 {
                support.push(fx[i].clone());
                coef.push(a * fy[i]);
            }
        }
        SvmModel {
            config: cfg.clone(),
            params: SvmParams::Dual { kernel: cfg.kernel, gamma: cfg.gamma, support, coef, bias: sol.bias },
            platt: Platt::default(),
            dim,
            space,
            iterations: sol.iterations,
            converged: sol.converged,
        }
    };
    let (scores, pos): (Vec<f64>, Vec<bool>) = if cal_idx.is_empty() {
        fx.iter().zip(&fl).map(|(v, l)| (model.decision(v), l.is_intersection())).unzip()
    } else {
        cal_idx.iter().map(|&i| (model.decision(&x[i]), labels[i].is_intersection())).unzip()
    };
    model.platt = Platt::fit(&scores, &pos);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RoadTypeLabel::*;

    fn dense(v: &[f64]) -> FeatureVector {
        FeatureVector::from_pairs(v.iter().enumerate().map(|(i, x)| (i as u32, *x)).collect(), v.len(), 1)
    }

    #[test]
    fn separable_clusters() {
        let mut x = Vec::new();
        let mut l = Vec::new();
        for i in 0..20 {
            let d = i as f64 * 0.05;
            x.push(dense(&[2.0 + d, 2.0 - d]));
            l.push(Intersection);
            x.push(dense(&[-2.0 - d, -2.0 + d]));
            l.push(NonIntersection);
        }
        let cfg = SvmConfig { gamma: 0.5, calibration_fraction: 0.0, ..Default::default() };
        let m = train_svm(&x, &l, &cfg).unwrap();
        for (v, lab) in x.iter().zip(&l) {
            assert_eq!(m.decision(v) > 0.0, lab.is_intersection());
        }
    }

    #[test]
    fn xor_rbf() {
        let x = vec![dense(&[1.0, 1.0]), dense(&[-1.0, -1.0]), dense(&[1.0, -1.0]), dense(&[-1.0, 1.0])];
        let l = vec![Intersection, Intersection, NonIntersection, NonIntersection];
        let cfg = SvmConfig { gamma: 1.0, calibration_fraction: 0.0, ..Default::default() };
        let m = train_svm(&x, &l, &cfg).unwrap();
        // brute verification of the decision values
        for (v, lab) in x.iter().zip(&l) {
            let f = m.decision(v);
            assert_eq!(f > 0.0, lab.is_intersection(), "f = {f}");
        }
        let (alpha, sum) = m.dual_summary().unwrap();
        assert!(alpha.iter().all(|a| *a >= 0.0 && *a <= cfg.c + 1e-12));
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn defaults() {
        let c = SvmConfig::default();
        assert_eq!((c.c, c.gamma, c.tolerance, c.max_passes), (10.0, 0.01, 1e-3, 10));
        assert_eq!(c.kernel, KernelKind::Rbf);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![dense(&[1.0]), dense(&[2.0])];
        assert!(matches!(train_svm(&x, &[Intersection, Intersection], &SvmConfig::default()), Err(Error::DegenerateLabels)));
    }

    #[test]
    fn primal_solver_separates() {
        let mut x = Vec::new();
        let mut l = Vec::new();
        for i in 0..200 {
            let d = (i % 10) as f64 * 0.1;
            x.push(dense(&[1.0 + d, 0.1]));
            l.push(Intersection);
            x.push(dense(&[0.1, 1.0 + d]));
            l.push(NonIntersection);
        }
        let cfg = SvmConfig { linear_threshold: 100, calibration_fraction: 0.1, ..Default::default() };
        let m = train_svm(&x, &l, &cfg).unwrap();
        assert!(matches!(m.params, SvmParams::Primal { .. }));
        let acc = x.iter().zip(&l).filter(|(v, lab)| (m.decision(v) > 0.0) == lab.is_intersection()).count();
        assert_eq!(acc, x.len());
    }
}
