//! Survival ensembles that average martingale estimating equations.
//!
//! `B` unpruned trees are grown on resampled data with a random subset of
//! coordinates at each split. Rather than averaging the per-tree predictions,
//! the per-tree estimating equations are averaged: the weight
//!
//! `w_i(t, z) = (1/B) * sum_b w_bi * I(Z_i(t) in l_b(z))`
//!
//! counts how often training subject `i` co-locates with the query point.
//! Hazard prediction smooths the resulting counting-process ratio with the
//! kernel; survival prediction accumulates the raw increments
//! `exp(-sum_{Y_i <= t} v2_i / v3_i)` where for each training event `i`,
//! `v2_i` counts co-located event mass and `v3_i` co-located at-risk mass at
//! `Y_i` across the ensemble.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CovariatePath, TransformedDataset};
use crate::error::{Error, Result};
use crate::kernel::{epanechnikov, BandwidthPolicy, NodeHazardCurve};
use crate::rng::stream;
use crate::scalar::{lit, Scalar};
use crate::tree::{grow_weighted, GrowSettings, GrowthCache, PartitionTree, SplitCriterion};

/// How per-tree training sets are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    /// Multinomial bootstrap: per tree, `n` draws with replacement.
    Bootstrap,
    /// Subsampling without replacement; half the subsample places the
    /// splits, the held half provides the within-leaf estimates.
    SubsampleHonest { fraction: f64 },
}

/// Ensemble parameters.
#[derive(Debug, Clone)]
pub struct ForestSettings {
    pub n_trees: usize,
    /// Coordinates drawn per split; defaults to `ceil(sqrt(p))`.
    pub feature_subset: usize,
    pub n_min: usize,
    pub criterion: SplitCriterion,
    pub resample_mode: ResampleMode,
    pub max_thresholds: usize,
}

impl ForestSettings {
    pub fn defaults_for(p: usize) -> Self {
        ForestSettings {
            n_trees: crate::DEFAULT_ENSEMBLE_SIZE,
            feature_subset: (p as f64).sqrt().ceil() as usize,
            n_min: crate::DEFAULT_MIN_NODE,
            criterion: SplitCriterion::DeltaIcon,
            resample_mode: ResampleMode::Bootstrap,
            max_thresholds: 64,
        }
    }

    fn grow_settings(&self, seed: u64) -> GrowSettings {
        GrowSettings {
            n_min: self.n_min,
            criterion: self.criterion,
            feature_subset: Some(self.feature_subset),
            max_thresholds: self.max_thresholds,
            seed,
        }
    }
}

/// A fitted ensemble: unpruned trees plus their integer resample weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel<F> {
    trees: Vec<PartitionTree<F>>,
    resample_weights: Vec<Vec<u32>>,
    /// `(I_1b, I_2b)` in honest mode: split-placing and estimating halves.
    honest_split: Option<Vec<(Vec<u32>, Vec<u32>)>>,
    mode: ResampleMode,
    seed: u64,
}

impl<F: Scalar> ForestModel<F> {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[PartitionTree<F>] {
        &self.trees
    }

    pub fn resample_weights(&self) -> &[Vec<u32>] {
        &self.resample_weights
    }

    pub fn honest_split(&self) -> Option<&[(Vec<u32>, Vec<u32>)]> {
        self.honest_split.as_deref()
    }

    pub fn mode(&self) -> ResampleMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Fits an ensemble; every tree is grown on its own resample with a fresh
/// random stream derived from `(seed, "forest-resample"/"forest-grow", b)`.
pub fn fit_forest<F: Scalar>(
    tdata: &TransformedDataset<F>,
    policy: &BandwidthPolicy<F>,
    settings: &ForestSettings,
    seed: u64,
) -> Result<ForestModel<F>> {
    if settings.n_trees == 0 {
        return Err(Error::InvalidParameter("ensemble needs n_trees >= 1".into()));
    }
    let n = tdata.len();
    let cache = GrowthCache::new(tdata);
    type TreeParts<F> = (PartitionTree<F>, Vec<u32>, Option<(Vec<u32>, Vec<u32>)>);
    let results: Vec<Result<TreeParts<F>>> = (0..settings.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut resample_rng = stream(seed, "forest-resample", b as u64);
            let mut grow_rng = stream(seed, "forest-grow", b as u64);
            match settings.resample_mode {
                ResampleMode::Bootstrap => {
                    let mut weights = vec![0u32; n];
                    for _ in 0..n {
                        weights[resample_rng.random_range(0..n)] += 1;
                    }
                    let wf: Vec<F> = weights.iter().map(|&w| lit(w as f64)).collect();
                    let tree = grow_weighted(
                        &cache,
                        policy,
                        &settings.grow_settings(seed),
                        Some(&wf),
                        &mut grow_rng,
                    )?;
                    Ok((tree, weights, None))
                }
                ResampleMode::SubsampleHonest { fraction } => {
                    if !(0.0 < fraction && fraction <= 1.0) {
                        return Err(Error::InvalidParameter(
                            "subsample fraction must lie in (0, 1]".into(),
                        ));
                    }
                    let k = ((fraction * n as f64).floor() as usize).clamp(2, n);
                    let sample = rand::seq::index::sample(&mut resample_rng, n, k).into_vec();
                    let half = k.div_ceil(2);
                    let mut i1: Vec<u32> = sample[..half].iter().map(|&i| i as u32).collect();
                    let mut i2: Vec<u32> = sample[half..].iter().map(|&i| i as u32).collect();
                    i1.sort_unstable();
                    i2.sort_unstable();
                    let mut w_grow = vec![F::zero(); n];
                    for &i in &i1 {
                        w_grow[i as usize] = F::one();
                    }
                    let tree = grow_weighted(
                        &cache,
                        policy,
                        &settings.grow_settings(seed),
                        Some(&w_grow),
                        &mut grow_rng,
                    )?;
                    let mut weights = vec![0u32; n];
                    for &i in &i2 {
                        weights[i as usize] = 1;
                    }
                    let wf: Vec<F> = weights.iter().map(|&w| lit(w as f64)).collect();
                    let tree = reestimate_leaf_curves(tree, tdata, policy, &wf);
                    Ok((tree, weights, Some((i1, i2))))
                }
            }
        })
        .collect();

    let mut trees = Vec::with_capacity(settings.n_trees);
    let mut resample_weights = Vec::with_capacity(settings.n_trees);
    let mut honest = Vec::new();
    for r in results {
        let (tree, w, split) = r?;
        trees.push(tree);
        resample_weights.push(w);
        if let Some(split) = split {
            honest.push(split);
        }
    }
    let honest_split = match settings.resample_mode {
        ResampleMode::SubsampleHonest { .. } => Some(honest),
        ResampleMode::Bootstrap => None,
    };
    Ok(ForestModel {
        trees,
        resample_weights,
        honest_split,
        mode: settings.resample_mode,
        seed,
    })
}

/// Fits an ensemble from caller-supplied integer resample weights; used for
/// reduction checks and deterministic replays.
pub fn fit_forest_with_resamples<F: Scalar>(
    tdata: &TransformedDataset<F>,
    policy: &BandwidthPolicy<F>,
    settings: &ForestSettings,
    resamples: Vec<Vec<u32>>,
    seed: u64,
) -> Result<ForestModel<F>> {
    let n = tdata.len();
    let cache = GrowthCache::new(tdata);
    let trees: Vec<Result<PartitionTree<F>>> = resamples
        .par_iter()
        .enumerate()
        .map(|(b, weights)| {
            if weights.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: weights.len(),
                });
            }
            let wf: Vec<F> = weights.iter().map(|&w| lit(w as f64)).collect();
            grow_weighted(
                &cache,
                policy,
                &settings.grow_settings(seed),
                Some(&wf),
                &mut stream(seed, "forest-grow", b as u64),
            )
        })
        .collect();
    let trees = trees.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        trees,
        resample_weights: resamples,
        honest_split: None,
        mode: ResampleMode::Bootstrap,
        seed,
    })
}

/// Replaces the leaf curves of a grown tree with estimates computed under
/// different subject weights (the honest estimating half).
fn reestimate_leaf_curves<F: Scalar>(
    tree: PartitionTree<F>,
    tdata: &TransformedDataset<F>,
    policy: &BandwidthPolicy<F>,
    weights: &[F],
) -> PartitionTree<F> {
    let grid = tdata.grid();
    let q = grid.len();
    let horizon = tdata.data().horizon();
    let n = tdata.len();
    let n_leaves = tree.n_leaves();
    let total: F = weights.iter().copied().sum();
    if !(total > F::zero()) {
        return tree;
    }
    let mut n_tau = vec![F::zero(); n_leaves];
    let mut event_leaf = vec![0usize; n];
    for i in 0..n {
        if weights[i] <= F::zero() {
            continue;
        }
        let leaf = tree.route(tdata.event_x(i));
        event_leaf[i] = leaf;
        n_tau[leaf] += weights[i];
    }
    let h_of: Vec<F> = (0..n_leaves)
        .map(|l| policy.bandwidth(n_tau[l], horizon))
        .collect();
    let mut f = vec![vec![F::zero(); q]; n_leaves];
    let mut s = vec![vec![F::zero(); q]; n_leaves];
    for i in 0..n {
        let w = weights[i];
        if w <= F::zero() {
            continue;
        }
        if tdata.data().subjects()[i].event() {
            let leaf = event_leaf[i];
            let h = h_of[leaf];
            let y = tdata.data().subjects()[i].observed_time();
            for (k, &t) in grid.times().iter().enumerate() {
                let te = t.max(h).min(horizon - h);
                f[leaf][k] += w * epanechnikov((te - y) / h) / h;
            }
        }
        for k in 0..q {
            if let Some(x) = tdata.x_at(k, i) {
                let leaf = tree.route(x);
                s[leaf][k] += w;
            }
        }
    }
    let curves: Vec<NodeHazardCurve<F>> = (0..n_leaves)
        .map(|l| {
            let fv: Vec<F> = f[l].iter().map(|&v| v / total).collect();
            let sv: Vec<F> = s[l].iter().map(|&v| v / total).collect();
            NodeHazardCurve::from_masses(fv, sv, h_of[l])
        })
        .collect();
    tree.with_leaf_curves(curves)
}

/// Local co-location weights of the training subjects at `(t, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWeights<F> {
    pub t: F,
    pub z: Vec<F>,
    pub weights: Vec<F>,
}

/// At-risk-in-leaf counts per tree, indexed by grid-time anchor (static
/// covariates) or by distinct training event time (time-dependent paths).
enum RiskTables<F> {
    Static(Vec<Vec<AnchorTable<F>>>),
    Dynamic {
        counts: Vec<Vec<u64>>,
        n_leaves: Vec<usize>,
    },
}

struct AnchorTable<F> {
    offsets: Vec<u32>,
    ys: Vec<F>,
    suffix_w: Vec<u32>,
}

impl<F: Scalar> AnchorTable<F> {
    /// Total resample weight of subjects with `Y >= u` in `leaf`.
    #[inline]
    fn at_risk(&self, leaf: usize, u: F) -> u64 {
        let lo = self.offsets[leaf] as usize;
        let hi = self.offsets[leaf + 1] as usize;
        let j = lo + self.ys[lo..hi].partition_point(|&y| y < u);
        if j == hi {
            0
        } else {
            u64::from(self.suffix_w[j])
        }
    }
}

/// An ensemble bound to its training data, ready to predict.
pub struct ForestFit<F> {
    model: ForestModel<F>,
    tdata: TransformedDataset<F>,
    /// `[b][i]`: leaf of subject `i`'s own-time covariates in tree `b`.
    event_leaf: Vec<Vec<u16>>,
    /// Ascending distinct training event times.
    event_times: Vec<F>,
    /// Event subjects at each distinct event time.
    events_at: Vec<Vec<u32>>,
    risk: RiskTables<F>,
    /// Kernel bandwidth for hazard prediction (the full-sample bandwidth).
    hazard_bandwidth: F,
}

impl<F: Scalar> ForestFit<F> {
    pub fn new(model: ForestModel<F>, tdata: TransformedDataset<F>) -> Result<Self> {
        let n = tdata.len();
        for w in &model.resample_weights {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: w.len(),
                });
            }
        }
        if model.trees.is_empty() {
            return Err(Error::InvalidParameter("ensemble has no trees".into()));
        }
        let subjects = tdata.data().subjects();
        let mut event_times: Vec<F> = subjects
            .iter()
            .filter(|s| s.event())
            .map(|s| s.observed_time())
            .collect();
        event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        event_times.dedup();
        let mut events_at = vec![Vec::new(); event_times.len()];
        for (i, s) in subjects.iter().enumerate() {
            if s.event() {
                let e = event_times.partition_point(|&u| u < s.observed_time());
                events_at[e].push(i as u32);
            }
        }

        let event_leaf: Vec<Vec<u16>> = model
            .trees
            .par_iter()
            .map(|tree| {
                (0..n)
                    .map(|i| tree.route(tdata.event_x(i)) as u16)
                    .collect()
            })
            .collect();

        let risk = if tdata.data().all_static() {
            RiskTables::Static(build_static_tables(&model, &tdata))
        } else {
            build_dynamic_tables(&model, &tdata, &event_times)
        };

        let horizon = tdata.data().horizon();
        let policy = model.trees[0].meta().policy;
        let hazard_bandwidth = policy.bandwidth(lit(n as f64), horizon);
        Ok(ForestFit {
            model,
            tdata,
            event_leaf,
            event_times,
            events_at,
            risk,
            hazard_bandwidth,
        })
    }

    pub fn model(&self) -> &ForestModel<F> {
        &self.model
    }

    pub fn tdata(&self) -> &TransformedDataset<F> {
        &self.tdata
    }

    pub fn dim(&self) -> usize {
        self.tdata.dim()
    }

    pub fn horizon(&self) -> F {
        self.tdata.data().horizon()
    }

    fn check_dim(&self, path: &CovariatePath<F>) -> Result<()> {
        if path.dim() != self.tdata.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.tdata.dim(),
                got: path.dim(),
            });
        }
        Ok(())
    }

    /// Resample weight of subject `i` in tree `b`.
    #[inline]
    fn w(&self, b: usize, i: usize) -> u64 {
        u64::from(self.model.resample_weights[b][i])
    }

    #[inline]
    fn risk_count(&self, b: usize, e: usize, leaf: usize, u: F) -> u64 {
        match &self.risk {
            RiskTables::Static(tables) => {
                let k = self.tdata.grid().anchor(u);
                tables[b][k].at_risk(leaf, u)
            }
            RiskTables::Dynamic { counts, n_leaves } => counts[b][e * n_leaves[b] + leaf],
        }
    }

    /// `w_i(t, z)` for every training subject at a transformed query point.
    pub fn local_weights(&self, t: F, z: &[F]) -> LocalWeights<F> {
        let n = self.tdata.len();
        let b_cnt = self.model.trees.len();
        let leaves: Vec<usize> = self.model.trees.iter().map(|tr| tr.route(z)).collect();
        let mut weights = vec![F::zero(); n];
        let mut x = Vec::with_capacity(self.tdata.dim());
        for (i, w) in weights.iter_mut().enumerate() {
            self.tdata.training_x_at_into(i, t, &mut x);
            let mut acc = 0u64;
            for b in 0..b_cnt {
                if self.model.trees[b].route(&x) == leaves[b] {
                    acc += self.w(b, i);
                }
            }
            *w = lit::<F>(acc as f64) / lit(b_cnt as f64);
        }
        LocalWeights {
            t,
            z: z.to_vec(),
            weights,
        }
    }

    /// Ensemble hazard at `t` for a subject whose covariates at `t` come from
    /// `path`; `None` when every kernel-window term had an empty co-located
    /// risk set.
    pub fn predict_hazard(&self, path: &CovariatePath<F>, t: F) -> Result<Option<F>> {
        self.check_dim(path)?;
        let k = self.tdata.grid().anchor(t);
        let mut z = Vec::with_capacity(self.tdata.dim());
        self.tdata.transform_point_into(k, path.value_at(t), &mut z);
        self.hazard_at_transformed(&z, t)
    }

    /// `sum_i K_h(t' - Y_i) v0_i / v1_i` over the training events.
    pub fn hazard_at_transformed(&self, z: &[F], t: F) -> Result<Option<F>> {
        let horizon = self.tdata.data().horizon();
        let h = self.hazard_bandwidth;
        if horizon < h + h {
            return Err(Error::WindowTooNarrow {
                s: horizon.as_f64(),
                h: h.as_f64(),
            });
        }
        let t_eval = t.max(h).min(horizon - h);
        let leaves: Vec<usize> = self.model.trees.iter().map(|tr| tr.route(z)).collect();
        let lo = self.event_times.partition_point(|&u| u <= t_eval - h);
        let mut sum = F::zero();
        let mut any_term = false;
        let mut all_skipped = true;
        for e in lo..self.event_times.len() {
            let u = self.event_times[e];
            if u >= t_eval + h {
                break;
            }
            for &i in &self.events_at[e] {
                let i = i as usize;
                any_term = true;
                let mut v0 = 0u64;
                let mut v1 = 0u64;
                for (b, &leaf) in leaves.iter().enumerate() {
                    if usize::from(self.event_leaf[b][i]) == leaf {
                        v0 += self.w(b, i);
                    }
                    v1 += self.risk_count(b, e, leaf, u);
                }
                if v1 > 0 {
                    all_skipped = false;
                    let y = self.tdata.data().subjects()[i].observed_time();
                    sum +=
                        epanechnikov((t_eval - y) / h) / h * lit::<F>(v0 as f64) / lit(v1 as f64);
                }
            }
        }
        if any_term && all_skipped {
            Ok(None)
        } else {
            Ok(Some(sum))
        }
    }

    /// Ensemble survival probability at `t` along a covariate history.
    pub fn predict_survival(&self, path: &CovariatePath<F>, t: F) -> Result<(F, usize)> {
        let (curve, warnings) = self.survival_curve(path, &[t])?;
        Ok((curve[0], warnings))
    }

    /// Survival curve at ascending `times`; the second value counts event
    /// times whose co-located risk set was empty in every tree.
    pub fn survival_curve(&self, path: &CovariatePath<F>, times: &[F]) -> Result<(Vec<F>, usize)> {
        self.check_dim(path)?;
        let b_cnt = self.model.trees.len();
        let mut warnings = 0usize;
        let mut out = Vec::with_capacity(times.len());
        let mut acc = F::zero();
        let mut e = 0usize;
        let mut z = Vec::with_capacity(self.tdata.dim());
        for &t in times {
            while e < self.event_times.len() && self.event_times[e] <= t {
                let u = self.event_times[e];
                let k = self.tdata.grid().anchor(u);
                self.tdata.transform_point_into(k, path.value_at(u), &mut z);
                let mut v2 = 0u64;
                let mut v3 = 0u64;
                for b in 0..b_cnt {
                    let leaf = self.model.trees[b].route(&z);
                    v3 += self.risk_count(b, e, leaf, u);
                    for &i in &self.events_at[e] {
                        if usize::from(self.event_leaf[b][i as usize]) == leaf {
                            v2 += self.w(b, i as usize);
                        }
                    }
                }
                if v3 > 0 {
                    acc += lit::<F>(v2 as f64) / lit(v3 as f64);
                } else {
                    warnings += 1;
                }
                e += 1;
            }
            out.push((-acc).exp());
        }
        Ok((out, warnings))
    }
}

/// Static-covariate risk tables: per tree and grid anchor, subjects grouped
/// by leaf and sorted by observed time, with suffix resample weights.
fn build_static_tables<F: Scalar>(
    model: &ForestModel<F>,
    tdata: &TransformedDataset<F>,
) -> Vec<Vec<AnchorTable<F>>> {
    let grid = tdata.grid();
    let q = grid.len();
    let subjects = tdata.data().subjects();
    let p = tdata.dim();
    // anchor windows: members need Y >= lower edge of the anchor's window
    let mut window_lower = Vec::with_capacity(q);
    for k in 0..q {
        if k == 0 {
            window_lower.push(F::zero());
        } else {
            window_lower.push((grid.times()[k - 1] + grid.times()[k]) / lit(2.0));
        }
    }
    // per anchor: member subjects and their transformed covariates
    let mut members: Vec<Vec<u32>> = Vec::with_capacity(q);
    let mut member_x: Vec<Vec<F>> = Vec::with_capacity(q);
    for k in 0..q {
        let mut ids = Vec::new();
        let mut xs = Vec::new();
        let mut row = Vec::with_capacity(p);
        for (i, s) in subjects.iter().enumerate() {
            if s.observed_time() >= window_lower[k] {
                ids.push(i as u32);
                match tdata.x_at(k, i) {
                    Some(r) => xs.extend_from_slice(r),
                    None => {
                        // left the risk set before the grid time but inside
                        // the anchor window: transform its constant value
                        let raw = s.value_at(s.observed_time());
                        tdata.transform_point_into(k, raw, &mut row);
                        xs.extend_from_slice(&row);
                    }
                }
            }
        }
        members.push(ids);
        member_x.push(xs);
    }

    model
        .trees
        .par_iter()
        .enumerate()
        .map(|(b, tree)| {
            let weights = &model.resample_weights[b];
            let n_leaves = tree.n_leaves();
            (0..q)
                .map(|k| {
                    let ids = &members[k];
                    let xs = &member_x[k];
                    let mut entries: Vec<(u32, F, u32)> = Vec::new();
                    for (j, &i) in ids.iter().enumerate() {
                        let w = weights[i as usize];
                        if w == 0 {
                            continue;
                        }
                        let leaf = tree.route(&xs[j * p..(j + 1) * p]) as u32;
                        entries.push((leaf, subjects[i as usize].observed_time(), w));
                    }
                    entries
                        .sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()));
                    let mut offsets = vec![0u32; n_leaves + 1];
                    for &(leaf, _, _) in &entries {
                        offsets[leaf as usize + 1] += 1;
                    }
                    for l in 0..n_leaves {
                        offsets[l + 1] += offsets[l];
                    }
                    let ys: Vec<F> = entries.iter().map(|&(_, y, _)| y).collect();
                    let mut suffix_w = vec![0u32; entries.len()];
                    for l in 0..n_leaves {
                        let lo = offsets[l] as usize;
                        let hi = offsets[l + 1] as usize;
                        let mut acc = 0u32;
                        for j in (lo..hi).rev() {
                            acc += entries[j].2;
                            suffix_w[j] = acc;
                        }
                    }
                    AnchorTable {
                        offsets,
                        ys,
                        suffix_w,
                    }
                })
                .collect()
        })
        .collect()
}

/// Time-dependent risk tables: exact at-risk-in-leaf counts per tree at every
/// distinct training event time.
fn build_dynamic_tables<F: Scalar>(
    model: &ForestModel<F>,
    tdata: &TransformedDataset<F>,
    event_times: &[F],
) -> RiskTables<F> {
    let b_cnt = model.trees.len();
    let n_leaves: Vec<usize> = model.trees.iter().map(|t| t.n_leaves()).collect();
    let mut counts: Vec<Vec<u64>> = (0..b_cnt)
        .map(|b| vec![0u64; event_times.len() * n_leaves[b]])
        .collect();
    let subjects = tdata.data().subjects();
    let mut x = Vec::with_capacity(tdata.dim());
    for (e, &u) in event_times.iter().enumerate() {
        for (i, s) in subjects.iter().enumerate() {
            if s.observed_time() < u {
                continue;
            }
            tdata.training_x_at_into(i, u, &mut x);
            for b in 0..b_cnt {
                let w = model.resample_weights[b][i];
                if w == 0 {
                    continue;
                }
                let leaf = model.trees[b].route(&x);
                counts[b][e * n_leaves[b] + leaf] += u64::from(w);
            }
        }
    }
    RiskTables::Dynamic { counts, n_leaves }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CovariatePath, Dataset};
    use crate::tree::TreeFit;

    fn toy_tdata(n: usize, seed: u64, duplicate: usize) -> TransformedDataset<f64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let base: Vec<(Vec<f64>, f64, bool)> = (0..n)
            .map(|_| {
                let z = vec![next(), next(), next()];
                let scale = if z[0] > 0.5 { 0.4 } else { 1.2 };
                let y = (1e-3f64).max(-scale * (1.0 - next()).ln());
                (z, y, next() < 0.85)
            })
            .collect();
        let subjects: Vec<_> = (0..n * duplicate)
            .map(|i| {
                let (z, y, d) = &base[i % n];
                CovariatePath::constant(format!("{i}"), z.clone(), *y, *d).unwrap()
            })
            .collect();
        let data = Dataset::new(subjects, None).unwrap();
        let grid = crate::data::uncensored_quantile_grid(&data, 8).unwrap();
        TransformedDataset::transform(data, grid).unwrap()
    }

    fn policy(tdata: &TransformedDataset<f64>) -> BandwidthPolicy<f64> {
        BandwidthPolicy::global_default(tdata.data().uncensored_reference_time())
    }

    #[test]
    fn bootstrap_weights_sum_to_n() {
        let tdata = toy_tdata(40, 1, 1);
        let settings = ForestSettings {
            n_trees: 5,
            ..ForestSettings::defaults_for(3)
        };
        let model = fit_forest(&tdata, &policy(&tdata), &settings, 9).unwrap();
        for w in model.resample_weights() {
            assert_eq!(w.iter().map(|&x| x as usize).sum::<usize>(), 40);
        }
    }

    #[test]
    fn honest_halves_are_disjoint() {
        let tdata = toy_tdata(50, 2, 1);
        let settings = ForestSettings {
            n_trees: 4,
            resample_mode: ResampleMode::SubsampleHonest { fraction: 0.632 },
            ..ForestSettings::defaults_for(3)
        };
        let model = fit_forest(&tdata, &policy(&tdata), &settings, 3).unwrap();
        let splits = model.honest_split().unwrap();
        assert_eq!(splits.len(), 4);
        for (b, (i1, i2)) in splits.iter().enumerate() {
            for i in i1 {
                assert!(!i2.contains(i), "tree {b}: index {i} in both halves");
            }
            for (i, &w) in model.resample_weights()[b].iter().enumerate() {
                assert_eq!(w > 0, i2.contains(&(i as u32)));
            }
        }
    }

    #[test]
    fn same_seed_same_model() {
        let tdata = toy_tdata(40, 3, 1);
        let settings = ForestSettings {
            n_trees: 6,
            ..ForestSettings::defaults_for(3)
        };
        let a = fit_forest(&tdata, &policy(&tdata), &settings, 17).unwrap();
        let b = fit_forest(&tdata, &policy(&tdata), &settings, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn local_weights_match_per_tree_enumeration() {
        let tdata = toy_tdata(20, 4, 1);
        let settings = ForestSettings {
            n_trees: 3,
            n_min: 6,
            ..ForestSettings::defaults_for(3)
        };
        let model = fit_forest(&tdata, &policy(&tdata), &settings, 5).unwrap();
        let trees = model.trees().to_vec();
        let weights = model.resample_weights().to_vec();
        let fit = ForestFit::new(model, tdata.clone()).unwrap();
        let t = tdata.grid().times()[2];
        let z = vec![0.3, 0.7, 0.5];
        let lw = fit.local_weights(t, &z);
        let max_w = weights
            .iter()
            .map(|w| w.iter().copied().max().unwrap())
            .max()
            .unwrap() as f64;
        for i in 0..20 {
            let mut expect = 0.0;
            let mut x = Vec::new();
            tdata.training_x_at_into(i, t, &mut x);
            for (b, tree) in trees.iter().enumerate() {
                if tree.route(&x) == tree.route(&z) {
                    expect += weights[b][i] as f64;
                }
            }
            expect /= trees.len() as f64;
            assert_eq!(lw.weights[i], expect);
            assert!(lw.weights[i] >= 0.0 && lw.weights[i] <= max_w);
        }
    }

    #[test]
    fn single_tree_reduction_matches_tree_survival() {
        let tdata = toy_tdata(60, 5, 1);
        let pol = policy(&tdata);
        let settings = ForestSettings {
            n_trees: 1,
            feature_subset: 3,
            n_min: 10,
            ..ForestSettings::defaults_for(3)
        };
        let model =
            fit_forest_with_resamples(&tdata, &pol, &settings, vec![vec![1; 60]], 7).unwrap();
        let tree = model.trees()[0].clone();
        let forest = ForestFit::new(model, tdata.clone()).unwrap();
        let tree_fit = TreeFit::new(tree, tdata.clone(), None).unwrap();
        let path = CovariatePath::constant("new", vec![0.4, 0.2, 0.9], 5.0, false).unwrap();
        let times: Vec<f64> = (1..40).map(|i| i as f64 * 0.05).collect();
        let (fs, fw) = forest.survival_curve(&path, &times).unwrap();
        let (ts, tw) = tree_fit.survival_curve(&path, &times).unwrap();
        assert_eq!(fw, tw);
        for (a, b) in fs.iter().zip(&ts) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn duplication_invariance_of_predictions() {
        // The partition is held fixed; replacing every subject by two copies
        // (resample weights carried along) must not move the estimating
        // equations.
        let settings = ForestSettings {
            n_trees: 4,
            n_min: 8,
            ..ForestSettings::defaults_for(3)
        };
        let t1 = toy_tdata(30, 6, 1);
        let t2 = toy_tdata(30, 6, 2);
        let p1 = policy(&t1);
        let mut resamples1 = Vec::new();
        let mut resamples2 = Vec::new();
        let mut rng = crate::rng::stream(11, "res", 0);
        for _ in 0..4 {
            let mut w = vec![0u32; 30];
            for _ in 0..30 {
                w[rng.random_range(0..30)] += 1;
            }
            resamples1.push(w.clone());
            let mut w2 = w.clone();
            w2.extend_from_slice(&w);
            resamples2.push(w2);
        }
        let m1 = fit_forest_with_resamples(&t1, &p1, &settings, resamples1, 13).unwrap();
        let m2 = ForestModel {
            trees: m1.trees.clone(),
            resample_weights: resamples2,
            honest_split: None,
            mode: ResampleMode::Bootstrap,
            seed: 13,
        };
        let f1 = ForestFit::new(m1, t1).unwrap();
        let f2 = ForestFit::new(m2, t2).unwrap();
        let path = CovariatePath::constant("new", vec![0.5, 0.1, 0.6], 9.0, false).unwrap();
        for t in [0.2, 0.6, 1.1] {
            let (a, _) = f1.predict_survival(&path, t).unwrap();
            let (b, _) = f2.predict_survival(&path, t).unwrap();
            assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
            let ha = f1.predict_hazard(&path, t).unwrap();
            let hb = f2.predict_hazard(&path, t).unwrap();
            match (ha, hb) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
                (a, b) => assert_eq!(a.is_none(), b.is_none()),
            }
        }
    }

    #[test]
    fn survival_monotone_and_tree_order_invariant() {
        let tdata = toy_tdata(50, 7, 1);
        let settings = ForestSettings {
            n_trees: 5,
            n_min: 10,
            ..ForestSettings::defaults_for(3)
        };
        let model = fit_forest(&tdata, &policy(&tdata), &settings, 23).unwrap();
        let mut reordered = model.clone();
        reordered.trees.reverse();
        reordered.resample_weights.reverse();
        let f1 = ForestFit::new(model, tdata.clone()).unwrap();
        let f2 = ForestFit::new(reordered, tdata.clone()).unwrap();
        let path = CovariatePath::constant("new", vec![0.2, 0.8, 0.4], 9.0, false).unwrap();
        let times: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let (c1, _) = f1.survival_curve(&path, &times).unwrap();
        let (c2, _) = f2.survival_curve(&path, &times).unwrap();
        for w in c1.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        for (a, b) in c1.iter().zip(&c2) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(c1.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn dynamic_path_tables_agree_with_static_on_constant_histories() {
        // same subjects, once as single segments (static fast path), once as
        // two identical segments (forces the dynamic tables)
        let n = 40;
        let mut state = 8u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let rows: Vec<(Vec<f64>, f64, bool)> = (0..n)
            .map(|_| {
                let z = vec![next(), next()];
                (z, 0.05 + next() * 2.0, next() < 0.9)
            })
            .collect();
        let make = |split_segments: bool| {
            let subjects: Vec<_> = rows
                .iter()
                .enumerate()
                .map(|(i, (z, y, d))| {
                    if split_segments && *y > 0.1 {
                        CovariatePath::new(
                            format!("{i}"),
                            vec![
                                crate::data::Segment {
                                    start: 0.0,
                                    stop: y / 2.0,
                                    values: z.clone(),
                                },
                                crate::data::Segment {
                                    start: y / 2.0,
                                    stop: *y,
                                    values: z.clone(),
                                },
                            ],
                            *d,
                        )
                        .unwrap()
                    } else {
                        CovariatePath::constant(format!("{i}"), z.clone(), *y, *d).unwrap()
                    }
                })
                .collect();
            let data = Dataset::new(subjects, Some(1.8)).unwrap();
            let grid = crate::data::uncensored_quantile_grid(&data, 6).unwrap();
            TransformedDataset::transform(data, grid).unwrap()
        };
        let t_static = make(false);
        let t_dynamic = make(true);
        assert!(t_static.data().all_static());
        assert!(!t_dynamic.data().all_static());
        let settings = ForestSettings {
            n_trees: 3,
            n_min: 8,
            ..ForestSettings::defaults_for(2)
        };
        let resamples: Vec<Vec<u32>> = vec![vec![1; n]; 3];
        let m1 =
            fit_forest_with_resamples(&t_static, &policy(&t_static), &settings, resamples.clone(), 5)
                .unwrap();
        let m2 =
            fit_forest_with_resamples(&t_dynamic, &policy(&t_dynamic), &settings, resamples, 5)
                .unwrap();
        let f1 = ForestFit::new(m1, t_static).unwrap();
        let f2 = ForestFit::new(m2, t_dynamic).unwrap();
        let path = CovariatePath::constant("new", vec![0.3, 0.6], 2.0, false).unwrap();
        for t in [0.1, 0.5, 1.0, 1.5] {
            let (a, _) = f1.predict_survival(&path, t).unwrap();
            let (b, _) = f2.predict_survival(&path, t).unwrap();
            assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
        }
    }
}
