//! Breadth-first tree growth.
//!
//! Nodes are processed in label order. A node with baseline weight at least
//! `n_min` is searched for the candidate split (coordinate, threshold)
//! maximizing the criterion among thresholds that leave both children with
//! baseline weight at least `n_min / 2`; candidate thresholds are the
//! midpoints of consecutive distinct baseline values observed in the node,
//! thinned to `max_thresholds` per coordinate. Score ties resolve to the
//! lowest coordinate, then the smallest threshold.
//!
//! Per node and coordinate the search runs in one pass over the node's
//! members: the at-risk mass left of each threshold comes from a merge walk
//! of the sorted member lists, and the event mass from prefix sums of kernel
//! weights in event-value order.

use rand::Rng;

use crate::data::TransformedDataset;
use crate::error::{Error, Result};
use crate::kernel::{epanechnikov, extended_hazard_rank, BandwidthPolicy, NodeHazardCurve};
use crate::scalar::{lit, Scalar};
use crate::tree::{FitMeta, NodeKind, PartitionTree, SplitCriterion, SplitRule, TreeNode};

/// Growth parameters.
#[derive(Debug, Clone)]
pub struct GrowSettings {
    /// Minimum baseline weight for a node to be splittable.
    pub n_min: usize,
    pub criterion: SplitCriterion,
    /// Number of coordinates drawn (without replacement) per split; `None`
    /// searches all coordinates.
    pub feature_subset: Option<usize>,
    /// Cap on candidate thresholds per coordinate, quantile-thinned.
    pub max_thresholds: usize,
    /// Recorded in the fit metadata; the caller's stream seed.
    pub seed: u64,
}

impl Default for GrowSettings {
    fn default() -> Self {
        GrowSettings {
            n_min: crate::DEFAULT_MIN_NODE,
            criterion: SplitCriterion::DeltaIcon,
            feature_subset: None,
            max_thresholds: 64,
            seed: 0,
        }
    }
}

/// Sorted member orders shared by every tree grown on one transformed
/// dataset; resamples only reweight subjects, they never reorder them.
pub struct GrowthCache<'a, F> {
    pub(crate) tdata: &'a TransformedDataset<F>,
    /// `[k][c]`: at-risk subjects at grid time `k` sorted by `X_c(t_k)`.
    grid_order: Vec<Vec<Vec<u32>>>,
    /// `[c]`: all subjects sorted by baseline `X_c`.
    baseline_order: Vec<Vec<u32>>,
    /// `[c]`: event subjects sorted by own-time `X_c`.
    event_order: Vec<Vec<u32>>,
    y: Vec<F>,
}

impl<'a, F: Scalar> GrowthCache<'a, F> {
    pub fn new(tdata: &'a TransformedDataset<F>) -> Self {
        let n = tdata.len();
        let p = tdata.dim();
        let q = tdata.grid().len();
        let argsort = |ids: &[u32], value: &dyn Fn(u32) -> F| -> Vec<u32> {
            let mut v: Vec<u32> = ids.to_vec();
            v.sort_by(|&a, &b| {
                value(a)
                    .partial_cmp(&value(b))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            v
        };
        let all: Vec<u32> = (0..n as u32).collect();
        let events: Vec<u32> = (0..n as u32)
            .filter(|&i| tdata.data().subjects()[i as usize].event())
            .collect();
        let mut grid_order = Vec::with_capacity(q);
        for k in 0..q {
            let mut per_c = Vec::with_capacity(p);
            for c in 0..p {
                per_c.push(argsort(tdata.at_risk(k), &|i| {
                    tdata.x_at(k, i as usize).unwrap()[c]
                }));
            }
            grid_order.push(per_c);
        }
        let baseline_order = (0..p)
            .map(|c| argsort(&all, &|i| tdata.baseline_x(i as usize)[c]))
            .collect();
        let event_order = (0..p)
            .map(|c| argsort(&events, &|i| tdata.event_x(i as usize)[c]))
            .collect();
        let y = tdata
            .data()
            .subjects()
            .iter()
            .map(|s| s.observed_time())
            .collect();
        GrowthCache {
            tdata,
            grid_order,
            baseline_order,
            event_order,
            y,
        }
    }
}

struct NodeWork {
    /// `[k][c]` at-risk members sorted by `X_c(t_k)`.
    grid_members: Vec<Vec<Vec<u32>>>,
    /// `[c]` members sorted by baseline `X_c`.
    baseline: Vec<Vec<u32>>,
    /// `[c]` event members sorted by own-time `X_c`.
    events: Vec<Vec<u32>>,
    /// All members whose own-time covariates fall in the node.
    own_time: Vec<u32>,
}

/// Per-node estimates kept after the work lists are dropped.
struct NodeStats<F> {
    f: Vec<F>,
    s: Vec<F>,
    h: F,
    t_eval: Vec<F>,
    baseline_weight: F,
}

struct BestSplit<F> {
    score: F,
    coordinate: usize,
    threshold: F,
}

struct Scratch<F> {
    side: Vec<u8>,
    cum: Vec<F>,
    sl: Vec<F>,
    thresholds: Vec<F>,
    wl_base: Vec<F>,
    eidx: Vec<usize>,
}

/// Grows an unpruned tree on the full sample.
pub fn grow<F: Scalar, R: Rng>(
    tdata: &TransformedDataset<F>,
    policy: &BandwidthPolicy<F>,
    settings: &GrowSettings,
    rng: &mut R,
) -> Result<PartitionTree<F>> {
    let cache = GrowthCache::new(tdata);
    grow_cached(&cache, policy, settings, None, rng)
}

/// Grows a tree with per-subject resample weights (`None` = unit weights).
/// Subjects with zero weight take no part in the fit.
pub fn grow_weighted<F: Scalar, R: Rng>(
    cache: &GrowthCache<'_, F>,
    policy: &BandwidthPolicy<F>,
    settings: &GrowSettings,
    weights: Option<&[F]>,
    rng: &mut R,
) -> Result<PartitionTree<F>> {
    grow_cached(cache, policy, settings, weights, rng)
}

fn grow_cached<F: Scalar, R: Rng>(
    cache: &GrowthCache<'_, F>,
    policy: &BandwidthPolicy<F>,
    settings: &GrowSettings,
    weights: Option<&[F]>,
    rng: &mut R,
) -> Result<PartitionTree<F>> {
    let tdata = cache.tdata;
    let n = tdata.len();
    let p = tdata.dim();
    if settings.n_min < 2 {
        return Err(Error::InvalidParameter("n_min must be at least 2".into()));
    }
    if let Some(m) = settings.feature_subset {
        if m == 0 || m > p {
            return Err(Error::InvalidParameter(format!(
                "feature subset size must be in 1..={p}"
            )));
        }
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
        if w.iter().any(|v| !v.is_finite() || *v < F::zero()) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
    }

    let w_of = |i: u32| weights.map_or(F::one(), |w| w[i as usize]);
    let active = |i: u32| w_of(i) > F::zero();
    let total_weight: F = (0..n as u32).map(w_of).sum();
    if !(total_weight > F::zero()) {
        return Err(Error::InvalidParameter("all weights are zero".into()));
    }

    let filter = |ids: &[u32]| -> Vec<u32> { ids.iter().copied().filter(|&i| active(i)).collect() };
    let root_work = NodeWork {
        grid_members: cache
            .grid_order
            .iter()
            .map(|per_c| per_c.iter().map(|ids| filter(ids)).collect())
            .collect(),
        baseline: cache.baseline_order.iter().map(|ids| filter(ids)).collect(),
        events: cache.event_order.iter().map(|ids| filter(ids)).collect(),
        own_time: filter(&(0..n as u32).collect::<Vec<_>>()),
    };

    let n_min_w = lit::<F>(settings.n_min as f64);
    let half_min = n_min_w / lit(2.0);
    let horizon = tdata.data().horizon();

    let root_stats = node_stats(cache, &root_work, policy, weights, horizon, total_weight)?;
    let mut nodes: Vec<TreeNode<F>> = vec![TreeNode {
        label: 1,
        parent: None,
        baseline_count: root_stats.baseline_weight,
        kind: NodeKind::Leaf { leaf: 0 },
    }];
    let mut stats: Vec<NodeStats<F>> = vec![root_stats];
    let mut works: Vec<Option<NodeWork>> = vec![Some(root_work)];
    let mut live: Vec<bool> = vec![true];

    let mut scratch = Scratch {
        side: vec![0u8; n],
        cum: Vec::new(),
        sl: Vec::new(),
        thresholds: Vec::new(),
        wl_base: Vec::new(),
        eidx: Vec::new(),
    };

    let mut idx = 0;
    while idx < nodes.len() {
        let splittable = stats[idx].baseline_weight >= n_min_w;
        if !splittable {
            works[idx] = None;
            idx += 1;
            continue;
        }
        let coords: Vec<usize> = match settings.feature_subset {
            Some(m) => {
                let mut sample = rand::seq::index::sample(rng, p, m).into_vec();
                sample.sort_unstable();
                sample
            }
            None => (0..p).collect(),
        };
        let work = works[idx].take().expect("work available for queued node");
        let global_ctx = if settings.criterion == SplitCriterion::GlobalIcon {
            Some(GlobalCtx::build(tdata, &stats, &live, idx))
        } else {
            None
        };
        let best = search_split(
            cache,
            &work,
            &stats[idx],
            &coords,
            settings,
            half_min,
            weights,
            global_ctx.as_ref(),
            &mut scratch,
        );
        if let Some(best) = best {
            let (left_work, right_work) = split_work(cache, work, &best, &mut scratch);
            let left_stats = node_stats(cache, &left_work, policy, weights, horizon, total_weight)?;
            let right_stats =
                node_stats(cache, &right_work, policy, weights, horizon, total_weight)?;
            let left_idx = nodes.len();
            let right_idx = nodes.len() + 1;
            nodes[idx].kind = NodeKind::Internal {
                rule: SplitRule {
                    coordinate: best.coordinate,
                    threshold: best.threshold,
                },
                left: left_idx,
                right: right_idx,
            };
            live[idx] = false;
            nodes.push(TreeNode {
                label: left_idx + 1,
                parent: Some(idx),
                baseline_count: left_stats.baseline_weight,
                kind: NodeKind::Leaf { leaf: 0 },
            });
            nodes.push(TreeNode {
                label: right_idx + 1,
                parent: Some(idx),
                baseline_count: right_stats.baseline_weight,
                kind: NodeKind::Leaf { leaf: 0 },
            });
            stats.push(left_stats);
            stats.push(right_stats);
            works.push(Some(left_work));
            works.push(Some(right_work));
            live.push(true);
            live.push(true);
        }
        works[idx] = None;
        idx += 1;
    }

    // Assign leaf ordinals in label order and build the leaf curves.
    let mut leaf_curves = Vec::new();
    let mut leaf_nodes = Vec::new();
    for (i, node) in nodes.iter_mut().enumerate() {
        if let NodeKind::Leaf { leaf } = &mut node.kind {
            *leaf = leaf_curves.len();
            let st = &stats[i];
            let f_n: Vec<F> = st.f.iter().map(|&v| v / total_weight).collect();
            let s_n: Vec<F> = st.s.iter().map(|&v| v / total_weight).collect();
            leaf_curves.push(NodeHazardCurve::from_masses(f_n, s_n, st.h));
            leaf_nodes.push(i);
        }
    }
    Ok(PartitionTree::from_parts(
        nodes,
        leaf_curves,
        leaf_nodes,
        FitMeta {
            grid: tdata.grid().clone(),
            policy: *policy,
            n_min: settings.n_min,
            criterion: settings.criterion,
            seed: settings.seed,
        },
    ))
}

fn node_stats<F: Scalar>(
    cache: &GrowthCache<'_, F>,
    work: &NodeWork,
    policy: &BandwidthPolicy<F>,
    weights: Option<&[F]>,
    horizon: F,
    _total_weight: F,
) -> Result<NodeStats<F>> {
    let w_of = |i: u32| weights.map_or(F::one(), |w| w[i as usize]);
    let n_tau: F = work.own_time.iter().map(|&i| w_of(i)).sum();
    let h = policy.bandwidth(n_tau, horizon);
    if horizon < h + h {
        return Err(Error::WindowTooNarrow {
            s: horizon.as_f64(),
            h: h.as_f64(),
        });
    }
    let grid = cache.tdata.grid();
    let t_eval: Vec<F> = grid
        .times()
        .iter()
        .map(|&t| t.max(h).min(horizon - h))
        .collect();
    let f: Vec<F> = t_eval
        .iter()
        .map(|&te| {
            work.events[0]
                .iter()
                .map(|&i| w_of(i) * epanechnikov((te - cache.y[i as usize]) / h) / h)
                .sum()
        })
        .collect();
    let s: Vec<F> = (0..grid.len())
        .map(|k| work.grid_members[k][0].iter().map(|&i| w_of(i)).sum())
        .collect();
    let baseline_weight: F = work.baseline[0].iter().map(|&i| w_of(i)).sum();
    Ok(NodeStats {
        f,
        s,
        h,
        t_eval,
        baseline_weight,
    })
}

#[allow(clippy::too_many_arguments)]
fn search_split<F: Scalar>(
    cache: &GrowthCache<'_, F>,
    work: &NodeWork,
    stats: &NodeStats<F>,
    coords: &[usize],
    settings: &GrowSettings,
    half_min: F,
    weights: Option<&[F]>,
    global_ctx: Option<&GlobalCtx<F>>,
    scratch: &mut Scratch<F>,
) -> Option<BestSplit<F>> {
    let tdata = cache.tdata;
    let grid = tdata.grid();
    let q = grid.len();
    let w_of = |i: u32| weights.map_or(F::one(), |w| w[i as usize]);
    let mut best: Option<BestSplit<F>> = None;

    for &c in coords {
        // Candidate thresholds: midpoints of consecutive distinct baseline values.
        scratch.thresholds.clear();
        {
            let mut prev: Option<F> = None;
            for &i in &work.baseline[c] {
                let v = tdata.baseline_x(i as usize)[c];
                if let Some(pv) = prev {
                    if v > pv {
                        scratch.thresholds.push((pv + v) / lit(2.0));
                    }
                }
                prev = Some(v);
            }
        }
        if scratch.thresholds.len() > settings.max_thresholds {
            let len = scratch.thresholds.len();
            let m = settings.max_thresholds;
            let mut thinned = Vec::with_capacity(m);
            for i in 0..m {
                let pos = ((i as f64 + 0.5) * len as f64 / m as f64) as usize;
                let t = scratch.thresholds[pos.min(len - 1)];
                if thinned.last() != Some(&t) {
                    thinned.push(t);
                }
            }
            scratch.thresholds = thinned;
        }
        let t_cnt = scratch.thresholds.len();
        if t_cnt == 0 {
            continue;
        }

        // Baseline weight left of each threshold.
        scratch.wl_base.clear();
        scratch.wl_base.resize(t_cnt, F::zero());
        {
            let mut acc = F::zero();
            let mut ti = 0;
            for &i in &work.baseline[c] {
                let v = tdata.baseline_x(i as usize)[c];
                while ti < t_cnt && scratch.thresholds[ti] < v {
                    scratch.wl_base[ti] = acc;
                    ti += 1;
                }
                acc += w_of(i);
            }
            while ti < t_cnt {
                scratch.wl_base[ti] = acc;
                ti += 1;
            }
        }
        let base_total = stats.baseline_weight;
        if !(0..t_cnt).any(|t| {
            scratch.wl_base[t] >= half_min && base_total - scratch.wl_base[t] >= half_min
        }) {
            continue;
        }

        // Event kernel mass left of each threshold, per grid time: prefix
        // sums in event-value order.
        let ev = &work.events[c];
        let e_cnt = ev.len();
        scratch.cum.clear();
        scratch.cum.resize((e_cnt + 1) * q, F::zero());
        for (j, &i) in ev.iter().enumerate() {
            let y = cache.y[i as usize];
            let w = w_of(i);
            let (prev, cur) = scratch.cum.split_at_mut((j + 1) * q);
            let prev = &prev[j * q..];
            for k in 0..q {
                cur[k] = prev[k] + w * epanechnikov((stats.t_eval[k] - y) / stats.h) / stats.h;
            }
        }
        scratch.eidx.clear();
        scratch.eidx.resize(t_cnt, 0);
        {
            let mut ti = 0;
            for (j, &i) in ev.iter().enumerate() {
                let v = tdata.event_x(i as usize)[c];
                while ti < t_cnt && scratch.thresholds[ti] < v {
                    scratch.eidx[ti] = j;
                    ti += 1;
                }
            }
            while ti < t_cnt {
                scratch.eidx[ti] = e_cnt;
                ti += 1;
            }
        }

        // At-risk weight left of each threshold, per grid time.
        scratch.sl.clear();
        scratch.sl.resize(t_cnt * q, F::zero());
        for k in 0..q {
            let mut acc = F::zero();
            let mut ti = 0;
            for &i in &work.grid_members[k][c] {
                let v = tdata.x_at(k, i as usize).unwrap()[c];
                while ti < t_cnt && scratch.thresholds[ti] < v {
                    scratch.sl[ti * q + k] = acc;
                    ti += 1;
                }
                acc += w_of(i);
            }
            while ti < t_cnt {
                scratch.sl[ti * q + k] = acc;
                ti += 1;
            }
        }

        for t in 0..t_cnt {
            let wl = scratch.wl_base[t];
            if !(wl >= half_min && base_total - wl >= half_min) {
                continue;
            }
            let e_left = scratch.eidx[t];
            let score = match global_ctx {
                None => {
                    // concordance gain within the node
                    let mut acc = F::zero();
                    for k in 0..q {
                        let denom = stats.f[k] * stats.s[k];
                        if denom > F::zero() {
                            let fl = scratch.cum[e_left * q + k];
                            let sl = scratch.sl[t * q + k];
                            let fr = stats.f[k] - fl;
                            let sr = stats.s[k] - sl;
                            acc += grid.weights()[k] * (fl * sr - fr * sl).abs() / denom;
                        }
                    }
                    acc
                }
                Some(ctx) => {
                    let mut acc = F::zero();
                    for k in 0..q {
                        let den = ctx.total_f[k] * ctx.total_s[k];
                        if den > F::zero() {
                            let fl = scratch.cum[e_left * q + k];
                            let sl = scratch.sl[t * q + k];
                            let fr = stats.f[k] - fl;
                            let sr = stats.s[k] - sl;
                            let num = ctx.num_others[k]
                                + ctx.cross(k, fl, sl)
                                + ctx.cross(k, fr, sr)
                                + pair_num(fl, sl, fr, sr)
                                + lit::<F>(0.5) * (fl * sl + fr * sr);
                            acc += grid.weights()[k] * num / den;
                        }
                    }
                    acc / ctx.weight_norm
                }
            };
            match &best {
                Some(b) if !(score > b.score) => {}
                _ => {
                    best = Some(BestSplit {
                        score,
                        coordinate: c,
                        threshold: scratch.thresholds[t],
                    })
                }
            }
        }
    }
    best
}

/// Concordance numerator of the ordered pair of two sibling candidates.
fn pair_num<F: Scalar>(fl: F, sl: F, fr: F, sr: F) -> F {
    let rl = extended_hazard_rank(fl, sl);
    let rr = extended_hazard_rank(fr, sr);
    match (rl, rr) {
        (Some(a), Some(b)) => {
            if a > b {
                fl * sr
            } else if b > a {
                fr * sl
            } else {
                lit::<F>(0.5) * (fl * sr + fr * sl)
            }
        }
        _ => F::zero(),
    }
}

/// Sorted rank groups of the live leaves other than the node being split,
/// with prefix sums, for whole-tree concordance scoring of candidates.
struct GlobalCtx<F> {
    groups: Vec<Vec<(F, F, F)>>,
    prefix_f: Vec<Vec<F>>,
    prefix_s: Vec<Vec<F>>,
    num_others: Vec<F>,
    total_f: Vec<F>,
    total_s: Vec<F>,
    weight_norm: F,
}

impl<F: Scalar> GlobalCtx<F> {
    fn build(
        tdata: &TransformedDataset<F>,
        stats: &[NodeStats<F>],
        live: &[bool],
        skip: usize,
    ) -> Self {
        let grid = tdata.grid();
        let q = grid.len();
        let mut groups = Vec::with_capacity(q);
        let mut prefix_f = Vec::with_capacity(q);
        let mut prefix_s = Vec::with_capacity(q);
        let mut num_others = Vec::with_capacity(q);
        let mut total_f = Vec::with_capacity(q);
        let mut total_s = Vec::with_capacity(q);
        for k in 0..q {
            let mut pts: Vec<(F, F, F)> = Vec::new();
            let mut tf = F::zero();
            let mut ts = F::zero();
            for (i, st) in stats.iter().enumerate() {
                if !live[i] {
                    continue;
                }
                tf += st.f[k];
                ts += st.s[k];
                if i == skip {
                    continue;
                }
                if let Some(rank) = extended_hazard_rank(st.f[k], st.s[k]) {
                    pts.push((rank, st.f[k], st.s[k]));
                }
            }
            pts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            // merge ties
            let mut merged: Vec<(F, F, F)> = Vec::with_capacity(pts.len());
            for p in pts {
                match merged.last_mut() {
                    Some(g) if g.0 == p.0 => {
                        g.1 += p.1;
                        g.2 += p.2;
                    }
                    _ => merged.push(p),
                }
            }
            let mut pf = Vec::with_capacity(merged.len() + 1);
            let mut ps = Vec::with_capacity(merged.len() + 1);
            pf.push(F::zero());
            ps.push(F::zero());
            let mut num = F::zero();
            let mut seen_s = F::zero();
            let os: F = merged.iter().map(|g| g.2).sum();
            for g in &merged {
                num += g.1 * (os - seen_s - g.2) + lit::<F>(0.5) * g.1 * g.2;
                seen_s += g.2;
                pf.push(*pf.last().unwrap() + g.1);
                ps.push(*ps.last().unwrap() + g.2);
            }
            groups.push(merged);
            prefix_f.push(pf);
            prefix_s.push(ps);
            num_others.push(num);
            total_f.push(tf);
            total_s.push(ts);
        }
        let mut weight_norm = F::zero();
        for k in 0..q {
            if total_f[k] * total_s[k] > F::zero() {
                weight_norm += grid.weights()[k];
            }
        }
        if !(weight_norm > F::zero()) {
            weight_norm = F::one();
        }
        GlobalCtx {
            groups,
            prefix_f,
            prefix_s,
            num_others,
            total_f,
            total_s,
            weight_norm,
        }
    }

    /// Concordance numerator terms of one candidate child against the other
    /// live leaves at grid time `k`.
    fn cross(&self, k: usize, f: F, s: F) -> F {
        let rank = match extended_hazard_rank(f, s) {
            Some(r) => r,
            None => return F::zero(),
        };
        let groups = &self.groups[k];
        let lo = groups.partition_point(|g| g.0 > rank);
        let hi = groups.partition_point(|g| g.0 >= rank);
        let pf = &self.prefix_f[k];
        let ps = &self.prefix_s[k];
        let total_s_others = *ps.last().unwrap();
        let f_above = pf[lo];
        let s_below = total_s_others - ps[hi];
        let f_eq = pf[hi] - pf[lo];
        let s_eq = ps[hi] - ps[lo];
        f * s_below + f_above * s + lit::<F>(0.5) * (f * s_eq + f_eq * s)
    }
}

fn split_work<F: Scalar>(
    cache: &GrowthCache<'_, F>,
    work: NodeWork,
    best: &BestSplit<F>,
    scratch: &mut Scratch<F>,
) -> (NodeWork, NodeWork) {
    let tdata = cache.tdata;
    let c = best.coordinate;
    let thr = best.threshold;
    let p = tdata.dim();
    let q = work.grid_members.len();

    let partition = |ids: &[u32], side: &[u8]| -> (Vec<u32>, Vec<u32>) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &i in ids {
            if side[i as usize] == 1 {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        (left, right)
    };

    // Baseline lists split on the baseline value of the split coordinate.
    for &i in &work.baseline[c] {
        scratch.side[i as usize] = (tdata.baseline_x(i as usize)[c] <= thr) as u8;
    }
    let mut bl_left = Vec::with_capacity(p);
    let mut bl_right = Vec::with_capacity(p);
    for cc in 0..p {
        let (l, r) = partition(&work.baseline[cc], &scratch.side);
        bl_left.push(l);
        bl_right.push(r);
    }

    // Own-time and event lists split on own-time values.
    for &i in &work.own_time {
        scratch.side[i as usize] = (tdata.event_x(i as usize)[c] <= thr) as u8;
    }
    let (own_left, own_right) = partition(&work.own_time, &scratch.side);
    let mut ev_left = Vec::with_capacity(p);
    let mut ev_right = Vec::with_capacity(p);
    for cc in 0..p {
        let (l, r) = partition(&work.events[cc], &scratch.side);
        ev_left.push(l);
        ev_right.push(r);
    }

    // Grid lists split on the value at each grid time.
    let mut gm_left = Vec::with_capacity(q);
    let mut gm_right = Vec::with_capacity(q);
    for k in 0..q {
        for &i in &work.grid_members[k][0] {
            scratch.side[i as usize] =
                (tdata.x_at(k, i as usize).unwrap()[c] <= thr) as u8;
        }
        let mut per_c_left = Vec::with_capacity(p);
        let mut per_c_right = Vec::with_capacity(p);
        for cc in 0..p {
            let (l, r) = partition(&work.grid_members[k][cc], &scratch.side);
            per_c_left.push(l);
            per_c_right.push(r);
        }
        gm_left.push(per_c_left);
        gm_right.push(per_c_right);
    }

    (
        NodeWork {
            grid_members: gm_left,
            baseline: bl_left,
            events: ev_left,
            own_time: own_left,
        },
        NodeWork {
            grid_members: gm_right,
            baseline: bl_right,
            events: ev_right,
            own_time: own_right,
        },
    )
}
