//! Concordance-complexity pruning and cross-validated subtree selection.
//!
//! Pruning trades integrated concordance against tree size through
//! `ICON_alpha(T) = ICON(T) - alpha * |T|`. Candidate subtrees are produced
//! by weakest-link collapse, one split at a time: at each step the internal
//! node whose two children are leaves and whose collapse loses the least
//! concordance is merged, yielding one candidate per size `K..1`. The
//! threshold sequence `alpha_1 < ... < alpha_Q` marks where the optimal
//! candidate changes, and the interval representatives
//! `beta_q = sqrt(alpha_q * alpha_{q+1})` (with `beta_Q = alpha_Q`) are the
//! values scored by cross-validation.

use serde::{Deserialize, Serialize};

use crate::concordance::{con_t_ranked, weighted_icon, MassPoint};
use crate::data::TransformedDataset;
use crate::error::{Error, Result};
use crate::kernel::{epanechnikov, extended_hazard_rank, BandwidthPolicy, NodeHazardCurve};
use crate::rng::stream;
use crate::scalar::{lit, Scalar};
use crate::tree::grow::{grow_weighted, GrowSettings, GrowthCache};
use crate::tree::{FitMeta, NodeKind, PartitionTree, TreeNode};

/// One entry of the weakest-link sequence: the subtree obtained by collapsing
/// `collapsed` (in order) into leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneCandidate<F> {
    pub n_leaves: usize,
    pub icon: F,
    pub collapsed: Vec<usize>,
}

/// The candidate subtrees with their concordance-complexity thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneSequence<F> {
    /// Candidates in decreasing size, from the unpruned tree to the root.
    pub candidates: Vec<PruneCandidate<F>>,
    /// Strictly increasing thresholds `alpha_1..alpha_Q` (`alpha_0 = 0`).
    pub alphas: Vec<F>,
    /// Interval representatives scored by cross-validation.
    pub betas: Vec<F>,
    /// `optimal[q]` = candidate index optimal on `[alpha_q, alpha_{q+1})`.
    optimal: Vec<usize>,
    /// Per-node `(f, s)` mass curves of the tree being pruned.
    pub(crate) node_masses: Vec<(Vec<F>, Vec<F>)>,
    /// Per-node bandwidths used for those masses.
    pub(crate) node_h: Vec<F>,
}

impl<F: Scalar> PruneSequence<F> {
    /// The optimal subtree for a complexity value, right-continuous in
    /// `alpha` and piecewise constant on the threshold intervals.
    pub fn subtree_at(&self, alpha: F) -> &PruneCandidate<F> {
        let q = self.alphas.partition_point(|&a| a <= alpha);
        &self.candidates[self.optimal[q]]
    }

    /// Candidate maximizing `icon - beta * n_leaves`; ties resolve to the
    /// smallest subtree.
    pub fn best_for(&self, beta: F) -> usize {
        let mut best = 0;
        let mut best_score = F::neg_infinity();
        let mut best_size = usize::MAX;
        for (j, cand) in self.candidates.iter().enumerate() {
            let score = cand.icon - beta * lit(cand.n_leaves as f64);
            if score > best_score || (score == best_score && cand.n_leaves < best_size) {
                best = j;
                best_score = score;
                best_size = cand.n_leaves;
            }
        }
        best
    }

    pub(crate) fn from_candidates(
        candidates: Vec<PruneCandidate<F>>,
        node_masses: Vec<(Vec<F>, Vec<F>)>,
        node_h: Vec<F>,
    ) -> Self {
        let (alphas, optimal) = alpha_recursion(&candidates);
        let q = alphas.len();
        let mut betas = Vec::with_capacity(q);
        for i in 0..q {
            if i + 1 < q {
                betas.push((alphas[i] * alphas[i + 1]).sqrt());
            } else {
                betas.push(alphas[i]);
            }
        }
        PruneSequence {
            candidates,
            alphas,
            betas,
            optimal,
            node_masses,
            node_h,
        }
    }
}

/// The threshold recursion: starting from the candidate with the largest
/// concordance, repeatedly find the smaller candidate with the least
/// concordance loss per removed leaf.
fn alpha_recursion<F: Scalar>(candidates: &[PruneCandidate<F>]) -> (Vec<F>, Vec<usize>) {
    let argmax0 = {
        let mut best = 0;
        for (j, cand) in candidates.iter().enumerate() {
            let b = &candidates[best];
            if cand.icon > b.icon || (cand.icon == b.icon && cand.n_leaves < b.n_leaves) {
                best = j;
            }
        }
        best
    };
    let mut optimal = vec![argmax0];
    let mut alphas = Vec::new();
    let mut cur = argmax0;
    while candidates[cur].n_leaves > 1 {
        let mut best_alpha = F::infinity();
        let mut best_idx = None;
        for (j, cand) in candidates.iter().enumerate() {
            if cand.n_leaves >= candidates[cur].n_leaves {
                continue;
            }
            let a = (candidates[cur].icon - cand.icon)
                / lit((candidates[cur].n_leaves - cand.n_leaves) as f64);
            let better = match best_idx {
                None => true,
                Some(b) => {
                    a < best_alpha
                        || (a == best_alpha && cand.n_leaves < candidates[b as usize].n_leaves)
                }
            };
            if better {
                best_alpha = a;
                best_idx = Some(j);
            }
        }
        match best_idx {
            Some(j) => {
                alphas.push(best_alpha);
                optimal.push(j);
                cur = j;
            }
            None => break,
        }
    }
    (alphas, optimal)
}

/// `(f, s)` mass curves for every node of the tree. Under a global bandwidth
/// internal-node masses are the sums of their descendant leaves; under the
/// node-adaptive policy the event mass is re-smoothed with each node's own
/// bandwidth.
fn per_node_masses<F: Scalar>(
    tree: &PartitionTree<F>,
    tdata: &TransformedDataset<F>,
    weights: Option<&[F]>,
) -> Result<(Vec<(Vec<F>, Vec<F>)>, Vec<F>)> {
    let q = tree.grid().len();
    let n_nodes = tree.nodes().len();
    let mut masses: Vec<(Vec<F>, Vec<F>)> = vec![(vec![F::zero(); q], vec![F::zero(); q]); n_nodes];
    for (i, node) in tree.nodes().iter().enumerate().rev() {
        match node.kind {
            NodeKind::Leaf { leaf } => {
                let curve = tree.leaf_curve(leaf);
                masses[i] = (curve.f_star.clone(), curve.s_star.clone());
            }
            NodeKind::Internal { left, right, .. } => {
                debug_assert!(left > i && right > i);
                for k in 0..q {
                    masses[i].0[k] = masses[left].0[k] + masses[right].0[k];
                    masses[i].1[k] = masses[left].1[k] + masses[right].1[k];
                }
            }
        }
    }
    let node_h = match tree.meta().policy {
        BandwidthPolicy::GlobalFixed { .. } => {
            let h = tree
                .meta()
                .policy
                .bandwidth(F::one(), tdata.data().horizon());
            vec![h; n_nodes]
        }
        BandwidthPolicy::NodeAdaptive { .. } => {
            recompute_adaptive_event_masses(tree, tdata, weights, &mut masses)?
        }
    };
    Ok((masses, node_h))
}

/// Node-adaptive bandwidths make the event mass non-additive across a merge;
/// recompute it per node with that node's own bandwidth.
fn recompute_adaptive_event_masses<F: Scalar>(
    tree: &PartitionTree<F>,
    tdata: &TransformedDataset<F>,
    weights: Option<&[F]>,
    masses: &mut [(Vec<F>, Vec<F>)],
) -> Result<Vec<F>> {
    let n = tdata.len();
    let horizon = tdata.data().horizon();
    let w_of = |i: usize| weights.map_or(F::one(), |w| w[i]);
    let total_weight: F = (0..n).map(w_of).sum();
    // own-time counts of every node, via each subject's own-time leaf
    let mut n_tau = vec![F::zero(); tree.nodes().len()];
    let mut leaf_of = vec![0usize; n];
    for i in 0..n {
        if w_of(i) <= F::zero() {
            continue;
        }
        let leaf = tree.route(tdata.event_x(i));
        leaf_of[i] = tree.leaf_node(leaf);
        let mut node = Some(leaf_of[i]);
        while let Some(x) = node {
            n_tau[x] += w_of(i);
            node = tree.nodes()[x].parent;
        }
    }
    let h_of: Vec<F> = (0..tree.nodes().len())
        .map(|x| tree.meta().policy.bandwidth(n_tau[x], horizon))
        .collect();
    for (x, mass) in masses.iter_mut().enumerate() {
        let h = h_of[x];
        if horizon < h + h {
            return Err(Error::WindowTooNarrow {
                s: horizon.as_f64(),
                h: h.as_f64(),
            });
        }
        for v in mass.0.iter_mut() {
            *v = F::zero();
        }
    }
    // accumulate event kernels into every ancestor with its own bandwidth
    let times = tree.grid().times().to_vec();
    for i in 0..n {
        let w = w_of(i);
        if w <= F::zero() || !tdata.data().subjects()[i].event() {
            continue;
        }
        let y = tdata.data().subjects()[i].observed_time();
        let mut node = Some(leaf_of[i]);
        while let Some(x) = node {
            let h = h_of[x];
            for (k, &t) in times.iter().enumerate() {
                let te = t.max(h).min(horizon - h);
                masses[x].0[k] += w * epanechnikov((te - y) / h) / h / total_weight;
            }
            node = tree.nodes()[x].parent;
        }
    }
    Ok(h_of)
}

/// Per-step context: sorted rank groups of the current frontier with prefix
/// sums, for O(log M) evaluation of a candidate twig collapse.
struct StepCtx<F> {
    groups: Vec<Vec<(F, F, F)>>,
    prefix_f: Vec<Vec<F>>,
    prefix_s: Vec<Vec<F>>,
    num_cur: Vec<F>,
    total_f: Vec<F>,
    total_s: Vec<F>,
    weights: Vec<F>,
}

impl<F: Scalar> StepCtx<F> {
    fn build(
        grid_weights: &[F],
        frontier: &[usize],
        masses: &[(Vec<F>, Vec<F>)],
        q: usize,
    ) -> Self {
        let mut groups = Vec::with_capacity(q);
        let mut prefix_f = Vec::with_capacity(q);
        let mut prefix_s = Vec::with_capacity(q);
        let mut num_cur = Vec::with_capacity(q);
        let mut total_f = Vec::with_capacity(q);
        let mut total_s = Vec::with_capacity(q);
        for k in 0..q {
            let mut pts: Vec<(F, F, F)> = Vec::new();
            let mut tf = F::zero();
            let mut ts = F::zero();
            for &x in frontier {
                let f = masses[x].0[k];
                let s = masses[x].1[k];
                tf += f;
                ts += s;
                if let Some(rank) = extended_hazard_rank(f, s) {
                    pts.push((rank, f, s));
                }
            }
            pts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
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
            let mut pf = vec![F::zero()];
            let mut ps = vec![F::zero()];
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
            num_cur.push(num);
            total_f.push(tf);
            total_s.push(ts);
        }
        StepCtx {
            groups,
            prefix_f,
            prefix_s,
            num_cur,
            total_f,
            total_s,
            weights: grid_weights.to_vec(),
        }
    }

    /// Pair terms of `u` against the whole frontier at `k` (including `u`'s
    /// own tie group; the caller subtracts self terms as needed).
    fn cross_all(&self, k: usize, rank: Option<F>, f: F, s: F) -> F {
        let rank = match rank {
            Some(r) => r,
            None => return F::zero(),
        };
        let groups = &self.groups[k];
        let lo = groups.partition_point(|g| g.0 > rank);
        let hi = groups.partition_point(|g| g.0 >= rank);
        let pf = &self.prefix_f[k];
        let ps = &self.prefix_s[k];
        let total_s = *ps.last().unwrap();
        let f_above = pf[lo];
        let s_below = total_s - ps[hi];
        let f_eq = pf[hi] - pf[lo];
        let s_eq = ps[hi] - ps[lo];
        f * s_below + f_above * s + lit::<F>(0.5) * (f * s_eq + f_eq * s)
    }

    /// Integrated concordance of the frontier with leaves `a`, `b` replaced
    /// by their merged parent. `None` when no grid point stays defined.
    #[allow(clippy::too_many_arguments)]
    fn collapse_icon(
        &self,
        q: usize,
        ma: &(Vec<F>, Vec<F>),
        mb: &(Vec<F>, Vec<F>),
        mm: &(Vec<F>, Vec<F>),
    ) -> Option<F> {
        let half = lit::<F>(0.5);
        let mut acc = F::zero();
        let mut norm = F::zero();
        for k in 0..q {
            let (fa, sa) = (ma.0[k], ma.1[k]);
            let (fb, sb) = (mb.0[k], mb.1[k]);
            let (fm, sm) = (mm.0[k], mm.1[k]);
            let ra = extended_hazard_rank(fa, sa);
            let rb = extended_hazard_rank(fb, sb);
            let rm = extended_hazard_rank(fm, sm);
            let tf = self.total_f[k] - fa - fb + fm;
            let ts = self.total_s[k] - sa - sb + sm;
            if !(tf > F::zero()) || !(ts > F::zero()) {
                continue;
            }
            // members a, b leave the frontier: remove their pairs against the
            // rest, their mutual pair having been subtracted twice
            let cross_a = {
                let raw = self.cross_all(k, ra, fa, sa);
                // own tie group contains a itself: drop the self tie terms
                if ra.is_some() {
                    raw - half * (fa * sa + fa * sa)
                } else {
                    raw
                }
            };
            let cross_b = {
                let raw = self.cross_all(k, rb, fb, sb);
                if rb.is_some() {
                    raw - half * (fb * sb + fb * sb)
                } else {
                    raw
                }
            };
            let pab = pair_terms(ra, fa, sa, rb, fb, sb);
            let pma = pair_terms(rm, fm, sm, ra, fa, sa);
            let pmb = pair_terms(rm, fm, sm, rb, fb, sb);
            let cross_m = self.cross_all(k, rm, fm, sm) - pma - pmb;
            let num = self.num_cur[k] - cross_a - half * fa * sa - cross_b - half * fb * sb + pab
                + cross_m
                + half * fm * sm;
            acc += self.weights[k] * num / (tf * ts);
            norm += self.weights[k];
        }
        if norm > F::zero() {
            Some(acc / norm)
        } else {
            None
        }
    }
}

/// Ordered-pair concordance numerator terms between two units.
fn pair_terms<F: Scalar>(ru: Option<F>, fu: F, su: F, rv: Option<F>, fv: F, sv: F) -> F {
    match (ru, rv) {
        (Some(a), Some(b)) => {
            if a > b {
                fu * sv
            } else if b > a {
                fv * su
            } else {
                lit::<F>(0.5) * (fu * sv + fv * su)
            }
        }
        _ => F::zero(),
    }
}

/// Builds the weakest-link candidate sequence of `tree` with the threshold
/// and representative values for cross-validation.
pub fn prune_sequence<F: Scalar>(
    tree: &PartitionTree<F>,
    tdata: &TransformedDataset<F>,
    weights: Option<&[F]>,
) -> Result<PruneSequence<F>> {
    let grid = tree.grid();
    let q = grid.len();
    let (node_masses, node_h) = per_node_masses(tree, tdata, weights)?;
    let n_nodes = tree.nodes().len();

    let mut is_frontier = vec![false; n_nodes];
    for leaf in 0..tree.n_leaves() {
        is_frontier[tree.leaf_node(leaf)] = true;
    }
    let frontier_list = |is_frontier: &[bool]| -> Vec<usize> {
        (0..n_nodes).filter(|&x| is_frontier[x]).collect()
    };
    let exact_icon = |frontier: &[usize]| -> Result<F> {
        let mut con = Vec::with_capacity(q);
        for k in 0..q {
            let pts: Vec<MassPoint<F>> = frontier
                .iter()
                .filter_map(|&x| MassPoint::from_masses(node_masses[x].0[k], node_masses[x].1[k]))
                .collect();
            con.push(con_t_ranked(&pts));
        }
        weighted_icon(grid, &con)
    };

    let mut collapsed: Vec<usize> = Vec::new();
    let mut n_leaves = tree.n_leaves();
    let mut candidates = vec![PruneCandidate {
        n_leaves,
        icon: exact_icon(&frontier_list(&is_frontier))?,
        collapsed: Vec::new(),
    }];

    while n_leaves > 1 {
        let frontier = frontier_list(&is_frontier);
        let ctx = StepCtx::build(grid.weights(), &frontier, &node_masses, q);
        let mut best: Option<(F, usize)> = None;
        for (x, node) in tree.nodes().iter().enumerate() {
            if is_frontier[x] {
                continue;
            }
            if let NodeKind::Internal { left, right, .. } = node.kind {
                if !(is_frontier[left] && is_frontier[right]) {
                    continue;
                }
                let icon = ctx
                    .collapse_icon(q, &node_masses[left], &node_masses[right], &node_masses[x])
                    .unwrap_or(F::neg_infinity());
                let better = match best {
                    None => true,
                    Some((b, _)) => icon > b,
                };
                if better {
                    best = Some((icon, x));
                }
            }
        }
        let (_, x) = best.expect("a tree with more than one leaf has a twig");
        if let NodeKind::Internal { left, right, .. } = tree.nodes()[x].kind {
            is_frontier[left] = false;
            is_frontier[right] = false;
        }
        is_frontier[x] = true;
        collapsed.push(x);
        n_leaves -= 1;
        candidates.push(PruneCandidate {
            n_leaves,
            icon: exact_icon(&frontier_list(&is_frontier))?,
            collapsed: collapsed.clone(),
        });
    }

    Ok(PruneSequence::from_candidates(candidates, node_masses, node_h))
}

/// Cross-validation trace reported alongside the selected tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport<F> {
    pub alphas: Vec<F>,
    pub betas: Vec<F>,
    /// `(n_leaves, icon)` of every full-data candidate.
    pub candidate_trace: Vec<(usize, F)>,
    /// Held-out scores, `fold_scores[fold][beta]`.
    pub fold_scores: Vec<Vec<Option<F>>>,
    pub mean_scores: Vec<Option<F>>,
    pub chosen_beta: Option<F>,
    pub skipped_folds: Vec<usize>,
    pub final_n_leaves: usize,
    pub final_icon: F,
}

/// Grows on the training folds, prunes at each representative `beta`,
/// scores the pruned trees on the held-out folds, and returns the full-data
/// tree pruned at the best `beta`.
pub fn select_by_cv<F: Scalar>(
    tdata: &TransformedDataset<F>,
    policy: &BandwidthPolicy<F>,
    settings: &GrowSettings,
    folds: usize,
    seed: u64,
) -> Result<(PartitionTree<F>, PruneSequence<F>, CvReport<F>)> {
    if folds < 2 {
        return Err(Error::InvalidParameter(
            "cross-validation needs at least 2 folds".into(),
        ));
    }
    let n = tdata.len();
    let cache = GrowthCache::new(tdata);
    let mut settings = settings.clone();
    settings.seed = seed;
    let full = grow_weighted(
        &cache,
        policy,
        &settings,
        None,
        &mut stream(seed, "tree-grow", 0),
    )?;
    let full_seq = prune_sequence(&full, tdata, None)?;
    let candidate_trace: Vec<(usize, F)> = full_seq
        .candidates
        .iter()
        .map(|c| (c.n_leaves, c.icon))
        .collect();

    if full_seq.betas.is_empty() {
        let report = CvReport {
            alphas: Vec::new(),
            betas: Vec::new(),
            candidate_trace,
            fold_scores: Vec::new(),
            mean_scores: Vec::new(),
            chosen_beta: None,
            skipped_folds: Vec::new(),
            final_n_leaves: full.n_leaves(),
            final_icon: full_seq.candidates[0].icon,
        };
        return Ok((full.clone(), full_seq, report));
    }

    // shuffled round-robin fold assignment
    let mut order: Vec<usize> = (0..n).collect();
    {
        use rand::seq::SliceRandom;
        order.shuffle(&mut stream(seed, "cv-folds", 0));
    }
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    let betas = full_seq.betas.clone();
    let mut fold_scores: Vec<Vec<Option<F>>> = Vec::with_capacity(folds);
    let mut skipped_folds = Vec::new();
    for j in 0..folds {
        let train_w: Vec<F> = (0..n)
            .map(|i| if fold_of[i] == j { F::zero() } else { F::one() })
            .collect();
        let train_events = (0..n)
            .any(|i| fold_of[i] != j && tdata.data().subjects()[i].event());
        let held_events = (0..n)
            .any(|i| fold_of[i] == j && tdata.data().subjects()[i].event());
        if !train_events || !held_events {
            skipped_folds.push(j);
            fold_scores.push(vec![None; betas.len()]);
            continue;
        }
        let fold_tree = grow_weighted(
            &cache,
            policy,
            &settings,
            Some(&train_w),
            &mut stream(seed, "tree-grow", 1 + j as u64),
        )?;
        let fold_seq = prune_sequence(&fold_tree, tdata, Some(&train_w))?;
        let held: Vec<usize> = (0..n).filter(|&i| fold_of[i] == j).collect();
        let evaluator = HeldoutScorer::new(&fold_tree, &fold_seq, tdata, &held);
        let scores: Vec<Option<F>> = betas
            .iter()
            .map(|&beta| {
                let cand = &fold_seq.candidates[fold_seq.best_for(beta)];
                evaluator.icon_of(cand)
            })
            .collect();
        fold_scores.push(scores);
    }
    if skipped_folds.len() == folds {
        return Err(Error::AllFoldsSkipped);
    }

    let mut mean_scores: Vec<Option<F>> = Vec::with_capacity(betas.len());
    for bi in 0..betas.len() {
        let vals: Vec<F> = fold_scores.iter().filter_map(|f| f[bi]).collect();
        if vals.is_empty() {
            mean_scores.push(None);
        } else {
            let sum: F = vals.iter().copied().sum();
            mean_scores.push(Some(sum / lit(vals.len() as f64)));
        }
    }
    // best mean score; ties resolve to the larger beta (smaller tree)
    let mut chosen: Option<(usize, F)> = None;
    for (bi, m) in mean_scores.iter().enumerate() {
        if let Some(v) = m {
            let better = match chosen {
                None => true,
                Some((_, b)) => *v >= b,
            };
            if better {
                chosen = Some((bi, *v));
            }
        }
    }
    let (chosen_idx, _) = chosen.ok_or(Error::AllFoldsSkipped)?;
    let beta_star = betas[chosen_idx];
    let final_cand_idx = full_seq.best_for(beta_star);
    let final_tree = materialize(&full, &full_seq, final_cand_idx)?;
    let report = CvReport {
        alphas: full_seq.alphas.clone(),
        betas,
        candidate_trace,
        fold_scores,
        mean_scores,
        chosen_beta: Some(beta_star),
        skipped_folds,
        final_n_leaves: final_tree.n_leaves(),
        final_icon: full_seq.candidates[final_cand_idx].icon,
    };
    Ok((final_tree, full_seq, report))
}

/// Scores pruned candidates of one fold tree on the held-out subjects:
/// held-out case/control masses per frontier node, ranked by the training
/// hazard.
struct HeldoutScorer<'a, F> {
    tree: &'a PartitionTree<F>,
    seq: &'a PruneSequence<F>,
    tdata: &'a TransformedDataset<F>,
    /// at-risk held-out subjects per grid time, with their full-tree leaf
    risk_routes: Vec<Vec<(u32, u32)>>,
    /// held-out events: (subject, full-tree leaf at own time)
    event_routes: Vec<(u32, u32)>,
}

impl<'a, F: Scalar> HeldoutScorer<'a, F> {
    fn new(
        tree: &'a PartitionTree<F>,
        seq: &'a PruneSequence<F>,
        tdata: &'a TransformedDataset<F>,
        held: &[usize],
    ) -> Self {
        let q = tree.grid().len();
        let mut risk_routes = Vec::with_capacity(q);
        for k in 0..q {
            let mut routes = Vec::new();
            for &i in held {
                if let Some(x) = tdata.x_at(k, i) {
                    routes.push((i as u32, tree.route(x) as u32));
                }
            }
            risk_routes.push(routes);
        }
        let event_routes: Vec<(u32, u32)> = held
            .iter()
            .filter(|&&i| tdata.data().subjects()[i].event())
            .map(|&i| (i as u32, tree.route(tdata.event_x(i)) as u32))
            .collect();
        HeldoutScorer {
            tree,
            seq,
            tdata,
            risk_routes,
            event_routes,
        }
    }

    fn icon_of(&self, cand: &PruneCandidate<F>) -> Option<F> {
        let grid = self.tree.grid();
        let q = grid.len();
        let horizon = self.tdata.data().horizon();
        // representative frontier node of each full-tree leaf
        let in_collapsed: Vec<bool> = {
            let mut v = vec![false; self.tree.nodes().len()];
            for &x in &cand.collapsed {
                v[x] = true;
            }
            v
        };
        let mut rep = Vec::with_capacity(self.tree.n_leaves());
        for leaf in 0..self.tree.n_leaves() {
            let mut node = self.tree.leaf_node(leaf);
            let mut top = node;
            while let Some(parent) = self.tree.nodes()[node].parent {
                if in_collapsed[parent] {
                    top = parent;
                }
                node = parent;
            }
            rep.push(top);
        }
        // frontier node -> dense index
        let mut frontier: Vec<usize> = rep.clone();
        frontier.sort_unstable();
        frontier.dedup();
        let dense_of = |x: usize| frontier.binary_search(&x).unwrap();

        let m = frontier.len();
        // training ranks per frontier node per grid time
        let masses = &self.seq.node_masses;
        // held-out events are smoothed with each node's training bandwidth
        let h_of: Vec<F> = frontier.iter().map(|&x| self.seq.node_h[x]).collect();

        let mut f_ho = vec![F::zero(); m * q];
        let mut s_ho = vec![F::zero(); m * q];
        for (k, routes) in self.risk_routes.iter().enumerate() {
            for &(_, leaf) in routes {
                let d = dense_of(rep[leaf as usize]);
                s_ho[d * q + k] += F::one();
            }
        }
        for &(i, leaf) in &self.event_routes {
            let d = dense_of(rep[leaf as usize]);
            let y = self.tdata.data().subjects()[i as usize].observed_time();
            let h = h_of[d];
            for (k, &t) in grid.times().iter().enumerate() {
                let te = t.max(h).min(horizon - h);
                f_ho[d * q + k] += epanechnikov((te - y) / h) / h;
            }
        }

        let mut con = Vec::with_capacity(q);
        for k in 0..q {
            let pts: Vec<MassPoint<F>> = (0..m)
                .filter_map(|d| {
                    let x = frontier[d];
                    let rank = extended_hazard_rank(masses[x].0[k], masses[x].1[k])?;
                    let f = f_ho[d * q + k];
                    let s = s_ho[d * q + k];
                    Some(MassPoint { rank, f, s })
                })
                .collect();
            con.push(con_t_ranked(&pts));
        }
        weighted_icon(grid, &con).ok()
    }
}

/// Applies a collapse set to the grown tree: breadth-first relabeling, leaf
/// curves of collapsed nodes taken from the per-node mass curves.
fn materialize<F: Scalar>(
    full: &PartitionTree<F>,
    seq: &PruneSequence<F>,
    cand_idx: usize,
) -> Result<PartitionTree<F>> {
    let cand = &seq.candidates[cand_idx];
    let mut in_collapsed = vec![false; full.nodes().len()];
    for &x in &cand.collapsed {
        in_collapsed[x] = true;
    }
    let grid_len = full.grid().len();
    let mut nodes: Vec<TreeNode<F>> = Vec::new();
    let mut leaf_curves: Vec<NodeHazardCurve<F>> = Vec::new();
    let mut leaf_nodes: Vec<usize> = Vec::new();
    // queue of (old node, new parent)
    let mut queue: std::collections::VecDeque<(usize, Option<usize>)> =
        std::collections::VecDeque::new();
    queue.push_back((0, None));
    while let Some((old, parent)) = queue.pop_front() {
        let new_idx = nodes.len();
        let old_node = &full.nodes()[old];
        let is_leaf = in_collapsed[old] || matches!(old_node.kind, NodeKind::Leaf { .. });
        let kind = if is_leaf {
            let leaf = leaf_curves.len();
            let (f, s) = &seq.node_masses[old];
            let h = seq.node_h[old];
            leaf_curves.push(NodeHazardCurve::from_masses(f.clone(), s.clone(), h));
            leaf_nodes.push(new_idx);
            NodeKind::Leaf { leaf }
        } else {
            match old_node.kind {
                NodeKind::Internal { rule, left, right } => {
                    // children indices patched once they are popped
                    queue.push_back((left, Some(new_idx)));
                    queue.push_back((right, Some(new_idx)));
                    NodeKind::Internal {
                        rule,
                        left: usize::MAX,
                        right: usize::MAX,
                    }
                }
                NodeKind::Leaf { .. } => unreachable!(),
            }
        };
        nodes.push(TreeNode {
            label: new_idx + 1,
            parent,
            baseline_count: old_node.baseline_count,
            kind,
        });
        if let Some(p) = parent {
            if let NodeKind::Internal { left, right, .. } = &mut nodes[p].kind {
                if *left == usize::MAX {
                    *left = new_idx;
                } else {
                    *right = new_idx;
                }
            }
        }
    }
    debug_assert_eq!(leaf_curves.len(), cand.n_leaves);
    debug_assert!(leaf_curves.iter().all(|c| c.len() == grid_len));
    Ok(PartitionTree::from_parts(
        nodes,
        leaf_curves,
        leaf_nodes,
        FitMeta {
            seed: full.meta().seed,
            ..full.meta().clone()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CovariatePath, Dataset};
    use crate::tree::grow::grow;
    use crate::tree::SplitCriterion;

    fn candidates(vals: &[(usize, f64)]) -> Vec<PruneCandidate<f64>> {
        vals.iter()
            .map(|&(n_leaves, icon)| PruneCandidate {
                n_leaves,
                icon,
                collapsed: Vec::new(),
            })
            .collect()
    }

    #[test]
    fn alpha_recursion_hand_example() {
        // sizes 3, 2, 1 with icons 0.57, 0.55, 0.50
        let cands = candidates(&[(3, 0.57), (2, 0.55), (1, 0.50)]);
        let seq = PruneSequence::from_candidates(cands, Vec::new(), Vec::new());
        assert_eq!(seq.alphas.len(), 2);
        assert!((seq.alphas[0] - 0.02).abs() < 1e-15);
        assert!((seq.alphas[1] - 0.05).abs() < 1e-15);
        // at alpha = 0 the largest candidate wins
        assert_eq!(seq.subtree_at(0.0).n_leaves, 3);
        assert_eq!(seq.subtree_at(0.02).n_leaves, 2); // right-continuous
        assert_eq!(seq.subtree_at(0.03).n_leaves, 2);
        assert_eq!(seq.subtree_at(seq.alphas[1]).n_leaves, 1);
        assert_eq!(seq.subtree_at(9.0).n_leaves, 1);
        // betas: sqrt(0.02 * 0.05), then alpha_Q
        assert!((seq.betas[0] - (0.02f64 * 0.05).sqrt()).abs() < 1e-15);
        assert_eq!(seq.betas[1], seq.alphas[1]);
        // best_for agrees with the threshold map
        assert_eq!(seq.candidates[seq.best_for(0.01)].n_leaves, 3);
        assert_eq!(seq.candidates[seq.best_for(seq.betas[0])].n_leaves, 2);
        assert_eq!(seq.candidates[seq.best_for(0.06)].n_leaves, 1);
    }

    #[test]
    fn singleton_sequence() {
        let cands = candidates(&[(1, 0.5)]);
        let seq = PruneSequence::from_candidates(cands, Vec::new(), Vec::new());
        assert!(seq.alphas.is_empty());
        assert!(seq.betas.is_empty());
        assert_eq!(seq.subtree_at(0.0).n_leaves, 1);
    }

    fn signal_tdata(n: usize, seed: u64) -> TransformedDataset<f64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let subjects: Vec<_> = (0..n)
            .map(|i| {
                let z0 = next();
                let z1 = next();
                let scale = if z0 > 0.5 { 0.3 } else { 1.2 };
                let y = (1e-3f64).max(-scale * (1.0 - next()).ln());
                CovariatePath::constant(format!("{i}"), vec![z0, z1], y, true).unwrap()
            })
            .collect();
        let data = Dataset::new(subjects, None).unwrap();
        let grid = crate::data::uncensored_quantile_grid(&data, 10).unwrap();
        TransformedDataset::transform(data, grid).unwrap()
    }

    #[test]
    fn prune_sequence_on_grown_tree() {
        let tdata = signal_tdata(150, 77);
        let policy = BandwidthPolicy::global_default(tdata.data().uncensored_reference_time());
        let settings = GrowSettings {
            n_min: 12,
            ..Default::default()
        };
        let tree = grow(&tdata, &policy, &settings, &mut crate::rng::stream(5, "g", 0)).unwrap();
        assert!(tree.n_leaves() >= 3, "test needs a non-trivial tree");
        let seq = prune_sequence(&tree, &tdata, None).unwrap();
        // every size from K down to 1
        let sizes: Vec<usize> = seq.candidates.iter().map(|c| c.n_leaves).collect();
        let expect: Vec<usize> = (1..=tree.n_leaves()).rev().collect();
        assert_eq!(sizes, expect);
        // icons non-increasing as the tree shrinks (global bandwidth)
        for w in seq.candidates.windows(2) {
            assert!(w[1].icon <= w[0].icon + 1e-12);
        }
        assert_eq!(seq.candidates.last().unwrap().icon, 0.5);
        // alphas strictly increasing and positive
        for w in seq.alphas.windows(2) {
            assert!(w[0] < w[1]);
        }
        if !seq.alphas.is_empty() {
            assert!(seq.alphas[0] > 0.0);
        }
        // alpha = 0 selects the largest candidate
        assert_eq!(seq.subtree_at(0.0).n_leaves, tree.n_leaves());
    }

    #[test]
    fn incremental_collapse_matches_exact() {
        let tdata = signal_tdata(120, 13);
        let policy = BandwidthPolicy::global_default(tdata.data().uncensored_reference_time());
        let settings = GrowSettings {
            n_min: 10,
            ..Default::default()
        };
        let tree = grow(&tdata, &policy, &settings, &mut crate::rng::stream(6, "g", 0)).unwrap();
        if tree.n_leaves() < 3 {
            return;
        }
        let (masses, _) = per_node_masses(&tree, &tdata, None).unwrap();
        let q = tree.grid().len();
        let frontier: Vec<usize> = (0..tree.n_leaves()).map(|l| tree.leaf_node(l)).collect();
        let ctx = StepCtx::build(tree.grid().weights(), &frontier, &masses, q);
        for (x, node) in tree.nodes().iter().enumerate() {
            if let NodeKind::Internal { left, right, .. } = node.kind {
                let lf = frontier.contains(&left) && frontier.contains(&right);
                if !lf {
                    continue;
                }
                let inc = ctx
                    .collapse_icon(q, &masses[left], &masses[right], &masses[x])
                    .unwrap();
                // oracle: recompute from scratch
                let mut new_frontier = frontier.clone();
                new_frontier.retain(|&v| v != left && v != right);
                new_frontier.push(x);
                let mut con = Vec::new();
                for k in 0..q {
                    let pts: Vec<MassPoint<f64>> = new_frontier
                        .iter()
                        .filter_map(|&v| MassPoint::from_masses(masses[v].0[k], masses[v].1[k]))
                        .collect();
                    con.push(con_t_ranked(&pts));
                }
                let exact = weighted_icon(tree.grid(), &con).unwrap();
                assert!((inc - exact).abs() < 1e-12, "{inc} vs {exact}");
            }
        }
    }

    #[test]
    fn cv_runs_and_is_deterministic() {
        let tdata = signal_tdata(120, 55);
        let policy = BandwidthPolicy::global_default(tdata.data().uncensored_reference_time());
        let settings = GrowSettings {
            n_min: 12,
            criterion: SplitCriterion::DeltaIcon,
            ..Default::default()
        };
        let (t1, _, r1) = select_by_cv(&tdata, &policy, &settings, 5, 42).unwrap();
        let (t2, _, r2) = select_by_cv(&tdata, &policy, &settings, 5, 42).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(r1.chosen_beta, r2.chosen_beta);
        assert!(t1.n_leaves() >= 1);
        // final icon equals the selected candidate's icon recomputed
        let report = t1.concordance().unwrap();
        assert!((report.icon - r1.final_icon).abs() < 1e-9);
    }

    #[test]
    fn materialized_tree_routes_like_collapsed_original() {
        let tdata = signal_tdata(150, 21);
        let policy = BandwidthPolicy::global_default(tdata.data().uncensored_reference_time());
        let settings = GrowSettings {
            n_min: 10,
            ..Default::default()
        };
        let tree = grow(&tdata, &policy, &settings, &mut crate::rng::stream(8, "g", 0)).unwrap();
        if tree.n_leaves() < 3 {
            return;
        }
        let seq = prune_sequence(&tree, &tdata, None).unwrap();
        let cand_idx = 1; // one collapse applied
        let pruned = materialize(&tree, &seq, cand_idx).unwrap();
        assert_eq!(pruned.n_leaves(), tree.n_leaves() - 1);
        // the pruned tree's own concordance equals the candidate icon
        let report = pruned.concordance().unwrap();
        assert!((report.icon - seq.candidates[cand_idx].icon).abs() < 1e-9);
        let mut state = 3u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..200 {
            let x = [next(), next()];
            let _ = pruned.route(&x); // routes resolve to exactly one leaf
        }
    }
}
