//! Generalized time-dependent ROC curves and concordance measures.
//!
//! At a fixed time `t` the survivor population is scored by a marker; a
//! subject failing at `t` is a case, a subject surviving past `t` is a
//! control. For a partition-valued marker each node contributes a case mass
//! `f` (smoothed event density) and a control mass `s` (at-risk mass), and the
//! concordance
//!
//! `CON_t = [sum_{j,k} I(rank_j > rank_k) f_j s_k + 0.5 sum_{rank_j = rank_k} f_j s_k]
//!          / [sum_j f_j * sum_k s_k]`
//!
//! is the probability that a random case outranks a random control, ties
//! counted half. It equals the area under the rank-interpolated ROC curve in
//! which each node is a linear segment of width `s` and height `f`, placed in
//! decreasing rank order.
//!
//! Nodes with event mass on an empty risk set rank as infinite hazard
//! (vertical ROC segments); nodes with no mass at all carry no information
//! and are dropped.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::TimeGrid;
use crate::error::{Error, Result};
use crate::kernel::{extended_hazard_rank, NodeHazardCurve};
use crate::scalar::{lit, Scalar};

/// One ranked unit of case/control mass at a fixed time: a node of a
/// partition, or a single subject when scoring an arbitrary marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassPoint<F> {
    /// Ranking value in `[0, +inf]`; ties are detected by exact equality.
    pub rank: F,
    /// Case (event-density) mass, `>= 0`.
    pub f: F,
    /// Control (at-risk) mass, `>= 0`.
    pub s: F,
}

impl<F: Scalar> MassPoint<F> {
    /// Builds the point for a node from its masses, ranking by `f/s` extended
    /// to `+inf` on empty risk sets. `None` when the node carries no mass.
    pub fn from_masses(f: F, s: F) -> Option<Self> {
        extended_hazard_rank(f, s).map(|rank| MassPoint { rank, f, s })
    }
}

/// Sorted tie groups with their pooled masses, in decreasing rank order.
fn rank_groups<F: Scalar>(points: &[MassPoint<F>]) -> Vec<(F, F, F)> {
    let mut sorted: Vec<&MassPoint<F>> = points.iter().collect();
    sorted.sort_by(|a, b| b.rank.partial_cmp(&a.rank).unwrap());
    let mut groups: Vec<(F, F, F)> = Vec::new();
    for p in sorted {
        match groups.last_mut() {
            Some((rank, f, s)) if *rank == p.rank => {
                *f += p.f;
                *s += p.s;
            }
            _ => groups.push((p.rank, p.f, p.s)),
        }
    }
    groups
}

/// Concordance of ranked mass points at one time; `None` when either total
/// mass vanishes.
pub fn con_t_ranked<F: Scalar>(points: &[MassPoint<F>]) -> Option<F> {
    let groups = rank_groups(points);
    let total_f: F = groups.iter().map(|g| g.1).sum();
    let total_s: F = groups.iter().map(|g| g.2).sum();
    if !(total_f > F::zero()) || !(total_s > F::zero()) {
        return None;
    }
    let mut seen_s = F::zero();
    let mut num = F::zero();
    for &(_, f, s) in &groups {
        let below = total_s - seen_s - s;
        num += f * below + lit::<F>(0.5) * f * s;
        seen_s += s;
    }
    Some(num / (total_f * total_s))
}

/// Concordance of a partition at one grid time, from per-node masses
/// `(f_star, s_star)`. Nodes are ranked by their hazard ratio.
pub fn con_t<F: Scalar>(masses: &[(F, F)]) -> Option<F> {
    let points: Vec<MassPoint<F>> = masses
        .iter()
        .filter_map(|&(f, s)| MassPoint::from_masses(f, s))
        .collect();
    con_t_ranked(&points)
}

/// The rank-interpolated ROC curve at one time: anchor points `(FPR, TPR)`
/// from cumulative control/case mass in decreasing rank order, linearly
/// interpolated. Tied nodes merge into a single segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocStarCurve<F> {
    points: Vec<(F, F)>,
}

impl<F: Scalar> RocStarCurve<F> {
    pub fn points(&self) -> &[(F, F)] {
        &self.points
    }

    /// Area under the curve by the trapezoid rule; equals the concordance of
    /// the same mass configuration.
    pub fn auc(&self) -> F {
        let mut area = F::zero();
        for w in self.points.windows(2) {
            area += (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / lit(2.0);
        }
        area
    }

    /// CSV export, columns `fpr,tpr`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "fpr,tpr")?;
        for &(x, y) in &self.points {
            writeln!(writer, "{x},{y}")?;
        }
        Ok(())
    }
}

/// Builds the ROC curve for one grid time from per-node masses; `None` when
/// either total mass vanishes.
pub fn roc_star<F: Scalar>(masses: &[(F, F)]) -> Option<RocStarCurve<F>> {
    let points: Vec<MassPoint<F>> = masses
        .iter()
        .filter_map(|&(f, s)| MassPoint::from_masses(f, s))
        .collect();
    let groups = rank_groups(&points);
    let total_f: F = groups.iter().map(|g| g.1).sum();
    let total_s: F = groups.iter().map(|g| g.2).sum();
    if !(total_f > F::zero()) || !(total_s > F::zero()) {
        return None;
    }
    let mut anchors = Vec::with_capacity(groups.len() + 1);
    anchors.push((F::zero(), F::zero()));
    let mut cf = F::zero();
    let mut cs = F::zero();
    for &(_, f, s) in &groups {
        cf += f;
        cs += s;
        anchors.push((cs / total_s, cf / total_f));
    }
    Some(RocStarCurve { points: anchors })
}

/// Per-grid-time concordance values and their weighted average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceReport<F> {
    pub times: Vec<F>,
    pub weights: Vec<F>,
    pub con: Vec<Option<F>>,
    pub icon: F,
}

impl<F: Scalar> ConcordanceReport<F> {
    /// CSV export, columns `t,con_t` (undefined grid points print empty).
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "t,con_t")?;
        for (t, c) in self.times.iter().zip(&self.con) {
            match c {
                Some(v) => writeln!(writer, "{t},{v}")?,
                None => writeln!(writer, "{t},")?,
            }
        }
        Ok(())
    }
}

/// Weighted average of defined per-grid concordances, weights renormalized
/// over the defined grid points.
pub fn weighted_icon<F: Scalar>(grid: &TimeGrid<F>, con: &[Option<F>]) -> Result<F> {
    let mut num = F::zero();
    let mut den = F::zero();
    for (k, c) in con.iter().enumerate() {
        if let Some(v) = c {
            num += grid.weights()[k] * *v;
            den += grid.weights()[k];
        }
    }
    if den > F::zero() {
        Ok(num / den)
    } else {
        Err(Error::NoDefinedGridPoint)
    }
}

/// Integrated concordance of a partition given its per-node hazard curves.
pub fn icon<F: Scalar>(
    curves: &[&NodeHazardCurve<F>],
    grid: &TimeGrid<F>,
) -> Result<ConcordanceReport<F>> {
    let mut con = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let masses: Vec<(F, F)> = curves.iter().map(|c| (c.f_star[k], c.s_star[k])).collect();
        con.push(con_t(&masses));
    }
    let icon = weighted_icon(grid, &con)?;
    Ok(ConcordanceReport {
        times: grid.times().to_vec(),
        weights: grid.weights().to_vec(),
        con,
        icon,
    })
}

/// Integrated concordance of an arbitrary per-subject risk score: the
/// per-subject expansion of the node formula. At each grid time a subject
/// contributes case mass `K_h(t' - Y_i) * delta_i` ranked by its own-time
/// score, and control mass `I(Y_i >= t)` ranked by its current score.
/// Subjects with a missing score drop the corresponding mass.
pub fn marker_icon<F: Scalar>(
    data: &crate::data::Dataset<F>,
    grid: &TimeGrid<F>,
    h: F,
    score_at: impl Fn(usize, usize) -> Option<F>,
    score_at_own_time: impl Fn(usize) -> Option<F>,
) -> Result<ConcordanceReport<F>> {
    let spec = crate::kernel::KernelSpec::epanechnikov(h)?;
    let s = data.horizon();
    let mut con = Vec::with_capacity(grid.len());
    for (k, &t) in grid.times().iter().enumerate() {
        let t_eval = spec.clamp(t, s)?;
        let mut points: Vec<MassPoint<F>> = Vec::new();
        for (i, subject) in data.subjects().iter().enumerate() {
            if subject.event() {
                if let Some(rank) = score_at_own_time(i) {
                    let f = spec.weight(t_eval - subject.observed_time());
                    if f > F::zero() {
                        points.push(MassPoint {
                            rank,
                            f,
                            s: F::zero(),
                        });
                    }
                }
            }
            if subject.observed_time() >= t {
                if let Some(rank) = score_at(i, k) {
                    points.push(MassPoint {
                        rank,
                        f: F::zero(),
                        s: F::one(),
                    });
                }
            }
        }
        con.push(con_t_ranked(&points));
    }
    let icon = weighted_icon(grid, &con)?;
    Ok(ConcordanceReport {
        times: grid.times().to_vec(),
        weights: grid.weights().to_vec(),
        con,
        icon,
    })
}

/// Within-node concordance gain of a split: the weighted sum over the grid of
/// `|f_L s_R - f_R s_L| / (f_P s_P)`, skipping grid points where the parent
/// mass product vanishes. Degenerate splits score 0.
pub fn delta_icon<F: Scalar>(
    parent: &NodeHazardCurve<F>,
    left: &NodeHazardCurve<F>,
    right: &NodeHazardCurve<F>,
    grid: &TimeGrid<F>,
) -> F {
    let mut total = F::zero();
    for k in 0..grid.len() {
        let denom = parent.f_star[k] * parent.s_star[k];
        if denom > F::zero() {
            let num = (left.f_star[k] * right.s_star[k] - right.f_star[k] * left.s_star[k]).abs();
            total += grid.weights()[k] * num / denom;
        }
    }
    total
}
