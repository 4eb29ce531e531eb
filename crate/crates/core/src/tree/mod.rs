//! Time-invariant partition trees grown by concordance gain.
//!
//! A tree is one fixed binary partition of the transformed covariate space
//! `[0,1]^p`, applied at every evaluation time: a subject's node at time `t`
//! is found by routing its transformed covariates at `t` through the split
//! rules, so node membership can change over follow-up. Growth follows a
//! breadth-first queue: each splittable node receives the candidate split
//! with the largest concordance gain, subject to minimum baseline node sizes.

mod grow;
mod predict;
mod prune;

pub use grow::{grow, grow_weighted, GrowSettings, GrowthCache};
pub use predict::TreeFit;
pub use prune::{prune_sequence, select_by_cv, CvReport, PruneCandidate, PruneSequence};

use serde::{Deserialize, Serialize};

use crate::concordance::{self, ConcordanceReport};
use crate::data::TimeGrid;
use crate::error::Result;
use crate::kernel::{BandwidthPolicy, NodeHazardCurve};
use crate::scalar::Scalar;

/// Which statistic a candidate split maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    /// Concordance gain within the node being split (the default).
    DeltaIcon,
    /// Integrated concordance of the whole tree with the split applied.
    GlobalIcon,
}

impl std::fmt::Display for SplitCriterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitCriterion::DeltaIcon => write!(f, "delta_icon"),
            SplitCriterion::GlobalIcon => write!(f, "global_icon"),
        }
    }
}

impl std::str::FromStr for SplitCriterion {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "delta_icon" | "delta-icon" => Ok(SplitCriterion::DeltaIcon),
            "global_icon" | "global-icon" => Ok(SplitCriterion::GlobalIcon),
            other => Err(format!("unknown split criterion `{other}`")),
        }
    }
}

/// Axis-aligned split on a transformed coordinate; the left child is
/// `x[coordinate] <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule<F> {
    pub coordinate: usize,
    pub threshold: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind<F> {
    Internal {
        rule: SplitRule<F>,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: usize,
    },
}

/// One tree node. `label` follows the breadth-first numbering of the growth
/// queue (root = 1; the children appended to an `m`-node tree get labels
/// `m+1` and `m+2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode<F> {
    pub label: usize,
    pub parent: Option<usize>,
    /// Weighted number of baseline observations in the node, `n(tau)`.
    pub baseline_count: F,
    pub kind: NodeKind<F>,
}

/// Fit metadata carried by every tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta<F> {
    pub grid: TimeGrid<F>,
    pub policy: BandwidthPolicy<F>,
    pub n_min: usize,
    pub criterion: SplitCriterion,
    pub seed: u64,
}

/// A fitted time-invariant partition: split rules on the internal nodes,
/// hazard curves on the leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTree<F> {
    nodes: Vec<TreeNode<F>>,
    leaf_curves: Vec<NodeHazardCurve<F>>,
    leaf_nodes: Vec<usize>,
    meta: FitMeta<F>,
}

impl<F: Scalar> PartitionTree<F> {
    pub(crate) fn from_parts(
        nodes: Vec<TreeNode<F>>,
        leaf_curves: Vec<NodeHazardCurve<F>>,
        leaf_nodes: Vec<usize>,
        meta: FitMeta<F>,
    ) -> Self {
        PartitionTree {
            nodes,
            leaf_curves,
            leaf_nodes,
            meta,
        }
    }

    pub fn nodes(&self) -> &[TreeNode<F>] {
        &self.nodes
    }

    pub fn meta(&self) -> &FitMeta<F> {
        &self.meta
    }

    pub fn grid(&self) -> &TimeGrid<F> {
        &self.meta.grid
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_curves.len()
    }

    pub fn is_root_only(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Node index of leaf ordinal `leaf`.
    pub fn leaf_node(&self, leaf: usize) -> usize {
        self.leaf_nodes[leaf]
    }

    pub fn leaf_curve(&self, leaf: usize) -> &NodeHazardCurve<F> {
        &self.leaf_curves[leaf]
    }

    pub fn leaf_curves(&self) -> &[NodeHazardCurve<F>] {
        &self.leaf_curves
    }

    /// Routes a transformed covariate vector to its leaf ordinal.
    pub fn route(&self, x: &[F]) -> usize {
        let mut node = 0;
        loop {
            match &self.nodes[node].kind {
                NodeKind::Internal { rule, left, right } => {
                    node = if x[rule.coordinate] <= rule.threshold {
                        *left
                    } else {
                        *right
                    };
                }
                NodeKind::Leaf { leaf } => return *leaf,
            }
        }
    }

    /// Same tree with its leaf curves replaced (honest re-estimation).
    pub(crate) fn with_leaf_curves(mut self, curves: Vec<NodeHazardCurve<F>>) -> Self {
        assert_eq!(curves.len(), self.leaf_curves.len());
        self.leaf_curves = curves;
        self
    }

    /// Integrated concordance of the tree's own leaf estimates.
    pub fn concordance(&self) -> Result<ConcordanceReport<F>> {
        let curves: Vec<&NodeHazardCurve<F>> = self.leaf_curves.iter().collect();
        concordance::icon(&curves, &self.meta.grid)
    }
}
