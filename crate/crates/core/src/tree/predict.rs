//! Prediction from a fitted tree.
//!
//! Hazard prediction reads the leaf hazard curve: the subject's covariates at
//! `t` are transformed through the training at-risk ECDF of the nearest grid
//! time, routed to a leaf, and the leaf curve is linearly interpolated.
//!
//! Survival prediction integrates raw counting-process increments, with no
//! kernel smoothing: at every training event time `u <= t` the new subject's
//! leaf at `u` is found and the increment is (events at `u` in that leaf) /
//! (training subjects at risk and in that leaf at `u`); the prediction is
//! `exp(-sum of increments)`.

use crate::data::{CovariatePath, TransformedDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::PartitionTree;

/// Per-leaf counting-process tables at the distinct training event times.
#[derive(Debug, Clone)]
struct EventTables<F> {
    times: Vec<F>,
    /// `[leaf][event index]` weighted event count at that time in the leaf.
    events: Vec<Vec<F>>,
    /// `[leaf][event index]` weighted at-risk-in-leaf count at that time.
    risk: Vec<Vec<F>>,
}

/// A tree bound to its training data, ready to predict for new subjects.
#[derive(Debug, Clone)]
pub struct TreeFit<F> {
    tree: PartitionTree<F>,
    tdata: TransformedDataset<F>,
    weights: Option<Vec<F>>,
    tables: EventTables<F>,
}

impl<F: Scalar> TreeFit<F> {
    /// Binds `tree` to the training data it was grown on. `weights` are the
    /// resample weights used in the fit (`None` = unit).
    pub fn new(
        tree: PartitionTree<F>,
        tdata: TransformedDataset<F>,
        weights: Option<Vec<F>>,
    ) -> Result<Self> {
        let tables = build_event_tables(&tree, &tdata, weights.as_deref())?;
        Ok(TreeFit {
            tree,
            tdata,
            weights,
            tables,
        })
    }

    pub fn tree(&self) -> &PartitionTree<F> {
        &self.tree
    }

    pub fn tdata(&self) -> &TransformedDataset<F> {
        &self.tdata
    }

    pub fn weights(&self) -> Option<&[F]> {
        self.weights.as_deref()
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

    /// Leaf of a new subject at time `t`.
    pub fn leaf_at(&self, path: &CovariatePath<F>, t: F) -> usize {
        let k = self.tdata.grid().anchor(t);
        let mut x = Vec::with_capacity(self.tdata.dim());
        self.tdata.transform_point_into(k, path.value_at(t), &mut x);
        self.tree.route(&x)
    }

    /// Predicted hazard at `t`; `None` where the leaf curve is undefined at
    /// both bracketing grid times.
    pub fn predict_hazard(&self, path: &CovariatePath<F>, t: F) -> Result<Option<F>> {
        self.check_dim(path)?;
        let leaf = self.leaf_at(path, t);
        let curve = self.tree.leaf_curve(leaf);
        let times = self.tdata.grid().times();
        let right = times.partition_point(|&g| g < t);
        if right == 0 {
            return Ok(curve.hazard[0]);
        }
        if right == times.len() {
            return Ok(curve.hazard[times.len() - 1]);
        }
        if times[right] == t {
            return Ok(curve.hazard[right]);
        }
        let (lo, hi) = (right - 1, right);
        Ok(match (curve.hazard[lo], curve.hazard[hi]) {
            (Some(a), Some(b)) => {
                let w = (t - times[lo]) / (times[hi] - times[lo]);
                Some(a + (b - a) * w)
            }
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        })
    }

    /// Predicted survival probability at `t` for a subject with covariate
    /// history `path` on `[0, t]`; returns the count of event times whose
    /// leaf had an empty at-risk set as the second value.
    pub fn predict_survival(&self, path: &CovariatePath<F>, t: F) -> Result<(F, usize)> {
        self.check_dim(path)?;
        let (curve, warnings) = self.survival_curve(path, &[t])?;
        Ok((curve[0], warnings))
    }

    /// Survival curve at ascending `times`.
    pub fn survival_curve(&self, path: &CovariatePath<F>, times: &[F]) -> Result<(Vec<F>, usize)> {
        self.check_dim(path)?;
        let mut warnings = 0usize;
        let mut out = Vec::with_capacity(times.len());
        let mut acc = F::zero();
        let mut e = 0usize;
        let mut x = Vec::with_capacity(self.tdata.dim());
        for &t in times {
            while e < self.tables.times.len() && self.tables.times[e] <= t {
                let u = self.tables.times[e];
                let k = self.tdata.grid().anchor(u);
                self.tdata.transform_point_into(k, path.value_at(u), &mut x);
                let leaf = self.tree.route(&x);
                let den = self.tables.risk[leaf][e];
                if den > F::zero() {
                    acc += self.tables.events[leaf][e] / den;
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

fn build_event_tables<F: Scalar>(
    tree: &PartitionTree<F>,
    tdata: &TransformedDataset<F>,
    weights: Option<&[F]>,
) -> Result<EventTables<F>> {
    let w_of = |i: usize| weights.map_or(F::one(), |w| w[i]);
    let mut times: Vec<F> = tdata
        .data()
        .subjects()
        .iter()
        .enumerate()
        .filter(|(i, s)| s.event() && w_of(*i) > F::zero())
        .map(|(_, s)| s.observed_time())
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let n_leaves = tree.n_leaves();
    let mut events = vec![vec![F::zero(); times.len()]; n_leaves];
    let mut risk = vec![vec![F::zero(); times.len()]; n_leaves];
    let mut x = Vec::with_capacity(tdata.dim());
    for (e, &u) in times.iter().enumerate() {
        for (i, subject) in tdata.data().subjects().iter().enumerate() {
            let w = w_of(i);
            if w <= F::zero() || subject.observed_time() < u {
                continue;
            }
            self_route(tdata, i, u, &mut x);
            let leaf = tree.route(&x);
            risk[leaf][e] += w;
            if subject.event() && subject.observed_time() == u {
                events[leaf][e] += w;
            }
        }
    }
    Ok(EventTables {
        times,
        events,
        risk,
    })
}

#[inline]
fn self_route<F: Scalar>(tdata: &TransformedDataset<F>, subject: usize, u: F, x: &mut Vec<F>) {
    tdata.training_x_at_into(subject, u, x);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CovariatePath, Dataset};
    use crate::kernel::BandwidthPolicy;
    use crate::rng::stream;
    use crate::tree::grow::{grow, GrowSettings};

    fn fit(n: usize, seed: u64, n_min: usize) -> TreeFit<f64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let subjects: Vec<_> = (0..n)
            .map(|i| {
                let z = next();
                let scale = if z > 0.5 { 0.4 } else { 1.3 };
                let y = (1e-3f64).max(-scale * (1.0 - next()).ln());
                CovariatePath::constant(format!("{i}"), vec![z], y, true).unwrap()
            })
            .collect();
        let data = Dataset::new(subjects, None).unwrap();
        let grid = crate::data::uncensored_quantile_grid(&data, 10).unwrap();
        let tdata = TransformedDataset::transform(data, grid).unwrap();
        let policy = BandwidthPolicy::global_default(tdata.data().uncensored_reference_time());
        let settings = GrowSettings {
            n_min,
            ..Default::default()
        };
        let tree = grow(&tdata, &policy, &settings, &mut stream(seed, "g", 0)).unwrap();
        TreeFit::new(tree, tdata, None).unwrap()
    }

    #[test]
    fn survival_at_zero_is_one() {
        let fit = fit(60, 4, 10);
        let path = CovariatePath::constant("new", vec![0.4], 1.0, false).unwrap();
        let (s, _) = fit.predict_survival(&path, 0.0).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn survival_non_increasing() {
        let fit = fit(80, 5, 10);
        let path = CovariatePath::constant("new", vec![0.7], 5.0, false).unwrap();
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.05).collect();
        let (curve, _) = fit.survival_curve(&path, &times).unwrap();
        for w in curve.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(curve.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn fleming_harrington_reduction() {
        // root-only tree, no censoring: increments are d/n at every event
        let fit = fit(100, 6, 1000); // n_min > n forces the root-only tree
        assert!(fit.tree().is_root_only());
        let data = fit.tdata().data().clone();
        let path = CovariatePath::constant("new", vec![0.1], 1.0, false).unwrap();
        let mut times: Vec<f64> = data.subjects().iter().map(|s| s.observed_time()).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &t in times.iter().step_by(7) {
            // independent Nelson-Aalen oracle
            let mut acc = 0.0;
            let mut seen: Vec<f64> = Vec::new();
            for s in data.subjects() {
                let u = s.observed_time();
                if u <= t && !seen.contains(&u) {
                    let d = data
                        .subjects()
                        .iter()
                        .filter(|r| r.event() && r.observed_time() == u)
                        .count() as f64;
                    let r = data
                        .subjects()
                        .iter()
                        .filter(|r| r.observed_time() >= u)
                        .count() as f64;
                    acc += d / r;
                    seen.push(u);
                }
            }
            let oracle = (-acc).exp();
            let (got, warn) = fit.predict_survival(&path, t).unwrap();
            assert_eq!(warn, 0);
            assert!((got - oracle).abs() < 1e-12, "t={t}: {got} vs {oracle}");
        }
    }

    #[test]
    fn covariates_are_ignored_by_root_tree() {
        let fit = fit(60, 7, 1000);
        let a = CovariatePath::constant("a", vec![0.05], 2.0, false).unwrap();
        let b = CovariatePath::constant("b", vec![0.95], 2.0, false).unwrap();
        for t in [0.2, 0.5, 1.1] {
            assert_eq!(
                fit.predict_survival(&a, t).unwrap().0,
                fit.predict_survival(&b, t).unwrap().0
            );
            assert_eq!(
                fit.predict_hazard(&a, t).unwrap(),
                fit.predict_hazard(&b, t).unwrap()
            );
        }
    }

    #[test]
    fn hazard_switches_leaves_with_time_dependent_covariate() {
        let fit = fit(120, 8, 12);
        if fit.tree().is_root_only() {
            panic!("test needs a split");
        }
        // crossing path: below the first threshold early, above it late
        let horizon = fit.horizon();
        let path = CovariatePath::new(
            "new",
            vec![
                crate::data::Segment {
                    start: 0.0,
                    stop: horizon * 0.4,
                    values: vec![0.02],
                },
                crate::data::Segment {
                    start: horizon * 0.4,
                    stop: horizon,
                    values: vec![0.98],
                },
            ],
            false,
        )
        .unwrap();
        let early_leaf = fit.leaf_at(&path, horizon * 0.1);
        let late_leaf = fit.leaf_at(&path, horizon * 0.9);
        assert_ne!(early_leaf, late_leaf);
    }

    #[test]
    fn constant_path_prediction_matches_leaf_curve() {
        let fit = fit(120, 9, 12);
        let grid_times = fit.tdata().grid().times().to_vec();
        let path = CovariatePath::constant("new", vec![0.03], 10.0, false).unwrap();
        for &t in &grid_times {
            let leaf = fit.leaf_at(&path, t);
            let k = fit.tdata().grid().anchor(t);
            let expect = fit.tree().leaf_curve(leaf).hazard[k];
            assert_eq!(fit.predict_hazard(&path, t).unwrap(), expect);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let fit = fit(50, 10, 8);
        let bad = CovariatePath::constant("x", vec![0.1, 0.2], 1.0, false).unwrap();
        assert!(matches!(
            fit.predict_survival(&bad, 0.5),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }
}
