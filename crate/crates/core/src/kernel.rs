//! Kernel functions, bandwidth policies, and node-level hazard estimators.
//!
//! For a node membership indicator the estimators are
//!
//! * `f_star(t)  = (1/n) * sum_i w_i K_h(t' - Y_i) delta_i I(member at Y_i)`
//! * `s_star(t)  = (1/n) * sum_i w_i I(member at t, Y_i >= t)`
//! * `hazard(t)  = f_star(t) / s_star(t)` where `s_star(t) > 0`
//!
//! with `t' = clamp(t, h, s - h)` implementing the boundary rule that holds
//! the smoothed event density constant on `[0, h)` and `(s - h, s]`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TimeGrid};
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Supported kernel family. Second order, support `[-1, 1]`, integrates to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    Epanechnikov,
}

/// `K(x) = 0.75 (1 - x^2)` on `[-1, 1]`.
#[inline]
pub fn epanechnikov<F: Scalar>(x: F) -> F {
    if x.abs() <= F::one() {
        lit::<F>(0.75) * (F::one() - x * x)
    } else {
        F::zero()
    }
}

/// A kernel with its bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<F> {
    pub family: KernelFamily,
    pub h: F,
}

impl<F: Scalar> KernelSpec<F> {
    pub fn epanechnikov(h: F) -> Result<Self> {
        if !(h > F::zero()) || !h.is_finite() {
            return Err(Error::InvalidParameter("bandwidth must be positive".into()));
        }
        Ok(KernelSpec {
            family: KernelFamily::Epanechnikov,
            h,
        })
    }

    /// `K_h(d) = K(d/h)/h`; zero outside `|d| <= h`.
    #[inline]
    pub fn weight(&self, distance: F) -> F {
        epanechnikov(distance / self.h) / self.h
    }

    /// Evaluation point after the boundary clamp, `clamp(t, h, s - h)`.
    pub fn clamp(&self, t: F, s: F) -> Result<F> {
        if s < self.h + self.h {
            return Err(Error::WindowTooNarrow {
                s: s.as_f64(),
                h: self.h.as_f64(),
            });
        }
        Ok(t.max(self.h).min(s - self.h))
    }
}

/// How bandwidths are assigned to nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BandwidthPolicy<F> {
    /// One bandwidth for every node.
    GlobalFixed { h: F },
    /// `h_tau = c * n_tau^(-1/5)`, capped at `s/2`; `n_tau` counts subjects
    /// whose covariates at their own observed time fall in the node.
    NodeAdaptive { c: F },
}

impl<F: Scalar> BandwidthPolicy<F> {
    /// The default global bandwidth: `t0 / 20` for `t0` the 0.95 quantile of
    /// the uncensored observed times.
    pub fn global_default(reference_time: F) -> Self {
        BandwidthPolicy::GlobalFixed {
            h: reference_time / lit(20.0),
        }
    }

    /// Node-adaptive policy with the rule-of-thumb constant `c = s / 8`.
    pub fn adaptive_default(s: F) -> Self {
        BandwidthPolicy::NodeAdaptive { c: s / lit(8.0) }
    }

    /// Bandwidth for a node with (weighted) own-time membership count `n_tau`.
    pub fn bandwidth(&self, n_tau: F, s: F) -> F {
        let cap = s / lit(2.0);
        let h = match *self {
            BandwidthPolicy::GlobalFixed { h } => h,
            BandwidthPolicy::NodeAdaptive { c } => {
                if n_tau > F::zero() {
                    c * n_tau.powf(lit(-0.2))
                } else {
                    cap
                }
            }
        };
        h.min(cap)
    }
}

/// Smoothed event-density estimate for one node at `t`.
///
/// `member_at_own_time[i]` indicates membership of subject `i` evaluated at
/// its own observed time; only event subjects enter the sum. `weights` are
/// resample frequencies (`None` means unit weights); the normalizer is the
/// total weight of the full sample.
pub fn estimate_f_star<F: Scalar>(
    data: &Dataset<F>,
    member_at_own_time: &[bool],
    weights: Option<&[F]>,
    spec: &KernelSpec<F>,
    t: F,
) -> Result<F> {
    let s = data.horizon();
    let t_eval = spec.clamp(t, s)?;
    let mut sum = F::zero();
    let mut total = F::zero();
    for (i, subject) in data.subjects().iter().enumerate() {
        let w = weights.map_or(F::one(), |w| w[i]);
        total += w;
        if subject.event() && member_at_own_time[i] {
            sum += w * spec.weight(t_eval - subject.observed_time());
        }
    }
    Ok(sum / total)
}

/// Fraction of the full sample simultaneously at risk and in the node at `t`.
pub fn estimate_s_star<F: Scalar>(
    data: &Dataset<F>,
    member_at_t: &[bool],
    weights: Option<&[F]>,
    t: F,
) -> F {
    let mut sum = F::zero();
    let mut total = F::zero();
    for (i, subject) in data.subjects().iter().enumerate() {
        let w = weights.map_or(F::one(), |w| w[i]);
        total += w;
        if member_at_t[i] && subject.observed_time() >= t {
            sum += w;
        }
    }
    sum / total
}

/// Node-level estimates on an evaluation grid.
///
/// `hazard[k]` is `None` where the at-risk mass is zero; those grid points are
/// left to the caller, which either skips them (prediction) or ranks the node
/// as an infinite hazard when event mass remains (concordance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeHazardCurve<F> {
    pub f_star: Vec<F>,
    pub s_star: Vec<F>,
    pub hazard: Vec<Option<F>>,
    pub bandwidth: F,
}

impl<F: Scalar> NodeHazardCurve<F> {
    /// Assembles the curve from per-grid event and risk masses.
    pub fn from_masses(f_star: Vec<F>, s_star: Vec<F>, bandwidth: F) -> Self {
        let hazard = f_star
            .iter()
            .zip(&s_star)
            .map(|(&f, &s)| if s > F::zero() { Some(f / s) } else { None })
            .collect();
        NodeHazardCurve {
            f_star,
            s_star,
            hazard,
            bandwidth,
        }
    }

    pub fn len(&self) -> usize {
        self.hazard.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hazard.is_empty()
    }

    /// Ranking value used by the concordance machinery: `f/s`, `+inf` when
    /// event mass sits on an empty risk set, `None` when the node carries no
    /// mass at all at this grid point.
    pub fn rank_at(&self, k: usize) -> Option<F> {
        extended_hazard_rank(self.f_star[k], self.s_star[k])
    }
}

/// `f/s` extended to the boundary of the parameter space. `None` iff
/// `f = s = 0`.
#[inline]
pub fn extended_hazard_rank<F: Scalar>(f: F, s: F) -> Option<F> {
    if s > F::zero() {
        Some(f / s)
    } else if f > F::zero() {
        Some(F::infinity())
    } else {
        None
    }
}

/// Estimates the hazard curve of one node on the grid.
///
/// `member_at_grid[k][i]` is the membership of subject `i` at grid time `k`
/// (subjects not at risk may carry any value; the risk indicator is applied
/// here). `member_at_own_time` is as in [`estimate_f_star`] and also feeds the
/// adaptive bandwidth count.
pub fn node_hazard<F: Scalar>(
    data: &Dataset<F>,
    member_at_own_time: &[bool],
    member_at_grid: &[Vec<bool>],
    grid: &TimeGrid<F>,
    policy: &BandwidthPolicy<F>,
    weights: Option<&[F]>,
) -> Result<NodeHazardCurve<F>> {
    let s = data.horizon();
    let n_tau: F = data
        .subjects()
        .iter()
        .enumerate()
        .filter(|(i, _)| member_at_own_time[*i])
        .map(|(i, _)| weights.map_or(F::one(), |w| w[i]))
        .sum();
    let h = policy.bandwidth(n_tau, s);
    let spec = KernelSpec::epanechnikov(h)?;
    let mut f_star = Vec::with_capacity(grid.len());
    let mut s_star = Vec::with_capacity(grid.len());
    for (k, &t) in grid.times().iter().enumerate() {
        f_star.push(estimate_f_star(data, member_at_own_time, weights, &spec, t)?);
        s_star.push(estimate_s_star(data, &member_at_grid[k], weights, t));
    }
    Ok(NodeHazardCurve::from_masses(f_star, s_star, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CovariatePath;

    fn all_events(times: &[f64], horizon: f64) -> Dataset<f64> {
        let subjects: Vec<_> = times
            .iter()
            .enumerate()
            .map(|(i, &y)| CovariatePath::constant(format!("{i}"), vec![0.0], y, true).unwrap())
            .collect();
        Dataset::new(subjects, Some(horizon)).unwrap()
    }

    #[test]
    fn kernel_center_and_edge() {
        let spec = KernelSpec::epanechnikov(1.0).unwrap();
        assert_eq!(spec.weight(0.0), 0.75);
        assert_eq!(spec.weight(1.0), 0.0);
        assert_eq!(spec.weight(-1.0), 0.0);
        assert_eq!(spec.weight(2.0), 0.0);
        let spec = KernelSpec::epanechnikov(0.25).unwrap();
        assert_eq!(spec.weight(0.25), 0.0);
        assert_eq!(spec.weight(0.0), 3.0);
    }

    #[test]
    fn kernel_integrates_to_one() {
        // quadrature oracle: trapezoid over [-h, h]
        for h in [0.3, 1.0, 2.5] {
            let spec = KernelSpec::epanechnikov(h).unwrap();
            let m = 20_000;
            let mut sum = 0.0;
            for i in 0..=m {
                let x = -h + 2.0 * h * (i as f64) / (m as f64);
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                sum += w * spec.weight(x);
            }
            sum *= 2.0 * h / m as f64;
            assert!((sum - 1.0).abs() < 1e-6, "h={h}: integral {sum}");
        }
    }

    #[test]
    fn f_star_direct_summation() {
        let data = all_events(&[1.0, 2.0, 3.0], 3.0);
        let member = vec![true; 3];
        let spec = KernelSpec::epanechnikov(0.5).unwrap();
        let f = estimate_f_star(&data, &member, None, &spec, 2.0).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        // no events in node -> 0 everywhere
        let none = vec![false; 3];
        for t in [0.5, 1.5, 2.5] {
            assert_eq!(estimate_f_star(&data, &none, None, &spec, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn f_star_boundary_clamp() {
        let data = all_events(&[0.2, 1.0, 2.0, 3.0], 3.0);
        let member = vec![true; 4];
        let spec = KernelSpec::epanechnikov(0.5).unwrap();
        let at_half_h = estimate_f_star(&data, &member, None, &spec, 0.25).unwrap();
        let at_h = estimate_f_star(&data, &member, None, &spec, 0.5).unwrap();
        assert_eq!(at_half_h, at_h);
        let upper = estimate_f_star(&data, &member, None, &spec, 2.9).unwrap();
        let at_s_minus_h = estimate_f_star(&data, &member, None, &spec, 2.5).unwrap();
        assert_eq!(upper, at_s_minus_h);
    }

    #[test]
    fn window_too_narrow() {
        let data = all_events(&[0.5, 1.0], 1.0);
        let spec = KernelSpec::epanechnikov(0.6).unwrap();
        assert!(matches!(
            estimate_f_star(&data, &[true, true], None, &spec, 0.5),
            Err(Error::WindowTooNarrow { .. })
        ));
    }

    #[test]
    fn s_star_counting() {
        let data = all_events(&[1.0, 2.0, 3.0], 3.0);
        let member = vec![true; 3];
        assert_eq!(estimate_s_star(&data, &member, None, 0.5), 1.0);
        assert_eq!(estimate_s_star(&data, &member, None, 2.5), 1.0 / 3.0);
        assert_eq!(estimate_s_star(&data, &member, None, 3.5), 0.0);

        // brute-force counting oracle on random membership
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let times: Vec<f64> = (0..50).map(|_| 0.1 + next() * 3.0).collect();
        let data = all_events(&times, 4.0);
        let member: Vec<bool> = (0..50).map(|_| next() < 0.5).collect();
        let t = 1.3;
        let expect = times
            .iter()
            .zip(&member)
            .filter(|(&y, &m)| m && y >= t)
            .count() as f64
            / 50.0;
        assert_eq!(estimate_s_star(&data, &member, None, t), expect);
    }

    #[test]
    fn hazard_ratio_and_undefined_entries() {
        let data = all_events(&[1.0, 2.0, 3.0], 3.0);
        let member = vec![true; 3];
        let grid = TimeGrid::uniform(vec![2.0, 2.9]).unwrap();
        let member_grid = vec![member.clone(), member.clone()];
        let policy = BandwidthPolicy::GlobalFixed { h: 0.5 };
        let curve = node_hazard(&data, &member, &member_grid, &grid, &policy, None).unwrap();
        assert!((curve.hazard[0].unwrap() - 0.75).abs() < 1e-15);

        // events but an empty risk set at the first grid point
        let none_grid = vec![vec![false; 3], member.clone()];
        let grid = TimeGrid::uniform(vec![1.5, 2.0]).unwrap();
        let curve = node_hazard(&data, &member, &none_grid, &grid, &policy, None).unwrap();
        assert!(curve.hazard[0].is_none());
        assert!(curve.hazard[1].is_some());
    }

    #[test]
    fn duplication_invariance() {
        let mut state = 11u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let times: Vec<f64> = (0..30).map(|_| 0.1 + next() * 2.5).collect();
        let events: Vec<bool> = (0..30).map(|_| next() < 0.8).collect();
        let member: Vec<bool> = (0..30).map(|_| next() < 0.6).collect();

        let build = |reps: usize| {
            let subjects: Vec<_> = (0..30 * reps)
                .map(|i| {
                    let j = i % 30;
                    CovariatePath::constant(format!("{i}"), vec![0.0], times[j], events[j]).unwrap()
                })
                .collect();
            let data = Dataset::new(subjects, Some(3.0)).unwrap();
            let mem: Vec<bool> = (0..30 * reps).map(|i| member[i % 30]).collect();
            let grid = TimeGrid::uniform(vec![0.8, 1.4, 2.1]).unwrap();
            let member_grid = vec![mem.clone(), mem.clone(), mem.clone()];
            let policy = BandwidthPolicy::GlobalFixed { h: 0.4 };
            node_hazard(&data, &mem, &member_grid, &grid, &policy, None).unwrap()
        };
        let once = build(1);
        let twice = build(2);
        for k in 0..3 {
            match (once.hazard[k], twice.hazard[k]) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                other => panic!("defined-ness changed under duplication: {other:?}"),
            }
        }
    }

    #[test]
    fn masses_are_bounded() {
        let data = all_events(&[0.5, 1.0, 1.5, 2.0, 2.5], 3.0);
        let member = vec![true; 5];
        let spec = KernelSpec::epanechnikov(0.3).unwrap();
        for i in 0..60 {
            let t = 3.0 * (i as f64) / 60.0;
            let f = estimate_f_star(&data, &member, None, &spec, t).unwrap();
            assert!(f >= 0.0 && f <= 0.75 / 0.3 + 1e-12);
            let s = estimate_s_star(&data, &member, None, t.max(1e-9));
            assert!(s >= 0.0 && s <= 1.0);
        }
    }

    #[test]
    fn hazard_mass_matches_event_density() {
        // With all events and a small bandwidth, sum_k hazard * s_star * dt
        // over a fine uniform grid approximates the event mass on the window.
        let n = 400;
        let mut state = 17u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let times: Vec<f64> = (0..n).map(|_| 0.05 + next() * 0.9).collect();
        let data = all_events(&times, 1.0);
        let member = vec![true; n];
        let spec = KernelSpec::epanechnikov(0.04).unwrap();
        let m = 400;
        let dt = 1.0 / m as f64;
        let mut mass = 0.0;
        for k in 0..m {
            let t = (k as f64 + 0.5) * dt;
            let f = estimate_f_star(&data, &member, None, &spec, t).unwrap();
            mass += f * dt;
        }
        let expect = times.iter().filter(|&&y| y <= 1.0).count() as f64 / n as f64;
        assert!(
            (mass - expect).abs() / expect < 0.10,
            "mass {mass} vs {expect}"
        );
    }
}
