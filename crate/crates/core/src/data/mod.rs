//! Right-censored subjects with time-dependent covariate histories.
//!
//! A subject is observed as `Y = min(T, C)` with event indicator
//! `delta = I(T <= C)` and a piecewise-constant covariate history on `(0, Y]`.
//! Histories follow the last-observation-carried-forward convention: the value
//! on a segment `(start, stop]` is the value recorded at `start`.

mod io;
mod transform;

pub use io::{ingest_long_format, ingest_long_format_histories, read_long_format_file, write_long_format};
pub use transform::{at_risk_ecdf, EcdfTable, TransformedDataset};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use serde::{Deserialize, Serialize};

/// One piece of a piecewise-constant covariate history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment<F> {
    pub start: F,
    pub stop: F,
    pub values: Vec<F>,
}

/// Covariate history of one subject together with its observed outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariatePath<F> {
    id: String,
    segments: Vec<Segment<F>>,
    observed_time: F,
    event: bool,
}

impl<F: Scalar> CovariatePath<F> {
    /// Validates that the segments tile `(0, Y]` without gaps or overlaps.
    pub fn new(id: impl Into<String>, segments: Vec<Segment<F>>, event: bool) -> Result<Self> {
        let id = id.into();
        let malformed = |reason: &str| Error::MalformedHistory {
            id: id.clone(),
            reason: reason.to_string(),
        };
        if segments.is_empty() {
            return Err(malformed("history has no segments"));
        }
        let p = segments[0].values.len();
        if segments[0].start != F::zero() {
            return Err(malformed("first segment must start at 0"));
        }
        for w in segments.windows(2) {
            if w[0].stop != w[1].start {
                return Err(malformed(
                    "segments must be contiguous (each stop equals the next start)",
                ));
            }
        }
        for seg in &segments {
            if !(seg.stop > seg.start) {
                return Err(malformed("segment must have positive length"));
            }
            if seg.values.len() != p {
                return Err(malformed("covariate dimension changes between segments"));
            }
            if seg.values.iter().any(|v| !v.is_finite()) || !seg.stop.is_finite() {
                return Err(malformed("non-finite value in history"));
            }
        }
        let observed_time = segments.last().unwrap().stop;
        Ok(CovariatePath {
            id,
            segments,
            observed_time,
            event,
        })
    }

    /// Single-segment constant history on `(0, y]`.
    pub fn constant(id: impl Into<String>, values: Vec<F>, y: F, event: bool) -> Result<Self> {
        CovariatePath::new(
            id,
            vec![Segment {
                start: F::zero(),
                stop: y,
                values,
            }],
            event,
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn segments(&self) -> &[Segment<F>] {
        &self.segments
    }

    /// Observed time `Y = min(T, C)`.
    pub fn observed_time(&self) -> F {
        self.observed_time
    }

    /// Event indicator `delta`.
    pub fn event(&self) -> bool {
        self.event
    }

    pub fn dim(&self) -> usize {
        self.segments[0].values.len()
    }

    /// Whether the history is a single constant segment.
    pub fn is_static(&self) -> bool {
        self.segments.len() == 1
    }

    /// Covariate vector at `t` for `t` in `(0, Y]`; `t <= 0` reads the first
    /// segment (the value "just after" baseline). Beyond `Y` the last value is
    /// carried forward.
    pub fn value_at(&self, t: F) -> &[F] {
        if t <= self.segments[0].stop {
            return &self.segments[0].values;
        }
        // first segment with stop >= t
        let idx = self
            .segments
            .partition_point(|seg| seg.stop < t)
            .min(self.segments.len() - 1);
        &self.segments[idx].values
    }
}

/// A set of subjects sharing a covariate dimension and an analysis horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<F> {
    subjects: Vec<CovariatePath<F>>,
    p: usize,
    horizon: F,
    covariate_names: Vec<String>,
}

impl<F: Scalar> Dataset<F> {
    /// Builds a dataset; `horizon` defaults to the 0.95 quantile of the
    /// uncensored observed times when not supplied.
    pub fn new(subjects: Vec<CovariatePath<F>>, horizon: Option<F>) -> Result<Self> {
        Self::with_names(subjects, horizon, None)
    }

    pub fn with_names(
        subjects: Vec<CovariatePath<F>>,
        horizon: Option<F>,
        covariate_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::BadFormat("dataset has no subjects".into()));
        }
        let p = subjects[0].dim();
        for s in &subjects {
            if s.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: s.dim(),
                });
            }
        }
        if !subjects.iter().any(|s| s.event()) {
            return Err(Error::NoEvents);
        }
        let horizon = match horizon {
            Some(s) => {
                if !(s > F::zero()) {
                    return Err(Error::InvalidParameter("horizon must be positive".into()));
                }
                s
            }
            None => {
                let times = sorted_uncensored(&subjects);
                quantile_type1(&times, 0.95)
            }
        };
        let covariate_names = match covariate_names {
            Some(names) => {
                if names.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        got: names.len(),
                    });
                }
                names
            }
            None => (1..=p).map(|j| format!("z{j}")).collect(),
        };
        Ok(Dataset {
            subjects,
            p,
            horizon,
            covariate_names,
        })
    }

    pub fn subjects(&self) -> &[CovariatePath<F>] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Upper end of the analysis window.
    pub fn horizon(&self) -> F {
        self.horizon
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Ascending observed times of subjects with an event.
    pub fn sorted_uncensored_times(&self) -> Vec<F> {
        sorted_uncensored(&self.subjects)
    }

    /// 0.95 quantile of the uncensored observed times: the bandwidth anchor.
    pub fn uncensored_reference_time(&self) -> F {
        quantile_type1(&self.sorted_uncensored_times(), 0.95)
    }

    /// True when every subject carries a single constant segment.
    pub fn all_static(&self) -> bool {
        self.subjects.iter().all(|s| s.is_static())
    }
}

fn sorted_uncensored<F: Scalar>(subjects: &[CovariatePath<F>]) -> Vec<F> {
    let mut times: Vec<F> = subjects
        .iter()
        .filter(|s| s.event())
        .map(|s| s.observed_time())
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times
}

/// Left-continuous inverse (type-1) empirical quantile of an ascending slice.
pub fn quantile_type1<F: Scalar>(sorted: &[F], prob: f64) -> F {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let n = sorted.len();
    let idx = ((prob * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// Ordered evaluation times with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<F> {
    times: Vec<F>,
    weights: Vec<F>,
}

impl<F: Scalar> TimeGrid<F> {
    pub fn new(times: Vec<F>, weights: Vec<F>) -> Result<Self> {
        if times.is_empty() || times.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "grid times and weights must be non-empty and of equal length".into(),
            ));
        }
        if times[0] <= F::zero() || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "grid times must be strictly increasing and positive".into(),
            ));
        }
        if weights.iter().any(|w| *w < F::zero()) {
            return Err(Error::InvalidParameter(
                "grid weights must be nonnegative".into(),
            ));
        }
        let total: F = weights.iter().copied().sum();
        if (total - F::one()).abs() > lit(1e-12) {
            return Err(Error::InvalidParameter(
                "grid weights must sum to 1".into(),
            ));
        }
        Ok(TimeGrid { times, weights })
    }

    /// Grid with uniform weights `1/q`.
    pub fn uniform(times: Vec<F>) -> Result<Self> {
        let w = lit::<F>(1.0) / lit(times.len() as f64);
        let weights = vec![w; times.len()];
        TimeGrid::new(times, weights)
    }

    pub fn times(&self) -> &[F] {
        &self.times
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the grid time nearest to `t`; ties resolve to the earlier one.
    pub fn anchor(&self, t: F) -> usize {
        let n = self.times.len();
        let right = self.times.partition_point(|&g| g < t);
        if right == 0 {
            return 0;
        }
        if right == n {
            return n - 1;
        }
        let d_left = t - self.times[right - 1];
        let d_right = self.times[right] - t;
        if d_left <= d_right {
            right - 1
        } else {
            right
        }
    }
}

/// Evaluation grid on the `k/(q+1)` type-1 quantiles of the uncensored times,
/// truncated to `(0, horizon]`, with uniform weights. Duplicate quantiles are
/// collapsed.
pub fn uncensored_quantile_grid<F: Scalar>(data: &Dataset<F>, q: usize) -> Result<TimeGrid<F>> {
    if q == 0 {
        return Err(Error::InvalidParameter("grid size must be >= 1".into()));
    }
    let times = data.sorted_uncensored_times();
    if times.len() < q {
        return Err(Error::TooFewEventTimes {
            requested: q,
            available: times.len(),
        });
    }
    let mut grid: Vec<F> = Vec::with_capacity(q);
    for k in 1..=q {
        let t = quantile_type1(&times, k as f64 / (q as f64 + 1.0));
        if t > F::zero() && t <= data.horizon() && grid.last() != Some(&t) {
            grid.push(t);
        }
    }
    let min_required = q.min(2);
    if grid.len() < min_required {
        let mut distinct = times.clone();
        distinct.dedup();
        return Err(Error::TooFewEventTimes {
            requested: q,
            available: distinct.len(),
        });
    }
    TimeGrid::uniform(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(id: &str, rows: &[(f64, f64, f64)], event: bool) -> CovariatePath<f64> {
        let segments = rows
            .iter()
            .map(|&(a, b, v)| Segment {
                start: a,
                stop: b,
                values: vec![v],
            })
            .collect();
        CovariatePath::new(id, segments, event).unwrap()
    }

    #[test]
    fn locf_evaluation() {
        let p = path("1", &[(0.0, 2.0, 1.0), (2.0, 5.0, 2.0)], false);
        assert_eq!(p.observed_time(), 5.0);
        assert!(!p.event());
        assert_eq!(p.value_at(3.0)[0], 2.0);
        assert_eq!(p.value_at(2.0)[0], 1.0); // value on (0,2] is the first segment's
        assert_eq!(p.value_at(0.0)[0], 1.0); // baseline reads 0+
        assert_eq!(p.value_at(5.0)[0], 2.0);
        assert_eq!(p.value_at(9.0)[0], 2.0); // carried forward past Y
    }

    #[test]
    fn rejects_gapped_history() {
        let segments = vec![
            Segment {
                start: 0.0,
                stop: 1.0,
                values: vec![0.0],
            },
            Segment {
                start: 1.5,
                stop: 2.0,
                values: vec![0.0],
            },
        ];
        assert!(matches!(
            CovariatePath::<f64>::new("x", segments, true),
            Err(Error::MalformedHistory { .. })
        ));
    }

    #[test]
    fn quantile_grid_median() {
        let subjects: Vec<_> = (1..=100)
            .map(|i| CovariatePath::constant(format!("{i}"), vec![0.0], i as f64, true).unwrap())
            .collect();
        let data = Dataset::new(subjects, Some(1000.0)).unwrap();
        let grid = uncensored_quantile_grid(&data, 1).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid.times()[0], 50.0);
        assert_eq!(grid.weights()[0], 1.0);
    }

    #[test]
    fn quantile_grid_matches_sort_oracle() {
        // independent oracle: sort the event times, take x[ceil(p n) - 1]
        let mut state = 123u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let subjects: Vec<_> = (0..200)
            .map(|i| {
                CovariatePath::constant(format!("{i}"), vec![0.0], 0.05 + next() * 3.0, true)
                    .unwrap()
            })
            .collect();
        let data = Dataset::new(subjects, None).unwrap();
        let q = 20;
        let grid = uncensored_quantile_grid(&data, q).unwrap();
        let sorted = data.sorted_uncensored_times();
        let mut expect = Vec::new();
        for k in 1..=q {
            let p = k as f64 / (q + 1) as f64;
            let t = sorted[((p * sorted.len() as f64).ceil() as usize) - 1];
            if t <= data.horizon() && expect.last() != Some(&t) {
                expect.push(t);
            }
        }
        assert_eq!(grid.times(), expect.as_slice());
        assert!(grid.times().windows(2).all(|w| w[0] < w[1]));
        let w0 = 1.0 / grid.len() as f64;
        assert!(grid.weights().iter().all(|&w| w == w0));
    }

    #[test]
    fn anchor_prefers_earlier_on_tie() {
        let grid = TimeGrid::uniform(vec![1.0, 3.0, 5.0]).unwrap();
        assert_eq!(grid.anchor(0.2), 0);
        assert_eq!(grid.anchor(2.0), 0); // exact midpoint
        assert_eq!(grid.anchor(2.1), 1);
        assert_eq!(grid.anchor(3.0), 1);
        assert_eq!(grid.anchor(9.0), 2);
    }

    #[test]
    fn horizon_defaults_to_95_quantile() {
        let subjects: Vec<_> = (1..=100)
            .map(|i| CovariatePath::constant(format!("{i}"), vec![0.0], i as f64, true).unwrap())
            .collect();
        let data = Dataset::new(subjects, None).unwrap();
        assert_eq!(data.horizon(), 95.0);
    }
}
