//! At-risk empirical-CDF covariate transform.
//!
//! At every grid time `t` each covariate coordinate is mapped through the
//! empirical CDF of that coordinate among the subjects still at risk
//! (`Y >= t`), so the working covariate space is `[0,1]^p` at every time even
//! when the raw covariate support drifts.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TimeGrid};
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Frozen one-dimensional empirical CDF: `fraction(z) = #{v <= z} / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfTable<F> {
    sorted: Vec<F>,
}

impl<F: Scalar> EcdfTable<F> {
    pub fn from_values(mut values: Vec<F>) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        EcdfTable { sorted: values }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn fraction(&self, z: F) -> F {
        let count = self.sorted.partition_point(|v| *v <= z);
        lit::<F>(count as f64) / lit(self.sorted.len() as f64)
    }

    pub fn values(&self) -> &[F] {
        &self.sorted
    }
}

/// Empirical CDF of coordinate `coordinate` among subjects at risk at `t`,
/// evaluated at `z`.
pub fn at_risk_ecdf<F: Scalar>(
    data: &Dataset<F>,
    t: F,
    coordinate: usize,
    z: F,
) -> Result<F> {
    let mut at_risk = 0usize;
    let mut below = 0usize;
    for subject in data.subjects() {
        if subject.observed_time() >= t {
            at_risk += 1;
            if subject.value_at(t)[coordinate] <= z {
                below += 1;
            }
        }
    }
    if at_risk == 0 {
        return Err(Error::EmptyRiskSet { t: t.as_f64() });
    }
    Ok(lit::<F>(below as f64) / lit(at_risk as f64))
}

/// Dataset with at-risk ECDF transforms frozen on an evaluation grid.
///
/// Holds, per grid time, the transformed covariates of the at-risk subjects
/// plus the sorted raw-value tables needed to transform new observations; a
/// baseline table (taken at `0+`, where everybody is at risk) anchors the
/// node-size bookkeeping of the tree growers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformedDataset<F> {
    data: Dataset<F>,
    grid: TimeGrid<F>,
    tables: Vec<Vec<EcdfTable<F>>>,
    baseline_tables: Vec<EcdfTable<F>>,
    at_risk: Vec<Vec<u32>>,
    risk_pos: Vec<Vec<u32>>,
    x: Vec<Vec<F>>,
    baseline_x: Vec<F>,
    event_x: Vec<F>,
    anchor_of_y: Vec<usize>,
}

impl<F: Scalar> TransformedDataset<F> {
    /// Transforms `data` on `grid`; every transformed coordinate lies in
    /// `(0, 1]` and is monotone in the raw coordinate over the at-risk set.
    pub fn transform(data: Dataset<F>, grid: TimeGrid<F>) -> Result<Self> {
        let n = data.len();
        let p = data.dim();
        let q = grid.len();

        let mut tables = Vec::with_capacity(q);
        let mut at_risk = Vec::with_capacity(q);
        let mut risk_pos = Vec::with_capacity(q);
        let mut x = Vec::with_capacity(q);
        for &t in grid.times() {
            let risk: Vec<u32> = (0..n as u32)
                .filter(|&i| data.subjects()[i as usize].observed_time() >= t)
                .collect();
            if risk.is_empty() {
                return Err(Error::EmptyRiskSet { t: t.as_f64() });
            }
            let mut pos = vec![u32::MAX; n];
            for (local, &i) in risk.iter().enumerate() {
                pos[i as usize] = local as u32;
            }
            let mut coord_tables = Vec::with_capacity(p);
            for c in 0..p {
                let values: Vec<F> = risk
                    .iter()
                    .map(|&i| data.subjects()[i as usize].value_at(t)[c])
                    .collect();
                coord_tables.push(EcdfTable::from_values(values));
            }
            let mut rows = Vec::with_capacity(risk.len() * p);
            for &i in &risk {
                let raw = data.subjects()[i as usize].value_at(t);
                for c in 0..p {
                    rows.push(coord_tables[c].fraction(raw[c]));
                }
            }
            tables.push(coord_tables);
            at_risk.push(risk);
            risk_pos.push(pos);
            x.push(rows);
        }

        // Baseline transform at 0+: everybody is at risk.
        let zero = F::zero();
        let mut baseline_tables = Vec::with_capacity(p);
        for c in 0..p {
            let values: Vec<F> = data
                .subjects()
                .iter()
                .map(|s| s.value_at(zero)[c])
                .collect();
            baseline_tables.push(EcdfTable::from_values(values));
        }
        let mut baseline_x = Vec::with_capacity(n * p);
        for s in data.subjects() {
            let raw = s.value_at(zero);
            for c in 0..p {
                baseline_x.push(baseline_tables[c].fraction(raw[c]));
            }
        }

        // Covariates at each subject's own observed time, through the table of
        // the nearest grid time.
        let mut event_x = Vec::with_capacity(n * p);
        let mut anchor_of_y = Vec::with_capacity(n);
        for s in data.subjects() {
            let y = s.observed_time();
            let k = grid.anchor(y);
            anchor_of_y.push(k);
            let raw = s.value_at(y);
            for c in 0..p {
                event_x.push(tables[k][c].fraction(raw[c]));
            }
        }

        Ok(TransformedDataset {
            data,
            grid,
            tables,
            baseline_tables,
            at_risk,
            risk_pos,
            x,
            baseline_x,
            event_x,
            anchor_of_y,
        })
    }

    pub fn data(&self) -> &Dataset<F> {
        &self.data
    }

    pub fn grid(&self) -> &TimeGrid<F> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Subjects at risk at grid time `k`, ascending by index.
    pub fn at_risk(&self, k: usize) -> &[u32] {
        &self.at_risk[k]
    }

    /// Transformed covariates of `subject` at grid time `k`, if at risk.
    pub fn x_at(&self, k: usize, subject: usize) -> Option<&[F]> {
        let pos = self.risk_pos[k][subject];
        if pos == u32::MAX {
            return None;
        }
        let p = self.dim();
        let start = pos as usize * p;
        Some(&self.x[k][start..start + p])
    }

    /// Transformed baseline covariates of `subject` (ECDF at `0+`).
    pub fn baseline_x(&self, subject: usize) -> &[F] {
        let p = self.dim();
        &self.baseline_x[subject * p..(subject + 1) * p]
    }

    /// Transformed covariates of `subject` at its own observed time.
    pub fn event_x(&self, subject: usize) -> &[F] {
        let p = self.dim();
        &self.event_x[subject * p..(subject + 1) * p]
    }

    /// Grid anchor of `subject`'s observed time.
    pub fn anchor_of_y(&self, subject: usize) -> usize {
        self.anchor_of_y[subject]
    }

    /// ECDF tables frozen at grid time `k`.
    pub fn tables(&self, k: usize) -> &[EcdfTable<F>] {
        &self.tables[k]
    }

    pub fn baseline_tables(&self) -> &[EcdfTable<F>] {
        &self.baseline_tables
    }

    /// Transforms a raw covariate vector through the tables at grid time `k`.
    pub fn transform_point_into(&self, k: usize, raw: &[F], out: &mut Vec<F>) {
        out.clear();
        for (c, table) in self.tables[k].iter().enumerate() {
            out.push(table.fraction(raw[c]));
        }
    }

    /// Transformed covariates of a training subject at an arbitrary time `u`:
    /// the raw value at `u` through the tables anchored at the grid time
    /// nearest to `u`. At a grid time this equals the stored transform.
    pub fn training_x_at_into(&self, subject: usize, u: F, out: &mut Vec<F>) {
        let k = self.grid.anchor(u);
        let raw = self.data.subjects()[subject].value_at(u);
        self.transform_point_into(k, raw, out);
    }

    /// Ascending distinct observed event times.
    pub fn distinct_event_times(&self) -> Vec<F> {
        let mut times: Vec<F> = self
            .data
            .subjects()
            .iter()
            .filter(|s| s.event())
            .map(|s| s.observed_time())
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        times
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CovariatePath;

    fn static_data(values: &[(f64, f64, bool)]) -> Dataset<f64> {
        // (covariate, observed time, event)
        let subjects: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, &(z, y, d))| {
                CovariatePath::constant(format!("{}", i + 1), vec![z], y, d).unwrap()
            })
            .collect();
        Dataset::new(subjects, Some(10.0)).unwrap()
    }

    #[test]
    fn ecdf_definition() {
        let data = static_data(&[(1.0, 5.0, true), (2.0, 5.0, true), (3.0, 5.0, false)]);
        let v = at_risk_ecdf(&data, 1.0, 0, 2.0).unwrap();
        assert_eq!(v, 2.0 / 3.0);
    }

    #[test]
    fn single_at_risk_subject() {
        let data = static_data(&[(4.0, 5.0, true), (2.0, 1.0, true)]);
        let v = at_risk_ecdf(&data, 2.0, 0, 4.0).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn matches_sort_rank_oracle() {
        let mut state = 99u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let rows: Vec<(f64, f64, bool)> =
            (0..50).map(|_| (next() * 4.0 - 2.0, 0.2 + next() * 5.0, next() < 0.7)).collect();
        let data = static_data(&rows);
        let t = 1.7;
        for probe in [-1.0, 0.0, 0.3, 2.0] {
            // oracle: sort the at-risk values and count ranks
            let mut vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.1 >= t)
                .map(|r| r.0)
                .collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expect = vals.iter().filter(|&&v| v <= probe).count() as f64 / vals.len() as f64;
            assert_eq!(at_risk_ecdf(&data, t, 0, probe).unwrap(), expect);
        }
    }

    #[test]
    fn degenerate_identical_covariates() {
        let data = static_data(&[(5.0, 2.0, true), (5.0, 3.0, true), (5.0, 4.0, true)]);
        let grid = TimeGrid::uniform(vec![1.0, 2.5]).unwrap();
        let tdata = TransformedDataset::transform(data, grid).unwrap();
        for k in 0..2 {
            for &i in tdata.at_risk(k) {
                assert_eq!(tdata.x_at(k, i as usize).unwrap()[0], 1.0);
            }
        }
    }

    #[test]
    fn ranks_over_n() {
        let data = static_data(&[(0.1, 5.0, true), (0.5, 5.0, true), (0.9, 5.0, true)]);
        let grid = TimeGrid::uniform(vec![1.0]).unwrap();
        let tdata = TransformedDataset::transform(data, grid).unwrap();
        let got: Vec<f64> = (0..3).map(|i| tdata.x_at(0, i).unwrap()[0]).collect();
        assert_eq!(got, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn leaving_risk_set_changes_later_transforms() {
        // oracle: recompute the ECDF from scratch at each grid time
        let data = static_data(&[(1.0, 1.5, true), (2.0, 5.0, true), (3.0, 5.0, true)]);
        let grid = TimeGrid::uniform(vec![1.0, 2.0]).unwrap();
        let tdata = TransformedDataset::transform(data.clone(), grid).unwrap();
        // subject 2 (value 2.0): rank 2/3 at t=1, rank 1/2 at t=2
        assert_eq!(tdata.x_at(0, 1).unwrap()[0], 2.0 / 3.0);
        assert_eq!(tdata.x_at(1, 1).unwrap()[0], 1.0 / 2.0);
        for (k, &t) in [1.0, 2.0].iter().enumerate() {
            for &i in tdata.at_risk(k) {
                let raw = data.subjects()[i as usize].value_at(t)[0];
                let expect = at_risk_ecdf(&data, t, 0, raw).unwrap();
                assert_eq!(tdata.x_at(k, i as usize).unwrap()[0], expect);
            }
        }
    }

    #[test]
    fn transformed_values_live_on_rank_lattice() {
        let mut state = 5u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let rows: Vec<(f64, f64, bool)> =
            (0..40).map(|_| (next(), 0.1 + next() * 3.0, true)).collect();
        let data = static_data(&rows);
        let grid = uncensored_grid(&data);
        let tdata = TransformedDataset::transform(data, grid).unwrap();
        for k in 0..tdata.grid().len() {
            let r = tdata.at_risk(k).len() as f64;
            for &i in tdata.at_risk(k) {
                let x = tdata.x_at(k, i as usize).unwrap()[0];
                let scaled = x * r;
                assert!((scaled - scaled.round()).abs() < 1e-9);
                assert!(x > 0.0 && x <= 1.0);
            }
        }
    }

    #[test]
    fn invariant_under_monotone_marginal_transform() {
        let rows: Vec<(f64, f64, bool)> = vec![
            (0.3, 1.0, true),
            (-1.2, 2.0, true),
            (0.8, 3.0, true),
            (2.5, 4.0, false),
            (0.0, 5.0, true),
        ];
        let data = static_data(&rows);
        let exp_rows: Vec<(f64, f64, bool)> =
            rows.iter().map(|&(z, y, d)| (z.exp(), y, d)).collect();
        let data_exp = static_data(&exp_rows);
        let grid = TimeGrid::uniform(vec![0.5, 1.5, 3.5]).unwrap();
        let a = TransformedDataset::transform(data, grid.clone()).unwrap();
        let b = TransformedDataset::transform(data_exp, grid).unwrap();
        for k in 0..3 {
            assert_eq!(a.x[k], b.x[k]);
        }
        assert_eq!(a.baseline_x, b.baseline_x);
        assert_eq!(a.event_x, b.event_x);
    }

    fn uncensored_grid(data: &Dataset<f64>) -> TimeGrid<f64> {
        crate::data::uncensored_quantile_grid(data, 5).unwrap()
    }
}
