//! Replicated scenario benchmarks: generate, fit, and score by integrated
//! absolute error against the generative truth.
//!
//! Replicates run sequentially with per-replicate derived random streams and
//! internal parallelism (ensemble fitting over trees, error integration over
//! evaluation subjects), so a rerun with the same seed reproduces every
//! number bit for bit regardless of thread count.

use serde::{Deserialize, Serialize};

use crate::data::{uncensored_quantile_grid, TransformedDataset};
use crate::error::Result;
use crate::forest::{fit_forest, ForestFit, ForestSettings, ResampleMode};
use crate::kernel::BandwidthPolicy;
use crate::rng::{derive_seed, stream};
use crate::sim::{
    calibrate_censoring, generate, generate_evaluation, iae, ScenarioId, ScenarioSpec,
    DEFAULT_CALIBRATION_DRAWS, DEFAULT_CALIBRATION_TOLERANCE,
};
use crate::tree::{select_by_cv, GrowSettings, SplitCriterion, TreeFit};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub scenario: ScenarioId,
    pub n: usize,
    pub censoring: f64,
    pub replicates: usize,
    pub fit_tree: bool,
    pub fit_forest: bool,
    pub criteria: Vec<SplitCriterion>,
    pub grid_size: usize,
    pub n_min: usize,
    pub n_trees: usize,
    /// Coordinates per split in the ensemble; `None` = `ceil(sqrt(p))`.
    pub feature_subset: Option<usize>,
    pub folds: usize,
    pub n_eval: usize,
    pub honest: bool,
    pub seed: u64,
}

impl BenchmarkConfig {
    pub fn new(scenario: ScenarioId, n: usize, censoring: f64, replicates: usize, seed: u64) -> Self {
        BenchmarkConfig {
            scenario,
            n,
            censoring,
            replicates,
            fit_tree: true,
            fit_forest: true,
            criteria: vec![SplitCriterion::DeltaIcon],
            grid_size: crate::DEFAULT_GRID_SIZE,
            n_min: crate::DEFAULT_MIN_NODE,
            n_trees: crate::DEFAULT_ENSEMBLE_SIZE,
            feature_subset: None,
            folds: crate::DEFAULT_CV_FOLDS,
            n_eval: 500,
            honest: false,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub scenario: String,
    pub n: usize,
    pub censoring: f64,
    pub method: String,
    pub criterion: String,
    pub replicate: usize,
    pub iae: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub failures: Vec<(usize, String)>,
    pub calibrated_parameter: Option<f64>,
}

impl BenchmarkReport {
    /// Mean IAE of one `(method, criterion)` cell.
    pub fn mean_iae(&self, method: &str, criterion: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.criterion == criterion)
            .map(|r| r.iae)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// Paired per-replicate IAEs of two `(method, criterion)` cells.
    pub fn paired(
        &self,
        a: (&str, &str),
        b: (&str, &str),
    ) -> Vec<(f64, f64)> {
        let pick = |method: &str, criterion: &str| -> Vec<(usize, f64)> {
            self.rows
                .iter()
                .filter(|r| r.method == method && r.criterion == criterion)
                .map(|r| (r.replicate, r.iae))
                .collect()
        };
        let xs = pick(a.0, a.1);
        let ys = pick(b.0, b.1);
        xs.into_iter()
            .filter_map(|(rep, x)| {
                ys.iter()
                    .find(|(r, _)| *r == rep)
                    .map(|(_, y)| (x, *y))
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "scenario,n,censoring,method,criterion,replicate,iae")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.scenario, r.n, r.censoring, r.method, r.criterion, r.replicate, r.iae
            )?;
        }
        Ok(())
    }
}

/// Runs `replicates` rounds of generate, fit, and score.
///
/// Per-replicate failures are recorded and the run continues; the caller
/// decides how many failures are tolerable.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let mut spec = ScenarioSpec::new(cfg.scenario, cfg.n, cfg.censoring)?;
    let calibrated = calibrate_censoring(
        &spec,
        DEFAULT_CALIBRATION_TOLERANCE,
        DEFAULT_CALIBRATION_DRAWS,
        &mut stream(cfg.seed, "calibrate", 0),
    )?;
    spec.censoring_parameter = calibrated;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for rep in 0..cfg.replicates {
        match run_replicate(cfg, &spec, rep) {
            Ok(mut replicate_rows) => rows.append(&mut replicate_rows),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    Ok(BenchmarkReport {
        rows,
        failures,
        calibrated_parameter: calibrated,
    })
}

fn run_replicate(
    cfg: &BenchmarkConfig,
    spec: &ScenarioSpec,
    rep: usize,
) -> Result<Vec<BenchmarkRow>> {
    let (data, _) = generate(spec, &mut stream(cfg.seed, "bench-data", rep as u64))?;
    let horizon = data.horizon();
    let reference = data.uncensored_reference_time();
    let grid = uncensored_quantile_grid(&data, cfg.grid_size)?;
    let tdata = TransformedDataset::transform(data, grid)?;
    let policy = BandwidthPolicy::global_default(reference);
    let eval = generate_evaluation(
        spec,
        cfg.n_eval,
        horizon,
        &mut stream(cfg.seed, "bench-eval", rep as u64),
    )?;

    let mut rows = Vec::new();
    for &criterion in &cfg.criteria {
        if cfg.fit_tree {
            let settings = GrowSettings {
                n_min: cfg.n_min,
                criterion,
                feature_subset: None,
                max_thresholds: 64,
                seed: 0,
            };
            let tree_seed = derive_seed(cfg.seed, "bench-tree", rep as u64);
            let (tree, _, _) = select_by_cv(&tdata, &policy, &settings, cfg.folds, tree_seed)?;
            let fit = TreeFit::new(tree, tdata.clone(), None)?;
            let (value, _) = iae(
                |path, times| Ok(fit.survival_curve(path, times)?.0),
                &eval,
                horizon,
            )?;
            rows.push(row(cfg, "tree", criterion, rep, value));
        }
        if cfg.fit_forest {
            let mut settings = ForestSettings::defaults_for(tdata.dim());
            settings.n_trees = cfg.n_trees;
            settings.n_min = cfg.n_min;
            settings.criterion = criterion;
            if let Some(m) = cfg.feature_subset {
                settings.feature_subset = m;
            }
            if cfg.honest {
                settings.resample_mode = ResampleMode::SubsampleHonest { fraction: 0.632 };
            }
            let forest_seed = derive_seed(cfg.seed, "bench-forest", rep as u64);
            let model = fit_forest(&tdata, &policy, &settings, forest_seed)?;
            let fit = ForestFit::new(model, tdata.clone())?;
            let (value, _) = iae(
                |path, times| Ok(fit.survival_curve(path, times)?.0),
                &eval,
                horizon,
            )?;
            rows.push(row(cfg, "forest", criterion, rep, value));
        }
    }
    Ok(rows)
}

fn row(
    cfg: &BenchmarkConfig,
    method: &str,
    criterion: SplitCriterion,
    rep: usize,
    iae: f64,
) -> BenchmarkRow {
    BenchmarkRow {
        scenario: cfg.scenario.to_string(),
        n: cfg.n,
        censoring: cfg.censoring,
        method: method.to_string(),
        criterion: criterion.to_string(),
        replicate: rep,
        iae,
    }
}
