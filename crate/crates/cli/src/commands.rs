use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use rocsurv::bench::{run_benchmark, BenchmarkConfig};
use rocsurv::concordance::marker_icon;
use rocsurv::data::{
    ingest_long_format_histories, read_long_format_file, uncensored_quantile_grid,
    write_long_format,
};
use rocsurv::forest::{fit_forest as fit_forest_model, ForestSettings, ResampleMode};
use rocsurv::BandwidthPolicy;
use rocsurv::model::{load_model, save_model, ModelFile};
use rocsurv::sim::{
    calibrate_censoring, generate, ScenarioId, ScenarioSpec, DEFAULT_CALIBRATION_DRAWS,
    DEFAULT_CALIBRATION_TOLERANCE,
};
use rocsurv::tree::{select_by_cv, GrowSettings, SplitCriterion};
use rocsurv::{Error, Result, TransformedDataset};

use crate::config::{pick, require, FileConfig};

fn parse_criterion(s: &str) -> Result<SplitCriterion> {
    s.parse().map_err(Error::InvalidParameter)
}

fn parse_scenario(s: &str) -> Result<ScenarioId> {
    s.parse().map_err(Error::InvalidParameter)
}

#[derive(Args)]
pub struct FitTreeArgs {
    /// Long-format training data (id,tstart,tstop,status,covariates...).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output model file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional per-grid-time concordance report (CSV: t,con_t).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Number of evaluation grid times.
    #[arg(long)]
    q: Option<usize>,
    /// Minimum baseline node size for splitting.
    #[arg(long)]
    n_min: Option<usize>,
    /// Cross-validation folds for pruning.
    #[arg(long)]
    folds: Option<usize>,
    /// Split criterion: delta_icon | global_icon.
    #[arg(long)]
    criterion: Option<String>,
    /// Bandwidth mode: global | adaptive.
    #[arg(long)]
    bandwidth: Option<String>,
    /// Analysis horizon; defaults to the 0.95 quantile of uncensored times.
    #[arg(long)]
    horizon: Option<f64>,
    /// Random seed (required).
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config file supplying defaults for the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

struct FitInputs {
    tdata: TransformedDataset,
    policy: BandwidthPolicy,
    q: usize,
    n_min: usize,
    criterion: SplitCriterion,
    seed: u64,
}

#[allow(clippy::too_many_arguments)]
fn prepare_fit(
    cfg: &FileConfig,
    input: Option<PathBuf>,
    q: Option<usize>,
    n_min: Option<usize>,
    criterion: Option<String>,
    bandwidth: Option<String>,
    horizon: Option<f64>,
    seed: Option<u64>,
) -> Result<FitInputs> {
    let input = require(
        input,
        cfg.string("input")?.map(PathBuf::from),
        "input",
    )?;
    let seed = require(seed, cfg.u64("seed")?, "seed")?;
    let q = pick(q, cfg.usize("q")?, rocsurv::DEFAULT_GRID_SIZE);
    let n_min = pick(n_min, cfg.usize("n_min")?, rocsurv::DEFAULT_MIN_NODE);
    let criterion = parse_criterion(&pick(
        criterion,
        cfg.string("criterion")?,
        "delta_icon".into(),
    ))?;
    let bandwidth = pick(bandwidth, cfg.string("bandwidth")?, "global".into());
    let horizon = match horizon.or(cfg.f64("horizon")?) {
        Some(s) => Some(s),
        None => None,
    };
    let data = read_long_format_file::<f64>(&input, horizon)?;
    let reference = data.uncensored_reference_time();
    let policy = match bandwidth.as_str() {
        "global" => BandwidthPolicy::global_default(reference),
        "adaptive" => BandwidthPolicy::adaptive_default(data.horizon()),
        other => {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be `global` or `adaptive`, got `{other}`"
            )))
        }
    };
    let grid = uncensored_quantile_grid(&data, q)?;
    let tdata = TransformedDataset::transform(data, grid)?;
    Ok(FitInputs {
        tdata,
        policy,
        q,
        n_min,
        criterion,
        seed,
    })
}

pub fn fit_tree(args: FitTreeArgs) -> Result<i32> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let out = require(args.out, cfg.string("out")?.map(PathBuf::from), "out")?;
    let folds = pick(args.folds, cfg.usize("folds")?, rocsurv::DEFAULT_CV_FOLDS);
    let inputs = prepare_fit(
        &cfg,
        args.input,
        args.q,
        args.n_min,
        args.criterion,
        args.bandwidth,
        args.horizon,
        args.seed,
    )?;
    let settings = GrowSettings {
        n_min: inputs.n_min,
        criterion: inputs.criterion,
        feature_subset: None,
        max_thresholds: 64,
        seed: inputs.seed,
    };
    println!(
        "fit-tree: n={} p={} q={} n_min={} folds={} criterion={} seed={}",
        inputs.tdata.len(),
        inputs.tdata.dim(),
        inputs.q,
        inputs.n_min,
        folds,
        inputs.criterion,
        inputs.seed
    );
    let (tree, _seq, report) =
        select_by_cv(&inputs.tdata, &inputs.policy, &settings, folds, inputs.seed)?;
    println!("leaves: {}", tree.n_leaves());
    println!("icon:   {:.6}", report.final_icon);
    println!("pruning trace (size, icon):");
    for (size, icon) in &report.candidate_trace {
        println!("  {size:>4} {icon:.6}");
    }
    if !report.alphas.is_empty() {
        println!("alpha thresholds: {:?}", report.alphas);
        println!("beta representatives: {:?}", report.betas);
        println!("mean held-out icon per beta:");
        for (beta, score) in report.betas.iter().zip(&report.mean_scores) {
            match score {
                Some(s) => println!("  beta={beta:.6} icon={s:.6}"),
                None => println!("  beta={beta:.6} icon=undefined"),
            }
        }
    }
    if let Some(beta) = report.chosen_beta {
        println!("chosen beta: {beta:.6}");
    }
    if !report.skipped_folds.is_empty() {
        eprintln!("warning: skipped folds without events: {:?}", report.skipped_folds);
    }
    if let Some(path) = &args.report {
        let concordance = tree.concordance()?;
        let mut file = std::fs::File::create(path)?;
        concordance.write_csv(&mut file)?;
    }
    let model = ModelFile::tree(inputs.seed, tree, inputs.tdata);
    save_model(&out, &model)?;
    println!("model written to {}", out.display());
    Ok(0)
}

#[derive(Args)]
pub struct FitForestArgs {
    /// Long-format training data.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output model file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of trees.
    #[arg(long)]
    b: Option<usize>,
    /// Coordinates drawn per split; defaults to ceil(sqrt(p)).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    n_min: Option<usize>,
    /// Split criterion: delta_icon | global_icon.
    #[arg(long)]
    criterion: Option<String>,
    /// Bandwidth mode: global | adaptive.
    #[arg(long)]
    bandwidth: Option<String>,
    /// Honest subsampling instead of the bootstrap.
    #[arg(long)]
    honest: bool,
    /// Subsample fraction in honest mode.
    #[arg(long)]
    subsample_fraction: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Random seed (required).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn fit_forest(args: FitForestArgs) -> Result<i32> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let out = require(args.out, cfg.string("out")?.map(PathBuf::from), "out")?;
    let inputs = prepare_fit(
        &cfg,
        args.input,
        args.q,
        args.n_min,
        args.criterion,
        args.bandwidth,
        args.horizon,
        args.seed,
    )?;
    let p = inputs.tdata.dim();
    let mut settings = ForestSettings::defaults_for(p);
    settings.n_trees = pick(args.b, cfg.usize("b")?, settings.n_trees);
    settings.feature_subset = pick(args.m, cfg.usize("m")?, settings.feature_subset);
    settings.n_min = inputs.n_min;
    settings.criterion = inputs.criterion;
    let honest = args.honest || cfg.bool("honest")?.unwrap_or(false);
    if honest {
        let fraction = pick(
            args.subsample_fraction,
            cfg.f64("subsample_fraction")?,
            0.632,
        );
        settings.resample_mode = ResampleMode::SubsampleHonest { fraction };
    }
    println!(
        "fit-forest: n={} p={} q={} B={} m={} n_min={} criterion={} mode={} seed={}",
        inputs.tdata.len(),
        p,
        inputs.q,
        settings.n_trees,
        settings.feature_subset,
        settings.n_min,
        settings.criterion,
        match settings.resample_mode {
            ResampleMode::Bootstrap => "bootstrap".to_string(),
            ResampleMode::SubsampleHonest { fraction } =>
                format!("subsample_honest({fraction})"),
        },
        inputs.seed
    );
    let forest = fit_forest_model(&inputs.tdata, &inputs.policy, &settings, inputs.seed)?;
    let sizes: Vec<usize> = forest.trees().iter().map(|t| t.n_leaves()).collect();
    println!(
        "trees: {} (leaves min/mean/max: {}/{:.1}/{})",
        forest.n_trees(),
        sizes.iter().min().unwrap(),
        sizes.iter().sum::<usize>() as f64 / sizes.len() as f64,
        sizes.iter().max().unwrap()
    );
    let model = ModelFile::forest(inputs.seed, forest, inputs.tdata);
    save_model(&out, &model)?;
    println!("model written to {}", out.display());
    Ok(0)
}

#[derive(Args)]
pub struct PredictArgs {
    /// Model file from fit-tree or fit-forest.
    #[arg(long)]
    model: PathBuf,
    /// Long-format covariate histories for the subjects to score.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated evaluation times.
    #[arg(long)]
    times: Option<String>,
    /// Number of uniform evaluation times on [0, horizon].
    #[arg(long)]
    num_times: Option<usize>,
    /// Also emit the predicted hazard.
    #[arg(long)]
    hazard: bool,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn predict(args: PredictArgs) -> Result<i32> {
    let model: ModelFile<f64> = load_model(&args.model)?;
    let file = std::fs::File::open(&args.input)?;
    let (_, paths) =
        ingest_long_format_histories::<f64, _>(std::io::BufReader::new(file))?;
    enum Fitted {
        Tree(rocsurv::TreeFit),
        Forest(rocsurv::ForestFit),
    }
    let fitted = match model.kind_name() {
        "tree" => Fitted::Tree(model.into_tree_fit()?),
        _ => Fitted::Forest(model.into_forest_fit()?),
    };
    let (dim, horizon) = match &fitted {
        Fitted::Tree(f) => (f.dim(), f.horizon()),
        Fitted::Forest(f) => (f.dim(), f.horizon()),
    };
    let times: Vec<f64> = match (&args.times, args.num_times) {
        (Some(list), _) => {
            let mut v = Vec::new();
            for part in list.split(',') {
                let t: f64 = part.trim().parse().map_err(|_| {
                    Error::InvalidParameter(format!("bad time `{part}` in --times"))
                })?;
                v.push(t);
            }
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        }
        (None, Some(m)) => {
            if m < 2 {
                return Err(Error::InvalidParameter("--num-times must be >= 2".into()));
            }
            (0..m).map(|i| horizon * i as f64 / (m - 1) as f64).collect()
        }
        (None, None) => (0..21).map(|i| horizon * i as f64 / 20.0).collect(),
    };
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    if args.hazard {
        writeln!(out, "id,t,survival,hazard")?;
    } else {
        writeln!(out, "id,t,survival")?;
    }
    for path in &paths {
        if path.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: path.dim(),
            });
        }
        let (curve, _) = match &fitted {
            Fitted::Tree(f) => f.survival_curve(path, &times)?,
            Fitted::Forest(f) => f.survival_curve(path, &times)?,
        };
        for (i, &t) in times.iter().enumerate() {
            if args.hazard {
                let hz = match &fitted {
                    Fitted::Tree(f) => f.predict_hazard(path, t)?,
                    Fitted::Forest(f) => f.predict_hazard(path, t)?,
                };
                match hz {
                    Some(h) => writeln!(out, "{},{},{},{}", path.id(), t, curve[i], h)?,
                    None => writeln!(out, "{},{},{},", path.id(), t, curve[i])?,
                }
            } else {
                writeln!(out, "{},{},{}", path.id(), t, curve[i])?;
            }
        }
    }
    out.flush()?;
    Ok(0)
}

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Scenario I..VII.
    #[arg(long)]
    scenario: Option<String>,
    /// Training sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Target censoring proportion (0, 0.25, 0.5, ...).
    #[arg(long)]
    censoring: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Methods to fit: tree | forest | both.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated split criteria (delta_icon, global_icon).
    #[arg(long)]
    criteria: Option<String>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// Fresh evaluation subjects per replicate.
    #[arg(long)]
    n_eval: Option<usize>,
    /// Honest subsampling for the ensemble.
    #[arg(long)]
    honest: bool,
    /// Random seed (required).
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV of per-replicate errors.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn benchmark(args: BenchmarkArgs) -> Result<i32> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let scenario = parse_scenario(&require(
        args.scenario,
        cfg.string("scenario")?,
        "scenario",
    )?)?;
    let n = pick(args.n, cfg.usize("n")?, 200);
    let censoring = pick(args.censoring, cfg.f64("censoring")?, 0.0);
    let replicates = pick(args.replicates, cfg.usize("replicates")?, 50);
    let seed = require(args.seed, cfg.u64("seed")?, "seed")?;
    let methods = pick(args.methods, cfg.string("methods")?, "both".into());
    let criteria_raw = pick(args.criteria, cfg.string("criteria")?, "delta_icon".into());
    let mut criteria = Vec::new();
    for part in criteria_raw.split(',') {
        criteria.push(parse_criterion(part.trim())?);
    }
    let mut config = BenchmarkConfig::new(scenario, n, censoring, replicates, seed);
    config.criteria = criteria;
    config.fit_tree = matches!(methods.as_str(), "tree" | "both");
    config.fit_forest = matches!(methods.as_str(), "forest" | "both");
    if !(config.fit_tree || config.fit_forest) {
        return Err(Error::InvalidParameter(format!(
            "methods must be tree, forest, or both, got `{methods}`"
        )));
    }
    config.grid_size = pick(args.q, cfg.usize("q")?, config.grid_size);
    config.n_min = pick(args.n_min, cfg.usize("n_min")?, config.n_min);
    config.n_trees = pick(args.b, cfg.usize("b")?, config.n_trees);
    config.feature_subset = args.m.or(cfg.usize("m")?);
    config.folds = pick(args.folds, cfg.usize("folds")?, config.folds);
    config.n_eval = pick(args.n_eval, cfg.usize("n_eval")?, config.n_eval);
    config.honest = args.honest || cfg.bool("honest")?.unwrap_or(false);

    println!(
        "benchmark: scenario {} n={} censoring={} replicates={} B={} seed={}",
        scenario, n, censoring, replicates, config.n_trees, seed
    );
    let report = run_benchmark(&config)?;
    if let Some(eta) = report.calibrated_parameter {
        println!("calibrated censoring parameter: {eta:.6}");
    }
    for &criterion in &config.criteria {
        for method in ["tree", "forest"] {
            if let Some(mean) = report.mean_iae(method, &criterion.to_string()) {
                println!(
                    "mean IAE x1000 [{method}, {criterion}]: {:.1}",
                    mean * 1000.0
                );
            }
        }
    }
    if !report.failures.is_empty() {
        for (rep, msg) in &report.failures {
            eprintln!("replicate {rep} failed: {msg}");
        }
    }
    if let Some(path) = &args.out {
        let file = std::fs::File::create(path)?;
        report.write_csv(std::io::BufWriter::new(file))?;
        println!("per-replicate errors written to {}", path.display());
    }
    let failed = report.failures.len();
    if failed * 10 > replicates {
        eprintln!("error: {failed} of {replicates} replicates failed");
        return Ok(3);
    }
    Ok(0)
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Scenario I..VII.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Target censoring proportion.
    #[arg(long)]
    censoring: Option<f64>,
    /// Random seed (required).
    #[arg(long)]
    seed: Option<u64>,
    /// Output long-format CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn simulate(args: SimulateArgs) -> Result<i32> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let scenario = parse_scenario(&require(
        args.scenario,
        cfg.string("scenario")?,
        "scenario",
    )?)?;
    let n = pick(args.n, cfg.usize("n")?, 200);
    let censoring = pick(args.censoring, cfg.f64("censoring")?, 0.0);
    let seed = require(args.seed, cfg.u64("seed")?, "seed")?;
    let out = require(args.out, cfg.string("out")?.map(PathBuf::from), "out")?;

    let mut spec = ScenarioSpec::new(scenario, n, censoring)?;
    spec.censoring_parameter = calibrate_censoring(
        &spec,
        DEFAULT_CALIBRATION_TOLERANCE,
        DEFAULT_CALIBRATION_DRAWS,
        &mut rocsurv::rng::stream(seed, "calibrate", 0),
    )?;
    if let Some(eta) = spec.censoring_parameter {
        println!("calibrated censoring parameter: {eta:.6}");
    }
    let (data, _) = generate(&spec, &mut rocsurv::rng::stream(seed, "simulate", 0))?;
    let censored = data.subjects().iter().filter(|s| !s.event()).count();
    println!(
        "scenario {}: n={} p={} censored={} ({:.1}%) horizon={:.4}",
        scenario,
        data.len(),
        data.dim(),
        censored,
        100.0 * censored as f64 / data.len() as f64,
        data.horizon()
    );
    let file = std::fs::File::create(&out)?;
    write_long_format(&data, std::io::BufWriter::new(file))?;
    println!("dataset written to {}", out.display());
    Ok(0)
}

#[derive(Args)]
pub struct EvalIconArgs {
    /// Long-format dataset the scores refer to.
    #[arg(long)]
    input: PathBuf,
    /// Score file (CSV: id,t,score); per subject, the row with the nearest
    /// `t` supplies the score at each evaluation time.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    q: Option<usize>,
    /// Kernel bandwidth; defaults to t0/20.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Optional CSV report (t,con_t).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn eval_icon(args: EvalIconArgs) -> Result<i32> {
    let data = read_long_format_file::<f64>(&args.input, args.horizon)?;
    let q = args.q.unwrap_or(rocsurv::DEFAULT_GRID_SIZE);
    let grid = uncensored_quantile_grid(&data, q)?;
    let h = args
        .h
        .unwrap_or_else(|| data.uncensored_reference_time() / 20.0);

    // per-subject scores sorted by time
    let mut table: std::collections::BTreeMap<String, Vec<(f64, f64)>> =
        std::collections::BTreeMap::new();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&args.scores)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "t" || &headers[2] != "score" {
        return Err(Error::BadFormat(
            "score file must have columns id,t,score".into(),
        ));
    }
    for record in reader.records() {
        let record = record?;
        let id = record[0].to_string();
        let t: f64 = record[1]
            .parse()
            .map_err(|_| Error::BadFormat(format!("bad t `{}` in score file", &record[1])))?;
        let s: f64 = record[2]
            .parse()
            .map_err(|_| Error::BadFormat(format!("bad score `{}`", &record[2])))?;
        table.entry(id).or_default().push((t, s));
    }
    for rows in table.values_mut() {
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }
    let nearest = |rows: &[(f64, f64)], t: f64| -> f64 {
        let right = rows.partition_point(|&(u, _)| u < t);
        if right == 0 {
            rows[0].1
        } else if right == rows.len() {
            rows[rows.len() - 1].1
        } else if t - rows[right - 1].0 <= rows[right].0 - t {
            rows[right - 1].1
        } else {
            rows[right].1
        }
    };
    let scores_of = |i: usize| -> Result<&Vec<(f64, f64)>> {
        let id = data.subjects()[i].id();
        table
            .get(id)
            .ok_or_else(|| Error::BadFormat(format!("no scores for subject `{id}`")))
    };
    for i in 0..data.len() {
        scores_of(i)?;
    }
    let report = marker_icon(
        &data,
        &grid,
        h,
        |i, k| Some(nearest(scores_of(i).unwrap(), grid.times()[k])),
        |i| {
            Some(nearest(
                scores_of(i).unwrap(),
                data.subjects()[i].observed_time(),
            ))
        },
    )?;
    println!("icon: {:.6}", report.icon);
    if let Some(path) = &args.out {
        let mut file = std::fs::File::create(path)?;
        report.write_csv(&mut file)?;
    }
    Ok(0)
}
