//! Scenario generators with known ground truth, censoring calibration, and
//! the integrated-absolute-error metric.
//!
//! Seven generative scenarios cover proportional and non-proportional
//! hazards, correlated and independent covariates, covariate-dependent
//! censoring, and time-dependent covariate paths. Each generated subject
//! carries a closed-form conditional survival oracle so prediction error can
//! be integrated exactly against the truth.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::data::{CovariatePath, Dataset, Segment};
use crate::error::{Error, Result};

/// Default number of piecewise-constant segments used to record
/// time-dependent covariate paths.
pub const DEFAULT_PATH_SEGMENTS: usize = 50;
/// Default Monte Carlo draws for censoring calibration.
pub const DEFAULT_CALIBRATION_DRAWS: usize = 100_000;
/// Default tolerance on the calibrated censoring proportion.
pub const DEFAULT_CALIBRATION_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 7] = [
        ScenarioId::I,
        ScenarioId::II,
        ScenarioId::III,
        ScenarioId::IV,
        ScenarioId::V,
        ScenarioId::VI,
        ScenarioId::VII,
    ];

    /// Number of observed covariates.
    pub fn dim(self) -> usize {
        match self {
            ScenarioId::I | ScenarioId::II | ScenarioId::III | ScenarioId::IV => 25,
            ScenarioId::V | ScenarioId::VI | ScenarioId::VII => 20,
        }
    }

    /// Whether covariate paths change over follow-up.
    pub fn is_time_dependent(self) -> bool {
        matches!(self, ScenarioId::V | ScenarioId::VI | ScenarioId::VII)
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ScenarioId::I => "I",
            ScenarioId::II => "II",
            ScenarioId::III => "III",
            ScenarioId::IV => "IV",
            ScenarioId::V => "V",
            ScenarioId::VI => "VI",
            ScenarioId::VII => "VII",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ScenarioId::I),
            "II" | "2" => Ok(ScenarioId::II),
            "III" | "3" => Ok(ScenarioId::III),
            "IV" | "4" => Ok(ScenarioId::IV),
            "V" | "5" => Ok(ScenarioId::V),
            "VI" | "6" => Ok(ScenarioId::VI),
            "VII" | "7" => Ok(ScenarioId::VII),
            other => Err(format!("unknown scenario `{other}` (expected I..VII)")),
        }
    }
}

/// A fully specified generative setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub n: usize,
    /// Target censoring proportion; 0 draws no censoring times at all.
    pub target_censoring: f64,
    /// Calibrated censoring parameter; `None` until calibrated (or 0%).
    pub censoring_parameter: Option<f64>,
    /// Scenario V covariate drift `kt + b`.
    pub drift_slope: f64,
    pub drift_intercept: f64,
    /// Segments used to record time-dependent paths.
    pub path_segments: usize,
}

impl ScenarioSpec {
    pub fn new(id: ScenarioId, n: usize, target_censoring: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&target_censoring) {
            return Err(Error::InvalidParameter(
                "target censoring must lie in [0, 1)".into(),
            ));
        }
        Ok(ScenarioSpec {
            id,
            n,
            target_censoring,
            censoring_parameter: None,
            drift_slope: 0.1,
            drift_intercept: 0.0,
            path_segments: DEFAULT_PATH_SEGMENTS,
        })
    }

    pub fn dim(&self) -> usize {
        self.id.dim()
    }
}

/// Closed-form conditional survival of one generated subject.
#[derive(Debug, Clone, PartialEq)]
pub enum TruthOracle {
    /// `T ~ Exponential(mean)`.
    ExponentialMean { mean: f64 },
    /// `T ~ Gamma(shape, scale)`.
    GammaShapeScale { shape: f64, scale: f64 },
    /// `log T ~ Normal(mu, 1)`.
    LogNormal { mu: f64 },
    /// `lambda(t) = exp(log_a + rate * t) / 10`.
    ExpLinearHazard { log_a: f64, rate: f64 },
    /// `lambda(t) = sum_j (t k_j / 10 - z_j)^2`.
    QuadraticHazard { k: Vec<f64>, z: Vec<f64> },
}

impl TruthOracle {
    /// `P(T >= t | Z^H(t))`.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self {
            TruthOracle::ExponentialMean { mean } => (-t / mean).exp(),
            TruthOracle::GammaShapeScale { shape, scale } => gamma_ur(*shape, t / scale),
            TruthOracle::LogNormal { mu } => 0.5 * erfc((t.ln() - mu) / std::f64::consts::SQRT_2),
            _ => (-self.cumulative_hazard(t)).exp(),
        }
    }

    /// `lambda(t | Z(t))`.
    pub fn hazard(&self, t: f64) -> f64 {
        match self {
            TruthOracle::ExponentialMean { mean } => 1.0 / mean,
            TruthOracle::GammaShapeScale { shape, scale } => {
                let surv = self.survival(t);
                if surv <= 0.0 {
                    return 0.0;
                }
                let density = (t / scale).powf(shape - 1.0) * (-t / scale).exp()
                    / (scale * statrs::function::gamma::gamma(*shape));
                density / surv
            }
            TruthOracle::LogNormal { mu } => {
                let surv = self.survival(t);
                if surv <= 0.0 || t <= 0.0 {
                    return 0.0;
                }
                let x = t.ln() - mu;
                let density = (-0.5 * x * x).exp() / (t * (2.0 * std::f64::consts::PI).sqrt());
                density / surv
            }
            TruthOracle::ExpLinearHazard { log_a, rate } => (log_a + rate * t).exp() / 10.0,
            TruthOracle::QuadraticHazard { k, z } => k
                .iter()
                .zip(z)
                .map(|(&kj, &zj)| {
                    let d = t * kj / 10.0 - zj;
                    d * d
                })
                .sum(),
        }
    }

    /// Integrated hazard on `[0, t]`.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        match self {
            TruthOracle::ExponentialMean { mean } => t / mean,
            TruthOracle::GammaShapeScale { .. } | TruthOracle::LogNormal { .. } => {
                -self.survival(t).max(f64::MIN_POSITIVE).ln()
            }
            TruthOracle::ExpLinearHazard { log_a, rate } => {
                if rate.abs() < 1e-14 {
                    log_a.exp() * t / 10.0
                } else {
                    log_a.exp() * ((rate * t).exp() - 1.0) / (10.0 * rate)
                }
            }
            TruthOracle::QuadraticHazard { k, z } => k
                .iter()
                .zip(z)
                .map(|(&kj, &zj)| {
                    kj * kj * t * t * t / 300.0 - kj * zj * t * t / 10.0 + zj * zj * t
                })
                .sum(),
        }
    }

    /// Event time with `Lambda(T) = e`, by analytic inversion where the
    /// cumulative hazard is invertible in closed form and bracketed
    /// bisection otherwise.
    fn invert(&self, e: f64) -> f64 {
        match self {
            TruthOracle::ExpLinearHazard { log_a, rate } => {
                if rate.abs() < 1e-14 {
                    10.0 * e * (-log_a).exp()
                } else {
                    (1.0 + 10.0 * rate * e * (-log_a).exp()).ln() / rate
                }
            }
            TruthOracle::QuadraticHazard { .. } => {
                let mut hi = 1.0;
                let mut guard = 0;
                while self.cumulative_hazard(hi) < e && guard < 200 {
                    hi *= 2.0;
                    guard += 1;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if hi - lo < 1e-10 * hi.max(1.0) {
                        break;
                    }
                    if self.cumulative_hazard(mid) < e {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
            _ => unreachable!("closed-form scenarios sample directly"),
        }
    }
}

/// One simulated subject before censoring: the raw covariate process, the
/// event time, and its truth oracle.
struct Draw {
    /// Baseline values for static scenarios; process parameters otherwise.
    statics: Vec<f64>,
    /// Per-coordinate linear slopes of the time-dependent part.
    slopes: Vec<f64>,
    event_time: f64,
    oracle: TruthOracle,
}

impl Draw {
    /// Raw covariate vector at `t`.
    fn value_at(&self, t: f64, id: ScenarioId, drift: (f64, f64)) -> Vec<f64> {
        match id {
            ScenarioId::I | ScenarioId::II | ScenarioId::III | ScenarioId::IV => {
                self.statics.clone()
            }
            ScenarioId::V => {
                let (k, _) = drift;
                let mut v: Vec<f64> = self.statics[..10].iter().map(|&z0| z0 + k * t).collect();
                v.extend_from_slice(&self.statics[10..]);
                v
            }
            ScenarioId::VI | ScenarioId::VII => {
                let mut v: Vec<f64> = self.slopes.iter().map(|&kj| t * kj / 10.0).collect();
                v.extend_from_slice(&self.statics[10..]);
                v
            }
        }
    }
}

/// Stationary AR(1) Gaussian vector: the triangular factor of the covariance
/// `rho^|i-j|` applied to i.i.d. normals.
fn ar1_normal<R: Rng>(rng: &mut R, p: usize, rho: f64) -> Vec<f64> {
    let scale = (1.0 - rho * rho).sqrt();
    let mut z = Vec::with_capacity(p);
    let mut prev: f64 = StandardNormal.sample(rng);
    z.push(prev);
    for _ in 1..p {
        let e: f64 = StandardNormal.sample(rng);
        prev = rho * prev + scale * e;
        z.push(prev);
    }
    z
}

fn exp1<R: Rng>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Scenario II mean lifetime given the first three covariates.
pub(crate) fn scenario_ii_mean(z1: f64, z2: f64, z3: f64) -> f64 {
    (z1 * std::f64::consts::PI).sin() + 2.0 * (z2 - 0.5).abs() + z3 * z3 * z3
}

fn draw_subject<R: Rng>(spec: &ScenarioSpec, rng: &mut R) -> Draw {
    match spec.id {
        ScenarioId::I => {
            let z = ar1_normal(rng, 25, 0.9);
            let mean = (0.1 * z[10..25].iter().sum::<f64>()).exp();
            let event_time = mean * exp1(rng);
            Draw {
                statics: z,
                slopes: Vec::new(),
                event_time,
                oracle: TruthOracle::ExponentialMean { mean },
            }
        }
        ScenarioId::II => {
            let z: Vec<f64> = (0..25).map(|_| rng.random::<f64>()).collect();
            let mean = scenario_ii_mean(z[0], z[1], z[2]).max(1e-12);
            let event_time = mean * exp1(rng);
            Draw {
                statics: z,
                slopes: Vec::new(),
                event_time,
                oracle: TruthOracle::ExponentialMean { mean },
            }
        }
        ScenarioId::III => {
            let z = ar1_normal(rng, 25, 0.75);
            let shape = 0.5 + 0.3 * z[10..15].iter().sum::<f64>().abs();
            let scale = 2.0;
            let gamma = Gamma::new(shape, scale).expect("positive shape and scale");
            let event_time: f64 = gamma.sample(rng);
            let event_time = event_time.max(f64::MIN_POSITIVE);
            Draw {
                statics: z,
                slopes: Vec::new(),
                event_time,
                oracle: TruthOracle::GammaShapeScale { shape, scale },
            }
        }
        ScenarioId::IV => {
            let z = ar1_normal(rng, 25, 0.75);
            let mu = 0.1 * z[0..5].iter().sum::<f64>().abs()
                + 0.1 * z[20..25].iter().sum::<f64>().abs();
            let e: f64 = StandardNormal.sample(rng);
            let event_time = (mu + e).exp();
            Draw {
                statics: z,
                slopes: Vec::new(),
                event_time,
                oracle: TruthOracle::LogNormal { mu },
            }
        }
        ScenarioId::V => {
            let k = spec.drift_slope;
            let b = spec.drift_intercept;
            let z0: Vec<f64> = ar1_normal(rng, 10, 0.9).iter().map(|v| v + b).collect();
            let stat: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
            let log_a = 0.5 * z0.iter().sum::<f64>() + stat[0];
            let rate = 0.5 * 10.0 * k;
            let oracle = TruthOracle::ExpLinearHazard { log_a, rate };
            let event_time = oracle.invert(exp1(rng)).max(f64::MIN_POSITIVE);
            let mut statics = z0;
            statics.extend(stat);
            Draw {
                statics,
                slopes: Vec::new(),
                event_time,
                oracle,
            }
        }
        ScenarioId::VI | ScenarioId::VII => {
            let (k, stat): (Vec<f64>, Vec<f64>) = if spec.id == ScenarioId::VI {
                (
                    (0..10).map(|_| rng.random::<f64>()).collect(),
                    (0..10).map(|_| rng.random::<f64>()).collect(),
                )
            } else {
                (
                    ar1_normal(rng, 10, 0.9).iter().map(|v| v + 1.0).collect(),
                    (0..10).map(|_| StandardNormal.sample(rng)).collect(),
                )
            };
            let oracle = TruthOracle::QuadraticHazard {
                k: k.clone(),
                z: stat.clone(),
            };
            let event_time = oracle.invert(exp1(rng)).max(f64::MIN_POSITIVE);
            let mut statics = vec![0.0; 10];
            statics.extend(stat);
            Draw {
                statics,
                slopes: k,
                event_time,
                oracle,
            }
        }
    }
}

/// Censoring time for one subject; `None` under 0% censoring.
fn draw_censoring<R: Rng>(spec: &ScenarioSpec, oracle: &TruthOracle, rng: &mut R) -> Option<f64> {
    let eta = spec.censoring_parameter?;
    Some(match spec.id {
        ScenarioId::I => eta * exp1(rng),
        ScenarioId::II | ScenarioId::III | ScenarioId::V | ScenarioId::VI | ScenarioId::VII => {
            eta * rng.random::<f64>()
        }
        ScenarioId::IV => {
            let mu = match oracle {
                TruthOracle::LogNormal { mu } => *mu,
                _ => unreachable!(),
            };
            let e: f64 = StandardNormal.sample(rng);
            (mu + eta + e).exp()
        }
    })
}

/// Builds the recorded covariate path on `(0, extent]`.
fn build_path(
    spec: &ScenarioSpec,
    draw: &Draw,
    id: String,
    extent: f64,
    event: bool,
) -> Result<CovariatePath<f64>> {
    let drift = (spec.drift_slope, spec.drift_intercept);
    if !spec.id.is_time_dependent() {
        return CovariatePath::constant(id, draw.statics.clone(), extent, event);
    }
    let m = spec.path_segments.max(1);
    let mut segments = Vec::with_capacity(m);
    let step = extent / m as f64;
    for j in 0..m {
        let start = step * j as f64;
        let stop = if j + 1 == m { extent } else { step * (j + 1) as f64 };
        segments.push(Segment {
            start,
            stop,
            values: draw.value_at(start, spec.id, drift),
        });
    }
    CovariatePath::new(id, segments, event)
}

/// Generates a right-censored training set with per-subject truth oracles.
/// Requires `censoring_parameter` to be set when `target_censoring > 0`.
pub fn generate<R: Rng>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<(Dataset<f64>, Vec<TruthOracle>)> {
    if spec.target_censoring > 0.0 && spec.censoring_parameter.is_none() {
        return Err(Error::InvalidParameter(
            "scenario not calibrated: censoring parameter missing".into(),
        ));
    }
    let mut subjects = Vec::with_capacity(spec.n);
    let mut oracles = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let draw = draw_subject(spec, rng);
        let censoring = draw_censoring(spec, &draw.oracle, rng);
        let (y, event) = match censoring {
            Some(c) if c < draw.event_time => (c, false),
            _ => (draw.event_time, true),
        };
        let y = y.max(f64::MIN_POSITIVE);
        subjects.push(build_path(spec, &draw, format!("{}", i + 1), y, event)?);
        oracles.push(draw.oracle);
    }
    let data = Dataset::new(subjects, None)?;
    Ok((data, oracles))
}

/// Generates fresh evaluation subjects: uncensored covariate paths recorded
/// out to `horizon` plus their truth oracles.
pub fn generate_evaluation<R: Rng>(
    spec: &ScenarioSpec,
    n_eval: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<(CovariatePath<f64>, TruthOracle)>> {
    let mut out = Vec::with_capacity(n_eval);
    for i in 0..n_eval {
        let draw = draw_subject(spec, rng);
        let extent = horizon.max(draw.event_time);
        let path = build_path(spec, &draw, format!("eval-{}", i + 1), extent, false)?;
        out.push((path, draw.oracle));
    }
    Ok(out)
}

/// Calibrates the censoring parameter by bisection on presampled Monte Carlo
/// draws until the simulated censoring proportion is within `tolerance` of
/// the target.
pub fn calibrate_censoring<R: Rng>(
    spec: &ScenarioSpec,
    tolerance: f64,
    draws: usize,
    rng: &mut R,
) -> Result<Option<f64>> {
    if spec.target_censoring <= 0.0 {
        return Ok(None);
    }
    let target = spec.target_censoring;
    // presample (event time, censoring noise, location) so the censoring
    // proportion is a deterministic monotone function of eta
    let mut uncensored_spec = spec.clone();
    uncensored_spec.censoring_parameter = None;
    let mut events = Vec::with_capacity(draws);
    let mut noise = Vec::with_capacity(draws);
    let mut location = Vec::with_capacity(draws);
    for _ in 0..draws {
        let draw = draw_subject(&uncensored_spec, rng);
        events.push(draw.event_time);
        match spec.id {
            ScenarioId::I => noise.push(exp1(rng)),
            ScenarioId::IV => {
                let mu = match &draw.oracle {
                    TruthOracle::LogNormal { mu } => *mu,
                    _ => unreachable!(),
                };
                location.push(mu);
                let e: f64 = StandardNormal.sample(rng);
                noise.push(e);
            }
            _ => noise.push(rng.random::<f64>()),
        }
    }
    let proportion = |eta: f64| -> f64 {
        let mut censored = 0usize;
        for i in 0..draws {
            let c = match spec.id {
                ScenarioId::IV => (location[i] + eta + noise[i]).exp(),
                _ => eta * noise[i],
            };
            if c < events[i] {
                censored += 1;
            }
        }
        censored as f64 / draws as f64
    };

    // censoring decreases as eta grows in every family
    let (mut lo, mut hi) = if spec.id == ScenarioId::IV {
        (-1.0, 1.0)
    } else {
        (1e-9, 1.0)
    };
    let mut guard = 0;
    while proportion(hi) > target {
        if spec.id == ScenarioId::IV {
            hi += hi.abs().max(1.0);
        } else {
            hi *= 2.0;
        }
        guard += 1;
        if guard > 200 {
            return Err(Error::CalibrationBracket);
        }
    }
    guard = 0;
    while proportion(lo) < target {
        if spec.id == ScenarioId::IV {
            lo -= lo.abs().max(1.0);
        } else {
            lo /= 2.0;
            if lo < 1e-300 {
                return Err(Error::CalibrationBracket);
            }
        }
        guard += 1;
        if guard > 200 {
            return Err(Error::CalibrationBracket);
        }
    }
    let mut eta = 0.5 * (lo + hi);
    for _ in 0..200 {
        eta = 0.5 * (lo + hi);
        let p = proportion(eta);
        if (p - target).abs() <= tolerance {
            return Ok(Some(eta));
        }
        if p > target {
            lo = eta;
        } else {
            hi = eta;
        }
    }
    Ok(Some(eta))
}

/// Integrated absolute error of a survival predictor against the truth:
/// the trapezoid integral of `|predicted - true|` over a 200-point uniform
/// grid on `[0, s]`, averaged over subjects and divided by `s`.
///
/// `predict` maps a covariate path and ascending times to a survival curve;
/// non-finite predictions are replaced by the nearest finite value on the
/// curve and counted as warnings.
pub fn iae<P>(
    predict: P,
    subjects: &[(CovariatePath<f64>, TruthOracle)],
    s: f64,
) -> Result<(f64, usize)>
where
    P: Fn(&CovariatePath<f64>, &[f64]) -> Result<Vec<f64>> + Sync,
{
    use rayon::prelude::*;
    if subjects.is_empty() || !(s > 0.0) {
        return Err(Error::InvalidParameter(
            "IAE needs subjects and a positive horizon".into(),
        ));
    }
    let m = 200usize;
    let times: Vec<f64> = (0..m).map(|i| s * i as f64 / (m - 1) as f64).collect();
    let per_subject: Vec<Result<(f64, usize)>> = subjects
        .par_iter()
        .map(|(path, oracle)| {
            let mut curve = predict(path, &times)?;
            let warnings = sanitize_curve(&mut curve);
            let mut acc = 0.0;
            let mut prev = (curve[0] - oracle.survival(times[0])).abs();
            for i in 1..m {
                let cur = (curve[i] - oracle.survival(times[i])).abs();
                acc += 0.5 * (prev + cur) * (times[i] - times[i - 1]);
                prev = cur;
            }
            Ok((acc, warnings))
        })
        .collect();
    let mut total = 0.0;
    let mut warnings = 0usize;
    for r in per_subject {
        let (v, w) = r?;
        total += v;
        warnings += w;
    }
    Ok((total / (subjects.len() as f64 * s), warnings))
}

/// Replaces non-finite entries by the nearest finite neighbour; returns how
/// many were replaced.
fn sanitize_curve(curve: &mut [f64]) -> usize {
    let mut warnings = 0;
    for i in 0..curve.len() {
        if !curve[i].is_finite() {
            warnings += 1;
            let nearest = (0..curve.len())
                .filter(|&j| curve[j].is_finite())
                .min_by_key(|&j| (j as isize - i as isize).unsigned_abs());
            curve[i] = nearest.map_or(1.0, |j| curve[j]);
        }
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn scenario_ii_mean_example() {
        let m = scenario_ii_mean(0.5, 0.5, 0.5);
        assert!((m - 1.125).abs() < 1e-15);
    }

    #[test]
    fn zero_covariates_give_unit_mean() {
        // Scenario I with all relevant covariates at 0 has mean exp(0) = 1
        let oracle = TruthOracle::ExponentialMean { mean: (0.0f64).exp() };
        assert!((oracle.survival(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(oracle.survival(0.0), 1.0);
    }

    #[test]
    fn quadratic_cumulative_hazard_matches_numeric_integral() {
        let oracle = TruthOracle::QuadraticHazard {
            k: vec![0.3, 0.9, 0.1, 0.5, 0.7, 0.2, 0.8, 0.4, 0.6, 0.05],
            z: vec![0.5, 0.1, 0.9, 0.3, 0.2, 0.7, 0.4, 0.8, 0.6, 0.35],
        };
        for t in [0.3, 1.0, 2.5] {
            let m = 40_000;
            let mut num = 0.0;
            for i in 0..m {
                let u = t * (i as f64 + 0.5) / m as f64;
                num += oracle.hazard(u) * t / m as f64;
            }
            let closed = oracle.cumulative_hazard(t);
            assert!((num - closed).abs() < 1e-6 * closed.max(1.0));
        }
    }

    #[test]
    fn inversion_solves_cumulative_hazard() {
        let oracle = TruthOracle::QuadraticHazard {
            k: vec![0.5; 10],
            z: vec![0.4; 10],
        };
        for e in [0.1, 0.7, 2.3] {
            let t = oracle.invert(e);
            assert!((oracle.cumulative_hazard(t) - e).abs() < 1e-7);
        }
        let exp = TruthOracle::ExpLinearHazard { log_a: 0.3, rate: 0.5 };
        for e in [0.2, 1.5] {
            let t = exp.invert(e);
            assert!((exp.cumulative_hazard(t) - e).abs() < 1e-10);
        }
    }

    #[test]
    fn generation_is_reproducible_and_well_formed() {
        for id in ScenarioId::ALL {
            let spec = ScenarioSpec::new(id, 40, 0.0).unwrap();
            let (d1, o1) = generate(&spec, &mut stream(3, "gen", 0)).unwrap();
            let (d2, _) = generate(&spec, &mut stream(3, "gen", 0)).unwrap();
            assert_eq!(d1, d2, "scenario {id}");
            assert_eq!(d1.dim(), id.dim());
            assert_eq!(o1.len(), 40);
            // all events under 0% censoring
            assert!(d1.subjects().iter().all(|s| s.event()));
            for (s, o) in d1.subjects().iter().zip(&o1) {
                assert!(s.observed_time() > 0.0);
                let surv = o.survival(s.observed_time());
                assert!((0.0..=1.0).contains(&surv));
            }
        }
    }

    #[test]
    fn survival_is_monotone_and_consistent_with_hazard() {
        let spec = ScenarioSpec::new(ScenarioId::VI, 5, 0.0).unwrap();
        let (_, oracles) = generate(&spec, &mut stream(9, "gen", 0)).unwrap();
        for o in &oracles {
            let mut prev = 1.0;
            for i in 1..30 {
                let t = i as f64 * 0.1;
                let s = o.survival(t);
                assert!(s <= prev + 1e-15);
                assert!(s > 0.0);
                assert!(o.hazard(t) >= 0.0);
                prev = s;
            }
        }
    }

    #[test]
    fn uniform_censoring_monotonicity() {
        // larger eta -> longer censoring times -> fewer censored subjects
        let spec = ScenarioSpec::new(ScenarioId::II, 400, 0.25).unwrap();
        let censor_rate = |eta: f64| {
            let mut spec = spec.clone();
            spec.censoring_parameter = Some(eta);
            let (data, _) = generate(&spec, &mut stream(5, "mono", 0)).unwrap();
            data.subjects().iter().filter(|s| !s.event()).count() as f64 / 400.0
        };
        let lo = censor_rate(0.5);
        let hi = censor_rate(4.0);
        assert!(lo > hi, "censoring {lo} should exceed {hi}");
    }

    #[test]
    fn calibration_hits_target() {
        let spec = ScenarioSpec::new(ScenarioId::II, 0, 0.25).unwrap();
        let eta = calibrate_censoring(&spec, 0.005, 20_000, &mut stream(7, "cal", 0))
            .unwrap()
            .unwrap();
        let mut spec2 = ScenarioSpec::new(ScenarioId::II, 5000, 0.25).unwrap();
        spec2.censoring_parameter = Some(eta);
        let (data, _) = generate(&spec2, &mut stream(8, "chk", 0)).unwrap();
        let rate = data.subjects().iter().filter(|s| !s.event()).count() as f64 / 5000.0;
        assert!((rate - 0.25).abs() < 0.03, "rate {rate}");
    }

    #[test]
    fn zero_target_is_uncalibrated() {
        let spec = ScenarioSpec::new(ScenarioId::I, 0, 0.0).unwrap();
        let eta = calibrate_censoring(&spec, 0.005, 1000, &mut stream(1, "cal", 0)).unwrap();
        assert!(eta.is_none());
    }

    #[test]
    fn iae_trivial_cases() {
        let spec = ScenarioSpec::new(ScenarioId::I, 0, 0.0).unwrap();
        let subjects = generate_evaluation(&spec, 30, 2.0, &mut stream(4, "eval", 0)).unwrap();
        // perfect predictor
        let (v, w) = iae(
            |path, times| {
                let oracle = subjects
                    .iter()
                    .find(|(p, _)| p.id() == path.id())
                    .map(|(_, o)| o)
                    .unwrap();
                Ok(times.iter().map(|&t| oracle.survival(t)).collect())
            },
            &subjects,
            2.0,
        )
        .unwrap();
        assert!(v < 1e-15);
        assert_eq!(w, 0);
        // constant offset of 0.1, clipped into [0, 1]
        let (v, _) = iae(
            |path, times| {
                let oracle = subjects
                    .iter()
                    .find(|(p, _)| p.id() == path.id())
                    .map(|(_, o)| o)
                    .unwrap();
                Ok(times
                    .iter()
                    .map(|&t| (oracle.survival(t) + 0.1).min(1.0))
                    .collect())
            },
            &subjects,
            2.0,
        )
        .unwrap();
        assert!(v > 0.05 && v <= 0.1 + 1e-12, "offset IAE {v}");
    }

    #[test]
    fn time_dependent_paths_follow_the_process() {
        let spec = ScenarioSpec::new(ScenarioId::VI, 10, 0.0).unwrap();
        let (data, _) = generate(&spec, &mut stream(6, "gen", 0)).unwrap();
        for s in data.subjects() {
            // coordinates 0..10 increase linearly from zero
            let y = s.observed_time();
            let early = s.value_at(y * 0.11);
            let late = s.value_at(y * 0.93);
            for c in 0..10 {
                assert!(late[c] >= early[c]);
            }
            // static block is constant
            for c in 10..20 {
                assert_eq!(early[c], late[c]);
            }
        }
    }
}
