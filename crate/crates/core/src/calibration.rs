//! Patient-specific parameter fitting: forward-model misfit against measured
//! volume series, minimized by a bounded derivative-free simplex search.
//!
//! The growth exponent acts as a regime switch (localized vs. spreading), so
//! it is handled as a categorical value enumerated outside the continuous
//! search rather than as a simplex coordinate.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{run_scenario, ScenarioConfig};

/// Default floor of the relative-error denominator: 100 mm³ (1e-7 m³).
pub const DEFAULT_VOLUME_FLOOR_MM3: f64 = 100.0;

/// One volumetric measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementPoint {
    pub t_days: f64,
    pub volume_mm3: f64,
    /// Masked-out points stay in the series but do not enter the misfit.
    pub include: bool,
}

/// Measured volume series with provenance label.
#[derive(Debug, Clone, Default)]
pub struct MeasurementSeries {
    pub label: String,
    pub points: Vec<MeasurementPoint>,
}

impl MeasurementSeries {
    pub fn new(label: impl Into<String>, points: Vec<MeasurementPoint>) -> Result<Self> {
        let series = Self {
            label: label.into(),
            points,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.points.windows(2) {
            if pair[1].t_days < pair[0].t_days {
                return Err(Error::invalid_input(
                    "measurement times must be non-decreasing",
                ));
            }
        }
        if let Some(p) = self.points.iter().find(|p| p.volume_mm3 < 0.0) {
            return Err(Error::invalid_input(format!(
                "negative measured volume at day {}",
                p.t_days
            )));
        }
        Ok(())
    }

    /// Parse delimited text with a required `t_days, volume_mm3` header.
    pub fn from_reader<R: std::io::Read>(label: &str, reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        {
            let headers = csv.headers()?;
            let got: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
            if got != ["t_days", "volume_mm3"] {
                return Err(Error::config(format!(
                    "measurement file needs header 't_days, volume_mm3', got {got:?}"
                )));
            }
        }
        let mut points = Vec::new();
        for row in csv.records() {
            let row = row?;
            let t: f64 = row
                .get(0)
                .ok_or_else(|| Error::config("missing t_days column"))?
                .parse()
                .map_err(|e| Error::config(format!("bad t_days value: {e}")))?;
            let mm3: f64 = row
                .get(1)
                .ok_or_else(|| Error::config("missing volume_mm3 column"))?
                .parse()
                .map_err(|e| Error::config(format!("bad volume_mm3 value: {e}")))?;
            points.push(MeasurementPoint {
                t_days: t,
                volume_mm3: mm3,
                include: true,
            });
        }
        Self::new(label, points)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let label = path.as_ref().display().to_string();
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_reader(&label, std::io::BufReader::new(file))
    }

    /// Mask out a measurement by index (e.g. an unreliable first data point).
    pub fn exclude(&mut self, index: usize) {
        if let Some(p) = self.points.get_mut(index) {
            p.include = false;
        }
    }
}

/// Continuously searchable scenario parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamId {
    ProliferationRate,
    TherapyEfficacy,
    NecrosisRate,
}

impl ParamId {
    fn apply(self, config: &mut ScenarioConfig, value: f64) {
        match self {
            ParamId::ProliferationRate => config.growth.proliferation_rate = value,
            ParamId::TherapyEfficacy => config.therapy.efficacy = value,
            ParamId::NecrosisRate => config.growth.necrosis_rate = value,
        }
    }
}

/// One free parameter with box bounds and a start value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FreeParameter {
    pub param: ParamId,
    pub lower: f64,
    pub upper: f64,
    pub start: f64,
}

/// The full calibration problem: a base scenario, the free parameters, the
/// optional categorical growth-exponent values, and the measurements.
#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    pub scenario: ScenarioConfig,
    pub free: Vec<FreeParameter>,
    /// Growth-exponent values enumerated outside the continuous search;
    /// `None` keeps the scenario's exponent fixed.
    pub exponent_values: Option<Vec<f64>>,
    pub measurements: MeasurementSeries,
    pub volume_floor_mm3: f64,
}

impl CalibrationProblem {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.measurements.validate()?;
        for f in &self.free {
            if !(f.lower.is_finite() && f.upper.is_finite() && f.lower < f.upper) {
                return Err(Error::Calibration(format!(
                    "bounds of {:?} must be finite with lower < upper",
                    f.param
                )));
            }
            if f.start < f.lower || f.start > f.upper {
                return Err(Error::Calibration(format!(
                    "start value {} of {:?} outside [{}, {}]",
                    f.start, f.param, f.lower, f.upper
                )));
            }
        }
        if let Some(values) = &self.exponent_values {
            if values.is_empty() {
                return Err(Error::Calibration(
                    "exponent_values must not be empty when given".into(),
                ));
            }
        }
        if !(self.volume_floor_mm3 > 0.0) {
            return Err(Error::Calibration("volume floor must be positive".into()));
        }
        if self.measurements.points.iter().all(|p| !p.include) {
            return Err(Error::Calibration("all measurements are masked out".into()));
        }
        Ok(())
    }

    fn configured(&self, values: &[f64], exponent: Option<f64>) -> ScenarioConfig {
        let mut c = self.scenario.clone();
        for (f, &v) in self.free.iter().zip(values) {
            f.param.apply(&mut c, v);
        }
        if let Some(e) = exponent {
            c.growth.growth_exponent = e;
        }
        // Simulate just past the last included measurement.
        let t_max = self
            .measurements
            .points
            .iter()
            .filter(|p| p.include)
            .map(|p| p.t_days)
            .fold(0.0f64, f64::max);
        c.time.end_day = t_max;
        c
    }
}

/// Sum of squared relative volume errors of the forward run at the given
/// free-parameter values.
pub fn misfit(
    problem: &CalibrationProblem,
    values: &[f64],
    exponent: Option<f64>,
) -> Result<f64> {
    if values.len() != problem.free.len() {
        return Err(Error::Calibration(format!(
            "{} values supplied for {} free parameters",
            values.len(),
            problem.free.len()
        )));
    }
    for (f, &v) in problem.free.iter().zip(values) {
        if v < f.lower || v > f.upper {
            return Err(Error::Calibration(format!(
                "value {v} of {:?} outside bounds [{}, {}]",
                f.param, f.lower, f.upper
            )));
        }
    }
    let config = problem.configured(values, exponent);
    let run = run_scenario(&config).map_err(|fail| {
        Error::Calibration(format!(
            "forward run failed at {values:?} (exponent {exponent:?}): {fail}"
        ))
    })?;
    let mut total = 0.0;
    for p in problem.measurements.points.iter().filter(|p| p.include) {
        let sim = run
            .series
            .visible_volume_at(p.t_days)
            .expect("forward run produced records");
        let denom = p.volume_mm3.max(problem.volume_floor_mm3);
        let rel = (sim - p.volume_mm3) / denom;
        total += rel * rel;
    }
    Ok(total)
}

/// One recorded objective evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub values: Vec<f64>,
    pub exponent: Option<f64>,
    pub misfit: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub best_values: Vec<f64>,
    pub best_exponent: Option<f64>,
    pub best_misfit: f64,
    pub converged: bool,
    pub trace: Vec<Evaluation>,
}

/// On-disk description of a calibration problem (TOML).
///
/// The scenario comes either from a preset name or a full `[scenario]`
/// table; the measurement path is resolved relative to the file location.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub preset: Option<String>,
    pub scenario: Option<ScenarioConfig>,
    pub measurements: String,
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    pub exponent_values: Option<Vec<f64>>,
    #[serde(default = "default_floor")]
    pub volume_floor_mm3: f64,
    /// Indices of measurement points masked out of the misfit.
    #[serde(default)]
    pub exclude_points: Vec<usize>,
    pub free: Vec<FreeParameter>,
}

fn default_floor() -> f64 {
    DEFAULT_VOLUME_FLOOR_MM3
}

impl CalibrationFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        toml::from_str(&text).map_err(|e| Error::config(format!("calibration config: {e}")))
    }

    pub fn into_problem(self, base_dir: Option<&Path>) -> Result<CalibrationProblem> {
        let scenario = match (self.preset, self.scenario) {
            (Some(name), None) => crate::scenario::Preset::from_name(&name)?.config(),
            (None, Some(s)) => s,
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "give either a preset name or a [scenario] table, not both",
                ))
            }
            (None, None) => {
                return Err(Error::config(
                    "calibration needs a preset name or a [scenario] table",
                ))
            }
        };
        let mut measurement_path = std::path::PathBuf::from(&self.measurements);
        if measurement_path.is_relative() {
            if let Some(dir) = base_dir {
                measurement_path = dir.join(measurement_path);
            }
        }
        let mut measurements = MeasurementSeries::from_file(&measurement_path)?;
        for &i in &self.exclude_points {
            if i >= measurements.points.len() {
                return Err(Error::config(format!(
                    "exclude_points index {i} out of range ({} measurements)",
                    measurements.points.len()
                )));
            }
            measurements.exclude(i);
        }
        let problem = CalibrationProblem {
            scenario,
            free: self.free,
            exponent_values: self.exponent_values,
            measurements,
            volume_floor_mm3: self.volume_floor_mm3,
        };
        problem.validate()?;
        Ok(problem)
    }
}

struct Budget {
    used: usize,
    max: usize,
}

/// Bounded Nelder-Mead over the continuous parameters, with the categorical
/// exponent values enumerated round-robin over the remaining budget.
///
/// Deterministic for a fixed seed and start. The initial simplex steps are
/// drawn from a seeded generator at 5-15% of each parameter range; candidate
/// points are restarted at their projection onto the bounds.
pub fn fit(problem: &CalibrationProblem, budget: usize, seed: u64) -> Result<FitResult> {
    problem.validate()?;
    if budget < 10 {
        return Err(Error::Calibration(format!(
            "budget must be at least 10 forward runs, got {budget}"
        )));
    }

    let exponents: Vec<Option<f64>> = match &problem.exponent_values {
        Some(values) => values.iter().copied().map(Some).collect(),
        None => vec![None],
    };

    let mut trace = Vec::new();
    let mut budget = Budget {
        used: 0,
        max: budget,
    };

    let start: Vec<f64> = problem.free.iter().map(|f| f.start).collect();

    if problem.free.is_empty() {
        // Nothing to search: evaluate the start (per exponent) and return.
        let mut best: Option<Evaluation> = None;
        for &e in &exponents {
            if budget.used >= budget.max {
                break;
            }
            budget.used += 1;
            let m = misfit(problem, &start, e)?;
            let eval = Evaluation {
                values: start.clone(),
                exponent: e,
                misfit: m,
            };
            trace.push(eval.clone());
            if best.as_ref().map(|b| m < b.misfit).unwrap_or(true) {
                best = Some(eval);
            }
        }
        let best = best.expect("at least one evaluation fits in the budget");
        return Ok(FitResult {
            best_values: best.values,
            best_exponent: best.exponent,
            best_misfit: best.misfit,
            converged: true,
            trace,
        });
    }

    let per_exponent = budget.max / exponents.len();
    let mut overall: Option<(Vec<f64>, Option<f64>, f64)> = None;
    let mut converged = true;
    for (i, &exponent) in exponents.iter().enumerate() {
        let slice_max = if i + 1 == exponents.len() {
            budget.max
        } else {
            budget.used + per_exponent
        };
        let (values, m, conv) = nelder_mead(
            problem,
            exponent,
            &start,
            seed,
            &mut budget,
            slice_max,
            &mut trace,
        )?;
        converged &= conv;
        if overall.as_ref().map(|(_, _, best)| m < *best).unwrap_or(true) {
            overall = Some((values, exponent, m));
        }
    }
    let (best_values, best_exponent, best_misfit) =
        overall.expect("at least one exponent was searched");
    Ok(FitResult {
        best_values,
        best_exponent,
        best_misfit,
        converged,
        trace,
    })
}

fn clamp_to_bounds(problem: &CalibrationProblem, x: &mut [f64]) {
    for (f, v) in problem.free.iter().zip(x.iter_mut()) {
        *v = v.clamp(f.lower, f.upper);
    }
}

#[allow(clippy::too_many_arguments)]
fn nelder_mead(
    problem: &CalibrationProblem,
    exponent: Option<f64>,
    start: &[f64],
    seed: u64,
    budget: &mut Budget,
    slice_max: usize,
    trace: &mut Vec<Evaluation>,
) -> Result<(Vec<f64>, f64, bool)> {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink
    const FTOL: f64 = 1e-10;

    let dim = start.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let evaluate = |x: &[f64], budget: &mut Budget, trace: &mut Vec<Evaluation>| -> Result<Option<f64>> {
        if budget.used >= slice_max.min(budget.max) {
            return Ok(None);
        }
        budget.used += 1;
        let m = misfit(problem, x, exponent)?;
        trace.push(Evaluation {
            values: x.to_vec(),
            exponent,
            misfit: m,
        });
        Ok(Some(m))
    };

    // Initial simplex: the start plus one perturbed vertex per dimension.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = evaluate(start, budget, trace)?.ok_or_else(|| {
        Error::Calibration("budget exhausted before evaluating the start".into())
    })?;
    simplex.push((start.to_vec(), f0));
    for d in 0..dim {
        let f = &problem.free[d];
        let range = f.upper - f.lower;
        let magnitude = range * rng.gen_range(0.05..0.15);
        let mut x = start.to_vec();
        // Step away from the nearer bound.
        x[d] += if f.upper - x[d] >= magnitude { magnitude } else { -magnitude };
        clamp_to_bounds(problem, &mut x);
        match evaluate(&x, budget, trace)? {
            Some(fx) => simplex.push((x, fx)),
            None => {
                let best = simplex
                    .iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap()
                    .clone();
                return Ok((best.0, best.1, false));
            }
        }
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex.last().unwrap().1 - simplex[0].1;
        if spread <= FTOL * (simplex[0].1.abs() + FTOL) {
            return Ok((simplex[0].0.clone(), simplex[0].1, true));
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for (x, _) in simplex.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += x[d] / dim as f64;
            }
        }
        let worst = simplex.last().unwrap().clone();

        let mut reflected = vec![0.0; dim];
        for d in 0..dim {
            reflected[d] = centroid[d] + ALPHA * (centroid[d] - worst.0[d]);
        }
        clamp_to_bounds(problem, &mut reflected);
        let Some(f_ref) = evaluate(&reflected, budget, trace)? else {
            return Ok((simplex[0].0.clone(), simplex[0].1, false));
        };

        if f_ref < simplex[0].1 {
            // Try to expand.
            let mut expanded = vec![0.0; dim];
            for d in 0..dim {
                expanded[d] = centroid[d] + GAMMA * (reflected[d] - centroid[d]);
            }
            clamp_to_bounds(problem, &mut expanded);
            match evaluate(&expanded, budget, trace)? {
                Some(f_exp) if f_exp < f_ref => {
                    *simplex.last_mut().unwrap() = (expanded, f_exp);
                }
                Some(_) => *simplex.last_mut().unwrap() = (reflected, f_ref),
                None => {
                    *simplex.last_mut().unwrap() = (reflected, f_ref);
                    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
                    return Ok((simplex[0].0.clone(), simplex[0].1, false));
                }
            }
        } else if f_ref < simplex[dim - 1].1 {
            *simplex.last_mut().unwrap() = (reflected, f_ref);
        } else {
            // Contract toward the better of worst/reflected.
            let (towards, f_towards) = if f_ref < worst.1 {
                (&reflected, f_ref)
            } else {
                (&worst.0, worst.1)
            };
            let mut contracted = vec![0.0; dim];
            for d in 0..dim {
                contracted[d] = centroid[d] + RHO * (towards[d] - centroid[d]);
            }
            clamp_to_bounds(problem, &mut contracted);
            match evaluate(&contracted, budget, trace)? {
                Some(f_con) if f_con < f_towards => {
                    *simplex.last_mut().unwrap() = (contracted, f_con);
                }
                Some(_) => {
                    // Shrink toward the best vertex.
                    let best = simplex[0].0.clone();
                    for k in 1..=dim {
                        let mut x = vec![0.0; dim];
                        for d in 0..dim {
                            x[d] = best[d] + SIGMA * (simplex[k].0[d] - best[d]);
                        }
                        clamp_to_bounds(problem, &mut x);
                        match evaluate(&x, budget, trace)? {
                            Some(fx) => simplex[k] = (x, fx),
                            None => {
                                simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
                                return Ok((simplex[0].0.clone(), simplex[0].1, false));
                            }
                        }
                    }
                }
                None => {
                    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
                    return Ok((simplex[0].0.clone(), simplex[0].1, false));
                }
            }
        }
    }
}
