//! Scenario configuration, patient presets, the forward runner, CSV
//! emission, and the therapy what-if studies.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drug::{DrugState, TherapySchedule, DEFAULT_WINDOW_DAYS};
use crate::error::{Error, Result};
use crate::mesh::RadialGrid;
use crate::observables::{total_mass, visible_volume, Record, TimeSeries, MM3_PER_M3};
use crate::params::{
    DrugParameters, GrowthParameters, ModelParameters, NutrientParameters,
    TherapyEffectParameters,
};
use crate::stepper::{FieldState, Simulator, StepConfig};

pub const CSV_HEADER: &str =
    "t_days,v_vis_mm3,total_mass_mm3,drug_count,proliferative_mass_mm3,necrotic_mass_mm3";

/// Which field the visible-volume threshold is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VisibleField {
    /// Proliferative plus necrotic tissue (what a CT segmentation sees).
    #[default]
    Total,
    Proliferative,
}

/// Administration schedule specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// No therapy.
    None,
    /// Fixed cycle: windows at `t_start + k·interval_days` with start ≤
    /// `t_last_start`.
    Cycles {
        t_start: f64,
        interval_days: f64,
        t_last_start: f64,
        #[serde(default = "default_window")]
        window_days: f64,
    },
    /// Two cycle phases with a switch day (three-weekly then six-weekly in
    /// the bundled presets).
    TwoPhase {
        t_start: f64,
        t_switch: f64,
        t_stop: f64,
        first_interval_days: f64,
        second_interval_days: f64,
        #[serde(default = "default_window")]
        window_days: f64,
    },
    /// Explicit window start times.
    Windows {
        starts: Vec<f64>,
        #[serde(default = "default_window")]
        window_days: f64,
    },
}

fn default_window() -> f64 {
    DEFAULT_WINDOW_DAYS
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<TherapySchedule> {
        match self {
            ScheduleSpec::None => Ok(TherapySchedule::none()),
            ScheduleSpec::Cycles {
                t_start,
                interval_days,
                t_last_start,
                window_days,
            } => TherapySchedule::from_cycles(*t_start, *interval_days, *t_last_start, *window_days),
            ScheduleSpec::TwoPhase {
                t_start,
                t_switch,
                t_stop,
                first_interval_days,
                second_interval_days,
                window_days,
            } => {
                if !(t_start <= t_switch && t_switch <= t_stop) {
                    return Err(Error::config(format!(
                        "two-phase schedule needs t_start <= t_switch <= t_stop, got {t_start}, {t_switch}, {t_stop}"
                    )));
                }
                let first = TherapySchedule::from_cycles(
                    *t_start,
                    *first_interval_days,
                    *t_switch,
                    *window_days,
                )?;
                let second = TherapySchedule::from_cycles(
                    *t_switch,
                    *second_interval_days,
                    *t_stop,
                    *window_days,
                )?;
                let mut starts: Vec<f64> = first
                    .windows()
                    .iter()
                    .chain(second.windows().iter())
                    .map(|w| w.0)
                    .collect();
                starts.sort_by(|a, b| a.total_cmp(b));
                starts.dedup();
                TherapySchedule::from_starts(&starts, *window_days)
            }
            ScheduleSpec::Windows {
                starts,
                window_days,
            } => TherapySchedule::from_starts(starts, *window_days),
        }
    }

    /// Day after which no further administration happens.
    pub fn therapy_end(&self) -> Result<f64> {
        Ok(self
            .build()?
            .windows()
            .last()
            .map(|w| w.1)
            .unwrap_or(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_elements: usize,
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    /// Tumor step, days.
    pub dt_days: f64,
    /// Simulated horizon, days.
    pub end_day: f64,
    pub drug_substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Record every k-th step (the initial state is always recorded).
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_threshold")]
    pub visible_threshold: f64,
    #[serde(default)]
    pub visible_field: VisibleField,
}

fn default_record_every() -> usize {
    1
}

fn default_threshold() -> f64 {
    crate::observables::DEFAULT_VISIBLE_THRESHOLD
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            record_every: 1,
            visible_threshold: default_threshold(),
            visible_field: VisibleField::Total,
        }
    }
}

/// Complete description of one simulation scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub time: TimeSpec,
    /// Initial tumor radius, m.
    pub initial_radius_m: f64,
    pub growth: GrowthParameters,
    pub therapy: TherapyEffectParameters,
    pub nutrient: NutrientParameters,
    pub drug: DrugParameters,
    pub schedule: ScheduleSpec,
    #[serde(default = "default_dose_scale")]
    pub dose_scale: f64,
    #[serde(default)]
    pub clamp_enabled: DefaultTrue,
    #[serde(default)]
    pub solver: crate::stepper::SolverChoice,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_dose_scale() -> f64 {
    1.0
}

/// Boolean wrapper defaulting to `true` under `#[serde(default)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DefaultTrue(pub bool);

impl Default for DefaultTrue {
    fn default() -> Self {
        DefaultTrue(true)
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config(format!("scenario config: {e}")))
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model_parameters().validate()?;
        self.step_config().validate()?;
        if self.grid.n_elements < 2 {
            return Err(Error::config("grid needs at least 2 elements"));
        }
        if !(self.grid.radius_m > 0.0) {
            return Err(Error::config("grid radius must be positive"));
        }
        if !(self.initial_radius_m > 0.0 && self.initial_radius_m < self.grid.radius_m) {
            return Err(Error::config(format!(
                "initial radius {} outside (0, {})",
                self.initial_radius_m, self.grid.radius_m
            )));
        }
        if !(self.time.end_day >= 0.0) {
            return Err(Error::config("end_day must be non-negative"));
        }
        if !(self.dose_scale >= 0.0) {
            return Err(Error::config("dose_scale must be non-negative"));
        }
        if !(self.output.visible_threshold > 0.0 && self.output.visible_threshold < 1.0) {
            return Err(Error::config("visible_threshold must lie in (0, 1)"));
        }
        if self.output.record_every == 0 {
            return Err(Error::config("record_every must be at least 1"));
        }
        self.schedule.build()?;
        Ok(())
    }

    pub fn model_parameters(&self) -> ModelParameters {
        ModelParameters {
            growth: self.growth.clone(),
            therapy: self.therapy.clone(),
            nutrient: self.nutrient.clone(),
            drug: self.drug.clone(),
        }
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            dt_days: self.time.dt_days,
            drug_substeps: self.time.drug_substeps,
            clamp_enabled: self.clamp_enabled.0,
            solver: self.solver,
        }
    }
}

/// Named built-in scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Patient1,
    Patient2,
    /// Patient 2 with the alternative reported therapy-effect value.
    Patient2Alt,
}

impl Preset {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "patient1" => Ok(Preset::Patient1),
            "patient2" => Ok(Preset::Patient2),
            "patient2-alt" => Ok(Preset::Patient2Alt),
            other => Err(Error::config(format!(
                "unknown preset '{other}' (available: patient1, patient2, patient2-alt)"
            ))),
        }
    }

    pub fn config(self) -> ScenarioConfig {
        match self {
            Preset::Patient1 => patient1_config(),
            Preset::Patient2 => patient2_config(),
            Preset::Patient2Alt => {
                let mut c = patient2_config();
                c.therapy.efficacy = 0.499;
                c
            }
        }
    }
}

/// Preset nutrient constants. The proliferative fraction consumes faster
/// than healthy tissue so a mature tumor core starves below the necrosis
/// threshold while the healthy far field stays nutrient-rich; the vascular
/// level and the consumption contrast are per-patient calibration constants.
fn preset_nutrient(tumor_consumption: f64, vascular_level: f64) -> NutrientParameters {
    NutrientParameters {
        diffusion: 1e-5,
        vascular_exchange: 1.0,
        reverse_exchange: 0.0,
        healthy_consumption: 1.0,
        tumor_consumption,
        vascular_level,
    }
}

fn patient1_config() -> ScenarioConfig {
    ScenarioConfig {
        grid: GridSpec {
            n_elements: 500,
            radius_m: 0.04,
        },
        time: TimeSpec {
            dt_days: 1.0 / 24.0,
            end_day: 1050.0,
            drug_substeps: 32,
        },
        initial_radius_m: 0.0055,
        growth: GrowthParameters {
            mobility_factor: 5e-4,
            proliferation_rate: 0.38,
            growth_exponent: 2.0,
            necrosis_rate: 0.1,
            necrosis_nutrient_threshold: 0.2,
            interface_width: 5e-4,
            well_scale: 2.0,
            gompertz_reg: 0.1,
            chemotaxis: 0.0,
        },
        therapy: TherapyEffectParameters {
            efficacy: 4.49,
            half_response_count: 1.012e16,
            patient_weight_kg: 80.0,
        },
        nutrient: preset_nutrient(4.0, 0.48),
        drug: DrugParameters {
            half_life_days: 26.7,
            molar_mass: 146_000.0,
            dose_grams: 0.24,
            full_dose_per_window: false,
        },
        // Biweekly administration from diagnosis day 296 until the therapy
        // break after roughly two years of treatment.
        schedule: ScheduleSpec::Cycles {
            t_start: 296.0,
            interval_days: 14.0,
            t_last_start: 940.0,
            window_days: DEFAULT_WINDOW_DAYS,
        },
        dose_scale: 1.0,
        clamp_enabled: DefaultTrue(true),
        solver: crate::stepper::SolverChoice::Direct,
        output: OutputSpec::default(),
    }
}

fn patient2_config() -> ScenarioConfig {
    ScenarioConfig {
        grid: GridSpec {
            n_elements: 500,
            radius_m: 0.04,
        },
        time: TimeSpec {
            dt_days: 1.0 / 24.0,
            end_day: 1400.0,
            drug_substeps: 32,
        },
        initial_radius_m: 0.01,
        growth: GrowthParameters {
            mobility_factor: 5e-4,
            proliferation_rate: 0.0038,
            growth_exponent: 1.0,
            necrosis_rate: 20.0,
            necrosis_nutrient_threshold: 0.2,
            interface_width: 5e-4,
            well_scale: 2.0,
            gompertz_reg: 0.1,
            chemotaxis: 0.0,
        },
        therapy: TherapyEffectParameters {
            efficacy: 0.55,
            half_response_count: 1.012e16,
            patient_weight_kg: 80.0,
        },
        nutrient: preset_nutrient(6.5, 1.2),
        drug: DrugParameters {
            half_life_days: 22.0,
            molar_mass: 143_600.0,
            dose_grams: 0.20,
            full_dose_per_window: false,
        },
        schedule: ScheduleSpec::TwoPhase {
            t_start: 0.0,
            t_switch: 514.0,
            t_stop: 1063.0,
            first_interval_days: 21.0,
            second_interval_days: 42.0,
            window_days: DEFAULT_WINDOW_DAYS,
        },
        dose_scale: 1.0,
        clamp_enabled: DefaultTrue(true),
        solver: crate::stepper::SolverChoice::Direct,
        output: OutputSpec::default(),
    }
}

/// Aggregates of one finished run, volumes in mm³.
#[derive(Debug, Clone, Copy)]
pub struct Summary {
    pub peak_v_vis_mm3: f64,
    pub final_v_vis_mm3: f64,
    pub final_total_mass_mm3: f64,
    pub final_proliferative_mass_mm3: f64,
    pub final_necrotic_mass_mm3: f64,
    pub peak_proliferative_mass_mm3: f64,
    /// Minimum over the whole run; with therapy active this is reached just
    /// before the therapy stops (or at elimination).
    pub min_proliferative_mass_mm3: f64,
    pub relapse_day: Option<f64>,
}

#[derive(Debug)]
pub struct ScenarioRun {
    pub series: TimeSeries,
    pub summary: Summary,
}

/// A numerical failure mid-run, carrying everything recorded so far.
#[derive(Debug)]
pub struct ScenarioFailure {
    pub error: Error,
    pub partial: TimeSeries,
}

impl std::fmt::Display for ScenarioFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (last good record at t = {:.4} days)",
            self.error,
            self.partial.last().map(|r| r.t_days).unwrap_or(f64::NAN)
        )
    }
}

fn record_from_state(
    grid: &RadialGrid,
    state: &FieldState,
    agent_count: f64,
    output: &OutputSpec,
) -> Record {
    let total: Vec<f64> = state.total_fraction();
    let visible_input = match output.visible_field {
        VisibleField::Total => &total,
        VisibleField::Proliferative => &state.proliferative,
    };
    Record {
        t_days: state.time,
        v_vis_mm3: visible_volume(grid, visible_input, output.visible_threshold) * MM3_PER_M3,
        total_mass_mm3: total_mass(grid, &total) * MM3_PER_M3,
        drug_count: agent_count,
        proliferative_mass_mm3: total_mass(grid, &state.proliferative) * MM3_PER_M3,
        necrotic_mass_mm3: total_mass(grid, &state.necrotic) * MM3_PER_M3,
    }
}

/// Run a scenario from `t = 0` to the configured end day.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, Box<ScenarioFailure>> {
    let fail = |error: Error| {
        Box::new(ScenarioFailure {
            error,
            partial: TimeSeries::new(),
        })
    };
    config.validate().map_err(fail)?;
    let grid = RadialGrid::new(config.grid.n_elements, config.grid.radius_m).map_err(fail)?;
    let schedule = config.schedule.build().map_err(fail)?;
    let mut sim = Simulator::new(
        grid,
        config.model_parameters(),
        schedule,
        config.step_config(),
        config.dose_scale,
    )
    .map_err(fail)?;
    let mut state = sim.initial_state(config.initial_radius_m).map_err(fail)?;
    let mut drug = DrugState::new(0.0, 0.0);

    let n_steps = (config.time.end_day / config.time.dt_days).round() as usize;
    let mut series = TimeSeries::new();
    series
        .push(record_from_state(
            sim.grid(),
            &state,
            drug.agent_count,
            &config.output,
        ))
        .map_err(fail)?;

    for step in 1..=n_steps {
        if let Err(error) = sim.step(&mut state, &mut drug) {
            return Err(Box::new(ScenarioFailure {
                error,
                partial: series,
            }));
        }
        if step % config.output.record_every == 0 || step == n_steps {
            let record = record_from_state(sim.grid(), &state, drug.agent_count, &config.output);
            if let Err(error) = series.push(record) {
                return Err(Box::new(ScenarioFailure {
                    error,
                    partial: series,
                }));
            }
        }
    }

    let summary = summarize(&series);
    Ok(ScenarioRun { series, summary })
}

/// First time after day 100 at which the visible volume exceeds twice its
/// running minimum (taken over records after day 100).
pub fn relapse_day(series: &TimeSeries) -> Option<f64> {
    let mut running_min = f64::INFINITY;
    for r in series.records() {
        if r.t_days < 100.0 {
            continue;
        }
        if r.v_vis_mm3 > 2.0 * running_min {
            return Some(r.t_days);
        }
        running_min = running_min.min(r.v_vis_mm3);
    }
    None
}

pub fn summarize(series: &TimeSeries) -> Summary {
    let mut peak_v: f64 = 0.0;
    let mut peak_p: f64 = 0.0;
    let mut min_p = f64::INFINITY;
    for r in series.records() {
        peak_v = peak_v.max(r.v_vis_mm3);
        peak_p = peak_p.max(r.proliferative_mass_mm3);
        min_p = min_p.min(r.proliferative_mass_mm3);
    }
    let last = series.last().copied().unwrap_or(Record {
        t_days: 0.0,
        v_vis_mm3: 0.0,
        total_mass_mm3: 0.0,
        drug_count: 0.0,
        proliferative_mass_mm3: 0.0,
        necrotic_mass_mm3: 0.0,
    });
    Summary {
        peak_v_vis_mm3: peak_v,
        final_v_vis_mm3: last.v_vis_mm3,
        final_total_mass_mm3: last.total_mass_mm3,
        final_proliferative_mass_mm3: last.proliferative_mass_mm3,
        final_necrotic_mass_mm3: last.necrotic_mass_mm3,
        peak_proliferative_mass_mm3: peak_p,
        min_proliferative_mass_mm3: if min_p.is_finite() { min_p } else { 0.0 },
        relapse_day: relapse_day(series),
    }
}

/// Write the series as CSV (volumes in mm³, shortest round-trip floats).
pub fn write_csv<W: Write>(series: &TimeSeries, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in series.records() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t_days,
            r.v_vis_mm3,
            r.total_mass_mm3,
            r.drug_count,
            r.proliferative_mass_mm3,
            r.necrotic_mass_mm3,
        )?;
    }
    Ok(())
}

pub fn csv_string(series: &TimeSeries) -> String {
    let mut buf = Vec::new();
    write_csv(series, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}

pub fn write_csv_file(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(series, std::io::BufWriter::new(file))
}

/// Read a series back from the emitted CSV format.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    {
        let headers = reader.headers()?;
        let expected: Vec<&str> = CSV_HEADER.split(',').collect();
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::config(format!(
                "unexpected CSV header {got:?}, expected {expected:?}"
            )));
        }
    }
    let mut series = TimeSeries::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| -> Result<f64> {
            row.get(i)
                .ok_or_else(|| Error::config(format!("missing column {i}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::config(format!("bad float in CSV: {e}")))
        };
        series.push(Record {
            t_days: field(0)?,
            v_vis_mm3: field(1)?,
            total_mass_mm3: field(2)?,
            drug_count: field(3)?,
            proliferative_mass_mm3: field(4)?,
            necrotic_mass_mm3: field(5)?,
        })?;
    }
    Ok(series)
}

pub fn read_csv_file(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file))
}

/// Per-scale outcome of a dosage sweep.
#[derive(Debug)]
pub struct DoseOutcome {
    pub scale: f64,
    pub result: Result<ScenarioRun, Box<ScenarioFailure>>,
}

/// Run the scenario once per dose scale; failures stay isolated per row.
pub fn sweep_dose(config: &ScenarioConfig, scales: &[f64]) -> Vec<DoseOutcome> {
    scales
        .par_iter()
        .map(|&scale| {
            let mut c = config.clone();
            c.dose_scale = scale;
            DoseOutcome {
                scale,
                result: run_scenario(&c),
            }
        })
        .collect()
}

/// Comparison CSV for a dose sweep.
pub fn sweep_csv(outcomes: &[DoseOutcome]) -> String {
    let mut out = String::from(
        "dose_scale,status,peak_vvis_mm3,final_vvis_mm3,final_total_mass_mm3,final_prolif_mass_mm3,min_prolif_mass_mm3,peak_prolif_mass_mm3,final_necrotic_mass_mm3,relapse_day\n",
    );
    for o in outcomes {
        match &o.result {
            Ok(run) => {
                let s = &run.summary;
                out.push_str(&format!(
                    "{},ok,{},{},{},{},{},{},{},{}\n",
                    o.scale,
                    s.peak_v_vis_mm3,
                    s.final_v_vis_mm3,
                    s.final_total_mass_mm3,
                    s.final_proliferative_mass_mm3,
                    s.min_proliferative_mass_mm3,
                    s.peak_proliferative_mass_mm3,
                    s.final_necrotic_mass_mm3,
                    s.relapse_day.map(|d| d.to_string()).unwrap_or_default(),
                ));
            }
            Err(fail) => {
                out.push_str(&format!("{},error: {},,,,,,,,\n", o.scale, fail.error));
            }
        }
    }
    out
}

/// Schedule variants of the second patient study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleVariant {
    /// Keep the first-phase cycle until the therapy stop.
    FirstCycleThroughout,
    /// The configured two-phase schedule, unchanged.
    Original,
    /// Two-phase schedule without the therapy break: the second cycle
    /// continues to the end of the simulation.
    Extended,
}

impl ScheduleVariant {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "q3w" => Ok(Self::FirstCycleThroughout),
            "q3w-q6w" => Ok(Self::Original),
            "q3w-q6w-ext" => Ok(Self::Extended),
            other => Err(Error::config(format!(
                "unknown schedule variant '{other}' (available: q3w, q3w-q6w, q3w-q6w-ext)"
            ))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::FirstCycleThroughout => "q3w",
            Self::Original => "q3w-q6w",
            Self::Extended => "q3w-q6w-ext",
        }
    }

    /// Derive the variant schedule from a two-phase base.
    pub fn apply(self, base: &ScheduleSpec, end_day: f64) -> Result<ScheduleSpec> {
        let ScheduleSpec::TwoPhase {
            t_start,
            t_switch,
            t_stop,
            first_interval_days,
            second_interval_days,
            window_days,
        } = base.clone()
        else {
            return Err(Error::config(
                "schedule variants need a two-phase base schedule",
            ));
        };
        Ok(match self {
            Self::Original => base.clone(),
            Self::FirstCycleThroughout => ScheduleSpec::Cycles {
                t_start,
                interval_days: first_interval_days,
                t_last_start: t_stop,
                window_days,
            },
            Self::Extended => ScheduleSpec::TwoPhase {
                t_start,
                t_switch,
                t_stop: end_day,
                first_interval_days,
                second_interval_days,
                window_days,
            },
        })
    }
}

#[derive(Debug)]
pub struct VariantOutcome {
    pub variant: ScheduleVariant,
    pub result: Result<ScenarioRun, Box<ScenarioFailure>>,
}

/// Run the scenario once per schedule variant.
pub fn compare_schedules(config: &ScenarioConfig, variants: &[ScheduleVariant]) -> Vec<VariantOutcome> {
    variants
        .par_iter()
        .map(|&variant| {
            let result = variant
                .apply(&config.schedule, config.time.end_day)
                .and_then(|schedule| {
                    let mut c = config.clone();
                    c.schedule = schedule;
                    run_scenario(&c).map_err(|f| f.error)
                })
                .map_err(|error| {
                    Box::new(ScenarioFailure {
                        error,
                        partial: TimeSeries::new(),
                    })
                });
            VariantOutcome { variant, result }
        })
        .collect()
}

/// Comparison CSV for a schedule study.
pub fn variants_csv(outcomes: &[VariantOutcome]) -> String {
    let mut out = String::from(
        "variant,status,peak_vvis_mm3,final_vvis_mm3,final_total_mass_mm3,relapse_day\n",
    );
    for o in outcomes {
        match &o.result {
            Ok(run) => {
                let s = &run.summary;
                out.push_str(&format!(
                    "{},ok,{},{},{},{}\n",
                    o.variant.label(),
                    s.peak_v_vis_mm3,
                    s.final_v_vis_mm3,
                    s.final_total_mass_mm3,
                    s.relapse_day.map(|d| d.to_string()).unwrap_or_default(),
                ));
            }
            Err(fail) => {
                out.push_str(&format!("{},error: {},,,,\n", o.variant.label(), fail.error));
            }
        }
    }
    out
}
