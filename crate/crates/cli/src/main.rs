//! Command-line front end: scenario runs, dosage sweeps, schedule
//! comparisons, and parameter calibration.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures (a partial CSV of the completed steps is still written).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lungsim::calibration::{fit, CalibrationFile};
use lungsim::scenario::{
    compare_schedules, csv_string, run_scenario, sweep_csv, sweep_dose, variants_csv,
    Preset, ScenarioConfig, ScheduleVariant, Summary,
};

#[derive(Parser)]
#[command(name = "lungsim", version, about = "Radial phase-field tumor growth simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and emit its time series as CSV.
    Run(RunArgs),
    /// Simulate the scenario at several dose scales.
    SweepDose(SweepDoseArgs),
    /// Compare therapy schedule variants on one scenario.
    CompareSchedules(CompareArgs),
    /// Fit free parameters to a measured volume series.
    Calibrate(CalibrateArgs),
    /// Print a scenario configuration as TOML.
    PrintConfig(PrintConfigArgs),
}

#[derive(Args)]
struct ScenarioSource {
    /// Scenario configuration file (TOML).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset: patient1, patient2, patient2-alt.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

impl ScenarioSource {
    fn load(&self) -> Result<ScenarioConfig, lungsim::Error> {
        match (&self.config, &self.preset) {
            (Some(path), None) => ScenarioConfig::from_toml_file(path),
            (None, Some(name)) => Ok(Preset::from_name(name)?.config()),
            (None, None) => Err(lungsim::Error::config(
                "either --config or --preset is required",
            )),
            (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: ScenarioSource,
    /// Output CSV path (omit to print the CSV to stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Scale factor on the administered dose.
    #[arg(long, value_name = "X")]
    dose_scale: Option<f64>,
}

#[derive(Args)]
struct SweepDoseArgs {
    #[command(flatten)]
    source: ScenarioSource,
    /// Comma-separated dose scales, e.g. 1.0,0.5,0.23.
    #[arg(long, value_delimiter = ',', required = true, value_name = "X,..")]
    scales: Vec<f64>,
    /// Output CSV path for the comparison table.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    source: ScenarioSource,
    /// Comma-separated variants: q3w, q3w-q6w, q3w-q6w-ext.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "q3w,q3w-q6w,q3w-q6w-ext",
        value_name = "V,.."
    )]
    variants: Vec<String>,
    /// Output CSV path for the comparison table.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Calibration problem description (TOML).
    #[arg(long, value_name = "PATH", required = true)]
    config: PathBuf,
    /// Output CSV path for the evaluation trace.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Maximum number of forward runs (overrides the file).
    #[arg(long, value_name = "N")]
    budget: Option<usize>,
    /// Seed of the initial simplex construction (overrides the file).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct PrintConfigArgs {
    #[command(flatten)]
    source: ScenarioSource,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), lungsim::Error> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::SweepDose(args) => cmd_sweep(args),
        Command::CompareSchedules(args) => cmd_compare(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::PrintConfig(args) => {
            let config = args.source.load()?;
            config.validate()?;
            print!("{}", config.to_toml_string());
            Ok(())
        }
    }
}

fn print_summary(label: &str, s: &Summary) {
    println!("{label}: peak visible volume {:.3} mm3", s.peak_v_vis_mm3);
    println!("{label}: final visible volume {:.3} mm3", s.final_v_vis_mm3);
    println!("{label}: final total mass {:.3} mm3", s.final_total_mass_mm3);
    println!(
        "{label}: final proliferative mass {:.3} mm3",
        s.final_proliferative_mass_mm3
    );
    println!(
        "{label}: final necrotic mass {:.3} mm3",
        s.final_necrotic_mass_mm3
    );
    match s.relapse_day {
        Some(d) => println!("{label}: relapse day {d:.2}"),
        None => println!("{label}: no relapse detected"),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), lungsim::Error> {
    let mut config = args.source.load()?;
    if let Some(scale) = args.dose_scale {
        config.dose_scale = scale;
    }
    match run_scenario(&config) {
        Ok(run) => {
            match &args.out {
                Some(path) => lungsim::scenario::write_csv_file(&run.series, path)?,
                None => print!("{}", csv_string(&run.series)),
            }
            print_summary("run", &run.summary);
            Ok(())
        }
        Err(fail) => {
            // Dump whatever completed so the failure can be inspected.
            if let Some(path) = &args.out {
                let _ = lungsim::scenario::write_csv_file(&fail.partial, path);
                eprintln!(
                    "partial series ({} records) written to {}",
                    fail.partial.len(),
                    path.display()
                );
            }
            if let Some(last) = fail.partial.last() {
                eprintln!(
                    "last good step: t = {} days, visible volume {} mm3, drug count {}",
                    last.t_days, last.v_vis_mm3, last.drug_count
                );
            }
            Err(fail.error)
        }
    }
}

fn cmd_sweep(args: SweepDoseArgs) -> Result<(), lungsim::Error> {
    if args.scales.iter().any(|s| *s < 0.0) {
        return Err(lungsim::Error::config("dose scales must be non-negative"));
    }
    let config = args.source.load()?;
    config.validate()?;
    let outcomes = sweep_dose(&config, &args.scales);
    let table = sweep_csv(&outcomes);
    match &args.out {
        Some(path) => std::fs::write(path, &table)?,
        None => print!("{table}"),
    }
    for o in &outcomes {
        match &o.result {
            Ok(run) => print_summary(&format!("scale {}", o.scale), &run.summary),
            Err(fail) => eprintln!("scale {}: failed: {fail}", o.scale),
        }
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), lungsim::Error> {
    let variants: Vec<ScheduleVariant> = args
        .variants
        .iter()
        .map(|v| ScheduleVariant::from_name(v))
        .collect::<Result<_, _>>()?;
    let config = args.source.load()?;
    config.validate()?;
    let outcomes = compare_schedules(&config, &variants);
    let table = variants_csv(&outcomes);
    match &args.out {
        Some(path) => std::fs::write(path, &table)?,
        None => print!("{table}"),
    }
    for o in &outcomes {
        match &o.result {
            Ok(run) => print_summary(o.variant.label(), &run.summary),
            Err(fail) => eprintln!("{}: failed: {fail}", o.variant.label()),
        }
    }
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), lungsim::Error> {
    let file = CalibrationFile::load(&args.config)?;
    let budget = args.budget.unwrap_or(file.budget);
    let seed = args.seed.unwrap_or(file.seed);
    let problem = file.into_problem(args.config.parent())?;
    let result = fit(&problem, budget, seed)?;

    println!(
        "calibrate: best misfit {:.6e} after {} forward runs ({})",
        result.best_misfit,
        result.trace.len(),
        if result.converged {
            "converged"
        } else {
            "budget exhausted"
        }
    );
    for (f, v) in problem.free.iter().zip(&result.best_values) {
        println!("calibrate: {:?} = {v:.6}", f.param);
    }
    if let Some(e) = result.best_exponent {
        println!("calibrate: growth exponent = {e}");
    }

    if let Some(path) = &args.out {
        let mut table = String::from("evaluation,misfit");
        for f in &problem.free {
            table.push_str(&format!(",{:?}", f.param));
        }
        table.push_str(",exponent\n");
        for (i, e) in result.trace.iter().enumerate() {
            table.push_str(&format!("{i},{}", e.misfit));
            for v in &e.values {
                table.push_str(&format!(",{v}"));
            }
            match e.exponent {
                Some(x) => table.push_str(&format!(",{x}\n")),
                None => table.push_str(",\n"),
            }
        }
        std::fs::write(path, table)?;
    }
    Ok(())
}
