use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dla_core::oracle::exact_tf_pmf;
use dla_core::ModelSpec;
use dla_harness::config::spec_from_parts;
use dla_harness::experiment::{predictions_for, write_atomic, THREADS_ENV};
use dla_harness::validate::{run_criteria, DEFAULT_BASE_SEED};
use dla_harness::{
    compare_to_oracle, run_experiment, ExperimentConfig, Format, HarnessError, Mode, ModelJson,
    OutputSpec, SweepSummary,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "dla",
    version,
    about = "DLA on layered graphs: simulate, predict, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials of one model and print their summary as JSON.
    Simulate(SimulateArgs),
    /// Run a grid of models and write one summary row per model.
    Sweep(SweepArgs),
    /// Print the closed-form predictions for a model as JSON.
    Predict(PredictArgs),
    /// Print the exact finish-time pmf of a small model.
    Oracle(OracleArgs),
    /// Run the acceptance suite; exits non-zero unless every criterion passes.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// equal, growing or tree.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    k: Option<u32>,
    /// Branching or growth factor.
    #[arg(long)]
    d: Option<u64>,
    /// Vertices per layer (equal layers).
    #[arg(long)]
    m: Option<u64>,
    /// Total non-source vertices (equal layers; m = n / k).
    #[arg(long)]
    n: Option<u64>,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec, HarnessError> {
        let model = self
            .model
            .as_deref()
            .ok_or_else(|| HarnessError::Config("--model is required".into()))?;
        let k = self
            .k
            .ok_or_else(|| HarnessError::Config("--k is required".into()))?;
        spec_from_parts(model, k, self.m, self.d, self.n)
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to ln n.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Vertex)]
    mode: Mode,
    /// Snapshot times as multiples of the predicted finish time.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<f64>,
    /// Snapshot times as absolute steps.
    #[arg(long, value_delimiter = ',')]
    snapshot_steps: Vec<u64>,
    /// Step cap per trial; defaults to 100 * ceil(T_f).
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Per-trial records; the summary goes next to it as <out>.summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// JSON experiment configuration; replaces the model and run flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: String,
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    d: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    m: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<u64>,
    #[command(flatten)]
    run: RunArgs,
    /// Summary table; printed to stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    omega: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// pmf CSV; printed to stdout if absent (the JSON summary then goes to stderr).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also simulate this many trials and report the total-variation distance.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = DEFAULT_BASE_SEED)]
    seed: u64,
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
}

fn experiment_config(spec: ModelSpec, run: &RunArgs) -> ExperimentConfig {
    ExperimentConfig {
        snapshot_steps: run.snapshot_steps.clone(),
        snapshot_fractions: run.snapshots.clone(),
        omega: run.omega,
        mode: run.mode,
        max_steps: run.max_steps,
        ..ExperimentConfig::new(spec, run.trials, run.seed)
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<(), HarnessError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| HarnessError::io("<stdout>", e))
}

fn simulate(args: SimulateArgs) -> Result<bool, HarnessError> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => experiment_config(args.model.spec()?, &args.run),
    };
    if let Some(path) = args.out {
        config.output = Some(OutputSpec {
            path,
            format: args.format,
        });
    }
    let exp = run_experiment(&config, args.run.threads)?;
    print_json(&exp.summary)?;
    if !exp.all_finished() {
        log::error!("{} trials did not finish", exp.summary.unfinished);
    }
    Ok(exp.all_finished())
}

const SWEEP_COLUMNS: [&str; 17] = [
    "model",
    "k",
    "m",
    "d",
    "trials",
    "finished",
    "unfinished",
    "T_f",
    "mean_t_f",
    "sd_t_f",
    "q25_t_f",
    "median_t_f",
    "q75_t_f",
    "median_ratio",
    "blue_fraction",
    "single_occupancy",
    "saturated_trials",
];

fn sweep_row(s: &SweepSummary) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let (m, d) = match s.spec {
        ModelSpec::EqualLayers { m, .. } => (m.to_string(), String::new()),
        ModelSpec::GrowingLayers { d, .. } | ModelSpec::CayleyTree { d, .. } => {
            (String::new(), d.to_string())
        }
    };
    let f = s.finish.as_ref();
    vec![
        s.spec.name().to_string(),
        s.spec.k().to_string(),
        m,
        d,
        s.trials.to_string(),
        s.finished.to_string(),
        s.unfinished.to_string(),
        s.predicted_finish_time.to_string(),
        opt(f.map(|f| f.mean)),
        opt(f.map(|f| f.sd)),
        opt(f.map(|f| f.quantiles.q25)),
        opt(f.map(|f| f.quantiles.median)),
        opt(f.map(|f| f.quantiles.q75)),
        opt(f.map(|f| f.median_ratio)),
        opt(s.blue_fraction),
        opt(s.single_occupancy.as_ref().map(|o| o.fraction)),
        s.saturated_trials.to_string(),
    ]
}

fn sweep(args: SweepArgs) -> Result<bool, HarnessError> {
    let mut specs = Vec::new();
    for &k in &args.k {
        match args.model.as_str() {
            "equal" => {
                for &m in &args.m {
                    specs.push(spec_from_parts("equal", k, Some(m), None, None)?);
                }
                for &n in &args.n {
                    specs.push(spec_from_parts("equal", k, None, None, Some(n))?);
                }
            }
            model => {
                for &d in &args.d {
                    specs.push(spec_from_parts(model, k, None, Some(d), None)?);
                }
            }
        }
    }
    if specs.is_empty() {
        return Err(HarnessError::Config(
            "empty grid: give --m or --n for equal layers, --d otherwise".into(),
        ));
    }
    let mut summaries = Vec::new();
    for spec in specs {
        let exp = run_experiment(&experiment_config(spec, &args.run), args.run.threads)?;
        log::info!(
            "{spec}: {} of {} finished",
            exp.summary.finished,
            exp.summary.trials
        );
        summaries.push(exp.summary);
    }
    let mut buf = Vec::new();
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(SWEEP_COLUMNS)?;
            for s in &summaries {
                w.write_record(sweep_row(s))?;
            }
            w.flush().map_err(|e| HarnessError::io("<csv>", e))?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, &summaries)?;
            buf.push(b'\n');
        }
    }
    match args.out {
        Some(path) => write_atomic(&path, &buf)?,
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| HarnessError::io("<stdout>", e))?,
    }
    Ok(summaries.iter().all(|s| s.unfinished == 0))
}

fn predict(args: PredictArgs) -> Result<bool, HarnessError> {
    let spec = args.model.spec()?;
    let p = predictions_for(&spec, args.omega)?;
    let depth_map = |m: &std::collections::BTreeMap<u32, f64>| {
        m.iter()
            .map(|(j, v)| (j.to_string(), json!(v)))
            .collect::<serde_json::Map<_, _>>()
    };
    print_json(&json!({
        "model": ModelJson::from(spec),
        "omega": p.omega,
        "T_f": p.finish_time,
        "j_star": p.j_star_int,
        "j_star_real": p.j_star_real,
        "t1": depth_map(&p.t1),
        "beta": p.beta,
        "t_conc": depth_map(&p.t_conc),
        "rounding_penalty": p.rounding_penalty,
    }))?;
    Ok(true)
}

fn oracle(args: OracleArgs) -> Result<bool, HarnessError> {
    let spec = args.model.spec()?;
    let pmf = exact_tf_pmf(&spec)?;
    let mut csv_buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut csv_buf);
        w.write_record(["t", "probability"])?;
        for (t, p) in pmf.support.iter().zip(&pmf.prob) {
            w.write_record([t.to_string(), format!("{p:e}")])?;
        }
        w.flush().map_err(|e| HarnessError::io("<csv>", e))?;
    }
    let comparison = match args.trials {
        Some(trials) => Some(compare_to_oracle(
            &ExperimentConfig::new(spec, trials, args.seed),
            args.threads,
        )?),
        None => None,
    };
    let summary = json!({
        "model": ModelJson::from(spec),
        "mean": pmf.mean,
        "variance": pmf.variance(),
        "mode": pmf.mode(),
        "min_support": pmf.min_support(),
        "max_support": pmf.max_support(),
        "total_mass": pmf.total_mass(),
        "comparison": comparison,
    });
    match args.out {
        Some(path) => {
            write_atomic(&path, &csv_buf)?;
            print_json(&summary)?;
        }
        None => {
            std::io::stdout()
                .write_all(&csv_buf)
                .map_err(|e| HarnessError::io("<stdout>", e))?;
            eprintln!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(true)
}

fn validate(args: ValidateArgs) -> Result<bool, HarnessError> {
    let outcomes = run_criteria(&args.only, args.seed, args.threads);
    for o in &outcomes {
        println!("{o}");
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} criteria passed", outcomes.len());
    Ok(passed == outcomes.len())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Predict(a) => predict(a),
        Command::Oracle(a) => oracle(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
