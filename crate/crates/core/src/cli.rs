//! Command-line front end: `train`, `predict`, `evaluate`, `simulate`,
//! `inspect`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
//! Diagnostics go to the error stream and data to the output stream; files
//! are written atomically so a failing command leaves nothing behind.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::consensus::{
    learning_impact, weighted_margin, ConsensusResult, NoiseDistribution, NoiseMode, NoiseScaling, NoiseSpec,
};
use crate::data::{parse_label, Dataset, Sample};
use crate::error::{Error, Result};
use crate::learners::{LearnerKind, LearnerSpec};
use crate::pipeline::{
    evaluate_bundle, load_bundle, predict_bundle, save_bundle, train_pipeline, write_atomic, EvaluationReport,
    ModelBundle, PipelineConfig,
};
use crate::simulator::{detect_transition, run_sweep, PopulationSpec, SweepAxis, SweepGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "brainstorm",
    version,
    about = "Consensus meta-learning over heterogeneous binary classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and calibrate a consensus model from a labeled CSV.
    Train(TrainArgs),
    /// Predict with a saved model; writes `row,decision,margin,reliability,tie`.
    Predict(PredictArgs),
    /// Score the consensus and every agent on a labeled CSV.
    Evaluate(EvaluateArgs),
    /// Monte Carlo sweep over ensemble size and temperature.
    Simulate(SimulateArgs),
    /// Show agents, profiles, weights and learning impacts.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseArg {
    None,
    Site,
    Global,
}

impl From<NoiseArg> for NoiseMode {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::None => NoiseMode::None,
            NoiseArg::Site => NoiseMode::SiteDependent,
            NoiseArg::Global => NoiseMode::UniformGlobal,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistributionArg {
    Gaussian,
    Uniform,
}

impl From<DistributionArg> for NoiseDistribution {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::Gaussian => NoiseDistribution::GaussianUnit,
            DistributionArg::Uniform => NoiseDistribution::UniformPm1,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    /// Noise times 1/T.
    Beta,
    /// Noise times T.
    Temperature,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[arg(long, value_enum, default_value = "none")]
    noise: NoiseArg,
    #[arg(long, value_enum, default_value = "gaussian")]
    distribution: DistributionArg,
    #[arg(long, value_enum, default_value = "beta")]
    noise_scale: ScaleArg,
}

impl NoiseArgs {
    fn spec(&self, temperature: f64, seed: u64) -> NoiseSpec {
        NoiseSpec {
            mode: self.noise.into(),
            distribution: self.distribution.into(),
            temperature,
            scaling: match self.noise_scale {
                ScaleArg::Beta => NoiseScaling::InverseTemperature,
                ScaleArg::Temperature => NoiseScaling::Temperature,
            },
            seed,
            ..NoiseSpec::default()
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Number of representations, identity included.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Comma-separated learner kinds (default: all six).
    #[arg(long)]
    learners: Option<String>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    force_ps_equal: bool,
    #[arg(long)]
    average_profiles: bool,
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// `point:P,S`, `uniform:LO,HI` or `equal:LO,HI`.
    #[arg(long, default_value = "point:0.7,0.7")]
    population: String,
    /// Comma-separated ensemble sizes.
    #[arg(long = "n", default_value = "1,3,5,7,9,11,15,21,25")]
    n_values: String,
    /// Comma-separated temperatures; `inf` gives beta = 0.
    #[arg(long, default_value = "0.25,0.5,1,2,4,8,16")]
    temperature: String,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report the steepest accuracy change along this axis on stderr.
    #[arg(long, value_enum)]
    transition: Option<AxisArg>,
    #[arg(long, value_enum, default_value = "site")]
    noise: NoiseArg,
    #[arg(long, value_enum, default_value = "gaussian")]
    distribution: DistributionArg,
    #[arg(long, value_enum, default_value = "beta")]
    noise_scale: ScaleArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxisArg {
    N,
    Temperature,
    Beta,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV holding the query sample for the impact table.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Data row (0-based) of the query sample.
    #[arg(long, default_value_t = 0)]
    row: usize,
    #[arg(long)]
    label_column: Option<String>,
}

/// Run the CLI on `argv` (program name first) and return the exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args, err),
        Command::Predict(args) => cmd_predict(args, out),
        Command::Evaluate(args) => cmd_evaluate(args, out),
        Command::Simulate(args) => cmd_simulate(args, out, err),
        Command::Inspect(args) => cmd_inspect(args, out),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) => EXIT_USAGE,
        Error::AgentTraining { source, .. } => exit_code(source),
        e if e.is_data_error() => EXIT_DATA,
        _ => EXIT_INTERNAL,
    }
}

// ---------------------------------------------------------------------------
// CSV input
// ---------------------------------------------------------------------------

/// Where the label lives in a dataset CSV.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    /// The last column.
    Last,
    Named(String),
    /// No label column; every column is a feature.
    Absent,
}

struct Table {
    headers: Vec<String>,
    /// (file line, cells)
    rows: Vec<(usize, Vec<String>)>,
}

fn csv_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut records = reader.records();
    let headers: Vec<String> = match records.next() {
        Some(rec) => rec
            .map_err(|e| csv_error(path, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect(),
        None => return Err(csv_error(path, "missing header row")),
    };
    if headers.iter().all(String::is_empty) {
        return Err(csv_error(path, "missing header row"));
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != headers.len() {
            return Err(csv_error(
                path,
                format!("row {line} has {} columns, header has {}", rec.len(), headers.len()),
            ));
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { headers, rows })
}

fn table_to_dataset(path: &Path, table: Table, label: &LabelColumn) -> Result<Dataset> {
    let label_idx = match label {
        LabelColumn::Absent => None,
        LabelColumn::Last => Some(table.headers.len() - 1),
        LabelColumn::Named(name) => Some(table.headers.iter().position(|h| h == name).ok_or_else(|| {
            csv_error(
                path,
                format!(
                    "no label column {name:?}; available columns: {}",
                    table.headers.join(", ")
                ),
            )
        })?),
    };
    let feature_cols: Vec<usize> = (0..table.headers.len()).filter(|&c| Some(c) != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::ZeroDimensionality);
    }
    let mut samples = Vec::with_capacity(table.rows.len());
    for (line, cells) in &table.rows {
        let features = feature_cols
            .iter()
            .map(|&c| match cells[c].parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(csv_error(
                    path,
                    format!("non-finite value {:?} at row {line}, column {}", cells[c], c + 1),
                )),
                Err(_) => Err(csv_error(
                    path,
                    format!("non-numeric value {:?} at row {line}, column {}", cells[c], c + 1),
                )),
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = match label_idx {
            None => None,
            Some(c) => Some(parse_label(&cells[c]).ok_or_else(|| {
                csv_error(
                    path,
                    format!("unknown label {:?} at row {line}, column {}", cells[c], c + 1),
                )
            })?),
        };
        samples.push(Sample { features, label });
    }
    let names = feature_cols.iter().map(|&c| table.headers[c].clone()).collect();
    Dataset::new(names, samples)
}

/// Read a dataset CSV with a header row. Labels go through the usual label
/// tokens (`1`/`-1`/`0`/`yes`/`no`).
pub fn parse_dataset_csv(path: &Path, label: &LabelColumn) -> Result<Dataset> {
    let table = read_table(path)?;
    table_to_dataset(path, table, label)
}

/// Read samples for a model expecting `dim` features: a named label column
/// is dropped, otherwise a trailing extra column is treated as the label.
fn parse_query_csv(path: &Path, dim: usize, label_column: Option<&str>) -> Result<Dataset> {
    let table = read_table(path)?;
    let label = match label_column {
        Some(name) => LabelColumn::Named(name.to_string()),
        None if table.headers.len() == dim + 1 => LabelColumn::Last,
        None => LabelColumn::Absent,
    };
    let ds = table_to_dataset(path, table, &label)?;
    if ds.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: ds.dim(),
        });
    }
    Ok(ds)
}

fn label_mode(label_column: &Option<String>) -> LabelColumn {
    match label_column {
        Some(name) => LabelColumn::Named(name.clone()),
        None => LabelColumn::Last,
    }
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Fixed-point text with at least 17 significant digits.
pub fn format_real(x: f64) -> String {
    let decimals = if x == 0.0 || !x.is_finite() {
        17
    } else {
        (16 - x.abs().log10().floor() as i64).clamp(17, 340) as usize
    };
    format!("{x:.decimals$}")
}

/// `row,decision,margin,reliability,tie` with `row` the 0-based data row.
pub fn predictions_csv(results: &[ConsensusResult]) -> String {
    let mut s = String::from("row,decision,margin,reliability,tie\n");
    for (i, r) in results.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{}",
            r.decision,
            format_real(r.margin),
            format_real(r.reliability),
            r.tie
        );
    }
    s
}

pub fn sweep_csv(grid: &SweepGrid) -> String {
    let (kind, a, b) = grid.population.parameters();
    let noise = match grid.noise.mode {
        NoiseMode::None => "none",
        NoiseMode::SiteDependent => "site",
        NoiseMode::UniformGlobal => "global",
    };
    let mut s = String::from("n,temperature,beta,population,param_a,param_b,noise,accuracy,std_error,trials\n");
    for c in &grid.cells {
        let _ = writeln!(
            s,
            "{},{},{},{kind},{a},{b},{noise},{},{},{}",
            c.n,
            c.temperature,
            c.beta,
            format_real(c.accuracy),
            format_real(c.std_error),
            c.trials
        );
    }
    s
}

pub fn report_csv(report: &EvaluationReport) -> String {
    let mut s = String::from("name,accuracy,precision,recall,tp,fp,tn,fn\n");
    for row in report.rows() {
        let c = row.counts;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            row.name,
            format_real(row.accuracy),
            format_real(row.precision),
            format_real(row.recall),
            c.tp,
            c.fp,
            c.tn,
            c.fn_
        );
    }
    s
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| Error::InvalidConfig(format!("--{flag}: cannot parse {t:?}")))
        })
        .collect()
}

fn parse_roster(text: &str) -> Result<Vec<LearnerSpec>> {
    text.split(',')
        .map(|name| {
            LearnerKind::from_name(name)
                .map(|kind| LearnerSpec::new(kind, 0))
                .ok_or_else(|| Error::InvalidConfig(format!("unknown learner {:?}", name.trim())))
        })
        .collect()
}

pub fn parse_population(text: &str) -> Result<PopulationSpec> {
    let bad = || {
        Error::InvalidConfig(format!(
            "bad population {text:?}; expected point:P,S | uniform:LO,HI | equal:LO,HI"
        ))
    };
    let (kind, params) = text.split_once(':').ok_or_else(bad)?;
    let values: Vec<f64> = parse_list("population", params).map_err(|_| bad())?;
    let [a, b] = values[..] else { return Err(bad()) };
    let spec = match kind.trim() {
        "point" | "point_mass" => PopulationSpec::PointMass {
            precision: a,
            recall: b,
        },
        "uniform" | "independent_uniform" => PopulationSpec::IndependentUniform { lo: a, hi: b },
        "equal" | "correlated_equal" => PopulationSpec::CorrelatedEqual { lo: a, hi: b },
        _ => return Err(bad()),
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_train(args: TrainArgs, err: &mut dyn Write) -> Result<()> {
    let roster = match &args.learners {
        Some(text) => parse_roster(text)?,
        None => LearnerSpec::default_roster(),
    };
    let mut config = PipelineConfig {
        representations: args.reps,
        roster,
        folds: args.folds,
        smoothing: args.smoothing,
        force_equal_ps: args.force_ps_equal,
        average_profiles_by_kind: args.average_profiles,
        seed: args.seed,
        ..PipelineConfig::default()
    };
    config.consensus.noise = args.noise.spec(args.temperature, args.seed);
    config.validate()?;
    let dataset = parse_dataset_csv(&args.data, &label_mode(&args.label_column))?;
    let bundle = train_pipeline(&dataset, &config)?;
    save_bundle(&bundle, &args.out)?;
    let _ = writeln!(
        err,
        "trained {} agents ({} representations x {} learners) on {} samples",
        bundle.agents.len(),
        bundle.representations.len(),
        config.roster.len(),
        dataset.len()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let bundle = load_bundle(&args.model)?;
    let queries = parse_query_csv(&args.data, bundle.dim(), args.label_column.as_deref())?;
    let results = predict_bundle(&bundle, &queries.samples)?;
    emit(out, args.out.as_deref(), &predictions_csv(&results))
}

fn cmd_evaluate(args: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let bundle = load_bundle(&args.model)?;
    let test = parse_dataset_csv(&args.data, &label_mode(&args.label_column))?;
    let report = evaluate_bundle(&bundle, &test)?;
    let mut text = report_csv(&report);
    if args.out.is_none() {
        let m = &report.margins;
        let _ = writeln!(
            text,
            "\nbest agent accuracy {:.6}, median agent accuracy {:.6}, consensus {:.6} ({})",
            report.best_agent_accuracy,
            report.median_agent_accuracy,
            report.consensus.accuracy,
            if report.consensus_at_least_best {
                "at least as good as the best agent"
            } else {
                "below the best agent"
            }
        );
        let _ = writeln!(
            text,
            "margins: mean {:.4} min {:.4} q25 {:.4} median {:.4} q75 {:.4} max {:.4} histogram {:?}",
            m.mean, m.min, m.q25, m.median, m.q75, m.max, m.histogram
        );
    }
    emit(out, args.out.as_deref(), &text)
}

fn cmd_simulate(args: SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let population = parse_population(&args.population)?;
    let n_values: Vec<usize> = parse_list("n", &args.n_values)?;
    let temperatures: Vec<f64> = parse_list("temperature", &args.temperature)?;
    let noise = NoiseArgs {
        noise: args.noise,
        distribution: args.distribution,
        noise_scale: args.noise_scale,
    }
    .spec(temperatures.first().copied().unwrap_or(1.0), args.seed);
    let grid = run_sweep(&population, &n_values, &noise, &temperatures, args.trials, args.seed)?;
    emit(out, args.out.as_deref(), &sweep_csv(&grid))?;
    if let Some(axis) = args.transition {
        let axis = match axis {
            AxisArg::N => SweepAxis::N,
            AxisArg::Temperature => SweepAxis::Temperature,
            AxisArg::Beta => SweepAxis::Beta,
        };
        for (fixed, t) in detect_transition(&grid, axis)? {
            match t.critical {
                Some(x) => writeln!(err, "transition at {fixed}: critical {x} slope {}", t.slope),
                None => writeln!(err, "transition at {fixed}: none (flat)"),
            }
            .map_err(|e| Error::io("<stderr>", e))?;
        }
    }
    Ok(())
}

fn inspect_text(bundle: &ModelBundle, query: Option<&Sample>) -> Result<String> {
    let profiles = bundle.profiles();
    let total: f64 = profiles.iter().map(|p| p.strength()).sum();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "bundle format {} seed {} config {} features {}",
        bundle.format_version,
        bundle.seed,
        bundle.config_digest,
        bundle.feature_names.join(",")
    );
    let votes = match query {
        Some(q) => Some(bundle.agent_votes(q)?),
        None => None,
    };
    let mut header = String::from("agent,name,precision,recall,strength,weight");
    if votes.is_some() {
        header.push_str(",vote,impact");
    }
    let _ = writeln!(s, "{header}");
    for (i, p) in profiles.iter().enumerate() {
        let _ = write!(
            s,
            "{i},{},{},{},{},{}",
            bundle.agent_name(i),
            format_real(p.precision),
            format_real(p.recall),
            format_real(p.strength()),
            format_real(if total > 0.0 { p.strength() / total } else { 0.0 })
        );
        if let Some(v) = &votes {
            let impact = learning_impact(i, v, &profiles, bundle.consensus())?;
            let _ = write!(s, ",{},{}", v[i], format_real(impact));
        }
        s.push('\n');
    }
    if let Some(v) = &votes {
        let m = weighted_margin(v, &profiles)?;
        let (d, tie) = crate::consensus::decide(m);
        let _ = writeln!(s, "margin {} decision {d} tie {tie}", format_real(m));
    }
    Ok(s)
}

fn cmd_inspect(args: InspectArgs, out: &mut dyn Write) -> Result<()> {
    let bundle = load_bundle(&args.model)?;
    let query = match &args.data {
        Some(path) => {
            let ds = parse_query_csv(path, bundle.dim(), args.label_column.as_deref())?;
            let sample =
                ds.samples.get(args.row).cloned().ok_or_else(|| {
                    Error::InvalidConfig(format!("--row {} out of range ({} rows)", args.row, ds.len()))
                })?;
            Some(Sample::query(sample.features))
        }
        None => None,
    };
    emit(out, None, &inspect_text(&bundle, query.as_ref())?)
}
