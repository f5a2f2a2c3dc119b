//! Command implementations behind the `geodesic-ecg` binary. Each command is
//! a plain function so it can be driven from tests without a subprocess.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use geodesic_ecg::augment::Pairing;
use geodesic_ecg::class::ClassId;
use geodesic_ecg::classify::MlpConfig;
use geodesic_ecg::eval::{compare_reports, confusion_csv, EvalError, MetricComparison, MetricsReport, Summary};
use geodesic_ecg::pipeline::{
    feature_table, fit_pipeline, run_experiment, score_dataset, AblationRow, ClassifierKind, FittedPipeline,
    PipelineConfig, PipelineError, RowName,
};
use geodesic_ecg::signal::dataset::{read_dataset, write_atomic, write_dataset, DatasetError};
use geodesic_ecg::signal::{generate_cohort, ClassCount, CohortSpec, SignalError};

pub const DEFAULT_SEED: u64 = 20_231_006;
pub const DEFAULT_REPETITIONS: usize = 100;
pub const FAST_REPETITIONS: usize = 10;
pub const LOG_ENV: &str = "GEODESIC_ECG_LOG";

#[derive(Debug, Parser)]
#[command(name = "geodesic-ecg", version, about = "Riemannian covariance classification of multichannel ECG")]
pub struct Cli {
    /// Master seed for cohort synthesis, splits and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Leave-out repetitions (default 100, or 10 with --fast).
    #[arg(long, global = true)]
    pub repetitions: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Small cohort, 10 repetitions and a reduced network.
    #[arg(long, global = true)]
    pub fast: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort on disk.
    Synth {
        /// Cohort spec (JSON); defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one pipeline on a whole dataset and save the model.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-out evaluation of a pipeline, or scoring with a saved model.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Score the dataset with this fitted model instead of cross-validating.
        #[arg(long, conflicts_with = "row")]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the summed confusion matrix here.
        #[arg(long)]
        confusion_csv: Option<PathBuf>,
    },
    /// Run several grid cells and tabulate mean ± std.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated `ROW` or `ROW:classifier` entries; all cells when omitted.
        #[arg(long, value_delimiter = ',')]
        rows: Vec<String>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the per-recording feature vectors of a row as CSV.
    ExportFeatures {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corrected paired t-test between two reports.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairingArg {
    Within,
    Cross,
}

/// Pipeline options shared by the commands that build one.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Grid cell, e.g. `MTS_COV:mlp`.
    #[arg(long)]
    pub row: Option<String>,
    /// Pipeline config (JSON); command-line options override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Beta parameters of the mixup weight, `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub mixup_beta: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub mixup_pairing: Option<PairingArg>,
    /// Synthetic samples per class, `CLASS=N,...`.
    #[arg(long, value_delimiter = ',')]
    pub mixup_per_class: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    /// 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match &e {
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            PipelineError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    write_atomic(path, text.as_bytes()).map_err(|e| io_error(path, e))
}

/// Cohort used by `--fast`: the default class proportions at about a fifth
/// of the size, with shorter recordings.
pub fn fast_cohort() -> CohortSpec {
    let mut spec = CohortSpec::default();
    spec.classes = [("ToF", 35), ("ASD", 15), ("PA", 15), ("Fontan", 13), ("Mustard", 9)]
        .into_iter()
        .map(|(name, patients)| ClassCount { name: name.into(), patients })
        .collect();
    spec
}

/// Network used by `--fast` and the acceptance suite.
pub fn fast_mlp() -> MlpConfig {
    MlpConfig { hidden: vec![32], epochs: 20, learning_rate: 0.01, ..MlpConfig::default() }
}

/// Resolved global options.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Globals {
    pub seed: u64,
    pub repetitions: usize,
    pub threads: Option<usize>,
    pub fast: bool,
}

impl Globals {
    pub fn from_cli(cli: &Cli) -> Globals {
        Globals {
            seed: cli.seed.unwrap_or(DEFAULT_SEED),
            repetitions: cli.repetitions.unwrap_or(if cli.fast { FAST_REPETITIONS } else { DEFAULT_REPETITIONS }),
            threads: cli.threads,
            fast: cli.fast,
        }
    }
}

/// Builds the pipeline config: file, then `--fast` preset, then flags.
pub fn resolve_pipeline(args: &PipelineArgs, fast: bool) -> Result<PipelineConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => serde_json::from_str::<PipelineConfig>(&read_text(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => PipelineConfig::default(),
    };
    if fast {
        config.mlp = fast_mlp();
        config.flatten_stride = config.flatten_stride.max(10);
    }
    if let Some(row) = &args.row {
        config.row = row.parse::<AblationRow>().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(beta) = &args.mixup_beta {
        config.mixup.beta_a = beta[0];
        config.mixup.beta_b = beta[1];
    }
    if let Some(p) = args.mixup_pairing {
        config.mixup.pairing = match p {
            PairingArg::Within => Pairing::WithinClass,
            PairingArg::Cross => Pairing::CrossClass,
        };
    }
    if !args.mixup_per_class.is_empty() {
        let mut map = BTreeMap::new();
        for entry in &args.mixup_per_class {
            let (class, n) = entry
                .split_once('=')
                .and_then(|(c, n)| Some((c, n.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| CliError::Usage(format!("expected CLASS=N in --mixup-per-class, got '{entry}'")))?;
            map.insert(ClassId::new(class.trim()), n);
        }
        config.mixup.samples_per_class = Some(map);
    }
    config.validate()?;
    Ok(config)
}

/// One line of JSON recording everything needed to rerun the command.
pub fn effective_config_header(command: &str, globals: &Globals, details: serde_json::Value) -> String {
    let header = json!({ "command": command, "globals": globals, "settings": details });
    format!("# effective config: {header}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub patients_per_class: Vec<(String, usize)>,
    pub patients: usize,
    pub recordings: usize,
}

impl SynthSummary {
    pub fn render(&self) -> String {
        let mut out = format!("{} patients, {} recordings\n", self.patients, self.recordings);
        for (class, n) in &self.patients_per_class {
            let _ = writeln!(out, "  {class}: {n} patients");
        }
        out
    }
}

pub fn cmd_synth(spec: &CohortSpec, out_dir: &Path) -> Result<SynthSummary, CliError> {
    spec.validate()?;
    let recordings = generate_cohort(spec)?;
    write_dataset(out_dir, &recordings)?;
    Ok(SynthSummary {
        patients_per_class: spec.classes.iter().map(|c| (c.name.clone(), c.patients)).collect(),
        patients: spec.total_patients(),
        recordings: recordings.len(),
    })
}

pub fn cmd_fit(data: &Path, config: &PipelineConfig, seed: u64, out: &Path) -> Result<FittedPipeline, CliError> {
    let recordings = read_dataset(data)?;
    let model = fit_pipeline(&recordings, config, seed)?;
    write_text(out, &model.to_json())?;
    Ok(model)
}

fn numerical_if_failed(report: &MetricsReport) -> Result<(), CliError> {
    if report.failed_repetitions.is_empty() {
        return Ok(());
    }
    let first = &report.failed_repetitions[0];
    Err(CliError::Numerical(format!(
        "{} of {} repetitions failed; first (repetition {}): {}",
        report.failed_repetitions.len(),
        report.failed_repetitions.len() + report.per_repetition.len(),
        first.repetition,
        first.error
    )))
}

/// Leave-out evaluation. The report is written even when some repetitions
/// failed; the error then reports them.
pub fn cmd_evaluate(
    data: &Path,
    config: &PipelineConfig,
    repetitions: usize,
    seed: u64,
    out: &Path,
    confusion: Option<&Path>,
) -> Result<MetricsReport, CliError> {
    let recordings = read_dataset(data)?;
    let report = run_experiment(&recordings, config, repetitions, seed)?;
    write_report(&report, out, confusion)?;
    numerical_if_failed(&report)?;
    Ok(report)
}

pub fn cmd_score(data: &Path, model: &Path, out: &Path, confusion: Option<&Path>) -> Result<MetricsReport, CliError> {
    let model = FittedPipeline::from_json(&read_text(model)?)?;
    let recordings = read_dataset(data)?;
    let report = score_dataset(&model, &recordings)?;
    write_report(&report, out, confusion)?;
    Ok(report)
}

fn write_report(report: &MetricsReport, out: &Path, confusion: Option<&Path>) -> Result<(), CliError> {
    write_text(out, &report.to_json())?;
    if let Some(path) = confusion {
        write_text(path, &confusion_csv(report))?;
    }
    Ok(())
}

/// `ROW` expands to every classifier the row supports.
pub fn parse_rows(entries: &[String]) -> Result<Vec<AblationRow>, CliError> {
    if entries.is_empty() {
        return Ok(AblationRow::grid());
    }
    let mut rows = Vec::new();
    for entry in entries.iter().map(|e| e.trim()).filter(|e| !e.is_empty()) {
        if entry.contains(':') {
            rows.push(entry.parse::<AblationRow>().map_err(|e| CliError::Usage(e.to_string()))?);
        } else {
            let name: RowName = entry.parse().map_err(|e: geodesic_ecg::pipeline::ParseRowError| CliError::Usage(e.0))?;
            rows.extend(ClassifierKind::ALL.into_iter().filter_map(|c| AblationRow::new(name, c).ok()));
        }
    }
    Ok(rows)
}

/// Mean ± std with two decimals.
pub fn format_summary(s: &Summary) -> String {
    format!("{:.2} ± {:.2}", s.mean, s.std)
}

#[derive(Debug)]
pub struct AblationOutcome {
    pub table: String,
    pub reports: Vec<(AblationRow, Result<MetricsReport, String>)>,
}

/// Runs each cell in turn (repetitions are parallel inside a cell), writes
/// one report per cell and `ablation.csv` into `out_dir`. Fails after the
/// table is written if any cell failed.
pub fn cmd_ablate(
    data: &Path,
    rows: &[AblationRow],
    base: &PipelineConfig,
    repetitions: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<AblationOutcome, CliError> {
    let recordings = read_dataset(data)?;
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let mut table = String::from("row,classifier,accuracy,auc,f1_macro,status\n");
    let mut reports = Vec::with_capacity(rows.len());
    for &row in rows {
        log::info!("ablation cell {row}");
        let config = PipelineConfig { row, ..base.clone() };
        let outcome = run_experiment(&recordings, &config, repetitions, seed).map_err(|e| e.to_string());
        match &outcome {
            Ok(report) => {
                let name = format!("{}_{}.json", row.name, row.classifier);
                write_text(&out_dir.join(name), &report.to_json())?;
                let a = &report.aggregate;
                let status = if report.failed_repetitions.is_empty() {
                    "ok".to_string()
                } else {
                    format!("{} repetitions failed", report.failed_repetitions.len())
                };
                let _ = writeln!(
                    table,
                    "{},{},{},{},{},{}",
                    row.name,
                    row.classifier,
                    format_summary(&a.accuracy),
                    format_summary(&a.auc_macro_ovr),
                    format_summary(&a.f1_macro),
                    status
                );
            }
            Err(e) => {
                let _ = writeln!(table, "{},{},,,,failed: {}", row.name, row.classifier, e.replace([',', '\n'], ";"));
            }
        }
        reports.push((row, outcome));
    }
    write_text(&out_dir.join("ablation.csv"), &table)?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|(_, r)| r.as_ref().map_or(true, |rep| !rep.failed_repetitions.is_empty()))
        .map(|(row, _)| row.to_string())
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Numerical(format!("ablation cells failed: {}", failed.join(", "))));
    }
    Ok(AblationOutcome { table, reports })
}

/// CSV with `patient_id,label,f0,…`; returns the feature width.
pub fn cmd_export_features(data: &Path, config: &PipelineConfig, seed: u64, out: &Path) -> Result<usize, CliError> {
    let recordings = read_dataset(data)?;
    let table = feature_table(&recordings, config, seed)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["patient_id".to_string(), "label".to_string()];
    header.extend((0..table.dim).map(|i| format!("f{i}")));
    let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", out.display()));
    writer.write_record(&header).map_err(csv_err)?;
    for (patient, label, values) in &table.rows {
        let mut record = vec![patient.clone(), label.to_string()];
        record.extend(values.iter().map(|v| format!("{v:.10e}")));
        writer.write_record(&record).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    fs::create_dir_all(out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")))
        .map_err(|e| io_error(out, e))?;
    write_atomic(out, &bytes).map_err(|e| io_error(out, e))?;
    Ok(table.dim)
}

pub fn cmd_compare(a: &Path, b: &Path) -> Result<Vec<MetricComparison>, CliError> {
    let ra = MetricsReport::from_json(&read_text(a)?)?;
    let rb = MetricsReport::from_json(&read_text(b)?)?;
    Ok(compare_reports(&ra, &rb)?)
}

pub fn render_comparison(rows: &[MetricComparison]) -> String {
    let mut out = String::from("metric,mean_a,mean_b,t,p,df,note\n");
    for c in rows {
        let (t, p, df) = match &c.test {
            Some(t) => (format!("{:.6}", t.t_statistic), format!("{:.6}", t.p_value), t.degrees_of_freedom.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{t},{p},{df},{}",
            c.metric,
            c.mean_a,
            c.mean_b,
            c.note.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    out
}

/// Dispatches a parsed command line. Output meant for the user goes to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let globals = Globals::from_cli(&cli);
    if let Some(n) = globals.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Synth { spec, out } => {
            let mut cohort = match spec {
                Some(path) => serde_json::from_str::<CohortSpec>(&read_text(path)?)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
                None if globals.fast => fast_cohort(),
                None => CohortSpec::default(),
            };
            if let Some(seed) = cli.seed {
                cohort.seed = seed;
            }
            println!("{}", effective_config_header("synth", &globals, json!({ "cohort": cohort, "out": out })));
            let summary = cmd_synth(&cohort, out)?;
            print!("{}", summary.render());
        }
        Command::Fit { data, pipeline, out } => {
            let config = resolve_pipeline(pipeline, globals.fast)?;
            println!("{}", effective_config_header("fit", &globals, json!({ "pipeline": config, "data": data })));
            let model = cmd_fit(data, &config, globals.seed, out)?;
            println!("fitted {} on {} recordings -> {}", config.row, model.train_recordings, out.display());
        }
        Command::Evaluate { data, pipeline, model, out, confusion_csv } => {
            let report = match model {
                Some(model) => {
                    println!("{}", effective_config_header("evaluate", &globals, json!({ "model": model, "data": data })));
                    cmd_score(data, model, out, confusion_csv.as_deref())?
                }
                None => {
                    let config = resolve_pipeline(pipeline, globals.fast)?;
                    println!("{}", effective_config_header("evaluate", &globals, json!({ "pipeline": config, "data": data })));
                    cmd_evaluate(data, &config, globals.repetitions, globals.seed, out, confusion_csv.as_deref())?
                }
            };
            let a = &report.aggregate;
            println!(
                "accuracy {}  auc {}  f1 {}  ({} repetitions) -> {}",
                format_summary(&a.accuracy),
                format_summary(&a.auc_macro_ovr),
                format_summary(&a.f1_macro),
                report.per_repetition.len(),
                out.display()
            );
        }
        Command::Ablate { data, rows, pipeline, out } => {
            let rows = parse_rows(rows)?;
            let base = resolve_pipeline(pipeline, globals.fast)?;
            let names: Vec<String> = rows.iter().map(|r| r.to_string()).collect();
            println!(
                "{}",
                effective_config_header("ablate", &globals, json!({ "rows": names, "pipeline": base, "data": data }))
            );
            let data = data.clone();
            let result = cmd_ablate(&data, &rows, &base, globals.repetitions, globals.seed, out);
            if let Ok(table) = fs::read_to_string(out.join("ablation.csv")) {
                print!("{table}");
            }
            result?;
        }
        Command::ExportFeatures { data, pipeline, out } => {
            let config = resolve_pipeline(pipeline, globals.fast)?;
            println!("{}", effective_config_header("export-features", &globals, json!({ "pipeline": config, "data": data })));
            let dim = cmd_export_features(data, &config, globals.seed, out)?;
            println!("{dim} features per recording -> {}", out.display());
        }
        Command::Compare { a, b, out } => {
            println!("{}", effective_config_header("compare", &globals, json!({ "a": a, "b": b })));
            let text = render_comparison(&cmd_compare(a, b)?);
            print!("{text}");
            if let Some(path) = out {
                write_text(path, &text)?;
            }
        }
    }
    Ok(())
}
