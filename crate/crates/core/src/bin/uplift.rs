use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uplift_core::benchmark::{run_benchmark, BenchmarkConfig, BenchmarkTuning};
use uplift_core::config::{effective_config_path, RunConfig};
use uplift_core::dataset::{load_csv, load_csv_with_dictionaries, save_csv, Dataset, TreatmentProbs};
use uplift_core::evaluation::{
    default_grid, evaluate_assignments, predict_rows, uplift_curve_from_predictions, EvaluationReport,
    PolicyPrediction,
};
use uplift_core::rng::stream_rng;
use uplift_core::synthetic::{SyntheticConfig, SyntheticModel};
use uplift_core::tune::{default_grid_for, tune_cts, tune_sma, TuneMode};
use uplift_core::{train_cts, train_sma, Algorithm, Result, UpliftError, UpliftModel};

/// Stream of the synthesis seed used for training rows; streams 0 and 1 draw
/// the model constants.
const SYNTH_DATA_STREAM: u64 = 2;

#[derive(Parser)]
#[command(name = "uplift", version, about = "Multi-treatment uplift modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic model and a training set from it.
    Synth(SynthArgs),
    /// Fit a CTS forest or the separate-model baseline.
    Train(TrainArgs),
    /// Per-row chosen treatment and per-treatment estimates.
    Predict(PredictArgs),
    /// Unbiased expected-response estimate of a policy.
    Evaluate(EvaluateArgs),
    /// Modified uplift curve of a model's policy.
    Curve(CurveArgs),
    /// Grid search of min_split (CTS) or min_samples_leaf (SMA-RF).
    Tune(TuneArgs),
    /// Synthetic benchmark scored by the Monte Carlo oracle.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => RunConfig::load(p),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_per_treatment: usize,
    /// Dataset CSV.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the model constants document.
    #[arg(long)]
    constants_out: Option<PathBuf>,
    /// Reuse a constants document instead of drawing new constants.
    #[arg(long)]
    use_constants: Option<PathBuf>,
    /// Assign treatments at random with these probabilities instead of
    /// n_per_treatment rows per treatment (total rows = n_per_treatment · K).
    #[arg(long, value_delimiter = ',')]
    probabilities: Option<Vec<f64>>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model document to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ntree: Option<usize>,
    #[arg(long)]
    min_split: Option<usize>,
    #[arg(long)]
    min_samples_leaf: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Policy: a model document ...
    #[arg(long, group = "policy")]
    model: Option<PathBuf>,
    /// ... or a predictions CSV with a `chosen` column ...
    #[arg(long, group = "policy")]
    predictions: Option<PathBuf>,
    /// ... or one treatment for every row.
    #[arg(long, group = "policy")]
    constant: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    probabilities: Option<Vec<f64>>,
    #[arg(long)]
    conf_level: Option<f64>,
    /// Report CSV; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    control: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    probabilities: Option<Vec<f64>>,
    /// Number of equal steps between fractions 0 and 1.
    #[arg(long, default_value_t = 20)]
    steps: usize,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    folds: Option<usize>,
    /// Single stratified validation split instead of cross-validation.
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ntree: Option<usize>,
    /// Score table CSV (`value,fold,score`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "500,2000,4000,8000,16000,32000")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "cts,sma-rf")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 10)]
    replications: usize,
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    /// Tune on replication 0 of each size and reuse the value.
    #[arg(long)]
    tune: bool,
    /// Trees per forest while tuning.
    #[arg(long)]
    tune_ntree: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40,80")]
    sma_grid: Vec<usize>,
    /// Results CSV.
    #[arg(long)]
    out: PathBuf,
}

fn require<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| UpliftError::Config(format!("missing {what} path")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| UpliftError::io(path, e))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> UpliftError + '_ {
    move |e| UpliftError::io(path, e)
}

fn load_for_model(model: &UpliftModel, path: &Path) -> Result<Dataset> {
    let data = load_csv_with_dictionaries(path, model.schema(), model.dictionaries(), Some(model.n_treatments()))?;
    model.check_compatible(&data)?;
    Ok(data)
}

fn probs_for(config: &mut RunConfig, flag: Option<Vec<f64>>, data: &Dataset) -> Result<TreatmentProbs> {
    if flag.is_some() {
        config.probabilities = flag;
    }
    config.treatment_probs(data)
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let model = match &args.use_constants {
        Some(p) => SyntheticModel::load(p)?,
        None => SyntheticModel::sample_with(args.seed, &SyntheticConfig::default())?,
    };
    let mut rng = stream_rng(args.seed, SYNTH_DATA_STREAM);
    let data = match args.probabilities {
        Some(p) => {
            let probs = TreatmentProbs::new(p)?;
            model.generate_randomized(args.n_per_treatment * model.n_treatments, &probs, &mut rng)?
        }
        None => model.generate(args.n_per_treatment, &mut rng)?,
    };
    save_csv(&data, &args.out)?;
    if let Some(p) = &args.constants_out {
        model.save(p)?;
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut config = args.config.load()?;
    if let Some(a) = args.algorithm {
        config.algorithm = a;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.cts.ntree = args.ntree.or(config.cts.ntree);
    config.sma.ntree = args.ntree.or(config.sma.ntree);
    config.cts.min_split = args.min_split.or(config.cts.min_split);
    config.sma.min_samples_leaf = args.min_samples_leaf.or(config.sma.min_samples_leaf);
    config.paths.data = args.data.or(config.paths.data);
    config.paths.model = args.out.or(config.paths.model);

    let data_path = require(&config.paths.data, "data")?.to_path_buf();
    let out = require(&config.paths.model, "model output")?.to_path_buf();
    let schema = config.resolve_schema(&data_path)?;
    let data = load_csv(&data_path, &schema)?;
    let d = data.n_features();
    let model: UpliftModel = match config.algorithm {
        Algorithm::Cts => train_cts(&data, &config.forest_params(d))?.into(),
        Algorithm::SmaRf => train_sma(&data, &config.sma_params(d))?.into(),
    };
    model.save(&out)?;
    config.write_effective(&schema, &out)?;
    Ok(())
}

fn write_predictions<W: Write>(preds: &[PolicyPrediction], k: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["chosen".to_string()];
    header.extend((0..k).map(|t| format!("estimate_{t}")));
    w.write_record(&header)?;
    for p in preds {
        let mut rec = vec![p.chosen.to_string()];
        rec.extend(p.per_treatment.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| UpliftError::io("<predictions>", e))?;
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let mut config = args.config.load()?;
    config.paths.model = args.model.or(config.paths.model);
    config.paths.data = args.data.or(config.paths.data);
    config.paths.output = args.out.or(config.paths.output);
    let model = UpliftModel::load(require(&config.paths.model, "model")?)?;
    let data = load_for_model(&model, require(&config.paths.data, "data")?)?;
    let out = require(&config.paths.output, "output")?;
    let preds = predict_rows(&data, |x| model.predict_unchecked(x));
    write_predictions(&preds, model.n_treatments(), create(out)?)?;
    config.write_effective(model.schema(), out)?;
    Ok(())
}

fn read_chosen(path: &Path) -> Result<Vec<usize>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => UpliftError::io(path, io),
        other => UpliftError::Config(format!("{other:?}")),
    })?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == "chosen")
        .ok_or_else(|| UpliftError::HeaderMismatch("predictions need a `chosen` column".into()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(col).unwrap_or("").trim();
        out.push(cell.parse().map_err(|_| UpliftError::Parse {
            line: i as u64 + 2,
            column: "chosen".into(),
            message: format!("not a treatment label: {cell:?}"),
        })?);
    }
    Ok(out)
}

fn write_report<W: Write>(r: &EvaluationReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["estimate", "std_error", "ci_low", "ci_high", "conf_level", "n"])?;
    w.write_record([
        r.estimate.to_string(),
        r.std_error.to_string(),
        r.ci_low.to_string(),
        r.ci_high.to_string(),
        r.conf_level.to_string(),
        r.n.to_string(),
    ])?;
    w.flush().map_err(|e| UpliftError::io("<report>", e))?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let mut config = args.config.load()?;
    config.paths.data = args.data.or(config.paths.data);
    config.paths.output = args.out.or(config.paths.output);
    config.conf_level = args.conf_level.unwrap_or(config.conf_level);
    let data_path = require(&config.paths.data, "data")?.to_path_buf();

    let (data, assignments, schema) = if let Some(model_path) = args.model.or(config.paths.model.clone()) {
        let model = UpliftModel::load(&model_path)?;
        let data = load_for_model(&model, &data_path)?;
        let chosen = predict_rows(&data, |x| model.predict_unchecked(x))
            .into_iter()
            .map(|p| p.chosen)
            .collect();
        (data, chosen, model.schema().clone())
    } else {
        let schema = config.resolve_schema(&data_path)?;
        let data = load_csv(&data_path, &schema)?;
        let chosen = match (args.predictions, args.constant) {
            (Some(p), _) => read_chosen(&p)?,
            (None, Some(t)) => vec![t; data.len()],
            (None, None) => {
                return Err(UpliftError::Config(
                    "one of --model, --predictions or --constant is required".into(),
                ))
            }
        };
        (data, chosen, schema)
    };
    let probs = probs_for(&mut config, args.probabilities, &data)?;
    let report = evaluate_assignments(&data, &assignments, &probs, config.conf_level)?;
    match config.paths.output.clone() {
        Some(out) => {
            write_report(&report, create(&out)?)?;
            config.write_effective(&schema, &out)?;
        }
        None => write_report(&report, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_curve(args: CurveArgs) -> Result<()> {
    let mut config = args.config.load()?;
    config.paths.model = args.model.or(config.paths.model);
    config.paths.data = args.data.or(config.paths.data);
    config.paths.output = args.out.or(config.paths.output);
    config.control = args.control.unwrap_or(config.control);
    if args.steps == 0 {
        return Err(UpliftError::param("steps must be at least 1"));
    }
    let model = UpliftModel::load(require(&config.paths.model, "model")?)?;
    let data = load_for_model(&model, require(&config.paths.data, "data")?)?;
    let out = require(&config.paths.output, "output")?.to_path_buf();
    let probs = probs_for(&mut config, args.probabilities, &data)?;
    let grid = if args.steps == 20 {
        default_grid()
    } else {
        (0..=args.steps).map(|i| i as f64 / args.steps as f64).collect()
    };
    let preds = predict_rows(&data, |x| model.predict_unchecked(x));
    let curve = uplift_curve_from_predictions(&data, &preds, &probs, config.control, &grid, config.conf_level)?;
    curve.write_csv(create(&out)?)?;
    config.write_effective(model.schema(), &out)?;
    Ok(())
}

fn cmd_tune(args: TuneArgs) -> Result<()> {
    let mut config = args.config.load()?;
    if let Some(a) = args.algorithm {
        config.algorithm = a;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.cts.ntree = args.ntree.or(config.cts.ntree);
    config.sma.ntree = args.ntree.or(config.sma.ntree);
    config.tune.grid = args.grid.or(config.tune.grid);
    config.tune.folds = args.folds.unwrap_or(config.tune.folds);
    config.tune.validation_fraction = args.validation_fraction.or(config.tune.validation_fraction);
    config.paths.data = args.data.or(config.paths.data);
    config.paths.output = args.out.or(config.paths.output);

    let data_path = require(&config.paths.data, "data")?.to_path_buf();
    let schema = config.resolve_schema(&data_path)?;
    let data = load_csv(&data_path, &schema)?;
    let probs = match &config.probabilities {
        Some(_) => Some(config.treatment_probs(&data)?),
        None => None,
    };
    let d = data.n_features();
    let mode = config.tune.mode();
    let report = match config.algorithm {
        Algorithm::Cts => {
            let grid = config.tune.grid.clone().unwrap_or_else(|| {
                let smallest = data.treatment_counts().into_iter().min().unwrap_or(0);
                let held = match mode {
                    TuneMode::CrossValidation { folds } => smallest.div_ceil(folds.max(1)),
                    TuneMode::Validation { fraction } => (smallest as f64 * fraction) as usize,
                };
                default_grid_for(smallest - held.min(smallest))
            });
            tune_cts(&data, &config.forest_params(d), &grid, mode, config.seed, probs.as_ref())?
        }
        Algorithm::SmaRf => {
            let grid = config.tune.grid.clone().unwrap_or_else(|| vec![5, 10, 20, 40, 80]);
            tune_sma(&data, &config.sma_params(d), &grid, mode, config.seed, probs.as_ref())?
        }
    };
    match config.paths.output.clone() {
        Some(out) => {
            report.write_csv(create(&out)?)?;
            config.write_effective(&schema, &out)?;
        }
        None => report.write_csv(io::stdout().lock())?,
    }
    let mut stderr = io::stderr().lock();
    writeln!(stderr, "best,{}", report.best).map_err(io_err(Path::new("<stderr>")))?;
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let run = args.config.load()?;
    let mut config = BenchmarkConfig::new(args.seed, args.sizes, args.algorithms, args.replications);
    config.mc_samples = args.mc_samples;
    // algorithm parameters come from the run configuration, on the synthetic
    // feature count
    config.cts = run.forest_params(config.synthetic.d);
    config.sma = run.sma_params(config.synthetic.d);
    if args.tune {
        config.tuning = Some(BenchmarkTuning {
            mode: run.tune.mode(),
            ntree: args.tune_ntree,
            cts_grid: run.tune.grid.clone(),
            sma_grid: args.sma_grid,
        });
    }
    let result = run_benchmark(&config)?;
    result.write_csv(create(&args.out)?)?;
    let mut constants = args.out.as_os_str().to_owned();
    constants.push(".constants.json");
    result.model.save(PathBuf::from(constants))?;
    let cfg_path = effective_config_path(&args.out);
    let text = toml::to_string(&config).map_err(|e| UpliftError::Config(e.to_string()))?;
    std::fs::write(&cfg_path, text).map_err(io_err(&cfg_path))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
