//! `radmat`: simulate, featurize, train, evaluate and benchmark.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error, 3 a failed
//! `experiment --check` threshold.

mod alloc;
mod bench;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use radmat::experiments::{
    check::check_reports, check_fingerprints, render_report, runner::eval_seed_base,
    runner::prepare_features, runner::train_seed_base, Condition, EvalReport, Pipeline,
    PredictionRecord, Workbench,
};
use radmat::features::{
    select_window, write_features_csv, BinWindow, NormalizationMode, FEATURE_DIM,
};
use radmat::fingerprint::{dataset_hash, fingerprint};
use radmat::nn::{load_params, save_params, train, TrainedOn};
use radmat::radar::dataset::{read_profiles_csv, write_profiles_csv};
use radmat::radar::{generate_dataset, RangeProfile, Scenario};
use radmat::SimConfig;

#[global_allocator]
static GLOBAL: alloc::Counting = alloc::Counting;

#[derive(Debug, Parser)]
#[command(
    name = "radmat",
    version,
    about = "Radar material classification workbench"
)]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for data and training.
    #[arg(long, global = true, env = "RADMAT_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate integrated range profiles and write profiles.csv.
    GenData(GenData),
    /// Pick the 12-bin window with the most energy.
    SelectWindow {
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Train a classifier on a profile CSV and write model.json.
    Train(TrainArgs),
    /// Evaluate a saved model on a profile CSV.
    Eval(EvalArgs),
    /// Run named conditions (or `all`) and render their reports.
    Experiment {
        #[arg(value_parser = parse_conditions)]
        conditions: ConditionList,
        /// Enforce the acceptance thresholds; exit 3 if any fails.
        #[arg(long)]
        check: bool,
    },
    /// Re-render report JSON files found in the given paths.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Merge reports even if their fingerprints differ.
        #[arg(long)]
        force: bool,
    },
    /// Measure single-sample inference latency.
    Bench {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 200_000)]
        iterations: usize,
    },
}

#[derive(Debug, Args)]
struct GenData {
    /// nominal, height:H, tilt:T, session:K or augmented[:h0..h1,t0..t1].
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    per_class: Option<usize>,
    /// Use the evaluation seed stream instead of the training one.
    #[arg(long)]
    eval: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Window start bin; selected from the profiles when omitted.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value = "none")]
    normalization: NormalizationMode,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    profiles: PathBuf,
    /// Name used for the report files.
    #[arg(long, default_value = "eval")]
    name: String,
}

#[derive(Debug, Clone)]
struct ConditionList(Vec<Condition>);

fn parse_conditions(s: &str) -> Result<ConditionList, String> {
    if s == "all" {
        return Ok(ConditionList(Condition::ALL.to_vec()));
    }
    s.split(',')
        .map(|c| c.parse::<Condition>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()
        .map(ConditionList)
}

/// An error that maps to a specific exit code.
#[derive(Debug)]
struct Exit(u8);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.0)
    }
}

impl std::error::Error for Exit {}

struct Ctx {
    cfg: SimConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = writeln!(std::io::stdout(), "{}", msg.as_ref());
        }
    }

    fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ensure_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))
    }
}

fn resolve_config(cli: &Cli) -> Result<SimConfig> {
    let mut cfg = match &cli.config {
        Some(path) => SimConfig::load(path)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
        cfg.train.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_profiles(path: &Path) -> Result<Vec<RangeProfile<f64>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_profiles_csv(BufReader::new(file))?)
}

fn gen_data(ctx: &Ctx, args: &GenData) -> Result<()> {
    let scenario = args.scenario.unwrap_or(ctx.cfg.scenario);
    let per_class = args.per_class.unwrap_or(if args.eval {
        ctx.cfg.experiment.eval_per_class
    } else {
        ctx.cfg.experiment.train_per_class
    });
    let seed = ctx.cfg.experiment.seed;
    let base = if args.eval {
        eval_seed_base(seed, &scenario)
    } else {
        train_seed_base(seed, &scenario)
    };
    let data = generate_dataset::<f64>(
        &ctx.cfg.radar,
        &ctx.cfg.materials,
        &scenario,
        per_class,
        base,
    )?;
    ctx.ensure_out()?;
    let path = ctx.out_file("profiles.csv");
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_profiles_csv(&data.profiles, BufWriter::new(file))?;
    ctx.say(format!(
        "wrote {} profiles ({scenario}) to {}",
        data.len(),
        path.display()
    ));
    Ok(())
}

fn select(ctx: &Ctx, profiles: Option<&Path>) -> Result<BinWindow> {
    let path = profiles.map_or_else(|| ctx.out_file("profiles.csv"), Path::to_path_buf);
    let window = select_window(&read_profiles(&path)?, FEATURE_DIM)?;
    ctx.ensure_out()?;
    fs::write(
        ctx.out_file("window.json"),
        serde_json::to_string_pretty(&window)? + "\n",
    )?;
    ctx.say(format!(
        "window start_bin {} (bins {}..{})",
        window.start_bin,
        window.start_bin,
        window.end() - 1
    ));
    Ok(window)
}

fn train_cmd(ctx: &Ctx, args: &TrainArgs) -> Result<()> {
    let path = args
        .profiles
        .clone()
        .unwrap_or_else(|| ctx.out_file("profiles.csv"));
    let profiles = read_profiles(&path)?;
    let window = match args.window {
        Some(start) => BinWindow::new(start),
        None => select_window(&profiles, FEATURE_DIM)?,
    };
    let resolution = ctx.cfg.radar.range_resolution_m;
    let set = prepare_features(&profiles, window, args.normalization, resolution)?;
    let (model, history) = train(&set, &ctx.cfg.train)?;
    ctx.ensure_out()?;
    let features: Vec<_> = profiles
        .iter()
        .map(|p| {
            radmat::features::normalize(
                &radmat::features::extract_features(p, window)?,
                args.normalization,
                resolution,
            )
        })
        .collect::<radmat::Result<_>>()?;
    write_features_csv(
        &features,
        BufWriter::new(File::create(ctx.out_file("features.csv"))?),
    )?;
    let trained_on = TrainedOn {
        scenario: path.display().to_string(),
        seed: ctx.cfg.train.seed,
        dataset_hash: dataset_hash(set.inputs.as_slice(), &set.labels),
        window_start: window.start_bin,
        normalization: args.normalization,
        standardized: false,
    };
    let model_path = ctx.out_file("model.json");
    save_params(model.params(), &trained_on, &model_path)?;
    fs::write(
        ctx.out_file("history.json"),
        serde_json::to_string(&history.loss)? + "\n",
    )?;
    ctx.say(format!(
        "trained {} epochs, final loss {:.4}, train accuracy {:.4}; wrote {}",
        history.loss.len(),
        history.loss.last().copied().unwrap_or(f64::NAN),
        history.accuracy.last().copied().unwrap_or(f64::NAN),
        model_path.display()
    ));
    Ok(())
}

fn eval_cmd(ctx: &Ctx, args: &EvalArgs) -> Result<()> {
    let model_path = args
        .model
        .clone()
        .unwrap_or_else(|| ctx.out_file("model.json"));
    let saved = load_params::<f64>(&model_path)
        .with_context(|| format!("loading {}", model_path.display()))?;
    let profiles = read_profiles(&args.profiles)?;
    let set = prepare_features(
        &profiles,
        BinWindow::new(saved.trained_on.window_start),
        saved.trained_on.normalization,
        ctx.cfg.radar.range_resolution_m,
    )?;
    let records: Vec<PredictionRecord> = saved
        .model
        .predict_batch(&set.inputs)?
        .iter()
        .zip(&set.labels)
        .map(|(p, &label)| PredictionRecord {
            label,
            predicted: p.class,
            confidence: p.confidence.clamp(0.0, 1.0),
        })
        .collect();
    let report = EvalReport::from_records(&args.name, &records, &fingerprint(&ctx.cfg))?;
    render_report(std::slice::from_ref(&report), &ctx.out)?;
    ctx.say(format!(
        "{}: macro-F1 {:.4} over {} samples",
        report.condition, report.macro_f1, report.n
    ));
    Ok(())
}

fn experiment(ctx: &Ctx, conditions: &[Condition], check: bool) -> Result<()> {
    let bench = Workbench::<f64>::new(ctx.cfg.clone())?;
    let runs = bench.run_all(conditions)?;
    let reports: Vec<EvalReport> = runs.iter().map(|r| r.report.clone()).collect();
    render_report(&reports, &ctx.out)?;
    let models = ctx.out.join("models");
    fs::create_dir_all(&models)?;
    for p in [Pipeline::Nominal, Pipeline::RangeR4, Pipeline::Augmented] {
        if !conditions.iter().any(|c| c.pipeline() == p) {
            continue;
        }
        let trained = bench.pipeline(p)?;
        let name = serde_json::to_value(p)?;
        let path = models.join(format!("{}.model.json", name.as_str().unwrap_or("model")));
        save_params(trained.classifier.params(), &trained.trained_on, &path)?;
    }
    for r in &reports {
        ctx.say(format!(
            "{:<22} macro-F1 {:.4}  mean confidence {:.4}  n {}",
            r.condition, r.macro_f1, r.mean_confidence, r.n
        ));
    }
    if check {
        let lines = check_reports(&bench, &runs)?;
        for line in &lines {
            let _ = writeln!(std::io::stdout(), "{line}");
        }
        if lines.iter().any(|l| !l.passed) {
            return Err(Exit(3).into());
        }
    }
    Ok(())
}

fn collect_reports(inputs: &[PathBuf]) -> Result<Vec<EvalReport>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.to_string_lossy().ends_with(".report.json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    files.iter().map(|f| Ok(EvalReport::load(f)?)).collect()
}

fn report_cmd(ctx: &Ctx, inputs: &[PathBuf], force: bool) -> Result<()> {
    let reports = collect_reports(inputs)?;
    if let Err(e) = check_fingerprints(&reports) {
        if !force {
            return Err(e)
                .context("refusing to merge reports from different configs (use --force)");
        }
        eprintln!("warning: {e}");
    }
    let written = render_report(&reports, &ctx.out)?;
    ctx.say(format!(
        "rendered {} reports into {} files",
        reports.len(),
        written.len()
    ));
    Ok(())
}

fn bench_cmd(ctx: &Ctx, model: Option<&Path>, iterations: usize) -> Result<()> {
    let path = model.map_or_else(
        || ctx.out.join("models").join("nominal.model.json"),
        Path::to_path_buf,
    );
    let s = bench::run(&ctx.cfg, &path, iterations)?;
    ctx.say(format!(
        "fused inference: median {} us, p99 {} us over {} calls ({} allocations)",
        bench::sig3_text(s.inference_median_us),
        bench::sig3_text(s.inference_p99_us),
        s.iterations,
        s.allocations_in_timed_loop
    ));
    ctx.say(format!(
        "feature extraction: median {} us, p99 {} us",
        bench::sig3_text(s.feature_median_us),
        bench::sig3_text(s.feature_p99_us)
    ));
    ctx.ensure_out()?;
    let json = serde_json::to_string_pretty(&s)? + "\n";
    fs::write(ctx.out_file("bench.json"), &json)?;
    ctx.say(json.trim_end());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    let ctx = Ctx {
        cfg,
        out: cli.out.clone(),
        quiet: cli.quiet,
    };
    ctx.say(format!("fingerprint {}", fingerprint(&ctx.cfg)));
    match &cli.command {
        Command::GenData(args) => gen_data(&ctx, args),
        Command::SelectWindow { profiles } => select(&ctx, profiles.as_deref()).map(|_| ()),
        Command::Train(args) => train_cmd(&ctx, args),
        Command::Eval(args) => eval_cmd(&ctx, args),
        Command::Experiment { conditions, check } => experiment(&ctx, &conditions.0, *check),
        Command::Report { inputs, force } => report_cmd(&ctx, inputs, *force),
        Command::Bench { model, iterations } => bench_cmd(&ctx, model.as_deref(), *iterations),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(Exit(code)) = err.downcast_ref::<Exit>() {
        return *code;
    }
    match err.downcast_ref::<radmat::Error>() {
        Some(radmat::Error::UnknownCondition(_) | radmat::Error::UnknownScenario(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            if code != 3 {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code)
        }
    }
}
