use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use vcnet::config::{ConfigError, RunConfig, SweepParam, SweepSpec};
use vcnet::graph::Period;
use vcnet::pipeline::{self, PipelineError, RunOptions};

#[derive(Parser)]
#[command(name = "vcnet", version, about = "Start-up success prediction on temporal investor networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for the run and the generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Config override such as `model.d=32`; repeatable, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Inclusive range of test periods, e.g. `25..30`.
    #[arg(long, global = true, value_name = "A..B", value_parser = parse_periods)]
    periods: Option<PeriodRange>,
}

#[derive(Clone, Copy, Debug)]
struct PeriodRange(Period, Period);

fn parse_periods(s: &str) -> Result<PeriodRange, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: Period = a.trim().parse().map_err(|e| format!("bad start {a:?}: {e}"))?;
    let b: Period = b.trim().parse().map_err(|e| format!("bad end {b:?}: {e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(PeriodRange(a, b))
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the data, then summarize its structure.
    Ingest,
    /// Write a synthetic dataset with its planted truth.
    Generate,
    /// Train embeddings and the classifier, writing checkpoints.
    Train,
    /// Rank test cohorts with the trained checkpoints.
    Predict,
    /// Score predictions against labels and write the report.
    Evaluate,
    /// Print the report of an earlier evaluation.
    Report,
    /// Every stage end to end.
    Run,
    /// Check that test predictions do not change when future data is removed.
    AuditLeakage,
    /// One full run per value of a hyperparameter.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file with `param` and `values`.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["param", "values"])]
    spec: Option<PathBuf>,
    /// One of gst_layers, d, beta.
    #[arg(long, requires = "values")]
    param: Option<String>,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', requires = "param")]
    values: Vec<f64>,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.synthetic.seed = seed;
    }
    for s in &common.set {
        cfg.apply_override(s).with_context(|| format!("--set {s}"))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep_spec(args: &SweepArgs) -> Result<SweepSpec> {
    let spec = match (&args.spec, &args.param) {
        (Some(path), _) => SweepSpec::load(path)?,
        (None, Some(param)) => SweepSpec { param: param.parse::<SweepParam>()?, values: args.values.clone() },
        (None, None) => bail!(ConfigError::Invalid("sweep needs --spec or --param with --values".into())),
    };
    spec.validate()?;
    Ok(spec)
}

fn print_file(out: &Path, name: &str) {
    println!("wrote {}", out.join(name).display());
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli.common)?;
    let out = &cli.common.out;
    let periods = cli.common.periods.map(|PeriodRange(a, b)| (a, b));
    match &cli.command {
        Command::Ingest => {
            let s = pipeline::ingest(&cfg, out)?;
            println!("start-ups {}  persons {}  events {}  last date {}", s.startups, s.persons, s.events, s.data_end);
            println!("train {}  validation {}  test {}", s.train, s.validation, s.test);
            if let Some(last) = s.periods.last() {
                println!(
                    "period {}: {} nodes, {} edges, {} components, LCC {:.3}",
                    last.period, last.nodes, last.edges, last.components, last.lcc_fraction
                );
            }
            if let Some(fit) = &s.person_degree_fit {
                println!("person degree tail: alpha {:.3} from x_min {} ({} nodes)", fit.alpha, fit.x_min, fit.n_tail);
            }
            print_file(out, pipeline::INGEST_FILE);
        }
        Command::Generate => {
            let audit = pipeline::generate_data(&cfg, out)?;
            println!("base success rate {:.4}", audit.base_rate);
            for b in &audit.by_degree_quintile {
                println!("investor degree {:>3}: {:>5} start-ups, rate {:.3}", b.label, b.count, b.rate);
            }
            print_file(out, "data");
            print_file(out, pipeline::SIGNAL_AUDIT_FILE);
        }
        Command::Train => {
            let t = pipeline::train_stage(&cfg, out)?;
            if let Some(last) = t.embed_trace.last() {
                println!("embedding loss {:.4} at period {}", last.total, last.period);
            }
            let best = &t.classifier_trace.epochs[t.classifier_trace.best_epoch];
            match best.validation_ap {
                Some(ap) => println!("classifier epoch {}: loss {:.4}, validation AP {:.3}", best.epoch, best.loss, ap),
                None => println!("classifier epoch {}: loss {:.4}", best.epoch, best.loss),
            }
            print_file(out, "checkpoints");
        }
        Command::Predict => {
            let rows = pipeline::predict_stage(&cfg, out, periods)?;
            println!("{} predictions", rows.len());
            print_file(out, pipeline::PREDICTIONS_FILE);
        }
        Command::Evaluate => {
            print!("{}", pipeline::evaluate_stage(&cfg, out)?.to_text());
        }
        Command::Report => {
            print!("{}", pipeline::render_report(out)?);
        }
        Command::Run => {
            let result = pipeline::run(&cfg, out, RunOptions { truncate: None, periods })?;
            match result.report {
                Some(r) => print!("{}", r.to_text()),
                None => println!("{} predictions; no labelled test start-ups to score", result.predictions.len()),
            }
        }
        Command::AuditLeakage => {
            let report = pipeline::audit_leakage(&cfg, out, periods)?;
            for m in &report.months {
                let verdict = if m.identical { "identical" } else { "CHANGED" };
                println!("period {:>3} cut at {}: {:>4} rows {verdict}", m.period, m.truncated_at, m.rows);
            }
            print_file(out, pipeline::AUDIT_FILE);
            if !report.passed {
                eprintln!("error: test predictions depend on data after their month");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Sweep(args) => {
            let spec = sweep_spec(args)?;
            let table = pipeline::run_sweep(&cfg, &spec, out)?;
            print!("{}", table.to_text());
            print_file(out, pipeline::SWEEP_FILE);
            if table.failed() > 0 {
                eprintln!("error: {} of {} sweep runs failed", table.failed(), table.cells.len());
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<PipelineError>() {
        return e.exit_code() as u8;
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    1
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(text.trim()) {
            if !msg.is_empty() {
                msg += ": ";
            }
            msg += text.trim();
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
