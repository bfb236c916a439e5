use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npe_core::data::{exp_profile, load_dataset, save_dataset, LongTailProfile};
use npe_core::harness::{
    self, class_mean_eta, evaluate, format_trained_eta, grad_check, groups_for, load_model, read_trained_eta,
    run_experiment, run_rows, save_model, sweep_csv, theory_check, to_csv, EvalMode, ExperimentConfig,
    GradCheckConfig, Method, MetricsRow, Preset, SweepAxes,
};
use npe_core::model::crt_retrain;
use npe_core::numerics::Rng;
use npe_core::{Error, Result};

#[derive(Parser)]
#[command(name = "npe", version, about = "Neural prior estimator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base values before the config file is applied.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.set.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        harness::parse_config(Preset::parse(&self.preset)?, self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Writes train.csv and test.csv for the configured dataset into --out.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Trains one model and reports every configured method.
    Train {
        #[command(flatten)]
        common: Common,
        /// Saves the trained parameters.
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Saves per-epoch CE and NPE losses.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Saves per-class estimates as a `count,eta` file.
        #[arg(long)]
        eta_out: Option<PathBuf>,
    },
    /// Evaluates a saved model on a dataset file.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Training data, needed for the crt method.
        #[arg(long)]
        train_data: Option<PathBuf>,
    },
    /// Runs the n_pem x rho x alpha grid over several seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        n_pem: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Tabulates the collapsed per-class objective.
    TheoryCheck {
        #[command(flatten)]
        common: Common,
        /// Class counts; defaults to the configured long-tail profile.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        lambda: Vec<f64>,
        /// `count,eta` file to validate against the first lambda.
        #[arg(long)]
        trained: Option<PathBuf>,
    },
    /// Compares analytic and finite-difference gradients.
    GradCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 24)]
        instances: usize,
    },
}

enum Outcome {
    Ok,
    /// Ran to completion with a failing verdict.
    Failed,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::GenData { common } => {
            let cfg = common.config()?;
            let dir = common
                .out
                .ok_or_else(|| Error::Config("gen-data needs --out <directory>".into()))?;
            std::fs::create_dir_all(&dir)?;
            let data = harness::build_datasets(&cfg, cfg.seed)?;
            save_dataset(&data.train, dir.join("train.csv"))?;
            save_dataset(&data.test, dir.join("test.csv"))?;
        }
        Command::Train {
            common,
            model_out,
            trace_out,
            eta_out,
        } => {
            let cfg = common.config()?;
            let run = run_experiment(&cfg)?;
            emit(common.out.as_deref(), &to_csv(&run_rows(&cfg, &run.reports)))?;
            if let Some(p) = model_out {
                save_model(&run.outcome.model, run.data.train.counts(), &p)?;
            }
            if let Some(p) = trace_out {
                let mut s = String::from("epoch,lr,ce,npe\n");
                for e in &run.outcome.trace {
                    let _ = writeln!(s, "{},{},{:.6},{:.6}", e.epoch, e.lr, e.ce, e.npe);
                }
                std::fs::write(p, s)?;
            }
            if let Some(p) = eta_out {
                let eta = class_mean_eta(&run.outcome.model, &run.data.train)?;
                std::fs::write(p, format_trained_eta(run.data.train.counts(), &eta))?;
            }
        }
        Command::Eval {
            common,
            model,
            data,
            train_data,
        } => {
            let cfg = common.config()?;
            let dump = load_model(&model)?;
            let test = load_dataset(&data)?;
            let train = train_data.as_deref().map(load_dataset).transpose()?;
            let counts = match (&train, dump.counts.is_empty()) {
                (Some(t), _) => t.counts().to_vec(),
                (None, false) => dump.counts.clone(),
                (None, true) => test.counts().to_vec(),
            };
            let groups = groups_for(&cfg, &counts);
            let mut rows = Vec::new();
            for &method in &cfg.methods {
                let mut report = match method {
                    Method::Ce => evaluate(&dump.model, &test, &EvalMode::Ce, &groups)?,
                    Method::La => evaluate(&dump.model, &test, &EvalMode::La(&counts), &groups)?,
                    Method::NpeLa => evaluate(&dump.model, &test, &EvalMode::NpeLa(cfg.alpha), &groups)?,
                    Method::Crt => {
                        let train = train.as_ref().ok_or_else(|| {
                            Error::Config("method crt needs --train-data".into())
                        })?;
                        let mut rng = Rng::with_stream(cfg.seed, harness::train::stream::CRT);
                        let head = crt_retrain(&dump.model, train, &cfg.crt_config(), &mut rng)?;
                        evaluate(&dump.model, &test, &EvalMode::CrtHead(&head), &groups)?
                    }
                };
                report.seed = cfg.seed;
                report.config_digest = cfg.digest();
                rows.push(MetricsRow::from_report(
                    "eval".into(),
                    method,
                    dump.model.pems.len(),
                    cfg.rho,
                    cfg.alpha,
                    &report,
                ));
            }
            emit(common.out.as_deref(), &to_csv(&rows))?;
        }
        Command::Sweep {
            common,
            n_pem,
            rho,
            alpha,
            repeats,
        } => {
            let cfg = common.config()?;
            let mut axes = SweepAxes::from_config(&cfg);
            if let Some(v) = n_pem {
                axes.n_pem = v;
            }
            if let Some(v) = rho {
                axes.rho = v;
            }
            if let Some(v) = alpha {
                axes.alpha = v;
            }
            let mut checked = cfg.clone();
            checked.sweep_n_pem.clone_from(&axes.n_pem);
            checked.sweep_rho.clone_from(&axes.rho);
            checked.sweep_alpha.clone_from(&axes.alpha);
            checked.repeats = repeats.unwrap_or(cfg.repeats);
            checked.validate()?;
            emit(common.out.as_deref(), &sweep_csv(&cfg, &axes, checked.repeats)?)?;
        }
        Command::TheoryCheck {
            common,
            counts,
            lambda,
            trained,
        } => {
            let cfg = common.config()?;
            let counts = match counts {
                Some(c) => c,
                None => exp_profile(&LongTailProfile::new(cfg.n_max, cfg.num_classes, cfg.rho))?,
            };
            let trained = trained.as_deref().map(read_trained_eta).transpose()?;
            let text = theory_check(
                &counts,
                &lambda,
                trained.as_ref().map(|(c, e)| (c.as_slice(), e.as_slice())),
            )?;
            emit(common.out.as_deref(), &text)?;
        }
        Command::GradCheck { common, instances } => {
            let cfg = common.config()?;
            let report = grad_check(&GradCheckConfig {
                instances,
                seed: cfg.seed,
                ..Default::default()
            })?;
            emit(common.out.as_deref(), &report.to_string())?;
            if !report.passed() {
                return Ok(Outcome::Failed);
            }
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
