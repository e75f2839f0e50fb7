//! Command-line front end: dataset generation, refiner training, SNR sweeps
//! and result reporting. Every command is deterministic for a given config
//! and seed.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use hapslink::dataset::{
    generate_ce_dataset, generate_cfo_dataset, load_dataset, save_dataset, Dataset,
};
use hapslink::harness::{
    format_report, read_csv, records_to_csv_with_comments, run_sweep, CnnModels, EstimatorKind,
    ScenarioConfig, SweepMode,
};
use hapslink::link::LinkContext;
use hapslink::nn::{load_model, save_model, train, CnnModel, TrainConfig};
use hapslink::SimError;

#[derive(Parser)]
#[command(
    name = "hapslink",
    version,
    about = "OFDM link simulator with classical and CNN-aided CFO/channel estimation and 3-user power-domain NOMA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    /// Channel-estimate refiner samples (least-squares planes -> truth).
    Ce,
    /// Carrier-offset refiner samples (raw estimate windows -> truth).
    Cfo,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Oma,
    NomaDl,
    NomaUl,
}

impl From<ModeArg> for SweepMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Oma => SweepMode::Oma,
            ModeArg::NomaDl => SweepMode::NomaDl,
            ModeArg::NomaUl => SweepMode::NomaUl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Classical,
    Cnn,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Classical => EstimatorKind::Classical,
            EstimatorArg::Cnn => EstimatorKind::Cnn,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a default scenario config to edit from.
    InitConfig {
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a training dataset and persist it.
    GenDataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Number of samples to generate.
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a refiner on a dataset file; the dataset kind selects the
    /// hyperparameter defaults (10 epochs / batch 32 for channel samples,
    /// 60 epochs / batch 8 for offset samples).
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run an SNR sweep and write one CSV record per (SNR, user).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Override the config's estimator kind.
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        /// Trained offset refiner (required for the cnn estimator).
        #[arg(long)]
        cfo_model: Option<PathBuf>,
        /// Trained channel refiner (required for the cnn estimator).
        #[arg(long)]
        ce_model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a results CSV as a console table.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ScenarioConfig, SimError> {
    let mut cfg = ScenarioConfig::from_json_file(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn context_for(cfg: &ScenarioConfig) -> Result<LinkContext, SimError> {
    LinkContext::new(
        cfg.ofdm.clone(),
        cfg.channel.clone(),
        cfg.cfo.clone(),
        cfg.seed,
    )
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::InitConfig { out } => {
            let cfg = ScenarioConfig::default();
            std::fs::write(&out, cfg.to_json_pretty())?;
            println!("wrote default config to {}", out.display());
        }
        Command::GenDataset {
            config,
            kind,
            count,
            out,
            seed,
        } => {
            let cfg = load_config(&config, seed)?;
            let ctx = context_for(&cfg)?;
            let ds = match kind {
                KindArg::Ce => Dataset::Ce(generate_ce_dataset(
                    count,
                    cfg.dataset_snr_range_db,
                    &ctx,
                    cfg.seed,
                )?),
                KindArg::Cfo => Dataset::Cfo(generate_cfo_dataset(
                    count,
                    cfg.arch.cfo_window,
                    cfg.dataset_snr_range_db,
                    &ctx,
                    cfg.seed,
                )?),
            };
            save_dataset(&ds, cfg.seed, cfg.digest(), &out)?;
            println!(
                "wrote {} {} samples to {}",
                ds.len(),
                ds.kind_name(),
                out.display()
            );
        }
        Command::Train {
            config,
            dataset,
            out,
            seed,
        } => {
            let cfg = load_config(&config, seed)?;
            let (ds, header) = load_dataset(&dataset)?;
            if header.scenario_digest != cfg.digest() {
                eprintln!(
                    "note: dataset was generated under a different scenario (digest mismatch)"
                );
            }
            let mut train_cfg = match ds {
                Dataset::Ce(_) => TrainConfig::ce_defaults(),
                Dataset::Cfo(_) => TrainConfig::cfo_defaults(),
            };
            train_cfg.seed = cfg.seed;
            let mut model = CnnModel::regression_stack(
                1,
                cfg.arch.hidden_layers,
                cfg.arch.filters,
                cfg.arch.kernel,
                cfg.seed,
            );
            let (inputs, targets) = ds.tensors();
            let history = train(&mut model, &inputs, &targets, &train_cfg)?;
            for e in &history {
                println!(
                    "epoch {:>3}: train loss {:.6e}, validation loss {:.6e}",
                    e.epoch, e.train_loss, e.val_loss
                );
            }
            save_model(&model, &out)?;
            println!(
                "wrote {} model ({} parameters) to {}",
                ds.kind_name(),
                model.param_count(),
                out.display()
            );
        }
        Command::Sweep {
            config,
            mode,
            estimator,
            cfo_model,
            ce_model,
            out,
            seed,
        } => {
            let mut cfg = load_config(&config, seed)?;
            if let Some(est) = estimator {
                cfg.estimator = est.into();
            }
            let models = match cfg.estimator {
                EstimatorKind::Classical => None,
                EstimatorKind::Cnn => {
                    let cfo = cfo_model.ok_or_else(|| {
                        SimError::MissingModel("--cfo-model required for --estimator cnn".into())
                    })?;
                    let ce = ce_model.ok_or_else(|| {
                        SimError::MissingModel("--ce-model required for --estimator cnn".into())
                    })?;
                    Some(CnnModels {
                        cfo: load_model(cfo)?,
                        ce: load_model(ce)?,
                    })
                }
            };
            let mode: SweepMode = mode.into();
            let records = run_sweep(&cfg, mode, models.as_ref())?;
            let comments = vec![
                format!("mode: {mode}"),
                format!("config: {}", cfg.to_json_compact()),
            ];
            std::fs::write(&out, records_to_csv_with_comments(&records, &comments))?;
            println!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Report { input } => {
            let records = read_csv(&input)?;
            print!("{}", format_report(&records));
        }
    }
    Ok(())
}
