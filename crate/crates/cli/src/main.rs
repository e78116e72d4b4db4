use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use procnet::encoding::{load_dataset, save_dataset, Dataset, Encoder};
use procnet::eventlog::{parse_csv, parse_xes, ColumnMap, EventLog, XesOptions};
use procnet::harness::{
    evaluate, parse_case_csv, parse_case_json, predict_from_checkpoint, run_cv, Config,
};
use procnet::model::{load_checkpoint, Architecture, Model};
use procnet::petrinet::{parse_pnml, PetriNet};
use procnet::training::{split_train_val, train_to_checkpoint};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "procnet", version, about = "Next-activity prediction over Petri net replays")]
struct Cli {
    /// Overrides `train.seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML or JSON run configuration. Missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay and encode a log into a dataset directory.
    Prepare {
        #[command(flatten)]
        input: LogInput,
        #[arg(long)]
        out: PathBuf,
        /// Reuse the encoder of an existing dataset or checkpoint directory
        /// instead of fitting one on this log.
        #[arg(long)]
        encoder_from: Option<PathBuf>,
    },
    /// Train on a prepared dataset and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a checkpoint on a prepared dataset.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// K-fold cross-validation from a raw log.
    Cv {
        #[command(flatten)]
        input: LogInput,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rank next activities for one running case (`.json` or `.csv`).
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        case: PathBuf,
        #[arg(long, default_value_t = 3)]
        top_k: usize,
    },
}

#[derive(Args)]
struct LogInput {
    /// Event log, `.xes` or `.csv`.
    #[arg(long)]
    log: PathBuf,
    /// PNML process model.
    #[arg(long)]
    net: PathBuf,
    /// TOML or JSON column map, required for CSV logs.
    #[arg(long)]
    columns: Option<PathBuf>,
    /// XES event attribute kept as a feature; repeatable. Default: org:resource.
    #[arg(long = "attr")]
    attrs: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their io source in the message
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg = if msg.is_empty() { cause } else { format!("{msg}: {cause}") };
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => read_config(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    config.validate()?;
    let seed = config.train.seed;

    match cli.command {
        Command::Prepare { input, out, encoder_from } => {
            let (log, net) = input.load()?;
            let encoder = match encoder_from {
                Some(dir) => read_json::<Encoder>(&dir.join("encoder.json"))?,
                None => Encoder::fit(&net, &log, &config.encoder)?,
            };
            let ds = Dataset::build(&net, encoder, &log)?;
            let manifest = save_dataset(&out, &ds, &net, seed, &config.hash())?;
            log::info!("wrote {} traces, {} prefixes to {}", manifest.traces, manifest.prefixes, out.display());
            emit(&manifest, None)
        }
        Command::Train { data, out, report } => {
            let (ds, net, _) = load_dataset(&data)?;
            let (tr, va) = split_train_val(ds.traces.len(), config.train.val_fraction, seed)?;
            let arch = Architecture::new(config.model.clone(), &ds.encoder);
            let model = Model::<f32>::new(arch, seed)?;
            log::info!("{} parameters, {} training and {} validation traces", model.num_parameters(), tr.len(), va.len());
            let (_, rep) = train_to_checkpoint(model, &ds.select(&tr), &ds.select(&va), &config.train, &net, &out)?;
            emit(&rep, report.as_deref())
        }
        Command::Evaluate { checkpoint, data, report } => {
            let (ds, _, manifest) = load_dataset(&data)?;
            let (model, _, _) = load_checkpoint(&checkpoint, Some(&manifest.vocab_hash))
                .context("dataset was not prepared with this checkpoint's encoder (use prepare --encoder-from)")?;
            emit(&evaluate(&model, &ds)?, report.as_deref())
        }
        Command::Cv { input, report } => {
            let (log, net) = input.load()?;
            emit(&run_cv(&log, &net, &config)?, report.as_deref())
        }
        Command::Predict { checkpoint, case, top_k } => {
            let bytes = fs::read(&case).with_context(|| format!("reading {}", case.display()))?;
            let events = match extension(&case).as_str() {
                "json" => parse_case_json(&bytes)?,
                "csv" => parse_case_csv(&bytes)?,
                other => bail!("unsupported case format {other:?}, expected .json or .csv"),
            };
            emit(&predict_from_checkpoint(&checkpoint, &events, top_k)?, None)
        }
    }
}

impl LogInput {
    fn load(&self) -> Result<(EventLog, PetriNet)> {
        let bytes = fs::read(&self.log).with_context(|| format!("reading {}", self.log.display()))?;
        let log = match extension(&self.log).as_str() {
            "xes" => {
                let mut options = XesOptions::default();
                if !self.attrs.is_empty() {
                    options.attr_keys = self.attrs.clone();
                }
                parse_xes(&bytes, &options)?
            }
            "csv" => {
                let Some(path) = &self.columns else {
                    bail!("CSV logs need --columns");
                };
                parse_csv(&bytes, &read_structured::<ColumnMap>(path)?)?
            }
            other => bail!("unsupported log format {other:?}, expected .xes or .csv"),
        };
        let net_bytes = fs::read(&self.net).with_context(|| format!("reading {}", self.net.display()))?;
        let net = parse_pnml(&net_bytes).with_context(|| format!("parsing {}", self.net.display()))?;
        log::info!("{} traces, {} events; net with {} places", log.traces.len(), log.num_events(), net.num_places());
        Ok((log, net))
    }
}

fn extension(p: &Path) -> String {
    p.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

fn read_config(path: &Path) -> Result<Config> {
    read_structured(path)
}

fn read_structured<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if extension(path) == "json" {
        return read_json(path);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// Writes pretty JSON to `path`, or to stdout without one.
fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}
