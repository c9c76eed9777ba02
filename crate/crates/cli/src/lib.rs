//! Command-line front end. Each subcommand maps onto one workflow step and
//! prints a JSON summary; failures print `{code, message}` to stderr.
//!
//! Settings resolve as defaults, then the config file, then flags.
//! `NARRATIVE_AUDIT_HOME` supplies `config.toml` when `--config` is absent
//! and is the base for relative data and output paths.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use narrative_audit::config::RunConfig;
use narrative_audit::erroranalysis::MitigationKind;
use narrative_audit::fusion::FusionMode;
use narrative_audit::models::ModelKind;
use narrative_audit::review::{self, RaterGroup, ReviewStore};
use narrative_audit::textpipe::NgramRange;
use narrative_audit::workflow::{self, Layout};
use narrative_audit::{Error, Result};
use serde_json::{json, Value};

pub const HOME_ENV: &str = "NARRATIVE_AUDIT_HOME";

#[derive(Debug, Parser)]
#[command(name = "narrative-audit", version, about = "Classify crash narratives, audit coded road types, and run blinded expert review")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (.toml or .json).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory holding dataset.jsonl and optional nodes.csv.
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Directory for models, predictions, review data and reports.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for the split, sampling and resampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Classifier to train or analyse.
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelArg>,
    /// How structured fields join the narrative features.
    #[arg(long, global = true, value_enum)]
    pub fusion: Option<FusionArg>,
    /// Comma-separated mitigations, or `all` / `none`.
    #[arg(long, global = true, value_name = "LIST")]
    pub mitigations: Option<String>,
    /// Bootstrap resamples.
    #[arg(long, global = true, value_name = "N")]
    pub resamples: Option<usize>,
    /// Port for the review service.
    #[arg(long, global = true, value_name = "P")]
    pub port: Option<u16>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Svm,
    Gbdt,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Svm => ModelKind::Svm,
            ModelArg::Gbdt => ModelKind::Gbdt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FusionArg {
    None,
    Early,
    Late,
    Hybrid,
}

impl From<FusionArg> for FusionMode {
    fn from(f: FusionArg) -> Self {
        match f {
            FusionArg::None => FusionMode::None,
            FusionArg::Early => FusionMode::Early,
            FusionArg::Late => FusionMode::Late,
            FusionArg::Hybrid => FusionMode::Hybrid,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Join narrative and tabular CSVs into dataset.jsonl.
    Ingest {
        /// Narrative CSV with CRASH_KEY and narrative part columns.
        #[arg(long, value_name = "PATH")]
        narratives: PathBuf,
        /// Tabular CSV with CRASH_KEY and the coded road type.
        #[arg(long, value_name = "PATH")]
        tabular: Option<PathBuf>,
        /// Dataset manifest with code lists and scrub toggles.
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
    },
    /// Re-run PII scrubbing over a dataset file.
    Scrub {
        /// Dataset to scrub.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Where to write; defaults to overwriting the input.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
        /// Dataset manifest with scrub toggles.
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
    },
    /// Write a synthetic corpus to the data directory.
    Synth {
        /// Number of records.
        #[arg(long, value_name = "N")]
        records: Option<usize>,
        /// Share of intersection-related records.
        #[arg(long, value_name = "FRAC")]
        class_balance: Option<f64>,
        /// Share of records drawn from the ambiguous templates.
        #[arg(long, value_name = "FRAC")]
        ambiguous: Option<f64>,
        /// Share of coded labels flipped.
        #[arg(long, value_name = "FRAC")]
        label_noise: Option<f64>,
    },
    /// Train on the training split and write test-split predictions.
    Train {
        /// Artifact name; defaults to the model kind.
        #[arg(long)]
        name: Option<String>,
        /// Smallest and largest n-gram length, e.g. `2,2`.
        #[arg(long, value_name = "MIN,MAX")]
        ngram: Option<String>,
        /// Enable ambiguity-aware preprocessing.
        #[arg(long)]
        aware: bool,
    },
    /// Predict with a saved model.
    Predict {
        /// Artifact name; defaults to the model kind.
        #[arg(long)]
        name: Option<String>,
        /// Predict every record instead of the test split.
        #[arg(long)]
        all: bool,
        /// Predictions CSV to write instead of the default location.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Test-split metrics for every prediction file.
    Evaluate {
        /// Also run the mitigation framework for the selected model.
        #[arg(long)]
        framework: bool,
    },
    /// Flag records where a model disagrees with the coded label.
    Audit,
    /// Draw a stratified review sample from audit disagreements.
    Sample {
        /// Number of items to draw.
        #[arg(long, value_name = "N")]
        size: Option<usize>,
    },
    /// Run the review service until interrupted.
    Serve {
        /// Static review UI bundle to serve next to the API.
        #[arg(long, value_name = "DIR")]
        ui_dir: Option<PathBuf>,
    },
    /// Agreement statistics for a CRASH_KEY,RATER,LABEL file.
    Agree {
        /// Ratings CSV.
        #[arg(long, value_name = "PATH")]
        ratings: PathBuf,
        /// Rater group as NAME=r1,r2; repeat for more groups. Two groups
        /// also get a bootstrap test of their kappa difference.
        #[arg(long, value_name = "NAME=RATERS")]
        group: Vec<String>,
    },
    /// Paired comparisons between every pair of models.
    Compare,
    /// Assemble every available section into reports/.
    Report {
        /// Include sessions that have not rated every item.
        #[arg(long)]
        include_incomplete: bool,
    },
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MissingInput(_) | Error::NotFound(_) => 3,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 3,
        Error::EmptyNarrative { .. }
        | Error::UnknownRoadType(_)
        | Error::DuplicateKey(_)
        | Error::EmptyCorpus
        | Error::VocabularyMismatch { .. }
        | Error::DuplicatePrediction { .. }
        | Error::Parse { .. }
        | Error::ProbabilityRange { .. }
        | Error::InvalidLabel(_)
        | Error::Format(_)
        | Error::Csv(_)
        | Error::Json(_) => 4,
        Error::Config(_) => 5,
        Error::DegenerateLabels | Error::NoOverlap | Error::DegenerateMarginals { .. } | Error::Rejected(_) => 6,
        Error::Io(_) => 1,
    }
}

fn under_home(home: Option<&Path>, p: PathBuf) -> PathBuf {
    match home {
        Some(h) if p.is_relative() => h.join(p),
        _ => p,
    }
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(g: &GlobalArgs, home: Option<&Path>) -> Result<RunConfig> {
    let home_config = home.map(|h| h.join("config.toml")).filter(|p| p.exists());
    let mut cfg = match g.config.as_ref().or(home_config.as_ref()) {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.data_dir = under_home(home, g.data_dir.clone().unwrap_or(cfg.data_dir));
    cfg.out = under_home(home, g.out.clone().unwrap_or(cfg.out));
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(m) = g.model {
        cfg.system.model = m.into();
    }
    if let Some(f) = g.fusion {
        cfg.system.pipeline.fusion.mode = f.into();
    }
    if let Some(m) = &g.mitigations {
        cfg.system.pipeline.mitigations.enabled = MitigationKind::parse_list(m)?;
    }
    if let Some(r) = g.resamples {
        cfg.stats.resamples = r;
    }
    if let Some(p) = g.port {
        cfg.review.port = p;
    }
    Ok(cfg)
}

fn parse_ngram(s: &str) -> Result<NgramRange> {
    let bad = || Error::Config(format!("--ngram expects MIN,MAX, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    NgramRange::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
}

fn parse_group(s: &str) -> Result<RaterGroup> {
    let (name, raters) = s.split_once('=').ok_or_else(|| Error::Config(format!("--group expects NAME=r1,r2, got {s:?}")))?;
    let raters: Vec<String> = raters.split(',').map(|r| r.trim().to_string()).filter(|r| !r.is_empty()).collect();
    if name.trim().is_empty() || raters.len() < 2 {
        return Err(Error::Config(format!("group {s:?} needs a name and at least two raters")));
    }
    Ok(RaterGroup { name: name.trim().to_string(), raters })
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn model_name(cfg: &RunConfig, name: Option<String>) -> String {
    name.unwrap_or_else(|| cfg.system.model.as_str().to_string())
}

/// Runs one command and returns its JSON summary.
pub fn run(cli: Cli) -> Result<Value> {
    let home = std::env::var_os(HOME_ENV).map(PathBuf::from);
    let mut cfg = resolve_config(&cli.global, home.as_deref())?;
    match cli.command {
        Command::Ingest { narratives, tabular, manifest } => to_value(&workflow::ingest(&cfg, &narratives, tabular.as_deref(), manifest.as_deref())?),
        Command::Scrub { input, output, manifest } => {
            let output = output.unwrap_or_else(|| input.clone());
            let report = workflow::scrub(&input, &output, manifest.as_deref())?;
            Ok(json!({"output": output, "scrub": to_value(&report)?}))
        }
        Command::Synth { records, class_balance, ambiguous, label_noise } => {
            let s = &mut cfg.synth;
            s.n_records = records.unwrap_or(s.n_records);
            s.class_balance = class_balance.unwrap_or(s.class_balance);
            s.ambiguous = ambiguous.unwrap_or(s.ambiguous);
            s.label_noise = label_noise.unwrap_or(s.label_noise);
            to_value(&workflow::synth(&cfg)?)
        }
        Command::Train { name, ngram, aware } => {
            if let Some(n) = ngram {
                cfg.system.pipeline.vocabulary.ngram_range = parse_ngram(&n)?;
            }
            cfg.system.pipeline.ambiguity_aware |= aware;
            let name = model_name(&cfg, name);
            to_value(&workflow::train(&cfg, cfg.system.model, &name)?)
        }
        Command::Predict { name, all, output } => {
            let name = model_name(&cfg, name);
            let p = workflow::predict(&cfg, &name, all, output.as_deref())?;
            Ok(json!({"model": p.model, "records": p.entries.len(), "output": output.unwrap_or_else(|| Layout::new(&cfg).predictions(&name))}))
        }
        Command::Evaluate { framework } => {
            let metrics = workflow::evaluate(&cfg)?;
            let mut out = json!({"models": to_value(&metrics)?});
            if framework {
                out["mitigation"] = to_value(&workflow::mitigation(&cfg, cfg.system.model)?)?;
            }
            Ok(out)
        }
        Command::Audit => {
            let a = workflow::audit(&cfg)?;
            Ok(json!({"models": to_value(&a.models)?, "flagged_records": a.records.len(), "output": Layout::new(&cfg).audit()}))
        }
        Command::Sample { size } => {
            cfg.review.sample_size = size.unwrap_or(cfg.review.sample_size);
            cfg.validate()?;
            let s = workflow::sample(&cfg)?;
            Ok(json!({"sample_id": s.sample_id, "items": s.len(), "allocation": s.allocation, "warnings": s.warnings}))
        }
        Command::Serve { ui_dir } => {
            let ui_dir = ui_dir.or_else(|| cfg.review.ui_dir.clone());
            let store = Arc::new(ReviewStore::open(&Layout::new(&cfg).review())?);
            let addr = SocketAddr::from(([127, 0, 0, 1], cfg.review.port));
            eprintln!("{}", json!({"listening": addr.to_string()}));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(review::serve(store, addr, ui_dir))?;
            Ok(json!({"stopped": addr.to_string()}))
        }
        Command::Agree { ratings, group } => {
            let groups = group.iter().map(|g| parse_group(g)).collect::<Result<Vec<_>>>()?;
            to_value(&workflow::agree(&cfg, &ratings, &groups)?)
        }
        Command::Compare => {
            cfg.validate()?;
            to_value(&workflow::compare(&cfg)?)
        }
        Command::Report { include_incomplete } => {
            cfg.review.include_incomplete |= include_incomplete;
            let r = workflow::report(&cfg)?;
            let tables: Vec<&str> = r.tables().into_iter().map(|(n, _)| n).collect();
            Ok(json!({"output": Layout::new(&cfg).reports(), "tables": tables}))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config_and_home() {
        let cli = Cli::parse_from(["narrative-audit", "--seed", "9", "--fusion", "late", "--mitigations", "distance_weighting", "audit"]);
        let cfg = resolve_config(&cli.global, Some(Path::new("/srv/na"))).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.system.pipeline.fusion.mode, FusionMode::Late);
        assert_eq!(cfg.data_dir, Path::new("/srv/na/data"));
        assert_eq!(cfg.system.pipeline.mitigations.enabled.len(), 1);
        let cli = Cli::parse_from(["narrative-audit", "--mitigations", "sideways", "audit"]);
        assert!(matches!(resolve_config(&cli.global, None), Err(Error::Config(_))));
    }

    #[test]
    fn group_and_ngram_parsing() {
        assert_eq!(parse_group("experts=a,b").unwrap().raters, ["a", "b"]);
        assert!(parse_group("solo=a").is_err());
        assert_eq!(parse_ngram("1,3").unwrap(), NgramRange::new(1, 3).unwrap());
        assert!(parse_ngram("3").is_err());
    }
}
