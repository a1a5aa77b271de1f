//! Command-line driver: synthetic data generation, training, evaluation,
//! heatmap export and ablation grids.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tscl::data::{generate_synthetic, load_csv, read_states_csv, split, write_csv, write_states_csv, Dataset, GroundTruth};
use tscl::training::{
    ablation_grid, evaluate, load_checkpoint, run_experiment, save_checkpoint, Ablation, GridRow, MeanStd, MetricReport, ModelBundle,
    Provenance, SeedRun, TrainingLog, MAX_CLUSTER_POINTS,
};
use tscl::viz::{agglomerative_cluster, bin_features, heatmap, knn_assign, HeatmapTable};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] tscl::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Core(tscl::Error::Checkpoint { .. }) => "checkpoint",
            Self::Core(tscl::Error::Parse { .. } | tscl::Error::Csv(_)) => "parse",
            Self::Core(tscl::Error::ShapeMismatch { .. } | tscl::Error::InsufficientData(_)) => "data",
            Self::Core(tscl::Error::InvalidArgument(_) | tscl::Error::InvalidTemperature(_)) => "argument",
            Self::Core(_) => "internal",
            Self::Io { .. } => "io",
        }
    }

    /// 2 configuration, 3 input data, 4 checkpoint, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" | "argument" => 2,
            "parse" | "data" => 3,
            "checkpoint" => 4,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "tscl", version, about = "Temporal supervised contrastive learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat TOML file with any of the run keys.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the synthetic dataset and its ground-truth states.
    Synth {
        /// Dataset CSV path; the states file goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train all phases, write a checkpoint and metric reports.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint on one split of a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// train, validation, test or all.
        #[arg(long, default_value = "test")]
        split: String,
        #[command(flatten)]
        common: Common,
    },
    /// Cluster training embeddings and export the feature heatmap.
    Heatmap {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of clusters.
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        outcome_class: usize,
        /// Equal-frequency bins per continuous feature.
        #[arg(long, default_value_t = 3)]
        bins: usize,
        /// Features kept in the short table.
        #[arg(long, default_value_t = 5)]
        top: usize,
        /// Also write an SVG rendering.
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        common: Common,
    },
    /// All eight ablation configurations over several seeds.
    Grid {
        #[command(flatten)]
        common: Common,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, common } => cmd_synth(&load(&common)?, out.as_deref()).map(drop),
        Command::Train { common } => cmd_train(&load(&common)?).map(drop),
        Command::Eval { checkpoint, split, common } => cmd_eval(&load(&common)?, &checkpoint, &split).map(drop),
        Command::Heatmap {
            checkpoint,
            k,
            outcome_class,
            bins,
            top,
            svg,
            common,
        } => cmd_heatmap(
            &load(&common)?,
            &checkpoint,
            &HeatmapOptions {
                k,
                outcome_class,
                bins,
                top,
                svg,
            },
        )
        .map(drop),
        Command::Grid { common } => cmd_grid(&load(&common)?).map(drop),
    }
}

fn load(c: &Common) -> Result<RunConfig> {
    RunConfig::load(c.config.as_deref(), &c.run)
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        io(dir, fs::create_dir_all(dir))?;
    }
    io(path, fs::write(path, contents))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(tscl::Error::from)?;
    text.push('\n');
    write(path, text)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    io(&dir, fs::create_dir_all(&dir))?;
    Ok(dir)
}

/// The configured CSV, or the synthetic dataset when no file is set.
pub fn load_data(cfg: &RunConfig) -> Result<(Dataset, Option<GroundTruth>)> {
    match &cfg.data {
        Some(path) => {
            let ds = load_csv(path, &cfg.schema()?).map_err(|e| match e {
                tscl::Error::Io(source) => CliError::Io { path: path.clone(), source },
                e => e.into(),
            })?;
            let truth = match &cfg.states {
                Some(p) => Some(read_states_csv(io(p, fs::File::open(p))?)?),
                None => None,
            };
            Ok((ds, truth))
        }
        None => {
            let data = generate_synthetic(&cfg.synthetic())?;
            Ok((data.dataset, Some(data.truth)))
        }
    }
}

pub struct SynthOutput {
    pub data: PathBuf,
    pub states: PathBuf,
    pub config: PathBuf,
}

pub fn cmd_synth(cfg: &RunConfig, out: Option<&Path>) -> Result<SynthOutput> {
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => out_dir(cfg)?.join("synthetic.csv"),
    };
    let data = generate_synthetic(&cfg.synthetic())?;
    let mut buf = Vec::new();
    write_csv(&data.dataset, &mut buf, b',')?;
    write(&path, &buf)?;
    let states = path.with_extension("states.csv");
    let mut buf = Vec::new();
    write_states_csv(&data.truth, &mut buf)?;
    write(&states, &buf)?;
    let config = path.with_extension("config.toml");
    let resolved = RunConfig {
        data: None,
        ..cfg.clone()
    }
    .resolved()?;
    write(&config, resolved.to_toml()?)?;
    println!("wrote {} series to {}", data.dataset.records.len(), path.display());
    Ok(SynthOutput {
        data: path,
        states,
        config,
    })
}

#[derive(Serialize)]
struct TrainReport<'a> {
    provenance: &'a Provenance,
    validation: Option<&'a MetricReport>,
    test: &'a MetricReport,
}

fn loss_log_csv(log: &TrainingLog) -> (String, String) {
    let mut steps = String::from("phase,epoch,step,contrastive,temporal,overall\n");
    let mut epochs = String::from("phase,epoch,mean_loss,validation_auroc\n");
    for p in &log.phases {
        let name = serde_json::to_value(p.phase).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        for s in &p.steps {
            let _ = writeln!(steps, "{name},{},{},{},{},{}", s.epoch, s.step, s.contrastive, s.temporal, s.overall);
        }
        for e in &p.epochs {
            let auc = e.validation_auroc.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(epochs, "{name},{},{},{auc}", e.epoch, e.mean_loss);
        }
    }
    (steps, epochs)
}

pub struct TrainOutput {
    pub dir: PathBuf,
    pub bundle: ModelBundle,
    pub test: MetricReport,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutput> {
    let resolved = cfg.resolved()?;
    let experiment = resolved.experiment()?;
    let (dataset, truth) = load_data(&resolved)?;
    let dir = out_dir(&resolved)?;
    write(&dir.join("config.toml"), resolved.to_toml()?)?;
    let res = run_experiment(&dataset, truth.as_ref(), &experiment)?;
    save_checkpoint(&res.bundle, dir.join("checkpoint.json"))?;
    write_json(
        &dir.join("report.json"),
        &TrainReport {
            provenance: &res.bundle.provenance,
            validation: res.validation.as_ref(),
            test: &res.test,
        },
    )?;
    let mut text = res.test.to_text();
    if let Some(v) = &res.validation {
        text.push('\n');
        text.push_str(&v.to_text());
    }
    write(&dir.join("report.txt"), &text)?;
    let (steps, epochs) = loss_log_csv(&res.log);
    write(&dir.join("loss_steps.csv"), steps)?;
    write(&dir.join("loss_epochs.csv"), epochs)?;
    print!("{}", res.test.to_text());
    Ok(TrainOutput {
        dir,
        bundle: res.bundle,
        test: res.test,
    })
}

fn open_checkpoint(path: &Path) -> Result<ModelBundle> {
    load_checkpoint(path).map_err(|e| match e {
        tscl::Error::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        e => e.into(),
    })
}

/// Reuses the checkpoint's seed for the split and the synthetic data
/// unless the configuration pins them.
fn with_checkpoint_seed(cfg: &RunConfig, bundle: &ModelBundle) -> RunConfig {
    let mut c = cfg.clone();
    if c.seed.is_none() {
        c.seed = Some(bundle.hyper.seed);
    }
    c
}

struct Splits {
    train: Dataset,
    validation: Dataset,
    test: Dataset,
    truth: Option<GroundTruth>,
}

fn splits_for(cfg: &RunConfig) -> Result<Splits> {
    let exp = cfg.experiment()?;
    let (dataset, truth) = load_data(cfg)?;
    dataset.validate()?;
    let (train, validation, test) = split(&dataset, exp.split, exp.split_seed.unwrap_or(exp.hyper.seed))?;
    Ok(Splits {
        train,
        validation,
        test,
        truth,
    })
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, split_name: &str) -> Result<MetricReport> {
    let bundle = open_checkpoint(checkpoint)?;
    let cfg = with_checkpoint_seed(cfg, &bundle);
    let s = splits_for(&cfg)?;
    let part = match split_name {
        "train" => s.train,
        "validation" => s.validation,
        "test" => s.test,
        "all" => {
            let mut all = s.train;
            all.records.extend(s.validation.records);
            all.records.extend(s.test.records);
            all
        }
        other => return Err(CliError::Config(format!("unknown split `{other}` (train, validation, test, all)"))),
    };
    if part.records.is_empty() {
        return Err(tscl::Error::InsufficientData(format!("split `{split_name}` is empty")).into());
    }
    let (_, standardized) = bundle.preprocess(&part)?;
    let states = match &s.truth {
        Some(t) => Some(t.states_for(&part)?),
        None => None,
    };
    let exp = cfg.experiment()?;
    let report = evaluate(&bundle, &standardized, split_name, exp.clusters, states.as_deref(), bundle.cluster_head.as_ref())?;
    let dir = out_dir(&cfg)?;
    write(&dir.join(format!("eval_{split_name}.config.toml")), cfg.resolved()?.to_toml()?)?;
    write_json(&dir.join(format!("eval_{split_name}.json")), &report)?;
    write(&dir.join(format!("eval_{split_name}.txt")), report.to_text())?;
    print!("{}", report.to_text());
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct HeatmapOptions {
    pub k: usize,
    pub outcome_class: usize,
    pub bins: usize,
    pub top: usize,
    pub svg: bool,
}

pub fn cmd_heatmap(cfg: &RunConfig, checkpoint: &Path, opts: &HeatmapOptions) -> Result<HeatmapTable> {
    let bundle = open_checkpoint(checkpoint)?;
    let cfg = with_checkpoint_seed(cfg, &bundle);
    if opts.outcome_class >= bundle.num_classes {
        return Err(CliError::Config(format!(
            "outcome class {} outside 0..{}",
            opts.outcome_class, bundle.num_classes
        )));
    }
    let s = splits_for(&cfg)?;
    let (train_raw, train_std) = bundle.preprocess(&s.train)?;
    let (test_raw, test_std) = bundle.preprocess(&s.test)?;
    let embed = |d: &Dataset| d.snapshots().map(|x| bundle.embed_standardized(&x.features)).collect::<tscl::Result<Vec<_>>>();
    let train_z = embed(&train_std)?;
    let test_z = embed(&test_std)?;
    let sample: Vec<&Vec<f64>> = if train_z.len() > MAX_CLUSTER_POINTS {
        (0..MAX_CLUSTER_POINTS).map(|k| &train_z[k * train_z.len() / MAX_CLUSTER_POINTS]).collect()
    } else {
        train_z.iter().collect()
    };
    if opts.k == 0 || opts.k > sample.len() {
        return Err(CliError::Config(format!("k = {} outside 1..={}", opts.k, sample.len())));
    }
    let train_clusters = agglomerative_cluster(&sample)?.cut(opts.k)?.assignments;
    let test_clusters = knn_assign(&sample, &train_clusters, &test_z, 3)?;
    let (binning, binned) = bin_features(&train_raw, &test_raw, opts.bins)?;
    let outcome: Vec<bool> = test_raw
        .records
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.final_label() == Some(opts.outcome_class), r.len()))
        .collect();
    let table = heatmap(&test_clusters, opts.k, &binned, &binning, &outcome, opts.outcome_class)?;
    let top = table.top_features(opts.top);

    let dir = out_dir(&cfg)?;
    write(&dir.join("heatmap.config.toml"), cfg.resolved()?.to_toml()?)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write(&dir.join("heatmap_full.csv"), &buf)?;
    let mut buf = Vec::new();
    top.write_csv(&mut buf)?;
    write(&dir.join(format!("heatmap_top{}.csv", opts.top)), &buf)?;
    if opts.svg {
        write(&dir.join("heatmap.svg"), table.to_svg())?;
    }
    let fractions: Vec<String> = table.columns.iter().map(|c| format!("{:.3}", c.outcome_fraction)).collect();
    println!("columns (outcome fraction) = {}", fractions.join(" "));
    for f in table.ranking.iter().take(opts.top) {
        println!("{} = {:.4}", f.feature_name, f.max_row_difference);
    }
    Ok(table)
}

fn cell(m: Option<MeanStd>) -> String {
    m.map_or_else(|| "na".to_string(), |v| v.to_string())
}

pub fn grid_table(rows: &[GridRow]) -> String {
    let mut s = format!(
        "{:<24} {:<15} {:<15} {:<15} {:<15} {}\n",
        "configuration", "auroc", "auprc", "silhouette", "accuracy", "recovered"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<24} {:<15} {:<15} {:<15} {:<15} {}/{}",
            r.label,
            cell(r.auroc),
            cell(r.auprc),
            cell(r.truth_silhouette),
            cell(r.cluster_accuracy),
            r.recovered,
            r.seeds.len()
        );
    }
    s
}

pub fn cmd_grid(cfg: &RunConfig) -> Result<Vec<GridRow>> {
    let resolved = cfg.resolved()?;
    let experiment = resolved.experiment()?;
    let seeds = resolved.grid_seeds();
    if seeds.is_empty() {
        return Err(CliError::Config("grid needs at least one seed".into()));
    }
    // Synthetic data is regenerated per seed unless its seed is pinned.
    let per_seed = resolved.data.is_none() && cfg.data_seed.is_none();
    let mut data = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        if per_seed || data.is_empty() {
            let c = RunConfig {
                seed: Some(seed),
                data_seed: if per_seed { Some(seed) } else { resolved.data_seed },
                ..resolved.clone()
            };
            data.push(load_data(&c)?);
        }
    }
    let runs: Vec<SeedRun<'_>> = seeds
        .iter()
        .enumerate()
        .map(|(k, &seed)| {
            let (d, t) = &data[if per_seed { k } else { 0 }];
            SeedRun {
                seed,
                dataset: d,
                truth: t.as_ref(),
            }
        })
        .collect();
    let threads = resolved
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let dir = out_dir(&resolved)?;
    write(&dir.join("grid.config.toml"), resolved.to_toml()?)?;
    let rows = ablation_grid(&runs, &experiment, &Ablation::grid(), threads)?;
    write_json(&dir.join("grid.json"), &rows)?;
    let table = grid_table(&rows);
    write(&dir.join("grid.txt"), &table)?;
    print!("{table}");
    Ok(rows)
}
