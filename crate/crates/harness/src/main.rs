use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use glnn_core::dataset::save_cache;
use glnn_core::gcn::GlnnModel;
use glnn_harness::config::{build_spec, parse_pairs, Pairs};
use glnn_harness::heatmap::export_heatmap;
use glnn_harness::{
    evaluate_checkpoint, load_dataset, run_lambda0_sweep, run_robustness_sweep, run_single,
    ExperimentSpec, LABEL_RATES, LAMBDA0_GRID,
};

macro_rules! key_flags {
    ($($field:ident => $help:literal),* $(,)?) => {
        /// Experiment settings. Each flag overrides the same key of the
        /// config file.
        #[derive(Debug, Args, Default)]
        struct KeyFlags {
            $(
                #[arg(long, value_name = "VALUE", help = $help)]
                $field: Option<String>,
            )*
        }

        impl KeyFlags {
            fn pairs(&self) -> Pairs {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push((stringify!($field).to_string(), v.clone()));
                    }
                )*
                out
            }
        }
    };
}

key_flags! {
    dataset => "Dataset name (cora, citeseer, pubmed, terroristsrel, terrorattack) or label for explicit files",
    data_dir => "Directory holding the dataset files [default: data]",
    content => "LINQS .content file",
    cites => "LINQS .cites file",
    cache => "Binary dataset cache",
    out => "Output directory [default: runs]",
    seed => "Seed of the first run; run r uses seed + r [default: 0]",
    repeats => "Number of runs [default: 1]",
    jobs => "Runs trained concurrently [default: 1]",
    epochs => "Training epochs [default: 200]",
    lr => "Adam learning rate [default: 0.01]",
    lr_adjacency => "Learning rate for the adjacency (overrides --lr)",
    lr_weights => "Learning rate for the layer weights (overrides --lr)",
    lambda0 => "Laplacian regularizer weight [default: per dataset]",
    lambda1 => "Sparsity weight [default: 0.1]",
    lambda2 => "Symmetry penalty weight; must be 0 [default: 0]",
    lambda3 => "Row-sum penalty weight [default: 0.1]",
    lambda4 => "Trace penalty weight [default: 0.001]",
    alpha => "Ground-truth proximity weight [default: 10]",
    snapshot_epochs => "Comma-separated epochs at which heatmaps are saved [default: 1,5,15,50]",
    use_gt_loss => "Use the ground-truth proximity term [default: true]",
    clamp_nonneg => "Clamp adjacency entries at zero after each step [default: false]",
    early_stop_patience => "Stop after this many epochs without a better validation loss [default: none]",
    hidden => "Hidden units [default: 16]",
    dropout => "Dropout rate [default: 0.5]",
    weight_decay => "L2 weight decay on the first layer [default: 5e-4]",
    glr_mode => "Laplacian regularizer form: squared or linear [default: squared]",
    ce_reduction => "Cross-entropy reduction: mean or sum [default: mean]",
    disable_glr => "Remove the Laplacian regularizer [default: false]",
    split => "Split kind: planetoid, counts or label-rate [default: per dataset]",
    per_class => "Planetoid training nodes per class",
    train => "Training nodes of a counts split",
    val => "Validation nodes",
    test => "Test nodes",
    rate => "Label rate of a label-rate split",
    split_seed => "Fixed seed for splitting and downsampling [default: the run's seed]",
    downsample => "Sample this many nodes before splitting, or none",
    normalize_features => "Row-normalize the features [default: false]",
    heatmap_row0 => "First row of the heatmap window [default: 0]",
    heatmap_col0 => "First column of the heatmap window [default: 0]",
    heatmap_size => "Side of the heatmap window [default: 30]",
}

#[derive(Debug, Args)]
struct Common {
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Extra `key=value` setting; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(flatten)]
    keys: KeyFlags,
}

impl Common {
    fn spec(&self) -> anyhow::Result<ExperimentSpec> {
        self.spec_over(Vec::new())
    }

    /// Like [`Common::spec`], with `defaults` applied before everything else.
    fn spec_over(&self, defaults: Pairs) -> anyhow::Result<ExperimentSpec> {
        let mut pairs = defaults;
        pairs.extend(match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                parse_pairs(&text)?
            }
            None => Vec::new(),
        });
        for s in &self.set {
            pairs.extend(parse_pairs(s)?);
        }
        pairs.extend(self.keys.pairs());
        Ok(build_spec(&pairs)?)
    }
}

#[derive(Parser, Debug)]
#[command(name = "glnn", version, about = "Graph-learning GCN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train `repeats` models and write logs, checkpoints and heatmaps.
    Train(Common),
    /// Score a checkpoint on the split of the run with `--seed`.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Repeat the experiment for several lambda0 values.
    SweepLambda0 {
        /// Comma-separated values [default: 1,0.1,0.01,0.001,0.0001,0]
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Repeat the experiment over label rates, with and without the
    /// Laplacian regularizer.
    SweepLabelrate {
        /// Comma-separated rates [default: 0.005,0.01,0.015,0.02,0.025]
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
        /// Skip the runs without the regularizer.
        #[arg(long)]
        no_baseline: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Write a PGM heatmap of a checkpoint's adjacency, or of the dataset's
    /// graph when no checkpoint is given.
    Heatmap {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Parse LINQS text files once and store them as a binary cache.
    ConvertCache {
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Train(common) => {
            let spec = common.spec()?;
            let base = load_dataset(&spec)?;
            let summary = run_single(&spec, &base)?;
            print!("{}", summary.text());
            Ok(status(summary.all_finite()))
        }
        Command::Eval { checkpoint, common } => {
            let spec = common.spec()?;
            let base = load_dataset(&spec)?;
            let report = evaluate_checkpoint(&spec, &base, &checkpoint, spec.train.seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::SweepLambda0 { values, common } => {
            let spec = common.spec()?;
            let base = load_dataset(&spec)?;
            let values = if values.is_empty() { LAMBDA0_GRID.to_vec() } else { values };
            let summaries = run_lambda0_sweep(&spec, &base, &values)?;
            print!(
                "{}",
                std::fs::read_to_string(spec.output_dir.join("lambda0_sweep.txt"))?
            );
            Ok(status(summaries.iter().all(|s| s.all_finite())))
        }
        Command::SweepLabelrate {
            rates,
            no_baseline,
            common,
        } => {
            let spec = common.spec()?;
            let base = load_dataset(&spec)?;
            let rates = if rates.is_empty() { LABEL_RATES.to_vec() } else { rates };
            let points = run_robustness_sweep(&spec, &base, &rates, !no_baseline)?;
            for p in &points {
                let acc = p
                    .mean_test_acc
                    .map_or("n/a".to_string(), |m| format!("{:.2}%", m * 100.0));
                println!("rate {:<6} {:<8} train {:>4}  test {acc}", p.rate, p.scheme, p.train_nodes);
            }
            Ok(status(points.iter().all(|p| p.failed == 0)))
        }
        Command::Heatmap {
            checkpoint,
            output,
            common,
        } => {
            // A checkpoint alone needs no dataset files.
            let defaults = match checkpoint {
                Some(_) => vec![("dataset".to_string(), "checkpoint".to_string())],
                None => Vec::new(),
            };
            let spec = common.spec_over(defaults)?;
            let matrix = match &checkpoint {
                Some(path) => GlnnModel::load(path)?.a_out()?,
                None => match load_dataset(&spec)?.gt {
                    Some(gt) => gt.normalized,
                    None => bail!("dataset {} has no graph", spec.dataset),
                },
            };
            export_heatmap(&matrix, spec.window, &output)?;
            println!("wrote {}", output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ConvertCache { output, common } => {
            let spec = common.spec()?;
            let ds = load_dataset(&spec)?;
            save_cache(&ds, &output)?;
            let r = &ds.report;
            println!(
                "{}: {} nodes, {} features, {} classes, {} edges ({} dropped, {} self-loops, {} empty feature rows)",
                ds.name,
                ds.num_nodes(),
                ds.num_features(),
                ds.num_classes(),
                r.edges,
                r.dropped_edges,
                r.self_loops,
                r.zero_feature_rows
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
