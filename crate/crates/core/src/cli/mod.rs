//! Command-line front end. Settings flow through a single resolver: config
//! file values first, command-line flags on top, built-in defaults last.
//! Paths never enter the resolver so the resolved-config echo stays
//! machine-independent.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use config::Resolver;

#[derive(Parser)]
#[command(name = "adlens", version, about = "Train and interpret utterance-level dementia classifiers on CHAT-style transcripts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Hyperparameters shared by every command that trains a model.
#[derive(Args, Debug, Default)]
struct ModelFlags {
    /// Architecture: cnn, lstm, or cnn_lstm.
    #[arg(long)]
    arch: Option<String>,
    /// Interleave POS-tag tokens with words in the input.
    #[arg(long)]
    tagged: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    vocab_max: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    filters: Option<usize>,
    /// Comma-separated ascending convolution widths, e.g. 3,4,5.
    #[arg(long)]
    filter_sizes: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    keep_prob: Option<f64>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Split granularity: utterance or transcript.
    #[arg(long)]
    split: Option<String>,
}

impl ModelFlags {
    fn apply(&self, r: &mut Resolver) {
        r.set("arch", self.arch.as_ref());
        r.set_flag("tagged", self.tagged);
        r.set("seed", self.seed);
        r.set("vocab_max", self.vocab_max);
        r.set("epochs", self.epochs);
        r.set("patience", self.patience);
        r.set("batch", self.batch);
        r.set("lr", self.lr);
        r.set("clip", self.clip);
        r.set("embed_dim", self.embed_dim);
        r.set("filters", self.filters);
        r.set("filter_sizes", self.filter_sizes.as_ref());
        r.set("hidden", self.hidden);
        r.set("layers", self.layers);
        r.set("keep_prob", self.keep_prob);
        r.set("max_len", self.max_len);
        r.set("split", self.split.as_ref());
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded synthetic transcript corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        ad_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse a corpus directory and report its composition.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a classifier and write a checkpoint with metrics.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Evaluate a checkpoint on a deterministic corpus split.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// train, dev, test, or all.
        #[arg(long)]
        subset: Option<String>,
        /// Sampling fraction for the misclassified-utterance report; 0 skips it.
        #[arg(long)]
        error_frac: Option<f64>,
        #[arg(long)]
        short_threshold: Option<usize>,
    },
    /// Cluster a checkpoint's activations and summarize POS patterns.
    Cluster {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// each, all, cookie, recall, or other.
        #[arg(long)]
        task: Option<String>,
        /// Named activation capture point; defaults to the architecture's
        /// pre-output summary vector.
        #[arg(long)]
        probe: Option<String>,
    },
    /// Render per-token saliency heatmaps for chosen utterances.
    Saliency {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated utterance ids, each <transcript>:<index>.
        #[arg(long)]
        ids: Option<String>,
        /// text, html, or svg.
        #[arg(long)]
        format: Option<String>,
        /// l2 or abs_sum.
        #[arg(long)]
        kind: Option<String>,
        /// predicted or true.
        #[arg(long)]
        target: Option<String>,
    },
    /// Run the gender-matched evaluation protocol with a bootstrap test.
    Gender {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: ModelFlags,
        /// train-per-subset or eval-shared.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        n_resamples: Option<usize>,
    },
    /// Train once and bundle evaluation, clusters, heatmaps, and the gender
    /// protocol into one output tree.
    Report {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        error_frac: Option<f64>,
        #[arg(long)]
        n_resamples: Option<usize>,
        #[arg(long)]
        heatmaps: Option<usize>,
        #[arg(long)]
        format: Option<String>,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Synth { out, config, n, ad_fraction, seed } => {
            let mut r = Resolver::from_file(config.as_deref())?;
            r.set("n", n);
            r.set("ad_fraction", ad_fraction);
            r.set("seed", seed);
            commands::cmd_synth(&out, &mut r)
        }
        Cmd::Ingest { corpus, out, config } => {
            let mut r = Resolver::from_file(config.as_deref())?;
            commands::cmd_ingest(&corpus, out.as_deref(), &mut r)
        }
        Cmd::Train { corpus, out, config, model } => {
            let mut r = Resolver::from_file(config.as_deref())?;
            model.apply(&mut r);
            commands::cmd_train(&corpus, &out, &mut r)
        }
        Cmd::Eval { corpus, checkpoint, out, config, seed, subset, error_frac, short_threshold } => {
            let mut r = Resolver::from_file(config.as_deref())?;
            r.set("seed", seed);
            r.set("subset", subset);
            r.set("error_frac", error_frac);
            r.set("short_threshold", short_threshold);
            commands::cmd_eval(&corpus, &checkpoint, &out, &mut r)
        }
        Cmd::Cluster { corpus, checkpoint, out, config, k, restarts, top_k, seed, task, probe } => {
            let mut r = Resolver::from_file(config.as_deref())?;
            r.set("k", k);
            r.set("restarts", restarts);
            r.set("top_k", top_k);
            r.set("seed", seed);
            r.set("task", task);
            r.set("probe", probe);
            commands::cmd_cluster(&corpus, &checkpoint, &out, &mut r)
        }
        Cmd::Saliency { corpus, checkpoint, out, config, ids, format, kind, target } => {
            let mut r = Resolver::from_file(config.as_deref())?;
            r.set("ids", ids);
            r.set("format", format);
            r.set("kind", kind);
            r.set("target", target);
            commands::cmd_saliency(&corpus, &checkpoint, &out, &mut r)
        }
        Cmd::Gender { corpus, out, config, model, mode, n_resamples } => {
            let mut r = Resolver::from_file(config.as_deref())?;
            model.apply(&mut r);
            r.set("mode", mode);
            r.set("n_resamples", n_resamples);
            commands::cmd_gender(&corpus, &out, &mut r)
        }
        Cmd::Report {
            corpus,
            out,
            config,
            model,
            k,
            restarts,
            top_k,
            error_frac,
            n_resamples,
            heatmaps,
            format,
        } => {
            let mut r = Resolver::from_file(config.as_deref())?;
            model.apply(&mut r);
            r.set("k", k);
            r.set("restarts", restarts);
            r.set("top_k", top_k);
            r.set("error_frac", error_frac);
            r.set("n_resamples", n_resamples);
            r.set("heatmaps", heatmaps);
            r.set("format", format);
            commands::cmd_report(&corpus, &out, &mut r)
        }
    }
}

pub fn main() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
