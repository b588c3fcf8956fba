//! Command implementations. Each resolves its configuration keys up front,
//! rejects unknown keys, then locks `<out>/<command>/` and writes artifacts
//! there alongside the resolved config.

use std::fs;
use std::path::Path;

use crate::corpus::{
    self, encode_utterance, extract_utterances, generate_synthetic_corpus, load_corpus_dir,
    serialize_chat, split_corpus, split_corpus_by_transcript, CorpusSplit, EncodedSample, Gender,
    Label, Task, Transcript, Utterance, Vocabulary,
};
use crate::error::{Error, Result};
use crate::interpret::{
    capture_activations, cluster_pos_patterns, kmeans_restarts, render_cluster_report,
    render_heatmap, saliency, HeatmapFormat, ScoreKind, KMEANS_MAX_ITER, KMEANS_TOL,
};
use crate::models::{
    load_checkpoint, save_checkpoint, Arch, CnnConfig, CnnLstmConfig, LstmConfig, ModelConfig,
    ModelHandle,
};
use crate::stats::{bootstrap_diff_test, gender_partition_downsample, GenderSubsets};
use crate::training::{
    error_report, evaluate, history_csv, majority_baseline, train, EpochRecord, TrainConfig,
};

use super::config::{open_output, Resolver};

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("bad size list `{s}`"))))
        .collect()
}

/// Architecture hyperparameters resolved from keys; the vocabulary size is
/// filled in once the corpus is known.
pub struct ModelSpec {
    arch: Arch,
    filter_sizes: Vec<usize>,
    filters: usize,
    embed_dim: usize,
    hidden: usize,
    layers: usize,
    keep_prob: f64,
    max_len: usize,
}

impl ModelSpec {
    fn resolve(r: &mut Resolver, arch: Arch, tagged: bool) -> Result<Self> {
        let max_len_default = if tagged { "64" } else { "32" };
        let (sizes_d, filters_d, keep_d, hidden_d) = match arch {
            Arch::Cnn => ("3,4,5", "128", "0.80", "128"),
            Arch::Lstm => ("3,4,5", "128", "0.70", "128"),
            Arch::CnnLstm => ("3,4,5,6", "100", "0.65", "300"),
        };
        Ok(ModelSpec {
            arch,
            filter_sizes: parse_sizes(&r.get("filter_sizes", sizes_d))?,
            filters: r.get_parse("filters", filters_d)?,
            embed_dim: r.get_parse("embed_dim", "300")?,
            hidden: r.get_parse("hidden", hidden_d)?,
            layers: r.get_parse("layers", "2")?,
            keep_prob: r.get_parse("keep_prob", keep_d)?,
            max_len: r.get_parse("max_len", max_len_default)?,
        })
    }

    fn config(&self, vocab_size: usize) -> ModelConfig {
        match self.arch {
            Arch::Cnn => ModelConfig::Cnn(CnnConfig {
                filter_sizes: self.filter_sizes.clone(),
                filters_per_size: self.filters,
                embed_dim: self.embed_dim,
                keep_prob: self.keep_prob,
                vocab_size,
                max_len: self.max_len,
            }),
            Arch::Lstm => ModelConfig::Lstm(LstmConfig {
                layers: self.layers,
                hidden: self.hidden,
                embed_dim: self.embed_dim,
                keep_prob: self.keep_prob,
                vocab_size,
                max_len: self.max_len,
            }),
            Arch::CnnLstm => ModelConfig::CnnLstm(CnnLstmConfig {
                filter_sizes: self.filter_sizes.clone(),
                filters_per_size: self.filters,
                embed_dim: self.embed_dim,
                lstm_hidden: self.hidden,
                keep_prob: self.keep_prob,
                vocab_size,
                max_len: self.max_len,
            }),
        }
    }
}

/// Everything a training run needs besides the corpus itself.
pub struct FitParams {
    pub tagged: bool,
    pub seed: u64,
    vocab_max: usize,
    split_by_transcript: bool,
    spec: ModelSpec,
    tcfg: TrainConfig,
}

impl FitParams {
    pub fn resolve(r: &mut Resolver) -> Result<Self> {
        let arch = Arch::parse(&r.get_required("arch")?)?;
        let tagged = r.get_bool("tagged", false)?;
        let seed: u64 = r.get_parse("seed", "0")?;
        let spec = ModelSpec::resolve(r, arch, tagged)?;
        let defaults = TrainConfig::default_for(arch);
        let tcfg = TrainConfig {
            batch_size: r.get_parse("batch", &defaults.batch_size.to_string())?,
            clip_norm: r.get_parse("clip", "2.0")?,
            lr: r.get_parse("lr", "1e-4")?,
            max_epochs: r.get_parse("epochs", "50")?,
            patience: r.get_parse("patience", "5")?,
            seed,
        };
        Ok(FitParams {
            tagged,
            seed,
            vocab_max: r.get_parse("vocab_max", "2396")?,
            split_by_transcript: r.get("split", "utterance") == "transcript",
            spec,
            tcfg,
        })
    }
}

pub struct Fitted {
    pub model: ModelHandle,
    pub vocab: Vocabulary,
    pub split: CorpusSplit,
    pub history: Vec<EpochRecord>,
}

fn encode_all(
    utterances: &[Utterance],
    vocab: &Vocabulary,
    tagged: bool,
    max_len: usize,
) -> Result<Vec<EncodedSample>> {
    utterances.iter().map(|u| encode_utterance(u, vocab, tagged, max_len)).collect()
}

pub fn fit(corpus: &[Transcript], p: &FitParams) -> Result<Fitted> {
    let utterances = extract_utterances(corpus, p.tagged);
    if utterances.is_empty() {
        return Err(Error::Insufficient("corpus has no usable utterances".into()));
    }
    let vocab = corpus::build_vocabulary(&utterances, p.vocab_max, p.tagged)?;
    let samples = encode_all(&utterances, &vocab, p.tagged, p.spec.max_len)?;
    let split = if p.split_by_transcript {
        split_corpus_by_transcript(&samples, (0.8, 0.1, 0.1), p.seed)?
    } else {
        split_corpus(&samples, (0.8, 0.1, 0.1), p.seed)?
    };
    let model = ModelHandle::init(p.spec.config(vocab.len()), p.seed)?;
    let (model, history) = train(model, &split.train, &split.dev, &p.tcfg)?;
    Ok(Fitted { model, vocab, split, history })
}

pub fn cmd_synth(out: &Path, r: &mut Resolver) -> Result<()> {
    let n: usize = r.get_parse("n", "100")?;
    let ad_fraction: f64 = r.get_parse("ad_fraction", "0.67")?;
    let seed: u64 = r.get_parse("seed", "0")?;
    r.reject_unknown()?;
    let corpus = generate_synthetic_corpus(n, ad_fraction, seed)?;
    let (dir, _lock) = open_output(out, "synth", r)?;
    for t in &corpus {
        fs::write(dir.join(format!("{}.cha", t.id)), serialize_chat(t))?;
    }
    println!("wrote {} transcripts to {}", corpus.len(), dir.display());
    Ok(())
}

fn corpus_stats(corpus: &[Transcript]) -> String {
    let utterances = extract_utterances(corpus, false);
    let ad_t = corpus.iter().filter(|t| t.diagnosis == Label::Ad).count();
    let count_by = |f: &dyn Fn(&Utterance) -> bool| utterances.iter().filter(|u| f(u)).count();
    let tagged = count_by(&|u| u.pos.is_some());
    let mut out = String::new();
    out.push_str(&format!("transcripts={} ad={} control={}\n", corpus.len(), ad_t, corpus.len() - ad_t));
    out.push_str(&format!(
        "utterances={} ad={} control={}\n",
        utterances.len(),
        count_by(&|u| u.label == Label::Ad),
        count_by(&|u| u.label == Label::Control)
    ));
    out.push_str(&format!(
        "gender male={} female={} unknown={}\n",
        count_by(&|u| u.gender == Gender::Male),
        count_by(&|u| u.gender == Gender::Female),
        count_by(&|u| u.gender == Gender::Unknown)
    ));
    out.push_str(&format!(
        "task cookie={} recall={} other={}\n",
        count_by(&|u| u.task == Task::Cookie),
        count_by(&|u| u.task == Task::Recall),
        count_by(&|u| u.task == Task::Other)
    ));
    let coverage = if utterances.is_empty() { 0.0 } else { tagged as f64 / utterances.len() as f64 };
    out.push_str(&format!("pos_tagged={tagged} coverage={coverage:.3}\n"));
    out
}

pub fn cmd_ingest(corpus_dir: &Path, out: Option<&Path>, r: &mut Resolver) -> Result<()> {
    r.reject_unknown()?;
    let corpus = load_corpus_dir(corpus_dir)?;
    if corpus.is_empty() {
        return Err(Error::Insufficient(format!("no .cha files under {}", corpus_dir.display())));
    }
    let stats = corpus_stats(&corpus);
    print!("{stats}");
    if let Some(out) = out {
        let (dir, _lock) = open_output(out, "ingest", r)?;
        fs::write(dir.join("stats.txt"), stats)?;
    }
    Ok(())
}

pub fn cmd_train(corpus_dir: &Path, out: &Path, r: &mut Resolver) -> Result<()> {
    let p = FitParams::resolve(r)?;
    r.reject_unknown()?;
    let corpus = load_corpus_dir(corpus_dir)?;
    let fitted = fit(&corpus, &p)?;
    let (dir, _lock) = open_output(out, "train", r)?;
    save_checkpoint(&dir.join("checkpoint"), &fitted.model, &fitted.vocab, p.tagged)?;
    fs::write(dir.join("history.csv"), history_csv(&fitted.history))?;
    let test = evaluate(&fitted.model, &fitted.split.test)?;
    let labels: Vec<Label> = fitted.split.test.iter().map(|s| s.label).collect();
    let baseline = majority_baseline(&labels)?;
    let best_dev = fitted.history.iter().map(|h| h.dev_accuracy).fold(0.0, f64::max);
    let metrics = format!(
        "test_accuracy={:.4}\nmajority_baseline={:.4}\nbest_dev_accuracy={:.4}\nepochs_run={}\n",
        test.accuracy,
        baseline,
        best_dev,
        fitted.history.len()
    );
    fs::write(dir.join("metrics.txt"), &metrics)?;
    print!("{metrics}");
    Ok(())
}

struct LoadedModel {
    model: ModelHandle,
    vocab: Vocabulary,
    tagged: bool,
}

fn load_model(checkpoint: &Path) -> Result<LoadedModel> {
    let (model, vocab, tagged) = load_checkpoint(checkpoint)?;
    Ok(LoadedModel { model, vocab, tagged })
}

fn subset<'a>(split: &'a CorpusSplit, name: &str) -> Result<Vec<&'a EncodedSample>> {
    match name {
        "train" => Ok(split.train.iter().collect()),
        "dev" => Ok(split.dev.iter().collect()),
        "test" => Ok(split.test.iter().collect()),
        "all" => Ok(split.train.iter().chain(&split.dev).chain(&split.test).collect()),
        _ => Err(Error::Usage(format!("unknown subset `{name}` (train|dev|test|all)"))),
    }
}

pub fn cmd_eval(corpus_dir: &Path, checkpoint: &Path, out: &Path, r: &mut Resolver) -> Result<()> {
    let seed: u64 = r.get_parse("seed", "0")?;
    let subset_name = r.get("subset", "test");
    let error_frac: f64 = r.get_parse("error_frac", "0")?;
    let short_threshold: usize = r.get_parse("short_threshold", "3")?;
    r.reject_unknown()?;

    let lm = load_model(checkpoint)?;
    let corpus = load_corpus_dir(corpus_dir)?;
    let utterances = extract_utterances(&corpus, lm.tagged);
    let samples = encode_all(&utterances, &lm.vocab, lm.tagged, lm.model.config.max_len())?;
    let split = split_corpus(&samples, (0.8, 0.1, 0.1), seed)?;
    let chosen: Vec<EncodedSample> = subset(&split, &subset_name)?.into_iter().cloned().collect();
    let report = evaluate(&lm.model, &chosen)?;
    let labels: Vec<Label> = chosen.iter().map(|s| s.label).collect();
    let baseline = majority_baseline(&labels)?;

    let (dir, _lock) = open_output(out, "eval", r)?;
    let mut csv = String::from("sample,true,predicted,correct\n");
    for (i, (s, &pred)) in chosen.iter().zip(&report.predictions).enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{}\n",
            s.label.class_index(),
            pred,
            u8::from(pred == s.label.class_index())
        ));
    }
    fs::write(dir.join("predictions.csv"), csv)?;
    let mut text = format!(
        "subset={subset_name} n={}\naccuracy={:.4}\nmajority_baseline={:.4}\nconfusion \
         control_control={} control_ad={} ad_control={} ad_ad={}\n",
        chosen.len(),
        report.accuracy,
        baseline,
        report.confusion[0][0],
        report.confusion[0][1],
        report.confusion[1][0],
        report.confusion[1][1]
    );
    if error_frac > 0.0 {
        let errors = error_report(&lm.model, &chosen, error_frac, short_threshold, seed)?;
        text.push_str(&errors.render());
    }
    fs::write(dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn cmd_cluster(corpus_dir: &Path, checkpoint: &Path, out: &Path, r: &mut Resolver) -> Result<()> {
    let k: usize = r.get_parse("k", "10")?;
    let restarts: usize = r.get_parse("restarts", "5")?;
    let top_k: usize = r.get_parse("top_k", "4")?;
    let seed: u64 = r.get_parse("seed", "0")?;
    let task_filter = r.get("task", "each");
    let lm = load_model(checkpoint)?;
    let probe = r.get("probe", lm.model.default_probe());
    r.reject_unknown()?;

    let corpus = load_corpus_dir(corpus_dir)?;
    let utterances = extract_utterances(&corpus, lm.tagged);
    let pools: Vec<(String, Vec<Utterance>)> = match task_filter.as_str() {
        "each" => [Task::Cookie, Task::Recall, Task::Other]
            .iter()
            .map(|&t| {
                (
                    t.as_str().to_lowercase(),
                    utterances.iter().filter(|u| u.task == t).cloned().collect(),
                )
            })
            .collect(),
        "all" => vec![("all".into(), utterances.clone())],
        name => {
            let task = Task::parse(&capitalize(name))?;
            vec![(name.to_string(), utterances.iter().filter(|u| u.task == task).cloned().collect())]
        }
    };

    let mut report = String::new();
    for (name, pool) in &pools {
        if pool.len() < k {
            report.push_str(&format!("task {name} skipped (pool {} < k {k})\n", pool.len()));
            continue;
        }
        let am = capture_activations(&lm.model, pool, &probe, &lm.vocab, lm.tagged)?;
        let result = kmeans_restarts(&am.rows, k, seed, restarts, KMEANS_MAX_ITER, KMEANS_TOL)?;
        let patterns = cluster_pos_patterns(&result, &am, top_k)?;
        report.push_str(&format!(
            "task {name} pool={} probe={probe} k={k} inertia={:.6}\n",
            pool.len(),
            result.inertia
        ));
        report.push_str(&render_cluster_report(&patterns));
    }
    let (dir, _lock) = open_output(out, "cluster", r)?;
    fs::write(dir.join("clusters.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn find_utterance<'a>(utterances: &'a [Utterance], spec: &str) -> Result<&'a Utterance> {
    let (tid, idx) = spec
        .rsplit_once(':')
        .ok_or_else(|| Error::Usage(format!("utterance id `{spec}` must be <transcript>:<index>")))?;
    let index: usize = idx
        .parse()
        .map_err(|_| Error::Usage(format!("bad utterance index in `{spec}`")))?;
    utterances
        .iter()
        .find(|u| u.transcript_id == tid && u.index == index)
        .ok_or_else(|| Error::Lookup(format!("utterance `{spec}` not found")))
}

pub fn cmd_saliency(corpus_dir: &Path, checkpoint: &Path, out: &Path, r: &mut Resolver) -> Result<()> {
    let ids = r.get_required("ids")?;
    let format = HeatmapFormat::parse(&r.get("format", "text"))?;
    let kind = ScoreKind::parse(&r.get("kind", "l2"))?;
    let target_mode = r.get("target", "predicted");
    r.reject_unknown()?;

    let lm = load_model(checkpoint)?;
    let corpus = load_corpus_dir(corpus_dir)?;
    let utterances = extract_utterances(&corpus, lm.tagged);
    let (dir, _lock) = open_output(out, "saliency", r)?;
    for spec in ids.split(',') {
        let u = find_utterance(&utterances, spec.trim())?;
        let target = match target_mode.as_str() {
            "predicted" => None,
            "true" => Some(u.label.class_index()),
            other => return Err(Error::Usage(format!("unknown target `{other}` (predicted|true)"))),
        };
        let map = saliency(&lm.model, u, &lm.vocab, lm.tagged, kind, target)?;
        let name = format!("{}_{}.{}", u.transcript_id, u.index, format.extension());
        fs::write(dir.join(&name), render_heatmap(&map, format))?;
        println!("wrote {}", dir.join(&name).display());
    }
    Ok(())
}

/// Accuracy and per-sample correctness of a freshly trained model on its
/// own test split.
fn fit_and_test(samples: &[EncodedSample], p: &FitParams, vocab_len: usize) -> Result<(f64, Vec<u8>)> {
    let split = split_corpus(samples, (0.8, 0.1, 0.1), p.seed)?;
    let model = ModelHandle::init(p.spec.config(vocab_len), p.seed)?;
    let (model, _) = train(model, &split.train, &split.dev, &p.tcfg)?;
    let report = evaluate(&model, &split.test)?;
    Ok((report.accuracy, report.correctness(&split.test)))
}

pub fn cmd_gender(corpus_dir: &Path, out: &Path, r: &mut Resolver) -> Result<()> {
    let p = FitParams::resolve(r)?;
    let mode = r.get("mode", "train-per-subset");
    let n_resamples: usize = r.get_parse("n_resamples", "10000")?;
    r.reject_unknown()?;

    let corpus = load_corpus_dir(corpus_dir)?;
    let utterances = extract_utterances(&corpus, p.tagged);
    if utterances.is_empty() {
        return Err(Error::Insufficient("corpus has no usable utterances".into()));
    }
    let vocab = corpus::build_vocabulary(&utterances, p.vocab_max, p.tagged)?;
    let samples = encode_all(&utterances, &vocab, p.tagged, p.spec.max_len)?;
    let subsets = gender_partition_downsample(&samples, p.seed)?;

    let (male_acc, male_correct, female_acc, female_correct) = match mode.as_str() {
        "train-per-subset" => {
            let (ma, mc) = fit_and_test(&subsets.male, &p, vocab.len())?;
            let (fa, fc) = fit_and_test(&subsets.female_downsampled, &p, vocab.len())?;
            (ma, mc, fa, fc)
        }
        "eval-shared" => {
            let mut pooled = subsets.male.clone();
            pooled.extend(subsets.female_downsampled.iter().cloned());
            let split = split_corpus(&pooled, (0.8, 0.1, 0.1), p.seed)?;
            let model = ModelHandle::init(p.spec.config(vocab.len()), p.seed)?;
            let (model, _) = train(model, &split.train, &split.dev, &p.tcfg)?;
            let by_gender = |g: Gender| -> Vec<EncodedSample> {
                split.test.iter().filter(|s| s.source.gender == g).cloned().collect()
            };
            let male_test = by_gender(Gender::Male);
            let female_test = by_gender(Gender::Female);
            if male_test.is_empty() || female_test.is_empty() {
                return Err(Error::Insufficient(
                    "shared test split lacks one gender; use more data or train-per-subset".into(),
                ));
            }
            let mr = evaluate(&model, &male_test)?;
            let fr = evaluate(&model, &female_test)?;
            (
                mr.accuracy,
                mr.correctness(&male_test),
                fr.accuracy,
                fr.correctness(&female_test),
            )
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown mode `{other}` (train-per-subset|eval-shared)"
            )))
        }
    };

    let boot = bootstrap_diff_test(&male_correct, &female_correct, n_resamples, p.seed)?;
    let (m_ad, m_c) = GenderSubsets::class_counts(&subsets.male);
    let line = format!(
        "male_acc={male_acc:.3} female_acc={female_acc:.3} diff={:+.3} p={:.4} \
         n_resamples={n_resamples} seed={} mode={mode}\n",
        boot.observed_diff, boot.p_value, p.seed
    );
    let detail = format!(
        "subset_size={} male_ad={m_ad} male_control={m_c}\n",
        subsets.male.len()
    );
    let (dir, _lock) = open_output(out, "gender", r)?;
    fs::write(dir.join("report.txt"), format!("{line}{detail}"))?;
    print!("{line}");
    Ok(())
}

pub fn cmd_report(corpus_dir: &Path, out: &Path, r: &mut Resolver) -> Result<()> {
    let p = FitParams::resolve(r)?;
    let k: usize = r.get_parse("k", "10")?;
    let restarts: usize = r.get_parse("restarts", "5")?;
    let top_k: usize = r.get_parse("top_k", "4")?;
    let error_frac: f64 = r.get_parse("error_frac", "0.1")?;
    let n_resamples: usize = r.get_parse("n_resamples", "10000")?;
    let heatmaps: usize = r.get_parse("heatmaps", "3")?;
    let format = HeatmapFormat::parse(&r.get("format", "text"))?;
    r.reject_unknown()?;

    let corpus = load_corpus_dir(corpus_dir)?;
    let fitted = fit(&corpus, &p)?;
    let (dir, _lock) = open_output(out, "report", r)?;
    save_checkpoint(&dir.join("checkpoint"), &fitted.model, &fitted.vocab, p.tagged)?;
    fs::write(dir.join("history.csv"), history_csv(&fitted.history))?;

    let test = evaluate(&fitted.model, &fitted.split.test)?;
    let labels: Vec<Label> = fitted.split.test.iter().map(|s| s.label).collect();
    let errors = error_report(&fitted.model, &fitted.split.test, error_frac, 3, p.seed)?;
    fs::write(
        dir.join("eval.txt"),
        format!(
            "test_accuracy={:.4}\nmajority_baseline={:.4}\n{}",
            test.accuracy,
            majority_baseline(&labels)?,
            errors.render()
        ),
    )?;

    let probe = fitted.model.default_probe();
    let mut clusters = String::new();
    let pool: Vec<Utterance> = fitted.split.test.iter().map(|s| s.source.clone()).collect();
    if pool.len() >= k {
        let am = capture_activations(&fitted.model, &pool, probe, &fitted.vocab, p.tagged)?;
        let result = kmeans_restarts(&am.rows, k, p.seed, restarts, KMEANS_MAX_ITER, KMEANS_TOL)?;
        let patterns = cluster_pos_patterns(&result, &am, top_k)?;
        clusters.push_str(&format!("pool={} probe={probe} k={k}\n", pool.len()));
        clusters.push_str(&render_cluster_report(&patterns));
    }
    fs::write(dir.join("clusters.txt"), &clusters)?;

    let heat_dir = dir.join("heatmaps");
    fs::create_dir_all(&heat_dir)?;
    for s in fitted.split.test.iter().take(heatmaps) {
        let map = saliency(&fitted.model, &s.source, &fitted.vocab, p.tagged, ScoreKind::L2, None)?;
        let name = format!("{}_{}.{}", s.source.transcript_id, s.source.index, format.extension());
        fs::write(heat_dir.join(name), render_heatmap(&map, format))?;
    }

    // gender protocol over the full encoded pool, shared-model mode for
    // speed: the per-subset mode retrains twice
    let all: Vec<EncodedSample> = [&fitted.split.train, &fitted.split.dev, &fitted.split.test]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    let gender_text = match gender_partition_downsample(&all, p.seed) {
        Ok(subsets) => {
            let mr = evaluate(&fitted.model, &subsets.male)?;
            let fr = evaluate(&fitted.model, &subsets.female_downsampled)?;
            let boot = bootstrap_diff_test(
                &mr.correctness(&subsets.male),
                &fr.correctness(&subsets.female_downsampled),
                n_resamples,
                p.seed,
            )?;
            format!(
                "male_acc={:.3} female_acc={:.3} diff={:+.3} p={:.4} n_resamples={n_resamples} \
                 seed={} mode=eval-shared\n",
                mr.accuracy, fr.accuracy, boot.observed_diff, boot.p_value, p.seed
            )
        }
        Err(e) => format!("gender protocol skipped: {e}\n"),
    };
    fs::write(dir.join("gender.txt"), gender_text)?;
    println!("report written to {}", dir.display());
    Ok(())
}
