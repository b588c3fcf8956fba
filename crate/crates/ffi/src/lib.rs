//! C ABI over the transcript classification library. Handles are opaque
//! pointers owned by the caller and released with the matching `_free`;
//! every fallible call returns 0 on success or a nonzero error code, with
//! the message available from `adlens_last_error_message` on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use libc::{c_char, c_int};

use adlens::corpus::{
    build_vocabulary, encode_utterance, extract_utterances, generate_synthetic_corpus,
    load_corpus_dir, parse_chat, split_corpus, EncodedSample, Transcript, Vocabulary,
};
use adlens::interpret::{render_heatmap, saliency, HeatmapFormat, ScoreKind};
use adlens::models::{
    load_checkpoint, save_checkpoint, Arch, CnnConfig, CnnLstmConfig, LstmConfig, ModelConfig,
    ModelHandle,
};
use adlens::training::{evaluate, majority_baseline, train, TrainConfig};
use adlens::{Error, Result};

pub const ADLENS_OK: c_int = 0;
/// Bad arguments or preconditions.
pub const ADLENS_ERR_USAGE: c_int = 1;
/// Malformed or insufficient input data.
pub const ADLENS_ERR_DATA: c_int = 2;
/// Numeric failure (non-finite values) or an internal panic.
pub const ADLENS_ERR_NUMERIC: c_int = 3;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn adlens_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn code_of(e: &Error) -> c_int {
    e.exit_code()
}

/// Run `f`, trapping panics and recording any error message.
fn guard<T>(out: *mut *mut T, f: impl FnOnce() -> Result<T>) -> c_int {
    if out.is_null() {
        set_error("output pointer is null");
        return ADLENS_ERR_USAGE;
    }
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            unsafe { *out = Box::into_raw(Box::new(v)) };
            ADLENS_OK
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            code_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            ADLENS_ERR_NUMERIC
        }
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string.
unsafe fn cstr<'a>(ptr: *const c_char, what: &str) -> Result<&'a str> {
    if ptr.is_null() {
        return Err(Error::Usage(format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Error::Usage(format!("{what} is not valid UTF-8")))
}

/// An owned transcript collection.
pub struct AdlensCorpus {
    transcripts: Vec<Transcript>,
}

/// Parse every `*.cha` file in a directory.
///
/// # Safety
/// `dir` must be a valid NUL-terminated path; `out` receives an owned handle.
#[no_mangle]
pub unsafe extern "C" fn adlens_corpus_load_dir(
    dir: *const c_char,
    out: *mut *mut AdlensCorpus,
) -> c_int {
    guard(out, || {
        let dir = cstr(dir, "dir")?;
        Ok(AdlensCorpus { transcripts: load_corpus_dir(Path::new(dir))? })
    })
}

/// Parse one transcript from text and append nothing else.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` receives an owned
/// handle.
#[no_mangle]
pub unsafe extern "C" fn adlens_corpus_from_text(
    text: *const c_char,
    out: *mut *mut AdlensCorpus,
) -> c_int {
    guard(out, || {
        let text = cstr(text, "text")?;
        Ok(AdlensCorpus { transcripts: vec![parse_chat(text)?] })
    })
}

/// Deterministic synthetic corpus; see the library documentation for its
/// construction.
///
/// # Safety
/// `out` receives an owned handle.
#[no_mangle]
pub unsafe extern "C" fn adlens_corpus_synthetic(
    n_transcripts: usize,
    ad_fraction: f64,
    seed: u64,
    out: *mut *mut AdlensCorpus,
) -> c_int {
    guard(out, || {
        Ok(AdlensCorpus { transcripts: generate_synthetic_corpus(n_transcripts, ad_fraction, seed)? })
    })
}

/// # Safety
/// `corpus` must come from a corpus constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn adlens_corpus_free(corpus: *mut AdlensCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// # Safety
/// `corpus` must be a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn adlens_corpus_num_transcripts(corpus: *const AdlensCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.transcripts.len())
}

/// Utterances available for training. With `require_pos` nonzero, only
/// utterances carrying an aligned POS tier are counted.
///
/// # Safety
/// `corpus` must be a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn adlens_corpus_num_utterances(
    corpus: *const AdlensCorpus,
    require_pos: c_int,
) -> usize {
    corpus
        .as_ref()
        .map_or(0, |c| extract_utterances(&c.transcripts, require_pos != 0).len())
}

/// Architecture selector for `AdlensTrainOptions`.
pub const ADLENS_ARCH_CNN: c_int = 0;
pub const ADLENS_ARCH_LSTM: c_int = 1;
pub const ADLENS_ARCH_CNN_LSTM: c_int = 2;

/// Training configuration. Convolution widths are fixed per architecture
/// (3,4,5 for the convolutional model; 3,4,5,6 for the hybrid).
#[repr(C)]
pub struct AdlensTrainOptions {
    /// One of the `ADLENS_ARCH_*` constants.
    pub arch: c_int,
    /// Nonzero to interleave POS-tag tokens with words.
    pub tagged: c_int,
    pub seed: u64,
    pub vocab_max: usize,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping; 0 runs one epoch.
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub embed_dim: usize,
    /// Filters per convolution width; convolutional architectures only.
    pub filters: usize,
    /// Recurrent state size; recurrent architectures only.
    pub hidden: usize,
    /// Stacked recurrent layers; pure-recurrent architecture only.
    pub layers: usize,
    pub keep_prob: f64,
    pub max_len: usize,
}

fn arch_of(code: c_int) -> Result<Arch> {
    match code {
        ADLENS_ARCH_CNN => Ok(Arch::Cnn),
        ADLENS_ARCH_LSTM => Ok(Arch::Lstm),
        ADLENS_ARCH_CNN_LSTM => Ok(Arch::CnnLstm),
        _ => Err(Error::Usage(format!("unknown architecture code {code}"))),
    }
}

/// Production defaults for the given architecture.
#[no_mangle]
pub extern "C" fn adlens_train_options_default(arch: c_int) -> AdlensTrainOptions {
    let a = arch_of(arch).unwrap_or(Arch::Cnn);
    let t = TrainConfig::default_for(a);
    let (filters, hidden, keep_prob, max_len) = match a {
        Arch::Cnn => (128, 0, 0.80, 32),
        Arch::Lstm => (0, 128, 0.70, 32),
        Arch::CnnLstm => (100, 300, 0.65, 64),
    };
    AdlensTrainOptions {
        arch,
        tagged: 0,
        seed: t.seed,
        vocab_max: 2396,
        max_epochs: t.max_epochs,
        patience: t.patience,
        batch_size: t.batch_size,
        learning_rate: t.lr,
        embed_dim: 300,
        filters,
        hidden,
        layers: 2,
        keep_prob,
        max_len,
    }
}

/// A trained model with its vocabulary and input mode.
pub struct AdlensModel {
    handle: ModelHandle,
    vocab: Vocabulary,
    tagged: bool,
}

fn model_config(o: &AdlensTrainOptions, vocab_size: usize) -> Result<ModelConfig> {
    Ok(match arch_of(o.arch)? {
        Arch::Cnn => ModelConfig::Cnn(CnnConfig {
            filter_sizes: vec![3, 4, 5],
            filters_per_size: o.filters,
            embed_dim: o.embed_dim,
            keep_prob: o.keep_prob,
            vocab_size,
            max_len: o.max_len,
        }),
        Arch::Lstm => ModelConfig::Lstm(LstmConfig {
            layers: o.layers,
            hidden: o.hidden,
            embed_dim: o.embed_dim,
            keep_prob: o.keep_prob,
            vocab_size,
            max_len: o.max_len,
        }),
        Arch::CnnLstm => ModelConfig::CnnLstm(CnnLstmConfig {
            filter_sizes: vec![3, 4, 5, 6],
            filters_per_size: o.filters,
            embed_dim: o.embed_dim,
            lstm_hidden: o.hidden,
            keep_prob: o.keep_prob,
            vocab_size,
            max_len: o.max_len,
        }),
    })
}

fn encode_corpus(
    corpus: &AdlensCorpus,
    vocab: &Vocabulary,
    tagged: bool,
    max_len: usize,
) -> Result<Vec<EncodedSample>> {
    extract_utterances(&corpus.transcripts, tagged)
        .iter()
        .map(|u| encode_utterance(u, vocab, tagged, max_len))
        .collect()
}

/// Train on an 80/10/10 seeded split of the corpus and return the model of
/// the best dev epoch.
///
/// # Safety
/// `corpus` and `options` must be live pointers; `out` receives an owned
/// handle.
#[no_mangle]
pub unsafe extern "C" fn adlens_train(
    corpus: *const AdlensCorpus,
    options: *const AdlensTrainOptions,
    out: *mut *mut AdlensModel,
) -> c_int {
    guard(out, || {
        let corpus = corpus.as_ref().ok_or_else(|| Error::Usage("corpus is null".into()))?;
        let o = options.as_ref().ok_or_else(|| Error::Usage("options is null".into()))?;
        let tagged = o.tagged != 0;
        let utterances = extract_utterances(&corpus.transcripts, tagged);
        let vocab = build_vocabulary(&utterances, o.vocab_max, tagged)?;
        let samples = utterances
            .iter()
            .map(|u| encode_utterance(u, &vocab, tagged, o.max_len))
            .collect::<Result<Vec<_>>>()?;
        let split = split_corpus(&samples, (0.8, 0.1, 0.1), o.seed)?;
        let handle = ModelHandle::init(model_config(o, vocab.len())?, o.seed)?;
        let cfg = TrainConfig {
            batch_size: o.batch_size,
            clip_norm: 2.0,
            lr: o.learning_rate,
            max_epochs: o.max_epochs,
            patience: o.patience,
            seed: o.seed,
        };
        let (handle, _) = train(handle, &split.train, &split.dev, &cfg)?;
        Ok(AdlensModel { handle, vocab, tagged })
    })
}

/// # Safety
/// `model` must come from `adlens_train` or `adlens_model_load` and not be
/// freed twice.
#[no_mangle]
pub unsafe extern "C" fn adlens_model_free(model: *mut AdlensModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be live; `dir` must be a valid NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn adlens_model_save(
    model: *const AdlensModel,
    dir: *const c_char,
) -> c_int {
    let run = || -> Result<()> {
        let m = model.as_ref().ok_or_else(|| Error::Usage("model is null".into()))?;
        let dir = cstr(dir, "dir")?;
        save_checkpoint(Path::new(dir), &m.handle, &m.vocab, m.tagged)
    };
    match catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok(())) => ADLENS_OK,
        Ok(Err(e)) => {
            set_error(&e.to_string());
            code_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            ADLENS_ERR_NUMERIC
        }
    }
}

/// # Safety
/// `dir` must be a valid NUL-terminated path; `out` receives an owned handle.
#[no_mangle]
pub unsafe extern "C" fn adlens_model_load(
    dir: *const c_char,
    out: *mut *mut AdlensModel,
) -> c_int {
    guard(out, || {
        let dir = cstr(dir, "dir")?;
        let (handle, vocab, tagged) = load_checkpoint(Path::new(dir))?;
        Ok(AdlensModel { handle, vocab, tagged })
    })
}

/// Accuracy over every eligible utterance in the corpus, with the majority
/// baseline for reference. Either output pointer may be null to skip it.
///
/// # Safety
/// `model` and `corpus` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn adlens_evaluate(
    model: *const AdlensModel,
    corpus: *const AdlensCorpus,
    accuracy: *mut f64,
    baseline: *mut f64,
) -> c_int {
    let run = || -> Result<(f64, f64)> {
        let m = model.as_ref().ok_or_else(|| Error::Usage("model is null".into()))?;
        let c = corpus.as_ref().ok_or_else(|| Error::Usage("corpus is null".into()))?;
        let samples = encode_corpus(c, &m.vocab, m.tagged, m.handle.config.max_len())?;
        let report = evaluate(&m.handle, &samples)?;
        let labels: Vec<_> = samples.iter().map(|s| s.label).collect();
        Ok((report.accuracy, majority_baseline(&labels)?))
    };
    match catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok((acc, base))) => {
            if !accuracy.is_null() {
                *accuracy = acc;
            }
            if !baseline.is_null() {
                *baseline = base;
            }
            ADLENS_OK
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            code_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            ADLENS_ERR_NUMERIC
        }
    }
}

/// Plain-text saliency heatmap for one utterance, addressed by transcript id
/// and utterance index. The returned string is released with
/// `adlens_string_free`.
///
/// # Safety
/// `model` and `corpus` must be live handles; `transcript_id` must be a
/// valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn adlens_saliency_text(
    model: *const AdlensModel,
    corpus: *const AdlensCorpus,
    transcript_id: *const c_char,
    utterance_index: usize,
    out: *mut *mut c_char,
) -> c_int {
    if out.is_null() {
        set_error("output pointer is null");
        return ADLENS_ERR_USAGE;
    }
    let run = || -> Result<CString> {
        let m = model.as_ref().ok_or_else(|| Error::Usage("model is null".into()))?;
        let c = corpus.as_ref().ok_or_else(|| Error::Usage("corpus is null".into()))?;
        let tid = cstr(transcript_id, "transcript_id")?;
        let utterances = extract_utterances(&c.transcripts, m.tagged);
        let u = utterances
            .iter()
            .find(|u| u.transcript_id == tid && u.index == utterance_index)
            .ok_or_else(|| {
                Error::Lookup(format!("utterance `{tid}:{utterance_index}` not found"))
            })?;
        let map = saliency(&m.handle, u, &m.vocab, m.tagged, ScoreKind::L2, None)?;
        let text = render_heatmap(&map, HeatmapFormat::Text);
        CString::new(text).map_err(|_| Error::Numeric("heatmap contains NUL".into()))
    };
    match catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok(s)) => {
            *out = s.into_raw();
            ADLENS_OK
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            code_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            ADLENS_ERR_NUMERIC
        }
    }
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn adlens_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
