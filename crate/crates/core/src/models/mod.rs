//! The three utterance classifier architectures, assembled from autodiff
//! primitives, with named activation probes for the interpretation tooling.

mod checkpoint;
mod forward;


pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use forward::{BatchLoss, ForwardPass, Mode};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Cnn,
    Lstm,
    CnnLstm,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Cnn => "cnn",
            Arch::Lstm => "lstm",
            Arch::CnnLstm => "cnn_lstm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cnn" => Ok(Arch::Cnn),
            "lstm" => Ok(Arch::Lstm),
            "cnn_lstm" => Ok(Arch::CnnLstm),
            _ => Err(Error::Usage(format!("unknown architecture `{s}` (cnn|lstm|cnn_lstm)"))),
        }
    }
}

pub const CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct CnnConfig {
    pub filter_sizes: Vec<usize>,
    pub filters_per_size: usize,
    pub embed_dim: usize,
    pub keep_prob: f64,
    pub vocab_size: usize,
    pub max_len: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            filter_sizes: vec![3, 4, 5],
            filters_per_size: 128,
            embed_dim: 300,
            keep_prob: 0.80,
            vocab_size: 2396,
            max_len: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmConfig {
    pub layers: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub keep_prob: f64,
    pub vocab_size: usize,
    pub max_len: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            layers: 2,
            hidden: 128,
            embed_dim: 300,
            keep_prob: 0.70,
            vocab_size: 2396,
            max_len: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnLstmConfig {
    pub filter_sizes: Vec<usize>,
    pub filters_per_size: usize,
    pub embed_dim: usize,
    pub lstm_hidden: usize,
    /// Keep probability for both the feedforward dropout and the variational
    /// recurrent dropout.
    pub keep_prob: f64,
    pub vocab_size: usize,
    pub max_len: usize,
}

impl Default for CnnLstmConfig {
    fn default() -> Self {
        CnnLstmConfig {
            filter_sizes: vec![3, 4, 5, 6],
            filters_per_size: 100,
            embed_dim: 300,
            lstm_hidden: 300,
            keep_prob: 0.65,
            vocab_size: 2396,
            max_len: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Cnn(CnnConfig),
    Lstm(LstmConfig),
    CnnLstm(CnnLstmConfig),
}

impl ModelConfig {
    pub fn arch(&self) -> Arch {
        match self {
            ModelConfig::Cnn(_) => Arch::Cnn,
            ModelConfig::Lstm(_) => Arch::Lstm,
            ModelConfig::CnnLstm(_) => Arch::CnnLstm,
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            ModelConfig::Cnn(c) => c.vocab_size,
            ModelConfig::Lstm(c) => c.vocab_size,
            ModelConfig::CnnLstm(c) => c.vocab_size,
        }
    }

    pub fn max_len(&self) -> usize {
        match self {
            ModelConfig::Cnn(c) => c.max_len,
            ModelConfig::Lstm(c) => c.max_len,
            ModelConfig::CnnLstm(c) => c.max_len,
        }
    }

    pub fn keep_prob(&self) -> f64 {
        match self {
            ModelConfig::Cnn(c) => c.keep_prob,
            ModelConfig::Lstm(c) => c.keep_prob,
            ModelConfig::CnnLstm(c) => c.keep_prob,
        }
    }

    fn validate(&self) -> Result<()> {
        let keep = self.keep_prob();
        if !(keep > 0.0 && keep <= 1.0) {
            return Err(Error::Config(format!("keep_prob must be in (0,1], got {keep}")));
        }
        if self.vocab_size() < 3 {
            return Err(Error::Config("vocab_size must be >= 3".into()));
        }
        if self.max_len() == 0 {
            return Err(Error::Config("max_len must be positive".into()));
        }
        match self {
            ModelConfig::Cnn(c) => {
                if c.filter_sizes.is_empty() || c.filter_sizes.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("filter sizes must be positive ascending".into()));
                }
                if c.filters_per_size == 0 {
                    return Err(Error::Config("filters_per_size must be positive".into()));
                }
            }
            ModelConfig::Lstm(c) => {
                if c.layers == 0 || c.hidden == 0 {
                    return Err(Error::Config("lstm needs layers >= 1 and hidden > 0".into()));
                }
            }
            ModelConfig::CnnLstm(c) => {
                if c.filter_sizes.is_empty() || c.filter_sizes.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("filter sizes must be positive ascending".into()));
                }
                if c.filters_per_size == 0 || c.lstm_hidden == 0 {
                    return Err(Error::Config("cnn_lstm needs filters and hidden > 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// A configured architecture plus its parameters.
#[derive(Debug, Clone)]
pub struct ModelHandle {
    pub config: ModelConfig,
    pub params: ParamSet,
}

fn glorot(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor { shape: shape.to_vec(), data }
}

fn embedding(rng: &mut ChaCha8Rng, vocab: usize, dim: usize) -> Tensor {
    let data = (0..vocab * dim).map(|_| rng.gen_range(-0.05..0.05)).collect();
    Tensor { shape: vec![vocab, dim], data }
}

fn lstm_bias(hidden: usize) -> Tensor {
    // forget-gate section initialized to 1.0; gate order [i, f, g, o]
    let mut b = Tensor::zeros(&[4 * hidden]);
    for k in hidden..2 * hidden {
        b.data[k] = 1.0;
    }
    b
}

impl ModelHandle {
    /// Fresh parameters for the configuration, drawn from the `init`
    /// substream of `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeds::substream(seed, "init");
        let mut params = ParamSet::new();
        match &config {
            ModelConfig::Cnn(c) => {
                params.insert("embed", embedding(&mut rng, c.vocab_size, c.embed_dim));
                for &w in &c.filter_sizes {
                    let f = c.filters_per_size;
                    params.insert(
                        &format!("conv{w}.w"),
                        glorot(&mut rng, &[f, w, c.embed_dim], w * c.embed_dim, f),
                    );
                    params.insert(&format!("conv{w}.b"), Tensor::zeros(&[f]));
                }
                let pooled = c.filter_sizes.len() * c.filters_per_size;
                params.insert("out.w", glorot(&mut rng, &[pooled, CLASSES], pooled, CLASSES));
                params.insert("out.b", Tensor::zeros(&[CLASSES]));
            }
            ModelConfig::Lstm(c) => {
                params.insert("embed", embedding(&mut rng, c.vocab_size, c.embed_dim));
                for l in 0..c.layers {
                    let input = if l == 0 { c.embed_dim } else { c.hidden };
                    let h = c.hidden;
                    params.insert(
                        &format!("lstm{l}.wx"),
                        glorot(&mut rng, &[input, 4 * h], input, 4 * h),
                    );
                    params.insert(
                        &format!("lstm{l}.wh"),
                        glorot(&mut rng, &[h, 4 * h], h, 4 * h),
                    );
                    params.insert(&format!("lstm{l}.b"), lstm_bias(h));
                }
                params.insert("out.w", glorot(&mut rng, &[c.hidden, CLASSES], c.hidden, CLASSES));
                params.insert("out.b", Tensor::zeros(&[CLASSES]));
            }
            ModelConfig::CnnLstm(c) => {
                params.insert("embed", embedding(&mut rng, c.vocab_size, c.embed_dim));
                for &w in &c.filter_sizes {
                    let f = c.filters_per_size;
                    params.insert(
                        &format!("conv{w}.w"),
                        glorot(&mut rng, &[f, w, c.embed_dim], w * c.embed_dim, f),
                    );
                    params.insert(&format!("conv{w}.b"), Tensor::zeros(&[f]));
                }
                let feat = c.filter_sizes.len() * c.filters_per_size;
                let h = c.lstm_hidden;
                params.insert("lstm0.wx", glorot(&mut rng, &[feat, 4 * h], feat, 4 * h));
                params.insert("lstm0.wh", glorot(&mut rng, &[h, 4 * h], h, 4 * h));
                params.insert("lstm0.b", lstm_bias(h));
                params.insert("out.w", glorot(&mut rng, &[h, CLASSES], h, CLASSES));
                params.insert("out.b", Tensor::zeros(&[CLASSES]));
            }
        }
        Ok(ModelHandle { config, params })
    }

    pub fn arch(&self) -> Arch {
        self.config.arch()
    }

    /// Stable activation capture points for this architecture.
    pub fn probe_names(&self) -> Vec<String> {
        let mut names = vec!["embed".to_string()];
        match &self.config {
            ModelConfig::Cnn(c) => {
                names.extend(c.filter_sizes.iter().map(|w| format!("conv{w}")));
                names.push("pooled".into());
            }
            ModelConfig::Lstm(_) => names.push("h_final".into()),
            ModelConfig::CnnLstm(c) => {
                names.extend(c.filter_sizes.iter().map(|w| format!("conv{w}")));
                names.push("h_final".into());
            }
        }
        names.push("pre_softmax".into());
        names
    }

    /// Default probe for clustering: the pre-dense per-utterance summary.
    pub fn default_probe(&self) -> &'static str {
        match self.arch() {
            Arch::Cnn => "pooled",
            Arch::Lstm | Arch::CnnLstm => "h_final",
        }
    }
}
