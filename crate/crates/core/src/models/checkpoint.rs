//! Model checkpoints: the binary parameter container plus a key=value
//! config sidecar (architecture tag, hyperparameters, vocabulary hash) and
//! the vocabulary itself.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::autodiff::ParamSet;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

use super::{Arch, CnnConfig, CnnLstmConfig, LstmConfig, ModelConfig, ModelHandle};

fn fmt_sizes(sizes: &[usize]) -> String {
    sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::Format(format!("bad size list `{s}`"))))
        .collect()
}

fn config_lines(config: &ModelConfig, vocab_hash: u64, tagged: bool) -> String {
    let mut lines = vec![
        format!("arch={}", config.arch().as_str()),
        format!("tagged={tagged}"),
        format!("vocab_hash={vocab_hash:016x}"),
    ];
    match config {
        ModelConfig::Cnn(c) => {
            lines.push(format!("filter_sizes={}", fmt_sizes(&c.filter_sizes)));
            lines.push(format!("filters_per_size={}", c.filters_per_size));
            lines.push(format!("embed_dim={}", c.embed_dim));
            lines.push(format!("keep_prob={}", c.keep_prob));
            lines.push(format!("vocab_size={}", c.vocab_size));
            lines.push(format!("max_len={}", c.max_len));
        }
        ModelConfig::Lstm(c) => {
            lines.push(format!("layers={}", c.layers));
            lines.push(format!("hidden={}", c.hidden));
            lines.push(format!("embed_dim={}", c.embed_dim));
            lines.push(format!("keep_prob={}", c.keep_prob));
            lines.push(format!("vocab_size={}", c.vocab_size));
            lines.push(format!("max_len={}", c.max_len));
        }
        ModelConfig::CnnLstm(c) => {
            lines.push(format!("filter_sizes={}", fmt_sizes(&c.filter_sizes)));
            lines.push(format!("filters_per_size={}", c.filters_per_size));
            lines.push(format!("embed_dim={}", c.embed_dim));
            lines.push(format!("lstm_hidden={}", c.lstm_hidden));
            lines.push(format!("keep_prob={}", c.keep_prob));
            lines.push(format!("vocab_size={}", c.vocab_size));
            lines.push(format!("max_len={}", c.max_len));
        }
    }
    lines.join("\n") + "\n"
}

pub fn save_checkpoint(
    dir: &Path,
    handle: &ModelHandle,
    vocab: &Vocabulary,
    tagged: bool,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    handle.params.save(&mut buf)?;
    fs::write(dir.join("params.bin"), buf)?;
    fs::write(dir.join("config.txt"), config_lines(&handle.config, vocab.hash(), tagged))?;
    fs::write(dir.join("vocab.txt"), vocab.to_lines())?;
    Ok(())
}

fn kv_map(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("config line {}: expected key=value", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn req<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Format(format!("checkpoint config missing `{key}`")))
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    req(map, key)?
        .parse()
        .map_err(|_| Error::Format(format!("checkpoint config: bad value for `{key}`")))
}

pub fn load_checkpoint(dir: &Path) -> Result<(ModelHandle, Vocabulary, bool)> {
    let config_text = fs::read_to_string(dir.join("config.txt"))?;
    let map = kv_map(&config_text)?;
    let arch = Arch::parse(req(&map, "arch")?)?;
    let tagged: bool = num(&map, "tagged")?;
    let config = match arch {
        Arch::Cnn => ModelConfig::Cnn(CnnConfig {
            filter_sizes: parse_sizes(req(&map, "filter_sizes")?)?,
            filters_per_size: num(&map, "filters_per_size")?,
            embed_dim: num(&map, "embed_dim")?,
            keep_prob: num(&map, "keep_prob")?,
            vocab_size: num(&map, "vocab_size")?,
            max_len: num(&map, "max_len")?,
        }),
        Arch::Lstm => ModelConfig::Lstm(LstmConfig {
            layers: num(&map, "layers")?,
            hidden: num(&map, "hidden")?,
            embed_dim: num(&map, "embed_dim")?,
            keep_prob: num(&map, "keep_prob")?,
            vocab_size: num(&map, "vocab_size")?,
            max_len: num(&map, "max_len")?,
        }),
        Arch::CnnLstm => ModelConfig::CnnLstm(CnnLstmConfig {
            filter_sizes: parse_sizes(req(&map, "filter_sizes")?)?,
            filters_per_size: num(&map, "filters_per_size")?,
            embed_dim: num(&map, "embed_dim")?,
            lstm_hidden: num(&map, "lstm_hidden")?,
            keep_prob: num(&map, "keep_prob")?,
            vocab_size: num(&map, "vocab_size")?,
            max_len: num(&map, "max_len")?,
        }),
    };
    let vocab = Vocabulary::from_lines(&fs::read_to_string(dir.join("vocab.txt"))?)?;
    let want_hash = u64::from_str_radix(req(&map, "vocab_hash")?, 16)
        .map_err(|_| Error::Format("bad vocab_hash in checkpoint".into()))?;
    if vocab.hash() != want_hash {
        return Err(Error::Format(
            "checkpoint vocabulary does not match its recorded hash".into(),
        ));
    }
    let mut file = fs::File::open(dir.join("params.bin"))?;
    let params = ParamSet::load(&mut file)?;
    Ok((ModelHandle { config, params }, vocab, tagged))
}
