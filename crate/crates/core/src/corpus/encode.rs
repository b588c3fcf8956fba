use crate::error::{Error, Result};

use super::types::{Label, Utterance};
use super::vocab::{pos_token, Vocabulary};

pub const PAD_ID: usize = 0;
pub const OOV_ID: usize = 1;

/// Fixed-length id sequence for one utterance, PAD-filled on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub ids: Vec<usize>,
    pub true_length: usize,
    pub label: Label,
    pub source: Utterance,
}

/// Untagged mode emits word ids; tagged mode interleaves `<pos:tag>` before
/// each word so both enter one shared embedding table. Sequences longer than
/// `max_len` are truncated at the end.
pub fn encode_utterance(
    u: &Utterance,
    vocab: &Vocabulary,
    tagged: bool,
    max_len: usize,
) -> Result<EncodedSample> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be positive".into()));
    }
    let tokens: Vec<String> = if tagged {
        let pos = u.pos.as_ref().ok_or_else(|| {
            Error::Precondition(format!(
                "tagged encoding requires POS tags (utterance {}:{})",
                u.transcript_id, u.index
            ))
        })?;
        pos.iter()
            .zip(&u.words)
            .flat_map(|(p, w)| [pos_token(p.as_str()), w.clone()])
            .collect()
    } else {
        u.words.clone()
    };
    let mut ids: Vec<usize> = tokens.iter().take(max_len).map(|t| vocab.id_or_oov(t)).collect();
    let true_length = ids.len();
    ids.resize(max_len, PAD_ID);
    Ok(EncodedSample { ids, true_length, label: u.label, source: u.clone() })
}

/// In-vocabulary token sequence for an encoded sample (PAD excluded).
pub fn decode_sample(s: &EncodedSample, vocab: &Vocabulary) -> Vec<String> {
    s.ids[..s.true_length]
        .iter()
        .map(|&id| vocab.token(id).unwrap_or("<bad>").to_string())
        .collect()
}
