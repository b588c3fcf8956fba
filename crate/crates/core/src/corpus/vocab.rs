use std::collections::HashMap;

use crate::error::{Error, Result};

use super::types::Utterance;

/// Token table with two reserved ids. Ids are dense: 0 = PAD, 1 = OOV, then
/// tokens ranked by descending frequency with lexicographic tie-break.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    pub max_size: usize,
}

pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<oov>";

/// Rendering of a POS tag as a vocabulary token in tagged mode.
pub fn pos_token(tag: &str) -> String {
    format!("<pos:{tag}>")
}

impl Vocabulary {
    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    /// Id of a token, falling back to OOV.
    pub fn id_or_oov(&self, token: &str) -> usize {
        self.id(token).unwrap_or(super::encode::OOV_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Total entries including PAD and OOV.
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Tokens in id order, one per line. Inverse of [`Vocabulary::from_lines`].
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for t in &self.id_to_token {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_lines(text: &str) -> Result<Self> {
        let id_to_token: Vec<String> = text.lines().map(str::to_string).collect();
        if id_to_token.len() < 2 || id_to_token[0] != PAD_TOKEN || id_to_token[1] != OOV_TOKEN {
            return Err(Error::Format("vocabulary file must start with PAD and OOV".into()));
        }
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let max_size = id_to_token.len();
        Ok(Vocabulary { token_to_id, id_to_token, max_size })
    }

    /// FNV-1a over the id-ordered token list; pins checkpoints to the
    /// vocabulary they were trained with.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.id_to_token {
            for b in t.as_bytes() {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Rank tokens by descending frequency (ties lexicographic) and keep the top
/// `max_size - 2` after the reserved ids. In tagged mode POS-tag tokens are
/// counted alongside words in one shared table.
pub fn build_vocabulary(utterances: &[Utterance], max_size: usize, tagged: bool) -> Result<Vocabulary> {
    if max_size < 3 {
        return Err(Error::Config(format!("vocabulary max_size must be >= 3, got {max_size}")));
    }
    if utterances.is_empty() {
        return Err(Error::Precondition("cannot build vocabulary from no utterances".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for u in utterances {
        for w in &u.words {
            *counts.entry(w.clone()).or_default() += 1;
        }
        if tagged {
            if let Some(pos) = &u.pos {
                for p in pos {
                    *counts.entry(pos_token(p.as_str())).or_default() += 1;
                }
            }
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size - 2);

    let mut id_to_token = vec![PAD_TOKEN.to_string(), OOV_TOKEN.to_string()];
    id_to_token.extend(ranked.into_iter().map(|(t, _)| t));
    let token_to_id = id_to_token
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary { token_to_id, id_to_token, max_size })
}
