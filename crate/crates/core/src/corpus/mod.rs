//! CHAT-lite transcript parsing, utterance extraction, vocabulary building,
//! sample encoding, corpus splitting, and synthetic corpus generation.

mod chat;
mod encode;
mod split;
mod synth;
mod types;
mod vocab;

pub use chat::{parse_chat, serialize_chat};
pub use encode::{decode_sample, encode_utterance, EncodedSample, PAD_ID, OOV_ID};
pub use split::{split_corpus, split_corpus_by_transcript, CorpusSplit};
pub use synth::generate_synthetic_corpus;
pub use types::{Gender, Label, PosTag, Task, Transcript, Utterance};
pub use vocab::{build_vocabulary, Vocabulary};

use crate::error::Result;

/// Flatten transcripts into utterances in transcript order. With
/// `require_pos`, utterances lacking an aligned POS tier are dropped so the
/// same retained set serves both tagged and untagged runs.
pub fn extract_utterances(corpus: &[Transcript], require_pos: bool) -> Vec<Utterance> {
    corpus
        .iter()
        .flat_map(|t| t.utterances.iter())
        .filter(|u| !require_pos || u.pos.is_some())
        .cloned()
        .collect()
}

/// Parse every `*.cha` file in a directory, sorted by file name.
pub fn load_corpus_dir(dir: &std::path::Path) -> Result<Vec<Transcript>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "cha"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in &paths {
        let text = std::fs::read_to_string(p)?;
        out.push(parse_chat(&text).map_err(|e| {
            crate::error::Error::Format(format!("{}: {e}", p.display()))
        })?);
    }
    Ok(out)
}
