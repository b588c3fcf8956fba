//! Synthetic CHAT-lite corpus generator. Transcripts are built from
//! task-specific templates: the AD side plants documented markers (fillers,
//! interjection starts, short bursts, past-tense clarification questions,
//! adjective/adverb-heavy scene descriptions) while the control side leans on
//! determiner-noun-participle structure. Every utterance carries a %mor tier
//! generated from the same template, so tags and words always align.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeds;

use super::types::{Gender, Label, PosTag, Task, Transcript, Utterance};

const CONTROL_NOUNS: &[&str] = &[
    "water", "sink", "boy", "girl", "mother", "cookie", "jar", "stool", "dish", "curtain",
    "plate", "window", "kitchen", "counter",
];
const CONTROL_PRESP: &[&str] = &[
    "overflowing", "washing", "drying", "taking", "tipping", "standing", "reaching", "falling",
    "spilling", "climbing",
];
const CONTROL_PART: &[&str] = &["been", "kept", "gone", "finished", "started"];
const RECALL_NOUNS: &[&str] = &["story", "house", "lady", "dog", "garden", "letter", "friend"];

const AD_FILLERS: &[&str] = &["uh", "um"];
const AD_INTERJECTIONS: &[&str] = &["well", "oh", "so", "right"];
const AD_BURSTS: &[&str] = &["okay", "and", "yes", "oh", "fine", "alright", "hmm"];
const AD_NOUNS: &[&str] = &["facts", "elephant", "words", "things", "picture", "stuff", "name"];
const AD_ADJS: &[&str] = &["little", "big", "funny", "strange", "old"];
const AD_ADVS: &[&str] = &["really", "quickly", "maybe", "somewhere", "again"];
const AD_VERBS: &[&str] = &["say", "see", "remember", "forget", "mean", "tell"];

type Toks = Vec<(String, &'static str)>;

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn control_utterance(rng: &mut ChaCha8Rng, task: Task) -> Toks {
    let nouns = if task == Task::Cookie { CONTROL_NOUNS } else { RECALL_NOUNS };
    let n1 = pick(rng, nouns);
    let n2 = pick(rng, nouns);
    let presp = pick(rng, CONTROL_PRESP);
    let part = pick(rng, CONTROL_PART);
    match rng.gen_range(0..4) {
        // the water has been overflowing
        0 => vec![
            ("the".into(), "det"),
            (n1.into(), "n"),
            ("has".into(), "aux"),
            (part.into(), "part"),
            (presp.into(), "presp"),
        ],
        // the boy is taking the cookie
        1 => vec![
            ("the".into(), "det"),
            (n1.into(), "n"),
            ("is".into(), "aux"),
            (presp.into(), "presp"),
            ("the".into(), "det"),
            (n2.into(), "n"),
        ],
        // the mother has finished washing the dishes
        2 => vec![
            ("the".into(), "det"),
            (n1.into(), "n"),
            ("has".into(), "aux"),
            (part.into(), "part"),
            (presp.into(), "presp"),
            ("the".into(), "det"),
            (n2.into(), "n"),
        ],
        // the stool has kept tipping
        _ => vec![
            ("the".into(), "det"),
            (n1.into(), "n"),
            ("has".into(), "aux"),
            (part.into(), "part"),
            (presp.into(), "presp"),
        ],
    }
}

fn ad_utterance(rng: &mut ChaCha8Rng, task: Task) -> Toks {
    let weight = rng.gen_range(0..100);
    if task == Task::Cookie && weight < 50 {
        // adjective/adverb-heavy description with a filler
        let mut toks: Toks = vec![(pick(rng, AD_FILLERS).into(), "co")];
        toks.extend([
            ("the".into(), "det"),
            (pick(rng, AD_ADJS).into(), "adj"),
            (pick(rng, AD_NOUNS).into(), "n"),
            (pick(rng, AD_ADVS).into(), "adv"),
            (pick(rng, AD_VERBS).into(), "v"),
            ("the".into(), "det"),
            (pick(rng, AD_NOUNS).into(), "n"),
        ]);
        toks
    } else if weight < 35 || (task == Task::Cookie && weight < 65) {
        // short burst of speech, 1-3 tokens
        let len = rng.gen_range(1..=3);
        (0..len).map(|_| (pick(rng, AD_BURSTS).to_string(), "co")).collect()
    } else if weight < 65 {
        // past-tense clarification question
        vec![
            ("did".into(), "v"),
            ("i".into(), "pro"),
            (pick(rng, AD_VERBS).into(), "v"),
            (pick(rng, AD_NOUNS).into(), "n"),
        ]
    } else if weight < 85 {
        // starting with an interjection
        vec![
            (pick(rng, AD_INTERJECTIONS).into(), "co"),
            ("i".into(), "pro"),
            (pick(rng, AD_VERBS).into(), "v"),
            (pick(rng, AD_FILLERS).into(), "co"),
            (pick(rng, AD_NOUNS).into(), "n"),
        ]
    } else {
        // filler-heavy fragment
        vec![
            (pick(rng, AD_FILLERS).into(), "co"),
            (pick(rng, AD_FILLERS).into(), "co"),
            ("the".into(), "det"),
            (pick(rng, AD_NOUNS).into(), "n"),
        ]
    }
}

/// Deterministic synthetic corpus: `round(n * ad_fraction)` AD transcripts,
/// the rest control, with gender and task drawn uniformly under the seed.
pub fn generate_synthetic_corpus(
    n_transcripts: usize,
    ad_fraction: f64,
    seed: u64,
) -> Result<Vec<Transcript>> {
    if n_transcripts < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 transcripts, got {n_transcripts}"
        )));
    }
    if !(0.0..1.0).contains(&ad_fraction) || ad_fraction == 0.0 {
        return Err(Error::Config(format!("ad_fraction must be in (0,1), got {ad_fraction}")));
    }
    let ad_count = (n_transcripts as f64 * ad_fraction).round() as usize;
    let mut rng = seeds::substream(seed, "synth");
    let mut out = Vec::with_capacity(n_transcripts);
    for i in 0..n_transcripts {
        let diagnosis = if i < ad_count { Label::Ad } else { Label::Control };
        let gender = if rng.gen_bool(0.5) { Gender::Male } else { Gender::Female };
        let task = match rng.gen_range(0..3) {
            0 => Task::Cookie,
            1 => Task::Recall,
            _ => Task::Other,
        };
        let id = format!("synth{i:04}");
        let n_utts = rng.gen_range(5..=10);
        let mut utterances = Vec::with_capacity(n_utts);
        for index in 0..n_utts {
            let toks = match diagnosis {
                Label::Ad => ad_utterance(&mut rng, task),
                Label::Control => control_utterance(&mut rng, task),
            };
            let words = toks.iter().map(|(w, _)| w.clone()).collect();
            let pos = toks
                .iter()
                .map(|(_, t)| PosTag::new(t))
                .collect::<Result<Vec<_>>>()?;
            utterances.push(Utterance {
                transcript_id: id.clone(),
                index,
                words,
                pos: Some(pos),
                label: diagnosis,
                task,
                gender,
            });
        }
        out.push(Transcript { id, diagnosis, gender, task, utterances });
    }
    Ok(out)
}
