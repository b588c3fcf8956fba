//! CHAT-lite reader and writer. One transcript per file:
//!
//! ```text
//! @Begin
//! @ID: <lang>|<corpus>|PAR|<age>|<male|female|unknown>|<AD|Control>|<Cookie|Recall|Other>
//! *PAR:   well okay .
//! %mor:   co|well co|okay .
//! @End
//! ```
//!
//! `*INV:` lines are permitted and ignored. A `%mor` tier aligns to the
//! immediately preceding `*PAR` line; when its item count (punctuation
//! excluded) does not match the word count, the words are kept and the
//! utterance's POS tags are absent.

use crate::error::{Error, Result};

use super::types::{Gender, Label, PosTag, Task, Transcript, Utterance};

fn is_terminator(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(|c| matches!(c, '.' | '?' | '!'))
}

fn tier_body(line: &str) -> &str {
    line.trim_start_matches(|c| c == '\t' || c == ' ')
}

/// Tokenize a `*PAR` tier: whitespace split, terminal punctuation stripped,
/// lowercased.
fn tokenize(body: &str) -> Vec<String> {
    body.split_whitespace()
        .filter(|t| !is_terminator(t))
        .map(|t| t.trim_end_matches(['.', '?', '!']).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Tags of a `%mor` tier, or None when any item fails to parse.
fn mor_tags(body: &str) -> Option<Vec<PosTag>> {
    let mut tags = Vec::new();
    for item in body.split_whitespace() {
        if is_terminator(item) {
            continue;
        }
        let tag = item.split('|').next().unwrap_or(item);
        tags.push(PosTag::new(&tag.to_lowercase()).ok()?);
    }
    Some(tags)
}

pub fn parse_chat(file_text: &str) -> Result<Transcript> {
    let mut lines = file_text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty());

    let Some((_, first)) = lines.next() else {
        return Err(Error::Format("empty file".into()));
    };
    if first != "@Begin" {
        return Err(Error::Format("line 1: expected @Begin".into()));
    }

    let Some((id_line_no, id_line)) = lines.next() else {
        return Err(Error::Format("missing @ID header".into()));
    };
    let header = id_line
        .strip_prefix("@ID:")
        .ok_or_else(|| Error::Format(format!("line {id_line_no}: expected @ID header")))?;
    let fields: Vec<&str> = header.trim().split('|').collect();
    if fields.len() != 7 || fields[2] != "PAR" {
        return Err(Error::Format(format!(
            "line {id_line_no}: malformed @ID header, want <lang>|<corpus>|PAR|<age>|<gender>|<diagnosis>|<task>"
        )));
    }
    let id = fields[1].to_string();
    let gender = Gender::parse(fields[4])
        .map_err(|e| Error::Format(format!("line {id_line_no}: {e}")))?;
    let diagnosis = Label::parse(fields[5])
        .map_err(|e| Error::Format(format!("line {id_line_no}: {e}")))?;
    let task = Task::parse(fields[6])
        .map_err(|e| Error::Format(format!("line {id_line_no}: {e}")))?;

    let mut utterances: Vec<Utterance> = Vec::new();
    let mut saw_end = false;
    for (line_no, line) in lines {
        if saw_end {
            return Err(Error::Format(format!("line {line_no}: content after @End")));
        }
        if line == "@End" {
            saw_end = true;
        } else if let Some(body) = line.strip_prefix("*PAR:") {
            let words = tokenize(tier_body(body));
            if words.is_empty() {
                return Err(Error::Format(format!("line {line_no}: empty utterance")));
            }
            utterances.push(Utterance {
                transcript_id: id.clone(),
                index: utterances.len(),
                words,
                pos: None,
                label: diagnosis,
                task,
                gender,
            });
        } else if let Some(body) = line.strip_prefix("%mor:") {
            let Some(last) = utterances.last_mut() else {
                return Err(Error::Format(format!(
                    "line {line_no}: %mor tier before any *PAR line"
                )));
            };
            if last.pos.is_some() {
                return Err(Error::Format(format!(
                    "line {line_no}: duplicate %mor tier for one utterance"
                )));
            }
            // misaligned or unparseable tiers keep the words, drop the tags
            if let Some(tags) = mor_tags(tier_body(body)) {
                if tags.len() == last.words.len() {
                    last.pos = Some(tags);
                }
            }
        } else if line.starts_with("*INV:") || line.starts_with('@') {
            // interviewer lines and other headers are ignored
        } else {
            return Err(Error::Format(format!("line {line_no}: unrecognized line `{line}`")));
        }
    }
    if !saw_end {
        return Err(Error::Format("missing @End".into()));
    }
    Ok(Transcript { id, diagnosis, gender, task, utterances })
}

/// Emit exactly the CHAT-lite shape with single-tab separators. `%mor` items
/// use the word itself as the lemma.
pub fn serialize_chat(t: &Transcript) -> String {
    let mut out = String::new();
    out.push_str("@Begin\n");
    out.push_str(&format!(
        "@ID:\ten|{}|PAR|0;|{}|{}|{}\n",
        t.id,
        t.gender.as_str(),
        t.diagnosis.as_str(),
        t.task.as_str()
    ));
    for u in &t.utterances {
        out.push_str(&format!("*PAR:\t{} .\n", u.words.join(" ")));
        if let Some(pos) = &u.pos {
            let items: Vec<String> = pos
                .iter()
                .zip(&u.words)
                .map(|(p, w)| format!("{p}|{w}"))
                .collect();
            out.push_str(&format!("%mor:\t{} .\n", items.join(" ")));
        }
    }
    out.push_str("@End\n");
    out
}
