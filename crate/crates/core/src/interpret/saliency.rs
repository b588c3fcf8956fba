//! First-derivative saliency: gradient of a class logit with respect to the
//! input embedding rows, reduced to one nonnegative score per token.

use crate::corpus::{encode_utterance, Utterance, Vocabulary};
use crate::error::{Error, Result};
use crate::models::{Mode, ModelHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    L2,
    AbsSum,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::L2 => "l2",
            ScoreKind::AbsSum => "abs_sum",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(ScoreKind::L2),
            "abs_sum" => Ok(ScoreKind::AbsSum),
            _ => Err(Error::Usage(format!("unknown score kind `{s}` (l2|abs_sum)"))),
        }
    }
}

/// In tagged mode word scores and POS-token scores are separate entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyEntry {
    pub token: String,
    pub kind: TokenKind,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub source: Utterance,
    pub entries: Vec<SaliencyEntry>,
    pub predicted_class: usize,
    pub target_class: usize,
    pub score_kind: ScoreKind,
}

/// Differentiate the pre-softmax logit of `target` (default: the predicted
/// class) with respect to each input embedding row. PAD positions are
/// excluded.
pub fn saliency(
    model: &ModelHandle,
    utterance: &Utterance,
    vocab: &Vocabulary,
    tagged: bool,
    score_kind: ScoreKind,
    target: Option<usize>,
) -> Result<SaliencyMap> {
    let sample = encode_utterance(utterance, vocab, tagged, model.config.max_len())?;
    let mut pass = model.forward(std::slice::from_ref(&sample), Mode::Eval, None)?;
    let logits = pass.logits()[0];
    let predicted_class = usize::from(logits[1] > logits[0]);
    let target_class = target.unwrap_or(predicted_class);
    if target_class > 1 {
        return Err(Error::Bounds(format!("target class {target_class} out of range")));
    }
    let score_id = pass.tape.select(pass.logit_ids[0], target_class)?;
    pass.tape.backward(score_id)?;
    let grad = pass.tape.grad(pass.embed_ids[0]);

    // the cnn path pads the lookup past true_length; those rows are dropped
    let mut tokens: Vec<(String, TokenKind)> = if tagged {
        let pos = sample.source.pos.as_ref().expect("tagged encoding checked pos");
        pos.iter()
            .zip(&sample.source.words)
            .flat_map(|(p, w)| {
                [(p.as_str().to_string(), TokenKind::Pos), (w.clone(), TokenKind::Word)]
            })
            .collect()
    } else {
        sample.source.words.iter().map(|w| (w.clone(), TokenKind::Word)).collect()
    };
    tokens.truncate(sample.true_length);

    let entries = tokens
        .into_iter()
        .enumerate()
        .map(|(i, (token, kind))| {
            let row = grad.row(i);
            let score = match score_kind {
                ScoreKind::L2 => row.iter().map(|g| g * g).sum::<f64>().sqrt(),
                ScoreKind::AbsSum => row.iter().map(|g| g.abs()).sum(),
            };
            SaliencyEntry { token, kind, score }
        })
        .collect();
    Ok(SaliencyMap {
        source: utterance.clone(),
        entries,
        predicted_class,
        target_class,
        score_kind,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapFormat {
    Text,
    Html,
    Svg,
}

impl HeatmapFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(HeatmapFormat::Text),
            "html" => Ok(HeatmapFormat::Html),
            "svg" => Ok(HeatmapFormat::Svg),
            _ => Err(Error::Usage(format!("unknown heatmap format `{s}` (text|html|svg)"))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            HeatmapFormat::Text => "txt",
            HeatmapFormat::Html => "html",
            HeatmapFormat::Svg => "svg",
        }
    }
}

/// Min-max normalized scores per utterance; all-equal collapses to 0.5.
pub fn normalized_scores(map: &SaliencyMap) -> Vec<f64> {
    let lo = map.entries.iter().map(|e| e.score).fold(f64::INFINITY, f64::min);
    let hi = map.entries.iter().map(|e| e.score).fold(f64::NEG_INFINITY, f64::max);
    map.entries
        .iter()
        .map(|e| if hi > lo { (e.score - lo) / (hi - lo) } else { 0.5 })
        .collect()
}

pub fn bucket(norm: f64) -> usize {
    (norm * 4.0).round() as usize
}

const TEXT_MARKS: [&str; 5] = [" ", ".", ":", "*", "#"];

fn class_name(class: usize) -> &'static str {
    if class == 1 { "AD" } else { "Control" }
}

fn escape_html(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_heatmap(map: &SaliencyMap, format: HeatmapFormat) -> String {
    let norms = normalized_scores(map);
    let caption = format!(
        "{}_{} predicted={} target={} kind={}",
        map.source.transcript_id,
        map.source.index,
        class_name(map.predicted_class),
        class_name(map.target_class),
        map.score_kind.as_str()
    );
    match format {
        HeatmapFormat::Text => {
            let mut out = caption + "\n";
            for (e, &n) in map.entries.iter().zip(&norms) {
                let suffix = if e.kind == TokenKind::Pos { " (pos)" } else { "" };
                out.push_str(&format!("{} {}{suffix}\n", TEXT_MARKS[bucket(n)], e.token));
            }
            out
        }
        HeatmapFormat::Html => {
            let mut out = String::from("<!DOCTYPE html>\n<html><body><figure><p>\n");
            for (e, &n) in map.entries.iter().zip(&norms) {
                let style = format!("background-color: rgba(217,48,37,{n:.3})");
                let class = if e.kind == TokenKind::Pos { " class=\"pos\"" } else { "" };
                out.push_str(&format!(
                    "<span{class} style=\"{style}\" title=\"{:.6}\">{}</span>\n",
                    e.score,
                    escape_html(&e.token)
                ));
            }
            out.push_str(&format!(
                "</p><figcaption>{}</figcaption></figure></body></html>\n",
                escape_html(&caption)
            ));
            out
        }
        HeatmapFormat::Svg => {
            let cell = 90;
            let width = cell * map.entries.len().max(1) + 20;
            let mut out = format!(
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"70\">\n"
            );
            for (i, (e, &n)) in map.entries.iter().zip(&norms).enumerate() {
                let x = 10 + i * cell;
                out.push_str(&format!(
                    "<rect x=\"{x}\" y=\"10\" width=\"{}\" height=\"28\" fill=\"rgb(217,48,37)\" \
                     fill-opacity=\"{n:.3}\"/>\n",
                    cell - 6
                ));
                out.push_str(&format!(
                    "<text x=\"{}\" y=\"29\" text-anchor=\"middle\">{}</text>\n",
                    x + (cell - 6) / 2,
                    escape_html(&e.token)
                ));
            }
            out.push_str(&format!(
                "<text x=\"10\" y=\"60\">{}</text>\n</svg>\n",
                escape_html(&caption)
            ));
            out
        }
    }
}
