//! Model interpretation: per-utterance activation capture, k-means
//! clustering, POS-pattern discovery per cluster, and gradient saliency.

mod kmeans;
mod saliency;

pub use kmeans::{
    adjusted_rand_index, kmeans, kmeans_restarts, KMeansResult, KMEANS_MAX_ITER, KMEANS_TOL,
};
pub use saliency::{
    bucket, normalized_scores, render_heatmap, saliency, HeatmapFormat, SaliencyEntry,
    SaliencyMap, ScoreKind, TokenKind,
};

use std::collections::BTreeMap;

use crate::autodiff::Tensor;
use crate::corpus::{encode_utterance, EncodedSample, Label, PosTag, Utterance, Vocabulary};
use crate::error::{Error, Result};
use crate::models::ModelHandle;

/// One activation vector per utterance, rows aligned with `meta`.
#[derive(Debug, Clone)]
pub struct ActivationMatrix {
    pub rows: Tensor,
    pub meta: Vec<Utterance>,
}

const CAPTURE_CHUNK: usize = 128;

/// Encode each utterance, run eval-mode forwards, and stack the named
/// probe's outputs into one matrix.
pub fn capture_activations(
    model: &ModelHandle,
    utterances: &[Utterance],
    probe_name: &str,
    vocab: &Vocabulary,
    tagged: bool,
) -> Result<ActivationMatrix> {
    if utterances.is_empty() {
        return Err(Error::Precondition("no utterances to capture activations for".into()));
    }
    let samples: Vec<EncodedSample> = utterances
        .iter()
        .map(|u| encode_utterance(u, vocab, tagged, model.config.max_len()))
        .collect::<Result<_>>()?;
    let mut chunks = Vec::new();
    for chunk in samples.chunks(CAPTURE_CHUNK) {
        chunks.push(model.probe_activations(chunk, probe_name)?);
    }
    let dim = chunks[0].shape[1];
    let mut rows = Tensor::zeros(&[utterances.len(), dim]);
    let mut at = 0;
    for chunk in &chunks {
        for r in 0..chunk.shape[0] {
            rows.row_mut(at).copy_from_slice(chunk.row(r));
            at += 1;
        }
    }
    Ok(ActivationMatrix { rows, meta: utterances.to_vec() })
}

#[derive(Debug, Clone)]
pub struct ClusterPattern {
    pub cluster_id: usize,
    /// Majority true label of member utterances; ties go to Control.
    pub label: Label,
    /// Majority label's share of the cluster's members.
    pub share: f64,
    /// Tagged member utterances counted into the distribution.
    pub support: usize,
    pub total_tags: usize,
    /// Members skipped for missing POS tags.
    pub untagged_skipped: usize,
    /// Full tag distribution, descending frequency, ties lexicographic.
    /// Frequencies sum to 1 when any tags were counted.
    pub distribution: Vec<(PosTag, f64)>,
    /// Leading `top_k` entries of `distribution`.
    pub top_tags: Vec<(PosTag, f64)>,
}

pub const DEFAULT_TOP_K: usize = 4;

/// Per cluster: tag counts over member utterances scaled by the cluster's
/// total tag count.
pub fn cluster_pos_patterns(
    result: &KMeansResult,
    am: &ActivationMatrix,
    top_k: usize,
) -> Result<Vec<ClusterPattern>> {
    if result.assignment.len() != am.meta.len() {
        return Err(Error::Shape(format!(
            "assignment covers {} rows but the matrix has {}",
            result.assignment.len(),
            am.meta.len()
        )));
    }
    let k = result.centroids.shape[0];
    let mut patterns = Vec::with_capacity(k);
    for cluster_id in 0..k {
        let members: Vec<&Utterance> = result
            .assignment
            .iter()
            .zip(&am.meta)
            .filter(|(&c, _)| c == cluster_id)
            .map(|(_, u)| u)
            .collect();
        let ad = members.iter().filter(|u| u.label == Label::Ad).count();
        let (label, majority) = if 2 * ad > members.len() {
            (Label::Ad, ad)
        } else {
            (Label::Control, members.len() - ad)
        };
        let share = if members.is_empty() { 0.0 } else { majority as f64 / members.len() as f64 };

        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut support = 0;
        let mut untagged_skipped = 0;
        for u in &members {
            match &u.pos {
                Some(tags) => {
                    support += 1;
                    for t in tags {
                        *counts.entry(t.as_str()).or_default() += 1;
                    }
                }
                None => untagged_skipped += 1,
            }
        }
        let total_tags: usize = counts.values().sum();
        let mut distribution: Vec<(PosTag, f64)> = counts
            .iter()
            .map(|(&tag, &n)| Ok((PosTag::new(tag)?, n as f64 / total_tags as f64)))
            .collect::<Result<_>>()?;
        distribution.sort_by(|a, b| {
            b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.as_str().cmp(b.0.as_str()))
        });
        let top_tags = distribution.iter().take(top_k).cloned().collect();
        patterns.push(ClusterPattern {
            cluster_id,
            label,
            share,
            support,
            total_tags,
            untagged_skipped,
            distribution,
            top_tags,
        });
    }
    Ok(patterns)
}

/// One block per cluster: a header line and `tag,freq` rows at 4 d.p.
pub fn render_cluster_report(patterns: &[ClusterPattern]) -> String {
    let mut out = String::new();
    for p in patterns {
        out.push_str(&format!(
            "cluster {} label={} share={:.2} support={}\n",
            p.cluster_id,
            if p.label == Label::Ad { "AD" } else { "Control" },
            p.share,
            p.support
        ));
        for (tag, freq) in &p.top_tags {
            out.push_str(&format!("{},{freq:.4}\n", tag.as_str()));
        }
    }
    out
}
