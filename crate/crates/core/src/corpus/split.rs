use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeds;

use super::encode::EncodedSample;

/// Disjoint train/dev/test partition of encoded samples.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Vec<EncodedSample>,
    pub dev: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
    pub seed: u64,
}

fn check_ratios(ratios: (f64, f64, f64)) -> Result<()> {
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios must sum to 1, got {sum}")));
    }
    if ratios.0 <= 0.0 || ratios.1 < 0.0 || ratios.2 < 0.0 {
        return Err(Error::Config("split ratios must be nonnegative with positive train".into()));
    }
    Ok(())
}

/// Deterministic shuffle under the seed, then a contiguous partition with
/// floor-sized train and dev; the remainder goes to test.
pub fn split_corpus(
    samples: &[EncodedSample],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<CorpusSplit> {
    if samples.is_empty() {
        return Err(Error::Precondition("cannot split an empty sample set".into()));
    }
    check_ratios(ratios)?;
    let mut shuffled: Vec<EncodedSample> = samples.to_vec();
    let mut rng = seeds::substream(seed, "split");
    shuffled.shuffle(&mut rng);
    let n = shuffled.len();
    let n_train = (n as f64 * ratios.0).floor() as usize;
    let n_dev = (n as f64 * ratios.1).floor() as usize;
    let test = shuffled.split_off(n_train + n_dev);
    let dev = shuffled.split_off(n_train);
    Ok(CorpusSplit { train: shuffled, dev, test, seed })
}

/// Transcript-level variant: whole transcripts are shuffled and assigned to
/// one side, so no speaker appears in two subsets. Subset sizes then only
/// approximate the ratios.
pub fn split_corpus_by_transcript(
    samples: &[EncodedSample],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<CorpusSplit> {
    if samples.is_empty() {
        return Err(Error::Precondition("cannot split an empty sample set".into()));
    }
    check_ratios(ratios)?;
    let mut ids: Vec<String> = Vec::new();
    for s in samples {
        if !ids.contains(&s.source.transcript_id) {
            ids.push(s.source.transcript_id.clone());
        }
    }
    let mut rng = seeds::substream(seed, "split-transcript");
    ids.shuffle(&mut rng);
    let n = ids.len();
    let n_train = (n as f64 * ratios.0).floor() as usize;
    let n_dev = (n as f64 * ratios.1).floor() as usize;
    let bucket = |tid: &str| -> usize {
        let pos = ids.iter().position(|i| i == tid).unwrap();
        if pos < n_train {
            0
        } else if pos < n_train + n_dev {
            1
        } else {
            2
        }
    };
    let mut out = CorpusSplit { train: vec![], dev: vec![], test: vec![], seed };
    for s in samples {
        match bucket(&s.source.transcript_id) {
            0 => out.train.push(s.clone()),
            1 => out.dev.push(s.clone()),
            _ => out.test.push(s.clone()),
        }
    }
    Ok(out)
}
