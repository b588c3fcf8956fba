//! Gender-split evaluation support: matched downsampling of the female
//! subset and a bootstrap test on per-sample correctness.

use crate::corpus::{EncodedSample, Gender, Label};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone)]
pub struct GenderSubsets {
    pub male: Vec<EncodedSample>,
    /// Seeded per-class draw from the female pool matching the male subset's
    /// size and class ratio exactly.
    pub female_downsampled: Vec<EncodedSample>,
    pub seed: u64,
}

impl GenderSubsets {
    pub fn class_counts(samples: &[EncodedSample]) -> (usize, usize) {
        let ad = samples.iter().filter(|s| s.label == Label::Ad).count();
        (ad, samples.len() - ad)
    }
}

fn draw_class(
    pool: &[&EncodedSample],
    want: usize,
    class: Label,
    rng: &mut impl rand::Rng,
) -> Result<Vec<EncodedSample>> {
    if pool.len() < want {
        return Err(Error::Insufficient(format!(
            "female pool too small for class {}: need {want}, have {}",
            class.as_str(),
            pool.len()
        )));
    }
    let idx = rand::seq::index::sample(rng, pool.len(), want);
    let mut drawn: Vec<usize> = idx.into_vec();
    drawn.sort_unstable();
    Ok(drawn.into_iter().map(|i| pool[i].clone()).collect())
}

/// Split by gender and downsample the female side per class so both subsets
/// have identical size and AD:Control ratio.
pub fn gender_partition_downsample(samples: &[EncodedSample], seed: u64) -> Result<GenderSubsets> {
    let male: Vec<EncodedSample> = samples
        .iter()
        .filter(|s| s.source.gender == Gender::Male)
        .cloned()
        .collect();
    let female: Vec<&EncodedSample> =
        samples.iter().filter(|s| s.source.gender == Gender::Female).collect();
    let (male_ad, male_control) = GenderSubsets::class_counts(&male);
    if male_ad == 0 || male_control == 0 || female.is_empty() {
        return Err(Error::Precondition(
            "gender protocol needs male samples of both classes and a female pool".into(),
        ));
    }
    let female_ad: Vec<&EncodedSample> =
        female.iter().filter(|s| s.label == Label::Ad).copied().collect();
    let female_control: Vec<&EncodedSample> =
        female.iter().filter(|s| s.label == Label::Control).copied().collect();
    let mut rng = seeds::substream(seed, "gender");
    let mut female_downsampled = draw_class(&female_ad, male_ad, Label::Ad, &mut rng)?;
    female_downsampled.extend(draw_class(&female_control, male_control, Label::Control, &mut rng)?);
    Ok(GenderSubsets { male, female_downsampled, seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// mean(a) − mean(b) on the original outcome sequences.
    pub observed_diff: f64,
    pub p_value: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

/// Two-sided recentred bootstrap on 0/1 outcome sequences: resample each
/// side with replacement at its own size and count resampled diffs at least
/// as far from the observed diff as the observed diff is from zero.
pub fn bootstrap_diff_test(
    correct_a: &[u8],
    correct_b: &[u8],
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if correct_a.is_empty() || correct_b.is_empty() {
        return Err(Error::Precondition("bootstrap needs nonempty outcome sequences".into()));
    }
    if n_resamples < 100 {
        return Err(Error::Config(format!(
            "n_resamples must be at least 100, got {n_resamples}"
        )));
    }
    let mean = |xs: &[u8]| xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64;
    let observed = mean(correct_a) - mean(correct_b);
    let mut rng = seeds::substream(seed, "bootstrap");
    let mut extreme = 0usize;
    let resample_mean = |xs: &[u8], rng: &mut rand_chacha::ChaCha8Rng| {
        let mut sum = 0u64;
        for _ in 0..xs.len() {
            sum += xs[rand::Rng::gen_range(rng, 0..xs.len())] as u64;
        }
        sum as f64 / xs.len() as f64
    };
    for _ in 0..n_resamples {
        let diff = resample_mean(correct_a, &mut rng) - resample_mean(correct_b, &mut rng);
        if (diff - observed).abs() >= observed.abs() {
            extreme += 1;
        }
    }
    let raw = extreme as f64 / n_resamples as f64;
    let p_value = raw.clamp(1.0 / n_resamples as f64, 1.0);
    Ok(BootstrapResult { observed_diff: observed, p_value, n_resamples, seed })
}

#[cfg(test)]
mod tests;
