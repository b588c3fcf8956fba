use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EncodedSample, Gender, Label, Task, Utterance, PAD_ID};

use super::*;

fn sample(label: Label, gender: Gender, index: usize) -> EncodedSample {
    EncodedSample {
        ids: vec![2, 3, PAD_ID, PAD_ID],
        true_length: 2,
        label,
        source: Utterance {
            transcript_id: "t".into(),
            index,
            words: vec!["a".into(), "b".into()],
            pos: None,
            label,
            task: Task::Other,
            gender,
        },
    }
}

fn pool(male_ad: usize, male_c: usize, female_ad: usize, female_c: usize) -> Vec<EncodedSample> {
    let mut out = Vec::new();
    let mut idx = 0;
    let mut push = |n: usize, label, gender, out: &mut Vec<EncodedSample>| {
        for _ in 0..n {
            out.push(sample(label, gender, idx));
            idx += 1;
        }
    };
    push(male_ad, Label::Ad, Gender::Male, &mut out);
    push(male_c, Label::Control, Gender::Male, &mut out);
    push(female_ad, Label::Ad, Gender::Female, &mut out);
    push(female_c, Label::Control, Gender::Female, &mut out);
    out
}

#[test]
fn downsample_matches_male_class_counts_exactly() {
    let subsets = gender_partition_downsample(&pool(40, 10, 200, 60), 7).unwrap();
    assert_eq!(subsets.male.len(), 50);
    assert_eq!(subsets.female_downsampled.len(), 50);
    assert_eq!(GenderSubsets::class_counts(&subsets.female_downsampled), (40, 10));
}

#[test]
fn matched_pools_keep_their_counts() {
    let subsets = gender_partition_downsample(&pool(12, 8, 12, 8), 3).unwrap();
    assert_eq!(GenderSubsets::class_counts(&subsets.female_downsampled), (12, 8));
}

#[test]
fn ratio_matches_within_one_sample_over_many_seeds() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for seed in 0..100 {
        let male_ad = rng.gen_range(5..30);
        let male_c = rng.gen_range(5..30);
        let samples = pool(male_ad, male_c, male_ad + rng.gen_range(0..40), male_c + rng.gen_range(0..40));
        let subsets = gender_partition_downsample(&samples, seed).unwrap();
        assert_eq!(subsets.female_downsampled.len(), subsets.male.len());
        let n = subsets.male.len() as f64;
        let (m_ad, _) = GenderSubsets::class_counts(&subsets.male);
        let (f_ad, _) = GenderSubsets::class_counts(&subsets.female_downsampled);
        assert!((m_ad as f64 / n - f_ad as f64 / n).abs() <= 1.0 / n);
    }
}

#[test]
fn insufficient_female_pool_reports_counts() {
    let err = gender_partition_downsample(&pool(40, 10, 12, 60), 7).unwrap_err();
    assert!(matches!(err, crate::Error::Insufficient(_)));
    let msg = err.to_string();
    assert!(msg.contains("need 40") && msg.contains("have 12"), "{msg}");
}

#[test]
fn missing_gender_or_class_is_a_precondition_error() {
    assert!(gender_partition_downsample(&pool(0, 10, 5, 5), 1).is_err());
    assert!(gender_partition_downsample(&pool(5, 5, 0, 0), 1).is_err());
}

#[test]
fn downsample_is_deterministic_under_seed() {
    let samples = pool(10, 5, 40, 20);
    let a = gender_partition_downsample(&samples, 9).unwrap();
    let b = gender_partition_downsample(&samples, 9).unwrap();
    let ids = |s: &GenderSubsets| {
        s.female_downsampled.iter().map(|x| x.source.index).collect::<Vec<_>>()
    };
    assert_eq!(ids(&a), ids(&b));
}

#[test]
fn identical_sequences_give_p_one() {
    let a = vec![1, 0, 1, 1, 0, 1];
    let r = bootstrap_diff_test(&a, &a, 1000, 5).unwrap();
    assert_eq!(r.observed_diff, 0.0);
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn perfect_separation_gives_minimal_p() {
    let a = vec![1u8; 50];
    let b = vec![0u8; 50];
    let r = bootstrap_diff_test(&a, &b, 10_000, 5).unwrap();
    assert_eq!(r.observed_diff, 1.0);
    assert_eq!(r.p_value, 1.0 / 10_000.0);
}

#[test]
fn too_few_resamples_rejected() {
    assert!(matches!(
        bootstrap_diff_test(&[1, 0], &[0, 1], 99, 1),
        Err(crate::Error::Config(_))
    ));
}

#[test]
fn deterministic_under_seed() {
    let a = vec![1, 1, 0, 1, 0, 1, 1, 0];
    let b = vec![0, 1, 0, 1, 1, 0, 0, 0];
    let r1 = bootstrap_diff_test(&a, &b, 2000, 77).unwrap();
    let r2 = bootstrap_diff_test(&a, &b, 2000, 77).unwrap();
    assert_eq!(r1, r2);
}

/// For n_a = n_b = 4, the bootstrap distribution is exactly enumerable:
/// 4^4 equally likely resamples per side.
#[test]
fn small_case_matches_exhaustive_enumeration() {
    let a: Vec<u8> = vec![1, 1, 1, 0];
    let b: Vec<u8> = vec![1, 0, 0, 0];
    let mean = |xs: &[u8]| xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64;
    let observed = mean(&a) - mean(&b);

    let side_means = |xs: &[u8]| -> Vec<f64> {
        let n = xs.len();
        let mut out = Vec::with_capacity(n.pow(n as u32));
        for code in 0..n.pow(n as u32) {
            let mut c = code;
            let mut sum = 0u32;
            for _ in 0..n {
                sum += xs[c % n] as u32;
                c /= n;
            }
            out.push(sum as f64 / n as f64);
        }
        out
    };
    let ma = side_means(&a);
    let mb = side_means(&b);
    let mut extreme = 0usize;
    for &x in &ma {
        for &y in &mb {
            if (x - y - observed).abs() >= observed.abs() {
                extreme += 1;
            }
        }
    }
    let exact = extreme as f64 / (ma.len() * mb.len()) as f64;

    let r = bootstrap_diff_test(&a, &b, 10_000, 13).unwrap();
    assert!((r.p_value - exact).abs() <= 0.02, "exact {exact}, bootstrap {}", r.p_value);
}
