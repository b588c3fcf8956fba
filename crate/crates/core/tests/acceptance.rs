//! End-to-end acceptance checks. Each test covers one numbered criterion and
//! prints a single pass line; a failed assertion keeps the line from
//! printing.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adlens::autodiff::{grad_check, PadMode, ParamSet, Tape, Tensor, VarId};
use adlens::corpus::{
    build_vocabulary, encode_utterance, extract_utterances, generate_synthetic_corpus, parse_chat,
    serialize_chat, split_corpus, EncodedSample, Gender, Label, Task, Utterance, Vocabulary,
    PAD_ID,
};
use adlens::interpret::{
    capture_activations, cluster_pos_patterns, kmeans_restarts, saliency, ActivationMatrix,
    KMeansResult, ScoreKind, KMEANS_MAX_ITER, KMEANS_TOL,
};
use adlens::models::{
    CnnConfig, CnnLstmConfig, LstmConfig, Mode, ModelConfig, ModelHandle, CLASSES,
};
use adlens::stats::{bootstrap_diff_test, gender_partition_downsample};
use adlens::training::{
    clip_global_norm, evaluate, majority_baseline, train, AdamState, TrainConfig,
};

fn pass(n: usize, what: &str) {
    println!("criterion {n} ({what}): pass");
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Like `rand_tensor` but with every coordinate at least 0.05 from zero, so
/// finite differences never straddle a relu kink.
fn rand_tensor_off_kink(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let mut t = rand_tensor(rng, shape);
    for v in &mut t.data {
        if v.abs() < 0.05 {
            *v += 0.1_f64.copysign(*v);
        }
    }
    t
}

/// Max relative finite-difference error for a scalar objective built on a
/// fresh tape from the given parameters.
fn fd_error<B>(params: &ParamSet, build: B, eps: f64) -> f64
where
    B: Fn(&mut Tape, &ParamSet) -> (BTreeMap<String, VarId>, VarId),
{
    let mut tape = Tape::new();
    let (ids, root) = build(&mut tape, params);
    tape.backward(root).unwrap();
    let mut analytic = ParamSet::new();
    for (name, &id) in &ids {
        analytic.insert(name, tape.grad(id));
    }
    grad_check(
        |p| {
            let mut t = Tape::new();
            let (_, r) = build(&mut t, p);
            Ok(t.value(r).data[0])
        },
        params,
        &analytic,
        eps,
    )
    .unwrap()
}

fn leaves(tape: &mut Tape, params: &ParamSet) -> BTreeMap<String, VarId> {
    params.iter().map(|(n, t)| (n.clone(), tape.leaf(t.clone()))).collect()
}

fn tiny_cnn(vocab: usize, max_len: usize) -> ModelConfig {
    ModelConfig::Cnn(CnnConfig {
        filter_sizes: vec![2, 3],
        filters_per_size: 3,
        embed_dim: 5,
        keep_prob: 0.8,
        vocab_size: vocab,
        max_len,
    })
}

fn tiny_lstm(vocab: usize, max_len: usize) -> ModelConfig {
    ModelConfig::Lstm(LstmConfig {
        layers: 2,
        hidden: 4,
        embed_dim: 5,
        keep_prob: 0.7,
        vocab_size: vocab,
        max_len,
    })
}

fn tiny_cnn_lstm(vocab: usize, max_len: usize) -> ModelConfig {
    ModelConfig::CnnLstm(CnnLstmConfig {
        filter_sizes: vec![2, 3],
        filters_per_size: 3,
        embed_dim: 5,
        lstm_hidden: 4,
        keep_prob: 0.65,
        vocab_size: vocab,
        max_len,
    })
}

fn sample(ids: &[usize], label: Label, gender: Gender, max_len: usize) -> EncodedSample {
    let true_length = ids.len();
    let mut padded = ids.to_vec();
    padded.resize(max_len, PAD_ID);
    EncodedSample {
        ids: padded,
        true_length,
        label,
        source: Utterance {
            transcript_id: "t".into(),
            index: 0,
            words: vec!["w".into(); true_length],
            pos: None,
            label,
            task: Task::Other,
            gender,
        },
    }
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, vocab: usize, max_len: usize) -> Vec<EncodedSample> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(3..=max_len);
            let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(2..vocab)).collect();
            let label = if rng.gen_bool(0.5) { Label::Ad } else { Label::Control };
            sample(&ids, label, Gender::Unknown, max_len)
        })
        .collect()
}

/// Full-model gradient check on a batch of 4 at a random point.
fn model_grad_error(config: ModelConfig, seed: u64) -> f64 {
    let m = ModelHandle::init(config.clone(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let batch = random_batch(&mut rng, 4, config.vocab_size(), config.max_len());
    let mut bl = m.batch_loss(&batch, Mode::Eval, None).unwrap();
    bl.pass.tape.backward(bl.loss_id).unwrap();
    let mut analytic = ParamSet::new();
    for (name, &id) in &bl.pass.param_ids {
        analytic.insert(name, bl.pass.tape.grad(id));
    }
    grad_check(
        |p| {
            let probe = ModelHandle { config: config.clone(), params: p.clone() };
            Ok(probe.batch_loss(&batch, Mode::Eval, None)?.loss)
        },
        &m.params,
        &analytic,
        // the difference-quotient roundoff scales as 1/eps; 1e-4 keeps it
        // well below the 1e-8 relative-error floor
        1e-4,
    )
    .unwrap()
}

#[test]
fn criterion_01_gradient_checks() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    // smooth primitives at eps 1e-5 must sit under 1e-5
    let smooth: Vec<(&str, f64)> = vec![
        ("embed_lookup", {
            let mut p = ParamSet::new();
            p.insert("table", rand_tensor(&mut rng, &[6, 4]));
            fd_error(
                &p,
                |t, p| {
                    let ids = leaves(t, p);
                    let out = t.embed_lookup(ids["table"], &[4, 1, 4, 2]).unwrap();
                    let root = t.sum_all(out);
                    (ids, root)
                },
                1e-5,
            )
        }),
        ("conv1d_valid", {
            let mut p = ParamSet::new();
            p.insert("x", rand_tensor(&mut rng, &[6, 3]));
            p.insert("f", rand_tensor(&mut rng, &[2, 3, 3]));
            p.insert("b", rand_tensor(&mut rng, &[2]));
            fd_error(
                &p,
                |t, p| {
                    let ids = leaves(t, p);
                    let out = t.conv1d(ids["x"], ids["f"], ids["b"], PadMode::Valid).unwrap();
                    let root = t.sum_all(out);
                    (ids, root)
                },
                1e-5,
            )
        }),
        ("conv1d_same", {
            let mut p = ParamSet::new();
            p.insert("x", rand_tensor(&mut rng, &[5, 2]));
            p.insert("f", rand_tensor(&mut rng, &[3, 4, 2]));
            p.insert("b", rand_tensor(&mut rng, &[3]));
            fd_error(
                &p,
                |t, p| {
                    let ids = leaves(t, p);
                    let out = t.conv1d(ids["x"], ids["f"], ids["b"], PadMode::Same).unwrap();
                    let root = t.sum_all(out);
                    (ids, root)
                },
                1e-5,
            )
        }),
        ("dense", {
            let mut p = ParamSet::new();
            p.insert("x", rand_tensor(&mut rng, &[4]));
            p.insert("w", rand_tensor(&mut rng, &[4, 3]));
            p.insert("b", rand_tensor(&mut rng, &[3]));
            fd_error(
                &p,
                |t, p| {
                    let ids = leaves(t, p);
                    let out = t.dense(ids["x"], ids["w"], ids["b"]).unwrap();
                    let root = t.sum_all(out);
                    (ids, root)
                },
                1e-5,
            )
        }),
        ("lstm_cell", {
            let mut p = ParamSet::new();
            p.insert("x", rand_tensor(&mut rng, &[3]));
            p.insert("h", rand_tensor(&mut rng, &[4]));
            p.insert("c", rand_tensor(&mut rng, &[4]));
            p.insert("wx", rand_tensor(&mut rng, &[3, 16]));
            p.insert("wh", rand_tensor(&mut rng, &[4, 16]));
            p.insert("b", rand_tensor(&mut rng, &[16]));
            fd_error(
                &p,
                |t, p| {
                    let ids = leaves(t, p);
                    let hc = t
                        .lstm_cell(ids["x"], ids["h"], ids["c"], ids["wx"], ids["wh"], ids["b"])
                        .unwrap();
                    let root = t.sum_all(hc);
                    (ids, root)
                },
                1e-5,
            )
        }),
        ("softmax_xent", {
            let mut p = ParamSet::new();
            p.insert("logits", rand_tensor(&mut rng, &[2]));
            fd_error(
                &p,
                |t, p| {
                    let ids = leaves(t, p);
                    let root = t.softmax_xent(ids["logits"], 1).unwrap();
                    (ids, root)
                },
                1e-5,
            )
        }),
        ("concat_slice_mask_row_select_mean", {
            let mut p = ParamSet::new();
            p.insert("a", rand_tensor(&mut rng, &[3]));
            p.insert("b", rand_tensor(&mut rng, &[4]));
            p.insert("m", rand_tensor(&mut rng, &[4, 2]));
            fd_error(
                &p,
                |t, p| {
                    let ids = leaves(t, p);
                    let cat = t.concat_vec(&[ids["a"], ids["b"]]).unwrap();
                    let sl = t.slice_vec(cat, 1, 4).unwrap();
                    let masked = t.apply_mask(sl, &[0.5, 2.0, 0.0, 1.0]).unwrap();
                    let s1 = t.sum_all(masked);
                    let row = t.row_of(ids["m"], 2).unwrap();
                    let picked = t.select(row, 1).unwrap();
                    let cols = t.concat_cols(&[ids["m"], ids["m"]]).unwrap();
                    let s2 = t.sum_all(cols);
                    let root = t.mean_of(&[s1, picked, s2]).unwrap();
                    (ids, root)
                },
                1e-5,
            )
        }),
    ];
    for (name, err) in &smooth {
        assert!(*err < 1e-5, "{name} fd error {err}");
    }

    // piecewise-linear primitives checked away from their kinks
    let piecewise: Vec<(&str, f64)> = vec![
        ("relu", {
            let mut p = ParamSet::new();
            p.insert("x", rand_tensor_off_kink(&mut rng, &[4, 3]));
            fd_error(
                &p,
                |t, p| {
                    let ids = leaves(t, p);
                    let out = t.relu(ids["x"]);
                    let root = t.sum_all(out);
                    (ids, root)
                },
                1e-5,
            )
        }),
        ("max_over_time", {
            let mut p = ParamSet::new();
            p.insert("x", rand_tensor(&mut rng, &[5, 4]));
            fd_error(
                &p,
                |t, p| {
                    let ids = leaves(t, p);
                    let out = t.max_over_time(ids["x"]).unwrap();
                    let root = t.sum_all(out);
                    (ids, root)
                },
                1e-5,
            )
        }),
    ];
    for (name, err) in &piecewise {
        assert!(*err < 1e-4, "{name} fd error {err}");
    }

    // all three full models on a batch of 4
    for (name, config) in [
        ("cnn", tiny_cnn(12, 8)),
        ("lstm", tiny_lstm(12, 8)),
        ("cnn_lstm", tiny_cnn_lstm(12, 8)),
    ] {
        let err = model_grad_error(config, 17);
        assert!(err < 1e-4, "{name} full-model fd error {err}");
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "gradient checks took {elapsed:.1}s");
    pass(1, "gradient checks");
}

#[test]
fn criterion_02_majority_baseline() {
    let mut labels = vec![Label::Ad; 11458];
    labels.extend(vec![Label::Control; 2904]);
    let acc = majority_baseline(&labels).unwrap();
    assert_eq!((acc * 1000.0).round() / 1000.0, 0.798);
    pass(2, "majority baseline");
}

fn synthetic_samples(
    tagged: bool,
    max_len: usize,
    vocab_max: usize,
) -> (Vec<EncodedSample>, Vocabulary) {
    // enough transcripts to yield 2000 utterances at roughly 7.5 per file
    let corpus = generate_synthetic_corpus(280, 0.67, 42).unwrap();
    let mut utterances = extract_utterances(&corpus, true);
    assert!(utterances.len() >= 2000, "only {} utterances", utterances.len());
    utterances.truncate(2000);
    let vocab = build_vocabulary(&utterances, vocab_max, tagged).unwrap();
    let samples = utterances
        .iter()
        .map(|u| encode_utterance(u, &vocab, tagged, max_len).unwrap())
        .collect();
    (samples, vocab)
}

fn run_synthetic(config: &ModelConfig, samples: &[EncodedSample], vocab_len: usize, seed: u64) -> f64 {
    assert_eq!(config.vocab_size(), vocab_len);
    let split = split_corpus(samples, (0.8, 0.1, 0.1), seed).unwrap();
    let cfg = TrainConfig {
        batch_size: 32,
        clip_norm: 2.0,
        lr: 0.005,
        max_epochs: 30,
        patience: 4,
        seed,
    };
    let model = ModelHandle::init(config.clone(), seed).unwrap();
    let (model, history) = train(model, &split.train, &split.dev, &cfg).unwrap();
    assert!(history.len() <= 30);
    evaluate(&model, &split.test).unwrap().accuracy
}

fn median3(mut xs: [f64; 3]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[1]
}

#[test]
fn criterion_03_synthetic_end_to_end() {
    let start = Instant::now();
    let (untagged, vocab_u) = synthetic_samples(false, 24, 800);
    let (tagged, vocab_t) = synthetic_samples(true, 48, 800);

    let cnn = ModelConfig::Cnn(CnnConfig {
        filter_sizes: vec![3, 4],
        filters_per_size: 16,
        embed_dim: 24,
        keep_prob: 0.8,
        vocab_size: vocab_u.len(),
        max_len: 24,
    });
    let hybrid = |vocab: usize, max_len: usize| {
        ModelConfig::CnnLstm(CnnLstmConfig {
            filter_sizes: vec![3, 4],
            filters_per_size: 16,
            embed_dim: 24,
            lstm_hidden: 32,
            keep_prob: 0.8,
            vocab_size: vocab,
            max_len,
        })
    };

    let mut acc_cnn = [0.0; 3];
    let mut acc_hybrid = [0.0; 3];
    let mut acc_hybrid_tagged = [0.0; 3];
    for (i, seed) in [1u64, 2, 3].into_iter().enumerate() {
        acc_cnn[i] = run_synthetic(&cnn, &untagged, vocab_u.len(), seed);
        acc_hybrid[i] = run_synthetic(&hybrid(vocab_u.len(), 24), &untagged, vocab_u.len(), seed);
        acc_hybrid_tagged[i] =
            run_synthetic(&hybrid(vocab_t.len(), 48), &tagged, vocab_t.len(), seed);
    }

    // the tagged hybrid must clear 90% and beat the majority baseline by
    // ten points on its own test split
    let split = split_corpus(&tagged, (0.8, 0.1, 0.1), 1).unwrap();
    let labels: Vec<Label> = split.test.iter().map(|s| s.label).collect();
    let baseline = majority_baseline(&labels).unwrap();
    assert!(
        acc_hybrid_tagged[0] >= 0.90,
        "tagged hybrid accuracy {}",
        acc_hybrid_tagged[0]
    );
    assert!(
        acc_hybrid_tagged[0] >= baseline + 0.10,
        "tagged hybrid {} vs baseline {baseline}",
        acc_hybrid_tagged[0]
    );

    let m_cnn = median3(acc_cnn);
    let m_hybrid = median3(acc_hybrid);
    let m_tagged = median3(acc_hybrid_tagged);
    assert!(
        m_cnn <= m_hybrid && m_hybrid <= m_tagged,
        "median ordering violated: cnn {m_cnn}, hybrid {m_hybrid}, tagged {m_tagged}"
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1200.0, "synthetic runs took {elapsed:.1}s");
    pass(3, "synthetic end to end");
}

#[test]
fn criterion_04_gradient_clipping() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for trial in 0..1000 {
        let mut grads = ParamSet::new();
        let n_tensors = rng.gen_range(1..=3);
        // scales spread across both sides of the clip threshold
        let scale = 10.0_f64.powf(rng.gen_range(-2.0..2.0));
        for j in 0..n_tensors {
            let len = rng.gen_range(1..=6);
            let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
            grads.insert(&format!("g{j}"), Tensor::vector(data));
        }
        let before: f64 = grads.iter().map(|(_, g)| g.sq_norm()).sum::<f64>().sqrt();
        let reported = clip_global_norm(&mut grads, 2.0).unwrap();
        assert_eq!(reported, before);
        let after: f64 = grads.iter().map(|(_, g)| g.sq_norm()).sum::<f64>().sqrt();
        assert!(after <= 2.0 + 1e-12, "trial {trial}: post-clip norm {after}");
        let expected = before.min(2.0);
        assert!(
            (after - expected).abs() <= 1e-12,
            "trial {trial}: norm {after} != min({before}, 2.0)"
        );
    }
    pass(4, "gradient clipping");
}

#[test]
fn criterion_05_adam_recurrence() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for trial in 0..100 {
        let len = rng.gen_range(1..=4);
        let init: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grads: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let lr = rng.gen_range(1e-4..1e-1);

        let mut params = ParamSet::new();
        params.insert("p", Tensor::vector(init.clone()));
        let mut adam = AdamState::new(&params);
        adam.lr = lr;
        for g in &grads {
            let mut gs = ParamSet::new();
            gs.insert("p", Tensor::vector(g.clone()));
            adam.step(&mut params, &gs).unwrap();
        }

        // independent scalar recurrence
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        for i in 0..len {
            let (mut p, mut m, mut v) = (init[i], 0.0, 0.0);
            for (t, g) in grads.iter().enumerate() {
                let t = (t + 1) as i32;
                m = b1 * m + (1.0 - b1) * g[i];
                v = b2 * v + (1.0 - b2) * g[i] * g[i];
                let m_hat = m / (1.0 - b1_pow(b1, t));
                let v_hat = v / (1.0 - b1_pow(b2, t));
                p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            let got = params.get("p").unwrap().data[i];
            assert!(
                (got - p).abs() <= 1e-12,
                "trial {trial} coord {i}: {got} vs {p}"
            );
        }
    }
    pass(5, "adam recurrence");
}

fn b1_pow(b: f64, t: i32) -> f64 {
    b.powi(t)
}

/// Exact within-cluster sum for a partition, with the same arithmetic order
/// the library uses: accumulate sums row by row, divide, then sum squared
/// distances row by row.
fn inertia_of(data: &Tensor, assignment: &[usize], k: usize) -> f64 {
    let (rows, dim) = (data.shape[0], data.shape[1]);
    let mut sums = Tensor::zeros(&[k, dim]);
    let mut counts = vec![0usize; k];
    for r in 0..rows {
        counts[assignment[r]] += 1;
        for (a, &b) in sums.row_mut(assignment[r]).iter_mut().zip(data.row(r)) {
            *a += b;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for v in sums.row_mut(c) {
                *v /= counts[c] as f64;
            }
        }
    }
    (0..rows)
        .map(|r| {
            data.row(r)
                .iter()
                .zip(sums.row(assignment[r]))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .sum()
}

#[test]
fn criterion_06_kmeans_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for trial in 0..50 {
        let rows = rng.gen_range(2..=8);
        let dim = rng.gen_range(1..=3);
        let data = rand_tensor(&mut rng, &[rows, dim]);

        // exhaustive optimum over all 2-colorings with both clusters nonempty
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << rows) - 1 {
            let assignment: Vec<usize> =
                (0..rows).map(|r| usize::from(mask >> r & 1 == 1)).collect();
            let inertia = inertia_of(&data, &assignment, 2);
            if inertia < best {
                best = inertia;
            }
        }

        let result = kmeans_restarts(&data, 2, trial as u64, 5, KMEANS_MAX_ITER, KMEANS_TOL).unwrap();
        let recomputed = inertia_of(&data, &result.assignment, 2);
        assert_eq!(
            recomputed, best,
            "trial {trial}: kmeans inertia {recomputed} vs optimum {best}"
        );
        for w in result.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "inertia increased: {} -> {}", w[0], w[1]);
        }
    }
    pass(6, "kmeans optimality");
}

fn tag_utterance(tags: &[(&str, usize)], label: Label, task: Task, idx: usize) -> Utterance {
    let pos: Vec<adlens::corpus::PosTag> = tags
        .iter()
        .flat_map(|(t, n)| std::iter::repeat(adlens::corpus::PosTag::new(t).unwrap()).take(*n))
        .collect();
    Utterance {
        transcript_id: "tab".into(),
        index: idx,
        words: vec!["w".into(); pos.len()],
        pos: Some(pos),
        label,
        task,
        gender: Gender::Unknown,
    }
}

#[test]
fn criterion_07_cluster_pos_patterns() {
    // one cluster carrying the reference AD tag profile: 20 nouns, 14
    // determiners, 5 adjectives, 4 adverbs, 57 spread thinly across other tags
    let mut tags: Vec<(&str, usize)> = vec![("n", 20), ("det", 14), ("adj", 5), ("adv", 4)];
    let fillers: Vec<String> = (0..19).map(|i| format!("t{i:02}")).collect();
    for f in &fillers {
        tags.push((f.as_str(), 3));
    }
    let meta = vec![tag_utterance(&tags, Label::Ad, Task::Other, 0)];
    let am = ActivationMatrix { rows: Tensor::zeros(&[1, 2]), meta };
    let result = KMeansResult {
        centroids: Tensor::zeros(&[1, 2]),
        assignment: vec![0],
        inertia: 0.0,
        iterations_run: 1,
        inertia_history: vec![0.0],
        seed: 0,
    };
    let patterns = cluster_pos_patterns(&result, &am, 4).unwrap();
    assert_eq!(patterns[0].label, Label::Ad);
    let top: Vec<(&str, f64)> =
        patterns[0].top_tags.iter().map(|(t, f)| (t.as_str(), *f)).collect();
    let expected = [("n", 0.20), ("det", 0.14), ("adj", 0.05), ("adv", 0.04)];
    for ((tag, freq), (etag, efreq)) in top.iter().zip(&expected) {
        assert_eq!(tag, etag);
        assert!((freq - efreq).abs() < 1e-9, "{tag}: {freq} vs {efreq}");
    }

    // synthetic Control/Cookie utterances: distributions sum to one and the
    // grammatical determiner-noun core dominates every cluster
    let corpus = generate_synthetic_corpus(60, 0.5, 9).unwrap();
    let pool: Vec<Utterance> = extract_utterances(&corpus, true)
        .into_iter()
        .filter(|u| u.label == Label::Control && u.task == Task::Cookie)
        .collect();
    assert!(pool.len() >= 10, "control cookie pool {}", pool.len());
    let vocab = build_vocabulary(&pool, 400, false).unwrap();
    let model = ModelHandle::init(tiny_cnn(vocab.len(), 16), 9).unwrap();
    let am = capture_activations(&model, &pool, "pooled", &vocab, false).unwrap();
    let result = kmeans_restarts(&am.rows, 2, 9, 5, KMEANS_MAX_ITER, KMEANS_TOL).unwrap();
    let patterns = cluster_pos_patterns(&result, &am, 4).unwrap();
    for p in &patterns {
        let total: f64 = p.distribution.iter().map(|(_, f)| f).sum();
        assert!((total - 1.0).abs() < 1e-9, "distribution sums to {total}");
        let top: Vec<&str> = p.top_tags.iter().map(|(t, _)| t.as_str()).collect();
        assert!(top.contains(&"n"), "cluster {} top tags {top:?}", p.cluster_id);
        assert!(top.contains(&"det"), "cluster {} top tags {top:?}", p.cluster_id);
    }
    pass(7, "cluster pos patterns");
}

fn word_pool() -> Vec<String> {
    (0..60).map(|i| format!("word{i:02}")).collect()
}

fn distinct_word_utterance(rng: &mut ChaCha8Rng, pool: &[String], idx: usize) -> Utterance {
    let len = rng.gen_range(4..=8);
    let mut words: Vec<String> = pool.to_vec();
    words.shuffle(rng);
    words.truncate(len);
    Utterance {
        transcript_id: "s".into(),
        index: idx,
        words,
        pos: None,
        label: Label::Control,
        task: Task::Other,
        gender: Gender::Unknown,
    }
}

fn extend_max_len(config: &ModelConfig, max_len: usize) -> ModelConfig {
    match config {
        ModelConfig::Cnn(c) => ModelConfig::Cnn(CnnConfig { max_len, ..c.clone() }),
        ModelConfig::Lstm(c) => ModelConfig::Lstm(LstmConfig { max_len, ..c.clone() }),
        ModelConfig::CnnLstm(c) => ModelConfig::CnnLstm(CnnLstmConfig { max_len, ..c.clone() }),
    }
}

#[test]
fn criterion_08_saliency() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let pool = word_pool();
    let utterances: Vec<Utterance> =
        (0..100).map(|i| distinct_word_utterance(&mut rng, &pool, i)).collect();
    let vocab = build_vocabulary(&utterances, 400, false).unwrap();

    // zero output layer kills every gradient path to the logits
    for config in [
        tiny_cnn(vocab.len(), 16),
        tiny_lstm(vocab.len(), 16),
        tiny_cnn_lstm(vocab.len(), 16),
    ] {
        let mut m = ModelHandle::init(config, 2).unwrap();
        let shape = m.params.get("out.w").unwrap().shape.clone();
        m.params.insert("out.w", Tensor::zeros(&shape));
        m.params.insert("out.b", Tensor::zeros(&[CLASSES]));
        let map = saliency(&m, &utterances[0], &vocab, false, ScoreKind::L2, None).unwrap();
        assert!(map.entries.iter().all(|e| e.score == 0.0));
    }

    // directional finite differences on 100 random utterances
    let m = ModelHandle::init(tiny_lstm(vocab.len(), 16), 3).unwrap();
    let mut checked = 0usize;
    for u in &utterances {
        let map = saliency(&m, u, &vocab, false, ScoreKind::L2, None).unwrap();
        let target = map.target_class;
        let s = encode_utterance(u, &vocab, false, m.config.max_len()).unwrap();
        let logit_of = |model: &ModelHandle| {
            model.forward(std::slice::from_ref(&s), Mode::Eval, None).unwrap().logits()[0][target]
        };
        let mut pass_ = m.forward(std::slice::from_ref(&s), Mode::Eval, None).unwrap();
        let score_id = pass_.tape.select(pass_.logit_ids[0], target).unwrap();
        pass_.tape.backward(score_id).unwrap();
        let grad = pass_.tape.grad(pass_.embed_ids[0]);
        let base = logit_of(&m);
        for (pos, entry) in map.entries.iter().enumerate() {
            if entry.score < 1e-6 {
                continue;
            }
            let row = grad.row(pos).to_vec();
            let norm = row.iter().map(|g| g * g).sum::<f64>().sqrt();
            let mut perturbed = m.clone();
            let table = perturbed.params.get_mut("embed").unwrap();
            for (d, g) in row.iter().enumerate() {
                table.row_mut(s.ids[pos])[d] += 1e-4 * g / norm;
            }
            let delta = logit_of(&perturbed) - base;
            let predicted = entry.score * 1e-4;
            assert!(
                (delta - predicted).abs() <= 0.05 * predicted.abs(),
                "{}:{pos}: delta {delta}, predicted {predicted}",
                u.index
            );
            checked += 1;
        }
    }
    assert!(checked >= 100, "only {checked} positions checked");

    // extending max_len only adds PAD, which the recurrent paths never read
    for config in [tiny_lstm(vocab.len(), 16), tiny_cnn_lstm(vocab.len(), 16)] {
        let m = ModelHandle::init(config.clone(), 4).unwrap();
        let wide = ModelHandle { config: extend_max_len(&config, 32), params: m.params.clone() };
        for u in utterances.iter().take(10) {
            let a = saliency(&m, u, &vocab, false, ScoreKind::L2, None).unwrap();
            let b = saliency(&wide, u, &vocab, false, ScoreKind::L2, None).unwrap();
            assert_eq!(a.entries.len(), b.entries.len());
            for (ea, eb) in a.entries.iter().zip(&b.entries) {
                assert_eq!(ea.score.to_bits(), eb.score.to_bits(), "map changed under PAD");
            }
        }
    }
    pass(8, "saliency");
}

#[test]
fn criterion_09_bootstrap() {
    // identical outcomes: the observed diff is zero, every resample is at
    // least as extreme
    let same = vec![1u8, 0, 1, 1, 0, 1, 1, 0];
    let r = bootstrap_diff_test(&same, &same, 1000, 1).unwrap();
    assert_eq!(r.p_value, 1.0);

    // perfect vs zero: no resampled diff can be recentred past the observed
    let r = bootstrap_diff_test(&[1; 12], &[0; 12], 1000, 2).unwrap();
    assert_eq!(r.observed_diff, 1.0);
    assert_eq!(r.p_value, 1.0 / 1000.0);

    // n_a = n_b = 4: exhaustive enumeration over all 4^4 x 4^4 index draws
    let a = [1u8, 1, 1, 0];
    let b = [1u8, 0, 0, 0];
    let mean = |xs: &[u8]| xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64;
    let observed = mean(&a) - mean(&b);
    let mut extreme = 0u64;
    let mut total = 0u64;
    for am in 0..256u32 {
        let sa: u32 = (0..4).map(|i| a[(am as usize >> (2 * i)) & 3] as u32).sum();
        for bm in 0..256u32 {
            let sb: u32 = (0..4).map(|i| b[(bm as usize >> (2 * i)) & 3] as u32).sum();
            let diff = sa as f64 / 4.0 - sb as f64 / 4.0;
            if (diff - observed).abs() >= observed.abs() {
                extreme += 1;
            }
            total += 1;
        }
    }
    let exact = extreme as f64 / total as f64;
    let r = bootstrap_diff_test(&a, &b, 20000, 3).unwrap();
    assert!(
        (r.p_value - exact).abs() <= 0.02,
        "bootstrap p {} vs exact {exact}",
        r.p_value
    );
    pass(9, "bootstrap");
}

fn adlens_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adlens"))
}

fn run_ok(cmd: &mut Command) {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn criterion_10_gender_protocol() {
    // matched downsampling across 100 seeded pools
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for seed in 0..100u64 {
        let mut pool = Vec::new();
        let ad_m = rng.gen_range(3..10);
        let c_m = rng.gen_range(3..10);
        for _ in 0..ad_m {
            pool.push(sample(&[2, 3], Label::Ad, Gender::Male, 8));
        }
        for _ in 0..c_m {
            pool.push(sample(&[2, 3], Label::Control, Gender::Male, 8));
        }
        for _ in 0..ad_m + rng.gen_range(1..8) {
            pool.push(sample(&[2, 3], Label::Ad, Gender::Female, 8));
        }
        for _ in 0..c_m + rng.gen_range(1..8) {
            pool.push(sample(&[2, 3], Label::Control, Gender::Female, 8));
        }
        let subsets = gender_partition_downsample(&pool, seed).unwrap();
        assert_eq!(subsets.female_downsampled.len(), subsets.male.len());
        let ratio = |xs: &[EncodedSample]| {
            xs.iter().filter(|s| s.label == Label::Ad).count() as f64 / xs.len() as f64
        };
        let diff = (ratio(&subsets.female_downsampled) - ratio(&subsets.male)).abs();
        assert!(diff <= 1.0 / subsets.male.len() as f64, "seed {seed}: ratio diff {diff}");
    }

    // the full command end to end on a female-rich synthetic corpus
    let dir = tempfile::tempdir().unwrap();
    run_ok(adlens_bin().args([
        "synth",
        "--out",
        dir.path().to_str().unwrap(),
        "--n",
        "80",
        "--ad-fraction",
        "0.6",
        "--seed",
        "7",
    ]));
    let corpus = dir.path().join("synth");
    let out = dir.path().join("g");
    run_ok(adlens_bin().args([
        "gender",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--arch",
        "cnn",
        "--seed",
        "3",
        "--epochs",
        "2",
        "--patience",
        "1",
        "--lr",
        "0.005",
        "--embed-dim",
        "16",
        "--filters",
        "8",
        "--filter-sizes",
        "2,3",
        "--vocab-max",
        "400",
        "--mode",
        "eval-shared",
        "--n-resamples",
        "200",
    ]));
    let report = std::fs::read_to_string(out.join("gender").join("report.txt")).unwrap();
    let line = report.lines().next().unwrap();
    let fields: BTreeMap<&str, &str> =
        line.split_whitespace().filter_map(|t| t.split_once('=')).collect();
    for key in ["male_acc", "female_acc", "diff", "p", "n_resamples", "seed", "mode"] {
        assert!(fields.contains_key(key), "missing {key} in `{line}`");
    }
    let p: f64 = fields["p"].parse().unwrap();
    assert!((0.0..=1.0).contains(&p));
    let male: f64 = fields["male_acc"].parse().unwrap();
    assert!((0.0..=1.0).contains(&male));
    assert_eq!(fields["n_resamples"], "200");
    pass(10, "gender protocol");
}

#[test]
fn criterion_11_chat_round_trip() {
    let corpus = generate_synthetic_corpus(1000, 0.5, 11).unwrap();
    assert_eq!(corpus.len(), 1000);
    for t in &corpus {
        let text = serialize_chat(t);
        let back = parse_chat(&text).unwrap();
        assert_eq!(&back, t, "round trip changed {}", t.id);
    }

    // a %mor tier that does not align word-for-word yields no POS and the
    // utterance drops out of tagged extraction
    let text = "@Begin\n@ID:\ten|bad0|PAR|0;|female|Control|Cookie\n\
                *PAR:\tthe boy falls .\n%mor:\tdet|the n|boy .\n@End\n";
    let t = parse_chat(text).unwrap();
    assert_eq!(t.utterances.len(), 1);
    assert!(t.utterances[0].pos.is_none());
    assert!(extract_utterances(&[t.clone()], true).is_empty());
    assert_eq!(extract_utterances(&[t], false).len(), 1);
    pass(11, "chat round trip");
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_str().unwrap().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn assert_identical_trees(a: &Path, b: &Path) {
    let ta = read_tree(a);
    let tb = read_tree(b);
    let names_a: Vec<&String> = ta.keys().collect();
    let names_b: Vec<&String> = tb.keys().collect();
    assert_eq!(names_a, names_b, "file sets differ between {a:?} and {b:?}");
    for (name, bytes) in &ta {
        assert_eq!(bytes, &tb[name], "{name} differs between {a:?} and {b:?}");
    }
}

#[test]
fn criterion_12_deterministic_reruns() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(adlens_bin().args([
        "synth",
        "--out",
        dir.path().to_str().unwrap(),
        "--n",
        "80",
        "--ad-fraction",
        "0.6",
        "--seed",
        "7",
    ]));
    let corpus = dir.path().join("synth");
    let corpus = corpus.to_str().unwrap();

    let model_args = [
        "--arch",
        "cnn",
        "--seed",
        "5",
        "--epochs",
        "2",
        "--patience",
        "1",
        "--lr",
        "0.005",
        "--embed-dim",
        "16",
        "--filters",
        "8",
        "--filter-sizes",
        "2,3",
        "--vocab-max",
        "400",
    ];

    for run in ["a", "b"] {
        let out = dir.path().join(format!("train_{run}"));
        run_ok(
            adlens_bin()
                .args(["train", "--corpus", corpus, "--out", out.to_str().unwrap()])
                .args(model_args),
        );
    }
    assert_identical_trees(&dir.path().join("train_a"), &dir.path().join("train_b"));

    let checkpoint = dir.path().join("train_a").join("train").join("checkpoint");
    let checkpoint = checkpoint.to_str().unwrap();
    for run in ["a", "b"] {
        let out = dir.path().join(format!("cluster_{run}"));
        run_ok(adlens_bin().args([
            "cluster",
            "--corpus",
            corpus,
            "--checkpoint",
            checkpoint,
            "--out",
            out.to_str().unwrap(),
            "--k",
            "3",
            "--restarts",
            "2",
            "--seed",
            "5",
        ]));
    }
    assert_identical_trees(&dir.path().join("cluster_a"), &dir.path().join("cluster_b"));

    for run in ["a", "b"] {
        let out = dir.path().join(format!("saliency_{run}"));
        run_ok(adlens_bin().args([
            "saliency",
            "--corpus",
            corpus,
            "--checkpoint",
            checkpoint,
            "--out",
            out.to_str().unwrap(),
            "--ids",
            "synth0000:0,synth0001:0",
        ]));
    }
    assert_identical_trees(&dir.path().join("saliency_a"), &dir.path().join("saliency_b"));

    for run in ["a", "b"] {
        let out = dir.path().join(format!("gender_{run}"));
        run_ok(
            adlens_bin()
                .args(["gender", "--corpus", corpus, "--out", out.to_str().unwrap()])
                .args(model_args)
                .args(["--mode", "eval-shared", "--n-resamples", "200"]),
        );
    }
    assert_identical_trees(&dir.path().join("gender_a"), &dir.path().join("gender_b"));
    pass(12, "deterministic reruns");
}
