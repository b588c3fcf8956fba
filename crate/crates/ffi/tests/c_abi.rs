//! Exercises the C ABI exactly as a foreign caller would: raw pointers,
//! error codes, and explicit frees.

use std::ffi::{CStr, CString};
use std::ptr;

use libc::c_char;

use adlens_ffi::*;

unsafe fn last_error() -> String {
    CStr::from_ptr(adlens_last_error_message()).to_string_lossy().into_owned()
}

#[test]
fn synthetic_corpus_train_evaluate_saliency_roundtrip() {
    unsafe {
        let mut corpus: *mut AdlensCorpus = ptr::null_mut();
        assert_eq!(adlens_corpus_synthetic(40, 0.5, 11, &mut corpus), ADLENS_OK);
        assert_eq!(adlens_corpus_num_transcripts(corpus), 40);
        assert!(adlens_corpus_num_utterances(corpus, 1) > 0);

        let mut opts = adlens_train_options_default(ADLENS_ARCH_CNN);
        opts.seed = 11;
        opts.max_epochs = 2;
        opts.patience = 1;
        opts.learning_rate = 0.005;
        opts.embed_dim = 16;
        opts.filters = 8;
        opts.vocab_max = 400;
        opts.max_len = 16;
        let mut model: *mut AdlensModel = ptr::null_mut();
        assert_eq!(adlens_train(corpus, &opts, &mut model), ADLENS_OK, "{}", last_error());

        let mut acc = -1.0;
        let mut base = -1.0;
        assert_eq!(adlens_evaluate(model, corpus, &mut acc, &mut base), ADLENS_OK);
        assert!((0.0..=1.0).contains(&acc));
        assert!((0.5..=1.0).contains(&base));

        let tid = CString::new("synth0000").unwrap();
        let mut text: *mut c_char = ptr::null_mut();
        assert_eq!(
            adlens_saliency_text(model, corpus, tid.as_ptr(), 0, &mut text),
            ADLENS_OK,
            "{}",
            last_error()
        );
        let rendered = CStr::from_ptr(text).to_string_lossy().into_owned();
        assert!(rendered.contains("synth0000_0"));
        adlens_string_free(text);

        adlens_model_free(model);
        adlens_corpus_free(corpus);
    }
}

#[test]
fn checkpoint_survives_save_and_load() {
    unsafe {
        let mut corpus: *mut AdlensCorpus = ptr::null_mut();
        assert_eq!(adlens_corpus_synthetic(30, 0.5, 5, &mut corpus), ADLENS_OK);
        let mut opts = adlens_train_options_default(ADLENS_ARCH_LSTM);
        opts.seed = 5;
        opts.max_epochs = 1;
        opts.patience = 0;
        opts.embed_dim = 12;
        opts.hidden = 8;
        opts.layers = 1;
        opts.vocab_max = 300;
        opts.max_len = 16;
        let mut model: *mut AdlensModel = ptr::null_mut();
        assert_eq!(adlens_train(corpus, &opts, &mut model), ADLENS_OK, "{}", last_error());

        let dir = tempfile::tempdir().unwrap();
        let cdir = CString::new(dir.path().join("ck").to_str().unwrap()).unwrap();
        assert_eq!(adlens_model_save(model, cdir.as_ptr()), ADLENS_OK, "{}", last_error());

        let mut reloaded: *mut AdlensModel = ptr::null_mut();
        assert_eq!(adlens_model_load(cdir.as_ptr(), &mut reloaded), ADLENS_OK, "{}", last_error());

        let mut acc1 = 0.0;
        let mut acc2 = 0.0;
        assert_eq!(adlens_evaluate(model, corpus, &mut acc1, ptr::null_mut()), ADLENS_OK);
        assert_eq!(adlens_evaluate(reloaded, corpus, &mut acc2, ptr::null_mut()), ADLENS_OK);
        assert_eq!(acc1.to_bits(), acc2.to_bits());

        adlens_model_free(model);
        adlens_model_free(reloaded);
        adlens_corpus_free(corpus);
    }
}

#[test]
fn errors_set_codes_and_messages() {
    unsafe {
        let mut corpus: *mut AdlensCorpus = ptr::null_mut();
        assert_eq!(adlens_corpus_load_dir(ptr::null(), &mut corpus), ADLENS_ERR_USAGE);
        assert!(last_error().contains("null"));

        let missing = CString::new("/nonexistent/adlens-test").unwrap();
        assert_eq!(adlens_corpus_load_dir(missing.as_ptr(), &mut corpus), ADLENS_ERR_DATA);

        let bad = CString::new("not a transcript").unwrap();
        assert_ne!(adlens_corpus_from_text(bad.as_ptr(), &mut corpus), ADLENS_OK);

        assert_eq!(adlens_corpus_synthetic(10, 0.5, 1, &mut corpus), ADLENS_OK);
        let opts = adlens_train_options_default(99);
        let mut model: *mut AdlensModel = ptr::null_mut();
        assert_eq!(adlens_train(corpus, &opts, &mut model), ADLENS_ERR_USAGE);
        assert!(last_error().contains("architecture"));

        // null model handle is a usage error, not a crash
        assert_eq!(
            adlens_evaluate(ptr::null(), corpus, ptr::null_mut(), ptr::null_mut()),
            ADLENS_ERR_USAGE
        );
        adlens_corpus_free(corpus);
        adlens_corpus_free(ptr::null_mut());
        adlens_model_free(ptr::null_mut());
        adlens_string_free(ptr::null_mut());
    }
}

#[test]
fn generated_header_declares_the_surface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/adlens.h"))
        .expect("header generated at build time");
    for name in [
        "adlens_corpus_load_dir",
        "adlens_corpus_synthetic",
        "adlens_train",
        "adlens_evaluate",
        "adlens_saliency_text",
        "adlens_last_error_message",
        "AdlensTrainOptions",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
