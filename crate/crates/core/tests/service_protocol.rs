#![cfg(feature = "remote")]

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use cmrag_core::encoder::{AsrHandle, EncoderHandle};
use cmrag_core::pipeline::generate::Generator;
use cmrag_core::pipeline::prompt::{assemble_prompt, QuestionSlot};
use cmrag_core::pipeline::Mode;
use cmrag_core::service::{audio_request, ServiceClient};
use cmrag_core::types::{Lang, QueryRecord};
use cmrag_core::wire::*;
use cmrag_core::Error;
use common::{dead_url, serve, write_wav, Reply};
use serde_json::json;

const DIM: usize = 4;

/// Embeds text `i` as the one-hot-ish vector [len, 1, 0, 0] so order is observable.
fn encoder_stub() -> common::StubServer {
    serve(|req| match req.path.as_str() {
        INFO_PATH => Reply::json(json!({"dim": DIM, "models": {"text": "stub-text"}, "version": "0.1"})),
        ENCODE_TEXT_PATH => {
            let body: EncodeTextRequest = serde_json::from_value(req.json()).unwrap();
            let embeddings: Vec<Vec<f32>> =
                body.texts.iter().map(|t| vec![t.len() as f32, 1.0, 0.0, 0.0]).collect();
            Reply::json(json!({ "embeddings": embeddings }))
        }
        ENCODE_SPEECH_PATH => {
            let body: AudioRequest = serde_json::from_value(req.json()).unwrap();
            assert!(body.audio_b64.is_some());
            Reply::json(json!({"embedding": [0.0, 0.0, 1.0, 0.0]}))
        }
        _ => Reply::raw(404, "{}"),
    })
}

fn query(audio: Option<std::path::PathBuf>) -> QueryRecord {
    QueryRecord {
        id: "q1".into(),
        audio,
        transcript_oracle: "which team".into(),
        gold_answers: vec!["x".into()],
        gold_facts: vec![],
        lang: Lang::En,
    }
}

#[test]
fn handshake_sets_dimension_and_label() {
    let s = encoder_stub();
    let h = EncoderHandle::parse(&format!("remote:{}", s.url)).unwrap();
    assert_eq!(h.dim(), DIM);
    assert_eq!(h.label(), "stub-text");
    assert_eq!(s.log.lock().unwrap()[0], ("GET".to_string(), INFO_PATH.to_string()));
}

#[test]
fn text_batches_are_split_and_keep_order() {
    let s = encoder_stub();
    let h = EncoderHandle::parse(&format!("remote:{}", s.url)).unwrap();
    let texts: Vec<String> = (1..=70).map(|n| "a".repeat(n)).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let out = h.encode_text_batch(&refs, Lang::En).unwrap();
    assert_eq!(out.len(), 70);
    for (i, v) in out.iter().enumerate() {
        assert_eq!(v.values[0], (i + 1) as f32);
    }
    let posts = s.log.lock().unwrap().iter().filter(|(_, p)| p == ENCODE_TEXT_PATH).count();
    assert_eq!(posts, 3);
}

#[test]
fn wrong_dimension_is_rejected() {
    let s = serve(|req| match req.path.as_str() {
        INFO_PATH => Reply::json(json!({"dim": 8, "version": "0.1"})),
        _ => Reply::json(json!({"embeddings": [[1.0, 0.0, 0.0, 0.0]]})),
    });
    let h = EncoderHandle::parse(&format!("remote:{}", s.url)).unwrap();
    let err = h.encode_text_batch(&["x"], Lang::En).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { expected: 8, actual: 4 }), "{err:?}");
}

#[test]
fn embedding_count_mismatch_is_malformed() {
    let s = serve(|_| Reply::json(json!({"embeddings": [[1.0]]})));
    let c = ServiceClient::new(&s.url, Duration::from_secs(5)).unwrap();
    assert!(matches!(c.encode_text(&["a", "b"], Lang::En), Err(Error::MalformedResponse(_))));
}

#[test]
fn server_error_is_retried_once() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c2 = calls.clone();
    let s = serve(move |_| {
        if c2.fetch_add(1, Ordering::SeqCst) == 0 {
            Reply::raw(503, "busy")
        } else {
            Reply::json(json!({"embeddings": [[1.0, 2.0]]}))
        }
    });
    let c = ServiceClient::new(&s.url, Duration::from_secs(5)).unwrap();
    assert_eq!(c.encode_text(&["a"], Lang::En).unwrap(), vec![vec![1.0, 2.0]]);
    assert_eq!(calls.load(Ordering::SeqCst), 2);
}

#[test]
fn persistent_server_error_is_backend_unavailable() {
    let s = serve(|_| Reply::raw(500, "down"));
    let c = ServiceClient::new(&s.url, Duration::from_secs(5)).unwrap();
    assert!(matches!(c.encode_text(&["a"], Lang::En), Err(Error::BackendUnavailable(_))));
    assert_eq!(s.log.lock().unwrap().len(), 2);
}

#[test]
fn client_error_is_not_retried() {
    let s = serve(|_| Reply::raw(400, "bad lang"));
    let c = ServiceClient::new(&s.url, Duration::from_secs(5)).unwrap();
    assert!(matches!(c.encode_text(&["a"], Lang::En), Err(Error::MalformedResponse(_))));
    assert_eq!(s.log.lock().unwrap().len(), 1);
}

#[test]
fn speech_upload_carries_wav() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("q1.wav");
    write_wav(&wav, 0.25);
    let req = audio_request(&wav).unwrap();
    assert_eq!(req.sample_rate, 16_000);

    let s = encoder_stub();
    let h = EncoderHandle::parse(&format!("remote:{}", s.url)).unwrap();
    let v = h.encode_speech(&query(Some(wav))).unwrap();
    assert_eq!(v.values, vec![0.0, 0.0, 1.0, 0.0]);
}

#[test]
fn unreadable_or_missing_audio() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.wav");
    std::fs::write(&junk, b"not a wav").unwrap();
    assert!(matches!(audio_request(&junk), Err(Error::AudioUnreadable { .. })));
    assert!(matches!(audio_request(&dir.path().join("none.wav")), Err(Error::AudioUnreadable { .. })));

    let s = encoder_stub();
    let h = EncoderHandle::parse(&format!("remote:{}", s.url)).unwrap();
    assert!(matches!(h.encode_speech(&query(None)), Err(Error::MissingAudio(_))));
}

#[test]
fn remote_transcription() {
    let s = serve(|req| {
        assert_eq!(req.path, TRANSCRIBE_PATH);
        Reply::json(json!({"text": "which team", "elapsed_s": 0.2}))
    });
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("q.wav");
    write_wav(&wav, 0.1);
    let asr = AsrHandle::parse(&format!("remote:{}", s.url)).unwrap();
    let (text, secs) = asr.transcribe(&query(Some(wav))).unwrap();
    assert_eq!(text, "which team");
    assert!(secs >= 0.0);
}

#[test]
fn remote_generation_sends_prompt_frame() {
    let s = serve(|req| {
        let body: GenerateRequest = serde_json::from_value(req.json()).unwrap();
        assert_eq!(body.assistant_prefix, "streaming_transcription");
        assert!(body.human.contains("Context: ctx"));
        assert!(body.audio_b64.is_none());
        Reply::json(json!({"text": "Chief of Protocol", "elapsed_s": 1.5}))
    });
    let g = Generator::parse(&format!("remote:{}", s.url)).unwrap();
    let p = assemble_prompt(Mode::OracleRag, &QuestionSlot::Text("who".into()), &["ctx"]).unwrap();
    assert_eq!(g.generate(&p, None).unwrap().0, "Chief of Protocol");
}

#[test]
fn non_json_generation_is_malformed() {
    let s = serve(|_| Reply::raw(200, "<html>oops</html>"));
    let g = Generator::parse(&format!("remote:{}", s.url)).unwrap();
    let p = assemble_prompt::<&str>(Mode::NoRag, &QuestionSlot::Text("who".into()), &[]).unwrap();
    assert!(matches!(g.generate(&p, None), Err(Error::MalformedResponse(_))));
}

#[test]
fn slow_generation_times_out() {
    let s = serve(|_| Reply::json(json!({"text": "late", "elapsed_s": 0.0})).delayed(Duration::from_secs(2)));
    let g = Generator::remote(&s.url, Duration::from_millis(200)).unwrap();
    let p = assemble_prompt::<&str>(Mode::NoRag, &QuestionSlot::Text("who".into()), &[]).unwrap();
    assert!(matches!(g.generate(&p, None), Err(Error::BackendUnavailable(_))));
}

#[test]
fn dead_endpoint_is_backend_unavailable() {
    let c = ServiceClient::new(&dead_url(), Duration::from_secs(2)).unwrap();
    assert!(matches!(c.info(), Err(Error::BackendUnavailable(_))));
    assert!(matches!(ServiceClient::new("ftp://x", Duration::from_secs(1)), Err(Error::BadSpec { .. })));
    assert!(matches!(ServiceClient::new("https://x", Duration::from_secs(1)), Err(Error::BadSpec { .. })));
}
