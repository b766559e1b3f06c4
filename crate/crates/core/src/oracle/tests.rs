use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use super::mock::{FnProvider, ScriptedProvider};
use super::*;

fn gen(prompt: &str) -> GenerationRequest {
    GenerationRequest {
        role: Role::Generator,
        prompt: prompt.into(),
        temperature: 0.0,
        max_tokens: 16,
    }
}

#[test]
fn scripted_hypothesis_reply() {
    let p = ScriptedProvider::new().when(&["action_hypotheses"], "action_hypotheses = [\"x\"]");
    let o = Oracle::with_provider(Arc::new(p));
    let r = o.generate(&gen("... action_hypotheses = [ ] ...")).unwrap();
    assert_eq!(r.text, "action_hypotheses = [\"x\"]");
}

#[test]
fn transport_errors_are_retried_three_times() {
    let n = Arc::new(AtomicU32::new(0));
    let n2 = n.clone();
    let p = FnProvider::new(move |_| {
        n2.fetch_add(1, Ordering::SeqCst);
        Err(ProviderError::Transport("boom".into()))
    });
    let o = Oracle::with_provider(Arc::new(p));
    let err = o.generate(&gen("hi")).unwrap_err();
    assert_eq!(
        err,
        OracleError::Transport {
            attempts: 3,
            message: "boom".into()
        }
    );
    assert_eq!(n.load(Ordering::SeqCst), 3);
}

#[test]
fn transient_failure_recovers() {
    let n = Arc::new(AtomicU32::new(0));
    let n2 = n.clone();
    let p = FnProvider::new(move |_| {
        if n2.fetch_add(1, Ordering::SeqCst) == 0 {
            Err(ProviderError::Transport("blip".into()))
        } else {
            Ok("ok".into())
        }
    });
    let o = Oracle::with_provider(Arc::new(p));
    assert_eq!(o.generate(&gen("hi")).unwrap().text, "ok");
}

#[test]
fn budget_and_empty_prompt_rejected() {
    let o = Oracle::builder()
        .all_roles(Arc::new(ScriptedProvider::new().otherwise("x")))
        .prompt_budget(5)
        .build();
    assert!(matches!(o.generate(&gen("too long")), Err(OracleError::BudgetExceeded { .. })));
    assert!(matches!(o.generate(&gen("  ")), Err(OracleError::EmptyInput(_))));
}

#[test]
fn gate_parse_is_tolerant_and_reprompts_once() {
    let o = Oracle::with_provider(Arc::new(ScriptedProvider::new().otherwise("Yes.")));
    assert_eq!(o.judge_gate_text("s", "q?").unwrap(), GateAnswer::Yes);

    let p = Arc::new(ScriptedProvider::new().otherwise("maybe"));
    let o = Oracle::with_provider(p.clone());
    let err = o.judge_gate_text("s", "q?").unwrap_err();
    assert!(matches!(err, OracleError::Protocol { ref task, .. } if task == "judge_gate"));
    assert_eq!(p.calls(), 2);

    // Second attempt succeeds.
    let p = ScriptedProvider::new()
        .when(&["previous reply could not be parsed"], "no")
        .otherwise("hmm");
    let o = Oracle::with_provider(Arc::new(p));
    assert_eq!(o.judge_gate_text("s", "q?").unwrap(), GateAnswer::No);
}

#[test]
fn relate_batch_length_checked() {
    let o = Oracle::with_provider(Arc::new(ScriptedProvider::new().otherwise("[\"contradicts\"]")));
    assert_eq!(o.relate_batch("G", "d", &["s"]).unwrap(), vec![EvidenceLabel::Con]);
    let o = Oracle::with_provider(Arc::new(
        ScriptedProvider::new().otherwise("[\"supports\",\"supports\",\"irrelevant\"]"),
    ));
    assert!(matches!(o.relate_batch("G", "d", &["a", "b"]), Err(OracleError::Protocol { .. })));
    assert!(matches!(o.relate_batch("G", "d", &[]), Err(OracleError::EmptyInput(_))));
}

#[test]
fn embed_contract() {
    let o = Oracle::with_provider(Arc::new(mock::HashEmbedder::new(16)));
    let v = o.embed(&["a b".into(), "c".into()], &EmbedLens::Plain).unwrap();
    assert_eq!(v.len(), 2);
    assert_eq!(v[0].dim(), 16);
    assert!(matches!(o.embed(&[], &EmbedLens::Plain), Err(OracleError::EmptyInput(_))));
}

#[test]
fn digest_ignores_field_order() {
    #[derive(Serialize)]
    struct A {
        x: u32,
        y: &'static str,
    }
    #[derive(Serialize)]
    struct B {
        y: &'static str,
        x: u32,
    }
    assert_eq!(digest("k", &A { x: 1, y: "z" }), digest("k", &B { y: "z", x: 1 }));
    assert_ne!(digest("k", &A { x: 1, y: "z" }), digest("k", &A { x: 2, y: "z" }));
}

#[test]
fn record_then_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let rec = Arc::new(Transcript::open(dir.path(), TranscriptMode::Record).unwrap());
    let o = Oracle::builder()
        .all_roles(Arc::new(ScriptedProvider::new().otherwise("recorded  text")))
        .transcript(rec.clone())
        .build();
    let first = o.generate(&gen("p1")).unwrap();
    let emb = o.embed(&["t".into()], &EmbedLens::SurfaceDecision).unwrap();
    assert_eq!(rec.live_calls(), 2);
    assert_eq!(rec.len(), 2);

    let rep = Arc::new(Transcript::open(dir.path(), TranscriptMode::Replay).unwrap());
    // No providers at all: replay must never go live.
    let o = Oracle::builder().transcript(rep.clone()).build();
    assert_eq!(o.generate(&gen("p1")).unwrap(), first);
    assert_eq!(o.embed(&["t".into()], &EmbedLens::SurfaceDecision).unwrap(), emb);
    assert!(matches!(o.generate(&gen("p2")), Err(OracleError::MissingTranscript { .. })));
    assert_eq!(rep.live_calls(), 0);
}
