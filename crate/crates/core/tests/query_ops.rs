use sciex_core::corpus::ParagraphId;
use sciex_core::query::{answer, is_refusal, StubLlm, StubMode, REFUSAL_SENTINEL};

fn passages(n: usize) -> Vec<(String, Option<ParagraphId>)> {
    (0..n)
        .map(|i| (format!("passage number {i}"), Some(ParagraphId::new(format!("p{i}")))))
        .collect()
}

#[test]
fn sentinel_stub_is_refused() {
    let stub = StubLlm::new(StubMode::Refuse);
    let a = answer("what sensor?", passages(2), &stub).unwrap();
    assert!(a.refused && !a.local_refusal);
    assert_eq!(a.text, REFUSAL_SENTINEL);
    assert_eq!(stub.calls(), 1);
}

#[test]
fn echo_stub_returns_first_passage_with_k_citations() {
    let stub = StubLlm::new(StubMode::EchoFirstPassage);
    let a = answer("what sensor?", passages(5), &stub).unwrap();
    assert_eq!(a.text, "passage number 0");
    assert_eq!(a.used_passages.len(), 5);
    let ids: Vec<_> = a.used_passages.iter().map(|p| p.paragraph_id.clone().unwrap()).collect();
    assert_eq!(ids, passages(5).into_iter().map(|p| p.1.unwrap()).collect::<Vec<_>>());
}

#[test]
fn zero_passages_never_call_provider() {
    let stub = StubLlm::new(StubMode::EchoFirstPassage);
    let a = answer("what sensor?", vec![], &stub).unwrap();
    assert!(a.refused && a.local_refusal);
    assert!(a.used_passages.is_empty());
    assert_eq!(stub.calls(), 0);
}

#[test]
fn lenient_sentinel_matching() {
    assert!(is_refusal("I cannot answer that."));
    assert!(is_refusal("I CANNOT ANSWER THAT"));
    assert!(!is_refusal("The answer is a thermistor."));
}
