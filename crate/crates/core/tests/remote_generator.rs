use std::sync::Arc;
use std::time::Duration;

use proofsynth::dataset::tokenize;
use proofsynth::generator::{
    GenerateRequest, GenerateResponse, GeneratorError, MockEntry, MockGenerator, ProofGenerator, Recall, RemoteGenerator,
    RepairSkill, SamplingParams, Temperature,
};

/// Serve `POST /generate` from a mock; statements containing `boom` get a
/// 500, `short` gets one sample too few.
fn serve(mock: Arc<MockGenerator>) -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", server.server_addr().to_ip().unwrap());
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let r: GenerateRequest = serde_json::from_str(&body).unwrap();
            let (code, resp) = if req.url() != "/generate" {
                (404, GenerateResponse { samples: None, error: Some("not found".into()) })
            } else if r.input_text.contains("boom") {
                (500, GenerateResponse { samples: None, error: Some("model crashed".into()) })
            } else {
                let params = SamplingParams {
                    n_samples: r.n_samples,
                    temperature: Temperature::from_f64(r.temperature).unwrap(),
                    top_k: r.top_k,
                    max_new_tokens: r.max_new_tokens,
                    seed: r.seed,
                };
                let mut samples = mock.generate(&tokenize(&r.input_text), &params).unwrap();
                if r.input_text.contains("short") {
                    samples.pop();
                }
                (200, GenerateResponse { samples: Some(samples), error: None })
            };
            let text = serde_json::to_string(&resp).unwrap();
            let _ = req.respond(tiny_http::Response::from_string(text).with_status_code(code));
        }
    });
    addr
}

fn mock() -> MockGenerator {
    let mut m = MockGenerator::new(RepairSkill::StepFix, 0.5);
    m.insert(
        "lemma l: f(f(a)) = a",
        MockEntry { proof: vec!["rw id0".into(), "rw id0".into(), "refl".into()], rule_ids: vec!["id0".into(), "id1".into()], recall: Recall::Exact },
    );
    m
}

#[test]
fn remote_matches_local_mock() {
    let local = Arc::new(mock());
    let remote = RemoteGenerator::new(serve(local.clone()), Duration::from_secs(5), 4);
    let input = tokenize("lemma l: f(f(a)) = a");
    for (n, t) in [(1, 0), (4, 800), (16, 1400)] {
        let params = SamplingParams { n_samples: n, temperature: Temperature::from_millis(t), seed: 9, ..Default::default() };
        assert_eq!(remote.generate(&input, &params).unwrap(), local.generate(&input, &params).unwrap());
    }
    // unknown statement: fallback
    let out = remote.generate(&tokenize("lemma q: a = b"), &SamplingParams::greedy(0)).unwrap();
    assert_eq!(out, ["sorry"]);
}

#[test]
fn remote_errors_are_classified() {
    let addr = serve(Arc::new(mock()));
    let remote = RemoteGenerator::new(addr.clone(), Duration::from_secs(5), 1);
    let p = SamplingParams { n_samples: 2, ..Default::default() };
    match remote.generate(&tokenize("lemma boom: a = a"), &p) {
        Err(GeneratorError::BackendRejected(msg)) => assert_eq!(msg, "model crashed"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(remote.generate(&tokenize("lemma short: a = a"), &p), Err(GeneratorError::Protocol(_))));
    let limited = RemoteGenerator::new(addr, Duration::from_secs(5), 1).with_max_input(4);
    assert!(matches!(limited.generate(&tokenize("lemma l: a = a"), &p), Err(GeneratorError::Oversized { .. })));
}

#[test]
fn unreachable_backend() {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", l.local_addr().unwrap());
    drop(l);
    let remote = RemoteGenerator::new(addr, Duration::from_millis(500), 1);
    assert!(matches!(
        remote.generate(&tokenize("lemma l: a = a"), &SamplingParams::greedy(0)),
        Err(GeneratorError::BackendUnavailable(_))
    ));
}
