//! Remote classifier against a local HTTP endpoint that speaks the
//! `{"system","user"}` to `{"category"}` contract.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chrono::NaiveDate;
use nml_core::messages::{
    classify_batch, BatchOptions, Lexicon, RawMessage, RemoteClassifier, RemoteConfig, Source, Stance, SYSTEM_PROMPT,
};

/// Serves `requests` connections. The reply is chosen by `respond`, which
/// gets the request number and the decoded JSON payload and returns
/// `(status, body)`.
fn serve<F>(requests: usize, respond: F) -> (String, std::thread::JoinHandle<()>)
where
    F: Fn(usize, &serde_json::Value) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/classify", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        for (i, stream) in listener.incoming().take(requests).enumerate() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let l = line.to_ascii_lowercase();
                if let Some(v) = l.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let payload: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let (status, reply) = respond(i, &payload);
            let head = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                reply.len()
            );
            stream.write_all(head.as_bytes()).unwrap();
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, handle)
}

fn msg(i: usize, body: &str) -> RawMessage {
    RawMessage {
        id: format!("r{i}"),
        created_at: NaiveDate::from_ymd_opt(2022, 6, 15).unwrap().and_hms_opt(10, 0, 0).unwrap(),
        body: body.into(),
        likes: 0,
        reshares: 0,
    }
}

fn config(url: String) -> RemoteConfig {
    RemoteConfig { url, timeout: Duration::from_secs(5), retries: 2, backoff: Duration::from_millis(1) }
}

#[test]
fn labels_follow_the_endpoint_and_prompts_are_sent_verbatim() {
    let bodies = ["Fed will hike aggressively", "rate cuts and QE soon", "watching the meeting"];
    let lex = Lexicon::default();
    let (url, handle) = serve(bodies.len(), move |_, p| {
        assert_eq!(p["system"].as_str().unwrap(), SYSTEM_PROMPT);
        let user = p["user"].as_str().unwrap();
        let body = bodies.iter().find(|b| user.contains(*b)).expect("body in user prompt");
        // mixed case and padding must still parse
        let label = format!("  {}  ", lex.score(body).label().to_uppercase());
        (200, serde_json::json!({ "category": label }).to_string())
    });
    let msgs: Vec<RawMessage> = bodies.iter().enumerate().map(|(i, b)| msg(i, b)).collect();
    let remote = RemoteClassifier::new(config(url));
    let out = classify_batch(&msgs, &remote, BatchOptions { label_retries: 0, concurrency: 1 }).unwrap();
    handle.join().unwrap();
    let stances: Vec<Stance> = out.classified.iter().map(|c| c.stance).collect();
    assert_eq!(stances, vec![Stance::VeryHawkish, Stance::VeryDovish, Stance::Neutral]);
    assert!(out.classified.iter().all(|c| c.source == Source::Remote));
    assert_eq!(out.fallbacks, 0);
}

#[test]
fn server_errors_are_retried_then_garbage_falls_back_to_neutral() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    // request 0 fails with 503 and is retried; requests 1..=3 give an
    // unparseable label, exhausting two label retries
    let (url, handle) = serve(4, move |i, _| {
        seen.fetch_add(1, Ordering::SeqCst);
        match i {
            0 => (503, "{}".into()),
            _ => (200, r#"{"category":"somewhat hawkish?"}"#.into()),
        }
    });
    let remote = RemoteClassifier::new(config(url));
    let out = classify_batch(&[msg(0, "tightening ahead")], &remote, BatchOptions { label_retries: 2, concurrency: 1 }).unwrap();
    handle.join().unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 4);
    assert_eq!(out.classified[0].stance, Stance::Neutral);
    assert_eq!(out.fallbacks, 1);
}

#[test]
fn unreachable_endpoint_is_an_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let remote = RemoteClassifier::new(config(format!("http://127.0.0.1:{port}/classify")));
    let err = classify_batch(&[msg(0, "hike"), msg(1, "cut")], &remote, BatchOptions::default()).unwrap_err();
    assert!(err.to_string().contains("2 message(s) unclassified"), "{err}");
}
