use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use stepstone::client::{ClientError, CompletionParams, ModelClient, RemoteClient, RemoteConfig, RetryPolicy};

struct Seen {
    bodies: Vec<serde_json::Value>,
    auth: Vec<Option<String>>,
}

/// Serves the canned (status, body) replies in order, one per connection.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Seen>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Seen {
        bodies: vec![],
        auth: vec![],
    }));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap_or((line, ""));
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap(),
                    "authorization" => auth = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            {
                let mut s = log.lock().unwrap();
                s.bodies.push(serde_json::from_slice(&buf).unwrap());
                s.auth.push(auth);
            }
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn ok_body(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn client(base: String) -> RemoteClient {
    let mut cfg = RemoteConfig::new(base);
    cfg.api_key = Some("k-123".into());
    cfg.retry = RetryPolicy {
        max_retries: 3,
        base: Duration::from_millis(10),
        cap: Duration::from_millis(40),
        jitter: true,
    };
    RemoteClient::new(cfg).unwrap()
}

#[test]
fn rate_limits_are_retried_until_success() {
    let (base, seen) = serve(vec![
        (429, "{}".into()),
        (429, "{}".into()),
        (200, ok_body("hello")),
    ]);
    let c = client(base);
    let out = c.complete("say hi", &CompletionParams::teacher()).unwrap();
    assert_eq!(out, "hello");
    assert_eq!(c.request_count(), 3);
    let s = seen.lock().unwrap();
    assert_eq!(s.auth[0].as_deref(), Some("Bearer k-123"));
    let body = &s.bodies[2];
    assert_eq!(body["messages"][0]["content"], "say hi");
    assert_eq!(body["temperature"], 1.0);
    assert_eq!(body["max_tokens"], 16384);
    assert_eq!(body["reasoning_effort"], "high");
}

#[test]
fn client_errors_are_not_retried() {
    let (base, _) = serve(vec![(400, r#"{"error":"bad field"}"#.into())]);
    let c = client(base);
    let err = c.complete("x", &CompletionParams::student()).unwrap_err();
    assert!(matches!(err, ClientError::Rejected { status: 400, .. }), "{err:?}");
    assert_eq!(c.request_count(), 1);
}

#[test]
fn context_overflow_is_reported_distinctly() {
    let (base, _) = serve(vec![(
        400,
        r#"{"error":{"message":"This model's maximum context length is 8192 tokens"}}"#.into(),
    )]);
    let err = client(base).complete("x", &CompletionParams::student()).unwrap_err();
    assert!(matches!(err, ClientError::ContextTooLong(_)), "{err:?}");
}

#[test]
fn retries_are_bounded() {
    let (base, _) = serve(vec![(503, "{}".into()); 4]);
    let c = client(base);
    let err = c.complete("x", &CompletionParams::student()).unwrap_err();
    assert!(matches!(err, ClientError::BackendUnavailable(_)), "{err:?}");
    assert_eq!(c.request_count(), 4);
}

#[test]
fn malformed_success_body() {
    let (base, _) = serve(vec![(200, r#"{"choices":[]}"#.into())]);
    let err = client(base).complete("x", &CompletionParams::student()).unwrap_err();
    assert!(matches!(err, ClientError::Malformed(_)), "{err:?}");
}

#[test]
fn unreachable_backend() {
    // bind then drop to get a port with nothing listening
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = client(format!("http://127.0.0.1:{port}")).complete("x", &CompletionParams::student()).unwrap_err();
    assert!(matches!(err, ClientError::BackendUnavailable(_)), "{err:?}");
}

#[test]
fn backoff_stays_in_the_upper_half_and_under_the_cap() {
    use rand::SeedableRng;
    let p = RetryPolicy::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for retry in 0..8 {
        let exp = Duration::from_secs(1 << retry).min(p.cap);
        for _ in 0..50 {
            let d = p.delay(retry, &mut rng);
            assert!(d >= exp / 2 && d <= exp, "retry {retry}: {d:?}");
        }
    }
}
