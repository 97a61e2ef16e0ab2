use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use optformkit_gateway::{
    CachedProvider, CompletionRequest, GatewayError, HttpProvider, Provider, ProviderConfig, ReplayCache,
};

const OK_BODY: &str = r#"{"choices":[{"message":{"role":"assistant","content":"Variables: x"}}],"usage":{"prompt_tokens":11,"completion_tokens":3}}"#;

#[derive(Clone)]
struct Reply {
    status: u16,
    body: &'static str,
    delay: Duration,
}

fn reply(status: u16, body: &'static str) -> Reply {
    Reply {
        status,
        body,
        delay: Duration::ZERO,
    }
}

struct Seen {
    head: String,
    body: String,
}

/// Serves the scripted replies in order, one per connection, and records
/// every request it received.
fn serve(script: Vec<Reply>) -> (String, Arc<Mutex<Vec<Seen>>>, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = std::thread::spawn(move || {
        for r in script {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                head.push_str(&line);
            }
            let len = head
                .lines()
                .find_map(|l| {
                    let (k, v) = l.split_once(':')?;
                    k.eq_ignore_ascii_case("content-length")
                        .then(|| v.trim().parse::<usize>().ok())?
                })
                .unwrap_or(0);
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Seen {
                head,
                body: String::from_utf8(body).unwrap(),
            });
            std::thread::sleep(r.delay);
            let mut stream = stream;
            let _ = write!(
                stream,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                r.status,
                r.body.len(),
                r.body
            );
        }
    });
    (url, seen, handle)
}

fn provider(url: &str, key_env: &str, key: Option<&str>) -> HttpProvider {
    match key {
        Some(k) => std::env::set_var(key_env, k),
        None => std::env::remove_var(key_env),
    }
    HttpProvider::new(ProviderConfig {
        base_url: url.to_string(),
        api_key_env: key_env.to_string(),
        timeout_s: 2.0,
        max_retries: 3,
        backoff_base_ms: 5,
        max_in_flight: 2,
    })
    .unwrap()
}

#[test]
fn retries_rate_limits_then_succeeds() {
    let (url, seen, h) = serve(vec![reply(429, "{}"), reply(429, "{}"), reply(200, OK_BODY)]);
    let p = provider(&url, "OFK_TEST_KEY_RETRY", Some("sk-retry-123"));
    let resp = p.complete(&CompletionRequest::new("gpt-4-0613", "solve this")).unwrap();
    h.join().unwrap();
    assert_eq!(resp.text, "Variables: x");
    assert_eq!(resp.retries, 2);
    assert_eq!((resp.prompt_tokens, resp.completion_tokens), (11, 3));
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen[0].head.starts_with("POST /v1/chat/completions"));
    assert!(seen[0].head.contains("Bearer sk-retry-123"));
    let body: serde_json::Value = serde_json::from_str(&seen[2].body).unwrap();
    assert_eq!(body["model"], "gpt-4-0613");
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "solve this");
    assert_eq!(body["temperature"], 0.0);
}

#[test]
fn missing_key_fails_before_network() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let p = provider(&url, "OFK_TEST_KEY_UNSET", None);
    let err = p.complete(&CompletionRequest::new("m", "p")).unwrap_err();
    assert!(matches!(err, GatewayError::AuthError(_)), "{err:?}");
    assert!(listener.accept().is_err(), "a connection was attempted");
}

#[test]
fn auth_failure_is_not_retried() {
    let (url, seen, h) = serve(vec![reply(401, r#"{"error":"bad key"}"#)]);
    let p = provider(&url, "OFK_TEST_KEY_401", Some("sk-wrong"));
    let err = p.complete(&CompletionRequest::new("m", "p")).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, GatewayError::AuthError(_)));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn exhausted_retries() {
    let (url, seen, h) = serve(vec![reply(429, "{}"); 4]);
    let p = provider(&url, "OFK_TEST_KEY_429", Some("k"));
    assert_eq!(
        p.complete(&CompletionRequest::new("m", "p")).unwrap_err(),
        GatewayError::RateLimited { retries: 3 }
    );
    h.join().unwrap();
    assert_eq!(seen.lock().unwrap().len(), 4);

    let (url, _, h) = serve(vec![reply(503, "{}"); 4]);
    let p = provider(&url, "OFK_TEST_KEY_503", Some("k"));
    assert_eq!(
        p.complete(&CompletionRequest::new("m", "p")).unwrap_err(),
        GatewayError::ServerError {
            status: 503,
            retries: 3
        }
    );
    h.join().unwrap();
}

#[test]
fn malformed_and_timeout() {
    let (url, _, h) = serve(vec![reply(200, r#"{"choices":[]}"#)]);
    let p = provider(&url, "OFK_TEST_KEY_MALFORMED", Some("k"));
    let err = p.complete(&CompletionRequest::new("m", "p")).unwrap_err();
    assert!(matches!(err, GatewayError::MalformedResponse(_)), "{err:?}");
    h.join().unwrap();

    let slow = Reply {
        delay: Duration::from_millis(1500),
        ..reply(200, OK_BODY)
    };
    let (url, _, h) = serve(vec![slow]);
    std::env::set_var("OFK_TEST_KEY_TIMEOUT", "k");
    let p = HttpProvider::new(ProviderConfig {
        base_url: url,
        api_key_env: "OFK_TEST_KEY_TIMEOUT".into(),
        timeout_s: 0.3,
        max_retries: 0,
        backoff_base_ms: 1,
        max_in_flight: 1,
    })
    .unwrap();
    assert_eq!(
        p.complete(&CompletionRequest::new("m", "p")).unwrap_err(),
        GatewayError::Timeout
    );
    h.join().unwrap();
}

#[test]
fn key_never_reaches_disk() {
    let key = "sk-secret-a1b2c3d4e5";
    let (url, _, h) = serve(vec![reply(200, OK_BODY)]);
    let dir = tempfile::tempdir().unwrap();
    let p = CachedProvider::new(
        provider(&url, "OFK_TEST_KEY_SECRET", Some(key)),
        ReplayCache::new(dir.path()),
    );
    let mut req = CompletionRequest::new("m", "p");
    req.system = Some("instruction".into());
    p.complete(&req).unwrap();
    h.join().unwrap();

    assert!(!serde_json::to_string(&req).unwrap().contains(key));
    assert!(!format!("{p:?}").contains(key));
    let mut files = 0;
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let bytes = std::fs::read(entry.unwrap().path()).unwrap();
        assert!(!String::from_utf8_lossy(&bytes).contains(key));
        assert!(!String::from_utf8_lossy(&bytes).contains("OFK_TEST_KEY_SECRET"));
        files += 1;
    }
    assert_eq!(files, 1);
}
