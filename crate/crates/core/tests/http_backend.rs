use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use dcflow::agent::{BackendError, CompletionBackend, CompletionRequest, DecodingParams, HttpBackend, HttpConfig, Stage};
use serde_json::Value;

struct Captured {
    request_line: String,
    headers: Vec<String>,
    body: Value,
}

/// Serves one canned `(status, body)` reply per connection, in order, and
/// reports what each request looked like.
fn mock(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, reply) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut headers = Vec::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let _ = tx.send(Captured {
                request_line: request_line.trim_end().to_string(),
                headers,
                body: serde_json::from_slice(&body).unwrap_or(Value::Null),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn ok_reply(content: &str) -> (u16, String) {
    (200, serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
}

fn call(url: &str, key: Option<&str>) -> Result<String, BackendError> {
    let mut config = HttpConfig::new(url, "test-model");
    config.api_key = key.map(str::to_string);
    let backend = HttpBackend::new(config).unwrap();
    let params = DecodingParams::default();
    backend.complete(&CompletionRequest {
        prompt: "hello",
        params: &params,
        stage: Stage::Inspect,
        column: Some("Risk"),
    })
}

#[test]
fn sends_openai_style_request() {
    let (url, rx) = mock(vec![ok_reply("Flag: True")]);
    assert_eq!(call(&url, Some("sk-test")).unwrap(), "Flag: True");
    let req = rx.recv().unwrap();
    assert_eq!(req.request_line, "POST /v1/chat/completions HTTP/1.1");
    assert!(req.headers.iter().any(|h| h.eq_ignore_ascii_case("authorization: Bearer sk-test")));
    assert_eq!(req.body["model"], "test-model");
    assert_eq!(req.body["messages"][0]["role"], "user");
    assert_eq!(req.body["messages"][0]["content"], "hello");
    assert_eq!(req.body["temperature"], 0.1);
    assert_eq!(req.body["top_k"], 60);
    assert_eq!(req.body["top_p"], 0.95);
    assert_eq!(req.body["max_tokens"], 2048);
    assert_eq!(req.body["stop"], serde_json::json!(["\n\n\n"]));
}

#[test]
fn retries_once_after_server_error() {
    let (url, rx) = mock(vec![(503, "busy".into()), ok_reply("second")]);
    assert_eq!(call(&url, None).unwrap(), "second");
    let first = rx.recv().unwrap();
    assert!(!first.headers.iter().any(|h| h.to_ascii_lowercase().starts_with("authorization")));
    rx.recv().unwrap();
}

#[test]
fn gives_up_after_two_server_errors() {
    let (url, _rx) = mock(vec![(500, "boom".into()), (502, "still down".into())]);
    match call(&url, None) {
        Err(BackendError::Status { status, body }) => {
            assert_eq!(status, 502);
            assert_eq!(body, "still down");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn client_errors_are_not_retried() {
    let (url, rx) = mock(vec![(400, "bad request".into()), ok_reply("never")]);
    assert!(matches!(call(&url, None), Err(BackendError::Status { status: 400, .. })));
    rx.recv().unwrap();
    assert!(rx.recv_timeout(std::time::Duration::from_millis(200)).is_err());
}

#[test]
fn missing_content_is_malformed() {
    let (url, _rx) = mock(vec![(200, r#"{"choices": []}"#.into())]);
    assert!(matches!(call(&url, None), Err(BackendError::Malformed(_))));
    let (url, _rx) = mock(vec![(200, "not json".into())]);
    assert!(matches!(call(&url, None), Err(BackendError::Malformed(_))));
}

#[test]
fn unreachable_server_is_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    assert!(matches!(call(&format!("http://127.0.0.1:{port}"), None), Err(BackendError::Transport(_))));
}

#[test]
fn config_requires_url() {
    let err = HttpConfig::from_lookup(|_| None).unwrap_err();
    assert!(matches!(err, BackendError::Config(_)));
    let cfg = HttpConfig::from_lookup(|k| match k {
        "DCFLOW_LLM_URL" => Some("http://x/v1/".into()),
        "DCFLOW_LLM_KEY" => Some(String::new()),
        _ => None,
    })
    .unwrap();
    assert_eq!(cfg.api_key, None);
    assert_eq!(cfg.model, "default");
}
