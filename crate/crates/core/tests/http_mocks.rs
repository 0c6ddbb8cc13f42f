mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use kgrag_core::docs::{DocProvider, ProviderConfig, ProviderKind, RemoteDenseClient, RetrievalCause, WebSearchClient};
use kgrag_core::kg::{service, KgQuery, KgSearchOptions, RemoteKgClient};
use kgrag_core::llm::{ChatClient, ChatClientConfig, ChatMessage, GenerationRequest, LanguageModel, LlmError, RetryPolicy};
use kgrag_core::orchestrator::{run_rollout, AgentConfig, Termination};

#[derive(Clone, Default)]
struct Mock {
    calls: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<Value>>>,
    auth: Arc<Mutex<Vec<Option<String>>>>,
}

async fn spawn(router: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    format!("http://{addr}")
}

fn record(mock: &Mock, headers: &HeaderMap, body: Value) -> usize {
    mock.bodies.lock().unwrap().push(body);
    mock.auth.lock().unwrap().push(
        headers
            .get("authorization")
            .map(|v| v.to_str().unwrap().to_owned()),
    );
    mock.calls.fetch_add(1, Ordering::SeqCst)
}

fn completion(content: &str, stop: Option<&str>) -> Value {
    json!({
        "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": "stop", "stop_reason": stop}],
        "usage": {"completion_tokens": content.split_whitespace().count()}
    })
}

fn fast_retry(max_retries: u32) -> RetryPolicy {
    RetryPolicy {
        max_retries,
        initial_backoff_ms: 1,
        max_backoff_ms: 4,
    }
}

fn chat(base: &str, retry: RetryPolicy, timeout_secs: f64) -> ChatClient {
    let mut cfg = ChatClientConfig::new(format!("{base}/v1/chat/completions"), "policy");
    cfg.api_key = Some("secret".into());
    cfg.retry = retry;
    cfg.timeout_secs = timeout_secs;
    ChatClient::new(cfg).unwrap()
}

fn request() -> GenerationRequest {
    GenerationRequest {
        stop: vec!["</search>".into(), "</answer>".into()],
        ..GenerationRequest::prompt("system", "question".into())
    }
}

#[tokio::test]
async fn chat_retries_transient_failures() {
    async fn handler(State(m): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
        if record(&m, &headers, body) < 2 {
            return (StatusCode::SERVICE_UNAVAILABLE, "busy").into_response();
        }
        Json(completion("<think>ok</think><answer>\\boxed{x}", Some("</answer>"))).into_response()
    }
    let mock = Mock::default();
    let base = spawn(Router::new().route("/v1/chat/completions", post(handler)).with_state(mock.clone())).await;
    let g = chat(&base, fast_retry(3), 10.0).generate(&request()).await.unwrap();
    assert_eq!(g.stop.as_deref(), Some("</answer>"));
    assert_eq!(g.text, "<think>ok</think><answer>\\boxed{x}");
    assert_eq!(mock.calls.load(Ordering::SeqCst), 3);

    let body = &mock.bodies.lock().unwrap()[0];
    assert_eq!(body["model"], "policy");
    assert_eq!(body["stop"], json!(["</search>", "</answer>"]));
    assert_eq!(body["max_tokens"], 256);
    assert!(body.get("continue_final_message").is_none());
    assert_eq!(mock.auth.lock().unwrap()[0].as_deref(), Some("Bearer secret"));
}

#[tokio::test]
async fn chat_gives_up_after_retries() {
    async fn handler(State(m): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
        record(&m, &headers, body);
        (StatusCode::INTERNAL_SERVER_ERROR, "down").into_response()
    }
    let mock = Mock::default();
    let base = spawn(Router::new().route("/v1/chat/completions", post(handler)).with_state(mock.clone())).await;
    let err = chat(&base, fast_retry(3), 10.0).generate(&request()).await.unwrap_err();
    assert!(matches!(err, LlmError::Unreachable { attempts: 4, .. }), "{err:?}");
    assert_eq!(mock.calls.load(Ordering::SeqCst), 4);
}

#[tokio::test]
async fn chat_does_not_retry_client_errors() {
    async fn handler(State(m): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
        record(&m, &headers, body);
        (StatusCode::BAD_REQUEST, "bad").into_response()
    }
    let mock = Mock::default();
    let base = spawn(Router::new().route("/v1/chat/completions", post(handler)).with_state(mock.clone())).await;
    let err = chat(&base, fast_retry(3), 10.0).generate(&request()).await.unwrap_err();
    assert!(matches!(err, LlmError::Status { status: 400, .. }));
    assert_eq!(mock.calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn chat_timeout() {
    async fn handler() -> Json<Value> {
        tokio::time::sleep(Duration::from_secs(5)).await;
        Json(completion("late", None))
    }
    let base = spawn(Router::new().route("/v1/chat/completions", post(handler))).await;
    let err = chat(&base, fast_retry(0), 0.2).generate(&request()).await.unwrap_err();
    match err {
        LlmError::Unreachable { attempts: 1, last } => assert_eq!(*last, LlmError::Timeout),
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn chat_continues_assistant_prefix() {
    async fn handler(State(m): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> Json<Value> {
        record(&m, &headers, body);
        Json(completion("more</search>", None))
    }
    let mock = Mock::default();
    let base = spawn(Router::new().route("/v1/chat/completions", post(handler)).with_state(mock.clone())).await;
    let mut req = request();
    req.messages.push(ChatMessage::assistant("<think>a</think><search>"));
    let g = chat(&base, fast_retry(0), 10.0).generate(&req).await.unwrap();
    assert_eq!(g.text, "more");
    assert_eq!(g.stop.as_deref(), Some("</search>"));
    let body = &mock.bodies.lock().unwrap()[0];
    assert_eq!(body["continue_final_message"], true);
    assert_eq!(body["add_generation_prompt"], false);
    assert_eq!(body["messages"][2]["role"], "assistant");
}

#[tokio::test]
async fn rollout_over_http_model() {
    async fn handler(State(m): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> Json<Value> {
        let n = record(&m, &headers, body);
        let script = common::crew_script();
        let chunk = &script[n];
        let (text, stop) = match chunk.find("</search>") {
            Some(at) => (&chunk[..at], Some("</search>")),
            None => (chunk.trim_end_matches("</answer>"), Some("</answer>")),
        };
        Json(completion(text, stop))
    }
    let mock = Mock::default();
    let base = spawn(Router::new().route("/v1/chat/completions", post(handler)).with_state(mock.clone())).await;
    let llm = chat(&base, fast_retry(0), 10.0);
    let out = run_rollout("question", &llm, &common::crew_env(), &AgentConfig::default()).await;
    assert_eq!(out.termination, Termination::Answered);
    assert_eq!(out.trajectory.retrieval_count(), 3);
    let bodies = mock.bodies.lock().unwrap();
    assert_eq!(bodies.len(), 4);
    assert_eq!(bodies[1]["continue_final_message"], true);
    assert_eq!(bodies[0]["temperature"], 1.0);
}

fn provider(kind: ProviderKind, endpoint: String) -> ProviderConfig {
    ProviderConfig {
        endpoint: Some(endpoint),
        api_key: Some("web-key".into()),
        timeout_secs: 5.0,
        ..ProviderConfig::new(kind)
    }
}

#[tokio::test]
async fn dense_client_sorts_and_truncates() {
    async fn handler(State(m): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> Json<Value> {
        record(&m, &headers, body);
        Json(json!({"hits": [
            {"id": "b", "title": "B", "text": "tb", "score": 0.5},
            {"id": "a", "title": "A", "text": "ta", "score": 0.9},
            {"id": "c", "title": "C", "text": "tc", "score": 0.5},
        ]}))
    }
    let mock = Mock::default();
    let base = spawn(Router::new().route("/retrieve", post(handler)).with_state(mock.clone())).await;
    let client = RemoteDenseClient::new(&provider(ProviderKind::RemoteDense, format!("{base}/retrieve"))).unwrap();
    let hits = client.search("who", 2).await.unwrap();
    let ids: Vec<_> = hits.iter().map(|h| h.document.doc_id.as_str()).collect();
    assert_eq!(ids, ["a", "b"]);
    assert_eq!(mock.bodies.lock().unwrap()[0], json!({"query": "who", "top_k": 2}));
}

#[tokio::test]
async fn dense_client_errors_carry_provider_kind() {
    async fn handler() -> StatusCode {
        StatusCode::BAD_GATEWAY
    }
    let base = spawn(Router::new().route("/retrieve", post(handler))).await;
    let client = RemoteDenseClient::new(&provider(ProviderKind::RemoteDense, format!("{base}/retrieve"))).unwrap();
    let err = client.search("who", 2).await.unwrap_err();
    assert_eq!(err.kind, ProviderKind::RemoteDense);
    assert_eq!(err.cause, RetrievalCause::Status(502));
}

#[tokio::test]
async fn web_client_maps_results() {
    async fn handler(State(m): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> Json<Value> {
        record(&m, &headers, body);
        Json(json!({"results": [
            {"title": "First", "url": "https://x/1", "content": "one"},
            {"title": "", "url": "https://x/2", "content": "two"},
        ]}))
    }
    let mock = Mock::default();
    let base = spawn(Router::new().route("/search", post(handler)).with_state(mock.clone())).await;
    let client = WebSearchClient::new(&provider(ProviderKind::Web, format!("{base}/search"))).unwrap();
    let hits = client.search("q", 5).await.unwrap();
    assert_eq!(hits.len(), 2);
    assert_eq!(hits[0].document.doc_id, "https://x/1");
    assert_eq!(hits[1].document.title, "https://x/2");
    assert!(hits[0].score > hits[1].score);
    assert_eq!(mock.auth.lock().unwrap()[0].as_deref(), Some("Bearer web-key"));
    assert_eq!(mock.bodies.lock().unwrap()[0]["max_results"], 5);
}

#[tokio::test]
async fn web_client_needs_a_key() {
    let mut cfg = provider(ProviderKind::Web, "http://127.0.0.1:9/search".into());
    cfg.api_key = Some(String::new());
    if std::env::var("WEB_SEARCH_API_KEY").is_ok() {
        return;
    }
    let err = WebSearchClient::new(&cfg).unwrap().search("q", 3).await.unwrap_err();
    assert!(matches!(err.cause, RetrievalCause::Config(_)));
}

#[tokio::test]
async fn remote_kg_matches_local_store() {
    let store = Arc::new(common::crew_store());
    let base = spawn(service::router(store.clone(), KgSearchOptions::default())).await;
    let client = RemoteKgClient::new(&base, Duration::from_secs(5)).unwrap();
    for (e, r) in [
        (vec!["Natalie Diaz"], vec!["award received"]),
        (vec!["Dominique Morisseau"], vec!["name of play written in May 2016"]),
        (vec!["nothing like this"], Vec::<&str>::new()),
    ] {
        let q = KgQuery::new(e, r);
        assert_eq!(client.search(&q).await.unwrap(), store.kg_search(&q));
    }
}
