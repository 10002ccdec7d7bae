mod common;

use std::time::{Duration, Instant};

use common::{conformance, corpus, ok, planner_server, scenes, scripted_dir, FakeServer, Reply};
use cxd::backends::{
    HttpClient, LayoutItem, LayoutRequest, PlannerBackend, RecordingPlanner, RemoteDenoiser, RemotePlanner,
    ScriptedPlanner, TemplatePlanner,
};
use cxd::composer::{LatentGrid, LatentShape};
use cxd::planner::PlannerConfig;
use cxd::{build_plan, BackendError, Lexicon, PlanError};
use serde_json::json;

fn corpus_prompts() -> Vec<String> {
    corpus().into_iter().map(|r| r.prompt).collect()
}

fn scene_prompts() -> Vec<String> {
    scenes().into_iter().map(|(_, p)| p).collect()
}

fn client(timeout_ms: u64) -> HttpClient {
    HttpClient::new(Duration::from_millis(timeout_ms)).unwrap()
}

fn layout_request() -> LayoutRequest {
    LayoutRequest { prompts: vec![LayoutItem { text: "a cat".into(), concept_count: 1 }], relations: vec![] }
}

fn backend_error(err: PlanError) -> BackendError {
    match err {
        PlanError::BackendFailure(e) => e,
        other => panic!("expected a backend failure, got {other:?}"),
    }
}

#[test]
fn template_planner_conforms_on_the_corpus() {
    assert_eq!(conformance(&TemplatePlanner, &corpus_prompts()), Ok(corpus().len()));
}

#[test]
fn scripted_planner_conforms_on_recorded_scenes() {
    let prompts = scene_prompts();
    assert!(prompts.len() >= 3);
    assert_eq!(conformance(&ScriptedPlanner::new(scripted_dir()), &prompts), Ok(prompts.len()));
}

#[test]
fn remote_planner_conforms_through_http() {
    let server = planner_server(TemplatePlanner);
    let remote = RemotePlanner::new(client(5_000), &server.url);
    let prompts: Vec<String> = corpus_prompts().into_iter().take(12).collect();
    assert_eq!(conformance(&remote, &prompts), Ok(12));
    assert!(server.hits().iter().all(|h| h.path == "/plan"));
}

#[test]
fn recorded_exchanges_replay_identically() {
    let dir = tempfile::tempdir().unwrap();
    let lexicon = Lexicon::builtin();
    let config = PlannerConfig::default();
    for prompt in corpus_prompts().iter().take(20) {
        let recorded =
            build_plan(prompt, &RecordingPlanner::new(&TemplatePlanner, dir.path()), &lexicon, &config)
                .unwrap();
        let replayed = build_plan(prompt, &ScriptedPlanner::new(dir.path()), &lexicon, &config).unwrap();
        assert_eq!(recorded, replayed, "{prompt}");
    }
}

#[test]
fn contract_violations_fail_instead_of_degrading() {
    // a reply that parses but drops an entity
    let server =
        FakeServer::start(|_, _| ok(json!({ "subprompts": [{ "text": "a cat", "entity_ids": [0] }] })));
    let remote = RemotePlanner::new(client(5_000), &server.url);
    let err =
        build_plan("a cat on a table", &remote, &Lexicon::builtin(), &PlannerConfig::default()).unwrap_err();
    assert!(matches!(backend_error(err), BackendError::InvalidReply { .. }));

    // a reply of the wrong shape
    let server = FakeServer::start(|_, _| ok(json!({ "boxes": "none" })));
    let remote = RemotePlanner::new(client(5_000), &server.url);
    let err = remote.layout(&layout_request()).unwrap_err();
    assert!(matches!(backend_error(err), BackendError::MalformedReply { .. }));
}

#[test]
fn timeout_maps_to_timeout() {
    let server =
        FakeServer::start(|_, _| Reply::Slow(Duration::from_millis(1_500), "{\"boxes\": []}".into()));
    let started = Instant::now();
    let err = RemotePlanner::new(client(200), &server.url).layout(&layout_request()).unwrap_err();
    assert!(matches!(backend_error(err), BackendError::Timeout { .. }));
    assert!(started.elapsed() < Duration::from_secs(3));
    assert_eq!(server.count(), 2, "one retry after a timeout");
}

#[test]
fn server_error_twice_maps_to_bad_status() {
    let server = FakeServer::start(|_, _| Reply::Json(500, "model crashed".into()));
    let err = RemotePlanner::new(client(5_000), &server.url).layout(&layout_request()).unwrap_err();
    match backend_error(err) {
        BackendError::BadStatus { status, body, .. } => {
            assert_eq!(status, 500);
            assert_eq!(body, "model crashed");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.count(), 2);
}

#[test]
fn one_server_error_is_retried() {
    let server = FakeServer::start(|_, i| {
        if i == 0 {
            Reply::Json(503, "busy".into())
        } else {
            ok(json!({ "boxes": [[0.25, 0.25, 0.5, 0.5]] }))
        }
    });
    let reply = RemotePlanner::new(client(5_000), &server.url).layout(&layout_request()).unwrap();
    assert_eq!(reply.boxes.len(), 1);
    assert_eq!(server.count(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let server = FakeServer::start(|_, _| Reply::Json(404, "no such route".into()));
    let err = RemotePlanner::new(client(5_000), &server.url).layout(&layout_request()).unwrap_err();
    assert!(matches!(backend_error(err), BackendError::BadStatus { status: 404, .. }));
    assert_eq!(server.count(), 1);
}

#[test]
fn truncated_json_maps_to_malformed_reply() {
    let server = FakeServer::start(|_, _| Reply::Json(200, "{\"boxes\": [[0.1, 0.1".into()));
    let err = RemotePlanner::new(client(5_000), &server.url).layout(&layout_request()).unwrap_err();
    match backend_error(err) {
        BackendError::MalformedReply { body, .. } => assert_eq!(body, "{\"boxes\": [[0.1, 0.1"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.count(), 1);
}

#[test]
fn unreachable_endpoint_maps_to_transport() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = RemotePlanner::new(client(2_000), &format!("http://127.0.0.1:{port}"))
        .layout(&layout_request())
        .unwrap_err();
    assert!(matches!(backend_error(err), BackendError::Transport { .. }));
}

#[test]
fn bearer_token_is_forwarded() {
    let server = planner_server(TemplatePlanner);
    let client = client(5_000).with_bearer(Some("s3cret".into()));
    RemotePlanner::new(client, &server.url).layout(&layout_request()).unwrap();
    assert_eq!(server.hits()[0].authorization.as_deref(), Some("Bearer s3cret"));
}

#[test]
fn denoiser_reply_with_wrong_shape_is_rejected() {
    let server = FakeServer::start(|_, _| ok(json!({ "h": 1, "w": 1, "c": 1, "data": [0.0] })));
    let z = LatentGrid::zeros(LatentShape::new(2, 2, 1)).unwrap();
    let err = cxd::backends::DenoiserBackend::denoise(
        &RemoteDenoiser::new(client(5_000), &server.url),
        &z,
        "a cat",
        1,
        1,
    )
    .unwrap_err();
    assert!(matches!(err, BackendError::InvalidReply { .. }));
}
