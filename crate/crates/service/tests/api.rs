use std::collections::HashSet;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower::ServiceExt;
use trustwork_core::estimation::sessions::read_session_rows;
use trustwork_core::model::{reference_model, Compliance, Transparency};
use trustwork_core::sim::{replay_mismatches, validate_session_log, TrialRecord};
use trustwork_service::{
    router, AppState, CreateSessionReply, CreateSessionRequest, ErrorBody, PolicyList,
    ResponseReply, ResponseRequest, ServiceConfig, SessionState, SessionSummary, SLOW_RT_FLAG,
};

fn app(dir: &tempfile::TempDir, test_mode: bool) -> (Arc<AppState>, Router) {
    let state = Arc::new(
        AppState::new(ServiceConfig {
            log_dir: dir.path().to_path_buf(),
            test_mode,
            server_seed: 11,
            ..ServiceConfig::default()
        })
        .unwrap(),
    );
    (state.clone(), router(state))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn post<B: Serialize>(app: &Router, uri: &str, body: &B) -> (StatusCode, Vec<u8>) {
    call(app, Method::POST, uri, Some(serde_json::to_string(body).unwrap())).await
}

fn parse<T: DeserializeOwned>(bytes: &[u8]) -> T {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

fn create(policy: &str, seed: Option<u64>) -> CreateSessionRequest {
    CreateSessionRequest {
        policy: policy.into(),
        participant_id: Some("p01".into()),
        seed,
        ..CreateSessionRequest::default()
    }
}

fn answer(k: usize, rt: f64) -> ResponseRequest {
    ResponseRequest {
        trial_index: Some(k),
        compliance: if k % 3 == 0 { Compliance::Disagree } else { Compliance::Agree },
        rt_seconds: rt,
    }
}

#[tokio::test]
async fn thousand_sessions_get_distinct_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(&dir, false);
    let mut ids = HashSet::new();
    for _ in 0..1000 {
        let (status, bytes) = post(&app, "/sessions", &create("fixed_low", None)).await;
        assert_eq!(status, StatusCode::OK);
        let reply: CreateSessionReply = parse(&bytes);
        assert!(ids.insert(reply.session_id));
    }
}

#[tokio::test]
async fn fixed_high_first_trial_shows_sensor_and_seven_cues() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(&dir, false);
    let (status, bytes) = post(&app, "/sessions", &create("fixed_high", None)).await;
    assert_eq!(status, StatusCode::OK);
    let reply: CreateSessionReply = parse(&bytes);
    assert_eq!(reply.schema_version, 1);
    assert_eq!(reply.trial.trial_index, 0);
    assert_eq!(reply.trial.transparency, Transparency::High);
    assert!(reply.trial.cues.sensor.is_some());
    assert_eq!(reply.trial.cues.cues.as_ref().map(Vec::len), Some(7));

    let (_, bytes) = post(&app, "/sessions", &create("fixed_low", None)).await;
    let low: serde_json::Value = parse(&bytes);
    assert!(low["trial"].get("sensor").is_none() && low["trial"].get("cues").is_none());
}

#[tokio::test]
async fn seeded_sessions_repeat_exactly_in_test_mode() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(&dir, true);
    let run = |seed| {
        let app = app.clone();
        async move {
            let (_, bytes) = post(&app, "/sessions", &create("closed_loop_0.95", Some(seed))).await;
            let first: CreateSessionReply = parse(&bytes);
            let mut trials = vec![first.trial];
            for k in 0..14 {
                let uri = format!("/sessions/{}/response", first.session_id);
                let (_, bytes) = post(&app, &uri, &answer(k, 1.0 + k as f64 / 10.0)).await;
                let reply: ResponseReply = parse(&bytes);
                trials.push(reply.trial.unwrap());
            }
            trials
        }
    };
    let a = run(5).await;
    assert_eq!(a, run(5).await);
    assert_ne!(a, run(6).await);
}

#[tokio::test]
async fn client_seed_is_refused_outside_test_mode() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(&dir, false);
    let (status, bytes) = post(&app, "/sessions", &create("fixed_low", Some(1))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let err: ErrorBody = parse(&bytes);
    assert_eq!(err.error, "validation");
}

#[tokio::test]
async fn scripted_mission_logs_a_valid_replayable_session() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(&dir, true);
    let (_, bytes) = post(&app, "/sessions", &create("closed_loop_0.95", Some(3))).await;
    let first: CreateSessionReply = parse(&bytes);
    let uri = format!("/sessions/{}/response", first.session_id);
    let mut summary = None;
    for k in 0..15 {
        // trial 4 is answered slowly to exercise the flag
        let rt = if k == 4 { 150.0 } else { 0.8 + 0.3 * k as f64 };
        let (status, bytes) = post(&app, &uri, &answer(k, rt)).await;
        assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
        let reply: ResponseReply = parse(&bytes);
        if k < 14 {
            assert_eq!(reply.trial.unwrap().trial_index, k + 1);
        } else {
            summary = reply.summary;
        }
    }
    let summary = summary.expect("last response returns the summary");
    assert_eq!(summary.state, SessionState::Finished);
    assert_eq!(summary.trials_completed, 15);
    assert!(summary.pending_trial.is_none());

    let file = std::fs::File::open(&summary.log_file).unwrap();
    let rows = read_session_rows(file).unwrap();
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| r.mission_id == first.session_id && r.participant_id == "p01"));
    assert_eq!(rows[4].flags, SLOW_RT_FLAG);
    assert!(rows.iter().enumerate().all(|(k, r)| k == 4 || r.flags.is_empty()));
    let records: Vec<TrialRecord> = rows.iter().map(|r| TrialRecord::from_row(r).unwrap()).collect();
    let table = trustwork_core::sim::ArmorTimings::default().decision_table().unwrap();
    assert_eq!(validate_session_log(&records, &table), Vec::<String>::new());
    assert!(replay_mismatches(&records, &reference_model()).unwrap().is_empty());

    let total: f64 = records.iter().map(|r| r.decision_reward).sum();
    assert_eq!(summary.total_decision_reward, total);
    let rt: f64 = records.iter().map(|r| r.rt_seconds).sum();
    assert_eq!(summary.total_rt_reward, -rt);
}

#[tokio::test]
async fn stale_and_early_responses_conflict_without_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    let (state, app) = app(&dir, true);
    let (_, bytes) = post(&app, "/sessions", &create("fixed_medium", Some(8))).await;
    let id = parse::<CreateSessionReply>(&bytes).session_id;
    let uri = format!("/sessions/{id}/response");
    assert_eq!(post(&app, &uri, &answer(0, 1.0)).await.0, StatusCode::OK);
    let before = state.summary(&id).unwrap();
    assert_eq!(before.pending_trial.as_ref().map(|t| t.trial_index), Some(1));

    for k in [0, 2, 7] {
        let (status, bytes) = post(&app, &uri, &answer(k, 1.0)).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert_eq!(parse::<ErrorBody>(&bytes).error, "conflict");
    }
    assert_eq!(state.summary(&id).unwrap(), before);
    let rows = read_session_rows(std::fs::File::open(&before.log_file).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(post(&app, &uri, &answer(1, 1.0)).await.0, StatusCode::OK);
}

#[tokio::test]
async fn bad_response_times_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (state, app) = app(&dir, true);
    let (_, bytes) = post(&app, "/sessions", &create("fixed_low", Some(1))).await;
    let id = parse::<CreateSessionReply>(&bytes).session_id;
    let uri = format!("/sessions/{id}/response");
    for rt in [0.0, -1.5] {
        let (status, bytes) = post(&app, &uri, &answer(0, rt)).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(parse::<ErrorBody>(&bytes).error, "validation");
    }
    // malformed JSON and missing fields are validation errors too
    let (status, _) = call(&app, Method::POST, &uri, Some("{\"compliance\":".into())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, Method::POST, &uri, Some("{\"rt_seconds\":1.0}".into())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(state.summary(&id).unwrap().trials_completed, 0);
}

#[tokio::test]
async fn finished_sessions_refuse_more_responses() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(&dir, true);
    let (_, bytes) = post(&app, "/sessions", &create("fixed_low", Some(2))).await;
    let id = parse::<CreateSessionReply>(&bytes).session_id;
    let uri = format!("/sessions/{id}/response");
    for k in 0..15 {
        assert_eq!(post(&app, &uri, &answer(k, 1.0)).await.0, StatusCode::OK);
    }
    let late = ResponseRequest {
        trial_index: None,
        ..answer(15, 1.0)
    };
    assert_eq!(post(&app, &uri, &late).await.0, StatusCode::CONFLICT);
    let (status, bytes) = call(&app, Method::GET, &format!("/sessions/{id}/summary"), None).await;
    assert_eq!(status, StatusCode::OK);
    let summary: SessionSummary = parse(&bytes);
    assert_eq!(summary.trials_completed, 15);
    assert_eq!(summary.state, SessionState::Finished);
}

#[tokio::test]
async fn unknown_policy_and_session_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(&dir, false);
    let (status, bytes) = post(&app, "/sessions", &create("closed_loop_0.42", None)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(parse::<ErrorBody>(&bytes).error, "not_found");
    let (status, _) = call(&app, Method::GET, "/sessions/nope/summary", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = post(&app, "/sessions/nope/response", &answer(0, 1.0)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn policies_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(&dir, false);
    let (status, bytes) = call(&app, Method::GET, "/policies", None).await;
    assert_eq!(status, StatusCode::OK);
    let list: PolicyList = parse(&bytes);
    let ids: Vec<&str> = list.policies.iter().map(|p| p.id.as_str()).collect();
    assert_eq!(ids.len(), 6);
    for want in ["fixed_low", "fixed_medium", "fixed_high", "closed_loop_0.95"] {
        assert!(ids.contains(&want), "{ids:?}");
    }
}

#[tokio::test]
async fn sessions_progress_independently_under_concurrency() {
    let dir = tempfile::tempdir().unwrap();
    let (state, app) = app(&dir, false);
    let mut handles = Vec::new();
    for _ in 0..16 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let (_, bytes) = post(&app, "/sessions", &create("closed_loop_0.50", None)).await;
            let id = parse::<CreateSessionReply>(&bytes).session_id;
            let uri = format!("/sessions/{id}/response");
            for k in 0..15 {
                assert_eq!(post(&app, &uri, &answer(k, 2.0)).await.0, StatusCode::OK);
            }
            id
        }));
    }
    for h in handles {
        let id = h.await.unwrap();
        assert_eq!(state.summary(&id).unwrap().trials_completed, 15);
    }
}
