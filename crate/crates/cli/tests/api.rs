use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use gt_cli::api::{router, AppState};
use gt_core::{select_group, Group, Posterior, Prior, Strategy, TestParams, TestRecord};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const CREATE: &str = r#"{"n": 10, "prior": {"uniform": 0.1}, "assumed_params": {"s": 0.8, "sigma": 0.8}, "delta": 0.6, "max_tests": 30, "strategy": "exhaustive"}"#;

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(app: &Router, body: &str) -> String {
    let (status, v) = call(app, Method::POST, "/v1/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn first_recommendation_is_size_seven() {
    let app = router(AppState::ephemeral());
    let id = create(&app, CREATE).await;
    let (status, rec) = call(
        &app,
        Method::GET,
        &format!("/v1/sessions/{id}/recommendation"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let group: Vec<usize> = serde_json::from_value(rec["group"].clone()).unwrap();
    assert_eq!(group.len(), 7);
    let f = rec["f"].as_f64().unwrap();
    assert!((f - (1.0 - 0.9f64.powi(7))).abs() < 1e-12);
    assert!((rec["utility_bits"].as_f64().unwrap() - 0.277583).abs() < 1e-6);
    assert!((rec["predicted_positive_prob"].as_f64().unwrap() - (0.6 * f + 0.2)).abs() < 1e-12);

    // idempotent until a result is posted
    let (_, again) = call(
        &app,
        Method::GET,
        &format!("/v1/sessions/{id}/recommendation"),
        None,
    )
    .await;
    assert_eq!(rec, again);
}

#[tokio::test]
async fn negative_result_lowers_entropy() {
    let app = router(AppState::ephemeral());
    let id = create(&app, CREATE).await;
    let (_, rec) = call(
        &app,
        Method::GET,
        &format!("/v1/sessions/{id}/recommendation"),
        None,
    )
    .await;
    let body = json!({"group": rec["group"], "outcome": 0}).to_string();
    let (status, resp) = call(
        &app,
        Method::POST,
        &format!("/v1/sessions/{id}/results"),
        Some(&body),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{resp}");
    let prior_entropy = 10.0 * gt_core::binary_entropy(0.1).unwrap();
    assert!(resp["entropy_bits"].as_f64().unwrap() < prior_entropy);
    assert!((resp["delta_threshold_bits"].as_f64().unwrap() - 0.6 * prior_entropy).abs() < 1e-12);
    assert_eq!(resp["stopped"], false);
}

#[tokio::test]
async fn fresh_state_marginals_equal_prior() {
    let app = router(AppState::ephemeral());
    let id = create(&app, CREATE).await;
    let (status, state) = call(&app, Method::GET, &format!("/v1/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    let m: Vec<f64> = serde_json::from_value(state["marginals"].clone()).unwrap();
    assert_eq!(m.len(), 10);
    for q in m {
        assert!((q - 0.1).abs() < 1e-12);
    }
    assert_eq!(state["status"], "active");
    assert_eq!(state["history"], json!([]));
}

#[tokio::test]
async fn session_follows_library_engine() {
    let app = router(AppState::ephemeral());
    let id = create(&app, CREATE).await;
    let params = TestParams::new(0.8, 0.8).unwrap();
    let mut post = Posterior::from_prior(&Prior::uniform(10, 0.1).unwrap());
    for outcome in [true, false, true, true] {
        let (_, rec) = call(
            &app,
            Method::GET,
            &format!("/v1/sessions/{id}/recommendation"),
            None,
        )
        .await;
        let sel = select_group(&post, &params, Strategy::Exhaustive);
        let group: Vec<usize> = serde_json::from_value(rec["group"].clone()).unwrap();
        assert_eq!(group, sel.group.indices());
        assert_eq!(rec["f"].as_f64().unwrap(), sel.f);
        let body = json!({"group": group, "outcome": outcome}).to_string();
        let (_, resp) = call(
            &app,
            Method::POST,
            &format!("/v1/sessions/{id}/results"),
            Some(&body),
        )
        .await;
        post = post
            .update(&TestRecord::new(sel.group, outcome, params))
            .unwrap();
        assert_eq!(resp["entropy_bits"].as_f64().unwrap(), post.entropy());
    }
    let (_, state) = call(&app, Method::GET, &format!("/v1/sessions/{id}/state"), None).await;
    let m: Vec<f64> = serde_json::from_value(state["marginals"].clone()).unwrap();
    assert_eq!(m, post.marginals());
    assert_eq!(state["history"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn override_flag_controls_off_recommendation_pools() {
    let app = router(AppState::ephemeral());
    let id = create(&app, CREATE).await;
    let uri = format!("/v1/sessions/{id}/results");
    let (status, err) = call(
        &app,
        Method::POST,
        &uri,
        Some(r#"{"group": [0, 1], "outcome": true}"#),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["path"], "group");

    let (status, _) = call(
        &app,
        Method::POST,
        &uri,
        Some(r#"{"group": [0, 1], "outcome": true, "override": true}"#),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (_, state) = call(&app, Method::GET, &format!("/v1/sessions/{id}/state"), None).await;
    assert_eq!(state["history"][0]["override"], true);
    let expected = Posterior::from_prior(&Prior::uniform(10, 0.1).unwrap())
        .update(&TestRecord::new(
            Group::from_bits(0b11),
            true,
            TestParams::new(0.8, 0.8).unwrap(),
        ))
        .unwrap();
    assert_eq!(state["entropy_bits"].as_f64().unwrap(), expected.entropy());
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = router(AppState::ephemeral());
    for (method, suffix) in [
        (Method::GET, "/recommendation"),
        (Method::GET, "/state"),
        (Method::POST, "/results"),
        (Method::DELETE, ""),
    ] {
        let body = (method == Method::POST).then_some(r#"{"group": [0], "outcome": 1}"#);
        let (status, v) = call(&app, method, &format!("/v1/sessions/nope{suffix}"), body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{suffix}");
        assert!(v["error"].as_str().unwrap().contains("nope"));
    }
}

#[tokio::test]
async fn malformed_bodies_report_field_path() {
    let app = router(AppState::ephemeral());
    let cases = [
        (
            CREATE.replace("\"s\": 0.8", "\"s\": \"x\""),
            "assumed_params.s",
        ),
        (
            CREATE.replace("\"max_tests\": 30", "\"max_tests\": -1"),
            "max_tests",
        ),
        (
            CREATE.replace("{\"uniform\": 0.1}", "{\"uniform\": 1.5}"),
            "prior",
        ),
        (CREATE.replace("\"n\": 10", "\"n\": 21"), "n"),
        (
            CREATE.replace("\"strategy\": \"exhaustive\"", "\"strategy\": \"random\""),
            "strategy",
        ),
        (CREATE.replace("\"s\": 0.8", "\"s\": 0.1"), "assumed_params"),
    ];
    for (body, path) in cases {
        let (status, v) = call(&app, Method::POST, "/v1/sessions", Some(&body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(v["path"], path, "{v}");
    }
    let (status, _) = call(&app, Method::POST, "/v1/sessions", Some("{not json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let id = create(&app, CREATE).await;
    let uri = format!("/v1/sessions/{id}/results");
    for (body, path) in [
        (
            r#"{"group": [0], "outcome": 2, "override": true}"#,
            "outcome",
        ),
        (
            r#"{"group": [99], "outcome": 1, "override": true}"#,
            "group",
        ),
        (r#"{"group": "0", "outcome": 1}"#, "group"),
        (r#"{"group": [0], "outcome": 1, "extra": 1}"#, "."),
    ] {
        let (status, v) = call(&app, Method::POST, &uri, Some(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        if path != "." {
            assert_eq!(v["path"], path, "{v}");
        }
    }
}

#[tokio::test]
async fn stopped_session_conflicts() {
    let app = router(AppState::ephemeral());
    let body = CREATE.replace("\"max_tests\": 30", "\"max_tests\": 1");
    let id = create(&app, &body).await;
    let uri = format!("/v1/sessions/{id}/results");
    let (_, resp) = call(
        &app,
        Method::POST,
        &uri,
        Some(r#"{"group": [0], "outcome": 1, "override": true}"#),
    )
    .await;
    assert_eq!(resp["stopped"], true);
    let (status, _) = call(
        &app,
        Method::POST,
        &uri,
        Some(r#"{"group": [0], "outcome": 1, "override": true}"#),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(
        &app,
        Method::GET,
        &format!("/v1/sessions/{id}/recommendation"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (_, state) = call(&app, Method::GET, &format!("/v1/sessions/{id}/state"), None).await;
    assert_eq!(state["status"], "stopped");
}

#[tokio::test]
async fn delete_removes_session() {
    let app = router(AppState::ephemeral());
    let id = create(&app, CREATE).await;
    let (status, body) = call(&app, Method::DELETE, &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    assert_eq!(body, Value::Null);
    let (status, _) = call(&app, Method::GET, &format!("/v1/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::persistent(dir.path()).unwrap());
    let id = create(&app, CREATE).await;
    let gone = create(&app, CREATE).await;
    for outcome in [0, 1] {
        let (_, rec) = call(
            &app,
            Method::GET,
            &format!("/v1/sessions/{id}/recommendation"),
            None,
        )
        .await;
        let body = json!({"group": rec["group"], "outcome": outcome}).to_string();
        call(
            &app,
            Method::POST,
            &format!("/v1/sessions/{id}/results"),
            Some(&body),
        )
        .await;
    }
    call(
        &app,
        Method::POST,
        &format!("/v1/sessions/{id}/results"),
        Some(r#"{"group": [3], "outcome": 1, "override": true}"#),
    )
    .await;
    call(&app, Method::DELETE, &format!("/v1/sessions/{gone}"), None).await;
    let (_, before) = call(&app, Method::GET, &format!("/v1/sessions/{id}/state"), None).await;
    let (_, rec_before) = call(
        &app,
        Method::GET,
        &format!("/v1/sessions/{id}/recommendation"),
        None,
    )
    .await;
    drop(app);

    let restored = AppState::persistent(dir.path()).unwrap();
    assert_eq!(restored.session_count(), 1);
    let app = router(restored);
    let (_, after) = call(&app, Method::GET, &format!("/v1/sessions/{id}/state"), None).await;
    assert_eq!(before, after);
    let (_, rec_after) = call(
        &app,
        Method::GET,
        &format!("/v1/sessions/{id}/recommendation"),
        None,
    )
    .await;
    assert_eq!(rec_before, rec_after);
}
