mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pilot::scenario::Store;
use serde_json::{json, Value};
use tower::ServiceExt;

const PARKET: &str = include_str!("../fixtures/parket.pilot");
const ALICE: &str = include_str!("../fixtures/alice.pilot");

struct Api {
    app: Router,
    _dir: tempfile::TempDir,
}

impl Api {
    fn new() -> Api {
        let dir = tempfile::tempdir().unwrap();
        let app = pilot::service::router(Store::open(dir.path()).unwrap());
        Api { app, _dir: dir }
    }

    async fn call(&self, method: &str, path: &str, body: Option<&str>) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(path)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    async fn post(&self, path: &str, body: &Value) -> (StatusCode, Value) {
        self.call("POST", path, Some(&body.to_string())).await
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        self.call("GET", path, None).await
    }

    async fn anpr_id(&self) -> String {
        let (status, v) = self.post("/scenarios", &common::anpr_json()).await;
        assert_eq!(status, StatusCode::CREATED);
        v["id"].as_str().unwrap().to_string()
    }
}

#[tokio::test]
async fn scenarios_round_trip_through_the_store() {
    let api = Api::new();
    let id = api.anpr_id().await;
    assert_eq!(id, api.anpr_id().await, "ids are content addresses");
    let (status, sc) = api.get(&format!("/scenarios/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(sc["questions"].as_array().unwrap().len(), 6);
    let (status, a) = api.get(&format!("/scenarios/{id}/assumptions")).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = a
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["parketww_leaks_to_carinsure", "carinsure_profiles"]);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let api = Api::new();
    for path in [
        "/scenarios/00ff",
        "/scenarios/00ff/assumptions",
        "/records/00ff",
        "/scenarios/..%2Fetc",
    ] {
        let (status, v) = api.get(path).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{path}");
        assert!(v["error"].is_string());
    }
    let (status, _) = api.post("/scenarios/00ff/verify", &json!({"question": "q"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_scenarios_are_400_with_the_rule_name() {
    let api = Api::new();
    let mut bad = common::anpr_json();
    bad["items"][0]["owner"] = json!("Parket");
    let (status, v) = api.post("/scenarios", &bad).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "item_owner_is_ds");

    let mut cyclic = common::anpr_json();
    cyclic["hierarchies"]["entities"]["edges"] = json!([["Parket", "ParketWW"], ["ParketWW", "Parket"]]);
    let (status, v) = api.post("/scenarios", &cyclic).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "hierarchy_acyclic");

    let (status, v) = api.call("POST", "/scenarios", Some("{not json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "request_body");
}

#[tokio::test]
async fn verify_gives_green_and_red_verdicts() {
    let api = Api::new();
    let id = api.anpr_id().await;
    let path = format!("/scenarios/{id}/verify");

    let (status, v) = api
        .post(&path, &json!({"variant": "p_trans", "question": "parketww_receives"}))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        (v["answer"].as_str(), v["respected"].as_str()),
        (Some("yes"), Some("green"))
    );

    let (_, v) = api
        .post(&path, &json!({"variant": "p_trans", "question": "carinsure_receives"}))
        .await;
    assert_eq!(
        (v["answer"].as_str(), v["respected"].as_str()),
        (Some("no"), Some("green"))
    );
    assert!(v["witness"].is_null());

    let both = ["parketww_leaks_to_carinsure", "carinsure_profiles"];
    let (_, v) = api
        .post(
            &path,
            &json!({"variant": "p_trans", "assumptions": both, "question": "carinsure_profiling"}),
        )
        .await;
    assert_eq!(
        (v["answer"].as_str(), v["respected"].as_str()),
        (Some("yes"), Some("red"))
    );
    let kinds: Vec<&str> = v["witness"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["event"]["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds.last(), Some(&"illegal_use"));
    assert!(kinds.contains(&"illegal_transfer"));

    let (_, v) = api
        .post(
            &path,
            &json!({"variant": "p_no_trans", "assumptions": both, "question": "carinsure_profiling"}),
        )
        .await;
    assert_eq!(v["answer"], "no");
}

#[tokio::test]
async fn verify_rejects_bad_references() {
    let api = Api::new();
    let id = api.anpr_id().await;
    let path = format!("/scenarios/{id}/verify");
    for (body, code) in [
        (json!({"question": "nope"}), "unknown_reference"),
        (
            json!({"question": "parket_receives", "variant": "nope"}),
            "unknown_reference",
        ),
        (
            json!({"question": "parket_receives", "assumptions": ["nope"]}),
            "unknown_reference",
        ),
        (json!({}), "question_or_query"),
    ] {
        let (status, v) = api.post(&path, &body).await;
        assert!(
            status == StatusCode::NOT_FOUND || status == StatusCode::BAD_REQUEST,
            "{body}: {status}"
        );
        if code != "unknown_reference" {
            assert_eq!(v["error"], code);
        }
    }
}

#[tokio::test]
async fn inline_verify_with_a_candidate_policy() {
    let api = Api::new();
    // an ad-hoc query and a replacement policy for Alice that forbids transfers
    let body = json!({
        "scenario": common::anpr_json(),
        "variant": "p_trans",
        "policies": { "Alice": [PARKET.lines().next().unwrap()] },
        "query": { "kind": "can_receive", "entity": "ParketWW", "item": "plate_Alice" }
    });
    let (status, v) = api.post("/verify", &body).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["answer"], "no");

    let (status, v) = api
        .post("/verify", &json!({"scenario": common::anpr_json(), "policies": {"Alice": ["Parket may"]}, "question": "parket_receives"}))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "policy_well_formed");
}

#[tokio::test]
async fn table_runs_are_stored_as_records() {
    let api = Api::new();
    let id = api.anpr_id().await;
    let (status, v) = api.post(&format!("/scenarios/{id}/table"), &json!({})).await;
    assert_eq!(status, StatusCode::CREATED);
    let record_id = v["record_id"].as_str().unwrap();
    assert_eq!(v["table"]["rows"].as_array().unwrap().len(), 6);
    let (status, rec) = api.get(&format!("/records/{record_id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["scenario_id"], id.as_str());
    assert_eq!(rec["table"], v["table"]);
}

#[tokio::test]
async fn parse_returns_policy_rendering_and_spans() {
    let api = Api::new();
    let (status, v) = api.post("/policies/parse", &json!({"text": ALICE})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["rendered"].as_str().unwrap(), ALICE.trim_end());
    assert_eq!(v["policy"]["transfers"].as_array().unwrap().len(), 0);
    assert_eq!(v["policy"]["dcr"]["condition"], "car_location is Lyon");
    assert!(!v["spans"].as_array().unwrap().is_empty());

    let (status, v) = api
        .post("/policies/parse", &json!({"text": "Parket may collect data"}))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["span"].is_object(), "{v}");

    let id = api.anpr_id().await;
    let (status, v) = api
        .post("/policies/parse", &json!({"text": ALICE, "scenario_id": id}))
        .await;
    // the ANPR purposes are declared, but car_location is just an item name
    assert_eq!(status, StatusCode::OK, "{v}");
    let (status, v) = api
        .post(
            "/policies/parse",
            &json!({"text": "Nobody may collect data of type number_plate and use it for profiling purposes until 01/01/2020.", "scenario_id": id}),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "unknown_label");
}

#[tokio::test]
async fn subsumption_and_join() {
    let api = Api::new();
    let (p1, p2) = (PARKET.trim_end(), ALICE.trim_end());
    let (status, v) = api
        .post("/policies/subsumption", &json!({"left": p2, "right": p1}))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["subsumes"], true);
    let (_, v) = api
        .post("/policies/subsumption", &json!({"left": p1, "right": p2}))
        .await;
    assert_eq!(v["subsumes"], false);

    // the join of a policy with a stronger one is the stronger one
    let (status, v) = api.post("/policies/join", &json!({"left": p1, "right": p2})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["rendered"], p2);

    let other =
        "ParketWW may collect data of type number_plate and use it for commercial_offers purposes until 21/03/2019.";
    let (status, v) = api.post("/policies/join", &json!({"left": p1, "right": other})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "incomparable");
    let (status, v) = api
        .post(
            "/policies/join",
            &json!({"left": p1, "right": other, "mode": "literal"}),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    assert!(v["rendered"].as_str().unwrap().starts_with("ParketWW may collect"));
}
