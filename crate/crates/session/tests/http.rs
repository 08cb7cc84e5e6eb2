use std::time::Duration;

use futures::StreamExt;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

use regret_manager::Scenario;
use regret_manager_session::{serve, AppState, ServiceConfig};

const SCENARIO: &str = r#"{
  "game": { "example": { "id": "example2", "sharing": "no_share" } },
  "generator": {
    "kind": "iid",
    "support": [
      { "event": [2.2, 9.87654321], "probability": 0.5 },
      { "event": [2.2, 2.0], "probability": 0.5 }
    ]
  },
  "manager": { "variant": "weighted", "V": 10.0, "theta": [1.0, 1.0] },
  "horizon": 3,
  "seed": 5,
  "human_player": 1
}"#;

async fn start(config: ServiceConfig) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, AppState::new(config)));
    format!("127.0.0.1:{}", addr.port())
}

fn default_config() -> ServiceConfig {
    ServiceConfig {
        default_scenario: Some(Scenario::from_json(SCENARIO).unwrap()),
        ..ServiceConfig::default()
    }
}

async fn post(client: &reqwest::Client, url: String, body: Value) -> (u16, Value) {
    let r = client.post(url).json(&body).send().await.unwrap();
    let status = r.status().as_u16();
    (status, r.json().await.unwrap())
}

async fn create(client: &reqwest::Client, host: &str, body: Value) -> String {
    let (status, v) = post(client, format!("http://{host}/sessions"), body).await;
    assert_eq!(status, 201, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

#[tokio::test]
async fn http_round_trip() {
    let host = start(default_config()).await;
    let c = reqwest::Client::new();
    let (status, created) = post(&c, format!("http://{host}/sessions"), json!({})).await;
    assert_eq!(status, 201);
    assert_eq!(created["human_player"], "1");
    assert_eq!(created["view"]["phase"], "awaiting_baseline");
    assert_eq!(created["view"]["allowed_actions"], json!(["1", "2"]));
    let id = created["session_id"].as_str().unwrap();
    let base = format!("http://{host}/sessions/{id}");

    let view: Value = c.get(format!("{base}/view?player=1")).send().await.unwrap().json().await.unwrap();
    assert_eq!(view["visible"], json!({"omega_1": "2.2"}));

    let r = c.get(format!("{base}/view?player=2")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 403);
    assert_eq!(error_code(&r.json().await.unwrap()), "not_human_seat");

    let (status, v) = post(&c, format!("{base}/advance"), json!({})).await;
    assert_eq!((status, error_code(&v)), (409, "wrong_phase"));

    let (status, v) = post(&c, format!("{base}/baseline"), json!({"player": 1, "action": 7})).await;
    assert_eq!((status, error_code(&v)), (422, "illegal_action"));

    let (status, v) = post(&c, format!("{base}/baseline"), json!({"player": 1, "action": 2})).await;
    assert_eq!(status, 200, "{v}");
    assert_eq!(v["phase"], "suggestion_ready");
    assert!(v["suggestion"]["human_action"].is_string());

    let (status, v) = post(&c, format!("{base}/baseline"), json!({"player": 1, "action": 2})).await;
    assert_eq!((status, error_code(&v)), (409, "duplicate_submission"));

    let (status, v) = post(&c, format!("{base}/advance"), json!({"follow_suggestion": false})).await;
    assert_eq!(status, 200, "{v}");
    assert_eq!(v["messages"][0]["type"], "round_result");
    assert_eq!(v["messages"][0]["payload"]["human_followed"], false);
    assert_eq!(v["view"]["t"], "1");

    for _ in 0..2 {
        post(&c, format!("{base}/baseline"), json!({"player": 1, "action": 1})).await;
        let (_, v) = post(&c, format!("{base}/advance"), json!({})).await;
        if v["view"]["complete"] == true {
            assert_eq!(v["messages"][1]["type"], "summary");
        }
    }
    let (status, v) = post(&c, format!("{base}/advance"), json!({})).await;
    assert_eq!((status, error_code(&v)), (409, "session_complete"));

    let csv = c.get(format!("{base}/trace")).send().await.unwrap().text().await.unwrap();
    assert_eq!(csv.lines().count(), 4);

    let r = c
        .get(format!("http://{host}/sessions/00000000-0000-0000-0000-000000000000/view?player=1"))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 404);
}

#[tokio::test]
async fn create_rejects_bad_requests() {
    let host = start(ServiceConfig::default()).await;
    let c = reqwest::Client::new();
    let url = format!("http://{host}/sessions");

    let (status, v) = post(&c, url.clone(), json!({})).await;
    assert_eq!((status, error_code(&v)), (422, "invalid_scenario"));

    let scenario: Value = serde_json::from_str(SCENARIO).unwrap();
    let (status, v) = post(&c, url.clone(), json!({"scenario": scenario, "human_player": 5})).await;
    assert_eq!((status, error_code(&v)), (422, "invalid_player"));

    let mut broken = scenario.clone();
    broken["manager"]["V"] = json!("high");
    let (status, v) = post(&c, url.clone(), json!({"scenario": broken})).await;
    assert_eq!((status, error_code(&v)), (422, "invalid_scenario"));
    assert!(v["error"]["message"].as_str().unwrap().contains("manager"), "{v}");

    let (status, v) = post(&c, url, json!({"scenario": scenario, "human_player": 2})).await;
    assert_eq!(status, 201, "{v}");
    assert_eq!(v["human_player"], "2");
    assert_eq!(v["view"]["allowed_actions"], json!(["2"]));
}

async fn next_json<S>(ws: &mut S) -> Value
where
    S: StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        let m = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("message in time")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = m {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

#[tokio::test]
async fn websocket_pushes_every_message_in_order() {
    let host = start(default_config()).await;
    let c = reqwest::Client::new();
    let id = create(&c, &host, json!({})).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{host}/sessions/{id}/ws"))
        .await
        .unwrap();
    let first = next_json(&mut ws).await;
    assert_eq!(first["type"], "round_start");

    let base = format!("http://{host}/sessions/{id}");
    let mut expected = Vec::new();
    for _ in 0..3 {
        post(&c, format!("{base}/baseline"), json!({"player": 1, "action": 2})).await;
        expected.push("suggestion");
        let (_, v) = post(&c, format!("{base}/advance"), json!({})).await;
        for m in v["messages"].as_array().unwrap() {
            expected.push(if m["type"] == "summary" {
                "summary"
            } else if m["type"] == "round_start" {
                "round_start"
            } else {
                "round_result"
            });
        }
    }
    let mut seen = Vec::new();
    for _ in 0..expected.len() {
        let m = next_json(&mut ws).await;
        let body = m["payload"].to_string();
        if m["type"] != "round_result" {
            assert!(!body.contains("9.87654321"), "{m}");
        }
        seen.push(m["type"].as_str().unwrap().to_string());
    }
    assert_eq!(seen, expected);
    assert_eq!(seen.last().unwrap(), "summary");

    // a late subscriber gets the backlog
    let (mut late, _) = tokio_tungstenite::connect_async(format!("ws://{host}/sessions/{id}/ws"))
        .await
        .unwrap();
    let mut count = 0;
    loop {
        let m = next_json(&mut late).await;
        count += 1;
        if m["type"] == "summary" {
            break;
        }
    }
    assert_eq!(count, 1 + expected.len());
}

#[tokio::test]
async fn sessions_are_independent() {
    let host = start(default_config()).await;
    let c = reqwest::Client::new();
    let a = create(&c, &host, json!({})).await;
    let b = create(&c, &host, json!({})).await;
    assert_ne!(a, b);

    let (status, _) = post(&c, format!("http://{host}/sessions/{a}/baseline"), json!({"player": 1, "action": 1})).await;
    assert_eq!(status, 200);
    let (status, _) = post(&c, format!("http://{host}/sessions/{a}/advance"), json!({})).await;
    assert_eq!(status, 200);

    let va: Value = c.get(format!("http://{host}/sessions/{a}/view?player=1")).send().await.unwrap().json().await.unwrap();
    let vb: Value = c.get(format!("http://{host}/sessions/{b}/view?player=1")).send().await.unwrap().json().await.unwrap();
    assert_eq!(va["t"], "1");
    assert_eq!(vb["t"], "0");
    assert_eq!(vb["phase"], "awaiting_baseline");

    // same scenario, same seed: b replays a's first round exactly
    post(&c, format!("http://{host}/sessions/{b}/baseline"), json!({"player": 1, "action": 1})).await;
    post(&c, format!("http://{host}/sessions/{b}/advance"), json!({})).await;
    let ta = c.get(format!("http://{host}/sessions/{a}/trace")).send().await.unwrap().text().await.unwrap();
    let tb = c.get(format!("http://{host}/sessions/{b}/trace")).send().await.unwrap().text().await.unwrap();
    assert_eq!(ta, tb);
}

#[tokio::test]
async fn idle_seat_is_played_automatically() {
    let host = start(ServiceConfig {
        auto_play_after: Some(Duration::from_millis(50)),
        ..default_config()
    })
    .await;
    let c = reqwest::Client::new();
    let id = create(&c, &host, json!({})).await;
    let url = format!("http://{host}/sessions/{id}/view?player=1");
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    loop {
        let v: Value = c.get(&url).send().await.unwrap().json().await.unwrap();
        if v["complete"] == true {
            assert_eq!(v["t"], "3");
            break;
        }
        assert!(tokio::time::Instant::now() < deadline, "auto-play stalled at {v}");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}
