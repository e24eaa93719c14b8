use std::net::SocketAddr;
use std::time::Duration;

use drivesim_cli::{spawn_server, ServeOptions, ServerHandle};
use drivesim_core::dynamics::Action;
use drivesim_core::env::{MapSpec, ScenarioConfig};
use drivesim_core::procgen::PGConfig;
use drivesim_core::scenario_io::{replay_demo, DemoRecord, ScenarioDocument};
use drivesim_core::teleop::{FrameMessage, ServerMessage};
use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

type Socket = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

fn config() -> ScenarioConfig {
    ScenarioConfig {
        map: MapSpec::Pg {
            config: PGConfig::block_num(3, 4, 0),
            start_seed: 0,
        },
        horizon: 400,
        ..ScenarioConfig::default()
    }
}

async fn start(hz: f64, record_dir: Option<std::path::PathBuf>) -> ServerHandle {
    spawn_server(ServeOptions {
        config: config(),
        seed: 1,
        hz,
        record_dir,
        addr: SocketAddr::from(([127, 0, 0, 1], 0)),
    })
    .await
    .unwrap()
}

async fn connect(h: &ServerHandle) -> Socket {
    tokio_tungstenite::connect_async(format!("ws://{}/ws", h.addr)).await.unwrap().0
}

async fn next(ws: &mut Socket) -> ServerMessage {
    loop {
        let m = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("server went quiet");
        if let Message::Text(t) = m.unwrap().unwrap() {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn frame(ws: &mut Socket) -> FrameMessage {
    match next(ws).await {
        ServerMessage::Frame(f) => f,
        other => panic!("expected a frame, got {other:?}"),
    }
}

async fn send(ws: &mut Socket, v: serde_json::Value) {
    ws.send(Message::text(v.to_string())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn map_endpoint_serves_the_current_map() {
    let h = start(10.0, None).await;
    let mut tcp = tokio::net::TcpStream::connect(h.addr).await.unwrap();
    tcp.write_all(b"GET /map HTTP/1.0\r\nHost: x\r\n\r\n").await.unwrap();
    let mut raw = String::new();
    tcp.read_to_string(&mut raw).await.unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    assert!(head.starts_with("HTTP/1.0 200") || head.starts_with("HTTP/1.1 200"), "{head}");
    assert!(head.to_ascii_lowercase().contains("application/json"));
    let doc = ScenarioDocument::from_json(body).unwrap();
    assert!(drivesim_core::scenario_io::import_scenario(&doc).is_ok());
    h.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn control_is_applied_on_the_next_step() {
    let h = start(20.0, None).await;
    let mut ws = connect(&h).await;
    let first = frame(&mut ws).await;
    assert_eq!(first.action, Action::ZERO, "nothing held before any control");
    let mut hits = 0;
    let mut last_step = None;
    let mut sent = Action::ZERO;
    for k in 0..100 {
        let f = frame(&mut ws).await;
        if let Some((episode, prev)) = last_step {
            if f.episode == episode {
                assert_eq!(f.step, prev + 1, "gap in the frame stream");
            } else {
                assert_eq!(f.step, 1, "new episode starts at its first step");
            }
        }
        if last_step.is_some() && f.action == sent {
            hits += 1;
        }
        last_step = Some((f.episode, f.step));
        sent = Action::new(((k % 7) as f64 - 3.0) / 10.0, 0.5 + (k % 3) as f64 / 10.0);
        send(&mut ws, serde_json::json!({"type": "control", "steering": sent.steering, "throttle_brake": sent.throttle_brake})).await;
    }
    let f = frame(&mut ws).await;
    if f.action == sent {
        hits += 1;
    }
    assert_eq!(hits, 100);
    h.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn values_are_clamped_and_malformed_messages_answered() {
    let h = start(20.0, None).await;
    let mut ws = connect(&h).await;
    frame(&mut ws).await;
    send(&mut ws, serde_json::json!({"type": "control", "steering": 3.0, "throttle_brake": -9.0})).await;
    ws.send(Message::text("{not json")).await.unwrap();
    send(&mut ws, serde_json::json!({"type": "fly"})).await;
    let mut errors = 0;
    let mut clamped = false;
    for _ in 0..20 {
        match next(&mut ws).await {
            ServerMessage::Error { message } => {
                assert!(message.contains("malformed"));
                errors += 1;
            }
            ServerMessage::Frame(f) => clamped |= f.action == Action::new(1.0, -1.0),
        }
        if errors == 2 && clamped {
            break;
        }
    }
    assert_eq!(errors, 2);
    assert!(clamped, "session kept running with the clamped action");
    h.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn reset_restarts_at_step_zero() {
    let h = start(50.0, None).await;
    let mut ws = connect(&h).await;
    for _ in 0..5 {
        frame(&mut ws).await;
    }
    send(&mut ws, serde_json::json!({"type": "reset", "seed": 2})).await;
    loop {
        let f = frame(&mut ws).await;
        if f.step == 0 {
            assert_eq!(f.episode, 2);
            assert!(f.bodies.iter().any(|b| b.class == drivesim_core::teleop::BodyKind::Ego));
            break;
        }
    }
    h.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn one_driver_at_a_time_and_disconnect_pauses() {
    let h = start(50.0, None).await;
    let mut a = connect(&h).await;
    frame(&mut a).await;
    let mut b = connect(&h).await;
    match next(&mut b).await {
        ServerMessage::Error { message } => assert!(message.contains("another session")),
        other => panic!("{other:?}"),
    }
    let mut seen = 0;
    for _ in 0..5 {
        seen = frame(&mut a).await.step;
    }
    a.close(None).await.unwrap();
    drop(a);
    tokio::time::sleep(Duration::from_millis(300)).await;
    let mut c = connect(&h).await;
    let resumed = frame(&mut c).await;
    // at most the in-flight step went by while nobody was connected
    assert!(resumed.step <= seen + 1, "{} > {}", resumed.step, seen + 1);
    h.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn recorded_session_replays_without_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let h = start(50.0, Some(dir.path().to_path_buf())).await;
    let mut ws = connect(&h).await;
    frame(&mut ws).await;
    send(&mut ws, serde_json::json!({"type": "record_start"})).await;
    loop {
        let f = frame(&mut ws).await;
        if f.recording && f.step == 0 {
            break;
        }
    }
    for k in 0..40 {
        let steer = if k % 10 < 5 { 0.1 } else { -0.1 };
        send(&mut ws, serde_json::json!({"type": "control", "steering": steer, "throttle_brake": 0.6})).await;
        frame(&mut ws).await;
    }
    send(&mut ws, serde_json::json!({"type": "record_stop"})).await;
    loop {
        if !frame(&mut ws).await.recording {
            break;
        }
    }
    h.shutdown().await.unwrap();
    let path = dir.path().join("demo_000.ndjson");
    let demo = DemoRecord::load(&path).unwrap();
    assert!(demo.steps.len() >= 40);
    let report = replay_demo(&demo).unwrap();
    assert_eq!(report.steps, demo.steps.len());
}
