//! Teleoperation server.
//!
//! The environment lives on one dedicated thread that owns a
//! [`TeleopSession`]. Socket tasks talk to it through a single inbox and
//! get frames back on a per-connection queue. Only one connection drives
//! at a time; the episode is paused while nobody is connected.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use drivesim_core::env::ScenarioConfig;
use drivesim_core::roadnet::RoadNetwork;
use drivesim_core::scenario_io::{export_scenario, Metadata};
use drivesim_core::teleop::{parse_client, ClientMessage, Handled, ServerMessage, TeleopSession};
use futures_util::{SinkExt, StreamExt};
use tokio::sync::{mpsc as tmpsc, oneshot};

#[derive(Clone, Debug)]
pub struct ServeOptions {
    pub config: ScenarioConfig,
    pub seed: u64,
    /// Decision steps per second.
    pub hz: f64,
    pub record_dir: Option<PathBuf>,
    pub addr: SocketAddr,
}

enum Inbound {
    Connect(u64, tmpsc::UnboundedSender<String>),
    Client(u64, ClientMessage),
    Malformed(u64, String),
    Disconnect(u64),
    Shutdown,
}

#[derive(Clone)]
struct Shared {
    inbox: mpsc::Sender<Inbound>,
    map: Arc<RwLock<String>>,
    next_id: Arc<AtomicU64>,
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    inbox: mpsc::Sender<Inbound>,
    stop: Option<oneshot::Sender<()>>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
    engine: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) -> anyhow::Result<()> {
        let _ = self.inbox.send(Inbound::Shutdown);
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        (&mut self.server).await??;
        if let Some(engine) = self.engine.take() {
            engine.join().map_err(|_| anyhow::anyhow!("engine thread panicked"))?;
        }
        Ok(())
    }
}

fn map_json(net: &RoadNetwork) -> String {
    let meta = Metadata {
        source: "live".into(),
        case_id: String::new(),
        discretized: false,
    };
    export_scenario(net, None, meta).to_json()
}

/// Bind, start the engine thread and serve `/map` and `/ws` in the
/// background. Must be called inside a tokio runtime.
pub async fn spawn_server(opts: ServeOptions) -> anyhow::Result<ServerHandle> {
    anyhow::ensure!(opts.hz > 0.0 && opts.hz.is_finite(), "--hz must be positive");
    let mut session = TeleopSession::new("session", opts.config.clone(), opts.seed)?;
    if let Some(dir) = &opts.record_dir {
        session = session.with_record_dir(dir.clone());
    }
    let map = Arc::new(RwLock::new(map_json(&session.env().world().net)));
    let (inbox, rx) = mpsc::channel();
    let period = Duration::from_secs_f64(1.0 / opts.hz);
    let engine_map = map.clone();
    let engine = std::thread::Builder::new()
        .name("engine".into())
        .spawn(move || engine_loop(session, rx, period, engine_map))?;

    let shared = Shared {
        inbox: inbox.clone(),
        map,
        next_id: Arc::new(AtomicU64::new(1)),
    };
    let app = Router::new()
        .route("/map", get(get_map))
        .route("/ws", get(ws_upgrade))
        .with_state(shared);
    let listener = tokio::net::TcpListener::bind(opts.addr).await?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    log::info!("serving on http://{addr} (map at /map, socket at /ws)");
    Ok(ServerHandle {
        addr,
        inbox,
        stop: Some(stop),
        server,
        engine: Some(engine),
    })
}

/// Run until interrupted.
pub async fn serve(opts: ServeOptions) -> anyhow::Result<()> {
    let handle = spawn_server(opts).await?;
    println!("listening on {}", handle.addr);
    tokio::signal::ctrl_c().await?;
    handle.shutdown().await
}

async fn get_map(State(s): State<Shared>) -> impl IntoResponse {
    let body = s.map.read().expect("map lock").clone();
    ([(header::CONTENT_TYPE, "application/json")], body)
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(s): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, s))
}

async fn client(socket: WebSocket, s: Shared) {
    let id = s.next_id.fetch_add(1, Ordering::Relaxed);
    let (tx, mut frames) = tmpsc::unbounded_channel();
    if s.inbox.send(Inbound::Connect(id, tx)).is_err() {
        return;
    }
    let (mut sink, mut stream) = socket.split();
    loop {
        tokio::select! {
            f = frames.recv() => match f {
                Some(text) => {
                    if sink.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
            m = stream.next() => {
                let msg = match m {
                    Some(Ok(Message::Text(t))) => match parse_client(&t) {
                        Ok(c) => Inbound::Client(id, c),
                        Err(e) => Inbound::Malformed(id, e),
                    },
                    Some(Ok(Message::Binary(_))) => Inbound::Malformed(id, "binary messages are not supported".into()),
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                    Some(Ok(_)) => continue,
                };
                if s.inbox.send(msg).is_err() {
                    break;
                }
            }
        }
    }
    let _ = sink.close().await;
    let _ = s.inbox.send(Inbound::Disconnect(id));
}

struct Peer {
    id: u64,
    tx: tmpsc::UnboundedSender<String>,
}

impl Peer {
    fn send(&self, m: ServerMessage) {
        let _ = self.tx.send(m.to_json());
    }
}

fn engine_loop(mut session: TeleopSession, rx: mpsc::Receiver<Inbound>, period: Duration, map: Arc<RwLock<String>>) {
    let mut peer: Option<Peer> = None;
    let mut deadline = Instant::now();
    let mut net = session.env().world().net.clone();
    loop {
        let msg = match &peer {
            // paused: wait for someone to connect
            None => match rx.recv() {
                Ok(m) => Some(m),
                Err(_) => return,
            },
            Some(_) => {
                let now = Instant::now();
                if now >= deadline {
                    None
                } else {
                    match rx.recv_timeout(deadline - now) {
                        Ok(m) => Some(m),
                        Err(RecvTimeoutError::Timeout) => None,
                        Err(RecvTimeoutError::Disconnected) => return,
                    }
                }
            }
        };
        match msg {
            Some(Inbound::Shutdown) => return,
            Some(Inbound::Connect(id, tx)) => {
                let p = Peer { id, tx };
                if peer.is_some() {
                    p.send(ServerMessage::error("another session is driving"));
                } else {
                    p.send(ServerMessage::Frame(session.frame(false)));
                    peer = Some(p);
                    deadline = Instant::now() + period;
                }
            }
            Some(Inbound::Disconnect(id)) => {
                if peer.as_ref().is_some_and(|p| p.id == id) {
                    log::info!("client {id} left; episode paused");
                    peer = None;
                }
            }
            Some(Inbound::Malformed(id, e)) => {
                if let Some(p) = peer.as_ref().filter(|p| p.id == id) {
                    p.send(ServerMessage::error(e));
                }
            }
            Some(Inbound::Client(id, m)) => {
                let Some(p) = peer.as_ref().filter(|p| p.id == id) else {
                    continue;
                };
                match session.handle(m) {
                    Ok(Handled::Held) => {}
                    Ok(Handled::RecordingStopped(path)) => {
                        if let Some(path) = path {
                            log::info!("demo written to {}", path.display());
                        }
                        p.send(ServerMessage::Frame(session.frame(false)));
                    }
                    Ok(Handled::Reset | Handled::RecordingStarted) => {
                        p.send(ServerMessage::Frame(session.frame(false)));
                    }
                    Err(e) => p.send(ServerMessage::error(e.to_string())),
                }
            }
            None => {
                let Some(p) = &peer else { continue };
                match session.tick() {
                    Ok(frame) => p.send(ServerMessage::Frame(frame)),
                    Err(e) => p.send(ServerMessage::error(e.to_string())),
                }
                let now = Instant::now();
                deadline += period;
                if deadline + period < now {
                    // fell behind; do not try to catch up
                    deadline = now + period;
                }
            }
        }
        let current = &session.env().world().net;
        if !Arc::ptr_eq(current, &net) {
            net = current.clone();
            *map.write().expect("map lock") = map_json(&net);
        }
    }
}
