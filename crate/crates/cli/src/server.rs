use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use log::{info, warn};
use needle_sim::presets;
use needle_sim::session::{FeedEvent, ScenarioRef, Session, SessionCommand, SessionError, Snapshot};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;

use crate::args::ServeArgs;

const TICK: Duration = Duration::from_millis(20);
const HEARTBEAT: Duration = Duration::from_secs(1);
const DRAIN: Duration = Duration::from_secs(2);

type SharedSession = Arc<Mutex<Session>>;

#[derive(Debug, Default)]
pub struct AppState {
    sessions: Mutex<HashMap<u64, SharedSession>>,
    next_id: AtomicU64,
    trace_dir: Option<PathBuf>,
    sockets: AtomicUsize,
}

struct SocketGuard(Arc<AppState>);

impl Drop for SocketGuard {
    fn drop(&mut self) {
        self.0.sockets.fetch_sub(1, Ordering::SeqCst);
    }
}

impl AppState {
    pub fn new(trace_dir: Option<PathBuf>) -> Self {
        Self {
            trace_dir,
            ..Self::default()
        }
    }

    fn get(&self, id: u64) -> Option<SharedSession> {
        self.sessions.lock().expect("session table").get(&id).cloned()
    }

    fn insert(&self, session: Session) -> (u64, SharedSession) {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        let shared = Arc::new(Mutex::new(session));
        self.sessions.lock().expect("session table").insert(id, shared.clone());
        (id, shared)
    }

    /// Closes the session and writes its trace to the trace directory.
    fn finish(&self, id: u64, session: &SharedSession) {
        let mut s = session.lock().expect("session lock");
        s.close();
        let Some(dir) = &self.trace_dir else { return };
        let path = dir.join(format!("session-{id}.ndjson"));
        match s.trace().save(&path) {
            Ok(()) => info!("session {id}: trace written to {}", path.display()),
            Err(e) => warn!("session {id}: {e}"),
        }
    }

    fn remove(&self, id: u64) -> bool {
        let removed = self.sessions.lock().expect("session table").remove(&id);
        match removed {
            Some(s) => {
                self.finish(id, &s);
                true
            }
            None => false,
        }
    }

    fn track_socket(self: &Arc<Self>) -> SocketGuard {
        self.sockets.fetch_add(1, Ordering::SeqCst);
        SocketGuard(self.clone())
    }

    /// Waits until every WebSocket has seen its feed close.
    async fn drain(&self) {
        let start = Instant::now();
        while self.sockets.load(Ordering::SeqCst) > 0 && start.elapsed() < DRAIN {
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
    }

    /// Closes every session; their feeds end and traces are flushed.
    pub fn shutdown(&self) {
        let all: Vec<_> = self.sessions.lock().expect("session table").drain().collect();
        for (id, s) in all {
            self.finish(id, &s);
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scenarios", get(list_scenarios))
        .route("/sessions", axum::routing::post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/trace", get(get_trace))
        .route("/session/{id}", get(connect))
        .with_state(state)
}

fn error_kind(e: &SessionError) -> &'static str {
    match e {
        SessionError::OutOfOrder { .. } => "out_of_order",
        SessionError::Malformed(_) => "malformed",
        SessionError::UnknownScenario(_) => "unknown_scenario",
        SessionError::Step(_) => "step",
        SessionError::Closed => "closed",
    }
}

fn not_found(id: u64) -> Response {
    (StatusCode::NOT_FOUND, Json(json!({"error": format!("no session {id}")}))).into_response()
}

async fn list_scenarios() -> Json<Value> {
    let list: Vec<Value> = presets::all()
        .iter()
        .map(|p| {
            json!({
                "name": p.name,
                "description": p.description,
                "layers": p.boundaries_mm.len(),
            })
        })
        .collect();
    Json(Value::Array(list))
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    scenario: ScenarioRef,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Option<Json<CreateRequest>>) -> Response {
    let scenario = body.map_or_else(|| ScenarioRef::Preset("ph2".into()), |Json(r)| r.scenario);
    match Session::open(&scenario) {
        Ok(session) => {
            let expected = session.expected_seq();
            let snapshot = session.snapshot();
            let (id, _) = app.insert(session);
            info!("session {id} opened");
            let body = json!({"id": id, "expected_seq": expected, "snapshot": &*snapshot});
            (StatusCode::CREATED, Json(body)).into_response()
        }
        Err(e) => {
            let body = json!({"error": e.to_string(), "kind": error_kind(&e)});
            (StatusCode::BAD_REQUEST, Json(body)).into_response()
        }
    }
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    let Some(s) = app.get(id) else { return not_found(id) };
    let s = s.lock().expect("session lock");
    Json(json!({"id": id, "expected_seq": s.expected_seq(), "snapshot": &*s.snapshot()})).into_response()
}

async fn get_trace(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    let Some(s) = app.get(id) else { return not_found(id) };
    let body = s.lock().expect("session lock").trace().to_ndjson();
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

async fn delete_session(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    if app.remove(id) {
        info!("session {id} closed");
        StatusCode::NO_CONTENT.into_response()
    } else {
        not_found(id)
    }
}

async fn connect(State(app): State<Arc<AppState>>, Path(id): Path<u64>, ws: WebSocketUpgrade) -> Response {
    match app.get(id) {
        Some(s) => {
            let guard = app.track_socket();
            ws.on_upgrade(move |socket| async move {
                drive(socket, s).await;
                drop(guard);
            })
        }
        None => not_found(id),
    }
}

/// A command from the client.
#[derive(Debug, Deserialize)]
pub struct Inbound {
    pub seq: u64,
    pub cmd: String,
    #[serde(default)]
    pub payload: Option<Value>,
}

/// A message to the client.
#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound<'a> {
    Snapshot {
        step: u64,
        snapshot: &'a Snapshot,
    },
    Ack {
        seq: u64,
        expected_seq: u64,
    },
    Error {
        seq: Option<u64>,
        kind: &'a str,
        message: String,
        expected_seq: Option<u64>,
    },
    Gap {
        dropped: u64,
    },
    Heartbeat {
        step: u64,
        expected_seq: u64,
    },
    Closed,
}

async fn send(socket: &mut WebSocket, msg: &Outbound<'_>) -> bool {
    let text = serde_json::to_string(msg).expect("outbound message serializes");
    socket.send(Message::Text(text.into())).await.is_ok()
}

async fn handle(socket: &mut WebSocket, session: &SharedSession, text: &str) -> bool {
    let parsed = serde_json::from_str::<Inbound>(text)
        .map_err(|e| (None, SessionError::Malformed(e.to_string())))
        .and_then(|m| {
            SessionCommand::from_parts(&m.cmd, m.payload)
                .map(|c| (m.seq, c))
                .map_err(|e| (Some(m.seq), e))
        });
    let (seq, command) = match parsed {
        Ok(v) => v,
        Err((seq, e)) => {
            let expected = session.lock().expect("session lock").expected_seq();
            let msg = Outbound::Error {
                seq,
                kind: error_kind(&e),
                message: e.to_string(),
                expected_seq: Some(expected),
            };
            return send(socket, &msg).await;
        }
    };
    let shared = session.clone();
    let result = tokio::task::spawn_blocking(move || {
        let mut s = shared.lock().expect("session lock");
        let r = s.submit(seq, command);
        (r, s.expected_seq())
    })
    .await;
    let msg = match result {
        Ok((Ok(_), expected)) => Outbound::Ack {
            seq,
            expected_seq: expected,
        },
        Ok((Err(e), expected)) => Outbound::Error {
            seq: Some(seq),
            kind: error_kind(&e),
            message: e.to_string(),
            expected_seq: e.expected_seq().or(Some(expected)),
        },
        Err(e) => Outbound::Error {
            seq: Some(seq),
            kind: "internal",
            message: e.to_string(),
            expected_seq: None,
        },
    };
    send(socket, &msg).await
}

/// Pumps one WebSocket: commands in, feed events out.
async fn drive(mut socket: WebSocket, session: SharedSession) {
    let (feed, first) = {
        let mut s = session.lock().expect("session lock");
        (s.subscribe(), s.snapshot())
    };
    if !send(
        &mut socket,
        &Outbound::Snapshot {
            step: first.step,
            snapshot: &first,
        },
    )
    .await
    {
        return;
    }
    let mut tick = tokio::time::interval(TICK);
    let mut last_sent = Instant::now();
    loop {
        tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    if !handle(&mut socket, &session, text.as_str()).await {
                        return;
                    }
                    last_sent = Instant::now();
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            _ = tick.tick() => loop {
                let event = feed.poll();
                let msg = match &event {
                    FeedEvent::Snapshot(s) => Outbound::Snapshot { step: s.step, snapshot: s },
                    FeedEvent::Gap { dropped } => Outbound::Gap { dropped: *dropped },
                    FeedEvent::Closed => Outbound::Closed,
                    FeedEvent::Heartbeat => {
                        if last_sent.elapsed() >= HEARTBEAT {
                            let (step, expected_seq) = {
                                let s = session.lock().expect("session lock");
                                (s.state().step, s.expected_seq())
                            };
                            if !send(&mut socket, &Outbound::Heartbeat { step, expected_seq }).await {
                                return;
                            }
                            last_sent = Instant::now();
                        }
                        break;
                    }
                };
                if !send(&mut socket, &msg).await {
                    return;
                }
                last_sent = Instant::now();
                if matches!(event, FeedEvent::Closed) {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            },
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

pub async fn serve_until_signal(args: &ServeArgs) -> Result<()> {
    if let Some(dir) = &args.trace_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let listener = TcpListener::bind(&args.bind)
        .await
        .with_context(|| format!("binding {}", args.bind))?;
    let addr = listener.local_addr()?;
    let app = Arc::new(AppState::new(args.trace_dir.clone()));
    println!("listening on http://{addr}");
    std::io::stdout().flush()?;

    let closing = app.clone();
    axum::serve(listener, router(app.clone()))
        .with_graceful_shutdown(async move {
            shutdown_signal().await;
            info!("shutting down");
            closing.shutdown();
        })
        .await?;
    app.drain().await;
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve_until_signal(args))
}
