//! HTTP front end. Each race owns a worker task that is the only writer of
//! its engine; handlers enqueue commands and read published snapshots.
//!
//! Endpoints:
//! - `POST /races` create a race from a course document
//! - `POST /races/{id}/positions` submit one fix (202 accepted)
//! - `GET /races/{id}/standings`
//! - `GET /races/{id}/violations?since=<iso>`
//! - `GET /races/{id}/events?from=<seq>` newline-delimited JSON stream
//! - `POST /races/{id}/close` finish the race and end all streams

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use draftwatch_core::{
    Course, Ellipsoid, Engine, GeodeticFix, LogEntry, RiderId, StandingRow, Timestamp, UtmFrame, ViolationEvent,
};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch};

use crate::iso;
use crate::track::parse_survey;
use crate::wire::{
    Accepted, CreateRace, ErrorBody, LogLine, PositionBody, RaceCreated, StandingBody, StandingsBody, ViolationBody,
};

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    /// Directory for per-race `race-<id>.ndjson` event logs.
    pub log_dir: Option<PathBuf>,
}

#[derive(Debug, Default)]
struct Snapshot {
    tick: Option<Timestamp>,
    standings: Vec<StandingRow>,
    violations: Vec<ViolationEvent>,
    log: Arc<Vec<LogEntry>>,
}

enum Command {
    Position(RiderId, GeodeticFix),
    Subscribe { from: Option<u64>, tx: mpsc::UnboundedSender<LogEntry> },
    Close(oneshot::Sender<()>),
}

struct Race {
    name: Option<String>,
    frame: UtmFrame,
    tx: mpsc::UnboundedSender<Command>,
    snapshot: watch::Receiver<Arc<Snapshot>>,
    last_t: Mutex<HashMap<RiderId, Timestamp>>,
    closed: AtomicBool,
}

#[derive(Default)]
struct Registry {
    races: RwLock<BTreeMap<u64, Arc<Race>>>,
    next_id: AtomicU64,
    opts: ServiceOptions,
}

#[derive(Clone)]
pub struct AppState(Arc<Registry>);

impl AppState {
    pub fn new(opts: ServiceOptions) -> Self {
        AppState(Arc::new(Registry { opts, ..Registry::default() }))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/races", post(create_race))
        .route("/races/{id}/positions", post(submit_position))
        .route("/races/{id}/standings", get(get_standings))
        .route("/races/{id}/violations", get(get_violations))
        .route("/races/{id}/events", get(stream_events))
        .route("/races/{id}/close", post(close_race))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    opts: ServiceOptions,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(AppState::new(opts))).with_graceful_shutdown(shutdown).await
}

/// A server on its own thread and runtime, for tests and embedding in
/// synchronous programs.
pub struct RunningServer {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<io::Result<()>>>,
}

impl RunningServer {
    pub fn spawn(bind: SocketAddr, opts: ServiceOptions) -> io::Result<RunningServer> {
        let std_listener = std::net::TcpListener::bind(bind)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
            rt.block_on(async move {
                let listener = TcpListener::from_std(std_listener)?;
                serve(listener, opts, async {
                    let _ = stopped.await;
                })
                .await
            })
        });
        Ok(RunningServer { addr, stop: Some(stop), thread: Some(thread) })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> io::Result<()> {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}

fn error(status: StatusCode, class: &str, msg: impl ToString) -> Response {
    let body = ErrorBody { error: msg.to_string(), class: class.to_string(), last_accepted_t: None };
    (status, Json(body)).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, "not_found", format!("no race {id}"))
}

impl Registry {
    fn get(&self, id: &str) -> Option<Arc<Race>> {
        let id: u64 = id.parse().ok()?;
        self.races.read().expect("registry lock").get(&id).cloned()
    }
}

async fn create_race(State(app): State<AppState>, Json(req): Json<CreateRace>) -> Response {
    let settings = req.settings.unwrap_or_default();
    if let Err(e) = settings.validate() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, "settings", e);
    }
    let survey = match parse_survey(req.course.as_bytes()) {
        Ok(t) => t,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.class(), e.located("course")),
    };
    let course = match Course::from_fixes(&survey.samples, &Ellipsoid::WGS84)
        .and_then(|c| c.with_corridor_width(settings.corridor_width))
    {
        Ok(c) => c,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, "course", e),
    };
    let course_length = course.total_length();
    let frame = course.frame();
    let engine = match Engine::new(course, settings.rules()) {
        Ok(e) => e,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, "settings", e),
    };

    let reg = &app.0;
    let id = reg.next_id.fetch_add(1, Ordering::SeqCst) + 1;
    let log_file = match &reg.opts.log_dir {
        Some(dir) => match File::create(dir.join(format!("race-{id}.ndjson"))) {
            Ok(f) => Some(BufWriter::new(f)),
            Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, "io", e),
        },
        None => None,
    };
    let (tx, rx) = mpsc::unbounded_channel();
    let (snap_tx, snap_rx) = watch::channel(Arc::new(Snapshot::default()));
    tokio::spawn(run_race(engine, rx, snap_tx, log_file));
    let race = Race {
        name: req.name.clone(),
        frame,
        tx,
        snapshot: snap_rx,
        last_t: Mutex::new(HashMap::new()),
        closed: AtomicBool::new(false),
    };
    reg.races.write().expect("registry lock").insert(id, Arc::new(race));
    (StatusCode::CREATED, Json(RaceCreated { id, name: req.name, course_length })).into_response()
}

async fn submit_position(State(app): State<AppState>, Path(id): Path<String>, Json(p): Json<PositionBody>) -> Response {
    let Some(race) = app.0.get(&id) else { return not_found(&id) };
    if race.closed.load(Ordering::SeqCst) {
        return error(StatusCode::CONFLICT, "race_closed", format!("race {id} is closed"));
    }
    let Some(fix) = p.fix() else {
        return error(StatusCode::BAD_REQUEST, "bad_time", format!("unreadable time {:?}", p.t));
    };
    if let Err(e) = race.frame.project(&fix, &Ellipsoid::WGS84) {
        return error(StatusCode::UNPROCESSABLE_ENTITY, "coordinate", e);
    }
    let rider = RiderId(p.rider);
    {
        let mut last = race.last_t.lock().expect("rider clock lock");
        if let Some(&prev) = last.get(&rider) {
            if fix.t <= prev {
                let body = ErrorBody {
                    error: format!("rider {rider}: time {} does not follow {}", p.t, iso::format(prev)),
                    class: "ordering".into(),
                    last_accepted_t: Some(iso::format(prev)),
                };
                return (StatusCode::CONFLICT, Json(body)).into_response();
            }
        }
        // Enqueue under the lock so the worker sees each rider's fixes in
        // the order they were accepted here.
        if race.tx.send(Command::Position(rider, fix)).is_err() {
            return error(StatusCode::CONFLICT, "race_closed", format!("race {id} is closed"));
        }
        last.insert(rider, fix.t);
    }
    (StatusCode::ACCEPTED, Json(Accepted { accepted: true })).into_response()
}

async fn get_standings(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(race) = app.0.get(&id) else { return not_found(&id) };
    let snap = race.snapshot.borrow().clone();
    Json(StandingsBody {
        tick: snap.tick.map(iso::format),
        standings: snap.standings.iter().map(StandingBody::from).collect(),
    })
    .into_response()
}

#[derive(Deserialize)]
struct SinceQuery {
    since: Option<String>,
}

async fn get_violations(State(app): State<AppState>, Path(id): Path<String>, Query(q): Query<SinceQuery>) -> Response {
    let Some(race) = app.0.get(&id) else { return not_found(&id) };
    let since = match q.since.as_deref().map(|s| iso::parse(s).ok_or(s)) {
        None => None,
        Some(Ok(t)) => Some(t),
        Some(Err(s)) => return error(StatusCode::BAD_REQUEST, "bad_time", format!("unreadable since {s:?}")),
    };
    let snap = race.snapshot.borrow().clone();
    let list: Vec<ViolationBody> =
        snap.violations.iter().filter(|v| since.is_none_or(|s| v.start_t >= s)).map(ViolationBody::from).collect();
    Json(list).into_response()
}

#[derive(Deserialize)]
struct FromQuery {
    from: Option<u64>,
}

fn ndjson(entry: &LogEntry) -> Bytes {
    let mut s = LogLine::from(entry).to_json();
    s.push('\n');
    Bytes::from(s)
}

async fn stream_events(State(app): State<AppState>, Path(id): Path<String>, Query(q): Query<FromQuery>) -> Response {
    let Some(race) = app.0.get(&id) else { return not_found(&id) };
    let (tx, rx) = mpsc::unbounded_channel();
    let body = if race.tx.send(Command::Subscribe { from: q.from, tx }).is_ok() {
        let live = futures::stream::unfold(rx, |mut rx| async move {
            rx.recv().await.map(|e| (Ok::<_, std::convert::Infallible>(ndjson(&e)), rx))
        });
        Body::from_stream(live)
    } else {
        // Worker has exited: the race is closed, so send the backlog.
        let log = race.snapshot.borrow().log.clone();
        let from = q.from.unwrap_or(0);
        let lines: Vec<Result<Bytes, std::convert::Infallible>> =
            log.iter().filter(|e| e.seq > from).map(|e| Ok(ndjson(e))).collect();
        Body::from_stream(futures::stream::iter(lines))
    };
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

async fn close_race(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(race) = app.0.get(&id) else { return not_found(&id) };
    race.closed.store(true, Ordering::SeqCst);
    let (done_tx, done_rx) = oneshot::channel();
    if race.tx.send(Command::Close(done_tx)).is_ok() {
        let _ = done_rx.await;
    }
    let snap = race.snapshot.borrow().clone();
    Json(serde_json::json!({
        "id": id.parse::<u64>().unwrap_or_default(),
        "name": race.name,
        "closed": true,
        "events": snap.log.len(),
    }))
    .into_response()
}

async fn run_race(
    mut engine: Engine,
    mut rx: mpsc::UnboundedReceiver<Command>,
    snap_tx: watch::Sender<Arc<Snapshot>>,
    mut log_file: Option<BufWriter<File>>,
) {
    let mut log: Arc<Vec<LogEntry>> = Arc::new(Vec::new());
    let mut subscribers: Vec<mpsc::UnboundedSender<LogEntry>> = Vec::new();
    while let Some(cmd) = rx.recv().await {
        let (fresh, close) = match cmd {
            Command::Position(rider, fix) => {
                engine.register(rider);
                match engine.ingest_fix(rider, &fix) {
                    Ok(out) => (out.events, None),
                    Err(e) => {
                        eprintln!("rider {rider}: fix at {} dropped: {e}", iso::format(fix.t));
                        (Vec::new(), None)
                    }
                }
            }
            Command::Subscribe { from, tx } => {
                if let Some(from) = from {
                    for e in log.iter().filter(|e| e.seq > from) {
                        let _ = tx.send(e.clone());
                    }
                }
                subscribers.push(tx);
                continue;
            }
            Command::Close(done) => (engine.finish(), Some(done)),
        };
        if !fresh.is_empty() {
            if let Some(f) = log_file.as_mut() {
                let written = fresh.iter().try_for_each(|e| writeln!(f, "{}", LogLine::from(e).to_json()));
                if let Err(e) = written.and_then(|_| f.flush()) {
                    eprintln!("event log write failed: {e}");
                }
            }
            subscribers.retain(|s| fresh.iter().all(|e| s.send(e.clone()).is_ok()));
            Arc::make_mut(&mut log).extend(fresh);
        }
        let _ = snap_tx.send(Arc::new(Snapshot {
            tick: engine.last_evaluated(),
            standings: engine.snapshot_standings(),
            violations: engine.violations().to_vec(),
            log: log.clone(),
        }));
        if let Some(done) = close {
            let _ = done.send(());
            break;
        }
    }
    // Late subscribers get the whole backlog, then the stream ends.
    rx.close();
    while let Ok(cmd) = rx.try_recv() {
        match cmd {
            Command::Subscribe { from, tx } => {
                for e in log.iter().filter(|e| e.seq > from.unwrap_or(0)) {
                    let _ = tx.send(e.clone());
                }
            }
            Command::Close(done) => {
                let _ = done.send(());
            }
            Command::Position(..) => {}
        }
    }
}
