//! Live service: a dedicated stepping thread owns the world and runs it at
//! wall-clock rate; WebSocket sessions talk to it through queues only.

use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use omniteleop_core::{OperatorInput, StepRecord, World};
use tokio::sync::{broadcast, watch};

use crate::config::Scenario;
use crate::error::{AppError, AppResult};
use crate::log::LogWriter;
use crate::protocol::{ClientMsg, InputEvent, Role, ServerMsg, Snapshot};
use crate::session::{session_header, InputRecorder};

pub const BIND_ENV: &str = "OMNITELEOP_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8765";
const SNAPSHOT_QUEUE: usize = 8;

enum Command {
    Input(InputEvent),
    Release,
}

/// Timing statistics of the stepping thread.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ServiceStats {
    pub ticks: u64,
    /// Ticks that started more than 10% of `dt` after their deadline.
    pub late_ticks: u64,
    pub max_lateness: Duration,
    pub diverged: bool,
}

/// Where a recording goes: `session.jsonl` (step log) and `inputs.jsonl`.
#[derive(Debug, Clone)]
pub struct Recording {
    pub dir: PathBuf,
}

impl Recording {
    pub fn log_path(&self) -> PathBuf {
        self.dir.join("session.jsonl")
    }

    pub fn inputs_path(&self) -> PathBuf {
        self.dir.join("inputs.jsonl")
    }
}

struct Recorder {
    log: LogWriter<BufWriter<File>>,
    inputs: InputRecorder<BufWriter<File>>,
    paths: Recording,
}

impl Recorder {
    fn create(rec: &Recording, scenario: &Scenario) -> AppResult<Self> {
        std::fs::create_dir_all(&rec.dir).map_err(|e| AppError::io(&rec.dir, e))?;
        let log_path = rec.log_path();
        let file = File::create(&log_path).map_err(|e| AppError::io(&log_path, e))?;
        let log = LogWriter::new(BufWriter::new(file), &log_path, &session_header(scenario, "live", 0))?;
        let inputs_path = rec.inputs_path();
        let file = File::create(&inputs_path).map_err(|e| AppError::io(&inputs_path, e))?;
        let inputs = InputRecorder::new(BufWriter::new(file), scenario).map_err(|e| AppError::io(&inputs_path, e))?;
        Ok(Self {
            log,
            inputs,
            paths: rec.clone(),
        })
    }
}

enum Written {
    Record(Box<StepRecord>),
    Input(u64, Option<InputEvent>),
}

/// Log writing runs on its own thread so the stepping loop never waits on disk.
fn spawn_writer(mut rec: Recorder) -> (mpsc::Sender<Written>, JoinHandle<AppResult<()>>) {
    let (tx, rx) = mpsc::channel::<Written>();
    let handle = std::thread::spawn(move || {
        let mut error = None;
        let mut total = 0;
        for item in rx {
            let result = match item {
                Written::Record(r) => {
                    total = r.tick + 1;
                    rec.log.record(&r)
                }
                Written::Input(tick, e) => rec
                    .inputs
                    .input(tick, e)
                    .map_err(|err| AppError::io(&rec.paths.inputs_path(), err)),
            };
            if let (Err(e), None) = (result, &error) {
                error = Some(e);
            }
        }
        rec.log.finish()?;
        rec.inputs
            .end(total)
            .map_err(|e| AppError::io(&rec.paths.inputs_path(), e))?;
        error.map_or(Ok(()), Err)
    });
    (tx, handle)
}

struct Stepper {
    world: World,
    commands: mpsc::Receiver<Command>,
    snapshots: broadcast::Sender<Arc<str>>,
    writer: Option<mpsc::Sender<Written>>,
    stop: Arc<AtomicBool>,
    snapshot_hz: f64,
}

impl Stepper {
    fn run(mut self) -> ServiceStats {
        let dt = self.world.params().dt;
        let period = Duration::from_secs_f64(dt);
        let tolerance = period / 10;
        let mut stats = ServiceStats::default();
        let mut held = OperatorInput::idle();
        let mut frames_sent = 0u64;
        let start = Instant::now();
        let mut origin = start;
        let mut scheduled = 0u64;

        while !self.stop.load(Ordering::Relaxed) {
            let deadline = origin + Duration::from_nanos(period.as_nanos() as u64 * scheduled);
            let now = Instant::now();
            if now < deadline {
                let remaining = deadline - now;
                if remaining > Duration::from_micros(300) {
                    std::thread::sleep(remaining - Duration::from_micros(200));
                }
                while Instant::now() < deadline {
                    std::hint::spin_loop();
                }
            } else {
                let late = now - deadline;
                stats.max_lateness = stats.max_lateness.max(late);
                if late > tolerance {
                    stats.late_ticks += 1;
                }
                // Far behind (suspended process): restart the schedule instead of racing.
                if late > period * 100 {
                    origin = now;
                    scheduled = 0;
                }
            }
            scheduled += 1;

            let tick = self.world.tick();
            while let Ok(cmd) = self.commands.try_recv() {
                let event = match cmd {
                    Command::Input(e) => {
                        held = e.to_input();
                        Some(e)
                    }
                    Command::Release => {
                        held = OperatorInput::idle();
                        None
                    }
                };
                if let Some(w) = &self.writer {
                    let _ = w.send(Written::Input(tick, event));
                }
            }

            let record = match self.world.step(&held) {
                Ok(r) => r,
                Err(e) => {
                    stats.diverged = true;
                    let _ = self.snapshots.send(ServerMsg::error(e.to_string()).to_json().into());
                    break;
                }
            };
            stats.ticks += 1;
            let frame = (record.t * self.snapshot_hz) as u64;
            if frame > frames_sent || tick == 0 {
                frames_sent = frame;
                // No receivers is fine; slow receivers lose the oldest frames.
                let _ = self
                    .snapshots
                    .send(ServerMsg::Snapshot(Box::new(Snapshot::from(&record))).to_json().into());
            }
            if let Some(w) = &self.writer {
                let _ = w.send(Written::Record(Box::new(record)));
            }
        }
        stats
    }
}

#[derive(Clone)]
struct AppState {
    commands: Arc<Mutex<mpsc::Sender<Command>>>,
    snapshots: broadcast::Sender<Arc<str>>,
    driver: Arc<Mutex<bool>>,
    limits: omniteleop_core::station::StationLimits,
    shutdown: watch::Receiver<bool>,
}

/// Frees the driver slot and releases the handle when a driver session ends.
struct DriverSlot(AppState);

impl Drop for DriverSlot {
    fn drop(&mut self) {
        *self.0.driver.lock().unwrap() = false;
        let _ = self.0.commands.lock().unwrap().send(Command::Release);
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| session(socket, state))
}

async fn reject(socket: &mut WebSocket, msg: impl Into<String>) {
    let _ = socket.send(Message::Text(ServerMsg::error(msg).to_json().into())).await;
    let _ = socket.send(Message::Close(None)).await;
}

fn parse(msg: &Message) -> Result<Option<ClientMsg>, String> {
    match msg {
        Message::Text(text) => serde_json::from_str(text.as_str())
            .map(Some)
            .map_err(|e| format!("malformed message: {e}")),
        Message::Binary(_) => Err("binary frames are not supported".into()),
        _ => Ok(None),
    }
}

async fn session(mut socket: WebSocket, state: AppState) {
    let mut shutdown = state.shutdown.clone();
    let role = loop {
        let msg = tokio::select! {
            m = socket.recv() => m,
            _ = shutdown.changed() => return,
        };
        let Some(Ok(msg)) = msg else { return };
        if let Message::Close(_) = msg {
            return;
        }
        match parse(&msg) {
            Ok(Some(ClientMsg::Hello { role })) => break role,
            Ok(Some(_)) => return reject(&mut socket, "expected hello first").await,
            Ok(None) => continue,
            Err(e) => return reject(&mut socket, e).await,
        }
    };

    let _slot = if role == Role::Driver {
        let acquired = {
            let mut taken = state.driver.lock().unwrap();
            !std::mem::replace(&mut *taken, true)
        };
        if !acquired {
            return reject(&mut socket, "a driver is already connected").await;
        }
        Some(DriverSlot(state.clone()))
    } else {
        None
    };

    let mut snapshots = state.snapshots.subscribe();
    let mut last_t = f64::NEG_INFINITY;
    loop {
        tokio::select! {
            _ = shutdown.changed() => {
                let _ = socket.send(Message::Close(None)).await;
                return;
            }
            frame = snapshots.recv() => match frame {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return,
            },
            msg = socket.recv() => {
                let Some(Ok(msg)) = msg else { return };
                if let Message::Close(_) = msg {
                    return;
                }
                match parse(&msg) {
                    Ok(None) => {}
                    Ok(Some(ClientMsg::Hello { .. })) => return reject(&mut socket, "duplicate hello").await,
                    Ok(Some(ClientMsg::Input { mode, t, v })) => {
                        if role != Role::Driver {
                            return reject(&mut socket, "observers cannot send input").await;
                        }
                        let event = InputEvent { mode, t, v };
                        if let Err(e) = event.validate(&state.limits) {
                            return reject(&mut socket, e).await;
                        }
                        if t < last_t {
                            return reject(&mut socket, "input timestamps must be nondecreasing").await;
                        }
                        last_t = t;
                        let _ = state.commands.lock().unwrap().send(Command::Input(event));
                    }
                    Err(e) => return reject(&mut socket, e).await,
                }
            }
        }
    }
}

/// A running service.
pub struct Service {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    shutdown: watch::Sender<bool>,
    stepper: Option<JoinHandle<ServiceStats>>,
    writer: Option<JoinHandle<AppResult<()>>>,
    server: tokio::task::JoinHandle<()>,
}

impl Service {
    /// Binds `bind` and starts stepping immediately. Must be called inside a
    /// multi-threaded tokio runtime.
    pub async fn start(scenario: &Scenario, bind: &str, recording: Option<Recording>) -> AppResult<Self> {
        let world = World::new(scenario.params.clone(), scenario.initial)?;
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|source| AppError::Bind {
                addr: bind.to_string(),
                source,
            })?;
        let addr = listener.local_addr().map_err(|source| AppError::Bind {
            addr: bind.to_string(),
            source,
        })?;

        let (writer_tx, writer) = match &recording {
            Some(rec) => {
                let (tx, handle) = spawn_writer(Recorder::create(rec, scenario)?);
                (Some(tx), Some(handle))
            }
            None => (None, None),
        };
        let (cmd_tx, cmd_rx) = mpsc::channel();
        let (snap_tx, _) = broadcast::channel(SNAPSHOT_QUEUE);
        let (shutdown_tx, shutdown_rx) = watch::channel(false);
        let stop = Arc::new(AtomicBool::new(false));

        let stepper = Stepper {
            world,
            commands: cmd_rx,
            snapshots: snap_tx.clone(),
            writer: writer_tx,
            stop: stop.clone(),
            snapshot_hz: scenario.snapshot_hz,
        };
        let stepper = std::thread::Builder::new()
            .name("omniteleop-step".into())
            .spawn(move || stepper.run())
            .map_err(|e| AppError::io(Path::new("<thread>"), e))?;

        let state = AppState {
            commands: Arc::new(Mutex::new(cmd_tx)),
            snapshots: snap_tx,
            driver: Arc::new(Mutex::new(false)),
            limits: scenario.params.limits,
            shutdown: shutdown_rx.clone(),
        };
        let app = Router::new()
            .route("/", get(upgrade))
            .route("/ws", get(upgrade))
            .with_state(state);
        let mut rx = shutdown_rx;
        let server = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async move {
                    let _ = rx.changed().await;
                })
                .await;
        });

        Ok(Self {
            addr,
            stop,
            shutdown: shutdown_tx,
            stepper: Some(stepper),
            writer,
            server,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops stepping, closes all sessions and flushes the recording.
    pub async fn shutdown(mut self) -> AppResult<ServiceStats> {
        self.stop.store(true, Ordering::Relaxed);
        let _ = self.shutdown.send(true);
        let stepper = self.stepper.take().expect("stepper runs until shutdown");
        let stats = tokio::task::spawn_blocking(move || stepper.join())
            .await
            .expect("join task")
            .expect("stepping thread panicked");
        if let Some(handle) = self.writer.take() {
            tokio::task::spawn_blocking(move || handle.join())
                .await
                .expect("join task")
                .expect("writer thread panicked")?;
        }
        let _ = tokio::time::timeout(Duration::from_secs(2), &mut self.server).await;
        Ok(stats)
    }
}
