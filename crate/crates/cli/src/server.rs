//! WebSocket teleoperation server.
//!
//! The simulation runs on its own thread at wall-clock pace. Connections see
//! it only through the session's command mailbox and a watch channel holding
//! the latest encoded state, so a slow or stalled client never holds it up.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use adaptive_hand::teleop::{encode_error, encode_state, Decimator, TeleopHandle, TeleopSession};
use adaptive_hand::{Error, Scenario};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tower_http::services::ServeDir;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub addr: SocketAddr,
    /// State broadcasts per second.
    pub rate: f64,
    /// Static files served next to `/teleop`.
    pub web_root: Option<PathBuf>,
}

#[derive(Clone)]
struct AppState {
    handle: TeleopHandle,
    states: watch::Receiver<Arc<String>>,
    shutdown: watch::Receiver<bool>,
}

/// A bound server that has not started serving yet.
pub struct Server {
    listener: TcpListener,
    scenario: Scenario,
    options: ServeOptions,
}

/// Why the server stopped.
#[derive(Debug)]
pub enum Stopped {
    Shutdown,
    /// The simulation hit a fault and the server was stopped.
    Fault(Error),
}

impl Server {
    /// Binds the port and validates the scenario. Fails when the port is taken.
    pub async fn bind(scenario: Scenario, options: ServeOptions) -> std::io::Result<Self> {
        if !(options.rate > 0.0 && options.rate.is_finite()) {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                "broadcast rate must be positive",
            ));
        }
        let listener = TcpListener::bind(options.addr).await?;
        Ok(Self {
            listener,
            scenario,
            options,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves or the simulation faults.
    pub async fn run(
        self,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> Result<Stopped, Error> {
        let (session, handle) = TeleopSession::new(&self.scenario)?;
        let decimator = Decimator::new(self.options.rate)?;
        let first = Arc::new(encode_state(&session.state()));
        let (state_tx, state_rx) = watch::channel(first);
        let (stop_tx, stop_rx) = watch::channel(false);
        let stop_flag = Arc::new(AtomicBool::new(false));

        let sim = spawn_loop(
            session,
            decimator,
            state_tx,
            stop_flag.clone(),
            stop_tx.clone(),
        );

        let app_state = AppState {
            handle,
            states: state_rx,
            shutdown: stop_rx.clone(),
        };
        let mut app = Router::new()
            .route("/teleop", get(upgrade))
            .with_state(app_state);
        if let Some(root) = &self.options.web_root {
            app = app.fallback_service(ServeDir::new(root));
        }

        let stop_on_signal = stop_tx.clone();
        tokio::spawn(async move {
            shutdown.await;
            let _ = stop_on_signal.send(true);
        });
        let mut until = stop_rx.clone();
        axum::serve(self.listener, app)
            .with_graceful_shutdown(async move { stopped(&mut until).await })
            .await
            .map_err(|e| Error::Io {
                path: PathBuf::from("/teleop"),
                source: e,
            })?;

        stop_flag.store(true, Ordering::Relaxed);
        let outcome = tokio::task::spawn_blocking(move || sim.join())
            .await
            .expect("join task")
            .expect("simulation thread panicked");
        Ok(match outcome {
            Some(e) => Stopped::Fault(e),
            None => Stopped::Shutdown,
        })
    }
}

/// Runs control ticks at wall-clock pace until `stop` is set. Returns the
/// fault that ended the loop, if any.
fn spawn_loop(
    mut session: TeleopSession,
    mut decimator: Decimator,
    states: watch::Sender<Arc<String>>,
    stop: Arc<AtomicBool>,
    stop_all: watch::Sender<bool>,
) -> JoinHandle<Option<Error>> {
    std::thread::spawn(move || {
        let dt = Duration::from_secs_f64(session.ctrl_dt());
        let start = Instant::now();
        let mut ticks: u32 = 0;
        while !stop.load(Ordering::Relaxed) {
            if let Err(e) = session.tick() {
                log::error!("teleop simulation stopped: {e}");
                states.send_replace(Arc::new(encode_error(e.to_string())));
                let _ = stop_all.send(true);
                return Some(e);
            }
            if decimator.due(session.time()) {
                states.send_replace(Arc::new(encode_state(&session.state())));
            }
            ticks += 1;
            // fixed schedule; a late tick is not made up by skipping physics
            let due = start + dt * ticks;
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        None
    })
}

async fn stopped(rx: &mut watch::Receiver<bool>) {
    let _ = rx.wait_for(|s| *s).await;
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn connection(mut socket: WebSocket, mut state: AppState) {
    log::info!("teleop client connected");
    // the current state goes out straight away
    state.states.mark_changed();
    loop {
        tokio::select! {
            changed = state.states.changed() => {
                if changed.is_err() {
                    break;
                }
                let text = state.states.borrow_and_update().clone();
                if socket.send(Message::Text(text.as_str().into())).await.is_err() {
                    break;
                }
            }
            msg = socket.recv() => {
                match msg {
                    Some(Ok(Message::Text(text))) => {
                        if let Err(e) = state.handle.ingest_text(text.as_str()) {
                            if socket.send(Message::Text(encode_error(e.to_string()).into())).await.is_err() {
                                break;
                            }
                        }
                    }
                    Some(Ok(Message::Binary(_))) => {
                        let reply = encode_error("binary frames are not supported");
                        if socket.send(Message::Text(reply.into())).await.is_err() {
                            break;
                        }
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => {}
                }
            }
            _ = stopped(&mut state.shutdown) => {
                let _ = socket.send(Message::Close(None)).await;
                break;
            }
        }
    }
    log::info!("teleop client disconnected");
}
