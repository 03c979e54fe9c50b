//! WebSocket live feed for a pulsepipe session.
//!
//! Clients connect to `ws://host:port/live`, receive a hello frame, then
//! every tick and session event broadcast after they joined. Each client
//! has its own bounded queue; a client that cannot keep up loses its oldest
//! frames and is told how many in the `dropped` field of the next one.
//!
//! Controls sent by clients are queued for the thread that owns the
//! [`Session`]; it applies them with [`Gateway::service`] between feeds, so
//! the analytics never wait on a socket.

mod queue;

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use pulsepipe::io::TickRow;
use pulsepipe::pipeline::{PipelineError, SessionEvent};
use pulsepipe::synth::DopplerSynth;
use pulsepipe::{Session, TickReport, SCHEMA};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::{Message, WebSocket};

pub use queue::{ClientQueue, QUEUE_DEPTH};

pub const LIVE_PATH: &str = "/live";
const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A control action as sent by a client.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Control {
    Start,
    Stop,
    MarkReposition {
        #[serde(default)]
        note: Option<String>,
    },
    SetNoise {
        level: f64,
    },
}

impl Control {
    pub fn name(&self) -> &'static str {
        match self {
            Control::Start => "start",
            Control::Stop => "stop",
            Control::MarkReposition { .. } => "mark_reposition",
            Control::SetNoise { .. } => "set_noise",
        }
    }

    /// Parses a client text frame.
    pub fn parse(text: &str) -> Option<Control> {
        #[derive(Deserialize)]
        struct Envelope {
            #[serde(rename = "type")]
            kind: String,
            #[serde(flatten)]
            control: Control,
        }
        let env: Envelope = serde_json::from_str(text).ok()?;
        (env.kind == "control").then_some(env.control)
    }
}

#[derive(Serialize)]
struct Typed<'a, T: Serialize> {
    #[serde(rename = "type")]
    kind: &'a str,
    #[serde(flatten)]
    body: T,
}

fn frame<T: Serialize>(kind: &str, body: T) -> String {
    serde_json::to_string(&Typed { kind, body }).expect("frames serialize")
}

pub fn hello_frame() -> String {
    frame("hello", serde_json::json!({ "schema": SCHEMA }))
}

pub fn tick_frame(row: &TickRow) -> String {
    frame("tick", row)
}

pub fn event_frame(ev: &SessionEvent) -> String {
    frame("event", ev)
}

pub fn ack_frame(action: &str) -> String {
    frame("ack", serde_json::json!({ "action": action }))
}

pub fn error_frame(reason: &str) -> String {
    frame("error", serde_json::json!({ "reason": reason }))
}

/// A control waiting for the session owner, with the queue of the client
/// that sent it.
pub struct ControlRequest {
    pub control: Control,
    client: Arc<ClientQueue>,
}

impl ControlRequest {
    pub fn ack(&self) {
        self.client.push(ack_frame(self.control.name()));
    }

    pub fn reject(&self, reason: &str) {
        self.client.push(error_frame(reason));
    }
}

/// Applies `control` to `session`. `synth` is the live source when it is
/// synthetic; noise changes are refused otherwise. Errors are wire reasons.
pub fn apply_control(
    session: &mut Session,
    control: &Control,
    synth: Option<&mut DopplerSynth>,
) -> Result<Option<SessionEvent>, &'static str> {
    let reason = |e: PipelineError| match e {
        PipelineError::SessionStopped => "session_stopped",
        _ => "bad_action",
    };
    match control {
        Control::Start => session.start().map_err(reason),
        Control::Stop => {
            if session.is_stopped() {
                return Err("session_stopped");
            }
            session.stop();
            Ok(session.events().last().cloned())
        }
        Control::MarkReposition { note } => session
            .mark_reposition(note.clone())
            .map(Some)
            .map_err(reason),
        Control::SetNoise { level } => {
            if session.is_stopped() {
                return Err("session_stopped");
            }
            let synth = synth.ok_or("bad_action")?;
            synth.set_noise_level(*level).map_err(|_| "bad_action")?;
            Ok(None)
        }
    }
}

#[derive(Default)]
struct Hub {
    clients: Mutex<Vec<Arc<ClientQueue>>>,
}

impl Hub {
    fn broadcast(&self, text: &str) {
        let mut clients = self.clients.lock().unwrap();
        clients.retain(|c| !c.is_closed());
        for c in clients.iter() {
            c.push(text.to_string());
        }
    }
}

/// A running `/live` endpoint.
pub struct Gateway {
    addr: SocketAddr,
    hub: Arc<Hub>,
    controls: Receiver<ControlRequest>,
    shutdown: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl Gateway {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Gateway, GatewayError> {
        let addr = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| std::io::Error::new(ErrorKind::InvalidInput, "no address"))?;
        let listener = TcpListener::bind(addr).map_err(|e| match e.kind() {
            ErrorKind::AddrInUse => GatewayError::PortInUse(addr.port()),
            _ => GatewayError::Io(e),
        })?;
        listener.set_nonblocking(true)?;
        let local = listener.local_addr()?;
        let hub = Arc::new(Hub::default());
        let shutdown = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::channel();
        let acceptor = {
            let hub = hub.clone();
            let shutdown = shutdown.clone();
            thread::Builder::new()
                .name("gateway-accept".into())
                .spawn(move || accept_loop(listener, hub, tx, shutdown))?
        };
        log::info!("gateway listening on ws://{local}{LIVE_PATH}");
        Ok(Gateway {
            addr: local,
            hub,
            controls: rx,
            shutdown,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn client_count(&self) -> usize {
        let mut clients = self.hub.clients.lock().unwrap();
        clients.retain(|c| !c.is_closed());
        clients.len()
    }

    pub fn broadcast_tick(&self, tick: &TickReport) {
        self.hub.broadcast(&tick_frame(&TickRow::from(tick)));
    }

    pub fn broadcast_row(&self, row: &TickRow) {
        self.hub.broadcast(&tick_frame(row));
    }

    pub fn broadcast_event(&self, ev: &SessionEvent) {
        self.hub.broadcast(&event_frame(ev));
    }

    /// Next pending control, if any.
    pub fn try_control(&self) -> Option<ControlRequest> {
        self.controls.try_recv().ok()
    }

    pub fn wait_control(&self, timeout: Duration) -> Option<ControlRequest> {
        self.controls.recv_timeout(timeout).ok()
    }

    /// Applies every pending control to `session`, answers the senders and
    /// broadcasts resulting events. Returns how many controls were handled.
    pub fn service(&self, session: &mut Session, mut synth: Option<&mut DopplerSynth>) -> usize {
        let mut n = 0;
        while let Some(req) = self.try_control() {
            n += 1;
            match apply_control(session, &req.control, synth.as_deref_mut()) {
                Ok(ev) => {
                    req.ack();
                    if let Some(ev) = ev {
                        self.broadcast_event(&ev);
                    }
                }
                Err(reason) => req.reject(reason),
            }
        }
        n
    }

    /// Lets every connected client drain its queue, up to `timeout`.
    pub fn flush(&self, timeout: Duration) {
        let deadline = std::time::Instant::now() + timeout;
        while std::time::Instant::now() < deadline {
            let busy = self
                .hub
                .clients
                .lock()
                .unwrap()
                .iter()
                .any(|c| !c.is_closed() && !c.is_empty());
            if !busy {
                return;
            }
            thread::sleep(POLL);
        }
    }

    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn accept_loop(
    listener: TcpListener,
    hub: Arc<Hub>,
    controls: Sender<ControlRequest>,
    shutdown: Arc<AtomicBool>,
) {
    let mut workers = Vec::new();
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let hub = hub.clone();
                let controls = controls.clone();
                let shutdown = shutdown.clone();
                let spawned = thread::Builder::new()
                    .name(format!("gateway-{peer}"))
                    .spawn(move || {
                        if let Err(e) = serve_client(stream, &hub, &controls, &shutdown) {
                            log::debug!("client {peer}: {e}");
                        }
                    });
                match spawned {
                    Ok(h) => workers.push(h),
                    Err(e) => log::warn!("cannot spawn client thread: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
        workers.retain(|h| !h.is_finished());
    }
    for h in workers {
        let _ = h.join();
    }
}

fn check_path(req: &Request, resp: Response) -> Result<Response, ErrorResponse> {
    if req.uri().path() == LIVE_PATH {
        Ok(resp)
    } else {
        let mut err = ErrorResponse::new(Some(format!("no endpoint at {}", req.uri().path())));
        *err.status_mut() = tungstenite::http::StatusCode::NOT_FOUND;
        Err(err)
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io)
        if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn serve_client(
    stream: TcpStream,
    hub: &Hub,
    controls: &Sender<ControlRequest>,
    shutdown: &AtomicBool,
) -> Result<(), tungstenite::Error> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut ws: WebSocket<TcpStream> =
        tungstenite::accept_hdr(stream, check_path).map_err(|e| match e {
            tungstenite::HandshakeError::Failure(e) => e,
            tungstenite::HandshakeError::Interrupted(_) => {
                tungstenite::Error::Io(std::io::Error::new(ErrorKind::WouldBlock, "handshake stalled"))
            }
        })?;
    ws.get_mut().set_read_timeout(Some(POLL))?;

    let queue = Arc::new(ClientQueue::new(QUEUE_DEPTH));
    // registered before the hello goes out, so a client that has seen the
    // hello is sure to get every later broadcast
    hub.clients.lock().unwrap().push(queue.clone());
    ws.send(Message::Text(hello_frame()))?;
    let result = client_loop(&mut ws, &queue, controls, shutdown);
    queue.close();
    let _ = ws.close(None);
    let _ = ws.flush();
    result
}

fn client_loop(
    ws: &mut WebSocket<TcpStream>,
    queue: &Arc<ClientQueue>,
    controls: &Sender<ControlRequest>,
    shutdown: &AtomicBool,
) -> Result<(), tungstenite::Error> {
    while !shutdown.load(Ordering::SeqCst) {
        for text in queue.drain() {
            ws.send(Message::Text(text))?;
        }
        match ws.read() {
            Ok(Message::Text(text)) => match Control::parse(&text) {
                Some(control) => {
                    let req = ControlRequest {
                        control,
                        client: queue.clone(),
                    };
                    if controls.send(req).is_err() {
                        queue.push(error_frame("session_stopped"));
                    }
                }
                None => queue.push(error_frame("bad_action")),
            },
            Ok(Message::Binary(_)) => queue.push(error_frame("bad_action")),
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                return Ok(())
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pulsepipe::pipeline::EventKind;
    use pulsepipe::synth::DopplerParams;
    use pulsepipe::PipelineConfig;

    #[test]
    fn parses_controls() {
        assert_eq!(
            Control::parse(r#"{"type":"control","action":"start"}"#),
            Some(Control::Start)
        );
        assert_eq!(
            Control::parse(r#"{"type":"control","action":"mark_reposition","note":"left"}"#),
            Some(Control::MarkReposition {
                note: Some("left".into())
            })
        );
        assert_eq!(
            Control::parse(r#"{"type":"control","action":"set_noise","level":0.3}"#),
            Some(Control::SetNoise { level: 0.3 })
        );
        for bad in [
            "garbage",
            r#"{"type":"control","action":"explode"}"#,
            r#"{"type":"tick","action":"stop"}"#,
            r#"{"type":"control","action":"set_noise"}"#,
        ] {
            assert_eq!(Control::parse(bad), None, "{bad}");
        }
    }

    #[test]
    fn frame_shapes() {
        assert_eq!(hello_frame(), r#"{"type":"hello","schema":"pulsepipe/1"}"#);
        assert_eq!(ack_frame("stop"), r#"{"type":"ack","action":"stop"}"#);
        assert_eq!(error_frame("bad_action"), r#"{"type":"error","reason":"bad_action"}"#);
        let ev = SessionEvent {
            kind: EventKind::DataLost,
            t_s: 12.0,
            note: None,
        };
        assert_eq!(event_frame(&ev), r#"{"type":"event","kind":"data_lost","t_s":12.0}"#);
    }

    #[test]
    fn control_effects() {
        let mut s = Session::new(&PipelineConfig::default()).unwrap();
        assert_eq!(
            apply_control(&mut s, &Control::MarkReposition { note: None }, None),
            Err("bad_action")
        );
        let ev = apply_control(&mut s, &Control::Start, None).unwrap().unwrap();
        assert_eq!(ev.kind, EventKind::Started);
        assert_eq!(
            apply_control(&mut s, &Control::SetNoise { level: 0.2 }, None),
            Err("bad_action")
        );
        let mut synth = DopplerSynth::new(DopplerParams::new(140.0, 0.05, 1)).unwrap();
        assert_eq!(
            apply_control(&mut s, &Control::SetNoise { level: 0.2 }, Some(&mut synth)),
            Ok(None)
        );
        assert_eq!(synth.params().noise_level, 0.2);
        assert_eq!(
            apply_control(&mut s, &Control::SetNoise { level: -1.0 }, Some(&mut synth)),
            Err("bad_action")
        );
        let ev = apply_control(&mut s, &Control::Stop, None).unwrap().unwrap();
        assert_eq!(ev.kind, EventKind::Stopped);
        assert_eq!(apply_control(&mut s, &Control::Stop, None), Err("session_stopped"));
        assert_eq!(
            apply_control(&mut s, &Control::MarkReposition { note: None }, None),
            Err("session_stopped")
        );
    }

    #[test]
    fn second_bind_reports_port_in_use() {
        let g = Gateway::bind("127.0.0.1:0").unwrap();
        let port = g.local_addr().port();
        match Gateway::bind(("127.0.0.1", port)) {
            Err(GatewayError::PortInUse(p)) => assert_eq!(p, port),
            other => panic!("{:?}", other.map(|g| g.local_addr())),
        }
    }
}
