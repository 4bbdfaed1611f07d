//! TCP and WebSocket links. Each connection gets one I/O thread that
//! writes queued frames (through the latency injector), reads and decodes
//! incoming frames, and keeps the heartbeat. The owner talks to it through
//! an [`Inbox`] and an outgoing queue, never through the socket.

use std::collections::VecDeque;
use std::io::{self, ErrorKind, Read};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use tungstenite::WebSocket;

use super::frame::{FrameReader, ReaderStats};
use super::latency::{LatencyInjector, LatencyModel};
use super::message::{Control, Message};
use super::observation::ObservationFrame;
use crate::action::ActionCommand;
use crate::input::InputEvent;

pub const HEARTBEAT_PERIOD: Duration = Duration::from_secs(1);
pub const HEARTBEAT_TIMEOUT: Duration = Duration::from_secs(3);
pub const ACTION_QUEUE_CAPACITY: usize = 64;
const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
    #[error("cannot resolve '{0}'")]
    Resolve(String),
    #[error("could not connect to {endpoint} after {attempts} attempts: {source}")]
    Connect {
        endpoint: String,
        attempts: u32,
        source: io::Error,
    },
    #[error("cannot listen on {endpoint}: {source}")]
    Bind { endpoint: String, source: io::Error },
    #[error("websocket handshake failed: {0}")]
    Handshake(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Monotonic microseconds anchored to the Unix epoch at creation, so
/// timestamps from two processes on one host are comparable.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    start: Instant,
    epoch_us: u64,
}

impl Clock {
    pub fn new() -> Self {
        let epoch_us = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_micros() as u64);
        Self {
            start: Instant::now(),
            epoch_us,
        }
    }

    pub fn now_us(&self) -> u64 {
        self.epoch_us + self.start.elapsed().as_micros() as u64
    }

    /// Sleeps until the clock reads `t_us`.
    pub fn sleep_until(&self, t_us: u64) {
        let now = self.now_us();
        if t_us > now {
            thread::sleep(Duration::from_micros(t_us - now));
        }
    }
}

impl Default for Clock {
    fn default() -> Self {
        Self::new()
    }
}

/// Which end of the link this is. The operator end originates heartbeats;
/// the robot end echoes them back so the operator can measure round-trip
/// time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Robot,
    Operator,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub reader: ReaderStats,
    pub decode_errors: u64,
    pub actions_dropped: u64,
    pub sent_frames: u64,
    pub latency_dropped: u64,
}

#[derive(Default)]
struct InboxState {
    actions: VecDeque<(u64, ActionCommand)>,
    events: VecDeque<(u64, Vec<InputEvent>)>,
    observation: Option<(u64, ObservationFrame)>,
    controls: VecDeque<Control>,
    last_heartbeat_us: Option<u64>,
    rtt_us: Option<u64>,
    stats: LinkStats,
}

/// Receive side of a link. Actions are kept in arrival order up to
/// [`ACTION_QUEUE_CAPACITY`] (oldest dropped first); observations keep only
/// the latest.
pub struct Inbox {
    state: Mutex<InboxState>,
    closed: AtomicBool,
    connected_us: u64,
}

impl Inbox {
    fn lock(&self) -> MutexGuard<'_, InboxState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn push_action(&self, now: u64, cmd: ActionCommand) {
        let mut s = self.lock();
        if s.actions.len() == ACTION_QUEUE_CAPACITY {
            s.actions.pop_front();
            s.stats.actions_dropped += 1;
        }
        s.actions.push_back((now, cmd));
    }

    fn push_events(&self, now: u64, events: Vec<InputEvent>) {
        let mut s = self.lock();
        if s.events.len() == ACTION_QUEUE_CAPACITY {
            s.events.pop_front();
            s.stats.actions_dropped += 1;
        }
        s.events.push_back((now, events));
    }
}

/// One end of an established connection.
pub struct Link {
    inbox: Arc<Inbox>,
    outgoing: Option<Sender<Message>>,
    io: Option<JoinHandle<()>>,
    peer: String,
    clock: Clock,
}

trait FrameIo: Send {
    fn send(&mut self, frame: &[u8]) -> io::Result<()>;
    /// Feeds whatever arrives within the poll interval into `reader`.
    /// Returns false once the peer has closed the connection.
    fn poll(&mut self, reader: &mut FrameReader) -> io::Result<bool>;
}

struct TcpIo {
    stream: TcpStream,
    buf: Vec<u8>,
}

impl FrameIo for TcpIo {
    fn send(&mut self, frame: &[u8]) -> io::Result<()> {
        use std::io::Write;
        self.stream.write_all(frame)
    }

    fn poll(&mut self, reader: &mut FrameReader) -> io::Result<bool> {
        match self.stream.read(&mut self.buf) {
            Ok(0) => Ok(false),
            Ok(n) => {
                reader.push(&self.buf[..n]);
                Ok(true)
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {
                Ok(true)
            }
            Err(e) => Err(e),
        }
    }
}

/// One complete frame per binary WebSocket message.
struct WsIo {
    ws: WebSocket<TcpStream>,
}

fn ws_err(e: tungstenite::Error) -> io::Error {
    match e {
        tungstenite::Error::Io(e) => e,
        other => io::Error::other(other.to_string()),
    }
}

impl FrameIo for WsIo {
    fn send(&mut self, frame: &[u8]) -> io::Result<()> {
        self.ws
            .send(tungstenite::Message::binary(frame.to_vec()))
            .map_err(ws_err)
    }

    fn poll(&mut self, reader: &mut FrameReader) -> io::Result<bool> {
        match self.ws.read() {
            Ok(tungstenite::Message::Binary(b)) => {
                reader.push(&b);
                Ok(true)
            }
            Ok(tungstenite::Message::Close(_)) => Ok(false),
            Ok(_) => Ok(true),
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => Ok(false),
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) =>
            {
                Ok(true)
            }
            Err(e) => Err(ws_err(e)),
        }
    }
}

struct IoLoop {
    io: Box<dyn FrameIo>,
    role: Role,
    clock: Clock,
    inbox: Arc<Inbox>,
    outgoing: Receiver<Message>,
    injector: LatencyInjector<Vec<u8>>,
    reader: FrameReader,
    next_heartbeat_us: u64,
}

impl IoLoop {
    fn run(mut self) {
        if let Err(e) = self.run_inner() {
            log::warn!("link closed: {e}");
        }
        self.inbox.closed.store(true, Ordering::SeqCst);
    }

    fn enqueue(&mut self, now: u64, msg: &Message) {
        if !self.injector.push(now, msg.encode()) {
            self.inbox.lock().stats.latency_dropped += 1;
        }
    }

    fn run_inner(&mut self) -> io::Result<()> {
        let mut draining = false;
        loop {
            let now = self.clock.now_us();
            if !draining {
                loop {
                    match self.outgoing.try_recv() {
                        Ok(msg) => self.enqueue(now, &msg),
                        Err(TryRecvError::Empty) => break,
                        Err(TryRecvError::Disconnected) => {
                            draining = true;
                            break;
                        }
                    }
                }
            }
            if self.role == Role::Operator && !draining && now >= self.next_heartbeat_us {
                self.enqueue(now, &Message::Heartbeat { timestamp_us: now });
                self.next_heartbeat_us = now + HEARTBEAT_PERIOD.as_micros() as u64;
            }
            for (_, frame) in self.injector.pop_due(now) {
                self.io.send(&frame)?;
                self.inbox.lock().stats.sent_frames += 1;
            }
            if draining && self.injector.pending() == 0 {
                return Ok(());
            }
            if !self.io.poll(&mut self.reader)? {
                return Ok(());
            }
            self.dispatch();
        }
    }

    fn dispatch(&mut self) {
        while let Some(frame) = self.reader.next_frame() {
            let now = self.clock.now_us();
            let msg = match Message::decode(&frame) {
                Ok(m) => m,
                Err(e) => {
                    log::debug!("undecodable {:?} frame: {e}", frame.msg_type);
                    self.inbox.lock().stats.decode_errors += 1;
                    continue;
                }
            };
            match msg {
                Message::Action(cmd) => self.inbox.push_action(now, cmd),
                Message::InputEvents(ev) => self.inbox.push_events(now, ev),
                Message::Observation(obs) => self.inbox.lock().observation = Some((now, obs)),
                Message::Control(c) => self.inbox.lock().controls.push_back(c),
                Message::Heartbeat { timestamp_us } => {
                    {
                        let mut s = self.inbox.lock();
                        s.last_heartbeat_us = Some(now);
                        if self.role == Role::Operator {
                            s.rtt_us = Some(now.saturating_sub(timestamp_us));
                        }
                    }
                    if self.role == Role::Robot {
                        self.enqueue(now, &Message::Heartbeat { timestamp_us });
                    }
                }
            }
        }
        let reader_stats = self.reader.stats();
        self.inbox.lock().stats.reader = reader_stats;
    }
}

impl Link {
    fn spawn(io: Box<dyn FrameIo>, role: Role, latency: LatencyModel, clock: Clock, peer: String) -> Self {
        let (tx, rx) = mpsc::channel();
        let inbox = Arc::new(Inbox {
            state: Mutex::new(InboxState::default()),
            closed: AtomicBool::new(false),
            connected_us: clock.now_us(),
        });
        let io_loop = IoLoop {
            io,
            role,
            clock,
            inbox: inbox.clone(),
            outgoing: rx,
            injector: LatencyInjector::new(latency),
            reader: FrameReader::new(),
            next_heartbeat_us: 0,
        };
        let handle = thread::Builder::new()
            .name(format!("link-{peer}"))
            .spawn(move || io_loop.run())
            .expect("spawn link thread");
        Self {
            inbox,
            outgoing: Some(tx),
            io: Some(handle),
            peer,
            clock,
        }
    }

    fn from_tcp(stream: TcpStream, role: Role, latency: LatencyModel, clock: Clock) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(POLL))?;
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
        let io = TcpIo {
            stream,
            buf: vec![0; 64 * 1024],
        };
        Ok(Self::spawn(Box::new(io), role, latency, clock, peer))
    }

    fn from_ws(ws: WebSocket<TcpStream>, role: Role, latency: LatencyModel, clock: Clock) -> io::Result<Self> {
        ws.get_ref().set_nodelay(true)?;
        ws.get_ref().set_read_timeout(Some(POLL))?;
        let peer = ws.get_ref().peer_addr().map(|a| a.to_string()).unwrap_or_default();
        Ok(Self::spawn(Box::new(WsIo { ws }), role, latency, clock, peer))
    }

    pub fn peer(&self) -> &str {
        &self.peer
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn send(&self, msg: Message) {
        if let Some(tx) = &self.outgoing {
            // a closed link just discards; liveness is reported separately
            let _ = tx.send(msg);
        }
    }

    /// Actions received since the last call, with their receive times.
    pub fn take_actions(&self) -> Vec<(u64, ActionCommand)> {
        self.inbox.lock().actions.drain(..).collect()
    }

    pub fn take_input_events(&self) -> Vec<(u64, Vec<InputEvent>)> {
        self.inbox.lock().events.drain(..).collect()
    }

    pub fn latest_observation(&self) -> Option<(u64, ObservationFrame)> {
        self.inbox.lock().observation.take()
    }

    pub fn take_controls(&self) -> Vec<Control> {
        self.inbox.lock().controls.drain(..).collect()
    }

    pub fn rtt_us(&self) -> Option<u64> {
        self.inbox.lock().rtt_us
    }

    pub fn stats(&self) -> LinkStats {
        self.inbox.lock().stats
    }

    pub fn is_closed(&self) -> bool {
        self.inbox.closed.load(Ordering::SeqCst)
    }

    /// True while the connection is open and a heartbeat arrived within
    /// [`HEARTBEAT_TIMEOUT`] (counting from connection time before the first).
    pub fn is_alive(&self, now_us: u64) -> bool {
        if self.is_closed() {
            return false;
        }
        let last = self.inbox.lock().last_heartbeat_us.unwrap_or(self.inbox.connected_us);
        now_us.saturating_sub(last) <= HEARTBEAT_TIMEOUT.as_micros() as u64
    }

    /// Delivers everything still queued (honouring the latency model), then
    /// closes the connection.
    pub fn close(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.outgoing.take();
        if let Some(h) = self.io.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Link {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn resolve(endpoint: &str) -> Result<SocketAddr, LinkError> {
    endpoint
        .to_socket_addrs()
        .ok()
        .and_then(|mut a| a.next())
        .ok_or_else(|| LinkError::Resolve(endpoint.to_string()))
}

#[derive(Debug, Clone, Copy)]
pub struct ConnectOptions {
    pub attempts: u32,
    pub retry_delay: Duration,
    pub latency: LatencyModel,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        Self {
            attempts: 10,
            retry_delay: Duration::from_millis(300),
            latency: LatencyModel::NONE,
        }
    }
}

fn connect_tcp(endpoint: &str, opts: &ConnectOptions) -> Result<TcpStream, LinkError> {
    let addr = resolve(endpoint)?;
    let mut last = None;
    for attempt in 1..=opts.attempts.max(1) {
        match TcpStream::connect_timeout(&addr, Duration::from_secs(2)) {
            Ok(s) => return Ok(s),
            Err(e) => {
                log::info!("connect {endpoint} attempt {attempt} failed: {e}");
                last = Some(e);
                thread::sleep(opts.retry_delay);
            }
        }
    }
    Err(LinkError::Connect {
        endpoint: endpoint.to_string(),
        attempts: opts.attempts.max(1),
        source: last.unwrap_or_else(|| io::Error::other("no attempt made")),
    })
}

/// Operator side over plain TCP.
pub fn connect(endpoint: &str, opts: ConnectOptions, clock: Clock) -> Result<Link, LinkError> {
    let stream = connect_tcp(endpoint, &opts)?;
    Ok(Link::from_tcp(stream, Role::Operator, opts.latency, clock)?)
}

/// Operator side over WebSocket, the transport used by browser clients.
pub fn connect_ws(endpoint: &str, opts: ConnectOptions, clock: Clock) -> Result<Link, LinkError> {
    let stream = connect_tcp(endpoint, &opts)?;
    let (ws, _) = tungstenite::client(format!("ws://{endpoint}/"), stream)
        .map_err(|e| LinkError::Handshake(e.to_string()))?;
    Ok(Link::from_ws(ws, Role::Operator, opts.latency, clock)?)
}

/// Robot side: a TCP listener and optionally a WebSocket listener, serving
/// one operator at a time.
pub struct Server {
    tcp: TcpListener,
    ws: Option<TcpListener>,
    latency: LatencyModel,
    clock: Clock,
}

impl Server {
    pub fn bind(endpoint: &str, ws_endpoint: Option<&str>, latency: LatencyModel, clock: Clock) -> Result<Self, LinkError> {
        let listen = |ep: &str| -> Result<TcpListener, LinkError> {
            let l = TcpListener::bind(ep).map_err(|source| LinkError::Bind {
                endpoint: ep.to_string(),
                source,
            })?;
            l.set_nonblocking(true)?;
            Ok(l)
        };
        Ok(Self {
            tcp: listen(endpoint)?,
            ws: ws_endpoint.map(listen).transpose()?,
            latency,
            clock,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.tcp.local_addr()
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws.as_ref().and_then(|l| l.local_addr().ok())
    }

    /// Waits up to `timeout` for an operator on either listener.
    pub fn accept(&self, timeout: Duration) -> Result<Option<Link>, LinkError> {
        let deadline = Instant::now() + timeout;
        loop {
            match self.tcp.accept() {
                Ok((s, addr)) => {
                    s.set_nonblocking(false)?;
                    log::info!("operator connected from {addr}");
                    return Ok(Some(Link::from_tcp(s, Role::Robot, self.latency, self.clock)?));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => {}
                Err(e) => return Err(e.into()),
            }
            if let Some(ws) = &self.ws {
                match ws.accept() {
                    Ok((s, addr)) => {
                        s.set_nonblocking(false)?;
                        s.set_read_timeout(Some(Duration::from_secs(5)))?;
                        match tungstenite::accept(s) {
                            Ok(socket) => {
                                log::info!("websocket operator connected from {addr}");
                                return Ok(Some(Link::from_ws(socket, Role::Robot, self.latency, self.clock)?));
                            }
                            Err(e) => log::warn!("websocket handshake from {addr} failed: {e}"),
                        }
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => {}
                    Err(e) => return Err(e.into()),
                }
            }
            if Instant::now() >= deadline {
                return Ok(None);
            }
            thread::sleep(POLL);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{BaseVelocity, Tagged};

    fn wait_for<T>(mut f: impl FnMut() -> Option<T>) -> T {
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            if let Some(v) = f() {
                return v;
            }
            assert!(Instant::now() < deadline, "timed out");
            thread::sleep(Duration::from_millis(2));
        }
    }

    fn command() -> ActionCommand {
        let mut cmd = ActionCommand::empty(42);
        cmd.base = Some(Tagged::new(BaseVelocity::new(0.1, 0.0, 0.2), "kb"));
        cmd
    }

    #[test]
    fn loopback_action_arrives_identically() {
        let clock = Clock::new();
        let server = Server::bind("127.0.0.1:0", None, LatencyModel::NONE, clock).unwrap();
        let addr = server.local_addr().unwrap().to_string();
        let client = connect(&addr, ConnectOptions::default(), clock).unwrap();
        let robot = server.accept(Duration::from_secs(5)).unwrap().unwrap();
        client.send(Message::Action(command()));
        let got = wait_for(|| robot.take_actions().pop());
        assert_eq!(got.1, command());
        // heartbeat echo gives a round-trip estimate
        wait_for(|| client.rtt_us());
    }

    #[test]
    fn websocket_carries_the_same_frames() {
        let clock = Clock::new();
        let server = Server::bind("127.0.0.1:0", Some("127.0.0.1:0"), LatencyModel::NONE, clock).unwrap();
        let addr = server.ws_addr().unwrap().to_string();
        let t = thread::spawn(move || connect_ws(&addr, ConnectOptions::default(), clock).unwrap());
        let robot = server.accept(Duration::from_secs(5)).unwrap().unwrap();
        let client = t.join().unwrap();
        client.send(Message::Action(command()));
        assert_eq!(wait_for(|| robot.take_actions().pop()).1, command());
        robot.send(Message::Observation(ObservationFrame::default()));
        assert_eq!(wait_for(|| client.latest_observation()).1, ObservationFrame::default());
    }

    #[test]
    fn dropped_client_is_detected() {
        let clock = Clock::new();
        let server = Server::bind("127.0.0.1:0", None, LatencyModel::NONE, clock).unwrap();
        let addr = server.local_addr().unwrap().to_string();
        let client = connect(&addr, ConnectOptions::default(), clock).unwrap();
        let robot = server.accept(Duration::from_secs(5)).unwrap().unwrap();
        assert!(robot.is_alive(clock.now_us()));
        client.close();
        wait_for(|| (!robot.is_alive(clock.now_us())).then_some(()));
    }

    #[test]
    fn connect_failure_reports_attempts() {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = l.local_addr().unwrap().to_string();
        drop(l);
        let opts = ConnectOptions {
            attempts: 2,
            retry_delay: Duration::from_millis(10),
            ..Default::default()
        };
        match connect(&addr, opts, Clock::new()) {
            Err(LinkError::Connect { attempts: 2, .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("connected to a closed port"),
        }
    }

    #[test]
    fn action_queue_drops_oldest() {
        let inbox = Inbox {
            state: Mutex::new(InboxState::default()),
            closed: AtomicBool::new(false),
            connected_us: 0,
        };
        for i in 0..100 {
            inbox.push_action(i, ActionCommand::empty(i));
        }
        let s = inbox.lock();
        assert_eq!(s.actions.len(), ACTION_QUEUE_CAPACITY);
        assert_eq!(s.actions.front().unwrap().1.timestamp_us, 36);
        assert_eq!(s.stats.actions_dropped, 36);
    }
}
