//! Interactive session host. One thread owns the simulation; each websocket
//! client gets an I/O thread that talks to it only through queues.
//!
//! In [`ClockMode::Realtime`] the simulation ticks on a wall clock at its
//! control rate and holds the last hand force between messages; snapshots
//! go out every `snapshot_every` ticks, latest-wins per client. In
//! [`ClockMode::Lockstep`] nothing moves until the steering client sends
//! `hand_force`, which advances an exact number of ticks and answers with a
//! snapshot, so a scripted client can replay a run deterministically.

mod protocol;

pub use protocol::{AnatomyInfo, ClientMessage, Role, SceneInfo, ServerMessage, VolumeMessage, VOLUME_ENCODING};

use crate::sim::{Scenario, Simulation};
use crossbeam_channel::{bounded, Receiver, Sender, TrySendError};
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};
use tungstenite::{Message, WebSocket};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Realtime,
    Lockstep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceConfig {
    pub mode: ClockMode,
    /// Realtime snapshot period in ticks (33 ≈ 30 Hz at 1 kHz).
    pub snapshot_every: u64,
    /// Largest accepted ‖hand_force‖ (N).
    pub max_force_n: f64,
    /// Keep the per-tick trace (unbounded memory in long realtime sessions).
    pub record_trace: bool,
    /// Cap on `ticks` in one lockstep request.
    pub max_lockstep_ticks: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { mode: ClockMode::Realtime, snapshot_every: 33, max_force_n: 20.0, record_trace: false, max_lockstep_ticks: 600_000 }
    }
}

impl ServiceConfig {
    pub fn lockstep() -> Self {
        Self { mode: ClockMode::Lockstep, record_trace: true, ..Self::default() }
    }
}

type Slot = Arc<Mutex<Option<Arc<str>>>>;

enum Event {
    Connected { id: u64, outbox: Sender<String>, latest: Slot },
    Message { id: u64, msg: ClientMessage },
    Disconnected { id: u64 },
    Loaded { requester: u64, result: Result<(Simulation, String), String> },
    Shutdown,
}

struct Client {
    id: u64,
    outbox: Sender<String>,
    latest: Slot,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    events: Sender<Event>,
    sim_thread: JoinHandle<Simulation>,
    accept_thread: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops all threads and returns the simulation as it was left,
    /// including its recorded trace.
    pub fn shutdown(self) -> Simulation {
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.events.send(Event::Shutdown);
        let sim = self.sim_thread.join().expect("simulation thread panicked");
        let _ = self.accept_thread.join();
        sim
    }

    /// Blocks for as long as the session runs.
    pub fn wait(self) -> Simulation {
        let sim = self.sim_thread.join().expect("simulation thread panicked");
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.accept_thread.join();
        sim
    }
}

/// Binds `addr` and starts serving `sim`.
pub fn spawn(addr: impl ToSocketAddrs, mut sim: Simulation, name: &str, config: ServiceConfig) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = bounded::<Event>(1024);
    sim.record_trace = config.record_trace;

    let sim_thread = {
        let tx = tx.clone();
        let name = name.to_string();
        std::thread::Builder::new()
            .name("vf-sim".into())
            .spawn(move || SessionLoop::new(sim, name, config, rx, tx).run())?
    };
    let accept_thread = {
        let (tx, stop) = (tx.clone(), stop.clone());
        std::thread::Builder::new().name("vf-accept".into()).spawn(move || accept_loop(listener, tx, stop))?
    };
    log::info!("session service listening on ws://{local}");
    Ok(ServerHandle { addr: local, stop, events: tx, sim_thread, accept_thread })
}

fn accept_loop(listener: TcpListener, events: Sender<Event>, stop: Arc<AtomicBool>) {
    let mut next_id = 0u64;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                next_id += 1;
                let (id, events, stop) = (next_id, events.clone(), stop.clone());
                let spawned = std::thread::Builder::new()
                    .name(format!("vf-client-{id}"))
                    .spawn(move || client_loop(id, stream, events, stop));
                if let Err(e) = spawned {
                    log::error!("client {peer}: {e}");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::error!("accept: {e}");
                std::thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

fn client_loop(id: u64, stream: TcpStream, events: Sender<Event>, stop: Arc<AtomicBool>) {
    let _ = stream.set_nonblocking(false);
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("client {id}: handshake failed: {e}");
            return;
        }
    };
    let _ = ws.get_ref().set_read_timeout(Some(Duration::from_millis(2)));
    let _ = ws.get_ref().set_nodelay(true);
    let (outbox, inbox) = bounded::<String>(256);
    let latest: Slot = Arc::new(Mutex::new(None));
    if events.send(Event::Connected { id, outbox, latest: latest.clone() }).is_err() {
        return;
    }
    let result = pump(id, &mut ws, &events, &inbox, &latest, &stop);
    if let Err(e) = result {
        log::debug!("client {id}: {e}");
    }
    let _ = events.send(Event::Disconnected { id });
    let _ = ws.close(None);
    let _ = ws.flush();
}

fn pump(
    id: u64,
    ws: &mut WebSocket<TcpStream>,
    events: &Sender<Event>,
    inbox: &Receiver<String>,
    latest: &Slot,
    stop: &AtomicBool,
) -> tungstenite::Result<()> {
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => match serde_json::from_str::<ClientMessage>(text.as_str()) {
                Ok(msg) => {
                    if events.send(Event::Message { id, msg }).is_err() {
                        return Ok(());
                    }
                    // lockstep replies come back within microseconds
                    if let Ok(reply) = inbox.recv_timeout(Duration::from_millis(1)) {
                        ws.send(Message::text(reply))?;
                    }
                }
                Err(e) => ws.send(Message::text(ServerMessage::Error { msg: format!("malformed message: {e}") }.to_json()))?,
            },
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
        while let Ok(reply) = inbox.try_recv() {
            ws.send(Message::text(reply))?;
        }
        let snap = latest.lock().expect("snapshot slot").take();
        if let Some(s) = snap {
            ws.send(Message::text(s.to_string()))?;
        }
    }
    Ok(())
}

struct SessionLoop {
    sim: Simulation,
    name: String,
    config: ServiceConfig,
    rx: Receiver<Event>,
    tx: Sender<Event>,
    clients: Vec<Client>,
    steering: Option<u64>,
    held_force: [f64; 3],
    since_snapshot: u64,
    loading: bool,
}

impl SessionLoop {
    fn new(sim: Simulation, name: String, config: ServiceConfig, rx: Receiver<Event>, tx: Sender<Event>) -> Self {
        Self {
            sim,
            name,
            config,
            rx,
            tx,
            clients: Vec::new(),
            steering: None,
            held_force: [0.0; 3],
            since_snapshot: 0,
            loading: false,
        }
    }

    fn run(mut self) -> Simulation {
        match self.config.mode {
            ClockMode::Lockstep => {
                while let Ok(ev) = self.rx.recv() {
                    if !self.handle(ev) {
                        break;
                    }
                }
            }
            ClockMode::Realtime => {
                let period = Duration::from_secs_f64(self.sim.dt);
                let mut next = Instant::now();
                'outer: loop {
                    while let Ok(ev) = self.rx.try_recv() {
                        if !self.handle(ev) {
                            break 'outer;
                        }
                    }
                    self.sim.step(self.held_force);
                    self.since_snapshot += 1;
                    if self.since_snapshot >= self.config.snapshot_every {
                        self.publish();
                    }
                    next += period;
                    let now = Instant::now();
                    if next > now {
                        std::thread::sleep(next - now);
                    } else if now - next > Duration::from_millis(100) {
                        log::warn!("simulation fell {:?} behind the control clock; resynchronizing", now - next);
                        next = now;
                    }
                }
            }
        }
        self.sim
    }

    fn publish(&mut self) {
        self.since_snapshot = 0;
        let text: Arc<str> = ServerMessage::Snapshot(self.sim.snapshot()).to_json().into();
        for c in &self.clients {
            *c.latest.lock().expect("snapshot slot") = Some(text.clone());
        }
    }

    fn send_to(&self, id: u64, msg: &ServerMessage) {
        if let Some(c) = self.clients.iter().find(|c| c.id == id) {
            match c.outbox.try_send(msg.to_json()) {
                Ok(()) => {}
                Err(TrySendError::Full(_)) => log::warn!("client {id}: reply queue full, dropping reply"),
                Err(TrySendError::Disconnected(_)) => {}
            }
        }
    }

    fn error(&self, id: u64, msg: impl Into<String>) {
        self.send_to(id, &ServerMessage::Error { msg: msg.into() });
    }

    fn role(&self, id: u64) -> Role {
        if self.steering == Some(id) {
            Role::Steering
        } else {
            Role::Observer
        }
    }

    fn ack(&self, id: u64) {
        if self.config.mode == ClockMode::Lockstep {
            self.send_to(id, &ServerMessage::Snapshot(self.sim.snapshot()));
        }
    }

    /// Returns false on shutdown.
    fn handle(&mut self, ev: Event) -> bool {
        match ev {
            Event::Shutdown => return false,
            Event::Connected { id, outbox, latest } => {
                self.clients.push(Client { id, outbox, latest });
                if self.steering.is_none() {
                    self.steering = Some(id);
                }
                log::info!("client {id} connected as {:?}", self.role(id));
            }
            Event::Disconnected { id } => {
                self.clients.retain(|c| c.id != id);
                if self.steering == Some(id) {
                    // safety stop: the next tick already runs with zero force
                    self.held_force = [0.0; 3];
                    self.steering = self.clients.first().map(|c| c.id);
                    log::info!("steering client {id} left; steering now {:?}", self.steering);
                }
            }
            Event::Loaded { requester, result } => {
                self.loading = false;
                match result {
                    Ok((mut sim, name)) => {
                        sim.record_trace = self.config.record_trace;
                        self.sim = sim;
                        self.name = name;
                        self.held_force = [0.0; 3];
                        for c in &self.clients {
                            self.send_to(c.id, &ServerMessage::Scene(SceneInfo::of(&self.sim, &self.name, self.role(c.id))));
                        }
                    }
                    Err(e) => self.error(requester, format!("load_scenario: {e}")),
                }
            }
            Event::Message { id, msg } => self.command(id, msg),
        }
        true
    }

    fn command(&mut self, id: u64, msg: ClientMessage) {
        if msg.is_control() && self.steering != Some(id) {
            self.error(id, "read-only observer: only the steering client may send commands");
            return;
        }
        match msg {
            ClientMessage::HandForce { f, ticks } => {
                if f.iter().any(|c| !c.is_finite()) {
                    return self.error(id, "hand_force: components must be finite");
                }
                let mag = crate::guidance::norm(f);
                if mag > self.config.max_force_n {
                    return self.error(id, format!("hand_force: |f| = {mag} N exceeds the {} N limit", self.config.max_force_n));
                }
                match self.config.mode {
                    ClockMode::Realtime => {
                        if ticks.is_some() {
                            return self.error(id, "hand_force: `ticks` is only accepted in lockstep mode");
                        }
                        self.held_force = f;
                    }
                    ClockMode::Lockstep => {
                        let n = ticks.unwrap_or(1);
                        if n > self.config.max_lockstep_ticks {
                            return self.error(id, format!("hand_force: ticks {n} exceeds {}", self.config.max_lockstep_ticks));
                        }
                        for _ in 0..n {
                            self.sim.step(f);
                        }
                        self.ack(id);
                    }
                }
            }
            ClientMessage::ToggleVf { on } => {
                self.sim.vf_enabled = on;
                self.ack(id);
            }
            ClientMessage::SetDrillPower { on } => {
                self.sim.drill_powered = on;
                self.ack(id);
            }
            ClientMessage::Reset => {
                self.sim.reset();
                self.held_force = [0.0; 3];
                self.ack(id);
            }
            ClientMessage::LoadScenario { scenario } => self.load(id, *scenario),
            ClientMessage::Scene => self.send_to(id, &ServerMessage::Scene(SceneInfo::of(&self.sim, &self.name, self.role(id)))),
            ClientMessage::Volume => self.send_to(id, &ServerMessage::Volume(VolumeMessage::of(&self.sim))),
            ClientMessage::Snapshot => self.send_to(id, &ServerMessage::Snapshot(self.sim.snapshot())),
        }
    }

    fn load(&mut self, id: u64, scenario: Scenario) {
        if self.loading {
            return self.error(id, "load_scenario: a scenario is already loading");
        }
        let build = move || Simulation::from_scenario(&scenario).map(|s| (s, scenario.name.clone())).map_err(|e| e.to_string());
        match self.config.mode {
            // nothing ticks in lockstep, so build inline and keep ordering
            ClockMode::Lockstep => {
                self.handle(Event::Loaded { requester: id, result: build() });
            }
            ClockMode::Realtime => {
                self.loading = true;
                let tx = self.tx.clone();
                let spawned = std::thread::Builder::new().name("vf-load".into()).spawn(move || {
                    let _ = tx.send(Event::Loaded { requester: id, result: build() });
                });
                if let Err(e) = spawned {
                    self.loading = false;
                    self.error(id, format!("load_scenario: {e}"));
                }
            }
        }
    }
}
