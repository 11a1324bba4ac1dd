#![allow(dead_code)]

use std::net::{SocketAddr, TcpStream};
use std::path::PathBuf;
use std::time::Duration;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};
use vfguide::service::{self, ClientMessage, ServerMessage, ServiceConfig};
use vfguide::sim::{ForceSource, Metrics, Scenario, Simulation, Snapshot, TraceRecord};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn bundled(name: &str) -> Scenario {
    Scenario::load(&scenario_path(name)).expect("bundled scenario")
}

/// A 16 mm block of matrix with a sphere in it; small enough for debug builds.
pub fn small_scenario(script: &str, duration_s: f64) -> Scenario {
    let text = format!(
        r#"{{
  "name": "small",
  "volume": {{ "phantom": {{
    "dims": [32, 32, 40], "spacing_mm": [0.5, 0.5, 0.5],
    "primitives": [
      {{ "kind": "box", "label": 1, "name": "matrix", "min_mm": [0,0,0], "max_mm": [16,16,14] }},
      {{ "kind": "sphere", "label": 2, "name": "target", "center_mm": [8,8,6], "radius_mm": 3 }}
    ] }} }},
  "matrix_label": 1,
  "constraints": [ {{ "label": 2, "preset": "dental_stone" }} ],
  "robot": {{ "gantry": {{ "gain": 1.0, "limit_mm": 50.0 }} }},
  "q0": [8.0, 8.0, 16.0],
  "tool": {{ "tip_offset_mm": [0,0,0], "burr_radius_mm": 0.75, "clearance_mode": "burr_surface" }},
  "duration_s": {duration_s},
  "force_script": {script},
  "seed": 11
}}"#
    );
    Scenario::from_json(&text).expect("small scenario")
}

pub struct WsClient {
    ws: WebSocket<MaybeTlsStream<TcpStream>>,
}

impl WsClient {
    pub fn connect(addr: SocketAddr) -> Self {
        let (ws, _) = tungstenite::connect(format!("ws://{addr}")).expect("websocket connect");
        if let MaybeTlsStream::Plain(s) = ws.get_ref() {
            s.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
            s.set_nodelay(true).unwrap();
        }
        Self { ws }
    }

    pub fn send_text(&mut self, text: &str) {
        self.ws.send(Message::text(text)).expect("send");
    }

    pub fn send(&mut self, msg: &ClientMessage) {
        self.send_text(&serde_json::to_string(msg).unwrap());
    }

    pub fn recv(&mut self) -> ServerMessage {
        loop {
            match self.ws.read().expect("read") {
                Message::Text(t) => return serde_json::from_str(t.as_str()).expect("server message"),
                Message::Close(_) => panic!("server closed the connection"),
                _ => {}
            }
        }
    }

    pub fn request(&mut self, msg: &ClientMessage) -> ServerMessage {
        self.send(msg);
        self.recv()
    }

    /// Skips messages until `pick` accepts one.
    pub fn recv_until<T>(&mut self, mut pick: impl FnMut(ServerMessage) -> Option<T>) -> T {
        loop {
            if let Some(v) = pick(self.recv()) {
                return v;
            }
        }
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}

/// Drives a lockstep session with the scenario's force script, one tick per
/// message, choosing each force from the previous snapshot. Returns the
/// session's recorded trace and metrics.
pub fn replay_over_service(s: &Scenario) -> (Vec<TraceRecord>, Metrics) {
    let sim = Simulation::from_scenario(s).expect("scenario");
    let handle = service::spawn("127.0.0.1:0", sim, &s.name, ServiceConfig::lockstep()).expect("spawn");
    let mut client = WsClient::connect(handle.local_addr());
    let mut source = ForceSource::new(&s.force_script, s.seed);
    let mut snap = expect_snapshot(client.request(&ClientMessage::Snapshot));
    for _ in 0..s.ticks() {
        let f = source.force(snap.time, snap.tip);
        snap = expect_snapshot(client.request(&ClientMessage::HandForce { f, ticks: Some(1) }));
    }
    client.close();
    let mut sim = handle.shutdown();
    let metrics = sim.metrics();
    (sim.take_trace(), metrics)
}

pub fn expect_snapshot(m: ServerMessage) -> Snapshot {
    match m {
        ServerMessage::Snapshot(s) => s,
        other => panic!("expected a snapshot, got {other:?}"),
    }
}
