//! Starts a lockstep session on the dental-stone scenario and steers it
//! over the websocket protocol the way a UI would: read the scene, push
//! toward the target in bursts of ticks and watch the clearance.
//!
//! cargo run --release --example steering_client

use std::path::Path;
use tungstenite::Message;
use vfguide::service::{self, ClientMessage, ServerMessage, ServiceConfig};
use vfguide::sim::{Scenario, Simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/dental_stone_analog.json");
    let scenario = Scenario::load(&path)?;
    let sim = Simulation::from_scenario(&scenario)?;
    let handle = service::spawn("127.0.0.1:0", sim, &scenario.name, ServiceConfig::lockstep())?;
    let (mut ws, _) = tungstenite::connect(format!("ws://{}", handle.local_addr()))?;

    let mut request = |msg: ClientMessage| -> Result<ServerMessage, Box<dyn std::error::Error>> {
        ws.send(Message::text(serde_json::to_string(&msg)?))?;
        loop {
            if let Message::Text(t) = ws.read()? {
                return Ok(serde_json::from_str(t.as_str())?);
            }
        }
    };

    if let ServerMessage::Scene(s) = request(ClientMessage::Scene)? {
        println!("scene {} as {:?}, grid {:?}", s.name, s.role, s.dims);
        for a in &s.anatomies {
            println!("  anatomy {} ({}) tau0 {} tauf {}", a.label, a.name, a.tau0_mm, a.tauf_mm);
        }
    }

    // straight down at 4 N, 500 ticks per request
    for _ in 0..12 {
        match request(ClientMessage::HandForce { f: [0.0, 0.0, -4.0], ticks: Some(500) })? {
            ServerMessage::Snapshot(s) => println!(
                "t {:5.2} s  tip z {:6.2} mm  clearance {:+.3} mm  F_c z {:+.2} N  drilled {:.1} mm^3",
                s.time,
                s.tip[2],
                s.clearance.iter().map(|c| c.d).fold(f64::INFINITY, f64::min),
                s.f_c[2],
                s.drilled_volume
            ),
            other => println!("{other:?}"),
        }
    }

    request(ClientMessage::ToggleVf { on: false })?;
    if let ServerMessage::Snapshot(s) = request(ClientMessage::HandForce { f: [0.0, 0.0, -4.0], ticks: Some(2000) })? {
        let damage: f64 = s.damage_volume.iter().map(|d| d.mm3).sum();
        println!("fixture off for 2 s: breach {}, damage {damage:.2} mm^3", s.breach);
    }
    ws.close(None)?;
    let _ = ws.flush();
    handle.shutdown();
    Ok(())
}
