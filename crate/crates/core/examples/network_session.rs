//! Serves the pick-pot task on an ephemeral port and joins it from a
//! scripted operator in the same process, with latency injected on both
//! sides. Pass `ws` to connect over WebSocket instead of TCP.
//!
//!     cargo run --example network_session -- ws

use std::path::Path;
use std::thread;
use std::time::Duration;

use teleop_core::session::{bind, run_connect, run_serve, Overrides, ServeOptions, SessionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ws = std::env::args().nth(1).as_deref() == Some("ws");
    let session = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sessions/pick_pot.toml");
    let load = |o: Overrides| SessionConfig::load(&session, &o);

    let robot_cfg = load(Overrides {
        endpoint: Some("127.0.0.1:0".into()),
        ws_endpoint: ws.then(|| "127.0.0.1:0".into()),
        latency: Some("150,50,0,1".into()),
        ..Default::default()
    })?;
    let server = bind(&robot_cfg)?;
    let addr = match server.ws_addr() {
        Some(a) => format!("ws://{a}"),
        None => server.local_addr()?.to_string(),
    };
    println!("robot listening, operator connects to {addr}");
    let robot = thread::spawn(move || {
        run_serve(&robot_cfg, &server, ServeOptions { accept_timeout: Duration::from_secs(10) })
    });

    let operator = run_connect(&load(Overrides {
        endpoint: Some(addr),
        latency: Some("150,50,0,2".into()),
        ..Default::default()
    })?)?;
    let robot = robot.join().expect("robot thread")?;
    println!("operator: {}", operator.to_json());
    println!("robot:    {}", robot.to_json());
    Ok(())
}
