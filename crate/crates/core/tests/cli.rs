use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use teleop_core::record::{read_manifest, Episode};

fn teleop() -> Command {
    Command::new(env!("CARGO_BIN_EXE_teleop"))
}

fn session() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/sessions/pick_pot.toml")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_local(record: &Path) -> Output {
    teleop()
        .arg("--config")
        .arg(session())
        .arg("--record")
        .arg(record)
        .output()
        .unwrap()
}

#[test]
fn local_session_records_and_replays_in_another_process() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("ep.tmep");
    let out = run_local(&rec);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = json(&out);
    assert_eq!(report["success"], true);
    assert_eq!(report["mode"], "local");
    let hash = report["final_hash"].as_str().unwrap().to_string();

    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ep.report.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
    let manifest = read_manifest(&dir.path().join("manifest.tsv")).unwrap();
    assert_eq!(manifest.len(), 1);
    assert_eq!(format!("{:016x}", manifest[0].final_hash), hash);

    let replayed = teleop().arg("replay").arg(&rec).output().unwrap();
    assert_eq!(replayed.status.code(), Some(0), "{}", stderr(&replayed));
    let r = json(&replayed);
    assert_eq!(r["matches"], true);
    assert_eq!(r["final_hash"], hash.as_str());
    assert_eq!(r["success"], true);
}

#[test]
fn tampered_episode_diverges_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("ep.tmep");
    let out = teleop()
        .args(["--ticks-per-second", "20", "--task", "pick-pot"])
        .arg("--config")
        .arg(session())
        .arg("--record")
        .arg(&rec)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let mut ep = Episode::load(&rec).unwrap();
    ep.records[40].state_hash ^= 1;
    let bad = dir.path().join("bad.tmep");
    ep.save(&bad).unwrap();
    let replayed = teleop().arg("replay").arg(&bad).output().unwrap();
    assert_eq!(replayed.status.code(), Some(1));
    assert_eq!(json(&replayed)["first_divergence"]["tick"], 40);
}

#[test]
fn export_writes_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("ep.tmep");
    assert_eq!(run_local(&rec).status.code(), Some(0));
    let ds = dir.path().join("ds");
    let out = teleop().arg("export").arg(&rec).arg(&ds).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let ticks = Episode::load(&rec).unwrap().len();
    assert_eq!(std::fs::metadata(ds.join("actions.f32")).unwrap().len() as usize, ticks * 68);
    assert!(ds.join("frames/00000_head.ppm").exists());
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[[devices]]\nid = \"kb\"\nkind = \"keyboard\"\ncontrols = [\"base\"]\n\n[[devices]]\nid = \"pad\"\nkind = \"sixdof\"\ncontrols = [\"torso\", \"base\"]\n",
    )
    .unwrap();
    let out = teleop().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains(&format!("{}:9:", cfg.display())), "{msg}");
    assert!(msg.contains("base"), "{msg}");

    std::fs::write(&cfg, "tick_rate = 20.0\nunknown_field = 1\n").unwrap();
    let out = teleop().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":2:"), "{}", stderr(&out));

    let out = teleop().arg("--config").arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = teleop().args(["--latency", "fast"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--latency"));

    let script = dir.path().join("bad.ndjson");
    std::fs::write(&script, "{\"device_id\":\"kb\",\"timestamp_us\":5,\"payload\":{\"key\":{\"code\":\"w\",\"pressed\":true}}}\nnot json\n").unwrap();
    let out = teleop().arg("--script").arg(&script).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(&format!("{}:2:", script.display())), "{}", stderr(&out));

    let out = teleop().arg("replay").arg(dir.path().join("none.tmep")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn connection_failures_exit_3() {
    // a port that was free a moment ago
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = teleop()
        .args(["--mode", "connect", "--endpoint", &format!("127.0.0.1:{port}")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));

    let out = teleop()
        .args(["--mode", "serve", "--endpoint", "127.0.0.1:0", "--accept-timeout", "0.3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

/// Starts a server on an ephemeral port and returns it with its address.
fn spawn_server(extra: &[&str], record: &Path) -> (std::process::Child, String) {
    let mut child = teleop()
        .arg("--config")
        .arg(session())
        .args(["--mode", "serve", "--endpoint", "127.0.0.1:0"])
        .args(extra)
        .arg("--record")
        .arg(record)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server exited early").unwrap();
        if let Some(a) = line.strip_prefix("listening on ") {
            break a.to_string();
        }
    };
    // keep draining stderr so the server never blocks on a full pipe
    std::thread::spawn(move || for _ in lines {});
    (child, addr)
}

#[test]
fn loopback_session_with_latency_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("net.tmep");
    let latency = ["--latency", "150,50,0,11"];
    let (server, addr) = spawn_server(&latency, &rec);
    let client = teleop()
        .arg("--config")
        .arg(session())
        .args(["--mode", "connect", "--endpoint", &addr])
        .args(["--latency", "150,50,0,12"])
        .output()
        .unwrap();
    let served = server.wait_with_output().unwrap();
    assert_eq!(client.status.code(), Some(0), "{}", stderr(&client));
    assert_eq!(served.status.code(), Some(0));
    let c = json(&client);
    let s = json(&served);
    assert_eq!(c["success"], true);
    assert_eq!(s["success"], true);
    assert_eq!(c["ticks"], s["ticks"]);
    // one-way latency 150 ms on average plus up to one tick of queueing
    let mean = s["mean_latency_ms"].as_f64().unwrap();
    assert!((140.0..230.0).contains(&mean), "{mean}");

    let replayed = teleop().arg("replay").arg(&rec).output().unwrap();
    assert_eq!(replayed.status.code(), Some(0));
    assert_eq!(json(&replayed)["final_hash"], s["final_hash"]);
}
