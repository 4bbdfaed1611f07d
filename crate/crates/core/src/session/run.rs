use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::config::SessionConfig;
use super::operator::{Operator, Script};
use super::report::{LatencyStats, SessionReport};
use super::robot::{RobotOutcome, RobotSide};
use super::SessionError;
use crate::action::ActionCommand;
use crate::channel::{
    connect, connect_ws, Clock, ConnectOptions, Control, LatencyInjector, Link, LinkStats, Message, Server,
};

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn operator_for(cfg: &SessionConfig, with_script: bool) -> Result<Operator, SessionError> {
    let script = match (&cfg.script, with_script) {
        (Some(p), true) => Some(Script::load(p)?),
        _ => None,
    };
    let torso = cfg
        .task
        .initial_state(&cfg.embodiment, cfg.seed)
        .joints
        .torso_normalized(&cfg.embodiment);
    Ok(Operator::new(cfg.build_parsers(), cfg.assignment.clone(), script, torso))
}

fn dropped(stats: &LinkStats) -> u64 {
    stats.reader.integrity_errors + stats.decode_errors + stats.actions_dropped + stats.latency_dropped
}

fn hex(h: u64) -> String {
    format!("{h:016x}")
}

fn robot_report(mode: &str, cfg: &SessionConfig, out: &RobotOutcome, wall: Duration) -> SessionReport {
    SessionReport {
        mode: mode.to_string(),
        task: cfg.task.name.clone(),
        embodiment: cfg.embodiment.name.clone(),
        success: out.success,
        completion_time_s: out.completion_time,
        ticks: out.ticks,
        sim_time_s: out.sim_time,
        wall_time_s: wall.as_secs_f64(),
        messages_sent: 0,
        messages_received: 0,
        mean_latency_ms: None,
        p95_latency_ms: None,
        rtt_ms: None,
        dropped_frames: 0,
        stale_commands: out.stale_commands,
        filtered_parts: out.filtered_parts,
        final_hash: Some(hex(out.final_hash)),
        record: out.record.clone(),
        disconnected: false,
    }
}

fn save_report(report: &SessionReport) -> Result<(), SessionError> {
    if let Some(rec) = &report.record {
        let path = SessionReport::path_for(rec);
        report.save(&path).map_err(|source| SessionError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Operator and robot in one process on simulated time. The configured
/// latency model delays commands deterministically in sim time.
pub fn run_local(cfg: &SessionConfig) -> Result<SessionReport, SessionError> {
    let wall = Instant::now();
    let mut operator = operator_for(cfg, true)?;
    let mut robot = RobotSide::new(cfg, unix_ms())?;
    let mut link: Option<LatencyInjector<ActionCommand>> =
        (!cfg.latency.is_identity()).then(|| LatencyInjector::new(cfg.latency));
    let mut latency = LatencyStats::default();
    let (mut sent, mut received) = (0u64, 0u64);
    let dt_us = cfg.dt_us();
    for tick in 0.. {
        let now = tick * dt_us;
        let cmd = operator.tick(now, now);
        if !cmd.is_empty() {
            sent += 1;
            match &mut link {
                Some(inj) => {
                    inj.push(now, cmd);
                }
                None => {
                    robot.push(&cmd, now);
                    latency.add(0);
                    received += 1;
                }
            }
        }
        if let Some(inj) = &mut link {
            for (due, cmd) in inj.pop_due(now) {
                latency.add(due - cmd.timestamp_us);
                robot.push(&cmd, due);
                received += 1;
            }
        }
        let obs = robot.observe();
        if robot.step(now, &obs)?.done {
            break;
        }
    }
    let out = robot.finish()?;
    let mut report = robot_report("local", cfg, &out, wall.elapsed());
    report.messages_sent = sent;
    report.messages_received = received;
    report.mean_latency_ms = latency.mean_ms();
    report.p95_latency_ms = latency.p95_ms();
    report.dropped_frames = link.map_or(0, |l| l.dropped());
    save_report(&report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy)]
pub struct ServeOptions {
    /// how long to wait for an operator before giving up
    pub accept_timeout: Duration,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            accept_timeout: Duration::from_secs(60),
        }
    }
}

/// Binds the configured endpoints. The injected latency applies to
/// observations sent to the operator.
pub fn bind(cfg: &SessionConfig) -> Result<Server, SessionError> {
    Ok(Server::bind(&cfg.endpoint, cfg.ws_endpoint.as_deref(), cfg.latency, Clock::new())?)
}

/// Robot side on wall-clock time: waits for one operator, then runs the
/// control loop at the tick rate until the task ends or the operator
/// leaves. Native clients send action commands; browser clients may send
/// raw input events, parsed here with the configured devices.
pub fn run_serve(cfg: &SessionConfig, server: &Server, opts: ServeOptions) -> Result<SessionReport, SessionError> {
    let link = server
        .accept(opts.accept_timeout)?
        .ok_or(SessionError::NoOperator(opts.accept_timeout))?;
    let wall = Instant::now();
    let clock = link.clock();
    let mut operator = operator_for(cfg, false)?;
    let mut robot = RobotSide::new(cfg, unix_ms())?;
    let mut latency = LatencyStats::default();
    let (mut sent, mut received, mut overruns) = (0u64, 0u64, 0u64);
    let mut disconnected = false;
    let mut stopped = false;
    let dt_us = cfg.dt_us();
    let t0 = clock.now_us();
    let mut next = t0;
    loop {
        let now = clock.now_us();
        for (recv, cmd) in link.take_actions() {
            latency.add(recv.saturating_sub(cmd.timestamp_us));
            robot.push(&cmd, recv);
            received += 1;
        }
        for (_, events) in link.take_input_events() {
            for ev in &events {
                operator.handle(ev);
            }
            received += 1;
        }
        let parsed = operator.tick(now - t0, now);
        if !parsed.is_empty() {
            robot.push(&parsed, now);
        }
        let mut goodbye = false;
        for c in link.take_controls() {
            match c {
                Control::Goodbye => goodbye = true,
                Control::Hello { peer } => log::info!("operator '{peer}' says hello"),
                _ => {}
            }
        }
        if !link.is_alive(now) {
            if !stopped {
                log::warn!("operator heartbeat lost, stopping the robot");
            }
            stopped = true;
            robot.safety_stop();
        } else {
            stopped = false;
        }
        let obs = robot.observe();
        link.send(Message::Observation(obs.clone()));
        sent += 1;
        let status = robot.step(now, &obs)?;
        if status.done {
            break;
        }
        if goodbye || link.is_closed() {
            disconnected = !goodbye;
            break;
        }
        next += dt_us;
        let after = clock.now_us();
        if after > next + dt_us {
            overruns += 1;
            next = after;
        }
        clock.sleep_until(next);
    }
    if overruns > 0 {
        log::warn!("control loop overran its period {overruns} times");
    }
    let out = robot.finish()?;
    link.send(Message::Control(Control::Finished {
        success: out.success,
        ticks: out.ticks,
        sim_time: out.sim_time,
    }));
    let stats = link.stats();
    link.close();
    let mut report = robot_report("serve", cfg, &out, wall.elapsed());
    report.messages_sent = sent + 1;
    report.messages_received = received;
    report.mean_latency_ms = latency.mean_ms();
    report.p95_latency_ms = latency.p95_ms();
    report.dropped_frames = dropped(&stats);
    report.disconnected = disconnected;
    save_report(&report)?;
    Ok(report)
}

fn open_link(cfg: &SessionConfig) -> Result<Link, SessionError> {
    let opts = ConnectOptions {
        latency: cfg.latency,
        ..ConnectOptions::default()
    };
    let ep = cfg.endpoint.as_str();
    Ok(match ep.strip_prefix("ws://") {
        Some(rest) => connect_ws(rest.trim_end_matches('/'), opts, Clock::new())?,
        None => connect(ep.strip_prefix("tcp://").unwrap_or(ep), opts, Clock::new())?,
    })
}

/// Operator side on wall-clock time: runs the configured devices (fed by
/// the script, if any) and streams commands until the robot reports the
/// end of the session. The injected latency applies to outgoing commands.
pub fn run_connect(cfg: &SessionConfig) -> Result<SessionReport, SessionError> {
    let link = open_link(cfg)?;
    let wall = Instant::now();
    let clock = link.clock();
    link.send(Message::Control(Control::Hello {
        peer: format!("teleop {}", env!("CARGO_PKG_VERSION")),
    }));
    let mut operator = operator_for(cfg, true)?;
    let dt_us = cfg.dt_us();
    // the robot ends the session at the task's time limit; allow for
    // network and scheduling delays on top
    let give_up = Duration::from_secs_f64(cfg.task.time_limit) + Duration::from_secs(30);
    let t0 = clock.now_us();
    let mut next = t0;
    let mut sent = 0u64;
    let mut finished = None;
    loop {
        let now = clock.now_us();
        let cmd = operator.tick(now - t0, now);
        if !cmd.is_empty() {
            link.send(Message::Action(cmd));
            sent += 1;
        }
        for c in link.take_controls() {
            if let Control::Finished { success, ticks, sim_time } = c {
                finished = Some((success, ticks, sim_time));
            }
        }
        if finished.is_some() || link.is_closed() || wall.elapsed() > give_up {
            break;
        }
        next += dt_us;
        clock.sleep_until(next);
    }
    if finished.is_none() {
        // a Finished message may have arrived together with the close
        for c in link.take_controls() {
            if let Control::Finished { success, ticks, sim_time } = c {
                finished = Some((success, ticks, sim_time));
            }
        }
    }
    let stats = link.stats();
    let rtt = link.rtt_us();
    if finished.is_none() {
        link.send(Message::Control(Control::Goodbye));
    }
    link.close();
    let Some((success, ticks, sim_time)) = finished else {
        return Err(SessionError::Disconnected);
    };
    Ok(SessionReport {
        mode: "connect".into(),
        task: cfg.task.name.clone(),
        embodiment: cfg.embodiment.name.clone(),
        success,
        completion_time_s: success.then_some(sim_time),
        ticks,
        sim_time_s: sim_time,
        wall_time_s: wall.elapsed().as_secs_f64(),
        messages_sent: sent,
        messages_received: stats.reader.frames,
        mean_latency_ms: None,
        p95_latency_ms: None,
        rtt_ms: rtt.map(|r| r as f64 / 1e3),
        dropped_frames: dropped(&stats),
        stale_commands: 0,
        filtered_parts: 0,
        final_hash: None,
        record: None,
        disconnected: false,
    })
}
