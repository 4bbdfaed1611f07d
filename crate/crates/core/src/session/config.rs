//! Session configuration (TOML). Relative paths resolve against the config
//! file's directory.
//!
//! ```toml
//! embodiment = "tiago-like"        # bundled name or path to an embodiment file
//! task = "pick-pot"                # bundled name or path to a task file
//! tick_rate = 20.0                 # control ticks per second (>= 10)
//! seed = 7                         # optional, defaults to the task's seed
//! images = true                    # render RGB-D observations
//! script = "events.ndjson"         # optional scripted input events
//! record = "out/episode.tmep"      # optional episode recording
//! latency = "150,50,0,1"           # optional: base ms, jitter ms, drop, seed
//! endpoint = "127.0.0.1:7700"      # TCP endpoint for serve / connect
//! ws_endpoint = "127.0.0.1:7701"   # optional WebSocket endpoint for serve
//!
//! [consolidation]
//! velocity_ttl = 0.25
//!
//! [ik]
//! damping = 0.05
//! max_iterations = 3
//! tolerance = 1e-4
//!
//! [[devices]]
//! id = "kb"
//! kind = "keyboard"                # keyboard | sixdof | vr | vision
//! controls = ["base", "torso", "right_gripper"]
//! [devices.parser]                 # gains, deadband, smoothing, clutch ...
//! base_linear_gain = 0.3
//! [devices.keys]                   # keyboard only
//! w = { dof = "base.vx" }
//! s = { dof = "base.vx", sign = -1.0 }
//! a = { dof = "base.wz", gain = 0.5 }
//! [devices.vr]                     # vr only: axis and button layout
//! [devices.vision]                 # vision only: calibration
//! ```
//!
//! A body part may be controlled by at most one device.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::action::Part;
use crate::channel::{ConsolidationPolicy, LatencyModel};
use crate::input::{
    Assignment, DeviceParser, InputConfigError, KeyBinding, Keymap, KeyboardParser, ParserConfig,
    SixDofParser, VisionConfig, VisionParser, VrMapping, VrParser,
};
use crate::robot::{EmbodimentSpec, IkParams};
use crate::sim::{fnv1a64, TaskSpec};

pub const DEFAULT_ENDPOINT: &str = "127.0.0.1:7700";

/// A configuration problem, with its location when it came from a file.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}{message}", location(.path, .line, .column))]
pub struct ConfigError {
    pub path: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

fn location(path: &Option<String>, line: &Option<usize>, column: &Option<usize>) -> String {
    match (path, line, column) {
        (Some(p), Some(l), Some(c)) => format!("{p}:{l}:{c}: "),
        (Some(p), _, _) => format!("{p}: "),
        (None, Some(l), Some(c)) => format!("line {l}, column {c}: "),
        _ => String::new(),
    }
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            path: None,
            line: None,
            column: None,
            message: message.into(),
        }
    }

    fn at(text: &str, span: Option<Range<usize>>, message: impl Into<String>) -> Self {
        let (line, column) = match span {
            Some(s) => {
                let (l, c) = line_col(text, s.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        Self {
            path: None,
            line,
            column,
            message: message.into(),
        }
    }

    fn in_file(mut self, path: &Path) -> Self {
        self.path = Some(path.display().to_string());
        self
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Keyboard,
    Sixdof,
    Vr,
    Vision,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyFile {
    dof: String,
    #[serde(default = "one")]
    sign: f64,
    gain: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    id: Spanned<String>,
    kind: DeviceKind,
    controls: Spanned<Vec<String>>,
    #[serde(default)]
    parser: ParserConfig,
    #[serde(default)]
    keys: BTreeMap<String, Spanned<KeyFile>>,
    vr: Option<VrMapping>,
    vision: Option<VisionConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IkFile {
    damping: Option<f64>,
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    embodiment: Option<Spanned<String>>,
    task: Option<Spanned<String>>,
    tick_rate: Option<Spanned<f64>>,
    seed: Option<u64>,
    images: Option<bool>,
    script: Option<Spanned<String>>,
    record: Option<Spanned<String>>,
    latency: Option<Spanned<String>>,
    endpoint: Option<String>,
    ws_endpoint: Option<String>,
    #[serde(default)]
    consolidation: ConsolidationPolicy,
    #[serde(default)]
    ik: IkFile,
    #[serde(default)]
    devices: Vec<DeviceFile>,
}

/// A validated input device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub id: String,
    pub kind: DeviceKind,
    pub controls: Vec<Part>,
    pub parser: ParserConfig,
    pub keymap: Keymap,
    pub vr: VrMapping,
    pub vision: VisionConfig,
}

impl DeviceSpec {
    pub fn build(&self) -> DeviceParser {
        let cfg = self.parser.clone();
        let parser: Box<dyn crate::input::Parser> = match self.kind {
            DeviceKind::Keyboard => Box::new(KeyboardParser::new(&self.id, self.keymap.clone(), cfg)),
            DeviceKind::Sixdof => Box::new(SixDofParser::new(&self.id, cfg)),
            DeviceKind::Vr => Box::new(VrParser::new(&self.id, cfg, self.vr.clone())),
            DeviceKind::Vision => Box::new(VisionParser::new(&self.id, cfg, self.vision.clone())),
        };
        DeviceParser::new(parser, self.controls.iter().copied())
    }
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub embodiment: Option<String>,
    pub task: Option<String>,
    pub tick_rate: Option<f64>,
    pub script: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub latency: Option<String>,
    pub endpoint: Option<String>,
    pub ws_endpoint: Option<String>,
    pub seed: Option<u64>,
}

/// A fully resolved session configuration.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub embodiment: EmbodimentSpec,
    pub task: TaskSpec,
    pub tick_rate: f64,
    pub seed: u64,
    pub images: bool,
    pub script: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub latency: LatencyModel,
    pub endpoint: String,
    pub ws_endpoint: Option<String>,
    pub consolidation: ConsolidationPolicy,
    pub ik: IkParams,
    pub devices: Vec<DeviceSpec>,
    pub assignment: Assignment,
    /// FNV-1a 64 of the config text
    pub digest: u64,
}

impl SessionConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read config: {e}")).in_file(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides).map_err(|e| e.in_file(path))
    }

    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| ConfigError::at(text, e.span(), e.message().trim().to_string()))?;
        let err = |span: Option<Range<usize>>, msg: String| ConfigError::at(text, span, msg);
        let resolve_path = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };

        let embodiment = match (&overrides.embodiment, &file.embodiment) {
            (Some(e), _) => EmbodimentSpec::resolve(e).map_err(|e| ConfigError::new(format!("--embodiment: {e}")))?,
            (None, Some(e)) => EmbodimentSpec::resolve(&embodiment_path(e.get_ref(), base_dir))
                .map_err(|x| err(Some(e.span()), x.to_string()))?,
            (None, None) => EmbodimentSpec::tiago_like(),
        };
        let task = match (&overrides.task, &file.task) {
            (Some(t), _) => TaskSpec::resolve(t).map_err(|e| ConfigError::new(format!("--task: {e}")))?,
            (None, Some(t)) => TaskSpec::resolve(&embodiment_path(t.get_ref(), base_dir))
                .map_err(|x| err(Some(t.span()), x.to_string()))?,
            (None, None) => TaskSpec::pick_pot(),
        };

        let (tick_rate, rate_span) = match (overrides.tick_rate, &file.tick_rate) {
            (Some(r), _) => (r, None),
            (None, Some(r)) => (*r.get_ref(), Some(r.span())),
            (None, None) => (20.0, None),
        };
        if !(tick_rate.is_finite() && tick_rate >= 1.0 / crate::sim::MAX_DT) {
            let msg = format!("tick rate must be at least {} Hz, got {tick_rate}", 1.0 / crate::sim::MAX_DT);
            return Err(match rate_span {
                Some(s) => err(Some(s), msg),
                None => ConfigError::new(format!("--ticks-per-second: {msg}")),
            });
        }

        let latency = match (&overrides.latency, &file.latency) {
            (Some(l), _) => l.parse().map_err(|e| ConfigError::new(format!("--latency: {e}")))?,
            (None, Some(l)) => l.get_ref().parse().map_err(|e| err(Some(l.span()), format!("latency: {e}")))?,
            (None, None) => LatencyModel::NONE,
        };

        if !(file.consolidation.velocity_ttl >= 0.0) {
            return Err(ConfigError::new(format!(
                "consolidation.velocity_ttl must be non-negative, got {}",
                file.consolidation.velocity_ttl
            )));
        }
        let defaults = IkParams::default();
        let ik = IkParams {
            damping: file.ik.damping.unwrap_or(defaults.damping),
            max_iterations: file.ik.max_iterations.unwrap_or(defaults.max_iterations),
            tolerance: file.ik.tolerance.unwrap_or(defaults.tolerance),
        };
        if !(ik.damping > 0.0 && ik.max_iterations > 0 && ik.tolerance > 0.0) {
            return Err(ConfigError::new("ik: damping, max_iterations and tolerance must be positive"));
        }

        let mut devices = Vec::new();
        for d in &file.devices {
            devices.push(device(text, d)?);
        }
        for (k, d) in file.devices.iter().enumerate() {
            if file.devices[..k].iter().any(|p| p.id.get_ref() == d.id.get_ref()) {
                return Err(err(Some(d.id.span()), format!("duplicate device id '{}'", d.id.get_ref())));
            }
        }
        let assignment = Assignment::from_device_claims(
            devices.iter().map(|d| (d.id.as_str(), d.controls.iter().copied())),
        )
        .map_err(|e| {
            let span = match &e {
                InputConfigError::AmbiguousAssignment { second, .. } => file
                    .devices
                    .iter()
                    .find(|d| d.id.get_ref() == second)
                    .map(|d| d.controls.span()),
                _ => None,
            };
            err(span, e.to_string())
        })?;

        Ok(Self {
            embodiment,
            task: task.clone(),
            tick_rate,
            seed: overrides.seed.or(file.seed).unwrap_or(task.seed),
            images: file.images.unwrap_or(true),
            script: overrides
                .script
                .clone()
                .or_else(|| file.script.as_ref().map(|s| resolve_path(s.get_ref()))),
            record: overrides
                .record
                .clone()
                .or_else(|| file.record.as_ref().map(|s| resolve_path(s.get_ref()))),
            latency,
            endpoint: overrides
                .endpoint
                .clone()
                .or(file.endpoint)
                .unwrap_or_else(|| DEFAULT_ENDPOINT.to_string()),
            ws_endpoint: overrides.ws_endpoint.clone().or(file.ws_endpoint),
            consolidation: file.consolidation,
            ik,
            devices,
            assignment,
            digest: fnv1a64(text.as_bytes()),
        })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate
    }

    pub fn dt_us(&self) -> u64 {
        (1e6 / self.tick_rate).round() as u64
    }

    pub fn build_parsers(&self) -> Vec<DeviceParser> {
        self.devices.iter().map(DeviceSpec::build).collect()
    }
}

/// Bundled names pass through; anything else is a path relative to the config.
fn embodiment_path(value: &str, base_dir: &Path) -> String {
    if value.ends_with(".toml") && Path::new(value).is_relative() {
        base_dir.join(value).display().to_string()
    } else {
        value.to_string()
    }
}

fn device(text: &str, d: &DeviceFile) -> Result<DeviceSpec, ConfigError> {
    let err = |span: Range<usize>, msg: String| ConfigError::at(text, Some(span), msg);
    let id = d.id.get_ref();
    if id.is_empty() {
        return Err(err(d.id.span(), "device id must not be empty".into()));
    }
    let mut controls = Vec::new();
    for name in d.controls.get_ref() {
        let part = Part::from_name(name).ok_or_else(|| {
            err(
                d.controls.span(),
                format!("device '{id}': unknown body part '{name}' (expected left_arm, right_arm, left_gripper, right_gripper, base or torso)"),
            )
        })?;
        if controls.contains(&part) {
            return Err(err(d.controls.span(), format!("device '{id}' lists '{name}' twice")));
        }
        controls.push(part);
    }
    d.parser
        .validate()
        .map_err(|e| err(d.id.span(), format!("device '{id}' parser: {e}")))?;
    if d.kind != DeviceKind::Keyboard && !d.keys.is_empty() {
        return Err(err(d.id.span(), format!("device '{id}': keys are only valid for keyboard devices")));
    }
    if d.kind != DeviceKind::Vr && d.vr.is_some() {
        return Err(err(d.id.span(), format!("device '{id}': [vr] is only valid for vr devices")));
    }
    if d.kind != DeviceKind::Vision && d.vision.is_some() {
        return Err(err(d.id.span(), format!("device '{id}': [vision] is only valid for vision devices")));
    }
    let mut bindings = Vec::new();
    for (key, spec) in &d.keys {
        let k = spec.get_ref();
        let dof = k
            .dof
            .parse()
            .map_err(|e: InputConfigError| err(spec.span(), format!("key '{key}': {e}")))?;
        if k.sign != 1.0 && k.sign != -1.0 {
            return Err(err(spec.span(), format!("key '{key}': sign must be 1 or -1")));
        }
        bindings.push((key.clone(), KeyBinding { dof, sign: k.sign, gain: k.gain }));
    }
    let keymap = Keymap::new(bindings).map_err(|e| err(d.id.span(), format!("device '{id}': {e}")))?;
    Ok(DeviceSpec {
        id: id.clone(),
        kind: d.kind,
        controls,
        parser: d.parser.clone(),
        keymap,
        vr: d.vr.clone().unwrap_or_default(),
        vision: d.vision.clone().unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[devices]]
id = "kb"
kind = "keyboard"
controls = ["base", "torso"]
[devices.keys]
w = { dof = "base.vx", gain = 0.3 }
"#;

    fn parse(text: &str) -> Result<SessionConfig, ConfigError> {
        SessionConfig::parse(text, Path::new("."), &Overrides::default())
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.embodiment.name, "tiago-like");
        assert_eq!(c.task.name, "pick-pot");
        assert_eq!(c.tick_rate, 20.0);
        assert_eq!(c.dt_us(), 50_000);
        assert_eq!(c.seed, c.task.seed);
        assert_eq!(c.assignment.owner(Part::Base), Some("kb"));
        assert_eq!(c.endpoint, DEFAULT_ENDPOINT);
    }

    #[test]
    fn two_devices_on_base_is_located() {
        let text = format!("{MINIMAL}\n[[devices]]\nid = \"pad\"\nkind = \"sixdof\"\ncontrols = [\"base\"]\n");
        let e = parse(&text).unwrap_err();
        assert!(e.message.contains("base"), "{e}");
        assert_eq!(e.line, Some(text.lines().position(|l| l.starts_with("controls = [\"base\"]")).unwrap() + 1));
    }

    #[test]
    fn duplicate_keys_are_rejected_with_line() {
        let text = format!("{MINIMAL}w = {{ dof = \"base.wz\" }}\n");
        let e = parse(&text).unwrap_err();
        assert_eq!(e.line, Some(text.lines().count()));
    }

    #[test]
    fn unknown_dof_and_part() {
        let e = parse(&MINIMAL.replace("base.vx", "base.vz")).unwrap_err();
        assert!(e.message.contains("base.vz") && e.line == Some(7), "{e:?}");
        let e = parse(&MINIMAL.replace("\"torso\"]", "\"tail\"]")).unwrap_err();
        assert!(e.message.contains("tail") && e.line == Some(5), "{e:?}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = parse("tick_rate = \n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = parse("tick_rate = 2.0\n").unwrap_err();
        assert!(e.message.contains("at least"), "{e}");
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            embodiment: Some("fetch-like".into()),
            latency: Some("150,50".into()),
            tick_rate: Some(25.0),
            ..Default::default()
        };
        let c = SessionConfig::parse(MINIMAL, Path::new("."), &o).unwrap();
        assert_eq!(c.embodiment.name, "fetch-like");
        assert_eq!(c.latency.base_delay_ms, 150.0);
        assert_eq!(c.dt_us(), 40_000);
        let bad = Overrides {
            latency: Some("fast".into()),
            ..Default::default()
        };
        assert!(SessionConfig::parse(MINIMAL, Path::new("."), &bad).unwrap_err().message.starts_with("--latency"));
    }

    #[test]
    fn bundled_session_parses() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sessions");
        let c = SessionConfig::load(&dir.join("pick_pot.toml"), &Overrides::default()).unwrap();
        assert!(c.script.as_ref().unwrap().exists());
        assert_eq!(c.assignment.owner(Part::RightArm), Some("vr"));
    }
}
