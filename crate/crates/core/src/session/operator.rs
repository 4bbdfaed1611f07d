use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::Path;

use super::config::ConfigError;
use crate::action::ActionCommand;
use crate::input::{composite_merge, read_events, Assignment, DeviceParser, InputEvent, Parser};

/// Input events replayed at their timestamps, relative to session start.
#[derive(Debug, Clone, Default)]
pub struct Script {
    events: Vec<InputEvent>,
    next: usize,
}

impl Script {
    pub fn new(mut events: Vec<InputEvent>) -> Self {
        events.sort_by_key(|e| e.timestamp_us);
        Self { events, next: 0 }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let fail = |m: String| ConfigError {
            path: Some(path.display().to_string()),
            line: None,
            column: None,
            message: m,
        };
        let file = std::fs::File::open(path).map_err(|e| fail(format!("cannot read script: {e}")))?;
        let events = read_events(BufReader::new(file)).map_err(|e| match e {
            crate::input::EventFileError::Parse { line, source } => ConfigError {
                line: Some(line),
                column: Some(source.column()),
                ..fail(source.to_string())
            },
            crate::input::EventFileError::NonMonotonic { line, device } => ConfigError {
                line: Some(line),
                column: Some(1),
                ..fail(format!("timestamp goes backwards for device '{device}'"))
            },
            other => fail(other.to_string()),
        })?;
        Ok(Self::new(events))
    }

    /// Events with timestamps at or before `now_us` not yet returned.
    pub fn due(&mut self, now_us: u64) -> &[InputEvent] {
        let start = self.next;
        while self.events.get(self.next).is_some_and(|e| e.timestamp_us <= now_us) {
            self.next += 1;
        }
        &self.events[start..self.next]
    }

    pub fn is_finished(&self) -> bool {
        self.next == self.events.len()
    }

    pub fn end_us(&self) -> u64 {
        self.events.last().map_or(0, |e| e.timestamp_us)
    }
}

/// The operator station: device parsers, the part assignment and an
/// optional script feeding them.
pub struct Operator {
    parsers: Vec<DeviceParser>,
    index: BTreeMap<String, usize>,
    assignment: Assignment,
    script: Option<Script>,
    unrouted: u64,
}

impl Operator {
    pub fn new(parsers: Vec<DeviceParser>, assignment: Assignment, script: Option<Script>, torso: f64) -> Self {
        let mut parsers = parsers;
        for p in &mut parsers {
            p.set_torso_reference(torso);
        }
        let index = parsers
            .iter()
            .enumerate()
            .map(|(i, p)| (p.device_id().to_string(), i))
            .collect();
        Self {
            parsers,
            index,
            assignment,
            script,
            unrouted: 0,
        }
    }

    /// Routes an event to the parser with the same device id.
    pub fn handle(&mut self, ev: &InputEvent) {
        match self.index.get(&ev.device_id) {
            Some(&i) => self.parsers[i].handle(ev),
            None => {
                if self.unrouted == 0 {
                    log::warn!("event for unknown device '{}' ignored", ev.device_id);
                }
                self.unrouted += 1;
            }
        }
    }

    /// Events that named no configured device.
    pub fn unrouted(&self) -> u64 {
        self.unrouted
    }

    pub fn script(&self) -> Option<&Script> {
        self.script.as_ref()
    }

    /// Feeds due script events, ticks every parser at `session_us` (time
    /// since session start) and merges the partials into one command
    /// stamped `stamp_us`.
    pub fn tick(&mut self, session_us: u64, stamp_us: u64) -> ActionCommand {
        if let Some(mut script) = self.script.take() {
            for ev in script.due(session_us) {
                self.handle(ev);
            }
            self.script = Some(script);
        }
        let partials: Vec<_> = self.parsers.iter_mut().map(|p| p.tick(session_us)).collect();
        composite_merge(&partials, &self.assignment, stamp_us)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Part;
    use crate::input::{KeyBinding, Keymap, KeyboardParser, ParserConfig};

    fn operator(script: Vec<InputEvent>) -> Operator {
        let keymap = Keymap::new([(
            "w".to_string(),
            KeyBinding {
                dof: "base.vx".parse().unwrap(),
                sign: 1.0,
                gain: Some(0.3),
            },
        )])
        .unwrap();
        let kb = DeviceParser::new(
            Box::new(KeyboardParser::new("kb", keymap, ParserConfig::default())),
            [Part::Base],
        );
        let assignment = Assignment::from_device_claims([("kb", [Part::Base])]).unwrap();
        Operator::new(vec![kb], assignment, Some(Script::new(script)), 0.0)
    }

    #[test]
    fn script_events_apply_at_their_time() {
        let mut op = operator(vec![
            InputEvent::key("kb", 100_000, "w", true),
            InputEvent::key("kb", 200_000, "w", false),
        ]);
        assert!(op.tick(50_000, 7).is_empty());
        let c = op.tick(100_000, 8);
        assert_eq!(c.base.as_ref().unwrap().value.vx, 0.3);
        assert_eq!(c.timestamp_us, 8);
        assert!(op.tick(150_000, 9).has(Part::Base));
        assert!(op.tick(200_000, 10).is_empty());
        assert!(op.script().unwrap().is_finished());
    }

    #[test]
    fn unknown_devices_are_counted() {
        let mut op = operator(vec![]);
        op.handle(&InputEvent::key("pad", 0, "w", true));
        assert_eq!(op.unrouted(), 1);
        assert!(op.tick(0, 0).is_empty());
    }

    #[test]
    fn script_sorts_by_time() {
        let mut s = Script::new(vec![InputEvent::key("a", 5, "x", true), InputEvent::key("b", 1, "y", true)]);
        assert_eq!(s.end_us(), 5);
        assert_eq!(s.due(1).len(), 1);
        assert_eq!(s.due(1).len(), 0);
        assert_eq!(s.due(9).len(), 1);
    }
}
