//! Writes the scripted operator input for the pick-pot session as ndjson
//! on stdout (the bundled `data/scripts/pick_pot.ndjson`).
//!
//! The tracked controller lowers the right hand into the pot, the keyboard
//! closes the gripper, lifts the torso, turns the base half a revolution
//! onto the second table, lowers the torso and opens the gripper.
//!
//!     cargo run --example pick_pot_script > data/scripts/pick_pot.ndjson

use teleop_core::action::{Pose, Side};
use teleop_core::input::{write_events, InputEvent};

const MS: u64 = 1000;

fn main() -> std::io::Result<()> {
    let mut ev = Vec::new();
    let key = |t_ms: u64, code: &str, pressed: bool| InputEvent::key("kb", t_ms * MS, code, pressed);

    // controller held at chest height; only its motion matters
    let hand = |dz: f64| Pose::from_translation(0.3, -0.2, 1.1 + dz);
    ev.push(InputEvent::tracked_pose("vr", 500 * MS, Side::Right, hand(0.0)));
    ev.push(InputEvent::button("vr", 500 * MS, 1, true));
    for k in 1..=20u64 {
        ev.push(InputEvent::tracked_pose("vr", (500 + 50 * k) * MS, Side::Right, hand(-0.05 * k as f64 / 20.0)));
    }
    ev.push(InputEvent::button("vr", 1800 * MS, 1, false));

    ev.push(key(2000, "c", true));
    ev.push(key(2200, "c", false));

    // 0.3 normalized torso per second for one second
    ev.push(key(2500, "t", true));
    ev.push(key(3500, "t", false));

    // π/6 rad/s for 115 ticks, plus the 5 ticks the base velocity is held
    // after release: π in total
    ev.push(key(4500, "a", true));
    ev.push(key(4500 + 115 * 50, "a", false));

    ev.push(key(11000, "g", true));
    ev.push(key(12500, "g", false));

    ev.push(key(13500, "o", true));
    ev.push(key(13700, "o", false));

    ev.sort_by_key(|e| e.timestamp_us);
    write_events(std::io::stdout().lock(), &ev)
}
