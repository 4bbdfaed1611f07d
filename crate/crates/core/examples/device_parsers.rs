//! Feeds a keyboard and a 6-DoF puck through their parsers and merges the
//! results by body-part assignment: the keyboard owns the base, the puck
//! owns the arms and grippers.
//!
//!     cargo run --example device_parsers

use teleop_core::action::{Part, Side};
use teleop_core::input::{
    composite_merge, Assignment, Dof, InputEvent, KeyBinding, KeyboardParser, Keymap, Parser, ParserConfig,
    SixDofParser,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bind = |key: &str, dof, sign| {
        (key.to_string(), KeyBinding { dof, sign, gain: None })
    };
    let keymap = Keymap::new([
        bind("w", Dof::BaseVx, 1.0),
        bind("s", Dof::BaseVx, -1.0),
        bind("a", Dof::BaseWz, 1.0),
        bind("d", Dof::BaseWz, -1.0),
    ])?;
    let cfg = ParserConfig {
        base_linear_gain: 0.3,
        translation_gain: 0.01,
        ..ParserConfig::default()
    };
    let mut kb = KeyboardParser::new("kb", keymap, cfg.clone());
    let mut puck = SixDofParser::new("puck", cfg);

    let mut claims = vec![("kb", vec![Part::Base])];
    claims.push(("puck", vec![Part::arm(Side::Left), Part::arm(Side::Right), Part::gripper(Side::Left), Part::gripper(Side::Right)]));
    let assignment = Assignment::from_device_claims(claims.iter().map(|(d, p)| (*d, p.iter().copied())))?;

    let script = [
        (0, InputEvent::key("kb", 0, "w", true)),
        (0, InputEvent::axis("puck", 0, 0, 0.8)),
        (2, InputEvent::button("puck", 100_000, 1, true)),
        (3, InputEvent::button("puck", 150_000, 1, false)),
        (4, InputEvent::key("kb", 200_000, "w", false)),
        (4, InputEvent::axis("puck", 200_000, 0, 0.0)),
        (5, InputEvent::button("puck", 250_000, 0, true)),
    ];
    for tick in 0..8u64 {
        let now = tick * 50_000;
        for (_, ev) in script.iter().filter(|(t, _)| *t == tick) {
            kb.handle(ev);
            puck.handle(ev);
        }
        let partials = [kb.tick(now), puck.tick(now)];
        let cmd = composite_merge(&partials, &assignment, now);
        println!("t={:4} ms  mode={:?}", now / 1000, puck.mode());
        if let Some(b) = &cmd.base {
            println!("    base vx {:.2} wz {:.2} from {}", b.value.vx, b.value.wz, b.source);
        }
        if let Some(a) = cmd.arm(Side::Left) {
            println!("    left arm dx {:.4} m from {}", a.value.translation().x, a.source);
        }
        if let Some(g) = cmd.gripper(Side::Left) {
            println!("    left gripper {:.1} from {}", g.value, g.source);
        }
    }
    Ok(())
}
