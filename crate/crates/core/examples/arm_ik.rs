//! Drives the right arm of each bundled embodiment toward a goal 4 cm
//! forward and 3 cm down from its mid configuration, one damped
//! least-squares solve per 20 Hz tick, and prints the remaining error.
//!
//!     cargo run --example arm_ik

use teleop_core::action::{apply_delta, DeltaPose, Side};
use teleop_core::robot::{solve_toward, Chain, EmbodimentSpec, IkParams, KinematicsError};

fn main() -> Result<(), KinematicsError> {
    for spec in [EmbodimentSpec::tiago_like(), EmbodimentSpec::fetch_like()] {
        let Some(arm) = spec.arm(Side::Right) else { continue };
        let chain = Chain::from_arm(arm);
        let root = spec.arm_root(Side::Right, 0.0).expect("arm present");
        let mut q = chain.mid_configuration();
        let start = chain.forward_kinematics(&root, &q)?;
        let goal = apply_delta(&start, &DeltaPose::from_arrays([0.04, 0.0, -0.03], [0.0, 0.0, 0.1]));

        println!("{} right arm, {} joints", spec.name, chain.joints().len());
        let params = IkParams::default();
        for tick in 1..=10 {
            let out = solve_toward(&chain, &root, &q, &goal, &params, 0.05)?;
            q = out.q;
            let p = chain.forward_kinematics(&root, &q)?;
            println!(
                "  tick {tick:2}: {:7.3} mm  {:6.3} deg  ({} iterations)",
                (p.position() - goal.position()).norm() * 1e3,
                p.angle_to(&goal).to_degrees(),
                out.iterations
            );
        }
        let jac = chain.jacobian(&root, &q)?;
        let sv = jac.svd(false, false).singular_values;
        println!("  jacobian singular values {:.3?}", sv.as_slice());
    }
    Ok(())
}
