//! Multi-embodiment teleoperation: device parsers, a unified action
//! command, a checksummed robot link, differential-IK robot interfaces, a
//! kinematic simulator and an episode recorder with deterministic replay.

pub mod action;
pub mod input;
pub mod channel;
pub mod robot;
pub mod sim;
pub mod record;
pub mod session;
