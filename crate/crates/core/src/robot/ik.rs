use nalgebra::{DMatrix, DVector, Vector6};

use super::kinematics::{Chain, KinematicsError};
use crate::action::{quat_log, DeltaPose, Pose};

pub const DEFAULT_DAMPING: f64 = 0.05;

/// Damped least-squares step `Δq = Jᵀ(JJᵀ + λ²I)⁻¹ e`.
///
/// Solved in the equivalent `(JᵀJ + λ²I)⁻¹Jᵀe` form when the chain has
/// fewer than six joints, which keeps the system well conditioned.
pub fn dls(jac: &DMatrix<f64>, error: &Vector6<f64>, damping: f64) -> DVector<f64> {
    let n = jac.ncols();
    let l2 = damping * damping;
    let e = DVector::from_column_slice(error.as_slice());
    if n < 6 {
        let a = jac.transpose() * jac + DMatrix::identity(n, n) * l2;
        let rhs = jac.transpose() * e;
        a.cholesky()
            .map(|c| c.solve(&rhs))
            .unwrap_or_else(|| DVector::zeros(n))
    } else {
        let a = jac * jac.transpose() + DMatrix::identity(6, 6) * l2;
        let y = a
            .cholesky()
            .map(|c| c.solve(&e))
            .unwrap_or_else(|| DVector::zeros(6));
        jac.transpose() * y
    }
}

/// Scales `dq` uniformly so no joint exceeds `max_velocity × dt`.
pub fn limit_step(chain: &Chain, dq: &mut DVector<f64>, dt: f64) {
    let worst = chain
        .joints()
        .iter()
        .zip(dq.iter())
        .map(|(j, d)| d.abs() / (j.max_velocity * dt))
        .fold(0.0, f64::max);
    if worst > 1.0 {
        *dq /= worst;
    }
}

/// One differential IK step toward a displacement of the tool frame.
/// The returned joint delta respects per-joint velocity limits over `dt`.
pub fn diff_ik_step(
    chain: &Chain,
    root: &Pose,
    q: &[f64],
    target_delta: &DeltaPose,
    damping: f64,
    dt: f64,
) -> Result<DVector<f64>, KinematicsError> {
    let jac = chain.jacobian(root, q)?;
    let e = Vector6::from_row_slice(&target_delta.to_array());
    let mut dq = dls(&jac, &e, damping);
    limit_step(chain, &mut dq, dt);
    Ok(dq)
}

/// `[p_goal − p; log(R_goal Rᵀ)]`
pub fn pose_error(current: &Pose, goal: &Pose) -> Vector6<f64> {
    let dp = goal.position() - current.position();
    let dr = quat_log(&(goal.orientation() * current.orientation().inverse()));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkParams {
    pub damping: f64,
    pub max_iterations: usize,
    /// stop once the 6-vector residual norm falls below this
    pub tolerance: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: DEFAULT_DAMPING,
            max_iterations: 3,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IkOutcome {
    pub q: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Moves `q0` toward `goal` with up to `max_iterations` damped steps. The
/// total motion respects velocity limits over `dt` and every iterate is
/// clamped to the joint limits.
pub fn solve_toward(
    chain: &Chain,
    root: &Pose,
    q0: &[f64],
    goal: &Pose,
    params: &IkParams,
    dt: f64,
) -> Result<IkOutcome, KinematicsError> {
    chain.check(q0)?;
    let mut q = q0.to_vec();
    chain.clamp(&mut q);
    let mut residual = pose_error(&chain.forward_kinematics(root, &q)?, goal).norm();
    let mut iterations = 0;
    while iterations < params.max_iterations && residual >= params.tolerance {
        let jac = chain.jacobian(root, &q)?;
        let e = pose_error(&chain.forward_kinematics(root, &q)?, goal);
        let dq = dls(&jac, &e, params.damping);
        for (v, d) in q.iter_mut().zip(dq.iter()) {
            *v += d;
        }
        // keep the accumulated motion inside the per-tick velocity budget
        let mut total = DVector::from_iterator(q.len(), q.iter().zip(q0).map(|(a, b)| a - b));
        limit_step(chain, &mut total, dt);
        for ((v, t), b) in q.iter_mut().zip(total.iter()).zip(q0) {
            *v = b + t;
        }
        chain.clamp(&mut q);
        iterations += 1;
        residual = pose_error(&chain.forward_kinematics(root, &q)?, goal).norm();
    }
    Ok(IkOutcome { q, residual, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::kinematics::tests::planar;
    use nalgebra::Vector3;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_delta_gives_zero_step() {
        let c = planar(&[1.0, 1.0]);
        let dq = diff_ik_step(&c, &Pose::identity(), &[0.3, 0.5], &DeltaPose::zero(), 0.05, 0.05).unwrap();
        assert!(dq.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn small_damping_matches_pseudo_inverse() {
        let c = planar(&[1.0, 1.0]);
        let q = [0.0, FRAC_PI_2];
        let root = Pose::identity();
        let target = DeltaPose::new(Vector3::new(0.01, 0.0, 0.0), Vector3::zeros());
        let dq = diff_ik_step(&c, &root, &q, &target, 1e-4, 1e6).unwrap();
        let jac = c.jacobian(&root, &q).unwrap();
        let oracle = jac.pseudo_inverse(1e-12).unwrap() * DVector::from_row_slice(&target.to_array());
        assert!((dq - oracle).amax() < 1e-8);
    }

    #[test]
    fn damping_bounds_step_at_singularity() {
        let c = planar(&[1.0, 1.0]);
        let q = [0.0, 0.0];
        let root = Pose::identity();
        let target = DeltaPose::new(Vector3::new(0.5, 0.3, 0.0), Vector3::new(0.0, 0.0, 0.2));
        let lambda = 0.05;
        let dq = diff_ik_step(&c, &root, &q, &target, lambda, 1e6).unwrap();
        let jt = c.jacobian(&root, &q).unwrap().transpose();
        let bound = jt.norm() * Vector6::from_row_slice(&target.to_array()).norm() / (lambda * lambda);
        assert!(dq.iter().all(|v| v.is_finite()));
        assert!(dq.norm() <= bound);
    }

    #[test]
    fn velocity_limit_scales_step() {
        let c = planar(&[1.0, 1.0]);
        let target = DeltaPose::new(Vector3::new(0.0, 0.5, 0.0), Vector3::zeros());
        let dq = diff_ik_step(&c, &Pose::identity(), &[0.2, 0.9], &target, 0.05, 0.05).unwrap();
        // max_velocity 2.0 rad/s over 0.05 s
        assert!(dq.amax() <= 0.1 + 1e-12);
    }

    #[test]
    fn solve_toward_reaches_nearby_goal() {
        let c = planar(&[1.0, 1.0]);
        let root = Pose::identity();
        let q0 = [0.3, 1.0];
        let goal = c.forward_kinematics(&root, &[0.32, 0.98]).unwrap();
        let out = solve_toward(&c, &root, &q0, &goal, &IkParams::default(), 0.05).unwrap();
        assert!(out.residual < 1e-4);
        assert!(out.iterations <= 3);
    }
}
