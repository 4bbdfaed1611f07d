//! Ray-cast RGB-D rendering of the primitive scene.
//!
//! Cameras look along their +x axis with y left and z up. Pixel `(u, v)`
//! (column, row from the top-left) casts the ray through its center:
//! `d = (1, -(u + 0.5 - w/2) / f, -(v + 0.5 - h/2) / f)` with
//! `f = (h/2) / tan(vfov/2)` and square pixels. Depth is the distance along
//! the optical axis in millimeters, rounded; 0 marks no hit or a distance
//! beyond 65.535 m.

use nalgebra::Vector3;

use super::world::{BasePose, SceneObject, WorldState};
use crate::action::{Pose, Side};
use crate::channel::{DepthImage, ObservationFrame, RgbImage};
use crate::robot::{CameraMount, EmbodimentSpec, MountParent};

pub const BACKGROUND: [u8; 3] = [38, 42, 50];
/// World-frame direction toward the light used for flat shading.
const LIGHT: [f64; 3] = [0.3, 0.2, 0.93];

/// Camera pose in the world frame for the current state.
pub fn camera_pose(state: &WorldState, spec: &EmbodimentSpec, cam: &CameraMount) -> Pose {
    let parent = match (cam.parent, &spec.torso) {
        (MountParent::Torso, Some(t)) => t.link_pose(state.joints.torso),
        _ => Pose::identity(),
    };
    state.base.pose3d().compose(&parent).compose(&cam.origin.pose())
}

pub fn focal_length(cam: &CameraMount) -> f64 {
    0.5 * f64::from(cam.height) / (0.5 * cam.vfov_deg.to_radians()).tan()
}

/// Renders one camera. Each pixel takes the nearest hit over all objects.
pub fn render_camera(objects: &[SceneObject], pose: &Pose, cam: &CameraMount) -> (RgbImage, DepthImage) {
    let (w, h) = (cam.width as usize, cam.height as usize);
    let f = focal_length(cam);
    let light = Vector3::from(LIGHT).normalize();
    let rot = pose.orientation();
    let origin = pose.position();
    // rays in each object's frame share an origin
    let locals: Vec<_> = objects
        .iter()
        .map(|o| {
            let inv = o.pose.inverse();
            (inv.transform_point(origin), inv.orientation().to_rotation_matrix(), o)
        })
        .collect();

    let mut rgb = vec![0u8; w * h * 3];
    let mut depth = vec![0u16; w * h];
    for v in 0..h {
        for u in 0..w {
            let dc = Vector3::new(
                1.0,
                -(u as f64 + 0.5 - 0.5 * w as f64) / f,
                -(v as f64 + 0.5 - 0.5 * h as f64) / f,
            );
            let dw = rot * dc;
            let mut best: Option<(f64, Vector3<f64>, &SceneObject)> = None;
            for (o_local, r_inv, obj) in &locals {
                let d_local = r_inv * dw;
                if let Some((t, n)) = obj.shape.ray_hit(o_local, &d_local) {
                    if best.is_none_or(|(b, ..)| t < b) {
                        best = Some((t, n, obj));
                    }
                }
            }
            let i = v * w + u;
            let color = match best {
                Some((t, n_local, obj)) => {
                    let mm = (t * 1000.0).round();
                    depth[i] = if mm <= f64::from(u16::MAX) { mm as u16 } else { 0 };
                    let n = obj.pose.orientation() * n_local;
                    let shade = 0.35 + 0.65 * n.dot(&light).max(0.0);
                    obj.color.map(|c| (f64::from(c) * shade).round() as u8)
                }
                None => BACKGROUND,
            };
            rgb[i * 3..i * 3 + 3].copy_from_slice(&color);
        }
    }
    (
        RgbImage {
            camera_id: cam.id.clone(),
            width: cam.width,
            height: cam.height,
            data: rgb,
        },
        DepthImage {
            camera_id: cam.id.clone(),
            width: cam.width,
            height: cam.height,
            data: depth,
        },
    )
}

/// Back-projects a depth pixel to a camera-frame point.
pub fn unproject(cam: &CameraMount, u: u32, v: u32, depth_mm: u16) -> Vector3<f64> {
    let f = focal_length(cam);
    let z = f64::from(depth_mm) / 1000.0;
    Vector3::new(
        z,
        -(f64::from(u) + 0.5 - 0.5 * f64::from(cam.width)) / f * z,
        -(f64::from(v) + 0.5 - 0.5 * f64::from(cam.height)) / f * z,
    )
}

/// Produces observation frames and tracks the base pose of the previous
/// frame for odometry.
#[derive(Debug, Clone, Default)]
pub struct Renderer {
    previous: Option<BasePose>,
    /// when false only proprioception is filled
    pub images: bool,
}

impl Renderer {
    pub fn new(images: bool) -> Self {
        Self {
            previous: None,
            images,
        }
    }

    pub fn render(&mut self, state: &WorldState, spec: &EmbodimentSpec) -> ObservationFrame {
        let odom = match self.previous {
            Some(prev) => state.base.relative_to(&prev),
            None => [0.0; 3],
        };
        self.previous = Some(state.base);
        let mut frame = ObservationFrame {
            sim_time: state.sim_time,
            base_odom_delta: odom,
            gripper_state: state.joints.grippers,
            ee_poses: Side::BOTH.map(|s| state.hand_pose_base(spec, s)),
            rgb: Vec::new(),
            depth: Vec::new(),
        };
        if self.images {
            for cam in &spec.cameras {
                let (rgb, depth) = render_camera(&state.objects, &camera_pose(state, spec, cam), cam);
                frame.rgb.push(rgb);
                frame.depth.push(depth);
            }
        }
        frame
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::Transform;
    use crate::sim::world::Shape;
    use nalgebra::UnitQuaternion;

    fn cam() -> CameraMount {
        CameraMount {
            id: "c".into(),
            parent: MountParent::Base,
            origin: Transform::default(),
            width: 128,
            height: 128,
            vfov_deg: 60.0,
        }
    }

    fn object(shape: Shape, p: [f64; 3]) -> SceneObject {
        SceneObject {
            id: "o".into(),
            shape,
            pose: Pose::new(Vector3::from(p), UnitQuaternion::identity()),
            graspable: false,
            color: [255, 255, 255],
        }
    }

    #[test]
    fn empty_scene() {
        let (rgb, depth) = render_camera(&[], &Pose::identity(), &cam());
        assert!(depth.data.iter().all(|d| *d == 0));
        assert!(rgb.data.chunks(3).all(|c| c == BACKGROUND));
    }

    #[test]
    fn sphere_on_axis() {
        let objs = [object(Shape::Sphere { radius: 1.0 }, [2.0, 0.0, 0.0])];
        let (_, depth) = render_camera(&objs, &Pose::identity(), &cam());
        for (u, v) in [(63, 63), (64, 64), (63, 64), (64, 63)] {
            let d = depth.data[v * 128 + u];
            assert!((i32::from(d) - 1000).abs() <= 1, "{d}");
        }
    }

    #[test]
    fn depth_unprojects_onto_surfaces() {
        let objs = [
            object(Shape::Sphere { radius: 0.4 }, [2.0, 0.3, 0.1]),
            object(Shape::Box { half_extents: [0.2, 0.3, 0.25] }, [1.5, -0.4, -0.2]),
            object(Shape::Cylinder { radius: 0.2, half_height: 0.3 }, [2.5, 0.0, -0.3]),
        ];
        let c = cam();
        let pose = Pose::from_xyz_rpy([0.1, 0.0, 0.2], [0.0, 0.05, 0.0]);
        let (_, depth) = render_camera(&objs, &pose, &c);
        let mut checked = 0;
        for v in 0..128 {
            for u in 0..128 {
                let d = depth.data[(v * 128 + u) as usize];
                if d == 0 {
                    continue;
                }
                let p = pose.transform_point(&unproject(&c, u, v, d));
                let dist = objs
                    .iter()
                    .map(|o| o.shape.signed_distance(&o.pose.inverse_transform_point(&p)).abs())
                    .fold(f64::INFINITY, f64::min);
                // half a millimeter of rounding along a ray at most ~1.2 mm long
                assert!(dist < 1e-3, "pixel {u},{v}: {dist}");
                checked += 1;
            }
        }
        assert!(checked > 2000);
    }

    #[test]
    fn odometry_between_frames() {
        let spec = EmbodimentSpec::fetch_like();
        let mut state = WorldState::new(&spec, BasePose::new(0.5, 0.2, 0.7), vec![]);
        let mut r = Renderer::new(false);
        assert_eq!(r.render(&state, &spec).base_odom_delta, [0.0; 3]);
        state.base = state.base.integrate(0.1, 0.0, 0.0, 1.0);
        let d = r.render(&state, &spec).base_odom_delta;
        assert!((d[0] - 0.1).abs() < 1e-9 && d[1].abs() < 1e-9 && d[2].abs() < 1e-9);
    }

    #[test]
    fn observation_carries_proprioception() {
        let spec = EmbodimentSpec::fetch_like();
        let state = WorldState::new(&spec, BasePose::default(), vec![]);
        let f = Renderer::new(true).render(&state, &spec);
        assert!(f.ee_pose(Side::Left).is_none() && f.ee_pose(Side::Right).is_some());
        assert_eq!(f.rgb.len(), spec.cameras.len());
        assert_eq!(f.depth[0].data.len(), 128 * 128);
    }
}
