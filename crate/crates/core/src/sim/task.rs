//! Task files (TOML):
//!
//! ```toml
//! name = "pick-pot"
//! time_limit = 40.0          # seconds of sim time
//! seed = 7                   # default randomization seed
//! base = [0.0, 0.0, 0.0]     # initial x, y, theta
//!
//! [[objects]]
//! id = "pot"
//! shape = { cylinder = { radius = 0.07, half_height = 0.06 } }
//! position = [0.6, -0.2, 0.31]
//! rpy = [0.0, 0.0, 0.0]      # optional
//! color = [200, 70, 40]      # optional
//! graspable = true           # optional, default false
//! jitter = [0.01, 0.01, 0.0] # optional uniform ±dx, ±dy, ±dyaw
//!
//! [[success]]                # every clause must hold
//! inside = { object = "pot", min = [..], max = [..] }
//! [[success]]
//! released = "pot"
//! ```
//!
//! Shapes are `box = { half_extents = [..] }`, `sphere = { radius = .. }`
//! or `cylinder = { radius = .., half_height = .. }`. Jitter draws come
//! from a ChaCha8 stream seeded with the seed, three per jittered object in
//! file order.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::world::{BasePose, SceneObject, Shape, WorldState};
use crate::action::Pose;
use crate::robot::EmbodimentSpec;

pub const PICK_POT: &str = include_str!("../../data/tasks/pick_pot.toml");

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("task file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("task '{task}': {problem}")]
    Invalid { task: String, problem: String },
    #[error("unknown task '{0}' (bundled: pick-pot)")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub shape: Shape,
    pub position: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
    #[serde(default = "default_color")]
    pub color: [u8; 3],
    #[serde(default)]
    pub graspable: bool,
    #[serde(default)]
    pub jitter: [f64; 3],
}

fn default_color() -> [u8; 3] {
    [160, 160, 160]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Clause {
    /// object origin inside an axis-aligned world box
    Inside { object: String, min: [f64; 3], max: [f64; 3] },
    /// object not attached to any hand
    Released(String),
    /// object origin within `tolerance` meters of `position`
    Near { object: String, position: [f64; 3], tolerance: f64 },
}

impl Clause {
    fn object(&self) -> &str {
        match self {
            Clause::Inside { object, .. } | Clause::Near { object, .. } | Clause::Released(object) => object,
        }
    }

    pub fn holds(&self, state: &WorldState) -> bool {
        let Some(i) = state.object_index(self.object()) else {
            return false;
        };
        let p = state.objects[i].pose.position();
        match self {
            Clause::Inside { min, max, .. } => (0..3).all(|k| p[k] >= min[k] && p[k] <= max[k]),
            Clause::Released(_) => !state.is_grasped(i),
            Clause::Near { position, tolerance, .. } => {
                (p - nalgebra::Vector3::from(*position)).norm() <= *tolerance
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    pub time_limit: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub base: [f64; 3],
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    pub success: Vec<Clause>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskStatus {
    pub success: bool,
    pub done: bool,
}

impl TaskSpec {
    pub fn from_toml(text: &str) -> Result<Self, TaskError> {
        let t: TaskSpec = toml::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, TaskError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaskError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// A bundled task by name, or a path to a task file.
    pub fn resolve(name_or_path: &str) -> Result<Self, TaskError> {
        match name_or_path {
            "pick-pot" => Self::from_toml(PICK_POT),
            other if other.ends_with(".toml") || Path::new(other).exists() => Self::load(Path::new(other)),
            other => Err(TaskError::Unknown(other.to_string())),
        }
    }

    pub fn pick_pot() -> Self {
        Self::from_toml(PICK_POT).expect("bundled task is valid")
    }

    fn validate(&self) -> Result<(), TaskError> {
        let bad = |problem: String| TaskError::Invalid {
            task: self.name.clone(),
            problem,
        };
        if !(self.time_limit > 0.0) {
            return Err(bad(format!("time_limit must be positive, got {}", self.time_limit)));
        }
        for (k, o) in self.objects.iter().enumerate() {
            if self.objects[..k].iter().any(|p| p.id == o.id) {
                return Err(bad(format!("duplicate object id '{}'", o.id)));
            }
            if o.jitter.iter().any(|j| !(*j >= 0.0)) {
                return Err(bad(format!("object '{}': jitter must be non-negative", o.id)));
            }
            let dims: &[f64] = match &o.shape {
                Shape::Box { half_extents } => half_extents,
                Shape::Sphere { radius } => std::slice::from_ref(radius),
                Shape::Cylinder { radius, half_height } => &[*radius, *half_height],
            };
            if dims.iter().any(|d| !(*d > 0.0)) {
                return Err(bad(format!("object '{}': shape dimensions must be positive", o.id)));
            }
        }
        if self.success.is_empty() {
            return Err(bad("at least one success clause is required".into()));
        }
        for c in &self.success {
            if !self.objects.iter().any(|o| o.id == c.object()) {
                return Err(bad(format!("success clause names unknown object '{}'", c.object())));
            }
        }
        Ok(())
    }

    /// Initial world with object poses jittered by `seed`.
    pub fn initial_state(&self, spec: &EmbodimentSpec, seed: u64) -> WorldState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let objects = self
            .objects
            .iter()
            .map(|o| {
                let mut p = o.position;
                let mut rpy = o.rpy;
                if o.jitter != [0.0; 3] {
                    let mut draw = |range: f64| range * rng.random_range(-1.0..=1.0);
                    p[0] += draw(o.jitter[0]);
                    p[1] += draw(o.jitter[1]);
                    rpy[2] += draw(o.jitter[2]);
                }
                SceneObject {
                    id: o.id.clone(),
                    shape: o.shape,
                    pose: Pose::from_xyz_rpy(p, rpy),
                    graspable: o.graspable,
                    color: o.color,
                }
            })
            .collect();
        let [x, y, theta] = self.base;
        WorldState::new(spec, BasePose::new(x, y, theta), objects)
    }

    pub fn check(&self, state: &WorldState) -> TaskStatus {
        let success = self.success.iter().all(|c| c.holds(state));
        TaskStatus {
            success,
            done: success || state.sim_time >= self.time_limit,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn bundled_task_loads() {
        let t = TaskSpec::pick_pot();
        assert_eq!(t.name, "pick-pot");
        assert!(TaskSpec::resolve("pick-pot").is_ok());
        assert!(matches!(TaskSpec::resolve("fold-laundry"), Err(TaskError::Unknown(_))));
    }

    #[test]
    fn seeds_are_deterministic() {
        let t = TaskSpec::pick_pot();
        let spec = EmbodimentSpec::tiago_like();
        assert_eq!(t.initial_state(&spec, 3), t.initial_state(&spec, 3));
        assert_ne!(t.initial_state(&spec, 3), t.initial_state(&spec, 4));
    }

    #[test]
    fn pot_inside_target_is_success() {
        let t = TaskSpec::pick_pot();
        let spec = EmbodimentSpec::tiago_like();
        let mut s = t.initial_state(&spec, t.seed);
        assert_eq!(t.check(&s), TaskStatus { success: false, done: false });
        let Clause::Inside { min, max, .. } = &t.success[0] else {
            panic!("first clause is the target region");
        };
        let centre = Vector3::from(*min).lerp(&Vector3::from(*max), 0.5);
        let i = s.object_index("pot").unwrap();
        s.objects[i].pose = Pose::new(centre, *s.objects[i].pose.orientation());
        assert_eq!(t.check(&s), TaskStatus { success: true, done: true });
    }

    #[test]
    fn time_limit_ends_without_success() {
        let t = TaskSpec::pick_pot();
        let mut s = t.initial_state(&EmbodimentSpec::tiago_like(), 0);
        s.sim_time = t.time_limit;
        assert_eq!(t.check(&s), TaskStatus { success: false, done: true });
    }

    #[test]
    fn validation_errors() {
        let base = "name = \"t\"\ntime_limit = 5.0\n[[objects]]\nid = \"a\"\nshape = { sphere = { radius = 0.1 } }\nposition = [0.0, 0.0, 0.0]\n";
        assert!(TaskSpec::from_toml(&format!("{base}[[success]]\nreleased = \"a\"\n")).is_ok());
        assert!(matches!(
            TaskSpec::from_toml(&format!("{base}[[success]]\nreleased = \"b\"\n")),
            Err(TaskError::Invalid { .. })
        ));
        let err = TaskSpec::from_toml(&format!("{base}[[success]]\nvanished = \"a\"\n")).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }
}
