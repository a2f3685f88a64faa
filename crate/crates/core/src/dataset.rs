use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::world::{Task, Trajectory, WorldSpec};

/// Demonstrations sharing one world geometry and horizon `K`; each
/// trajectory carries its own goals.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    world: WorldSpec<T>,
    horizon: usize,
    trajectories: Vec<Trajectory<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn new(world: WorldSpec<T>, horizon: usize, trajectories: Vec<Trajectory<T>>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = trajectories[0].n();
        for (l, t) in trajectories.iter().enumerate() {
            if t.horizon() != horizon || t.n() != n || t.world.goals.len() != n {
                return Err(Error::Mismatch(format!("trajectory {l} does not match dataset shape")));
            }
            let geometry_matches = t.world.task == world.task
                && t.world.wall == world.wall
                && t.world.arena_half_extent == world.arena_half_extent
                && t.world.comm_radius == world.comm_radius
                && t.world.u_max == world.u_max
                && t.world.dt == world.dt;
            if !geometry_matches {
                return Err(Error::Mismatch(format!("trajectory {l} has a different world geometry")));
            }
        }
        Ok(Self {
            world: WorldSpec {
                goals: Vec::new(),
                ..world
            },
            horizon,
            trajectories,
        })
    }

    /// Shared geometry; `goals` is empty.
    pub fn world(&self) -> &WorldSpec<T> {
        &self.world
    }

    pub fn task(&self) -> Task {
        self.world.task
    }

    pub fn n(&self) -> usize {
        self.trajectories[0].n()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn trajectories(&self) -> &[Trajectory<T>] {
        &self.trajectories
    }

    /// First `count` trajectories (all if fewer).
    pub fn truncated(&self, count: usize) -> Result<Self> {
        Self::new(
            self.world.clone(),
            self.horizon,
            self.trajectories.iter().take(count).cloned().collect(),
        )
    }
}
