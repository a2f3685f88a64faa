//! Deterministic 2-D multi-robot world with double-integrator robots.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const STATE_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    Navigation,
    Passage,
}

impl Task {
    pub fn id(self) -> u8 {
        match self {
            Task::Navigation => 0,
            Task::Passage => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Task::Navigation),
            1 => Some(Task::Passage),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Navigation => "navigation",
            Task::Passage => "passage",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "navigation" => Ok(Task::Navigation),
            "passage" => Ok(Task::Passage),
            other => Err(Error::invalid("task", format!("unknown task {other:?}"))),
        }
    }
}

/// Horizontal wall with a single opening.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wall<T> {
    pub y: T,
    pub gap_center: T,
    pub gap_half_width: T,
    pub thickness: T,
}

impl<T: Real> Wall<T> {
    pub fn centered(gap_center: T) -> Self {
        Self {
            y: T::zero(),
            gap_center,
            gap_half_width: T::lit(0.4),
            thickness: T::lit(0.1),
        }
    }

    /// Lower and upper faces of the slab inflated by `margin`.
    pub fn faces(&self, margin: T) -> (T, T) {
        let half = self.thickness / T::lit(2.0) + margin;
        (self.y - half, self.y + half)
    }

    /// Half-width of the opening available to a body of radius `margin`.
    pub fn opening(&self, margin: T) -> T {
        self.gap_half_width - margin
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldSpec<T> {
    pub task: Task,
    pub arena_half_extent: T,
    pub wall: Option<Wall<T>>,
    pub goals: Vec<[T; 2]>,
    pub comm_radius: T,
    pub dt: T,
    pub u_max: T,
    pub robot_radius: T,
}

impl<T: Real> WorldSpec<T> {
    pub const DEFAULT_COMM_RADIUS: f64 = 1.5;
    pub const DEFAULT_DT: f64 = 0.05;
    pub const DEFAULT_U_MAX: f64 = 1.0;
    pub const DEFAULT_ROBOT_RADIUS: f64 = 0.1;
    pub const DEFAULT_ARENA_HALF_EXTENT: f64 = 2.5;

    /// Open 5 m × 5 m arena.
    pub fn navigation(goals: Vec<[T; 2]>) -> Self {
        Self {
            task: Task::Navigation,
            arena_half_extent: T::lit(Self::DEFAULT_ARENA_HALF_EXTENT),
            wall: None,
            goals,
            comm_radius: T::lit(Self::DEFAULT_COMM_RADIUS),
            dt: T::lit(Self::DEFAULT_DT),
            u_max: T::lit(Self::DEFAULT_U_MAX),
            robot_radius: T::lit(Self::DEFAULT_ROBOT_RADIUS),
        }
    }

    /// Arena split by `wall`.
    pub fn passage(wall: Wall<T>, goals: Vec<[T; 2]>) -> Self {
        Self {
            task: Task::Passage,
            wall: Some(wall),
            ..Self::navigation(goals)
        }
    }

    pub fn with_goals(&self, goals: Vec<[T; 2]>) -> Self {
        Self { goals, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.arena_half_extent, self.comm_radius, self.dt, self.u_max];
        if positive.iter().any(|v| !v.is_finite() || *v <= T::zero()) || self.robot_radius < T::zero() {
            return Err(Error::invalid("world", "extent, comm radius, dt and u_max must be positive"));
        }
        match (self.task, &self.wall) {
            (Task::Navigation, Some(_)) => Err(Error::invalid("world", "navigation task has no wall")),
            (Task::Passage, None) => Err(Error::invalid("world", "passage task requires a wall")),
            (_, Some(w)) if w.gap_half_width <= self.robot_radius => {
                Err(Error::invalid("world", "gap half-width must exceed the robot radius"))
            }
            _ => Ok(()),
        }
    }
}

/// Stacked robot states, `[p_x, p_y, v_x, v_y]` per robot.
#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState<T> {
    values: Vec<T>,
}

impl<T: Real> SwarmState<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if !values.len().is_multiple_of(STATE_DIM) || values.is_empty() {
            return Err(Error::invalid("state", format!("length {} is not a positive multiple of 4", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "state" });
        }
        Ok(Self { values })
    }

    /// Robots at rest at the given positions.
    pub fn at_rest(positions: &[[T; 2]]) -> Self {
        let values = positions
            .iter()
            .flat_map(|p| [p[0], p[1], T::zero(), T::zero()])
            .collect();
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len() / STATE_DIM
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn robot(&self, i: usize) -> [T; 4] {
        let s = &self.values[i * STATE_DIM..(i + 1) * STATE_DIM];
        [s[0], s[1], s[2], s[3]]
    }

    pub fn position(&self, i: usize) -> [T; 2] {
        [self.values[i * STATE_DIM], self.values[i * STATE_DIM + 1]]
    }

    pub fn velocity(&self, i: usize) -> [T; 2] {
        [self.values[i * STATE_DIM + 2], self.values[i * STATE_DIM + 3]]
    }

    pub fn positions(&self) -> Vec<[T; 2]> {
        (0..self.n()).map(|i| self.position(i)).collect()
    }

    fn set(&mut self, i: usize, r: [T; 4]) {
        self.values[i * STATE_DIM..(i + 1) * STATE_DIM].copy_from_slice(&r);
    }

    pub fn squared_distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum()
    }
}

/// Semi-implicit Euler update without any boundary handling:
/// `v' = v + u·dt`, `p' = p + v'·dt`, controls clamped to `±u_max`.
pub fn integrate<T: Real>(state: &SwarmState<T>, controls: &[T], dt: T, u_max: T) -> Result<SwarmState<T>> {
    let n = state.n();
    if controls.len() != 2 * n {
        return Err(Error::Shape {
            op: "step",
            lhs: vec![n, 2],
            rhs: vec![controls.len()],
        });
    }
    if controls.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFinite { op: "step" });
    }
    let mut next = state.clone();
    for i in 0..n {
        let [px, py, vx, vy] = state.robot(i);
        let ux = controls[2 * i].max(-u_max).min(u_max);
        let uy = controls[2 * i + 1].max(-u_max).min(u_max);
        let vx = vx + ux * dt;
        let vy = vy + uy * dt;
        next.set(i, [px + vx * dt, py + vy * dt, vx, vy]);
    }
    if next.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op: "step" });
    }
    Ok(next)
}

/// One control period including arena and wall contact resolution.
pub fn step<T: Real>(state: &SwarmState<T>, controls: &[T], world: &WorldSpec<T>) -> Result<SwarmState<T>> {
    let mut next = integrate(state, controls, world.dt, world.u_max)?;
    resolve_boundaries(state, &mut next, world);
    Ok(next)
}

/// Projects robots back into free space and zeroes the velocity component
/// normal to the contacted surface. Obstacles are inflated by the robot radius.
pub fn resolve_boundaries<T: Real>(prev: &SwarmState<T>, next: &mut SwarmState<T>, world: &WorldSpec<T>) {
    let r = world.robot_radius;
    let hi = world.arena_half_extent - r;
    let lo = -hi;
    for i in 0..next.n() {
        let [mut px, mut py, mut vx, mut vy] = next.robot(i);
        if let Some(wall) = &world.wall {
            let (lower, upper) = wall.faces(r);
            let opening = wall.opening(r);
            let prev_y = prev.position(i)[1];
            let outside_gap = (px - wall.gap_center).abs() > opening;
            let crosses = (prev_y <= lower && py > lower) || (prev_y >= upper && py < upper);
            let inside = py > lower && py < upper;
            if outside_gap && (inside || crosses) {
                if prev_y > lower && prev_y < upper {
                    // sliding sideways out of the corridor
                    px = if px > wall.gap_center {
                        wall.gap_center + opening
                    } else {
                        wall.gap_center - opening
                    };
                    vx = T::zero();
                } else if prev_y <= lower {
                    py = lower;
                    vy = T::zero();
                } else {
                    py = upper;
                    vy = T::zero();
                }
            }
        }
        if px < lo || px > hi {
            px = px.max(lo).min(hi);
            vx = T::zero();
        }
        if py < lo || py > hi {
            py = py.max(lo).min(hi);
            vy = T::zero();
        }
        next.set(i, [px, py, vx, vy]);
    }
}

/// Communication graph: closed-ball disk graph with self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    cells: Vec<bool>,
}

impl Adjacency {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }

    /// Neighbors of `i` in ascending id order, including `i` itself.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.get(i, j)).collect()
    }
}

pub fn compute_adjacency<T: Real>(state: &SwarmState<T>, world: &WorldSpec<T>) -> Adjacency {
    let n = state.n();
    let r2 = world.comm_radius * world.comm_radius;
    let mut cells = vec![false; n * n];
    for i in 0..n {
        cells[i * n + i] = true;
        let pi = state.position(i);
        for j in i + 1..n {
            let pj = state.position(j);
            let dx = pi[0] - pj[0];
            let dy = pi[1] - pj[1];
            let linked = dx * dx + dy * dy <= r2;
            cells[i * n + j] = linked;
            cells[j * n + i] = linked;
        }
    }
    Adjacency { n, cells }
}

/// Number of robot pairs whose bodies overlap in `state`.
pub fn overlap_count<T: Real>(state: &SwarmState<T>, robot_radius: T) -> usize {
    let n = state.n();
    let min_d2 = (robot_radius + robot_radius) * (robot_radius + robot_radius);
    let mut count = 0;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (state.position(i), state.position(j));
            let d2 = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
            if d2 < min_d2 {
                count += 1;
            }
        }
    }
    count
}

/// Sampled trajectory at times `0, T, …, K·T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub world: WorldSpec<T>,
    pub samples: Vec<SwarmState<T>>,
    pub controls: Option<Vec<Vec<T>>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(world: WorldSpec<T>, samples: Vec<SwarmState<T>>) -> Result<Self> {
        let n = samples.first().map(SwarmState::n).unwrap_or(0);
        if samples.len() < 2 {
            return Err(Error::invalid("trajectory", "needs at least two samples"));
        }
        if samples.iter().any(|s| s.n() != n) {
            return Err(Error::invalid("trajectory", "samples disagree on robot count"));
        }
        Ok(Self {
            world,
            samples,
            controls: None,
        })
    }

    pub fn n(&self) -> usize {
        self.samples[0].n()
    }

    /// Number of steps `K` (one less than the sample count).
    pub fn horizon(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn path(&self, robot: usize) -> Vec<[T; 2]> {
        self.samples.iter().map(|s| s.position(robot)).collect()
    }

    pub fn final_state(&self) -> &SwarmState<T> {
        self.samples.last().expect("at least two samples")
    }
}
