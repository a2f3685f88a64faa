//! Analytical demonstrators.
//!
//! Both experts use the same potential-field law: attraction toward an
//! active target, velocity damping, and short-range repulsion from other
//! robots (and, in the passage task, from the wall). The passage expert
//! switches its target between waypoints placed before and after the gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rollout::{rollout, Controller, StepContext};
use crate::scalar::{mix_seed, Real};
use crate::world::{SwarmState, Task, Trajectory, Wall, WorldSpec};

const COINCIDENT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpertConfig<T> {
    pub k_attract: T,
    pub k_repulse: T,
    pub k_damp: T,
    pub safety_radius: T,
    /// Distance of the passage waypoints from the wall faces.
    pub waypoint_offset: T,
    pub switch_radius: T,
}

impl<T: Real> Default for ExpertConfig<T> {
    fn default() -> Self {
        Self {
            k_attract: T::lit(1.0),
            k_repulse: T::lit(0.5),
            k_damp: T::lit(1.2),
            safety_radius: T::lit(0.5),
            waypoint_offset: T::lit(0.5),
            switch_radius: T::lit(0.3),
        }
    }
}

impl<T: Real> ExpertConfig<T> {
    pub fn validate(&self, comm_radius: T) -> Result<()> {
        let gains = [self.k_attract, self.k_repulse, self.k_damp, self.safety_radius];
        if gains.iter().any(|g| *g <= T::zero()) {
            return Err(Error::invalid("expert", "gains and safety radius must be positive"));
        }
        if self.safety_radius >= comm_radius {
            return Err(Error::invalid("expert", "safety radius must be below the communication radius"));
        }
        Ok(())
    }
}

/// Repulsive push `k_r (1/d − 1/d_safe) (a − b) / d³`, zero beyond `d_safe`.
fn repulsion<T: Real>(a: [T; 2], b: [T; 2], cfg: &ExpertConfig<T>) -> Option<[T; 2]> {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let d = dx.hypot(dy);
    if d >= cfg.safety_radius {
        return None;
    }
    let mag = cfg.k_repulse * (d.recip() - cfg.safety_radius.recip()) / (d * d * d);
    Some([mag * dx, mag * dy])
}

fn field<T: Real>(state: &SwarmState<T>, i: usize, target: [T; 2], world: &WorldSpec<T>, cfg: &ExpertConfig<T>) -> Result<[T; 2]> {
    let p = state.position(i);
    let v = state.velocity(i);
    let mut u = [
        cfg.k_attract * (target[0] - p[0]) - cfg.k_damp * v[0],
        cfg.k_attract * (target[1] - p[1]) - cfg.k_damp * v[1],
    ];
    for j in 0..state.n() {
        if j == i {
            continue;
        }
        let q = state.position(j);
        if (p[0] - q[0]).hypot(p[1] - q[1]) < T::lit(COINCIDENT) {
            return Err(Error::CoincidentRobots { i: i.min(j), j: i.max(j) });
        }
        if let Some(r) = repulsion(p, q, cfg) {
            u[0] += r[0];
            u[1] += r[1];
        }
    }
    if let Some(wall) = &world.wall {
        for q in wall_contacts(p, wall, world.arena_half_extent) {
            if (p[0] - q[0]).hypot(p[1] - q[1]) < T::lit(COINCIDENT) {
                continue;
            }
            if let Some(r) = repulsion(p, q, cfg) {
                u[0] += r[0];
                u[1] += r[1];
            }
        }
    }
    Ok([u[0].max(-world.u_max).min(world.u_max), u[1].max(-world.u_max).min(world.u_max)])
}

/// Closest points on the two wall segments flanking the gap.
fn wall_contacts<T: Real>(p: [T; 2], wall: &Wall<T>, half_extent: T) -> [[T; 2]; 2] {
    let (lower, upper) = wall.faces(T::zero());
    let clamp = |v: T, lo: T, hi: T| v.max(lo).min(hi);
    let y = clamp(p[1], lower, upper);
    let left_end = wall.gap_center - wall.gap_half_width;
    let right_start = wall.gap_center + wall.gap_half_width;
    [
        [clamp(p[0], -half_extent, left_end), y],
        [clamp(p[0], right_start, half_extent), y],
    ]
}

pub fn navigation_expert<T: Real>(state: &SwarmState<T>, world: &WorldSpec<T>, cfg: &ExpertConfig<T>) -> Result<Vec<T>> {
    check_goals(state, world)?;
    let mut u = Vec::with_capacity(2 * state.n());
    for i in 0..state.n() {
        u.extend(field(state, i, world.goals[i], world, cfg)?);
    }
    Ok(u)
}

/// Passage waypoints `(before, after)` centered on the gap.
pub fn passage_waypoints<T: Real>(wall: &Wall<T>, cfg: &ExpertConfig<T>) -> ([T; 2], [T; 2]) {
    let (lower, upper) = wall.faces(T::zero());
    (
        [wall.gap_center, lower - cfg.waypoint_offset],
        [wall.gap_center, upper + cfg.waypoint_offset],
    )
}

/// Target robot `i` currently steers toward in the passage task.
pub fn passage_target<T: Real>(state: &SwarmState<T>, i: usize, world: &WorldSpec<T>, cfg: &ExpertConfig<T>) -> Result<[T; 2]> {
    let wall = world
        .wall
        .as_ref()
        .ok_or_else(|| Error::invalid("passage_expert", "world has no wall"))?;
    let goal = *world
        .goals
        .get(i)
        .ok_or_else(|| Error::invalid("passage_expert", "missing goal"))?;
    let (before, after) = passage_waypoints(wall, cfg);
    let (lower, upper) = wall.faces(T::zero());
    let p = state.position(i);
    let near = |w: [T; 2]| (p[0] - w[0]).hypot(p[1] - w[1]) <= cfg.switch_radius;
    let target = if p[1] < lower {
        // Below the wall: line up under the gap, then climb through it.
        let in_column = (p[0] - wall.gap_center).abs() <= cfg.switch_radius && p[1] >= before[1];
        if near(before) || in_column {
            after
        } else {
            before
        }
    } else if p[1] <= upper || p[1] < after[1] - cfg.switch_radius {
        after
    } else {
        goal
    };
    Ok(target)
}

pub fn passage_expert<T: Real>(state: &SwarmState<T>, world: &WorldSpec<T>, cfg: &ExpertConfig<T>) -> Result<Vec<T>> {
    check_goals(state, world)?;
    let mut u = Vec::with_capacity(2 * state.n());
    for i in 0..state.n() {
        let target = passage_target(state, i, world, cfg)?;
        u.extend(field(state, i, target, world, cfg)?);
    }
    Ok(u)
}

fn check_goals<T: Real>(state: &SwarmState<T>, world: &WorldSpec<T>) -> Result<()> {
    if world.goals.len() != state.n() {
        return Err(Error::Mismatch(format!("{} goals for {} robots", world.goals.len(), state.n())));
    }
    Ok(())
}

/// Task-appropriate expert as a rollout controller.
#[derive(Clone, Copy, Debug)]
pub struct ExpertController<T> {
    pub config: ExpertConfig<T>,
}

impl<T: Real> Controller<T> for ExpertController<T> {
    fn controls(&self, state: &SwarmState<T>, world: &WorldSpec<T>, _: StepContext) -> Result<Vec<T>> {
        match world.task {
            Task::Navigation => navigation_expert(state, world, &self.config),
            Task::Passage => passage_expert(state, world, &self.config),
        }
    }
}

/// Whether every robot ends within the completion tolerance of its goal.
pub fn demonstration_succeeded<T: Real>(traj: &Trajectory<T>) -> bool {
    crate::metrics::tasks_completed(traj, &traj.world.goals) == traj.n()
}

/// Train and test demonstrations are drawn from disjoint seed streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn tag(self) -> u64 {
        match self {
            Split::Train => 0x7472_6169_6e00_0000,
            Split::Test => 0x7465_7374_0000_0000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationConfig<T> {
    pub task: Task,
    pub n: usize,
    pub trajectories: usize,
    pub horizon: usize,
    pub seed: u64,
    pub split: Split,
    pub comm_radius: T,
    pub u_max: T,
    pub dt: T,
    pub expert: ExpertConfig<T>,
    /// Upper bound on the start-to-goal distance of each robot, if any.
    pub goal_radius: Option<T>,
    /// Minimum spacing between initial positions and between goals.
    pub min_separation: T,
}

impl<T: Real> GenerationConfig<T> {
    pub fn new(task: Task, n: usize, trajectories: usize, horizon: usize, seed: u64) -> Self {
        Self {
            task,
            n,
            trajectories,
            horizon,
            seed,
            split: Split::Train,
            comm_radius: T::lit(WorldSpec::<T>::DEFAULT_COMM_RADIUS),
            u_max: T::lit(WorldSpec::<T>::DEFAULT_U_MAX),
            dt: T::lit(WorldSpec::<T>::DEFAULT_DT),
            expert: ExpertConfig::default(),
            goal_radius: None,
            min_separation: T::lit(0.5),
        }
    }

    /// World shared by every trajectory (goals left empty). The passage gap
    /// position is drawn from the seed.
    pub fn world_template(&self) -> WorldSpec<T> {
        let mut world = match self.task {
            Task::Navigation => WorldSpec::navigation(Vec::new()),
            Task::Passage => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.seed, self.split.tag(), u64::MAX]));
                let center: f64 = rng.gen_range(-1.5..=1.5);
                WorldSpec::passage(Wall::centered(T::lit(center)), Vec::new())
            }
        };
        world.comm_radius = self.comm_radius;
        world.u_max = self.u_max;
        world.dt = self.dt;
        world
    }
}

const MAX_CONSECUTIVE_REJECTIONS: usize = 100;
const MAX_PLACEMENT_DRAWS: usize = 10_000;

/// Expert demonstrations from random non-overlapping placements; failed
/// episodes are redrawn. Pure in the configuration.
pub fn generate_dataset<T: Real>(cfg: &GenerationConfig<T>) -> Result<Dataset<T>> {
    if cfg.trajectories == 0 {
        return Err(Error::EmptyDataset);
    }
    if cfg.horizon < 2 || cfg.n == 0 {
        return Err(Error::invalid("generate", "need K ≥ 2 and at least one robot"));
    }
    let template = cfg.world_template();
    template.validate()?;
    cfg.expert.validate(cfg.comm_radius)?;
    let controller = ExpertController { config: cfg.expert };

    let trajectories = (0..cfg.trajectories)
        .into_par_iter()
        .map(|l| {
            for attempt in 0..MAX_CONSECUTIVE_REJECTIONS {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, cfg.split.tag(), l as u64, attempt as u64]));
                let (starts, goals) = place(cfg, &template, &mut rng)?;
                let world = template.with_goals(goals);
                let x0 = SwarmState::at_rest(&starts);
                match rollout(&controller, &x0, cfg.horizon, &world, 0, l as u64) {
                    Ok(mut traj) if demonstration_succeeded(&traj) => {
                        traj.controls = None;
                        return Ok(traj);
                    }
                    Ok(_) | Err(Error::Rollout { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Infeasible(format!(
                "episode {l}: expert failed {MAX_CONSECUTIVE_REJECTIONS} consecutive attempts"
            )))
        })
        .collect::<Result<Vec<_>>>()?;

    Dataset::new(template, cfg.horizon, trajectories)
}

/// Start and goal positions.
type Placement<T> = (Vec<[T; 2]>, Vec<[T; 2]>);

fn place<T: Real>(cfg: &GenerationConfig<T>, world: &WorldSpec<T>, rng: &mut ChaCha8Rng) -> Result<Placement<T>> {
    let half = world.arena_half_extent.as_f64() - 0.3;
    let sep = cfg.min_separation.as_f64();
    let (start_y, goal_y) = match &world.wall {
        None => ((-half, half), (-half, half)),
        Some(w) => {
            let (lower, upper) = w.faces(T::zero());
            let margin = cfg.expert.waypoint_offset.as_f64() + 0.25;
            ((-half, lower.as_f64() - margin), (upper.as_f64() + margin, half))
        }
    };
    let spaced = |pts: &[[f64; 2]], c: [f64; 2]| pts.iter().all(|p| (p[0] - c[0]).hypot(p[1] - c[1]) >= sep);

    let mut starts: Vec<[f64; 2]> = Vec::with_capacity(cfg.n);
    let mut goals: Vec<[f64; 2]> = Vec::with_capacity(cfg.n);
    let mut draws = 0;
    while starts.len() < cfg.n {
        draws += 1;
        if draws > MAX_PLACEMENT_DRAWS {
            return Err(Error::Infeasible("cannot place robots without overlap".into()));
        }
        let s = [rng.gen_range(-half..=half), rng.gen_range(start_y.0..=start_y.1)];
        if !spaced(&starts, s) {
            continue;
        }
        let g = match cfg.goal_radius {
            None => [rng.gen_range(-half..=half), rng.gen_range(goal_y.0..=goal_y.1)],
            Some(r) => {
                let r = r.as_f64();
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let dist = r * rng.gen_range(0.0f64..=1.0).sqrt();
                [s[0] + dist * angle.cos(), s[1] + dist * angle.sin()]
            }
        };
        let inside = g[0].abs() <= half && g[1] >= goal_y.0 && g[1] <= goal_y.1;
        if inside && spaced(&goals, g) {
            starts.push(s);
            goals.push(g);
        }
    }
    let conv = |v: Vec<[f64; 2]>| v.into_iter().map(|p| [T::lit(p[0]), T::lit(p[1])]).collect();
    Ok((conv(starts), conv(goals)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_at_goal() {
        let s = SwarmState::at_rest(&[[1.0, 1.0], [-1.0, -1.0]]);
        let w = WorldSpec::navigation(vec![[1.0, 1.0], [-1.0, -1.0]]);
        let u = navigation_expert(&s, &w, &ExpertConfig::default()).unwrap();
        assert_eq!(u, vec![0.0; 4]);
    }

    #[test]
    fn attraction_sign() {
        let s = SwarmState::at_rest(&[[-1.0, 0.0]]);
        let w = WorldSpec::navigation(vec![[0.5, 0.0]]);
        let u = navigation_expert(&s, &w, &ExpertConfig::default()).unwrap();
        assert!(u[0] > 0.0);
    }

    #[test]
    fn repulsion_pushes_apart() {
        let s = SwarmState::at_rest(&[[0.0, 0.0], [0.3, 0.1]]);
        let w = WorldSpec::navigation(vec![[0.0, 0.0], [0.3, 0.1]]);
        let u = navigation_expert(&s, &w, &ExpertConfig::default()).unwrap();
        let du = [u[0] - u[2], u[1] - u[3]];
        let dp = [0.0 - 0.3, 0.0 - 0.1];
        assert!(du[0] * dp[0] + du[1] * dp[1] > 0.0);
    }

    #[test]
    fn coincident_robots_error() {
        let s = SwarmState::at_rest(&[[0.0, 0.0], [0.0, 0.0]]);
        let w = WorldSpec::navigation(vec![[1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(
            navigation_expert(&s, &w, &ExpertConfig::default()),
            Err(Error::CoincidentRobots { .. })
        ));
    }

    #[test]
    fn controls_respect_bound() {
        let s = SwarmState::at_rest(&[[0.0, 0.0], [0.05, 0.0], [-2.0, 2.0]]);
        let w = WorldSpec::navigation(vec![[2.0, 2.0], [-2.0, -2.0], [2.0, -2.0]]);
        let u = navigation_expert(&s, &w, &ExpertConfig::default()).unwrap();
        assert!(u.iter().all(|v: &f64| v.abs() <= 1.0));
    }

    #[test]
    fn passage_target_stages() {
        let cfg = ExpertConfig::default();
        let w = WorldSpec::passage(Wall::centered(0.5), vec![[1.0, 2.0]]);
        let (before, after) = passage_waypoints(w.wall.as_ref().unwrap(), &cfg);
        let far_below = SwarmState::at_rest(&[[-2.0, -2.0]]);
        assert_eq!(passage_target(&far_below, 0, &w, &cfg).unwrap(), before);
        assert!(before[1] < 0.0 && before[0] == 0.5);
        let at_before = SwarmState::at_rest(&[[0.5, -0.5]]);
        assert_eq!(passage_target(&at_before, 0, &w, &cfg).unwrap(), after);
        let in_gap = SwarmState::at_rest(&[[0.5, 0.0]]);
        assert_eq!(passage_target(&in_gap, 0, &w, &cfg).unwrap(), after);
        let past = SwarmState::at_rest(&[[0.6, 0.7]]);
        assert_eq!(passage_target(&past, 0, &w, &cfg).unwrap(), [1.0, 2.0]);
    }

    #[test]
    fn passage_expert_mostly_completes() {
        let cfg = GenerationConfig::<f64>::new(Task::Passage, 4, 1, 300, 3);
        let template = cfg.world_template();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (starts, goals) = place(&cfg, &template, &mut rng).unwrap();
        let world = template.with_goals(goals.clone());
        let ctrl = ExpertController { config: ExpertConfig::default() };
        let traj = rollout(&ctrl, &SwarmState::at_rest(&starts), 300, &world, 0, 0).unwrap();
        let done = crate::metrics::tasks_completed(&traj, &goals);
        assert!(done >= 3, "only {done} of 4 robots arrived");
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenerationConfig::<f64>::new(Task::Navigation, 2, 3, 50, 7);
        let cfg = GenerationConfig {
            goal_radius: Some(1.0),
            ..cfg
        };
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn empty_request_is_rejected() {
        let cfg = GenerationConfig::<f64>::new(Task::Navigation, 2, 0, 50, 7);
        assert!(matches!(generate_dataset(&cfg), Err(Error::EmptyDataset)));
    }
}
