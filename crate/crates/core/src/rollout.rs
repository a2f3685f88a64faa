//! Closed-loop rollouts.
//!
//! [`rollout`] drives any [`Controller`] through the full world step,
//! including contact resolution; it is used for expert demonstrations and
//! evaluation. [`rollout_on_tape`] records the learned policy and the
//! boundary-free dynamics on a tape for backpropagation through time.

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::perception::{estimate_observation, estimate_observation_with_goal, NoiseKey, NoiseStream};
use crate::policy::{policy_forward_batch, BoundPolicy, PolicyParams};
use crate::scalar::Real;
use crate::world::{compute_adjacency, step, SwarmState, Trajectory, WorldSpec, STATE_DIM};

/// Where a control query sits in a run; used to key perception noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepContext {
    pub epoch: u64,
    pub trajectory: u64,
    pub step: usize,
}

impl StepContext {
    pub fn noise_key(&self, robot: usize) -> NoiseKey {
        NoiseKey {
            epoch: self.epoch,
            trajectory: self.trajectory,
            step: self.step as u64,
            robot: robot as u64,
        }
    }
}

pub trait Controller<T: Real>: Sync {
    /// Stacked controls `[u_0x, u_0y, u_1x, …]`.
    fn controls(&self, state: &SwarmState<T>, world: &WorldSpec<T>, ctx: StepContext) -> Result<Vec<T>>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroController;

impl<T: Real> Controller<T> for ZeroController {
    fn controls(&self, state: &SwarmState<T>, _: &WorldSpec<T>, _: StepContext) -> Result<Vec<T>> {
        Ok(vec![T::zero(); 2 * state.n()])
    }
}

/// Learned policy evaluated on noisy egocentric observations.
#[derive(Clone, Debug)]
pub struct PolicyController<'a, T> {
    pub params: &'a PolicyParams<T>,
    pub sigma: T,
    pub stream: NoiseStream,
}

impl<T: Real> Controller<T> for PolicyController<'_, T> {
    fn controls(&self, state: &SwarmState<T>, world: &WorldSpec<T>, ctx: StepContext) -> Result<Vec<T>> {
        let adjacency = compute_adjacency(state, world);
        let goal_relative = self.params.arch.goal_relative;
        let obs: Vec<_> = (0..state.n())
            .map(|i| {
                let key = ctx.noise_key(i);
                if goal_relative {
                    let goal = world.goals[i];
                    estimate_observation_with_goal(state, i, &adjacency, goal, self.sigma, &self.stream, key)
                } else {
                    estimate_observation(state, i, &adjacency, self.sigma, &self.stream, key)
                }
            })
            .collect();
        if goal_relative && world.goals.len() != state.n() {
            return Err(Error::Mismatch(format!("{} goals for {} robots", world.goals.len(), state.n())));
        }
        let u = policy_forward_batch(self.params, &obs, world.u_max)?;
        Ok(u.into_iter().flatten().collect())
    }
}

/// `horizon + 1` samples starting at `x0`, stepping with contact resolution.
pub fn rollout<T: Real, C: Controller<T> + ?Sized>(
    controller: &C,
    x0: &SwarmState<T>,
    horizon: usize,
    world: &WorldSpec<T>,
    epoch: u64,
    trajectory: u64,
) -> Result<Trajectory<T>> {
    if horizon == 0 {
        return Err(Error::invalid("rollout", "horizon must be at least 1"));
    }
    let mut samples = Vec::with_capacity(horizon + 1);
    let mut controls = Vec::with_capacity(horizon);
    samples.push(x0.clone());
    for k in 0..horizon {
        let ctx = StepContext { epoch, trajectory, step: k };
        let current = &samples[k];
        let u = controller.controls(current, world, ctx).map_err(|e| e.at_step(k))?;
        let next = step(current, &u, world).map_err(|e| e.at_step(k))?;
        controls.push(u);
        samples.push(next);
    }
    let mut traj = Trajectory::new(world.clone(), samples)?;
    traj.controls = Some(controls);
    Ok(traj)
}

/// Differentiable rollout of the bound policy.
///
/// Returns one `n × 4` node per sample; the first is the constant `x0`.
/// Adjacency is recomputed from node values at every step and treated as
/// piecewise constant. Dynamics are boundary-free.
#[allow(clippy::too_many_arguments)]
pub fn rollout_on_tape<T: Real>(
    tape: &mut Tape<T>,
    policy: &BoundPolicy,
    x0: &SwarmState<T>,
    horizon: usize,
    world: &WorldSpec<T>,
    sigma: T,
    stream: &NoiseStream,
    epoch: u64,
    trajectory: u64,
) -> Result<Vec<Var>> {
    if horizon == 0 {
        return Err(Error::invalid("rollout", "horizon must be at least 1"));
    }
    let n = x0.n();
    let goal_relative = policy.arch().goal_relative;
    if goal_relative && world.goals.len() != n {
        return Err(Error::Mismatch(format!("{} goals for {} robots", world.goals.len(), n)));
    }
    let x = tape.constant(Tensor::matrix(n, STATE_DIM, x0.as_slice().to_vec())?)?;
    let goal_targets = if goal_relative {
        let g: Vec<T> = world.goals.iter().flat_map(|g| [g[0], g[1], T::zero(), T::zero()]).collect();
        Some(tape.constant(Tensor::matrix(n, STATE_DIM, g)?)?)
    } else {
        None
    };
    let mut p = tape.slice(x, 1, 0, 2)?;
    let mut v = tape.slice(x, 1, 2, 2)?;
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(x);

    for k in 0..horizon {
        let x = *states.last().unwrap();
        let step_nodes = |tape: &mut Tape<T>| -> Result<(Var, Var, Var)> {
            let current = SwarmState::new(tape.value(x).data().to_vec())?;
            let adjacency = compute_adjacency(&current, world);
            let mut rows_i = Vec::new();
            let mut rows_j = Vec::new();
            let mut counts = Vec::with_capacity(n);
            for i in 0..n {
                let nb = adjacency.neighbors(i);
                counts.push(nb.len());
                rows_j.extend_from_slice(&nb);
                rows_i.extend(std::iter::repeat_n(i, nb.len()));
            }
            let xj = tape.gather_rows(x, &rows_j)?;
            let xi = tape.gather_rows(x, &rows_i)?;
            let mut rel = tape.sub(xj, xi)?;
            let mut goal = match goal_targets {
                Some(g) => Some(tape.sub(g, x)?),
                None => None,
            };
            if sigma != T::zero() {
                let extra = if goal_relative { STATE_DIM } else { 0 };
                let mut rel_noise = Vec::with_capacity(rows_j.len() * STATE_DIM);
                let mut goal_noise = Vec::with_capacity(n * extra);
                for (i, &m) in counts.iter().enumerate() {
                    let key = NoiseKey {
                        epoch,
                        trajectory,
                        step: k as u64,
                        robot: i as u64,
                    };
                    let draws = stream.draws(key, STATE_DIM * m + extra, sigma);
                    rel_noise.extend_from_slice(&draws[..STATE_DIM * m]);
                    goal_noise.extend_from_slice(&draws[STATE_DIM * m..]);
                }
                let noise = tape.constant(Tensor::matrix(rows_j.len(), STATE_DIM, rel_noise)?)?;
                rel = tape.add(rel, noise)?;
                if let Some(g) = goal {
                    let noise = tape.constant(Tensor::matrix(n, STATE_DIM, goal_noise)?)?;
                    goal = Some(tape.add(g, noise)?);
                }
            }
            let u = policy.forward(tape, rel, &counts, goal, world.u_max)?;
            let du = tape.scale(u, world.dt)?;
            let v_next = tape.add(v, du)?;
            let dp = tape.scale(v_next, world.dt)?;
            let p_next = tape.add(p, dp)?;
            let x_next = tape.concat(&[p_next, v_next], 1)?;
            Ok((p_next, v_next, x_next))
        };
        let (p_next, v_next, x_next) = step_nodes(tape).map_err(|e| e.at_step(k))?;
        p = p_next;
        v = v_next;
        states.push(x_next);
    }
    Ok(states)
}
