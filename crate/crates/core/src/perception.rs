//! Egocentric observation estimated from global state.
//!
//! Each robot sees the states of its communication neighbors (itself
//! included) relative to its own state, every component perturbed by
//! i.i.d. Gaussian noise. Noise is drawn from a counter-keyed stream so the
//! same `(epoch, trajectory, step, robot)` key always yields the same draws,
//! whatever thread evaluates it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::{mix_seed, Real};
use crate::world::{Adjacency, SwarmState, STATE_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub epoch: u64,
    pub trajectory: u64,
    pub step: u64,
    pub robot: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `count` draws from 𝒩(0, σ²) for `key`. With σ = 0 no generator is
    /// touched and the result is exactly zero.
    pub fn draws<T: Real>(&self, key: NoiseKey, count: usize, sigma: T) -> Vec<T> {
        if sigma == T::zero() {
            return vec![T::zero(); count];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[
            self.seed,
            key.epoch,
            key.trajectory,
            key.step,
            key.robot,
        ]));
        (0..count)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z) * sigma
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalObservation<T> {
    pub robot: usize,
    /// Ascending ids, always containing `robot`.
    pub neighbors: Vec<usize>,
    /// `x_j − x_i + η` for each neighbor `j`.
    pub relative: Vec<[T; 4]>,
    /// Optional goal token `[g_i − p_i, −v_i] + η`.
    pub goal: Option<[T; 4]>,
}

impl<T: Real> LocalObservation<T> {
    pub fn dim(&self) -> usize {
        STATE_DIM * self.neighbors.len()
    }
}

pub fn estimate_observation<T: Real>(
    x: &SwarmState<T>,
    i: usize,
    adjacency: &Adjacency,
    sigma: T,
    stream: &NoiseStream,
    key: NoiseKey,
) -> LocalObservation<T> {
    build(x, i, adjacency, None, sigma, stream, key)
}

/// Observation with the goal token appended; its noise follows the
/// neighbor noise in the same keyed draw sequence.
pub fn estimate_observation_with_goal<T: Real>(
    x: &SwarmState<T>,
    i: usize,
    adjacency: &Adjacency,
    goal: [T; 2],
    sigma: T,
    stream: &NoiseStream,
    key: NoiseKey,
) -> LocalObservation<T> {
    build(x, i, adjacency, Some(goal), sigma, stream, key)
}

fn build<T: Real>(
    x: &SwarmState<T>,
    i: usize,
    adjacency: &Adjacency,
    goal: Option<[T; 2]>,
    sigma: T,
    stream: &NoiseStream,
    key: NoiseKey,
) -> LocalObservation<T> {
    let neighbors = adjacency.neighbors(i);
    let extra = if goal.is_some() { STATE_DIM } else { 0 };
    let noise = stream.draws(key, STATE_DIM * neighbors.len() + extra, sigma);
    let xi = x.robot(i);
    let relative = neighbors
        .iter()
        .enumerate()
        .map(|(r, &j)| {
            let xj = x.robot(j);
            let mut out = [T::zero(); 4];
            for c in 0..STATE_DIM {
                out[c] = (xj[c] - xi[c]) + noise[r * STATE_DIM + c];
            }
            out
        })
        .collect();
    let goal = goal.map(|g| {
        let base = STATE_DIM * neighbors.len();
        let target = [g[0], g[1], T::zero(), T::zero()];
        let mut out = [T::zero(); 4];
        for c in 0..STATE_DIM {
            out[c] = (target[c] - xi[c]) + noise[base + c];
        }
        out
    });
    LocalObservation {
        robot: i,
        neighbors,
        relative,
        goal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{compute_adjacency, WorldSpec};

    fn key() -> NoiseKey {
        NoiseKey {
            epoch: 3,
            trajectory: 1,
            step: 9,
            robot: 0,
        }
    }

    #[test]
    fn zero_noise_relative_states() {
        let x = SwarmState::new(vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let w = WorldSpec::navigation(vec![[0.0, 0.0]; 2]);
        let a = compute_adjacency(&x, &w);
        let obs = estimate_observation(&x, 0, &a, 0.0, &NoiseStream::new(1), key());
        assert_eq!(obs.neighbors, vec![0, 1]);
        assert_eq!(obs.relative, vec![[0.0; 4], [1.0, 0.0, 0.0, 0.0]]);
        assert_eq!(obs.dim(), 8);
    }

    #[test]
    fn self_entry_is_zero_without_noise() {
        let x = SwarmState::new(vec![0.3, -1.0, 0.2, 0.7, 2.0, 2.0, -1.0, 0.0]).unwrap();
        let w = WorldSpec::navigation(vec![[0.0, 0.0]; 2]);
        let a = compute_adjacency(&x, &w);
        for i in 0..2 {
            let obs = estimate_observation(&x, i, &a, 0.0, &NoiseStream::new(5), key());
            let pos = obs.neighbors.iter().position(|&j| j == i).unwrap();
            assert_eq!(obs.relative[pos], [0.0; 4]);
        }
    }

    #[test]
    fn goal_token_is_relative() {
        let x = SwarmState::new(vec![1.0, 2.0, 0.5, -0.5]).unwrap();
        let w = WorldSpec::navigation(vec![[0.0, 0.0]]);
        let a = compute_adjacency(&x, &w);
        let obs = estimate_observation_with_goal(&x, 0, &a, [3.0, 1.0], 0.0, &NoiseStream::new(5), key());
        assert_eq!(obs.goal, Some([2.0, -1.0, -0.5, 0.5]));
    }

    #[test]
    fn keyed_draws_are_reproducible() {
        let s = NoiseStream::new(42);
        assert_eq!(s.draws::<f64>(key(), 8, 0.1), s.draws::<f64>(key(), 8, 0.1));
        let mut other = key();
        other.robot = 1;
        assert_ne!(s.draws::<f64>(key(), 8, 0.1), s.draws::<f64>(other, 8, 0.1));
    }

    #[test]
    fn noise_statistics_match_declared_distribution() {
        let sigma = 0.25f64;
        let n = 100_000usize;
        let s = NoiseStream::new(2024);
        let samples: Vec<f64> = (0..n as u64)
            .map(|step| {
                s.draws(
                    NoiseKey {
                        epoch: 0,
                        trajectory: 0,
                        step,
                        robot: 0,
                    },
                    1,
                    sigma,
                )[0]
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 0.0625).abs() < 0.05 * 0.0625, "var {var}");
    }
}
