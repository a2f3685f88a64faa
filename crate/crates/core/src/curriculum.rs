//! Trajectory-length curriculum.
//!
//! Difficulty is the prediction horizon `K_e`. Training data of difficulty
//! `K_e` are contiguous windows cut from full demonstrations, the horizon
//! grows by a fixed increment every fixed number of training steps, and the
//! loss is normalized by the current horizon so early short-horizon stages
//! still produce gradients of useful magnitude.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{mix_seed, Real};
use crate::world::{SwarmState, Trajectory};

/// `K_e = min(K_max, K_init + c_K · ⌊(e − 1) / c_N⌋)` for training step `e ≥ 1`.
pub fn scheduler_horizon(e: usize, c_k: usize, c_n: usize, k_init: usize, k_max: usize) -> usize {
    assert!(e >= 1 && c_k >= 1 && c_n >= 1, "step and increments start at 1");
    let grown = k_init.saturating_add(c_k.saturating_mul((e - 1) / c_n));
    grown.min(k_max)
}

/// Fixed-increment ("baby step") schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BabyStep {
    pub k_init: usize,
    pub c_k: usize,
    pub c_n: usize,
    pub k_max: usize,
}

impl BabyStep {
    pub fn horizon(&self, e: usize) -> usize {
        scheduler_horizon(e, self.c_k, self.c_n, self.k_init, self.k_max)
    }

    pub fn criterion(&self, e: usize) -> CurriculumCriterion {
        CurriculumCriterion {
            stage: (e - 1) / self.c_n + 1,
            horizon: self.horizon(e),
            stage_length: self.c_n,
        }
    }
}

/// Training criterion in force at one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CurriculumCriterion {
    pub stage: usize,
    pub horizon: usize,
    pub stage_length: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HorizonSchedule {
    Curriculum(BabyStep),
    Fixed(usize),
}

impl HorizonSchedule {
    pub fn horizon(&self, e: usize) -> usize {
        match self {
            HorizonSchedule::Curriculum(s) => s.horizon(e),
            HorizonSchedule::Fixed(k) => *k,
        }
    }
}

/// Contiguous window `x̄(k0·T) … x̄((k0 + K_e)·T)` of one demonstration.
#[derive(Clone, Debug, PartialEq)]
pub struct SubTrajectory<T> {
    pub source: usize,
    pub start: usize,
    pub states: Vec<SwarmState<T>>,
}

impl<T: Real> SubTrajectory<T> {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }
}

/// Draws `k0` uniformly from `{0, …, K − K_e}` and cuts the window.
pub fn sample_subtrajectory<T: Real, R: Rng + ?Sized>(
    traj: &Trajectory<T>,
    source: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<SubTrajectory<T>> {
    let k = traj.horizon();
    if horizon == 0 || horizon > k {
        return Err(Error::DatasetTooShort {
            required: horizon,
            available: k,
        });
    }
    let start = rng.gen_range(0..=k - horizon);
    Ok(SubTrajectory {
        source,
        start,
        states: traj.samples[start..=start + horizon].to_vec(),
    })
}

/// Batch composition keyed by `(epoch, slot)` so it does not depend on the
/// order in which slots are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchSampler {
    seed: u64,
}

impl BatchSampler {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn sample<T: Real>(
        &self,
        dataset: &[Trajectory<T>],
        epoch: u64,
        slot: u64,
        horizon: usize,
    ) -> Result<SubTrajectory<T>> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.seed, epoch, slot]));
        let source = rng.gen_range(0..dataset.len());
        sample_subtrajectory(&dataset[source], source, horizon, &mut rng)
    }
}

/// `𝓛_e = (1 / (K_e · L_b)) Σ_l Σ_{k=0}^{K_e} ‖x^l(kT) − x̄^l(kT)‖²`, where
/// `L_b` is the number of sequence pairs. The initial states are expected
/// to coincide.
pub fn curriculum_loss<T: Real>(pred: &[Vec<SwarmState<T>>], expert: &[Vec<SwarmState<T>>], horizon: usize) -> Result<T> {
    if pred.len() != expert.len() || pred.is_empty() || horizon == 0 {
        return Err(Error::Shape {
            op: "curriculum_loss",
            lhs: vec![pred.len(), horizon],
            rhs: vec![expert.len()],
        });
    }
    let mut total = T::zero();
    for (p, e) in pred.iter().zip(expert) {
        if p.len() != horizon + 1 || e.len() != horizon + 1 {
            return Err(Error::Shape {
                op: "curriculum_loss",
                lhs: vec![p.len()],
                rhs: vec![e.len(), horizon + 1],
            });
        }
        for (a, b) in p.iter().zip(e) {
            if a.n() != b.n() {
                return Err(Error::Shape {
                    op: "curriculum_loss",
                    lhs: vec![a.n()],
                    rhs: vec![b.n()],
                });
            }
            total += a.squared_distance(b);
        }
    }
    let norm = T::from_usize(horizon * pred.len()).unwrap();
    Ok(total / norm)
}
