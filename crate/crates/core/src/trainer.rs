//! Backpropagation-through-time training under a horizon schedule, and
//! closed-loop evaluation.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::autodiff::{AdamConfig, AdamState, Tape, Tensor};
use crate::curriculum::{BabyStep, BatchSampler, HorizonSchedule};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{mean_position_error, tasks_completed, traj_loss, trajectory_frechet, FrechetAggregation};
use crate::perception::NoiseStream;
use crate::policy::{init_params, Architecture, BoundPolicy, PolicyParams};
use crate::rollout::{rollout, rollout_on_tape, Controller, PolicyController};
use crate::scalar::{mix_seed, Real};
use crate::world::{overlap_count, Task, STATE_DIM};

/// Noise epoch reserved for evaluation rollouts.
pub const EVAL_EPOCH: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig<T> {
    pub task: Task,
    /// Total optimizer steps `E`; one sampled batch per step.
    pub steps: usize,
    pub batch: usize,
    pub adam: AdamConfig<T>,
    pub sigma: T,
    pub seed: u64,
    pub curriculum: bool,
    pub c_k: usize,
    pub c_n: usize,
    pub k_init: usize,
    /// Horizon used when the curriculum is off.
    pub baseline_horizon: usize,
    pub checkpoint_every: usize,
    pub arch: Architecture,
}

impl<T: Real> TrainConfig<T> {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            steps: 5000,
            batch: 32,
            adam: AdamConfig::default(),
            sigma: T::zero(),
            seed: 0,
            curriculum: true,
            c_k: 1,
            c_n: 150,
            k_init: 1,
            baseline_horizon: 5,
            checkpoint_every: 500,
            arch: Architecture::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch == 0 || self.checkpoint_every == 0 {
            return Err(Error::invalid("train", "steps, batch and checkpoint cadence must be positive"));
        }
        if self.c_k == 0 || self.c_n == 0 || self.k_init == 0 || self.baseline_horizon == 0 {
            return Err(Error::invalid("train", "horizon parameters must be positive"));
        }
        if self.sigma.is_nan() || self.sigma < T::zero() {
            return Err(Error::invalid("train", "sigma must be non-negative"));
        }
        self.arch.validate()
    }

    /// Horizon schedule for a dataset of horizon `k_max`.
    pub fn schedule(&self, k_max: usize) -> HorizonSchedule {
        if self.curriculum {
            HorizonSchedule::Curriculum(BabyStep {
                k_init: self.k_init,
                c_k: self.c_k,
                c_n: self.c_n,
                k_max,
            })
        } else {
            HorizonSchedule::Fixed(self.baseline_horizon)
        }
    }

    /// Stable 64-bit digest of every field.
    pub fn fingerprint(&self) -> u64 {
        let canonical = format!(
            "task={};E={};batch={};lr={:e};b1={:e};b2={:e};eps={:e};sigma={:e};seed={};cl={};cK={};cN={};Kinit={};Kbase={};ckpt={};h={};enc={:?};dec={:?};goal={}",
            self.task.name(),
            self.steps,
            self.batch,
            self.adam.lr.as_f64(),
            self.adam.beta1.as_f64(),
            self.adam.beta2.as_f64(),
            self.adam.eps.as_f64(),
            self.sigma.as_f64(),
            self.seed,
            self.curriculum,
            self.c_k,
            self.c_n,
            self.k_init,
            self.baseline_horizon,
            self.checkpoint_every,
            self.arch.embed_dim,
            self.arch.encoder,
            self.arch.decoder_hidden,
            self.arch.goal_relative,
        );
        let digest = Sha256::digest(canonical.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    fn init_seed(&self) -> u64 {
        mix_seed(&[self.seed, 1])
    }

    fn batch_seed(&self) -> u64 {
        mix_seed(&[self.seed, 2])
    }

    fn noise_seed(&self) -> u64 {
        mix_seed(&[self.seed, 3])
    }
}

/// Trained policy plus the optimizer state needed to resume.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub params: PolicyParams<T>,
    pub adam: AdamState<T>,
    pub step: u64,
    pub config_hash: u64,
    pub task: Task,
    pub n: usize,
}

/// One row of the training curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveRecord<T> {
    pub step: usize,
    pub horizon: usize,
    pub loss: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutput<T> {
    pub curve: Vec<CurveRecord<T>>,
    pub checkpoints: Vec<Checkpoint<T>>,
}

impl<T> TrainOutput<T> {
    pub fn last(&self) -> &Checkpoint<T> {
        self.checkpoints.last().expect("training emits a final checkpoint")
    }
}

/// Loss and parameter gradient of one rollout's share of the batch loss.
#[allow(clippy::too_many_arguments)]
pub fn rollout_loss_and_grad<T: Real>(
    params: &PolicyParams<T>,
    expert: &[crate::world::SwarmState<T>],
    world: &crate::world::WorldSpec<T>,
    sigma: T,
    stream: &NoiseStream,
    epoch: u64,
    slot: u64,
    normalizer: T,
) -> Result<(T, Vec<T>)> {
    let horizon = expert.len() - 1;
    let n = expert[0].n();
    let mut tape = Tape::new();
    let theta = tape.leaf(Tensor::vector(params.theta.clone()))?;
    let bound = BoundPolicy::bind(&mut tape, theta, &params.arch)?;
    let states = rollout_on_tape(&mut tape, &bound, &expert[0], horizon, world, sigma, stream, epoch, slot)?;
    // k = 0 contributes nothing: the rollout starts on the demonstrated state.
    let mut total = None;
    for (k, &x) in states.iter().enumerate().skip(1) {
        let target = tape.constant(Tensor::matrix(n, STATE_DIM, expert[k].as_slice().to_vec())?)?;
        let diff = tape.sub(x, target)?;
        let sq = tape.square(diff)?;
        let s = tape.sum(sq)?;
        total = Some(match total {
            None => s,
            Some(acc) => tape.add(acc, s)?,
        });
    }
    let total = total.expect("horizon ≥ 1");
    let loss = tape.scale(total, normalizer.recip())?;
    let value = tape.value(loss).item().unwrap();
    let grads = tape.backward(loss)?;
    Ok((value, grads.wrt(theta)?.data().to_vec()))
}

/// Trains from a fresh initialization.
pub fn train<T: Real>(dataset: &Dataset<T>, cfg: &TrainConfig<T>) -> Result<TrainOutput<T>> {
    cfg.validate()?;
    let params = init_params(&cfg.arch, cfg.init_seed())?;
    train_from(dataset, cfg, params)
}

/// Trains starting from `params`.
pub fn train_from<T: Real>(dataset: &Dataset<T>, cfg: &TrainConfig<T>, mut params: PolicyParams<T>) -> Result<TrainOutput<T>> {
    cfg.validate()?;
    if dataset.task() != cfg.task {
        return Err(Error::Mismatch(format!(
            "dataset task {} but config task {}",
            dataset.task().name(),
            cfg.task.name()
        )));
    }
    if params.arch != cfg.arch {
        return Err(Error::Mismatch("parameters do not match the configured architecture".into()));
    }
    let schedule = cfg.schedule(dataset.horizon());
    let sampler = BatchSampler::new(cfg.batch_seed());
    let stream = NoiseStream::new(cfg.noise_seed());
    let mut adam = AdamState::new(params.theta.len(), cfg.adam);
    let config_hash = cfg.fingerprint();
    let trajectories = dataset.trajectories();

    let mut curve = Vec::with_capacity(cfg.steps);
    let mut checkpoints = Vec::new();
    for e in 1..=cfg.steps {
        let horizon = schedule.horizon(e);
        if horizon > dataset.horizon() {
            return Err(Error::DatasetTooShort {
                required: horizon,
                available: dataset.horizon(),
            });
        }
        let normalizer = T::from_usize(horizon * cfg.batch).unwrap();
        let epoch = e as u64;
        let diverged = |_| Error::TrainingDiverged { step: e, horizon };
        let parts = (0..cfg.batch)
            .into_par_iter()
            .map(|slot| {
                let sub = sampler.sample(trajectories, epoch, slot as u64, horizon)?;
                let world = &trajectories[sub.source].world;
                rollout_loss_and_grad(&params, &sub.states, world, cfg.sigma, &stream, epoch, slot as u64, normalizer)
            })
            .collect::<Vec<_>>();

        let mut loss = T::zero();
        let mut grad = vec![T::zero(); params.theta.len()];
        for part in parts {
            let (l, g) = part.map_err(|err| match err {
                Error::Rollout { .. } | Error::NonFinite { .. } => diverged(()),
                other => other,
            })?;
            loss += l;
            for (acc, v) in grad.iter_mut().zip(&g) {
                *acc += *v;
            }
        }
        if !loss.is_finite() {
            return Err(diverged(()));
        }
        adam.step(&mut params.theta, &grad).map_err(|_| diverged(()))?;
        curve.push(CurveRecord { step: e, horizon, loss });
        if e % cfg.checkpoint_every == 0 || e == cfg.steps {
            checkpoints.push(Checkpoint {
                params: params.clone(),
                adam: adam.clone(),
                step: e as u64,
                config_hash,
                task: cfg.task,
                n: dataset.n(),
            });
        }
    }
    Ok(TrainOutput { curve, checkpoints })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryMetrics<T> {
    pub loss: T,
    pub position_error: T,
    pub frechet: T,
    pub completed: usize,
    pub overlaps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanMetrics<T> {
    pub loss: T,
    pub position_error: T,
    pub frechet: T,
    pub completed: T,
    pub overlaps: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport<T> {
    pub per_trajectory: Vec<TrajectoryMetrics<T>>,
    pub mean: MeanMetrics<T>,
    pub sigma: T,
    pub test_size: usize,
}

impl<T: Real> MetricsReport<T> {
    fn from_rows(per_trajectory: Vec<TrajectoryMetrics<T>>, sigma: T) -> Self {
        let count = T::from_usize(per_trajectory.len()).unwrap();
        let avg = |f: &dyn Fn(&TrajectoryMetrics<T>) -> T| per_trajectory.iter().map(f).sum::<T>() / count;
        let mean = MeanMetrics {
            loss: avg(&|m| m.loss),
            position_error: avg(&|m| m.position_error),
            frechet: avg(&|m| m.frechet),
            completed: avg(&|m| T::from_usize(m.completed).unwrap()),
            overlaps: avg(&|m| T::from_usize(m.overlaps).unwrap()),
        };
        Self {
            test_size: per_trajectory.len(),
            per_trajectory,
            mean,
            sigma,
        }
    }

    pub fn median_loss(&self) -> T {
        median(self.per_trajectory.iter().map(|m| m.loss).collect())
    }

    pub fn median_frechet(&self) -> T {
        median(self.per_trajectory.iter().map(|m| m.frechet).collect())
    }
}

pub fn median<T: Real>(mut values: Vec<T>) -> T {
    assert!(!values.is_empty(), "median of empty set");
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / T::lit(2.0)
    }
}

/// Closed-loop rollout from every test initial state over the full horizon.
/// `sigma` is recorded in the report; the controller applies its own noise.
pub fn evaluate_controller<T: Real, C: Controller<T>>(controller: &C, testset: &Dataset<T>, sigma: T) -> Result<MetricsReport<T>> {
    let rows = testset
        .trajectories()
        .par_iter()
        .enumerate()
        .map(|(l, expert)| {
            let pred = rollout(controller, &expert.samples[0], expert.horizon(), &expert.world, EVAL_EPOCH, l as u64)?;
            let pair = (std::slice::from_ref(&pred), std::slice::from_ref(expert));
            Ok(TrajectoryMetrics {
                loss: traj_loss(pair.0, pair.1)?,
                position_error: mean_position_error(pair.0, pair.1)?,
                frechet: trajectory_frechet(&pred, expert, FrechetAggregation::Mean)?,
                completed: tasks_completed(&pred, &expert.world.goals),
                overlaps: pred
                    .samples
                    .iter()
                    .map(|s| overlap_count(s, pred.world.robot_radius))
                    .sum(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_rows(rows, sigma))
}

/// Evaluates a checkpoint with perception noise `sigma`, seeded by `seed`.
pub fn evaluate<T: Real>(checkpoint: &Checkpoint<T>, testset: &Dataset<T>, sigma: T, seed: u64) -> Result<MetricsReport<T>> {
    if checkpoint.n != testset.n() {
        return Err(Error::Mismatch(format!(
            "checkpoint trained with {} robots, test set has {}",
            checkpoint.n,
            testset.n()
        )));
    }
    if checkpoint.task != testset.task() {
        return Err(Error::Mismatch("checkpoint and test set tasks differ".into()));
    }
    let controller = PolicyController {
        params: &checkpoint.params,
        sigma,
        stream: NoiseStream::new(seed),
    };
    evaluate_controller(&controller, testset, sigma)
}
