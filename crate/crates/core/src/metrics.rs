//! Trajectory similarity and task-completion metrics.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::world::Trajectory;

/// Distance within which a robot counts as having reached its goal.
pub const COMPLETION_TOLERANCE: f64 = 0.25;

fn check_aligned<T: Real>(pred: &[Trajectory<T>], expert: &[Trajectory<T>], op: &'static str) -> Result<()> {
    let mismatch = pred.len() != expert.len()
        || pred.is_empty()
        || pred
            .iter()
            .zip(expert)
            .any(|(p, e)| p.samples.len() != e.samples.len() || p.n() != e.n());
    if mismatch {
        return Err(Error::Shape {
            op,
            lhs: pred.iter().map(|t| t.samples.len()).collect(),
            rhs: expert.iter().map(|t| t.samples.len()).collect(),
        });
    }
    Ok(())
}

/// Full-horizon loss `(1/(K·L)) Σ_l Σ_{k=0}^{K} ‖x − x̄‖²`.
pub fn traj_loss<T: Real>(pred: &[Trajectory<T>], expert: &[Trajectory<T>]) -> Result<T> {
    check_aligned(pred, expert, "traj_loss")?;
    let k = pred[0].horizon();
    let mut total = T::zero();
    for (p, e) in pred.iter().zip(expert) {
        if p.horizon() != k {
            return Err(Error::invalid("traj_loss", "trajectories have different horizons"));
        }
        for (a, b) in p.samples.iter().zip(&e.samples) {
            total += a.squared_distance(b);
        }
    }
    Ok(total / T::from_usize(k * pred.len()).unwrap())
}

/// `(1/(K·L)) Σ_l Σ_k (1/n) Σ_i ‖p_i − p̄_i‖`.
pub fn mean_position_error<T: Real>(pred: &[Trajectory<T>], expert: &[Trajectory<T>]) -> Result<T> {
    check_aligned(pred, expert, "mean_position_error")?;
    let k = pred[0].horizon();
    let mut total = T::zero();
    for (p, e) in pred.iter().zip(expert) {
        if p.horizon() != k {
            return Err(Error::invalid("mean_position_error", "trajectories have different horizons"));
        }
        let n = T::from_usize(p.n()).unwrap();
        for (a, b) in p.samples.iter().zip(&e.samples) {
            let mut sum = T::zero();
            for i in 0..a.n() {
                sum += distance(a.position(i), b.position(i));
            }
            total += sum / n;
        }
    }
    Ok(total / T::from_usize(k * pred.len()).unwrap())
}

fn distance<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Discrete Fréchet distance between two sampled paths, O(|p|·|q|).
pub fn frechet<T: Real>(p: &[[T; 2]], q: &[[T; 2]]) -> Result<T> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::invalid("frechet", "empty path"));
    }
    let m = q.len();
    let mut prev = vec![T::zero(); m];
    let mut cur = vec![T::zero(); m];
    for (i, &pi) in p.iter().enumerate() {
        for (j, &qj) in q.iter().enumerate() {
            let d = distance(pi, qj);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FrechetAggregation {
    #[default]
    Mean,
    Max,
}

/// Per-robot Fréchet distances between two trajectories, aggregated.
pub fn trajectory_frechet<T: Real>(pred: &Trajectory<T>, expert: &Trajectory<T>, agg: FrechetAggregation) -> Result<T> {
    if pred.n() != expert.n() {
        return Err(Error::Shape {
            op: "frechet",
            lhs: vec![pred.n()],
            rhs: vec![expert.n()],
        });
    }
    let per_robot = (0..pred.n())
        .map(|i| frechet(&pred.path(i), &expert.path(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(match agg {
        FrechetAggregation::Mean => per_robot.iter().copied().sum::<T>() / T::from_usize(per_robot.len()).unwrap(),
        FrechetAggregation::Max => per_robot.iter().copied().fold(T::zero(), T::max),
    })
}

/// Robots whose final position lies within the completion tolerance of their goal.
pub fn tasks_completed<T: Real>(pred: &Trajectory<T>, goals: &[[T; 2]]) -> usize {
    let last = pred.final_state();
    let tol = T::lit(COMPLETION_TOLERANCE);
    (0..last.n().min(goals.len()))
        .filter(|&i| distance(last.position(i), goals[i]) <= tol)
        .count()
}
