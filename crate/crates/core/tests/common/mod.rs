#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmcl::perception::NoiseStream;
use swarmcl::policy::{init_params, Architecture};
use swarmcl::trainer::rollout_loss_and_grad;
use swarmcl::world::{SwarmState, WorldSpec};

/// Central difference of `f` at `x` along every coordinate.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let plus = f(&probe);
            probe[i] = x[i] - h;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a − b| / max(|a|, |b|, floor)` over components.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn spaced_positions(rng: &mut ChaCha8Rng, n: usize, half: f64, sep: f64) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::new();
    while out.len() < n {
        let p = [rng.gen_range(-half..half), rng.gen_range(-half..half)];
        if out.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= sep) {
            out.push(p);
        }
    }
    out
}

/// Analytic and finite-difference gradients of the horizon-normalized loss
/// for one random policy and random `n`-robot window of `horizon` steps.
pub fn bptt_gradients(seed: u64, n: usize, horizon: usize, goal_relative: bool, h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = spaced_positions(&mut rng, n, 1.0, 0.4);
    let goals = spaced_positions(&mut rng, n, 2.0, 0.4);
    let world = WorldSpec::navigation(goals);
    let mut states = vec![SwarmState::new(
        starts
            .iter()
            .flat_map(|p| [p[0], p[1], rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
            .collect(),
    )
    .unwrap()];
    for _ in 0..horizon {
        let prev = states.last().unwrap().as_slice().to_vec();
        let next: Vec<f64> = prev.iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect();
        states.push(SwarmState::new(next).unwrap());
    }
    let arch = Architecture {
        goal_relative,
        ..Architecture::default()
    };
    let params = init_params::<f64>(&arch, seed).unwrap();
    let stream = NoiseStream::new(seed);
    let norm = horizon as f64;
    let (_, analytic) = rollout_loss_and_grad(&params, &states, &world, 0.0, &stream, 1, 0, norm).unwrap();
    let loss = |theta: &[f64]| {
        let mut p = params.clone();
        p.theta.copy_from_slice(theta);
        rollout_loss_and_grad(&p, &states, &world, 0.0, &stream, 1, 0, norm).unwrap().0
    };
    let numeric = central_differences(loss, &params.theta, h);
    (analytic, numeric)
}

/// Minimum over every monotone coupling of the maximum coupled distance,
/// by explicit enumeration of lattice paths.
pub fn frechet_by_enumeration(p: &[[f64; 2]], q: &[[f64; 2]]) -> f64 {
    fn walk(p: &[[f64; 2]], q: &[[f64; 2]], i: usize, j: usize, worst: f64, best: &mut f64) {
        let d = (p[i][0] - q[j][0]).hypot(p[i][1] - q[j][1]);
        let worst = worst.max(d);
        if i + 1 == p.len() && j + 1 == q.len() {
            *best = best.min(worst);
            return;
        }
        if i + 1 < p.len() {
            walk(p, q, i + 1, j, worst, best);
        }
        if j + 1 < q.len() {
            walk(p, q, i, j + 1, worst, best);
        }
        if i + 1 < p.len() && j + 1 < q.len() {
            walk(p, q, i + 1, j + 1, worst, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(p, q, 0, 0, 0.0, &mut best);
    best
}

pub fn random_path(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<[f64; 2]> {
    let len = rng.gen_range(1..=max_len);
    (0..len).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect()
}

/// Random swarm with positions in a box and bounded velocities.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize, half: f64) -> SwarmState<f64> {
    SwarmState::new(
        (0..n)
            .flat_map(|_| {
                [
                    rng.gen_range(-half..half),
                    rng.gen_range(-half..half),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect(),
    )
    .unwrap()
}

/// Relabels robots: robot `i` of `x` becomes robot `perm[i]`.
pub fn relabel(x: &SwarmState<f64>, perm: &[usize]) -> SwarmState<f64> {
    let mut out = vec![0.0; x.as_slice().len()];
    for (i, &p) in perm.iter().enumerate() {
        out[4 * p..4 * p + 4].copy_from_slice(&x.robot(i));
    }
    SwarmState::new(out).unwrap()
}
