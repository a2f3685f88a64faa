mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmcl::rollout::{rollout, ZeroController};
use swarmcl::world::{step, SwarmState, WorldSpec};

#[test]
fn zero_control_preserves_speed_without_boundaries() {
    let mut world = WorldSpec::navigation(Vec::new());
    world.arena_half_extent = 1e6;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x0 = common::random_state(&mut rng, 4, 1.0);
    let traj = rollout(&ZeroController, &x0, 100, &world, 0, 0).unwrap();
    for s in &traj.samples {
        for i in 0..4 {
            assert_eq!(s.velocity(i), x0.velocity(i));
        }
    }
}

#[test]
fn step_is_translation_equivariant() {
    let mut world = WorldSpec::navigation(Vec::new());
    world.arena_half_extent = 1e6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let x = common::random_state(&mut rng, 3, 1.0);
        let u: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // power-of-two shift keeps the additions exact
        let shift = [4.0, -8.0];
        let shifted = SwarmState::new(
            x.as_slice()
                .chunks(4)
                .flat_map(|r| [r[0] + shift[0], r[1] + shift[1], r[2], r[3]])
                .collect(),
        )
        .unwrap();
        let a = step(&x, &u, &world).unwrap();
        let b = step(&shifted, &u, &world).unwrap();
        for i in 0..3 {
            let (pa, pb) = (a.position(i), b.position(i));
            assert!((pa[0] + shift[0] - pb[0]).abs() < 1e-14 && (pa[1] + shift[1] - pb[1]).abs() < 1e-14);
            assert_eq!(a.velocity(i), b.velocity(i));
        }
    }
}

#[test]
fn arena_keeps_robots_inside() {
    let world = WorldSpec::navigation(Vec::new());
    let x = SwarmState::new(vec![2.3, -2.3, 3.0, -3.0]).unwrap();
    let next = step(&x, &[1.0, -1.0], &world).unwrap();
    assert_eq!(next.robot(0), [2.4, -2.4, 0.0, 0.0]);
}
