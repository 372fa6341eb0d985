//! Full-loop invariants on small instances: the staged UCB certificates, the
//! leveled TS loss bound, and the elliptical potential, all checked per step
//! against independently computed quantities.

use std::sync::Arc;

use fastarm_core::linalg::dot;
use fastarm_core::oracle::exact_argmax;
use fastarm_core::{
    BackendKind, Environment, InstanceKind, LinTsParams, LinTsState, OfulParams, OfulState,
    PointSet,
};

fn two_arm_env(noise: f64, seed: u64) -> Environment {
    let arms = Arc::new(PointSet::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
    Environment::new(
        vec![1.0, 0.0],
        arms,
        noise,
        InstanceKind::PlantedGap,
        1.0,
        seed,
    )
    .unwrap()
}

#[test]
fn staged_ucb_certificates_hold_per_step() {
    let horizon = 600;
    let eta = 0.3;
    let mut env = two_arm_env(0.1, 5);
    let mut state = OfulState::new(
        env.arms().clone(),
        OfulParams {
            horizon,
            delta: 0.1,
            eta,
        },
        BackendKind::Brute,
        0.5,
        5,
    )
    .unwrap();

    let sanity_floor = 0.25 - 1.25 * eta * eta;
    let mut last_arms = Vec::new();
    for t in 0..horizon {
        let step = state.select().unwrap();
        assert!(step.stage <= state.max_stage(), "stage ceiling violated");
        if let Some(cert) = step.certificate {
            // certified quadratic form from the answered query
            assert!(
                cert >= sanity_floor - 1e-12,
                "step {t}: certificate {cert} below {sanity_floor}"
            );
            // exact-backend width bound at the firing stage
            let x = env.arms().point_by_id(step.arm).unwrap();
            let width = state.beta() * state.ridge().mahalanobis_inv(x).unwrap();
            let floor = 2f64.powi(-(step.stage as i32) - 1) - 2.0 * eta;
            assert!(
                width >= floor - 1e-12,
                "step {t}: width {width} below stage floor {floor}"
            );
        } else {
            assert!(step.random_arm);
            assert_eq!(step.stage, state.max_stage());
        }
        let reward = env.pull(step.arm).unwrap();
        state.update(step.arm, reward).unwrap();
        if t >= horizon - 100 {
            last_arms.push(step.arm);
        }
    }

    assert!(state.rebuilds() <= state.max_stage());
    let potential = state.ridge().elliptical_potential();
    let bound = state.ridge().elliptical_potential_bound();
    assert!(potential <= bound + 1e-8, "potential {potential} > {bound}");

    // the separated instance ends concentrated on the planted arm
    let hits = last_arms.iter().filter(|&&a| a == 0).count();
    assert!(hits >= 90, "only {hits}/100 late pulls on the best arm");
}

#[test]
fn staged_ucb_regret_stays_under_closed_form_bound() {
    let horizon = 400;
    let eta = 0.25;
    let delta = 0.1;
    let mut env = two_arm_env(0.2, 11);
    let mut state = OfulState::new(
        env.arms().clone(),
        OfulParams {
            horizon,
            delta,
            eta,
        },
        BackendKind::Brute,
        0.5,
        11,
    )
    .unwrap();
    let mut regret = 0.0;
    for _ in 0..horizon {
        let step = state.select().unwrap();
        regret += env.instant_regret(step.arm).unwrap();
        let reward = env.pull(step.arm).unwrap();
        state.update(step.arm, reward).unwrap();
    }
    let d = 2.0f64;
    let t = horizon as f64;
    let bound = 16.0 * state.beta() * (t * d * (1.0 + t / d).ln()).sqrt() + 40.0 * eta * t;
    assert!(regret <= bound, "regret {regret} above bound {bound}");
}

#[test]
fn leveled_ts_loss_and_certificates_hold_per_step() {
    let horizon = 300;
    let eta = 0.1;
    let mut env = two_arm_env(0.1, 7);
    let mut state = LinTsState::new(
        env.arms().clone(),
        LinTsParams {
            horizon,
            delta: 0.05,
            eta,
        },
        BackendKind::Brute,
        0.5,
        7,
    )
    .unwrap();

    let loss_bound = (3.0 + state.beta() + state.gamma()) * eta;
    for t in 0..horizon {
        let step = state.select().unwrap();
        // level certificate: value >= (1 - 1/(m+1)) r_m - eta
        if step.level > 0 {
            let spec = state.level_spec(step.level).unwrap();
            let cert = step.certificate.unwrap();
            assert!(
                cert >= spec.sanity_threshold() - 1e-12,
                "step {t}: certificate below the level threshold"
            );
        }
        // per-step approximation loss against the exact maximum
        let (_, best) = exact_argmax(env.arms(), &step.theta_tilde);
        let chosen = dot(
            &step.theta_tilde,
            env.arms().point_by_id(step.arm).unwrap(),
        );
        assert!(
            best - chosen <= loss_bound + 1e-9,
            "step {t}: loss {} above {loss_bound}",
            best - chosen
        );
        let reward = env.pull(step.arm).unwrap();
        state.update(step.arm, reward).unwrap();
    }

    let potential = state.ridge().elliptical_potential();
    let bound = state.ridge().elliptical_potential_bound();
    assert!(potential <= bound + 1e-8);
    // norm violations are concentration failures, expected almost never here
    assert!(state.norm_violations() <= 1);
}

#[test]
fn elliptical_potential_holds_across_instances_and_algorithms() {
    for (kind, seed) in [
        (InstanceKind::SphereUniform, 1u64),
        (InstanceKind::Clustered, 2),
        (InstanceKind::PlantedGap, 3),
    ] {
        let mut env = Environment::make_instance(kind, 40, 5, 0.5, 0.3, seed).unwrap();
        let horizon = 250;
        let mut state = OfulState::new(
            env.arms().clone(),
            OfulParams {
                horizon,
                delta: 0.1,
                eta: 0.2,
            },
            BackendKind::Brute,
            0.5,
            seed,
        )
        .unwrap();
        for _ in 0..horizon {
            let step = state.select().unwrap();
            let reward = env.pull(step.arm).unwrap();
            state.update(step.arm, reward).unwrap();
        }
        assert!(
            state.ridge().elliptical_potential()
                <= state.ridge().elliptical_potential_bound() + 1e-8
        );
    }
}

#[test]
fn confidence_radius_covers_the_estimate() {
    // ||theta_hat - theta_star||_{V_t} <= confidence_radius(d, T, fail) must
    // hold for all t with probability 1 - fail; count runs where it ever
    // breaks and compare against the budget with a binomial margin.
    use fastarm_core::confidence_radius;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let runs = 200;
    let horizon = 300;
    let d = 4;
    let fail = 0.05;
    let radius = confidence_radius(d, horizon, fail);
    let mut violated_runs = 0;
    for seed in 0..runs {
        let mut env =
            Environment::make_instance(InstanceKind::SphereUniform, 30, d, 1.0, 0.0, seed).unwrap();
        let mut ridge = fastarm_core::RidgeState::new(d);
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let mut broke = false;
        for _ in 0..horizon {
            let arm = rng.random_range(0..30);
            let reward = env.pull(arm).unwrap();
            ridge
                .update(&env.arms().point_by_id(arm).unwrap().to_vec(), reward)
                .unwrap();
            let diff: Vec<f64> = ridge
                .theta_hat()
                .iter()
                .zip(env.theta_star().iter())
                .map(|(a, b)| a - b)
                .collect();
            if ridge.gram().quad_form(&diff).sqrt() > radius {
                broke = true;
                break;
            }
        }
        violated_runs += u64::from(broke);
    }
    let budget = fail * runs as f64 + 3.0 * (fail * (1.0 - fail) * runs as f64).sqrt();
    assert!(
        (violated_runs as f64) <= budget,
        "{violated_runs} of {runs} runs broke the radius (budget {budget:.1})"
    );
}

#[test]
fn accelerated_ucb_runs_with_hash_backend_at_small_scale() {
    // End-to-end smoke: d^2-dimensional hash indexes with honest copy counts
    // are expensive, so this stays tiny; correctness (soundness per answer)
    // still must hold.
    let k = 32;
    let d = 2;
    let horizon = 60;
    let mut env = Environment::make_instance(InstanceKind::PlantedGap, k, d, 0.2, 0.4, 21).unwrap();
    let mut state = OfulState::new(
        env.arms().clone(),
        OfulParams {
            horizon,
            delta: 0.2,
            eta: 0.5,
        },
        BackendKind::Lsh,
        0.5,
        21,
    )
    .unwrap();
    let sanity_floor = state.spec().sanity_threshold();
    for _ in 0..horizon {
        let step = state.select().unwrap();
        if let Some(cert) = step.certificate {
            assert!(cert >= sanity_floor - 1e-12);
        }
        let reward = env.pull(step.arm).unwrap();
        state.update(step.arm, reward).unwrap();
    }
    assert!(state.rebuilds() <= state.max_stage());
}

#[test]
fn accelerated_ts_runs_with_hash_backend_at_small_scale() {
    let k = 64;
    let d = 4;
    let horizon = 50;
    let mut env =
        Environment::make_instance(InstanceKind::SphereUniform, k, d, 0.2, 0.0, 33).unwrap();
    let mut state = LinTsState::new(
        env.arms().clone(),
        LinTsParams {
            horizon,
            delta: 0.2,
            eta: 0.5,
        },
        BackendKind::Lsh,
        0.3,
        33,
    )
    .unwrap();
    for _ in 0..horizon {
        let step = state.select().unwrap();
        if step.level > 0 {
            let spec = state.level_spec(step.level).unwrap();
            assert!(step.certificate.unwrap() >= spec.sanity_threshold() - 1e-12);
        }
        let reward = env.pull(step.arm).unwrap();
        state.update(step.arm, reward).unwrap();
    }
    assert!(
        state.ridge().elliptical_potential() <= state.ridge().elliptical_potential_bound() + 1e-8
    );
}
