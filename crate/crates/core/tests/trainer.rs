use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use system3::env::{grid, EnvSpec, GridLayout, GridRewards, GridWorld};
use system3::forward_model::{ForwardModel, Sample};
use system3::tensor::{Optimizer, OptimizerKind, ParamSet};
use system3::trainer::{bind_constraint, System3Config, Trainer};

const LB15: &str = "forall u in unsafe: 1.5 <= norm2(s - u)";
const TAUTOLOGY: &str = "forall u in unsafe: 0 <= norm2(s - u)";

fn small_config() -> System3Config {
    System3Config {
        rollout_length: 8,
        batch_size: 4,
        total_steps: 3200,
        hidden: vec![16],
        model_hidden: vec![16],
        ..System3Config::default()
    }
}

fn grid_spec() -> EnvSpec {
    EnvSpec::grid(GridLayout::bridge(), GridRewards::default())
}

fn delta(after: &ParamSet, before: &ParamSet) -> Vec<f64> {
    after
        .arrays()
        .zip(before.arrays())
        .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect::<Vec<_>>())
        .collect()
}

fn assert_ratio(a: &[f64], b: &[f64], ratio: f64) {
    let norm: f64 = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(norm > 0.0, "update is zero");
    for (x, y) in a.iter().zip(b) {
        assert!((x - ratio * y).abs() <= 1e-9 * norm.max(1e-300), "{x} vs {ratio} * {y}");
    }
}

/// One SGD iteration; returns (policy, value, forward) parameter deltas.
fn sgd_deltas(lambda: f64, beta: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let config = System3Config {
        lambda,
        beta,
        optimizer: OptimizerKind::Sgd,
        learning_rate: 0.01,
        ..small_config()
    };
    let mut t = Trainer::new(config, grid_spec(), Some(LB15), 9).unwrap();
    let (p0, v0, f0) = (
        t.model().policy_params.clone(),
        t.model().value_params.clone(),
        t.forward_model().params().clone(),
    );
    t.train_iteration().unwrap();
    (
        delta(&t.model().policy_params, &p0),
        delta(&t.model().value_params, &v0),
        delta(t.forward_model().params(), &f0),
    )
}

#[test]
fn joint_objective_scales_each_part_by_its_weight() {
    let (p1, v1, f1) = sgd_deltas(0.2, 0.4);
    let (p2, v2, f2) = sgd_deltas(0.6, 0.1);
    assert_ratio(&p2, &p1, 3.0);
    assert_ratio(&v2, &v1, 3.0);
    assert_ratio(&f2, &f1, 0.25);
}

#[test]
fn zero_weights_freeze_their_networks() {
    let (p, v, f) = sgd_deltas(0.0, 0.3);
    assert!(p.iter().chain(&v).all(|d| *d == 0.0));
    assert!(f.iter().any(|d| *d != 0.0));
    let (p, v, f) = sgd_deltas(0.15, 0.0);
    assert!(p.iter().any(|d| *d != 0.0) && v.iter().any(|d| *d != 0.0));
    assert!(f.iter().all(|d| *d == 0.0));
}

#[test]
fn tautology_rewards_every_step() {
    let config = System3Config {
        total_steps: 200 * 32,
        ..small_config()
    };
    let mut t = Trainer::new(config, grid_spec(), Some(TAUTOLOGY), 1).unwrap();
    let mut iterations = 0;
    while !t.is_finished() {
        let m = t.train_iteration().unwrap();
        assert_eq!(m.constraint_reward_rate, 1.0);
        assert_eq!(m.disagreement_rate, 0.0);
        assert!(m.forward_loss.is_finite() && m.policy_loss.is_finite());
        iterations += 1;
    }
    assert_eq!(iterations, 200);
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut t = Trainer::new(small_config(), grid_spec(), Some(LB15), 4).unwrap();
        let mut metrics = Vec::new();
        while !t.is_finished() {
            metrics.push(t.train_iteration().unwrap());
        }
        (metrics, t.save())
    };
    assert_eq!(run(), run());
}

#[test]
fn restored_checkpoint_continues_bit_identically() {
    for optimizer in [OptimizerKind::Adam, OptimizerKind::Sgd] {
        let config = System3Config {
            optimizer,
            ..small_config()
        };
        let mut a = Trainer::new(config, EnvSpec::cartpole(3), Some("-1.0 <= s[0] <= 1.0"), 2).unwrap();
        for _ in 0..5 {
            a.train_iteration().unwrap();
        }
        let mut b = Trainer::restore(&a.save()).unwrap();
        assert_eq!(b.save(), a.save());
        for _ in 0..5 {
            assert_eq!(a.train_iteration().unwrap(), b.train_iteration().unwrap());
        }
        assert_eq!(a.save(), b.save());
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let t = Trainer::new(small_config(), grid_spec(), None, 0).unwrap();
    let text = t.save();
    assert!(Trainer::restore(&text[..text.len() / 2]).is_err());
    assert!(Trainer::restore(&text.replacen("system3", "other", 1)).is_err());
}

fn fit(model: &mut ForwardModel, samples: &[(Vec<f64>, usize, Vec<f64>)], steps: usize, rng: &mut impl Rng) -> f64 {
    model.observe_states(samples.iter().flat_map(|(s, _, n)| [s.as_slice(), n.as_slice()]));
    let mut opt = Optimizer::new(OptimizerKind::Adam, model.params());
    let mut last = f64::INFINITY;
    for i in 0..steps {
        // a smaller final step size settles minibatch noise
        let lr = if i < steps * 2 / 3 { 3e-3 } else { 3e-4 };
        let batch: Vec<Sample> = (0..64)
            .map(|_| {
                let (s, a, n) = &samples[rng.gen_range(0..samples.len())];
                Sample {
                    state: s,
                    action: *a,
                    next_state: n,
                }
            })
            .collect();
        last = model.fit_step(&mut opt, &batch, lr).unwrap();
    }
    last
}

#[test]
fn forward_model_learns_the_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples: Vec<_> = (0..2000)
        .map(|_| {
            let s: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            (s.clone(), rng.gen_range(0..3), s)
        })
        .collect();
    let mut model = ForwardModel::new(2, 3, &[32, 32], 0).unwrap();
    let loss = fit(&mut model, &samples, 1500, &mut rng);
    assert!(loss < 0.05, "loss {loss}");
}

#[test]
fn forward_model_converges_to_the_grid_conditional_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut world = GridWorld::new(GridLayout::bridge(), GridRewards::default(), 1);
    let pairs = [((3, 3), grid::UP), ((10, 10), grid::LEFT), ((15, 2), grid::STAY), ((0, 0), grid::DOWN)];
    let mut samples = Vec::new();
    for &(cell, action) in &pairs {
        for _ in 0..2000 {
            let (x, y) = world.sample_next(cell, action).unwrap();
            samples.push((vec![cell.0 as f64, cell.1 as f64], action, vec![x as f64, y as f64]));
        }
    }
    let mut model = ForwardModel::new(2, 5, &[32, 32], 0).unwrap();
    fit(&mut model, &samples, 3000, &mut rng);
    for &(cell, action) in &pairs {
        let mean = world.mean_next(cell, action).unwrap();
        let p = model.predict(&[cell.0 as f64, cell.1 as f64], action).unwrap();
        for i in 0..2 {
            assert!((p[i] - mean[i]).abs() <= 0.15, "{cell:?} a={action}: {p:?} vs {mean:?}");
        }
    }
}

#[test]
fn unknown_sets_fail_to_bind() {
    let env = grid_spec().build_base(0);
    assert!(bind_constraint("forall h in hazards: 1 <= norm2(s - h)", &env).is_err());
    assert!(bind_constraint(LB15, &env).is_ok());
}

#[test]
fn uniform_policy_satisfaction_matches_the_reference_simulation() {
    // tools/random_policy_rate.py: mean 0.97182, std 0.00123 over 40 runs
    // of 100000 steps
    use system3::policy::{ActorCritic, ObsScale};
    use system3::trainer::{evaluate_policy, Selection};
    let model = ActorCritic::new(ObsScale::identity(2), 5, &[8], 0).unwrap();
    let mut env = grid_spec().build_base(0);
    let formula = bind_constraint(LB15, &env).unwrap();
    let report = evaluate_policy(&model, &mut env, Some(&formula), None, 100_000, Selection::Sample(0)).unwrap();
    assert!((report.satisfaction_rate - 0.97182).abs() <= 0.005, "{}", report.satisfaction_rate);
}
