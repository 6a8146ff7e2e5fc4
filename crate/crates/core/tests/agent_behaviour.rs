use ambulance_rl::agents::{
    argmax, majority_vote, ActionMode, Agent, AgentConfig, AgentVariant, EnsembleActionMode, ExplorationSchedule,
    ObservationScale,
};
use ambulance_rl::replay::Transition;

fn scale(n_points: usize) -> ObservationScale {
    ObservationScale { n_dispatch_points: n_points, n_ambulances: 3, world_size_km: 50.0 }
}

fn config(variant: AgentVariant, hidden: Vec<usize>) -> AgentConfig {
    let mut cfg = AgentConfig::new(variant, ExplorationSchedule::for_horizon(1, 10, 1.0, 0.02, true));
    cfg.hidden_units = hidden;
    cfg.batch_size = 4;
    cfg.seed = 11;
    cfg
}

fn observation(n_points: usize, k: usize) -> Vec<f64> {
    let mut o = vec![0.0; n_points + 3];
    o[k % n_points] = 1.0;
    o[n_points] = 5.0 + k as f64;
    o[n_points + 1] = 45.0 - k as f64;
    o[n_points + 2] = (k % 10) as f64 / 10.0;
    o
}

/// Overwrite a single-layer (no hidden units) plain network: Q = W x + b.
fn set_linear(net: &mut ambulance_rl::neural::Network, w: &[f64], b: &[f64]) {
    let layer = net.layers()[0];
    net.params_mut()[layer.w..layer.w + w.len()].copy_from_slice(w);
    net.params_mut()[layer.b..layer.b + b.len()].copy_from_slice(b);
}

#[test]
fn full_exploration_is_uniform() {
    let mut agent = Agent::new(config(AgentVariant::Ddqn, vec![8]), scale(25)).unwrap();
    agent.set_epsilon(1.0);
    let obs = observation(25, 3);
    let mut counts = [0usize; 25];
    let n = 100_000;
    for _ in 0..n {
        counts[agent.select_action(&obs, ActionMode::Train)] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 0.04).abs() < 0.02 * 0.04 + 0.002, "{c}");
    }
}

#[test]
fn zero_epsilon_picks_the_argmax() {
    let mut agent = Agent::new(config(AgentVariant::Ddqn, vec![8]), scale(25)).unwrap();
    agent.set_epsilon(0.0);
    for k in 0..20 {
        let obs = observation(25, k);
        let q = agent.members()[0].policy.infer(&agent.scale().normalise(&obs), false).unwrap();
        assert_eq!(agent.select_action(&obs, ActionMode::Train), argmax(&q));
    }
}

#[test]
fn vote_examples() {
    assert_eq!(majority_vote(&[3, 3, 3, 7, 9], 25), 3);
    assert_eq!(majority_vote(&[2, 2, 5, 5, 8], 25), 2);
}

#[test]
fn double_q_target_uses_policy_choice_and_target_value() {
    let mut cfg = config(AgentVariant::Ddqn, vec![]);
    cfg.reward_scale = 100.0;
    cfg.discount = 0.99;
    let mut agent = Agent::new(cfg, scale(2)).unwrap();
    {
        let m = &mut agent.members_mut()[0];
        // policy prefers action 0 in the next state, target would prefer action 1
        set_linear(&mut m.policy, &[2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 0.0]);
        set_linear(&mut m.target, &[0.5, 0.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 0.0]);
    }
    let next = vec![1.0, 0.0, 0.0, 0.0, 0.0];
    let make = |terminal, truncated| Transition {
        observation: vec![0.0; 5],
        action: 1,
        reward: -50.0,
        next_observation: next.clone(),
        terminal,
        truncated,
    };
    let live = make(false, false);
    let time_limit = make(true, true);
    let end = make(true, false);
    let targets = agent.compute_td_targets(0, &[&live, &time_limit, &end]);
    let bootstrapped = -0.5 + 0.99 * 0.5;
    assert!((targets[0] - bootstrapped).abs() < 1e-15);
    assert_eq!(targets[1], targets[0]);
    assert_eq!(targets[2], -0.5);
}

#[test]
fn zero_discount_gives_the_scaled_reward() {
    let mut cfg = config(AgentVariant::D3qn, vec![6]);
    cfg.discount = 0.0;
    let agent = Agent::new(cfg, scale(4)).unwrap();
    let t = Transition {
        observation: vec![0.1; 7],
        action: 2,
        reward: -625.0,
        next_observation: vec![0.3; 7],
        terminal: false,
        truncated: false,
    };
    assert_eq!(agent.compute_td_targets(0, &[&t]), vec![-6.25]);
}

#[test]
fn learning_waits_for_a_full_batch_and_syncs_targets() {
    let mut cfg = config(AgentVariant::Ddqn, vec![8]);
    cfg.target_sync_interval_steps = 2;
    let mut agent = Agent::new(cfg, scale(4)).unwrap();
    for k in 0..3 {
        agent.remember(&observation(4, k), k % 4, -10.0 * k as f64, &observation(4, k + 1), false, false);
    }
    assert!(agent.learn_step().unwrap().skipped);
    agent.remember(&observation(4, 3), 1, -5.0, &observation(4, 4), false, false);
    let first = agent.learn_step().unwrap();
    assert!(!first.skipped && !first.target_synced);
    assert_ne!(agent.members()[0].policy.params(), agent.members()[0].target.params());
    let second = agent.learn_step().unwrap();
    assert!(second.target_synced);
    assert_eq!(agent.members()[0].policy.params(), agent.members()[0].target.params());
}

#[test]
fn bagging_steps_every_member() {
    for variant in [AgentVariant::BaggingDdqn, AgentVariant::BaggingPerNoisyD3qn] {
        let mut agent = Agent::new(config(variant, vec![8]), scale(4)).unwrap();
        assert_eq!(agent.members().len(), 5);
        for k in 0..6 {
            agent.remember(&observation(4, k), k % 4, -(k as f64), &observation(4, k + 1), false, false);
        }
        let before: Vec<Vec<f64>> = agent.members().iter().map(|m| m.policy.params().to_vec()).collect();
        let diag = agent.learn_step().unwrap();
        assert_eq!(diag.optimizer_steps, 5);
        for (m, b) in agent.members().iter().zip(&before) {
            assert_ne!(m.policy.params(), b.as_slice());
        }
    }
}

#[test]
fn larger_td_errors_gain_priority() {
    let mut cfg = config(AgentVariant::PerD3qn, vec![8]);
    cfg.batch_size = 8;
    let mut agent = Agent::new(cfg, scale(4)).unwrap();
    for k in 0..8 {
        let reward = if k < 2 { -40_000.0 } else { 0.0 };
        agent.remember(&observation(4, k), k % 4, reward, &observation(4, k + 1), true, false);
    }
    assert!(agent.memory().priorities().unwrap().iter().all(|&p| p == 1.0));
    agent.learn_step().unwrap();
    let p = agent.memory().priorities().unwrap().to_vec();
    let sampled_small: Vec<f64> = p[2..].iter().copied().filter(|&x| x != 1.0).collect();
    for big in &p[..2] {
        assert!(*big > 100.0, "{p:?}");
        assert!(sampled_small.iter().all(|s| s < big));
    }
}

#[test]
fn greedy_actions_are_deterministic_and_scale_invariant() {
    for variant in [AgentVariant::Ddqn, AgentVariant::NoisyD3qn, AgentVariant::BaggingNoisyD3qn] {
        let agent = Agent::new(config(variant, vec![]), scale(6)).unwrap();
        let mut scaled = agent.clone();
        for m in scaled.members_mut() {
            for p in m.policy.params_mut() {
                *p *= 3.5;
            }
        }
        let mut mutable = agent.clone();
        for k in 0..30 {
            let obs = observation(6, k);
            let a = agent.greedy_action(&obs).unwrap();
            assert_eq!(mutable.select_action(&obs, ActionMode::Greedy), a);
            assert_eq!(mutable.select_action(&obs, ActionMode::Greedy), a);
            assert_eq!(scaled.greedy_action(&obs).unwrap(), a, "{variant}");
        }
    }
}

#[test]
fn majority_vote_mode_returns_a_member_mode() {
    let mut cfg = config(AgentVariant::BaggingD3qn, vec![5]);
    cfg.ensemble_action_mode = EnsembleActionMode::MajorityVote;
    let mut agent = Agent::new(cfg, scale(6)).unwrap();
    for k in 0..40 {
        let obs = observation(6, k);
        let x = agent.scale().normalise(&obs);
        let votes: Vec<usize> = agent.members().iter().map(|m| argmax(&m.policy.infer(&x, false).unwrap())).collect();
        let count = |a: usize| votes.iter().filter(|&&v| v == a).count();
        let best = (0..6).map(count).max().unwrap();
        let chosen = agent.select_action(&obs, ActionMode::Train);
        assert_eq!(count(chosen), best);
    }
}

#[test]
fn random_agent_is_uniform() {
    let mut agent = Agent::new(config(AgentVariant::Random, vec![]), scale(5)).unwrap();
    assert!(agent.members().is_empty());
    let mut counts = [0usize; 5];
    for _ in 0..50_000 {
        counts[agent.select_action(&observation(5, 0), ActionMode::Greedy)] += 1;
    }
    assert!(counts.iter().all(|&c| (c as f64 / 50_000.0 - 0.2).abs() < 0.01));
}

#[test]
fn save_best_keeps_the_running_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let mut agent = Agent::new(config(AgentVariant::D3qn, vec![8]), scale(5)).unwrap();
    let saved: Vec<bool> = [-100.0, -50.0, -80.0, -50.0]
        .iter()
        .enumerate()
        .map(|(i, &r)| agent.save_best(r, i + 1, dir.path()).unwrap())
        .collect();
    assert_eq!(saved, vec![true, true, false, false]);

    let (loaded, manifest) = Agent::load_checkpoint(dir.path()).unwrap();
    assert_eq!(manifest.episode, 2);
    assert_eq!(manifest.best_total_reward, -50.0);
    for k in 0..25 {
        let obs = observation(5, k);
        assert_eq!(loaded.greedy_action(&obs), agent.greedy_action(&obs));
    }
}

#[test]
fn unwritable_checkpoint_path_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let mut agent = Agent::new(config(AgentVariant::Ddqn, vec![4]), scale(5)).unwrap();
    assert!(agent.save_best(-1.0, 1, &file.join("ckpt")).is_err());
}
