mod common;

use ambulance_rl::env::{
    AmbulanceStatus, DispatchLayout, EnvError, Environment, Point, ResetOptions, ScriptedIncident, SimConfig,
};

fn env_with(n_ambulances: usize) -> Environment {
    Environment::new(SimConfig {
        n_ambulances,
        episode_duration_days: 1,
        ..SimConfig::default()
    })
    .unwrap()
}

fn scripted(calls: &[(f64, f64, f64)]) -> Option<Vec<ScriptedIncident>> {
    Some(
        calls
            .iter()
            .map(|&(t, x, y)| ScriptedIncident { call_time_min: t, location: Point::new(x, y) })
            .collect(),
    )
}

#[test]
fn grid_and_hospital_layout() {
    let env = Environment::new(SimConfig::default()).unwrap();
    let coords = [5.0, 15.0, 25.0, 35.0, 45.0];
    assert_eq!(env.dispatch_points().len(), 25);
    for (i, p) in env.dispatch_points().iter().enumerate() {
        assert_eq!((p.x, p.y), (coords[i % 5], coords[i / 5]));
    }
    assert_eq!(env.hospitals(), &[Point::new(25.0, 25.0)]);
    assert_eq!(env.incident_centres().len(), 2);
    assert!(env.incident_centres().iter().all(|c| c.len() == 1));
}

#[test]
fn layout_is_fixed_by_config_seed() {
    let a = Environment::new(SimConfig::default()).unwrap();
    let b = Environment::new(SimConfig::default()).unwrap();
    assert_eq!(a.incident_centres(), b.incident_centres());
    assert_eq!(a.dispatch_points(), b.dispatch_points());
    let c = Environment::new(SimConfig { random_seed: 43, ..SimConfig::default() }).unwrap();
    assert_ne!(a.incident_centres(), c.incident_centres());

    let mut env = a.clone();
    for seed in 0..5 {
        env.reset(seed);
        env.step(3).unwrap();
    }
    assert_eq!(env.incident_centres(), b.incident_centres());
}

#[test]
fn non_square_grid_is_rejected() {
    let cfg = SimConfig { n_dispatch_points: 24, ..SimConfig::default() };
    assert!(matches!(Environment::new(cfg.clone()), Err(EnvError::InvalidConfig(_))));
    let random = SimConfig { dispatch_layout: DispatchLayout::Random, ..cfg };
    let env = Environment::new(random).unwrap();
    assert_eq!(env.dispatch_points().len(), 24);
}

#[test]
fn reset_leaves_one_ambulance_unallocated() {
    let mut env = Environment::new(SimConfig::default()).unwrap();
    for seed in 0..20 {
        let obs = env.reset(seed);
        assert_eq!(obs.features.len(), 28);
        assert_eq!(obs.counts().iter().sum::<f64>(), 2.0);
        assert_eq!(obs.time_of_day(), 0.0);
        let state = env.state().unwrap();
        assert_eq!(state.clock_min, 0.0);
        let awaiting: Vec<_> = state
            .ambulances
            .iter()
            .filter(|a| a.status == AmbulanceStatus::AwaitingAllocation)
            .collect();
        assert_eq!(awaiting.len(), 1);
        assert_eq!(obs.position(), awaiting[0].position);
        for a in &state.ambulances {
            if let Some(dp) = a.assigned_dispatch_point {
                assert_eq!(a.position, env.dispatch_points()[dp]);
            }
        }
    }
}

#[test]
fn run_seeds_change_the_incident_stream() {
    let mut env = Environment::new(SimConfig::default()).unwrap();
    let call_times = |env: &mut Environment, seed| {
        env.reset(seed);
        for _ in 0..5 {
            env.step(12).unwrap();
        }
        env.state().unwrap().incidents().iter().map(|i| i.call_time_min).collect::<Vec<_>>()
    };
    let a = call_times(&mut env, 1);
    let b = call_times(&mut env, 2);
    assert_ne!(a, b);
    assert_eq!(a, call_times(&mut env, 1));
}

#[test]
fn travel_at_sixty_kph_takes_a_minute_per_km() {
    // ambulance 0 starts on the dispatch point at the hospital and is sent 10 km north
    let mut env = env_with(2);
    env.reset_with(ResetOptions {
        initial_dispatch: Some(vec![12, 0]),
        incidents: scripted(&[(10.5, 25.0, 45.0)]),
        ..Default::default()
    })
    .unwrap();
    let r = env.step(17).unwrap();
    let state = env.state().unwrap();
    let inc = &state.incidents()[0];
    // it has arrived by minute 11, so it is the closest free ambulance
    assert_eq!(inc.assigned_ambulance, Some(0));
    assert_eq!(inc.assign_time_min, Some(11.0));
    assert_eq!(inc.dispatched_from, Some(Point::new(25.0, 35.0)));
    assert_eq!(inc.arrival_time_min, Some(21.0));
    assert_eq!(state.clock_min, 41.0);
    assert_eq!(r.reward, -(10.5f64 * 10.5));
    assert_eq!(state.awaiting_ambulance(), Some(0));
    assert_eq!(r.observation.position(), Point::new(25.0, 25.0));
}

#[test]
fn closest_free_ambulance_is_assigned() {
    let mut env = env_with(3);
    env.reset_with(ResetOptions {
        initial_dispatch: Some(vec![0, 12, 24]),
        incidents: scripted(&[(0.5, 28.0, 29.0)]),
        ..Default::default()
    })
    .unwrap();
    env.step(0).unwrap();
    let inc = &env.state().unwrap().incidents()[0];
    assert_eq!(inc.assigned_ambulance, Some(1));
    assert_eq!(inc.arrival_time_min, Some(6.0));
}

#[test]
fn reward_is_negative_squared_call_to_arrival() {
    let mut env = env_with(2);
    env.reset_with(ResetOptions {
        initial_dispatch: Some(vec![0, 12]),
        incidents: scripted(&[(0.5, 25.0, 39.5)]),
        ..Default::default()
    })
    .unwrap();
    let r = env.step(0).unwrap();
    assert_eq!(*r.info.call_to_arrival_times, vec![15.0]);
    assert_eq!(*r.info.assignment_to_arrival_times, vec![14.5]);
    assert_eq!(r.reward, -225.0);
    assert_eq!(env.state().unwrap().clock_min, 30.0);
}

#[test]
fn fraction_of_demand_met() {
    // nine calls sit on occupied dispatch points, the tenth has no free ambulance left
    let mut env = env_with(10);
    let dps = [0, 1, 2, 3, 4, 5, 6, 7, 12];
    let mut start = vec![24];
    start.extend(dps);
    let mut calls: Vec<(f64, f64, f64)> = dps
        .iter()
        .enumerate()
        .map(|(k, &dp)| (0.5 + 0.01 * k as f64, 5.0 + 10.0 * (dp % 5) as f64, 5.0 + 10.0 * (dp / 5) as f64))
        .collect();
    calls.push((0.6, 45.0, 45.0));
    env.reset_with(ResetOptions {
        initial_dispatch: Some(start),
        incidents: scripted(&calls),
        ..Default::default()
    })
    .unwrap();
    let r = env.step(20).unwrap();
    assert_eq!(r.info.total_calls, 10);
    assert_eq!(r.info.call_to_arrival_times.len(), 9);
    assert_eq!(r.info.fraction_demand_met, 0.9);
    assert_eq!(env.state().unwrap().pending_incidents().count(), 1);
}

#[test]
fn render_is_a_pure_snapshot() {
    let mut env = env_with(2);
    env.reset_with(ResetOptions {
        initial_dispatch: Some(vec![0, 12]),
        incidents: scripted(&[(0.5, 25.0, 26.0), (0.6, 40.0, 10.0), (0.7, 10.0, 40.0), (0.8, 45.0, 45.0)]),
        ..Default::default()
    })
    .unwrap();
    let fresh = env.render();
    assert_eq!(fresh.lines().filter(|l| l.starts_with("ambulance ")).count(), 2);
    assert_eq!(fresh, env.render());
    env.step(24).unwrap();
    assert_eq!(env.state().unwrap().clock_min, 3.0);
    let text = env.render();
    assert!(text.contains("pending: 3"), "{text}");
    assert_eq!(text, env.render());
}

#[test]
fn simultaneous_completions_are_returned_one_per_step() {
    let mut env = env_with(3);
    env.reset_with(ResetOptions {
        initial_dispatch: Some(vec![10, 7, 13]),
        incidents: scripted(&[(0.5, 25.0, 20.0), (0.5, 30.0, 25.0)]),
        ..Default::default()
    })
    .unwrap();
    let first = env.step(0).unwrap();
    let clock = env.state().unwrap().clock_min;
    let waiting: Vec<_> = env
        .state()
        .unwrap()
        .ambulances
        .iter()
        .filter(|a| a.status == AmbulanceStatus::AwaitingAllocation)
        .map(|a| a.id)
        .collect();
    assert_eq!(waiting, vec![1, 2]);
    assert_eq!(first.reward, -(5.5f64 * 5.5));
    let second = env.step(0).unwrap();
    assert_eq!(second.reward, -(5.5f64 * 5.5));
    assert_eq!(env.state().unwrap().clock_min, clock + 1.0);
}

#[test]
fn step_errors() {
    let mut env = env_with(3);
    assert_eq!(env.step(0).unwrap_err(), EnvError::NotReset);
    env.reset(0);
    assert_eq!(env.step(25).unwrap_err(), EnvError::ActionOutOfRange { action: 25, n_actions: 25 });
    let mut last = env.step(0).unwrap();
    while !last.terminal {
        last = env.step(0).unwrap();
    }
    assert!(last.truncated);
    assert_eq!(env.state().unwrap().clock_min, 1440.0);
    assert_eq!(env.step(0).unwrap_err(), EnvError::EpisodeFinished);
    assert!(env
        .reset_with(ResetOptions { initial_dispatch: Some(vec![0, 1]), ..Default::default() })
        .is_err());
}

#[test]
fn identical_seeds_and_actions_give_identical_streams() {
    let run = || {
        let mut env = env_with(6);
        env.reset(77);
        let mut out = Vec::new();
        for k in 0.. {
            let r = env.step((k * 7) % 25).unwrap();
            let done = r.terminal;
            out.push(r);
            if done {
                break;
            }
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn episode_log_has_one_row_per_arrival() {
    let mut env = env_with(3);
    env.reset(5);
    while !env.step(12).unwrap().terminal {}
    let state = env.state().unwrap();
    let mut buf = Vec::new();
    ambulance_rl::env::write_episode_log(state, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("incident_id,call_time,assign_time,arrival_time"));
    assert_eq!(text.lines().count() - 1, state.completed_incidents().count());
}
