//! Test oracles shared by the integration tests: a from-scratch re-simulation
//! of the dispatch rules and central finite differences for network gradients.

#![allow(dead_code)]

use ambulance_rl::env::{Environment, Point, ResetOptions, ScriptedIncident, SimConfig};
use ambulance_rl::neural::{Network, TrainingSample};

// ---------------------------------------------------------------------------
// Dispatch re-simulation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    AtPoint(usize),
    ToPoint { dp: usize, from: (f64, f64), depart: f64, arrive: f64 },
    ToIncident { inc: usize, from: (f64, f64), arrive: f64 },
    ToHospital { inc: usize, arrive: f64 },
    Waiting { last: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleIncident {
    pub call: f64,
    pub location: (f64, f64),
    pub ambulance: Option<usize>,
    pub assigned_at: Option<f64>,
    pub arrived_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStep {
    pub clock: f64,
    pub reward: f64,
    pub terminal: bool,
    pub awaiting: Option<usize>,
    pub total_calls: usize,
    pub call_to_arrival: Vec<f64>,
    pub assign_to_arrival: Vec<f64>,
    pub counts: Vec<f64>,
}

/// A small world described only by coordinates.
#[derive(Debug, Clone)]
pub struct Trace {
    pub dispatch_points: Vec<(f64, f64)>,
    pub hospitals: Vec<(f64, f64)>,
    pub speed_km_per_min: f64,
    pub end_min: f64,
    pub divert_travelling: bool,
    pub start_points: Vec<usize>,
    pub awaiting: usize,
    /// (call minute, location), any order.
    pub incidents: Vec<(f64, (f64, f64))>,
    /// Actions are taken cyclically from this list.
    pub actions: Vec<usize>,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn lerp(a: (f64, f64), b: (f64, f64), f: f64) -> (f64, f64) {
    let f = f.clamp(0.0, 1.0);
    (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f)
}

/// Re-simulate `trace` minute by minute, returning one record per step and the
/// final incident log.
pub fn resimulate(trace: &Trace) -> (Vec<OracleStep>, Vec<OracleIncident>) {
    let speed = trace.speed_km_per_min;
    let mut calls: Vec<(f64, (f64, f64))> = trace.incidents.clone();
    calls.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut next_call = 0;

    let mut modes: Vec<Mode> = trace
        .start_points
        .iter()
        .enumerate()
        .map(|(i, &dp)| if i == trace.awaiting { Mode::Waiting { last: None } } else { Mode::AtPoint(dp) })
        .collect();
    // positions only matter for ambulances that are standing still or heading to a point
    let mut parked: Vec<(f64, f64)> = trace.start_points.iter().map(|&dp| trace.dispatch_points[dp]).collect();
    let mut queue: Vec<usize> = vec![trace.awaiting];
    let mut incidents: Vec<OracleIncident> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    let mut c2a = Vec::new();
    let mut a2a = Vec::new();
    let mut clock = 0.0f64;
    let mut steps = Vec::new();

    let nearest_hospital = |p: (f64, f64)| {
        let mut best = trace.hospitals[0];
        for &h in &trace.hospitals[1..] {
            if dist(p, h) < dist(p, best) {
                best = h;
            }
        }
        best
    };

    let mut k = 0;
    while !queue.is_empty() && clock < trace.end_min {
        let amb = queue.remove(0);
        let dp = trace.actions[k % trace.actions.len()];
        k += 1;
        let target = trace.dispatch_points[dp];
        let from = parked[amb];
        modes[amb] = Mode::ToPoint { dp, from, depart: clock, arrive: clock + dist(from, target) / speed };

        loop {
            if clock >= trace.end_min {
                break;
            }
            clock += 1.0;
            let t = clock;

            let mut finished: Vec<(f64, usize)> = Vec::new();
            for id in 0..modes.len() {
                // an ambulance can pass through several legs inside one minute
                loop {
                    match modes[id] {
                        Mode::ToPoint { dp, arrive, .. } if arrive <= t => {
                            modes[id] = Mode::AtPoint(dp);
                            parked[id] = trace.dispatch_points[dp];
                        }
                        Mode::ToIncident { inc, arrive, .. } if arrive <= t => {
                            let rec = &mut incidents[inc];
                            rec.arrived_at = Some(arrive);
                            c2a.push(arrive - rec.call);
                            a2a.push(arrive - rec.assigned_at.unwrap());
                            let h = nearest_hospital(rec.location);
                            modes[id] = Mode::ToHospital { inc, arrive: arrive + dist(rec.location, h) / speed };
                            parked[id] = h;
                        }
                        Mode::ToHospital { inc, arrive } if arrive <= t => {
                            modes[id] = Mode::Waiting { last: Some(inc) };
                            finished.push((arrive, id));
                        }
                        _ => break,
                    }
                }
            }
            finished.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            queue.extend(finished.iter().map(|f| f.1));

            while next_call < calls.len() && calls[next_call].0 <= t {
                let (call, location) = calls[next_call];
                pending.push(incidents.len());
                incidents.push(OracleIncident { call, location, ambulance: None, assigned_at: None, arrived_at: None });
                next_call += 1;
            }

            while let Some(&inc) = pending.first() {
                let loc = incidents[inc].location;
                let mut best: Option<(usize, (f64, f64), f64)> = None;
                for id in 0..modes.len() {
                    let pos = match modes[id] {
                        Mode::AtPoint(dp) => trace.dispatch_points[dp],
                        Mode::ToPoint { from, dp, depart, arrive } if trace.divert_travelling => {
                            let span = arrive - depart;
                            if span <= 0.0 {
                                trace.dispatch_points[dp]
                            } else {
                                lerp(from, trace.dispatch_points[dp], (t - depart) / span)
                            }
                        }
                        _ => continue,
                    };
                    let d = dist(pos, loc);
                    if best.is_none_or(|b| d < b.2) {
                        best = Some((id, pos, d));
                    }
                }
                let Some((id, pos, _)) = best else { break };
                pending.remove(0);
                incidents[inc].ambulance = Some(id);
                incidents[inc].assigned_at = Some(t);
                modes[id] = Mode::ToIncident { inc, from: pos, arrive: t + dist(pos, loc) / speed };
            }

            if !queue.is_empty() {
                break;
            }
        }

        let terminal = clock >= trace.end_min;
        let reward = match queue.first().map(|&a| modes[a]) {
            Some(Mode::Waiting { last: Some(inc) }) => {
                let r = &incidents[inc];
                let t = r.arrived_at.unwrap() - r.call;
                -(t * t)
            }
            _ => 0.0,
        };
        let mut counts = vec![0.0; trace.dispatch_points.len()];
        for m in &modes {
            match *m {
                Mode::AtPoint(dp) | Mode::ToPoint { dp, .. } => counts[dp] += 1.0,
                _ => {}
            }
        }
        steps.push(OracleStep {
            clock,
            reward,
            terminal,
            awaiting: queue.first().copied(),
            total_calls: incidents.len(),
            call_to_arrival: c2a.clone(),
            assign_to_arrival: a2a.clone(),
            counts,
        });
        if terminal {
            break;
        }
    }
    (steps, incidents)
}

/// Environment configured to match a trace on a 50 km world with a 5x5 grid.
pub fn trace_environment(trace: &Trace) -> Environment {
    let days = (trace.end_min / 1440.0).round() as u32;
    let cfg = SimConfig {
        n_ambulances: trace.start_points.len(),
        episode_duration_days: days,
        allocate_while_travelling: trace.divert_travelling,
        ..SimConfig::default()
    };
    Environment::new(cfg).unwrap()
}

pub fn trace_reset(trace: &Trace) -> ResetOptions {
    ResetOptions {
        run_seed: 0,
        initial_dispatch: Some(trace.start_points.clone()),
        awaiting_ambulance: Some(trace.awaiting),
        incidents: Some(
            trace
                .incidents
                .iter()
                .map(|&(t, (x, y))| ScriptedIncident { call_time_min: t, location: Point::new(x, y) })
                .collect(),
        ),
    }
}

/// Default 5x5 grid on a 50 km world, hospital in the middle, 1 km per minute.
pub fn grid_trace(start_points: Vec<usize>, incidents: Vec<(f64, (f64, f64))>, actions: Vec<usize>) -> Trace {
    let dispatch_points = (0..5)
        .flat_map(|row| (0..5).map(move |col| (5.0 + 10.0 * col as f64, 5.0 + 10.0 * row as f64)))
        .collect();
    Trace {
        dispatch_points,
        hospitals: vec![(25.0, 25.0)],
        speed_km_per_min: 1.0,
        end_min: 1440.0,
        divert_travelling: false,
        start_points,
        awaiting: 0,
        incidents,
        actions,
    }
}

/// Run the environment on the trace and compare every step with the oracle.
/// Returns a description of the first disagreement.
pub fn check_trace(trace: &Trace) -> Result<usize, String> {
    let (expected, oracle_incidents) = resimulate(trace);
    let mut env = trace_environment(trace);
    env.reset_with(trace_reset(trace)).map_err(|e| e.to_string())?;
    for (k, exp) in expected.iter().enumerate() {
        let action = trace.actions[k % trace.actions.len()];
        let got = env.step(action).map_err(|e| format!("step {k}: {e}"))?;
        let state = env.state().unwrap();
        let awaiting = state.awaiting_ambulance();
        let same = got.reward == exp.reward
            && got.terminal == exp.terminal
            && state.clock_min == exp.clock
            && awaiting == exp.awaiting
            && got.info.total_calls == exp.total_calls
            && *got.info.call_to_arrival_times == exp.call_to_arrival
            && *got.info.assignment_to_arrival_times == exp.assign_to_arrival
            && got.observation.counts() == exp.counts.as_slice();
        if !same {
            return Err(format!(
                "step {k}: env (reward {}, terminal {}, clock {}, awaiting {:?}, calls {}, c2a {:?}, counts {:?}) \
                 oracle (reward {}, terminal {}, clock {}, awaiting {:?}, calls {}, c2a {:?}, counts {:?})",
                got.reward,
                got.terminal,
                state.clock_min,
                awaiting,
                got.info.total_calls,
                got.info.call_to_arrival_times,
                got.observation.counts(),
                exp.reward,
                exp.terminal,
                exp.clock,
                exp.awaiting,
                exp.total_calls,
                exp.call_to_arrival,
                exp.counts
            ));
        }
    }
    let state = env.state().unwrap();
    if state.incidents().len() != oracle_incidents.len() {
        return Err(format!("{} incidents vs {}", state.incidents().len(), oracle_incidents.len()));
    }
    for (inc, exp) in state.incidents().iter().zip(&oracle_incidents) {
        if inc.assigned_ambulance != exp.ambulance
            || inc.assign_time_min != exp.assigned_at
            || inc.arrival_time_min != exp.arrived_at
            || inc.call_time_min != exp.call
        {
            return Err(format!("incident {}: env {inc:?} oracle {exp:?}", inc.id));
        }
    }
    Ok(expected.len())
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Weighted mean-squared error computed from plain forward passes.
pub fn batch_loss(net: &Network, batch: &[TrainingSample<'_>], use_noise: bool) -> f64 {
    let mut total = 0.0;
    for s in batch {
        let q = net.infer(s.input, use_noise).unwrap();
        let e = q[s.action] - s.target;
        total += s.weight * e * e;
    }
    total / batch.len() as f64
}

/// Central-difference gradient of [`batch_loss`] with respect to every parameter.
pub fn numeric_gradient(net: &Network, batch: &[TrainingSample<'_>], use_noise: bool, h: f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.n_params())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = batch_loss(&probe, batch, use_noise);
            probe.params_mut()[i] = orig - h;
            let down = batch_loss(&probe, batch, use_noise);
            probe.params_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest per-coordinate relative error, with a floor so near-zero entries compare absolutely.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Stub environment
// ---------------------------------------------------------------------------

use ambulance_rl::env::{DispatchEnv, EnvError, Observation, StepInfo, StepResult};

/// Fixed-length episodes with a shape-correct observation and a chosen reward rule.
#[derive(Debug, Clone)]
pub struct StubEnv {
    pub n_points: usize,
    pub steps_per_episode: usize,
    /// Reward for (run seed, step index, action).
    pub reward: fn(u64, usize, usize) -> f64,
    seed: u64,
    step: usize,
}

impl StubEnv {
    pub fn new(n_points: usize, steps_per_episode: usize, reward: fn(u64, usize, usize) -> f64) -> Self {
        Self { n_points, steps_per_episode, reward, seed: 0, step: 0 }
    }

    pub fn zero_reward(n_points: usize, steps_per_episode: usize) -> Self {
        Self::new(n_points, steps_per_episode, |_, _, _| 0.0)
    }

    fn observation(&self) -> Observation {
        let mut features = vec![0.0; self.n_points + 3];
        features[self.step % self.n_points] = 1.0;
        features[self.n_points] = 25.0;
        features[self.n_points + 1] = 25.0;
        features[self.n_points + 2] = self.step as f64 / (self.steps_per_episode as f64 + 1.0);
        Observation { features }
    }
}

impl DispatchEnv for StubEnv {
    fn observation_len(&self) -> usize {
        self.n_points + 3
    }

    fn n_actions(&self) -> usize {
        self.n_points
    }

    fn reset(&mut self, run_seed: u64) -> Observation {
        self.seed = run_seed;
        self.step = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if action >= self.n_points {
            return Err(EnvError::ActionOutOfRange { action, n_actions: self.n_points });
        }
        if self.step >= self.steps_per_episode {
            return Err(EnvError::EpisodeFinished);
        }
        let reward = (self.reward)(self.seed, self.step, action);
        self.step += 1;
        let done = self.step >= self.steps_per_episode;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: done,
            truncated: done,
            info: StepInfo { total_calls: self.step, fraction_demand_met: 1.0, ..StepInfo::default() },
        })
    }
}
