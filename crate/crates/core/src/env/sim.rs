use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{grid_side, DispatchLayout, SimConfig, MINUTES_PER_DAY};
use super::types::{
    Ambulance, AmbulanceStatus, Incident, Journey, Observation, Point, StepInfo, StepResult,
};
use super::{active_epoch, incident_location, sample_inter_arrival, DispatchEnv, EnvError};

/// An incident injected at a fixed time and place instead of the random process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedIncident {
    pub call_time_min: f64,
    pub location: Point,
}

/// Overrides for [`Environment::reset_with`]. `None` fields use the seeded defaults.
#[derive(Debug, Clone, Default)]
pub struct ResetOptions {
    pub run_seed: u64,
    /// Starting dispatch point for every ambulance.
    pub initial_dispatch: Option<Vec<usize>>,
    /// Which ambulance starts awaiting allocation (default 0).
    pub awaiting_ambulance: Option<usize>,
    /// Replaces the Poisson incident process for the whole episode.
    pub incidents: Option<Vec<ScriptedIncident>>,
}

#[derive(Debug, Clone)]
enum IncidentSource {
    Poisson { next_call_min: f64 },
    Scripted(VecDeque<ScriptedIncident>),
}

/// Live state of one episode.
#[derive(Debug, Clone)]
pub struct SimState {
    pub clock_min: f64,
    pub ambulances: Vec<Ambulance>,
    /// Every incident called so far, indexed by id.
    incidents: Vec<Incident>,
    /// Unassigned incident ids in call order.
    pending: VecDeque<usize>,
    /// Incident ids in order of ambulance arrival on scene.
    completed: Vec<usize>,
    /// Ambulances that finished a conveyance, in completion order.
    awaiting: VecDeque<usize>,
    call_to_arrival: Arc<Vec<f64>>,
    assign_to_arrival: Arc<Vec<f64>>,
    source: IncidentSource,
    rng: ChaCha8Rng,
    finished: bool,
}

impl SimState {
    pub fn pending_incidents(&self) -> impl Iterator<Item = &Incident> {
        self.pending.iter().map(|&id| &self.incidents[id])
    }

    pub fn completed_incidents(&self) -> impl Iterator<Item = &Incident> {
        self.completed.iter().map(|&id| &self.incidents[id])
    }

    /// All incidents called so far, indexed by id.
    pub fn incidents(&self) -> &[Incident] {
        &self.incidents
    }

    pub fn awaiting_ambulance(&self) -> Option<usize> {
        self.awaiting.front().copied()
    }

    pub fn total_calls(&self) -> usize {
        self.incidents.len()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn fraction_demand_met(&self) -> f64 {
        if self.incidents.is_empty() {
            0.0
        } else {
            self.completed.len() as f64 / self.incidents.len() as f64
        }
    }

    fn info(&self) -> StepInfo {
        StepInfo {
            call_to_arrival_times: Arc::clone(&self.call_to_arrival),
            assignment_to_arrival_times: Arc::clone(&self.assign_to_arrival),
            total_calls: self.total_calls(),
            fraction_demand_met: self.fraction_demand_met(),
        }
    }
}

/// Fixed world layout: built once from the configuration seed.
#[derive(Debug, Clone)]
struct Layout {
    dispatch_points: Vec<Point>,
    hospitals: Vec<Point>,
    /// One set of `n_incident_areas` centres per epoch of the day.
    incident_centres: Vec<Vec<Point>>,
}

impl Layout {
    fn build(config: &SimConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.random_seed);
        let w = config.world_size_km;
        let random_point = |rng: &mut ChaCha8Rng| Point::new(rng.random_range(0.0..w), rng.random_range(0.0..w));

        let dispatch_points = match config.dispatch_layout {
            DispatchLayout::Grid => {
                let side = grid_side(config.n_dispatch_points).expect("validated");
                let spacing = w / side as f64;
                (0..side)
                    .flat_map(|row| {
                        (0..side).map(move |col| {
                            Point::new((col as f64 + 0.5) * spacing, (row as f64 + 0.5) * spacing)
                        })
                    })
                    .collect()
            }
            DispatchLayout::Random => (0..config.n_dispatch_points)
                .map(|_| random_point(&mut rng))
                .collect(),
        };
        let hospitals = if config.n_hospitals == 1 {
            vec![Point::new(w / 2.0, w / 2.0)]
        } else {
            (0..config.n_hospitals).map(|_| random_point(&mut rng)).collect()
        };
        let incident_centres = (0..config.n_epochs_per_day)
            .map(|_| {
                (0..config.n_incident_areas)
                    .map(|_| random_point(&mut rng))
                    .collect()
            })
            .collect();
        Self {
            dispatch_points,
            hospitals,
            incident_centres,
        }
    }

    fn closest_hospital(&self, p: &Point) -> Point {
        let mut best = self.hospitals[0];
        let mut best_d = p.distance(&best);
        for h in &self.hospitals[1..] {
            let d = p.distance(h);
            if d < best_d {
                best = *h;
                best_d = d;
            }
        }
        best
    }
}

/// The dispatch simulation environment.
#[derive(Debug, Clone)]
pub struct Environment {
    config: SimConfig,
    layout: Layout,
    state: Option<SimState>,
}

impl Environment {
    pub fn new(config: SimConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let layout = Layout::build(&config);
        Ok(Self {
            config,
            layout,
            state: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn dispatch_points(&self) -> &[Point] {
        &self.layout.dispatch_points
    }

    pub fn hospitals(&self) -> &[Point] {
        &self.layout.hospitals
    }

    pub fn incident_centres(&self) -> &[Vec<Point>] {
        &self.layout.incident_centres
    }

    pub fn state(&self) -> Option<&SimState> {
        self.state.as_ref()
    }

    /// Start a new episode with random starting allocations and incidents.
    pub fn reset(&mut self, run_seed: u64) -> Observation {
        self.reset_with(ResetOptions {
            run_seed,
            ..Default::default()
        })
        .expect("default reset options are always valid")
    }

    pub fn reset_with(&mut self, opts: ResetOptions) -> Result<Observation, EnvError> {
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.run_seed);
        rng.set_stream(cfg.random_seed);

        let dispatch = match opts.initial_dispatch {
            Some(d) => {
                if d.len() != cfg.n_ambulances {
                    return Err(EnvError::InvalidReset(format!(
                        "initial_dispatch has {} entries for {} ambulances",
                        d.len(),
                        cfg.n_ambulances
                    )));
                }
                if let Some(bad) = d.iter().find(|&&i| i >= cfg.n_dispatch_points) {
                    return Err(EnvError::InvalidReset(format!("dispatch point {bad} out of range")));
                }
                d
            }
            None => (0..cfg.n_ambulances)
                .map(|_| rng.random_range(0..cfg.n_dispatch_points))
                .collect(),
        };
        let awaiting = opts.awaiting_ambulance.unwrap_or(0);
        if awaiting >= cfg.n_ambulances {
            return Err(EnvError::InvalidReset(format!("ambulance {awaiting} out of range")));
        }

        let ambulances = dispatch
            .iter()
            .enumerate()
            .map(|(id, &dp)| {
                let is_awaiting = id == awaiting;
                Ambulance {
                    id,
                    status: if is_awaiting {
                        AmbulanceStatus::AwaitingAllocation
                    } else {
                        AmbulanceStatus::AtDispatchPoint
                    },
                    position: self.layout.dispatch_points[dp],
                    journey: None,
                    assigned_dispatch_point: (!is_awaiting).then_some(dp),
                    assigned_incident: None,
                }
            })
            .collect();

        let source = match opts.incidents {
            Some(mut script) => {
                for inc in &script {
                    let w = cfg.world_size_km;
                    let inside = (0.0..=w).contains(&inc.location.x) && (0.0..=w).contains(&inc.location.y);
                    if !(inc.call_time_min.is_finite() && inc.call_time_min >= 0.0) || !inside {
                        return Err(EnvError::InvalidReset(format!("bad scripted incident {inc:?}")));
                    }
                }
                script.sort_by(|a, b| a.call_time_min.total_cmp(&b.call_time_min));
                IncidentSource::Scripted(script.into())
            }
            None => IncidentSource::Poisson {
                next_call_min: sample_inter_arrival(&mut rng, cfg.incident_rate_per_min()),
            },
        };

        self.state = Some(SimState {
            clock_min: 0.0,
            ambulances,
            incidents: Vec::new(),
            pending: VecDeque::new(),
            completed: Vec::new(),
            awaiting: VecDeque::from([awaiting]),
            call_to_arrival: Arc::new(Vec::new()),
            assign_to_arrival: Arc::new(Vec::new()),
            source,
            rng,
            finished: false,
        });
        Ok(self.observation())
    }

    /// Allocate the awaiting ambulance to dispatch point `action`, then run the
    /// clock until another ambulance needs an allocation or the episode ends.
    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        let n_actions = self.config.n_dispatch_points;
        let speed = self.config.speed_km_per_min();
        let end = self.config.episode_minutes();
        let state = self.state.as_mut().ok_or(EnvError::NotReset)?;
        if state.finished {
            return Err(EnvError::EpisodeFinished);
        }
        if state.awaiting.is_empty() {
            return Err(EnvError::NoAwaitingAmbulance);
        }
        if action >= n_actions {
            return Err(EnvError::ActionOutOfRange { action, n_actions });
        }

        let id = state.awaiting.pop_front().expect("checked above");
        let target = self.layout.dispatch_points[action];
        let amb = &mut state.ambulances[id];
        amb.journey = Some(Journey::new(amb.position, target, state.clock_min, speed));
        amb.status = AmbulanceStatus::TravellingToDispatchPoint;
        amb.assigned_dispatch_point = Some(action);
        amb.assigned_incident = None;

        while state.clock_min < end {
            state.clock_min += 1.0;
            tick(&self.config, &self.layout, state);
            if !state.awaiting.is_empty() {
                break;
            }
        }
        let terminal = state.clock_min >= end;
        state.finished = terminal;

        let reward = state
            .awaiting
            .front()
            .and_then(|&a| state.ambulances[a].assigned_incident)
            .and_then(|inc| state.incidents[inc].call_to_arrival())
            .map_or(0.0, |t| -(t * t));
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal,
            truncated: terminal,
            info: self.state.as_ref().expect("reset").info(),
        })
    }

    fn observation(&self) -> Observation {
        let state = self.state.as_ref().expect("observation requires reset");
        let n = self.config.n_dispatch_points;
        let mut features = vec![0.0; n + 3];
        for amb in &state.ambulances {
            if let Some(dp) = amb.assigned_dispatch_point {
                features[dp] += 1.0;
            }
        }
        let pos = state
            .awaiting
            .front()
            .map(|&a| state.ambulances[a].position)
            .unwrap_or(self.layout.hospitals[0]);
        features[n] = pos.x;
        features[n + 1] = pos.y;
        features[n + 2] = state.clock_min.rem_euclid(MINUTES_PER_DAY) / MINUTES_PER_DAY;
        Observation { features }
    }

    /// Text snapshot of the current state. Does not mutate anything.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let Some(state) = &self.state else {
            return "environment not reset\n".to_string();
        };
        let t = state.clock_min;
        let minute = t.rem_euclid(MINUTES_PER_DAY);
        let _ = writeln!(
            out,
            "clock: {:.0} min (day {}, {:02}:{:02}), epoch {}",
            t,
            (t / MINUTES_PER_DAY).floor(),
            (minute / 60.0).floor(),
            (minute % 60.0).floor(),
            active_epoch(t, self.config.n_epochs_per_day)
        );
        let _ = writeln!(out, "pending: {}", state.pending.len());
        let _ = writeln!(
            out,
            "calls: {}, arrived: {}, awaiting allocation: {:?}",
            state.total_calls(),
            state.completed.len(),
            state.awaiting
        );
        for amb in &state.ambulances {
            let dp = amb
                .assigned_dispatch_point
                .map_or_else(|| "-".to_string(), |d| d.to_string());
            let inc = amb
                .assigned_incident
                .map_or_else(|| "-".to_string(), |d| d.to_string());
            let _ = writeln!(
                out,
                "ambulance {}: {:<20} at {} dispatch point {} incident {}",
                amb.id,
                amb.status.label(),
                amb.position_at(t),
                dp,
                inc
            );
        }
        out
    }
}

impl DispatchEnv for Environment {
    fn observation_len(&self) -> usize {
        self.config.observation_len()
    }

    fn n_actions(&self) -> usize {
        self.config.n_dispatch_points
    }

    fn reset(&mut self, run_seed: u64) -> Observation {
        Environment::reset(self, run_seed)
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        Environment::step(self, action)
    }
}

/// One minute of simulated time ending at `t`.
///
/// Order within a tick: move ambulances and complete arrivals, admit new
/// calls, then assign free ambulances to the incident queue.
fn tick(cfg: &SimConfig, layout: &Layout, state: &mut SimState) {
    let t = state.clock_min;
    let speed = cfg.speed_km_per_min();

    let mut conveyed: Vec<(f64, usize)> = Vec::new();
    for amb in state.ambulances.iter_mut() {
        loop {
            let Some(journey) = amb.journey else { break };
            if journey.arrive_min > t {
                amb.position = journey.position_at(t);
                break;
            }
            amb.position = journey.to;
            amb.journey = None;
            match amb.status {
                AmbulanceStatus::TravellingToDispatchPoint => {
                    amb.status = AmbulanceStatus::AtDispatchPoint;
                }
                AmbulanceStatus::TravellingToIncident => {
                    let inc_id = amb.assigned_incident.expect("responding ambulance has an incident");
                    let inc = &mut state.incidents[inc_id];
                    let arrival = journey.arrive_min;
                    inc.arrival_time_min = Some(arrival);
                    Arc::make_mut(&mut state.call_to_arrival).push(arrival - inc.call_time_min);
                    Arc::make_mut(&mut state.assign_to_arrival)
                        .push(arrival - inc.assign_time_min.expect("assigned"));
                    state.completed.push(inc_id);

                    let hospital = layout.closest_hospital(&inc.location);
                    amb.journey = Some(Journey::new(inc.location, hospital, arrival, speed));
                    amb.status = AmbulanceStatus::ConveyingToHospital;
                }
                AmbulanceStatus::ConveyingToHospital => {
                    amb.status = AmbulanceStatus::AwaitingAllocation;
                    conveyed.push((journey.arrive_min, amb.id));
                }
                AmbulanceStatus::AtDispatchPoint | AmbulanceStatus::AwaitingAllocation => {}
            }
        }
    }
    conveyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    state.awaiting.extend(conveyed.into_iter().map(|(_, id)| id));

    admit_calls(cfg, layout, state, t);

    while let Some(&inc_id) = state.pending.front() {
        let location = state.incidents[inc_id].location;
        let chosen = state
            .ambulances
            .iter()
            .filter(|a| {
                a.status == AmbulanceStatus::AtDispatchPoint
                    || (cfg.allocate_while_travelling
                        && a.status == AmbulanceStatus::TravellingToDispatchPoint)
            })
            .map(|a| (a.id, a.position_at(t)))
            .fold(None::<(usize, Point, f64)>, |best, (id, pos)| {
                let d = pos.distance(&location);
                match best {
                    Some((_, _, bd)) if bd <= d => best,
                    _ => Some((id, pos, d)),
                }
            });
        let Some((amb_id, from, _)) = chosen else { break };
        state.pending.pop_front();

        let inc = &mut state.incidents[inc_id];
        inc.assigned_ambulance = Some(amb_id);
        inc.assign_time_min = Some(t);
        inc.dispatched_from = Some(from);

        let amb = &mut state.ambulances[amb_id];
        amb.position = from;
        amb.journey = Some(Journey::new(from, location, t, speed));
        amb.status = AmbulanceStatus::TravellingToIncident;
        amb.assigned_dispatch_point = None;
        amb.assigned_incident = Some(inc_id);
    }
}

fn admit_calls(cfg: &SimConfig, layout: &Layout, state: &mut SimState, t: f64) {
    loop {
        let (call_time, location) = match &mut state.source {
            IncidentSource::Scripted(script) => match script.front() {
                Some(s) if s.call_time_min <= t => {
                    let s = script.pop_front().expect("peeked");
                    (s.call_time_min, s.location)
                }
                _ => return,
            },
            IncidentSource::Poisson { next_call_min } => {
                if *next_call_min > t {
                    return;
                }
                let call_time = *next_call_min;
                let centres = &layout.incident_centres[active_epoch(call_time, cfg.n_epochs_per_day)];
                let centre = centres[state.rng.random_range(0..centres.len())];
                let location = incident_location(
                    &mut state.rng,
                    centre,
                    cfg.incident_jitter_km,
                    cfg.world_size_km,
                );
                *next_call_min += sample_inter_arrival(&mut state.rng, cfg.incident_rate_per_min());
                (call_time, location)
            }
        };
        let id = state.incidents.len();
        state.incidents.push(Incident::new(id, call_time, location));
        state.pending.push_back(id);
    }
}
