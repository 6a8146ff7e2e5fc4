//! Minute-resolution ambulance dispatch simulation.
//!
//! Incidents arrive as a Poisson process around a small set of incident
//! centres that change with the time of day. The closest free ambulance is
//! sent to the oldest unassigned incident, conveys the patient to the closest
//! hospital and then waits for the agent to allocate it a dispatch point.
//! [`Environment::step`] runs the clock forward one minute at a time until the
//! next ambulance needs an allocation or the episode time limit is reached.

mod config;
mod log;
mod sim;
mod types;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

pub use config::{DispatchLayout, SimConfig, MINUTES_PER_DAY};
pub use log::write_episode_log;
pub use sim::{Environment, ResetOptions, ScriptedIncident, SimState};
pub use types::{
    Ambulance, AmbulanceStatus, Incident, Journey, Observation, Point, StepInfo, StepResult,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("action {action} out of range for {n_actions} dispatch points")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("no ambulance is awaiting allocation")]
    NoAwaitingAmbulance,
    #[error("episode has finished; call reset")]
    EpisodeFinished,
    #[error("environment has not been reset")]
    NotReset,
    #[error("invalid reset options: {0}")]
    InvalidReset(String),
}

/// The reset/step contract the training harness drives.
pub trait DispatchEnv {
    fn observation_len(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn reset(&mut self, run_seed: u64) -> Observation;
    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;
}

/// Minutes until the next incident for a Poisson process with `rate_per_min`.
pub fn sample_inter_arrival<R: Rng + ?Sized>(rng: &mut R, rate_per_min: f64) -> f64 {
    let exp = Exp::new(rate_per_min).expect("incident rate must be positive");
    loop {
        let t: f64 = exp.sample(rng);
        if t > 0.0 {
            return t;
        }
    }
}

/// Jittered incident position around `centre`, clamped to the world.
pub fn incident_location<R: Rng + ?Sized>(
    rng: &mut R,
    centre: Point,
    jitter_km: f64,
    world_size_km: f64,
) -> Point {
    if jitter_km == 0.0 {
        return centre.clamp_to_world(world_size_km);
    }
    let dx = rng.random_range(-jitter_km..=jitter_km);
    let dy = rng.random_range(-jitter_km..=jitter_km);
    Point::new(centre.x + dx, centre.y + dy).clamp_to_world(world_size_km)
}

/// Index of the incident pattern active at `clock_min`.
pub fn active_epoch(clock_min: f64, n_epochs_per_day: usize) -> usize {
    let minute_of_day = clock_min.rem_euclid(MINUTES_PER_DAY);
    let epoch_len = MINUTES_PER_DAY / n_epochs_per_day as f64;
    ((minute_of_day / epoch_len).floor() as usize).min(n_epochs_per_day - 1)
}
