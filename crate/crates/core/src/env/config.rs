use serde::{Deserialize, Serialize};

use super::EnvError;

pub const MINUTES_PER_DAY: f64 = 1440.0;

/// How dispatch points are laid out when the environment is initiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchLayout {
    /// Even square grid; needs a perfect-square number of points.
    Grid,
    /// Uniformly random positions drawn from the configuration seed.
    Random,
}

/// Full parameterisation of the simulated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Side length of the square world.
    pub world_size_km: f64,
    pub n_dispatch_points: usize,
    pub n_hospitals: usize,
    pub n_ambulances: usize,
    /// Active incident centres at any time of day.
    pub n_incident_areas: usize,
    /// Number of daily incident-pattern changes.
    pub n_epochs_per_day: usize,
    pub incidents_per_ambulance_per_day: f64,
    /// Uniform +/- jitter applied on each axis around an incident centre.
    pub incident_jitter_km: f64,
    pub ambulance_speed_kph: f64,
    /// Whether an ambulance heading to a dispatch point may be diverted.
    pub allocate_while_travelling: bool,
    pub episode_duration_days: u32,
    pub random_seed: u64,
    pub dispatch_layout: DispatchLayout,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            world_size_km: 50.0,
            n_dispatch_points: 25,
            n_hospitals: 1,
            n_ambulances: 3,
            n_incident_areas: 1,
            n_epochs_per_day: 2,
            incidents_per_ambulance_per_day: 8.0,
            incident_jitter_km: 2.0,
            ambulance_speed_kph: 60.0,
            allocate_while_travelling: false,
            episode_duration_days: 365,
            random_seed: 42,
            dispatch_layout: DispatchLayout::Grid,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidConfig(msg));
        if !(self.world_size_km.is_finite() && self.world_size_km > 0.0) {
            return bad(format!("world_size_km must be > 0, got {}", self.world_size_km));
        }
        for (name, value) in [
            ("n_dispatch_points", self.n_dispatch_points),
            ("n_hospitals", self.n_hospitals),
            ("n_ambulances", self.n_ambulances),
            ("n_incident_areas", self.n_incident_areas),
            ("n_epochs_per_day", self.n_epochs_per_day),
            ("episode_duration_days", self.episode_duration_days as usize),
        ] {
            if value == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if !(self.incidents_per_ambulance_per_day.is_finite()
            && self.incidents_per_ambulance_per_day > 0.0)
        {
            return bad("incidents_per_ambulance_per_day must be > 0".into());
        }
        if !(self.incident_jitter_km.is_finite() && self.incident_jitter_km >= 0.0) {
            return bad("incident_jitter_km must be >= 0".into());
        }
        if !(self.ambulance_speed_kph.is_finite() && self.ambulance_speed_kph > 0.0) {
            return bad("ambulance_speed_kph must be > 0".into());
        }
        if self.dispatch_layout == DispatchLayout::Grid && grid_side(self.n_dispatch_points).is_none()
        {
            return bad(format!(
                "grid layout needs a perfect-square n_dispatch_points, got {}",
                self.n_dispatch_points
            ));
        }
        Ok(())
    }

    /// Incident arrival rate across the whole world, per minute.
    pub fn incident_rate_per_min(&self) -> f64 {
        self.n_ambulances as f64 * self.incidents_per_ambulance_per_day / MINUTES_PER_DAY
    }

    pub fn speed_km_per_min(&self) -> f64 {
        self.ambulance_speed_kph / 60.0
    }

    pub fn episode_minutes(&self) -> f64 {
        self.episode_duration_days as f64 * MINUTES_PER_DAY
    }

    /// Length of the observation vector: one count per dispatch point, x, y, time of day.
    pub fn observation_len(&self) -> usize {
        self.n_dispatch_points + 3
    }
}

/// Integer square root when `n` is a perfect square.
pub(crate) fn grid_side(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}
