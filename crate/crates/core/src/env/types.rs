use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A position in the square world, in km.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Linear interpolation, `t = 0` gives `self`, `t = 1` gives `other`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        let t = t.clamp(0.0, 1.0);
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn clamp_to_world(&self, world_size_km: f64) -> Point {
        Point::new(
            self.x.clamp(0.0, world_size_km),
            self.y.clamp(0.0, world_size_km),
        )
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.2}, {:.2})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmbulanceStatus {
    AtDispatchPoint,
    TravellingToDispatchPoint,
    TravellingToIncident,
    ConveyingToHospital,
    AwaitingAllocation,
}

impl AmbulanceStatus {
    pub fn label(&self) -> &'static str {
        match self {
            AmbulanceStatus::AtDispatchPoint => "at-dispatch-point",
            AmbulanceStatus::TravellingToDispatchPoint => "to-dispatch-point",
            AmbulanceStatus::TravellingToIncident => "to-incident",
            AmbulanceStatus::ConveyingToHospital => "conveying",
            AmbulanceStatus::AwaitingAllocation => "awaiting-allocation",
        }
    }
}

/// Straight-line movement between two points at constant speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Journey {
    pub from: Point,
    pub to: Point,
    pub depart_min: f64,
    pub arrive_min: f64,
}

impl Journey {
    pub fn new(from: Point, to: Point, depart_min: f64, speed_km_per_min: f64) -> Self {
        Self {
            from,
            to,
            depart_min,
            arrive_min: depart_min + from.distance(&to) / speed_km_per_min,
        }
    }

    pub fn position_at(&self, t: f64) -> Point {
        let span = self.arrive_min - self.depart_min;
        if span <= 0.0 {
            return self.to;
        }
        self.from.lerp(&self.to, (t - self.depart_min) / span)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ambulance {
    pub id: usize,
    pub status: AmbulanceStatus,
    /// Position at the last tick; use [`Ambulance::position_at`] while travelling.
    pub position: Point,
    pub journey: Option<Journey>,
    pub assigned_dispatch_point: Option<usize>,
    pub assigned_incident: Option<usize>,
}

impl Ambulance {
    pub fn position_at(&self, t: f64) -> Point {
        match &self.journey {
            Some(j) => j.position_at(t),
            None => self.position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incident {
    pub id: usize,
    pub call_time_min: f64,
    pub location: Point,
    pub assigned_ambulance: Option<usize>,
    pub assign_time_min: Option<f64>,
    pub arrival_time_min: Option<f64>,
    /// Where the responding ambulance was when it was assigned.
    pub dispatched_from: Option<Point>,
}

impl Incident {
    pub fn new(id: usize, call_time_min: f64, location: Point) -> Self {
        Self {
            id,
            call_time_min,
            location,
            assigned_ambulance: None,
            assign_time_min: None,
            arrival_time_min: None,
            dispatched_from: None,
        }
    }

    pub fn call_to_arrival(&self) -> Option<f64> {
        self.arrival_time_min.map(|a| a - self.call_time_min)
    }

    pub fn assignment_to_arrival(&self) -> Option<f64> {
        Some(self.arrival_time_min? - self.assign_time_min?)
    }
}

/// Agent-facing feature vector: per-dispatch-point counts, x, y, time of day.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
}

impl Observation {
    pub fn n_dispatch_points(&self) -> usize {
        self.features.len() - 3
    }

    pub fn counts(&self) -> &[f64] {
        &self.features[..self.n_dispatch_points()]
    }

    pub fn position(&self) -> Point {
        let n = self.n_dispatch_points();
        Point::new(self.features[n], self.features[n + 1])
    }

    pub fn time_of_day(&self) -> f64 {
        self.features[self.features.len() - 1]
    }
}

/// Cumulative per-episode counters returned with every step.
///
/// The time lists are shared with the environment and only copied if a caller
/// still holds a previous `StepInfo` when the next step appends to them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepInfo {
    pub call_to_arrival_times: Arc<Vec<f64>>,
    pub assignment_to_arrival_times: Arc<Vec<f64>>,
    pub total_calls: usize,
    pub fraction_demand_met: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
    /// Set together with `terminal` when the episode ended on the time limit.
    pub truncated: bool,
    pub info: StepInfo,
}
