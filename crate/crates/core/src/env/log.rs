use std::io::Write;

use super::SimState;

/// Write one CSV row per incident whose ambulance has arrived on scene.
pub fn write_episode_log<W: Write>(state: &SimState, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "incident_id",
        "call_time",
        "assign_time",
        "arrival_time",
        "incident_x",
        "incident_y",
        "ambulance_id",
        "dispatched_from_x",
        "dispatched_from_y",
    ])?;
    for inc in state.completed_incidents() {
        let from = inc.dispatched_from.unwrap_or_default();
        w.write_record([
            inc.id.to_string(),
            inc.call_time_min.to_string(),
            inc.assign_time_min.unwrap_or(f64::NAN).to_string(),
            inc.arrival_time_min.unwrap_or(f64::NAN).to_string(),
            inc.location.x.to_string(),
            inc.location.y.to_string(),
            inc.assigned_ambulance.map_or(String::new(), |a| a.to_string()),
            from.x.to_string(),
            from.y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
