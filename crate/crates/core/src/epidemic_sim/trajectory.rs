//! Recorded output of a simulation run.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measures::CountMeasure;

pub const TRAJECTORY_HEADER: &str = "t,S,I,R,N_S,N_IS,N_RS";

/// Class sizes and edge counts at one grid time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub s: u64,
    pub i: u64,
    pub r: u64,
    pub n_s: u64,
    pub n_is: u64,
    pub n_rs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSnapshot {
    pub t: f64,
    #[serde(rename = "mu_S")]
    pub mu_s: CountMeasure,
    #[serde(rename = "mu_IS")]
    pub mu_is: CountMeasure,
    #[serde(rename = "mu_RS")]
    pub mu_rs: CountMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The next event would have happened after `t_max`.
    HorizonReached,
    /// No infectious individual is left.
    Extinct,
    /// Infectious individuals remain but no event can happen (`β = 0` and
    /// `N^IS = 0`).
    Absorbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub snapshots: Vec<MeasureSnapshot>,
    pub termination: Termination,
    /// Number of events executed.
    pub events: u64,
    /// Infections whose new infective lost edges to the self-loop cap.
    pub capped_infections: u64,
}

/// Rounds a time to 1e-12 so that grid times print without float noise.
pub fn display_time(t: f64) -> f64 {
    (t * 1e12).round() / 1e12
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                display_time(row.t),
                row.s,
                row.i,
                row.r,
                row.n_s,
                row.n_is,
                row.n_rs
            )?;
        }
        Ok(())
    }

    /// One JSON object per line.
    pub fn write_snapshots<W: Write>(&self, mut w: W) -> Result<()> {
        for snap in &self.snapshots {
            serde_json::to_writer(&mut w, snap)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// First recorded time at which `N^IS / n < eps`, or `+∞` if there is none.
pub fn stopping_time(traj: &Trajectory, eps: f64, n: u64) -> f64 {
    traj.rows
        .iter()
        .find(|row| (row.n_is as f64) / (n as f64) < eps)
        .map_or(f64::INFINITY, |row| row.t)
}
