//! Deterministic large-population limit of the epidemic.
//!
//! Three solvers share one output row type ([`LimitRow`]):
//!
//! - [`solve_volz`]: the closed scalar system in `θ`, the edge proportions
//!   and the class masses;
//! - [`solve_measures`]: the truncated countable system for the measures
//!   `μ̄^IS`, `μ̄^RS`, with `μ̄^S_t(k) = μ̄^S_0(k) θ_t^k` in closed form;
//! - [`miller_theta_ode`]: the one-variable reduction in `θ`.
//!
//! All of them use fixed-step RK4.

mod gf;
mod horizon;
mod init;
mod measure_system;
mod miller;
mod rk4;
mod volz;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use gf::GeneratingFn;
pub use horizon::horizon_bound;
pub use init::LimitInit;
pub use measure_system::{influx, measure_rhs, solve_measures, MeasureDerivative, MeasureSolution, MeasureSystemState};
pub use miller::{miller_theta_ode, MillerSolution};
pub use volz::{edge_identities, solve_volz, volz_rhs, EdgeIdentities, VolzDerivative, VolzSolution, VolzState};

use crate::epidemic_sim::trajectory::display_time;
use crate::error::{config, Result};
use crate::measures::RealMeasure;

/// Denominators `⟨μ̄^IS, χ⟩`, `⟨μ̄^RS, χ⟩` below this make their drift term 0.
pub const ZERO_DENOMINATOR: f64 = 1e-12;

pub const LIMIT_HEADER: &str = "t,S,I,R,N_S,N_IS,N_RS,theta,pI,pS,pR";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    /// Integration stops once `N̄^IS` falls below this.
    pub eps_is: f64,
    pub t_max: f64,
    /// Keep one state every `record_stride` steps (the last one is always kept).
    pub record_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            eps_is: 1e-6,
            t_max: 10.0,
            record_stride: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return config(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.eps_is > 0.0) {
            return config(format!("eps_IS must be positive, got {}", self.eps_is));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return config(format!("t_max must be nonnegative and finite, got {}", self.t_max));
        }
        if self.record_stride == 0 {
            return config("record stride must be at least 1");
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land on `t_max`.
    pub(crate) fn steps(&self) -> usize {
        let exact = self.t_max / self.dt;
        let rounded = exact.round();
        if (exact - rounded).abs() < 1e-9 * exact.max(1.0) {
            rounded as usize
        } else {
            exact.ceil() as usize
        }
    }

    pub(crate) fn time_of(&self, step: usize) -> f64 {
        if step == self.steps() {
            self.t_max
        } else {
            (step as f64 * self.dt).min(self.t_max)
        }
    }

    pub(crate) fn keep(&self, step: usize) -> bool {
        step.is_multiple_of(self.record_stride) || step == self.steps()
    }
}

/// Why a limit solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitStop {
    HorizonReached,
    /// `N̄^IS` fell below `eps_IS`.
    EdgeFloor,
}

/// Scaled summaries shared by all limit solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub t: f64,
    pub s: f64,
    pub i: f64,
    pub r: f64,
    pub n_s: f64,
    pub n_is: f64,
    pub n_rs: f64,
    pub theta: f64,
    pub p_i: f64,
    pub p_s: f64,
    pub p_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSnapshot {
    pub t: f64,
    #[serde(rename = "mu_S")]
    pub mu_s: RealMeasure,
    #[serde(rename = "mu_IS")]
    pub mu_is: RealMeasure,
    #[serde(rename = "mu_RS")]
    pub mu_rs: RealMeasure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitTrajectory {
    pub rows: Vec<LimitRow>,
    pub stop: LimitStop,
}

impl LimitTrajectory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{LIMIT_HEADER}")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                display_time(row.t),
                row.s,
                row.i,
                row.r,
                row.n_s,
                row.n_is,
                row.n_rs,
                row.theta,
                row.p_i,
                row.p_s,
                row.p_r
            )?;
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }
}

pub fn write_snapshots<W: Write>(snapshots: &[LimitSnapshot], mut w: W) -> Result<()> {
    for snap in snapshots {
        serde_json::to_writer(&mut w, snap)?;
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count_lands_on_the_horizon() {
        let cfg = SolverConfig {
            dt: 1e-3,
            t_max: 5.0,
            ..SolverConfig::default()
        };
        assert_eq!(cfg.steps(), 5000);
        assert_eq!(cfg.time_of(5000), 5.0);
        let odd = SolverConfig {
            dt: 0.3,
            t_max: 1.0,
            ..SolverConfig::default()
        };
        assert_eq!(odd.steps(), 4);
        assert_eq!(odd.time_of(4), 1.0);
        assert!((odd.time_of(3) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs() {
        let base = SolverConfig::default();
        assert!(SolverConfig { dt: 0.0, ..base }.validate().is_err());
        assert!(SolverConfig { eps_is: 0.0, ..base }.validate().is_err());
        assert!(SolverConfig {
            record_stride: 0,
            ..base
        }
        .validate()
        .is_err());
        assert!(base.validate().is_ok());
    }
}
