//! Direct Gillespie event loop.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::degree::{sample_degrees, DegreeSpec};
use super::state::{execute_event, initialize_state, EventRecord, InitialCondition, PopulationState, Rates};
use super::trajectory::{MeasureSnapshot, Termination, Trajectory, TrajectoryRow};
use crate::error::{config, Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub r: f64,
    pub beta: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Spacing of recorded rows.
    pub record_grid: f64,
    pub snapshot_measures: bool,
}

impl SimParams {
    pub fn rates(&self) -> Rates {
        Rates {
            r: self.r,
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rates().validate()?;
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return config(format!("t_max must be positive and finite, got {}", self.t_max));
        }
        if !(self.record_grid > 0.0 && self.record_grid.is_finite()) {
            return config(format!("record grid must be positive, got {}", self.record_grid));
        }
        Ok(())
    }

    /// Recorded times `0, h, 2h, …` up to `t_max`.
    pub fn grid(&self) -> Vec<f64> {
        let steps = (self.t_max / self.record_grid + 1e-9).floor() as usize;
        (0..=steps).map(|g| g as f64 * self.record_grid).collect()
    }
}

fn row(state: &PopulationState, t: f64) -> TrajectoryRow {
    TrajectoryRow {
        t,
        s: state.s(),
        i: state.i(),
        r: state.r(),
        n_s: state.n_s(),
        n_is: state.n_is(),
        n_rs: state.n_rs(),
    }
}

fn snapshot(state: &PopulationState, t: f64) -> MeasureSnapshot {
    MeasureSnapshot {
        t,
        mu_s: state.mu_s().clone(),
        mu_is: state.mu_is(),
        mu_rs: state.mu_rs(),
    }
}

/// Runs the epidemic from `state` until `params.t_max` or until no event can
/// occur. Each grid time records the state holding just before it (the last
/// event strictly earlier).
pub fn simulate<R: Rng + ?Sized>(mut state: PopulationState, params: &SimParams, rng: &mut R) -> Result<Trajectory> {
    params.validate()?;
    let rates = params.rates();
    let grid = params.grid();
    let mut rows = Vec::with_capacity(grid.len());
    let mut snapshots = Vec::new();
    let mut next_grid = 0;
    let mut events = 0;
    let mut capped_infections = 0;

    let termination = loop {
        let rate = state.total_event_rate(rates);
        let t_next = if rate > 0.0 {
            let exp = Exp::new(rate).map_err(|e| Error::Sampling(e.to_string()))?;
            state.t() + exp.sample(rng)
        } else {
            f64::INFINITY
        };
        while next_grid < grid.len() && grid[next_grid] <= t_next {
            rows.push(row(&state, grid[next_grid]));
            if params.snapshot_measures {
                snapshots.push(snapshot(&state, grid[next_grid]));
            }
            next_grid += 1;
        }
        if rate <= 0.0 {
            break if state.i() == 0 {
                Termination::Extinct
            } else {
                Termination::Absorbed
            };
        }
        if t_next > params.t_max {
            break Termination::HorizonReached;
        }
        let record = execute_event(&mut state, rates, rng)?;
        if matches!(record, EventRecord::Infection { capped: true, .. }) {
            capped_infections += 1;
        }
        events += 1;
        state.set_t(t_next);
    };

    Ok(Trajectory {
        rows,
        snapshots,
        termination,
        events,
        capped_infections,
    })
}

/// Samples `n` degrees, infects the initial fraction and simulates, all from
/// the single stream seeded by `params.seed`.
pub fn run_simulation(spec: &DegreeSpec, n: usize, init: InitialCondition, params: &SimParams) -> Result<Trajectory> {
    params.validate()?;
    init.validate()?;
    let mut rng = rng_from_seed(params.seed);
    let degrees = sample_degrees(spec, n, &mut rng)?;
    let state = initialize_state(&degrees, init, &mut rng)?;
    simulate(state, params, &mut rng)
}
