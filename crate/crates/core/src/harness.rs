//! Monte-Carlo replicas and comparison of scaled paths with the limit.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::epidemic_sim::{
    run_simulation, DegreeSpec, InitialCondition, Selection, SimParams, Termination, Trajectory,
};
use crate::error::{config, Error, Result};
use crate::limit_odes::{horizon_bound, LimitInit, LimitRow, LimitSnapshot, LimitTrajectory};
use crate::measures::{tv_distance, CountMeasure, RealMeasure};
use crate::rng::derive_seed;

/// One row of a trajectory divided by the population size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledRow {
    pub t: f64,
    pub s: f64,
    pub i: f64,
    pub r: f64,
    pub n_s: f64,
    pub n_is: f64,
    pub n_rs: f64,
}

/// Degree measures at one grid time divided by the population size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledSnapshot {
    pub t: f64,
    pub mu_s: RealMeasure,
    pub mu_is: RealMeasure,
    pub mu_rs: RealMeasure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledTrajectory {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub rows: Vec<ScaledRow>,
    /// Empty unless the simulation recorded measure snapshots.
    pub snapshots: Vec<ScaledSnapshot>,
    pub termination: Termination,
    pub capped_infections: u64,
}

fn scaled_measure(mu: &CountMeasure, scale: f64) -> RealMeasure {
    mu.to_real(scale, mu.max_level().unwrap_or(0))
        .expect("levels are within the measure's own maximum")
}

impl ScaledTrajectory {
    pub fn from_trajectory(traj: &Trajectory, n: usize, rep: usize, seed: u64) -> Self {
        let scale = 1.0 / n as f64;
        let rows = traj
            .rows
            .iter()
            .map(|row| ScaledRow {
                t: row.t,
                s: row.s as f64 * scale,
                i: row.i as f64 * scale,
                r: row.r as f64 * scale,
                n_s: row.n_s as f64 * scale,
                n_is: row.n_is as f64 * scale,
                n_rs: row.n_rs as f64 * scale,
            })
            .collect();
        let snapshots = traj
            .snapshots
            .iter()
            .map(|snap| ScaledSnapshot {
                t: snap.t,
                mu_s: scaled_measure(&snap.mu_s, scale),
                mu_is: scaled_measure(&snap.mu_is, scale),
                mu_rs: scaled_measure(&snap.mu_rs, scale),
            })
            .collect();
        Self {
            n,
            rep,
            seed,
            rows,
            snapshots,
            termination: traj.termination,
            capped_infections: traj.capped_infections,
        }
    }

    /// Scalar path of `col`; measure columns have none.
    pub fn path(&self, col: Column) -> Result<SampledPath> {
        Ok(SampledPath {
            times: self.rows.iter().map(|r| r.t).collect(),
            values: self.rows.iter().map(|r| col.of_scaled(r)).collect::<Result<_>>()?,
        })
    }

    /// Times bracketing the first drop of `N^IS/n` below `eps`: the last
    /// recorded time still at or above it and the first recorded time below
    /// it. `(+∞, +∞)` if it never drops.
    pub fn stopping_bracket(&self, eps: f64) -> (f64, f64) {
        match self.rows.iter().position(|r| r.n_is < eps) {
            None => (f64::INFINITY, f64::INFINITY),
            Some(0) => (0.0, 0.0),
            Some(g) => (self.rows[g - 1].t, self.rows[g].t),
        }
    }
}

/// Quantities compared against the limit: scalar summaries, or whole
/// degree measures compared in L1 distance at grid times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Column {
    S,
    I,
    R,
    NS,
    NIS,
    NRS,
    MuS,
    MuIS,
    MuRS,
}

impl Column {
    pub const DEFAULT: [Column; 3] = [Column::I, Column::S, Column::NIS];
    pub const MEASURES: [Column; 3] = [Column::MuS, Column::MuIS, Column::MuRS];
    pub const ALL: [Column; 9] = [
        Column::S,
        Column::I,
        Column::R,
        Column::NS,
        Column::NIS,
        Column::NRS,
        Column::MuS,
        Column::MuIS,
        Column::MuRS,
    ];

    pub fn is_measure(self) -> bool {
        Column::MEASURES.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Column::S => "S",
            Column::I => "I",
            Column::R => "R",
            Column::NS => "N_S",
            Column::NIS => "N_IS",
            Column::NRS => "N_RS",
            Column::MuS => "mu_S",
            Column::MuIS => "mu_IS",
            Column::MuRS => "mu_RS",
        }
    }

    fn not_scalar(self) -> Error {
        Error::Config(format!("{} is a measure, not a scalar column", self.name()))
    }

    fn of_scaled(self, r: &ScaledRow) -> Result<f64> {
        Ok(match self {
            Column::S => r.s,
            Column::I => r.i,
            Column::R => r.r,
            Column::NS => r.n_s,
            Column::NIS => r.n_is,
            Column::NRS => r.n_rs,
            _ => return Err(self.not_scalar()),
        })
    }

    fn of_limit(self, r: &LimitRow) -> Result<f64> {
        Ok(match self {
            Column::S => r.s,
            Column::I => r.i,
            Column::R => r.r,
            Column::NS => r.n_s,
            Column::NIS => r.n_is,
            Column::NRS => r.n_rs,
            _ => return Err(self.not_scalar()),
        })
    }

    fn of_snapshot<'a>(
        self,
        mu_s: &'a RealMeasure,
        mu_is: &'a RealMeasure,
        mu_rs: &'a RealMeasure,
    ) -> Result<&'a RealMeasure> {
        match self {
            Column::MuS => Ok(mu_s),
            Column::MuIS => Ok(mu_is),
            Column::MuRS => Ok(mu_rs),
            _ => Err(Error::Config(format!(
                "{} is a scalar, not a measure column",
                self.name()
            ))),
        }
    }
}

impl std::str::FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Column::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown column {s:?}")))
    }
}

/// A scalar path sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Grid times further apart than this count as different.
const GRID_TOLERANCE: f64 = 1e-9;

/// `max |a(t) − b(t)|` over the grid points `t ≤ t_end`.
pub fn sup_distance(a: &SampledPath, b: &SampledPath, t_end: f64) -> Result<f64> {
    let end_a = a.times.partition_point(|&t| t <= t_end + GRID_TOLERANCE);
    let end_b = b.times.partition_point(|&t| t <= t_end + GRID_TOLERANCE);
    if end_a != end_b {
        return Err(Error::GridMismatch(format!(
            "{end_a} vs {end_b} grid points up to t = {t_end}"
        )));
    }
    let mut sup = 0.0f64;
    for g in 0..end_a {
        if (a.times[g] - b.times[g]).abs() > GRID_TOLERANCE {
            return Err(Error::GridMismatch(format!(
                "grid point {g}: t = {} vs {}",
                a.times[g], b.times[g]
            )));
        }
        sup = sup.max((a.values[g] - b.values[g]).abs());
    }
    Ok(sup)
}

/// Limit trajectory evaluated at arbitrary times by linear interpolation.
#[derive(Debug, Clone)]
pub struct LimitReference<'a> {
    rows: &'a [LimitRow],
}

impl<'a> LimitReference<'a> {
    pub fn new(limit: &'a LimitTrajectory) -> Result<Self> {
        if limit.rows.is_empty() {
            return config("empty limit trajectory");
        }
        Ok(Self { rows: &limit.rows })
    }

    pub fn t_end(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }

    pub fn value(&self, col: Column, t: f64) -> Result<f64> {
        if t > self.t_end() + GRID_TOLERANCE || t < -GRID_TOLERANCE {
            return Err(Error::GridMismatch(format!(
                "t = {t} outside the limit solution [0, {}]",
                self.t_end()
            )));
        }
        let hi = self.rows.partition_point(|r| r.t < t);
        if hi == 0 {
            return col.of_limit(&self.rows[0]);
        }
        if hi == self.rows.len() {
            return col.of_limit(&self.rows[hi - 1]);
        }
        let (a, b) = (&self.rows[hi - 1], &self.rows[hi]);
        let w = (t - a.t) / (b.t - a.t);
        Ok(col.of_limit(a)? * (1.0 - w) + col.of_limit(b)? * w)
    }

    /// The limit sampled at `times`, restricted to times `≤ t_end`.
    pub fn path(&self, col: Column, times: &[f64], t_end: f64) -> Result<SampledPath> {
        let times: Vec<f64> = times
            .iter()
            .copied()
            .take_while(|&t| t <= t_end + GRID_TOLERANCE)
            .collect();
        let values = times.iter().map(|&t| self.value(col, t)).collect::<Result<_>>()?;
        Ok(SampledPath { times, values })
    }

    /// First time `N̄^IS` drops below `eps`, interpolated; `+∞` if never.
    pub fn crossing_time(&self, eps: f64) -> f64 {
        match self.rows.iter().position(|r| r.n_is < eps) {
            None => f64::INFINITY,
            Some(0) => 0.0,
            Some(g) => {
                let (a, b) = (&self.rows[g - 1], &self.rows[g]);
                a.t + (a.n_is - eps) / (a.n_is - b.n_is) * (b.t - a.t)
            }
        }
    }
}

/// Limit initial measures matching a simulation's initial condition.
pub fn matching_limit_init(spec: &DegreeSpec, init: InitialCondition) -> Result<LimitInit> {
    let p = spec.as_measure()?;
    let base = match init.selection {
        Selection::Uniform => LimitInit::uniform(&p, init.i0)?,
        Selection::SizeBiased => LimitInit::size_biased(&p, init.i0)?,
    };
    if init.pair_initial {
        base.with_paired_infectives()
    } else {
        Ok(base)
    }
}

/// Runs `reps` simulations for every `n`, in parallel. Replica `(n, rep)`
/// is seeded with [`derive_seed`]`(params.seed, n, rep)`; the output is
/// ordered by `n_values` then `rep` whatever the scheduling.
pub fn run_replicas(
    spec: &DegreeSpec,
    init: InitialCondition,
    params: &SimParams,
    n_values: &[usize],
    reps: usize,
) -> Result<Vec<ScaledTrajectory>> {
    if reps == 0 {
        return config("reps must be at least 1");
    }
    if n_values.is_empty() {
        return config("no population size given");
    }
    params.validate()?;
    init.validate()?;
    let jobs: Vec<(usize, usize)> = n_values
        .iter()
        .flat_map(|&n| (0..reps).map(move |rep| (n, rep)))
        .collect();
    jobs.par_iter()
        .map(|&(n, rep)| {
            let seed = derive_seed(params.seed, n as u64, rep as u64);
            let p = SimParams { seed, ..*params };
            run_simulation(spec, n, init, &p)
                .map(|traj| ScaledTrajectory::from_trajectory(&traj, n, rep, seed))
                .map_err(|e| Error::Replica {
                    n,
                    rep,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// How the comparison window `[0, t_end]` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HorizonRule {
    /// `min(T, τ̄_{ε′})` with the analytic lower bound.
    #[default]
    Bound,
    /// `min(T, t_{ε′})` with the time the limit `N̄^IS` reaches `ε′`.
    Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonWindow {
    pub eps_prime: f64,
    /// Analytic lower bound on the time `N̄^IS` needs to reach `ε′`.
    pub tau_bar: f64,
    /// Distances are taken over `[0, t_end]`.
    pub t_end: f64,
}

impl ComparisonWindow {
    pub fn new(
        init: &LimitInit,
        limit: &LimitTrajectory,
        params: &SimParams,
        eps_prime: f64,
        rule: HorizonRule,
    ) -> Result<Self> {
        let tau_bar = horizon_bound(
            &init.mu_s0,
            init.mu_is0.first_moment(),
            eps_prime,
            params.r,
            params.beta,
        )?;
        let cutoff = match rule {
            HorizonRule::Bound => tau_bar,
            HorizonRule::Crossing => LimitReference::new(limit)?.crossing_time(eps_prime),
        };
        Ok(Self {
            eps_prime,
            tau_bar,
            t_end: params.t_max.min(cutoff),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub reps: usize,
    pub col: Column,
    pub mean_sup_dist: f64,
    /// Standard error of the mean over replicas.
    pub stderr: f64,
    /// Fraction of replicas whose `N^IS/n` stays `≥ ε′` on `[0, τ̄_{ε′}]`.
    pub frac_tau_ge_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub window: ComparisonWindow,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: &str = "n,reps,col,mean_sup_dist,stderr,frac_tau_ge_bound";

impl ConvergenceReport {
    pub fn row(&self, n: usize, col: Column) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.n == n && r.col == col)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{REPORT_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{:e},{:e},{}",
                r.n,
                r.reps,
                r.col.name(),
                r.mean_sup_dist,
                r.stderr,
                r.frac_tau_ge_bound
            )?;
        }
        Ok(())
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Per population size: mean and standard error over replicas of the sup
/// distance to the limit on `[0, window.t_end]`, for each column, and the
/// fraction of replicas whose stopping time `τ^n_{ε′}` is at least `τ̄_{ε′}`.
///
/// The stopping time is only known to grid resolution; a replica counts as
/// `τ^n ≥ τ̄` when the last grid time before the crossing is already `≥ τ̄`.
/// Measure columns need [`convergence_report_with_measures`].
pub fn convergence_report(
    trajectories: &[ScaledTrajectory],
    limit: &LimitTrajectory,
    window: ComparisonWindow,
    columns: &[Column],
) -> Result<ConvergenceReport> {
    convergence_report_with_measures(trajectories, limit, &[], window, columns)
}

/// [`convergence_report`] that also accepts measure columns, compared in L1
/// distance against `snapshots` of the limit measures (interpolated linearly
/// in time). Replicas must have recorded measure snapshots.
pub fn convergence_report_with_measures(
    trajectories: &[ScaledTrajectory],
    limit: &LimitTrajectory,
    snapshots: &[LimitSnapshot],
    window: ComparisonWindow,
    columns: &[Column],
) -> Result<ConvergenceReport> {
    let reference = LimitReference::new(limit)?;
    if columns.iter().any(|c| c.is_measure()) {
        if snapshots.is_empty() {
            return config("measure columns need snapshots of the limit measures");
        }
        if let Some(t) = trajectories.iter().find(|t| t.snapshots.is_empty()) {
            return config(format!("replica (n={}, rep={}) has no measure snapshots", t.n, t.rep));
        }
    }
    let distance = |t: &ScaledTrajectory, col: Column| -> Result<f64> {
        if col.is_measure() {
            return measure_sup_distance(t, snapshots, col, window.t_end);
        }
        let sim = t.path(col)?;
        let lim = reference.path(col, &sim.times, window.t_end)?;
        sup_distance(&sim, &lim, window.t_end)
    };
    let mut sizes: Vec<usize> = trajectories.iter().map(|t| t.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut rows = Vec::new();
    for &n in &sizes {
        let group: Vec<&ScaledTrajectory> = trajectories.iter().filter(|t| t.n == n).collect();
        let survived = group
            .iter()
            .filter(|t| t.stopping_bracket(window.eps_prime).0 >= window.tau_bar)
            .count();
        let frac = survived as f64 / group.len() as f64;
        for &col in columns {
            let dists = group.iter().map(|t| distance(t, col)).collect::<Result<Vec<f64>>>()?;
            let (mean, stderr) = mean_and_stderr(&dists);
            rows.push(ReportRow {
                n,
                reps: group.len(),
                col,
                mean_sup_dist: mean,
                stderr,
                frac_tau_ge_bound: frac,
            });
        }
    }
    Ok(ConvergenceReport { window, rows })
}

/// Limit measure `col` at time `t`, interpolated between snapshots.
fn limit_measure_at(snapshots: &[LimitSnapshot], col: Column, t: f64) -> Result<RealMeasure> {
    let last = snapshots.last().map_or(0.0, |s| s.t);
    if t > last + GRID_TOLERANCE || t < -GRID_TOLERANCE {
        return Err(Error::GridMismatch(format!(
            "t = {t} outside the limit snapshots [0, {last}]"
        )));
    }
    let pick = |s: &LimitSnapshot| col.of_snapshot(&s.mu_s, &s.mu_is, &s.mu_rs).cloned();
    let hi = snapshots.partition_point(|s| s.t < t);
    if hi == 0 {
        return pick(&snapshots[0]);
    }
    if hi == snapshots.len() {
        return pick(&snapshots[hi - 1]);
    }
    let (a, b) = (&snapshots[hi - 1], &snapshots[hi]);
    let w = (t - a.t) / (b.t - a.t);
    let (ma, mb) = (pick(a)?, pick(b)?);
    let len = ma.weights().len().max(mb.weights().len());
    let weights = (0..len as u32).map(|k| ma.get(k) * (1.0 - w) + mb.get(k) * w).collect();
    RealMeasure::from_weights(weights)
}

/// `max_t Σ_k |μ^n_t(k) − μ̄_t(k)|` over snapshot times `t ≤ t_end`.
fn measure_sup_distance(traj: &ScaledTrajectory, snapshots: &[LimitSnapshot], col: Column, t_end: f64) -> Result<f64> {
    let mut sup = 0.0f64;
    for snap in traj.snapshots.iter().take_while(|s| s.t <= t_end + GRID_TOLERANCE) {
        let sim = col.of_snapshot(&snap.mu_s, &snap.mu_is, &snap.mu_rs)?;
        sup = sup.max(tv_distance(sim, &limit_measure_at(snapshots, col, snap.t)?));
    }
    Ok(sup)
}

/// Seeds of every replica, for the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSeed {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
}

pub fn replica_seeds(trajectories: &[ScaledTrajectory]) -> Vec<ReplicaSeed> {
    trajectories
        .iter()
        .map(|t| ReplicaSeed {
            n: t.n,
            rep: t.rep,
            seed: t.seed,
        })
        .collect()
}
