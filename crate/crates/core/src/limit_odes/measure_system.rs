//! Truncated countable system for the limit measures.
//!
//! The susceptible measure is never integrated: `μ̄^S_t(k) = μ̄^S_0(k) θ_t^k`.
//! The integrated vector is `[θ, μ̄^IS(0..=K), μ̄^RS(0..=K)]`.

use serde::{Deserialize, Serialize};

use super::init::LimitInit;
use super::rk4::Rk4;
use super::{LimitRow, LimitSnapshot, LimitStop, LimitTrajectory, SolverConfig, ZERO_DENOMINATOR};
use crate::epidemic_sim::Rates;
use crate::error::{config, Error, Result};
use crate::measures::RealMeasure;

/// Clamped negative mass tolerated, relative to `S̄_0 + Ī_0 + R̄_0`.
const CLAMP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSystemState {
    pub t: f64,
    pub theta: f64,
    pub mu_is: RealMeasure,
    pub mu_rs: RealMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureDerivative {
    pub theta: f64,
    pub mu_is: Vec<f64>,
    pub mu_rs: Vec<f64>,
}

/// Infection influx into `μ̄^IS` per unit `r pI`:
///
/// `influx(i) = Σ_{k ≥ i+1} k μ̄^S(k) C(k−1, i) pS^i q^{k−1−i}`, `q = pI + pR`,
///
/// the multinomial split of the `k − 1` other edges summed over the `I`/`R`
/// part. With `b_m = (m+1) μ̄^S(m+1)`, the inner sum is the `i`-th Taylor
/// coefficient of `Σ_m b_m z^m` at `z = q`, computed by repeated synthetic
/// division. Returns a vector of the same length as `mu_s`.
pub fn influx(mu_s: &[f64], p_s: f64, q: f64) -> Vec<f64> {
    let len = mu_s.len();
    let mut out = vec![0.0; len];
    if len < 2 {
        return out;
    }
    let mut a: Vec<f64> = (0..len - 1).map(|m| (m + 1) as f64 * mu_s[m + 1]).collect();
    let n = a.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            a[j] += q * a[j + 1];
        }
    }
    let mut power = 1.0;
    for i in 0..n {
        out[i] = power * a[i];
        power *= p_s;
    }
    out
}

struct Moments {
    n_s: f64,
    /// `⟨μ̄^S, χ² − χ⟩`.
    x2: f64,
    n_is: f64,
    n_rs: f64,
    p_i: f64,
    p_s: f64,
    p_r: f64,
}

fn susceptible(mu0: &[f64], theta: f64, out: &mut [f64]) {
    let mut power = 1.0;
    for (k, &w) in mu0.iter().enumerate() {
        out[k] = w * power;
        power *= theta;
    }
}

fn moments(mu_s: &[f64], is: &[f64], rs: &[f64]) -> Moments {
    let mut n_s = 0.0;
    let mut x2 = 0.0;
    for (k, &w) in mu_s.iter().enumerate() {
        let kf = k as f64;
        n_s += kf * w;
        x2 += kf * (kf - 1.0) * w;
    }
    let first = |m: &[f64]| m.iter().enumerate().map(|(i, &w)| i as f64 * w).sum::<f64>();
    let n_is = first(is);
    let n_rs = first(rs);
    let (p_i, p_r, p_s) = if n_s > 0.0 {
        (n_is / n_s, n_rs / n_s, (n_s - n_is - n_rs) / n_s)
    } else {
        (0.0, 0.0, 0.0)
    };
    Moments {
        n_s,
        x2,
        n_is,
        n_rs,
        p_i,
        p_s,
        p_r,
    }
}

/// Shift term `(i+1) μ(i+1) − i μ(i)`.
fn shift(mu: &[f64], i: usize) -> f64 {
    let up = if i + 1 < mu.len() {
        (i + 1) as f64 * mu[i + 1]
    } else {
        0.0
    };
    up - i as f64 * mu[i]
}

/// Writes the drift of `[θ, μ̄^IS, μ̄^RS]` into `dy`. `scratch` has length `K+1`.
fn rhs(mu0: &[f64], rates: Rates, y: &[f64], dy: &mut [f64], scratch: &mut [f64]) {
    let len = mu0.len();
    let theta = y[0];
    let is = &y[1..1 + len];
    let rs = &y[1 + len..];
    susceptible(mu0, theta, scratch);
    let m = moments(scratch, is, rs);
    let (r, beta) = (rates.r, rates.beta);
    let force = r * m.p_i;
    dy[0] = -force * theta;

    let inflow = influx(scratch, m.p_s.max(0.0), m.p_i + m.p_r);
    let is_coeff = if m.n_is >= ZERO_DENOMINATOR {
        (force * m.p_i * m.x2 + force * m.n_s) / m.n_is
    } else {
        0.0
    };
    let rs_coeff = if m.n_rs >= ZERO_DENOMINATOR {
        force * m.x2 * m.p_r / m.n_rs
    } else {
        0.0
    };
    let (d_is, d_rs) = dy[1..].split_at_mut(len);
    for i in 0..len {
        d_is[i] = force * inflow[i] + is_coeff * shift(is, i) - beta * is[i];
        d_rs[i] = beta * is[i] + rs_coeff * shift(rs, i);
    }
}

/// Right-hand side of the system at `state`, given the initial susceptible
/// measure. Drift terms whose denominator `⟨μ̄^IS, χ⟩` or `⟨μ̄^RS, χ⟩` is
/// below [`ZERO_DENOMINATOR`] are set to 0.
pub fn measure_rhs(state: &MeasureSystemState, mu0_s: &RealMeasure, rates: Rates) -> MeasureDerivative {
    let kmax = mu0_s.kmax().max(state.mu_is.kmax()).max(state.mu_rs.kmax());
    let len = kmax as usize + 1;
    let mut y = Vec::with_capacity(1 + 2 * len);
    y.push(state.theta);
    y.extend_from_slice(state.mu_is.with_kmax(kmax).weights());
    y.extend_from_slice(state.mu_rs.with_kmax(kmax).weights());
    let mut dy = vec![0.0; y.len()];
    let mut scratch = vec![0.0; len];
    rhs(mu0_s.with_kmax(kmax).weights(), rates, &y, &mut dy, &mut scratch);
    MeasureDerivative {
        theta: dy[0],
        mu_is: dy[1..1 + len].to_vec(),
        mu_rs: dy[1 + len..].to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSolution {
    /// Initial susceptible measure, padded to the truncation level.
    pub mu_s0: RealMeasure,
    pub states: Vec<MeasureSystemState>,
    pub stop: LimitStop,
    /// Total negative weight set to 0 after steps.
    pub clamped_mass: f64,
}

impl MeasureSystemState {
    pub fn mu_s(&self, mu0_s: &RealMeasure) -> RealMeasure {
        let mut w = vec![0.0; mu0_s.weights().len()];
        susceptible(mu0_s.weights(), self.theta, &mut w);
        RealMeasure::from_weights(w).expect("θ^k scaling keeps weights nonnegative")
    }

    pub fn row(&self, mu0_s: &RealMeasure) -> LimitRow {
        let mu_s = self.mu_s(mu0_s);
        let m = moments(mu_s.weights(), self.mu_is.weights(), self.mu_rs.weights());
        LimitRow {
            t: self.t,
            s: mu_s.mass(),
            i: self.mu_is.mass(),
            r: self.mu_rs.mass(),
            n_s: m.n_s,
            n_is: m.n_is,
            n_rs: m.n_rs,
            theta: self.theta,
            p_i: m.p_i,
            p_s: m.p_s,
            p_r: m.p_r,
        }
    }
}

impl MeasureSolution {
    pub fn trajectory(&self) -> LimitTrajectory {
        LimitTrajectory {
            rows: self.states.iter().map(|s| s.row(&self.mu_s0)).collect(),
            stop: self.stop,
        }
    }

    pub fn snapshots(&self) -> Vec<LimitSnapshot> {
        self.states
            .iter()
            .map(|s| LimitSnapshot {
                t: s.t,
                mu_s: s.mu_s(&self.mu_s0),
                mu_is: s.mu_is.clone(),
                mu_rs: s.mu_rs.clone(),
            })
            .collect()
    }
}

/// Integrates the truncated system from `init` with RK4.
///
/// Negative weights produced by a step are set to 0; the removed mass is
/// accumulated and must stay below `1e-6 (S̄_0 + Ī_0 + R̄_0)`.
pub fn solve_measures(init: &LimitInit, rates: Rates, cfg: &SolverConfig) -> Result<MeasureSolution> {
    cfg.validate()?;
    rates.validate()?;
    init.validate()?;
    if !(init.mu_is0.first_moment() > 0.0) {
        return config("initial infectious measure has no edges to susceptibles");
    }
    let kmax = init.kmax();
    let len = kmax as usize + 1;
    let mu_s0 = init.mu_s0.with_kmax(kmax);
    let mu0 = mu_s0.weights().to_vec();
    let total = mu_s0.mass() + init.mu_is0.mass() + init.mu_rs0.mass();

    let mut y = Vec::with_capacity(1 + 2 * len);
    y.push(1.0);
    y.extend_from_slice(init.mu_is0.with_kmax(kmax).weights());
    y.extend_from_slice(init.mu_rs0.with_kmax(kmax).weights());

    let snapshot = |t: f64, y: &[f64]| -> Result<MeasureSystemState> {
        Ok(MeasureSystemState {
            t,
            theta: y[0],
            mu_is: RealMeasure::from_weights(y[1..1 + len].to_vec())?,
            mu_rs: RealMeasure::from_weights(y[1 + len..].to_vec())?,
        })
    };
    let edges = |y: &[f64]| {
        y[1..1 + len]
            .iter()
            .enumerate()
            .map(|(i, &w)| i as f64 * w)
            .sum::<f64>()
    };

    let mut states = vec![snapshot(0.0, &y)?];
    let mut rk = Rk4::new(y.len());
    let mut scratch = vec![0.0; len];
    let mut clamped_mass = 0.0;
    let mut stop = LimitStop::HorizonReached;

    for step in 1..=cfg.steps() {
        if edges(&y) < cfg.eps_is {
            stop = LimitStop::EdgeFloor;
            break;
        }
        let t0 = cfg.time_of(step - 1);
        let t1 = cfg.time_of(step);
        rk.step(t0, t1 - t0, &mut y, |_, y, dy| rhs(&mu0, rates, y, dy, &mut scratch));
        for w in &mut y[1..] {
            if *w < 0.0 {
                clamped_mass -= *w;
                *w = 0.0;
            }
        }
        if clamped_mass > CLAMP_TOLERANCE * total {
            return Err(Error::SolverDiagnostic(format!(
                "clamped negative mass {clamped_mass:e} exceeds {CLAMP_TOLERANCE:e} of the total {total} at t = {t1}"
            )));
        }
        if !(y[0] > 0.0 && y[0] <= 1.0) {
            return Err(Error::SolverDiagnostic(format!("θ = {} left (0, 1] at t = {t1}", y[0])));
        }
        if cfg.keep(step) || edges(&y) < cfg.eps_is {
            states.push(snapshot(t1, &y)?);
        }
    }
    Ok(MeasureSolution {
        mu_s0,
        states,
        stop,
        clamped_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
    }

    /// `Σ_{j,ℓ} (i+j+ℓ+1) μ(i+j+ℓ+1) (i+j+ℓ)!/(i! j! ℓ!) pS^i pI^j pR^ℓ`.
    fn influx_double_sum(mu: &[f64], p_s: f64, p_i: f64, p_r: f64, i: usize) -> f64 {
        let mut total = 0.0;
        for j in 0..mu.len() {
            for l in 0..mu.len() {
                let k = i + j + l + 1;
                if k >= mu.len() {
                    continue;
                }
                let multinomial = binom(k - 1, i) * binom(j + l, j);
                total += k as f64 * mu[k] * multinomial * p_s.powi(i as i32) * p_i.powi(j as i32) * p_r.powi(l as i32);
            }
        }
        total
    }

    #[test]
    fn influx_of_a_single_degree() {
        let f = influx(&[0.0, 0.0, 1.0], 1.0, 0.0);
        assert_eq!(f, vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn infection_terms_vanish_without_pressure() {
        let mu0 = RealMeasure::from_weights(vec![0.0, 0.3, 0.4, 0.3]).unwrap();
        let state = MeasureSystemState {
            t: 0.0,
            theta: 0.9,
            mu_is: RealMeasure::from_weights(vec![0.1, 0.0, 0.0, 0.0]).unwrap(),
            mu_rs: RealMeasure::from_weights(vec![0.0, 0.2, 0.1, 0.0]).unwrap(),
        };
        let d = measure_rhs(&state, &mu0, Rates { r: 2.0, beta: 0.5 });
        assert_eq!(d.theta, 0.0);
        assert_eq!(d.mu_is, vec![-0.05, 0.0, 0.0, 0.0]);
        assert_eq!(d.mu_rs, vec![0.05, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn frozen_without_rates() {
        let p = RealMeasure::from_weights(vec![0.0, 0.2, 0.5, 0.3]).unwrap();
        let init = LimitInit::uniform(&p, 0.1).unwrap();
        let cfg = SolverConfig {
            t_max: 1.0,
            ..SolverConfig::default()
        };
        let sol = solve_measures(&init, Rates { r: 0.0, beta: 0.0 }, &cfg).unwrap();
        let last = sol.states.last().unwrap();
        assert_eq!(last.theta, 1.0);
        assert_eq!(last.mu_is, init.mu_is0);
        assert_eq!(sol.clamped_mass, 0.0);
    }

    #[test]
    fn susceptible_measure_is_closed_form() {
        let p = RealMeasure::from_weights(vec![0.0, 0.2, 0.5, 0.3]).unwrap();
        let init = LimitInit::uniform(&p, 0.1).unwrap();
        let cfg = SolverConfig {
            t_max: 3.0,
            record_stride: 100,
            ..SolverConfig::default()
        };
        let sol = solve_measures(&init, Rates { r: 1.0, beta: 0.5 }, &cfg).unwrap();
        for s in &sol.states {
            let mu_s = s.mu_s(&sol.mu_s0);
            for k in 0..=3u32 {
                assert_eq!(mu_s.get(k), init.mu_s0.get(k) * s.theta.powi(k as i32));
            }
        }
    }

    #[test]
    fn class_masses_are_conserved() {
        let p = RealMeasure::from_weights(vec![0.05, 0.2, 0.3, 0.25, 0.2]).unwrap();
        let init = LimitInit::uniform(&p, 0.05).unwrap();
        let cfg = SolverConfig {
            t_max: 5.0,
            record_stride: 50,
            ..SolverConfig::default()
        };
        let traj = solve_measures(&init, Rates { r: 1.5, beta: 0.5 }, &cfg)
            .unwrap()
            .trajectory();
        for row in &traj.rows {
            assert!((row.s + row.i + row.r - 1.0).abs() < 1e-10, "{row:?}");
        }
    }

    proptest! {
        #[test]
        fn collapsed_influx_matches_double_sum(
            weights in prop::collection::vec(0.0f64..1.0, 1..13),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let (p_s, p_i) = (a, (1.0 - a) * b);
            let p_r = 1.0 - p_s - p_i;
            let fast = influx(&weights, p_s, p_i + p_r);
            for (i, &f) in fast.iter().enumerate() {
                let slow = influx_double_sum(&weights, p_s, p_i, p_r, i);
                prop_assert!((f - slow).abs() <= 1e-12 * slow.abs().max(1.0), "i = {}: {} vs {}", i, f, slow);
            }
        }
    }
}
