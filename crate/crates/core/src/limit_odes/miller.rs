//! One-variable reduction in `θ`.
//!
//! Splitting `θ = φ_S + φ_I + φ_R` by the state of the alter of a
//! not-yet-transmitting edge, with `φ_S = pS_0 ψ′(θ)/ψ′(1)` for the
//! configuration-model degree law `ψ`:
//!
//! `dθ = −r φ_I = −r θ + r pS_0 ψ′(θ)/ψ′(1) + r φ_R`,  `dφ_R = β φ_I`.
//!
//! With `pS_0 = 1` and `φ_R(0) = 0`, `r φ_R = β(1 − θ)` and this is Miller's
//! equation `dθ = −rθ + r ψ′(θ)/ψ′(1) + β(1 − θ)`. It agrees with the Volz
//! system only when the initial susceptible degrees follow `ψ`.

use serde::{Deserialize, Serialize};

use super::gf::GeneratingFn;
use super::init::LimitInit;
use super::rk4::Rk4;
use super::{LimitRow, LimitStop, LimitTrajectory, SolverConfig};
use crate::epidemic_sim::Rates;
use crate::error::{Error, Result};
use crate::measures::{tv_distance, RealMeasure};

/// Normalized coefficients closer than this count as the same law.
const SAME_LAW: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MillerSolution {
    pub trajectory: LimitTrajectory,
    /// Set when the initial susceptible degrees differ from `ψ`.
    pub caveat: Option<String>,
}

fn normalized(g: &GeneratingFn, kmax: u32) -> RealMeasure {
    let m = g.mass();
    let mut w: Vec<f64> = g.coeffs().iter().map(|c| c / m).collect();
    w.resize(kmax as usize + 1, 0.0);
    RealMeasure::from_weights(w).expect("normalized coefficients are nonnegative")
}

/// Integrates `θ` and `φ_R` (and `R̄`) from `init`. `psi` is the
/// configuration-model degree law; `None` takes the initial susceptible
/// degree measure.
pub fn miller_theta_ode(
    init: &LimitInit,
    psi: Option<&GeneratingFn>,
    rates: Rates,
    cfg: &SolverConfig,
) -> Result<MillerSolution> {
    cfg.validate()?;
    rates.validate()?;
    init.validate()?;
    let g = GeneratingFn::from_measure(&init.mu_s0)?;
    let psi = psi.cloned().unwrap_or_else(|| g.clone());
    let psi1 = psi.eval(1.0, 1);
    if !(psi1 > 0.0) {
        return Err(Error::Singularity("ψ'(1) = 0: degree law has no edges".into()));
    }
    let kmax = g.kmax().max(psi.kmax());
    let distance = tv_distance(&normalized(&g, kmax), &normalized(&psi, kmax));
    let caveat = (distance > SAME_LAW).then(|| {
        format!(
            "initial susceptible degrees differ from the configuration-model law \
             (L1 distance {distance:.3e}); the one-variable reduction is not exact"
        )
    });

    let n_s0 = init.mu_s0.first_moment();
    let p_s0 = (n_s0 - init.mu_is0.first_moment() - init.mu_rs0.first_moment()) / n_s0;
    let p_r0 = init.mu_rs0.first_moment() / n_s0;
    let total = init.mu_s0.mass() + init.mu_is0.mass() + init.mu_rs0.mass();
    let (r, beta) = (rates.r, rates.beta);

    let phi_s = |theta: f64| p_s0 * psi.eval(theta, 1) / psi1;
    let row = |t: f64, y: &[f64]| -> LimitRow {
        let theta = y[0];
        let s = g.eval(theta, 0);
        let n_s = theta * g.eval(theta, 1);
        let p_s = phi_s(theta) / theta;
        let p_r = y[1] / theta;
        let p_i = 1.0 - p_s - p_r;
        LimitRow {
            t,
            s,
            i: total - s - y[2],
            r: y[2],
            n_s,
            n_is: p_i * n_s,
            n_rs: p_r * n_s,
            theta,
            p_i,
            p_s,
            p_r,
        }
    };

    let mut y = vec![1.0, p_r0, init.mu_rs0.mass()];
    let mut current = row(0.0, &y);
    let mut rows = vec![current];
    let mut rk = Rk4::new(3);
    let mut stop = LimitStop::HorizonReached;
    for step in 1..=cfg.steps() {
        if current.n_is < cfg.eps_is {
            stop = LimitStop::EdgeFloor;
            break;
        }
        let t0 = cfg.time_of(step - 1);
        let t1 = cfg.time_of(step);
        rk.step(t0, t1 - t0, &mut y, |_, y, dy| {
            let phi_i = y[0] - phi_s(y[0]) - y[1];
            dy[0] = -r * phi_i;
            dy[1] = beta * phi_i;
            dy[2] = beta * (total - g.eval(y[0], 0) - y[2]);
        });
        if !(y[0] > 0.0 && y[0] <= 1.0 + 1e-12) {
            return Err(Error::SolverDiagnostic(format!("θ = {} left (0, 1] at t = {t1}", y[0])));
        }
        current = row(t1, &y);
        if cfg.keep(step) || current.n_is < cfg.eps_is {
            rows.push(current);
        }
    }
    Ok(MillerSolution {
        trajectory: LimitTrajectory { rows, stop },
        caveat,
    })
}
