//! Lower bound on the time the infectious edge mass needs to fall to `ε′`.

use crate::error::{config, Result};
use crate::measures::{Moments, RealMeasure};

/// `τ̄ = [ln(⟨μ̄^S_0, χ²⟩ + N̄^IS_0) − ln(⟨μ̄^S_0, χ²⟩ + ε′)] / max(β, r)`.
///
/// `+∞` when both rates vanish.
pub fn horizon_bound(mu0_s: &RealMeasure, n_is0: f64, eps_prime: f64, r: f64, beta: f64) -> Result<f64> {
    if !(eps_prime > 0.0 && eps_prime < n_is0) {
        return config(format!("need 0 < ε′ < N̄^IS_0, got ε′ = {eps_prime}, N̄^IS_0 = {n_is0}"));
    }
    let rate = beta.max(r);
    if rate <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let second = mu0_s.moment(2)?;
    Ok(((second + n_is0).ln() - (second + eps_prime).ln()) / rate)
}
