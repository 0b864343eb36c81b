//! Initial measures of the limit system.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::measures::RealMeasure;

/// `(μ̄^S_0, μ̄^IS_0, μ̄^RS_0)`, padded to a common truncation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitInit {
    #[serde(rename = "mu_S")]
    pub mu_s0: RealMeasure,
    #[serde(rename = "mu_IS")]
    pub mu_is0: RealMeasure,
    #[serde(rename = "mu_RS", default = "empty")]
    pub mu_rs0: RealMeasure,
}

fn empty() -> RealMeasure {
    RealMeasure::zeros(0)
}

fn check_fraction(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return config(format!("{name} must lie in (0, 1), got {x}"));
    }
    Ok(())
}

fn scaled_by(p: &RealMeasure, f: impl Fn(usize) -> f64) -> RealMeasure {
    let w = p.weights().iter().enumerate().map(|(k, &x)| x * f(k)).collect();
    RealMeasure::from_weights(w).expect("scaling keeps weights nonnegative")
}

impl LimitInit {
    pub fn new(mu_s0: RealMeasure, mu_is0: RealMeasure, mu_rs0: RealMeasure) -> Result<Self> {
        let init = Self { mu_s0, mu_is0, mu_rs0 };
        init.validate()?;
        Ok(init.padded())
    }

    /// A fraction `i0` of individuals, chosen independently of degree, is
    /// infectious with all its edges leading to susceptibles.
    pub fn uniform(p: &RealMeasure, i0: f64) -> Result<Self> {
        check_fraction("i0", i0)?;
        Self::new(p.scaled(1.0 - i0)?, p.scaled(i0)?, RealMeasure::zeros(p.kmax()))
    }

    /// Limit of drawing infectives one at a time proportionally to degree
    /// until a fraction `i0` is reached: degree `k` is infectious with
    /// probability `1 − e^{−ck}`, `c` fixed by the total `i0`.
    pub fn size_biased(p: &RealMeasure, i0: f64) -> Result<Self> {
        check_fraction("i0", i0)?;
        let positive: f64 = p.weights().iter().skip(1).sum();
        if positive <= i0 {
            return config(format!(
                "size-biased selection of {i0} needs more than that mass at positive degree, have {positive}"
            ));
        }
        let infected = |c: f64| -> f64 {
            p.weights()
                .iter()
                .enumerate()
                .map(|(k, &x)| x * -(-c * k as f64).exp_m1())
                .sum()
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while infected(hi) < i0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if infected(mid) < i0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c = 0.5 * (lo + hi);
        let frac = |k: usize| -(-c * k as f64).exp_m1();
        Self::new(
            scaled_by(p, |k| 1.0 - frac(k)),
            scaled_by(p, frac),
            RealMeasure::zeros(p.kmax()),
        )
    }

    /// Susceptible degrees follow `p` and a fraction `p_i0` of their edges
    /// lead to infectives; `μ̄^IS_0 = p_i0 · p`.
    pub fn from_p_i0(p: &RealMeasure, p_i0: f64) -> Result<Self> {
        check_fraction("pI0", p_i0)?;
        Self::new(p.clone(), p.scaled(p_i0)?, RealMeasure::zeros(p.kmax()))
    }

    /// Pairs the infectives' half-edges uniformly among all half-edges:
    /// each is kept with probability `1 − a`, `a` being the infective share
    /// of all half-edges, so `μ̄^IS_0` becomes a binomial thinning.
    pub fn with_paired_infectives(self) -> Result<Self> {
        let inf = self.mu_is0.first_moment();
        let total = inf + self.mu_s0.first_moment() + self.mu_rs0.first_moment();
        let keep = 1.0 - inf / total;
        let kmax = self.mu_is0.kmax() as usize;
        let mut thinned = vec![0.0; kmax + 1];
        for (k, &w) in self.mu_is0.weights().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            // Binomial(k, keep) pmf by the multiplicative recurrence.
            let mut pmf = (1.0 - keep).powi(k as i32);
            for (i, slot) in thinned.iter_mut().enumerate().take(k + 1) {
                *slot += w * pmf;
                if i < k {
                    pmf = if keep < 1.0 {
                        pmf * (k - i) as f64 / (i + 1) as f64 * keep / (1.0 - keep)
                    } else if i + 1 == k {
                        1.0
                    } else {
                        0.0
                    };
                }
            }
        }
        Self::new(self.mu_s0, RealMeasure::from_weights(thinned)?, self.mu_rs0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_s0.mass() > 0.0) {
            return config("initial susceptible measure is null");
        }
        if !(self.mu_is0.first_moment() > 0.0) {
            return config("initial infectious individuals have no edges to susceptibles");
        }
        let edges = self.mu_is0.first_moment() + self.mu_rs0.first_moment();
        if edges > self.mu_s0.first_moment() * (1.0 + 1e-12) {
            return config(format!(
                "edges from I and R ({edges}) exceed the susceptible half-edges ({})",
                self.mu_s0.first_moment()
            ));
        }
        Ok(())
    }

    fn padded(self) -> Self {
        let kmax = self.kmax();
        Self {
            mu_s0: self.mu_s0.with_kmax(kmax),
            mu_is0: self.mu_is0.with_kmax(kmax),
            mu_rs0: self.mu_rs0.with_kmax(kmax),
        }
    }

    pub fn kmax(&self) -> u32 {
        self.mu_s0.kmax().max(self.mu_is0.kmax()).max(self.mu_rs0.kmax())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(s).map_err(|e| Error::Config(format!("initial measures: {e}")))?;
        raw.validate()?;
        Ok(raw.padded())
    }
}
