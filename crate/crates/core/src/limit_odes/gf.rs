//! Generating function of the initial susceptible degree measure.

use crate::error::{config, Result};
use crate::measures::RealMeasure;

/// `g(z) = Σ_k c_k z^k` with `c_k` the initial susceptible weight at degree `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingFn {
    coeffs: Vec<f64>,
}

impl GeneratingFn {
    pub fn from_measure(mu0: &RealMeasure) -> Result<Self> {
        let Some(top) = mu0.max_support() else {
            return config("generating function of an empty measure");
        };
        if !(mu0.mass() > 0.0) {
            return config("generating function of a null measure");
        }
        Ok(Self {
            coeffs: mu0.weights()[..=top as usize].to_vec(),
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn kmax(&self) -> u32 {
        (self.coeffs.len() - 1) as u32
    }

    /// `g(1)`.
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// The `order`-th derivative of `g` at `z`, by Horner's scheme on the
    /// differentiated coefficients.
    pub fn eval(&self, z: f64, order: u32) -> f64 {
        let d = order as usize;
        if d >= self.coeffs.len() {
            return 0.0;
        }
        let mut acc = 0.0;
        for k in (d..self.coeffs.len()).rev() {
            let falling: f64 = (0..d).map(|m| (k - m) as f64).product();
            acc = acc * z + falling * self.coeffs[k];
        }
        acc
    }
}
