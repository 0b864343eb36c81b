//! Draws of the types of a newly infected individual's other half-edges.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of successes when drawing `draws` items without replacement from
/// `population` items of which `successes` are marked.
///
/// Exact: one uniform integer per draw, over whichever of the draw or its
/// complement is shorter.
pub fn hypergeometric<R: Rng + ?Sized>(population: u64, successes: u64, draws: u64, rng: &mut R) -> u64 {
    assert!(successes <= population && draws <= population);
    if draws > population / 2 {
        return successes - hypergeometric(population, successes, population - draws, rng);
    }
    let mut pop = population;
    let mut succ = successes;
    let mut hits = 0;
    for _ in 0..draws {
        if succ == 0 {
            break;
        }
        if succ == pop {
            hits += draws - (population - pop);
            break;
        }
        if rng.random_range(0..pop) < succ {
            hits += 1;
            succ -= 1;
        }
        pop -= 1;
    }
    hits
}

/// Half-edge counts seen by an infection: `n_s` half-edges with susceptible
/// ego, of which `n_is` are paired with an infectious alter and `n_rs` with a
/// removed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgePool {
    pub n_s: u64,
    pub n_is: u64,
    pub n_rs: u64,
}

impl EdgePool {
    /// `SS` half-edges: susceptible ego whose alter is not yet determined.
    pub fn n_ss(&self) -> u64 {
        self.n_s - self.n_is - self.n_rs
    }
}

/// Draws `(j, ℓ)` for a newly infected individual of degree `k`.
///
/// The `k − 1` half-edges other than the contaminating one are drawn without
/// replacement from a pool of `n_s − 1` half-edges holding `n_is − 1` of type
/// `IS`, `n_rs` of type `RS` and the rest of type `SS`; `j` and `ℓ` count the
/// `IS` and `RS` draws. `j` is drawn first, then `ℓ` from the remaining
/// non-`IS` half-edges.
pub fn sample_jl<R: Rng + ?Sized>(k: u32, pool: EdgePool, rng: &mut R) -> Result<(u32, u32)> {
    if k == 0 {
        return Err(Error::InfeasibleDraw("infected individual has degree 0".into()));
    }
    if pool.n_is == 0 {
        return Err(Error::InfeasibleDraw("no IS half-edge to transmit through".into()));
    }
    if pool.n_is + pool.n_rs > pool.n_s {
        return Err(Error::StateCorruption(format!(
            "N^IS + N^RS = {} exceeds N^S = {}",
            pool.n_is + pool.n_rs,
            pool.n_s
        )));
    }
    let others = u64::from(k - 1);
    let population = pool.n_s - 1;
    if others > population {
        return Err(Error::InfeasibleDraw(format!(
            "cannot draw {others} half-edges from a pool of {population}"
        )));
    }
    let j = hypergeometric(population, pool.n_is - 1, others, rng);
    let l = hypergeometric(population - (pool.n_is - 1), pool.n_rs, others - j, rng);
    Ok((j as u32, l as u32))
}
