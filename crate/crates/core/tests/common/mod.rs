//! Oracles shared by the integration tests. Everything here is computed
//! independently of the library's samplers and solvers.

#![allow(dead_code)]

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Exact binomial coefficient as f64 (small arguments).
pub fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
}

/// Law of `(j, ℓ)`: draw `k − 1` half-edges without replacement from a pool
/// of `n_s − 1` holding `n_is − 1` IS, `n_rs` RS and the rest SS.
pub fn jl_law(k: u64, n_s: u64, n_is: u64, n_rs: u64) -> BTreeMap<(u32, u32), f64> {
    let pool = n_s - 1;
    let is = n_is - 1;
    let ss = pool - is - n_rs;
    let draws = k - 1;
    let total = binom(pool, draws);
    let mut law = BTreeMap::new();
    for j in 0..=draws.min(is) {
        for l in 0..=(draws - j).min(n_rs) {
            let m = draws - j - l;
            if m > ss {
                continue;
            }
            let p = binom(is, j) * binom(n_rs, l) * binom(ss, m) / total;
            if p > 0.0 {
                law.insert((j as u32, l as u32), p);
            }
        }
    }
    law
}

/// Law of the allocation of `n_draw` half-edges drawn uniformly without
/// replacement from a roster: `Π_i C(c_i, u_i) / C(Σc, n_draw)`.
pub fn allocation_law(counts: &[u32], n_draw: u32) -> BTreeMap<Vec<u32>, f64> {
    let total: u32 = counts.iter().sum();
    let denom = binom(u64::from(total), u64::from(n_draw));
    let mut law = BTreeMap::new();
    let mut u = vec![0u32; counts.len()];
    fn rec(i: usize, left: u32, counts: &[u32], u: &mut Vec<u32>, denom: f64, law: &mut BTreeMap<Vec<u32>, f64>) {
        if i == counts.len() {
            if left == 0 {
                let p: f64 = counts
                    .iter()
                    .zip(u.iter())
                    .map(|(&c, &x)| binom(u64::from(c), u64::from(x)))
                    .product();
                law.insert(u.clone(), p / denom);
            }
            return;
        }
        for x in 0..=counts[i].min(left) {
            u[i] = x;
            rec(i + 1, left - x, counts, u, denom, law);
        }
        u[i] = 0;
    }
    rec(0, n_draw, counts, &mut u, denom, &mut law);
    law
}

/// Pearson statistic and degrees of freedom of observed counts against a law.
/// Observations outside the law's support make the statistic infinite.
pub fn pearson<K: Ord>(observed: &BTreeMap<K, u64>, law: &BTreeMap<K, f64>, draws: u64) -> (f64, usize) {
    if observed.keys().any(|k| !law.contains_key(k)) {
        return (f64::INFINITY, law.len().saturating_sub(1));
    }
    let stat = law
        .iter()
        .map(|(k, &p)| {
            let e = p * draws as f64;
            let o = *observed.get(k).unwrap_or(&0) as f64;
            (o - e).powi(2) / e
        })
        .sum();
    (stat, law.len() - 1)
}

/// Upper tail probability of a chi-square statistic.
pub fn chi_square_p(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return if stat == 0.0 { 1.0 } else { 0.0 };
    }
    if !stat.is_finite() {
        return 0.0;
    }
    1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
}

/// Binomial pmf by exact log-gamma free recurrence.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| binom(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
        .collect()
}

/// Goodness of fit of integer samples to a pmf, merging tail cells until
/// each expected count is at least 5. Returns `(statistic, df, p-value)`.
pub fn gof_integer(samples: &[u64], pmf: &[f64]) -> (f64, usize, f64) {
    let m = samples.len() as f64;
    let mut counts = vec![0u64; pmf.len()];
    for &s in samples {
        counts[s as usize] += 1;
    }
    // Greedy left-to-right binning; the last bin absorbs any short remainder.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut e, mut o) = (0.0, 0.0);
    for (k, &p) in pmf.iter().enumerate() {
        e += p * m;
        o += counts[k] as f64;
        if e >= 5.0 {
            bins.push((o, e));
            e = 0.0;
            o = 0.0;
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += o;
        last.1 += e;
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = bins.len() - 1;
    (stat, df, chi_square_p(stat, df))
}

/// Eq. (6) influx at level `i`, summed term by term over `(j, ℓ)`:
/// `Σ (i+j+ℓ+1) μ(i+j+ℓ+1) (i+j+ℓ)!/(i! j! ℓ!) pS^i pI^j pR^ℓ`.
pub fn influx_double_sum(mu: &[f64], p_s: f64, p_i: f64, p_r: f64, i: usize) -> f64 {
    let fact = |n: usize| (1..=n).map(|x| x as f64).product::<f64>();
    let mut total = 0.0;
    for j in 0..mu.len() {
        for l in 0..mu.len() {
            let k = i + j + l + 1;
            if k >= mu.len() {
                continue;
            }
            let multinomial = fact(i + j + l) / (fact(i) * fact(j) * fact(l));
            total += k as f64 * mu[k] * multinomial * p_s.powi(i as i32) * p_i.powi(j as i32) * p_r.powi(l as i32);
        }
    }
    total
}
