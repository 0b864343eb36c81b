//! Degree distributions for the configuration model.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::measures::RealMeasure;

/// Tail mass below which a default truncation level is accepted.
pub const DEFAULT_TAIL_MASS: f64 = 1e-10;

const MAX_AUTO_KMAX: u32 = 100_000;

/// Degree law `(p_k)`, always supported on a finite range and renormalised
/// after truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeSpec {
    /// Weights per level; normalised on use.
    Explicit { weights: BTreeMap<u32, f64> },
    /// Poisson with mean `lambda`, truncated at `kmax`.
    Poisson { lambda: f64, kmax: u32 },
    /// `p_k ∝ q (1 − q)^k` for `k ≥ 0`, truncated at `kmax`.
    Geometric { q: f64, kmax: u32 },
    /// `p_k ∝ k^{−alpha}` on `kmin..=kmax`.
    PowerLaw { alpha: f64, kmin: u32, kmax: u32 },
}

impl DegreeSpec {
    pub fn explicit<I: IntoIterator<Item = (u32, f64)>>(weights: I) -> Self {
        DegreeSpec::Explicit {
            weights: weights.into_iter().collect(),
        }
    }

    /// Poisson truncated at the smallest level whose tail mass is below
    /// [`DEFAULT_TAIL_MASS`].
    pub fn poisson_auto(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return config(format!("poisson mean must be positive, got {lambda}"));
        }
        let kmax = auto_kmax(|k| poisson_ln_pmf(lambda, k))?;
        Ok(DegreeSpec::Poisson { lambda, kmax })
    }

    pub fn geometric_auto(q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return config(format!("geometric parameter must lie in (0, 1], got {q}"));
        }
        let kmax = auto_kmax(|k| q.ln() + k as f64 * (1.0 - q).ln())?;
        Ok(DegreeSpec::Geometric { q, kmax })
    }

    pub fn kmax(&self) -> u32 {
        match self {
            DegreeSpec::Explicit { weights } => weights.keys().next_back().copied().unwrap_or(0),
            DegreeSpec::Poisson { kmax, .. }
            | DegreeSpec::Geometric { kmax, .. }
            | DegreeSpec::PowerLaw { kmax, .. } => *kmax,
        }
    }

    /// Same law truncated (or extended, for parametric laws) at `kmax`.
    pub fn with_kmax(self, kmax: u32) -> Self {
        match self {
            DegreeSpec::Explicit { mut weights } => {
                weights.retain(|&k, _| k <= kmax);
                DegreeSpec::Explicit { weights }
            }
            DegreeSpec::Poisson { lambda, .. } => DegreeSpec::Poisson { lambda, kmax },
            DegreeSpec::Geometric { q, .. } => DegreeSpec::Geometric { q, kmax },
            DegreeSpec::PowerLaw { alpha, kmin, .. } => DegreeSpec::PowerLaw { alpha, kmin, kmax },
        }
    }

    /// Normalised probabilities on `0..=kmax`.
    pub fn pmf(&self) -> Result<Vec<f64>> {
        let kmax = self.kmax();
        let raw: Vec<f64> = match self {
            DegreeSpec::Explicit { weights } => {
                if weights.is_empty() {
                    return config("explicit degree distribution has no levels");
                }
                let mut w = vec![0.0; kmax as usize + 1];
                for (&k, &p) in weights {
                    if !(p >= 0.0 && p.is_finite()) {
                        return config(format!("weight {p} at degree {k} is not a nonnegative number"));
                    }
                    w[k as usize] = p;
                }
                w
            }
            DegreeSpec::Poisson { lambda, .. } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return config(format!("poisson mean must be positive, got {lambda}"));
                }
                // Shift by the log of the mode term to avoid underflow for large means.
                let ln: Vec<f64> = (0..=kmax).map(|k| poisson_ln_pmf(*lambda, k)).collect();
                let top = ln.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                ln.iter().map(|l| (l - top).exp()).collect()
            }
            DegreeSpec::Geometric { q, .. } => {
                if !(*q > 0.0 && *q <= 1.0) {
                    return config(format!("geometric parameter must lie in (0, 1], got {q}"));
                }
                (0..=kmax).map(|k| (1.0 - q).powi(k as i32)).collect()
            }
            DegreeSpec::PowerLaw { alpha, kmin, kmax } => {
                if *kmin == 0 || kmin > kmax {
                    return config(format!("power law needs 1 <= kmin <= kmax, got {kmin}..{kmax}"));
                }
                if !alpha.is_finite() {
                    return config("power-law exponent must be finite");
                }
                (0..=*kmax)
                    .map(|k| if k < *kmin { 0.0 } else { (k as f64).powf(-alpha) })
                    .collect()
            }
        };
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return config("degree distribution has zero total weight");
        }
        let pmf: Vec<f64> = raw.into_iter().map(|w| w / total).collect();
        if pmf.iter().skip(1).all(|&p| p == 0.0) {
            return config("degree distribution puts all its mass on degree 0");
        }
        Ok(pmf)
    }

    pub fn as_measure(&self) -> Result<RealMeasure> {
        RealMeasure::from_weights(self.pmf()?)
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(self.pmf()?.iter().enumerate().map(|(k, p)| k as f64 * p).sum())
    }
}

fn poisson_ln_pmf(lambda: f64, k: u32) -> f64 {
    let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    -lambda + k as f64 * lambda.ln() - ln_fact
}

/// Smallest `K` such that the (unnormalised) mass strictly above `K` is below
/// the tail threshold.
fn auto_kmax(ln_pmf: impl Fn(u32) -> f64) -> Result<u32> {
    let mut below = 0.0;
    for k in 0..MAX_AUTO_KMAX {
        below += ln_pmf(k).exp();
        if 1.0 - below < DEFAULT_TAIL_MASS {
            return Ok(k);
        }
    }
    config("could not find a truncation level; pass kmax explicitly")
}

/// `Σ_k (k − 1) k p_k / Σ_ℓ ℓ p_ℓ`; the configuration model has a giant
/// component when this exceeds 1.
pub fn r0_criterion(spec: &DegreeSpec) -> Result<f64> {
    let pmf = spec.pmf()?;
    let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    if mean <= 0.0 {
        return config("mean degree is zero");
    }
    let num: f64 = pmf
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 - 1.0) * k as f64 * p)
        .sum();
    Ok(num / mean)
}

/// `n` i.i.d. degrees.
pub fn sample_degrees<R: Rng + ?Sized>(spec: &DegreeSpec, n: usize, rng: &mut R) -> Result<Vec<u32>> {
    if n == 0 {
        return config("population size must be at least 1");
    }
    let pmf = spec.pmf()?;
    let dist = WeightedIndex::new(&pmf).map_err(|e| Error::Config(e.to_string()))?;
    Ok((0..n).map(|_| dist.sample(rng) as u32).collect())
}

impl fmt::Display for DegreeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreeSpec::Explicit { weights } => {
                let parts: Vec<String> = weights.iter().map(|(k, w)| format!("{k}={w}")).collect();
                write!(f, "explicit:{}", parts.join(","))
            }
            DegreeSpec::Poisson { lambda, kmax } => write!(f, "poisson:{lambda}:{kmax}"),
            DegreeSpec::Geometric { q, kmax } => write!(f, "geometric:{q}:{kmax}"),
            DegreeSpec::PowerLaw { alpha, kmin, kmax } => write!(f, "powerlaw:{alpha}:{kmin}:{kmax}"),
        }
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("cannot parse {what} from {s:?}")))
}

/// Parses `poisson:λ[:kmax]`, `geometric:q[:kmax]`, `powerlaw:α:kmin:kmax`,
/// `explicit:k=w,k=w,…` and `file:<path.json>` (a `{"level": weight}` object).
impl FromStr for DegreeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let params: Vec<&str> = if rest.is_empty() {
            vec![]
        } else {
            rest.split(':').collect()
        };
        match (name, params.as_slice()) {
            ("poisson", [l]) => DegreeSpec::poisson_auto(parse_num(l, "poisson mean")?),
            ("poisson", [l, k]) => Ok(DegreeSpec::Poisson {
                lambda: parse_num(l, "poisson mean")?,
                kmax: parse_num(k, "kmax")?,
            }),
            ("geometric", [q]) => DegreeSpec::geometric_auto(parse_num(q, "geometric parameter")?),
            ("geometric", [q, k]) => Ok(DegreeSpec::Geometric {
                q: parse_num(q, "geometric parameter")?,
                kmax: parse_num(k, "kmax")?,
            }),
            ("powerlaw", [a, lo, hi]) => Ok(DegreeSpec::PowerLaw {
                alpha: parse_num(a, "power-law exponent")?,
                kmin: parse_num(lo, "kmin")?,
                kmax: parse_num(hi, "kmax")?,
            }),
            ("explicit", [body]) => {
                let mut weights = BTreeMap::new();
                for item in body.split(',') {
                    let (k, w) = item
                        .split_once('=')
                        .ok_or_else(|| Error::Config(format!("expected level=weight, got {item:?}")))?;
                    weights.insert(parse_num(k, "level")?, parse_num(w, "weight")?);
                }
                Ok(DegreeSpec::Explicit { weights })
            }
            ("file", _) if !rest.is_empty() => DegreeSpec::from_json_file(Path::new(rest)),
            _ => config(format!(
                "unrecognised degree spec {s:?}; expected poisson:λ[:kmax], geometric:q[:kmax], \
                 powerlaw:α:kmin:kmax, explicit:k=w,… or file:<path>"
            )),
        }
    }
}

impl DegreeSpec {
    /// Reads a `{"level": weight}` JSON object (a `"kmax"` key is ignored).
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let raw: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut weights = BTreeMap::new();
        for (key, value) in raw {
            if key == "kmax" {
                continue;
            }
            let k: u32 = parse_num(&key, "level")?;
            let w = value
                .as_f64()
                .ok_or_else(|| Error::Config(format!("weight for level {k} is not a number")))?;
            weights.insert(k, w);
        }
        Ok(DegreeSpec::Explicit { weights })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn deterministic_distribution() {
        let spec = DegreeSpec::explicit([(2, 1.0)]);
        let mut rng = rng_from_seed(1);
        assert_eq!(sample_degrees(&spec, 5, &mut rng).unwrap(), vec![2; 5]);
    }

    #[test]
    fn poisson_sample_mean() {
        let spec = DegreeSpec::Poisson { lambda: 5.0, kmax: 30 };
        let mut rng = rng_from_seed(2);
        let d = sample_degrees(&spec, 100_000, &mut rng).unwrap();
        let mean = d.iter().map(|&k| k as f64).sum::<f64>() / d.len() as f64;
        assert!((4.9..=5.1).contains(&mean), "mean {mean}");
    }

    #[test]
    fn power_law_support() {
        let spec = DegreeSpec::PowerLaw {
            alpha: 2.5,
            kmin: 1,
            kmax: 100,
        };
        let mut rng = rng_from_seed(3);
        for _ in 0..100 {
            let k = sample_degrees(&spec, 1, &mut rng).unwrap()[0];
            assert!((1..=100).contains(&k));
        }
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let mut rng = rng_from_seed(4);
        assert!(sample_degrees(&DegreeSpec::explicit([(0, 1.0)]), 3, &mut rng).is_err());
        assert!(sample_degrees(&DegreeSpec::explicit([(2, 1.0)]), 0, &mut rng).is_err());
        assert!(DegreeSpec::explicit([]).pmf().is_err());
        assert!(DegreeSpec::PowerLaw {
            alpha: 2.0,
            kmin: 0,
            kmax: 10
        }
        .pmf()
        .is_err());
    }

    #[test]
    fn kmax_override() {
        let p = DegreeSpec::poisson_auto(5.0).unwrap().with_kmax(60);
        assert_eq!(p, DegreeSpec::Poisson { lambda: 5.0, kmax: 60 });
        let e = DegreeSpec::explicit([(1, 0.5), (4, 0.5)]).with_kmax(3);
        assert_eq!(e.pmf().unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn r0_examples() {
        assert_eq!(r0_criterion(&DegreeSpec::explicit([(2, 1.0)])).unwrap(), 1.0);
        assert_eq!(r0_criterion(&DegreeSpec::explicit([(1, 1.0)])).unwrap(), 0.0);
        let r0 = r0_criterion(&DegreeSpec::Poisson { lambda: 5.0, kmax: 200 }).unwrap();
        assert!((r0 - 5.0).abs() < 1e-9, "{r0}");
        assert!(r0_criterion(&DegreeSpec::explicit([(0, 1.0)])).is_err());
    }

    #[test]
    fn parse_mini_grammar() {
        assert_eq!(
            "poisson:5:30".parse::<DegreeSpec>().unwrap(),
            DegreeSpec::Poisson { lambda: 5.0, kmax: 30 }
        );
        assert_eq!(
            "powerlaw:2.5:1:100".parse::<DegreeSpec>().unwrap(),
            DegreeSpec::PowerLaw {
                alpha: 2.5,
                kmin: 1,
                kmax: 100
            }
        );
        assert_eq!(
            "explicit:1=0.5,3=0.5".parse::<DegreeSpec>().unwrap(),
            DegreeSpec::explicit([(1, 0.5), (3, 0.5)])
        );
        assert!("poisson".parse::<DegreeSpec>().is_err());
        assert!("cauchy:1".parse::<DegreeSpec>().is_err());
        for s in [
            "poisson:5:30",
            "geometric:0.2:40",
            "powerlaw:2.5:1:100",
            "explicit:1=0.5,3=0.5",
        ] {
            let spec: DegreeSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<DegreeSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn automatic_truncation_has_small_tail() {
        let spec = DegreeSpec::poisson_auto(5.0).unwrap();
        let kmax = spec.kmax();
        let tail: f64 = (kmax + 1..kmax + 200).map(|k| poisson_ln_pmf(5.0, k).exp()).sum();
        assert!(tail < DEFAULT_TAIL_MASS);
        let shorter: f64 = (kmax..kmax + 200).map(|k| poisson_ln_pmf(5.0, k).exp()).sum();
        assert!(shorter >= DEFAULT_TAIL_MASS);
    }

    #[test]
    fn file_spec_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deg.json");
        std::fs::write(&path, r#"{"1": 0.25, "4": 0.75}"#).unwrap();
        let spec: DegreeSpec = format!("file:{}", path.display()).parse().unwrap();
        assert_eq!(spec, DegreeSpec::explicit([(1, 0.25), (4, 0.75)]));
    }
}
