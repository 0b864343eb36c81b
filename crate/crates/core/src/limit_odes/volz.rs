//! Volz's closed scalar system.

use serde::{Deserialize, Serialize};

use super::gf::GeneratingFn;
use super::init::LimitInit;
use super::rk4::Rk4;
use super::{LimitRow, LimitStop, LimitTrajectory, SolverConfig};
use crate::epidemic_sim::Rates;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolzState {
    pub t: f64,
    pub theta: f64,
    pub p_s: f64,
    pub p_i: f64,
    pub p_r: f64,
    /// `S̄` integrated from `dS̄ = −r pI θ g′(θ)`, kept to check `S̄ = g(θ)`.
    pub s_integrated: f64,
    pub i: f64,
    pub r: f64,
    pub n_is: f64,
    pub n_rs: f64,
}

/// Time derivative of every integrated component of [`VolzState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolzDerivative {
    pub theta: f64,
    pub p_s: f64,
    pub p_i: f64,
    pub p_r: f64,
    pub s: f64,
    pub i: f64,
    pub r: f64,
    pub n_is: f64,
    pub n_rs: f64,
}

const DIM: usize = 9;

impl VolzState {
    pub fn initial(init: &LimitInit) -> Result<Self> {
        init.validate()?;
        let n_s = init.mu_s0.first_moment();
        let n_is = init.mu_is0.first_moment();
        let n_rs = init.mu_rs0.first_moment();
        Ok(Self {
            t: 0.0,
            theta: 1.0,
            p_s: (n_s - n_is - n_rs) / n_s,
            p_i: n_is / n_s,
            p_r: n_rs / n_s,
            s_integrated: init.mu_s0.mass(),
            i: init.mu_is0.mass(),
            r: init.mu_rs0.mass(),
            n_is,
            n_rs,
        })
    }

    fn to_array(self) -> [f64; DIM] {
        [
            self.theta,
            self.p_s,
            self.p_i,
            self.p_r,
            self.s_integrated,
            self.i,
            self.r,
            self.n_is,
            self.n_rs,
        ]
    }

    fn from_slice(t: f64, y: &[f64]) -> Self {
        Self {
            t,
            theta: y[0],
            p_s: y[1],
            p_i: y[2],
            p_r: y[3],
            s_integrated: y[4],
            i: y[5],
            r: y[6],
            n_is: y[7],
            n_rs: y[8],
        }
    }

    pub fn row(&self, g: &GeneratingFn) -> LimitRow {
        LimitRow {
            t: self.t,
            s: g.eval(self.theta, 0),
            i: self.i,
            r: self.r,
            n_s: self.theta * g.eval(self.theta, 1),
            n_is: self.n_is,
            n_rs: self.n_rs,
            theta: self.theta,
            p_i: self.p_i,
            p_s: self.p_s,
            p_r: self.p_r,
        }
    }
}

/// Right-hand side of the system.
///
/// `dpR` carries `+ r pI pR`: differentiating `pR = N̄^RS / N̄^S` with
/// `N̄^S = θ g′(θ)` gives that sign, and it is the one that keeps
/// `pS + pI + pR` constant.
pub fn volz_rhs(state: &VolzState, g: &GeneratingFn, rates: Rates) -> Result<VolzDerivative> {
    let (r, beta) = (rates.r, rates.beta);
    let theta = state.theta;
    let g1 = g.eval(theta, 1);
    let g2 = g.eval(theta, 2);
    if !(g1 > 0.0) {
        return Err(Error::Singularity(format!(
            "g'({theta}) = {g1}: degenerate degree distribution"
        )));
    }
    let (p_s, p_i, p_r) = (state.p_s, state.p_i, state.p_r);
    let ratio = theta * g2 / g1;
    let force = r * p_i;
    Ok(VolzDerivative {
        theta: -force * theta,
        p_s: force * p_s * (1.0 - ratio),
        p_i: force * p_s * ratio - force * (1.0 - p_i) - beta * p_i,
        p_r: beta * p_i + force * p_r,
        s: -force * theta * g1,
        i: force * theta * g1 - beta * state.i,
        r: beta * state.i,
        n_is: force * ((p_s - p_i) * theta * theta * g2 - theta * g1) - beta * state.n_is,
        n_rs: beta * state.n_is - r * p_r * p_i * theta * theta * g2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolzSolution {
    pub states: Vec<VolzState>,
    pub stop: LimitStop,
}

impl VolzSolution {
    pub fn trajectory(&self, g: &GeneratingFn) -> LimitTrajectory {
        LimitTrajectory {
            rows: self.states.iter().map(|s| s.row(g)).collect(),
            stop: self.stop,
        }
    }
}

/// Integrates from `init` with RK4 until `cfg.t_max` or until `N̄^IS`
/// drops below `cfg.eps_is`.
///
/// After every step `|pS + pI + pR − 1|` is checked against
/// `10 dt⁴` plus a round-off allowance growing with the step count.
pub fn solve_volz(g: &GeneratingFn, init: VolzState, rates: Rates, cfg: &SolverConfig) -> Result<VolzSolution> {
    cfg.validate()?;
    rates.validate()?;
    let steps = cfg.steps();
    let mut y = init.to_array();
    let mut states = vec![VolzState::from_slice(0.0, &y)];
    let mut failure: Option<Error> = None;
    let mut rk = Rk4::new(DIM);
    let mut stop = LimitStop::HorizonReached;
    let sum0 = init.p_s + init.p_i + init.p_r;

    for step in 1..=steps {
        if y[7] < cfg.eps_is {
            stop = LimitStop::EdgeFloor;
            break;
        }
        let t0 = cfg.time_of(step - 1);
        let t1 = cfg.time_of(step);
        rk.step(t0, t1 - t0, &mut y, |t, y, dy| {
            match volz_rhs(&VolzState::from_slice(t, y), g, rates) {
                Ok(d) => dy.copy_from_slice(&[d.theta, d.p_s, d.p_i, d.p_r, d.s, d.i, d.r, d.n_is, d.n_rs]),
                Err(e) => {
                    failure.get_or_insert(e);
                    dy.fill(0.0);
                }
            }
        });
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let tol = 10.0 * cfg.dt.powi(4) + 64.0 * step as f64 * f64::EPSILON;
        let drift = (y[1] + y[2] + y[3] - sum0).abs();
        if drift > tol {
            return Err(Error::SolverDiagnostic(format!(
                "pS + pI + pR drifted by {drift:e} at t = {t1} (tolerance {tol:e})"
            )));
        }
        let prev_theta = states.last().map_or(1.0, |s| s.theta);
        if !(y[0] > 0.0) || y[0] > prev_theta + tol {
            return Err(Error::SolverDiagnostic(format!(
                "θ = {} left (0, 1] or increased at t = {t1}",
                y[0]
            )));
        }
        if cfg.keep(step) || y[7] < cfg.eps_is {
            states.push(VolzState::from_slice(t1, &y));
        }
    }
    Ok(VolzSolution { states, stop })
}

/// Checks of the edge-count identities at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeIdentities {
    /// `N̄^S = θ g′(θ)`.
    pub n_s: f64,
    /// `|Σ_k k μ̄^S_0(k) θ^k − θ g′(θ)|`.
    pub n_s_residual: f64,
    /// `|N̄^IS − pI θ g′(θ)|`, with `N̄^IS` integrated from its own equation.
    pub n_is_residual: f64,
    /// `|N̄^RS − pR θ g′(θ)|`, with `N̄^RS` integrated from its own equation.
    pub n_rs_residual: f64,
}

pub fn edge_identities(state: &VolzState, g: &GeneratingFn) -> EdgeIdentities {
    let theta = state.theta;
    let n_s = theta * g.eval(theta, 1);
    let mut power = 1.0;
    let mut direct = 0.0;
    for (k, c) in g.coeffs().iter().enumerate() {
        direct += k as f64 * c * power;
        power *= theta;
    }
    EdgeIdentities {
        n_s,
        n_s_residual: (direct - n_s).abs(),
        n_is_residual: (state.n_is - state.p_i * n_s).abs(),
        n_rs_residual: (state.n_rs - state.p_r * n_s).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::RealMeasure;

    fn regular2() -> (GeneratingFn, LimitInit) {
        let p = RealMeasure::from_weights(vec![0.0, 0.0, 1.0]).unwrap();
        (
            GeneratingFn::from_measure(&p).unwrap(),
            LimitInit::from_p_i0(&p, 0.05).unwrap(),
        )
    }

    fn rates(r: f64, beta: f64) -> Rates {
        Rates { r, beta }
    }

    #[test]
    fn no_infection_pressure() {
        let (g, init) = regular2();
        let mut st = VolzState::initial(&init).unwrap();
        st.p_i = 0.0;
        st.p_s = 1.0;
        let d = volz_rhs(&st, &g, rates(1.0, 0.5)).unwrap();
        assert_eq!((d.theta, d.p_s, d.p_i, d.p_r, d.s), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(d.i, -0.5 * st.i);
        assert_eq!(d.r, 0.5 * st.i);
    }

    #[test]
    fn proportions_are_conserved_by_the_drift() {
        let (g, init) = regular2();
        let mut st = VolzState::initial(&init).unwrap();
        st.theta = 0.8;
        st.p_r = 0.1;
        st.p_s = 1.0 - st.p_i - st.p_r;
        let d = volz_rhs(&st, &g, rates(1.3, 0.7)).unwrap();
        assert!((d.p_s + d.p_i + d.p_r).abs() < 1e-15);
    }

    #[test]
    fn zero_infection_rate_gives_exponential_decay() {
        let (g, init) = regular2();
        let st = VolzState::initial(&init).unwrap();
        let cfg = SolverConfig {
            t_max: 2.0,
            ..SolverConfig::default()
        };
        let sol = solve_volz(&g, st, rates(0.0, 0.5), &cfg).unwrap();
        for s in &sol.states {
            assert_eq!(s.theta, 1.0);
            assert!((s.i - st.i * (-0.5 * s.t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn regular_graph_keeps_s_equal_to_theta_squared() {
        let (g, init) = regular2();
        let cfg = SolverConfig {
            t_max: 10.0,
            ..SolverConfig::default()
        };
        let sol = solve_volz(&g, VolzState::initial(&init).unwrap(), rates(1.0, 0.5), &cfg).unwrap();
        for s in &sol.states {
            assert!((s.s_integrated - s.theta * s.theta).abs() < 1e-8);
            let id = edge_identities(s, &g);
            assert!(id.n_is_residual < 1e-8 && id.n_rs_residual < 1e-8);
        }
    }

    #[test]
    fn chain_rule_matches_finite_difference() {
        let p = RealMeasure::from_weights(vec![0.0, 0.2, 0.3, 0.5]).unwrap();
        let g = GeneratingFn::from_measure(&p).unwrap();
        let init = LimitInit::uniform(&p, 0.05).unwrap();
        let st = VolzState::initial(&init).unwrap();
        let d = volz_rhs(&st, &g, rates(1.0, 0.5)).unwrap();
        let h = 1e-6;
        let fd = (g.eval(st.theta + h * d.theta, 0) - g.eval(st.theta, 0)) / h;
        assert!((fd - d.s).abs() < 1e-6, "{fd} vs {}", d.s);
    }

    #[test]
    fn identities_at_time_zero() {
        let (g, init) = regular2();
        let st = VolzState::initial(&init).unwrap();
        let id = edge_identities(&st, &g);
        assert_eq!(id.n_s, 2.0);
        let half = VolzState { theta: 0.5, ..st };
        assert_eq!(edge_identities(&half, &g).n_s, 0.5);
    }

    #[test]
    fn stops_on_the_edge_floor() {
        let (g, init) = regular2();
        let mut st = VolzState::initial(&init).unwrap();
        st.p_i = 0.0;
        st.p_s = 1.0;
        st.n_is = 0.0;
        let sol = solve_volz(&g, st, rates(1.0, 0.5), &SolverConfig::default()).unwrap();
        assert_eq!(sol.stop, LimitStop::EdgeFloor);
        assert!(sol.states.iter().all(|s| s.theta == 1.0));
        assert!(sol.trajectory(&g).rows.iter().all(|r| r.s == 1.0));
    }

    #[test]
    fn singular_generating_function() {
        let g = GeneratingFn::from_measure(&RealMeasure::from_weights(vec![1.0]).unwrap()).unwrap();
        let st = VolzState {
            t: 0.0,
            theta: 1.0,
            p_s: 0.9,
            p_i: 0.1,
            p_r: 0.0,
            s_integrated: 1.0,
            i: 0.1,
            r: 0.0,
            n_is: 0.1,
            n_rs: 0.0,
        };
        assert!(matches!(volz_rhs(&st, &g, rates(1.0, 1.0)), Err(Error::Singularity(_))));
    }
}
