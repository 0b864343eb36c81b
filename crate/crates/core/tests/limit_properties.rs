//! Property tests of the limit solvers over random initial measures and rates.

use cmsir_core::epidemic_sim::Rates;
use cmsir_core::limit_odes::{
    miller_theta_ode, solve_measures, solve_volz, GeneratingFn, LimitInit, SolverConfig, VolzState,
};
use cmsir_core::measures::RealMeasure;
use proptest::prelude::*;

/// A degree law on `0..=K` with `K ≤ 12` and positive mean.
fn degree_law() -> impl Strategy<Value = RealMeasure> {
    prop::collection::vec(0.0f64..1.0, 2..14).prop_filter_map("needs edges", |mut w| {
        w[1] += 0.05;
        let total: f64 = w.iter().sum();
        RealMeasure::from_weights(w.iter().map(|x| x / total).collect()).ok()
    })
}

fn limit_init() -> impl Strategy<Value = LimitInit> {
    (degree_law(), 0.005f64..0.3, 0u8..3).prop_filter_map("valid init", |(p, x, kind)| match kind {
        0 => LimitInit::from_p_i0(&p, x).ok(),
        1 => LimitInit::uniform(&p, x).ok(),
        _ => LimitInit::size_biased(&p, x).ok(),
    })
}

fn rates() -> impl Strategy<Value = Rates> {
    (0.05f64..3.0, 0.05f64..2.0).prop_map(|(r, beta)| Rates { r, beta })
}

const CFG: SolverConfig = SolverConfig {
    dt: 1e-3,
    eps_is: 1e-6,
    t_max: 8.0,
    record_stride: 10,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn volz_trajectories_keep_their_invariants(init in limit_init(), rates in rates()) {
        let g = GeneratingFn::from_measure(&init.mu_s0).unwrap();
        let sol = solve_volz(&g, VolzState::initial(&init).unwrap(), rates, &CFG).unwrap();
        let first = sol.states[0];
        let total0 = first.s_integrated + first.i + first.r;
        let sum0 = first.p_s + first.p_i + first.p_r;
        let tol = 100.0 * CFG.dt.powi(4);
        for pair in sol.states.windows(2) {
            prop_assert!(pair[1].theta > 0.0 && pair[1].theta <= pair[0].theta + 1e-15);
            prop_assert!(pair[1].r >= pair[0].r - 1e-15);
        }
        for s in &sol.states {
            prop_assert!((s.p_s + s.p_i + s.p_r - sum0).abs() <= tol);
            prop_assert!((s.s_integrated - g.eval(s.theta, 0)).abs() <= tol);
            prop_assert!((s.s_integrated + s.i + s.r - total0).abs() <= tol);
            prop_assert!(s.n_is >= -tol && s.n_rs >= -tol);
        }
    }

    #[test]
    fn measure_system_matches_volz_and_stays_nonnegative(init in limit_init(), rates in rates()) {
        let g = GeneratingFn::from_measure(&init.mu_s0).unwrap();
        let volz = solve_volz(&g, VolzState::initial(&init).unwrap(), rates, &CFG).unwrap().trajectory(&g);
        let sol = solve_measures(&init, rates, &CFG).unwrap();
        let total0 = init.mu_s0.mass() + init.mu_is0.mass() + init.mu_rs0.mass();
        prop_assert!(sol.clamped_mass <= 1e-6 * total0);
        let measures = sol.trajectory();
        // Each solver stops on its own N_IS crossing the floor, so the
        // lengths can differ; compare the common prefix.
        for (a, b) in volz.rows.iter().zip(&measures.rows) {
            prop_assert!((a.i - b.i).abs() <= 1e-3, "I: {} vs {}", a.i, b.i);
            prop_assert!((a.p_i - b.p_i).abs() <= 1e-3);
            prop_assert!((a.theta - b.theta).abs() <= 1e-3);
            prop_assert!((b.s + b.i + b.r - total0).abs() <= 100.0 * CFG.dt.powi(4) + sol.clamped_mass, "mass drift {:e}", b.s + b.i + b.r - total0);
        }
        for state in &sol.states {
            prop_assert!(state.mu_is.weights().iter().all(|&w| w >= 0.0));
            prop_assert!(state.mu_rs.weights().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn miller_reduction_agrees_when_laws_match(p in degree_law(), p_i0 in 0.01f64..0.3, rates in rates()) {
        let init = LimitInit::from_p_i0(&p, p_i0).unwrap();
        let g = GeneratingFn::from_measure(&init.mu_s0).unwrap();
        let volz = solve_volz(&g, VolzState::initial(&init).unwrap(), rates, &CFG).unwrap().trajectory(&g);
        let miller = miller_theta_ode(&init, None, rates, &CFG).unwrap();
        prop_assert!(miller.caveat.is_none());
        let n = volz.rows.len().min(miller.trajectory.rows.len());
        for (a, b) in volz.rows[..n].iter().zip(&miller.trajectory.rows[..n]) {
            prop_assert!((a.s - b.s).abs() <= 1e-6);
            prop_assert!((a.i - b.i).abs() <= 1e-6);
            prop_assert!((a.theta - b.theta).abs() <= 1e-6);
        }
    }
}
