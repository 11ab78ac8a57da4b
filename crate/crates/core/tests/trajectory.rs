//! Trajectory-level invariants on randomly generated configurations.

use proptest::prelude::*;
use serde_json::json;

use thermistor_core::coupler::{fixed_point_residuals, phi0_boundary_sup, run_simulation, Forcing};
use thermistor_core::{parse_config, to_canonical_json};

fn arb_sigma() -> impl Strategy<Value = serde_json::Value> {
    prop_oneof![
        (0.2..5.0f64).prop_map(|v| json!({"kind": "constant", "value": v})),
        (0.1..2.0f64).prop_map(|r| json!({"kind": "exponential_decay", "rate": r})),
        (0.05..0.5f64, 0.1..1.0f64, 0.5..2.0f64, 0.5..2.0f64)
            .prop_map(|(c3, c0, b, g)| json!({"kind": "oscillatory_sine", "c3": c3, "c0": c0, "beta": b, "gamma": g})),
        (0.2..1.0f64, 1.0..3.0f64).prop_map(|(lo, hi)| {
            json!({"kind": "tabulated", "points": [[0.0, hi], [1.0, 0.5 * (lo + hi)], [5.0, lo], [50.0, lo]]})
        }),
    ]
}

prop_compose! {
    fn arb_config()(
        two_d in any::<bool>(),
        n in 7usize..15,
        sigma in arb_sigma(),
        a in -2.0..2.0f64,
        b in -1.0..1.0f64,
        c in 0.0..0.5f64,
        dt in 0.002..0.02f64,
        steps in 3usize..8,
    ) -> String {
        let grid = if two_d { json!({"dim": 2, "nx": n, "ny": n}) } else { json!({"dim": 1, "nx": 2 * n + 1}) };
        json!({
            "grid": grid,
            "sigma": sigma,
            "boundary": {
                "u0": format!("{c} * (1 + x * x) * exp(-t)"),
                "phi0": format!("{a} * x + {b} * sin(pi * y) + 0.1 * t"),
            },
            "time": {"dt": dt, "t_final": dt * steps as f64},
            "picard": {"tol": 1e-10},
        })
        .to_string()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trajectory_invariants(text in arb_config()) {
        let cfg = parse_config(&text).unwrap();
        let traj = run_simulation(&cfg).unwrap();
        let phi_bound = phi0_boundary_sup(&cfg.bdata, &cfg.grid, cfg.t_final).unwrap();
        for s in &traj.states {
            prop_assert!(s.u.min() >= -1e-12, "u min {}", s.u.min());
            prop_assert!(s.phi.max_abs() <= phi_bound + 1e-8);
        }
        for w in traj.states.windows(2) {
            let r = fixed_point_residuals(&w[0], &w[1], &cfg, &Forcing::default()).unwrap();
            prop_assert!(r.elliptic <= 10.0 * cfg.linear.tol, "{:?}", r);
            prop_assert!(r.heat <= 10.0 * cfg.picard_tol, "{:?}", r);
        }
        for r in &traj.reports {
            prop_assert!(r.joule_energy <= r.joule_energy_bc * (1.0 + 1e-8) + 1e-14);
        }
    }

    #[test]
    fn canonical_round_trip(text in arb_config()) {
        let once = to_canonical_json(&parse_config(&text).unwrap()).unwrap();
        let twice = to_canonical_json(&parse_config(&once).unwrap()).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn identical_configs_give_identical_trajectories(text in arb_config()) {
        let cfg = parse_config(&text).unwrap();
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        prop_assert_eq!(a.states, b.states);
    }
}
