use emenclose::config::parse_config;
use emenclose::enclosure::{sweep, Outcome, SweepConfig};
use emenclose::medium::ObstacleShape;
use emenclose::pipeline::build_impedance;
use emenclose::vec3::dot;
use proptest::prelude::*;

#[test]
fn translated_obstacle_shifts_the_support_estimates() {
    let cfg = parse_config("mesh.n = 16\nsweep.directions = \"axes-diagonals\"").unwrap();
    let shift = [0.125, 0.0, -0.125];
    let moved = cfg.geometry.with_obstacle(ObstacleShape::AxisBox { lo: [-0.125, -0.25, -0.375], hi: [0.375, 0.25, 0.125] });
    let sc = SweepConfig { directions: cfg.sweep.directions[..6].to_vec(), ..cfg.sweep.clone() };
    let base = sweep(&build_impedance(&cfg, &cfg.geometry, 16).unwrap(), &sc).unwrap();
    let other = sweep(&build_impedance(&cfg, &moved, 16).unwrap(), &sc).unwrap();
    for (a, b) in base.entries.iter().zip(&other.entries) {
        let (ha, hb) = (a.h_hat().unwrap(), b.h_hat().unwrap());
        let expect = ha + dot(shift, a.rho);
        assert!((hb - expect).abs() <= a.tolerance, "rho {:?}: {hb} vs {expect}", a.rho);
        assert!(matches!(b.outcome, Outcome::Estimate(_)));
    }
}

proptest! {
    #[test]
    fn tau_grid_order_is_enforced(mut taus in prop::collection::vec(0.1f64..50.0, 3..7)) {
        let text = |t: &[f64]| format!("sweep.tau_grid = [{}]", t.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "));
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        prop_assume!(taus.len() >= 3);
        let parsed = parse_config(&text(&taus)).unwrap();
        prop_assert_eq!(&parsed.sweep.tau_grid, &taus);
        taus.reverse();
        let err = parse_config(&text(&taus)).unwrap_err().to_string();
        prop_assert!(err.contains("tau_grid strictly increasing"));
    }

    #[test]
    fn fibonacci_directions_are_unit_and_accepted(n in 1usize..200) {
        let cfg = parse_config(&format!("sweep.directions = {n}")).unwrap();
        prop_assert_eq!(cfg.sweep.directions.len(), n);
        for d in &cfg.sweep.directions {
            prop_assert!((dot(*d, *d) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let default = std::fs::read_to_string(dir.join("default.toml")).unwrap();
    assert_eq!(parse_config(&default).unwrap(), emenclose::config::RunConfig::default());
    for name in ["quick.toml", "empty.toml", "soft_ball.toml"] {
        parse_config(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap();
    }
}
