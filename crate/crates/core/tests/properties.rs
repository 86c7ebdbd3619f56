use proptest::prelude::*;

use qwalk_core::coeffs::WalkSpec;
use qwalk_core::estimators::heisenberg_check;
use qwalk_core::scale::{QuantumScale, TolerancePolicy};
use qwalk_core::walk::{sample_sign, simulate_ensemble, simulate_path};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_of_two_volatility_scales_paths_exactly(k in -8i32..8, seed in any::<u64>(), id in 0u64..1000) {
        let c = 2f64.powi(k);
        let sc = QuantumScale::new(256).unwrap();
        let base = simulate_path(&WalkSpec::new("0", "1").unwrap(), &sc, seed, id).unwrap();
        let scaled = simulate_path(&WalkSpec::new("0", &format!("{c}")).unwrap(), &sc, seed, id).unwrap();
        for (a, b) in base.values.iter().zip(&scaled.values) {
            prop_assert_eq!(c * a, *b);
        }
    }

    #[test]
    fn volatility_scaling_covariance(c in 0.01f64..100.0, seed in any::<u64>()) {
        let sc = QuantumScale::new(512).unwrap();
        let base = simulate_path(&WalkSpec::new("0", "1").unwrap(), &sc, seed, 0).unwrap();
        let scaled = simulate_path(&WalkSpec::with_params("0", "c", &[("c", c)]).unwrap(), &sc, seed, 0).unwrap();
        for (a, b) in base.values.iter().zip(&scaled.values) {
            prop_assert!((c * a - b).abs() <= 1e-12 * c * (1.0 + a.abs()));
        }
    }

    #[test]
    fn squared_increment_identity(
        b0 in -3f64..3.0, b1 in -3f64..3.0, s0 in 0.1f64..3.0, s1 in -1f64..1.0,
        seed in any::<u64>(), n_q in 8u64..512,
    ) {
        let spec = WalkSpec::with_params(
            "b0 + b1*x", "s0 + s1*t", &[("b0", b0), ("b1", b1), ("s0", s0), ("s1", s1)],
        ).unwrap();
        let sc = QuantumScale::new(n_q).unwrap();
        let path = simulate_path(&spec, &sc, seed, 0).unwrap();
        let dt = sc.delta_t();
        for k in 0..n_q {
            let (t, x) = (sc.time(k), path.values[k as usize]);
            let (b, s) = (b0 + b1 * x, s0 + s1 * t);
            let eps = f64::from(sample_sign(seed, 0, k));
            let dx = path.values[k as usize + 1] - x;
            let expect = s * s * dt + 2.0 * b * s * eps * dt.powf(1.5) + b * b * dt * dt;
            prop_assert!((dx * dx - expect).abs() <= 1e-9 * expect.abs().max(dt * dt), "step {}", k);
        }
    }

    #[test]
    fn constant_volatility_always_passes_heisenberg(s in 0.6f64..9.0, seed in any::<u64>(), id in any::<u64>()) {
        let sc = QuantumScale::new(1024).unwrap();
        let policy = TolerancePolicy::for_scale(&sc);
        let spec = WalkSpec::with_params("0", "s", &[("s", s)]).unwrap();
        let path = simulate_path(&spec, &sc, seed, id).unwrap();
        prop_assert!(heisenberg_check(&path, &policy).unwrap().pass);
    }

    #[test]
    fn ensembles_are_pure(seed in any::<u64>(), p in 1u64..40) {
        let spec = WalkSpec::new("-x", "0.5").unwrap();
        let sc = QuantumScale::new(64).unwrap();
        let a = simulate_ensemble(&spec, &sc, seed, p).unwrap();
        let b = simulate_ensemble(&spec, &sc, seed, p).unwrap();
        prop_assert_eq!(a.paths, b.paths);
        prop_assert_eq!(a.summaries, b.summaries);
    }
}

#[test]
fn euler_error_halves_with_the_grid() {
    let spec = WalkSpec::new("x", "0")
        .unwrap()
        .with_x0(qwalk_core::coeffs::InitialCondition::Point(1.0))
        .unwrap();
    let err = |n| (simulate_path(&spec, &QuantumScale::new(n).unwrap(), 0, 0).unwrap().terminal() - 1f64.exp()).abs();
    for n in [100, 1000, 10_000] {
        let ratio = err(n) / err(2 * n);
        assert!((1.7..=2.3).contains(&ratio), "n_q {n}: ratio {ratio}");
    }
}
