// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use robust_pulse::drivers::{build_scenario, ScenarioConfig};
use robust_pulse::optimize::{minimize, OptimizerConfig};
use robust_pulse::quadrature::Measure;
use robust_pulse::sparsegrid::{smolyak_grid, SamplingSet};

fn quick(name: &str) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(name).unwrap();
    cfg.steps = Some(60);
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn smolyak_weights_normalize_and_nodes_stay_inside(
        d in 1usize..6,
        k in 1usize..5,
        a in -3.0f64..0.0,
        width in 0.1f64..4.0,
    ) {
        let b = a + width;
        let grid = smolyak_grid(d, k, &[Measure::Uniform { a, b }]).unwrap();
        prop_assert!((grid.weight_sum() - 1.0).abs() < 1e-12);
        let set: SamplingSet = grid.into();
        for n in set.points() {
            prop_assert!(n.coords.iter().all(|&x| x >= a - 1e-12 && x <= b + 1e-12));
        }
        // The mean of each coordinate is exact for every level.
        for i in 0..d {
            let mean = set.estimate(|x| x[i]);
            prop_assert!((mean - 0.5 * (a + b)).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_grids_are_symmetric(d in 1usize..5, k in 1usize..5) {
        let set: SamplingSet = smolyak_grid(d, k, &[Measure::StandardNormal]).unwrap().into();
        for i in 0..d {
            prop_assert!(set.estimate(|x| x[i]).abs() < 1e-12);
        }
        let second = if k >= 2 { 1.0 } else { 0.0 };
        prop_assert!((set.estimate(|x| x[0] * x[0]) - second).abs() < 1e-12);
    }

    #[test]
    fn pointwise_infidelity_is_bounded_and_propagators_unitary(
        theta in prop::collection::vec(-2.0f64..2.0, 14),
        delta in prop::collection::vec(-0.1f64..0.1, 2),
    ) {
        let obj = build_scenario(&quick("hadamard")).unwrap();
        let pulse = obj.pulse_at(&theta).unwrap();
        let u = obj.propagate_at(&pulse, &delta).unwrap();
        prop_assert!(u.unitarity_defect() < 1e-10);
        let phi = obj.pointwise(&pulse, &delta).unwrap();
        // Phi2 lies in [0, 2 dim].
        prop_assert!((0.0..=4.0 + 1e-12).contains(&phi));
    }

    #[test]
    fn bounded_search_never_leaves_the_box(
        center in prop::collection::vec(-3.0f64..3.0, 4),
        half in 0.05f64..1.0,
    ) {
        let cfg = OptimizerConfig {
            max_iterations: 40,
            bounds: Some(vec![(-half, half)]),
            ..OptimizerConfig::quasi_newton()
        };
        let c = center.clone();
        let f = move |x: &[f64]| {
            let v = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let g = x.iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).collect();
            Ok((v, g))
        };
        let trace = minimize(f, &[0.0; 4], &cfg).unwrap();
        for (x, c) in trace.theta.iter().zip(&center) {
            prop_assert!(x.abs() <= half);
            // Projected minimizer of a separable quadratic.
            prop_assert!((x - c.clamp(-half, half)).abs() < 1e-6);
        }
    }
}
