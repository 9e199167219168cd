use mkdiv::distributions::{quantile_grid, Distribution};
use mkdiv::generators::{ConvexGenerator, DistortionSpec};
use mkdiv::numeric::Execution;
use mkdiv::robust::{perturbed_quantile, solve_worst_case, SolveOptions};
use mkdiv::Error;

fn opts(m: usize) -> SolveOptions {
    SolveOptions {
        m,
        ..SolveOptions::default()
    }
}

#[test]
fn larger_lambda_gives_smaller_nodes() {
    let d = DistortionSpec::dual_power(3.0).unwrap();
    let reference = Distribution::lognormal(0.0, 0.4).unwrap();
    let grid = quantile_grid(&reference, 2000, 1e-7).unwrap();
    let gamma = d.weights(2000);
    for gen in [ConvexGenerator::Quadratic, ConvexGenerator::Exp, ConvexGenerator::XLogX] {
        let a = perturbed_quantile(gen, &grid, &gamma, 1.0, Execution::Serial).unwrap();
        let b = perturbed_quantile(gen, &grid, &gamma, 2.0, Execution::Serial).unwrap();
        assert!(a.nodes().iter().zip(b.nodes()).all(|(x, y)| x > y), "{}", gen.name());
    }
}

#[test]
fn quadratic_translation_covariance() {
    let d = DistortionSpec::tvar(0.8).unwrap();
    let shift = 3.25;
    let base = solve_worst_case(
        ConvexGenerator::Quadratic,
        &d,
        &Distribution::normal(0.0, 1.0).unwrap(),
        0.02,
        &opts(4000),
    )
    .unwrap();
    let moved = solve_worst_case(
        ConvexGenerator::Quadratic,
        &d,
        &Distribution::normal(shift, 1.0).unwrap(),
        0.02,
        &opts(4000),
    )
    .unwrap();
    assert!((moved.worst_value - base.worst_value - shift).abs() <= 1e-9);
    for (a, b) in base.worst_quantile.nodes().iter().zip(moved.worst_quantile.nodes()) {
        assert!((b - a - shift).abs() <= 1e-9);
    }
}

#[test]
fn solutions_are_feasible_and_dominate_the_reference() {
    let cases = [
        (
            ConvexGenerator::Quadratic,
            DistortionSpec::dual_power(2.0).unwrap(),
            Distribution::exponential(1.0).unwrap(),
        ),
        (
            ConvexGenerator::Quartic,
            DistortionSpec::power(0.5).unwrap(),
            Distribution::uniform(-1.0, 1.0).unwrap(),
        ),
        (
            ConvexGenerator::XLogX,
            DistortionSpec::tvar(0.9).unwrap(),
            Distribution::lognormal(0.0, 0.3).unwrap(),
        ),
        (
            ConvexGenerator::Exp,
            DistortionSpec::dual_power(4.0).unwrap(),
            Distribution::normal(0.0, 0.5).unwrap(),
        ),
    ];
    for (gen, d, reference) in cases {
        let s = solve_worst_case(gen, &d, &reference, 0.01, &opts(2000)).unwrap();
        assert!(s.binding);
        assert!((s.divergence_at_solution - 0.01).abs() <= 1e-8);
        assert!(s.worst_quantile.nodes().windows(2).all(|w| w[0] <= w[1]));
        assert!(s.worst_value >= s.reference_value);
        assert_eq!(s.uniqueness_warning, !d.is_strict());
    }
}

#[test]
fn worst_value_increases_with_radius() {
    let d = DistortionSpec::dual_power(2.0).unwrap();
    let reference = Distribution::lognormal(0.0, 0.25).unwrap();
    let values: Vec<f64> = [0.01, 0.02, 0.04, 0.08]
        .iter()
        .map(|&eps| {
            solve_worst_case(ConvexGenerator::XLogX, &d, &reference, eps, &opts(2000))
                .unwrap()
                .worst_value
        })
        .collect();
    assert!(values.windows(2).all(|w| w[0] < w[1]), "{values:?}");
}

#[test]
fn bad_radius_is_rejected() {
    let d = DistortionSpec::Identity;
    let r = solve_worst_case(
        ConvexGenerator::Quadratic,
        &d,
        &Distribution::normal(0.0, 1.0).unwrap(),
        -1.0,
        &opts(100),
    );
    assert!(matches!(
        r,
        Err(Error::Domain(_)) | Err(Error::Range { .. }) | Err(Error::Calibration { .. })
    ));
}

#[test]
fn parallel_solution_is_bitwise_serial() {
    let d = DistortionSpec::dual_power(2.0).unwrap();
    let reference = Distribution::normal(1.0, 0.5).unwrap();
    let mut o = opts(5000);
    let a = solve_worst_case(ConvexGenerator::Quartic, &d, &reference, 0.03, &o).unwrap();
    o.execution = Execution::Parallel;
    let b = solve_worst_case(ConvexGenerator::Quartic, &d, &reference, 0.03, &o).unwrap();
    assert_eq!(a.worst_value.to_bits(), b.worst_value.to_bits());
    assert_eq!(a.worst_quantile, b.worst_quantile);
}
