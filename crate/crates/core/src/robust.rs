//! Worst-case distortion risk measures over Bregman-Wasserstein balls.
//!
//! For a reference quantile function `F̆`, weight `γ` and multiplier `λ > 0`
//! the candidate worst case is
//!
//! ```text
//! Ğ_λ(u) = (φ′)⁻¹( φ′(F̆(u)) + γ(u)/λ )
//! ```
//!
//! and `λ*` is calibrated so that `ℬ_φ(G_λ*, F) = ε`. The engine takes the
//! weight as a plain vector, so negative weights (as in the cheapest-payoff
//! problem) go through the same code.

use serde::Serialize;

use crate::distributions::{quantile_grid, Distribution, QuantileGrid};
use crate::generators::{ConvexGenerator, DistortionSpec};
use crate::numeric::{bisect_predicate, map_indices, pairwise_mean, Execution};
use crate::transport::bregman_wasserstein;
use crate::{Error, Result, DEFAULT_DELTA, DEFAULT_GRID_M, DEFAULT_TOL};

/// Initial λ bracket.
pub const LAMBDA_BRACKET: (f64, f64) = (1e-8, 1e8);

/// Decades the bracket may grow on each side before calibration gives up.
pub const LAMBDA_EXPANSION_DECADES: i32 = 4;

/// Discretisation and tolerance knobs shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub m: usize,
    pub delta: f64,
    /// Absolute tolerance on `|ℬ − ε|` for a binding solution.
    pub tol: f64,
    pub execution: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            m: DEFAULT_GRID_M,
            delta: DEFAULT_DELTA,
            tol: DEFAULT_TOL,
            execution: Execution::Serial,
        }
    }
}

/// `(1/M) Σ wᵢ·xᵢ` with the fixed pairwise reduction.
pub fn weighted_mean(weights: &[f64], nodes: &[f64], exec: Execution) -> f64 {
    let products: Vec<f64> = weights.iter().zip(nodes).map(|(w, x)| w * x).collect();
    pairwise_mean(&products, exec)
}

/// Choquet integral `H_g(Ğ) = ∫ γ(u) Ğ(u) du` on the grid.
pub fn choquet(d: &DistortionSpec, grid: &QuantileGrid) -> f64 {
    weighted_mean(&d.weights(grid.m()), grid.nodes(), Execution::Serial)
}

/// Apply `Ğ_λ(uᵢ) = (φ′)⁻¹(φ′(F̆(uᵢ)) + γᵢ/λ)` at every node.
pub fn perturbed_quantile(
    gen: ConvexGenerator,
    reference: &QuantileGrid,
    gamma: &[f64],
    lambda: f64,
    exec: Execution,
) -> Result<QuantileGrid> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    if gamma.len() != reference.m() {
        return Err(Error::Domain(format!(
            "weight vector has {} entries for a grid of {} nodes",
            gamma.len(),
            reference.m()
        )));
    }
    let f = reference.nodes();
    let nodes = map_indices(f.len(), exec, |i| {
        let arg = gen.dphi(f[i]) + gamma[i] / lambda;
        // Overflow or underflow out of the domain counts as infeasible too.
        gen.inv_dphi(arg)
            .ok()
            .filter(|x| gen.in_domain(*x))
            .ok_or(Error::InfeasibleLambda {
                lambda,
                node: i,
                u: reference.u(i),
                value: arg,
            })
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    QuantileGrid::from_nodes(repair_rounding(nodes), reference.delta())
}

/// The formula is monotone in exact arithmetic; large `γ/λ` can still leave
/// ulp-sized inversions, which are flattened here. Real inversions are kept
/// and rejected by the grid constructor.
fn repair_rounding(mut nodes: Vec<f64>) -> Vec<f64> {
    for i in 1..nodes.len() {
        let prev = nodes[i - 1];
        if nodes[i] < prev && prev - nodes[i] <= 1e-12 * (1.0 + prev.abs()) {
            nodes[i] = prev;
        }
    }
    nodes
}

/// `Ğ_λ` for a distortion weight and a reference distribution.
pub fn worst_case_quantile(
    gen: ConvexGenerator,
    d: &DistortionSpec,
    reference: &Distribution,
    lambda: f64,
    m: usize,
    delta: f64,
) -> Result<QuantileGrid> {
    let grid = quantile_grid(reference, m, delta)?;
    perturbed_quantile(gen, &grid, &d.weights(m), lambda, Execution::Serial)
}

/// Outcome of [`calibrate_lambda`].
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub lambda: f64,
    pub grid: QuantileGrid,
    pub divergence: f64,
    pub binding: bool,
}

/// Find `λ*` with `ℬ_φ(G_λ*, F) = ε` by bisection on `log λ`.
///
/// `λ ↦ ℬ_φ(G_λ, F)` is decreasing; λ values at which the formula leaves the
/// range of `φ′` are treated as infinitely far from `F`.
pub fn calibrate_lambda(
    gen: ConvexGenerator,
    reference: &QuantileGrid,
    gamma: &[f64],
    eps: f64,
    tol: f64,
    exec: Execution,
) -> Result<Calibration> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("radius epsilon must be positive, got {eps}")));
    }
    let divergence = |lambda: f64| -> Result<f64> {
        match perturbed_quantile(gen, reference, gamma, lambda, exec) {
            Ok(g) => bregman_wasserstein(gen, g.nodes(), reference.nodes(), exec),
            Err(Error::InfeasibleLambda { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let (mut lo, mut hi) = (LAMBDA_BRACKET.0.ln(), LAMBDA_BRACKET.1.ln());
    let decade = 10f64.ln();
    let mut d_lo = divergence(lo.exp())?;
    let mut d_hi = divergence(hi.exp())?;
    for _ in 0..LAMBDA_EXPANSION_DECADES {
        if d_lo >= eps {
            break;
        }
        lo -= decade;
        d_lo = divergence(lo.exp())?;
    }
    for _ in 0..LAMBDA_EXPANSION_DECADES {
        if d_hi <= eps {
            break;
        }
        hi += decade;
        d_hi = divergence(hi.exp())?;
    }
    if !(d_lo >= eps && d_hi <= eps) {
        return Err(Error::Calibration {
            target: eps,
            lo: d_hi,
            hi: d_lo,
        });
    }
    let mut failure = None;
    let (a, b) = bisect_predicate(lo, hi, 0.0, |x| match divergence(x.exp()) {
        Ok(v) => v <= eps,
        Err(e) => {
            failure.get_or_insert(e);
            true
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let best = [a, b]
        .into_iter()
        .filter_map(|x| {
            let lambda = x.exp();
            let grid = perturbed_quantile(gen, reference, gamma, lambda, exec).ok()?;
            let div = bregman_wasserstein(gen, grid.nodes(), reference.nodes(), exec).ok()?;
            Some((lambda, grid, div))
        })
        .min_by(|x, y| (x.2 - eps).abs().total_cmp(&(y.2 - eps).abs()))
        .ok_or(Error::Calibration {
            target: eps,
            lo: d_hi,
            hi: d_lo,
        })?;
    let (lambda, grid, div) = best;
    Ok(Calibration {
        lambda,
        grid,
        divergence: div,
        binding: (div - eps).abs() <= tol,
    })
}

/// Worst-case distortion risk measure over `{G : ℬ_φ(G, F) ≤ ε}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCaseSolution {
    pub lambda_star: f64,
    #[serde(skip)]
    pub worst_quantile: QuantileGrid,
    pub worst_value: f64,
    /// `H_g(F̆)` on the same grid.
    pub reference_value: f64,
    pub epsilon: f64,
    pub divergence_at_solution: f64,
    pub binding: bool,
    /// The distortion is not strictly concave, so λ* may not be unique.
    pub uniqueness_warning: bool,
    /// Tail truncation level of the grid.
    pub truncation_delta: f64,
}

pub fn solve_worst_case(
    gen: ConvexGenerator,
    d: &DistortionSpec,
    reference: &Distribution,
    eps: f64,
    opts: &SolveOptions,
) -> Result<WorstCaseSolution> {
    let grid = quantile_grid(reference, opts.m, opts.delta)?;
    let gamma = d.weights(opts.m);
    let cal = calibrate_lambda(gen, &grid, &gamma, eps, opts.tol, opts.execution)?;
    Ok(WorstCaseSolution {
        lambda_star: cal.lambda,
        worst_value: weighted_mean(&gamma, cal.grid.nodes(), opts.execution),
        reference_value: weighted_mean(&gamma, grid.nodes(), opts.execution),
        worst_quantile: cal.grid,
        epsilon: eps,
        divergence_at_solution: cal.divergence,
        binding: cal.binding,
        uniqueness_warning: !d.is_strict(),
        truncation_delta: opts.delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unif() -> Distribution {
        Distribution::uniform(0.0, 1.0).unwrap()
    }

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn choquet_examples() {
        let g = quantile_grid(&unif(), 10_000, 1e-7).unwrap();
        assert_abs_diff_eq!(choquet(&DistortionSpec::Identity, &g), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(
            choquet(&DistortionSpec::dual_power(2.0).unwrap(), &g),
            2.0 / 3.0,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(choquet(&DistortionSpec::tvar(0.9).unwrap(), &g), 0.95, epsilon = 1e-5);
    }

    #[test]
    fn worst_case_quantile_examples() {
        let d = DistortionSpec::dual_power(2.0).unwrap();
        let g = worst_case_quantile(ConvexGenerator::Quadratic, &d, &unif(), 10.0 / 3.0, 1000, 0.0).unwrap();
        for (i, x) in g.nodes().iter().enumerate() {
            let u = (i as f64 + 0.5) / 1000.0;
            assert_abs_diff_eq!(*x, 1.3 * u, epsilon = 1e-12);
        }
        let far = worst_case_quantile(ConvexGenerator::Quadratic, &d, &unif(), 1e300, 1000, 0.0).unwrap();
        let base = quantile_grid(&unif(), 1000, 0.0).unwrap();
        assert_eq!(far.nodes(), base.nodes());
    }

    #[test]
    fn infeasible_lambda_reports_the_node() {
        let base = QuantileGrid::from_nodes(vec![-1.0, 0.0, 1.0], 0.0).unwrap();
        let gamma = [-10.0, 0.0, 1.0];
        match perturbed_quantile(ConvexGenerator::Exp, &base, &gamma, 1.0, Execution::Serial) {
            Err(Error::InfeasibleLambda { node, value, .. }) => {
                assert_eq!(node, 0);
                assert!(value <= 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn solve_dual_power_uniform() {
        let d = DistortionSpec::dual_power(2.0).unwrap();
        let s = solve_worst_case(ConvexGenerator::Quadratic, &d, &unif(), 0.03, &opts()).unwrap();
        assert_abs_diff_eq!(s.lambda_star, 10.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.worst_value, 0.8666666666666667, epsilon = 1e-6);
        assert!(s.binding);
        assert!((s.divergence_at_solution - 0.03).abs() <= 1e-8);
        assert!(!s.uniqueness_warning);
        assert!(s.worst_value >= s.reference_value);
    }

    #[test]
    fn zero_radius_limit() {
        let d = DistortionSpec::dual_power(3.0).unwrap();
        let s = solve_worst_case(ConvexGenerator::Quadratic, &d, &unif(), 1e-10, &opts()).unwrap();
        let g = quantile_grid(&unif(), opts().m, opts().delta).unwrap();
        assert_abs_diff_eq!(s.worst_value, choquet(&d, &g), epsilon = 1e-4);
    }

    #[test]
    fn quadratic_closed_form() {
        let refs = [
            Distribution::normal(0.0, 1.0).unwrap(),
            Distribution::exponential(2.0).unwrap(),
        ];
        let d = DistortionSpec::tvar(0.8).unwrap();
        for r in &refs {
            for eps in [0.01, 0.1] {
                let s = solve_worst_case(ConvexGenerator::Quadratic, &d, r, eps, &opts()).unwrap();
                let w = d.weights(opts().m);
                let g2 = pairwise_mean(&w.iter().map(|x| x * x).collect::<Vec<_>>(), Execution::Serial);
                assert_abs_diff_eq!(s.worst_value, s.reference_value + (eps * g2).sqrt(), epsilon = 1e-6);
                assert!(s.uniqueness_warning);
            }
        }
    }

    #[test]
    fn translation_covariance() {
        let d = DistortionSpec::dual_power(2.0).unwrap();
        let a = solve_worst_case(ConvexGenerator::Quadratic, &d, &unif(), 0.02, &opts()).unwrap();
        let shifted = Distribution::uniform(2.0, 3.0).unwrap();
        let b = solve_worst_case(ConvexGenerator::Quadratic, &d, &shifted, 0.02, &opts()).unwrap();
        assert_abs_diff_eq!(b.worst_value, a.worst_value + 2.0, epsilon = 1e-9);
        for (x, y) in a.worst_quantile.nodes().iter().zip(b.worst_quantile.nodes()) {
            assert_abs_diff_eq!(*y, x + 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn worst_value_increases_with_radius() {
        let d = DistortionSpec::power(0.5).unwrap();
        let r = Distribution::lognormal(0.0, 0.5).unwrap();
        let mut last = f64::NEG_INFINITY;
        for eps in [0.01, 0.02, 0.04, 0.08] {
            let s = solve_worst_case(ConvexGenerator::XLogX, &d, &r, eps, &opts()).unwrap();
            assert!(s.binding);
            assert!(s.worst_value > last);
            last = s.worst_value;
        }
    }

    #[test]
    fn divergence_is_decreasing_in_lambda() {
        let grid = quantile_grid(&Distribution::normal(0.0, 1.0).unwrap(), 500, 1e-7).unwrap();
        let gamma = DistortionSpec::dual_power(2.0).unwrap().weights(500);
        let mut prev: Option<QuantileGrid> = None;
        for lambda in [0.5, 1.0, 2.0, 4.0] {
            let g = perturbed_quantile(ConvexGenerator::Quartic, &grid, &gamma, lambda, Execution::Serial).unwrap();
            if let Some(p) = &prev {
                assert!(p.nodes().iter().zip(g.nodes()).all(|(a, b)| a >= b));
            }
            prev = Some(g);
        }
    }

    #[test]
    fn calibration_failure_reports_range() {
        let grid = QuantileGrid::from_nodes(vec![0.0, 1.0], 0.0).unwrap();
        // Zero weight: G_λ = F for every λ, so only ε = 0 is reachable.
        let r = calibrate_lambda(
            ConvexGenerator::Quadratic,
            &grid,
            &[0.0, 0.0],
            0.1,
            1e-8,
            Execution::Serial,
        );
        assert!(matches!(r, Err(Error::Calibration { .. })));
        assert!(calibrate_lambda(
            ConvexGenerator::Quadratic,
            &grid,
            &[1.0, 1.0],
            0.0,
            1e-8,
            Execution::Serial
        )
        .is_err());
    }

    #[test]
    fn parallel_solve_is_bitwise_identical() {
        let d = DistortionSpec::dual_power(2.0).unwrap();
        let r = Distribution::normal(1.0, 2.0).unwrap();
        let mut o = SolveOptions { m: 50_000, ..opts() };
        let a = solve_worst_case(ConvexGenerator::Quartic, &d, &r, 0.05, &o).unwrap();
        o.execution = Execution::Parallel;
        let b = solve_worst_case(ConvexGenerator::Quartic, &d, &r, 0.05, &o).unwrap();
        assert_eq!(a.lambda_star.to_bits(), b.lambda_star.to_bits());
        assert_eq!(a.worst_value.to_bits(), b.worst_value.to_bits());
    }
}
