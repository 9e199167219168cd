//! Cheapest payoffs whose distribution stays within a Bregman-Wasserstein
//! ball around a benchmark.
//!
//! A payoff is represented by its quantile function `Ğ`. The cheapest payoff
//! with that distribution is `Ğ(1 − F_ξ(ξ))`, priced at
//! `∫ F̆_ξ(1 − u) Ğ(u) du`. Minimising this cost is the worst-case problem of
//! [`crate::robust`] with the negative weight `γ(u) = −F̆_ξ(1 − u)`.

use serde::Serialize;

use crate::distributions::{quantile_grid, Distribution, QuantileGrid};
use crate::generators::ConvexGenerator;
use crate::robust::{calibrate_lambda, weighted_mean, SolveOptions};
use crate::{Error, Result};

/// State-price density `ξ` with the rate and horizon it discounts over.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSpec {
    spd: Distribution,
    rate: f64,
    horizon: f64,
}

impl MarketSpec {
    pub fn new(spd: Distribution, rate: f64, horizon: f64) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::Config(format!("rate must be finite, got {rate}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        if spd.cdf(0.0) > 0.0 {
            return Err(Error::Config(
                "state-price density must be supported on (0, inf)".into(),
            ));
        }
        if !spd.mean().is_finite() {
            return Err(Error::Moment("state-price density has no finite mean".into()));
        }
        Ok(Self { spd, rate, horizon })
    }

    /// Additionally require `|E ξ − e^{−rT}| ≤ tol`.
    pub fn normalized(spd: Distribution, rate: f64, horizon: f64, tol: f64) -> Result<Self> {
        let m = Self::new(spd, rate, horizon)?;
        let (mean, discount) = (m.spd.mean(), m.discount());
        if (mean - discount).abs() > tol {
            return Err(Error::Config(format!(
                "state-price density has mean {mean}, expected discount factor {discount}"
            )));
        }
        Ok(m)
    }

    pub fn spd(&self) -> &Distribution {
        &self.spd
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `e^{−rT}`.
    pub fn discount(&self) -> f64 {
        (-self.rate * self.horizon).exp()
    }

    /// `F̆_ξ(1 − uᵢ)` on the midpoint grid.
    pub fn reversed_spd_nodes(&self, m: usize, delta: f64) -> Result<Vec<f64>> {
        let mut nodes = quantile_grid(&self.spd, m, delta)?.into_nodes();
        nodes.reverse();
        Ok(nodes)
    }

    /// The weight `γ(u) = −F̆_ξ(1 − u)` fed to the worst-case engine.
    pub fn weights(&self, m: usize, delta: f64) -> Result<Vec<f64>> {
        Ok(self.reversed_spd_nodes(m, delta)?.into_iter().map(|x| -x).collect())
    }
}

/// Cost `∫ F̆_ξ(1 − u) Ğ(u) du` of the cost-efficient payoff with quantile `Ğ`.
pub fn payoff_cost(market: &MarketSpec, grid: &QuantileGrid) -> Result<f64> {
    let xi = market.reversed_spd_nodes(grid.m(), grid.delta())?;
    Ok(weighted_mean(&xi, grid.nodes(), crate::numeric::Execution::Serial))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffSolution {
    pub lambda_star: f64,
    #[serde(skip)]
    pub payoff_quantile: QuantileGrid,
    pub cost: f64,
    /// Cost of the cost-efficient payoff distributed as the benchmark.
    pub baseline_cost: f64,
    pub epsilon: f64,
    pub divergence_at_solution: f64,
    pub binding: bool,
    /// Some quantile node is negative.
    pub nonneg_violation: bool,
}

/// Cheapest payoff `X` with `ℬ_φ(F_X, F_benchmark) ≤ ε`.
pub fn cheapest_payoff(
    gen: ConvexGenerator,
    benchmark: &Distribution,
    market: &MarketSpec,
    eps: f64,
    opts: &SolveOptions,
) -> Result<PayoffSolution> {
    let grid = quantile_grid(benchmark, opts.m, opts.delta)?;
    let gamma = market.weights(opts.m, opts.delta)?;
    let cal = calibrate_lambda(gen, &grid, &gamma, eps, opts.tol, opts.execution)?;
    let cost = payoff_cost(market, &cal.grid)?;
    let baseline_cost = payoff_cost(market, &grid)?;
    Ok(PayoffSolution {
        lambda_star: cal.lambda,
        nonneg_violation: cal.grid.nodes().iter().any(|&x| x < 0.0),
        payoff_quantile: cal.grid,
        cost,
        baseline_cost,
        epsilon: eps,
        divergence_at_solution: cal.divergence,
        binding: cal.binding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Execution;
    use crate::robust::perturbed_quantile;
    use approx::assert_abs_diff_eq;

    fn unif() -> Distribution {
        Distribution::uniform(0.0, 1.0).unwrap()
    }

    fn unif_market() -> MarketSpec {
        MarketSpec::new(unif(), 0.0, 1.0).unwrap()
    }

    #[test]
    fn market_validation() {
        assert!(MarketSpec::new(Distribution::normal(1.0, 1.0).unwrap(), 0.0, 1.0).is_err());
        assert!(MarketSpec::new(unif(), 0.0, 0.0).is_err());
        let spd = Distribution::lognormal(-0.02 - 0.02, 0.2).unwrap();
        // E ξ = exp(μ + σ²/2) = exp(−0.02) = e^{−rT} with r = 0.02, T = 1.
        assert!(MarketSpec::normalized(spd.clone(), 0.02, 1.0, 1e-12).is_ok());
        assert!(MarketSpec::normalized(spd, 0.05, 1.0, 1e-6).is_err());
    }

    #[test]
    fn cost_examples() {
        let g = quantile_grid(&unif(), 10_000, 1e-7).unwrap();
        assert_abs_diff_eq!(payoff_cost(&unif_market(), &g).unwrap(), 1.0 / 6.0, epsilon = 1e-6);

        let c = QuantileGrid::from_nodes(vec![2.5; 1000], 0.0).unwrap();
        let spd = Distribution::exponential(4.0).unwrap();
        let m = MarketSpec::new(spd, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(payoff_cost(&m, &c).unwrap(), 2.5 * 0.25, epsilon = 1e-3);

        let disc = (-0.03f64 * 2.0).exp();
        let m = MarketSpec::new(Distribution::point_mass(disc).unwrap(), 0.03, 2.0).unwrap();
        let g = quantile_grid(&Distribution::normal(1.0, 0.3).unwrap(), 1000, 1e-7).unwrap();
        assert_abs_diff_eq!(payoff_cost(&m, &g).unwrap(), disc * g.mean(), epsilon = 1e-15);
    }

    #[test]
    fn uniform_analytic_reduction() {
        let s = cheapest_payoff(
            ConvexGenerator::Quadratic,
            &unif(),
            &unif_market(),
            1.0 / 48.0,
            &SolveOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(s.lambda_star, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.cost, 1.0 / 12.0, epsilon = 1e-5);
        assert!(s.nonneg_violation);
        assert!(s.binding);
    }

    #[test]
    fn small_radius_recovers_baseline() {
        let s = cheapest_payoff(
            ConvexGenerator::Quadratic,
            &unif(),
            &unif_market(),
            1e-10,
            &SolveOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(s.cost, 1.0 / 6.0, epsilon = 1e-4);
        assert!(s.cost <= s.baseline_cost);
    }

    #[test]
    fn point_mass_benchmark() {
        let c = 1.5;
        let bench = Distribution::point_mass(c).unwrap();
        let spd = Distribution::lognormal(-0.1, 0.3).unwrap();
        let market = MarketSpec::new(spd.clone(), 0.0, 1.0).unwrap();
        let opts = SolveOptions {
            m: 2000,
            ..SolveOptions::default()
        };
        let s = cheapest_payoff(ConvexGenerator::Quadratic, &bench, &market, 0.05, &opts).unwrap();
        let xi = market.reversed_spd_nodes(opts.m, opts.delta).unwrap();
        for (g, x) in s.payoff_quantile.nodes().iter().zip(&xi) {
            assert_abs_diff_eq!(*g, c - x / (2.0 * s.lambda_star), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.baseline_cost, c * spd.mean(), epsilon = 1e-3);
        assert!(s.cost < s.baseline_cost);
    }

    #[test]
    fn cost_decreases_with_radius() {
        let spd = Distribution::lognormal(-0.05, 0.25).unwrap();
        let market = MarketSpec::new(spd, 0.0, 1.0).unwrap();
        let bench = Distribution::lognormal(0.0, 0.2).unwrap();
        let mut last = f64::INFINITY;
        for eps in [0.001, 0.002, 0.004, 0.008] {
            let s = cheapest_payoff(ConvexGenerator::XLogX, &bench, &market, eps, &SolveOptions::default()).unwrap();
            assert!(s.binding);
            assert!(s.cost < last);
            last = s.cost;
        }
    }

    #[test]
    fn structural_identity_with_worst_case_engine() {
        let market = unif_market();
        let opts = SolveOptions::default();
        let s = cheapest_payoff(ConvexGenerator::Quartic, &unif(), &market, 0.01, &opts).unwrap();
        let grid = quantile_grid(&unif(), opts.m, opts.delta).unwrap();
        let gamma = market.weights(opts.m, opts.delta).unwrap();
        let g = perturbed_quantile(
            ConvexGenerator::Quartic,
            &grid,
            &gamma,
            s.lambda_star,
            Execution::Serial,
        )
        .unwrap();
        for (a, b) in g.nodes().iter().zip(s.payoff_quantile.nodes()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
