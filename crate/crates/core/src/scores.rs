//! Scoring functions `S(z, y)`: `z` is the report, `y` the realisation.
//!
//! Every base family is normalised so that `S(T(δ_y), y) = 0`, and carries
//! the coupling that solves the induced transport problem. Osband transforms
//! of the report ([`Score::osband_transform`]) and of the observation
//! ([`Score::dist_transform`]) flip that claim when the map is decreasing.

use serde::{Deserialize, Serialize};

use crate::generators::ConvexGenerator;
use crate::{Error, Result};

/// Which coupling solves the transport problem with cost `c(z1, z2) = S(z2, z1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coupling {
    /// `(F̆₁(U), F̆₂(U))`.
    Comonotonic,
    /// `(F̆₁(U), F̆₂(1 − U))`.
    Antitonic,
}

impl Coupling {
    pub fn flip(self) -> Self {
        match self {
            Coupling::Comonotonic => Coupling::Antitonic,
            Coupling::Antitonic => Coupling::Comonotonic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Coupling::Comonotonic => "comonotonic",
            Coupling::Antitonic => "antitonic",
        }
    }
}

/// Strictly monotone maps with closed-form inverses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MonotoneMap {
    Identity,
    /// x ↦ x³
    Cube,
    /// x ↦ e^{rate·x}
    Exp {
        rate: f64,
    },
    /// x ↦ ln(x)/rate on (0, ∞)
    Log {
        rate: f64,
    },
    /// x ↦ 1/x on (0, ∞), decreasing
    Reciprocal,
}

impl MonotoneMap {
    pub fn exp(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(MonotoneMap::Exp { rate })
    }

    pub fn log(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(MonotoneMap::Log { rate })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MonotoneMap::Identity => "identity",
            MonotoneMap::Cube => "cube",
            MonotoneMap::Exp { .. } => "exp",
            MonotoneMap::Log { .. } => "log",
            MonotoneMap::Reciprocal => "reciprocal",
        }
    }

    pub fn is_increasing(&self) -> bool {
        !matches!(self, MonotoneMap::Reciprocal)
    }

    /// Domain is (0, ∞) rather than ℝ.
    pub fn positive_domain(&self) -> bool {
        matches!(self, MonotoneMap::Log { .. } | MonotoneMap::Reciprocal)
    }

    /// Range is (0, ∞) rather than ℝ.
    pub fn positive_range(&self) -> bool {
        matches!(self, MonotoneMap::Exp { .. } | MonotoneMap::Reciprocal)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if self.positive_domain() && !(x > 0.0) {
            return Err(Error::Domain(format!(
                "map {} needs a positive argument, got {x}",
                self.name()
            )));
        }
        Ok(match *self {
            MonotoneMap::Identity => x,
            MonotoneMap::Cube => x * x * x,
            MonotoneMap::Exp { rate } => (rate * x).exp(),
            MonotoneMap::Log { rate } => x.ln() / rate,
            MonotoneMap::Reciprocal => 1.0 / x,
        })
    }

    pub fn inverse(&self, z: f64) -> Result<f64> {
        if self.positive_range() && !(z > 0.0) {
            return Err(Error::Domain(format!(
                "{z} is outside the range of map {}",
                self.name()
            )));
        }
        Ok(match *self {
            MonotoneMap::Identity => z,
            MonotoneMap::Cube => z.cbrt(),
            MonotoneMap::Exp { rate } => z.ln() / rate,
            MonotoneMap::Log { rate } => (rate * z).exp(),
            MonotoneMap::Reciprocal => 1.0 / z,
        })
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "map rate must be positive and finite, got {rate}"
        )))
    }
}

fn check_level(name: &str, alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {alpha}")))
    }
}

/// Right-continuous monotone step function with values in (0, 1).
///
/// `levels[0]` applies below `breakpoints[0]`, `levels[k]` on
/// `[breakpoints[k-1], breakpoints[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        let f = Self { breakpoints, levels };
        f.validate()?;
        Ok(f)
    }

    pub fn constant(level: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![level])
    }

    /// Parse `{"breakpoints":[...],"levels":[...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: StepFunction = serde_json::from_str(text)?;
        f.validate()?;
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain numeric struct")
    }

    fn validate(&self) -> Result<()> {
        if self.levels.len() != self.breakpoints.len() + 1 {
            return Err(Error::Config(format!(
                "step function needs one more level than breakpoints, got {} levels and {} breakpoints",
                self.levels.len(),
                self.breakpoints.len()
            )));
        }
        if self.breakpoints.iter().any(|b| !b.is_finite()) || self.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::Config(format!("step levels must lie in (0, 1), got {l}")));
        }
        let up = self.levels.windows(2).all(|w| w[0] <= w[1]);
        let down = self.levels.windows(2).all(|w| w[0] >= w[1]);
        if !(up || down) {
            return Err(Error::Config("step levels must be monotone".into()));
        }
        Ok(())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    fn segment(&self, s: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= s)
    }

    /// Λ(s).
    pub fn eval(&self, s: f64) -> f64 {
        self.levels[self.segment(s)]
    }

    /// `∫_a^b Λ(s) ds` (negative when `b < a`), summed exactly over segments.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        if b < a {
            return -self.integral(b, a);
        }
        let mut k = self.segment(a);
        let mut cursor = a;
        let mut total = 0.0;
        while k < self.breakpoints.len() && self.breakpoints[k] < b {
            total += self.levels[k] * (self.breakpoints[k] - cursor);
            cursor = self.breakpoints[k];
            k += 1;
        }
        total + self.levels[k] * (b - cursor)
    }
}

/// Increasing loss ℓ with ℓ(w) < 0 for w < 0 and ℓ(w) > 0 for w > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossFunction {
    /// ℓ(s) = s
    Linear,
    /// ℓ(s) = e^{γs} − 1
    Exponential { gamma: f64 },
    /// ℓ(s) = sign(s)·|s|^p
    PowerOdd { p: f64 },
}

impl LossFunction {
    pub fn exponential(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(LossFunction::Exponential { gamma })
        } else {
            Err(Error::Domain(format!("exponential loss needs gamma > 0, got {gamma}")))
        }
    }

    pub fn power_odd(p: f64) -> Result<Self> {
        if p > 0.0 && p.is_finite() {
            Ok(LossFunction::PowerOdd { p })
        } else {
            Err(Error::Domain(format!("power loss needs p > 0, got {p}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossFunction::Linear => "linear",
            LossFunction::Exponential { .. } => "exponential",
            LossFunction::PowerOdd { .. } => "power",
        }
    }

    /// Convex losses induce convex shortfall risk measures.
    pub fn is_convex(&self) -> bool {
        match *self {
            LossFunction::Linear | LossFunction::Exponential { .. } => true,
            LossFunction::PowerOdd { p } => p == 1.0,
        }
    }

    pub fn ell(&self, s: f64) -> f64 {
        match *self {
            LossFunction::Linear => s,
            LossFunction::Exponential { gamma } => (gamma * s).exp_m1(),
            LossFunction::PowerOdd { p } => s.signum() * s.abs().powf(p),
        }
    }

    /// `L(t) = ∫₀ᵗ ℓ(s) ds`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match *self {
            LossFunction::Linear => 0.5 * t * t,
            LossFunction::Exponential { gamma } => ((gamma * t).exp_m1() - gamma * t) / gamma,
            LossFunction::PowerOdd { p } => t.abs().powf(p + 1.0) / (p + 1.0),
        }
    }
}

/// Increasing convex φ on ℝ₊ with φ(0) = 0, used by decomposable scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    Linear,
    Quadratic,
    Quartic,
}

impl Penalty {
    pub fn name(self) -> &'static str {
        match self {
            Penalty::Linear => "linear",
            Penalty::Quadratic => "quadratic",
            Penalty::Quartic => "quartic",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Penalty::Linear => x,
            Penalty::Quadratic => x * x,
            Penalty::Quartic => x.powi(4),
        }
    }
}

/// A scoring function from the catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum Score {
    /// `B_φ(y, z)`, elicits the mean.
    Bregman(ConvexGenerator),
    /// `(1{y ≤ z} − α)(g(z) − g(y))` with g increasing, elicits the α-quantile.
    Gpl { transform: MonotoneMap, alpha: f64 },
    /// `(z − y)₊ − ∫_y^z Λ(s) ds`, elicits the Λ-quantile.
    LambdaQuantile(StepFunction),
    /// `|1{y ≤ z} − α| · B_φ(y, z)`, elicits the α-expectile.
    Expectile { generator: ConvexGenerator, alpha: f64 },
    /// `∫₀^{y−z} ℓ(s) ds`, elicits the shortfall risk measure.
    Shortfall(LossFunction),
    /// `φ(|z − y|)·(α·1{y > z} + β·1{y ≤ z})`.
    Decomposable { penalty: Penalty, alpha: f64, beta: f64 },
    /// `B_φ(e^{γy}, e^{γz})`, elicits the entropic risk measure.
    Entropic { generator: ConvexGenerator, gamma: f64 },
    /// `S̃(g⁻¹(z), y)`, elicits `g ∘ T̃`.
    Osband { inner: Box<Score>, map: MonotoneMap },
    /// `S̃(z, h(y))`, elicits `F_Y ↦ T̃(F_{h(Y)})`.
    DistTransform { inner: Box<Score>, map: MonotoneMap },
}

impl Score {
    pub fn bregman(generator: ConvexGenerator) -> Self {
        Score::Bregman(generator)
    }

    pub fn gpl(transform: MonotoneMap, alpha: f64) -> Result<Self> {
        check_level("GPL level alpha", alpha)?;
        if !transform.is_increasing() {
            return Err(Error::Config(format!(
                "GPL transform must be increasing, got {}",
                transform.name()
            )));
        }
        Ok(Score::Gpl { transform, alpha })
    }

    pub fn lambda_quantile(step: StepFunction) -> Self {
        Score::LambdaQuantile(step)
    }

    pub fn expectile(generator: ConvexGenerator, alpha: f64) -> Result<Self> {
        check_level("expectile level alpha", alpha)?;
        Ok(Score::Expectile { generator, alpha })
    }

    pub fn shortfall(loss: LossFunction) -> Self {
        Score::Shortfall(loss)
    }

    pub fn decomposable(penalty: Penalty, alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!(
                    "decomposable {name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(Score::Decomposable { penalty, alpha, beta })
    }

    pub fn entropic(generator: ConvexGenerator, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("entropic gamma must be positive, got {gamma}")));
        }
        Ok(Score::Entropic { generator, gamma })
    }

    /// `S(z, y) = S̃(g⁻¹(z), y)`.
    pub fn osband_transform(inner: Score, map: MonotoneMap) -> Self {
        Score::Osband {
            inner: Box::new(inner),
            map,
        }
    }

    /// `S(z, y) = S̃(z, h(y))`.
    pub fn dist_transform(inner: Score, map: MonotoneMap) -> Self {
        Score::DistTransform {
            inner: Box::new(inner),
            map,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Score::Bregman(_) => "bregman",
            Score::Gpl { .. } => "gpl",
            Score::LambdaQuantile(_) => "lambda",
            Score::Expectile { .. } => "expectile",
            Score::Shortfall(_) => "shortfall",
            Score::Decomposable { .. } => "decomposable",
            Score::Entropic { .. } => "entropic",
            Score::Osband { .. } => "osband",
            Score::DistTransform { .. } => "dist",
        }
    }

    pub fn coupling_claim(&self) -> Coupling {
        match self {
            Score::Osband { inner, map } | Score::DistTransform { inner, map } => {
                let c = inner.coupling_claim();
                if map.is_increasing() {
                    c
                } else {
                    c.flip()
                }
            }
            _ => Coupling::Comonotonic,
        }
    }

    /// Whether `S(z, y) > 0` for every `z ≠ T(δ_y)`.
    pub fn is_strict(&self) -> bool {
        match self {
            Score::Decomposable { alpha, beta, .. } => *alpha > 0.0 && *beta > 0.0,
            Score::Osband { inner, .. } | Score::DistTransform { inner, .. } => inner.is_strict(),
            _ => true,
        }
    }

    /// `S(z, y)`.
    pub fn eval(&self, z: f64, y: f64) -> Result<f64> {
        let wrap = |e: Error| Error::Domain(format!("score {} at (z={z}, y={y}): {e}", self.family()));
        match self {
            Score::Bregman(g) => g.bregman(y, z).map_err(wrap),
            Score::Gpl { transform, alpha } => {
                let gz = transform.eval(z).map_err(wrap)?;
                let gy = transform.eval(y).map_err(wrap)?;
                Ok((indicator(y <= z) - alpha) * (gz - gy))
            }
            Score::LambdaQuantile(step) => Ok((z - y).max(0.0) - step.integral(y, z)),
            Score::Expectile { generator, alpha } => {
                let b = generator.bregman(y, z).map_err(wrap)?;
                Ok((indicator(y <= z) - alpha).abs() * b)
            }
            Score::Shortfall(loss) => Ok(loss.antiderivative(y - z)),
            Score::Decomposable { penalty, alpha, beta } => {
                let w = if y > z { *alpha } else { *beta };
                Ok(penalty.eval((z - y).abs()) * w)
            }
            Score::Entropic { generator, gamma } => {
                generator.bregman((gamma * y).exp(), (gamma * z).exp()).map_err(wrap)
            }
            Score::Osband { inner, map } => inner.eval(map.inverse(z).map_err(wrap)?, y),
            Score::DistTransform { inner, map } => inner.eval(z, map.eval(y).map_err(wrap)?),
        }
    }

    /// `T(δ_y)`: the report with zero score against the realisation `y`.
    pub fn point_value(&self, y: f64) -> Result<f64> {
        match self {
            Score::Osband { inner, map } => map.eval(inner.point_value(y)?),
            Score::DistTransform { inner, map } => inner.point_value(map.eval(y)?),
            _ => Ok(y),
        }
    }

    /// An interval on which both arguments are admissible, used to draw
    /// random test instances.
    pub fn sample_range(&self) -> (f64, f64) {
        const REAL: (f64, f64) = (-3.0, 3.0);
        const POSITIVE: (f64, f64) = (0.1, 5.0);
        let positive = |(lo, hi): (f64, f64)| (lo.max(POSITIVE.0), hi.max(POSITIVE.0 + 1.0));
        match self {
            Score::Bregman(g) | Score::Expectile { generator: g, .. } => {
                if g.positive_domain() {
                    POSITIVE
                } else {
                    REAL
                }
            }
            Score::Gpl { transform, .. } => {
                if transform.positive_domain() {
                    POSITIVE
                } else {
                    REAL
                }
            }
            Score::LambdaQuantile(step) => match (step.breakpoints.first(), step.breakpoints.last()) {
                (Some(lo), Some(hi)) => (lo - 2.0, hi + 2.0),
                _ => REAL,
            },
            Score::Entropic { .. } => (-2.0, 2.0),
            Score::Shortfall(_) | Score::Decomposable { .. } => REAL,
            Score::Osband { inner, map } => {
                let r = inner.sample_range();
                if map.positive_range() || map.positive_domain() {
                    positive(r)
                } else {
                    r
                }
            }
            Score::DistTransform { inner, map } => {
                let r = inner.sample_range();
                if map.positive_domain() || map.positive_range() {
                    positive(r)
                } else {
                    r
                }
            }
        }
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// A quadruple violating `c(z₁∧z₁′, z₂∧z₂′) + c(z₁∨z₁′, z₂∨z₂′) ≤ c(z₁, z₂′) + c(z₁′, z₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadruple {
    pub z1: f64,
    pub z1_prime: f64,
    pub z2: f64,
    pub z2_prime: f64,
    /// Left side minus right side.
    pub excess: f64,
}

/// Outcome of [`check_submodular`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubmodularityCheck {
    pub submodular: bool,
    pub witness: Option<Quadruple>,
}

/// Exhaustively test submodularity of the transport cost `c(z₁, z₂) = S(z₂, z₁)`
/// with `z₁` from `y_grid` and `z₂` from `z_grid`.
///
/// Cross differences are compared with a relative slack of `1e-12` so that
/// exactly modular costs are not flagged by rounding.
pub fn check_submodular(score: &Score, z_grid: &[f64], y_grid: &[f64]) -> Result<SubmodularityCheck> {
    if z_grid.len() < 2 || y_grid.len() < 2 {
        return Err(Error::Domain("submodularity grids need at least two points".into()));
    }
    for g in [z_grid, y_grid] {
        if g.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("submodularity grids must be strictly increasing".into()));
        }
    }
    // cost[i][j] = c(y_grid[i], z_grid[j])
    let cost = y_grid
        .iter()
        .map(|&z1| z_grid.iter().map(|&z2| score.eval(z2, z1)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    for i in 0..y_grid.len() {
        for ip in i + 1..y_grid.len() {
            for j in 0..z_grid.len() {
                for jp in j + 1..z_grid.len() {
                    let lhs = cost[i][j] + cost[ip][jp];
                    let rhs = cost[i][jp] + cost[ip][j];
                    let scale = cost[i][j].abs() + cost[ip][jp].abs() + cost[i][jp].abs() + cost[ip][j].abs();
                    if lhs - rhs > 1e-12 * (1.0 + scale) {
                        return Ok(SubmodularityCheck {
                            submodular: false,
                            witness: Some(Quadruple {
                                z1: y_grid[i],
                                z1_prime: y_grid[ip],
                                z2: z_grid[j],
                                z2_prime: z_grid[jp],
                                excess: lhs - rhs,
                            }),
                        });
                    }
                }
            }
        }
    }
    Ok(SubmodularityCheck {
        submodular: true,
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_step() -> StepFunction {
        StepFunction::new(vec![0.0, 1.0], vec![0.3, 0.45, 0.7]).unwrap()
    }

    /// Every comonotonic base family, on a real or positive domain.
    fn base_catalog() -> Vec<Score> {
        vec![
            Score::bregman(ConvexGenerator::Quadratic),
            Score::bregman(ConvexGenerator::Quartic),
            Score::bregman(ConvexGenerator::Exp),
            Score::bregman(ConvexGenerator::XLogX),
            Score::gpl(MonotoneMap::Identity, 0.9).unwrap(),
            Score::gpl(MonotoneMap::Cube, 0.5).unwrap(),
            Score::gpl(MonotoneMap::exp(1.0).unwrap(), 0.2).unwrap(),
            Score::lambda_quantile(two_step()),
            Score::expectile(ConvexGenerator::Quadratic, 0.7).unwrap(),
            Score::expectile(ConvexGenerator::Quartic, 0.3).unwrap(),
            Score::shortfall(LossFunction::Linear),
            Score::shortfall(LossFunction::exponential(1.0).unwrap()),
            Score::shortfall(LossFunction::power_odd(3.0).unwrap()),
            Score::decomposable(Penalty::Quadratic, 0.7, 0.3).unwrap(),
            Score::decomposable(Penalty::Linear, 0.2, 0.6).unwrap(),
            Score::entropic(ConvexGenerator::Quadratic, 1.0).unwrap(),
            Score::entropic(ConvexGenerator::XLogX, 0.5).unwrap(),
        ]
    }

    fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn evaluation_examples() {
        let s = Score::bregman(ConvexGenerator::Quadratic);
        assert_eq!(s.eval(1.0, 3.0).unwrap(), 4.0);
        let s = Score::gpl(MonotoneMap::Identity, 0.9).unwrap();
        assert_abs_diff_eq!(s.eval(2.0, 5.0).unwrap(), 2.7, epsilon = 1e-15);
        let s = Score::expectile(ConvexGenerator::Quadratic, 0.7).unwrap();
        assert_abs_diff_eq!(s.eval(0.0, 1.0).unwrap(), 0.7);
        let s = Score::decomposable(Penalty::Quadratic, 0.7, 0.3).unwrap();
        assert_abs_diff_eq!(s.eval(1.0, 4.0).unwrap(), 6.3, epsilon = 1e-14);
        let s = Score::shortfall(LossFunction::Linear);
        assert_eq!(s.eval(1.0, 4.0).unwrap(), 4.5);
        let s = Score::lambda_quantile(StepFunction::constant(0.5).unwrap());
        assert_eq!(s.eval(3.0, 1.0).unwrap(), 1.0);
        let gpl = Score::gpl(MonotoneMap::Identity, 0.5).unwrap();
        assert_eq!(gpl.eval(3.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn step_function_integral() {
        let f = two_step();
        assert_abs_diff_eq!(f.integral(-1.0, 2.0), 0.3 + 0.45 + 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(f.integral(2.0, -1.0), -(0.3 + 0.45 + 0.7), epsilon = 1e-15);
        assert_abs_diff_eq!(f.integral(0.5, 0.75), 0.45 * 0.25, epsilon = 1e-15);
        assert_eq!(f.eval(0.0), 0.45);
        assert_eq!(f.eval(-1e-12), 0.3);
        assert_eq!(f.eval(1.0), 0.7);
    }

    #[test]
    fn step_function_validation() {
        assert!(StepFunction::new(vec![0.0], vec![0.5]).is_err());
        assert!(StepFunction::new(vec![1.0, 0.0], vec![0.2, 0.3, 0.4]).is_err());
        assert!(StepFunction::new(vec![], vec![1.0]).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0], vec![0.2, 0.6, 0.4]).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0], vec![0.6, 0.4, 0.2]).is_ok());
        let f = StepFunction::from_json(r#"{"breakpoints":[0.5],"levels":[0.25,0.75]}"#).unwrap();
        assert_eq!(f.eval(0.5), 0.75);
        assert_eq!(StepFunction::from_json(&f.to_json()).unwrap(), f);
    }

    #[test]
    fn constructor_validation() {
        assert!(Score::gpl(MonotoneMap::Identity, 1.0).is_err());
        assert!(matches!(
            Score::gpl(MonotoneMap::Reciprocal, 0.5),
            Err(Error::Config(_))
        ));
        assert!(Score::expectile(ConvexGenerator::Quadratic, 0.0).is_err());
        assert!(Score::decomposable(Penalty::Linear, 1.2, 0.0).is_err());
        assert!(Score::entropic(ConvexGenerator::Quadratic, 0.0).is_err());
        assert!(MonotoneMap::exp(-1.0).is_err());
    }

    #[test]
    fn domain_errors_name_the_family() {
        let s = Score::bregman(ConvexGenerator::XLogX);
        match s.eval(-1.0, 1.0) {
            Err(Error::Domain(msg)) => assert!(msg.contains("bregman"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let s = Score::osband_transform(Score::bregman(ConvexGenerator::Quadratic), MonotoneMap::Reciprocal);
        assert!(s.eval(0.0, 1.0).is_err());
    }

    #[test]
    fn osband_examples() {
        let inner = Score::bregman(ConvexGenerator::Quadratic);
        let s = Score::osband_transform(inner.clone(), MonotoneMap::exp(1.0).unwrap());
        assert_eq!(s.eval(std::f64::consts::E, 1.0).unwrap(), 0.0);
        assert_eq!(s.coupling_claim(), Coupling::Comonotonic);

        let s = Score::osband_transform(inner.clone(), MonotoneMap::Reciprocal);
        assert_eq!(s.coupling_claim(), Coupling::Antitonic);

        let gpl = Score::gpl(MonotoneMap::Identity, 0.5).unwrap();
        let same = Score::osband_transform(gpl.clone(), MonotoneMap::Identity);
        for z in linspace(-2.0, 2.0, 10) {
            for y in linspace(-2.0, 2.0, 10) {
                assert_eq!(same.eval(z, y).unwrap(), gpl.eval(z, y).unwrap());
            }
        }
    }

    #[test]
    fn dist_transform_examples() {
        let inner = Score::bregman(ConvexGenerator::Quadratic);
        let same = Score::dist_transform(inner.clone(), MonotoneMap::Identity);
        for z in linspace(-2.0, 2.0, 10) {
            for y in linspace(-2.0, 2.0, 10) {
                assert_eq!(same.eval(z, y).unwrap(), inner.eval(z, y).unwrap());
            }
        }
        let recip = Score::dist_transform(inner.clone(), MonotoneMap::Reciprocal);
        assert_eq!(recip.coupling_claim(), Coupling::Antitonic);
        assert_eq!(recip.point_value(4.0).unwrap(), 0.25);
    }

    #[test]
    fn entropic_is_the_osband_composition() {
        for gamma in [0.5, 1.0, 2.0] {
            let direct = Score::entropic(ConvexGenerator::Quadratic, gamma).unwrap();
            let composed = Score::osband_transform(
                Score::dist_transform(
                    Score::bregman(ConvexGenerator::Quadratic),
                    MonotoneMap::exp(gamma).unwrap(),
                ),
                MonotoneMap::log(gamma).unwrap(),
            );
            assert_eq!(composed.coupling_claim(), Coupling::Comonotonic);
            for z in linspace(-1.5, 1.5, 9) {
                for y in linspace(-1.5, 1.5, 9) {
                    assert_eq!(direct.eval(z, y).unwrap(), composed.eval(z, y).unwrap());
                }
            }
        }
        let s = Score::entropic(ConvexGenerator::Quadratic, 1.0).unwrap();
        assert_abs_diff_eq!(s.eval(0.0, 2f64.ln()).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn flip_is_an_involution() {
        let inner = Score::bregman(ConvexGenerator::Quadratic);
        let twice = Score::osband_transform(
            Score::osband_transform(inner.clone(), MonotoneMap::Reciprocal),
            MonotoneMap::Reciprocal,
        );
        assert_eq!(twice.coupling_claim(), Coupling::Comonotonic);
        let mixed = Score::dist_transform(
            Score::osband_transform(inner, MonotoneMap::Reciprocal),
            MonotoneMap::Reciprocal,
        );
        assert_eq!(mixed.coupling_claim(), Coupling::Comonotonic);
    }

    #[test]
    fn normalisation_on_point_masses() {
        let mut catalog = base_catalog();
        catalog.push(Score::osband_transform(
            Score::bregman(ConvexGenerator::Quadratic),
            MonotoneMap::Reciprocal,
        ));
        catalog.push(Score::dist_transform(
            Score::expectile(ConvexGenerator::Quadratic, 0.6).unwrap(),
            MonotoneMap::Reciprocal,
        ));
        for s in &catalog {
            let (lo, hi) = s.sample_range();
            for y in linspace(lo, hi, 7) {
                let t = s.point_value(y).unwrap();
                assert_eq!(s.eval(t, y).unwrap(), 0.0, "{s:?} at y={y}");
                for dz in [-0.3, 0.2, 1.1] {
                    let z = t + dz;
                    if let Ok(v) = s.eval(z, y) {
                        assert!(v > 0.0, "{s:?} at z={z} y={y}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn constant_lambda_reduces_to_pinball() {
        for alpha in [0.1, 0.5, 0.73] {
            let lam = Score::lambda_quantile(StepFunction::constant(alpha).unwrap());
            let gpl = Score::gpl(MonotoneMap::Identity, alpha).unwrap();
            for z in linspace(-3.0, 3.0, 13) {
                for y in linspace(-3.0, 3.0, 13) {
                    let (a, b) = (lam.eval(z, y).unwrap(), gpl.eval(z, y).unwrap());
                    assert!((a - b).abs() <= 1e-15 * (1.0 + a.abs()), "{a} vs {b}");
                }
            }
        }
        // Dyadic inputs: both paths are exact.
        let lam = Score::lambda_quantile(StepFunction::constant(0.5).unwrap());
        let gpl = Score::gpl(MonotoneMap::Identity, 0.5).unwrap();
        for z in linspace(-2.0, 2.0, 9) {
            for y in linspace(-2.0, 2.0, 9) {
                assert_eq!(lam.eval(z, y).unwrap(), gpl.eval(z, y).unwrap());
            }
        }
    }

    #[test]
    fn decomposable_specialisations() {
        for alpha in [0.25, 0.7] {
            let d1 = Score::decomposable(Penalty::Linear, alpha, 1.0 - alpha).unwrap();
            let gpl = Score::gpl(MonotoneMap::Identity, alpha).unwrap();
            let d2 = Score::decomposable(Penalty::Quadratic, alpha, 1.0 - alpha).unwrap();
            let ex = Score::expectile(ConvexGenerator::Quadratic, alpha).unwrap();
            for z in linspace(-2.0, 2.0, 11) {
                for y in linspace(-2.0, 2.0, 11) {
                    assert_abs_diff_eq!(d1.eval(z, y).unwrap(), gpl.eval(z, y).unwrap(), epsilon = 1e-15);
                    assert_abs_diff_eq!(d2.eval(z, y).unwrap(), ex.eval(z, y).unwrap(), epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn submodularity_examples() {
        let grid = [-1.0, 0.0, 1.0, 2.0];
        let r = check_submodular(&Score::bregman(ConvexGenerator::Quadratic), &grid, &grid).unwrap();
        assert!(r.submodular && r.witness.is_none());

        let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let r = check_submodular(&Score::shortfall(LossFunction::Linear), &grid, &grid).unwrap();
        assert!(r.submodular);

        let grid = [0.5, 1.0, 2.0];
        let s = Score::osband_transform(Score::bregman(ConvexGenerator::Quadratic), MonotoneMap::Reciprocal);
        let r = check_submodular(&s, &grid, &grid).unwrap();
        assert!(!r.submodular);
        let w = r.witness.unwrap();
        // Independent recomputation of the reported quadruple.
        let c = |z1: f64, z2: f64| (z1 - 1.0 / z2).powi(2);
        let lhs = c(w.z1, w.z2) + c(w.z1_prime, w.z2_prime);
        let rhs = c(w.z1, w.z2_prime) + c(w.z1_prime, w.z2);
        assert!(lhs > rhs);
        assert_abs_diff_eq!(w.excess, lhs - rhs, epsilon = 1e-12);
    }

    #[test]
    fn catalog_scores_are_submodular_on_grids() {
        for s in base_catalog() {
            let (lo, hi) = s.sample_range();
            let g = linspace(lo, hi, 20);
            let r = check_submodular(&s, &g, &g).unwrap();
            assert!(r.submodular, "{s:?}: {:?}", r.witness);
        }
    }

    proptest! {
        #[test]
        fn catalog_scores_are_nonnegative(t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            for s in base_catalog() {
                let (lo, hi) = s.sample_range();
                let z = lo + (hi - lo) * t1;
                let y = lo + (hi - lo) * t2;
                prop_assert!(s.eval(z, y).unwrap() >= 0.0);
            }
        }

        #[test]
        fn lambda_integral_is_additive(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
            let f = two_step();
            let lhs = f.integral(a, c);
            let rhs = f.integral(a, b) + f.integral(b, c);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
