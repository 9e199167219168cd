//! Elicitable functionals `T(F)`, argmins of expected scores and empirical
//! checks of the risk-measure axioms.
//!
//! Empirical distributions are handled on their atoms. Parametric
//! distributions are discretised on the default midpoint quantile grid, so
//! every expectation below is an equally weighted mean over a finite support.

use std::borrow::Cow;

use serde::Serialize;

use crate::distributions::{quantile_grid, Distribution};
use crate::numeric::{bisect_decreasing, golden_section, pairwise_mean, Execution};
use crate::scores::{LossFunction, Penalty, Score, StepFunction};
use crate::{Error, Result, DEFAULT_DELTA, DEFAULT_GRID_M};

/// Root-finding bracket width.
const ROOT_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    Mean,
    Quantile {
        alpha: f64,
    },
    Expectile {
        alpha: f64,
    },
    /// `inf{x : E ℓ(Y − x) ≤ 0}`
    Shortfall(LossFunction),
    /// `inf{y : F(y) > Λ(y)}`
    LambdaQuantile(StepFunction),
    /// `(1/γ) log E e^{γY}`
    Entropic {
        gamma: f64,
    },
}

impl Functional {
    pub fn quantile(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Functional::Quantile { alpha })
    }

    pub fn expectile(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Functional::Expectile { alpha })
    }

    pub fn entropic(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(Functional::Entropic { gamma })
        } else {
            Err(Error::Domain(format!("entropic gamma must be positive, got {gamma}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Functional::Mean => "mean",
            Functional::Quantile { .. } => "quantile",
            Functional::Expectile { .. } => "expectile",
            Functional::Shortfall(_) => "shortfall",
            Functional::LambdaQuantile(_) => "lambda",
            Functional::Entropic { .. } => "entropic",
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("level alpha must lie in (0, 1), got {alpha}")))
    }
}

/// The functional a base score is strictly consistent for, when it has a
/// closed-form evaluator here.
pub fn elicited_functional(score: &Score) -> Option<Functional> {
    match score {
        Score::Bregman(_) => Some(Functional::Mean),
        Score::Gpl { alpha, .. } => Some(Functional::Quantile { alpha: *alpha }),
        Score::LambdaQuantile(step) => Some(Functional::LambdaQuantile(step.clone())),
        Score::Expectile { alpha, .. } => Some(Functional::Expectile { alpha: *alpha }),
        Score::Shortfall(loss) => Some(Functional::Shortfall(*loss)),
        Score::Decomposable { penalty, alpha, beta } => {
            if !(*alpha > 0.0 && *beta > 0.0) {
                return None;
            }
            let level = alpha / (alpha + beta);
            match penalty {
                Penalty::Linear => Some(Functional::Quantile { alpha: level }),
                Penalty::Quadratic => Some(Functional::Expectile { alpha: level }),
                Penalty::Quartic => None,
            }
        }
        Score::Entropic { gamma, .. } => Some(Functional::Entropic { gamma: *gamma }),
        Score::Osband { .. } | Score::DistTransform { .. } => None,
    }
}

/// Atoms of an empirical distribution, or default-grid quantile nodes.
fn support(dist: &Distribution) -> Result<Cow<'_, [f64]>> {
    match dist.atoms() {
        Some(a) => Ok(Cow::Borrowed(a)),
        None => Ok(Cow::Owned(
            quantile_grid(dist, DEFAULT_GRID_M, DEFAULT_DELTA)?.into_nodes(),
        )),
    }
}

fn expect<F: Fn(f64) -> f64>(values: &[f64], f: F) -> f64 {
    let mapped: Vec<f64> = values.iter().map(|&y| f(y)).collect();
    pairwise_mean(&mapped, Execution::Serial)
}

fn finite_moment(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Moment(format!("{what} is not finite")))
    }
}

/// `T(F)` for the given functional.
pub fn evaluate(t: &Functional, dist: &Distribution) -> Result<f64> {
    match t {
        Functional::Mean => finite_moment("mean", dist.mean()),
        Functional::Quantile { alpha } => dist.quantile(*alpha),
        Functional::Expectile { alpha } => {
            let ys = support(dist)?;
            finite_moment("mean", expect(&ys, |y| y.abs()))?;
            let (lo, hi) = extremes(&ys);
            Ok(bisect_decreasing(lo, hi, ROOT_WIDTH, |z| {
                expectile_residual(&ys, *alpha, z)
            }))
        }
        Functional::Shortfall(loss) => {
            let ys = support(dist)?;
            let (lo, hi) = extremes(&ys);
            finite_moment("expected loss", expect(&ys, |y| loss.ell(y - lo)))?;
            Ok(bisect_decreasing(lo, hi, ROOT_WIDTH, |x| {
                expect(&ys, |y| loss.ell(y - x))
            }))
        }
        Functional::LambdaQuantile(step) => lambda_quantile(step, dist),
        Functional::Entropic { gamma } => {
            let ys = support(dist)?;
            let (_, top) = extremes(&ys);
            let m = expect(&ys, |y| (gamma * (y - top)).exp());
            finite_moment("exponential moment", top + m.ln() / gamma)
        }
    }
}

fn extremes(ys: &[f64]) -> (f64, f64) {
    ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
        (lo.min(y), hi.max(y))
    })
}

/// `α·E(Y − z)₊ − (1 − α)·E(z − Y)₊`, non-increasing in `z`.
pub fn expectile_residual(ys: &[f64], alpha: f64, z: f64) -> f64 {
    let up = expect(ys, |y| (y - z).max(0.0));
    let down = expect(ys, |y| (z - y).max(0.0));
    alpha * up - (1.0 - alpha) * down
}

/// First crossing of `F` over `Λ`, scanned cell by cell over the steps of Λ.
fn lambda_quantile(step: &StepFunction, dist: &Distribution) -> Result<f64> {
    let bps = step.breakpoints();
    let levels = step.levels();
    // inf{y : F(y) > l} over the whole line.
    let upper = |l: f64| -> Result<f64> {
        match dist.atoms() {
            Some(a) => {
                let k = a.partition_point(|&x| !(dist.cdf(x) > l));
                Ok(a[k.min(a.len() - 1)])
            }
            None => dist.quantile(l),
        }
    };
    let mut crossing = None;
    for (k, &l) in levels.iter().enumerate() {
        let start = if k == 0 { f64::NEG_INFINITY } else { bps[k - 1] };
        let end = bps.get(k).copied().unwrap_or(f64::INFINITY);
        match crossing {
            None => {
                let q = upper(l)?.max(start);
                if q < end {
                    crossing = Some(q);
                }
            }
            Some(y) => {
                if !(dist.cdf(start) > l) {
                    return Err(Error::Ambiguity(format!(
                        "F crosses Λ at {y} but falls back to or below Λ = {l} at {start}"
                    )));
                }
            }
        }
    }
    crossing.ok_or_else(|| Error::Ambiguity("F never exceeds Λ".into()))
}

/// Expected score `E_F S(z, Y)`; evaluation failures count as `+∞`.
pub fn expected_score(score: &Score, dist: &Distribution, z: f64) -> Result<f64> {
    let ys = support(dist)?;
    Ok(expected_on(score, &ys, z))
}

fn expected_on(score: &Score, ys: &[f64], z: f64) -> f64 {
    let mut vals = Vec::with_capacity(ys.len());
    for &y in ys {
        match score.eval(z, y) {
            Ok(v) => vals.push(v),
            Err(_) => return f64::INFINITY,
        }
    }
    pairwise_mean(&vals, Execution::Serial)
}

/// Minimiser of `z ↦ E_F S(z, Y)` over `[z_lo, z_hi]`: the best of `steps`
/// equispaced points, refined by golden-section search on the neighbouring
/// bracket. Ties go to the smallest `z`.
pub fn argmin_expected_score(score: &Score, dist: &Distribution, z_lo: f64, z_hi: f64, steps: usize) -> Result<f64> {
    if !(z_lo < z_hi) || steps < 2 {
        return Err(Error::Domain(format!(
            "argmin needs z_lo < z_hi and steps >= 2, got [{z_lo}, {z_hi}] with {steps} steps"
        )));
    }
    let ys = support(dist)?;
    let h = (z_hi - z_lo) / (steps - 1) as f64;
    let at = |j: usize| if j + 1 == steps { z_hi } else { z_lo + h * j as f64 };
    let mut best: Option<(usize, f64)> = None;
    for j in 0..steps {
        let v = expected_on(score, &ys, at(j));
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((j, v));
        }
    }
    let (j, _) = best.ok_or_else(|| {
        Error::Evaluation(format!(
            "expected {} score is not finite anywhere on [{z_lo}, {z_hi}]",
            score.family()
        ))
    })?;
    let a = at(j.saturating_sub(1));
    let b = at((j + 1).min(steps - 1));
    let width = 1e-11 * (1.0 + z_lo.abs().max(z_hi.abs()));
    Ok(golden_section(a, b, width, |z| expected_on(score, &ys, z)))
}

/// Knobs for [`check_axioms`].
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomParams {
    /// Translation `m` in `T[X + m] = T[X] + m`.
    pub shift: f64,
    /// Scale `λ > 0` in `T[λX] = λT[X]`.
    pub scale: f64,
    /// Mixing weights used for the convexity check.
    pub mix: Vec<f64>,
    /// Absolute tolerance, scaled by `1 + |T|`.
    pub tol: f64,
}

impl Default for AxiomParams {
    fn default() -> Self {
        Self {
            shift: 1.5,
            scale: 2.5,
            mix: vec![0.25, 0.5, 0.75],
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomWitness {
    pub pair: usize,
    pub detail: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub passed: bool,
    pub checks: usize,
    pub max_violation: f64,
    pub witness: Option<AxiomWitness>,
}

impl AxiomCheck {
    fn new() -> Self {
        Self {
            passed: true,
            checks: 0,
            max_violation: 0.0,
            witness: None,
        }
    }

    /// Record `lhs ≤ rhs` (or `lhs = rhs` when `equality`).
    fn record(&mut self, pair: usize, detail: impl FnOnce() -> String, lhs: f64, rhs: f64, equality: bool, tol: f64) {
        self.checks += 1;
        let excess = if equality { (lhs - rhs).abs() } else { lhs - rhs };
        let allowed = tol * (1.0 + lhs.abs().max(rhs.abs()));
        self.max_violation = self.max_violation.max(excess.max(0.0));
        if excess > allowed && self.passed {
            self.passed = false;
            self.witness = Some(AxiomWitness {
                pair,
                detail: detail(),
                lhs,
                rhs,
            });
        }
    }
}

/// Findings of [`check_axioms`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub translation: AxiomCheck,
    pub homogeneity: AxiomCheck,
    pub monotonicity: AxiomCheck,
    pub convexity: AxiomCheck,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.translation.passed && self.homogeneity.passed && self.monotonicity.passed && self.convexity.passed
    }
}

/// Check translation invariance, positive homogeneity, monotonicity and
/// convexity of `t` on empirical distributions built from the sample pairs.
///
/// Pairs are coupled elementwise. Monotonicity compares `X` with the
/// pointwise maximum `max(X, Y) ≥ X`.
pub fn check_axioms(t: &Functional, pairs: &[(Vec<f64>, Vec<f64>)], params: &AxiomParams) -> Result<AxiomReport> {
    let eval = |xs: &[f64]| -> Result<f64> { evaluate(t, &Distribution::from_samples(xs)?) };
    let mut report = AxiomReport {
        translation: AxiomCheck::new(),
        homogeneity: AxiomCheck::new(),
        monotonicity: AxiomCheck::new(),
        convexity: AxiomCheck::new(),
    };
    let tol = params.tol;
    for (i, (x, y)) in pairs.iter().enumerate() {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::Domain(format!(
                "sample pair {i} must be non-empty and aligned, got lengths {} and {}",
                x.len(),
                y.len()
            )));
        }
        let tx = eval(x)?;
        let ty = eval(y)?;
        for (label, s, ts) in [("X", x, tx), ("Y", y, ty)] {
            let shifted: Vec<f64> = s.iter().map(|v| v + params.shift).collect();
            let lhs = eval(&shifted)?;
            report.translation.record(
                i,
                || format!("T[{label} + {}] vs T[{label}] + {}", params.shift, params.shift),
                lhs,
                ts + params.shift,
                true,
                tol,
            );
            let scaled: Vec<f64> = s.iter().map(|v| v * params.scale).collect();
            let lhs = eval(&scaled)?;
            report.homogeneity.record(
                i,
                || format!("T[{0}·{label}] vs {0}·T[{label}]", params.scale),
                lhs,
                params.scale * ts,
                true,
                tol,
            );
        }
        let upper: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.max(*b)).collect();
        let tu = eval(&upper)?;
        report
            .monotonicity
            .record(i, || "T[X] vs T[max(X, Y)]".into(), tx, tu, false, tol);
        for &w in &params.mix {
            let mixed: Vec<f64> = x.iter().zip(y).map(|(a, b)| w * a + (1.0 - w) * b).collect();
            let lhs = eval(&mixed)?;
            report.convexity.record(
                i,
                || format!("T[{w}·X + {}·Y] vs {w}·T[X] + {}·T[Y]", 1.0 - w, 1.0 - w),
                lhs,
                w * tx + (1.0 - w) * ty,
                false,
                tol,
            );
        }
    }
    Ok(report)
}
