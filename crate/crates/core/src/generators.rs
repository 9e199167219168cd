//! Convex generators φ for Bregman divergences and concave distortion
//! functions g for Choquet integrals.

use crate::distributions::midpoint_u;
use crate::{Error, Result};

/// Built-in strictly convex generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexGenerator {
    /// φ(x) = x²
    Quadratic,
    /// φ(x) = x⁴
    Quartic,
    /// φ(x) = eˣ
    Exp,
    /// φ(x) = x·log x on (0, ∞)
    XLogX,
}

impl ConvexGenerator {
    pub const ALL: [ConvexGenerator; 4] = [
        ConvexGenerator::Quadratic,
        ConvexGenerator::Quartic,
        ConvexGenerator::Exp,
        ConvexGenerator::XLogX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConvexGenerator::Quadratic => "quadratic",
            ConvexGenerator::Quartic => "quartic",
            ConvexGenerator::Exp => "exp",
            ConvexGenerator::XLogX => "xlogx",
        }
    }

    /// Every catalog generator is strictly convex.
    pub fn is_strict(self) -> bool {
        true
    }

    /// True when φ is only defined on (0, ∞).
    pub fn positive_domain(self) -> bool {
        matches!(self, ConvexGenerator::XLogX)
    }

    pub fn in_domain(self, x: f64) -> bool {
        x.is_finite() && (!self.positive_domain() || x > 0.0)
    }

    fn check(self, x: f64) -> Result<()> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{x} is outside the domain of phi:{}",
                self.name()
            )))
        }
    }

    pub fn phi(self, x: f64) -> f64 {
        match self {
            ConvexGenerator::Quadratic => x * x,
            ConvexGenerator::Quartic => x.powi(4),
            ConvexGenerator::Exp => x.exp(),
            ConvexGenerator::XLogX => x * x.ln(),
        }
    }

    /// φ′(x).
    pub fn dphi(self, x: f64) -> f64 {
        match self {
            ConvexGenerator::Quadratic => 2.0 * x,
            ConvexGenerator::Quartic => 4.0 * x.powi(3),
            ConvexGenerator::Exp => x.exp(),
            ConvexGenerator::XLogX => x.ln() + 1.0,
        }
    }

    /// Open interval containing the range of φ′.
    pub fn dphi_range(self) -> (f64, f64) {
        match self {
            ConvexGenerator::Exp => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// (φ′)⁻¹(y).
    pub fn inv_dphi(self, y: f64) -> Result<f64> {
        let (lo, hi) = self.dphi_range();
        if !(y > lo && y < hi) {
            return Err(Error::Range {
                what: format!("phi:{} derivative", self.name()),
                value: y,
                lo,
                hi,
            });
        }
        Ok(match self {
            ConvexGenerator::Quadratic => 0.5 * y,
            ConvexGenerator::Quartic => (0.25 * y).cbrt(),
            ConvexGenerator::Exp => y.ln(),
            ConvexGenerator::XLogX => (y - 1.0).exp(),
        })
    }

    /// `B_φ(a, b) = φ(a) − φ(b) − φ′(b)(a − b)`, evaluated in a form that
    /// avoids cancellation.
    pub fn bregman(self, a: f64, b: f64) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        let d = a - b;
        Ok(match self {
            ConvexGenerator::Quadratic => d * d,
            ConvexGenerator::Quartic => d * d * ((a + b) * (a + b) + 2.0 * b * b),
            ConvexGenerator::Exp => b.exp() * (d.exp_m1() - d),
            ConvexGenerator::XLogX => a * (a / b).ln() - a + b,
        })
    }
}

/// Concave distortion functions, described through their weight
/// `γ(u) = ∂₋g(1 − u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistortionSpec {
    /// g(x) = x (the mean).
    Identity,
    /// g(x) = 1 − (1 − x)^k, k ≥ 1.
    DualPower { k: f64 },
    /// g(x) = min(x/(1 − α), 1).
    Tvar { alpha: f64 },
    /// g(x) = x^c, 0 < c < 1.
    Power { c: f64 },
}

impl DistortionSpec {
    pub fn dual_power(k: f64) -> Result<Self> {
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::Domain(format!("dual-power distortion needs k >= 1, got {k}")));
        }
        Ok(DistortionSpec::DualPower { k })
    }

    pub fn tvar(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("TVaR level must lie in (0, 1), got {alpha}")));
        }
        Ok(DistortionSpec::Tvar { alpha })
    }

    pub fn power(c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Domain(format!("power distortion needs 0 < c < 1, got {c}")));
        }
        Ok(DistortionSpec::Power { c })
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistortionSpec::Identity => "identity",
            DistortionSpec::DualPower { .. } => "dualpower",
            DistortionSpec::Tvar { .. } => "tvar",
            DistortionSpec::Power { .. } => "power",
        }
    }

    /// Strict concavity, the hypothesis under which the worst case is unique.
    pub fn is_strict(&self) -> bool {
        match self {
            DistortionSpec::Identity | DistortionSpec::Tvar { .. } => false,
            DistortionSpec::DualPower { k } => *k > 1.0,
            DistortionSpec::Power { .. } => true,
        }
    }

    /// The distortion g(x) on [0, 1].
    pub fn distort(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            DistortionSpec::Identity => x,
            DistortionSpec::DualPower { k } => 1.0 - (1.0 - x).powf(k),
            DistortionSpec::Tvar { alpha } => (x / (1.0 - alpha)).min(1.0),
            DistortionSpec::Power { c } => x.powf(c),
        }
    }

    /// `Γ(u) = ∫₀ᵘ γ = 1 − g(1 − u)`, written without the subtraction where possible.
    fn cumulative(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            DistortionSpec::Identity => u,
            DistortionSpec::DualPower { k } => u.powf(k),
            DistortionSpec::Tvar { alpha } => ((u - alpha) / (1.0 - alpha)).max(0.0),
            DistortionSpec::Power { c } => 1.0 - (1.0 - u).powf(c),
        }
    }

    /// Pointwise weight γ(u) for `u ∈ (0, 1)` (left derivative at kinks).
    pub fn gamma(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("distortion weight needs u in (0, 1), got {u}")));
        }
        Ok(match *self {
            DistortionSpec::Identity => 1.0,
            DistortionSpec::DualPower { k } => k * u.powf(k - 1.0),
            DistortionSpec::Tvar { alpha } => {
                if u >= alpha {
                    1.0 / (1.0 - alpha)
                } else {
                    0.0
                }
            }
            DistortionSpec::Power { c } => c * (1.0 - u).powf(c - 1.0),
        })
    }

    /// Cell-averaged weights `M·(Γ(i/M) − Γ((i−1)/M))` on the midpoint grid.
    ///
    /// They agree with γ(uᵢ) for the piecewise-linear cases and integrate to
    /// one exactly (telescoping), which matters for the unbounded power weight.
    pub fn weights(&self, m: usize) -> Vec<f64> {
        let mf = m as f64;
        match *self {
            DistortionSpec::Identity => vec![1.0; m],
            DistortionSpec::DualPower { k: 1.0 } => vec![1.0; m],
            _ => (0..m)
                .map(|i| {
                    let lo = i as f64 / mf;
                    let hi = (i + 1) as f64 / mf;
                    mf * (self.cumulative(hi) - self.cumulative(lo))
                })
                .collect(),
        }
    }

    /// Pointwise weights γ(uᵢ) on the midpoint grid.
    pub fn pointwise_weights(&self, m: usize) -> Vec<f64> {
        (0..m)
            .map(|i| self.gamma(midpoint_u(i, m)).expect("midpoints lie in (0, 1)"))
            .collect()
    }
}
