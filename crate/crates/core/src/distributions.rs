//! Univariate distributions, left-continuous quantiles and midpoint quantile
//! grids.
//!
//! Every `∫₀¹ … du` integral in the crate is evaluated on a [`QuantileGrid`]:
//! nodes `F̆(uᵢ)` at `uᵢ = (i − ½)/M`, clipped to `[δ, 1 − δ]`.

use std::io::{Read, Write};
use std::path::Path;

use statrs::function::erf::{erfc, erfc_inv};

use crate::{Error, Result};

/// Parametric family or empirical sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    Uniform {
        a: f64,
        b: f64,
    },
    Normal {
        mu: f64,
        sigma: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    Exponential {
        rate: f64,
    },
    PointMass {
        c: f64,
    },
    /// Sample values sorted ascending, equal weights.
    Empirical(Vec<f64>),
}

/// A validated distribution on ℝ.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    kind: Kind,
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {v}")))
    }
}

impl Distribution {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        finite("a", a)?;
        finite("b", b)?;
        if a >= b {
            return Err(Error::Domain(format!("uniform requires a < b, got a={a}, b={b}")));
        }
        Ok(Self {
            kind: Kind::Uniform { a, b },
        })
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        finite("mu", mu)?;
        finite("sigma", sigma)?;
        if sigma <= 0.0 {
            return Err(Error::Domain(format!("normal requires sigma > 0, got {sigma}")));
        }
        Ok(Self {
            kind: Kind::Normal { mu, sigma },
        })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        finite("mu", mu)?;
        finite("sigma", sigma)?;
        if sigma <= 0.0 {
            return Err(Error::Domain(format!("lognormal requires sigma > 0, got {sigma}")));
        }
        Ok(Self {
            kind: Kind::LogNormal { mu, sigma },
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        finite("rate", rate)?;
        if rate <= 0.0 {
            return Err(Error::Domain(format!("exponential requires rate > 0, got {rate}")));
        }
        Ok(Self {
            kind: Kind::Exponential { rate },
        })
    }

    pub fn point_mass(c: f64) -> Result<Self> {
        finite("c", c)?;
        Ok(Self {
            kind: Kind::PointMass { c },
        })
    }

    /// Empirical distribution with equal weights `1/n`. Input order is irrelevant.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Ingestion {
                index: 0,
                reason: "empty sample".into(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Ingestion {
                index,
                reason: format!("non-finite value {}", values[index]),
            });
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            kind: Kind::Empirical(sorted),
        })
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    /// Sorted atoms of an empirical distribution.
    pub fn atoms(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Empirical(v) => Some(v),
            _ => None,
        }
    }

    /// True for point masses and empirical distributions.
    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, Kind::PointMass { .. } | Kind::Empirical(_))
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Kind::Normal { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            Kind::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - mu) / sigma)
                }
            }
            Kind::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Kind::PointMass { c } => {
                if x >= *c {
                    1.0
                } else {
                    0.0
                }
            }
            Kind::Empirical(v) => {
                let count = v.partition_point(|&a| a <= x);
                count as f64 / v.len() as f64
            }
        }
    }

    /// Left-continuous quantile `inf{y : F(y) >= u}` for `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {u}")));
        }
        Ok(self.quantile_unchecked(u))
    }

    fn quantile_unchecked(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Uniform { a, b } => a + u * (b - a),
            Kind::Normal { mu, sigma } => mu + sigma * std_normal_quantile(u),
            Kind::LogNormal { mu, sigma } => (mu + sigma * std_normal_quantile(u)).exp(),
            Kind::Exponential { rate } => -(-u).ln_1p() / rate,
            Kind::PointMass { c } => *c,
            Kind::Empirical(v) => {
                let n = v.len();
                // ⌈u·n⌉-th order statistic, 1-based.
                let k = (u * n as f64).ceil() as usize;
                v[k.clamp(1, n) - 1]
            }
        }
    }

    /// Expectation in closed form (sample mean for empirical data).
    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Uniform { a, b } => 0.5 * (a + b),
            Kind::Normal { mu, .. } => *mu,
            Kind::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Kind::Exponential { rate } => 1.0 / rate,
            Kind::PointMass { c } => *c,
            Kind::Empirical(v) => v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_quantile(u: f64) -> f64 {
    // Work in the nearer tail so that 1 - u does not lose digits.
    if u < 0.5 {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
    } else {
        std::f64::consts::SQRT_2 * erfc_inv(2.0 * (1.0 - u))
    }
}

/// Midpoint level `uᵢ = (i − ½)/M` for the zero-based node index `i`.
pub fn midpoint_u(index: usize, m: usize) -> f64 {
    (index as f64 + 0.5) / m as f64
}

/// Discretised quantile function on the midpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    nodes: Vec<f64>,
    delta: f64,
}

impl QuantileGrid {
    /// Wrap precomputed nodes; they must be non-decreasing.
    pub fn from_nodes(nodes: Vec<f64>, delta: f64) -> Result<Self> {
        check_grid_params(nodes.len(), delta)?;
        if let Some(i) = nodes.windows(2).position(|w| !(w[0] <= w[1])) {
            return Err(Error::Domain(format!(
                "grid nodes must be non-decreasing: node {} = {} > node {} = {}",
                i,
                nodes[i],
                i + 1,
                nodes[i + 1]
            )));
        }
        Ok(Self { nodes, delta })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<f64> {
        self.nodes
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Level of node `i` after clipping to `[δ, 1 − δ]`.
    pub fn u(&self, index: usize) -> f64 {
        midpoint_u(index, self.m()).clamp(self.delta, 1.0 - self.delta)
    }

    /// Midpoint-rule approximation of the mean.
    pub fn mean(&self) -> f64 {
        crate::numeric::pairwise_mean(&self.nodes, crate::numeric::Execution::Serial)
    }
}

fn check_grid_params(m: usize, delta: f64) -> Result<()> {
    if m < 2 {
        return Err(Error::Domain(format!("grid size M must be >= 2, got {m}")));
    }
    if !(delta >= 0.0 && delta < 0.5 / m as f64) {
        return Err(Error::Domain(format!(
            "truncation level must satisfy 0 <= delta < 1/(2M) = {}, got {delta}",
            0.5 / m as f64
        )));
    }
    Ok(())
}

/// Quantile nodes `F̆(clip(uᵢ, δ, 1 − δ))` for `i = 1..M`.
pub fn quantile_grid(dist: &Distribution, m: usize, delta: f64) -> Result<QuantileGrid> {
    check_grid_params(m, delta)?;
    let nodes = (0..m)
        .map(|i| dist.quantile_unchecked(midpoint_u(i, m).clamp(delta, 1.0 - delta)))
        .collect();
    Ok(QuantileGrid { nodes, delta })
}

/// Read one numeric value per line, with an optional `value` header.
pub fn read_values_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut values = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = record.get(0).unwrap_or("");
        if line == 0 && field.eq_ignore_ascii_case("value") {
            continue;
        }
        if field.is_empty() {
            continue;
        }
        let v: f64 = field.parse().map_err(|_| Error::Ingestion {
            index: values.len(),
            reason: format!("cannot parse {field:?} as a number"),
        })?;
        values.push(v);
    }
    Ok(values)
}

/// Write the grid as CSV with header `u,value`, one row per node. Numbers
/// use 17 significant digits.
pub fn write_grid_csv<W: Write>(grid: &QuantileGrid, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["u", "value"])?;
    for (i, x) in grid.nodes().iter().enumerate() {
        w.write_record([format!("{:.16e}", grid.u(i)), format!("{x:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Empirical distribution from a CSV file (see [`read_values_csv`]).
pub fn load_empirical(path: impl AsRef<Path>) -> Result<Distribution> {
    let file = std::fs::File::open(path)?;
    Distribution::from_samples(&read_values_csv(file)?)
}
