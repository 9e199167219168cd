//! Textual spec strings for every catalog object.
//!
//! | Object | Example |
//! |--------|---------|
//! | distribution | `normal:mu=0,sigma=1`, `uniform:a=0,b=1`, `lognormal:mu=0,sigma=0.5`, `exponential:rate=2`, `point:c=1`, `empirical:path=data.csv` |
//! | generator | `phi:quadratic` (`quartic`, `exp`, `xlogx`) |
//! | distortion | `distortion:identity`, `distortion:dualpower,k=2`, `distortion:tvar,alpha=0.9`, `distortion:power,c=0.5` |
//! | score | `score:bregman,phi=quadratic`, `score:gpl,alpha=0.9,g=identity`, `score:lambda,file=steps.json`, ... |
//! | functional | `functional:mean`, `functional:quantile,alpha=0.9`, ... |
//! | market | `market:spd=lognormal:mu=-0.02,sigma=0.2;r=0.01;T=1` |
//!
//! Scores accept two optional transform keys: `dist=<map>` applies `h` to
//! the observation and `osband=<map>` applies `g` to the report (the
//! observation transform is innermost). Maps are `identity`, `cube`,
//! `reciprocal`, `exp[:rate]` and `log[:rate]`.
//!
//! Rendering is canonical (fixed key order, shortest round-trip numbers), so
//! `parse(render(x)) == x`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::distributions::{load_empirical, Distribution, Kind};
use crate::functionals::Functional;
use crate::generators::{ConvexGenerator, DistortionSpec};
use crate::payoff::MarketSpec;
use crate::scores::{LossFunction, MonotoneMap, Penalty, Score, StepFunction};
use crate::{Error, Result};

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn number(key: &str, v: &str, whole: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| config(format!("invalid number `{v}` for `{key}` in `{whole}`")))
}

/// `key=value` pairs with duplicate and leftover detection.
struct Params<'a> {
    whole: &'a str,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Params<'a> {
    fn parse(tokens: impl Iterator<Item = &'a str>, whole: &'a str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| config(format!("expected key=value, got `{tok}` in `{whole}`")))?;
            if map.insert(k.trim(), v.trim()).is_some() {
                return Err(config(format!("duplicate key `{k}` in `{whole}`")));
            }
        }
        Ok(Self { whole, map })
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.map.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<&'a str> {
        self.take(key)
            .ok_or_else(|| config(format!("missing `{key}` in `{}`", self.whole)))
    }

    fn num(&mut self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        number(key, v, self.whole)
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(config(format!("unknown key `{k}` in `{}`", self.whole))),
            None => Ok(()),
        }
    }
}

fn strip<'a>(s: &'a str, prefix: &str) -> Result<&'a str> {
    s.trim()
        .strip_prefix(prefix)
        .ok_or_else(|| config(format!("expected `{prefix}...`, got `{s}`")))
}

/// A distribution, possibly still referring to a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    Parametric(Distribution),
    Empirical(PathBuf),
}

impl DistSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| config(format!("distribution spec `{s}` needs a `kind:` prefix")))?;
        if kind == "empirical" {
            // `empirical:path=<file>`; a bare path is accepted too.
            let path = rest.strip_prefix("path=").unwrap_or(rest);
            if path.is_empty() {
                return Err(config(format!("empirical spec `{s}` needs a file path")));
            }
            return Ok(DistSpec::Empirical(PathBuf::from(path)));
        }
        let mut p = Params::parse(rest.split(',').filter(|t| !t.is_empty()), s)?;
        let dist = match kind {
            "uniform" => Distribution::uniform(p.num("a")?, p.num("b")?)?,
            "normal" => Distribution::normal(p.num("mu")?, p.num("sigma")?)?,
            "lognormal" => Distribution::lognormal(p.num("mu")?, p.num("sigma")?)?,
            "exponential" => Distribution::exponential(p.num("rate")?)?,
            "point" | "point_mass" => Distribution::point_mass(p.num("c")?)?,
            other => return Err(config(format!("unknown distribution kind `{other}` in `{s}`"))),
        };
        p.finish()?;
        Ok(DistSpec::Parametric(dist))
    }

    /// Resolve to a distribution, reading the CSV file if needed.
    pub fn load(&self) -> Result<Distribution> {
        self.load_relative(Path::new(""))
    }

    /// As [`DistSpec::load`], resolving relative paths against `base`.
    pub fn load_relative(&self, base: &Path) -> Result<Distribution> {
        match self {
            DistSpec::Parametric(d) => Ok(d.clone()),
            DistSpec::Empirical(p) => load_empirical(base.join(p)),
        }
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistSpec::Empirical(p) => write!(f, "empirical:path={}", p.display()),
            DistSpec::Parametric(d) => match d.kind() {
                Kind::Uniform { a, b } => write!(f, "uniform:a={a},b={b}"),
                Kind::Normal { mu, sigma } => write!(f, "normal:mu={mu},sigma={sigma}"),
                Kind::LogNormal { mu, sigma } => write!(f, "lognormal:mu={mu},sigma={sigma}"),
                Kind::Exponential { rate } => write!(f, "exponential:rate={rate}"),
                Kind::PointMass { c } => write!(f, "point:c={c}"),
                // Samples have no compact spec form; list them inline for display only.
                Kind::Empirical(v) => {
                    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    write!(f, "empirical:[{}]", parts.join(";"))
                }
            },
        }
    }
}

pub fn parse_generator(s: &str) -> Result<ConvexGenerator> {
    let name = strip(s, "phi:")?;
    generator_name(name, s)
}

fn generator_name(name: &str, whole: &str) -> Result<ConvexGenerator> {
    ConvexGenerator::ALL
        .into_iter()
        .find(|g| g.name() == name)
        .ok_or_else(|| config(format!("unknown generator `{name}` in `{whole}`")))
}

pub fn render_generator(g: ConvexGenerator) -> String {
    format!("phi:{}", g.name())
}

pub fn parse_distortion(s: &str) -> Result<DistortionSpec> {
    let rest = strip(s, "distortion:")?;
    let mut it = rest.split(',');
    let kind = it.next().unwrap_or_default();
    let mut p = Params::parse(it, s)?;
    let d = match kind {
        "identity" => DistortionSpec::Identity,
        "dualpower" => DistortionSpec::dual_power(p.num("k")?)?,
        "tvar" => DistortionSpec::tvar(p.num("alpha")?)?,
        "power" => DistortionSpec::power(p.num("c")?)?,
        other => return Err(config(format!("unknown distortion `{other}` in `{s}`"))),
    };
    p.finish()?;
    Ok(d)
}

pub fn render_distortion(d: &DistortionSpec) -> String {
    match d {
        DistortionSpec::Identity => "distortion:identity".into(),
        DistortionSpec::DualPower { k } => format!("distortion:dualpower,k={k}"),
        DistortionSpec::Tvar { alpha } => format!("distortion:tvar,alpha={alpha}"),
        DistortionSpec::Power { c } => format!("distortion:power,c={c}"),
    }
}

pub fn parse_map(s: &str) -> Result<MonotoneMap> {
    let (name, rate) = match s.split_once(':') {
        Some((n, r)) => (n, Some(number("rate", r, s)?)),
        None => (s, None),
    };
    let fixed = |m: MonotoneMap| match rate {
        Some(_) => Err(config(format!("map `{name}` takes no rate, got `{s}`"))),
        None => Ok(m),
    };
    match name {
        "identity" => fixed(MonotoneMap::Identity),
        "cube" => fixed(MonotoneMap::Cube),
        "reciprocal" => fixed(MonotoneMap::Reciprocal),
        "exp" => MonotoneMap::exp(rate.unwrap_or(1.0)),
        "log" => MonotoneMap::log(rate.unwrap_or(1.0)),
        other => Err(config(format!("unknown or non-invertible map `{other}`"))),
    }
}

pub fn render_map(m: &MonotoneMap) -> String {
    match *m {
        MonotoneMap::Exp { rate } if rate != 1.0 => format!("exp:{rate}"),
        MonotoneMap::Log { rate } if rate != 1.0 => format!("log:{rate}"),
        _ => m.name().to_string(),
    }
}

fn parse_loss(p: &mut Params<'_>) -> Result<LossFunction> {
    match p.require("loss")? {
        "linear" => Ok(LossFunction::Linear),
        "exponential" => LossFunction::exponential(p.num("gamma")?),
        "power" => LossFunction::power_odd(p.num("p")?),
        other => Err(config(format!("unknown loss `{other}` in `{}`", p.whole))),
    }
}

fn render_loss(l: &LossFunction) -> String {
    match l {
        LossFunction::Linear => "loss=linear".into(),
        LossFunction::Exponential { gamma } => format!("loss=exponential,gamma={gamma}"),
        LossFunction::PowerOdd { p } => format!("loss=power,p={p}"),
    }
}

/// Λ given inline or by a JSON file.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSource {
    File(PathBuf),
    Inline(StepFunction),
}

impl StepSource {
    fn parse(p: &mut Params<'_>) -> Result<Self> {
        if let Some(f) = p.take("file") {
            return Ok(StepSource::File(PathBuf::from(f)));
        }
        let list = |v: &str| -> Result<Vec<f64>> {
            v.split(';')
                .filter(|t| !t.is_empty())
                .map(|t| number("step", t, p.whole))
                .collect()
        };
        let levels = list(p.require("levels")?)?;
        let breakpoints = match p.take("breakpoints") {
            Some(b) => list(b)?,
            None => Vec::new(),
        };
        Ok(StepSource::Inline(StepFunction::new(breakpoints, levels)?))
    }

    fn render(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        match self {
            StepSource::File(p) => format!("file={}", p.display()),
            StepSource::Inline(s) if s.breakpoints().is_empty() => format!("levels={}", join(s.levels())),
            StepSource::Inline(s) => format!("breakpoints={},levels={}", join(s.breakpoints()), join(s.levels())),
        }
    }

    pub fn load_relative(&self, base: &Path) -> Result<StepFunction> {
        match self {
            StepSource::Inline(s) => Ok(s.clone()),
            StepSource::File(p) => StepFunction::from_json(&std::fs::read_to_string(base.join(p))?),
        }
    }
}

/// Base score family with its parameters, before transforms.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseScore {
    Bregman(ConvexGenerator),
    Gpl { g: MonotoneMap, alpha: f64 },
    Lambda(StepSource),
    Expectile { phi: ConvexGenerator, alpha: f64 },
    Shortfall(LossFunction),
    Decomposable { phi: Penalty, alpha: f64, beta: f64 },
    Entropic { phi: ConvexGenerator, gamma: f64 },
}

/// A parsed `score:` string.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSpec {
    pub base: BaseScore,
    /// Observation transform `h`, applied first.
    pub dist: Option<MonotoneMap>,
    /// Report transform `g`.
    pub osband: Option<MonotoneMap>,
}

fn penalty_name(name: &str, whole: &str) -> Result<Penalty> {
    [Penalty::Linear, Penalty::Quadratic, Penalty::Quartic]
        .into_iter()
        .find(|p| p.name() == name)
        .ok_or_else(|| config(format!("unknown penalty `{name}` in `{whole}`")))
}

impl ScoreSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let rest = strip(s, "score:")?;
        let mut it = rest.split(',');
        let family = it.next().unwrap_or_default();
        let mut p = Params::parse(it, s)?;
        let base = match family {
            "bregman" => BaseScore::Bregman(generator_name(p.require("phi")?, s)?),
            "gpl" => BaseScore::Gpl {
                alpha: p.num("alpha")?,
                g: parse_map(p.take("g").unwrap_or("identity"))?,
            },
            "lambda" => BaseScore::Lambda(StepSource::parse(&mut p)?),
            "expectile" => BaseScore::Expectile {
                alpha: p.num("alpha")?,
                phi: generator_name(p.require("phi")?, s)?,
            },
            "shortfall" => BaseScore::Shortfall(parse_loss(&mut p)?),
            "decomposable" => BaseScore::Decomposable {
                phi: penalty_name(p.require("phi")?, s)?,
                alpha: p.num("alpha")?,
                beta: p.num("beta")?,
            },
            "entropic" => BaseScore::Entropic {
                gamma: p.num("gamma")?,
                phi: generator_name(p.require("phi")?, s)?,
            },
            other => return Err(config(format!("unknown score family `{other}` in `{s}`"))),
        };
        let dist = p.take("dist").map(parse_map).transpose()?;
        let osband = p.take("osband").map(parse_map).transpose()?;
        p.finish()?;
        Ok(Self { base, dist, osband })
    }

    pub fn render(&self) -> String {
        let mut out = match &self.base {
            BaseScore::Bregman(g) => format!("score:bregman,phi={}", g.name()),
            BaseScore::Gpl { g, alpha } => format!("score:gpl,alpha={alpha},g={}", render_map(g)),
            BaseScore::Lambda(src) => format!("score:lambda,{}", src.render()),
            BaseScore::Expectile { phi, alpha } => format!("score:expectile,alpha={alpha},phi={}", phi.name()),
            BaseScore::Shortfall(l) => format!("score:shortfall,{}", render_loss(l)),
            BaseScore::Decomposable { phi, alpha, beta } => {
                format!("score:decomposable,phi={},alpha={alpha},beta={beta}", phi.name())
            }
            BaseScore::Entropic { phi, gamma } => format!("score:entropic,gamma={gamma},phi={}", phi.name()),
        };
        if let Some(h) = &self.dist {
            out.push_str(&format!(",dist={}", render_map(h)));
        }
        if let Some(g) = &self.osband {
            out.push_str(&format!(",osband={}", render_map(g)));
        }
        out
    }

    pub fn build(&self) -> Result<Score> {
        self.build_relative(Path::new(""))
    }

    /// Build the score, resolving a Λ file against `base`.
    pub fn build_relative(&self, base: &Path) -> Result<Score> {
        let mut score = match &self.base {
            BaseScore::Bregman(g) => Score::bregman(*g),
            BaseScore::Gpl { g, alpha } => Score::gpl(*g, *alpha)?,
            BaseScore::Lambda(src) => Score::lambda_quantile(src.load_relative(base)?),
            BaseScore::Expectile { phi, alpha } => Score::expectile(*phi, *alpha)?,
            BaseScore::Shortfall(l) => Score::shortfall(*l),
            BaseScore::Decomposable { phi, alpha, beta } => Score::decomposable(*phi, *alpha, *beta)?,
            BaseScore::Entropic { phi, gamma } => Score::entropic(*phi, *gamma)?,
        };
        if let Some(h) = self.dist {
            score = Score::dist_transform(score, h);
        }
        if let Some(g) = self.osband {
            score = Score::osband_transform(score, g);
        }
        Ok(score)
    }
}

/// A parsed `functional:` string.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalSpec {
    Mean,
    Quantile { alpha: f64 },
    Expectile { alpha: f64 },
    Shortfall(LossFunction),
    Lambda(StepSource),
    Entropic { gamma: f64 },
}

impl FunctionalSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let rest = strip(s, "functional:")?;
        let mut it = rest.split(',');
        let kind = it.next().unwrap_or_default();
        let mut p = Params::parse(it, s)?;
        let f = match kind {
            "mean" => FunctionalSpec::Mean,
            "quantile" => FunctionalSpec::Quantile { alpha: p.num("alpha")? },
            "expectile" => FunctionalSpec::Expectile { alpha: p.num("alpha")? },
            "shortfall" => FunctionalSpec::Shortfall(parse_loss(&mut p)?),
            "lambda" => FunctionalSpec::Lambda(StepSource::parse(&mut p)?),
            "entropic" => FunctionalSpec::Entropic { gamma: p.num("gamma")? },
            other => return Err(config(format!("unknown functional `{other}` in `{s}`"))),
        };
        p.finish()?;
        Ok(f)
    }

    pub fn render(&self) -> String {
        match self {
            FunctionalSpec::Mean => "functional:mean".into(),
            FunctionalSpec::Quantile { alpha } => format!("functional:quantile,alpha={alpha}"),
            FunctionalSpec::Expectile { alpha } => format!("functional:expectile,alpha={alpha}"),
            FunctionalSpec::Shortfall(l) => format!("functional:shortfall,{}", render_loss(l)),
            FunctionalSpec::Lambda(src) => format!("functional:lambda,{}", src.render()),
            FunctionalSpec::Entropic { gamma } => format!("functional:entropic,gamma={gamma}"),
        }
    }

    pub fn build_relative(&self, base: &Path) -> Result<Functional> {
        Ok(match self {
            FunctionalSpec::Mean => Functional::Mean,
            FunctionalSpec::Quantile { alpha } => Functional::quantile(*alpha)?,
            FunctionalSpec::Expectile { alpha } => Functional::expectile(*alpha)?,
            FunctionalSpec::Shortfall(l) => Functional::Shortfall(*l),
            FunctionalSpec::Lambda(src) => Functional::LambdaQuantile(src.load_relative(base)?),
            FunctionalSpec::Entropic { gamma } => Functional::entropic(*gamma)?,
        })
    }

    pub fn build(&self) -> Result<Functional> {
        self.build_relative(Path::new(""))
    }
}

/// A parsed `market:` string; fields are separated by `;`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSpecString {
    pub spd: DistSpec,
    pub rate: f64,
    pub horizon: f64,
}

impl MarketSpecString {
    pub fn parse(s: &str) -> Result<Self> {
        let rest = strip(s, "market:")?;
        let mut p = Params::parse(rest.split(';').filter(|t| !t.is_empty()), s)?;
        let spd = DistSpec::parse(p.require("spd")?)?;
        let rate = match p.take("r") {
            Some(v) => number("r", v, s)?,
            None => 0.0,
        };
        let horizon = match p.take("T") {
            Some(v) => number("T", v, s)?,
            None => 1.0,
        };
        p.finish()?;
        Ok(Self { spd, rate, horizon })
    }

    pub fn render(&self) -> String {
        format!("market:spd={};r={};T={}", self.spd, self.rate, self.horizon)
    }

    pub fn build_relative(&self, base: &Path) -> Result<MarketSpec> {
        MarketSpec::new(self.spd.load_relative(base)?, self.rate, self.horizon)
    }
}
