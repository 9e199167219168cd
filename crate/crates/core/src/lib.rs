//! # mkdiv
//!
//! Monge-Kantorovich divergences on the real line whose transport costs are
//! statistical scoring functions.
//!
//! A scoring function `S(z, y)` penalises the report `z` when `y` realises.
//! Plugging it into the transport problem with cost `c(z1, z2) = S(z2, z1)`
//! gives an (in general asymmetric) divergence between two distributions.
//! For the Bregman, generalised piecewise linear, Λ-quantile, expectile,
//! shortfall and decomposable families the comonotonic coupling is optimal,
//! so the divergence reduces to a one-dimensional quantile integral. Decreasing
//! Osband transforms flip this to the antitonic coupling.
//!
//! ## Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`distributions`] | cdf / quantile evaluation, empirical data, quantile grids |
//! | [`generators`] | convex generators φ and distortion weights γ |
//! | [`scores`] | scoring-function catalog, Osband transforms, submodularity check |
//! | [`functionals`] | elicitable functionals, argmin of expected scores, risk axioms |
//! | [`transport`] | closed-form divergences, exact assignment and LP oracles |
//! | [`robust`] | worst-case distortion risk measures over Bregman-Wasserstein balls |
//! | [`payoff`] | cheapest payoffs under a Bregman-Wasserstein benchmark constraint |
//! | [`certify`] | seeded random certification of closed forms against the oracle |
//! | [`spec`] | textual spec strings for every catalog object |
//!
//! ## Quick start
//!
//! ```rust
//! use mkdiv::distributions::Distribution;
//! use mkdiv::generators::ConvexGenerator;
//! use mkdiv::scores::Score;
//! use mkdiv::transport::mk_divergence;
//!
//! let f1 = Distribution::from_samples(&[0.0, 1.0]).unwrap();
//! let f2 = Distribution::from_samples(&[2.0, 3.0]).unwrap();
//! let score = Score::bregman(ConvexGenerator::Quadratic);
//! let d = mk_divergence(&score, &f1, &f2, 10_000, 1e-7).unwrap();
//! assert!((d - 4.0).abs() < 1e-12);
//! ```

// `!(a < b)` comparisons are deliberate: they reject NaN along with the
// out-of-order case.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use thiserror::Error;

pub mod certify;
pub mod distributions;
pub mod functionals;
pub mod generators;
pub mod numeric;
pub mod payoff;
pub mod robust;
pub mod scores;
pub mod spec;
pub mod transport;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A value lies outside the range of a derivative map.
    #[error("range error: {value} is outside ({lo}, {hi}) for {what}")]
    Range { what: String, value: f64, lo: f64, hi: f64 },

    /// Data ingestion failed at a specific entry.
    #[error("ingestion error at index {index}: {reason}")]
    Ingestion { index: usize, reason: String },

    /// Invalid configuration or spec string.
    #[error("configuration error: {0}")]
    Config(String),

    /// A moment needed by a functional is not finite.
    #[error("moment error: {0}")]
    Moment(String),

    /// The Λ-quantile crossing is not unique.
    #[error("ambiguity error: {0}")]
    Ambiguity(String),

    /// Evaluation of an objective failed everywhere.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A score evaluation failed at a quadrature node.
    #[error("at u = {u}: {source}")]
    AtNode {
        u: f64,
        #[source]
        source: Box<Error>,
    },

    /// An exact solver received an instance above its size limit.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// The perturbed quantile formula left the range of φ′ at some node.
    #[error("infeasible lambda {lambda}: node {node} (u = {u}) maps to {value}, outside the range of φ′")]
    InfeasibleLambda {
        lambda: f64,
        node: usize,
        u: f64,
        value: f64,
    },

    /// λ* could not be bracketed.
    #[error("calibration error: target {target} not within achieved divergence range [{lo}, {hi}]")]
    Calibration { target: f64, lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Result type for library operations.
pub type Result<T> = std::result::Result<T, Error>;

/// Default number of quantile-grid nodes.
pub const DEFAULT_GRID_M: usize = 10_000;

/// Default tail truncation level of quantile grids.
pub const DEFAULT_DELTA: f64 = 1e-7;

/// Default absolute tolerance on calibrated divergences.
pub const DEFAULT_TOL: f64 = 1e-8;
