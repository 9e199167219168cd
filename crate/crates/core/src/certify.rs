//! Seeded random certification of the closed-form coupling against the exact
//! transport oracle.
//!
//! Instance `k` draws `n` uniformly from `2..=n_max` and then `2n` atoms
//! uniformly from [`Score::sample_range`], all from one [`SplitMix64`]
//! stream seeded with `seed`. The stream is consumed in instance order, so
//! the instance set depends only on `(score range, instances, n_max, seed)`.

use serde::Serialize;

use crate::distributions::Distribution;
use crate::functionals::{argmin_expected_score, elicited_functional, evaluate, Functional};
use crate::numeric::{map_indices, Execution, SplitMix64};
use crate::scores::Score;
use crate::transport::{coupling_value, mk_divergence, monotone_matching, oracle_optimal};
use crate::{Error, Result};

/// Relative tolerance `|closed − oracle| ≤ TOL · (1 + |oracle|)`.
pub const CERTIFY_TOL: f64 = 1e-9;

/// One random equal-weight instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub atoms1: Vec<f64>,
    pub atoms2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceResult {
    pub index: usize,
    pub n: usize,
    pub closed_form: f64,
    pub matching_value: f64,
    pub oracle: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub instances: usize,
    pub n_max: usize,
    pub seed: u64,
    pub coupling: &'static str,
    pub max_deviation: f64,
    pub passed: bool,
    /// First instance exceeding the tolerance.
    pub witness: Option<InstanceResult>,
}

/// Draw the instance set.
pub fn random_instances(score: &Score, instances: usize, n_max: usize, seed: u64) -> Result<Vec<Instance>> {
    if n_max < 2 {
        return Err(Error::Config(format!("n_max must be at least 2, got {n_max}")));
    }
    let (lo, hi) = score.sample_range();
    let mut rng = SplitMix64::new(seed);
    Ok((0..instances)
        .map(|_| {
            let n = rng.int_inclusive(2, n_max);
            let atoms1 = (0..n).map(|_| rng.uniform(lo, hi)).collect();
            let atoms2 = (0..n).map(|_| rng.uniform(lo, hi)).collect();
            Instance { atoms1, atoms2 }
        })
        .collect())
}

fn run_one(score: &Score, index: usize, inst: &Instance) -> Result<InstanceResult> {
    let f1 = Distribution::from_samples(&inst.atoms1)?;
    let f2 = Distribution::from_samples(&inst.atoms2)?;
    let closed_form = mk_divergence(score, &f1, &f2, inst.atoms1.len(), 0.0)?;
    let perm = monotone_matching(&inst.atoms1, &inst.atoms2, score.coupling_claim());
    let matching_value = coupling_value(score, &inst.atoms1, &inst.atoms2, &perm)?;
    let oracle = oracle_optimal(score, &inst.atoms1, &inst.atoms2, None, None)?.value;
    let deviation = (closed_form - oracle).abs().max((matching_value - oracle).abs());
    Ok(InstanceResult {
        index,
        n: inst.atoms1.len(),
        closed_form,
        matching_value,
        oracle,
        deviation,
    })
}

/// Compare the closed form and the sorted matching with the oracle on every
/// instance.
pub fn certify(score: &Score, instances: usize, n_max: usize, seed: u64, exec: Execution) -> Result<CertifyReport> {
    let set = random_instances(score, instances, n_max, seed)?;
    let results = map_indices(set.len(), exec, |k| run_one(score, k, &set[k]));
    let mut max_deviation = 0.0f64;
    let mut witness = None;
    for r in results {
        let r = r?;
        max_deviation = max_deviation.max(r.deviation);
        if witness.is_none() && r.deviation > CERTIFY_TOL * (1.0 + r.oracle.abs()) {
            witness = Some(r);
        }
    }
    Ok(CertifyReport {
        instances,
        n_max,
        seed,
        coupling: score.coupling_claim().name(),
        max_deviation,
        passed: witness.is_none(),
        witness,
    })
}

/// Sample sizes for random empirical distributions. Primes, so that
/// `αn` is never an integer for the catalog levels and sample quantiles
/// are unique.
pub const SAMPLE_SIZES: [usize; 8] = [7, 11, 13, 17, 19, 23, 29, 31];

/// Grid points of the coarse argmin search before golden-section refinement.
pub const ARGMIN_STEPS: usize = 2001;

/// `count` random samples on `[lo, hi]` with sizes drawn from [`SAMPLE_SIZES`].
pub fn random_samples(count: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| {
            let n = SAMPLE_SIZES[rng.int_inclusive(0, SAMPLE_SIZES.len() - 1)];
            (0..n).map(|_| rng.uniform(lo, hi)).collect()
        })
        .collect()
}

/// `count` aligned sample pairs of size `size` on `[lo, hi]`.
pub fn random_sample_pairs(count: usize, size: usize, lo: f64, hi: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| {
            let x = (0..size).map(|_| rng.uniform(lo, hi)).collect();
            let y = (0..size).map(|_| rng.uniform(lo, hi)).collect();
            (x, y)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElicitResult {
    pub index: usize,
    pub n: usize,
    pub argmin: f64,
    pub functional: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElicitReport {
    pub functional: &'static str,
    pub distributions: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub passed: bool,
    /// First distribution exceeding the tolerance.
    pub witness: Option<ElicitResult>,
}

/// Compare `argmin_z E S(z, Y)` with `T(F)` on random empirical
/// distributions drawn from the score's sample range. Without an explicit
/// functional the one elicited by the score is used.
pub fn elicit_check(
    score: &Score,
    functional: Option<&Functional>,
    distributions: usize,
    seed: u64,
    tol: f64,
    exec: Execution,
) -> Result<ElicitReport> {
    let t = match functional {
        Some(t) => t.clone(),
        None => elicited_functional(score).ok_or_else(|| {
            Error::Config(format!(
                "no closed-form functional is known for the {} score",
                score.family()
            ))
        })?,
    };
    let (lo, hi) = score.sample_range();
    let samples = random_samples(distributions, lo, hi, seed);
    let results = map_indices(samples.len(), exec, |k| -> Result<ElicitResult> {
        let dist = Distribution::from_samples(&samples[k])?;
        let value = evaluate(&t, &dist)?;
        let argmin = argmin_expected_score(score, &dist, lo - 1.0, hi + 1.0, ARGMIN_STEPS)?;
        Ok(ElicitResult {
            index: k,
            n: samples[k].len(),
            argmin,
            functional: value,
            deviation: (argmin - value).abs(),
        })
    });
    let mut max_deviation = 0.0f64;
    let mut witness = None;
    for r in results {
        let r = r?;
        max_deviation = max_deviation.max(r.deviation);
        if witness.is_none() && r.deviation > tol {
            witness = Some(r);
        }
    }
    Ok(ElicitReport {
        functional: t.name(),
        distributions,
        seed,
        tolerance: tol,
        max_deviation,
        passed: witness.is_none(),
        witness,
    })
}
