//! Small numerical kernels shared by the other modules: deterministic
//! summation, bracketed bisection, golden-section search and a seedable
//! SplitMix64 generator.

/// How grid evaluations are scheduled. Both modes produce identical bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Serial,
    Parallel,
}

const PAIRWISE_BLOCK: usize = 16;
const PARALLEL_SPLIT: usize = 4096;

/// Pairwise (cascade) summation with a fixed recursion tree.
///
/// The split points depend only on the slice length, so serial and parallel
/// execution add the same numbers in the same order.
pub fn pairwise_sum(values: &[f64], exec: Execution) -> f64 {
    match exec {
        Execution::Serial => pairwise_serial(values),
        Execution::Parallel => pairwise_parallel(values),
    }
}

fn pairwise_serial(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_serial(&values[..mid]) + pairwise_serial(&values[mid..])
}

fn pairwise_parallel(values: &[f64]) -> f64 {
    if values.len() <= PARALLEL_SPLIT {
        return pairwise_serial(values);
    }
    let mid = values.len() / 2;
    let (a, b) = rayon::join(
        || pairwise_parallel(&values[..mid]),
        || pairwise_parallel(&values[mid..]),
    );
    a + b
}

/// Mean of `values` under [`pairwise_sum`].
pub fn pairwise_mean(values: &[f64], exec: Execution) -> f64 {
    pairwise_sum(values, exec) / values.len() as f64
}

/// Map `f` over `0..n`, in parallel when requested. Output order is index order.
pub fn map_indices<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Execution::Serial => (0..n).map(f).collect(),
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Bisection for the boundary of a monotone predicate.
///
/// `pred(lo)` must be false and `pred(hi)` true. Returns the final bracket
/// `(lo, hi)` with `hi - lo <= width` or at floating-point resolution.
pub fn bisect_predicate<P>(mut lo: f64, mut hi: f64, width: f64, mut pred: P) -> (f64, f64)
where
    P: FnMut(f64) -> bool,
{
    for _ in 0..2000 {
        if hi - lo <= width {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Root of a non-increasing residual on `[lo, hi]` with `r(lo) >= 0 >= r(hi)`.
///
/// Bisects to `width` and returns the bracket endpoint with the smaller
/// absolute residual.
pub fn bisect_decreasing<F>(lo: f64, hi: f64, width: f64, mut residual: F) -> f64
where
    F: FnMut(f64) -> f64,
{
    let (a, b) = bisect_predicate(lo, hi, width, |x| residual(x) <= 0.0);
    if residual(a).abs() <= residual(b).abs() {
        a
    } else {
        b
    }
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_section<F>(mut a: f64, mut b: f64, width: f64, mut f: F) -> f64
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..500 {
        if (b - a).abs() <= width {
            break;
        }
        // `<=` keeps the left part on ties.
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// SplitMix64 (Steele, Lea & Flood). Chosen because the whole generator is
/// three lines and trivially reproducible in any language.
///
/// `next_u64`: `state += 0x9E3779B97F4A7C15; z = state;
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
/// return z ^ (z >> 31)` (wrapping arithmetic). Unit floats are
/// `(next_u64 >> 11) * 2^-53`.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    /// Uniform integer in `lo..=hi` (modulo reduction).
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        let span = (hi - lo + 1) as u64;
        lo + (self.next_u64() % span) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Reference output of the published algorithm for seed 0.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn pairwise_serial_and_parallel_agree_bitwise() {
        let mut rng = SplitMix64::new(11);
        let v: Vec<f64> = (0..100_003).map(|_| rng.uniform(-1e3, 1e3)).collect();
        let s = pairwise_sum(&v, Execution::Serial);
        let p = pairwise_sum(&v, Execution::Parallel);
        assert_eq!(s.to_bits(), p.to_bits());
    }

    #[test]
    fn bisection_finds_sqrt_two() {
        let r = bisect_decreasing(0.0, 2.0, 1e-12, |x| 2.0 - x * x);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn golden_section_parabola() {
        let m = golden_section(-3.0, 5.0, 1e-10, |x| (x - 1.25).powi(2));
        assert!((m - 1.25).abs() < 1e-9);
    }
}
