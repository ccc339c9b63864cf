//! Fixtures shared by the estimator benchmarks in `benches/`.

use tebc::harness::{gen_real_distribution, sample_counts, SourceSpec};
use tebc::maxent::{self, CertainConstraint};
use tebc::{rng, CountSample, Distribution};

/// A real distribution drawn from U(0, 1) and one size-`n` sample of it.
pub fn fixture(m: usize, n: u64, seed: u64) -> (Distribution, CountSample) {
    let real = gen_real_distribution(&SourceSpec::Uniform01, m, rng::derive_seed(seed, &[0]))
        .expect("valid source");
    let sample = sample_counts(&real, n, rng::derive_seed(seed, &[1])).expect("n >= 1");
    (real, sample)
}

pub fn certain(real: &Distribution, k: usize, seed: u64) -> Vec<CertainConstraint> {
    maxent::generate_certain_constraints(real, k, rng::derive_seed(seed, &[2])).expect("k fits")
}
