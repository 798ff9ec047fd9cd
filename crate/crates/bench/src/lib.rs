//! Fixed workloads shared by the benchmarks.

use epiconsensus::{Population, Schedule, TrialConfig, Variant};

/// Strand lengths the trial benchmarks sweep over.
pub const STRAND_LENGTHS: [usize; 3] = [100, 300, 1000];

/// A trial at the high-competition ratio (4:5) scaled to `n`.
pub fn trial(n: usize, variant: Variant, schedule: Schedule, seed: u64) -> TrialConfig {
    let w1 = (n / 20).max(5) as u32;
    let w0 = w1 * 4 / 5;
    let population = Population::new(w0, w1).expect("non-empty population");
    TrialConfig::new(n, population, variant, seed).with_schedule(schedule)
}
