//! Numeric oracle for the update-step walk on `0..=n`.
//!
//! Absorption probabilities and expected absorption times come from direct
//! tridiagonal solves of the first-step equations; no closed form is used.
//! The decision probability mixes the solved absorption probabilities over
//! the binomial distribution of initial ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest chain the oracle will solve.
pub const MAX_STATES: usize = 2000;

/// Random walk on `0..=n`, absorbing at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathChain {
    pub n: usize,
    pub up: f64,
    pub down: f64,
    pub stay: f64,
}

impl BirthDeathChain {
    pub fn new(n: usize, up: f64, down: f64) -> Result<Self> {
        let chain = BirthDeathChain {
            n,
            up,
            down,
            stay: 1.0 - up - down,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// The update-step walk for `w0` 0-writers and `w1` 1-writers: a step
    /// up needs a 0 erased and a 1 written, each with probability
    /// `w1 / (w0 + w1)`; a step down is the mirror image.
    pub fn for_writers(w0: u32, w1: u32, n: usize) -> Result<Self> {
        if w0 == 0 && w1 == 0 {
            return Err(Error::EmptyPopulation);
        }
        let total = f64::from(w0) + f64::from(w1);
        let one = f64::from(w1) / total;
        let zero = f64::from(w0) / total;
        Self::new(n, one * one, zero * zero)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_STATES {
            return Err(Error::param(format!("chain size must be in 1..={MAX_STATES}, got {}", self.n)));
        }
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        if !ok(self.up) || !ok(self.down) || !(-1e-12..=1.0).contains(&self.stay)
            || (self.up + self.down + self.stay - 1.0).abs() > 1e-12
        {
            return Err(Error::param(format!(
                "chain probabilities must be in [0, 1] and sum to 1: up={}, down={}, stay={}",
                self.up, self.down, self.stay
            )));
        }
        Ok(())
    }

    fn is_degenerate(&self) -> bool {
        self.up == 0.0 || self.down == 0.0
    }

    fn check_state(&self, i: usize) -> Result<()> {
        if i > self.n {
            return Err(Error::OutOfBounds { index: i, len: self.n + 1 });
        }
        Ok(())
    }
}

/// A solved vector over states `0..=n` with its residual `max |A x - b|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub values: Vec<f64>,
    pub residual: f64,
}

/// Thomas elimination for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[m-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    if lower.len() != m || upper.len() != m || rhs.len() != m {
        return Err(Error::param("tridiagonal bands must have equal length"));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::DegenerateChain { forced: None });
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..m {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 {
            return Err(Error::DegenerateChain { forced: None });
        }
        c[i] = upper[i] / pivot;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Interior equations `(up+down) x_i - up x_{i+1} - down x_{i-1} = b_i`
/// for `0 < i < n`, with `x_0 = lo` and `x_n = hi`.
fn solve_interior(chain: &BirthDeathChain, b: f64, lo: f64, hi: f64) -> Result<Solved> {
    let n = chain.n;
    let m = n - 1;
    let leave = chain.up + chain.down;
    let lower = vec![-chain.down; m];
    let diag = vec![leave; m];
    let upper = vec![-chain.up; m];
    let mut rhs = vec![b; m];
    if m > 0 {
        rhs[0] += chain.down * lo;
        rhs[m - 1] += chain.up * hi;
    }
    let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut values = Vec::with_capacity(n + 1);
    values.push(lo);
    values.extend(interior);
    values.push(hi);

    let residual = (1..n)
        .map(|i| {
            let ax = leave * values[i] - chain.up * values[i + 1] - chain.down * values[i - 1];
            (ax - b).abs()
        })
        .fold(0.0, f64::max);
    Ok(Solved { values, residual })
}

fn forced_probability(chain: &BirthDeathChain, i: usize) -> Option<f64> {
    match (chain.up == 0.0, chain.down == 0.0) {
        _ if i == 0 => Some(0.0),
        _ if i == chain.n => Some(1.0),
        (true, false) => Some(0.0),
        (false, true) => Some(1.0),
        _ => None,
    }
}

/// Probability of absorption at `n` from every state.
pub fn absorption_probs(chain: &BirthDeathChain) -> Result<Solved> {
    chain.validate()?;
    if chain.is_degenerate() {
        return Err(Error::DegenerateChain { forced: None });
    }
    solve_interior(chain, 0.0, 0.0, 1.0)
}

/// Probability of absorption at `n` from state `i`.
pub fn absorption_prob(chain: &BirthDeathChain, i: usize) -> Result<f64> {
    chain.validate()?;
    chain.check_state(i)?;
    if chain.is_degenerate() {
        return Err(Error::DegenerateChain {
            forced: forced_probability(chain, i),
        });
    }
    Ok(absorption_probs(chain)?.values[i])
}

/// Expected number of steps (ties included) to absorption from every state.
pub fn absorption_times(chain: &BirthDeathChain) -> Result<Solved> {
    chain.validate()?;
    if chain.is_degenerate() {
        return Err(Error::DegenerateChain { forced: None });
    }
    solve_interior(chain, 1.0, 0.0, 0.0)
}

pub fn absorption_time(chain: &BirthDeathChain, i: usize) -> Result<f64> {
    chain.validate()?;
    chain.check_state(i)?;
    if i == 0 || i == chain.n {
        return Ok(0.0);
    }
    if chain.is_degenerate() {
        return Err(Error::DegenerateChain { forced: None });
    }
    Ok(absorption_times(chain)?.values[i])
}

/// `ln k!` for `k` in `0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(acc);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// `Binomial(n, p)` probabilities, computed in log space.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        return (0..=n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    }
    if p >= 1.0 {
        return (0..=n).map(|i| if i == n { 1.0 } else { 0.0 }).collect();
    }
    let lf = ln_factorials(n);
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (0..=n)
        .map(|i| (lf[n] - lf[i] - lf[n - i] + i as f64 * lp + (n - i) as f64 * lq).exp())
        .collect()
}

/// Exact probability that the update-step model decides 1: absorption at
/// `n` averaged over `Binomial(n, w1/(w0+w1))` initial ones.
pub fn exact_decision_prob(w0: u32, w1: u32, n: usize) -> Result<f64> {
    if w0 == w1 {
        return Err(Error::param("decision probability needs w0 != w1"));
    }
    let chain = BirthDeathChain::for_writers(w0, w1, n)?;
    let weights = binomial_pmf(n, f64::from(w1) / (f64::from(w0) + f64::from(w1)));
    // Sum the minority outcome, which is small, so round-off near 1 does not
    // swamp it.
    let minority_is_one = w1 < w0;
    let solve_for = if minority_is_one {
        chain
    } else {
        BirthDeathChain::new(n, chain.down, chain.up)?
    };
    let h: Vec<f64> = if solve_for.is_degenerate() {
        (0..=n)
            .map(|i| forced_probability(&solve_for, i).expect("one-sided chain forces every state"))
            .collect()
    } else {
        absorption_probs(&solve_for)?.values
    };
    let minority: f64 = if minority_is_one {
        weights.iter().zip(&h).map(|(w, h)| w * h).sum()
    } else {
        // Mirrored chain: state i of the original is state n - i.
        weights.iter().zip(h.iter().rev()).map(|(w, h)| w * h).sum()
    };
    let p = if minority_is_one { minority } else { 1.0 - minority };
    Ok(p.clamp(0.0, 1.0))
}

/// Monte-Carlo estimates for one start state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub trials: u64,
    pub absorbed_high: f64,
    pub absorbed_high_se: f64,
    pub mean_steps: f64,
    pub mean_steps_se: f64,
}

/// Runs the chain `trials` times from `i` and reports the empirical
/// frequency of absorbing at `n` and the mean number of steps.
pub fn simulate_chain(chain: &BirthDeathChain, i: usize, seed: u64, trials: u64) -> Result<ChainStats> {
    chain.validate()?;
    chain.check_state(i)?;
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    if chain.up + chain.down == 0.0 && i != 0 && i != chain.n {
        return Err(Error::DegenerateChain { forced: None });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut high = 0u64;
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let mut x = i;
        let mut steps = 0u64;
        while x != 0 && x != chain.n {
            let u: f64 = rng.random();
            if u < chain.up {
                x += 1;
            } else if u < chain.up + chain.down {
                x -= 1;
            }
            steps += 1;
        }
        if x == chain.n {
            high += 1;
        }
        let s = steps as f64;
        sum += s;
        sum_sq += s * s;
    }
    let t = trials as f64;
    let freq = high as f64 / t;
    let mean = sum / t;
    let var = if trials > 1 {
        ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(ChainStats {
        trials,
        absorbed_high: freq,
        absorbed_high_se: (freq * (1.0 - freq) / t).sqrt(),
        mean_steps: mean,
        mean_steps_se: (var / t).sqrt(),
    })
}

/// Expected absorption time from the closed form next to the solved value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeComparison {
    pub start: usize,
    /// Closed form including its trailing `1/(p+q)` factor.
    pub closed_form: f64,
    /// First-step solve counting every step, ties included.
    pub solved: f64,
    /// `closed_form * (up + down)`; equals `solved` when the two agree up to
    /// the tie factor.
    pub closed_form_times_leave: f64,
    /// The two numbers differ by more than 1e-9 relative.
    pub discrepancy: bool,
}

pub fn compare_expected_time(chain: &BirthDeathChain, i: usize) -> Result<TimeComparison> {
    let gp = crate::bounds::GamblerParams::with_tie(chain.up, chain.down, chain.stay)?;
    let closed_form = crate::bounds::gambler_expected_time(i as u64, chain.n as u64, &gp)?;
    let solved = absorption_time(chain, i)?;
    let scale = solved.abs().max(1.0);
    Ok(TimeComparison {
        start: i,
        closed_form,
        solved,
        closed_form_times_leave: closed_form * (chain.up + chain.down),
        discrepancy: (closed_form - solved).abs() > 1e-9 * scale,
    })
}
