//! Closed-form results: gambler's ruin with ties, the Chernoff tail bound,
//! update-step probabilities, the majority lower bound and the expected
//! runtime upper bound.
//!
//! Everything here is a pure function of its arguments. Powers such as
//! `(q/p)^n` are evaluated in exponent form so that `n` in the thousands
//! neither overflows nor underflows.

use serde::{Deserialize, Serialize};

use crate::agents::Population;
use crate::error::{Error, Result};

/// Below this distance from 1, `q/p` is treated as exactly 1.
const RATIO_ONE_TOLERANCE: f64 = 1e-9;

/// One play: win with `p`, lose with `q`, tie with `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GamblerParams {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl GamblerParams {
    /// Ties take the remaining mass `1 - p - q`.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        Self::with_tie(p, q, 1.0 - p - q)
    }

    pub fn with_tie(p: f64, q: f64, r: f64) -> Result<Self> {
        let gp = GamblerParams { p, q, r };
        gp.validate()?;
        Ok(gp)
    }

    pub fn validate(&self) -> Result<()> {
        let GamblerParams { p, q, r } = *self;
        if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
            return Err(Error::param(format!("p and q must lie in (0, 1), got p={p}, q={q}")));
        }
        if !(-1e-12..1.0).contains(&r) || ((p + q + r) - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("p + q + r must equal 1 with r in [0, 1), got r={r}")));
        }
        Ok(())
    }

    fn ratio_is_one(&self) -> bool {
        (1.0 - self.q / self.p).abs() < RATIO_ONE_TOLERANCE
    }
}

/// `(1 - rho^i) / (1 - rho^n)` given `ln rho`, stable for large exponents.
fn ratio_fraction(ln_rho: f64, i: u64, n: u64) -> f64 {
    debug_assert!(i <= n && n > 0);
    if i == 0 {
        return 0.0;
    }
    if i == n {
        return 1.0;
    }
    let (fi, fnn) = (i as f64, n as f64);
    if ln_rho == f64::NEG_INFINITY {
        return 1.0;
    }
    if ln_rho.exp_m1().abs() < RATIO_ONE_TOLERANCE {
        return fi / fnn;
    }
    if ln_rho < 0.0 {
        (fi * ln_rho).exp_m1() / (fnn * ln_rho).exp_m1()
    } else {
        // rho > 1: divide through by rho^n.
        ((fi - fnn) * ln_rho).exp() * (-fi * ln_rho).exp_m1() / (-fnn * ln_rho).exp_m1()
    }
}

fn check_range(i: u64, n: u64) -> Result<()> {
    if n == 0 || i > n {
        return Err(Error::param(format!("need 0 <= i <= n and n >= 1, got i={i}, n={n}")));
    }
    Ok(())
}

/// Probability that a gambler starting with `i` units reaches `n` before 0.
///
/// Ties do not affect the answer. When `p = q` this is `i / n`.
pub fn gambler_ruin_prob(i: u64, n: u64, gp: &GamblerParams) -> Result<f64> {
    gp.validate()?;
    check_range(i, n)?;
    Ok(ratio_fraction((gp.q / gp.p).ln(), i, n))
}

/// Expected number of plays before absorption, in the textbook closed form
///
/// `E_i = (n/(p-q) * f_i - i/(p-q)) * 1/(p+q)`.
///
/// The trailing `1/(p+q)` is 1 without ties. When `q/p` is within 1e-9 of
/// 1 the continuous limit `i(n-i)/(p+q)^2` is returned, which is `i(n-i)`
/// for `r = 0`.
///
/// Note: an exact first-step analysis of the chain with ties gives
/// `(n f_i - i)/(p-q)`, i.e. this value times `p+q`. See
/// [`crate::oracle::absorption_time`] for the solve-based number.
pub fn gambler_expected_time(i: u64, n: u64, gp: &GamblerParams) -> Result<f64> {
    gp.validate()?;
    check_range(i, n)?;
    if i == 0 || i == n {
        return Ok(0.0);
    }
    let (fi, fnn) = (i as f64, n as f64);
    let tie_factor = 1.0 / (gp.p + gp.q);
    if gp.ratio_is_one() {
        return Ok(fi * (fnn - fi) * tie_factor * tie_factor);
    }
    let f = ratio_fraction((gp.q / gp.p).ln(), i, n);
    let diff = gp.p - gp.q;
    Ok((fnn / diff * f - fi / diff) * tie_factor)
}

/// Upper tail bound `Pr(X >= (1+delta) mu) <= exp(-delta^2 mu / (2 + delta))`
/// for a sum of independent Bernoulli variables with mean `mu`.
pub fn chernoff_upper(mu: f64, delta: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) || !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param(format!("mu and delta must be positive, got mu={mu}, delta={delta}")));
    }
    Ok((-delta * delta * mu / (2.0 + delta)).exp())
}

/// Win/lose/tie probabilities of one update step (an erase at a collision
/// followed by a write into the emptied cell).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Collision becomes `11`.
    pub win: f64,
    /// Collision becomes `00`.
    pub lose: f64,
    /// Collision unchanged.
    pub tie: f64,
}

impl ChainParams {
    pub fn gambler(&self) -> Result<GamblerParams> {
        GamblerParams::with_tie(self.win, self.lose, self.tie)
    }
}

pub fn update_step_probs(w0: u32, w1: u32) -> Result<ChainParams> {
    if w0 == 0 && w1 == 0 {
        return Err(Error::EmptyPopulation);
    }
    let total = f64::from(w0) + f64::from(w1);
    let win = (f64::from(w1) / total).powi(2);
    let lose = (f64::from(w0) / total).powi(2);
    Ok(ChainParams {
        win,
        lose,
        tie: 1.0 - win - lose,
    })
}

/// Distribution of the first value written into each of the `n` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialWriteModel {
    pub n: u64,
    /// Probability a first write is a 1.
    pub p1: f64,
    /// Expected number of initial zeros.
    pub mu0: f64,
    /// Expected number of initial ones; the ones count is `Binomial(n, p1)`.
    pub mean_ones: f64,
}

impl InitialWriteModel {
    pub fn new(n: u64, pop: &Population) -> Self {
        let p1 = pop.p1();
        InitialWriteModel {
            n,
            p1,
            mu0: n as f64 * (1.0 - p1),
            mean_ones: n as f64 * p1,
        }
    }
}

/// Probability that the update-step walk started from `i` ones out of `n`
/// ends with every cell at 1:
///
/// `(1 - (w0/w1)^(2i)) / (1 - (w0/w1)^(2n))`.
pub fn decide_one_prob(i: u64, n: u64, w0: u32, w1: u32) -> Result<f64> {
    check_range(i, n)?;
    if w0 == w1 {
        return Err(Error::param("decision probability needs w0 != w1"));
    }
    if w1 == 0 {
        return Ok(if i == n { 1.0 } else { 0.0 });
    }
    let ln_rho = 2.0 * (f64::from(w0) / f64::from(w1)).ln();
    Ok(ratio_fraction(ln_rho, i, n))
}

/// Lower bound on the probability of deciding the majority value 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajorityBound {
    /// `(1 - (w0/w1)^(4 mu0)) * (1 - exp(-mu0/3))`, `mu0 = w0 n / (w0+w1)`.
    pub general: f64,
    /// `(1 - 3^-n) * (1 - exp(-n/12))`, only when `w1 >= 3 w0`.
    pub strong_ratio: Option<f64>,
}

impl MajorityBound {
    /// The bound that applies: the strong-ratio form when available.
    pub fn best_stated(&self) -> f64 {
        self.strong_ratio.unwrap_or(self.general)
    }
}

pub fn majority_prob_lower_bound(w0: u32, w1: u32, n: usize) -> Result<MajorityBound> {
    if !(w1 > w0 && w0 > 0) {
        return Err(Error::param(format!("majority bound needs w1 > w0 > 0, got w0={w0}, w1={w1}")));
    }
    if n == 0 {
        return Err(Error::InvalidSize(n));
    }
    let (a, b, nf) = (f64::from(w0), f64::from(w1), n as f64);
    let mu0 = a * nf / (a + b);
    let walk = -((4.0 * mu0) * (a / b).ln()).exp_m1();
    let start = -(-mu0 / 3.0).exp_m1();
    let strong_ratio = (u64::from(w1) >= 3 * u64::from(w0)).then(|| {
        let walk = -(-nf * 3f64.ln()).exp_m1();
        let start = -(-nf / 12.0).exp_m1();
        walk * start
    });
    Ok(MajorityBound {
        general: walk * start,
        strong_ratio,
    })
}

fn check_majority(w0: u32, w1: u32) -> Result<(f64, f64)> {
    if w1 <= w0 {
        return Err(Error::param(format!("bound needs w1 > w0, got w0={w0}, w1={w1}")));
    }
    let (a, b) = (f64::from(w0), f64::from(w1));
    Ok(((a + b).powi(4), b.powi(4) - a.powi(4)))
}

/// Upper bound on the expected number of big steps to agreement,
/// `2 (w0+w1)^4 n^2 / (w1^4 - w0^4)`. Equals `6.4 n^2` at `w1 = 3 w0`.
pub fn expected_steps_upper_bound(w0: u32, w1: u32, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidSize(n));
    }
    let (num, den) = check_majority(w0, w1)?;
    let nf = n as f64;
    Ok(2.0 * num * nf * nf / den)
}

/// Upper bound on the expected number of update steps from `i` initial
/// ones, `(w0+w1)^4 (n-i) / (w1^4 - w0^4)`.
pub fn update_steps_upper_bound(i: u64, n: u64, w0: u32, w1: u32) -> Result<f64> {
    check_range(i, n)?;
    let (num, den) = check_majority(w0, w1)?;
    Ok(num * (n - i) as f64 / den)
}

/// The start-independent update-step bound: the worst interior start `i = 1`.
pub fn max_update_steps_bound(n: u64, w0: u32, w1: u32) -> Result<f64> {
    update_steps_upper_bound(1.min(n), n, w0, w1)
}

/// Expected number of update steps from `i` ones, the closed form with
/// `(p, q, r) = (P, Q, R)`.
pub fn expected_update_steps(i: u64, n: u64, w0: u32, w1: u32) -> Result<f64> {
    let chain = update_step_probs(w0, w1)?;
    gambler_expected_time(i, n, &chain.gambler()?)
}
