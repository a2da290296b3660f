//! Binomial lower tail and the upper confidence bound on selective risk.
//!
//! `binom_cdf` anchors the tail at a single probability mass computed with
//! Loader's saddle-point form (Stirling remainders plus the deviance term
//! `bd0`), which is accurate to a few ulps relative even for very large `n`.
//! The remaining masses follow from the ratio recurrence, summed from the
//! anchor outward so terms shrink monotonically. When `k` lies below the mean
//! the lower tail is summed directly; otherwise the upper tail is summed and
//! subtracted from one.

use crate::error::{domain, Error, Result};
use crate::sum::CompensatedSum;

/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_TOLERANCE: f64 = 1e-14;
pub const BISECTION_MAX_ITER: usize = 200;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln(n!) - (n + 1/2) ln n + n - ln sqrt(2 pi)` for n = 0..=15.
#[allow(clippy::excessive_precision)]
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_219_670_26,
    0.041_340_695_955_409_294_093_822_08,
    0.027_677_925_684_998_339_148_789_29,
    0.020_790_672_103_765_093_111_522_77,
    0.016_644_691_189_821_192_163_194_87,
    0.013_876_128_823_070_747_998_745_73,
    0.011_896_709_945_891_770_095_055_72,
    0.010_411_265_261_972_096_497_478_57,
    0.009_255_462_182_712_732_917_728_637,
    0.008_330_563_433_362_871_256_469_319,
    0.007_573_675_487_951_840_794_972_024,
    0.006_942_840_107_209_529_865_664_153,
    0.006_408_994_188_004_207_068_439_631,
    0.005_951_370_112_758_847_735_624_416,
    0.005_554_733_551_962_801_371_038_69,
];

/// Error count `k` out of `n` retained predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinomialTail {
    k: u64,
    n: u64,
}

impl BinomialTail {
    pub fn new(k: u64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(domain("binomial trial count must be positive"));
        }
        if k > n {
            return Err(domain("error count exceeds trial count"));
        }
        Ok(Self { k, n })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// Upper confidence bound on a binomial rate at failure probability `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskBound {
    pub value: f64,
    pub beta: f64,
    /// `|binom_cdf(k, n, value) - beta|`; zero when `k == n`.
    pub residual: f64,
}

fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;

    if n <= 15 {
        return STIRLERR_TABLE[n as usize];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if libm::fabs(x - np) < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * libm::log(x / np) + np - x
    }
}

/// Probability mass `P(X = x)` for `X ~ Binomial(n, p)` with `q = 1 - p`.
fn binom_pmf(x: u64, n: u64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if x == 0 {
        let lc = if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * libm::log1p(-p)
        };
        return libm::exp(lc);
    }
    if x == n {
        let lc = if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * libm::log(p)
        };
        return libm::exp(lc);
    }
    let xf = x as f64;
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(xf, nf * p) - bd0(nf - xf, nf * q);
    let lf = LN_2PI + libm::log(xf) + libm::log1p(-xf / nf);
    libm::exp(lc - 0.5 * lf)
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn binom_cdf(k: u64, n: u64, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("binomial trial count must be positive"));
    }
    if k > n {
        return Err(domain("k exceeds n"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("probability outside [0, 1]"));
    }
    Ok(cdf_unchecked(k, n, p))
}

fn cdf_unchecked(k: u64, n: u64, p: f64) -> f64 {
    if k == n || p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    let mean = n as f64 * p;

    if (k as f64) < mean {
        // Lower tail, walking down from k. Masses decrease for i < np.
        let ratio = q / p;
        let mut term = binom_pmf(k, n, p, q);
        let mut acc = CompensatedSum::default();
        let mut i = k;
        loop {
            acc.add(term);
            if i == 0 {
                break;
            }
            term *= (i as f64) / ((n - i + 1) as f64) * ratio;
            if term <= acc.value() * 1e-17 {
                break;
            }
            i -= 1;
        }
        acc.value().clamp(0.0, 1.0)
    } else {
        // Upper tail from k + 1, walking up. Masses decrease for i > np.
        let ratio = p / q;
        let mut term = binom_pmf(k + 1, n, p, q);
        let mut acc = CompensatedSum::default();
        let mut i = k + 1;
        loop {
            acc.add(term);
            if i == n {
                break;
            }
            term *= ((n - i) as f64) / ((i + 1) as f64) * ratio;
            if term <= acc.value() * 1e-17 {
                break;
            }
            i += 1;
        }
        (1.0 - acc.value()).clamp(0.0, 1.0)
    }
}

/// `sup { r in [0, 1] : binom_cdf(k, n, r) >= beta }`.
///
/// For `k < n` the lower tail is continuous and strictly decreasing in `r`,
/// so the supremum is the root of `binom_cdf(k, n, r) = beta`. It is
/// bracketed by bisection and the upper end of the final bracket is
/// returned, which never understates the bound.
pub fn risk_upper_bound(tail: BinomialTail, beta: f64) -> Result<RiskBound> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(domain("beta must lie strictly between 0 and 1"));
    }
    let BinomialTail { k, n } = tail;
    if k == n {
        return Ok(RiskBound {
            value: 1.0,
            beta,
            residual: 0.0,
        });
    }

    // Invariant: cdf(lo) >= beta > cdf(hi).
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut iterations = 0;
    while hi - lo > BISECTION_TOLERANCE {
        if iterations == BISECTION_MAX_ITER {
            return Err(Error::NonConvergence { iterations });
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf_unchecked(k, n, mid) >= beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let residual = libm::fabs(cdf_unchecked(k, n, hi) - beta);
    Ok(RiskBound {
        value: hi,
        beta,
        residual,
    })
}
