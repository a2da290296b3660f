//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use selcert_core::{binom_cdf, risk_upper_bound, BinomialTail, Dataset, PredictionRecord};

/// Exact `P(X <= k)` for the binomial at the exact dyadic value of `p`.
///
/// With `p = m / 2^e` every term is `C(n,i) m^i (2^e - m)^(n-i) / 2^(e n)`,
/// so the numerator sum is an exact big integer.
pub fn exact_cdf(k: u64, n: u64, p: f64) -> f64 {
    let (m, e) = dyadic(p);
    let one = BigInt::one() << e;
    let q = &one - &m;
    let mut total = BigInt::zero();
    let mut choose = BigInt::one();
    for i in 0..=k {
        if i > 0 {
            choose = choose * BigInt::from(n - i + 1) / BigInt::from(i);
        }
        total += &choose * m.pow(i as u32) * q.pow((n - i) as u32);
    }
    let denom = BigInt::one() << (e * n as usize);
    BigRational::new(total, denom).to_f64().unwrap()
}

fn dyadic(p: f64) -> (BigInt, usize) {
    assert!((0.0..=1.0).contains(&p));
    if p == 0.0 {
        return (BigInt::zero(), 0);
    }
    let (mantissa, exp, _) = num_traits::Float::integer_decode(p);
    // p = mantissa * 2^exp with exp < 0 for p <= 1 (p = 1 gives exp = -52).
    let shift = (-i32::from(exp)) as usize;
    (BigInt::from(mantissa), shift)
}

/// ROC-AUC by comparing every positive with every negative.
pub fn pair_count_auc(items: &[(f64, u8)]) -> Option<f64> {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for a in items.iter().filter(|x| x.1 == 1) {
        for b in items.iter().filter(|x| x.1 == 0) {
            pairs += 1;
            twice += if a.0 > b.0 {
                2
            } else if a.0 == b.0 {
                1
            } else {
                0
            };
        }
    }
    (pairs > 0).then(|| twice as f64 / (2 * pairs) as f64)
}

/// Average precision by thresholding at every distinct score and counting.
pub fn rank_walk_ap(items: &[(f64, u8)]) -> Option<f64> {
    let positives = items.iter().filter(|x| x.1 == 1).count();
    if positives == 0 {
        return None;
    }
    let mut thresholds: Vec<f64> = items.iter().map(|x| x.0).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let tp = items.iter().filter(|x| x.0 >= t && x.1 == 1).count();
        let all = items.iter().filter(|x| x.0 >= t).count();
        let recall = tp as f64 / positives as f64;
        ap += (recall - prev_recall) * (tp as f64 / all as f64);
        prev_recall = recall;
    }
    Some(ap)
}

/// Brute-force certified threshold: for every candidate, recount every
/// grid point at or above it from scratch and test the bound.
pub fn brute_force_lambda_hat(
    d: &Dataset,
    alpha: f64,
    beta: f64,
    min_support: usize,
) -> Option<f64> {
    let conf = |s: f64| if s >= 0.5 { s } else { 1.0 - s };
    let wrong = |r: &PredictionRecord| u8::from(r.score >= 0.5) != r.label;
    let mut grid: Vec<f64> = d.records().iter().map(|r| conf(r.score)).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.retain(|&l| d.records().iter().filter(|r| conf(r.score) >= l).count() >= min_support);
    let bound_ok = |lambda: f64| {
        let kept: Vec<&PredictionRecord> = d
            .records()
            .iter()
            .filter(|r| conf(r.score) >= lambda)
            .collect();
        let n = kept.len() as u64;
        let k = kept.iter().filter(|r| wrong(r)).count() as u64;
        if n == 0 {
            return false;
        }
        risk_upper_bound(BinomialTail::new(k, n).unwrap(), beta)
            .unwrap()
            .value
            <= alpha
    };
    grid.iter()
        .copied()
        .find(|&l| grid.iter().filter(|&&m| m >= l).all(|&m| bound_ok(m)))
}

/// Bisection on the library CDF with an explicit fixed iteration count.
pub fn bisect_bound(k: u64, n: u64, beta: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if binom_cdf(k, n, mid).unwrap() >= beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Spearman rank correlation with midranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let mid = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = mid;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn dataset(items: &[(f64, u8)]) -> Dataset {
    Dataset::new(
        items
            .iter()
            .enumerate()
            .map(|(i, &(s, l))| PredictionRecord::new(format!("r{i}"), s, l))
            .collect(),
        "oracle",
    )
    .unwrap()
}
