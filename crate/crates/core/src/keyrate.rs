//! One-way secret key rates, with reconciliation running from Bob to Alice.
//!
//! Without preprocessing the rate is `1 - h((1+p)/2) - CHAIN`. With
//! preprocessing Bob flips each raw bit with probability `r`; the rate is
//! `[1 - h((1-p)/2 + r p)] - min(CHAIN, 1) (1 - h(r))`, maximised over `r`.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;

use crate::attack::eve_info_bound;
use crate::error::{check_range, Error, Result};

/// Grid step of the coarse scan over the flip probability.
pub const FLIP_GRID_STEP: f64 = 1e-3;
/// Final bracket width of the golden-section refinement.
pub const FLIP_REFINE_TOL: f64 = 1e-6;
/// Absolute tolerance of the threshold bisection.
pub const THRESHOLD_TOL: f64 = 1e-5;
/// Bisection bracket in `p`.
pub const THRESHOLD_BRACKET: (f64, f64) = (0.5, 1.0);

/// Summary of a key-rate evaluation at one `(N, p)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateReport {
    pub n: usize,
    pub p: f64,
    pub preprocessed: bool,
    /// Optimal flip probability (0 without preprocessing).
    pub r_opt: f64,
    pub i_ab: f64,
    pub i_be_bound: f64,
    /// `max(0, i_ab - i_be_bound)`.
    pub key_rate: f64,
    /// Set when the point lies at or below the noise threshold, i.e. the
    /// unclamped rate is not positive and `key_rate` was clamped to zero.
    pub threshold_flag: bool,
}

fn h_unchecked(q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        0.0
    } else {
        -q * q.log2() - (1.0 - q) * (1.0 - q).log2()
    }
}

/// Shannon entropy of a Bernoulli(`q`) variable, in bits.
pub fn binary_entropy(q: f64) -> Result<f64> {
    check_range("q", q, 0.0, 1.0, "[0, 1]")?;
    Ok(h_unchecked(q))
}

/// `1 - h((1 + u) / 2)` for `u` in `[-1, 1]`, accurate near `u = 0`.
///
/// Uses `2 ln2 (1 - h) = sum_k u^(2k) / (k (2k - 1))` for small `|u|`,
/// which avoids the cancellation in `1 - h` close to `h = 1`.
pub fn capacity_centered(u: f64) -> f64 {
    let u = u.abs();
    if u >= 1.0 {
        return 1.0;
    }
    if u > 0.25 {
        return 1.0 - h_unchecked(0.5 * (1.0 + u));
    }
    let u2 = u * u;
    let mut term = u2;
    let mut sum = 0.0;
    for k in 1..=40u32 {
        let k = f64::from(k);
        let add = term / (k * (2.0 * k - 1.0));
        sum += add;
        if add < sum * 1e-18 {
            break;
        }
        term *= u2;
    }
    sum / (2.0 * LN_2)
}

/// Quantum value of the chained functional, `N (1 - p cos(pi / 2N))`.
pub fn chain_quantum(n: usize, p: f64) -> f64 {
    let n = n as f64;
    n * (1.0 - p * (PI / (2.0 * n)).cos())
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::OutOfRange { name: "N", value: n as f64, expected: "N >= 2" });
    }
    Ok(())
}

/// `I(A:B)` after Bob flips his bit with probability `r`.
pub fn mutual_info_ab(p: f64, r: f64) -> Result<f64> {
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    check_range("r", r, 0.0, 0.5, "[0, 1/2]")?;
    // Post-flip disagreement (1 - p)/2 + r p = (1 - p (1 - 2r)) / 2.
    Ok(capacity_centered(p * (1.0 - 2.0 * r)))
}

/// Unclamped chained rate `1 - h((1+p)/2) - N (1 - p cos(pi/2N))`.
pub fn key_rate_chain_raw(n: usize, p: f64) -> Result<f64> {
    check_n(n)?;
    Ok(mutual_info_ab(p, 0.0)? - chain_quantum(n, p))
}

/// Chained one-way rate clamped at zero.
pub fn key_rate_chain(n: usize, p: f64) -> Result<f64> {
    Ok(key_rate_chain_raw(n, p)?.max(0.0))
}

/// Rate with preprocessing at a fixed flip probability `r`.
pub fn preprocessed_rate_at(n: usize, p: f64, r: f64) -> Result<f64> {
    check_n(n)?;
    Ok(mutual_info_ab(p, r)? - eve_info_bound(chain_quantum(n, p), r)?)
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Grid scan over `r` in `[0, 1/2]` followed by golden-section refinement
/// around the best grid point. The grid stage copes with non-concave `f`.
fn maximize_over_flip(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let steps = (0.5 / FLIP_GRID_STEP).round() as usize;
    let (mut best_r, mut best) = (0.0, f(0.0));
    for i in 1..=steps {
        let r = (i as f64 * FLIP_GRID_STEP).min(0.5);
        let v = f(r);
        if v > best {
            best = v;
            best_r = r;
        }
    }
    let lo = (best_r - FLIP_GRID_STEP).max(0.0);
    let hi = (best_r + FLIP_GRID_STEP).min(0.5);
    let (r, v) = golden_max(&f, lo, hi, FLIP_REFINE_TOL);
    if v > best {
        (r, v)
    } else {
        (best_r, best)
    }
}

/// Sign-faithful margin of the preprocessed protocol.
///
/// The preprocessed rate is `S(p s) - c S(s)` with `s = 1 - 2r`,
/// `S(u) = 1 - h((1+u)/2)` and `c = min(CHAIN, 1)`. It vanishes trivially at
/// `r = 1/2`, so its supremum is never negative and cannot locate a
/// threshold. Dividing by `S(s) > 0` keeps the sign for `r < 1/2` and extends
/// continuously to `p^2 - c` at `r = 1/2`; the margin is the maximum of that
/// ratio over `r`.
pub fn preprocessed_margin(n: usize, p: f64) -> Result<f64> {
    check_n(n)?;
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let c = chain_quantum(n, p).min(1.0);
    let ratio = |r: f64| {
        let s = 1.0 - 2.0 * r;
        if s <= 0.0 {
            p * p
        } else {
            capacity_centered(p * s) / capacity_centered(s)
        }
    };
    let (_, best) = maximize_over_flip(ratio);
    Ok(best - c)
}

/// Rate with the flip probability optimised numerically.
pub fn key_rate_preprocessed(n: usize, p: f64) -> Result<KeyRateReport> {
    check_n(n)?;
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let chain = chain_quantum(n, p);
    let rate = |r: f64| {
        let s = 1.0 - 2.0 * r;
        capacity_centered(p * s) - chain.min(1.0) * capacity_centered(s)
    };
    let (r_opt, _) = maximize_over_flip(rate);
    let i_ab = mutual_info_ab(p, r_opt)?;
    let i_be_bound = eve_info_bound(chain, r_opt)?;
    Ok(KeyRateReport {
        n,
        p,
        preprocessed: true,
        r_opt,
        i_ab,
        i_be_bound,
        key_rate: (i_ab - i_be_bound).max(0.0),
        threshold_flag: preprocessed_margin(n, p)? <= 0.0,
    })
}

/// Report for the protocol without preprocessing.
pub fn key_rate_plain(n: usize, p: f64) -> Result<KeyRateReport> {
    let raw = key_rate_chain_raw(n, p)?;
    let i_ab = mutual_info_ab(p, 0.0)?;
    Ok(KeyRateReport {
        n,
        p,
        preprocessed: false,
        r_opt: 0.0,
        i_ab,
        i_be_bound: eve_info_bound(chain_quantum(n, p), 0.0)?,
        key_rate: raw.max(0.0),
        threshold_flag: raw <= 0.0,
    })
}

pub fn key_rate_report(n: usize, p: f64, preprocessed: bool) -> Result<KeyRateReport> {
    if preprocessed {
        key_rate_preprocessed(n, p)
    } else {
        key_rate_plain(n, p)
    }
}

fn bisect(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let rising = flo < 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if (fm < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest Werner weight with a positive key rate, to [`THRESHOLD_TOL`].
pub fn threshold(n: usize, preprocessed: bool) -> Result<f64> {
    check_n(n)?;
    let (lo, hi) = THRESHOLD_BRACKET;
    if preprocessed {
        bisect(|p| preprocessed_margin(n, p), lo, hi, THRESHOLD_TOL)
    } else {
        bisect(|p| key_rate_chain_raw(n, p), lo, hi, THRESHOLD_TOL)
    }
}

/// One report per `(N, p)`, ordered by `N` then `p`.
pub fn curve(n_list: &[usize], p_grid: &[f64], preprocessed: bool) -> Result<Vec<KeyRateReport>> {
    if n_list.is_empty() || p_grid.is_empty() {
        return Err(Error::Structure("curve needs a nonempty N list and p grid".into()));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut ps = p_grid.to_vec();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let points: Vec<(usize, f64)> = ns
        .iter()
        .flat_map(|&n| ps.iter().map(move |&p| (n, p)))
        .collect();
    points
        .par_iter()
        .map(|&(n, p)| key_rate_report(n, p, preprocessed))
        .collect()
}

/// Grid `p_min, p_min + step, ...` up to `p_max` inclusive (within step/1e6).
pub fn p_grid(p_min: f64, p_max: f64, step: f64) -> Result<Vec<f64>> {
    check_range("p_min", p_min, 0.0, 1.0, "[0, 1]")?;
    check_range("p_max", p_max, p_min, 1.0, "[p_min, 1]")?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::OutOfRange { name: "step", value: step, expected: "> 0" });
    }
    let count = ((p_max - p_min) / step + 1e-6).floor() as usize;
    Ok((0..=count).map(|i| (p_min + i as f64 * step).min(1.0)).collect())
}
