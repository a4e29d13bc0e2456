//! Power-law tail fitting for the event cost distribution.
//!
//! The tail model is the CCDF `F(x) = (x/x_min)^(-alpha)` for `x > x_min`.
//! `alpha` here is the slope magnitude of the CCDF on a log-log plot; the
//! probability density's log-log slope magnitude is `alpha + 1`, so the
//! continuous maximum-likelihood estimate is
//! `alpha = n_tail / sum(ln(x_i / x_min))` over the tail. The cutoff `x_min`
//! is chosen by minimizing the Kolmogorov-Smirnov distance between the
//! renormalized empirical tail and the fitted model, scanning the observed
//! costs as candidates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail fits with fewer points than this are refused.
pub const DEFAULT_N_TAIL_MIN: usize = 10;

/// Fits whose tail is smaller than this deserve a warning: the MLE variance
/// grows quickly for tiny tails.
pub const N_TAIL_WARN: usize = 50;

/// Candidate grid size cap for [`select_xmin`]; above it the distinct
/// observed costs are thinned to a log-spaced subset.
pub const DEFAULT_MAX_CANDIDATES: usize = 500;

/// Sampling-noise scale of the KS statistic on an `m`-point tail, in units of
/// `1/sqrt(m)`. Candidates whose KS distance sits within this band of the
/// minimum are treated as tied, and ties resolve to the smaller `x_min`;
/// without the band the argmin drifts into the tail on data that is power-law
/// all the way down, because deeper cutoffs get hundreds of chances to beat
/// the full-sample fit by luck.
pub const DEFAULT_KS_TIE_NOISE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TailFitOptions {
    pub n_tail_min: usize,
    pub max_candidates: usize,
    pub ks_tie_noise: f64,
}

impl Default for TailFitOptions {
    fn default() -> Self {
        TailFitOptions {
            n_tail_min: DEFAULT_N_TAIL_MIN,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            ks_tie_noise: DEFAULT_KS_TIE_NOISE,
        }
    }
}

/// A fitted power-law tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// CCDF slope magnitude.
    pub alpha: f64,
    /// Cost above which the power-law behavior is assumed.
    #[serde(rename = "x_min_usd")]
    pub x_min: f64,
    /// Number of costs at or above `x_min`.
    pub n_tail: usize,
    /// KS distance between the empirical tail CCDF and the fitted model.
    #[serde(rename = "ks")]
    pub ks_distance: f64,
}

/// Model CCDF `(x/x_min)^(-alpha)`, defined for `x >= x_min`.
pub fn model_ccdf(alpha: f64, x_min: f64, x: f64) -> Result<f64> {
    if x < x_min {
        return Err(Error::BelowXmin { x, x_min });
    }
    Ok((x / x_min).powf(-alpha))
}

/// Mean of the fitted tail, `x_min * alpha / (alpha - 1)`. Refused when
/// `alpha <= 1`: such a tail is heavy enough that its mean diverges, so any
/// mean-based summary of large costs is meaningless.
pub fn tail_mean(alpha: f64, x_min: f64) -> Result<f64> {
    if alpha <= 1.0 {
        return Err(Error::InfiniteMean { alpha });
    }
    Ok(x_min * alpha / (alpha - 1.0))
}

/// Continuous maximum-likelihood estimate of the CCDF slope magnitude over
/// the costs at or above `x_min`.
pub fn fit_alpha_given_xmin(costs: &[f64], x_min: f64, n_tail_min: usize) -> Result<f64> {
    if x_min <= 0.0 || x_min.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "x_min must be positive, got {x_min}"
        )));
    }
    let mut n_tail = 0usize;
    let mut sum_ln = 0.0f64;
    for &x in costs {
        if x >= x_min {
            n_tail += 1;
            sum_ln += (x / x_min).ln();
        }
    }
    if n_tail < n_tail_min {
        return Err(Error::InsufficientTail {
            available: n_tail,
            required: n_tail_min,
        });
    }
    if sum_ln <= 0.0 {
        return Err(Error::DegenerateTail);
    }
    Ok(n_tail as f64 / sum_ln)
}

/// KS distance between the empirical CCDF of `tail` (sorted ascending, all
/// `>= x_min`) and the model `(x/x_min)^(-alpha)`, evaluating the empirical
/// step both at and just before each distinct value.
fn ks_distance(tail: &[f64], x_min: f64, alpha: f64) -> f64 {
    let m = tail.len() as f64;
    let mut worst = 0.0f64;
    let mut i = 0;
    while i < tail.len() {
        let v = tail[i];
        // Advance over a run of ties; the step drops once per distinct value.
        let mut j = i;
        while j + 1 < tail.len() && tail[j + 1] == v {
            j += 1;
        }
        let model = (v / x_min).powf(-alpha);
        let emp_before = (tail.len() - i) as f64 / m;
        let emp_at = (tail.len() - j - 1) as f64 / m;
        worst = worst
            .max((emp_before - model).abs())
            .max((emp_at - model).abs());
        i = j + 1;
    }
    worst
}

/// Thins `values` (sorted ascending, distinct, positive) to at most `max`
/// log-spaced entries, always keeping the first and last.
fn log_spaced_subset(values: &[f64], max: usize) -> Vec<f64> {
    if values.len() <= max {
        return values.to_vec();
    }
    let lo = values[0].ln();
    let hi = values[values.len() - 1].ln();
    let mut out = Vec::with_capacity(max);
    for k in 0..max {
        let target = (lo + (hi - lo) * k as f64 / (max - 1) as f64).exp();
        let idx = values.partition_point(|&v| v < target);
        let pick = if idx == 0 {
            values[0]
        } else if idx == values.len() {
            values[values.len() - 1]
        } else if (values[idx] - target).abs() < (target - values[idx - 1]).abs() {
            values[idx]
        } else {
            values[idx - 1]
        };
        if out.last() != Some(&pick) {
            out.push(pick);
        }
    }
    out
}

/// Selects the tail cutoff by scanning candidate `x_min` values (the distinct
/// observed costs, log-thinned past `max_candidates`) and keeping the one
/// whose fitted model is closest to the empirical tail in KS distance.
/// Candidates within the statistic's sampling-noise band of the minimum count
/// as ties, and ties go to the smaller `x_min`; see [`DEFAULT_KS_TIE_NOISE`].
pub fn select_xmin(costs: &[f64], opts: &TailFitOptions) -> Result<TailFit> {
    let mut sorted: Vec<f64> = costs.iter().copied().filter(|x| x.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));

    let mut distinct: Vec<f64> = sorted.iter().copied().filter(|&x| x > 0.0).collect();
    distinct.dedup();
    // A candidate needs at least n_tail_min points at or above it.
    let positive = sorted.iter().filter(|&&x| x > 0.0).count();
    if positive < opts.n_tail_min {
        return Err(Error::InsufficientTail {
            available: positive,
            required: opts.n_tail_min,
        });
    }
    let candidates = log_spaced_subset(&distinct, opts.max_candidates);

    // Suffix sums of ln(x) make each candidate's MLE O(1).
    let n = sorted.len();
    let mut suffix_ln = vec![0.0f64; n + 1];
    for i in (0..n).rev() {
        let term = if sorted[i] > 0.0 { sorted[i].ln() } else { 0.0 };
        suffix_ln[i] = suffix_ln[i + 1] + term;
    }

    let mut fits: Vec<TailFit> = Vec::with_capacity(candidates.len());
    for &candidate in &candidates {
        let i0 = sorted.partition_point(|&x| x < candidate);
        let n_tail = n - i0;
        if n_tail < opts.n_tail_min {
            continue;
        }
        let sum_ln = suffix_ln[i0] - n_tail as f64 * candidate.ln();
        if sum_ln <= 0.0 {
            continue;
        }
        let alpha = n_tail as f64 / sum_ln;
        let ks = ks_distance(&sorted[i0..], candidate, alpha);
        fits.push(TailFit {
            alpha,
            x_min: candidate,
            n_tail,
            ks_distance: ks,
        });
    }
    let ks_min = fits
        .iter()
        .map(|f| f.ks_distance)
        .fold(f64::INFINITY, f64::min);
    // Smallest x_min among the candidates statistically tied with the
    // minimum (the candidate scan is ascending).
    fits.into_iter()
        .find(|f| f.ks_distance <= ks_min + opts.ks_tie_noise / (f.n_tail as f64).sqrt())
        .ok_or(Error::InsufficientTail {
            available: positive,
            required: opts.n_tail_min,
        })
}
