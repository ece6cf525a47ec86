//! Paired nonparametric testing and per-image score summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Differences (and |difference| ties) closer than this are treated as equal.
/// Scores live in [0, 1], so this only absorbs floating-point noise from
/// seed averaging.
pub const TIE_EPS: f64 = 1e-12;

/// Largest effective sample size that uses the exact null distribution.
pub const EXACT_MAX_N: usize = 20;

pub const FAMILY_ALPHA: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("paired lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sample is empty")]
    Empty,
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("number of comparisons must be >= 1")]
    NoComparisons,
}

/// Per-image scores of two methods on the same images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub labels: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PairedSample {
    pub fn new(labels: Vec<String>, a: Vec<f64>, b: Vec<f64>) -> Result<Self, StatsError> {
        if a.len() != b.len() {
            return Err(StatsError::LengthMismatch(a.len(), b.len()));
        }
        if labels.len() != a.len() {
            return Err(StatsError::LengthMismatch(labels.len(), a.len()));
        }
        if let Some(&bad) = a.iter().chain(&b).find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(StatsError::ScoreOutOfRange(bad));
        }
        Ok(Self { labels, a, b })
    }

    /// Unlabeled sample; labels are the indices.
    pub fn from_scores(a: Vec<f64>, b: Vec<f64>) -> Result<Self, StatsError> {
        let labels = (0..a.len()).map(|i| i.to_string()).collect();
        Self::new(labels, a, b)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `a_i - b_i`.
    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// min(W+, W-).
    pub w_statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub n_effective: usize,
    pub p_value: f64,
    pub exact: bool,
    pub alpha_corr: f64,
    pub significant: bool,
    /// All differences were zero.
    pub degenerate: bool,
}

/// Average ranks (1-based) of `values`, ties within [`TIE_EPS`] sharing
/// the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] - values[order[end - 1]] <= TIE_EPS {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Two-sided exact p-value: the fraction of the 2^n equally likely sign
/// assignments whose min(W+, W-) is at most the observed `w`. Ranks are
/// counted in half units so tied (averaged) ranks stay integral.
pub fn exact_p_value(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // counts[s] = number of sign assignments with 2*W+ = s
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    let w2 = (w * 2.0).round() as usize;
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| s.min(total - s) <= w2)
        .map(|(_, &c)| c)
        .sum();
    extreme as f64 / 2f64.powi(ranks.len() as i32)
}

fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Two-sided normal approximation with tie-corrected variance and a 0.5
/// continuity correction.
pub fn normal_approx_p_value(ranks: &[f64], w: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * normal_sf(z)).min(1.0)
}

/// Wilcoxon signed-rank test on `a - b`, two-sided, judged at the
/// Bonferroni level for `comparisons` simultaneous tests. Zero differences
/// are dropped; n_effective <= 20 uses the exact null distribution.
pub fn wilcoxon_signed_rank(
    s: &PairedSample,
    comparisons: usize,
) -> Result<WilcoxonResult, StatsError> {
    if s.is_empty() {
        return Err(StatsError::Empty);
    }
    let alpha = bonferroni(1.0, comparisons)?.alpha_corr;
    let diffs: Vec<f64> = s
        .differences()
        .into_iter()
        .filter(|d| d.abs() > TIE_EPS)
        .collect();
    if diffs.is_empty() {
        return Ok(WilcoxonResult {
            w_statistic: 0.0,
            w_plus: 0.0,
            w_minus: 0.0,
            n_effective: 0,
            p_value: 1.0,
            exact: true,
            alpha_corr: alpha,
            significant: false,
            degenerate: true,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let w_minus: f64 = ranks.iter().sum::<f64>() - w_plus;
    let w = w_plus.min(w_minus);
    let exact = diffs.len() <= EXACT_MAX_N;
    let p = if exact {
        exact_p_value(&ranks, w)
    } else {
        normal_approx_p_value(&ranks, w)
    };
    let p_value = p.clamp(f64::MIN_POSITIVE, 1.0);
    Ok(WilcoxonResult {
        w_statistic: w,
        w_plus,
        w_minus,
        n_effective: diffs.len(),
        p_value,
        exact,
        alpha_corr: alpha,
        significant: p_value < alpha,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonferroniVerdict {
    pub alpha_corr: f64,
    pub significant: bool,
}

/// `alpha_corr = 0.05 / m`; significant iff `p < alpha_corr`.
pub fn bonferroni(p: f64, m: usize) -> Result<BonferroniVerdict, StatsError> {
    if m == 0 {
        return Err(StatsError::NoComparisons);
    }
    let alpha_corr = FAMILY_ALPHA / m as f64;
    Ok(BonferroniVerdict {
        alpha_corr,
        significant: p < alpha_corr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub mean_delta: f64,
    /// Sample standard deviation (n - 1 denominator; 0 when n = 1).
    pub std_delta: f64,
    pub median_delta: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation, 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Quantile by linear interpolation between order statistics at position
/// `q * (n - 1)`. `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn effect_size(s: &PairedSample) -> Result<EffectSize, StatsError> {
    if s.is_empty() {
        return Err(StatsError::Empty);
    }
    let d = s.differences();
    Ok(EffectSize {
        mean_delta: mean(&d),
        std_delta: sample_std(&d),
        median_delta: quantile_sorted(&sorted(&d), 0.5),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessProfile {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
    /// Images where the score strictly exceeds the reference.
    pub wins: usize,
    pub n: usize,
}

pub fn robustness_profile(scores: &[f64], reference: &[f64]) -> Result<RobustnessProfile, StatsError> {
    if scores.len() != reference.len() {
        return Err(StatsError::LengthMismatch(scores.len(), reference.len()));
    }
    if scores.is_empty() {
        return Err(StatsError::Empty);
    }
    let wins = scores.iter().zip(reference).filter(|(s, r)| s > r).count();
    let v = sorted(scores);
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    Ok(RobustnessProfile {
        mean: mean(scores),
        median: quantile_sorted(&v, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
        min: v[0],
        max: v[v.len() - 1],
        wins,
        n: scores.len(),
    })
}

/// `mean(core) - mean(thin)`; positive when thin strokes score worse.
pub fn core_thin_gap(core: &[f64], thin: &[f64]) -> Result<f64, StatsError> {
    if core.is_empty() || thin.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(mean(core) - mean(thin))
}

#[cfg(test)]
mod tests {
    use super::*;

    // plain 2^n enumeration over sign vectors
    fn brute_p(ranks: &[f64], w: f64) -> f64 {
        let n = ranks.len();
        let total: f64 = ranks.iter().sum();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let wp: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if wp.min(total - wp) <= w + 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[0.3, 0.1, 0.3, 0.2]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn all_positive_n5() {
        let s = PairedSample::from_scores(vec![0.6, 0.7, 0.8, 0.9, 0.95], vec![0.5, 0.5, 0.5, 0.5, 0.5]).unwrap();
        let r = wilcoxon_signed_rank(&s, 1).unwrap();
        assert_eq!(r.w_minus, 0.0);
        assert_eq!(r.p_value, 0.0625);
        assert!(r.exact);
    }

    #[test]
    fn no_signal_is_degenerate() {
        let s = PairedSample::from_scores(vec![0.4, 0.5], vec![0.4, 0.5]).unwrap();
        let r = wilcoxon_signed_rank(&s, 10).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn symmetric_sample_has_p_one() {
        let s = PairedSample::from_scores(vec![0.6, 0.4, 0.8, 0.2], vec![0.5; 4]).unwrap();
        let r = wilcoxon_signed_rank(&s, 1).unwrap();
        assert_eq!(r.w_plus, r.w_minus);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn critical_value_n10_w8() {
        // negative differences on ranks 1, 3 and 4: W- = 8
        let mags = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10];
        let a: Vec<f64> = mags
            .iter()
            .enumerate()
            .map(|(i, m)| if [0, 2, 3].contains(&i) { 0.5 - m } else { 0.5 + m })
            .collect();
        let s = PairedSample::from_scores(a, vec![0.5; 10]).unwrap();
        let r = wilcoxon_signed_rank(&s, 1).unwrap();
        assert_eq!(r.w_statistic, 8.0);
        assert_eq!(r.p_value, 50.0 / 1024.0);
        assert!(r.p_value < 0.05);
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let ranks = average_ranks(&[0.1, 0.2, 0.2, 0.3, 0.3, 0.3, 0.5, 0.6]);
        for w2 in 0..=36 {
            let w = w2 as f64 / 2.0;
            assert!((exact_p_value(&ranks, w) - brute_p(&ranks, w)).abs() < 1e-15);
        }
    }

    #[test]
    fn normal_approx_is_close_to_exact_at_20() {
        let ranks: Vec<f64> = (1..=20).map(|r| r as f64).collect();
        for w in [20.0, 40.0, 60.0, 80.0] {
            let e = exact_p_value(&ranks, w);
            let a = normal_approx_p_value(&ranks, w);
            assert!((e - a).abs() < 0.01, "w={w}: exact {e} approx {a}");
        }
    }

    #[test]
    fn large_sample_uses_normal_approx() {
        let a: Vec<f64> = (0..30).map(|i| 0.5 + 0.01 * (i as f64 + 1.0) * if i % 3 == 0 { -1.0 } else { 1.0 } / 3.0).collect();
        let s = PairedSample::from_scores(a, vec![0.5; 30]).unwrap();
        let r = wilcoxon_signed_rank(&s, 1).unwrap();
        assert!(!r.exact);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn bonferroni_cases() {
        let v = bonferroni(0.0009, 10).unwrap();
        assert!(v.significant);
        assert!((v.alpha_corr - 0.005).abs() < 1e-18);
        assert!(!bonferroni(0.005, 10).unwrap().significant);
        assert_eq!(bonferroni(0.2, 1).unwrap().alpha_corr, 0.05);
        assert_eq!(bonferroni(0.2, 0), Err(StatsError::NoComparisons));
    }

    #[test]
    fn effect_size_cases() {
        let e = effect_size(&PairedSample::from_scores(vec![0.7, 0.6, 0.9], vec![0.5, 0.4, 0.7]).unwrap()).unwrap();
        assert!((e.mean_delta - 0.2).abs() < 1e-12 && e.std_delta < 1e-12 && (e.median_delta - 0.2).abs() < 1e-12);
        let e = effect_size(&PairedSample::from_scores(vec![0.6, 0.8], vec![0.5, 0.5]).unwrap()).unwrap();
        assert!((e.mean_delta - 0.2).abs() < 1e-12);
        assert!((e.std_delta - 0.1414213562373095).abs() < 1e-12);
        assert!((e.median_delta - 0.2).abs() < 1e-12);
        let e = effect_size(&PairedSample::from_scores(vec![0.3], vec![0.3]).unwrap()).unwrap();
        assert_eq!((e.mean_delta, e.std_delta, e.median_delta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn robustness_quartiles() {
        let s = [0.25, 0.5, 0.75, 1.0];
        let p = robustness_profile(&s, &s).unwrap();
        assert_eq!((p.median, p.q1, p.q3, p.iqr), (0.625, 0.4375, 0.8125, 0.375));
        assert_eq!(p.wins, 0);
        let one = robustness_profile(&[0.4], &[0.1]).unwrap();
        assert_eq!((one.median, one.min, one.max, one.iqr, one.wins), (0.4, 0.4, 0.4, 0.0, 1));
        assert!(robustness_profile(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn robustness_permutation_invariant() {
        let s = [0.3, 0.9, 0.1, 0.6, 0.45];
        let r = [0.2, 0.95, 0.3, 0.5, 0.45];
        let perm = [3usize, 0, 4, 1, 2];
        let ps: Vec<f64> = perm.iter().map(|&i| s[i]).collect();
        let pr: Vec<f64> = perm.iter().map(|&i| r[i]).collect();
        let a = robustness_profile(&s, &r).unwrap();
        let b = robustness_profile(&ps, &pr).unwrap();
        assert_eq!((a.median, a.iqr, a.min, a.max, a.wins), (b.median, b.iqr, b.min, b.max, b.wins));
        assert_eq!(a.wins, 2);
    }

    #[test]
    fn quantile_endpoints() {
        let v = [0.1, 0.3, 0.35, 0.9];
        assert_eq!(quantile_sorted(&v, 0.0), 0.1);
        assert_eq!(quantile_sorted(&v, 1.0), 0.9);
    }

    #[test]
    fn gap_cases() {
        let g = core_thin_gap(&[0.68, 0.68], &[0.62]).unwrap();
        assert!((g - 0.06).abs() < 1e-12);
        assert_eq!(core_thin_gap(&[0.5], &[0.5]).unwrap(), 0.0);
        assert!(core_thin_gap(&[0.4], &[0.5]).unwrap() < 0.0);
        assert_eq!(core_thin_gap(&[], &[0.5]), Err(StatsError::Empty));
    }
}
