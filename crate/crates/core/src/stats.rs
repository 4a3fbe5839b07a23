//! Listening-test and slope statistics: Student/Welch t-tests, Holm-Bonferroni
//! step-down correction, MUSHRA summaries with best-group marking, the exact
//! binomial sign test for preference tests, and pairwise F3-slope comparison.
//!
//! Everything is exact or closed-form; nothing here draws random numbers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Preference, ScoreKind, ScoreTable, ScoreValue};
use crate::formant::SlopeStat;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("paired test needs equal sample sizes, got {0} and {1}")]
    SizeMismatch(usize, usize),
    #[error("need at least 2 observations per sample, got {0}")]
    TooFew(usize),
    #[error("p-value {0} outside [0, 1]")]
    PValueRange(f64),
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("score table is empty")]
    EmptyTable,
    #[error("expected a {expected:?} score table")]
    WrongKind { expected: ScoreKind },
    #[error("systems {a:?} and {b:?} are not rated on the same pairing units ({detail})")]
    MissingPairs {
        a: String,
        b: String,
        detail: String,
    },
    #[error("need at least 2 systems to compare, got {0}")]
    TooFewSystems(usize),
    #[error("system {system:?} has {count} contexts; at least 2 are required")]
    TooFewContexts { system: String, count: usize },
}

// ---------------------------------------------------------------------------
// Special functions

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`, with `y = 1 - x` supplied
/// separately so callers can avoid cancellation.
pub fn inc_beta(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    let denom = df + t2;
    inc_beta(df / 2.0, 0.5, df / denom, t2 / denom).clamp(0.0, 1.0)
}

/// Positive `t` with two-sided p-value `p` (bisection on the CDF).
pub fn t_critical(p: f64, df: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while t_two_sided_p(hi, df) > p {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_two_sided_p(mid, df) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Correctly rounded floating-point sum (Shewchuk partials), independent of
/// the order of `values`.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    // Round the partials to nearest, as Python's math.fsum does.
    let mut hi = 0.0;
    if let Some(mut n) = partials.len().checked_sub(1) {
        hi = partials[n];
        let mut lo = 0.0;
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = partials[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

pub fn mean(xs: &[f64]) -> f64 {
    exact_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    exact_sum(xs.iter().map(|x| (x - m) * (x - m))) / (xs.len() - 1) as f64
}

// ---------------------------------------------------------------------------
// t-tests

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    #[serde(with = "extended_float")]
    pub t: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// `p <= alpha`, before any multiple-comparison correction.
    pub rejected: bool,
    pub alpha: f64,
    /// Zero variance with a nonzero mean difference; `p = 0` by convention.
    pub degenerate: bool,
}

/// JSON has no infinities; non-finite values travel as "inf", "-inf" or "nan".
mod extended_float {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        match *v {
            v if v.is_finite() => s.serialize_f64(v),
            v if v.is_nan() => s.serialize_str("nan"),
            v if v > 0.0 => s.serialize_str("inf"),
            _ => s.serialize_str("-inf"),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Label(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Label(l) => match l.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(D::Error::custom(format!(
                    "expected a number, \"inf\", \"-inf\" or \"nan\", found {l:?}"
                ))),
            },
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(StatsError::Alpha(alpha))
    }
}

fn finish(diff: f64, se2: f64, df: f64, alpha: f64) -> TestResult {
    let (t, p, degenerate) = if se2 == 0.0 {
        if diff == 0.0 {
            (0.0, 1.0, false)
        } else {
            (f64::INFINITY.copysign(diff), 0.0, true)
        }
    } else {
        let t = diff / se2.sqrt();
        (t, t_two_sided_p(t, df), false)
    };
    TestResult {
        t,
        degrees_of_freedom: df,
        p,
        rejected: p <= alpha,
        alpha,
        degenerate,
    }
}

/// Two-sided t-test of `xs` against `ys`: paired Student when `paired`,
/// Welch with Satterthwaite degrees of freedom otherwise.
pub fn t_test(xs: &[f64], ys: &[f64], paired: bool, alpha: f64) -> Result<TestResult, StatsError> {
    check_alpha(alpha)?;
    if paired {
        if xs.len() != ys.len() {
            return Err(StatsError::SizeMismatch(xs.len(), ys.len()));
        }
        if xs.len() < 2 {
            return Err(StatsError::TooFew(xs.len()));
        }
        let d: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).collect();
        let n = d.len() as f64;
        Ok(finish(mean(&d), variance(&d) / n, n - 1.0, alpha))
    } else {
        let n_min = xs.len().min(ys.len());
        if n_min < 2 {
            return Err(StatsError::TooFew(n_min));
        }
        let (nx, ny) = (xs.len() as f64, ys.len() as f64);
        let (vx, vy) = (variance(xs) / nx, variance(ys) / ny);
        let se2 = vx + vy;
        let df = if se2 == 0.0 {
            nx + ny - 2.0
        } else {
            se2 * se2 / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0))
        };
        Ok(finish(mean(xs) - mean(ys), se2, df, alpha))
    }
}

// ---------------------------------------------------------------------------
// Holm-Bonferroni

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolmOutcome {
    pub p: f64,
    pub adjusted_p: f64,
    pub rejected: bool,
}

/// Holm step-down correction; outcomes are in input order.
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Result<Vec<HolmOutcome>, StatsError> {
    check_alpha(alpha)?;
    if let Some(&bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::PValueRange(bad));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));

    let mut out = vec![
        HolmOutcome {
            p: 0.0,
            adjusted_p: 0.0,
            rejected: false,
        };
        m
    ];
    let mut running_max = 0.0f64;
    let mut still_rejecting = true;
    for (rank, &idx) in order.iter().enumerate() {
        let p = p_values[idx];
        let remaining = (m - rank) as f64;
        running_max = running_max.max((remaining * p).min(1.0));
        still_rejecting = still_rejecting && p <= alpha / remaining;
        out[idx] = HolmOutcome {
            p,
            adjusted_p: running_max,
            rejected: still_rejecting,
        };
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// MUSHRA

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonFamily {
    /// Top-mean system against each other system.
    #[default]
    TopVsRest,
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingUnit {
    /// One pair per (listener, testcase) rating.
    #[default]
    Rating,
    /// Ratings averaged over listeners, one pair per testcase.
    TestcaseMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MushraOptions {
    pub alpha: f64,
    pub family: ComparisonFamily,
    pub pairing: PairingUnit,
}

impl Default for MushraOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            family: ComparisonFamily::TopVsRest,
            pairing: PairingUnit::Rating,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub paired: bool,
    pub test: TestResult,
    pub adjusted_p: f64,
    /// Holm decision across the comparison family.
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemStats {
    pub system: String,
    pub mean: f64,
    pub n: usize,
    pub ci95: Option<(f64, f64)>,
    pub best: bool,
    /// Holm-adjusted p of the comparison against the top system.
    pub adjusted_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MushraSummary {
    pub top: String,
    pub systems: Vec<SystemStats>,
    pub best_group: BTreeSet<String>,
    pub comparisons: Vec<Comparison>,
}

fn ci95(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let m = mean(values);
    let half = t_critical(0.05, n - 1.0) * (variance(values) / n).sqrt();
    Some((m - half, m + half))
}

type Keyed = BTreeMap<(String, String), f64>;

fn pairing_units(table: &ScoreTable, pairing: PairingUnit) -> BTreeMap<String, Keyed> {
    let mut out: BTreeMap<String, Keyed> = BTreeMap::new();
    match pairing {
        PairingUnit::Rating => {
            for (system, ratings) in table.ratings() {
                out.insert(
                    system.to_string(),
                    ratings
                        .into_iter()
                        .map(|((l, t), v)| ((l.to_string(), t.to_string()), v))
                        .collect(),
                );
            }
        }
        PairingUnit::TestcaseMean => {
            for (system, ratings) in table.ratings() {
                let mut by_case: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
                for ((_, t), v) in ratings {
                    by_case.entry(t).or_default().push(v);
                }
                out.insert(
                    system.to_string(),
                    by_case
                        .into_iter()
                        .map(|(t, vs)| ((String::new(), t.to_string()), mean(&vs)))
                        .collect(),
                );
            }
        }
    }
    out
}

fn paired_values(
    a: &str,
    b: &str,
    units: &BTreeMap<String, Keyed>,
) -> Result<(Vec<f64>, Vec<f64>), StatsError> {
    let (ua, ub) = (&units[a], &units[b]);
    let only_a = ua.keys().filter(|k| !ub.contains_key(*k)).count();
    let only_b = ub.keys().filter(|k| !ua.contains_key(*k)).count();
    if only_a + only_b > 0 {
        return Err(StatsError::MissingPairs {
            a: a.to_string(),
            b: b.to_string(),
            detail: format!("{only_a} units only rated for {a}, {only_b} only for {b}"),
        });
    }
    Ok((
        ua.values().copied().collect(),
        ub.values().copied().collect(),
    ))
}

/// Per-system means and the best group "up to statistically significant
/// differences" under Holm correction.
pub fn mushra_summary(
    table: &ScoreTable,
    opts: &MushraOptions,
) -> Result<MushraSummary, StatsError> {
    check_alpha(opts.alpha)?;
    if table.kind != ScoreKind::Mushra {
        return Err(StatsError::WrongKind {
            expected: ScoreKind::Mushra,
        });
    }
    if table.rows.is_empty() {
        return Err(StatsError::EmptyTable);
    }
    let mut raw: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in &table.rows {
        if let ScoreValue::Rating(v) = row.score {
            raw.entry(row.system.as_str()).or_default().push(v);
        }
    }
    let means: BTreeMap<&str, f64> = raw.iter().map(|(s, v)| (*s, mean(v))).collect();
    // Highest mean; ties go to the lexicographically first name.
    let top = means
        .iter()
        .fold(None::<(&str, f64)>, |best, (&s, &m)| match best {
            Some((_, bm)) if bm >= m => best,
            _ => Some((s, m)),
        })
        .map(|(s, _)| s.to_string())
        .ok_or(StatsError::EmptyTable)?;

    let units = pairing_units(table, opts.pairing);
    let names: Vec<&str> = raw.keys().copied().collect();
    let pairs: Vec<(String, String)> = match opts.family {
        ComparisonFamily::TopVsRest => names
            .iter()
            .filter(|&&s| s != top)
            .map(|&s| (top.clone(), s.to_string()))
            .collect(),
        ComparisonFamily::AllPairs => names
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| {
                names[i + 1..]
                    .iter()
                    .map(move |&b| (a.to_string(), b.to_string()))
            })
            .collect(),
    };
    let mut tests = Vec::with_capacity(pairs.len());
    for (a, b) in &pairs {
        let (xs, ys) = paired_values(a, b, &units)?;
        tests.push(t_test(&xs, &ys, true, opts.alpha)?);
    }
    let holm = holm_bonferroni(&tests.iter().map(|t| t.p).collect::<Vec<_>>(), opts.alpha)?;
    let comparisons: Vec<Comparison> = pairs
        .into_iter()
        .zip(tests)
        .zip(holm)
        .map(|(((a, b), test), h)| Comparison {
            a,
            b,
            paired: true,
            test,
            adjusted_p: h.adjusted_p,
            rejected: h.rejected,
        })
        .collect();

    let vs_top = |s: &str| {
        comparisons
            .iter()
            .find(|c| (c.a == top && c.b == s) || (c.b == top && c.a == s))
    };
    let mut best_group = BTreeSet::new();
    best_group.insert(top.clone());
    for &s in &names {
        if let Some(c) = vs_top(s) {
            if !c.rejected {
                best_group.insert(s.to_string());
            }
        }
    }
    let systems = names
        .iter()
        .map(|&s| SystemStats {
            system: s.to_string(),
            mean: means[s],
            n: raw[s].len(),
            ci95: ci95(&raw[s]),
            best: best_group.contains(s),
            adjusted_p: vs_top(s).map(|c| c.adjusted_p),
        })
        .collect();

    Ok(MushraSummary {
        top,
        systems,
        best_group,
        comparisons,
    })
}

// ---------------------------------------------------------------------------
// Preference test

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSummary {
    pub count_a: usize,
    pub count_b: usize,
    pub count_tie: usize,
    pub share_a: f64,
    pub share_b: f64,
    pub share_tie: f64,
    /// Two-sided exact sign test on the non-tie responses; `None` when every
    /// response is a tie.
    pub sign_test_p: Option<f64>,
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Two-sided exact binomial test of `k` successes in `n` trials at p = 1/2.
pub fn sign_test(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let hi = k.max(n - k);
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let upper: f64 = (hi..=n).map(|i| (ln_choose(n, i) - ln_half_n).exp()).sum();
    (2.0 * upper).min(1.0)
}

pub fn preference_summary(table: &ScoreTable) -> Result<PreferenceSummary, StatsError> {
    if table.kind != ScoreKind::Preference {
        return Err(StatsError::WrongKind {
            expected: ScoreKind::Preference,
        });
    }
    let (mut a, mut b, mut tie) = (0usize, 0usize, 0usize);
    for row in &table.rows {
        match row.score {
            ScoreValue::Choice(Preference::A) => a += 1,
            ScoreValue::Choice(Preference::B) => b += 1,
            ScoreValue::Choice(Preference::Tie) => tie += 1,
            ScoreValue::Rating(_) => {}
        }
    }
    let n = a + b + tie;
    if n == 0 {
        return Err(StatsError::EmptyTable);
    }
    let total = n as f64;
    Ok(PreferenceSummary {
        count_a: a,
        count_b: b,
        count_tie: tie,
        share_a: a as f64 / total,
        share_b: b as f64 / total,
        share_tie: tie as f64 / total,
        sign_test_p: (a + b > 0).then(|| sign_test(a as u64, (a + b) as u64)),
    })
}

// ---------------------------------------------------------------------------
// F3 slope comparison

/// Slope statistics for one rhotic context of one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSlope {
    /// Stable key identifying the context across systems.
    pub context: String,
    pub stat: SlopeStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSlopes {
    pub system: String,
    pub n: usize,
    pub mean_ols_slope: f64,
    pub mean_net_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeComparison {
    pub systems: Vec<SystemSlopes>,
    pub comparisons: Vec<Comparison>,
}

/// Pairwise tests of mean OLS slope between systems, Holm-corrected across
/// all pairs. Systems sharing an identical ordered context list are paired.
pub fn slope_comparison(
    per_system: &BTreeMap<String, Vec<ContextSlope>>,
    alpha: f64,
) -> Result<SlopeComparison, StatsError> {
    check_alpha(alpha)?;
    if per_system.len() < 2 {
        return Err(StatsError::TooFewSystems(per_system.len()));
    }
    for (system, slopes) in per_system {
        if slopes.len() < 2 {
            return Err(StatsError::TooFewContexts {
                system: system.clone(),
                count: slopes.len(),
            });
        }
    }
    let systems = per_system
        .iter()
        .map(|(system, slopes)| {
            let ols: Vec<f64> = slopes.iter().map(|s| s.stat.ols_slope).collect();
            let net: Vec<f64> = slopes.iter().map(|s| s.stat.net_change).collect();
            SystemSlopes {
                system: system.clone(),
                n: slopes.len(),
                mean_ols_slope: mean(&ols),
                mean_net_change: mean(&net),
            }
        })
        .collect();

    let names: Vec<&String> = per_system.keys().collect();
    let mut pending = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let (sa, sb) = (&per_system[*a], &per_system[*b]);
            let paired =
                sa.len() == sb.len() && sa.iter().zip(sb).all(|(x, y)| x.context == y.context);
            let xs: Vec<f64> = sa.iter().map(|s| s.stat.ols_slope).collect();
            let ys: Vec<f64> = sb.iter().map(|s| s.stat.ols_slope).collect();
            let test = t_test(&xs, &ys, paired, alpha)?;
            pending.push(((*a).clone(), (*b).clone(), paired, test));
        }
    }
    let holm = holm_bonferroni(&pending.iter().map(|p| p.3.p).collect::<Vec<_>>(), alpha)?;
    let comparisons = pending
        .into_iter()
        .zip(holm)
        .map(|((a, b, paired, test), h)| Comparison {
            a,
            b,
            paired,
            test,
            adjusted_p: h.adjusted_p,
            rejected: h.rejected,
        })
        .collect();
    Ok(SlopeComparison {
        systems,
        comparisons,
    })
}
