use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::metrics::midranks;
use crate::error::{Error, Result};

/// Largest smaller-sample size for which exact enumeration is offered.
pub const EXACT_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MannWhitneyMethod {
    /// Exact when `min(n, m) <= EXACT_LIMIT`, normal approximation otherwise.
    #[default]
    Auto,
    Exact,
    Normal,
}

impl fmt::Display for MannWhitneyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MannWhitneyMethod::Auto => "auto",
            MannWhitneyMethod::Exact => "exact",
            MannWhitneyMethod::Normal => "normal",
        })
    }
}

impl FromStr for MannWhitneyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(MannWhitneyMethod::Auto),
            "exact" => Ok(MannWhitneyMethod::Exact),
            "normal" => Ok(MannWhitneyMethod::Normal),
            other => Err(Error::InvalidConfig(format!(
                "unknown Mann-Whitney method {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample: its rank sum minus `n (n + 1) / 2`.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Method actually used (never `Auto`).
    pub method: MannWhitneyMethod,
}

/// Two-sided Mann-Whitney U test with midranks for ties.
///
/// The normal approximation uses the tie-corrected variance and a 0.5
/// continuity correction. The exact mode enumerates every assignment of the
/// pooled midranks to the smaller sample and counts those at least as far
/// from the null mean as the observed rank sum.
pub fn mann_whitney_u(a: &[f64], b: &[f64], method: MannWhitneyMethod) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::NonFiniteObjective);
    }
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n].iter().sum();
    let u = rank_sum_a - (n * (n + 1)) as f64 / 2.0;

    let small = n.min(m);
    let method = match method {
        MannWhitneyMethod::Auto if small <= EXACT_LIMIT => MannWhitneyMethod::Exact,
        MannWhitneyMethod::Auto => MannWhitneyMethod::Normal,
        MannWhitneyMethod::Exact if small > EXACT_LIMIT => {
            return Err(Error::ExactModeUnavailable {
                min_size: small,
                limit: EXACT_LIMIT,
            })
        }
        other => other,
    };
    let p = match method {
        MannWhitneyMethod::Exact => exact_p(&ranks, n),
        _ => normal_p(u, n, m, &pooled),
    };
    Ok(MannWhitney { u, p, method })
}

fn normal_p(u: f64, n: usize, m: usize, pooled: &[f64]) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let mut sorted = pooled.to_vec();
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
    let variance = if total > 1.0 {
        nf * mf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)))
    } else {
        0.0
    };
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((u - nf * mf / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Exact two-sided p-value over all `C(N, s)` subsets of the smaller sample.
fn exact_p(ranks: &[f64], n: usize) -> f64 {
    let total = ranks.len();
    // work with the smaller sample; the statistic is symmetric
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r) as usize).collect();
    let (chosen, size) = if n <= total - n {
        (&doubled[..n], n)
    } else {
        (&doubled[n..], total - n)
    };
    let observed: usize = chosen.iter().sum();
    let centre = size * (total + 1);
    let max_sum: usize = doubled.iter().sum();

    // counts[k][s]: subsets of size k with doubled-rank sum s
    let mut counts = vec![vec![0.0_f64; max_sum + 1]; size + 1];
    counts[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=size).rev() {
            let (lower, upper) = counts.split_at_mut(k);
            let (prev, cur) = (&lower[k - 1], &mut upper[0]);
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let observed_dev = observed.abs_diff(centre);
    let mut extreme = 0.0;
    let mut all = 0.0;
    for (s, &c) in counts[size].iter().enumerate() {
        all += c;
        if s.abs_diff(centre) >= observed_dev {
            extreme += c;
        }
    }
    (extreme / all).min(1.0)
}

/// Mean and standard error (sample standard deviation with `n - 1`
/// denominator, divided by `sqrt(n)`); the standard error of a single
/// value is zero.
pub fn aggregate_metrics(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok((values[0], 0.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    Ok((mean, sd / n.sqrt()))
}
