//! Finite certificates for infinite series.
//!
//! Every summability condition of the construction is checked on a
//! truncation. Two kinds of evidence are produced:
//!
//! * a decay-model fit over the tail (heuristic: geometric vs. power law,
//!   whichever fits the monotone envelope of the tail better);
//! * a geometric majorant `t_k <= c * 2^-k`, reported as the constant `c`
//!   and the first index `k0` from which `t_k <= 2^-k` holds.

use serde::{Deserialize, Serialize};

/// Tail length used by the decay heuristic when none is given.
pub const DEFAULT_TAIL_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DecayModel {
    /// The tail vanishes identically.
    Zero,
    /// Fewer than three positive tail terms.
    Insufficient,
    Geometric { ratio: f64 },
    Power { exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(flatten)]
    pub model: DecayModel,
    pub summable: bool,
}

/// Monotone non-increasing envelope `env[k] = max_{m >= k} |t_m|`.
pub fn envelope(terms: &[f64]) -> Vec<f64> {
    let mut env = vec![0.0; terms.len()];
    let mut running = 0.0f64;
    for (k, t) in terms.iter().enumerate().rev() {
        running = running.max(t.abs());
        env[k] = running;
    }
    env
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rss = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (icpt + slope * x);
            r * r
        })
        .sum();
    (slope, icpt, rss)
}

/// Fits the last `tail_len` terms (1-based index k) with a geometric and
/// a power-law model and keeps the better one.
pub fn fit_tail(terms: &[f64], tail_len: usize) -> DecayFit {
    let env = envelope(terms);
    let start = env.len().saturating_sub(tail_len.max(3));
    let mut ks = Vec::new();
    let mut logs = Vec::new();
    for (idx, &v) in env.iter().enumerate().skip(start) {
        if v > 0.0 {
            ks.push((idx + 1) as f64);
            logs.push(v.ln());
        }
    }
    if env.last().is_none_or(|&v| v == 0.0) {
        return DecayFit { model: DecayModel::Zero, summable: true };
    }
    if ks.len() < 3 {
        return DecayFit { model: DecayModel::Insufficient, summable: false };
    }
    let (g_slope, _, g_rss) = linear_fit(&ks, &logs);
    let lnks: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let (p_slope, _, p_rss) = linear_fit(&lnks, &logs);
    if p_rss < g_rss {
        let exponent = -p_slope;
        DecayFit { model: DecayModel::Power { exponent }, summable: exponent > 1.0 }
    } else {
        let ratio = g_slope.exp();
        DecayFit { model: DecayModel::Geometric { ratio }, summable: ratio < 1.0 }
    }
}

pub fn partial_sums(terms: &[f64]) -> Vec<f64> {
    terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect()
}

/// Estimate of the full series value from a truncation, using the fitted
/// tail model: a geometric remainder, or two-stage Richardson extrapolation
/// over the partial sums at `n`, `n/2` and `n/4` for power-law decay.
/// Returns the plain partial sum when the tail model gives no handle.
pub fn extrapolated_sum(terms: &[f64], fit: &DecayFit) -> f64 {
    let sums = partial_sums(terms);
    let Some(&last_sum) = sums.last() else {
        return 0.0;
    };
    match fit.model {
        DecayModel::Geometric { ratio } if ratio < 1.0 => {
            let last = *terms.last().unwrap();
            last_sum + last * ratio / (1.0 - ratio)
        }
        DecayModel::Power { exponent } if exponent > 1.0 && terms.len() >= 8 => {
            let n = terms.len() - terms.len() % 4;
            let s = |m: usize| sums[m - 1];
            let q1 = exponent - 1.0;
            let q2 = exponent;
            let r1 = |m: usize| {
                let f = 2f64.powf(q1);
                (f * s(m) - s(m / 2)) / (f - 1.0)
            };
            let f2 = 2f64.powf(q2);
            // terms past the last multiple of four are part of the limit
            (f2 * r1(n) - r1(n / 2)) / (f2 - 1.0)
        }
        _ => last_sum,
    }
}

/// Geometric majorant of a finite term sequence (1-based index k).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Majorant {
    /// Smallest k0 with `t_k <= 2^-k` for every `k >= k0`; absent when the
    /// last term already violates it.
    pub k0: Option<usize>,
    /// `max_k t_k 2^k`, so that `t_k <= constant * 2^-k` for all k.
    pub constant: f64,
}

pub fn geometric_majorant(terms: &[f64]) -> Majorant {
    let mut k0 = None;
    for (idx, t) in terms.iter().enumerate().rev() {
        let k = idx + 1;
        if t.abs() <= 2f64.powi(-(k as i32)) {
            k0 = Some(k);
        } else {
            break;
        }
    }
    if terms.is_empty() {
        k0 = Some(1);
    }
    let constant = terms
        .iter()
        .enumerate()
        .map(|(idx, t)| t.abs() * 2f64.powi(idx as i32 + 1))
        .fold(0.0, f64::max);
    Majorant { k0, constant }
}

/// Terms, partial sums and both kinds of certificate for one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub decay: DecayFit,
    pub majorant: Majorant,
}

impl SeriesReport {
    pub fn new(terms: Vec<f64>, tail_len: usize) -> Self {
        let partial_sums = partial_sums(&terms);
        let decay = fit_tail(&terms, tail_len);
        let majorant = geometric_majorant(&terms);
        Self { terms, partial_sums, decay, majorant }
    }

    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}
