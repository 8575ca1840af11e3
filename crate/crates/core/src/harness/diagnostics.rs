//! Chain diagnostics: integrated autocorrelation time, effective sample size,
//! highest-posterior-density intervals and chain summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmmh::{sign_corrected_expectation, Chain};

fn autocov(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / n as f64
}

/// Integrated autocorrelation time `1 + 2 sum_k r_k`, truncated by Geyer's
/// initial monotone sequence. Constant series give 1; the result is floored at 1.
pub fn iact(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return 1.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let g0 = autocov(x, mean, 0);
    if g0 <= 0.0 || !g0.is_finite() {
        return 1.0;
    }
    // Gamma_k = gamma_{2k} + gamma_{2k+1}, kept while positive and forced monotone
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = if k == 0 { g0 } else { autocov(x, mean, 2 * k) } + autocov(x, mean, 2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    ((-g0 + 2.0 * sum) / g0).max(1.0)
}

/// Fraction of positive signs.
pub fn positive_fraction(signs: &[f64]) -> f64 {
    signs.iter().filter(|&&s| s > 0.0).count() as f64 / signs.len() as f64
}

/// IACT of `psi * s` inflated by `(2 tau - 1)^{-2}`, with `tau` the empirical
/// positive-sign fraction.
pub fn iact_signed(x: &[f64], signs: &[f64]) -> f64 {
    let tau = positive_fraction(signs);
    let denom = (2.0 * tau - 1.0).powi(2);
    if denom == 0.0 {
        return f64::INFINITY;
    }
    let weighted: Vec<f64> = x.iter().zip(signs).map(|(a, s)| a * s).collect();
    iact(&weighted) / denom
}

pub fn ess(x: &[f64]) -> f64 {
    x.len() as f64 / iact(x)
}

/// Shortest interval holding `mass` of the empirical distribution.
pub fn hpd(samples: &[f64], mass: f64) -> (f64, f64) {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let (mut best, mut lo) = (f64::INFINITY, 0);
    for i in 0..=n - k {
        let w = s[i + k - 1] - s[i];
        if w < best {
            best = w;
            lo = i;
        }
    }
    (s[lo], s[lo + k - 1])
}

/// Maximum segment tree supporting "first index at or after `i` whose value is
/// at least `t`".
struct MaxTree {
    size: usize,
    data: Vec<f64>,
}

impl MaxTree {
    fn new(values: &[f64]) -> Self {
        let size = values.len().next_power_of_two();
        let mut data = vec![f64::NEG_INFINITY; 2 * size];
        data[size..size + values.len()].copy_from_slice(values);
        for i in (1..size).rev() {
            data[i] = data[2 * i].max(data[2 * i + 1]);
        }
        Self { size, data }
    }

    fn first_at_least(&self, from: usize, t: f64) -> Option<usize> {
        self.search(1, 0, self.size, from, t)
    }

    fn search(&self, node: usize, lo: usize, hi: usize, from: usize, t: f64) -> Option<usize> {
        if hi <= from || self.data[node] < t {
            return None;
        }
        if hi - lo == 1 {
            return Some(lo);
        }
        let mid = (lo + hi) / 2;
        self.search(2 * node, lo, mid, from, t).or_else(|| self.search(2 * node + 1, mid, hi, from, t))
    }
}

/// HPD interval under signed weights `s_i / sum s`: the shortest `[x_i, x_j]`
/// whose signed mass reaches `mass`. Equal to [`hpd`] when all signs are +1.
pub fn hpd_signed(samples: &[f64], signs: &[f64], mass: f64) -> Result<(f64, f64)> {
    let total: f64 = signs.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numerical("signed HPD needs a positive sum of signs".into()));
    }
    if signs.iter().all(|&s| s > 0.0) {
        return Ok(hpd(samples, mass));
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
    let xs: Vec<f64> = idx.iter().map(|&i| samples[i]).collect();
    let mut cum = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for &i in &idx {
        acc += signs[i];
        cum.push(acc);
    }
    let tree = MaxTree::new(&cum);
    let need = mass * total - 1e-9;
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..xs.len() {
        let before = if i == 0 { 0.0 } else { cum[i - 1] };
        if let Some(j) = tree.first_at_least(i, before + need) {
            let w = xs[j] - xs[i];
            if best.is_none_or(|(b, _, _)| w < b) {
                best = Some((w, i, j));
            }
        }
    }
    let (_, i, j) = best.ok_or_else(|| Error::Numerical("no interval reaches the requested mass".into()))?;
    Ok((xs[i], xs[j]))
}

/// JSON has no NaN; undefined statistics are written as `null` and read back as NaN.
fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    #[serde(default)]
    pub name: String,
    #[serde(deserialize_with = "nan_from_null")]
    pub mean: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub hpd_lower: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub hpd_upper: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub iact: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub iact_signed: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub ess: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub ess_signed: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub ess_per_sec: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub params: Vec<ParamSummary>,
    pub negative_fraction: f64,
    pub acceptance_rate: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub runtime_secs: f64,
    pub n_samples: usize,
    pub burn_in: usize,
    /// False when the sign balance makes the corrected means unreliable.
    pub reliable: bool,
}

impl ChainSummary {
    /// Replaces the default `p0, p1, ...` parameter names.
    pub fn named(mut self, names: &[&str]) -> Self {
        for (p, n) in self.params.iter_mut().zip(names) {
            p.name = n.to_string();
        }
        self
    }
}

/// Summarises a chain after discarding `burn_in` iterates.
pub fn summarize(chain: &Chain, burn_in: usize, mass: f64) -> Result<ChainSummary> {
    let kept = chain.samples.get(burn_in..).filter(|k| !k.is_empty()).ok_or_else(|| {
        Error::Config(format!("chain of length {} does not exceed burn-in {burn_in}", chain.samples.len()))
    })?;
    let signs: Vec<f64> = kept.iter().map(|s| s.sign as f64).collect();
    let dim = kept[0].theta.len();
    let mut params = Vec::with_capacity(dim);
    let mut reliable = true;
    let mut negative_fraction = 0.0;
    for d in 0..dim {
        let corrected = sign_corrected_expectation(&chain.samples, |t| t[d], burn_in)?;
        reliable &= corrected.reliable;
        negative_fraction = corrected.negative_fraction;
        let xs: Vec<f64> = kept.iter().map(|s| s.theta[d]).collect();
        let (hpd_lower, hpd_upper) = hpd_signed(&xs, &signs, mass).unwrap_or((f64::NAN, f64::NAN));
        let raw = iact(&xs);
        let signed = iact_signed(&xs, &signs);
        let n = xs.len() as f64;
        params.push(ParamSummary {
            name: format!("p{d}"),
            mean: corrected.value,
            hpd_lower,
            hpd_upper,
            iact: raw,
            iact_signed: signed,
            ess: n / raw,
            ess_signed: n / signed,
            ess_per_sec: if chain.runtime_secs > 0.0 { n / signed / chain.runtime_secs } else { f64::NAN },
        });
    }
    Ok(ChainSummary {
        params,
        negative_fraction,
        acceptance_rate: chain.acceptance_rate(),
        runtime_secs: chain.runtime_secs,
        n_samples: kept.len(),
        burn_in,
        reliable,
    })
}
