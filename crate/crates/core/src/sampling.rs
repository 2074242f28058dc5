//! Sampling, Poissonization with sample splitting, and distribution presets.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::splitmix64;
use crate::phi::ProbabilityVector;

/// How a histogram was generated; carries the nominal sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// `Σ counts = n`.
    Multinomial { n: u64 },
    /// Counts are independent `Poi(n p_i)`.
    Poissonized { n: u64 },
}

/// Per-symbol counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    counts: Vec<u64>,
    regime: Regime,
}

impl Histogram {
    /// Multinomial histogram with `n` equal to the total count.
    pub fn multinomial(counts: Vec<u64>) -> Self {
        let n = counts.iter().sum();
        Self {
            counts,
            regime: Regime::Multinomial { n },
        }
    }

    pub fn poissonized(counts: Vec<u64>, n: u64) -> Self {
        Self {
            counts,
            regime: Regime::Poissonized { n },
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Nominal sample size.
    pub fn n(&self) -> u64 {
        match self.regime {
            Regime::Multinomial { n } | Regime::Poissonized { n } => n,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Two independent Poissonized histograms over the same alphabet: `primary`
/// feeds the estimators, `selector` picks the branch per symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitHistograms {
    pub primary: Histogram,
    pub selector: Histogram,
    pub base_n: u64,
}

/// Implementation of [`poissonize_and_split`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMethod {
    /// `Ñ_i, Ñ'_i ~ Poi(n p_i)` drawn independently per symbol.
    #[default]
    PerSymbol,
    /// Draw `n' ~ Poi(2n)` samples and send each to a chunk by a fair coin.
    Thinning,
}

/// RNG for trial `trial` of a run with master seed `seed`. Independent of
/// scheduling order.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    rng.set_stream(trial);
    rng
}

/// Draws from `Poi(lambda)`; `lambda = 0` gives 0.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let d = Poisson::new(lambda).expect("finite positive Poisson mean");
    d.sample(rng) as u64
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// `N ~ Mul(n, P)` by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(p: &ProbabilityVector, n: u64, rng: &mut R) -> Histogram {
    let probs = p.as_slice();
    let mut counts = vec![0u64; probs.len()];
    let mut remaining_n = n;
    let mut remaining_mass = 1.0f64;
    for (i, &pi) in probs.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = remaining_n;
            break;
        }
        let q = if remaining_mass > 0.0 { (pi / remaining_mass).min(1.0) } else { 1.0 };
        let c = binomial(rng, remaining_n, q);
        counts[i] = c;
        remaining_n -= c;
        remaining_mass -= pi;
    }
    // Mass left on zero-probability tail symbols after rounding goes to the
    // last positive symbol.
    if let Some(last) = probs.iter().rposition(|&v| v > 0.0) {
        let tail: u64 = counts[last + 1..].iter().sum();
        if tail > 0 {
            counts[last + 1..].iter_mut().for_each(|c| *c = 0);
            counts[last] += tail;
        }
    }
    Histogram {
        counts,
        regime: Regime::Multinomial { n },
    }
}

/// Poissonized sample split into two independent halves, each with
/// per-symbol law `Poi(n p_i)`.
pub fn poissonize_and_split<R: Rng + ?Sized>(
    p: &ProbabilityVector,
    n: u64,
    method: SplitMethod,
    rng: &mut R,
) -> Result<SplitHistograms> {
    if n == 0 {
        return Err(Error::InsufficientData("Poissonized sample size must be at least 1".into()));
    }
    let probs = p.as_slice();
    let (primary, selector) = match method {
        SplitMethod::PerSymbol => {
            let mut a = Vec::with_capacity(probs.len());
            let mut b = Vec::with_capacity(probs.len());
            for &pi in probs {
                let lambda = n as f64 * pi;
                a.push(poisson(rng, lambda));
                b.push(poisson(rng, lambda));
            }
            (a, b)
        }
        SplitMethod::Thinning => {
            let total = poisson(rng, 2.0 * n as f64);
            let index = WeightedIndex::new(probs)
                .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
            let mut a = vec![0u64; probs.len()];
            let mut b = vec![0u64; probs.len()];
            for _ in 0..total {
                let s = index.sample(rng);
                if rng.random::<bool>() {
                    a[s] += 1;
                } else {
                    b[s] += 1;
                }
            }
            (a, b)
        }
    };
    Ok(SplitHistograms {
        primary: Histogram::poissonized(primary, n),
        selector: Histogram::poissonized(selector, n),
        base_n: n,
    })
}

/// Splits an observed histogram into two halves by independent fair coins.
/// The halves are exactly independent only for Poissonized input; the base
/// sample size is half the total.
pub fn split_observed<R: Rng + ?Sized>(hist: &Histogram, rng: &mut R) -> Result<SplitHistograms> {
    let base_n = hist.total() / 2;
    if base_n == 0 {
        return Err(Error::InsufficientData("need at least 2 observations to split".into()));
    }
    let mut a = Vec::with_capacity(hist.k());
    let mut b = Vec::with_capacity(hist.k());
    for &c in hist.counts() {
        let x = binomial(rng, c, 0.5);
        a.push(x);
        b.push(c - x);
    }
    Ok(SplitHistograms {
        primary: Histogram::poissonized(a, base_n),
        selector: Histogram::poissonized(b, base_n),
        base_n,
    })
}

/// Named distribution presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Preset {
    Uniform,
    /// `p_i ∝ i^(-s)`.
    Zipf { s: f64 },
    /// `(1 - p, p/(k-1), ..., p/(k-1))`.
    TwoPoint { p: f64 },
    /// The first `⌈k/2⌉` symbols share almost all mass; each remaining
    /// symbol has mass `1/k²`.
    HalfTiny,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Uniform => write!(f, "uniform"),
            Preset::Zipf { s } => write!(f, "zipf:{s}"),
            Preset::TwoPoint { p } => write!(f, "two_point:{p}"),
            Preset::HalfTiny => write!(f, "half_tiny"),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    /// Accepts `uniform`, `zipf[:s]` (default 1), `two_point:p`, `half_tiny`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (s.trim(), None),
        };
        let num = |v: Option<&str>| -> Result<Option<f64>> {
            v.map(|t| t.parse::<f64>().map_err(|_| Error::UnknownPreset(s.to_string())))
                .transpose()
        };
        match (name, num(param)?) {
            ("uniform", None) => Ok(Preset::Uniform),
            ("half_tiny", None) => Ok(Preset::HalfTiny),
            ("zipf", s_opt) => Ok(Preset::Zipf { s: s_opt.unwrap_or(1.0) }),
            ("two_point", Some(p)) => Ok(Preset::TwoPoint { p }),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

impl TryFrom<String> for Preset {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Preset> for String {
    fn from(p: Preset) -> Self {
        p.to_string()
    }
}

/// Builds a preset distribution on `k >= 2` symbols.
pub fn distribution_zoo(preset: Preset, k: usize) -> Result<ProbabilityVector> {
    if k < 2 {
        return Err(Error::InvalidDistribution(format!("presets need k >= 2, got {k}")));
    }
    match preset {
        Preset::Uniform => Ok(ProbabilityVector::uniform(k)),
        Preset::Zipf { s } => {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidDistribution(format!("Zipf exponent {s}")));
            }
            let w: Vec<f64> = (1..=k).map(|i| (i as f64).powf(-s)).collect();
            ProbabilityVector::from_weights(&w)
        }
        Preset::TwoPoint { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!("two-point mass {p}")));
            }
            let mut v = vec![p / (k - 1) as f64; k];
            v[0] = 1.0 - p;
            ProbabilityVector::new(v)
        }
        Preset::HalfTiny => {
            let heavy = k.div_ceil(2);
            let tiny = 1.0 / (k as f64 * k as f64);
            let heavy_mass = (1.0 - tiny * (k - heavy) as f64) / heavy as f64;
            let v = (0..k).map(|i| if i < heavy { heavy_mass } else { tiny }).collect::<Vec<_>>();
            ProbabilityVector::from_weights(&v)
        }
    }
}
