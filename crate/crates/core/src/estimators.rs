//! Estimators of `θ(P; φ)`: plugin, bias-corrected plugin on the smoothed
//! `φ`, the best-polynomial estimator, and the hybrid estimator that picks
//! between the last two per symbol using an independent selector histogram.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::phi::PhiSpec;
use crate::poly::{remez_best_poly, PolyCache, Polynomial};
use crate::sampling::{split_observed, trial_rng, Histogram, Regime, SplitHistograms};
use crate::smoothing::SmoothedPhi;

/// Which estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Polynomial / fourth-order corrected plugin; `α ∈ (1, 3/2)`.
    Hybrid4,
    /// Polynomial / second-order corrected plugin; `α ∈ (0, 1)`.
    Hybrid2,
    Plugin,
    Plugin2,
    Plugin4,
    /// Polynomial branch for every symbol.
    PolyOnly,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Hybrid4,
        Mode::Hybrid2,
        Mode::Plugin,
        Mode::Plugin2,
        Mode::Plugin4,
        Mode::PolyOnly,
    ];

    /// Whether the mode consumes a split (Poissonized) sample.
    pub fn uses_split(self) -> bool {
        matches!(self, Mode::Hybrid4 | Mode::Hybrid2 | Mode::PolyOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Hybrid4 => "hybrid4",
            Mode::Hybrid2 => "hybrid2",
            Mode::Plugin => "plugin",
            Mode::Plugin2 => "plugin2",
            Mode::Plugin4 => "plugin4",
            Mode::PolyOnly => "poly_only",
        }
    }

    /// Smoothing order `L` of the corrected branch, if any.
    fn smoothing_order(self) -> Option<usize> {
        match self {
            Mode::Hybrid2 | Mode::Plugin2 => Some(4),
            Mode::Hybrid4 | Mode::Plugin4 => Some(6),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator mode `{s}`")))
    }
}

/// Coefficients of the fourth-order correction.
///
/// `Corrected` cancels the `n^-1` and `n^-2` bias terms of the plugin on a
/// smooth `φ`:
///
/// ```text
/// H - N/(2n²) H'' + N/(3n³) H''' - 7N/(24n⁴) H'''' + N²/(8n⁴) H''''
/// ```
///
/// `AsPrinted` uses `-2N/(3n³)` and `-3N²/(8n⁴)` for the last-but-two and
/// last terms, which leaves a `-6p/n²` bias on `φ = p³`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourthOrderScheme {
    #[default]
    Corrected,
    AsPrinted,
}

/// Estimator parameters. `Δ` is in counts, `L` is the polynomial degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub mode: Mode,
    pub c1: f64,
    pub c2: f64,
    pub n: u64,
    pub k: usize,
    #[serde(default)]
    pub strict_theory: bool,
    /// Skip the `α` regime guard.
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub scheme: FourthOrderScheme,
}

impl EstimatorConfig {
    pub const DEFAULT_C1: f64 = 0.6;
    pub const DEFAULT_C2: f64 = 1.0;

    /// Practical constants `C1 = 0.6`, `C2 = 1`.
    pub fn practical(mode: Mode, n: u64, k: usize) -> Self {
        Self {
            mode,
            c1: Self::DEFAULT_C1,
            c2: Self::DEFAULT_C2,
            n,
            k,
            strict_theory: false,
            force: false,
            scheme: FourthOrderScheme::Corrected,
        }
    }

    /// `Δ = C2 ln n`, in counts.
    pub fn delta_count(&self) -> f64 {
        self.c2 * (self.n.max(1) as f64).ln()
    }

    pub fn delta_prob(&self) -> f64 {
        self.delta_count() / self.n.max(1) as f64
    }

    /// `L = max(1, ⌊C1 ln n⌋)`.
    pub fn degree(&self) -> usize {
        ((self.c1 * (self.n.max(1) as f64).ln()).floor() as usize).max(1)
    }

    /// `[0, min(1, 4Δ/n)]`.
    pub fn poly_interval(&self) -> [f64; 2] {
        [0.0, (4.0 * self.delta_prob()).min(1.0)]
    }

    /// Selector counts at or above this go to the plugin branch.
    pub fn threshold(&self) -> f64 {
        2.0 * self.delta_count()
    }

    /// Checks the configuration against `spec`; returns non-fatal warnings.
    pub fn validate(&self, spec: &PhiSpec) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !(self.c1.is_finite() && self.c1 > 0.0 && self.c2.is_finite() && self.c2 > 0.0) {
            return Err(Error::Config(format!("C1 = {}, C2 = {} must be positive", self.c1, self.c2)));
        }
        if self.k == 0 {
            return Err(Error::Config("alphabet size k must be at least 1".into()));
        }
        let alpha = spec.alpha();
        if self.strict_theory {
            let lhs = 6.0 * self.c1 * 2f64.ln() + 4.0 * (self.c1 * self.c2).sqrt() * (1.0 + 2f64.ln());
            if lhs > 3.0 - 2.0 * alpha || self.c2 <= 16.0 * alpha {
                return Err(Error::Config(format!(
                    "strict constants violated: 6C1 ln2 + 4√(C1C2)(1+ln2) = {lhs:.4} must be <= 3-2α = {:.4} and C2 = {} > 16α = {}",
                    3.0 - 2.0 * alpha,
                    self.c2,
                    16.0 * alpha
                )));
            }
        }
        if !self.force {
            let ok = match self.mode {
                Mode::Hybrid4 => alpha > 1.0 && alpha < 1.5,
                Mode::Hybrid2 => alpha > 0.0 && alpha < 1.0,
                _ => true,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "mode {} does not cover α = {alpha}; pass force to override",
                    self.mode
                )));
            }
        }
        if let Some(order) = self.mode.smoothing_order() {
            if spec.max_order() < order {
                return Err(Error::Config(format!(
                    "mode {} needs derivatives up to order {order}, φ provides {}",
                    self.mode,
                    spec.max_order()
                )));
            }
        }
        if self.mode != Mode::Plugin {
            if self.n < 3 {
                return Err(Error::Config(format!("n = {} too small for mode {}", self.n, self.mode)));
            }
            if self.delta_prob() >= 1.0 {
                return Err(Error::Config(format!(
                    "threshold Δ/n = {} must be below 1",
                    self.delta_prob()
                )));
            }
        }
        if self.mode.uses_split() {
            let d = self.delta_count();
            if 2.0 * d.powi(3) * self.degree() as f64 > self.n as f64 {
                warnings.push(format!(
                    "2Δ³L = {:.1} exceeds n = {} (Δ in counts); polynomial-branch variance bound may not hold",
                    2.0 * d.powi(3) * self.degree() as f64,
                    self.n
                ));
            }
        }
        Ok(warnings)
    }
}

/// `N (N-1) ... (N-m+1)`, or `None` on overflow.
pub fn falling_factorial(n: u64, m: u64) -> Option<u128> {
    if m > n {
        return Some(0);
    }
    (0..m).try_fold(1u128, |acc, i| acc.checked_mul((n - i) as u128))
}

fn sample_size(hist: &Histogram) -> Result<f64> {
    match hist.regime() {
        Regime::Multinomial { n: 0 } => Err(Error::InsufficientData("empty sample".into())),
        Regime::Multinomial { n } => Ok(n as f64),
        Regime::Poissonized { .. } => Ok(hist.total().max(1) as f64),
    }
}

/// `Σ φ(N_i / n)`. Poissonized histograms divide by the realized total.
pub fn plugin_estimate(spec: &PhiSpec, hist: &Histogram) -> Result<f64> {
    let n = sample_size(hist)?;
    let mut acc = CompensatedSum::new();
    for &c in hist.counts() {
        acc.add(spec.eval(0, (c as f64 / n).min(1.0))?);
    }
    Ok(acc.value())
}

/// `H(N/n) - N/(2n²) H''(N/n)` on an `L = 4` smoothed `φ`.
pub fn bias_corrected2(s: &SmoothedPhi, count: u64, n: f64) -> f64 {
    let x = count as f64 / n;
    let c = count as f64;
    s.eval(0, x) - c / (2.0 * n * n) * s.eval(2, x)
}

/// Fourth-order corrected plugin on an `L = 6` smoothed `φ`.
pub fn bias_corrected4(s: &SmoothedPhi, count: u64, n: f64, scheme: FourthOrderScheme) -> f64 {
    let x = count as f64 / n;
    let c = count as f64;
    let (n2, n3, n4) = (n * n, n * n * n, n * n * n * n);
    let (h2, h3, h4) = (s.eval(2, x), s.eval(3, x), s.eval(4, x));
    let (c3, c4b) = match scheme {
        FourthOrderScheme::Corrected => (-1.0 / 3.0, -1.0 / 8.0),
        FourthOrderScheme::AsPrinted => (2.0 / 3.0, 3.0 / 8.0),
    };
    s.eval(0, x) - c / (2.0 * n2) * h2 - c3 * c / n3 * h3 - 7.0 * c / (24.0 * n4) * h4 - c4b * c * c / n4 * h4
}

/// Best-polynomial estimator for one `φ`, sample size and interval.
#[derive(Debug, Clone)]
pub struct PolyEstimator {
    poly: Polynomial,
    /// `b_m = a_m hi^m`.
    scaled: Vec<f64>,
    /// `n * hi`.
    scale: f64,
    bounds: [f64; 2],
}

impl PolyEstimator {
    /// `bounds` are the truncation limits `[φ_inf, φ_sup]`.
    pub fn new(poly: Polynomial, n: f64, bounds: [f64; 2]) -> Result<Self> {
        let scaled = poly.scaled_coeffs()?;
        let scale = n * poly.interval[1];
        Ok(Self {
            poly,
            scaled,
            scale,
            bounds,
        })
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    pub fn bounds(&self) -> [f64; 2] {
        self.bounds
    }

    /// `Σ a_m (N)_m / n^m`, evaluated as `Σ b_m Π_{i<m} (N-i)/(n hi)`.
    pub fn pre_clamp(&self, count: u64) -> f64 {
        let c = count as f64;
        let mut acc = CompensatedSum::new();
        let mut term = 1.0;
        for (m, b) in self.scaled.iter().enumerate() {
            if m > 0 {
                term *= (c - (m - 1) as f64) / self.scale;
            }
            if term == 0.0 {
                break;
            }
            acc.add(b * term);
        }
        acc.value()
    }

    pub fn estimate(&self, count: u64) -> f64 {
        self.pre_clamp(count).clamp(self.bounds[0], self.bounds[1])
    }
}

/// Single-symbol best-polynomial estimate clamped to `bounds`.
pub fn best_poly_estimate(poly: &Polynomial, count: u64, n: f64, bounds: [f64; 2]) -> Result<f64> {
    Ok(PolyEstimator::new(poly.clone(), n, bounds)?.estimate(count))
}

/// `[inf φ, sup φ]` over `[0, hi]` on a 10⁴-point grid graded toward 0.
pub fn truncation_bounds(spec: &PhiSpec, hi: f64) -> Result<[f64; 2]> {
    const POINTS: usize = 10_000;
    let mut lo_v = f64::INFINITY;
    let mut hi_v = f64::NEG_INFINITY;
    for j in 0..POINTS {
        let u = j as f64 / (POINTS - 1) as f64;
        let v = spec.eval(0, (hi * u * u).min(1.0))?;
        lo_v = lo_v.min(v);
        hi_v = hi_v.max(v);
    }
    Ok([lo_v, hi_v])
}

/// Symbols routed to each branch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCounts {
    pub plugin: usize,
    pub poly: usize,
}

/// Result of one estimate, with the realized parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub value: f64,
    pub mode: Mode,
    pub n: u64,
    pub k: usize,
    pub delta_count: f64,
    pub degree: usize,
    pub branch_counts: BranchCounts,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
enum Kind {
    Plugin,
    Corrected(SmoothedPhi),
    Split {
        smoothed: Option<SmoothedPhi>,
        poly: PolyEstimator,
    },
}

/// An estimator with its polynomial and smoothing precomputed for fixed
/// `(φ, n, k, mode)`.
#[derive(Debug, Clone)]
pub struct Estimator {
    cfg: EstimatorConfig,
    spec: PhiSpec,
    kind: Kind,
    threshold: f64,
    warnings: Vec<String>,
}

impl Estimator {
    /// Validates `cfg`, canonicalizes `φ` and runs the Remez solve (through
    /// `cache` when given).
    pub fn new(spec: &PhiSpec, cfg: &EstimatorConfig, cache: Option<&PolyCache>) -> Result<Self> {
        let warnings = cfg.validate(spec)?;
        let spec = spec.canonicalized(cfg.k);
        let n = cfg.n as f64;
        let smoothed = match cfg.mode.smoothing_order() {
            Some(order) => Some(SmoothedPhi::new(spec.clone(), order, cfg.delta_prob())?),
            None => None,
        };
        let kind = match cfg.mode {
            Mode::Plugin => Kind::Plugin,
            Mode::Plugin2 | Mode::Plugin4 => Kind::Corrected(smoothed.expect("corrected modes smooth")),
            Mode::Hybrid2 | Mode::Hybrid4 | Mode::PolyOnly => {
                let poly = fit_polynomial(&spec, cfg.degree(), cfg.poly_interval(), cache)?;
                let bounds = truncation_bounds(&spec, cfg.delta_prob())?;
                Kind::Split {
                    smoothed,
                    poly: PolyEstimator::new(poly, n, bounds)?,
                }
            }
        };
        let threshold = if cfg.mode == Mode::PolyOnly {
            f64::INFINITY
        } else {
            cfg.threshold()
        };
        Ok(Self {
            cfg: *cfg,
            spec,
            kind,
            threshold,
            warnings,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    /// The canonicalized `φ` actually estimated.
    pub fn spec(&self) -> &PhiSpec {
        &self.spec
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn poly_estimator(&self) -> Option<&PolyEstimator> {
        match &self.kind {
            Kind::Split { poly, .. } => Some(poly),
            _ => None,
        }
    }

    /// Overrides the branch threshold (selector counts at or above it use
    /// the corrected plugin).
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    fn result(&self, value: f64, branch_counts: BranchCounts) -> EstimateResult {
        EstimateResult {
            value,
            mode: self.cfg.mode,
            n: self.cfg.n,
            k: self.cfg.k,
            delta_count: self.cfg.delta_count(),
            degree: self.cfg.degree(),
            branch_counts,
            warnings: self.warnings.clone(),
        }
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k != self.cfg.k {
            return Err(Error::Config(format!(
                "data has {k} symbols, estimator configured for {}",
                self.cfg.k
            )));
        }
        Ok(())
    }

    fn corrected(&self, s: &SmoothedPhi, count: u64, n: f64) -> f64 {
        if s.order() == 4 {
            bias_corrected2(s, count, n)
        } else {
            bias_corrected4(s, count, n, self.cfg.scheme)
        }
    }

    /// Estimate from a single histogram (plugin-family modes).
    pub fn estimate_histogram(&self, hist: &Histogram) -> Result<EstimateResult> {
        self.check_k(hist.k())?;
        match &self.kind {
            Kind::Plugin => {
                let v = plugin_estimate(&self.spec, hist)?;
                Ok(self.result(v, BranchCounts { plugin: hist.k(), poly: 0 }))
            }
            Kind::Corrected(s) => {
                let n = sample_size(hist)?;
                let mut acc = CompensatedSum::new();
                for &c in hist.counts() {
                    let v = self.corrected(s, c, n);
                    if !v.is_finite() {
                        return Err(Error::Overflow { at: c });
                    }
                    acc.add(v);
                }
                Ok(self.result(acc.value(), BranchCounts { plugin: hist.k(), poly: 0 }))
            }
            Kind::Split { .. } => Err(Error::Config(format!(
                "mode {} needs a split sample",
                self.cfg.mode
            ))),
        }
    }

    /// Estimate from a split sample. Plugin-family modes use the primary half.
    pub fn estimate_split(&self, split: &SplitHistograms) -> Result<EstimateResult> {
        let (smoothed, poly) = match &self.kind {
            Kind::Split { smoothed, poly } => (smoothed, poly),
            _ => return self.estimate_histogram(&split.primary),
        };
        self.check_k(split.primary.k())?;
        self.check_k(split.selector.k())?;
        if split.base_n != self.cfg.n {
            return Err(Error::Config(format!(
                "split base size {} differs from configured n = {}",
                split.base_n, self.cfg.n
            )));
        }
        let n = self.cfg.n as f64;
        let mut acc = CompensatedSum::new();
        let mut branches = BranchCounts::default();
        for (&c, &sel) in split.primary.counts().iter().zip(split.selector.counts()) {
            let v = match smoothed {
                Some(s) if sel as f64 >= self.threshold => {
                    branches.plugin += 1;
                    self.corrected(s, c, n)
                }
                _ => {
                    branches.poly += 1;
                    poly.estimate(c)
                }
            };
            if !v.is_finite() {
                return Err(Error::Overflow { at: c });
            }
            acc.add(v);
        }
        Ok(self.result(acc.value(), branches))
    }
}

fn fit_polynomial(spec: &PhiSpec, degree: usize, interval: [f64; 2], cache: Option<&PolyCache>) -> Result<Polynomial> {
    let id = spec.id();
    if let Some(p) = cache.and_then(|c| c.load(&id, degree, interval)) {
        return Ok(p);
    }
    let poly = remez_best_poly(spec, degree, interval[0], interval[1])?;
    if let Some(c) = cache {
        c.store(&id, &poly)?;
    }
    Ok(poly)
}

/// Estimates `θ` from observed data. `n` and `k` in `cfg` are replaced by
/// the data's; split modes first halve the sample with coins seeded by
/// `seed`.
pub fn estimate(spec: &PhiSpec, hist: &Histogram, cfg: &EstimatorConfig, seed: u64) -> Result<EstimateResult> {
    let mut cfg = *cfg;
    cfg.k = hist.k();
    let cache = PolyCache::from_env();
    if cfg.mode.uses_split() {
        let split = split_observed(hist, &mut trial_rng(seed, 0))?;
        cfg.n = split.base_n;
        Estimator::new(spec, &cfg, cache.as_ref())?.estimate_split(&split)
    } else {
        cfg.n = sample_size(hist)? as u64;
        Estimator::new(spec, &cfg, cache.as_ref())?.estimate_histogram(hist)
    }
}
