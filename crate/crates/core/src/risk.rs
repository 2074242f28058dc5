//! Monte Carlo risk, exact Poisson/binomial expectations, rate fitting and
//! the two-point lower bound.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Estimator, EstimatorConfig, FourthOrderScheme, Mode};
use crate::numeric::{ln_gamma, ols, splitmix64, CompensatedSum};
use crate::phi::{theta_true, PhiSpec, ProbabilityVector};
use crate::poly::PolyCache;
use crate::sampling::{distribution_zoo, poissonize_and_split, sample_multinomial, trial_rng, Preset, SplitMethod};

/// Default tail tolerance for exact expectations.
pub const TAIL_TOL: f64 = 1e-14;

/// Truncated, normalized probability weights `w_j` for `j = start..start+len`.
#[derive(Debug, Clone)]
pub struct Weights {
    pub start: u64,
    pub w: Vec<f64>,
}

impl Weights {
    fn from_log_pmf<F: Fn(u64) -> f64>(mode: u64, max: Option<u64>, ratio_up: impl Fn(u64) -> f64, log_pmf: F, tol: f64) -> Self {
        // Build outward from the mode with the pmf ratio recurrence; stop
        // when a geometric bound on the remaining tail falls below tol.
        let cut = tol * 1e-4;
        let w_mode = log_pmf(mode).exp();
        let mut right = vec![w_mode];
        let mut j = mode;
        let mut w = w_mode;
        while max.is_none_or(|m| j < m) {
            let r = ratio_up(j);
            w *= r;
            j += 1;
            right.push(w);
            if r < 1.0 && w * r / (1.0 - r) < cut {
                break;
            }
        }
        let mut left = Vec::new();
        let mut j = mode;
        let mut w = w_mode;
        while j > 0 {
            let r = ratio_up(j - 1);
            if r <= 0.0 {
                break;
            }
            w /= r;
            j -= 1;
            left.push(w);
            let back = 1.0 / ratio_up(j.saturating_sub(1)).max(f64::MIN_POSITIVE);
            if j > 0 && back < 1.0 && w * back / (1.0 - back) < cut {
                break;
            }
        }
        let start = mode - left.len() as u64;
        left.reverse();
        left.extend(right);
        let total: f64 = left.iter().copied().collect::<CompensatedSum>().value();
        left.iter_mut().for_each(|v| *v /= total);
        Self { start, w: left }
    }

    /// `Poi(lambda)` weights.
    pub fn poisson(lambda: f64, tol: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Domain(format!("Poisson mean {lambda}")));
        }
        if lambda == 0.0 {
            return Ok(Self { start: 0, w: vec![1.0] });
        }
        let mode = lambda.floor() as u64;
        Ok(Self::from_log_pmf(
            mode,
            None,
            |j| lambda / (j + 1) as f64,
            |j| -lambda + j as f64 * lambda.ln() - ln_gamma(j as f64 + 1.0),
            tol,
        ))
    }

    /// `Bin(n, p)` weights.
    pub fn binomial(n: u64, p: f64, tol: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("binomial probability {p}")));
        }
        if p == 0.0 || n == 0 {
            return Ok(Self { start: 0, w: vec![1.0] });
        }
        if p == 1.0 {
            return Ok(Self { start: n, w: vec![1.0] });
        }
        let mode = (((n + 1) as f64 * p).floor() as u64).min(n);
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        let nf = n as f64;
        Ok(Self::from_log_pmf(
            mode,
            Some(n),
            |j| (nf - j as f64) / (j + 1) as f64 * p / (1.0 - p),
            |j| {
                ln_gamma(nf + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma(nf - j as f64 + 1.0)
                    + j as f64 * lp
                    + (nf - j as f64) * lq
            },
            tol,
        ))
    }

    /// `Σ w_j (f(j) - center)`.
    pub fn expect_centered<F: Fn(u64) -> f64>(&self, f: F, center: f64) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for (i, w) in self.w.iter().enumerate() {
            let j = self.start + i as u64;
            let v = f(j);
            if !v.is_finite() {
                return Err(Error::Overflow { at: j });
            }
            acc.add(w * (v - center));
        }
        Ok(acc.value())
    }

    /// `(E f, Var f)`.
    pub fn mean_var<F: Fn(u64) -> f64>(&self, f: F) -> Result<(f64, f64)> {
        let mean = self.expect_centered(&f, 0.0)?;
        let mut acc = CompensatedSum::new();
        for (i, w) in self.w.iter().enumerate() {
            let d = f(self.start + i as u64) - mean;
            acc.add(w * d * d);
        }
        Ok((mean, acc.value()))
    }
}

/// `E f(Ñ)` for `Ñ ~ Poi(lambda)`.
pub fn poisson_expectation<F: Fn(u64) -> f64>(f: F, lambda: f64, tail_tol: f64) -> Result<f64> {
    Weights::poisson(lambda, tail_tol)?.expect_centered(f, 0.0)
}

/// `E f(Ñ) - target`, summed as `Σ w_j (f(j) - target)` to limit
/// cancellation.
pub fn exact_bias_oracle<F: Fn(u64) -> f64>(f: F, lambda: f64, target: f64, tail_tol: f64) -> Result<f64> {
    Weights::poisson(lambda, tail_tol)?.expect_centered(f, target)
}

/// `(E f, Var f)` under `Poi(lambda)`.
pub fn poisson_mean_var<F: Fn(u64) -> f64>(f: F, lambda: f64, tail_tol: f64) -> Result<(f64, f64)> {
    Weights::poisson(lambda, tail_tol)?.mean_var(f)
}

/// `E f(N)` for `N ~ Bin(n, p)`.
pub fn binomial_expectation<F: Fn(u64) -> f64>(f: F, n: u64, p: f64, tail_tol: f64) -> Result<f64> {
    Weights::binomial(n, p, tail_tol)?.expect_centered(f, 0.0)
}

/// Monte Carlo summary of one `(n, k, distribution, mode)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub trials: usize,
    pub theta: f64,
    pub mean: f64,
    pub bias: f64,
    /// Population variance `(1/T) Σ (x - mean)²`, so `mse = bias² + var`.
    pub var: f64,
    pub mse: f64,
    /// Standard error of the mean estimate.
    pub stderr: f64,
    /// Per-trial errors `estimate - θ`, in trial order.
    #[serde(skip)]
    pub errors: Vec<f64>,
}

impl CellStats {
    pub fn from_estimates(theta: f64, xs: &[f64]) -> Self {
        let t = xs.len() as f64;
        let mean = xs.iter().copied().collect::<CompensatedSum>().value() / t;
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<CompensatedSum>().value();
        let var = ss / t;
        let bias = mean - theta;
        let errors: Vec<f64> = xs.iter().map(|x| x - theta).collect();
        let mse = errors.iter().map(|e| e * e).collect::<CompensatedSum>().value() / t;
        let stderr = if xs.len() > 1 { (ss / (t - 1.0) / t).sqrt() } else { f64::NAN };
        Self {
            trials: xs.len(),
            theta,
            mean,
            bias,
            var,
            mse,
            stderr,
            errors,
        }
    }
}

/// Runs `trials` independent sample-then-estimate rounds. Trial `t` uses
/// `trial_rng(seed, t)`, so results do not depend on thread count.
pub fn monte_carlo_risk(
    spec: &PhiSpec,
    p: &ProbabilityVector,
    cfg: &EstimatorConfig,
    trials: usize,
    seed: u64,
    cache: Option<&PolyCache>,
) -> Result<CellStats> {
    if trials < 2 {
        return Err(Error::Config(format!("need at least 2 trials, got {trials}")));
    }
    if p.k() != cfg.k {
        return Err(Error::Config(format!("distribution has k = {}, config k = {}", p.k(), cfg.k)));
    }
    let est = Estimator::new(spec, cfg, cache)?;
    let values: Vec<Result<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            if cfg.mode.uses_split() {
                let split = poissonize_and_split(p, cfg.n, SplitMethod::PerSymbol, &mut rng)?;
                Ok(est.estimate_split(&split)?.value)
            } else {
                let hist = sample_multinomial(p, cfg.n, &mut rng);
                Ok(est.estimate_histogram(&hist)?.value)
            }
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(CellStats::from_estimates(theta_true(spec, p), &values))
}

/// Estimator settings shared by every cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSettings {
    pub c1: f64,
    pub c2: f64,
    #[serde(default)]
    pub strict_theory: bool,
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub scheme: FourthOrderScheme,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            c1: EstimatorConfig::DEFAULT_C1,
            c2: EstimatorConfig::DEFAULT_C2,
            strict_theory: false,
            force: false,
            scheme: FourthOrderScheme::Corrected,
        }
    }
}

impl EstimatorSettings {
    pub fn config(&self, mode: Mode, n: u64, k: usize) -> EstimatorConfig {
        EstimatorConfig {
            mode,
            c1: self.c1,
            c2: self.c2,
            n,
            k,
            strict_theory: self.strict_theory,
            force: self.force,
            scheme: self.scheme,
        }
    }
}

/// A sweep over `modes × dists × ks × ns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub ns: Vec<u64>,
    pub ks: Vec<usize>,
    pub dists: Vec<Preset>,
    pub modes: Vec<Mode>,
    pub trials: usize,
    pub seed: u64,
    pub settings: EstimatorSettings,
}

/// One cell of a [`RiskReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: u64,
    pub k: usize,
    pub dist: Preset,
    pub mode: Mode,
    pub seed: u64,
    pub stats: Option<CellStats>,
    pub failure: Option<String>,
    /// `n ln k / k^(1/α)`.
    pub sample_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub spec_id: String,
    pub master_seed: u64,
    /// Effective configuration, embedded in the CSV header.
    pub config: String,
    pub cells: Vec<CellResult>,
    /// Not written to the CSV, which must be reproducible.
    pub wall_clock_s: f64,
}

impl Sweep {
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ks.is_empty() || self.dists.is_empty() || self.modes.is_empty() {
            return Err(Error::Config("n, k, distribution and mode grids must be non-empty".into()));
        }
        if self.trials < 2 {
            return Err(Error::Config(format!("need at least 2 trials, got {}", self.trials)));
        }
        Ok(())
    }

    /// Runs every cell; cell failures are recorded, not propagated.
    pub fn run(&self, spec: &PhiSpec, config_echo: &str, cache: Option<&PolyCache>) -> Result<RiskReport> {
        self.validate()?;
        let started = Instant::now();
        let mut cells = Vec::new();
        let mut index = 0u64;
        for &mode in &self.modes {
            for &dist in &self.dists {
                for &k in &self.ks {
                    for &n in &self.ns {
                        let seed = splitmix64(self.seed ^ splitmix64(index));
                        index += 1;
                        let outcome = distribution_zoo(dist, k).and_then(|p| {
                            let cfg = self.settings.config(mode, n, k);
                            monte_carlo_risk(spec, &p, &cfg, self.trials, seed, cache)
                        });
                        let (stats, failure) = match outcome {
                            Ok(s) => (Some(s), None),
                            Err(e) => (None, Some(e.to_string())),
                        };
                        cells.push(CellResult {
                            n,
                            k,
                            dist,
                            mode,
                            seed,
                            stats,
                            failure,
                            sample_ratio: n as f64 * (k as f64).ln() / (k as f64).powf(1.0 / spec.alpha()),
                        });
                    }
                }
            }
        }
        Ok(RiskReport {
            spec_id: spec.id(),
            master_seed: self.seed,
            config: config_echo.to_string(),
            cells,
            wall_clock_s: started.elapsed().as_secs_f64(),
        })
    }
}

/// Which grid coordinate a rate is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N,
    K,
}

/// A fitted log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 2.5% and 97.5% bootstrap quantiles of the slope.
    pub band: [f64; 2],
    pub points: usize,
    pub warnings: Vec<String>,
}

/// Bootstrap resamples behind [`RateFit::band`].
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// OLS of `ln y` on `ln x'`, where `x' = x ln x` when `deflate` is set.
/// Points with nonpositive `y` are dropped with a warning.
pub fn rate_fit(xs: &[f64], ys: &[f64], deflate: bool, seed: u64) -> Result<RateFit> {
    let mut warnings = Vec::new();
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&x, &y) in xs.iter().zip(ys) {
        if !(y > 0.0 && y.is_finite()) {
            warnings.push(format!("excluded x = {x} with value {y}"));
            continue;
        }
        let xe = if deflate { x * x.ln() } else { x };
        lx.push(xe.ln());
        ly.push(y.ln());
    }
    if lx.len() < 4 {
        return Err(Error::InsufficientData(format!("rate fit needs 4 usable points, got {}", lx.len())));
    }
    let (slope, intercept) = ols(&lx, &ly);
    let mut rng = trial_rng(seed, 0);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    while slopes.len() < BOOTSTRAP_RESAMPLES {
        let idx: Vec<usize> = (0..lx.len()).map(|_| rng.random_range(0..lx.len())).collect();
        let bx: Vec<f64> = idx.iter().map(|&i| lx[i]).collect();
        if bx.iter().all(|&v| v == bx[0]) {
            continue;
        }
        let by: Vec<f64> = idx.iter().map(|&i| ly[i]).collect();
        slopes.push(ols(&bx, &by).0);
    }
    slopes.sort_by(f64::total_cmp);
    let q = |f: f64| slopes[((f * (slopes.len() - 1) as f64).round()) as usize];
    Ok(RateFit {
        slope,
        intercept,
        band: [q(0.025), q(0.975)],
        points: lx.len(),
        warnings,
    })
}

/// A fitted series of cells sharing all coordinates but one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub mode: Mode,
    pub dist: Preset,
    /// The fixed coordinate (`k` when fitting against `n`, and vice versa).
    pub fixed: u64,
    pub axis: Axis,
    pub fit: RateFit,
}

impl RiskReport {
    /// Fits MSE against `axis` for every series with at least 4 cells.
    pub fn fits(&self, axis: Axis, deflate: bool) -> Vec<SeriesFit> {
        let mut keys: Vec<(Mode, Preset, u64)> = Vec::new();
        for c in &self.cells {
            let fixed = match axis {
                Axis::N => c.k as u64,
                Axis::K => c.n,
            };
            if !keys.contains(&(c.mode, c.dist, fixed)) {
                keys.push((c.mode, c.dist, fixed));
            }
        }
        keys.into_iter()
            .filter_map(|(mode, dist, fixed)| {
                let (xs, ys): (Vec<f64>, Vec<f64>) = self
                    .cells
                    .iter()
                    .filter(|c| c.mode == mode && c.dist == dist)
                    .filter(|c| match axis {
                        Axis::N => c.k as u64 == fixed,
                        Axis::K => c.n == fixed,
                    })
                    .filter_map(|c| {
                        let x = match axis {
                            Axis::N => c.n as f64,
                            Axis::K => c.k as f64,
                        };
                        c.stats.as_ref().map(|s| (x, s.mse))
                    })
                    .unzip();
                let fit = rate_fit(&xs, &ys, deflate, self.master_seed).ok()?;
                Some(SeriesFit {
                    mode,
                    dist,
                    fixed,
                    axis,
                    fit,
                })
            })
            .collect()
    }

    pub fn all_failed(&self) -> bool {
        self.cells.iter().all(|c| c.stats.is_none())
    }

    /// One row per cell: `n,k,dist,mode,trials,bias,var,mse,stderr,seed`.
    /// Failed cells have empty statistics.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# config: {}\n", self.config);
        out.push_str("n,k,dist,mode,trials,bias,var,mse,stderr,seed\n");
        for c in &self.cells {
            match &c.stats {
                Some(s) => out.push_str(&format!(
                    "{},{},{},{},{},{:e},{:e},{:e},{:e},{}\n",
                    c.n, c.k, c.dist, c.mode, s.trials, s.bias, s.var, s.mse, s.stderr, c.seed
                )),
                None => out.push_str(&format!("{},{},{},{},0,,,,,{}\n", c.n, c.k, c.dist, c.mode, c.seed)),
            }
        }
        out
    }

    /// JSON summary with per-cell statistics and MSE-vs-`n` fits.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            spec_id: &'a str,
            master_seed: u64,
            config: &'a str,
            cells: &'a [CellResult],
            fits_vs_n: Vec<SeriesFit>,
            fits_vs_k: Vec<SeriesFit>,
        }
        Ok(serde_json::to_string_pretty(&Summary {
            spec_id: &self.spec_id,
            master_seed: self.master_seed,
            config: &self.config,
            cells: &self.cells,
            fits_vs_n: self.fits(Axis::N, false),
            fits_vs_k: self.fits(Axis::K, false),
        })?)
    }

    /// Whitespace-separated `n k mse` columns for plotting.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("# mode dist n k mse stderr\n");
        for c in &self.cells {
            if let Some(s) = &c.stats {
                out.push_str(&format!("{} {} {} {} {:e} {:e}\n", c.mode, c.dist, c.n, c.k, s.mse, s.stderr));
            }
        }
        out
    }
}

/// Two-point lower-bound diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeCam {
    pub delta_theta: f64,
    pub kl: f64,
    /// `χ²(P, Q) / 2`, an upper bound on `kl`.
    pub chi2_half: f64,
    /// `(Δθ)²/4 · exp(-n KL)`.
    pub bound: f64,
}

/// Compares `P = (1-p, p/(k-1), ...)` with the same shape at `q`.
pub fn lecam_two_point(spec: &PhiSpec, n: u64, k: usize, p: f64, q: f64) -> Result<LeCam> {
    if k < 3 {
        return Err(Error::Domain(format!("two-point construction needs k >= 3, got {k}")));
    }
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("p = {p}, q = {q} must lie in (0, 1)")));
    }
    let km1 = (k - 1) as f64;
    let theta = |x: f64| -> Result<f64> { Ok(spec.eval(0, 1.0 - x)? + km1 * spec.eval(0, x / km1)?) };
    let delta_theta = (theta(p)? - theta(q)?).abs();
    let kl = (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln() + p * (p / q).ln();
    let chi2_half = 0.5 * (p - q).powi(2) / (q * (1.0 - q));
    let bound = 0.25 * delta_theta * delta_theta * (-(n as f64) * kl).exp();
    Ok(LeCam {
        delta_theta,
        kl,
        chi2_half,
        bound,
    })
}

/// The two distributions used by [`lecam_two_point`].
pub fn two_point_pair(k: usize, p: f64, q: f64) -> Result<(ProbabilityVector, ProbabilityVector)> {
    Ok((
        distribution_zoo(Preset::TwoPoint { p }, k)?,
        distribution_zoo(Preset::TwoPoint { p: q }, k)?,
    ))
}
