//! Best uniform polynomial approximation and moduli of smoothness.

mod moduli;
mod remez;

pub use moduli::{omega1, omega2};
pub use remez::{jackson_rate_probe, remez_best_poly, remez_fn, JacksonReport, JacksonRow, RemezOptions};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point of an equioscillation certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternationPoint {
    pub x: f64,
    pub error: f64,
}

/// A polynomial on `[lo, hi]` in the monomial basis.
///
/// When produced by the Remez solver it also carries its Chebyshev
/// coefficients (in `s = (2x - lo - hi) / (hi - lo)`), which are used for
/// evaluation because the monomial form is badly conditioned at high degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub degree: usize,
    pub interval: [f64; 2],
    pub coeffs: Vec<f64>,
    pub sup_error: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chebyshev: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificate: Vec<AlternationPoint>,
}

impl Polynomial {
    /// Monomial-basis polynomial without approximation metadata.
    pub fn from_coeffs(coeffs: Vec<f64>, interval: [f64; 2]) -> Self {
        assert!(!coeffs.is_empty());
        Self {
            degree: coeffs.len() - 1,
            interval,
            coeffs,
            sup_error: 0.0,
            chebyshev: Vec::new(),
            certificate: Vec::new(),
        }
    }

    pub(crate) fn from_chebyshev(
        cheb: Vec<f64>,
        interval: [f64; 2],
        sup_error: f64,
        certificate: Vec<AlternationPoint>,
    ) -> Self {
        let coeffs = chebyshev_to_monomial(&cheb, interval);
        Self {
            degree: cheb.len() - 1,
            interval,
            coeffs,
            sup_error,
            chebyshev: cheb,
            certificate,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.chebyshev.is_empty() {
            self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
        } else {
            let [lo, hi] = self.interval;
            clenshaw(&self.chebyshev, (2.0 * x - lo - hi) / (hi - lo))
        }
    }

    /// Coefficients `b_m` of the same polynomial in `t = x / hi`, i.e.
    /// `b_m = a_m hi^m`. Requires the interval to start at 0.
    pub fn scaled_coeffs(&self) -> Result<Vec<f64>> {
        let [lo, hi] = self.interval;
        if lo != 0.0 {
            return Err(Error::Domain(format!(
                "scaled coefficients need an interval starting at 0, got [{lo}, {hi}]"
            )));
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, a)| a * hi.powi(m as i32))
            .collect())
    }

    /// Whether the certificate signs strictly alternate.
    pub fn certificate_alternates(&self) -> bool {
        self.certificate
            .windows(2)
            .all(|w| w[0].error * w[1].error < 0.0 && w[0].x < w[1].x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        if p.coeffs.is_empty() || p.degree + 1 != p.coeffs.len() {
            return Err(Error::Parse {
                line: 1,
                msg: format!("degree {} inconsistent with {} coefficients", p.degree, p.coeffs.len()),
            });
        }
        if !p.chebyshev.is_empty() && p.chebyshev.len() != p.coeffs.len() {
            return Err(Error::Parse {
                line: 1,
                msg: "chebyshev and monomial coefficient counts differ".into(),
            });
        }
        let [lo, hi] = p.interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || p.sup_error.is_nan() || p.sup_error < 0.0 {
            return Err(Error::Parse {
                line: 1,
                msg: "invalid interval or sup_error".into(),
            });
        }
        Ok(p)
    }
}

/// Evaluates `Σ c_j T_j(s)`.
pub(crate) fn clenshaw(c: &[f64], s: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &cj in c.iter().skip(1).rev() {
        let b0 = 2.0 * s * b1 - b2 + cj;
        b2 = b1;
        b1 = b0;
    }
    s * b1 - b2 + c[0]
}

/// Converts a Chebyshev series on `[lo, hi]` to monomial coefficients in `x`.
fn chebyshev_to_monomial(cheb: &[f64], [lo, hi]: [f64; 2]) -> Vec<f64> {
    let n = cheb.len();
    // Monomial coefficients in t = (x - lo) / (hi - lo), with s = 2t - 1.
    let mut in_t = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    prev[0] = 1.0;
    in_t[0] += cheb[0];
    if n > 1 {
        cur[0] = -1.0;
        cur[1] = 2.0;
        for (acc, c) in in_t.iter_mut().zip(&cur) {
            *acc += cheb[1] * c;
        }
    }
    for &cj in cheb.iter().skip(2) {
        let mut next = vec![0.0; n];
        for m in 0..n {
            let mut v = -2.0 * cur[m] - prev[m];
            if m > 0 {
                v += 4.0 * cur[m - 1];
            }
            next[m] = v;
        }
        for (acc, c) in in_t.iter_mut().zip(&next) {
            *acc += cj * c;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    // Compose with t = (x - lo) / w.
    let w = hi - lo;
    if lo == 0.0 {
        return in_t
            .iter()
            .enumerate()
            .map(|(m, b)| b / w.powi(m as i32))
            .collect();
    }
    let mut out = vec![0.0; n];
    for (m, b) in in_t.iter().enumerate() {
        let scale = b / w.powi(m as i32);
        for (j, o) in out.iter_mut().enumerate().take(m + 1) {
            let binom = crate::numeric::binomial(m as u64, j as u64);
            *o += scale * binom * (-lo).powi((m - j) as i32);
        }
    }
    out
}

/// On-disk cache of Remez results keyed by `(spec id, degree, interval)`.
#[derive(Debug, Clone)]
pub struct PolyCache {
    dir: PathBuf,
}

impl PolyCache {
    pub const ENV_VAR: &'static str = "ADDFUNC_CACHE_DIR";

    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache rooted at `$ADDFUNC_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(Self::ENV_VAR).map(Self::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(spec_id: &str, degree: usize, interval: [f64; 2]) -> String {
        let raw = format!("{spec_id}_L{degree}_{:?}_{:?}", interval[0], interval[1]);
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect()
    }

    fn path(&self, spec_id: &str, degree: usize, interval: [f64; 2]) -> PathBuf {
        self.dir.join(format!("{}.json", Self::key(spec_id, degree, interval)))
    }

    pub fn load(&self, spec_id: &str, degree: usize, interval: [f64; 2]) -> Option<Polynomial> {
        let text = std::fs::read_to_string(self.path(spec_id, degree, interval)).ok()?;
        Polynomial::from_json(&text).ok()
    }

    pub fn store(&self, spec_id: &str, poly: &Polynomial) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path(spec_id, poly.degree, poly.interval);
        crate::io::write_atomic(&path, poly.to_json()?.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_conversion_matches_clenshaw() {
        let cheb = vec![0.3, -1.2, 0.7, 0.05, -0.4];
        for interval in [[0.0, 1.0], [0.0, 0.01], [0.2, 0.9]] {
            let p = Polynomial::from_chebyshev(cheb.clone(), interval, 0.0, Vec::new());
            let mono = Polynomial::from_coeffs(p.coeffs.clone(), interval);
            for i in 0..=20 {
                let x = interval[0] + (interval[1] - interval[0]) * i as f64 / 20.0;
                let (a, b) = (p.eval(x), mono.eval(x));
                assert!((a - b).abs() < 1e-10, "{interval:?} {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn json_rejects_inconsistent_degree() {
        let bad = r#"{"degree":3,"interval":[0,1],"coeffs":[1,2],"sup_error":0}"#;
        assert!(Polynomial::from_json(bad).is_err());
        let good = r#"{"degree":1,"interval":[0,1],"coeffs":[-0.125,1],"sup_error":0.125}"#;
        let p = Polynomial::from_json(good).unwrap();
        assert_eq!(p.eval(0.5), 0.375);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = PolyCache::new(dir.path());
        let p = Polynomial::from_chebyshev(vec![0.1, 0.2, 0.3], [0.0, 0.25], 1e-3, Vec::new());
        cache.store("power(1.2)", &p).unwrap();
        assert_eq!(cache.load("power(1.2)", 2, [0.0, 0.25]).unwrap(), p);
        assert!(cache.load("power(1.2)", 3, [0.0, 0.25]).is_none());
    }
}
