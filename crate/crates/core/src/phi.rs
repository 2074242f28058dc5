//! Function families `φ` with exact derivatives and divergence-speed metadata.
//!
//! A [`PhiSpec`] bundles a function on `[0, 1]`, closed-form derivatives up to
//! order six, and the declared constants `(α, W_ℓ, c_ℓ, c'_ℓ)` of the sandwich
//!
//! ```text
//! W_ℓ p^(α-ℓ) - c'_ℓ  <=  |φ^(ℓ)(p)|  <=  W_ℓ p^(α-ℓ) + c_ℓ,   p in (0, 1).
//! ```
//!
//! Constants are declared, never inferred; [`verify_divergence_speed`] checks
//! them on a grid.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, factorial, CompensatedSum};

/// Highest derivative order any built-in family exposes.
pub const MAX_ORDER: usize = 6;

/// Serializable description of a built-in family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiKind {
    /// `φ(p) = p^α`.
    Power { alpha: f64 },
    /// `φ(p) = -p ln p` with `φ(0) = 0`.
    NegPLogP,
    /// `φ(p) = Σ c_m p^m`; `alpha` is the declared divergence exponent.
    Polynomial {
        coeffs: Vec<f64>,
        #[serde(default = "default_poly_alpha")]
        alpha: f64,
    },
}

fn default_poly_alpha() -> f64 {
    2.0
}

/// Per-order constants of the divergence-speed sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceConstants {
    pub w: f64,
    pub c_upper: f64,
    pub c_lower: f64,
}

type Evaluator = dyn Fn(usize, f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Body {
    Builtin(PhiKind),
    Custom { name: String, eval: Arc<Evaluator> },
}

/// Affine term `slope * (p - 1/k)` added to `φ`; leaves `θ(P; φ)` unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Shift {
    slope: f64,
    k: usize,
}

/// A function class `φ` together with its divergence-speed declaration.
#[derive(Clone)]
pub struct PhiSpec {
    body: Body,
    alpha: f64,
    constants: Vec<DivergenceConstants>,
    max_order: usize,
    shift: Option<Shift>,
}

impl fmt::Debug for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiSpec")
            .field("id", &self.id())
            .field("alpha", &self.alpha)
            .field("max_order", &self.max_order)
            .finish()
    }
}

impl PhiSpec {
    /// `p^α` for `α > 0`.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!("power exponent must be positive, got {alpha}")));
        }
        let constants = (0..=MAX_ORDER)
            .map(|l| DivergenceConstants {
                w: falling_real(alpha, l).abs(),
                c_upper: 0.0,
                c_lower: 0.0,
            })
            .collect();
        Ok(Self {
            body: Body::Builtin(PhiKind::Power { alpha }),
            alpha,
            constants,
            max_order: MAX_ORDER,
            shift: None,
        })
    }

    /// `-p ln p`, declared with `α = 1`.
    ///
    /// For `ℓ >= 2` the sandwich is exact: `|φ^(ℓ)(p)| = (ℓ-2)! p^(1-ℓ)`.
    /// Order one grows like `|ln p|`, so its upper constant only covers
    /// `p >= 1e-7`.
    pub fn neg_p_log_p() -> Self {
        let mut constants = vec![
            DivergenceConstants {
                w: 1.0,
                c_upper: (-1.0f64).exp(),
                c_lower: 1.0,
            },
            DivergenceConstants {
                w: 1.0,
                c_upper: 15.2,
                c_lower: 1.0,
            },
        ];
        for l in 2..=MAX_ORDER {
            constants.push(DivergenceConstants {
                w: factorial(l as u64 - 2),
                c_upper: 0.0,
                c_lower: 0.0,
            });
        }
        Self {
            body: Body::Builtin(PhiKind::NegPLogP),
            alpha: 1.0,
            constants,
            max_order: MAX_ORDER,
            shift: None,
        }
    }

    /// Polynomial `Σ coeffs[m] p^m`. Divergence constants are declared for
    /// orders 0..=2 only (bounded second derivative).
    pub fn polynomial(coeffs: Vec<f64>, alpha: f64) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("polynomial needs finite coefficients".into()));
        }
        let constants = (0..=2)
            .map(|l| {
                let bound: f64 = coeffs
                    .iter()
                    .enumerate()
                    .skip(l)
                    .map(|(m, c)| c.abs() * falling_real(m as f64, l))
                    .sum();
                DivergenceConstants {
                    w: 1.0,
                    c_upper: bound + 1.0,
                    c_lower: 1.0,
                }
            })
            .collect();
        Ok(Self {
            body: Body::Builtin(PhiKind::Polynomial { coeffs, alpha }),
            alpha,
            constants,
            max_order: MAX_ORDER,
            shift: None,
        })
    }

    /// A user-supplied evaluator `(order, p) -> φ^(order)(p)` with declared
    /// constants (index = derivative order).
    pub fn custom<F>(
        name: impl Into<String>,
        alpha: f64,
        max_order: usize,
        constants: Vec<DivergenceConstants>,
        eval: F,
    ) -> Result<Self>
    where
        F: Fn(usize, f64) -> f64 + Send + Sync + 'static,
    {
        if max_order > MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                order: max_order,
                max: MAX_ORDER,
            });
        }
        Ok(Self {
            body: Body::Custom {
                name: name.into(),
                eval: Arc::new(eval),
            },
            alpha,
            constants,
            max_order,
            shift: None,
        })
    }

    pub fn from_kind(kind: &PhiKind) -> Result<Self> {
        match kind {
            PhiKind::Power { alpha } => Self::power(*alpha),
            PhiKind::NegPLogP => Ok(Self::neg_p_log_p()),
            PhiKind::Polynomial { coeffs, alpha } => Self::polynomial(coeffs.clone(), *alpha),
        }
    }

    /// The built-in description, if this is not a custom evaluator.
    pub fn kind(&self) -> Option<&PhiKind> {
        match &self.body {
            Body::Builtin(k) => Some(k),
            Body::Custom { .. } => None,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Declared sandwich constants for `order`, if any.
    pub fn constants(&self, order: usize) -> Option<DivergenceConstants> {
        self.constants.get(order).copied()
    }

    /// `φ(p) + slope * (p - 1/k)`. Divergence constants for orders 0 and 1
    /// are not adjusted.
    pub fn shifted(&self, slope: f64, k: usize) -> Self {
        let mut out = self.clone();
        let prev = out.shift.map_or(0.0, |s| {
            assert_eq!(s.k, k, "shifts must share the alphabet size");
            s.slope
        });
        out.shift = Some(Shift {
            slope: prev + slope,
            k,
        });
        out
    }

    /// Subtracts `φ'(0) (p - 1/k)` when `φ'(0)` is finite, so that the
    /// result has zero slope at the origin. Returns `self` unchanged when
    /// the first derivative diverges at 0.
    pub fn canonicalized(&self, k: usize) -> Self {
        match self.eval(1, 0.0) {
            Ok(d) if d.is_finite() && d != 0.0 => self.shifted(-d, k),
            _ => self.clone(),
        }
    }

    /// Stable identifier used for cache keys and reports.
    pub fn id(&self) -> String {
        let base = match &self.body {
            Body::Builtin(PhiKind::Power { alpha }) => format!("power({alpha:?})"),
            Body::Builtin(PhiKind::NegPLogP) => "neg_p_log_p".to_string(),
            Body::Builtin(PhiKind::Polynomial { coeffs, .. }) => {
                let parts: Vec<String> = coeffs.iter().map(|c| format!("{c:?}")).collect();
                format!("poly({})", parts.join(","))
            }
            Body::Custom { name, .. } => format!("custom({name})"),
        };
        match self.shift {
            Some(s) => format!("{base}+shift({:?},{})", s.slope, s.k),
            None => base,
        }
    }

    /// `φ^(order)(p)`.
    pub fn eval(&self, order: usize, p: f64) -> Result<f64> {
        if order > self.max_order {
            return Err(Error::UnsupportedOrder {
                order,
                max: self.max_order,
            });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("p = {p} outside [0, 1]")));
        }
        let base = match &self.body {
            Body::Builtin(kind) => eval_builtin(kind, order, p)?,
            Body::Custom { eval, .. } => {
                let v = eval(order, p);
                if !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "derivative of order {order} not finite at p = {p}"
                    )));
                }
                v
            }
        };
        Ok(match (self.shift, order) {
            (Some(s), 0) => base + s.slope * (p - 1.0 / s.k as f64),
            (Some(s), 1) => base + s.slope,
            _ => base,
        })
    }

    /// `φ(p)` for `p` in `[0, 1]`; panics outside the domain.
    pub fn value(&self, p: f64) -> f64 {
        self.eval(0, p).expect("φ must be finite on [0, 1]")
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value(0.0)
    }
}

/// `x (x-1) ... (x-l+1)` for real `x`.
fn falling_real(x: f64, l: usize) -> f64 {
    (0..l).map(|i| x - i as f64).product()
}

fn eval_builtin(kind: &PhiKind, order: usize, p: f64) -> Result<f64> {
    match kind {
        PhiKind::Power { alpha } => {
            let coef = falling_real(*alpha, order);
            if coef == 0.0 {
                return Ok(0.0);
            }
            let expo = alpha - order as f64;
            if p == 0.0 {
                return if expo > 0.0 {
                    Ok(0.0)
                } else if expo == 0.0 {
                    Ok(coef)
                } else {
                    Err(Error::Domain(format!(
                        "derivative {order} of p^{alpha} diverges at 0"
                    )))
                };
            }
            Ok(coef * p.powf(expo))
        }
        PhiKind::NegPLogP => match order {
            0 if p == 0.0 => Ok(0.0),
            0 => Ok(-p * p.ln()),
            _ if p == 0.0 => Err(Error::Domain(format!(
                "derivative {order} of -p ln p diverges at 0"
            ))),
            1 => Ok(-p.ln() - 1.0),
            l => {
                let sign = if l % 2 == 0 { -1.0 } else { 1.0 };
                Ok(sign * factorial(l as u64 - 2) / p.powi(l as i32 - 1))
            }
        },
        PhiKind::Polynomial { coeffs, .. } => {
            let mut acc = 0.0;
            for (m, c) in coeffs.iter().enumerate().skip(order).rev() {
                acc = acc * p + c * falling_real(m as f64, order);
            }
            Ok(acc)
        }
    }
}

/// A probability vector `P = (p_1, ..., p_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("entry {i} = {v}")));
        }
        let total = compensated_sum(p.iter().copied());
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(Self(p))
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let total = compensated_sum(w.iter().copied());
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidDistribution("weights must have positive sum".into()));
        }
        Self::new(w.iter().map(|x| x / total).collect())
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k >= 1);
        Self(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

/// `θ(P; φ) = Σ φ(p_i)`.
pub fn theta_true(spec: &PhiSpec, p: &ProbabilityVector) -> f64 {
    let mut acc = CompensatedSum::new();
    for &pi in p.as_slice() {
        acc.add(spec.value(pi));
    }
    acc.value()
}

/// A grid point where the declared sandwich fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub p: f64,
    pub magnitude: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Checks `W p^(α-ℓ) - c' <= |φ^(ℓ)(p)| <= W p^(α-ℓ) + c` at every grid point.
pub fn verify_divergence_speed(spec: &PhiSpec, order: usize, grid: &[f64]) -> Result<Vec<Violation>> {
    let constants = spec.constants(order).ok_or(Error::UnsupportedOrder {
        order,
        max: spec.constants.len().saturating_sub(1),
    })?;
    let mut out = Vec::new();
    for &p in grid {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("grid point {p} outside (0, 1)")));
        }
        let magnitude = spec.eval(order, p)?.abs();
        let envelope = constants.w * p.powf(spec.alpha() - order as f64);
        let lower = envelope - constants.c_lower;
        let upper = envelope + constants.c_upper;
        let slack = 1e-12 * (envelope.abs() + magnitude);
        if magnitude < lower - slack || magnitude > upper + slack {
            out.push(Violation {
                p,
                magnitude,
                lower,
                upper,
            });
        }
    }
    Ok(out)
}

/// Which function the Hölder probe measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HolderTarget {
    Phi,
    FirstDerivative,
}

/// `max |f(x) - f(y)| / |x - y|^exponent` over all grid pairs.
pub fn holder_constant_probe(
    spec: &PhiSpec,
    target: HolderTarget,
    exponent: f64,
    grid: &[f64],
) -> Result<f64> {
    let order = match target {
        HolderTarget::Phi => 0,
        HolderTarget::FirstDerivative => 1,
    };
    let values = grid
        .iter()
        .map(|&p| spec.eval(order, p))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0.0f64;
    for i in 0..grid.len() {
        for j in (i + 1)..grid.len() {
            let dx = (grid[i] - grid[j]).abs();
            if dx == 0.0 {
                continue;
            }
            best = best.max((values[i] - values[j]).abs() / dx.powf(exponent));
        }
    }
    Ok(best)
}
