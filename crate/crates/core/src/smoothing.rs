//! Generalized Hermite interpolation and the smoothed functional `H_{L,Δ}[φ]`.
//!
//! For `x = (p - a) / (b - a)` the interpolant is
//!
//! ```text
//! H_L(p; φ, a, b) = φ(a) + Σ_{m=1}^{L} φ^(m)(a)/m! (p - a)^m S_m(x),
//! S_m(x) = Σ_{ℓ=0}^{L-m} (L+1)/(L+ℓ+1) B_{ℓ,L+ℓ+1}(x)
//!        = (1 - x)^(L+1) Σ_{ℓ=0}^{L-m} C(L+ℓ, ℓ) x^ℓ,
//! ```
//!
//! so every term factors as `x^m (1-x)^(L+1) R_m(x)` with integer-coefficient
//! `R_m`. Derivatives use the Leibniz rule over the three factors, which
//! keeps the `(1-x)` zeros exact at `x = 1`.

use crate::error::{Error, Result};
use crate::numeric::{binomial, factorial};
use crate::phi::PhiSpec;

/// Bernstein basis polynomial `C(n, ν) x^ν (1 - x)^(n - ν)`.
pub fn bernstein_basis(nu: usize, n: usize, x: f64) -> Result<f64> {
    if nu > n {
        return Err(Error::Domain(format!("Bernstein index {nu} > degree {n}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("Bernstein argument {x} outside [0, 1]")));
    }
    Ok(binomial(n as u64, nu as u64) * x.powi(nu as i32) * (1.0 - x).powi((n - nu) as i32))
}

/// Interpolation kernel for a fixed order `L`: the polynomials `R_m` and
/// the multinomial weights used for derivatives.
#[derive(Debug, Clone)]
struct Kernel {
    order: usize,
    /// `r_coeffs[m]` are the monomial coefficients of `R_m`, `1 <= m <= L`.
    r_coeffs: Vec<Vec<f64>>,
}

impl Kernel {
    fn new(order: usize) -> Self {
        let r_coeffs = (0..=order)
            .map(|m| {
                if m == 0 {
                    return Vec::new();
                }
                (0..=(order - m))
                    .map(|l| binomial((order + l) as u64, l as u64))
                    .collect()
            })
            .collect();
        Self { order, r_coeffs }
    }

    /// `d^r/dx^r [x^m (1-x)^(L+1) R_m(x)]`.
    fn term_derivative(&self, m: usize, r: usize, x: f64) -> f64 {
        let big = self.order + 1;
        let omx = 1.0 - x;
        let mut total = 0.0;
        for i in 0..=r.min(m) {
            let dxm = falling(m, i) * x.powi((m - i) as i32);
            for j in 0..=(r - i).min(big) {
                let k = r - i - j;
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let domx = sign * falling(big, j) * omx.powi((big - j) as i32);
                let dr = poly_derivative(&self.r_coeffs[m], k, x);
                if dr == 0.0 {
                    continue;
                }
                let multinomial = factorial(r as u64)
                    / (factorial(i as u64) * factorial(j as u64) * factorial(k as u64));
                total += multinomial * dxm * domx * dr;
            }
        }
        total
    }
}

/// `n (n-1) ... (n-k+1)` as a float.
fn falling(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    ((n - k + 1)..=n).map(|v| v as f64).product()
}

/// `k`-th derivative of the polynomial with monomial coefficients `c`.
fn poly_derivative(c: &[f64], k: usize, x: f64) -> f64 {
    let mut acc = 0.0;
    for (j, cj) in c.iter().enumerate().skip(k).rev() {
        acc = acc * x + cj * falling(j, k);
    }
    acc
}

/// Precomputed interpolant between `a` and `b` for a fixed `φ`.
#[derive(Debug, Clone)]
struct Interpolant {
    a: f64,
    b: f64,
    /// `φ^(m)(a) / m!` for `m = 0..=L`.
    taylor: Vec<f64>,
    kernel: Kernel,
}

impl Interpolant {
    fn new(spec: &PhiSpec, order: usize, a: f64, b: f64) -> Result<Self> {
        if a == b {
            return Err(Error::Domain(format!("Hermite endpoints coincide at {a}")));
        }
        if spec.max_order() < order {
            return Err(Error::UnsupportedOrder {
                order,
                max: spec.max_order(),
            });
        }
        let taylor = (0..=order)
            .map(|m| Ok(spec.eval(m, a)? / factorial(m as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            a,
            b,
            taylor,
            kernel: Kernel::new(order),
        })
    }

    fn eval(&self, r: usize, p: f64) -> f64 {
        let d = self.b - self.a;
        let x = (p - self.a) / d;
        let mut total = if r == 0 { self.taylor[0] } else { 0.0 };
        for m in 1..=self.kernel.order {
            let c = self.taylor[m];
            if c == 0.0 {
                continue;
            }
            total += c * d.powi(m as i32 - r as i32) * self.kernel.term_derivative(m, r, x);
        }
        total
    }
}

/// `H_L^(order)(p; φ, a, b)`.
pub fn hermite_interp(spec: &PhiSpec, order_l: usize, a: f64, b: f64, order: usize, p: f64) -> Result<f64> {
    if order > order_l {
        return Err(Error::UnsupportedOrder { order, max: order_l });
    }
    Ok(Interpolant::new(spec, order_l, a, b)?.eval(order, p))
}

/// The piecewise smoothed functional `H_{L,Δ}[φ]`:
///
/// | piece            | value                        |
/// |------------------|------------------------------|
/// | `p <= Δ/2`       | `H_L(Δ/2; φ, Δ, Δ/2)`        |
/// | `Δ/2 < p < Δ`    | `H_L(p; φ, Δ, Δ/2)`          |
/// | `Δ <= p <= 1`    | `φ(p)`                       |
/// | `1 < p < 2`      | `H_L(p; φ, 1, 2)`            |
/// | `p >= 2`         | `H_L(2; φ, 1, 2)`            |
#[derive(Debug, Clone)]
pub struct SmoothedPhi {
    base: PhiSpec,
    order: usize,
    delta: f64,
    left: Interpolant,
    right: Interpolant,
    left_flat: f64,
    right_flat: f64,
}

impl SmoothedPhi {
    pub fn new(base: PhiSpec, order: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("smoothing threshold {delta} outside (0, 1)")));
        }
        if order == 0 || order > crate::phi::MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                order,
                max: crate::phi::MAX_ORDER,
            });
        }
        let left = Interpolant::new(&base, order, delta, 0.5 * delta)?;
        let right = Interpolant::new(&base, order, 1.0, 2.0)?;
        let left_flat = left.eval(0, 0.5 * delta);
        let right_flat = right.eval(0, 2.0);
        Ok(Self {
            base,
            order,
            delta,
            left,
            right,
            left_flat,
            right_flat,
        })
    }

    pub fn base(&self) -> &PhiSpec {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `H^(order)_{L,Δ}[φ](p)` for `p >= 0`. Panics if `order > L`.
    pub fn eval(&self, order: usize, p: f64) -> f64 {
        assert!(order <= self.order, "order {order} exceeds smoothing order {}", self.order);
        let half = 0.5 * self.delta;
        if p <= half {
            if order == 0 {
                self.left_flat
            } else {
                0.0
            }
        } else if p < self.delta {
            self.left.eval(order, p)
        } else if p <= 1.0 {
            self.base
                .eval(order, p)
                .expect("φ derivatives are finite on [Δ, 1]")
        } else if p < 2.0 {
            self.right.eval(order, p)
        } else if order == 0 {
            self.right_flat
        } else {
            0.0
        }
    }
}

/// One row of [`hermite_bound_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteBoundRow {
    pub delta: f64,
    /// Grid supremum of `p^β |H^(ℓ)(p)|`.
    pub sup: f64,
    /// `sup / Δ^(α+β-ℓ)` on the scaling branch, `sup` otherwise.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBoundReport {
    /// True when `ℓ > α + β`, i.e. the `Δ^(α+β-ℓ)` scaling applies.
    pub scaling_branch: bool,
    pub rows: Vec<HermiteBoundRow>,
    pub spread: f64,
    pub pass: bool,
}

/// Checks `sup_p p^β |H^(ℓ)_{L,Δ}[φ](p)| ≲ Δ^(α+β-ℓ)` (or `≲ 1` when
/// `ℓ <= α + β`) across a sweep of `Δ`.
pub fn hermite_bound_probe(
    spec: &PhiSpec,
    order_l: usize,
    ell: usize,
    beta: f64,
    deltas: &[f64],
    factor: f64,
) -> Result<HermiteBoundReport> {
    if ell > order_l {
        return Err(Error::UnsupportedOrder { order: ell, max: order_l });
    }
    let alpha = spec.alpha();
    let scaling_branch = ell as f64 > alpha + beta;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let s = SmoothedPhi::new(spec.clone(), order_l, delta)?;
        let sup = probe_grid(delta)
            .into_iter()
            .map(|p| p.powf(beta) * s.eval(ell, p).abs())
            .fold(0.0f64, f64::max);
        let normalized = if scaling_branch {
            sup / delta.powf(alpha + beta - ell as f64)
        } else {
            sup
        };
        rows.push(HermiteBoundRow { delta, sup, normalized });
    }
    let max = rows.iter().fold(0.0f64, |m, r| m.max(r.normalized));
    let min = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.normalized));
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    Ok(HermiteBoundReport {
        scaling_branch,
        pass: spread < factor,
        spread,
        rows,
    })
}

fn probe_grid(delta: f64) -> Vec<f64> {
    let mut g = crate::numeric::log_grid(0.5 * delta, 2.0, 4000);
    g.extend(crate::numeric::linear_grid(0.5 * delta, delta, 600));
    g.extend(crate::numeric::linear_grid(1.0, 2.0, 600));
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Literal evaluation of the defining double sum with Bernstein polynomials.
    fn hermite_literal(spec: &PhiSpec, l: usize, a: f64, b: f64, p: f64) -> f64 {
        let x = (p - a) / (b - a);
        let mut total = spec.value(a);
        for m in 1..=l {
            let mut inner = 0.0;
            for j in 0..=(l - m) {
                let w = (l + 1) as f64 / (l + j + 1) as f64;
                inner += w * bernstein_basis(j, l + j + 1, x).unwrap();
            }
            total += spec.eval(m, a).unwrap() / factorial(m as u64) * (p - a).powi(m as i32) * inner;
        }
        total
    }

    #[test]
    fn bernstein_examples() {
        assert_eq!(bernstein_basis(0, 5, 0.0).unwrap(), 1.0);
        assert_eq!(bernstein_basis(1, 2, 0.5).unwrap(), 0.5);
        let s: f64 = (0..=7).map(|v| bernstein_basis(v, 7, 0.3).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(bernstein_basis(3, 2, 0.5).is_err());
    }

    #[test]
    fn hermite_matches_literal_sum() {
        let pw = PhiSpec::power(1.2).unwrap();
        let fast = hermite_interp(&pw, 6, 0.02, 0.01, 0, 0.015).unwrap();
        let lit = hermite_literal(&pw, 6, 0.02, 0.01, 0.015);
        assert!((fast - lit).abs() <= 1e-10 * lit.abs(), "{fast} vs {lit}");
        for &p in &[0.011, 0.013, 0.0199] {
            let fast = hermite_interp(&pw, 4, 0.02, 0.01, 0, p).unwrap();
            let lit = hermite_literal(&pw, 4, 0.02, 0.01, p);
            assert!((fast - lit).abs() <= 1e-10 * lit.abs());
        }
    }

    #[test]
    fn hermite_endpoint_conditions() {
        let pw = PhiSpec::power(1.2).unwrap();
        for l in [4usize, 6] {
            for (a, b) in [(0.02, 0.01), (1.0, 2.0)] {
                for i in 0..=l {
                    let at_a = hermite_interp(&pw, l, a, b, i, a).unwrap();
                    let want = pw.eval(i, a).unwrap();
                    assert!((at_a - want).abs() <= 1e-8 * want.abs().max(1e-300));
                    if i >= 1 {
                        assert_eq!(hermite_interp(&pw, l, a, b, i, b).unwrap(), 0.0);
                    }
                }
            }
        }
        assert!(hermite_interp(&pw, 4, 0.3, 0.3, 0, 0.3).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let pw = PhiSpec::power(1.3).unwrap();
        let (a, b) = (0.05, 0.025);
        for r in 0..6 {
            for &p in &[0.03, 0.04, 0.045] {
                let h = 1e-6;
                let fd = (hermite_interp(&pw, 6, a, b, r, p + h).unwrap()
                    - hermite_interp(&pw, 6, a, b, r, p - h).unwrap())
                    / (2.0 * h);
                let exact = hermite_interp(&pw, 6, a, b, r + 1, p).unwrap();
                assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "r={r} p={p}");
            }
        }
    }

    #[test]
    fn smoothed_pieces() {
        let pw = PhiSpec::power(1.2).unwrap();
        let s = SmoothedPhi::new(pw.clone(), 6, 0.02).unwrap();
        for &p in &[0.02, 0.1, 0.5, 1.0] {
            assert_eq!(s.eval(0, p), pw.value(p));
        }
        assert_eq!(s.eval(3, 3.0), 0.0);
        assert_eq!(s.eval(2, 0.001), 0.0);
        let (l, r) = (s.eval(0, 0.02 - 1e-9), s.eval(0, 0.02 + 1e-9));
        assert!((l - r).abs() <= 1e-6 * r.abs());
    }

    #[test]
    fn smoothed_knot_continuity_all_orders() {
        let pw = PhiSpec::power(1.2).unwrap();
        for l in [4usize, 6] {
            let delta = 0.01;
            let s = SmoothedPhi::new(pw.clone(), l, delta).unwrap();
            for knot in [0.5 * delta, delta, 1.0, 2.0] {
                for order in 0..=l {
                    let eps = knot * 1e-14;
                    let (lv, rv) = (s.eval(order, knot - eps), s.eval(order, knot + eps));
                    let scale = pw.eval(order, delta).unwrap().abs().max(1.0);
                    assert!((lv - rv).abs() <= 1e-6 * scale, "L={l} knot={knot} order={order}: {lv} vs {rv}");
                }
            }
        }
    }

    #[test]
    fn hermite_is_linear_in_phi() {
        let f1 = PhiSpec::power(1.2).unwrap();
        let f2 = PhiSpec::neg_p_log_p();
        let (c1, c2) = (0.7, -2.3);
        let combo = PhiSpec::custom("combo", 1.0, 6, Vec::new(), {
            let (f1, f2) = (f1.clone(), f2.clone());
            move |l, p| c1 * f1.eval(l, p).unwrap_or(f64::NAN) + c2 * f2.eval(l, p).unwrap_or(f64::NAN)
        })
        .unwrap();
        for &p in &[0.011, 0.015, 0.019] {
            let lhs = hermite_interp(&combo, 6, 0.02, 0.01, 0, p).unwrap();
            let rhs = c1 * hermite_interp(&f1, 6, 0.02, 0.01, 0, p).unwrap()
                + c2 * hermite_interp(&f2, 6, 0.02, 0.01, 0, p).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn bound_probe_branches() {
        let pw = PhiSpec::power(1.2).unwrap();
        let deltas: Vec<f64> = (4..=12).map(|e| 2f64.powi(-e)).collect();
        let r = hermite_bound_probe(&pw, 6, 2, 0.0, &deltas, 10.0).unwrap();
        assert!(r.scaling_branch && r.pass, "{r:?}");
        let r = hermite_bound_probe(&pw, 6, 1, 0.0, &deltas, 10.0).unwrap();
        assert!(!r.scaling_branch && r.pass, "{r:?}");

        let lin = PhiSpec::polynomial(vec![0.0, 1.0], 2.0).unwrap();
        let s = SmoothedPhi::new(lin, 6, 0.05).unwrap();
        for &p in &[0.05, 0.3, 1.0] {
            assert_eq!(s.eval(2, p), 0.0);
        }
    }
}
