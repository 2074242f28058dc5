//! Discrete Remez exchange.
//!
//! The candidate grid is the image of Chebyshev-spaced nodes `u` in `[0, 1]`
//! under `x = lo + (hi - lo) u²`, which crowds nodes toward `lo` where
//! functions such as `p^α` vary fastest, and toward `hi` like a Chebyshev
//! grid. Polynomials are represented in the Chebyshev basis internally.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use super::{clenshaw, AlternationPoint, Polynomial};
use crate::error::{Error, Result};
use crate::phi::PhiSpec;

#[derive(Debug, Clone, Copy)]
pub struct RemezOptions {
    pub max_iterations: usize,
    /// Relative gap between levelled and observed error at convergence.
    pub tolerance: f64,
    /// Candidate grid size; defaults to `max(2048, 64 L²)`.
    pub grid_size: Option<usize>,
    /// Points inserted around each extremum during the refinement pass.
    pub refine_points: usize,
}

impl Default for RemezOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            grid_size: None,
            refine_points: 64,
        }
    }
}

/// Best degree-`degree` uniform approximation of `φ` on `[lo, hi]`.
pub fn remez_best_poly(spec: &PhiSpec, degree: usize, lo: f64, hi: f64) -> Result<Polynomial> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::Domain(format!("interval [{lo}, {hi}] not inside [0, 1]")));
    }
    remez_fn(|x| spec.value(x.clamp(0.0, 1.0)), degree, lo, hi, RemezOptions::default())
}

/// Remez exchange for an arbitrary continuous function.
pub fn remez_fn<F>(f: F, degree: usize, lo: f64, hi: f64, opts: RemezOptions) -> Result<Polynomial>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("degenerate interval [{lo}, {hi}]")));
    }
    let width = hi - lo;
    let npts = degree + 2;
    let size = opts
        .grid_size
        .unwrap_or_else(|| (64 * degree * degree).max(2048))
        .max(4 * npts);

    let mut grid = graded_grid(lo, hi, size);
    let mut fvals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    if let Some(bad) = fvals.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("function not finite at x = {}", grid[bad])));
    }
    let fscale = fvals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let exact_tol = 1e-14 * fscale;

    let mut reference = initial_reference(&grid, degree, lo, width);
    let mut refined = false;
    let mut best: Option<(Polynomial, f64)> = None;

    for iteration in 0..opts.max_iterations {
        let to_s = |x: f64| (2.0 * x - lo - hi) / width;
        let cheb = match solve_levelled(&reference, &grid, &fvals, degree, to_s) {
            Some(c) => c,
            None => break,
        };
        let errors: Vec<f64> = grid
            .iter()
            .zip(&fvals)
            .map(|(&x, &fx)| fx - clenshaw(&cheb.0, to_s(x)))
            .collect();
        let max_err = errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let level = cheb.1.abs();

        if max_err <= exact_tol {
            let certificate = reference
                .iter()
                .map(|&i| AlternationPoint { x: grid[i], error: errors[i] })
                .collect();
            return Ok(Polynomial::from_chebyshev(cheb.0, [lo, hi], max_err, certificate));
        }

        let gap = (max_err - level) / max_err;
        let next = match exchange(&errors, npts) {
            Some(r) => r,
            None => {
                record_best(&mut best, &cheb.0, lo, hi, max_err, gap);
                break;
            }
        };
        record_best(&mut best, &cheb.0, lo, hi, max_err, gap);

        if gap <= opts.tolerance {
            if refined {
                let certificate = next
                    .iter()
                    .map(|&i| AlternationPoint { x: grid[i], error: errors[i] })
                    .collect();
                return Ok(Polynomial::from_chebyshev(cheb.0, [lo, hi], max_err, certificate));
            }
            // One refinement pass around the extrema, then keep iterating.
            let (g, r) = refine_grid(&grid, &next, opts.refine_points);
            fvals = g.iter().map(|&x| f(x)).collect();
            grid = g;
            reference = r;
            refined = true;
            continue;
        }
        reference = next;
        let _ = iteration;
    }

    let (poly, gap) = best.unwrap_or_else(|| {
        (
            Polynomial::from_chebyshev(vec![0.0; degree + 1], [lo, hi], f64::INFINITY, Vec::new()),
            f64::INFINITY,
        )
    });
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        gap,
        best: Box::new(poly),
    })
}

fn record_best(best: &mut Option<(Polynomial, f64)>, cheb: &[f64], lo: f64, hi: f64, err: f64, gap: f64) {
    if best.as_ref().is_none_or(|(p, _)| err < p.sup_error) {
        *best = Some((
            Polynomial::from_chebyshev(cheb.to_vec(), [lo, hi], err, Vec::new()),
            gap,
        ));
    }
}

fn graded_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..size)
        .map(|j| {
            let u = (FRAC_PI_2 * j as f64 / (size - 1) as f64).sin();
            lo + (hi - lo) * u * u
        })
        .collect();
    g[0] = lo;
    g[size - 1] = hi;
    g.dedup();
    g
}

/// Grid indices nearest to the Chebyshev extrema of degree `L + 1`.
fn initial_reference(grid: &[f64], degree: usize, lo: f64, width: f64) -> Vec<usize> {
    let npts = degree + 2;
    let mut out: Vec<usize> = Vec::with_capacity(npts);
    for i in 0..npts {
        let target = lo
            + width * 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / (npts - 1) as f64).cos());
        let pos = grid.partition_point(|&x| x < target);
        let mut idx = if pos == 0 {
            0
        } else if pos >= grid.len() {
            grid.len() - 1
        } else if (grid[pos] - target) < (target - grid[pos - 1]) {
            pos
        } else {
            pos - 1
        };
        if let Some(&last) = out.last() {
            idx = idx.max(last + 1);
        }
        out.push(idx);
    }
    // Pull back any overflow at the right end.
    let n = grid.len();
    for k in (0..npts).rev() {
        let cap = n - (npts - k);
        if out[k] > cap {
            out[k] = cap;
        }
        if k + 1 < npts && out[k] >= out[k + 1] {
            out[k] = out[k + 1] - 1;
        }
    }
    out
}

/// Solves `Σ c_j T_j(s_i) + (-1)^i h = f_i` on the reference.
fn solve_levelled(
    reference: &[usize],
    grid: &[f64],
    fvals: &[f64],
    degree: usize,
    to_s: impl Fn(f64) -> f64,
) -> Option<(Vec<f64>, f64)> {
    let n = degree + 2;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (row, &idx) in reference.iter().enumerate() {
        let s = to_s(grid[idx]);
        let mut t_prev = 1.0;
        let mut t_cur = s;
        a[(row, 0)] = 1.0;
        if degree >= 1 {
            a[(row, 1)] = s;
        }
        for j in 2..=degree {
            let t_next = 2.0 * s * t_cur - t_prev;
            a[(row, j)] = t_next;
            t_prev = t_cur;
            t_cur = t_next;
        }
        a[(row, n - 1)] = if row % 2 == 0 { 1.0 } else { -1.0 };
        b[row] = fvals[idx];
    }
    let sol = a.lu().solve(&b)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let h = sol[n - 1];
    Some((sol.iter().take(n - 1).copied().collect(), h))
}

/// Picks an alternating set of `npts` local extrema that contains the global
/// maximum of `|e|`.
fn exchange(errors: &[f64], npts: usize) -> Option<Vec<usize>> {
    let mut ext: Vec<usize> = Vec::new();
    let mut run_best: Option<usize> = None;
    let mut run_sign = 0.0f64;
    for (i, &e) in errors.iter().enumerate() {
        let s = if e > 0.0 {
            1.0
        } else if e < 0.0 {
            -1.0
        } else {
            run_sign
        };
        if s != run_sign && run_sign != 0.0 {
            if let Some(b) = run_best {
                ext.push(b);
            }
            run_best = None;
        }
        run_sign = s;
        match run_best {
            Some(b) if errors[b].abs() >= e.abs() => {}
            _ => run_best = Some(i),
        }
    }
    if let Some(b) = run_best {
        ext.push(b);
    }
    if ext.len() < npts {
        return None;
    }
    while ext.len() > npts {
        let last = ext.len() - 1;
        if ext.len() - npts == 1 {
            if errors[ext[0]].abs() < errors[ext[last]].abs() {
                ext.remove(0);
            } else {
                ext.pop();
            }
            continue;
        }
        let (imin, _) = ext
            .iter()
            .enumerate()
            .min_by(|a, b| errors[*a.1].abs().total_cmp(&errors[*b.1].abs()))
            .expect("nonempty");
        if imin == 0 || imin == last {
            ext.remove(imin);
        } else {
            // Dropping an interior point leaves two same-signed neighbours; keep the larger.
            let (l, r) = (ext[imin - 1], ext[imin + 1]);
            let drop = if errors[l].abs() < errors[r].abs() { imin - 1 } else { imin + 1 };
            ext.remove(imin.max(drop));
            ext.remove(imin.min(drop));
        }
    }
    Some(ext)
}

/// Inserts `extra` points between the neighbours of each reference node.
fn refine_grid(grid: &[f64], reference: &[usize], extra: usize) -> (Vec<f64>, Vec<usize>) {
    let mut pts = grid.to_vec();
    for &i in reference {
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(grid.len() - 1)];
        for j in 1..extra {
            pts.push(a + (b - a) * j as f64 / extra as f64);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let new_ref = reference
        .iter()
        .map(|&i| pts.partition_point(|&x| x < grid[i]))
        .collect();
    (pts, new_ref)
}

/// One row of [`jackson_rate_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacksonRow {
    pub degree: usize,
    pub error: f64,
    /// `E_L · (L² / Δ)^α`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacksonReport {
    pub rows: Vec<JacksonRow>,
    /// max / min of the normalized column.
    pub spread: f64,
    pub pass: bool,
}

/// Measures `E_L(φ, [0, Δ])` over `degrees` and checks that
/// `E_L (L²/Δ)^α` stays within `factor`.
pub fn jackson_rate_probe(spec: &PhiSpec, degrees: &[usize], delta: f64, factor: f64) -> Result<JacksonReport> {
    let alpha = spec.alpha();
    let mut rows = Vec::with_capacity(degrees.len());
    for &degree in degrees {
        let p = remez_best_poly(spec, degree, 0.0, delta)?;
        let l2 = (degree * degree) as f64;
        rows.push(JacksonRow {
            degree,
            error: p.sup_error,
            normalized: p.sup_error * (l2 / delta).powf(alpha),
        });
    }
    let max = rows.iter().fold(0.0f64, |m, r| m.max(r.normalized));
    let min = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.normalized));
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    Ok(JacksonReport {
        pass: spread < factor,
        spread,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linear_grid;

    fn validation_error(p: &Polynomial, f: impl Fn(f64) -> f64) -> f64 {
        let [lo, hi] = p.interval;
        let mut pts = linear_grid(lo, hi, 20_001);
        pts.extend(graded_grid(lo, hi, 30_011));
        pts.iter().fold(0.0f64, |m, &x| m.max((f(x) - p.eval(x)).abs()))
    }

    /// Brute-force oracle for the degree-1 approximation of x² on [0, 1]:
    /// search (a0, a1) on a lattice around the Chebyshev answer.
    fn grid_search_line_for_square() -> (f64, f64, f64) {
        let xs = linear_grid(0.0, 1.0, 401);
        let mut best = (0.0, 0.0, f64::INFINITY);
        for i in 0..=200 {
            let a0 = -0.2 + 0.15 * i as f64 / 200.0;
            for j in 0..=200 {
                let a1 = 0.9 + 0.2 * j as f64 / 200.0;
                let e = xs.iter().fold(0.0f64, |m, &x| m.max((x * x - a0 - a1 * x).abs()));
                if e < best.2 {
                    best = (a0, a1, e);
                }
            }
        }
        best
    }

    #[test]
    fn square_by_line() {
        let (a0, a1, e) = grid_search_line_for_square();
        assert!((a0 + 0.125).abs() < 2e-3 && (a1 - 1.0).abs() < 2e-3 && (e - 0.125).abs() < 2e-3);

        let sq = PhiSpec::power(2.0).unwrap();
        let p = remez_best_poly(&sq, 1, 0.0, 1.0).unwrap();
        assert!((p.sup_error - 0.125).abs() < 1e-6);
        assert!((p.coeffs[0] + 0.125).abs() < 1e-6 && (p.coeffs[1] - 1.0).abs() < 1e-6);
        assert_eq!(p.certificate.len(), 3);
        assert!(p.certificate_alternates());
    }

    #[test]
    fn constant_for_identity() {
        let lin = PhiSpec::power(1.0).unwrap();
        let p = remez_best_poly(&lin, 0, 0.0, 1.0).unwrap();
        assert!((p.coeffs[0] - 0.5).abs() < 1e-12);
        assert!((p.sup_error - 0.5).abs() < 1e-12);
    }

    #[test]
    fn polynomials_reproduce_themselves() {
        let spec = PhiSpec::polynomial(vec![0.3, -1.0, 2.0, 0.5], 2.0).unwrap();
        for degree in [3, 4, 6] {
            let p = remez_best_poly(&spec, degree, 0.0, 1.0).unwrap();
            assert!(p.sup_error < 1e-10, "degree {degree}: {}", p.sup_error);
            assert!((p.eval(0.37) - spec.value(0.37)).abs() < 1e-10);
        }
        let p = remez_best_poly(&spec, 3, 0.2, 0.3).unwrap();
        assert!(p.sup_error < 1e-10);
    }

    #[test]
    fn degenerate_interval_is_domain_error() {
        let sq = PhiSpec::power(2.0).unwrap();
        assert!(matches!(remez_best_poly(&sq, 2, 0.5, 0.5), Err(Error::Domain(_))));
        assert!(matches!(remez_best_poly(&sq, 2, 0.5, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn non_convergence_reports_best_iterate() {
        let pw = PhiSpec::power(1.2).unwrap();
        let opts = RemezOptions {
            max_iterations: 1,
            ..RemezOptions::default()
        };
        match remez_fn(|x| pw.value(x), 8, 0.0, 1.0, opts) {
            Err(Error::Convergence { best, .. }) => assert!(best.sup_error.is_finite()),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn certificate_and_validation_for_power() {
        let pw = PhiSpec::power(1.2).unwrap();
        for (degree, hi) in [(4usize, 1.0), (8, 1.0), (6, 0.004)] {
            let p = remez_best_poly(&pw, degree, 0.0, hi).unwrap();
            assert_eq!(p.certificate.len(), degree + 2);
            assert!(p.certificate_alternates());
            for pt in &p.certificate {
                assert!((pt.error.abs() - p.sup_error).abs() <= 1e-6 * p.sup_error);
            }
            let v = validation_error(&p, |x| pw.value(x));
            assert!(v <= p.sup_error * (1.0 + 1e-4), "L={degree}: {v} vs {}", p.sup_error);
        }
    }

    #[test]
    fn local_optimality_spot_check() {
        let pw = PhiSpec::power(1.2).unwrap();
        let p = remez_best_poly(&pw, 5, 0.0, 1.0).unwrap();
        let base = validation_error(&p, |x| pw.value(x));
        for m in 0..p.coeffs.len() {
            for sign in [-1.0, 1.0] {
                let mut c = p.coeffs.clone();
                c[m] += sign * 1e-3;
                let q = Polynomial::from_coeffs(c, p.interval);
                assert!(validation_error(&q, |x| pw.value(x)) >= base * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn error_decreases_with_degree() {
        let pw = PhiSpec::power(1.2).unwrap();
        let errs: Vec<f64> = (1..=8)
            .map(|l| remez_best_poly(&pw, l, 0.0, 1.0).unwrap().sup_error)
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9));
        }
        assert!(errs[1] < errs[0]);
    }

    #[test]
    fn jackson_probe_linear_is_exact() {
        let lin = PhiSpec::polynomial(vec![0.0, 1.0], 2.0).unwrap();
        let r = jackson_rate_probe(&lin, &[1, 2, 4], 1.0, 5.0).unwrap();
        assert!(r.rows.iter().all(|row| row.error < 1e-12));
    }

    #[test]
    fn jackson_probe_power() {
        let pw = PhiSpec::power(1.2).unwrap();
        let r = jackson_rate_probe(&pw, &[4, 8, 16, 32], 1.0, 5.0).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
