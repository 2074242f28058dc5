//! Grid-restricted moduli of smoothness. Values are lower bounds on the true
//! suprema; refining the grid can only increase them.

/// `ω₁(f, t) = sup { |f(x) - f(y)| : |x - y| <= t }` over grid pairs.
pub fn omega1<F: Fn(f64) -> f64>(f: F, t: f64, grid: &[f64]) -> f64 {
    let (xs, fx) = sorted_values(&f, grid);
    let mut best = 0.0f64;
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            if xs[j] - xs[i] > t {
                break;
            }
            best = best.max((fx[i] - fx[j]).abs());
        }
    }
    best
}

/// `ω²(f, t) = sup { |f(x) + f(y) - 2 f((x+y)/2)| : |x - y| <= 2t }` over
/// grid pairs; midpoints are evaluated exactly.
pub fn omega2<F: Fn(f64) -> f64>(f: F, t: f64, grid: &[f64]) -> f64 {
    let (xs, fx) = sorted_values(&f, grid);
    let mut best = 0.0f64;
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            if xs[j] - xs[i] > 2.0 * t {
                break;
            }
            let mid = f(0.5 * (xs[i] + xs[j]));
            best = best.max((fx[i] + fx[j] - 2.0 * mid).abs());
        }
    }
    best
}

fn sorted_values<F: Fn(f64) -> f64>(f: &F, grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = grid.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let fx = xs.iter().map(|&x| f(x)).collect();
    (xs, fx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linear_grid;

    #[test]
    fn square_second_modulus() {
        let grid = linear_grid(0.0, 1.0, 1001);
        let w = omega2(|x| x * x, 0.1, &grid);
        assert!((w - 0.02).abs() < 1e-12, "{w}");
    }

    #[test]
    fn constants_have_zero_moduli() {
        let grid = linear_grid(0.0, 1.0, 101);
        for t in [0.01, 0.3] {
            assert_eq!(omega1(|_| 4.2, t, &grid), 0.0);
            assert_eq!(omega2(|_| 4.2, t, &grid), 0.0);
        }
    }

    #[test]
    fn moduli_of_power_scale_like_t_alpha() {
        let mut grid = linear_grid(0.0, 1.0, 2049);
        grid.extend((1..=400).map(|i| (i as f64 / 400.0).powi(4)));
        let ratios: Vec<f64> = (3..=10)
            .map(|e| {
                let t = 2f64.powi(-e);
                omega2(|x: f64| x.powf(1.6), t, &grid) / t.powf(1.6)
            })
            .collect();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 5.0, "{ratios:?}");
    }

    #[test]
    fn definitional_bounds_and_monotonicity() {
        let grid = linear_grid(0.0, 1.0, 301);
        let f = |x: f64| (7.0 * x).sin() + x.powf(1.3);
        let sup = grid.iter().fold(0.0f64, |m, &x| m.max(f(x).abs()));
        let mut prev1 = 0.0;
        let mut prev2 = 0.0;
        for t in [0.01, 0.05, 0.1, 0.2, 0.5] {
            let w1 = omega1(f, t, &grid);
            let w2 = omega2(f, t, &grid);
            assert!(w2 <= 2.0 * w1 + 1e-12);
            assert!(w1 <= 2.0 * sup + 1e-12);
            assert!(w1 >= prev1 && w2 >= prev2);
            prev1 = w1;
            prev2 = w2;
        }
        let fine = linear_grid(0.0, 1.0, 601);
        assert!(omega1(f, 0.1, &fine) >= omega1(f, 0.1, &grid));
    }
}
