//! Acceptance criteria. Runs sequentially and prints one line per criterion:
//!
//! `[PASS|FAIL] <id> <name>: <measurement> (<elapsed> / <budget>)`
//!
//! Pass arguments to run a subset by id, e.g. `cargo test --test acceptance -- 2 4`.
//! The process exits non-zero if any selected criterion fails.

use std::time::{Duration, Instant};

use addfunc::estimators::{bias_corrected4, EstimatorConfig, FourthOrderScheme, Mode, PolyEstimator};
use addfunc::numeric::ols;
use addfunc::poly::{jackson_rate_probe, remez_fn, Polynomial, RemezOptions};
use addfunc::risk::{
    binomial_expectation, exact_bias_oracle, lecam_two_point, monte_carlo_risk, poisson_expectation,
    poisson_mean_var, two_point_pair, TAIL_TOL,
};
use addfunc::sampling::{distribution_zoo, trial_rng, Preset};
use addfunc::smoothing::{hermite_bound_probe, hermite_interp};
use addfunc::{remez_best_poly, PhiSpec, ProbabilityVector, SmoothedPhi};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "unbiasedness_oracle", budget: Duration::from_secs(5), run: c1_unbiasedness },
    Criterion { id: 2, name: "remez_correctness", budget: Duration::from_secs(1), run: c2_remez },
    Criterion { id: 3, name: "jackson_rate", budget: Duration::from_secs(30), run: c3_jackson },
    Criterion { id: 4, name: "hermite_matching", budget: Duration::from_secs(1), run: c4_hermite_matching },
    Criterion { id: 5, name: "hermite_bound_scaling", budget: Duration::from_secs(30), run: c5_hermite_bound },
    Criterion { id: 6, name: "fourth_order_bias_decay", budget: Duration::from_secs(60), run: c6_fourth_order_bias },
    Criterion { id: 7, name: "fourth_order_variance_envelope", budget: Duration::from_secs(120), run: c7_variance_envelope },
    Criterion { id: 8, name: "plugin_regime_rates", budget: Duration::from_secs(600), run: c8_plugin_regime },
    Criterion { id: 9, name: "hybrid_beats_plugin", budget: Duration::from_secs(600), run: c9_hybrid_vs_plugin },
    Criterion { id: 10, name: "lecam_diagnostic", budget: Duration::from_secs(60), run: c10_lecam },
    Criterion { id: 11, name: "simulate_determinism", budget: Duration::from_secs(30), run: c11_determinism },
];

fn main() {
    std::env::remove_var("ADDFUNC_CACHE_DIR");
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for c in CRITERIA.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let out = (c.run)();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= c.budget;
        println!(
            "[{}] {:>2} {}: {} ({:.2}s / {}s)",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            out.detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
        if !pass {
            failed.push(c.id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn power(alpha: f64) -> PhiSpec {
    PhiSpec::power(alpha).expect("valid exponent")
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    ols(&lx, &ly).0
}

/// Pre-clamp best-polynomial estimator under exact Poisson expectation
/// against the polynomial itself. Relative error is measured against
/// `Σ |a_m| x^m`, the conditioning scale of the sum.
fn c1_unbiasedness() -> Outcome {
    let cfg = EstimatorConfig::practical(Mode::Hybrid4, 10_000, 10_000);
    let [_, hi] = cfg.poly_interval();
    let n = cfg.n as f64;
    let mut rng = trial_rng(0xACCE, 1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let degree = rng.random_range(0..=6usize);
        let coeffs: Vec<f64> = (0..=degree)
            .map(|m| rng.random_range(-1.0..1.0) / hi.powi(m as i32))
            .collect();
        let poly = Polynomial::from_coeffs(coeffs, [0.0, hi]);
        let est = PolyEstimator::new(poly.clone(), n, [f64::NEG_INFINITY, f64::INFINITY]).unwrap();
        for lambda in [0.5, 2.0, 10.0, 40.0] {
            let x = lambda / n;
            let got = poisson_expectation(|j| est.pre_clamp(j), lambda, TAIL_TOL).unwrap();
            let want = poly.eval(x);
            let scale: f64 = poly.coeffs.iter().enumerate().map(|(m, a)| (a * x.powi(m as i32)).abs()).sum();
            worst = worst.max((got - want).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("max relative error {worst:.2e} (tol 1e-9) over 20 polynomials x 4 means"),
    }
}

fn c2_remez() -> Outcome {
    let sq = PhiSpec::polynomial(vec![0.0, 0.0, 1.0], 2.0).unwrap();
    let p = remez_best_poly(&sq, 1, 0.0, 1.0).unwrap();
    let square_ok = (p.sup_error - 0.125).abs() <= 1e-6 && p.certificate.len() == 3 && p.certificate_alternates();
    let mut rng = trial_rng(0xACCE, 2);
    let mut worst_repro = 0.0f64;
    for degree in 0..=8usize {
        let coeffs: Vec<f64> = (0..=degree).map(|_| rng.random_range(-2.0..2.0)).collect();
        let target = Polynomial::from_coeffs(coeffs, [0.0, 1.0]);
        for fit_degree in degree..=(degree + 1) {
            let q = remez_fn(|x| target.eval(x), fit_degree, 0.0, 1.0, RemezOptions::default()).unwrap();
            worst_repro = worst_repro.max(q.sup_error);
        }
    }
    Outcome {
        pass: square_ok && worst_repro < 1e-10,
        detail: format!(
            "x^2 by line: error {:.9} with {}-point alternating certificate; self-reproduction max error {:.1e} (tol 1e-10)",
            p.sup_error,
            p.certificate.len(),
            worst_repro
        ),
    }
}

fn c3_jackson() -> Outcome {
    let r = jackson_rate_probe(&power(1.2), &[4, 8, 16, 32, 64], 1.0, 5.0).unwrap();
    let rows: Vec<String> = r.rows.iter().map(|row| format!("L={}:{:.3e}", row.degree, row.normalized)).collect();
    Outcome {
        pass: r.pass,
        detail: format!("E_L L^2.4 spread {:.3} (limit 5): {}", r.spread, rows.join(" ")),
    }
}

fn c4_hermite_matching() -> Outcome {
    let phi = power(1.2);
    let mut worst_a = 0.0f64;
    let mut worst_b = 0.0f64;
    let mut worst_knot = 0.0f64;
    for l in [4usize, 6] {
        for (a, b) in [(0.02, 0.01), (1.0, 2.0)] {
            for i in 0..=l {
                let want = phi.eval(i, a).unwrap();
                let scale = want.abs().max(1e-300);
                let at_a = hermite_interp(&phi, l, a, b, i, a).unwrap();
                worst_a = worst_a.max((at_a - want).abs() / scale);
                if i > 0 {
                    let at_b = hermite_interp(&phi, l, a, b, i, b).unwrap();
                    worst_b = worst_b.max(at_b.abs() / scale);
                }
            }
        }
        let delta = 0.02;
        let s = SmoothedPhi::new(phi.clone(), l, delta).unwrap();
        for knot in [0.5 * delta, delta, 1.0, 2.0] {
            for order in 0..=l {
                let eps = knot * 4.0 * f64::EPSILON;
                let (lv, rv) = (s.eval(order, knot - eps), s.eval(order, knot + eps));
                let scale = phi.eval(order, delta).unwrap().abs().max(1.0);
                worst_knot = worst_knot.max((lv - rv).abs() / scale);
            }
        }
    }
    Outcome {
        pass: worst_a <= 1e-8 && worst_b <= 1e-8 && worst_knot <= 1e-6,
        detail: format!(
            "match at a {worst_a:.1e}, vanish at b {worst_b:.1e} (tol 1e-8); knot jumps {worst_knot:.1e} (tol 1e-6)"
        ),
    }
}

fn c5_hermite_bound() -> Outcome {
    let phi = power(1.2);
    let deltas: Vec<f64> = (4..=12).map(|e| 2f64.powi(-e)).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (ell, beta) in [(2usize, 0.0), (3, 0.0), (4, 0.0), (4, 1.0)] {
        let r = hermite_bound_probe(&phi, 6, ell, beta, &deltas, 10.0).unwrap();
        pass &= r.pass;
        parts.push(format!("(l={ell},b={beta}) spread {:.2}", r.spread));
    }
    Outcome {
        pass,
        detail: format!("{} (limit 10, L=6)", parts.join(", ")),
    }
}

fn fourth_order_bias(n: f64) -> f64 {
    let phi = power(1.2);
    let s = SmoothedPhi::new(phi.clone(), 6, 0.02).unwrap();
    let p = 0.1;
    exact_bias_oracle(|j| bias_corrected4(&s, j, n, FourthOrderScheme::Corrected), n * p, phi.value(p), TAIL_TOL).unwrap()
}

fn c6_fourth_order_bias() -> Outcome {
    let ns = [1e3, 1e4, 1e5];
    let bias: Vec<f64> = ns.iter().map(|&n| fourth_order_bias(n)).collect();
    let slope = log_slope(&ns, &bias);
    let decreasing = bias.windows(2).all(|w| w[1].abs() < w[0].abs());
    Outcome {
        pass: decreasing && (-3.5..=-2.5).contains(&slope),
        detail: format!(
            "|bias| {:.3e}, {:.3e}, {:.3e}; slope {slope:.3} (range [-3.5, -2.5])",
            bias[0].abs(),
            bias[1].abs(),
            bias[2].abs()
        ),
    }
}

/// `c` is the smallest constant with `Var <= c (n^-2.4 + p/n)` on every cell.
fn c7_variance_envelope() -> Outcome {
    let phi = power(1.2);
    let mut ratios = Vec::new();
    let mut cells = Vec::new();
    for &n in &[1e3f64, 1e4, 1e5] {
        let delta = n.ln() / n;
        let s = SmoothedPhi::new(phi.clone(), 6, delta).unwrap();
        for &p in &[0.05, 0.1, 0.5] {
            let (_, var) =
                poisson_mean_var(|j| bias_corrected4(&s, j, n, FourthOrderScheme::Corrected), n * p, TAIL_TOL).unwrap();
            let envelope = n.powf(-2.4) + p / n;
            ratios.push(var / envelope);
            cells.push((n, p, var, envelope));
        }
    }
    let c = ratios.iter().cloned().fold(0.0f64, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let worst_excess = cells.iter().map(|&(_, _, v, e)| v / (c * e)).fold(0.0f64, f64::max);
    Outcome {
        pass: c.is_finite() && c > 0.0 && worst_excess <= 1.0 + 1e-12,
        detail: format!(
            "fitted c = {c:.4}; max cell/envelope {worst_excess:.4} (limit 1.0); ratio spread {:.2} over 9 cells",
            c / min
        ),
    }
}

fn c8_plugin_regime() -> Outcome {
    let alpha = 1.6;
    let phi = power(alpha);
    let k = 100usize;
    let p = ProbabilityVector::uniform(k);
    let ns = [1e3, 1e4, 1e5, 1e6];
    let mut mse = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let cfg = EstimatorConfig::practical(Mode::Plugin, n as u64, k);
        let s = monte_carlo_risk(&phi, &p, &cfg, 1000, 0x8000 + i as u64, None).unwrap();
        mse.push(s.mse);
    }
    let mse_slope = log_slope(&ns, &mse);
    let theta = k as f64 * (1.0 / k as f64).powf(alpha);
    let bias: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let e = binomial_expectation(|j| (j as f64 / n).powf(alpha), n as u64, 1.0 / k as f64, TAIL_TOL).unwrap();
            k as f64 * e - theta
        })
        .collect();
    let bias_slope = log_slope(&ns, &bias);
    let pass = (-1.3..=-0.7).contains(&mse_slope) && (bias_slope + 0.6).abs() <= 0.3;

    // Diagnostics: the worst-case bias cell (k = n) and a non-uniform cell.
    let worst_bias: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let e = binomial_expectation(|j| (j as f64 / n).powf(alpha), n as u64, 1.0 / n, TAIL_TOL).unwrap();
            (n * e - n.powf(1.0 - alpha)).abs()
        })
        .collect();
    let zipf = distribution_zoo(Preset::Zipf { s: 1.0 }, k).unwrap();
    let zipf_mse: Vec<f64> = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let cfg = EstimatorConfig::practical(Mode::Plugin, n as u64, k);
            monte_carlo_risk(&phi, &zipf, &cfg, 1000, 0x8100 + i as u64, None).unwrap().mse
        })
        .collect();
    Outcome {
        pass,
        detail: format!(
            "uniform k=100: MSE slope {mse_slope:.3} (range [-1.3, -0.7]), exact bias slope {bias_slope:.3} (target -0.6 +/- 0.3); \
             diagnostics: k=n bias slope {:.3}, zipf k=100 MSE slope {:.3}",
            log_slope(&ns, &worst_bias),
            log_slope(&ns, &zipf_mse)
        ),
    }
}

fn c9_hybrid_vs_plugin() -> Outcome {
    let phi = power(1.2);
    let (n, k, trials) = (10_000u64, 10_000usize, 500usize);
    let p = ProbabilityVector::uniform(k);
    let hybrid = monte_carlo_risk(&phi, &p, &EstimatorConfig::practical(Mode::Hybrid4, n, k), trials, 0x9001, None).unwrap();
    let plugin = monte_carlo_risk(&phi, &p, &EstimatorConfig::practical(Mode::Plugin, n, k), trials, 0x9002, None).unwrap();
    let sq = |e: &[f64]| e.iter().map(|x| x * x).collect::<Vec<f64>>();
    let (h, g) = (sq(&hybrid.errors), sq(&plugin.errors));
    let mut rng = trial_rng(0x9003, 0);
    let resamples = 2000;
    let mut wins = 0;
    for _ in 0..resamples {
        let mh: f64 = (0..trials).map(|_| h[rng.random_range(0..trials)]).sum::<f64>() / trials as f64;
        let mg: f64 = (0..trials).map(|_| g[rng.random_range(0..trials)]).sum::<f64>() / trials as f64;
        if mh < mg {
            wins += 1;
        }
    }
    let confidence = wins as f64 / resamples as f64;
    Outcome {
        pass: hybrid.mse < plugin.mse && confidence >= 0.95,
        detail: format!(
            "hybrid4 MSE {:.3e} vs plugin MSE {:.3e}; bootstrap confidence {confidence:.3} (need 0.95)",
            hybrid.mse, plugin.mse
        ),
    }
}

fn c10_lecam() -> Outcome {
    let phi = power(1.2);
    let (k, p) = (10usize, 0.3);
    let ns: Vec<f64> = (2..=6).map(|e| 10f64.powi(e)).collect();
    let bounds: Vec<f64> = ns
        .iter()
        .map(|&n| lecam_two_point(&phi, n as u64, k, p, p + 1.0 / n.sqrt()).unwrap().bound)
        .collect();
    let slope = log_slope(&ns, &bounds);
    let mut worst_ratio = 0.0f64;
    let mut all_below = true;
    for (i, &n) in [100u64, 1000, 10_000].iter().enumerate() {
        let q = p + 1.0 / (n as f64).sqrt();
        let bound = lecam_two_point(&phi, n, k, p, q).unwrap().bound;
        let (pp, qq) = two_point_pair(k, p, q).unwrap();
        for (j, mode) in Mode::ALL.into_iter().enumerate() {
            let cfg = EstimatorConfig {
                force: true,
                ..EstimatorConfig::practical(mode, n, k)
            };
            let seed = 0xA000 + (i * 16 + j) as u64;
            let a = monte_carlo_risk(&phi, &pp, &cfg, 200, seed, None).unwrap().mse;
            let b = monte_carlo_risk(&phi, &qq, &cfg, 200, seed + 0x100, None).unwrap().mse;
            let worst = a.max(b);
            all_below &= bound <= worst;
            worst_ratio = worst_ratio.max(bound / worst);
        }
    }
    Outcome {
        pass: (slope + 1.0).abs() <= 0.1 && all_below,
        detail: format!(
            "bound slope {slope:.3} (target -1.0 +/- 0.1); max bound / worst-of-two MSE {worst_ratio:.3e} over 6 modes x 3 n (limit 1.0)"
        ),
    }
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    std::fs::write(
        &config,
        r#"{"phi":{"kind":"power","alpha":1.2},
            "estimator":{"mode":"hybrid4"},
            "experiment":{"ns":[500,2000],"ks":[50,200],"dists":["uniform","zipf:1"],"modes":["hybrid4","plugin"],"trials":10,"seed":42}}"#,
    )
    .unwrap();
    let run = |out: &str, jobs: &str| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_addfunc"))
            .args(["simulate", "--config"])
            .arg(&config)
            .args(["--out", dir.path().join(out).to_str().unwrap(), "--jobs", jobs, "--format", "csv"])
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join(out).join("risk.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "4");
    let rows = a.iter().filter(|&&c| c == b'\n').count();
    Outcome {
        pass: a == b && rows > 2,
        detail: format!(
            "two runs (1 and 4 threads): {} bytes, {} lines, byte-identical = {}",
            a.len(),
            rows,
            a == b
        ),
    }
}

