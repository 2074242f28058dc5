//! Fast invariant checks run by `addfunc selftest`.

use addfunc::estimators::{bias_corrected4, plugin_estimate, FourthOrderScheme, PolyEstimator};
use addfunc::poly::Polynomial;
use addfunc::risk::{lecam_two_point, poisson_expectation, TAIL_TOL};
use addfunc::smoothing::hermite_interp;
use addfunc::{remez_best_poly, Histogram, PhiSpec, SmoothedPhi};

type Check = (&'static str, fn() -> Result<(), String>);

const CHECKS: &[Check] = &[
    ("remez_square_by_line", remez_square_by_line),
    ("poly_estimator_unbiased", poly_estimator_unbiased),
    ("hermite_matching", hermite_matching),
    ("plugin_identity", plugin_identity),
    ("fourth_order_cubic", fourth_order_cubic),
    ("lecam_example", lecam_example),
];

/// Runs every check; returns the report and whether all passed.
pub fn run() -> (String, bool) {
    let mut out = String::new();
    let mut ok = true;
    for (name, check) in CHECKS {
        match check() {
            Ok(()) => out.push_str(&format!("PASS {name}\n")),
            Err(msg) => {
                ok = false;
                out.push_str(&format!("FAIL {name}: {msg}\n"));
            }
        }
    }
    (out, ok)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn remez_square_by_line() -> Result<(), String> {
    let sq = PhiSpec::polynomial(vec![0.0, 0.0, 1.0], 2.0).map_err(|e| e.to_string())?;
    let p = remez_best_poly(&sq, 1, 0.0, 1.0).map_err(|e| e.to_string())?;
    ensure((p.sup_error - 0.125).abs() <= 1e-6 && p.certificate_alternates(), || {
        format!("error {} certificate {:?}", p.sup_error, p.certificate)
    })
}

fn poly_estimator_unbiased() -> Result<(), String> {
    let poly = Polynomial::from_coeffs(vec![0.1, -0.4, 2.0, -3.0, 1.5, 0.7, -0.2], [0.0, 0.05]);
    let n = 1000.0;
    let est = PolyEstimator::new(poly.clone(), n, [f64::NEG_INFINITY, f64::INFINITY]).map_err(|e| e.to_string())?;
    for lambda in [0.5, 2.0, 10.0, 40.0] {
        let got = poisson_expectation(|j| est.pre_clamp(j), lambda, TAIL_TOL).map_err(|e| e.to_string())?;
        let want = poly.eval(lambda / n);
        ensure((got - want).abs() <= 1e-9 * want.abs(), || format!("λ={lambda}: {got} vs {want}"))?;
    }
    Ok(())
}

fn hermite_matching() -> Result<(), String> {
    let phi = PhiSpec::power(1.2).map_err(|e| e.to_string())?;
    for l in [4, 6] {
        for i in 0..=l {
            let at_a = hermite_interp(&phi, l, 0.02, 0.01, i, 0.02).map_err(|e| e.to_string())?;
            let want = phi.eval(i, 0.02).map_err(|e| e.to_string())?;
            ensure((at_a - want).abs() <= 1e-8 * want.abs().max(1e-300), || format!("L={l} order {i} at a"))?;
            if i > 0 {
                let at_b = hermite_interp(&phi, l, 0.02, 0.01, i, 0.01).map_err(|e| e.to_string())?;
                ensure(at_b == 0.0, || format!("L={l} order {i} at b: {at_b}"))?;
            }
        }
    }
    Ok(())
}

fn plugin_identity() -> Result<(), String> {
    let lin = PhiSpec::polynomial(vec![0.0, 1.0], 2.0).map_err(|e| e.to_string())?;
    let v = plugin_estimate(&lin, &Histogram::multinomial(vec![3, 1, 4, 1, 5])).map_err(|e| e.to_string())?;
    ensure((v - 1.0).abs() < 1e-15, || format!("{v}"))
}

fn fourth_order_cubic() -> Result<(), String> {
    // E[(N/n)³] = p³ + 3p²/n + p/n² under Poisson counts; the corrected
    // fourth-order scheme removes both terms.
    let cube = PhiSpec::polynomial(vec![0.0, 0.0, 0.0, 1.0], 2.0).map_err(|e| e.to_string())?;
    let s = SmoothedPhi::new(cube, 6, 0.01).map_err(|e| e.to_string())?;
    let (n, p) = (500.0, 0.3);
    let e = poisson_expectation(|j| bias_corrected4(&s, j, n, FourthOrderScheme::Corrected), n * p, TAIL_TOL)
        .map_err(|e| e.to_string())?;
    ensure((e - p * p * p).abs() <= 1e-9, || format!("bias {}", e - p * p * p))
}

fn lecam_example() -> Result<(), String> {
    let sq = PhiSpec::polynomial(vec![0.0, 0.0, 1.0], 2.0).map_err(|e| e.to_string())?;
    let r = lecam_two_point(&sq, 100, 3, 0.5, 0.6).map_err(|e| e.to_string())?;
    ensure((r.delta_theta - 0.035).abs() < 1e-12 && r.kl <= r.chi2_half, || format!("{r:?}"))
}
