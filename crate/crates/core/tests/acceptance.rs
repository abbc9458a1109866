//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use trisheet::maps::{eval_g, eval_g_preimage, eval_h_prime, g_preimages, Bank};
use trisheet::solver::{
    continuation_parameters, det2, forward_jacobian_det_analytic, forward_map, oracle_solve,
    solve_symmetric, uv_jacobian_det_analytic, uv_jacobian_fd,
};
use trisheet::verify::{cut_samples, max_table_deviation, reproduce_table1, table1, TABLE1_TOL};
use trisheet::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn solve(l: f64, m: f64) -> SurfaceSolution {
    continuation_solve(&IntervalPair::new(l, m).unwrap(), &SolverConfig::default()).unwrap()
}

fn rel(x: Complex64, y: Complex64) -> f64 {
    (x - y).norm() / y.norm().max(1.0)
}

fn random_nonreal(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    loop {
        let r = scale * 10f64.powf(rng.gen_range(-2.0..2.0));
        let w = Complex64::from_polar(
            r,
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        if w.im.abs() > 1e-6 * r {
            return w;
        }
    }
}

/// Surfaces used by the map-level criteria: a spread of shapes.
fn sample_surfaces() -> Vec<SurfaceSolution> {
    [
        (2.0, 5.0),
        (1.01, 100.0),
        (50.0, 1.1),
        (3.0, 3.0),
        (1.5, 1.5),
    ]
    .into_iter()
    .map(|(l, m)| solve(l, m))
    .collect()
}

fn table_reproduction() -> Outcome {
    let t = Instant::now();
    let rows = reproduce_table1(&SolverConfig::default()).expect("all rows solve");
    let dev = max_table_deviation(&rows);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        rows.len() == 36 && dev <= TABLE1_TOL,
        format!("36 rows, max |deviation| = {dev:.2e} (tol {TABLE1_TOL:e}), {secs:.2} s"),
    )
}

fn bijection_round_trip() -> Outcome {
    let t = Instant::now();
    // 20 x 20 grid mapped onto {alpha >= -0.98, a <= 0.98, a - alpha >= 0.02}.
    let n = 20;
    let grid: Vec<(f64, f64)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let alpha = -0.98 + 1.92 * i as f64 / (n - 1) as f64;
            let a = alpha + 0.02 + (0.96 - alpha) * j as f64 / (n - 1) as f64;
            (alpha, a)
        })
        .collect();
    let cfg = SolverConfig::default();
    let results: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&(alpha, a)| {
            let target = forward_map(alpha, a).unwrap();
            match continuation_parameters(&target, &cfg) {
                Ok((x, y)) => ((x - alpha).abs().max((y - a).abs()), alpha, a),
                Err(_) => (f64::INFINITY, alpha, a),
            }
        })
        .collect();
    let worst = results.iter().cloned().fold((0.0, 0.0, 0.0), |acc, r| {
        if r.0 > acc.0 || r.0.is_nan() {
            r
        } else {
            acc
        }
    });
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst.0 <= 1e-9,
        format!(
            "{} grid points, worst componentwise error {:.2e} at (alpha, a) = ({:.3}, {:.3}), {secs:.2} s",
            results.len(),
            worst.0,
            worst.1,
            worst.2
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let targets: Vec<IntervalPair> = (0..10)
        .map(|_| IntervalPair::new(rng.gen_range(1.1..20.0), rng.gen_range(1.1..20.0)).unwrap())
        .collect();
    let worst = targets
        .par_iter()
        .map(|t| {
            let (oa, oaa) = oracle_solve(t);
            let (alpha, a) = continuation_parameters(t, &SolverConfig::default()).unwrap();
            (oa - alpha).abs().max((oaa - a).abs())
        })
        .reduce(|| 0.0, f64::max);
    outcome(
        worst <= 1e-8,
        format!("10 targets, worst |oracle - continuation| = {worst:.2e}"),
    )
}

fn symmetric_closed_form() -> Outcome {
    let mut worst_a: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for l in [1.1, 2.0, 5.0, 50.0] {
        let a0 = solve_symmetric(l).unwrap();
        // Approach the symmetric target through the general (non-shortcut) path.
        let (alpha, a) =
            continuation_parameters(&IntervalPair::new(l, l).unwrap(), &SolverConfig::default())
                .unwrap();
        let general = {
            let near = IntervalPair::new(l * (1.0 + 1e-3), l).unwrap();
            let start = continuation_parameters(&near, &SolverConfig::default()).unwrap();
            trisheet::solver::newton_solve(
                &IntervalPair::new(l, l).unwrap(),
                start,
                &SolverConfig::default(),
            )
            .unwrap()
        };
        worst_a = worst_a.max((general.1 - a0).abs()).max((a - a0).abs());
        let sol = SurfaceSolution::from_parameters(
            IntervalPair::new(l, l).unwrap(),
            AffineChart::IDENTITY,
            alpha,
            a,
        )
        .unwrap();
        for x in [
            sol.crit.alpha + sol.crit.a,
            sol.crit.beta + sol.crit.b,
            sol.coeffs.h,
            sol.coeffs.coef_plus - sol.coeffs.coef_minus,
        ] {
            worst_rel = worst_rel.max(x.abs());
        }
    }
    outcome(
        worst_a <= 1e-9 && worst_rel <= 1e-10,
        format!("|a - biquartic root| = {worst_a:.2e}, symmetry relations {worst_rel:.2e}"),
    )
}

fn critical_values() -> Outcome {
    let mut sols: Vec<SurfaceSolution> = table1().iter().map(|r| solve(r.lambda, r.mu)).collect();
    sols.extend(sample_surfaces());
    let mut g_worst: f64 = 0.0;
    let mut d_worst: f64 = 0.0;
    for s in &sols {
        let g = |x: f64| eval_g(s, Complex64::new(x, 0.0)).unwrap().re;
        let c = s.crit;
        for e in [
            g(c.beta) + s.intervals.mu,
            g(c.alpha) + 1.0,
            g(c.a) - 1.0,
            g(c.b) - s.intervals.lambda,
        ] {
            g_worst = g_worst.max(e.abs());
        }
        for x in c.as_array() {
            d_worst = d_worst.max(eval_h_prime(s, Complex64::new(x, 0.0)).unwrap().norm());
        }
    }
    outcome(
        g_worst <= 1e-9 && d_worst <= 1e-11,
        format!(
            "{} surfaces, |G - branch value| <= {g_worst:.2e}, |H'| <= {d_worst:.2e}",
            sols.len()
        ),
    )
}

fn normalization() -> Outcome {
    let mut lead: f64 = 0.0;
    let mut at_zero: f64 = 0.0;
    for s in sample_surfaces() {
        let m = SurfaceMaps::new(s);
        for (which, sheet) in [(Psi::One, Sheet::One), (Psi::Two, Sheet::Two)] {
            let head = m.extract_laurent(which, sheet, 2).unwrap();
            lead = lead.max((head.coeffs[0] - 1.0).norm());
        }
        for which in [Psi::One, Psi::Two] {
            let v = m
                .psi(which, SurfacePoint::infinity(Sheet::Zero))
                .unwrap()
                .finite()
                .unwrap();
            at_zero = at_zero.max(v.norm());
        }
    }
    outcome(
        lead <= 1e-6 && at_zero <= 1e-10,
        format!("|leading - 1| = {lead:.2e}, |psi(inf0)| = {at_zero:.2e}"),
    )
}

fn jacobian_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut all_negative = true;
    let mut n = 0;
    while n < 100 {
        let alpha: f64 = rng.gen_range(-0.95..0.95);
        let a: f64 = rng.gen_range(-0.95..0.95);
        if a - alpha < 0.05 {
            continue;
        }
        n += 1;
        let analytic = uv_jacobian_det_analytic(alpha, a);
        let fd = det2(&uv_jacobian_fd(alpha, a));
        worst = worst.max(((fd - analytic) / analytic).abs());
        all_negative &= forward_jacobian_det_analytic(alpha, a) < 0.0
            && det2(&trisheet::solver::forward_jacobian_fd(alpha, a)) < 0.0;
    }
    outcome(
        worst <= 1e-5 && all_negative,
        format!("100 points, relative error {worst:.2e}, det F' < 0 everywhere: {all_negative}"),
    )
}

fn symmetry_and_banks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut conj: f64 = 0.0;
    let mut bank: f64 = 0.0;
    for s in sample_surfaces() {
        let m = SurfaceMaps::new(s);
        let scale = s.intervals.lambda.max(s.intervals.mu);
        for _ in 0..200 {
            let w = random_nonreal(&mut rng, scale);
            let sheet = Sheet::ALL[rng.gen_range(0..3)];
            for which in [Psi::One, Psi::Two] {
                let x = m
                    .psi(which, SurfacePoint::new(w, sheet))
                    .unwrap()
                    .finite()
                    .unwrap();
                let y = m
                    .psi(which, SurfacePoint::new(w.conj(), sheet))
                    .unwrap()
                    .finite()
                    .unwrap();
                conj = conj.max(rel(y.conj(), x));
            }
        }
        for t in cut_samples(&s.intervals) {
            let pair = if t < 0.0 {
                [Sheet::Zero, Sheet::One]
            } else {
                [Sheet::One, Sheet::Two]
            };
            for which in [Psi::One, Psi::Two] {
                let at = |sh, b| {
                    m.psi(which, SurfacePoint::real(t, sh).with_bank(b))
                        .unwrap()
                        .finite()
                        .unwrap()
                };
                for sh in pair {
                    bank = bank.max(rel(at(sh, Bank::Lower).conj(), at(sh, Bank::Upper)));
                }
                bank = bank.max(rel(
                    at(pair[1], Bank::Upper).conj(),
                    at(pair[0], Bank::Upper),
                ));
                // Boundary values are limits from the corresponding half-plane.
                let eps = 1e-9 * t.abs();
                let near = m
                    .psi(which, SurfacePoint::new(Complex64::new(t, eps), pair[0]))
                    .unwrap()
                    .finite()
                    .unwrap();
                bank = bank.max(rel(near, at(pair[0], Bank::Upper)) * 1e-3);
            }
        }
    }
    outcome(
        conj <= 1e-11 && bank <= 1e-8,
        format!("1000 conjugate pairs: {conj:.2e}; 5 x 50 cut samples bank matching: {bank:.2e}"),
    )
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut misclassified = 0;
    let mut unmatched = 0;
    let surfaces = sample_surfaces();
    for s in &surfaces {
        let m = SurfaceMaps::new(*s);
        let scale = s.intervals.lambda.max(s.intervals.mu);
        for _ in 0..200 {
            let w = random_nonreal(&mut rng, scale);
            let roots = g_preimages(s, w).roots;
            let mut used = [false; 3];
            for sheet in Sheet::ALL {
                let pre = m.preimage(SurfacePoint::new(w, sheet)).unwrap().unwrap();
                worst = worst.max(rel(eval_g_preimage(s, &pre).unwrap(), w));
                let i = (0..3)
                    .filter(|&i| !used[i])
                    .min_by(|&i, &j| {
                        (roots[i] - pre.z)
                            .norm()
                            .total_cmp(&(roots[j] - pre.z).norm())
                    })
                    .unwrap();
                if (roots[i] - pre.z).norm() > 1e-8 * pre.z.norm().max(1.0) {
                    unmatched += 1;
                }
                used[i] = true;
            }
            // Independent classification by winding numbers alone.
            let a = m.classify(w).unwrap();
            let b = m.classify_by_regions(w).unwrap();
            if a != b {
                misclassified += 1;
            }
        }
        // Real inputs against the interval table.
        let c = s.crit;
        let (lam, mu) = (s.intervals.lambda, s.intervals.mu);
        for k in 0..200 {
            let w = -3.0 * mu - 3.0 + (3.0 * lam + 3.0 * mu + 6.0) * (k as f64 + 0.37) / 200.0;
            if !(w < -mu || (-1.0 < w && w < 1.0) || w > lam) {
                continue;
            }
            for sheet in Sheet::ALL {
                let z = m
                    .invert_g(SurfacePoint::real(w, sheet))
                    .unwrap()
                    .finite()
                    .unwrap();
                let x = z.re;
                let ok = z.im == 0.0
                    && match sheet {
                        Sheet::One => x <= c.beta || (c.alpha <= x && x <= c.a) || x >= c.b,
                        Sheet::Zero => c.beta <= x && x <= c.alpha && x != -1.0,
                        Sheet::Two => c.a <= x && x <= c.b && x != 1.0,
                    };
                if !ok {
                    misclassified += 1;
                }
                worst = worst.max(
                    rel(eval_g(s, z).unwrap(), Complex64::new(w, 0.0)).min(
                        m.preimage(SurfacePoint::real(w, sheet))
                            .unwrap()
                            .map(|p| rel(eval_g_preimage(s, &p).unwrap(), Complex64::new(w, 0.0)))
                            .unwrap(),
                    ),
                );
            }
        }
    }
    outcome(
        worst <= 1e-10 && misclassified == 0 && unmatched == 0,
        format!(
            "{} surfaces x 200 points x 3 sheets: residual {worst:.2e}, misclassified {misclassified}, unmatched roots {unmatched}",
            surfaces.len()
        ),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("1 table reproduction", table_reproduction),
        ("2 bijection round trip", bijection_round_trip),
        ("3 oracle equivalence", oracle_equivalence),
        ("4 symmetric closed form", symmetric_closed_form),
        ("5 critical values", critical_values),
        ("6 normalization", normalization),
        ("7 jacobian identity", jacobian_identity),
        ("8 symmetry and banks", symmetry_and_banks),
        ("9 inverse round trip", round_trip),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failed += 1;
        }
        println!("{tag} criterion {name}: {}", o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
