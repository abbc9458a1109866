//! Invariant suite for a solved surface and regression against the embedded
//! table of published critical points.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::maps::{
    eval_g, eval_g_preimage, eval_h, eval_h_prime, eval_h_prime_factored, g_preimages, Bank,
    Extended, Psi, Sheet, SurfaceMaps, SurfacePoint,
};
use crate::solver::{
    continuation_solve, forward_map_raw, syst_residual, SolverConfig, SolverError,
};
use crate::surface::{
    beta_b_product, h_at_a_closed_form, IntervalPair, SurfaceError, SurfaceSolution,
};

const TABLE1_CSV: &str = include_str!("../data/table1.csv");
const TABLE1_SHA256: &str = "88bcd6f3ad23b448736f4b829f7e2ce419649f6cbe105747cf5d37255b7b6b9a";

/// Maximum absolute deviation allowed between computed and tabulated values.
pub const TABLE1_TOL: f64 = 5e-7;

const SUITE_SEED: u64 = 0x7215_4ee7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table1Row {
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
}

impl Table1Row {
    pub fn critical(&self) -> [f64; 4] {
        [self.beta, self.alpha, self.a, self.b]
    }

    pub fn max_abs_deviation(&self, other: &Table1Row) -> f64 {
        self.critical()
            .iter()
            .zip(other.critical())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn from_solution(sol: &SurfaceSolution) -> Self {
        Self {
            lambda: sol.intervals.lambda,
            mu: sol.intervals.mu,
            beta: sol.crit.beta,
            alpha: sol.crit.alpha,
            a: sol.crit.a,
            b: sol.crit.b,
        }
    }
}

/// The 36 published rows, after checking the embedded file's digest.
pub fn table1() -> Vec<Table1Row> {
    let digest = Sha256::digest(TABLE1_CSV.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, TABLE1_SHA256, "embedded table data is corrupted");
    TABLE1_CSV
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse().expect("numeric table entry"))
                .collect();
            Table1Row {
                lambda: v[0],
                mu: v[1],
                beta: v[2],
                alpha: v[3],
                a: v[4],
                b: v[5],
            }
        })
        .collect()
}

#[derive(Debug, Error)]
#[error("solving (lambda, mu) = ({lambda}, {mu}) failed: {source}")]
pub struct TableError {
    pub lambda: f64,
    pub mu: f64,
    #[source]
    pub source: SolverError,
}

/// Solves every tabulated `(lambda, mu)` in parallel; pairs are
/// `(golden, computed)` in table order.
pub fn reproduce_table1(cfg: &SolverConfig) -> Result<Vec<(Table1Row, Table1Row)>, TableError> {
    table1()
        .into_par_iter()
        .map(|row| {
            let err = |source| TableError {
                lambda: row.lambda,
                mu: row.mu,
                source,
            };
            let pair = IntervalPair::new(row.lambda, row.mu).map_err(|e| err(e.into()))?;
            let sol = continuation_solve(&pair, cfg).map_err(err)?;
            Ok((row, Table1Row::from_solution(&sol)))
        })
        .collect()
}

pub fn max_table_deviation(rows: &[(Table1Row, Table1Row)]) -> f64 {
    rows.iter()
        .map(|(g, c)| g.max_abs_deviation(c))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub worst_residual: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: &'static str, worst_residual: f64, tolerance: f64) -> Self {
        Self {
            name,
            passed: worst_residual <= tolerance,
            worst_residual,
            tolerance,
        }
    }

    fn failed(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            passed: false,
            worst_residual: f64::INFINITY,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            checks: &'a [Check],
            all_passed: bool,
        }
        serde_json::to_string(&Out {
            checks: &self.checks,
            all_passed: self.all_passed(),
        })
        .expect("report serializes")
    }
}

/// A copy of `sol` whose `a` is shifted by `delta` (towards the interior if
/// the shift would leave the triangle), with everything else re-derived but
/// the intervals kept. Used to exercise failing reports.
pub fn perturbed(sol: &SurfaceSolution, delta: f64) -> Result<SurfaceSolution, SurfaceError> {
    let mut a = sol.crit.a + delta;
    if a >= 1.0 || a <= sol.crit.alpha {
        a = sol.crit.a - delta;
    }
    SurfaceSolution::from_parameters(sol.intervals, sol.chart, sol.crit.alpha, a)
}

type CheckFn = fn(&SurfaceMaps) -> Check;

const CHECKS: &[CheckFn] = &[
    check_critical_values,
    check_critical_derivatives,
    check_h_prime_forms,
    check_vieta,
    check_beta_b,
    check_h_at_a,
    check_system,
    check_branch_regions,
    check_round_trip,
    check_real_classification,
    check_conjugation,
    check_real_branches,
    check_bank_matching,
    check_mobius,
    check_monotonicity,
    check_injectivity,
    check_laurent_leading,
    check_value_at_inf0,
];

const SYMMETRIC_CHECKS: &[CheckFn] = &[check_symmetric];

/// Runs every check on `sol`. Failures are reported, never raised; the
/// result depends only on `sol`.
pub fn run_invariant_suite(sol: &SurfaceSolution) -> VerificationReport {
    let maps = SurfaceMaps::new(*sol);
    // Trace once up front so the parallel checks share the curves.
    let _ = maps.regions();
    let mut fns: Vec<CheckFn> = CHECKS.to_vec();
    if sol.intervals.is_symmetric() {
        fns.extend_from_slice(SYMMETRIC_CHECKS);
    }
    let checks = fns.par_iter().map(|f| f(&maps)).collect();
    VerificationReport { checks }
}

fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SUITE_SEED ^ salt)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(x: Complex64, y: Complex64) -> f64 {
    (x - y).norm() / y.norm().max(1.0)
}

fn real_g(sol: &SurfaceSolution, x: f64) -> f64 {
    eval_g(sol, c(x, 0.0)).map(|v| v.re).unwrap_or(f64::NAN)
}

/// Random non-real `w` with modulus spread over several decades.
fn random_w(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    let r = scale * 10f64.powf(rng.gen_range(-2.0..2.0));
    let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let w = Complex64::from_polar(r, theta);
    if w.im.abs() < 1e-6 * r {
        c(w.re, 1e-3 * r)
    } else {
        w
    }
}

fn random_sheet(rng: &mut ChaCha8Rng) -> Sheet {
    Sheet::ALL[rng.gen_range(0..3)]
}

fn nan_max(acc: f64, x: f64) -> f64 {
    if x.is_nan() || acc.is_nan() {
        f64::NAN
    } else {
        acc.max(x)
    }
}

fn finite_or_nan(v: Result<Extended, crate::maps::MapError>) -> Complex64 {
    match v {
        Ok(Extended::Finite(z)) => z,
        _ => c(f64::NAN, f64::NAN),
    }
}

fn check_critical_values(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let cr = s.crit;
    let worst = [
        real_g(s, cr.beta) + s.intervals.mu,
        real_g(s, cr.alpha) + 1.0,
        real_g(s, cr.a) - 1.0,
        real_g(s, cr.b) - s.intervals.lambda,
    ]
    .iter()
    .map(|x| x.abs())
    .fold(0.0, nan_max);
    Check::new("critical_values", worst, 1e-9)
}

fn check_critical_derivatives(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let worst = s
        .crit
        .as_array()
        .iter()
        .map(|&x| {
            eval_h_prime(s, c(x, 0.0))
                .map(|v| v.norm())
                .unwrap_or(f64::NAN)
        })
        .fold(0.0, nan_max);
    Check::new("critical_derivatives", worst, 1e-11)
}

fn check_h_prime_forms(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let mut r = rng(1);
    let mut worst = 0.0;
    for _ in 0..200 {
        let z = random_w(&mut r, 1.0);
        let (Ok(x), Ok(y)) = (eval_h_prime(s, z), eval_h_prime_factored(s, z)) else {
            continue;
        };
        worst = nan_max(worst, (x - y).norm() / x.norm().max(y.norm()).max(1e-300));
    }
    Check::new("h_prime_forms", worst, 1e-11)
}

fn check_vieta(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let [b1, a1, a2, b2] = s.crit.as_array();
    let (ca, cb) = (s.coeffs.coef_plus, s.coeffs.coef_minus);
    let e1 = b1 + a1 + a2 + b2;
    let e2 = b1 * a1 + b1 * a2 + b1 * b2 + a1 * a2 + a1 * b2 + a2 * b2;
    let e3 = b1 * a1 * a2 + b1 * a1 * b2 + b1 * a2 * b2 + a1 * a2 * b2;
    let e4 = b1 * a1 * a2 * b2;
    let worst = [
        e1,
        e2 - (ca + cb - 2.0),
        e3 - 2.0 * (cb - ca),
        e4 - (1.0 + ca + cb),
    ]
    .iter()
    .map(|x| x.abs())
    .fold(0.0, nan_max);
    Check::new("vieta", worst, 1e-11)
}

fn check_beta_b(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let worst = (s.crit.beta * s.crit.b - beta_b_product(s.crit.alpha, s.crit.a)).abs();
    Check::new("beta_b_product", worst, 1e-11)
}

fn check_h_at_a(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let closed = h_at_a_closed_form(s.crit.alpha, s.crit.a);
    let k = &s.coeffs;
    let a = s.crit.a;
    let size = k.h.abs()
        + a.abs()
        + (k.coef_plus * a / (1.0 - a)).abs()
        + (k.coef_minus * a / (1.0 + a)).abs();
    let worst = eval_h(s, c(a, 0.0))
        .map(|v| (v.re - closed).abs() / size.max(closed.abs()))
        .unwrap_or(f64::NAN);
    let stored = (s.coeffs.h_at_a - closed).abs() / closed.abs();
    Check::new("h_at_a", nan_max(worst, stored), 1e-10)
}

/// Both equations hold and the forward map returns the target.
fn check_system(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let t = &s.intervals;
    let res = syst_residual(s.crit.alpha, s.crit.a, t).scaled_norm(t);
    let (l, mu) = forward_map_raw(s.crit.alpha, s.crit.a);
    let fwd = ((l - t.lambda) / t.lambda)
        .abs()
        .max(((mu - t.mu) / t.mu).abs());
    Check::new("system_residual", nan_max(res, fwd), 1e-9)
}

fn check_branch_regions(m: &SurfaceMaps) -> Check {
    let Ok(r) = m.regions() else {
        return Check::failed("branch_regions", 1e-10);
    };
    // Conjugation symmetry of each polyline as a point set.
    let asym = |poly: &[Complex64]| {
        poly.iter()
            .map(|z| crate::maps::distance_to_polyline(poly, z.conj()))
            .fold(0.0, nan_max)
    };
    Check::new(
        "branch_regions",
        asym(&r.curve0).max(asym(&r.curve2)),
        1e-10,
    )
}

fn check_round_trip(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let mut r = rng(2);
    let scale = s.intervals.lambda.max(s.intervals.mu);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let w = random_w(&mut r, scale);
        let all = g_preimages(s, w).roots;
        let mut got = Vec::with_capacity(3);
        for sheet in Sheet::ALL {
            let (z, g) = match m.preimage(SurfacePoint::new(w, sheet)) {
                Ok(Some(pre)) => (pre.z, eval_g_preimage(s, &pre).unwrap_or(c(f64::NAN, 0.0))),
                _ => (c(f64::NAN, 0.0), c(f64::NAN, 0.0)),
            };
            worst = nan_max(worst, rel(g, w));
            got.push(z);
        }
        // The three sheets must use each root of the cubic exactly once.
        let mut used = [false; 3];
        for z in &got {
            let nearest = (0..3)
                .filter(|&i| !used[i])
                .min_by(|&i, &j| (all[i] - z).norm().total_cmp(&(all[j] - z).norm()));
            match nearest {
                Some(i) if (all[i] - z).norm() <= 1e-8 * z.norm().max(1.0) => used[i] = true,
                _ => worst = f64::INFINITY,
            }
        }
    }
    Check::new("round_trip", worst, 1e-10)
}

/// Real `w` off the cuts: each preimage lies in its sheet's real intervals.
fn check_real_classification(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let cr = s.crit;
    let (lam, mu) = (s.intervals.lambda, s.intervals.mu);
    let in_sheet = |x: f64, sheet: Sheet| match sheet {
        Sheet::One => x <= cr.beta || (cr.alpha <= x && x <= cr.a) || x >= cr.b,
        Sheet::Zero => cr.beta <= x && x <= cr.alpha && x != -1.0,
        Sheet::Two => cr.a <= x && x <= cr.b && x != 1.0,
    };
    let mut r = rng(3);
    let mut misses = 0.0;
    let mut done = 0;
    while done < 300 {
        let w: f64 = r.gen_range(-3.0 * mu - 5.0..3.0 * lam + 5.0);
        let off_cut = w < -mu || (-1.0 < w && w < 1.0) || w > lam;
        if !off_cut || m.nearby_branch_point(c(w, 0.0)).is_some() {
            continue;
        }
        done += 1;
        for sheet in Sheet::ALL {
            match m.invert_g(SurfacePoint::real(w, sheet)) {
                Ok(Extended::Finite(z)) if z.im == 0.0 && in_sheet(z.re, sheet) => {}
                _ => misses += 1.0,
            }
        }
    }
    Check::new("real_axis_classification", misses, 0.0)
}

fn check_conjugation(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let mut r = rng(4);
    let scale = s.intervals.lambda.max(s.intervals.mu);
    let mut worst = 0.0;
    for _ in 0..1000 {
        let w = random_w(&mut r, scale);
        let sheet = random_sheet(&mut r);
        for which in [Psi::One, Psi::Two] {
            let x = finite_or_nan(m.psi(which, SurfacePoint::new(w, sheet)));
            let y = finite_or_nan(m.psi(which, SurfacePoint::new(w.conj(), sheet)));
            worst = nan_max(worst, rel(y.conj(), x));
        }
    }
    Check::new("conjugation_symmetry", worst, 1e-11)
}

fn check_real_branches(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let (lam, mu) = (s.intervals.lambda, s.intervals.mu);
    let mut r = rng(5);
    let mut worst = 0.0;
    let mut done = 0;
    while done < 300 {
        let w: f64 = r.gen_range(-3.0 * mu - 5.0..3.0 * lam + 5.0);
        let sheet = random_sheet(&mut r);
        let on_own_cut = (sheet.has_left_cut() && -mu <= w && w <= -1.0)
            || (sheet.has_right_cut() && 1.0 <= w && w <= lam);
        if on_own_cut || m.nearby_branch_point(c(w, 0.0)).is_some() {
            continue;
        }
        done += 1;
        for which in [Psi::One, Psi::Two] {
            let v = finite_or_nan(m.psi(which, SurfacePoint::real(w, sheet)));
            worst = nan_max(worst, v.im.abs());
        }
    }
    Check::new("real_branches", worst, 1e-10)
}

/// Sample points strictly inside both cuts, 25 per cut.
pub fn cut_samples(iv: &IntervalPair) -> Vec<f64> {
    let per = 25;
    let mut out = Vec::with_capacity(2 * per);
    for k in 0..per {
        let f = (k as f64 + 0.5) / per as f64;
        out.push(-iv.mu + (iv.mu - 1.0) * f);
        out.push(1.0 + (iv.lambda - 1.0) * f);
    }
    out
}

fn check_bank_matching(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let mut worst = 0.0;
    for t in cut_samples(&s.intervals) {
        let pair = if t < 0.0 {
            [Sheet::Zero, Sheet::One]
        } else {
            [Sheet::One, Sheet::Two]
        };
        for which in [Psi::One, Psi::Two] {
            let at = |sheet, bank| {
                finite_or_nan(m.psi(which, SurfacePoint::real(t, sheet).with_bank(bank)))
            };
            for sheet in pair {
                let up = at(sheet, Bank::Upper);
                let down = at(sheet, Bank::Lower);
                worst = nan_max(worst, rel(down.conj(), up));
            }
            let (k, l) = (pair[0], pair[1]);
            worst = nan_max(worst, rel(at(l, Bank::Upper).conj(), at(k, Bank::Upper)));
        }
    }
    Check::new("bank_matching", worst, 1e-8)
}

/// `psi2 = C psi1 / (psi1 - p)` with `p = psi1(inf2)` and one constant `C`.
///
/// Since `(psi1 - p)(psi2 - C) = p C`, at least one of this form and the
/// inverse `psi1 = p psi2 / (psi2 - C)` subtracts without cancellation; each
/// sample is tested in that form.
fn check_mobius(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let mut r = rng(6);
    let scale = s.intervals.lambda.max(s.intervals.mu);
    let Some(Extended::Finite(p)) = m.psi1(SurfacePoint::infinity(Sheet::Two)).ok() else {
        return Check::failed("mobius_relation", 1e-8);
    };
    let sample = |r: &mut ChaCha8Rng| {
        let pt = SurfacePoint::new(random_w(r, scale), random_sheet(r));
        (finite_or_nan(m.psi1(pt)), finite_or_nan(m.psi2(pt)))
    };
    let (x0, y0) = loop {
        let (x, y) = sample(&mut r);
        if (x - p).norm() >= p.norm() || x.is_nan() {
            break (x, y);
        }
    };
    let fit = y0 * (x0 - p) / x0;
    let mut worst = 0.0;
    for _ in 0..100 {
        let (x, y) = sample(&mut r);
        let err = if (x - p).norm() >= p.norm() {
            rel(fit * x / (x - p), y)
        } else {
            rel(p * y / (y - fit), x)
        };
        worst = nan_max(worst, err);
    }
    Check::new("mobius_relation", worst, 1e-8)
}

/// Sign of `H'` on dense real samples of each monotonicity interval.
fn check_monotonicity(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let cr = s.crit;
    let far = 10.0 * (s.intervals.lambda + s.intervals.mu);
    let pieces = [
        (-far, cr.beta, 1.0),
        (cr.beta, -1.0, -1.0),
        (-1.0, cr.alpha, -1.0),
        (cr.alpha, cr.a, 1.0),
        (cr.a, 1.0, -1.0),
        (1.0, cr.b, -1.0),
        (cr.b, far, 1.0),
    ];
    let n = 200;
    let mut violations = 0.0;
    for (lo, hi, sign) in pieces {
        for k in 1..n {
            let x = lo + (hi - lo) * k as f64 / n as f64;
            match eval_h_prime(s, c(x, 0.0)) {
                Ok(d) if d.re * sign > 0.0 => {}
                _ => violations += 1.0,
            }
        }
    }
    Check::new("monotonicity", violations, 0.0)
}

fn check_injectivity(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let mut r = rng(7);
    let scale = s.intervals.lambda.max(s.intervals.mu);
    let points: Vec<SurfacePoint> = (0..500)
        .map(|_| SurfacePoint::new(random_w(&mut r, scale), random_sheet(&mut r)))
        .collect();
    let images: Vec<Complex64> = points
        .iter()
        .map(|p| finite_or_nan(m.invert_g(*p)))
        .collect();
    let mut collisions = 0.0;
    for i in 0..points.len() {
        if images[i].is_nan() {
            collisions += 1.0;
        }
        for j in 0..i {
            if points[i] != points[j] && images[i] == images[j] {
                collisions += 1.0;
            }
        }
    }
    Check::new("injectivity", collisions, 0.0)
}

fn check_laurent_leading(m: &SurfaceMaps) -> Check {
    let lead = |which, sheet| {
        m.extract_laurent(which, sheet, 2)
            .map(|l| (l.coeffs[0] - 1.0).norm())
            .unwrap_or(f64::NAN)
    };
    let worst = nan_max(lead(Psi::One, Sheet::One), lead(Psi::Two, Sheet::Two));
    Check::new("laurent_leading", worst, 1e-6)
}

fn check_value_at_inf0(m: &SurfaceMaps) -> Check {
    let p = SurfacePoint::infinity(Sheet::Zero);
    let worst = nan_max(
        finite_or_nan(m.psi1(p)).norm(),
        finite_or_nan(m.psi2(p)).norm(),
    );
    Check::new("value_at_inf0", worst, 1e-10)
}

fn check_symmetric(m: &SurfaceMaps) -> Check {
    let s = m.solution();
    let cr = s.crit;
    let k = s.coeffs;
    let worst = [
        k.h,
        cr.alpha + cr.a,
        cr.beta + cr.b,
        k.coef_plus - k.coef_minus,
    ]
    .iter()
    .map(|x| x.abs())
    .fold(0.0, nan_max);
    Check::new("symmetric_case", worst, 1e-12)
}
