//! Solving the two-equation polynomial system for `(alpha, a)`.
//!
//! The unknowns live in the open triangle `-1 < alpha < a < 1`; the forward
//! map sends that triangle bijectively onto `{lambda > 1, mu > 1}`. The
//! solver anchors at the symmetric case `lambda = mu` (closed form) and walks
//! to the requested target with damped Newton steps.

use thiserror::Error;

use crate::surface::{in_open_triangle, AffineChart, IntervalPair, SurfaceError, SurfaceSolution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("Newton did not converge at continuation step {step} of {n_steps} (residual {residual:e}); try a larger --steps")]
    NoConvergence {
        step: usize,
        n_steps: usize,
        residual: f64,
    },
    #[error("Newton iterates left the open triangle at continuation step {step}")]
    LeftDomain { step: usize },
    #[error("singular Jacobian at (alpha, a) = ({alpha}, {a})")]
    SingularJacobian { alpha: f64, a: f64 },
    #[error("lambda must be at least 1 (got {0})")]
    InvalidSymmetricTarget(f64),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

/// Left-hand sides of the two equations; both vanish at the solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystResidual {
    pub r1: f64,
    pub r2: f64,
}

impl SystResidual {
    /// Max-norm after dividing by `max(1, (lambda + mu)^2)`.
    pub fn scaled_norm(&self, target: &IntervalPair) -> f64 {
        let s = residual_scale(target);
        (self.r1 / s).abs().max((self.r2 / s).abs())
    }
}

fn residual_scale(target: &IntervalPair) -> f64 {
    let sum = target.lambda + target.mu;
    (sum * sum).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Number of continuation subdivisions between anchor and target.
    pub n_steps: usize,
    /// Newton stops once [`zero_set_distance`] falls below this.
    pub sigma: f64,
    pub max_newton_iters: usize,
    /// Backtracking factor applied when a step does not reduce the residual.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_steps: 32,
            sigma: 1e-12,
            max_newton_iters: 50,
            damping: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.n_steps < 1 {
            return Err(SolverError::InvalidConfig("n_steps must be >= 1"));
        }
        if !(self.sigma > 0.0) {
            return Err(SolverError::InvalidConfig("sigma must be > 0"));
        }
        if self.max_newton_iters < 1 {
            return Err(SolverError::InvalidConfig("max_newton_iters must be >= 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolverError::InvalidConfig("damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// `u = lambda - mu`, `v = (lambda + mu)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UVPoint {
    pub u: f64,
    pub v: f64,
}

/// Root of `t^4 + (16 lambda^2 - 8) t^3 + 18 t^2 - 27` on `(0, 1]`, as
/// `a = sqrt(t)`. The quartic is increasing on `(0, 1)`, negative at 0 and
/// non-negative at 1, so bisection always converges.
pub fn solve_symmetric(lambda: f64) -> Result<f64, SolverError> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(SolverError::InvalidSymmetricTarget(lambda));
    }
    let c3 = 16.0 * lambda * lambda - 8.0;
    let quartic = |t: f64| (((t + c3) * t + 18.0) * t) * t - 27.0;
    if quartic(1.0) <= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if quartic(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).sqrt())
}

/// `(u, v)` as rational functions of `(alpha, a)`.
pub fn uv_of(alpha: f64, a: f64) -> UVPoint {
    let s = a + alpha;
    let p = a * alpha;
    let d = a - alpha;
    let d3 = d * d * d;
    let u = -2.0 * s * (3.0 - p - s) * (3.0 - p + s) / d3;
    let v = 4.0 * (3.0 + p).powi(3) * (1.0 - p) * (2.0 + s) * (2.0 - s) / (d3 * d3);
    UVPoint { u, v }
}

/// `(lambda, mu)` from `(alpha, a)` without any domain check.
pub fn forward_map_raw(alpha: f64, a: f64) -> (f64, f64) {
    let UVPoint { u, v } = uv_of(alpha, a);
    let root = v.sqrt();
    (0.5 * (u + root), 0.5 * (root - u))
}

/// The bijection from the open triangle onto `{lambda > 1, mu > 1}`.
pub fn forward_map(alpha: f64, a: f64) -> Result<IntervalPair, SolverError> {
    if !in_open_triangle(alpha, a) {
        return Err(SurfaceError::OutsideTriangle { alpha, a }.into());
    }
    let (lambda, mu) = forward_map_raw(alpha, a);
    Ok(IntervalPair::new(lambda, mu)?)
}

/// Closed forms of `v - (2 - u)^2` and `v - (2 + u)^2`.
///
/// The first vanishes on `a = 1` (image `lambda = 1`), the second on
/// `alpha = -1` (image `mu = 1`).
pub fn uv_identities(alpha: f64, a: f64) -> (f64, f64) {
    let d = a - alpha;
    let d6 = d.powi(6);
    let first = 16.0 * (a * a - 1.0) * (alpha * alpha + 2.0 * a * alpha - 3.0).powi(3) / d6;
    let second = 16.0 * (alpha * alpha - 1.0) * (a * a + 2.0 * a * alpha - 3.0).powi(3) / d6;
    (first, second)
}

/// Both equations evaluated exactly as polynomials in `(alpha, a)`.
pub fn syst_residual(alpha: f64, a: f64, target: &IntervalPair) -> SystResidual {
    let IntervalPair { lambda, mu } = *target;
    let s = a + alpha;
    let p = a * alpha;
    let d = a - alpha;
    let d3 = d * d * d;
    let r1 = 2.0 * s * (3.0 - p - s) * (3.0 - p + s) + (lambda - mu) * d3;
    let sum = lambda + mu;
    let r2 = sum * sum * d3 * d3 - 4.0 * (3.0 + p).powi(3) * (1.0 - p) * (2.0 + s) * (2.0 - s);
    SystResidual { r1, r2 }
}

fn fd_step(x: f64) -> f64 {
    1e-7_f64.max(1e-7 * x.abs())
}

/// Jacobian of the residual map, rows `(r1, r2)`, columns `(alpha, a)`,
/// differentiated exactly through `s = a + alpha`, `p = a alpha`, `d = a - alpha`.
pub fn syst_jacobian(
    alpha: f64,
    a: f64,
    target: &IntervalPair,
) -> Result<[[f64; 2]; 2], SolverError> {
    check_nonsingular(syst_jacobian_unchecked(alpha, a, target), alpha, a)
}

fn syst_jacobian_unchecked(alpha: f64, a: f64, target: &IntervalPair) -> [[f64; 2]; 2] {
    let IntervalPair { lambda, mu } = *target;
    let s = a + alpha;
    let p = a * alpha;
    let d = a - alpha;
    let sum = lambda + mu;
    let q = 3.0 - p;
    let w = 3.0 + p;
    let r1_s = 2.0 * q * q - 6.0 * s * s;
    let r1_p = -4.0 * s * q;
    let r1_d = 3.0 * (lambda - mu) * d * d;
    let r2_s = 8.0 * s * w.powi(3) * (1.0 - p);
    let r2_p = 16.0 * p * (4.0 - s * s) * w * w;
    let r2_d = 6.0 * sum * sum * d.powi(5);
    // d/d alpha: (s, p, d) -> (1, a, -1); d/d a: (1, alpha, 1).
    [
        [r1_s + a * r1_p - r1_d, r1_s + alpha * r1_p + r1_d],
        [r2_s + a * r2_p - r2_d, r2_s + alpha * r2_p + r2_d],
    ]
}

/// First-order distance from `(alpha, a)` to the zero set of each equation,
/// `|r_i| / |grad r_i|`, maximized over both. Invariant under rescaling of
/// either equation, so it keeps its meaning for any `(lambda, mu)`.
pub fn zero_set_distance(alpha: f64, a: f64, target: &IntervalPair) -> f64 {
    let r = syst_residual(alpha, a, target);
    let j = syst_jacobian_unchecked(alpha, a, target);
    let q = |r: f64, row: [f64; 2]| {
        let g = row[0].hypot(row[1]);
        if g > 0.0 {
            (r / g).abs()
        } else {
            r.abs()
        }
    };
    q(r.r1, j[0]).max(q(r.r2, j[1]))
}

/// Central-difference version of [`syst_jacobian`], for cross-checking.
pub fn syst_jacobian_fd(alpha: f64, a: f64, target: &IntervalPair) -> [[f64; 2]; 2] {
    let ha = fd_step(alpha);
    let hb = fd_step(a);
    let rp = syst_residual(alpha + ha, a, target);
    let rm = syst_residual(alpha - ha, a, target);
    let sp = syst_residual(alpha, a + hb, target);
    let sm = syst_residual(alpha, a - hb, target);
    [
        [(rp.r1 - rm.r1) / (2.0 * ha), (sp.r1 - sm.r1) / (2.0 * hb)],
        [(rp.r2 - rm.r2) / (2.0 * ha), (sp.r2 - sm.r2) / (2.0 * hb)],
    ]
}

fn check_nonsingular(j: [[f64; 2]; 2], alpha: f64, a: f64) -> Result<[[f64; 2]; 2], SolverError> {
    // Rows live on very different scales; compare against row norms.
    let n0 = j[0][0].hypot(j[0][1]);
    let n1 = j[1][0].hypot(j[1][1]);
    if !(det2(&j).abs() > 1e-14 * n0 * n1) {
        return Err(SolverError::SingularJacobian { alpha, a });
    }
    Ok(j)
}

pub fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// `det d(u, v)/d(a, alpha)` in closed form:
/// `-2^7 (a - alpha)^-10 (a^2 + 2 a alpha - 3)^2 (3 + a alpha)^2 (alpha^2 + 2 a alpha - 3)^2`.
pub fn uv_jacobian_det_analytic(alpha: f64, a: f64) -> f64 {
    let p = a * alpha;
    let f1 = a * a + 2.0 * p - 3.0;
    let f2 = 3.0 + p;
    let f3 = alpha * alpha + 2.0 * p - 3.0;
    -128.0 * (f1 * f2 * f3).powi(2) / (a - alpha).powi(10)
}

/// `det d(lambda, mu)/d(a, alpha) = det d(u, v)/d(a, alpha) / (4 sqrt(v))`.
pub fn forward_jacobian_det_analytic(alpha: f64, a: f64) -> f64 {
    uv_jacobian_det_analytic(alpha, a) / (4.0 * uv_of(alpha, a).v.sqrt())
}

/// Central-difference Jacobian of `(u, v)`, columns `(a, alpha)`.
pub fn uv_jacobian_fd(alpha: f64, a: f64) -> [[f64; 2]; 2] {
    let ha = fd_step(a);
    let hb = fd_step(alpha);
    let ap = uv_of(alpha, a + ha);
    let am = uv_of(alpha, a - ha);
    let bp = uv_of(alpha + hb, a);
    let bm = uv_of(alpha - hb, a);
    [
        [(ap.u - am.u) / (2.0 * ha), (bp.u - bm.u) / (2.0 * hb)],
        [(ap.v - am.v) / (2.0 * ha), (bp.v - bm.v) / (2.0 * hb)],
    ]
}

/// Central-difference Jacobian of `(lambda, mu)`, columns `(a, alpha)`.
pub fn forward_jacobian_fd(alpha: f64, a: f64) -> [[f64; 2]; 2] {
    let ha = fd_step(a);
    let hb = fd_step(alpha);
    let ap = forward_map_raw(alpha, a + ha);
    let am = forward_map_raw(alpha, a - ha);
    let bp = forward_map_raw(alpha + hb, a);
    let bm = forward_map_raw(alpha - hb, a);
    [
        [(ap.0 - am.0) / (2.0 * ha), (bp.0 - bm.0) / (2.0 * hb)],
        [(ap.1 - am.1) / (2.0 * ha), (bp.1 - bm.1) / (2.0 * hb)],
    ]
}

/// Damped Newton on the residual map, started at `start = (alpha, a)`.
///
/// Converged once [`zero_set_distance`] is below `cfg.sigma`, or once the full Newton step drops below 1e-14.
/// Steps that leave the open triangle are halved (up to 30 times); steps that
/// do not reduce the residual are shrunk by `cfg.damping`.
pub fn newton_solve(
    target: &IntervalPair,
    start: (f64, f64),
    cfg: &SolverConfig,
) -> Result<(f64, f64), SolverError> {
    newton_at_step(target, start, cfg, 0)
}

const MAX_DOMAIN_HALVINGS: usize = 30;
const MAX_BACKTRACKS: usize = 40;
const STEP_FLOOR: f64 = 1e-14;

fn newton_at_step(
    target: &IntervalPair,
    start: (f64, f64),
    cfg: &SolverConfig,
    step: usize,
) -> Result<(f64, f64), SolverError> {
    cfg.validate()?;
    let (mut alpha, mut a) = start;
    if !in_open_triangle(alpha, a) {
        return Err(SolverError::LeftDomain { step });
    }
    let mut res = zero_set_distance(alpha, a, target);
    for _ in 0..cfg.max_newton_iters {
        if res < cfg.sigma {
            return Ok(polish(target, (alpha, a)));
        }
        let r = syst_residual(alpha, a, target);
        let j = syst_jacobian(alpha, a, target)?;
        let det = det2(&j);
        let d_alpha = -(j[1][1] * r.r1 - j[0][1] * r.r2) / det;
        let d_a = -(-j[1][0] * r.r1 + j[0][0] * r.r2) / det;
        if d_alpha.abs().max(d_a.abs()) <= STEP_FLOOR {
            // The residual sits at its rounding floor; the iterate is within
            // one Newton step of the root.
            return Ok((alpha, a));
        }

        let mut t = 1.0;
        let mut halvings = 0;
        while !in_open_triangle(alpha + t * d_alpha, a + t * d_a) {
            halvings += 1;
            if halvings > MAX_DOMAIN_HALVINGS {
                return Err(SolverError::LeftDomain { step });
            }
            t *= 0.5;
        }

        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let (na, nb) = (alpha + t * d_alpha, a + t * d_a);
            let nres = zero_set_distance(na, nb, target);
            if nres < res {
                alpha = na;
                a = nb;
                res = nres;
                accepted = true;
                break;
            }
            t *= cfg.damping;
        }
        if !accepted {
            break;
        }
    }
    if res < cfg.sigma {
        Ok(polish(target, (alpha, a)))
    } else {
        Err(SolverError::NoConvergence {
            step,
            n_steps: cfg.n_steps,
            residual: res,
        })
    }
}

const POLISH_STEPS: usize = 6;

/// Undamped Newton steps past the residual test, until the step stops
/// shrinking. The scaled residual divides by `(lambda + mu)^2`, which for
/// large targets is met long before `(alpha, a)` is accurate to working
/// precision.
fn polish(target: &IntervalPair, start: (f64, f64)) -> (f64, f64) {
    let (mut alpha, mut a) = start;
    let mut last = f64::INFINITY;
    for _ in 0..POLISH_STEPS {
        let r = syst_residual(alpha, a, target);
        let Ok(j) = syst_jacobian(alpha, a, target) else {
            break;
        };
        let det = det2(&j);
        let d_alpha = -(j[1][1] * r.r1 - j[0][1] * r.r2) / det;
        let d_a = -(-j[1][0] * r.r1 + j[0][0] * r.r2) / det;
        let size = d_alpha.abs().max(d_a.abs());
        if !(size < 0.5 * last) || !in_open_triangle(alpha + d_alpha, a + d_a) {
            break;
        }
        alpha += d_alpha;
        a += d_a;
        last = size;
        if size <= 1e-16 {
            break;
        }
    }
    (alpha, a)
}

/// Solves for `(alpha, a)` by continuation from the symmetric anchor.
///
/// The anchor solves the symmetric problem at `(lambda + mu)/2`; the segment
/// from there to the target is split into `cfg.n_steps` equal pieces and each
/// Newton solve is seeded with the previous one's result.
pub fn continuation_parameters(
    target: &IntervalPair,
    cfg: &SolverConfig,
) -> Result<(f64, f64), SolverError> {
    cfg.validate()?;
    let mid = 0.5 * (target.lambda + target.mu);
    let a0 = solve_symmetric(mid)?;
    let mut current = (-a0, a0);
    if target.is_symmetric() {
        return Ok(current);
    }
    let n = cfg.n_steps;
    let at = |w: f64| {
        if w == 1.0 {
            *target
        } else {
            IntervalPair {
                lambda: (1.0 - w) * mid + w * target.lambda,
                mu: (1.0 - w) * mid + w * target.mu,
            }
        }
    };
    for k in 1..=n {
        let w0 = (k - 1) as f64 / n as f64;
        let w1 = k as f64 / n as f64;
        current = advance(&at, current, w0, w1, cfg, k, 0)?;
    }
    Ok(current)
}

const MAX_SUBDIVISIONS: usize = 12;

/// Newton solve at path parameter `w1` seeded from the solution at `w0`. A
/// failed solve is retried through the midpoint, recursively.
fn advance(
    at: &impl Fn(f64) -> IntervalPair,
    from: (f64, f64),
    w0: f64,
    w1: f64,
    cfg: &SolverConfig,
    step: usize,
    depth: usize,
) -> Result<(f64, f64), SolverError> {
    match newton_at_step(&at(w1), from, cfg, step) {
        Ok(x) => Ok(x),
        Err(SolverError::InvalidConfig(m)) => Err(SolverError::InvalidConfig(m)),
        Err(e) if depth >= MAX_SUBDIVISIONS => Err(e),
        Err(_) => {
            let wm = 0.5 * (w0 + w1);
            let mid = advance(at, from, w0, wm, cfg, step, depth + 1)?;
            advance(at, mid, wm, w1, cfg, step, depth + 1)
        }
    }
}

/// Full pipeline: continuation solve and coefficient assembly, in canonical
/// coordinates.
pub fn continuation_solve(
    target: &IntervalPair,
    cfg: &SolverConfig,
) -> Result<SurfaceSolution, SolverError> {
    continuation_solve_with_chart(target, AffineChart::IDENTITY, cfg)
}

pub fn continuation_solve_with_chart(
    target: &IntervalPair,
    chart: AffineChart,
    cfg: &SolverConfig,
) -> Result<SurfaceSolution, SolverError> {
    let (alpha, a) = continuation_parameters(target, cfg)?;
    Ok(SurfaceSolution::from_parameters(*target, chart, alpha, a)?)
}

const ORACLE_COARSE: usize = 400;
const ORACLE_FINE: usize = 41;
const ORACLE_DEPTH: usize = 24;
const ORACLE_SHRINK: f64 = 4.0;

fn oracle_objective(alpha: f64, a: f64, target: &IntervalPair) -> f64 {
    if !in_open_triangle(alpha, a) {
        return f64::INFINITY;
    }
    let (l, m) = forward_map_raw(alpha, a);
    let dl = (l - target.lambda) / target.lambda;
    let dm = (m - target.mu) / target.mu;
    let f = dl * dl + dm * dm;
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

/// Derivative-free solve by grid search with recursive refinement.
///
/// Independent of the Newton path: only the forward map is evaluated.
pub fn oracle_solve(target: &IntervalPair) -> (f64, f64) {
    let mut best = (0.0, 0.5, f64::INFINITY);
    let h = 2.0 / ORACLE_COARSE as f64;
    for i in 0..ORACLE_COARSE {
        let alpha = -1.0 + (i as f64 + 0.5) * h;
        for j in 0..ORACLE_COARSE {
            let a = -1.0 + (j as f64 + 0.5) * h;
            let f = oracle_objective(alpha, a, target);
            if f < best.2 {
                best = (alpha, a, f);
            }
        }
    }

    let mut half_width = h;
    for _ in 0..ORACLE_DEPTH {
        let (ca, cb, _) = best;
        let spacing = 2.0 * half_width / (ORACLE_FINE - 1) as f64;
        for i in 0..ORACLE_FINE {
            let alpha = ca - half_width + i as f64 * spacing;
            for j in 0..ORACLE_FINE {
                let a = cb - half_width + j as f64 * spacing;
                let f = oracle_objective(alpha, a, target);
                if f < best.2 {
                    best = (alpha, a, f);
                }
            }
        }
        half_width /= ORACLE_SHRINK;
    }
    (best.0, best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(l: f64, m: f64) -> IntervalPair {
        IntervalPair::new(l, m).unwrap()
    }

    /// Independent bisection directly on the biquartic in `a`.
    fn biquartic_bisect(lambda: f64) -> f64 {
        let f = |a: f64| {
            let a2 = a * a;
            a2.powi(4) + (16.0 * lambda * lambda - 8.0) * a2.powi(3) + 18.0 * a2 * a2 - 27.0
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if f(m) < 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn symmetric_at_one_is_one() {
        assert_eq!(solve_symmetric(1.0).unwrap(), 1.0);
    }

    #[test]
    fn symmetric_lambda_two_matches_bisection() {
        // Frozen from `biquartic_bisect(2.0)`, cross-checked at 30 digits.
        let expected = 0.8295646954658811;
        assert!((biquartic_bisect(2.0) - expected).abs() < 1e-15);
        assert!((solve_symmetric(2.0).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn symmetric_large_lambda_asymptote() {
        let lambda = 1e6;
        let a = solve_symmetric(lambda).unwrap();
        let asym = (27.0 / (16.0 * lambda * lambda)).powf(1.0 / 6.0);
        assert!(((a - asym) / asym).abs() < 0.01);
    }

    #[test]
    fn symmetric_is_monotone() {
        let mut last = 1.0;
        for l in [1.01, 1.5, 2.0, 5.0, 10.0, 100.0] {
            let a = solve_symmetric(l).unwrap();
            assert!(a < last);
            last = a;
        }
    }

    #[test]
    fn symmetric_rejects_lambda_below_one() {
        assert!(solve_symmetric(0.5).is_err());
        assert!(solve_symmetric(f64::NAN).is_err());
    }

    #[test]
    fn forward_map_symmetric_gives_equal_lengths() {
        let p = forward_map(-0.4, 0.4).unwrap();
        assert!((p.lambda - p.mu).abs() < 1e-12 * p.lambda);
        assert_eq!(uv_of(-0.4, 0.4).u, 0.0);
    }

    #[test]
    fn forward_map_table_first_row() {
        let p = forward_map(-0.97566543, 0.99756619).unwrap();
        assert!((p.lambda - 1.01).abs() < 1e-6);
        assert!((p.mu - 1.10).abs() < 1e-6);
    }

    #[test]
    fn forward_map_table_last_row() {
        let p = forward_map(-0.06912394, 0.44519539).unwrap();
        assert!((p.lambda - 50.0).abs() < 1e-5);
        assert!((p.mu - 100.0).abs() < 1e-5);
    }

    #[test]
    fn uv_identities_at_symmetry_and_boundary() {
        let (x, y) = uv_identities(-0.3, 0.3);
        assert!((x - y).abs() < 1e-12 * x.abs());
        let (near_one, _) = uv_identities(0.1, 1.0 - 1e-9);
        let (mid, _) = uv_identities(0.1, 0.5);
        assert!(near_one.abs() < 1e-6 * mid.abs());
    }

    #[test]
    fn residual_vanishes_on_symmetric_axis() {
        let r = syst_residual(-0.6, 0.6, &pair(3.0, 3.0));
        assert_eq!(r.r1, 0.0);
    }

    #[test]
    fn residual_small_at_table_row() {
        // Tabulated values carry 8 decimals; the residual reflects that rounding.
        let t = pair(10.0, 20.0);
        let r = syst_residual(-0.26791189, 0.61012964, &t);
        assert!(r.scaled_norm(&t) < 1e-7);
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let t = pair(3.0, 7.0);
        for (alpha, a) in [(-0.5, 0.5), (-0.9, 0.2), (0.1, 0.8), (-0.3, -0.1)] {
            let j = syst_jacobian(alpha, a, &t).unwrap();
            let f = syst_jacobian_fd(alpha, a, &t);
            for r in 0..2 {
                let scale = j[r][0].abs().max(j[r][1].abs());
                for c in 0..2 {
                    assert!((j[r][c] - f[r][c]).abs() < 1e-6 * scale, "{j:?} {f:?}");
                }
            }
        }
    }

    #[test]
    fn residual_growth_matches_jacobian_column() {
        let t = pair(1.5, 5.0);
        let (alpha, a) = continuation_parameters(&t, &SolverConfig::default()).unwrap();
        let j = syst_jacobian(alpha, a, &t).unwrap();
        let eps = 1e-3;
        let r = syst_residual(alpha, a + eps, &t);
        for (got, slope) in [(r.r1, j[0][1]), (r.r2, j[1][1])] {
            let rel = (got / eps - slope).abs() / slope.abs();
            assert!(rel < 0.05, "{got} {slope}");
        }
    }

    #[test]
    fn uv_determinant_at_half() {
        let want = -128.0 * 3.25f64.powi(4) * 2.75f64.powi(2);
        let got = uv_jacobian_det_analytic(-0.5, 0.5);
        assert!((got - want).abs() < 1e-12 * want.abs());
        let fd = det2(&uv_jacobian_fd(-0.5, 0.5));
        assert!(((fd - want) / want).abs() < 1e-5);
    }

    #[test]
    fn forward_determinant_negative_at_symmetric_point() {
        let fd = det2(&forward_jacobian_fd(-0.7, 0.7));
        assert!(fd.is_finite() && fd < 0.0);
        assert!(syst_jacobian(-0.7, 0.7, &pair(2.0, 2.0)).is_ok());
    }

    #[test]
    fn newton_from_exact_start_needs_no_iterations() {
        let (alpha, a) = (-0.2, 0.6);
        let (l, m) = forward_map_raw(alpha, a);
        let cfg = SolverConfig {
            max_newton_iters: 1,
            sigma: 1e-10,
            ..SolverConfig::default()
        };
        let got = newton_solve(&pair(l, m), (alpha, a), &cfg).unwrap();
        assert!((got.0 - alpha).abs() < 1e-12 && (got.1 - a).abs() < 1e-12);
    }

    #[test]
    fn newton_polishes_table_row() {
        let got =
            newton_solve(&pair(1.01, 1.10), (-0.975, 0.997), &SolverConfig::default()).unwrap();
        assert!((got.0 + 0.97566543).abs() < 5e-8);
        assert!((got.1 - 0.99756619).abs() < 5e-8);
    }

    #[test]
    fn newton_rejects_start_outside_triangle() {
        let err = newton_solve(&pair(2.0, 3.0), (0.5, 0.1), &SolverConfig::default());
        assert!(matches!(err, Err(SolverError::LeftDomain { .. })));
    }

    #[test]
    fn newton_reports_iteration_cap() {
        let cfg = SolverConfig {
            max_newton_iters: 1,
            ..SolverConfig::default()
        };
        let err = newton_solve(&pair(50.0, 100.0), (-0.9, 0.9), &cfg);
        assert!(matches!(err, Err(SolverError::NoConvergence { .. })));
    }

    #[test]
    fn continuation_table_last_row() {
        let sol = continuation_solve(&pair(50.0, 100.0), &SolverConfig::default()).unwrap();
        assert!((sol.crit.alpha + 0.06912394).abs() < 5e-9);
        assert!((sol.crit.a - 0.44519539).abs() < 5e-9);
    }

    #[test]
    fn continuation_symmetric_target_is_anchor() {
        let (alpha, a) =
            continuation_parameters(&pair(3.0, 3.0), &SolverConfig::default()).unwrap();
        let a0 = solve_symmetric(3.0).unwrap();
        assert_eq!((alpha, a), (-a0, a0));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SolverConfig {
            n_steps: 0,
            ..SolverConfig::default()
        };
        assert!(continuation_solve(&pair(2.0, 3.0), &cfg).is_err());
        let cfg = SolverConfig {
            damping: 1.5,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn oracle_symmetric_target() {
        let (alpha, a) = oracle_solve(&pair(4.0, 4.0));
        let a0 = solve_symmetric(4.0).unwrap();
        assert!((a - a0).abs() < 1e-8 && (alpha + a0).abs() < 1e-8);
    }

    #[test]
    fn oracle_table_row() {
        let (alpha, a) = oracle_solve(&pair(1.5, 5.0));
        assert!((alpha + 0.49858460).abs() < 5e-8);
        assert!((a - 0.93306652).abs() < 5e-8);
    }
}
