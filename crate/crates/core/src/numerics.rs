//! Scalar utilities and closed-form root solvers for quadratics and cubics.
//!
//! Every closed-form root is refined with a short Newton polish. Polishing
//! never makes a root worse: a step that raises the residual is rejected.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

/// Relative step size at which Newton polishing is considered converged.
pub const POLISH_TOL: f64 = 1e-13;
/// Newton iteration cap for polishing.
pub const POLISH_MAX_ITERS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("negative discriminant {discriminant:e} for x^2 + ({p})x + ({q})")]
    NegativeDiscriminant { p: f64, q: f64, discriminant: f64 },
    #[error("Newton polish did not converge from {start} after {iters} iterations")]
    NoConvergence { start: Complex64, iters: usize },
}

/// The two real roots of `x^2 + p x + q`, sorted ascending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticRoots {
    pub lower: f64,
    pub upper: f64,
}

/// Solves `x^2 + p x + q = 0` for real roots.
///
/// The larger-magnitude root is computed first and the smaller one is
/// recovered from the product `q`, which avoids cancellation when `p^2 >> 4q`.
pub fn solve_quadratic(p: f64, q: f64) -> Result<QuadraticRoots, NumericsError> {
    let discriminant = p * p - 4.0 * q;
    if discriminant < 0.0 || !discriminant.is_finite() {
        return Err(NumericsError::NegativeDiscriminant { p, q, discriminant });
    }
    let big = -0.5 * (p + p.signum() * discriminant.sqrt());
    let (x1, x2) = if big == 0.0 {
        (0.0, 0.0)
    } else {
        (big, q / big)
    };
    let x1 = polish_real_quadratic(p, q, x1);
    let x2 = polish_real_quadratic(p, q, x2);
    Ok(QuadraticRoots {
        lower: x1.min(x2),
        upper: x1.max(x2),
    })
}

fn polish_real_quadratic(p: f64, q: f64, mut x: f64) -> f64 {
    let f = |x: f64| (x + p) * x + q;
    let mut r = f(x).abs();
    for _ in 0..POLISH_MAX_ITERS {
        let d = 2.0 * x + p;
        if r == 0.0 || d == 0.0 {
            break;
        }
        let next = x - f(x) / d;
        let rn = f(next).abs();
        if rn >= r {
            break;
        }
        x = next;
        r = rn;
    }
    x
}

/// The three roots of a monic cubic, repeated according to multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoots {
    pub roots: [Complex64; 3],
}

impl CubicRoots {
    /// Roots whose imaginary part is exactly zero, sorted ascending.
    pub fn real_roots(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .roots
            .iter()
            .filter(|z| z.im == 0.0)
            .map(|z| z.re)
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn all_real(&self) -> bool {
        self.roots.iter().all(|z| z.im == 0.0)
    }
}

/// Evaluates a polynomial given by coefficients in descending degree order.
pub fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Polynomial value and derivative in one pass (descending coefficients).
fn horner_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs
        .iter()
        .fold((zero, zero), |(p, dp), &c| (p * z + c, dp * z + p))
}

/// Sum of `|c_k| |z|^k`: the natural magnitude against which a computed
/// residual at `z` should be compared.
pub fn residual_scale(coeffs: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs.iter().fold(0.0, |acc, c| acc * r + c.norm())
}

/// Newton-refines a root of the polynomial with descending coefficients
/// `poly_coeffs`, starting at `z0`.
///
/// Returns `NoConvergence` if the step size has not dropped below
/// [`POLISH_TOL`] (relative) within [`POLISH_MAX_ITERS`] steps, which is the
/// usual symptom of a multiple or near-multiple root.
pub fn polish_root(poly_coeffs: &[Complex64], z0: Complex64) -> Result<Complex64, NumericsError> {
    let mut z = z0;
    let (mut f, mut df) = horner_with_derivative(poly_coeffs, z);
    let mut r = f.norm();
    for _ in 0..POLISH_MAX_ITERS {
        if r == 0.0 {
            return Ok(z);
        }
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        let next = z - step;
        let (fn_, dfn) = horner_with_derivative(poly_coeffs, next);
        let rn = fn_.norm();
        if rn > r {
            // Rounding floor reached; the current iterate is as good as it gets.
            return if step.norm() <= 1e3 * POLISH_TOL * z.norm().max(1.0) {
                Ok(z)
            } else {
                Err(NumericsError::NoConvergence {
                    start: z0,
                    iters: POLISH_MAX_ITERS,
                })
            };
        }
        z = next;
        f = fn_;
        df = dfn;
        r = rn;
        if step.norm() <= POLISH_TOL * z.norm().max(1.0) {
            return Ok(z);
        }
    }
    Err(NumericsError::NoConvergence {
        start: z0,
        iters: POLISH_MAX_ITERS,
    })
}

/// Roots of `z^3 + c2 z^2 + c1 z + c0`.
///
/// Real coefficients take a branch-stable real path: the trigonometric form
/// when there are three real roots and Cardano with a real cube root
/// otherwise, so complex pairs come out as exact conjugates. Complex
/// coefficients use Cardano with principal branches. All roots are polished.
pub fn solve_cubic_monic(c2: Complex64, c1: Complex64, c0: Complex64) -> CubicRoots {
    let roots = if c2.im == 0.0 && c1.im == 0.0 && c0.im == 0.0 {
        real_cubic(c2.re, c1.re, c0.re)
    } else {
        complex_cubic(c2, c1, c0)
    };
    CubicRoots { roots }
}

fn real_cubic(c2: f64, c1: f64, c0: f64) -> [Complex64; 3] {
    let shift = c2 / 3.0;
    // Depressed cubic t^3 + p t + q with z = t - c2/3.
    let p = c1 - c2 * shift;
    let q = (2.0 * shift * shift - c1) * shift + c0;
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    let coeffs = [
        Complex64::new(1.0, 0.0),
        Complex64::new(c2, 0.0),
        Complex64::new(c1, 0.0),
        Complex64::new(c0, 0.0),
    ];
    let polish_real = |x: f64| -> f64 {
        match polish_root(&coeffs, Complex64::new(x, 0.0)) {
            Ok(z) => z.re,
            Err(_) => x,
        }
    };

    if disc <= 0.0 && p < 0.0 {
        let m = (-third_p).sqrt();
        let cos_arg = (-half_q / (m * m * m)).clamp(-1.0, 1.0);
        let theta = cos_arg.acos() / 3.0;
        let mut xs = [0.0; 3];
        for (k, x) in xs.iter_mut().enumerate() {
            let t = 2.0 * m * (theta - 2.0 * PI * k as f64 / 3.0).cos();
            *x = polish_real(t - shift);
        }
        xs.sort_by(f64::total_cmp);
        return xs.map(|x| Complex64::new(x, 0.0));
    }

    if p == 0.0 && q == 0.0 {
        let x = -shift;
        return [Complex64::new(x, 0.0); 3];
    }

    // One real root; pick the sign that avoids cancellation.
    let s = disc.max(0.0).sqrt();
    let u = (-half_q - half_q.signum() * s).cbrt();
    let v = if u == 0.0 { 0.0 } else { -third_p / u };
    let x = polish_real(u + v - shift);

    // Deflate: z^3 + c2 z^2 + c1 z + c0 = (z - x)(z^2 + e1 z + e0).
    let e1 = c2 + x;
    let e0 = if x.abs() > 1.0 && c0 != 0.0 {
        -c0 / x
    } else {
        c1 + x * e1
    };
    let re = -0.5 * e1;
    let im2 = e0 - re * re;
    if im2 <= 0.0 {
        // Numerically a real double root: keep the pair real.
        let d = (-im2).sqrt();
        let mut xs = [x, polish_real(re - d), polish_real(re + d)];
        xs.sort_by(f64::total_cmp);
        return xs.map(|x| Complex64::new(x, 0.0));
    }
    let mut upper = Complex64::new(re, im2.sqrt());
    if let Ok(z) = polish_root(&coeffs, upper) {
        if z.im > 0.0 {
            upper = z;
        }
    }
    [Complex64::new(x, 0.0), upper, upper.conj()]
}

fn complex_cubic(c2: Complex64, c1: Complex64, c0: Complex64) -> [Complex64; 3] {
    let shift = c2 / 3.0;
    let p = c1 - c2 * shift;
    let q = (shift * shift * 2.0 - c1) * shift + c0;
    let half_q = q * 0.5;
    let third_p = p / 3.0;
    let s = (half_q * half_q + third_p * third_p * third_p).sqrt();
    let cand1 = -half_q + s;
    let cand2 = -half_q - s;
    let big = if cand1.norm() >= cand2.norm() {
        cand1
    } else {
        cand2
    };
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);

    let ts: [Complex64; 3] = if big.norm() == 0.0 {
        [Complex64::new(0.0, 0.0); 3]
    } else {
        let u = big.powf(1.0 / 3.0);
        let mut out = [Complex64::new(0.0, 0.0); 3];
        let mut uk = u;
        for t in out.iter_mut() {
            *t = uk - third_p / uk;
            uk *= omega;
        }
        out
    };

    let coeffs = [Complex64::new(1.0, 0.0), c2, c1, c0];
    ts.map(|t| {
        let z = t - shift;
        polish_root(&coeffs, z).unwrap_or(z)
    })
}
