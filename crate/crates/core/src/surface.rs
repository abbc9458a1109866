//! Surface geometry: the canonical interval pair, the affine chart from user
//! intervals, the four real critical points and the map coefficients.

use serde::Deserialize;
use thiserror::Error;

use crate::numerics::{solve_quadratic, NumericsError};

/// Agreement required between the closed form of `H(a)` and direct
/// evaluation of `H` at `a`, relative to the magnitude of the summed terms.
pub const H_AT_A_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurfaceError {
    #[error("intervals must satisfy lambda > 1 and mu > 1 (got lambda={lambda}, mu={mu})")]
    InvalidIntervals { lambda: f64, mu: f64 },
    #[error("degenerate intervals [{0}, {1}] and [{2}, {3}]: need d1_left < d1_right < d2_left < d2_right")]
    DegenerateIntervals(f64, f64, f64, f64),
    #[error("(alpha, a) = ({alpha}, {a}) is outside the open triangle -1 < alpha < a < 1")]
    OutsideTriangle { alpha: f64, a: f64 },
    #[error("H(a) closed form {closed} disagrees with direct evaluation {direct}")]
    InconsistentCoefficients { closed: f64, direct: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// The canonical slits `[-mu, -1]` and `[1, lambda]`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct IntervalPair {
    pub lambda: f64,
    pub mu: f64,
}

impl IntervalPair {
    pub fn new(lambda: f64, mu: f64) -> Result<Self, SurfaceError> {
        if lambda > 1.0 && mu > 1.0 && lambda.is_finite() && mu.is_finite() {
            Ok(Self { lambda, mu })
        } else {
            Err(SurfaceError::InvalidIntervals { lambda, mu })
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.lambda == self.mu
    }

    /// The branch points `-mu, -1, 1, lambda` in increasing order.
    pub fn branch_points(&self) -> [f64; 4] {
        [-self.mu, -1.0, 1.0, self.lambda]
    }
}

/// Orientation-preserving affine map `t -> scale * t + shift` from canonical
/// coordinates to user coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct AffineChart {
    pub scale: f64,
    pub shift: f64,
}

impl AffineChart {
    pub const IDENTITY: Self = Self {
        scale: 1.0,
        shift: 0.0,
    };

    pub fn to_user(&self, t: f64) -> f64 {
        self.scale * t + self.shift
    }

    pub fn to_canonical(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }
}

impl Default for AffineChart {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Maps two ordered disjoint intervals onto canonical form.
///
/// The inner endpoints `d1_right` and `d2_left` go to `-1` and `1`.
pub fn normalize_intervals(
    d1_left: f64,
    d1_right: f64,
    d2_left: f64,
    d2_right: f64,
) -> Result<(IntervalPair, AffineChart), SurfaceError> {
    let ordered = d1_left < d1_right && d1_right < d2_left && d2_left < d2_right;
    let finite = [d1_left, d1_right, d2_left, d2_right]
        .iter()
        .all(|x| x.is_finite());
    if !ordered || !finite {
        return Err(SurfaceError::DegenerateIntervals(
            d1_left, d1_right, d2_left, d2_right,
        ));
    }
    let chart = AffineChart {
        scale: (d2_left - d1_right) / 2.0,
        shift: (d2_left + d1_right) / 2.0,
    };
    let lambda = chart.to_canonical(d2_right);
    let mu = -chart.to_canonical(d1_left);
    let pair = IntervalPair::new(lambda, mu)
        .map_err(|_| SurfaceError::DegenerateIntervals(d1_left, d1_right, d2_left, d2_right))?;
    Ok((pair, chart))
}

/// Critical points of `G`, ordered `beta < -1 < alpha < a < 1 < b`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct CriticalPoints {
    pub beta: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
}

impl CriticalPoints {
    pub fn is_ordered(&self) -> bool {
        self.beta < -1.0 && -1.0 < self.alpha && self.alpha < self.a && self.a < 1.0 && 1.0 < self.b
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.beta, self.alpha, self.a, self.b]
    }
}

/// `true` iff `-1 < alpha < a < 1`.
pub fn in_open_triangle(alpha: f64, a: f64) -> bool {
    -1.0 < alpha && alpha < a && a < 1.0
}

/// `(a - alpha)^2 / (1 - a alpha) - 3`, the product `beta * b`.
pub fn beta_b_product(alpha: f64, a: f64) -> f64 {
    let d = a - alpha;
    d * d / (1.0 - a * alpha) - 3.0
}

/// Recovers `beta < -1` and `b > 1` as the roots of
/// `x^2 + (a + alpha) x + beta*b = 0`.
pub fn derive_critical_points(alpha: f64, a: f64) -> Result<CriticalPoints, SurfaceError> {
    if !in_open_triangle(alpha, a) {
        return Err(SurfaceError::OutsideTriangle { alpha, a });
    }
    let roots = solve_quadratic(a + alpha, beta_b_product(alpha, a))?;
    Ok(CriticalPoints {
        beta: roots.lower,
        alpha,
        a,
        b: roots.upper,
    })
}

/// Coefficients of `H(z) = h + z + A z/(1 - z) + B z/(1 + z)` and the
/// normalizer `H(a)` with `G = H / H(a)`.
///
/// `A` and `B` are the double-pole coefficients in
/// `H'(z) = 1 + A/(z - 1)^2 + B/(z + 1)^2`; both are negative for every valid
/// surface.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct MapCoefficients {
    pub h: f64,
    #[serde(rename = "A")]
    pub coef_plus: f64,
    #[serde(rename = "B")]
    pub coef_minus: f64,
    #[serde(rename = "H_at_a")]
    pub h_at_a: f64,
}

/// `h = (a + alpha)(2 a alpha - (a - alpha)^2/(1 - a alpha)) / 4`.
pub fn h_closed_form(alpha: f64, a: f64) -> f64 {
    let d = a - alpha;
    0.25 * (a + alpha) * (2.0 * a * alpha - d * d / (1.0 - a * alpha))
}

/// `H(a) = (a - alpha)^3 / (4 (1 - a alpha))`.
pub fn h_at_a_closed_form(alpha: f64, a: f64) -> f64 {
    let d = a - alpha;
    d * d * d / (4.0 * (1.0 - a * alpha))
}

pub fn derive_coefficients(crit: &CriticalPoints) -> Result<MapCoefficients, SurfaceError> {
    let CriticalPoints { beta, alpha, a, b } = *crit;
    if !crit.is_ordered() {
        return Err(SurfaceError::OutsideTriangle { alpha, a });
    }
    let coef_plus = 0.25 * (1.0 - beta) * (1.0 - alpha) * (1.0 - a) * (1.0 - b);
    let coef_minus = 0.25 * (1.0 + beta) * (1.0 + alpha) * (1.0 + a) * (1.0 + b);
    let h = h_closed_form(alpha, a);
    let closed = h_at_a_closed_form(alpha, a);
    let terms = [h, a, coef_plus * a / (1.0 - a), coef_minus * a / (1.0 + a)];
    let direct: f64 = terms.iter().sum();
    // The sum cancels badly when a - alpha is small; judge it against its terms.
    let size = terms.iter().map(|t| t.abs()).sum::<f64>().max(closed.abs());
    if !((closed - direct).abs() <= H_AT_A_TOL * size) {
        return Err(SurfaceError::InconsistentCoefficients { closed, direct });
    }
    Ok(MapCoefficients {
        h,
        coef_plus,
        coef_minus,
        h_at_a: closed,
    })
}

/// Everything needed to evaluate the maps for one surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSolution {
    pub intervals: IntervalPair,
    pub chart: AffineChart,
    pub crit: CriticalPoints,
    pub coeffs: MapCoefficients,
}

impl SurfaceSolution {
    /// Assembles a solution from solved `(alpha, a)`.
    pub fn from_parameters(
        intervals: IntervalPair,
        chart: AffineChart,
        alpha: f64,
        a: f64,
    ) -> Result<Self, SurfaceError> {
        let crit = derive_critical_points(alpha, a)?;
        let coeffs = derive_coefficients(&crit)?;
        Ok(Self {
            intervals,
            chart,
            crit,
            coeffs,
        })
    }

    /// JSON object with every double printed to 17 significant digits.
    pub fn to_json(&self) -> String {
        let fields = self.named_values();
        let body: Vec<String> = fields
            .iter()
            .map(|(k, v)| format!("\"{k}\":{}", fmt_f64(*v)))
            .collect();
        format!("{{{}}}", body.join(","))
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct Flat {
            lambda: f64,
            mu: f64,
            scale: f64,
            shift: f64,
            beta: f64,
            alpha: f64,
            a: f64,
            b: f64,
            h: f64,
            #[serde(rename = "A")]
            coef_plus: f64,
            #[serde(rename = "B")]
            coef_minus: f64,
            #[serde(rename = "H_at_a")]
            h_at_a: f64,
        }
        let f: Flat = serde_json::from_str(s)?;
        Ok(Self {
            intervals: IntervalPair {
                lambda: f.lambda,
                mu: f.mu,
            },
            chart: AffineChart {
                scale: f.scale,
                shift: f.shift,
            },
            crit: CriticalPoints {
                beta: f.beta,
                alpha: f.alpha,
                a: f.a,
                b: f.b,
            },
            coeffs: MapCoefficients {
                h: f.h,
                coef_plus: f.coef_plus,
                coef_minus: f.coef_minus,
                h_at_a: f.h_at_a,
            },
        })
    }

    /// Field names and values in serialization order.
    pub fn named_values(&self) -> [(&'static str, f64); 12] {
        [
            ("lambda", self.intervals.lambda),
            ("mu", self.intervals.mu),
            ("scale", self.chart.scale),
            ("shift", self.chart.shift),
            ("beta", self.crit.beta),
            ("alpha", self.crit.alpha),
            ("a", self.crit.a),
            ("b", self.crit.b),
            ("h", self.coeffs.h),
            ("A", self.coeffs.coef_plus),
            ("B", self.coeffs.coef_minus),
            ("H_at_a", self.coeffs.h_at_a),
        ]
    }
}

/// Formats a double with 17 significant digits in a locale-independent,
/// JSON-compatible form. Non-finite values become `null`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}
