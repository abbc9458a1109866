//! Evaluation of `H`, `G = H / H(a)`, the three branches of `G^{-1}` and the
//! conformal representations `psi1`, `psi2` of the surface.
//!
//! A surface point is a base value `w` (finite or infinite) together with a
//! sheet index. Sheet 0 carries the cut `[-mu, -1]`, sheet 2 the cut
//! `[1, lambda]`, and sheet 1 both. In the `z`-plane the three sheets
//! correspond to the region bounded by `curve0` (around the pole `-1`), the
//! region bounded by `curve2` (around `+1`), and the unbounded remainder.

use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{solve_cubic_monic, CubicRoots};
use crate::surface::SurfaceSolution;

/// Distance from a branch point below which two preimages count as merged.
pub const BRANCH_POINT_TOL: f64 = 1e-12;
/// Default number of samples per arc when tracing the branch curves.
pub const DEFAULT_RESOLUTION: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("pole at z = {0}")]
    PoleAt(f64),
    #[error("w = {w} lies on a cut of sheet {sheet}; a bank (upper or lower) is required")]
    OnCutWithoutBank { w: f64, sheet: Sheet },
    #[error("w is within {BRANCH_POINT_TOL:e} of the branch point {branch_value}; sheets merge at z = {merged_root}")]
    NearBranchPoint { branch_value: f64, merged_root: f64 },
    #[error("branch curve tracing failed: {0}")]
    TraceFailure(String),
    #[error("could not assign cubic roots to sheets at w = {0}")]
    Classification(Complex64),
    #[error("resolution must be at least 64 (got {0})")]
    Resolution(usize),
    #[error("Laurent extraction supports at most 4 coefficients (got {0})")]
    LaurentOrder(usize),
}

/// A point of the extended complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(Complex64),
    Infinity,
}

impl Extended {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            Extended::Finite(z) => Some(z),
            Extended::Infinity => None,
        }
    }

    pub fn conj(self) -> Self {
        match self {
            Extended::Finite(z) => Extended::Finite(z.conj()),
            Extended::Infinity => Extended::Infinity,
        }
    }
}

impl From<Complex64> for Extended {
    fn from(z: Complex64) -> Self {
        Extended::Finite(z)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(z) => write!(f, "{z}"),
            Extended::Infinity => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sheet {
    Zero,
    One,
    Two,
}

impl Sheet {
    pub const ALL: [Sheet; 3] = [Sheet::Zero, Sheet::One, Sheet::Two];

    pub fn index(self) -> usize {
        match self {
            Sheet::Zero => 0,
            Sheet::One => 1,
            Sheet::Two => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Whether this sheet is slit along `[-mu, -1]`.
    pub fn has_left_cut(self) -> bool {
        self != Sheet::Two
    }

    /// Whether this sheet is slit along `[1, lambda]`.
    pub fn has_right_cut(self) -> bool {
        self != Sheet::Zero
    }
}

impl fmt::Display for Sheet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Edge of a slit: the limit from `Im w > 0` or from `Im w < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bank {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub w: Extended,
    pub sheet: Sheet,
    /// Only consulted for real `w` on one of the sheet's own cuts.
    pub bank: Option<Bank>,
}

impl SurfacePoint {
    pub fn new(w: Complex64, sheet: Sheet) -> Self {
        Self {
            w: Extended::Finite(w),
            sheet,
            bank: None,
        }
    }

    pub fn real(w: f64, sheet: Sheet) -> Self {
        Self::new(Complex64::new(w, 0.0), sheet)
    }

    pub fn infinity(sheet: Sheet) -> Self {
        Self {
            w: Extended::Infinity,
            sheet,
            bank: None,
        }
    }

    pub fn with_bank(mut self, bank: Bank) -> Self {
        self.bank = Some(bank);
        self
    }
}

/// Which conformal representation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Psi {
    One,
    Two,
}

/// `H(z) = h + z + A z/(1 - z) + B z/(1 + z)`.
pub fn eval_h(sol: &SurfaceSolution, z: Complex64) -> Result<Complex64, MapError> {
    check_pole(z)?;
    let k = &sol.coeffs;
    let one = Complex64::new(1.0, 0.0);
    Ok(k.h + z + k.coef_plus * z / (one - z) + k.coef_minus * z / (one + z))
}

/// `H'(z) = 1 + A/(z - 1)^2 + B/(z + 1)^2`.
pub fn eval_h_prime(sol: &SurfaceSolution, z: Complex64) -> Result<Complex64, MapError> {
    check_pole(z)?;
    let k = &sol.coeffs;
    let zm = z - 1.0;
    let zp = z + 1.0;
    Ok(1.0 + k.coef_plus / (zm * zm) + k.coef_minus / (zp * zp))
}

/// `H'(z) = (z - beta)(z - alpha)(z - a)(z - b) / (z^2 - 1)^2`.
pub fn eval_h_prime_factored(sol: &SurfaceSolution, z: Complex64) -> Result<Complex64, MapError> {
    check_pole(z)?;
    let c = &sol.crit;
    let q = z * z - 1.0;
    Ok((z - c.beta) * (z - c.alpha) * (z - c.a) * (z - c.b) / (q * q))
}

/// `G(z) = H(z) / H(a)`.
pub fn eval_g(sol: &SurfaceSolution, z: Complex64) -> Result<Complex64, MapError> {
    Ok(eval_h(sol, z)? / sol.coeffs.h_at_a)
}

fn check_pole(z: Complex64) -> Result<(), MapError> {
    if z.im == 0.0 && (z.re == 1.0 || z.re == -1.0) {
        Err(MapError::PoleAt(z.re))
    } else {
        Ok(())
    }
}

/// All three roots of `G(z) = w`, from the cubic
/// `z^3 - (H(a) w + A - B - h) z^2 - (1 + A + B) z + H(a) w - h = 0`.
pub fn g_preimages(sol: &SurfaceSolution, w: Complex64) -> CubicRoots {
    let k = &sol.coeffs;
    let wh = w * k.h_at_a;
    let c2 = -(wh + k.coef_plus - k.coef_minus - k.h);
    let c1 = Complex64::new(-(1.0 + k.coef_plus + k.coef_minus), 0.0);
    let c0 = wh - k.h;
    solve_cubic_monic(c2, c1, c0)
}

/// Closed polylines in the `z`-plane bounding the sheet-0 and sheet-2
/// regions. Neither polyline repeats its first vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchRegions {
    /// Through `beta` and `alpha`, enclosing `-1`.
    pub curve0: Vec<Complex64>,
    /// Through `a` and `b`, enclosing `+1`.
    pub curve2: Vec<Complex64>,
    pub resolution: usize,
}

impl BranchRegions {
    pub fn inside0(&self, z: Complex64) -> bool {
        winding_number(&self.curve0, z) != 0
    }

    pub fn inside2(&self, z: Complex64) -> bool {
        winding_number(&self.curve2, z) != 0
    }

    /// Distance from `z` to the nearer of the two curves.
    pub fn distance(&self, z: Complex64) -> f64 {
        distance_to_polyline(&self.curve0, z).min(distance_to_polyline(&self.curve2, z))
    }
}

/// Preimages under `G` of the two cuts, sampled `resolution` times per arc.
///
/// For `t` inside a cut the cubic `G(z) = t` has one real root and a
/// conjugate pair; the pair traces the curve, merging into the critical
/// points at the cut's endpoints. Samples are clustered towards the
/// endpoints where the pair separates like a square root.
pub fn trace_branch_curves(
    sol: &SurfaceSolution,
    resolution: usize,
) -> Result<BranchRegions, MapError> {
    if resolution < 64 {
        return Err(MapError::Resolution(resolution));
    }
    let crit = &sol.crit;
    let iv = &sol.intervals;
    let curve0 = trace_arc(sol, -iv.mu, -1.0, crit.beta, crit.alpha, resolution)?;
    let curve2 = trace_arc(sol, 1.0, iv.lambda, crit.a, crit.b, resolution)?;

    let w0 = winding_number(&curve0, Complex64::new(-1.0, 0.0));
    let w2 = winding_number(&curve2, Complex64::new(1.0, 0.0));
    if w0.abs() != 1 || w2.abs() != 1 {
        return Err(MapError::TraceFailure(format!(
            "winding numbers around the poles are {w0} and {w2}"
        )));
    }
    if polylines_intersect(&curve0, &curve2) {
        return Err(MapError::TraceFailure("the two curves cross".into()));
    }
    Ok(BranchRegions {
        curve0,
        curve2,
        resolution,
    })
}

fn trace_arc(
    sol: &SurfaceSolution,
    t_start: f64,
    t_end: f64,
    z_start: f64,
    z_end: f64,
    resolution: usize,
) -> Result<Vec<Complex64>, MapError> {
    let mut upper = Vec::with_capacity(resolution + 1);
    upper.push(Complex64::new(z_start, 0.0));
    for i in 1..resolution {
        let theta = std::f64::consts::PI * i as f64 / resolution as f64;
        let t = t_start + (t_end - t_start) * 0.5 * (1.0 - theta.cos());
        let roots = g_preimages(sol, Complex64::new(t, 0.0));
        let z = roots
            .roots
            .iter()
            .copied()
            .filter(|z| z.im > 0.0)
            .max_by(|x, y| x.im.total_cmp(&y.im))
            .ok_or_else(|| {
                MapError::TraceFailure(format!("no conjugate pair of preimages at t = {t}"))
            })?;
        upper.push(z);
    }
    upper.push(Complex64::new(z_end, 0.0));

    let max_seg = upper
        .windows(2)
        .map(|s| (s[1] - s[0]).norm())
        .fold(0.0, f64::max);
    if max_seg > 0.5 * (z_end - z_start).abs().max(1e-300) + 1.0 {
        return Err(MapError::TraceFailure(format!(
            "arc from {z_start} to {z_end} does not close (gap {max_seg})"
        )));
    }

    let mut curve = upper.clone();
    curve.extend(upper[1..resolution].iter().rev().map(|z| z.conj()));
    Ok(curve)
}

/// Winding number of the closed polyline around `p` (crossing count with
/// orientation).
pub fn winding_number(poly: &[Complex64], p: Complex64) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let side = (b.re - a.re) * (p.im - a.im) - (p.re - a.re) * (b.im - a.im);
        if a.im <= p.im {
            if b.im > p.im && side > 0.0 {
                wn += 1;
            }
        } else if b.im <= p.im && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

pub fn distance_to_polyline(poly: &[Complex64], p: Complex64) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| segment_distance(poly[i], poly[(i + 1) % n], p))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

fn polylines_intersect(p: &[Complex64], q: &[Complex64]) -> bool {
    let seg = |v: &[Complex64], i: usize| (v[i], v[(i + 1) % v.len()]);
    for i in 0..p.len() {
        let (a, b) = seg(p, i);
        for j in 0..q.len() {
            let (c, d) = seg(q, j);
            if segments_cross(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

fn segments_cross(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let orient = |p: Complex64, q: Complex64, r: Complex64| {
        (q.re - p.re) * (r.im - p.im) - (q.im - p.im) * (r.re - p.re)
    };
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// A finite preimage together with its offsets from the poles `-1` and `1`.
///
/// Near a pole `z` itself cannot resolve the offset (e.g. `1 - z ~ 1e-9`
/// keeps only seven significant digits), so the offset is refined separately
/// and carried alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preimage {
    pub z: Complex64,
    pub one_plus: Complex64,
    pub one_minus: Complex64,
}

impl Preimage {
    pub fn from_z(z: Complex64) -> Self {
        Self {
            z,
            one_plus: 1.0 + z,
            one_minus: 1.0 - z,
        }
    }
}

/// `G` evaluated from a preimage, using the stored pole offsets.
pub fn eval_g_preimage(sol: &SurfaceSolution, p: &Preimage) -> Result<Complex64, MapError> {
    let zero = Complex64::new(0.0, 0.0);
    if p.one_plus == zero {
        return Err(MapError::PoleAt(-1.0));
    }
    if p.one_minus == zero {
        return Err(MapError::PoleAt(1.0));
    }
    let k = &sol.coeffs;
    let h = k.h + p.z + k.coef_plus * p.z / p.one_minus + k.coef_minus * p.z / p.one_plus;
    Ok(h / k.h_at_a)
}

const POLE_REFINE_RADIUS: f64 = 0.25;

/// Newton on `H(z) = H(a) w` written in the offset `d` from the nearer pole,
/// which resolves `d` to full relative precision.
fn refine_near_pole(sol: &SurfaceSolution, w: Complex64, z: Complex64) -> Preimage {
    let k = &sol.coeffs;
    let target = w * k.h_at_a;
    let (pole, mut d) = if (z - 1.0).norm() < POLE_REFINE_RADIUS {
        (1.0, z - 1.0)
    } else if (z + 1.0).norm() < POLE_REFINE_RADIUS {
        (-1.0, z + 1.0)
    } else {
        return Preimage::from_z(z);
    };
    if d == Complex64::new(0.0, 0.0) {
        return Preimage::from_z(z);
    }
    // With z = pole + d and the pole's own term split off exactly.
    let f = |d: Complex64| -> (Complex64, Complex64) {
        if pole > 0.0 {
            let val = k.h + 1.0 - k.coef_plus + d - k.coef_plus / d
                + k.coef_minus * (1.0 + d) / (2.0 + d);
            let der = 1.0 + k.coef_plus / (d * d) + k.coef_minus / ((2.0 + d) * (2.0 + d));
            (val - target, der)
        } else {
            let val = k.h - 1.0 + k.coef_minus + d - k.coef_minus / d
                + k.coef_plus * (d - 1.0) / (2.0 - d);
            let der = 1.0 + k.coef_minus / (d * d) + k.coef_plus / ((2.0 - d) * (2.0 - d));
            (val - target, der)
        }
    };
    let (mut r, mut der) = f(d);
    for _ in 0..8 {
        if der.norm() == 0.0 {
            break;
        }
        let next = d - r / der;
        let (rn, dn) = f(next);
        if !(rn.norm() < r.norm()) {
            break;
        }
        let done = (next - d).norm() <= 1e-16 * d.norm();
        d = next;
        r = rn;
        der = dn;
        if done {
            break;
        }
    }
    let z = d + pole;
    if pole > 0.0 {
        Preimage {
            z,
            one_plus: 2.0 + d,
            one_minus: -d,
        }
    } else {
        Preimage {
            z,
            one_plus: d,
            one_minus: 2.0 - d,
        }
    }
}

/// Result of classifying the three roots of `G(z) = w`: `by_sheet[k]` is the
/// preimage on sheet `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetPreimages {
    pub by_sheet: [Complex64; 3],
}

/// Immutable evaluation context for one surface. The branch curves are traced
/// on first use and cached.
#[derive(Debug)]
pub struct SurfaceMaps {
    sol: SurfaceSolution,
    resolution: usize,
    regions: OnceLock<Result<BranchRegions, MapError>>,
}

impl SurfaceMaps {
    pub fn new(sol: SurfaceSolution) -> Self {
        Self::with_resolution(sol, DEFAULT_RESOLUTION)
    }

    pub fn with_resolution(sol: SurfaceSolution, resolution: usize) -> Self {
        Self {
            sol,
            resolution,
            regions: OnceLock::new(),
        }
    }

    pub fn solution(&self) -> &SurfaceSolution {
        &self.sol
    }

    pub fn regions(&self) -> Result<&BranchRegions, MapError> {
        self.regions
            .get_or_init(|| trace_branch_curves(&self.sol, self.resolution))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// The branch point within [`BRANCH_POINT_TOL`] of `w`, with the critical
    /// point over it and the two sheets that meet there.
    pub fn nearby_branch_point(&self, w: Complex64) -> Option<(f64, f64, [Sheet; 2])> {
        let iv = &self.sol.intervals;
        let c = &self.sol.crit;
        [
            (-iv.mu, c.beta, [Sheet::Zero, Sheet::One]),
            (-1.0, c.alpha, [Sheet::Zero, Sheet::One]),
            (1.0, c.a, [Sheet::One, Sheet::Two]),
            (iv.lambda, c.b, [Sheet::One, Sheet::Two]),
        ]
        .into_iter()
        .find(|(v, _, _)| (w - v).norm() < BRANCH_POINT_TOL)
    }

    /// Which cut (if any) the real value `t` lies strictly inside:
    /// `Some(false)` for `(-mu, -1)`, `Some(true)` for `(1, lambda)`.
    fn cut_of(&self, t: f64) -> Option<bool> {
        let iv = &self.sol.intervals;
        if -iv.mu < t && t < -1.0 {
            Some(false)
        } else if 1.0 < t && t < iv.lambda {
            Some(true)
        } else {
            None
        }
    }

    /// Preimage of a surface point in the `z`-plane.
    pub fn invert_g(&self, p: SurfacePoint) -> Result<Extended, MapError> {
        Ok(match self.preimage(p)? {
            Some(pre) => Extended::Finite(pre.z),
            None => Extended::Infinity,
        })
    }

    /// Like [`invert_g`](Self::invert_g), but keeping `1 + z` and `1 - z` to
    /// full relative precision. `None` is the point at infinity.
    pub fn preimage(&self, p: SurfacePoint) -> Result<Option<Preimage>, MapError> {
        let z = match self.raw_preimage(p)? {
            Extended::Infinity => return Ok(None),
            Extended::Finite(z) => z,
        };
        Ok(Some(match p.w {
            Extended::Finite(w) => refine_near_pole(&self.sol, w, z),
            Extended::Infinity => Preimage::from_z(z),
        }))
    }

    fn raw_preimage(&self, p: SurfacePoint) -> Result<Extended, MapError> {
        let w = match p.w {
            Extended::Infinity => {
                return Ok(match p.sheet {
                    Sheet::Zero => Extended::Finite(Complex64::new(-1.0, 0.0)),
                    Sheet::One => Extended::Infinity,
                    Sheet::Two => Extended::Finite(Complex64::new(1.0, 0.0)),
                })
            }
            Extended::Finite(w) => w,
        };

        if let Some((value, merged, sheets)) = self.nearby_branch_point(w) {
            if sheets.contains(&p.sheet) {
                return Err(MapError::NearBranchPoint {
                    branch_value: value,
                    merged_root: merged,
                });
            }
            let roots = g_preimages(&self.sol, w);
            let far = roots
                .roots
                .iter()
                .copied()
                .max_by(|x, y| (x - merged).norm().total_cmp(&(y - merged).norm()))
                .expect("three roots");
            return Ok(Extended::Finite(far));
        }

        if self.is_effectively_real(w) {
            let bank = p.bank.or(if w.im > 0.0 {
                Some(Bank::Upper)
            } else if w.im < 0.0 {
                Some(Bank::Lower)
            } else {
                None
            });
            return self.invert_real(w.re, p.sheet, bank).map(Extended::Finite);
        }

        let pre = self.classify(w)?;
        Ok(Extended::Finite(pre.by_sheet[p.sheet.index()]))
    }

    fn is_effectively_real(&self, w: Complex64) -> bool {
        w.im.abs() <= 1e-13 * w.norm().max(1.0)
    }

    fn invert_real(&self, t: f64, sheet: Sheet, bank: Option<Bank>) -> Result<Complex64, MapError> {
        let roots = g_preimages(&self.sol, Complex64::new(t, 0.0));
        match self.cut_of(t) {
            Some(right) => {
                let sheet_has_cut = if right {
                    sheet.has_right_cut()
                } else {
                    sheet.has_left_cut()
                };
                let real = roots
                    .roots
                    .iter()
                    .copied()
                    .min_by(|x, y| x.im.abs().total_cmp(&y.im.abs()))
                    .expect("three roots");
                if !sheet_has_cut {
                    return Ok(Complex64::new(real.re, 0.0));
                }
                let bank = bank.ok_or(MapError::OnCutWithoutBank { w: t, sheet })?;
                let upper = roots
                    .roots
                    .iter()
                    .copied()
                    .max_by(|x, y| x.im.total_cmp(&y.im))
                    .expect("three roots");
                // Sheet 1 preimages share the half-plane of w; the others lie
                // in the opposite one.
                let want_upper = (sheet == Sheet::One) == (bank == Bank::Upper);
                Ok(if want_upper { upper } else { upper.conj() })
            }
            None => {
                let pre = self.classify_real(t, &roots)?;
                Ok(pre.by_sheet[sheet.index()])
            }
        }
    }

    /// Real `t` outside both cuts: three real preimages whose left-to-right
    /// sheet order depends only on which gap `t` lies in.
    fn classify_real(&self, t: f64, roots: &CubicRoots) -> Result<SheetPreimages, MapError> {
        let mut xs: Vec<f64> = roots.roots.iter().map(|z| z.re).collect();
        xs.sort_by(f64::total_cmp);
        let order = if t < -self.sol.intervals.mu {
            [Sheet::One, Sheet::Zero, Sheet::Two]
        } else if t > self.sol.intervals.lambda {
            [Sheet::Zero, Sheet::Two, Sheet::One]
        } else if -1.0 < t && t < 1.0 {
            [Sheet::Zero, Sheet::One, Sheet::Two]
        } else {
            return Err(MapError::Classification(Complex64::new(t, 0.0)));
        };
        let mut by_sheet = [Complex64::new(0.0, 0.0); 3];
        for (x, s) in xs.iter().zip(order) {
            by_sheet[s.index()] = Complex64::new(*x, 0.0);
        }
        Ok(SheetPreimages { by_sheet })
    }

    /// Sheet assignment of the three preimages of a non-real `w`.
    ///
    /// The sheet-1 preimage is the unique root in the same half-plane as `w`.
    /// The other two are told apart with the traced curves; when the winding
    /// tests disagree, the root farther from both curves decides.
    pub fn classify(&self, w: Complex64) -> Result<SheetPreimages, MapError> {
        let roots = g_preimages(&self.sol, w).roots;
        let side = w.im.signum();
        let same: Vec<usize> = (0..3).filter(|&i| roots[i].im * side > 0.0).collect();
        if same.len() != 1 {
            return Err(MapError::Classification(w));
        }
        let one = same[0];
        let others: Vec<usize> = (0..3).filter(|&i| i != one).collect();
        let regions = self.regions()?;

        let (p, q) = (roots[others[0]], roots[others[1]]);
        let (p0, q0) = (regions.inside0(p), regions.inside0(q));
        let (p2, q2) = (regions.inside2(p), regions.inside2(q));
        if p0 && !p2 && q2 && !q0 {
            return Ok(SheetPreimages {
                by_sheet: [p, roots[one], q],
            });
        }
        if q0 && !q2 && p2 && !p0 {
            return Ok(SheetPreimages {
                by_sheet: [q, roots[one], p],
            });
        }
        // Ambiguous (a root on or next to a curve): trust the farther root.
        let (sure, unsure) = if regions.distance(p) >= regions.distance(q) {
            (p, q)
        } else {
            (q, p)
        };
        // Does `sure` belong to sheet 0? Tests on `sure` take precedence.
        let sure_is_zero = match (regions.inside0(sure), regions.inside2(sure)) {
            (true, _) => true,
            (false, true) => false,
            (false, false) => match (regions.inside0(unsure), regions.inside2(unsure)) {
                (true, _) => false,
                (false, true) => true,
                (false, false) => return Err(MapError::Classification(w)),
            },
        };
        let (zero, two) = if sure_is_zero {
            (sure, unsure)
        } else {
            (unsure, sure)
        };
        Ok(SheetPreimages {
            by_sheet: [zero, roots[one], two],
        })
    }

    /// Sheet assignment using the curves alone (winding tests for all three
    /// roots). Used to cross-check [`classify`](Self::classify).
    pub fn classify_by_regions(&self, w: Complex64) -> Result<SheetPreimages, MapError> {
        let roots = g_preimages(&self.sol, w).roots;
        let regions = self.regions()?;
        let mut slots: [Option<Complex64>; 3] = [None; 3];
        for z in roots {
            let s = if regions.inside0(z) {
                0
            } else if regions.inside2(z) {
                2
            } else {
                1
            };
            if slots[s].replace(z).is_some() {
                return Err(MapError::Classification(w));
            }
        }
        Ok(SheetPreimages {
            by_sheet: [slots[0].unwrap(), slots[1].unwrap(), slots[2].unwrap()],
        })
    }

    pub fn psi1(&self, p: SurfacePoint) -> Result<Extended, MapError> {
        Ok(match self.preimage(p)? {
            None => Extended::Infinity,
            Some(pre) => Extended::Finite(pre.one_plus / self.sol.coeffs.h_at_a),
        })
    }

    pub fn psi2(&self, p: SurfacePoint) -> Result<Extended, MapError> {
        let c2 = self.psi2_constant();
        Ok(match self.preimage(p)? {
            // (1 + z)/(1 - z) -> -1 as z -> infinity.
            None => Extended::Finite(Complex64::new(-c2, 0.0)),
            Some(pre) if pre.one_minus == Complex64::new(0.0, 0.0) => Extended::Infinity,
            Some(pre) => Extended::Finite(c2 * pre.one_plus / pre.one_minus),
        })
    }

    pub fn psi(&self, which: Psi, p: SurfacePoint) -> Result<Extended, MapError> {
        match which {
            Psi::One => self.psi1(p),
            Psi::Two => self.psi2(p),
        }
    }

    /// `A / (2 H(a))`.
    pub fn psi2_constant(&self) -> f64 {
        self.sol.coeffs.coef_plus / (2.0 * self.sol.coeffs.h_at_a)
    }

    /// Leading Laurent coefficients of `psi` at the infinity point of
    /// `sheet`, in powers of `1/w`.
    ///
    /// Each coefficient is an angular mean over 32 points on circles of
    /// radius `R`, extrapolated in `1/R` from three radii. The first two
    /// coefficients are accurate to about 1e-8; later ones lose roughly a
    /// factor `R` per order to cancellation.
    pub fn extract_laurent(
        &self,
        which: Psi,
        sheet: Sheet,
        k: usize,
    ) -> Result<LaurentHead, MapError> {
        if k > 4 {
            return Err(MapError::LaurentOrder(k));
        }
        let leading_power = match (which, sheet) {
            (Psi::One, Sheet::One) | (Psi::Two, Sheet::Two) => 1,
            _ => 0,
        };
        let floor = 20.0 * self.sol.intervals.lambda.max(self.sol.intervals.mu);
        let mut coeffs: Vec<Complex64> = Vec::with_capacity(k);
        for j in 0..k {
            let power = leading_power - j as i32;
            let mut estimates = [Complex64::new(0.0, 0.0); 3];
            let mut hs = [0.0; 3];
            for (slot, base) in [1e3, 1e4, 1e5].into_iter().enumerate() {
                let radius = (base / 10f64.powi(j as i32)).max(floor * 10f64.powi(slot as i32));
                hs[slot] = 1.0 / radius;
                estimates[slot] =
                    self.angular_mean(which, sheet, radius, leading_power, &coeffs, power)?;
            }
            coeffs.push(richardson_at_zero(&hs, &estimates));
        }
        Ok(LaurentHead {
            coeffs,
            leading_power,
            center: SurfacePoint::infinity(sheet),
        })
    }

    fn angular_mean(
        &self,
        which: Psi,
        sheet: Sheet,
        radius: f64,
        leading_power: i32,
        known: &[Complex64],
        power: i32,
    ) -> Result<Complex64, MapError> {
        const M: usize = 32;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..M {
            // Offset the angles so no sample lands on the real axis.
            let theta = 2.0 * std::f64::consts::PI * (m as f64 + 0.5) / M as f64;
            let w = Complex64::from_polar(radius, theta);
            let value = self
                .psi(which, SurfacePoint::new(w, sheet))?
                .finite()
                .ok_or(MapError::Classification(w))?;
            let mut rest = value;
            for (i, c) in known.iter().enumerate() {
                rest -= c * w.powi(leading_power - i as i32);
            }
            acc += rest * w.powi(-power);
        }
        Ok(acc / M as f64)
    }
}

/// Value at `h = 0` of the interpolating polynomial through `(hs[i], ys[i])`.
fn richardson_at_zero(hs: &[f64; 3], ys: &[Complex64; 3]) -> Complex64 {
    let mut out = Complex64::new(0.0, 0.0);
    for i in 0..3 {
        let mut weight = 1.0;
        for j in 0..3 {
            if i != j {
                weight *= hs[j] / (hs[j] - hs[i]);
            }
        }
        out += ys[i] * weight;
    }
    out
}

/// Leading Laurent coefficients at an infinity point: `coeffs[j]` multiplies
/// `w^(leading_power - j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentHead {
    pub coeffs: Vec<Complex64>,
    pub leading_power: i32,
    pub center: SurfacePoint,
}
