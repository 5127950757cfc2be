//! Solvers for the deterministic spectral limit of the Gram matrix
//! `S P S' `: the SIR fixed point `b`, the Stieltjes transform `m(z)` of the
//! limiting spectral distribution, its boundary values on the real axis, and
//! the support of the limit.
//!
//! Everything is driven by the inverse of the Stieltjes transform, which for
//! a discrete power profile `H = sum_i w_i delta_{t_i}` has the explicit form
//!
//! ```text
//! z(m) = -1/m + c * sum_i w_i t_i / (1 + t_i m).
//! ```
//!
//! `m(z)` is recovered as the branch of the inverse that maps the upper half
//! plane to itself; `b = m(-sigma2)` is real and positive.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::PowerProfile;
use crate::numeric::{poly_add, poly_mul};

/// Errors from the spectral solvers.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("fixed point did not converge: last iterate {last}, residual {residual}")]
    NonConvergence { last: f64, residual: f64 },
    #[error("z = {x} lies inside the support; use stieltjes_boundary for boundary values")]
    InsideSupport { x: f64 },
    #[error("solver did not converge at z = {z}")]
    ComplexNonConvergence { z: Complex64 },
    #[error("boundary continuation unstable at x = {x}: ladder values {values:?}")]
    LadderUnstable { x: f64, values: [Complex64; 3] },
    #[error("support edge scan failed: {0}")]
    EdgeScan(String),
}

/// Value of the Stieltjes transform and its derivative at one point.
#[derive(Debug, Clone, Copy)]
pub struct StieltjesPoint {
    pub z: Complex64,
    pub m: Complex64,
    pub m_prime: Complex64,
}

/// Support of the limiting spectral distribution: closed intervals plus the
/// mass of the atom at zero (present when the system is underloaded).
#[derive(Debug, Clone, PartialEq)]
pub struct SupportIntervals {
    /// Disjoint closed intervals `[lo, hi]`, ascending.
    pub intervals: Vec<[f64; 2]>,
    /// Weight of the spectral atom at zero, `max(0, 1 - c)` for profiles
    /// without an atom at power zero.
    pub point_mass_at_zero: f64,
}

impl SupportIntervals {
    /// Whether `x` lies in one of the closed support intervals.
    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| iv[0] <= x && x <= iv[1])
    }
}

/// The inverse spectral map for one `(c, H)` pair, reduced to the strictly
/// positive atoms: an atom at power zero only rescales the effective load.
#[derive(Debug, Clone)]
pub(crate) struct SpectralMap {
    /// Effective load `c * (1 - H({0}))`.
    pub c: f64,
    /// Positive atoms `(t, w)` with weights renormalized to sum to 1.
    pub atoms: Vec<(f64, f64)>,
}

impl SpectralMap {
    pub fn new(c: f64, h: &PowerProfile) -> Self {
        assert!(c > 0.0, "load ratio must be positive");
        match h.positive_part() {
            Some(pos) => SpectralMap { c: c * (1.0 - h.zero_mass()), atoms: pos.atoms().to_vec() },
            None => SpectralMap { c: 0.0, atoms: Vec::new() },
        }
    }

    /// `z(m) = -1/m + c int t/(1+tm) dH(t)`.
    pub fn z_of_m(&self, m: Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for &(t, w) in &self.atoms {
            s += w * t / (1.0 + t * m);
        }
        -1.0 / m + self.c * s
    }

    /// First derivative `z'(m) = 1/m^2 - c int t^2/(1+tm)^2 dH(t)`.
    pub fn z_prime(&self, m: Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for &(t, w) in &self.atoms {
            let d = 1.0 + t * m;
            s += w * t * t / (d * d);
        }
        1.0 / (m * m) - self.c * s
    }

    /// Second derivative of the inverse map.
    pub fn z_second(&self, m: Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for &(t, w) in &self.atoms {
            let d = 1.0 + t * m;
            s += w * t * t * t / (d * d * d);
        }
        -2.0 / (m * m * m) + 2.0 * self.c * s
    }

    /// Third derivative of the inverse map.
    pub fn z_third(&self, m: Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for &(t, w) in &self.atoms {
            let d = 1.0 + t * m;
            s += w * t.powi(4) / (d * d * d * d);
        }
        6.0 / m.powi(4) - 6.0 * self.c * s
    }

    /// Real-axis restriction of `z'`.
    pub fn z_prime_real(&self, m: f64) -> f64 {
        let mut s = 0.0;
        for &(t, w) in &self.atoms {
            let d = 1.0 + t * m;
            s += w * t * t / (d * d);
        }
        1.0 / (m * m) - self.c * s
    }

    /// Real-axis restriction of `z`.
    pub fn z_real(&self, m: f64) -> f64 {
        let mut s = 0.0;
        for &(t, w) in &self.atoms {
            s += w * t / (1.0 + t * m);
        }
        -1.0 / m + self.c * s
    }

    /// Poles of `z` on the negative real axis (`m = -1/t` per atom),
    /// ascending; the pole at `m = 0` is implicit.
    pub fn negative_poles(&self) -> Vec<f64> {
        let mut poles: Vec<f64> = self.atoms.iter().map(|&(t, _)| -1.0 / t).collect();
        poles.sort_by(f64::total_cmp);
        poles
    }

    /// Ascending real coefficients of the polynomial whose roots are the
    /// solutions of `z(m) + sigma2 = 0`, obtained by clearing denominators:
    ///
    /// ```text
    /// (sigma2 m - 1) prod_j (1 + t_j m) + c m sum_i w_i t_i prod_{j != i} (1 + t_j m) = 0
    /// ```
    pub fn resolvent_poly(&self, sigma2: f64) -> Vec<f64> {
        let mut prod = vec![1.0];
        for &(t, _) in &self.atoms {
            prod = poly_mul(&prod, &[1.0, t]);
        }
        // (sigma2 m - 1) * prod
        let mut poly = poly_mul(&[-1.0, sigma2], &prod);
        for (i, &(t, w)) in self.atoms.iter().enumerate() {
            let mut q = vec![1.0];
            for (j, &(tj, _)) in self.atoms.iter().enumerate() {
                if j != i {
                    q = poly_mul(&q, &[1.0, tj]);
                }
            }
            // + c w t m * q
            poly = poly_add(&poly, &poly_mul(&[0.0, self.c * w * t], &q));
        }
        poly
    }

    /// Newton solve of `m (z - c I(m)) + 1 = 0` from the seed `m0`.
    fn newton(&self, z: Complex64, m0: Complex64) -> Option<Complex64> {
        let mut m = m0;
        for _ in 0..200 {
            let mut i_val = Complex64::new(0.0, 0.0);
            let mut i2 = Complex64::new(0.0, 0.0);
            for &(t, w) in &self.atoms {
                let d = 1.0 + t * m;
                i_val += w * t / d;
                i2 += w * t * t / (d * d);
            }
            let g = m * (z - self.c * i_val) + 1.0;
            let gp = z - self.c * i_val + m * self.c * i2;
            if gp.norm() < 1e-300 {
                return None;
            }
            let step = g / gp;
            m -= step;
            if step.norm() <= 1e-15 * m.norm().max(1.0) {
                break;
            }
        }
        let denom = z - self.c * self.i_of_m(m);
        if denom.norm() < 1e-300 {
            return None;
        }
        let residual = (m + 1.0 / denom).norm();
        (residual <= 1e-10 && m.is_finite()).then_some(m)
    }

    fn i_of_m(&self, m: Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for &(t, w) in &self.atoms {
            s += w * t / (1.0 + t * m);
        }
        s
    }

    /// Solves for `m(z)` on the upper-half-plane branch by continuation:
    /// start high above the real axis where Newton from `-1/z` is safe, then
    /// walk the imaginary part down geometrically, reseeding Newton at every
    /// step. `z` must satisfy `Im z >= 0`.
    pub(crate) fn solve_upper(&self, z: Complex64) -> Result<Complex64, SpectralError> {
        debug_assert!(z.im >= 0.0);
        // Fast path: direct Newton, accepted only on the correct branch.
        if let Some(m) = self.newton(z, -1.0 / z) {
            if z.im > 0.0 && m.im > 0.0 {
                return Ok(m);
            }
            if z.im == 0.0 && m.im.abs() <= 1e-12 * m.norm() && self.off_support_real(z.re, m.re) {
                return Ok(m);
            }
        }
        let start = z.norm().max(1.0) * 2.0;
        let z0 = Complex64::new(z.re, start);
        let mut m = self
            .newton(z0, -1.0 / z0)
            .ok_or(SpectralError::ComplexNonConvergence { z })?;
        let mut eps = start;
        let target = z.im.max(0.0);
        while eps > target {
            eps = (eps / 2.0).max(target.max(1e-9));
            let zc = Complex64::new(z.re, eps);
            m = self
                .newton(zc, m)
                .ok_or(SpectralError::ComplexNonConvergence { z: zc })?;
            if eps <= target || (target == 0.0 && eps <= 1e-9) {
                break;
            }
        }
        if z.im > 0.0 {
            return Ok(m);
        }
        // Real target: the continuation limit is real exactly when z is off
        // the support.
        if m.im.abs() > 1e-5 * (1.0 + m.norm()) {
            return Err(SpectralError::InsideSupport { x: z.re });
        }
        let m_real = self
            .newton(Complex64::new(z.re, 0.0), Complex64::new(m.re, 0.0))
            .ok_or(SpectralError::ComplexNonConvergence { z })?;
        Ok(Complex64::new(m_real.re, 0.0))
    }

    /// Whether the real iterate `m` at real `z` sits on the off-support
    /// branch (real `m` with positive `z'`, so `z` is in the inverse range).
    fn off_support_real(&self, _x: f64, m: f64) -> bool {
        m.is_finite() && self.z_prime_real(m) > 0.0
    }
}

/// Solves `1/b = sigma2 + c int x dH(x)/(1 + x b)` for the unique positive
/// root: damped fixed-point iteration with a bisection fallback, then a
/// Newton polish. The residual of the returned value is at most `1e-12`.
pub fn solve_b(c: f64, h: &PowerProfile, sigma2: f64) -> Result<f64, SpectralError> {
    assert!(c > 0.0 && sigma2 > 0.0, "need c > 0 and sigma2 > 0");
    let residual = |b: f64| 1.0 / b - sigma2 - c * h.expect(|x| x / (1.0 + x * b));
    let step = |b: f64| 1.0 / (sigma2 + c * h.expect(|x| x / (1.0 + x * b)));

    let mut b = 1.0 / sigma2;
    let mut prev_delta = 0.0f64;
    let mut converged = false;
    for _ in 0..100_000 {
        let next = step(b);
        let delta = next - b;
        // The plain map alternates around the root; averaging damps it.
        b = if delta * prev_delta < 0.0 { 0.5 * (b + next) } else { next };
        prev_delta = delta;
        if delta.abs() <= 1e-13 * b.max(1e-300) {
            converged = true;
            break;
        }
    }
    if !converged {
        // Bisection on the monotone residual over (0, 1/sigma2].
        let mut lo = 1e-300;
        let mut hi = 1.0 / sigma2;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        b = 0.5 * (lo + hi);
    }
    // Newton polish drives the residual to machine level.
    for _ in 0..5 {
        let r = residual(b);
        let dr = -1.0 / (b * b) + c * h.expect(|x| x * x / (1.0 + x * b).powi(2));
        b -= r / dr;
    }
    let r = residual(b);
    if r.abs() > 1e-12 || !(b > 0.0) || b > 1.0 / sigma2 + 1e-12 {
        return Err(SpectralError::NonConvergence { last: b, residual: r });
    }
    Ok(b)
}

/// Evaluates the Stieltjes transform `m(z)` of the limiting spectral
/// distribution at `z`, together with `m'(z)` from the implicit derivative
/// of the inverse map: `m'(z) = 1 / (1/m^2 - c int t^2 dH/(1+tm)^2)`.
///
/// `z` may be complex off the real axis, or real off the support; a real `z`
/// inside the support is rejected (boundary values have their own entry
/// point, [`stieltjes_boundary`]).
pub fn stieltjes_m(z: Complex64, c: f64, h: &PowerProfile) -> Result<StieltjesPoint, SpectralError> {
    let spec = SpectralMap::new(c, h);
    if spec.c == 0.0 {
        // Point mass at zero: m(z) = -1/z exactly.
        let m = -1.0 / z;
        return Ok(StieltjesPoint { z, m, m_prime: 1.0 / (z * z) });
    }
    let m = if z.im >= 0.0 {
        spec.solve_upper(z)?
    } else {
        spec.solve_upper(z.conj())?.conj()
    };
    let m_prime = 1.0 / spec.z_prime(m);
    if z.im > 0.0 {
        debug_assert!(m.im > 0.0, "m must map the upper half plane to itself");
    }
    Ok(StieltjesPoint { z, m, m_prime })
}

/// Boundary value `m(x + i0)` on the real axis, computed by continuing the
/// upper-half-plane solution down an epsilon ladder (1e-3, 1e-5, 1e-7) with
/// Richardson extrapolation in epsilon. The two extrapolants must agree to
/// 1e-4 or the continuation is reported as unstable.
pub fn stieltjes_boundary(x: f64, c: f64, h: &PowerProfile) -> Result<Complex64, SpectralError> {
    let spec = SpectralMap::new(c, h);
    if spec.c == 0.0 {
        return Ok(Complex64::new(-1.0 / x, 0.0));
    }
    const LADDER: [f64; 3] = [1e-3, 1e-5, 1e-7];
    let mut values = [Complex64::new(0.0, 0.0); 3];
    for (i, &eps) in LADDER.iter().enumerate() {
        values[i] = spec.solve_upper(Complex64::new(x, eps))?;
    }
    let richardson = |e1: f64, m1: Complex64, e2: f64, m2: Complex64| (e1 * m2 - e2 * m1) / (e1 - e2);
    let r12 = richardson(LADDER[0], values[0], LADDER[1], values[1]);
    let r23 = richardson(LADDER[1], values[1], LADDER[2], values[2]);
    if (r12 - r23).norm() > 1e-4 {
        return Err(SpectralError::LadderUnstable { x, values });
    }
    Ok(Complex64::new(r23.re, r23.im.max(0.0)))
}

/// Computes the support of the limiting spectral distribution.
///
/// The edges are the critical values of the inverse map: real roots of
/// `z'(m) = 0` on each maximal interval avoiding the poles `m = -1/t` and
/// `m = 0`, mapped through `z` and paired in ascending order. At critical
/// load the lower edge degenerates to 0 and is supplied by parity.
pub fn support_of_f(c: f64, h: &PowerProfile) -> Result<SupportIntervals, SpectralError> {
    let spec = SpectralMap::new(c, h);
    let point_mass_at_zero = (1.0 - spec.c).max(0.0);
    if spec.c == 0.0 {
        return Ok(SupportIntervals { intervals: Vec::new(), point_mass_at_zero });
    }

    // Scan intervals between consecutive poles, plus the two unbounded ends.
    let poles = spec.negative_poles();
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    let mut scan = |grid: &[f64]| {
        for pair in grid.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (fa, fb) = (spec.z_prime_real(a), spec.z_prime_real(b));
            if fa == 0.0 {
                brackets.push((a, a));
            } else if fa * fb < 0.0 {
                brackets.push((a, b));
            }
        }
    };
    let interior = |lo: f64, hi: f64| -> Vec<f64> {
        // Uniform interior plus geometric refinement toward both endpoints,
        // where z' blows up at the poles.
        let span = hi - lo;
        let mut g: Vec<f64> = (1..800).map(|i| lo + span * i as f64 / 800.0).collect();
        let mut d = span * 1e-12;
        while d < span * 0.5 {
            g.push(lo + d);
            g.push(hi - d);
            d *= 1.6;
        }
        g.retain(|&m| m > lo && m < hi);
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    };
    let half_open = |end: f64, dir: f64| -> Vec<f64> {
        // Geometric walk away from the finite end toward +-infinity.
        let scale = end.abs().max(1.0);
        let mut g = Vec::new();
        let mut d = scale * 1e-12;
        while d < scale * 1e8 {
            g.push(end + dir * d);
            d *= 1.35;
        }
        if dir < 0.0 {
            g.reverse();
        }
        g
    };

    scan(&half_open(poles[0], -1.0));
    for pair in poles.windows(2) {
        scan(&interior(pair[0], pair[1]));
    }
    scan(&interior(poles[poles.len() - 1], 0.0));
    scan(&half_open(0.0, 1.0));

    // Bisection refinement of each bracket.
    let mut critical: Vec<f64> = Vec::new();
    for (mut a, mut b) in brackets {
        if a == b {
            critical.push(a);
            continue;
        }
        let mut fa = spec.z_prime_real(a);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let fm = spec.z_prime_real(mid);
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if fa * fm < 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        critical.push(0.5 * (a + b));
    }
    critical.sort_by(f64::total_cmp);
    critical.dedup_by(|a, b| (*a - *b).abs() <= 1e-11 * a.abs().max(1.0));

    let mut edges: Vec<f64> = critical
        .iter()
        .map(|&m| {
            let v = spec.z_real(m);
            if v < 0.0 && v > -1e-8 {
                0.0
            } else {
                v
            }
        })
        .collect();
    if edges.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(SpectralError::EdgeScan(format!("negative or non-finite edge in {edges:?}")));
    }
    if edges.len() % 2 == 1 {
        // Critically loaded: the bulk touches zero and the lower edge is not
        // a critical value of z.
        edges.push(0.0);
    }
    edges.sort_by(f64::total_cmp);
    if edges.is_empty() {
        return Err(SpectralError::EdgeScan("no support edges found".into()));
    }

    let mut intervals: Vec<[f64; 2]> = Vec::new();
    for pair in edges.chunks(2) {
        let (lo, hi) = (pair[0], pair[1]);
        match intervals.last_mut() {
            // Merge intervals whose edges collide (bands touching).
            Some(last) if lo - last[1] <= 1e-10 * hi.max(1.0) => last[1] = hi,
            _ => intervals.push([lo, hi]),
        }
    }
    Ok(SupportIntervals { intervals, point_mass_at_zero })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn delta(p: f64) -> PowerProfile {
        PowerProfile::point_mass(p)
    }

    #[test]
    fn b_matches_quadratic_at_unit_load() {
        // c = 1, H = delta_1, sigma2 = 1 reduces to b^2 + b = 1.
        let b = solve_b(1.0, &delta(1.0), 1.0).unwrap();
        assert_relative_eq!(b, (5.0f64.sqrt() - 1.0) / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn b_without_interference_is_inverse_noise() {
        let b = solve_b(1e-12, &delta(1.0), 1.0).unwrap();
        assert_relative_eq!(b, 1.0, epsilon = 1e-9);
        let b = solve_b(1.0, &delta(0.0), 2.0).unwrap();
        assert_relative_eq!(b, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn m_at_negative_sigma2_equals_b() {
        let point = stieltjes_m(Complex64::new(-1.0, 0.0), 1.0, &delta(1.0)).unwrap();
        let b = solve_b(1.0, &delta(1.0), 1.0).unwrap();
        assert_relative_eq!(point.m.re, b, epsilon = 1e-10);
        assert_eq!(point.m.im, 0.0);
    }

    #[test]
    fn m_far_away_behaves_like_free_resolvent() {
        let z = Complex64::new(-1e6, 0.0);
        let point = stieltjes_m(z, 0.7, &delta(2.0)).unwrap();
        assert_relative_eq!(point.m.re, 1e-6, max_relative = 1e-9 * 1e6);
    }

    #[test]
    fn m_prime_matches_finite_difference() {
        let h = PowerProfile::new(&[(1.0, 0.5), (4.0, 0.5)]).unwrap();
        let z = Complex64::new(-1.0, 0.0);
        let step = 1e-5;
        let point = stieltjes_m(z, 1.0, &h).unwrap();
        let up = stieltjes_m(z + step, 1.0, &h).unwrap();
        let down = stieltjes_m(z - step, 1.0, &h).unwrap();
        let fd = (up.m - down.m) / (2.0 * step);
        assert_relative_eq!(point.m_prime.re, fd.re, max_relative = 1e-6);
    }

    #[test]
    fn m_prime_at_unit_parameters() {
        // At c = 1, sigma2 = 1: m'(-1) = 1/(1/b^2 - 1/(1+b)^2) = 1/sqrt(5).
        let point = stieltjes_m(Complex64::new(-1.0, 0.0), 1.0, &delta(1.0)).unwrap();
        assert_relative_eq!(point.m_prime.re, 1.0 / 5.0f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn upper_half_plane_maps_to_itself() {
        let h = PowerProfile::new(&[(0.5, 0.3), (2.0, 0.7)]).unwrap();
        for &(re, im) in &[(2.0, 0.5), (-3.0, 1.0), (0.3, 0.01), (10.0, 2.0)] {
            let point = stieltjes_m(Complex64::new(re, im), 0.8, &h).unwrap();
            assert!(point.m.im > 0.0);
        }
    }

    #[test]
    fn real_point_inside_support_is_rejected() {
        let err = stieltjes_m(Complex64::new(2.0, 0.0), 1.0, &delta(1.0)).unwrap_err();
        assert!(matches!(err, SpectralError::InsideSupport { .. }));
    }

    #[test]
    fn boundary_values_on_and_off_support() {
        let h = delta(1.0);
        // Off support: real, equals the off-axis solver.
        let m = stieltjes_boundary(-1.0, 1.0, &h).unwrap();
        assert_relative_eq!(m.re, 0.618034, epsilon = 1e-5);
        assert!(m.im.abs() < 1e-9);
        // Bulk center of the unit-load square law: positive density.
        let m = stieltjes_boundary(2.0, 1.0, &h).unwrap();
        assert!(m.im > 0.1);
        // Beyond the upper edge.
        let m = stieltjes_boundary(5.0, 1.0, &h).unwrap();
        assert!(m.im < 1e-6);
    }

    #[test]
    fn support_of_single_atom_profiles() {
        let s = support_of_f(1.0, &delta(1.0)).unwrap();
        assert_eq!(s.intervals.len(), 1);
        assert_relative_eq!(s.intervals[0][0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(s.intervals[0][1], 4.0, epsilon = 1e-9);
        assert_eq!(s.point_mass_at_zero, 0.0);

        let s = support_of_f(0.25, &delta(1.0)).unwrap();
        assert_relative_eq!(s.intervals[0][0], 0.25, epsilon = 1e-9);
        assert_relative_eq!(s.intervals[0][1], 2.25, epsilon = 1e-9);
        assert_relative_eq!(s.point_mass_at_zero, 0.75, epsilon = 1e-12);

        // Scaling: doubling the power doubles both edges.
        let s = support_of_f(1.0, &delta(2.0)).unwrap();
        assert_relative_eq!(s.intervals[0][0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(s.intervals[0][1], 8.0, epsilon = 1e-8);
    }

    #[test]
    fn support_edges_match_closed_form_on_grid() {
        for &c in &[0.25, 0.5, 1.0, 2.0] {
            for &p in &[0.5, 1.0, 3.0] {
                let s = support_of_f(c, &delta(p)).unwrap();
                let lo = p * (1.0 - c.sqrt()).powi(2);
                let hi = p * (1.0 + c.sqrt()).powi(2);
                assert_eq!(s.intervals.len(), 1);
                assert_relative_eq!(s.intervals[0][0], lo, epsilon = 1e-8, max_relative = 1e-8);
                assert_relative_eq!(s.intervals[0][1], hi, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn overloaded_support_detaches_from_zero() {
        let s = support_of_f(4.0, &delta(1.0)).unwrap();
        assert_eq!(s.point_mass_at_zero, 0.0);
        assert_relative_eq!(s.intervals[0][0], 1.0, max_relative = 1e-8);
        assert_relative_eq!(s.intervals[0][1], 9.0, max_relative = 1e-8);
    }

    #[test]
    fn zero_power_atom_rescales_load() {
        // Half the users silent: same support as load c/2 on the live atom.
        let h = PowerProfile::new(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let s = support_of_f(1.0, &h).unwrap();
        let reference = support_of_f(0.5, &delta(1.0)).unwrap();
        assert_eq!(s.intervals.len(), 1);
        assert_relative_eq!(s.intervals[0][0], reference.intervals[0][0], max_relative = 1e-9);
        assert_relative_eq!(s.intervals[0][1], reference.intervals[0][1], max_relative = 1e-9);
        assert_relative_eq!(s.point_mass_at_zero, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn b_is_monotone_in_load_and_noise() {
        let h = delta(1.0);
        let mut prev = f64::INFINITY;
        for &c in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            let b = solve_b(c, &h, 1.0).unwrap();
            assert!(b < prev);
            prev = b;
        }
        let mut prev = f64::INFINITY;
        for &s2 in &[0.5, 1.0, 2.0, 4.0] {
            let b = solve_b(1.0, &h, s2).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn resolvent_poly_roots_contain_b() {
        let h = PowerProfile::new(&[(1.0, 0.5), (4.0, 0.5)]).unwrap();
        let spec = SpectralMap::new(0.5, &h);
        let b = solve_b(0.5, &h, 1.0).unwrap();
        let roots = crate::numeric::poly_roots(&spec.resolvent_poly(1.0));
        let hit = roots.iter().any(|r| (r - b).norm() < 1e-8);
        assert!(hit, "b must be a root of the cleared resolvent polynomial");
    }
}
