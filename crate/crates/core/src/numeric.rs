//! Small numerical kernels shared by the solver modules: Gauss-Legendre
//! nodes, adaptive Simpson quadrature, polynomial arithmetic and companion
//! matrix root finding, and trapezoidal contour integration on circles.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' at x via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance
/// `tol`.
#[allow(dead_code)] // independent quadrature oracle, used by tests only
pub(crate) fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Product of two polynomials in ascending-coefficient form.
pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Sum of two polynomials in ascending-coefficient form.
pub(crate) fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &ai) in a.iter().enumerate() {
        out[i] += ai;
    }
    for (i, &bi) in b.iter().enumerate() {
        out[i] += bi;
    }
    out
}

/// Complex roots of a real-coefficient polynomial (ascending coefficients),
/// via the eigenvalues of its companion matrix. Leading coefficients smaller
/// than `1e-12` times the largest magnitude are trimmed.
pub(crate) fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let scale = coeffs.iter().fold(0.0f64, |s, &c| s.max(c.abs()));
    assert!(scale > 0.0, "zero polynomial has no defined roots");
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().abs() < 1e-12 * scale {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let companion = DMatrix::from_fn(deg, deg, |i, j| {
        if j == deg - 1 {
            -c[i] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Trapezoidal approximation of the contour integral of `f` over the circle
/// `|m - center| = radius`, traversed once counterclockwise with `n` nodes.
/// Exponentially accurate for integrands analytic near the circle.
pub(crate) fn integrate_circle(
    f: &impl Fn(Complex64) -> Complex64,
    center: Complex64,
    radius: f64,
    n: usize,
) -> Complex64 {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let theta = step * j as f64;
        let dir = Complex64::new(theta.cos(), theta.sin());
        let m = center + radius * dir;
        // dm = i * radius * e^{i theta} dtheta
        sum += f(m) * Complex64::new(0.0, radius) * dir;
    }
    sum * step
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // Degree-15 polynomial is exact for an 8-point rule.
        let value: f64 = x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| wi * (xi.powi(15) + 3.0 * xi.powi(8) + xi))
            .sum();
        // int_{-1}^{1} 3 x^8 dx = 6/9; odd terms vanish.
        assert_relative_eq!(value, 6.0 / 9.0, max_relative = 1e-13);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [3usize, 64, 512] {
            let (_, w) = gauss_legendre(n);
            let sum: f64 = w.iter().sum();
            assert_relative_eq!(sum, 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn adaptive_simpson_matches_closed_form() {
        let value = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert_relative_eq!(value, std::f64::consts::E - 1.0, max_relative = 1e-10);
    }

    #[test]
    fn poly_roots_of_quadratic() {
        // (x - 2)(x + 3) = x^2 + x - 6
        let mut roots: Vec<f64> = poly_roots(&[-6.0, 1.0, 1.0]).iter().map(|r| r.re).collect();
        roots.sort_by(f64::total_cmp);
        assert_relative_eq!(roots[0], -3.0, max_relative = 1e-10);
        assert_relative_eq!(roots[1], 2.0, max_relative = 1e-10);
    }

    #[test]
    fn circle_integral_counts_residues() {
        // f(m) = 1/m around the unit circle: 2 pi i.
        let value = integrate_circle(&|m| 1.0 / m, Complex64::new(0.0, 0.0), 1.0, 64);
        assert_relative_eq!(value.im, 2.0 * std::f64::consts::PI, max_relative = 1e-12);
        assert!(value.re.abs() < 1e-12);
    }
}
