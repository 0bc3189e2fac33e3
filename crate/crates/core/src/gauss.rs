//! Standard normal primitives: density, tail-stable CDF, interval masses,
//! incomplete moments `∫_a^b x^t φ(x) dx`, and Gauss–Legendre rules.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `1 / sqrt(2π)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Half-widths at or below this use the local Taylor expansion instead of
/// the erfc difference / upward recurrence, which cancel badly on narrow
/// intervals.
const NARROW_HALF_WIDTH: f64 = 0.05;

/// Largest incomplete-moment degree served by the recurrence.
pub const MAX_MOMENT_DEGREE: usize = 60;

#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate in the lower tail.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)`, accurate in the upper tail.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Gaussian mass of `[a, b]`. Infinite endpoints are allowed.
pub fn mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a.is_finite() && b.is_finite() && 0.5 * (b - a) <= NARROW_HALF_WIDTH {
        return narrow_moments(0, a, b)[0];
    }
    if a >= 0.0 {
        sf(a) - sf(b)
    } else if b <= 0.0 {
        cdf(b) - cdf(a)
    } else {
        1.0 - sf(b) - cdf(a)
    }
}

/// `M_l = ∫_a^b x^l φ(x) dx` for `l = 0..=t`.
///
/// Wide intervals use `M_t = (t-1) M_{t-2} + a^{t-1} φ(a) - b^{t-1} φ(b)`;
/// narrow finite intervals expand `φ` around the midpoint.
pub fn incomplete_moments(t: usize, a: f64, b: f64) -> Vec<f64> {
    if b <= a {
        return vec![0.0; t + 1];
    }
    if a.is_finite() && b.is_finite() && 0.5 * (b - a) <= NARROW_HALF_WIDTH {
        return narrow_moments(t, a, b);
    }
    let mut out = Vec::with_capacity(t + 1);
    out.push(mass(a, b));
    if t == 0 {
        return out;
    }
    let (ga, gb) = (edge_pdf(a), edge_pdf(b));
    out.push(pdf_difference(a, b));
    // a^{l-1} φ(a), updated multiplicatively; zero at infinite endpoints.
    let mut pa = ga * a_or_zero(a);
    let mut pb = gb * a_or_zero(b);
    for l in 2..=t {
        let next = (l as f64 - 1.0) * out[l - 2] + pa - pb;
        out.push(next);
        pa *= a_or_zero(a);
        pb *= a_or_zero(b);
    }
    out
}

#[inline]
fn edge_pdf(x: f64) -> f64 {
    if x.is_finite() {
        pdf(x)
    } else {
        0.0
    }
}

#[inline]
fn a_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

/// `φ(a) - φ(b)` without cancellation when `a ≈ b`.
fn pdf_difference(a: f64, b: f64) -> f64 {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => {
            // φ(a) - φ(b) = -φ(a) * expm1(-(b - a)(b + a) / 2)
            -pdf(a) * (-(b - a) * (b + a) * 0.5).exp_m1()
        }
        (true, false) => pdf(a),
        (false, true) => -pdf(b),
        (false, false) => 0.0,
    }
}

/// Moments of `φ` over a narrow interval `[c - w, c + w]`.
///
/// `φ(c + u) = φ(c) Σ_r (-1)^r He_r(c) u^r / r!`, so the local moments
/// `L_j = ∫_{-w}^{w} u^j φ(c + u) du` are rapidly convergent series, and
/// `M_l = Σ_j C(l, j) c^{l-j} L_j`.
fn narrow_moments(t: usize, a: f64, b: f64) -> Vec<f64> {
    let c = 0.5 * (a + b);
    let w = 0.5 * (b - a);
    let phi_c = pdf(c);

    // Taylor coefficients (-1)^r He_r(c) / r!, recursively, until negligible
    // against w^r.
    const MAX_TERMS: usize = 64;
    let mut coef = Vec::with_capacity(MAX_TERMS);
    let (mut h_prev, mut h_cur) = (0.0_f64, 1.0_f64); // He_{-1}, He_0
    let mut fact = 1.0_f64;
    let mut wpow = 1.0_f64;
    for r in 0..MAX_TERMS {
        if r > 0 {
            fact *= r as f64;
        }
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * h_cur / fact;
        coef.push(term);
        // Two negligible terms in a row: odd coefficients vanish at c = 0.
        let small = |x: f64, wp: f64| (x * wp).abs() < 1e-19 * coef[0].abs();
        if r > t + 4 && small(term, wpow) && small(coef[r - 1], wpow / w) {
            break;
        }
        let h_next = c * h_cur - r as f64 * h_prev;
        h_prev = h_cur;
        h_cur = h_next;
        wpow *= w;
    }

    // L_j / φ(c) = Σ_r coef_r * ∫ u^{j+r} = Σ_{j+r even} coef_r 2 w^{j+r+1} / (j+r+1)
    let mut local = vec![0.0; t + 1];
    for (j, lj) in local.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (r, cr) in coef.iter().enumerate() {
            let p = j + r;
            if p % 2 == 1 {
                continue;
            }
            acc += cr * 2.0 * w.powi(p as i32 + 1) / (p as f64 + 1.0);
        }
        *lj = acc * phi_c;
    }

    let mut out = vec![0.0; t + 1];
    let mut binom = vec![1.0_f64; t + 1];
    for (l, ml) in out.iter_mut().enumerate() {
        if l > 0 {
            for j in (1..l).rev() {
                binom[j] += binom[j - 1];
            }
        }
        let mut acc = 0.0;
        let mut cpow = 1.0;
        for j in (0..=l).rev() {
            acc += binom[j] * cpow * local[j];
            cpow *= c;
        }
        *ml = acc;
    }
    out
}

/// Probabilists' Hermite polynomials `He_0..=He_n` at `x`.
pub fn hermite_he(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for r in 2..=n {
        let v = x * out[r - 1] - (r as f64 - 1.0) * out[r - 2];
        out.push(v);
    }
    out
}

/// `γ_t = E[x^t]` for `x ~ N(0, 1)`: zero for odd `t`, `(t-1)!!` otherwise.
pub fn gaussian_moment(t: usize) -> f64 {
    if t % 2 == 1 {
        return 0.0;
    }
    let mut acc = 1.0;
    let mut j = t as i64 - 1;
    while j > 1 {
        acc *= j as f64;
        j -= 2;
    }
    acc
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Composite rule: `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * h;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_matches_known_values() {
        assert_relative_eq!(cdf(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(cdf(1.959963984540054), 0.975, epsilon = 1e-14);
        assert_relative_eq!(sf(8.0), 6.220960574271785e-16, max_relative = 1e-12);
    }

    #[test]
    fn narrow_and_wide_paths_agree_near_threshold() {
        // Just below and above the narrow threshold on the same interval family.
        for &c in &[-3.0, -0.4, 0.0, 1.3, 5.0] {
            let a = c - NARROW_HALF_WIDTH;
            let b = c + NARROW_HALF_WIDTH;
            let narrow = narrow_moments(8, a, b);
            let gl = GaussLegendre::new(30);
            for (l, ml) in narrow.iter().enumerate() {
                let q = gl.integrate(a, b, |x| x.powi(l as i32) * pdf(x));
                assert_relative_eq!(*ml, q, max_relative = 1e-13, epsilon = 1e-18);
            }
        }
    }

    #[test]
    fn centered_narrow_interval_keeps_even_terms() {
        // Odd Taylor coefficients vanish at 0; the series must not stop there.
        let w = NARROW_HALF_WIDTH;
        let gl = GaussLegendre::new(30);
        let reference = gl.integrate(-w, w, pdf);
        assert_relative_eq!(mass(-w, w), reference, max_relative = 1e-15);
    }

    #[test]
    fn recurrence_matches_gauss_legendre_on_wide_interval() {
        let gl = GaussLegendre::new(60);
        let m = incomplete_moments(10, -0.7, 2.1);
        for (l, ml) in m.iter().enumerate() {
            let q = gl.integrate(-0.7, 2.1, |x| x.powi(l as i32) * pdf(x));
            assert_relative_eq!(*ml, q, max_relative = 1e-12);
        }
    }

    #[test]
    fn full_line_moments_are_gaussian() {
        let m = incomplete_moments(12, f64::NEG_INFINITY, f64::INFINITY);
        for (t, mt) in m.iter().enumerate() {
            assert_relative_eq!(*mt, gaussian_moment(t), epsilon = 1e-12, max_relative = 1e-13);
        }
    }

    #[test]
    fn tiny_interval_mass_keeps_relative_precision() {
        let xi = 1e-12;
        let m = mass(0.3 - xi, 0.3 + xi);
        assert_relative_eq!(m, 2.0 * xi * pdf(0.3), max_relative = 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(5);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(9));
        assert_relative_eq!(v, 2f64.powi(10) / 10.0, max_relative = 1e-14);
        assert_relative_eq!(gl.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn double_factorial_moments() {
        assert_eq!(gaussian_moment(0), 1.0);
        assert_eq!(gaussian_moment(3), 0.0);
        assert_eq!(gaussian_moment(8), 105.0);
    }
}
