//! Reference computations that share nothing with the library's closed forms:
//! adaptive Gauss–Kronrod quadrature and comb densities rebuilt from their
//! parameters.

#![allow(dead_code)]

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate and its distance from the embedded Gauss rule.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive G7–K15 with bisection until the local error is below
/// `tol · (b - a) / total_width`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol.max(4.0 * f64::EPSILON * v.abs()) || depth >= 30 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    if b <= a {
        return 0.0;
    }
    rec(f, a, b, tol, 0)
}

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `E_{N(0,1)}[x^t]`.
pub fn gaussian_moment(t: usize) -> f64 {
    if t % 2 == 1 {
        0.0
    } else {
        (1..t).step_by(2).map(|j| j as f64).product()
    }
}

/// Teeth of a comb component as `(lo, hi, shift)`: the density there is
/// `height · φ(x + shift)`.
pub struct RefComb {
    pub pieces: Vec<(f64, f64, f64)>,
    /// Whether each piece is one of the `2m + 1` central teeth.
    pub inner: Vec<bool>,
    pub height: f64,
}

impl RefComb {
    /// Component `i` (0-based) of the family with parameters `(δ, ξ, m)`,
    /// keeping teeth out to radius 20.
    pub fn new(delta: f64, xi: f64, m: usize, i: usize) -> Self {
        let cut = (20.0 / delta).ceil() as i64;
        let shift = 4.0 * i as f64 * xi;
        let mut pieces = Vec::new();
        let mut inner = Vec::new();
        let mut z = 0.0;
        for n in -cut..=cut {
            let c = n as f64 * delta;
            z += adaptive(&phi, c - xi, c + xi, 1e-18);
            let s = if n.abs() <= m as i64 { shift } else { 0.0 };
            pieces.push((c - xi - s, c + xi - s, s));
            inner.push(n.abs() <= m as i64);
        }
        Self { pieces, inner, height: 1.0 / z }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|(lo, hi, _)| x >= *lo && x <= *hi)
            .map(|(_, _, s)| self.height * phi(x + s))
            .sum()
    }

    /// `∫ g(x) A(x) dx` tooth by tooth.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, tol: f64) -> f64 {
        let per = tol / self.pieces.len() as f64;
        self.pieces
            .iter()
            .map(|&(lo, hi, s)| adaptive(&|x: f64| g(x) * self.height * phi(x + s), lo, hi, per))
            .sum()
    }

    pub fn moment(&self, t: usize) -> f64 {
        self.integrate(|x| x.powi(t as i32), 1e-14)
    }

    /// `χ²(A, N(0,1)) = ∫ A²/φ - 1`.
    pub fn chisq(&self) -> f64 {
        let per = 1e-14 / self.pieces.len() as f64;
        self.pieces
            .iter()
            .map(|&(lo, hi, s)| {
                adaptive(&|x: f64| (self.height * phi(x + s)).powi(2) / phi(x), lo, hi, per)
            })
            .sum::<f64>()
            - 1.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `χ_{N(0,I)}(P_v^{A_i}, P_u^{A_j})` at correlation `ρ = u·v`, by nested
/// adaptive quadrature of `A_i(s) A_j(w) φ_ρ(s, w) / (φ(s) φ(w))` over pairs
/// of teeth within `reach` of the origin.
pub fn chi_2d(a: &RefComb, b: &RefComb, rho: f64, reach: f64) -> f64 {
    let s2 = 1.0 - rho * rho;
    let kernel = |s: f64, w: f64| (-(rho * rho * (s * s + w * w) - 2.0 * rho * s * w) / (2.0 * s2)).exp() / s2.sqrt();
    let near = |c: &RefComb| c.pieces.iter().copied().filter(|p| p.0.abs() < reach).collect::<Vec<_>>();
    let (pa, pb) = (near(a), near(b));
    let mut total = 0.0;
    for &(lo, hi, hs) in &pa {
        for &(p, q, hw) in &pb {
            // The inner rule's rounding noise bounds what the outer rule can resolve.
            let inner = |s: f64| adaptive(&|w: f64| b.height * phi(w + hw) * kernel(s, w), p, q, 1e-14);
            total += adaptive(&|s: f64| a.height * phi(s + hs) * inner(s), lo, hi, 1e-13);
        }
    }
    total - 1.0
}
