//! Hidden-direction distributions `P_v^A` and the labeled family `D_v^{A,a}`.
//!
//! `P_v^A` has projection `A` onto the unit vector `v` and is standard
//! Gaussian on the orthogonal complement. A labeled draw picks a component
//! `j ~ a`, draws `z ~ A_j` and labels with row `j` of `H` when `z ∈ J_j`,
//! otherwise with row `k`.

use crate::error::{Error, Result};
use crate::exec::{self, Execution, CHUNK};
use crate::gauss::{self, GaussLegendre};
use crate::noise::{DistinguishCertificate, NoiseMatrix, CERTIFICATE_TOL};
use crate::univariate::{CombSpec, IntervalUnion, ShiftedComb};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const UNIT_TOL: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-12;
/// `|u·v|` above this (with `u ≠ v`) is refused by [`chisq_hidden`].
pub const PARALLEL_TOL: f64 = 1e-9;
/// Candidate draws allowed in [`sample_near_orthogonal_set`].
pub const REJECTION_BUDGET: usize = 1_000_000;
const CHISQ_NODES: usize = 24;

/// One labeled example; `y` is 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: usize,
}

/// Anything that produces i.i.d. labeled examples.
pub trait LabeledSource: Sync {
    fn dim(&self) -> usize;
    fn k(&self) -> usize;
    fn noise(&self) -> &NoiseMatrix;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledSample;

    /// `n` samples, drawn chunk by chunk from streams of `seed`.
    fn sample_n(&self, n: usize, seed: u64, exec: Execution) -> Vec<LabeledSample> {
        for_each_chunk(self, n, seed, exec, |s| s.to_vec()).concat()
    }
}

/// Runs `f` on consecutive chunks of `n` draws and returns the chunk results
/// in order. Chunk `c` always uses stream `c` of `seed`.
pub fn for_each_chunk<S, T, F>(src: &S, n: usize, seed: u64, exec: Execution, f: F) -> Vec<T>
where
    S: LabeledSource + ?Sized,
    T: Send,
    F: Fn(&[LabeledSample]) -> T + Sync + Send,
{
    exec::map_chunks(exec, n, CHUNK, |c, s, e| {
        let mut rng = exec::chunk_rng(seed, c as u64);
        let batch: Vec<LabeledSample> = (s..e).map(|_| src.sample(&mut rng)).collect();
        f(&batch)
    })
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Uniform unit vector in `ℝ^n`.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let g = gaussian_vec(rng, n);
        let r = norm(&g);
        if r > 1e-300 {
            return g.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Deterministic random direction for a seed.
pub fn random_direction(n: usize, seed: u64) -> Vec<f64> {
    random_unit(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn draw_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    // Rounding fallback: the last index with positive weight.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// `(2π)^{-n/2} exp(-‖x‖²/2)` given `‖x‖²`.
fn gaussian_density(dim: usize, sq_norm: f64) -> f64 {
    (-0.5 * sq_norm).exp() * gauss::INV_SQRT_2PI.powi(dim as i32)
}

/// A planted instance `D_v^{A,a}` over `ℝ^N × [k]`.
#[derive(Debug, Clone)]
pub struct HiddenInstance {
    v: Vec<f64>,
    spec: CombSpec,
    a: Vec<f64>,
    h: NoiseMatrix,
    certificate: DistinguishCertificate,
    combs: Vec<ShiftedComb>,
    supports: Vec<IntervalUnion>,
}

impl HiddenInstance {
    /// Validates `‖v‖ = 1`, `a` on the simplex, `h_k = Σ a_j h_j`, and
    /// `H_jj ≥ H_ji` for every `j, i`.
    pub fn new(v: Vec<f64>, spec: CombSpec, a: Vec<f64>, h: NoiseMatrix) -> Result<Self> {
        let inst = Self::new_unchecked(v, spec, a, h)?;
        if inst.certificate.residual > CERTIFICATE_TOL {
            return Err(Error::NotHardToDistinguish { residual: inst.certificate.residual });
        }
        if !inst.certificate.diagonal_dominant {
            return Err(Error::InvalidParameter(
                "noise matrix must satisfy H_jj >= H_ji for all j, i".into(),
            ));
        }
        Ok(inst)
    }

    /// Checks only shapes, `‖v‖ = 1` and the simplex; `H` may violate the
    /// hard-to-distinguish coupling (e.g. noise-free sanity instances).
    pub fn new_unchecked(v: Vec<f64>, spec: CombSpec, a: Vec<f64>, h: NoiseMatrix) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let vn = norm(&v);
        if (vn - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidParameter(format!("v must be a unit vector, |v| = {vn}")));
        }
        if h.k() != spec.k() {
            return Err(Error::DimensionMismatch { expected: spec.k(), got: h.k() });
        }
        if a.len() != spec.components() {
            return Err(Error::DimensionMismatch { expected: spec.components(), got: a.len() });
        }
        let sum: f64 = a.iter().sum();
        if a.iter().any(|x| !(*x >= -SIMPLEX_TOL)) || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidParameter(format!("weights a must lie on the simplex, sum = {sum}")));
        }
        let certificate = DistinguishCertificate {
            residual: h.combination_residual(&a),
            weights: a.clone(),
            diagonal_dominant: h.diagonal_dominant(),
        };
        let combs = spec.combs();
        let supports = (0..spec.components())
            .map(|i| spec.support_intervals(i).map(|(j, _)| j))
            .collect::<Result<_>>()?;
        Ok(Self { v, spec, a, h, certificate, combs, supports })
    }

    /// Instance with the three-label `eq1` matrix and equal weights.
    pub fn eq1(v: Vec<f64>, spec: CombSpec) -> Result<Self> {
        Self::new(v, spec, vec![0.5, 0.5], NoiseMatrix::eq1())
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }
    pub fn spec(&self) -> &CombSpec {
        &self.spec
    }
    pub fn weights(&self) -> &[f64] {
        &self.a
    }
    pub fn certificate(&self) -> &DistinguishCertificate {
        &self.certificate
    }
    pub fn combs(&self) -> &[ShiftedComb] {
        &self.combs
    }
    /// `J_j` for each component.
    pub fn supports(&self) -> &[IntervalUnion] {
        &self.supports
    }
    pub fn inner_hull(&self) -> (f64, f64) {
        self.spec.inner_hull()
    }

    pub fn project(&self, x: &[f64]) -> f64 {
        dot(&self.v, x)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.v.len() {
            return Err(Error::DimensionMismatch { expected: self.v.len(), got: x.len() });
        }
        Ok(())
    }

    fn orthogonal_density(&self, x: &[f64], z: f64) -> f64 {
        let perp = (dot(x, x) - z * z).max(0.0);
        gaussian_density(self.v.len() - 1, perp)
    }

    /// `Σ_j a_j A_j(z)`, the law of `v·x`.
    pub fn projected_density(&self, z: f64) -> f64 {
        self.a.iter().zip(&self.combs).map(|(aj, c)| aj * c.density(z)).sum()
    }

    /// `Pr(v·x ∈ [lo, hi])`.
    pub fn projected_mass(&self, lo: f64, hi: f64) -> f64 {
        self.a.iter().zip(&self.combs).map(|(aj, c)| aj * c.mass_between(lo, hi)).sum()
    }

    /// `P_v^{A_j}(x)`.
    pub fn component_density(&self, j: usize, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let z = self.project(x);
        Ok(self.combs[j].density(z) * self.orthogonal_density(x, z))
    }

    /// Density of the `x`-marginal.
    pub fn marginal_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let z = self.project(x);
        Ok(self.projected_density(z) * self.orthogonal_density(x, z))
    }

    /// Joint density of `(x, y)` following the labeling rule.
    pub fn joint_density(&self, x: &[f64], y: usize) -> Result<f64> {
        self.check_dim(x)?;
        self.check_label(y)?;
        let z = self.project(x);
        let outside = self.h.k() - 1;
        let proj: f64 = (0..self.a.len())
            .map(|j| {
                let row = if self.supports[j].contains(z) { j } else { outside };
                self.a[j] * self.combs[j].density(z) * self.h.get(row, y)
            })
            .sum();
        Ok(proj * self.orthogonal_density(x, z))
    }

    fn check_label(&self, y: usize) -> Result<()> {
        if y >= self.h.k() {
            return Err(Error::InvalidParameter(format!("label {} out of range 1..={}", y + 1, self.h.k())));
        }
        Ok(())
    }

    fn outside_prob(&self, y: usize) -> Result<f64> {
        self.check_label(y)?;
        let hk = self.h.get(self.h.k() - 1, y);
        if hk <= 0.0 {
            return Err(Error::InvalidParameter(format!("label {} has H_ky = 0", y + 1)));
        }
        Ok(hk)
    }

    /// `D(x | y)` as joint density over `H_ky`.
    pub fn conditional_density(&self, x: &[f64], y: usize) -> Result<f64> {
        let hk = self.outside_prob(y)?;
        Ok(self.joint_density(x, y)? / hk)
    }

    /// `Σ_j (a_j H_jy / H_ky) P_v^{A_j}(x)`.
    pub fn mixture_conditional(&self, x: &[f64], y: usize) -> Result<f64> {
        let hk = self.outside_prob(y)?;
        self.check_dim(x)?;
        let z = self.project(x);
        let proj: f64 = (0..self.a.len())
            .map(|j| self.a[j] * self.h.get(j, y) / hk * self.combs[j].density(z))
            .sum();
        Ok(proj * self.orthogonal_density(x, z))
    }

    /// `Pr(y = i)` from the sampling rule:
    /// `Σ_j a_j [Pr_{A_j}(J_j) H_ji + (1 - Pr_{A_j}(J_j)) H_ki]`.
    pub fn label_marginal(&self) -> Vec<f64> {
        let k = self.h.k();
        let p_in = self.spec.inner_mass();
        (0..k)
            .map(|i| {
                self.a
                    .iter()
                    .enumerate()
                    .map(|(j, aj)| aj * (p_in * self.h.get(j, i) + (1.0 - p_in) * self.h.get(k - 1, i)))
                    .sum()
            })
            .collect()
    }

    /// Draws `(z, label)` for the projection only.
    pub fn sample_projection<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, usize) {
        let j = draw_index(rng, &self.a);
        let (z, inner) = self.combs[j].sample_with_flag(rng);
        let row = if inner { j } else { self.h.k() - 1 };
        (z, draw_index(rng, self.h.row(row)))
    }
}

impl LabeledSource for HiddenInstance {
    fn dim(&self) -> usize {
        self.v.len()
    }
    fn k(&self) -> usize {
        self.h.k()
    }
    fn noise(&self) -> &NoiseMatrix {
        &self.h
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledSample {
        let (z, y) = self.sample_projection(rng);
        let mut x = gaussian_vec(rng, self.v.len());
        let along = dot(&x, &self.v);
        for (xi, vi) in x.iter_mut().zip(&self.v) {
            *xi += (z - along) * vi;
        }
        LabeledSample { x, y }
    }
}

/// Labels independent of `x ~ N(0, I_N)`, drawn from row `k` of `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullInstance {
    dim: usize,
    h: NoiseMatrix,
}

impl NullInstance {
    pub fn new(dim: usize, h: NoiseMatrix) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self { dim, h })
    }

    pub fn label_marginal(&self) -> Vec<f64> {
        self.h.row(self.h.k() - 1).to_vec()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        gaussian_density(self.dim, dot(x, x))
    }
}

impl LabeledSource for NullInstance {
    fn dim(&self) -> usize {
        self.dim
    }
    fn k(&self) -> usize {
        self.h.k()
    }
    fn noise(&self) -> &NoiseMatrix {
        &self.h
    }
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledSample {
        let x = gaussian_vec(rng, self.dim);
        let y = draw_index(rng, self.h.row(self.h.k() - 1));
        LabeledSample { x, y }
    }
}

/// `χ_{N(0,I)}(P_v^{A_i}, P_u^{A_i})`.
///
/// Only `span(u, v)` matters. With `ρ = u·v` and `σ² = 1 - ρ²`,
/// `χ + 1 = ∫ A(s) E_{w ~ N(ρs, σ²)}[A(w)/φ(w)] ds`. On a piece with shift
/// `h`, `A(w)/φ(w) = c·exp(-hw - h²/2)`, so the inner expectation is a
/// Gaussian mass in closed form; the outer integral uses Gauss–Legendre
/// on every piece.
pub fn chisq_hidden(spec: &CombSpec, i: usize, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), got: u.len() });
    }
    for w in [u, v] {
        let n = norm(w);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidParameter(format!("directions must be unit vectors, |w| = {n}")));
        }
    }
    if u == v {
        return spec.chisq_pair(i, i);
    }
    let rho = dot(u, v);
    if rho.abs() > 1.0 - PARALLEL_TOL {
        return Err(Error::NearParallel(rho));
    }
    let comb = ShiftedComb::new(*spec, i)?;
    Ok(chisq_from_correlation(&comb, rho))
}

/// [`chisq_hidden`] for a given correlation `ρ = u·v`.
pub fn chisq_from_correlation(comb: &ShiftedComb, rho: f64) -> f64 {
    let sigma = (1.0 - rho * rho).sqrt();
    let c = comb.height();
    let pieces = comb.pieces();
    let gl = GaussLegendre::new(CHISQ_NODES);
    let inner = |s: f64| -> f64 {
        pieces
            .iter()
            .map(|p| {
                let h = p.shift;
                let mu = rho * s - sigma * sigma * h;
                let scale = (-rho * s * h - 0.5 * rho * rho * h * h).exp();
                scale * gauss::mass((p.lo() - mu) / sigma, (p.hi() - mu) / sigma)
            })
            .sum::<f64>()
            * c
    };
    let total: f64 = pieces
        .iter()
        .map(|p| gl.integrate(p.lo(), p.hi(), |s| c * gauss::pdf(s + p.shift) * inner(s)))
        .sum();
    total - 1.0
}

/// `s` unit vectors in `ℝ^n` with pairwise `|u·v| ≤ c`, by rejection.
pub fn sample_near_orthogonal_set<R: Rng + ?Sized>(
    n: usize,
    s: usize,
    c: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if !(c > 0.0 && c < 0.5) {
        return Err(Error::InvalidParameter(format!("bound c must lie in (0, 1/2), got {c}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(s);
    for _ in 0..REJECTION_BUDGET {
        if out.len() == s {
            break;
        }
        let cand = random_unit(rng, n);
        if out.iter().all(|w| dot(w, &cand).abs() <= c) {
            out.push(cand);
        }
    }
    if out.len() < s {
        return Err(Error::BudgetExhausted { budget: REJECTION_BUDGET, found: out.len(), wanted: s });
    }
    Ok(out)
}

/// Unit vectors `u` with `|u·v| ≤ bound`, drawn by rejection from the sphere.
pub fn directions_with_overlap<R: Rng + ?Sized>(
    v: &[f64],
    count: usize,
    bound: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if !(bound > 0.0) {
        return Err(Error::InvalidParameter(format!("overlap bound must be positive, got {bound}")));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..REJECTION_BUDGET {
        if out.len() == count {
            return Ok(out);
        }
        let u = random_unit(rng, v.len());
        if dot(&u, v).abs() <= bound {
            out.push(u);
        }
    }
    if out.len() == count {
        return Ok(out);
    }
    Err(Error::BudgetExhausted { budget: REJECTION_BUDGET, found: out.len(), wanted: count })
}
