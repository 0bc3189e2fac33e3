//! Multiclass classifiers, indicator polynomials, the Veronese lift, and
//! exact error evaluation for hypotheses that depend only on `v·x`.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gauss;
use crate::hidden::{for_each_chunk, HiddenInstance, LabeledSource};
use crate::univariate::IntervalUnion;
use serde::{Deserialize, Serialize};

/// Largest cell used when scanning a piece for label changes.
const SCAN_CELL: f64 = 2e-3;
const MIN_CELLS_PER_PIECE: usize = 16;
const BOUNDARY_TOL: f64 = 1e-12;
/// Standard deviations scanned for label changes under a Gaussian law.
const GAUSSIAN_REACH: f64 = 12.0;

/// Index of the largest score; ties go to the smallest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

pub trait Classifier: Send + Sync {
    fn k(&self) -> usize;
    fn dim(&self) -> usize;
    /// 0-based label.
    fn classify(&self, x: &[f64]) -> Result<usize>;
    /// The polynomial form, when the classifier depends only on one projection.
    fn as_poly(&self) -> Option<&UnivariatePolyMulticlass> {
        None
    }
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

/// `argmax_i w_i·x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMulticlass {
    rows: Vec<Vec<f64>>,
}

impl LinearMulticlass {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or_else(|| Error::InvalidParameter("no rows".into()))?;
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        Ok(Self { rows })
    }

    pub fn zeros(k: usize, d: usize) -> Self {
        Self { rows: vec![vec![0.0; d]; k] }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.rows
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|w| w.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

impl Classifier for LinearMulticlass {
    fn k(&self) -> usize {
        self.rows.len()
    }
    fn dim(&self) -> usize {
        self.rows[0].len()
    }
    fn classify(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim(), x)?;
        Ok(argmax(&self.scores(x)))
    }
}

/// A real polynomial in one variable.
///
/// Polynomials built from roots keep the factored form `lead · Π (t - r)`
/// and evaluate through it; expanded coefficients of high-degree products
/// lose most of their digits near clustered roots.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
    factored: Option<(f64, Vec<f64>)>,
}

impl Polynomial {
    /// Coefficients from low to high degree.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs };
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs, factored: None }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn from_roots(lead: f64, roots: Vec<f64>) -> Self {
        let mut coeffs = vec![lead];
        for r in &roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (i, c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= r * c;
            }
            coeffs = next;
        }
        Self { coeffs, factored: Some((lead, roots)) }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn factored(&self) -> Option<(f64, &[f64])> {
        self.factored.as_ref().map(|(l, r)| (*l, r.as_slice()))
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.factored {
            Some((lead, roots)) => roots.iter().fold(*lead, |acc, r| acc * (t - r)),
            None => self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }

    /// Sum of two polynomials (coefficient form).
    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let c = (0..n)
            .map(|i| self.coeffs.get(i).unwrap_or(&0.0) + other.coeffs.get(i).unwrap_or(&0.0))
            .collect();
        Polynomial::new(c)
    }
}

/// `argmax_j p_j(v·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolyClassifier", into = "RawPolyClassifier")]
pub struct UnivariatePolyMulticlass {
    v: Vec<f64>,
    polys: Vec<Polynomial>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawPolyClassifier {
    pub v: Vec<f64>,
    /// Coefficients, low to high degree.
    pub polys: Vec<Vec<f64>>,
    /// Optional `(lead, roots)` per polynomial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factored: Option<Vec<Option<(f64, Vec<f64>)>>>,
}

impl TryFrom<RawPolyClassifier> for UnivariatePolyMulticlass {
    type Error = Error;
    fn try_from(r: RawPolyClassifier) -> Result<Self> {
        let factored = r.factored.unwrap_or_else(|| vec![None; r.polys.len()]);
        if factored.len() != r.polys.len() {
            return Err(Error::DimensionMismatch { expected: r.polys.len(), got: factored.len() });
        }
        let polys = r
            .polys
            .into_iter()
            .zip(factored)
            .map(|(c, f)| match f {
                Some((lead, roots)) => Polynomial::from_roots(lead, roots),
                None => Polynomial::new(c),
            })
            .collect();
        UnivariatePolyMulticlass::new(r.v, polys)
    }
}

impl From<UnivariatePolyMulticlass> for RawPolyClassifier {
    fn from(h: UnivariatePolyMulticlass) -> Self {
        let factored: Vec<_> = h.polys.iter().map(|p| p.factored.clone()).collect();
        RawPolyClassifier {
            polys: h.polys.iter().map(|p| p.coeffs.clone()).collect(),
            factored: factored.iter().any(Option::is_some).then_some(factored),
            v: h.v,
        }
    }
}

impl UnivariatePolyMulticlass {
    pub fn new(v: Vec<f64>, polys: Vec<Polynomial>) -> Result<Self> {
        if v.is_empty() || polys.is_empty() {
            return Err(Error::InvalidParameter("direction and polynomials must be non-empty".into()));
        }
        Ok(Self { v, polys })
    }

    /// Always predicts `label`.
    pub fn constant(v: Vec<f64>, k: usize, label: usize) -> Result<Self> {
        if label >= k {
            return Err(Error::InvalidParameter(format!("label {} out of range 1..={k}", label + 1)));
        }
        let polys = (0..k).map(|j| Polynomial::constant(if j == label { 1.0 } else { 0.0 })).collect();
        Self::new(v, polys)
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.polys.iter().map(Polynomial::degree).collect()
    }

    pub fn scores_at(&self, z: f64) -> Vec<f64> {
        self.polys.iter().map(|p| p.eval(z)).collect()
    }

    /// Label as a function of the projection `z = v·x`.
    pub fn classify_projection(&self, z: f64) -> usize {
        argmax(&self.scores_at(z))
    }

    /// Adds `q` to every polynomial.
    pub fn shifted_by(&self, q: &Polynomial) -> Self {
        Self { v: self.v.clone(), polys: self.polys.iter().map(|p| p.add(q)).collect() }
    }
}

impl Classifier for UnivariatePolyMulticlass {
    fn k(&self) -> usize {
        self.polys.len()
    }
    fn dim(&self) -> usize {
        self.v.len()
    }
    fn classify(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.v.len(), x)?;
        let z = self.v.iter().zip(x).map(|(a, b)| a * b).sum();
        Ok(self.classify_projection(z))
    }
    fn as_poly(&self) -> Option<&UnivariatePolyMulticlass> {
        Some(self)
    }
}

/// Predicts one fixed label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantClassifier {
    pub dim: usize,
    pub k: usize,
    pub label: usize,
}

impl Classifier for ConstantClassifier {
    fn k(&self) -> usize {
        self.k
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn classify(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim, x)?;
        Ok(self.label)
    }
}

/// A uniformly scrambled label derived from the bits of `x` and a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashGuess {
    pub dim: usize,
    pub k: usize,
    pub seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Classifier for HashGuess {
    fn k(&self) -> usize {
        self.k
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn classify(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim, x)?;
        let h = x.iter().fold(splitmix(self.seed), |acc, xi| splitmix(acc ^ xi.to_bits()));
        Ok((h % self.k as u64) as usize)
    }
}

/// `p_i(t) = -Π_e (t - e)` over the endpoints of `J_i`, positive exactly on
/// the interiors of `J_i`, and `p_k(t) = (t - L)(t - R)`, positive exactly
/// outside `I_in = [L, R]`. Polynomials are left unnormalized because argmax
/// compares values across them.
pub fn build_indicator_polys(supports: &[IntervalUnion], hull: (f64, f64)) -> Result<Vec<Polynomial>> {
    for (i, a) in supports.iter().enumerate() {
        for b in &supports[i + 1..] {
            if a.intersects(b) {
                return Err(Error::InvalidParameter("support intervals overlap".into()));
            }
        }
        if a.intervals().iter().any(|(lo, hi)| *lo < hull.0 || *hi > hull.1) {
            return Err(Error::InvalidParameter("hull does not contain every support".into()));
        }
    }
    let mut polys: Vec<Polynomial> = supports
        .iter()
        .map(|j| Polynomial::from_roots(-1.0, j.endpoints().collect()))
        .collect();
    polys.push(Polynomial::from_roots(1.0, vec![hull.0, hull.1]));
    Ok(polys)
}

/// `f*(x) = argmax_j p_j(v·x)`.
pub fn build_ground_truth(inst: &HiddenInstance) -> UnivariatePolyMulticlass {
    let polys = build_indicator_polys(inst.supports(), inst.inner_hull())
        .expect("instance supports are disjoint by construction");
    UnivariatePolyMulticlass::new(inst.v().to_vec(), polys).expect("non-empty")
}

/// Label of `f*` at projection `z`, by direct interval membership.
pub fn ground_truth_label(inst: &HiddenInstance, z: f64) -> usize {
    inst.supports()
        .iter()
        .position(|j| j.contains(z))
        .unwrap_or(inst.supports().len())
}

/// Monomials of total degree at most `degree` in `dim` variables, graded
/// with the constant first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VeroneseBasis {
    dim: usize,
    degree: usize,
    exponents: Vec<Vec<u32>>,
    // Nonzero `(coordinate, power)` pairs of each monomial.
    sparse: Vec<Vec<(usize, i32)>>,
}

impl VeroneseBasis {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let size = binomial(dim + degree, degree);
        if size > 5_000_000.0 {
            return Err(Error::InvalidParameter(format!("basis of size {size:.0} is too large")));
        }
        let mut exponents = Vec::with_capacity(size as usize);
        for d in 0..=degree {
            let mut cur = vec![0u32; dim];
            compositions(d as u32, 0, &mut cur, &mut exponents);
        }
        let sparse = exponents
            .iter()
            .map(|e| e.iter().enumerate().filter(|(_, a)| **a > 0).map(|(i, a)| (i, *a as i32)).collect())
            .collect();
        Ok(Self { dim, degree, exponents, sparse })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn len(&self) -> usize {
        self.exponents.len()
    }
    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }
    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        self.embed_into(x, &mut out)?;
        Ok(out)
    }

    /// Like [`embed`](Self::embed) but reuses `out`.
    pub fn embed_into(&self, x: &[f64], out: &mut Vec<f64>) -> Result<()> {
        check_dim(self.dim, x)?;
        out.clear();
        out.extend(self.sparse.iter().map(|m| match m.as_slice() {
            [] => 1.0,
            [(i, 1)] => x[*i],
            _ => m.iter().map(|&(i, a)| x[i].powi(a)).product(),
        }));
        Ok(())
    }
}

fn compositions(rest: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == cur.len() {
        cur[pos] = rest;
        out.push(cur.clone());
        return;
    }
    for a in (0..=rest).rev() {
        cur[pos] = a;
        compositions(rest - a, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Feature map applied before a linear model.
#[derive(Debug, Clone, PartialEq)]
pub enum Embedding {
    Identity(usize),
    Veronese(VeroneseBasis),
}

impl Embedding {
    pub fn input_dim(&self) -> usize {
        match self {
            Embedding::Identity(d) => *d,
            Embedding::Veronese(b) => b.dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Embedding::Identity(d) => *d,
            Embedding::Veronese(b) => b.len(),
        }
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.output_dim());
        self.embed_into(x, &mut out)?;
        Ok(out)
    }

    pub fn embed_into(&self, x: &[f64], out: &mut Vec<f64>) -> Result<()> {
        match self {
            Embedding::Identity(d) => {
                check_dim(*d, x)?;
                out.clear();
                out.extend_from_slice(x);
                Ok(())
            }
            Embedding::Veronese(b) => b.embed_into(x, out),
        }
    }
}

/// A linear model applied after an embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedLinear {
    pub embedding: Embedding,
    pub linear: LinearMulticlass,
}

impl Classifier for EmbeddedLinear {
    fn k(&self) -> usize {
        self.linear.k()
    }
    fn dim(&self) -> usize {
        self.embedding.input_dim()
    }
    fn classify(&self, x: &[f64]) -> Result<usize> {
        self.linear.classify(&self.embedding.embed(x)?)
    }
}

/// Rewrites each `p_j(v·x)` as a linear functional on the monomial basis:
/// the weight of `x^α` is `c_{|α|} · (|α|! / Π α_i!) · v^α`.
pub fn lift(h: &UnivariatePolyMulticlass, basis: &VeroneseBasis) -> Result<LinearMulticlass> {
    if basis.dim() != h.v.len() {
        return Err(Error::DimensionMismatch { expected: h.v.len(), got: basis.dim() });
    }
    let need = h.degrees().into_iter().max().unwrap_or(0);
    if basis.degree() < need {
        return Err(Error::DegreeTooHigh(need));
    }
    let factorial: Vec<f64> = (0..=basis.degree())
        .scan(1.0, |acc, i| {
            if i > 0 {
                *acc *= i as f64;
            }
            Some(*acc)
        })
        .collect();
    let common: Vec<(usize, f64)> = basis
        .exponents()
        .iter()
        .map(|e| {
            let total: u32 = e.iter().sum();
            let mut w = factorial[total as usize];
            for (i, &a) in e.iter().enumerate() {
                w *= h.v[i].powi(a as i32) / factorial[a as usize];
            }
            (total as usize, w)
        })
        .collect();
    let rows = h
        .polys
        .iter()
        .map(|p| {
            common
                .iter()
                .map(|(deg, w)| p.coeffs().get(*deg).map_or(0.0, |c| c * w))
                .collect()
        })
        .collect();
    LinearMulticlass::new(rows)
}

/// Exact error of a `v`-measurable hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `Σ_j Pr(S_j)(1 - H_jj) + Σ_{i≠j} Pr(S_ji)(H_jj - H_ji)`.
    pub err: f64,
    /// `Σ_{j,i} Pr(S_ji)(1 - H_ji)`.
    pub err_cellwise: f64,
    pub opt: f64,
    /// `cells[j][i] = Pr(f* = j, h = i)`.
    pub cells: Vec<Vec<f64>>,
    /// `Pr(S_j)`.
    pub region_mass: Vec<f64>,
}

/// Evaluates `h` on every tooth of every component, locates label changes
/// by bisection and integrates the exact tooth mass of each labeled segment.
pub fn analytic_error(inst: &HiddenInstance, h: &UnivariatePolyMulticlass) -> Result<ErrorReport> {
    let k = inst.noise().k();
    if h.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: h.k() });
    }
    if h.v.len() != inst.v().len() {
        return Err(Error::DimensionMismatch { expected: inst.v().len(), got: h.v.len() });
    }
    let drift = h.v.iter().zip(inst.v()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if drift > 1e-12 {
        return Err(Error::InvalidParameter("hypothesis direction differs from the instance direction".into()));
    }
    let label_at = |z: f64| -> Result<usize> {
        let s = h.scores_at(z);
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::RootFinding(format!("non-finite score at z = {z}")));
        }
        Ok(argmax(&s))
    };

    let mut cells = vec![vec![0.0; k]; k];
    for (c, comb) in inst.combs().iter().enumerate() {
        let weight = inst.weights()[c] * comb.height();
        if weight == 0.0 {
            continue;
        }
        for p in comb.pieces() {
            let truth = if p.inner { c } else { k - 1 };
            for (lo, hi, label) in labeled_segments(p.lo(), p.hi(), &label_at)? {
                cells[truth][label] += weight * p.gauss_mass_within(lo, hi);
            }
        }
    }
    let total: f64 = cells.iter().flatten().sum();
    for row in &mut cells {
        for x in row.iter_mut() {
            *x /= total;
        }
    }

    let hm = inst.noise();
    let region_mass: Vec<f64> = cells.iter().map(|r| r.iter().sum()).collect();
    let mut err = 0.0;
    let mut err_cellwise = 0.0;
    for j in 0..k {
        err += region_mass[j] * (1.0 - hm.get(j, j));
        for i in 0..k {
            err_cellwise += cells[j][i] * (1.0 - hm.get(j, i));
            if i != j {
                err += cells[j][i] * (hm.get(j, j) - hm.get(j, i));
            }
        }
    }
    Ok(ErrorReport { err, err_cellwise, opt: opt_error(inst), cells, region_mass })
}

/// Segments of `[lo, hi]` on which `label_at` is constant.
fn labeled_segments<F>(lo: f64, hi: f64, label_at: &F) -> Result<Vec<(f64, f64, usize)>>
where
    F: Fn(f64) -> Result<usize>,
{
    let cells = (((hi - lo) / SCAN_CELL).ceil() as usize).max(MIN_CELLS_PER_PIECE);
    let step = (hi - lo) / cells as f64;
    let mut out = Vec::new();
    let mut start = lo;
    let mut cur = label_at(lo)?;
    let mut prev = lo;
    for c in 1..=cells {
        let z = if c == cells { hi } else { lo + c as f64 * step };
        let l = label_at(z)?;
        if l != cur {
            let (mut a, mut b) = (prev, z);
            let mut guard = 0;
            while b - a > BOUNDARY_TOL * (1.0 + a.abs()) {
                let mid = 0.5 * (a + b);
                if label_at(mid)? == cur {
                    a = mid;
                } else {
                    b = mid;
                }
                guard += 1;
                if guard > 200 {
                    return Err(Error::RootFinding(format!("bisection stalled near z = {a}")));
                }
            }
            out.push((start, b, cur));
            start = b;
            cur = l;
        }
        prev = z;
    }
    out.push((start, hi, cur));
    Ok(out)
}

/// `opt = Σ_j Pr(S_j)(1 - H_jj)` with `Pr(S_j) = a_j Pr_{A_1}(I_in)` for
/// `j < k`.
pub fn opt_error(inst: &HiddenInstance) -> f64 {
    let hm = inst.noise();
    let k = hm.k();
    let p_in = inst.spec().inner_mass();
    let mut inside = 0.0;
    let mut opt = 0.0;
    for (j, aj) in inst.weights().iter().enumerate() {
        let s = aj * p_in;
        inside += s;
        opt += s * (1.0 - hm.get(j, j));
    }
    opt + (1.0 - inside) * (1.0 - hm.get(k - 1, k - 1))
}

/// `Pr(h(x) = i)` for `x ~ N(0, I)`.
pub fn gaussian_label_masses(h: &UnivariatePolyMulticlass) -> Result<Vec<f64>> {
    let scale = h.v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut masses = vec![0.0; h.k()];
    if scale == 0.0 {
        masses[h.classify_projection(0.0)] = 1.0;
        return Ok(masses);
    }
    let label_at = |z: f64| -> Result<usize> {
        let s = h.scores_at(z);
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::RootFinding(format!("non-finite score at z = {z}")));
        }
        Ok(argmax(&s))
    };
    let reach = GAUSSIAN_REACH * scale;
    let segments = labeled_segments(-reach, reach, &label_at)?;
    let last = segments.len() - 1;
    for (idx, (lo, hi, label)) in segments.into_iter().enumerate() {
        let lo = if idx == 0 { f64::NEG_INFINITY } else { lo / scale };
        let hi = if idx == last { f64::INFINITY } else { hi / scale };
        masses[label] += gauss::mass(lo, hi);
    }
    Ok(masses)
}

/// Monte-Carlo 0-1 error with binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub err: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn mc_error<S, C>(src: &S, h: &C, n: usize, seed: u64, exec: Execution) -> Result<McEstimate>
where
    S: LabeledSource + ?Sized,
    C: Classifier + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    if h.dim() != src.dim() {
        return Err(Error::DimensionMismatch { expected: src.dim(), got: h.dim() });
    }
    let mistakes: usize = for_each_chunk(src, n, seed, exec, |batch| {
        batch
            .iter()
            .filter(|s| h.classify(&s.x).map_or(true, |l| l != s.y))
            .count()
    })
    .into_iter()
    .sum();
    let err = mistakes as f64 / n as f64;
    Ok(McEstimate { err, stderr: (err * (1.0 - err) / n as f64).sqrt(), n })
}

/// Classifier file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AnyClassifier {
    Linear(LinearMulticlass),
    Poly(UnivariatePolyMulticlass),
    /// Linear rows over the degree-`degree` monomial features of `x`.
    Veronese { dim: usize, degree: usize, rows: Vec<Vec<f64>> },
}

impl AnyClassifier {
    pub fn from_embedded(h: &EmbeddedLinear) -> Self {
        match &h.embedding {
            Embedding::Identity(_) => AnyClassifier::Linear(h.linear.clone()),
            Embedding::Veronese(b) => AnyClassifier::Veronese {
                dim: b.dim(),
                degree: b.degree(),
                rows: h.linear.rows().to_vec(),
            },
        }
    }

    /// Resolves the file form into an evaluable classifier.
    pub fn into_shared(self) -> Result<std::sync::Arc<dyn Classifier>> {
        Ok(match self {
            AnyClassifier::Linear(h) => std::sync::Arc::new(h),
            AnyClassifier::Poly(h) => std::sync::Arc::new(h),
            AnyClassifier::Veronese { dim, degree, rows } => {
                let basis = VeroneseBasis::new(dim, degree)?;
                let linear = LinearMulticlass::new(rows)?;
                if linear.dim() != basis.len() {
                    return Err(Error::DimensionMismatch { expected: basis.len(), got: linear.dim() });
                }
                std::sync::Arc::new(EmbeddedLinear { embedding: Embedding::Veronese(basis), linear })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hidden::random_direction;
    use crate::noise::NoiseMatrix;
    use crate::univariate::CombSpec;
    use approx::assert_relative_eq;

    fn eq1_desk() -> HiddenInstance {
        let spec = CombSpec::new(0.25, 1e-3, 4, 3).unwrap();
        HiddenInstance::eq1(random_direction(4, 2), spec).unwrap()
    }

    #[test]
    fn argmax_ties_go_to_smallest_index() {
        let w = LinearMulticlass::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(w.classify(&[0.0, 1.0, 0.0]).unwrap(), 1);
        assert_eq!(LinearMulticlass::zeros(3, 2).classify(&[3.0, -1.0]).unwrap(), 0);
        assert!(w.classify(&[1.0]).is_err());
    }

    #[test]
    fn single_interval_indicator() {
        let j = IntervalUnion::new(vec![(-1.0, 1.0)]).unwrap();
        let polys = build_indicator_polys(&[j], (-1.0, 1.0)).unwrap();
        assert_eq!(polys[0].coeffs(), &[1.0, 0.0, -1.0]);
        assert!(polys[0].eval(0.5) > 0.0 && polys[0].eval(1.5) < 0.0);
    }

    #[test]
    fn hull_polynomial_signs() {
        let polys = build_indicator_polys(&[], (-1.05, 1.01)).unwrap();
        assert!(polys[0].eval(0.0) < 0.0);
        assert!(polys[0].eval(2.0) > 0.0 && polys[0].eval(-2.0) > 0.0);
    }

    #[test]
    fn overlapping_supports_are_rejected() {
        let a = IntervalUnion::new(vec![(0.0, 1.0)]).unwrap();
        let b = IntervalUnion::new(vec![(0.5, 2.0)]).unwrap();
        assert!(build_indicator_polys(&[a, b], (0.0, 2.0)).is_err());
    }

    #[test]
    fn ground_truth_matches_membership() {
        let inst = eq1_desk();
        let f = build_ground_truth(&inst);
        assert_eq!(f.degrees(), vec![18, 18, 2]);
        for (j, s) in inst.supports().iter().enumerate() {
            for (lo, hi) in s.intervals() {
                assert_eq!(f.classify_projection(0.5 * (lo + hi)), j);
            }
        }
        assert_eq!(f.classify_projection(inst.inner_hull().1 + 1.0), 2);
    }

    #[test]
    fn veronese_basis_layout() {
        let b = VeroneseBasis::new(3, 2).unwrap();
        assert_eq!(b.len(), 10);
        assert_eq!(b.exponents()[0], vec![0, 0, 0]);
        assert_eq!(b.embed(&[2.0, 3.0, 5.0]).unwrap()[..4], [1.0, 2.0, 3.0, 5.0]);
    }

    #[test]
    fn lift_of_square() {
        let h = UnivariatePolyMulticlass::new(vec![1.0, 0.0], vec![Polynomial::new(vec![0.0, 0.0, 1.0])]).unwrap();
        let b = VeroneseBasis::new(2, 2).unwrap();
        let w = lift(&h, &b).unwrap();
        for (e, wi) in b.exponents().iter().zip(&w.rows()[0]) {
            let expect = if e == &vec![2, 0] { 1.0 } else { 0.0 };
            assert_eq!(*wi, expect);
        }
    }

    #[test]
    fn lift_of_diagonal_quadratic() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = UnivariatePolyMulticlass::new(vec![s, s], vec![Polynomial::new(vec![1.0, 0.0, -1.0])]).unwrap();
        let b = VeroneseBasis::new(2, 2).unwrap();
        let w = lift(&h, &b).unwrap();
        for (e, wi) in b.exponents().iter().zip(&w.rows()[0]) {
            let expect = match e.as_slice() {
                [0, 0] => 1.0,
                [2, 0] | [0, 2] => -0.5,
                [1, 1] => -1.0,
                _ => 0.0,
            };
            assert_relative_eq!(*wi, expect, epsilon = 1e-15);
        }
        assert!(matches!(lift(&h, &VeroneseBasis::new(2, 1).unwrap()), Err(Error::DegreeTooHigh(2))));
    }

    #[test]
    fn gaussian_label_masses_of_threshold() {
        let h = UnivariatePolyMulticlass::new(
            vec![0.0, 2.0],
            vec![Polynomial::constant(0.0), Polynomial::new(vec![-1.0, 1.0])],
        )
        .unwrap();
        // Label 2 iff 2 x_2 > 1.
        let m = gaussian_label_masses(&h).unwrap();
        assert_relative_eq!(m[1], gauss::sf(0.5), epsilon = 1e-12);
        assert_relative_eq!(m[0] + m[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_classifier_error_and_gap() {
        let inst = eq1_desk();
        let k_const = UnivariatePolyMulticlass::constant(inst.v().to_vec(), 3, 2).unwrap();
        let rep = analytic_error(&inst, &k_const).unwrap();
        assert_relative_eq!(rep.err, 0.6, epsilon = 1e-12);
        let alpha = 0.1 * inst.spec().inner_mass();
        assert_relative_eq!(rep.err - rep.opt, 2.0 * alpha, epsilon = 1e-10);
    }

    #[test]
    fn ground_truth_attains_opt() {
        let inst = eq1_desk();
        let rep = analytic_error(&inst, &build_ground_truth(&inst)).unwrap();
        assert_relative_eq!(rep.err, rep.opt, epsilon = 1e-10);
        assert_relative_eq!(rep.err, rep.err_cellwise, epsilon = 1e-10);
        assert_relative_eq!(rep.opt, 0.6 - 0.2 * inst.spec().inner_mass(), epsilon = 1e-12);
    }

    #[test]
    fn noise_free_opt_is_zero() {
        let spec = CombSpec::new(0.25, 1e-3, 4, 3).unwrap();
        let inst =
            HiddenInstance::new_unchecked(random_direction(2, 1), spec, vec![0.5, 0.5], NoiseMatrix::identity(3))
                .unwrap();
        assert_eq!(opt_error(&inst), 0.0);
    }

    #[test]
    fn classifier_json_shapes() {
        let lin = AnyClassifier::Linear(LinearMulticlass::new(vec![vec![1.0], vec![2.0]]).unwrap());
        let j = serde_json::to_value(&lin).unwrap();
        assert_eq!(j, serde_json::json!({"type": "linear", "rows": [[1.0], [2.0]]}));
        let poly: AnyClassifier =
            serde_json::from_value(serde_json::json!({"type": "poly", "v": [1.0], "polys": [[0.0, 1.0], [1.0]]})).unwrap();
        assert_eq!(poly.into_shared().unwrap().classify(&[2.0]).unwrap(), 0);
        let inst = eq1_desk();
        let f = AnyClassifier::Poly(build_ground_truth(&inst));
        let back: AnyClassifier = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }
}
