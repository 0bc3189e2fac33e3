//! Comb distributions and their shifted variants.
//!
//! The comb `G_{δ,ξ}` restricts the standard normal to the teeth
//! `[nδ - ξ, nδ + ξ]` and rescales by `δ / 2ξ`; `A_1` is its normalization.
//! `A_i` (component `i - 1` here) moves the `2m + 1` central teeth left by
//! `4(i - 1)ξ` and keeps the outer teeth of `A_1`.
//!
//! Every closed form works on [`Piece`]s: on a piece the density is
//! `c · φ(x + shift)` for `x ∈ [base_lo - shift, base_hi - shift]`.

use crate::error::{Error, Result};
use crate::gauss::{self, MAX_MOMENT_DEGREE};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Teeth are kept while their centers lie within this radius. Gaussian
/// mass beyond it is below 1e-88, and `x^60 φ(x)` is negligible there too.
pub const TAIL_RADIUS: f64 = 20.0;

/// Parameters `(δ, ξ, m, k)` of the comb family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCombSpec", into = "RawCombSpec")]
pub struct CombSpec {
    delta: f64,
    xi: f64,
    m: usize,
    k: usize,
    tail_cutoff: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCombSpec {
    pub delta: f64,
    pub xi: f64,
    pub m: usize,
    pub k: usize,
}

impl TryFrom<RawCombSpec> for CombSpec {
    type Error = Error;
    fn try_from(r: RawCombSpec) -> Result<Self> {
        CombSpec::new(r.delta, r.xi, r.m, r.k)
    }
}

impl From<CombSpec> for RawCombSpec {
    fn from(s: CombSpec) -> Self {
        RawCombSpec { delta: s.delta, xi: s.xi, m: s.m, k: s.k }
    }
}

impl CombSpec {
    /// Validates `δ > 4(k-1)ξ`, `4(k-1)ξ < 1`, and `δ > 2(4k-7)ξ`.
    ///
    /// The last condition keeps the shifted central block from reaching the
    /// first outer tooth, so each `A_i` integrates to one and agrees with
    /// `A_1` outside `I_in`. `k = 2` with `ξ = δ/2` is accepted as the
    /// degenerate tiling comb, which is exactly `N(0, 1)`.
    pub fn new(delta: f64, xi: f64, m: usize, k: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::InvalidParameter(format!("xi must be positive, got {xi}")));
        }
        if m < 1 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        if k < 2 {
            return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
        }
        let tiling = k == 2 && xi == 0.5 * delta;
        if !tiling {
            let span = 4.0 * (k as f64 - 1.0) * xi;
            if delta <= span {
                return Err(Error::InvalidParameter(format!(
                    "delta = {delta} must exceed 4(k-1)xi = {span}"
                )));
            }
            if span >= 1.0 {
                return Err(Error::InvalidParameter(format!("4(k-1)xi = {span} must be below 1")));
            }
            let block = 2.0 * (4.0 * k as f64 - 7.0).max(1.0) * xi;
            if delta <= block {
                return Err(Error::InvalidParameter(format!(
                    "delta = {delta} must exceed 2(4k-7)xi = {block}"
                )));
            }
        }
        let tail_cutoff = (TAIL_RADIUS / delta).ceil() as usize;
        if m >= tail_cutoff {
            return Err(Error::InvalidParameter(format!(
                "m * delta = {} reaches the tail cutoff radius {TAIL_RADIUS}",
                m as f64 * delta
            )));
        }
        Ok(Self { delta, xi, m, k, tail_cutoff })
    }

    /// Comb with `ξ = δ/2` (teeth tile the line) and a single component.
    pub fn tiling(delta: f64, m: usize) -> Result<Self> {
        Self::new(delta, 0.5 * delta, m, 2)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k(&self) -> usize {
        self.k
    }
    /// Largest `|n|` kept in sums over teeth.
    pub fn tail_cutoff(&self) -> usize {
        self.tail_cutoff
    }
    pub fn is_tiling(&self) -> bool {
        self.k == 2 && self.xi == 0.5 * self.delta
    }
    /// Number of components `A_1..A_{k-1}`.
    pub fn components(&self) -> usize {
        self.k - 1
    }

    /// Leftward shift `4iξ` of component `i` (0-based).
    pub fn shift(&self, i: usize) -> f64 {
        4.0 * i as f64 * self.xi
    }

    fn tooth(&self, n: i64) -> (f64, f64) {
        let c = n as f64 * self.delta;
        (c - self.xi, c + self.xi)
    }

    fn teeth(&self) -> impl Iterator<Item = (i64, f64, f64)> + '_ {
        let cut = self.tail_cutoff as i64;
        (-cut..=cut).map(move |n| {
            let (lo, hi) = self.tooth(n);
            (n, lo, hi)
        })
    }

    /// `Z = ‖G_{δ,ξ}‖₁ = Σ_n (δ/2ξ) [Φ(nδ + ξ) - Φ(nδ - ξ)]`.
    pub fn norm_const(&self) -> f64 {
        let scale = self.delta / (2.0 * self.xi);
        self.teeth().map(|(_, lo, hi)| scale * gauss::mass(lo, hi)).sum()
    }

    /// Density height multiplier `δ / (2ξZ)` of the normalized comb.
    pub fn height(&self) -> f64 {
        self.delta / (2.0 * self.xi * self.norm_const())
    }

    /// `I_in = [-mδ - (4k-7)ξ, mδ + ξ]`.
    pub fn inner_hull(&self) -> (f64, f64) {
        let md = self.m as f64 * self.delta;
        let left = (4.0 * self.k as f64 - 7.0).max(1.0);
        (-md - left * self.xi, md + self.xi)
    }

    /// `Pr_{A_1}(I_in)`; shared by every component.
    pub fn inner_mass(&self) -> f64 {
        let c = self.height();
        let m = self.m as i64;
        (-m..=m)
            .map(|n| {
                let (lo, hi) = self.tooth(n);
                c * gauss::mass(lo, hi)
            })
            .sum()
    }

    /// Support `J_i` of component `i` inside `I_in`, and the hull `I_in`.
    pub fn support_intervals(&self, i: usize) -> Result<(IntervalUnion, (f64, f64))> {
        let comb = ShiftedComb::new(*self, i)?;
        let intervals = comb.pieces.iter().filter(|p| p.inner).map(|p| (p.lo(), p.hi())).collect();
        Ok((IntervalUnion::new(intervals)?, self.inner_hull()))
    }

    pub fn combs(&self) -> Vec<ShiftedComb> {
        (0..self.components())
            .map(|i| ShiftedComb::new(*self, i).expect("index in range"))
            .collect()
    }

    /// `χ_{N(0,1)}(A_i, A_j) = ∫ A_i A_j / φ - 1` in closed form.
    ///
    /// On a shifted tooth `φ(x + s)² / φ(x) = e^{s²} φ(x + 2s)`; inner
    /// supports of distinct components are disjoint, so only the shared
    /// outer teeth contribute when `i ≠ j`.
    pub fn chisq_pair(&self, i: usize, j: usize) -> Result<f64> {
        let a = ShiftedComb::new(*self, i)?;
        ShiftedComb::new(*self, j)?;
        let c = a.height;
        let mut acc = 0.0;
        for p in &a.pieces {
            if !p.inner {
                acc += gauss::mass(p.base_lo, p.base_hi);
            } else if i == j {
                let s = p.shift;
                acc += (s * s).exp() * gauss::mass(p.base_lo + s, p.base_hi + s);
            }
        }
        Ok(c * c * acc - 1.0)
    }

    /// `ν = max_i max_{1≤ℓ≤t} |E_{A_i} x^ℓ - γ_ℓ|`.
    pub fn moment_deviation(&self, t: usize) -> Result<f64> {
        let mut nu: f64 = 0.0;
        for comb in self.combs() {
            for r in comb.moments(t)?.iter().skip(1) {
                nu = nu.max(r.deviation);
            }
        }
        Ok(nu)
    }
}

/// A tooth of a component: density `c · φ(x + shift)` on
/// `[base_lo - shift, base_hi - shift]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub base_lo: f64,
    pub base_hi: f64,
    pub shift: f64,
    /// Central tooth (`|n| ≤ m`), i.e. part of `J_i`.
    pub inner: bool,
}

impl Piece {
    #[inline]
    pub fn lo(&self) -> f64 {
        self.base_lo - self.shift
    }
    #[inline]
    pub fn hi(&self) -> f64 {
        self.base_hi - self.shift
    }
    /// `∫_{[a,b] ∩ piece} φ(x + shift) dx`.
    pub fn gauss_mass_within(&self, a: f64, b: f64) -> f64 {
        let lo = self.lo().max(a);
        let hi = self.hi().min(b);
        if hi <= lo {
            return 0.0;
        }
        gauss::mass(lo + self.shift, hi + self.shift)
    }
}

/// Component `A_{index+1}` of a comb family with cached normalization.
#[derive(Debug, Clone)]
pub struct ShiftedComb {
    spec: CombSpec,
    index: usize,
    norm_const: f64,
    height: f64,
    pieces: Vec<Piece>,
    cumulative: Vec<f64>,
}

impl ShiftedComb {
    pub fn new(spec: CombSpec, index: usize) -> Result<Self> {
        if index >= spec.components() {
            return Err(Error::InvalidParameter(format!(
                "component index {index} out of range for k = {}",
                spec.k
            )));
        }
        let norm_const = spec.norm_const();
        let height = spec.delta / (2.0 * spec.xi * norm_const);
        let s = spec.shift(index);
        let m = spec.m as i64;
        let pieces: Vec<Piece> = spec
            .teeth()
            .map(|(n, lo, hi)| {
                let inner = n.abs() <= m;
                Piece { base_lo: lo, base_hi: hi, shift: if inner { s } else { 0.0 }, inner }
            })
            .collect();
        let mut cumulative = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for p in &pieces {
            acc += height * gauss::mass(p.base_lo, p.base_hi);
            cumulative.push(acc);
        }
        Ok(Self { spec, index, norm_const, height, pieces, cumulative })
    }

    pub fn spec(&self) -> &CombSpec {
        &self.spec
    }
    pub fn index(&self) -> usize {
        self.index
    }
    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }
    pub fn height(&self) -> f64 {
        self.height
    }
    pub fn shift(&self) -> f64 {
        self.spec.shift(self.index)
    }
    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Total mass of the truncated representation (1 up to rounding).
    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn a1(&self, x: f64) -> f64 {
        let n = (x / self.spec.delta).round();
        if n.abs() > self.spec.tail_cutoff as f64 {
            return 0.0;
        }
        if (x - n * self.spec.delta).abs() <= self.spec.xi {
            self.height * gauss::pdf(x)
        } else {
            0.0
        }
    }

    /// `A_i(x)`: `A_1(x + 4(i-1)ξ)` for `|x| ≤ mδ + (4i-3)ξ`, else `A_1(x)`.
    pub fn density(&self, x: f64) -> f64 {
        let window = self.spec.m as f64 * self.spec.delta + (4.0 * self.index as f64 + 1.0) * self.spec.xi;
        if x.abs() <= window {
            self.a1(x + self.shift())
        } else {
            self.a1(x)
        }
    }

    /// `Pr_{A_i}([a, b])`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        self.height * self.pieces.iter().map(|p| p.gauss_mass_within(a, b)).sum::<f64>()
    }

    /// Closed-form `E_{A_i}[x^t]` through incomplete Gaussian moments.
    pub fn moment(&self, t: usize) -> Result<MomentReport> {
        Ok(self.moments(t)?.pop().expect("non-empty"))
    }

    /// Reports for every degree `0..=t_max`.
    pub fn moments(&self, t_max: usize) -> Result<Vec<MomentReport>> {
        if t_max > MAX_MOMENT_DEGREE {
            return Err(Error::DegreeTooHigh(t_max));
        }
        let binom = binomial_rows(t_max);
        let mut sums = vec![0.0; t_max + 1];
        for p in &self.pieces {
            let m = gauss::incomplete_moments(t_max, p.base_lo, p.base_hi);
            if p.shift == 0.0 {
                for (acc, mt) in sums.iter_mut().zip(&m) {
                    *acc += mt;
                }
                continue;
            }
            // ∫ x^t φ(x+s) over the shifted tooth = Σ_l C(t,l) (-s)^{t-l} M_l
            let ns = -p.shift;
            for (t, acc) in sums.iter_mut().enumerate() {
                let mut v = 0.0;
                let mut pw = 1.0;
                for l in (0..=t).rev() {
                    v += binom[t][l] * pw * m[l];
                    pw *= ns;
                }
                *acc += v;
            }
        }
        Ok(sums
            .into_iter()
            .enumerate()
            .map(|(t, s)| MomentReport::new(t, self.height * s))
            .collect())
    }

    /// Draws `(x, inner)` where `inner` marks a draw from a tooth of `J_i`.
    ///
    /// A tooth is chosen with probability proportional to its mass, then a
    /// truncated normal is drawn on the unshifted tooth by inverting its CDF
    /// and moved by the component shift.
    pub fn sample_with_flag<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, bool) {
        let total = self.total_mass();
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|c| *c <= u).min(self.pieces.len() - 1);
        let p = &self.pieces[idx];
        let y = truncated_normal(p.base_lo, p.base_hi, rng.random::<f64>());
        (y - p.shift, p.inner)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_with_flag(rng).0
    }
}

/// Inverse-CDF draw from `N(0, 1)` restricted to `[a, b]`, for `u ∈ [0, 1)`.
pub fn truncated_normal(a: f64, b: f64, u: f64) -> f64 {
    let total = gauss::mass(a, b);
    let target = u * total;
    let (mut lo, mut hi) = (a, b);
    let mut y = a + u * (b - a);
    for _ in 0..100 {
        let f = gauss::mass(a, y) - target;
        if f > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let d = gauss::pdf(y);
        let mut next = if d > 0.0 { y - f / d } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-16 * (1.0 + y.abs()) || hi - lo <= f64::EPSILON * (1.0 + y.abs()) {
            y = next;
            break;
        }
        y = next;
    }
    y.clamp(a, b)
}

fn binomial_rows(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for t in 0..=n {
        let mut row = vec![1.0; t + 1];
        for l in 1..t {
            row[l] = rows[t - 1][l - 1] + rows[t - 1][l];
        }
        rows.push(row);
    }
    rows
}

/// Sorted closed intervals with disjoint interiors. Neighbors may share an
/// endpoint only in the tiling comb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in intervals.windows(2) {
            if w[0].1 > w[1].0 {
                return Err(Error::InvalidParameter(format!(
                    "intervals [{}, {}] and [{}, {}] overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        if let Some(bad) = intervals.iter().find(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidParameter(format!("interval [{}, {}] is reversed", bad.0, bad.1)));
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        let idx = self.intervals.partition_point(|(lo, _)| *lo <= x);
        idx > 0 && x <= self.intervals[idx - 1].1
    }

    /// Whether `x` lies strictly inside one of the intervals.
    pub fn contains_interior(&self, x: f64) -> bool {
        let idx = self.intervals.partition_point(|(lo, _)| *lo < x);
        idx > 0 && x < self.intervals[idx - 1].1
    }

    pub fn endpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.intervals.iter().flat_map(|(lo, hi)| [*lo, *hi])
    }

    pub fn intersects(&self, other: &IntervalUnion) -> bool {
        self.intervals
            .iter()
            .any(|(a, b)| other.intervals.iter().any(|(c, d)| a <= d && c <= b))
    }
}

/// `E[x^t]` against the Gaussian reference `γ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub t: usize,
    pub value: f64,
    pub gamma_t: f64,
    pub deviation: f64,
}

impl MomentReport {
    pub fn new(t: usize, value: f64) -> Self {
        let gamma_t = gauss::gaussian_moment(t);
        Self { t, value, gamma_t, deviation: (value - gamma_t).abs() }
    }

    pub const CSV_HEADER: &'static str = "t,value,gamma_t,deviation";

    pub fn csv_row(&self) -> String {
        format!("{},{:.17e},{:.17e},{:.17e}", self.t, self.value, self.gamma_t, self.deviation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk() -> CombSpec {
        CombSpec::new(0.5, 0.01, 4, 3).unwrap()
    }

    #[test]
    fn tiling_comb_is_gaussian() {
        let spec = CombSpec::tiling(1.0, 3).unwrap();
        assert_relative_eq!(spec.norm_const(), 1.0, epsilon = 1e-14);
        let a1 = ShiftedComb::new(spec, 0).unwrap();
        assert_relative_eq!(a1.moment(2).unwrap().value, 1.0, epsilon = 1e-10);
        assert!(spec.chisq_pair(0, 0).unwrap().abs() < 1e-10);
        let expect = gauss::cdf(3.5) - gauss::cdf(-3.5);
        assert_relative_eq!(spec.inner_mass(), expect, epsilon = 1e-10);
    }

    #[test]
    fn norm_const_is_near_one_for_fine_combs() {
        for (delta, xi) in [(0.5, 0.01), (0.25, 0.001), (0.1, 1e-6)] {
            let z = CombSpec::new(delta, xi, 2, 3).unwrap().norm_const();
            assert!((z - 1.0).abs() < 1e-10, "delta={delta}: Z={z}");
        }
        // Coarse teeth leave a visible aliasing error.
        let coarse = CombSpec::new(2.0, 0.05, 1, 3).unwrap().norm_const();
        assert!((coarse - 1.0).abs() > 1e-4);
    }

    #[test]
    fn density_spot_values() {
        let spec = desk();
        let a1 = ShiftedComb::new(spec, 0).unwrap();
        let a2 = ShiftedComb::new(spec, 1).unwrap();
        let peak = spec.delta() / (2.0 * spec.xi()) * gauss::pdf(0.0) / spec.norm_const();
        assert_relative_eq!(a1.density(0.0), peak, max_relative = 1e-14);
        assert_eq!(a1.density(0.25), 0.0);
        assert_relative_eq!(a2.density(-4.0 * spec.xi()), a1.density(0.0), max_relative = 1e-14);
    }

    #[test]
    fn support_intervals_follow_shift_pattern() {
        let spec = CombSpec::new(0.5, 0.01, 2, 3).unwrap();
        let (j1, hull) = spec.support_intervals(0).unwrap();
        assert_eq!(j1.len(), 5);
        for (n, (lo, hi)) in (-2..=2).zip(j1.intervals()) {
            assert_relative_eq!(*lo, n as f64 * 0.5 - 0.01, epsilon = 1e-15);
            assert_relative_eq!(*hi, n as f64 * 0.5 + 0.01, epsilon = 1e-15);
        }
        let (j2, _) = spec.support_intervals(1).unwrap();
        assert!(!j1.intersects(&j2));
        assert_relative_eq!(hull.0, -1.05, epsilon = 1e-12);
        assert_relative_eq!(hull.1, 1.01, epsilon = 1e-12);
        for (lo, hi) in j2.intervals() {
            assert_relative_eq!(hi - lo, 0.02, epsilon = 1e-12);
        }
    }

    #[test]
    fn odd_moment_of_first_component_vanishes() {
        let a1 = ShiftedComb::new(desk(), 0).unwrap();
        assert!(a1.moment(1).unwrap().value.abs() < 1e-12);
        assert!(a1.moment(5).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn components_are_normalized() {
        let spec = desk();
        for c in spec.combs() {
            assert_relative_eq!(c.moment(0).unwrap().value, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn chisq_is_symmetric() {
        let spec = desk();
        assert_relative_eq!(
            spec.chisq_pair(0, 1).unwrap(),
            spec.chisq_pair(1, 0).unwrap(),
            epsilon = 1e-10
        );
        assert!(spec.chisq_pair(1, 1).unwrap() >= 0.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(CombSpec::new(0.5, 0.2, 2, 3).is_err());
        assert!(CombSpec::new(0.5, 0.0, 2, 3).is_err());
        assert!(CombSpec::new(0.5, 0.01, 0, 3).is_err());
        // Passes 4(k-1)xi but not 2(4k-7)xi.
        assert!(CombSpec::new(0.09, 0.01, 2, 3).is_err());
        let a1 = ShiftedComb::new(desk(), 0).unwrap();
        assert!(matches!(a1.moment(61), Err(Error::DegreeTooHigh(61))));
        assert!(ShiftedComb::new(desk(), 2).is_err());
    }

    #[test]
    fn samples_of_second_component_stay_on_support() {
        let spec = desk();
        let a2 = ShiftedComb::new(spec, 1).unwrap();
        let (j2, (lo, hi)) = spec.support_intervals(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20_000 {
            let x = a2.sample(&mut rng);
            if x >= lo && x <= hi {
                assert!(j2.contains(x), "{x} escaped J_2");
            }
        }
    }

    #[test]
    fn truncated_normal_inverts_cdf() {
        for &(a, b) in &[(-0.3, 0.2), (1.0 - 1e-9, 1.0 + 1e-9), (4.0, 7.0)] {
            for &u in &[0.0, 0.1, 0.5, 0.9] {
                let y = truncated_normal(a, b, u);
                assert!(y >= a && y <= b);
                if b - a > 1e-6 {
                    let frac = gauss::mass(a, y) / gauss::mass(a, b);
                    assert!((frac - u).abs() < 1e-9, "a={a} u={u} frac={frac}");
                } else {
                    assert!((y - (a + u * (b - a))).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn moment_csv_row_has_four_columns() {
        let r = MomentReport::new(4, 3.1);
        assert_eq!(r.csv_row().split(',').count(), 4);
        assert_eq!(r.gamma_t, 3.0);
    }

    #[test]
    fn json_schema_is_flat() {
        let s = serde_json::to_value(desk()).unwrap();
        assert_eq!(s, serde_json::json!({"delta": 0.5, "xi": 0.01, "m": 4, "k": 3}));
        assert!(serde_json::from_value::<CombSpec>(serde_json::json!({"delta": 0.5, "xi": 0.2, "m": 2, "k": 3})).is_err());
    }
}
