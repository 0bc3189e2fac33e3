//! The STAT(τ) oracle.
//!
//! Analytic mode computes `E[q]` (closed form, quadrature, or a fixed
//! internal sample pool) and answers with the quantized value
//! `2τ⌊E/2τ⌋ + τ`. Empirical mode answers with a mean over fresh draws.

use crate::classify::{analytic_error, gaussian_label_masses, Classifier};
use crate::error::{Error, Result};
use crate::exec::{self, Execution, CHUNK};
use crate::gauss::{self, GaussLegendre};
use crate::hidden::{HiddenInstance, LabeledSample, LabeledSource, NullInstance};
use crate::noise::NoiseMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

/// Failure probability per empirical answer.
pub const EMPIRICAL_FAILURE: f64 = 1e-3;
pub const DEFAULT_POOL_SIZE: usize = 50_000;
const POOL_SEED: u64 = 0x5e_ed0f_9001;
/// Outer panels on comb pieces are at most this wide.
const PANEL_WIDTH: f64 = 0.05;
const OUTER_NODES: usize = 8;
const INNER_NODES: usize = 80;
const GAUSS_REACH: f64 = 10.0;
const NULL_PANELS: usize = 200;
/// Pieces lighter than this are skipped in quadrature.
const NEGLIGIBLE_MASS: f64 = 1e-20;

/// `2τ⌊E/2τ⌋ + τ`, or `E` itself when `τ = 0`.
///
/// A grid point off by a few ulps of rounding still counts as honest; if
/// rounding pushes it further than that the answer falls back to `E`.
pub fn quantize(e: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return e;
    }
    let width = 2.0 * tau;
    let mut z = (e / width).floor();
    for _ in 0..3 {
        let a = width * z + tau;
        let slack = tau + 4.0 * f64::EPSILON * a.abs().max(e.abs()).max(tau);
        if a - e > slack {
            z -= 1.0;
        } else if e - a > slack {
            z += 1.0;
        } else {
            return a;
        }
    }
    e
}

/// Hoeffding sample size `⌈2 ln(2/β)/τ²⌉` for failure probability `β`.
pub fn empirical_sample_size(tau: f64) -> usize {
    (2.0 * (2.0 / EMPIRICAL_FAILURE).ln() / (tau * tau)).ceil() as usize
}

/// Distribution queried by an oracle.
#[derive(Debug, Clone)]
pub enum Target {
    Hidden(HiddenInstance),
    Null(NullInstance),
}

impl Target {
    pub fn is_null(&self) -> bool {
        matches!(self, Target::Null(_))
    }

    pub fn label_marginal(&self) -> Vec<f64> {
        match self {
            Target::Hidden(i) => i.label_marginal(),
            Target::Null(n) => n.label_marginal(),
        }
    }
}

impl LabeledSource for Target {
    fn dim(&self) -> usize {
        match self {
            Target::Hidden(i) => i.dim(),
            Target::Null(n) => n.dim(),
        }
    }
    fn k(&self) -> usize {
        self.noise().k()
    }
    fn noise(&self) -> &NoiseMatrix {
        match self {
            Target::Hidden(i) => i.noise(),
            Target::Null(n) => n.noise(),
        }
    }
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledSample {
        match self {
            Target::Hidden(i) => i.sample(rng),
            Target::Null(n) => n.sample(rng),
        }
    }
}

pub type ProjectedFn = Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>;
pub type GeneralFn = Arc<dyn Fn(&[f64], usize) -> f64 + Send + Sync>;
pub type BatchFn = Arc<dyn Fn(&[f64], usize, &mut [f64]) + Send + Sync>;

/// What a query evaluates; outputs are clamped to `[-1, 1]`.
#[derive(Clone)]
pub enum QueryKind {
    Constant(f64),
    /// `1[y = i]`.
    Label(usize),
    /// `1[h(x) ≠ y]`.
    Misclassification(Arc<dyn Classifier>),
    /// `f(u·x, y)`.
    Projected { u: Vec<f64>, f: ProjectedFn },
    /// Arbitrary `f(x, y)`; analytic mode averages it over the internal pool.
    General(GeneralFn),
}

#[derive(Clone)]
pub struct BoundedQuery {
    pub id: String,
    pub kind: QueryKind,
}

impl BoundedQuery {
    pub fn new(id: impl Into<String>, kind: QueryKind) -> Self {
        Self { id: id.into(), kind }
    }

    fn eval(&self, s: &LabeledSample) -> Result<f64> {
        Ok(match &self.kind {
            QueryKind::Constant(c) => *c,
            QueryKind::Label(i) => f64::from(u8::from(s.y == *i)),
            QueryKind::Misclassification(h) => f64::from(u8::from(h.classify(&s.x)? != s.y)),
            QueryKind::Projected { u, f } => f(dot(u, &s.x), s.y),
            QueryKind::General(f) => f(&s.x, s.y),
        })
    }
}

/// `outputs` statistics evaluated together; each output counts as one query.
#[derive(Clone)]
pub struct BatchQuery {
    pub id: String,
    pub outputs: usize,
    pub eval: BatchFn,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn clamp_unit(x: f64) -> (f64, bool) {
    if x.is_nan() {
        return (0.0, true);
    }
    let c = x.clamp(-1.0, 1.0);
    (c, c != x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OracleMode {
    AnalyticQuantized,
    /// `n = None` uses the Hoeffding size for `τ`.
    Empirical { n: Option<usize>, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub query_index: usize,
    pub query_id: String,
    /// Present in analytic mode.
    pub true_expectation: Option<f64>,
    pub answer: f64,
}

impl TranscriptEntry {
    pub const CSV_HEADER: &'static str = "query_index,query_id,true_expectation,answer";

    pub fn csv_row(&self) -> String {
        let e = self.true_expectation.map(|e| format!("{e:.17e}")).unwrap_or_default();
        format!("{},{},{},{:.17e}", self.query_index, self.query_id, e, self.answer)
    }
}

/// A STAT(τ) session over one target.
pub struct SqOracle {
    target: Target,
    tau: f64,
    mode: OracleMode,
    exec: Execution,
    pool_size: usize,
    pool_seed: u64,
    pool: OnceLock<Vec<LabeledSample>>,
    transcript: Vec<TranscriptEntry>,
    evaluations: u64,
    clamped: u64,
}

impl SqOracle {
    pub fn new(target: Target, tau: f64, mode: OracleMode) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance must be non-negative, got {tau}")));
        }
        if tau == 0.0 && matches!(mode, OracleMode::Empirical { .. }) {
            return Err(Error::InvalidParameter("empirical mode needs a positive tolerance".into()));
        }
        Ok(Self {
            target,
            tau,
            mode,
            exec: Execution::default(),
            pool_size: DEFAULT_POOL_SIZE,
            pool_seed: POOL_SEED,
            pool: OnceLock::new(),
            transcript: Vec::new(),
            evaluations: 0,
            clamped: 0,
        })
    }

    pub fn analytic(target: Target, tau: f64) -> Result<Self> {
        Self::new(target, tau, OracleMode::AnalyticQuantized)
    }

    /// Size and seed of the sample pool backing general analytic queries.
    pub fn with_pool(mut self, size: usize, seed: u64) -> Self {
        self.pool_size = size.max(1);
        self.pool_seed = seed;
        self.pool = OnceLock::new();
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn mode(&self) -> OracleMode {
        self.mode
    }
    pub fn target(&self) -> &Target {
        &self.target
    }
    pub fn dim(&self) -> usize {
        self.target.dim()
    }
    pub fn k(&self) -> usize {
        self.target.k()
    }
    /// The known noise matrix.
    pub fn noise(&self) -> &NoiseMatrix {
        self.target.noise()
    }
    pub fn query_count(&self) -> usize {
        self.transcript.len()
    }
    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }
    pub fn pool_size(&self) -> usize {
        self.pool_size
    }
    /// `(clamped outputs, evaluated outputs)` over sample-based answers.
    pub fn clamp_stats(&self) -> (u64, u64) {
        (self.clamped, self.evaluations)
    }

    fn pool(&self) -> &[LabeledSample] {
        self.pool
            .get_or_init(|| self.target.sample_n(self.pool_size, self.pool_seed, self.exec))
    }

    fn record(&mut self, id: String, truth: Option<f64>, answer: f64) {
        let query_index = self.transcript.len();
        self.transcript.push(TranscriptEntry { query_index, query_id: id, true_expectation: truth, answer });
    }

    fn answer(&self, e: f64) -> f64 {
        quantize(e, self.tau)
    }

    fn empirical_n(&self) -> usize {
        match self.mode {
            OracleMode::Empirical { n: Some(n), .. } => n.max(1),
            _ => empirical_sample_size(self.tau),
        }
    }

    fn fresh_seed(&self) -> u64 {
        let base = match self.mode {
            OracleMode::Empirical { seed, .. } => seed,
            OracleMode::AnalyticQuantized => self.pool_seed,
        };
        base ^ (self.transcript.len() as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }

    /// Answers one query.
    pub fn query(&mut self, q: &BoundedQuery) -> Result<f64> {
        if let QueryKind::Label(i) = q.kind {
            if i >= self.k() {
                return Err(Error::InvalidParameter(format!("label {} out of range", i + 1)));
            }
        }
        if let QueryKind::Projected { u, .. } = &q.kind {
            if u.len() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), got: u.len() });
            }
        }
        let (truth, answer) = match self.mode {
            OracleMode::AnalyticQuantized => {
                let e = self.expectation(q)?;
                (Some(e), self.answer(e))
            }
            OracleMode::Empirical { .. } => {
                let samples = self.target.sample_n(self.empirical_n(), self.fresh_seed(), self.exec);
                (None, self.mean_over(&samples, q)?)
            }
        };
        self.record(q.id.clone(), truth, answer);
        Ok(answer)
    }

    /// Answers every output of a batch; each output is recorded as a query.
    pub fn query_batch(&mut self, b: &BatchQuery) -> Result<Vec<f64>> {
        let (truth, answers) = match self.mode {
            OracleMode::AnalyticQuantized => {
                let pool = self.pool_size;
                let sums = batch_sums(self.pool(), b, self.exec);
                let e: Vec<f64> = sums.sums.iter().map(|s| s / pool as f64).collect();
                self.evaluations += (pool * b.outputs) as u64;
                self.clamped += sums.clamped;
                let a: Vec<f64> = e.iter().map(|x| self.answer(*x)).collect();
                (Some(e), a)
            }
            OracleMode::Empirical { .. } => {
                let n = self.empirical_n();
                let samples = self.target.sample_n(n, self.fresh_seed(), self.exec);
                let sums = batch_sums(&samples, b, self.exec);
                self.evaluations += (n * b.outputs) as u64;
                self.clamped += sums.clamped;
                (None, sums.sums.iter().map(|s| s / n as f64).collect())
            }
        };
        for (o, a) in answers.iter().enumerate() {
            self.record(format!("{}[{o}]", b.id), truth.as_ref().map(|t| t[o]), *a);
        }
        Ok(answers)
    }

    fn mean_over(&mut self, samples: &[LabeledSample], q: &BoundedQuery) -> Result<f64> {
        let (sum, clamped) = sum_over(samples, q, self.exec)?;
        self.clamped += clamped;
        self.evaluations += samples.len() as u64;
        Ok(sum / samples.len() as f64)
    }

    /// `E[q]` under the target: exact where a closed form or quadrature
    /// applies, otherwise the pool average.
    pub fn expectation(&mut self, q: &BoundedQuery) -> Result<f64> {
        match &q.kind {
            QueryKind::Constant(c) => Ok(clamp_unit(*c).0),
            QueryKind::Label(i) => Ok(self.target.label_marginal()[*i]),
            QueryKind::Misclassification(h) => {
                if let Some(e) = self.exact_misclassification(h.as_ref())? {
                    return Ok(e);
                }
                self.pool_mean(q)
            }
            QueryKind::Projected { u, f } => Ok(projected_expectation(&self.target, u, f)),
            QueryKind::General(_) => self.pool_mean(q),
        }
    }

    fn pool_mean(&mut self, q: &BoundedQuery) -> Result<f64> {
        let (sum, clamped) = sum_over(self.pool(), q, self.exec)?;
        self.clamped += clamped;
        self.evaluations += self.pool_size as u64;
        Ok(sum / self.pool_size as f64)
    }

    fn exact_misclassification(&self, h: &dyn Classifier) -> Result<Option<f64>> {
        if h.dim() != self.dim() || h.k() != self.k() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: h.dim() });
        }
        let Some(poly) = h.as_poly() else { return Ok(None) };
        match &self.target {
            Target::Hidden(inst) => {
                let same = poly.v().iter().zip(inst.v()).all(|(a, b)| (a - b).abs() <= 1e-12);
                if !same {
                    return Ok(None);
                }
                Ok(Some(analytic_error(inst, poly)?.err))
            }
            Target::Null(null) => {
                let masses = gaussian_label_masses(poly)?;
                let row = null.label_marginal();
                Ok(Some(masses.iter().zip(&row).map(|(m, p)| m * (1.0 - p)).sum()))
            }
        }
    }
}

fn sum_over(samples: &[LabeledSample], q: &BoundedQuery, exec: Execution) -> Result<(f64, u64)> {
    let parts = exec::map_chunks(exec, samples.len(), CHUNK, |_, s, e| -> Result<(f64, u64)> {
        let mut acc = 0.0;
        let mut clamped = 0;
        for smp in &samples[s..e] {
            let (v, c) = clamp_unit(q.eval(smp)?);
            acc += v;
            clamped += u64::from(c);
        }
        Ok((acc, clamped))
    });
    let mut total = 0.0;
    let mut clamped = 0;
    for p in parts {
        let (v, c) = p?;
        total += v;
        clamped += c;
    }
    Ok((total, clamped))
}

struct BatchSums {
    sums: Vec<f64>,
    clamped: u64,
}

fn batch_sums(samples: &[LabeledSample], b: &BatchQuery, exec: Execution) -> BatchSums {
    let parts = exec::map_chunks(exec, samples.len(), CHUNK, |_, s, e| {
        let mut acc = vec![0.0; b.outputs];
        let mut buf = vec![0.0; b.outputs];
        let mut clamped = 0u64;
        for smp in &samples[s..e] {
            (b.eval)(&smp.x, smp.y, &mut buf);
            for (a, v) in acc.iter_mut().zip(&buf) {
                let (c, hit) = clamp_unit(*v);
                *a += c;
                clamped += u64::from(hit);
            }
        }
        (acc, clamped)
    });
    let mut sums = vec![0.0; b.outputs];
    let mut clamped = 0;
    for (acc, c) in parts {
        for (s, a) in sums.iter_mut().zip(&acc) {
            *s += a;
        }
        clamped += c;
    }
    BatchSums { sums, clamped }
}

/// `E[clamp f(u·x, y)]` by quadrature.
///
/// Write `u·x = ρz + σg` with `z = v·x`, `ρ = u·v`, `σ = ‖u - ρv‖` and
/// `g ~ N(0, 1)` independent of `(z, y)`; `y` depends on `z` only.
pub fn projected_expectation(target: &Target, u: &[f64], f: &ProjectedFn) -> f64 {
    let eval = |t: f64, y: usize| clamp_unit(f(t, y)).0;
    let unorm2 = dot(u, u);
    match target {
        Target::Null(null) => {
            let sigma = unorm2.sqrt();
            let gl = GaussLegendre::new(OUTER_NODES);
            null.label_marginal()
                .iter()
                .enumerate()
                .filter(|(_, p)| **p != 0.0)
                .map(|(y, p)| {
                    p * gl.integrate_composite(-GAUSS_REACH, GAUSS_REACH, NULL_PANELS, |g| {
                        gauss::pdf(g) * eval(sigma * g, y)
                    })
                })
                .sum()
        }
        Target::Hidden(inst) => {
            let rho = dot(u, inst.v());
            let sigma = (unorm2 - rho * rho).max(0.0).sqrt();
            let k = inst.noise().k();
            let outer = GaussLegendre::new(OUTER_NODES);
            let inner = GaussLegendre::new(INNER_NODES);
            let smoothed = |z: f64, y: usize| -> f64 {
                if sigma == 0.0 {
                    eval(rho * z, y)
                } else {
                    inner.integrate(-GAUSS_REACH, GAUSS_REACH, |g| gauss::pdf(g) * eval(rho * z + sigma * g, y))
                }
            };
            let mut total = 0.0;
            for (c, comb) in inst.combs().iter().enumerate() {
                let weight = inst.weights()[c] * comb.height();
                if weight == 0.0 {
                    continue;
                }
                for p in comb.pieces() {
                    if weight * gauss::mass(p.base_lo, p.base_hi) < NEGLIGIBLE_MASS {
                        continue;
                    }
                    let row = inst.noise().row(if p.inner { c } else { k - 1 });
                    let panels = ((p.hi() - p.lo()) / PANEL_WIDTH).ceil().max(1.0) as usize;
                    total += weight
                        * outer.integrate_composite(p.lo(), p.hi(), panels, |z| {
                            let dens = gauss::pdf(z + p.shift);
                            let mix: f64 = row
                                .iter()
                                .enumerate()
                                .filter(|(_, h)| **h != 0.0)
                                .map(|(y, h)| h * smoothed(z, y))
                                .sum();
                            dens * mix
                        });
                }
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hidden::random_direction;
    use crate::univariate::CombSpec;
    use approx::assert_relative_eq;

    fn alt(n: usize) -> Target {
        let spec = CombSpec::new(0.25, 1e-3, 4, 3).unwrap();
        Target::Hidden(HiddenInstance::eq1(random_direction(n, 3), spec).unwrap())
    }

    fn null(n: usize) -> Target {
        Target::Null(NullInstance::new(n, NoiseMatrix::eq1()).unwrap())
    }

    #[test]
    fn quantization_grid() {
        assert_relative_eq!(quantize(1.0, 0.1), 1.1, epsilon = 1e-12);
        assert_relative_eq!(quantize(1.05, 0.1), 1.1, epsilon = 1e-12);
        assert_relative_eq!(quantize(0.05, 0.1), 0.1, epsilon = 1e-15);
        assert_relative_eq!(quantize(-0.05, 0.1), -0.1, epsilon = 1e-15);
        assert_eq!(quantize(0.123, 0.0), 0.123);
        assert_eq!(quantize(0.31, 0.01), quantize(0.315, 0.01));
    }

    #[test]
    fn hoeffding_size() {
        assert_eq!(empirical_sample_size(0.1), 1521);
    }

    #[test]
    fn constant_and_label_queries() {
        let mut o = SqOracle::analytic(null(3), 0.1).unwrap();
        let a = o.query(&BoundedQuery::new("one", QueryKind::Constant(1.0))).unwrap();
        assert_relative_eq!(a, 1.1, epsilon = 1e-12);
        for t in [null(3), alt(3)] {
            let mut o = SqOracle::analytic(t, 0.01).unwrap();
            let a = o.query(&BoundedQuery::new("y3", QueryKind::Label(2))).unwrap();
            assert!((a - 0.4).abs() <= 0.01 + 1e-15);
            assert_relative_eq!(o.transcript()[0].true_expectation.unwrap(), 0.4, epsilon = 1e-12);
        }
    }

    #[test]
    fn empirical_mode_rejects_zero_tolerance() {
        assert!(SqOracle::new(null(2), 0.0, OracleMode::Empirical { n: None, seed: 1 }).is_err());
    }

    #[test]
    fn projected_quadrature_matches_gaussian_moments() {
        let f: ProjectedFn = Arc::new(|t, _| t * t / 100.0);
        let u = vec![0.6, 0.8, 0.0];
        assert_relative_eq!(projected_expectation(&null(3), &u, &f), 0.01, epsilon = 1e-12);
        // Along a near-orthogonal direction the alternative looks Gaussian too.
        let t = alt(3);
        let Target::Hidden(inst) = &t else { unreachable!() };
        let rho = dot(&u, inst.v());
        let e = projected_expectation(&t, &u, &f);
        let ez2 = 0.5 * (inst.combs()[0].moment(2).unwrap().value + inst.combs()[1].moment(2).unwrap().value);
        assert_relative_eq!(e, (rho * rho * ez2 + 1.0 - rho * rho) / 100.0, epsilon = 1e-12);
    }

    #[test]
    fn batch_counts_every_output() {
        let mut o = SqOracle::analytic(null(2), 0.0).unwrap().with_pool(1000, 1);
        let b = BatchQuery {
            id: "b".into(),
            outputs: 3,
            eval: Arc::new(|x, y, out| {
                out[0] = x[0] / 100.0;
                out[1] = f64::from(u8::from(y == 2));
                out[2] = 5.0;
            }),
        };
        let a = o.query_batch(&b).unwrap();
        assert_eq!(o.query_count(), 3);
        assert_eq!(a[2], 1.0);
        assert_eq!(o.clamp_stats().0, 1000);
    }
}
