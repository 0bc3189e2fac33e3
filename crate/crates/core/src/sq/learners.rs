//! Learners: privileged ground truth, the constant baseline, softmax
//! regression driven by statistical queries, and backward-corrected
//! training on samples.

use super::oracle::{BatchQuery, BoundedQuery, QueryKind, SqOracle, Target};
use crate::classify::{build_ground_truth, Classifier, EmbeddedLinear, Embedding, LinearMulticlass, UnivariatePolyMulticlass, VeroneseBasis};
use crate::error::{Error, Result};
use crate::exec::{self, Execution, CHUNK};
use crate::hidden::{HiddenInstance, LabeledSample};
use crate::noise::NoiseMatrix;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

thread_local! {
    static SCRATCH: std::cell::RefCell<(Vec<f64>, Vec<f64>)> = const { std::cell::RefCell::new((Vec::new(), Vec::new())) };
}

/// Smallest singular value treated as invertible.
pub const SINGULAR_TOL: f64 = 1e-10;
/// Cross-entropy is reported to the oracle divided by this.
const LOSS_SCALE: f64 = 10.0;

pub trait Learner: Sync {
    fn name(&self) -> String;
    fn learn(&self, oracle: &mut SqOracle) -> Result<Arc<dyn Classifier>>;
}

/// Returns the ground truth of a known instance without asking the oracle.
#[derive(Debug, Clone)]
pub struct CheatingLearner {
    inst: HiddenInstance,
}

impl CheatingLearner {
    pub fn new(inst: HiddenInstance) -> Self {
        Self { inst }
    }

    /// Needs a planted direction; a null target has none.
    pub fn for_target(target: &Target) -> Result<Self> {
        match target {
            Target::Hidden(inst) => Ok(Self::new(inst.clone())),
            Target::Null(_) => Err(Error::Learner("the null distribution has no hidden direction".into())),
        }
    }

    pub fn hypothesis(&self) -> UnivariatePolyMulticlass {
        build_ground_truth(&self.inst)
    }
}

impl Learner for CheatingLearner {
    fn name(&self) -> String {
        "cheat".into()
    }
    fn learn(&self, _oracle: &mut SqOracle) -> Result<Arc<dyn Classifier>> {
        Ok(Arc::new(self.hypothesis()))
    }
}

/// Always predicts one label (the last one by default).
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantLearner {
    pub label: Option<usize>,
}

impl Learner for ConstantLearner {
    fn name(&self) -> String {
        "constant".into()
    }
    fn learn(&self, oracle: &mut SqOracle) -> Result<Arc<dyn Classifier>> {
        let k = oracle.k();
        let mut v = vec![0.0; oracle.dim()];
        v[0] = 1.0;
        Ok(Arc::new(UnivariatePolyMulticlass::constant(v, k, self.label.unwrap_or(k - 1))?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub steps: usize,
    pub rate: f64,
    /// Gradient query scale `B`; `None` means `3·sqrt(d)`.
    pub clip: Option<f64>,
    /// Veronese degree of the feature map; `None` uses `x` itself.
    pub degree: Option<usize>,
    pub loss_every: usize,
    pub divergence_factor: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { steps: 2000, rate: 0.5, clip: None, degree: Some(1), loss_every: 100, divergence_factor: 10.0 }
    }
}

impl SgdConfig {
    pub fn embedding(&self, dim: usize) -> Result<Embedding> {
        Ok(match self.degree {
            None => Embedding::Identity(dim),
            Some(d) => Embedding::Veronese(VeroneseBasis::new(dim, d)?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SgdReport {
    pub model: EmbeddedLinear,
    /// `(step, loss estimate)` from loss queries.
    pub losses: Vec<(usize, f64)>,
    pub clip_rate: f64,
    pub clip: f64,
    pub queries: usize,
}

fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

fn scores(w: &[f64], phi: &[f64], k: usize, out: &mut [f64]) {
    let d = phi.len();
    for j in 0..k {
        out[j] = w[j * d..(j + 1) * d].iter().zip(phi).map(|(a, b)| a * b).sum();
    }
}

fn into_model(w: Vec<f64>, k: usize, embedding: Embedding) -> Result<EmbeddedLinear> {
    let d = embedding.output_dim();
    let rows = w.chunks(d).map(<[f64]>::to_vec).collect::<Vec<_>>();
    debug_assert_eq!(rows.len(), k);
    Ok(EmbeddedLinear { embedding, linear: LinearMulticlass::new(rows)? })
}

/// Softmax regression where every gradient coordinate is one statistical
/// query `clip((softmax_j(Wφ(x)) - 1[y = j]) φ_l(x) / B)`.
pub fn sq_sgd_softmax(oracle: &mut SqOracle, cfg: &SgdConfig) -> Result<SgdReport> {
    let k = oracle.k();
    let embedding = Arc::new(cfg.embedding(oracle.dim())?);
    let d = embedding.output_dim();
    let clip = cfg.clip.unwrap_or(3.0 * (d as f64).sqrt());
    if !(clip > 0.0) {
        return Err(Error::InvalidParameter(format!("clip bound must be positive, got {clip}")));
    }
    let start = oracle.query_count();
    let (clamped0, evals0) = oracle.clamp_stats();
    let mut w = vec![0.0; k * d];
    let mut losses = Vec::new();
    let mut initial: Option<f64> = None;
    let every = cfg.loss_every.max(1);

    for step in 0..=cfg.steps {
        if step % every == 0 || step == cfg.steps {
            let snapshot = Arc::new(w.clone());
            let emb = Arc::clone(&embedding);
            let f = move |x: &[f64], y: usize| {
                let phi = emb.embed(x).expect("dimension checked by the oracle");
                let mut s = vec![0.0; k];
                scores(&snapshot, &phi, k, &mut s);
                softmax_in_place(&mut s);
                -s[y].max(1e-300).ln() / LOSS_SCALE
            };
            let q = BoundedQuery::new(format!("loss[t={step}]"), QueryKind::General(Arc::new(f)));
            let loss = oracle.query(&q)? * LOSS_SCALE;
            losses.push((step, loss));
            match initial {
                None => initial = Some(loss),
                Some(l0) if loss > cfg.divergence_factor * l0.abs().max(1e-12) => {
                    return Err(Error::Divergence { step, loss, initial: l0 });
                }
                _ => {}
            }
        }
        if step == cfg.steps {
            break;
        }
        let snapshot = Arc::new(w.clone());
        let emb = Arc::clone(&embedding);
        let eval = move |x: &[f64], y: usize, out: &mut [f64]| {
            SCRATCH.with_borrow_mut(|(phi, s)| {
                emb.embed_into(x, phi).expect("dimension checked by the oracle");
                s.resize(k, 0.0);
                scores(&snapshot, phi, k, s);
                softmax_in_place(s);
                for j in 0..k {
                    let r = (s[j] - f64::from(u8::from(y == j))) / clip;
                    for (o, p) in out[j * d..(j + 1) * d].iter_mut().zip(phi.iter()) {
                        *o = r * p;
                    }
                }
            })
        };
        let batch = BatchQuery { id: format!("grad[t={step}]"), outputs: k * d, eval: Arc::new(eval) };
        let answers = oracle.query_batch(&batch)?;
        for (wi, a) in w.iter_mut().zip(&answers) {
            *wi -= cfg.rate * a * clip;
        }
    }
    let (clamped1, evals1) = oracle.clamp_stats();
    let evals = evals1 - evals0;
    let clip_rate = if evals == 0 { 0.0 } else { (clamped1 - clamped0) as f64 / evals as f64 };
    let embedding = Arc::try_unwrap(embedding).unwrap_or_else(|e| (*e).clone());
    Ok(SgdReport {
        model: into_model(w, k, embedding)?,
        losses,
        clip_rate,
        clip,
        queries: oracle.query_count() - start,
    })
}

/// [`sq_sgd_softmax`] as a [`Learner`].
#[derive(Debug, Clone, Default)]
pub struct SgdLearner {
    pub cfg: SgdConfig,
}

impl Learner for SgdLearner {
    fn name(&self) -> String {
        "sq-sgd".into()
    }
    fn learn(&self, oracle: &mut SqOracle) -> Result<Arc<dyn Classifier>> {
        Ok(Arc::new(sq_sgd_softmax(oracle, &self.cfg)?.model))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 500, rate: 0.5 }
    }
}

/// Full-batch gradient descent on `Σ_n CE-gradient (softmax - target_n) ⊗ φ(x_n)`.
pub fn train_softmax(
    data: &[LabeledSample],
    targets: &[Vec<f64>],
    embedding: Embedding,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<EmbeddedLinear> {
    if data.is_empty() || data.len() != targets.len() {
        return Err(Error::InvalidParameter("need one target per sample and at least one sample".into()));
    }
    let k = targets[0].len();
    let d = embedding.output_dim();
    let feats = data.iter().map(|s| embedding.embed(&s.x)).collect::<Result<Vec<_>>>()?;
    let mut w = vec![0.0; k * d];
    let n = data.len() as f64;
    for _ in 0..cfg.steps {
        let parts = exec::map_chunks(exec, data.len(), CHUNK, |_, s, e| {
            let mut g = vec![0.0; k * d];
            let mut sc = vec![0.0; k];
            for (phi, t) in feats[s..e].iter().zip(&targets[s..e]) {
                scores(&w, phi, k, &mut sc);
                softmax_in_place(&mut sc);
                for j in 0..k {
                    let r = sc[j] - t[j];
                    for (gi, p) in g[j * d..(j + 1) * d].iter_mut().zip(phi) {
                        *gi += r * p;
                    }
                }
            }
            g
        });
        let mut grad = vec![0.0; k * d];
        for g in parts {
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= cfg.rate * g / n;
        }
    }
    into_model(w, k, embedding)
}

pub fn one_hot_targets(data: &[LabeledSample], k: usize) -> Vec<Vec<f64>> {
    data.iter()
        .map(|s| (0..k).map(|j| f64::from(u8::from(j == s.y))).collect())
        .collect()
}

/// `H⁻¹`, refusing when `σ_min(H) ≤ 1e-10`.
pub fn noise_inverse(h: &NoiseMatrix) -> Result<DMatrix<f64>> {
    let sigma_min = h.sigma_min();
    if sigma_min <= SINGULAR_TOL {
        return Err(Error::SingularH { sigma_min });
    }
    h.to_dmatrix().try_inverse().ok_or(Error::SingularH { sigma_min })
}

/// Backward-corrected targets: row `y` of `H⁻¹` for each observed label `y`.
pub fn corrected_targets(data: &[LabeledSample], h: &NoiseMatrix) -> Result<Vec<Vec<f64>>> {
    let inv = noise_inverse(h)?;
    let k = h.k();
    Ok(data.iter().map(|s| (0..k).map(|j| inv[(s.y, j)]).collect()).collect())
}

/// Trains on the unbiased loss `Σ_j (H⁻¹)_{y j} CE(p, j)`.
pub fn backward_correction_learner(
    data: &[LabeledSample],
    h: &NoiseMatrix,
    embedding: Embedding,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<EmbeddedLinear> {
    let targets = corrected_targets(data, h)?;
    train_softmax(data, &targets, embedding, cfg, exec)
}

/// Mean squared deviation of per-sample corrected-loss gradients at `W = 0`.
pub fn corrected_gradient_variance(data: &[LabeledSample], h: &NoiseMatrix, embedding: &Embedding) -> Result<f64> {
    let targets = corrected_targets(data, h)?;
    let k = h.k();
    let grads = data
        .iter()
        .zip(&targets)
        .map(|(s, t)| {
            let phi = embedding.embed(&s.x)?;
            Ok((0..k)
                .flat_map(|j| {
                    let r = 1.0 / k as f64 - t[j];
                    phi.iter().map(move |p| r * p).collect::<Vec<_>>()
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let n = grads.len() as f64;
    let dim = grads[0].len();
    let mut mean = vec![0.0; dim];
    for g in &grads {
        for (m, x) in mean.iter_mut().zip(g) {
            *m += x / n;
        }
    }
    Ok(grads
        .iter()
        .map(|g| g.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hidden::{random_direction, LabeledSource, NullInstance};
    use crate::univariate::CombSpec;

    #[test]
    fn eq1_is_singular_for_backward_correction() {
        match noise_inverse(&NoiseMatrix::eq1()) {
            Err(Error::SingularH { sigma_min }) => assert!(sigma_min <= 1e-12),
            other => panic!("expected SingularH, got {other:?}"),
        }
    }

    #[test]
    fn identity_correction_is_plain_training() {
        let null = NullInstance::new(3, NoiseMatrix::eq1()).unwrap();
        let data = null.sample_n(500, 1, Execution::Sequential);
        let cfg = TrainConfig { steps: 20, rate: 0.5 };
        let h = NoiseMatrix::identity(3);
        let a = backward_correction_learner(&data, &h, Embedding::Identity(3), &cfg, Execution::Sequential).unwrap();
        let b = train_softmax(&data, &one_hot_targets(&data, 3), Embedding::Identity(3), &cfg, Execution::Parallel)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cheating_learner_needs_a_planted_direction() {
        let null = Target::Null(NullInstance::new(2, NoiseMatrix::eq1()).unwrap());
        assert!(matches!(CheatingLearner::for_target(&null), Err(Error::Learner(_))));
        let spec = CombSpec::new(0.25, 1e-3, 4, 3).unwrap();
        let alt = Target::Hidden(HiddenInstance::eq1(random_direction(2, 1), spec).unwrap());
        assert!(CheatingLearner::for_target(&alt).is_ok());
    }

    #[test]
    fn sgd_is_deterministic_and_counts_queries() {
        let null = Target::Null(NullInstance::new(2, NoiseMatrix::eq1()).unwrap());
        let cfg = SgdConfig { steps: 30, loss_every: 10, ..SgdConfig::default() };
        let run = || {
            let mut o = SqOracle::analytic(null.clone(), 0.01).unwrap().with_pool(2000, 4);
            let r = sq_sgd_softmax(&mut o, &cfg).unwrap();
            (r, o.transcript().to_vec())
        };
        let (a, ta) = run();
        let (b, tb) = run();
        assert_eq!(a.model, b.model);
        assert_eq!(ta, tb);
        // 3 labels x 3 affine features per step, plus 4 loss queries.
        assert_eq!(a.queries, 30 * 9 + 4);
    }
}
