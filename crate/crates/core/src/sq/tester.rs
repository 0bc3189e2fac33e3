//! Distinguishers built on the oracle: the learner-to-tester reduction and a
//! per-label clipped moment test.

use super::learners::Learner;
use super::oracle::{BoundedQuery, ProjectedFn, QueryKind, SqOracle};
use crate::error::{Error, Result};
use crate::gauss;
use crate::noise::NoiseMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    AcceptNull,
    RejectNull,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::AcceptNull => "accept-null",
            Decision::RejectNull => "reject-null",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub decision: Decision,
    pub estimate: f64,
    pub threshold: f64,
    pub queries: usize,
    pub learner_queries: usize,
}

/// Runs `learner`, asks for the error of its hypothesis, and rejects the
/// null iff that answer falls below `1 - H_kk - α/2`.
pub fn tester_from_learner(
    learner: &dyn Learner,
    h: &NoiseMatrix,
    alpha: f64,
    oracle: &mut SqOracle,
) -> Result<TestOutcome> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if oracle.tau() > alpha / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "oracle tolerance {} exceeds alpha/2 = {}",
            oracle.tau(),
            alpha / 2.0
        )));
    }
    let before = oracle.query_count();
    let hyp = learner.learn(oracle)?;
    let learner_queries = oracle.query_count() - before;
    let estimate = oracle.query(&BoundedQuery::new(
        format!("err[{}]", learner.name()),
        QueryKind::Misclassification(hyp),
    ))?;
    let k = h.k();
    let threshold = 1.0 - h.get(k - 1, k - 1) - alpha / 2.0;
    let decision = if estimate < threshold { Decision::RejectNull } else { Decision::AcceptNull };
    Ok(TestOutcome {
        decision,
        estimate,
        threshold,
        queries: oracle.query_count() - before,
        learner_queries,
    })
}

/// Scale of the clipped moment statistic `clip((u·x)^ℓ / SCALE^ℓ)`.
pub const MOMENT_SCALE: f64 = 6.0;

fn clipped_power(t: f64, l: usize) -> f64 {
    (t / MOMENT_SCALE).powi(l as i32).clamp(-1.0, 1.0)
}

/// `E_{g ~ N(0,1)}[clip(g^ℓ / 6^ℓ)]`.
pub fn gaussian_clipped_moment(l: usize) -> f64 {
    let gl = gauss::GaussLegendre::new(8);
    gl.integrate_composite(-10.0, 10.0, 400, |g| gauss::pdf(g) * clipped_power(g, l))
}

/// Queries `1[y = i] · clip((u·x)^ℓ / 6^ℓ)` for every direction, `ℓ ≤ t_max`
/// and label, and rejects the null iff some answer leaves its null value
/// `H_ki · E_N[clip(g^ℓ/6^ℓ)]` by more than `threshold`.
pub fn moment_tester(
    oracle: &mut SqOracle,
    h: &NoiseMatrix,
    t_max: usize,
    directions: &[Vec<f64>],
    threshold: f64,
) -> Result<TestOutcome> {
    let k = h.k();
    let before = oracle.query_count();
    let refs: Vec<f64> = (0..=t_max).map(gaussian_clipped_moment).collect();
    let mut worst: f64 = 0.0;
    for (d, u) in directions.iter().enumerate() {
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("direction {d} is not a unit vector")));
        }
        for l in 1..=t_max {
            for i in 0..k {
                let f: ProjectedFn =
                    Arc::new(move |t, y| if y == i { clipped_power(t, l) } else { 0.0 });
                let q = BoundedQuery::new(
                    format!("moment[u={d},l={l},y={}]", i + 1),
                    QueryKind::Projected { u: u.clone(), f },
                );
                let a = oracle.query(&q)?;
                worst = worst.max((a - h.get(k - 1, i) * refs[l]).abs());
            }
        }
    }
    let decision = if worst > threshold { Decision::RejectNull } else { Decision::AcceptNull };
    let queries = oracle.query_count() - before;
    Ok(TestOutcome { decision, estimate: worst, threshold, queries, learner_queries: 0 })
}
