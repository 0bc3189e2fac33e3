//! Strategies run against an SQ oracle, one session per call.

use crate::bundle::Bundle;
use crate::{load_instance, Cli};
use anyhow::Result;
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcn_sq_core::classify::{analytic_error, mc_error, opt_error, Classifier};
use rcn_sq_core::hidden::{directions_with_overlap, HiddenInstance, LabeledSource, NullInstance};
use rcn_sq_core::io::fmt_f64;
use rcn_sq_core::sq::oracle::DEFAULT_POOL_SIZE;
use rcn_sq_core::sq::{
    moment_tester, sq_sgd_softmax, tester_from_learner, CheatingLearner, ConstantLearner, Decision, Learner,
    OracleMode, SgdConfig, SqOracle, Target, TestOutcome, TranscriptEntry,
};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Cheat,
    ConstantK,
    Moments,
    SqSgd,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Cheat => "cheat",
            Strategy::ConstantK => "constant-k",
            Strategy::Moments => "moments",
            Strategy::SqSgd => "sq-sgd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Null,
    Alternative,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Null => "null",
            TargetKind::Alternative => "alternative",
        }
    }

    pub fn correct_decision(self) -> Decision {
        match self {
            TargetKind::Null => Decision::AcceptNull,
            TargetKind::Alternative => Decision::RejectNull,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Exact expectations snapped to the 2τ grid.
    Analytic,
    /// Fresh Hoeffding-sized sample means.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyParams {
    /// Oracle tolerance; defaults to α/4.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Detection margin; defaults to half the gap between the constant predictor and opt.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Analytic)]
    pub mode: Mode,
    /// Samples behind analytic-mode answers that have no closed form.
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 2000)]
    pub sgd_steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub sgd_rate: f64,
    /// Veronese degree of the softmax features.
    #[arg(long, default_value_t = 1)]
    pub sgd_degree: usize,
    /// Oracle tolerance for the SQ-gradient learner.
    #[arg(long, default_value_t = 0.01)]
    pub sgd_tau: f64,
    #[arg(long, default_value_t = 4)]
    pub moment_degree: usize,
    #[arg(long, default_value_t = 5)]
    pub moment_directions: usize,
    /// Largest |u·v| allowed for moment directions.
    #[arg(long, default_value_t = 0.1)]
    pub overlap_bound: f64,
    /// Samples for the Monte-Carlo error of learned hypotheses.
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            tau: None,
            alpha: None,
            mode: Mode::Analytic,
            pool_size: DEFAULT_POOL_SIZE,
            sgd_steps: 2000,
            sgd_rate: 0.5,
            sgd_degree: 1,
            sgd_tau: 0.01,
            moment_degree: 4,
            moment_directions: 5,
            overlap_bound: 0.1,
            mc_samples: 100_000,
        }
    }
}

impl StrategyParams {
    pub fn alpha(&self, inst: &HiddenInstance) -> f64 {
        self.alpha.unwrap_or_else(|| {
            let k = inst.noise().k();
            (1.0 - inst.noise().get(k - 1, k - 1) - opt_error(inst)) / 2.0
        })
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig { steps: self.sgd_steps, rate: self.sgd_rate, degree: Some(self.sgd_degree), ..SgdConfig::default() }
    }
}

/// Keeps whatever the wrapped learner produced.
struct Recording<'a> {
    inner: &'a dyn Learner,
    hypothesis: Mutex<Option<Arc<dyn Classifier>>>,
}

impl Learner for Recording<'_> {
    fn name(&self) -> String {
        self.inner.name()
    }
    fn learn(&self, oracle: &mut SqOracle) -> rcn_sq_core::Result<Arc<dyn Classifier>> {
        let h = self.inner.learn(oracle)?;
        *self.hypothesis.lock().expect("recording lock") = Some(Arc::clone(&h));
        Ok(h)
    }
}

/// SQ-gradient learner that also keeps its loss curve.
struct SgdWithCurve {
    cfg: SgdConfig,
    losses: Mutex<Vec<(usize, f64)>>,
}

impl Learner for SgdWithCurve {
    fn name(&self) -> String {
        "sq-sgd".into()
    }
    fn learn(&self, oracle: &mut SqOracle) -> rcn_sq_core::Result<Arc<dyn Classifier>> {
        let report = sq_sgd_softmax(oracle, &self.cfg)?;
        *self.losses.lock().expect("loss lock") = report.losses;
        Ok(Arc::new(report.model))
    }
}

pub struct RunResult {
    pub outcome: TestOutcome,
    pub tau: f64,
    pub hypothesis_error: Option<f64>,
    pub clip_rate: f64,
    pub losses: Vec<(usize, f64)>,
    pub transcript: Vec<TranscriptEntry>,
    pub warnings: Vec<String>,
}

fn oracle_for(target: Target, tau: f64, seed: u64, params: &StrategyParams) -> Result<SqOracle> {
    Ok(match params.mode {
        Mode::Analytic => SqOracle::analytic(target, tau)?.with_pool(params.pool_size, seed),
        Mode::Empirical => SqOracle::new(target, tau, OracleMode::Empirical { n: None, seed })?,
    })
}

/// Error of a learned hypothesis on the distribution it was trained on.
fn hypothesis_error(target: &Target, h: &dyn Classifier, n: usize, seed: u64) -> Result<f64> {
    if let (Target::Hidden(inst), Some(p)) = (target, h.as_poly()) {
        if p.v() == inst.v() {
            return Ok(analytic_error(inst, p)?.err);
        }
    }
    let exec = crate::execution();
    Ok(match target {
        Target::Hidden(inst) => mc_error(inst, h, n, seed, exec)?.err,
        Target::Null(null) => mc_error(null, h, n, seed, exec)?.err,
    })
}

/// Error on `alt` of the SQ-gradient learner run at tolerance `tau`.
pub fn sgd_error(alt: &HiddenInstance, tau: f64, seed: u64, params: &StrategyParams) -> Result<f64> {
    let target = Target::Hidden(alt.clone());
    let mut oracle = oracle_for(target.clone(), tau, seed, params)?;
    let report = sq_sgd_softmax(&mut oracle, &params.sgd())?;
    hypothesis_error(&target, &report.model, params.mc_samples, seed.wrapping_add(17))
}

/// One oracle session: `alt` supplies the planted direction even when the
/// target is the null distribution.
pub fn run_strategy(
    alt: &HiddenInstance,
    kind: TargetKind,
    strategy: Strategy,
    seed: u64,
    params: &StrategyParams,
) -> Result<RunResult> {
    let target = match kind {
        TargetKind::Alternative => Target::Hidden(alt.clone()),
        TargetKind::Null => Target::Null(NullInstance::new(alt.v().len(), alt.noise().clone())?),
    };
    let h = alt.noise().clone();
    let alpha = params.alpha(alt);
    let tau = match strategy {
        Strategy::SqSgd => params.sgd_tau,
        _ => params.tau.unwrap_or(alpha / 4.0),
    };
    let mut oracle = oracle_for(target.clone(), tau, seed, params)?;
    let mut losses = Vec::new();
    let mut hypothesis = None;
    let outcome = match strategy {
        Strategy::Moments => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dirs = directions_with_overlap(alt.v(), params.moment_directions, params.overlap_bound, &mut rng)?;
            let nu = alt.spec().moment_deviation(params.moment_degree)?;
            moment_tester(&mut oracle, &h, params.moment_degree, &dirs, 2.0 * (nu + tau))?
        }
        Strategy::Cheat | Strategy::ConstantK | Strategy::SqSgd => {
            let cheat;
            let constant = ConstantLearner::default();
            let sgd = SgdWithCurve { cfg: params.sgd(), losses: Mutex::new(Vec::new()) };
            let inner: &dyn Learner = match strategy {
                Strategy::Cheat => {
                    cheat = CheatingLearner::new(alt.clone());
                    &cheat
                }
                Strategy::ConstantK => &constant,
                _ => &sgd,
            };
            let rec = Recording { inner, hypothesis: Mutex::new(None) };
            let out = tester_from_learner(&rec, &h, alpha, &mut oracle)?;
            hypothesis = rec.hypothesis.into_inner().expect("recording lock");
            losses = sgd.losses.into_inner().expect("loss lock");
            out
        }
    };
    let hypothesis_error = match &hypothesis {
        Some(hyp) => Some(hypothesis_error(&target, hyp.as_ref(), params.mc_samples, seed.wrapping_add(17))?),
        None => None,
    };
    let (clamped, evals) = oracle.clamp_stats();
    let clip_rate = if evals == 0 { 0.0 } else { clamped as f64 / evals as f64 };
    let mut warnings = Vec::new();
    if clamped > 0 {
        warnings.push(format!(
            "{} on {} (seed {seed}): {clamped} of {evals} query evaluations clipped to [-1, 1]",
            strategy.as_str(),
            kind.as_str()
        ));
    }
    Ok(RunResult {
        outcome,
        tau,
        hypothesis_error,
        clip_rate,
        losses,
        transcript: oracle.transcript().to_vec(),
        warnings,
    })
}

pub const OUTCOME_HEADER: &str =
    "strategy,target,seed,decision,correct,estimate,threshold,tau,queries,learner_queries,hypothesis_error,clip_rate,failure";

pub fn outcome_row(strategy: Strategy, kind: TargetKind, seed: u64, r: Result<&RunResult, &str>) -> String {
    let head = format!("{},{},{seed}", strategy.as_str(), kind.as_str());
    match r {
        Ok(r) => {
            let o = &r.outcome;
            format!(
                "{head},{},{},{},{},{},{},{},{},{},",
                o.decision.as_str(),
                o.decision == kind.correct_decision(),
                fmt_f64(o.estimate),
                fmt_f64(o.threshold),
                fmt_f64(r.tau),
                o.queries,
                o.learner_queries,
                r.hypothesis_error.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.clip_rate),
            )
        }
        Err(e) => format!("{head},,,,,,,,,,\"{}\"", e.replace('"', "'")),
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SqTestArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    #[arg(long, value_enum, default_value_t = TargetKind::Alternative)]
    pub target: TargetKind,
    #[command(flatten)]
    pub params: StrategyParams,
}

pub fn sq_test(args: &SqTestArgs, cli: &Cli, bundle: &mut Bundle) -> Result<serde_json::Value> {
    let inst = load_instance(&args.instance)?.instance()?;
    let r = run_strategy(&inst, args.target, args.strategy, cli.seed, &args.params)?;
    for w in &r.warnings {
        bundle.warn(w.clone());
    }
    let row = outcome_row(args.strategy, args.target, cli.seed, Ok(&r));
    bundle.write("outcome.csv", format!("{OUTCOME_HEADER}\n{row}\n").as_bytes())?;
    let mut transcript = String::from(TranscriptEntry::CSV_HEADER);
    transcript.push('\n');
    for e in &r.transcript {
        transcript.push_str(&e.csv_row());
        transcript.push('\n');
    }
    bundle.write("transcript.csv", transcript.as_bytes())?;
    let o = &r.outcome;
    println!(
        "{} on {}: {} (estimate {:.6}, threshold {:.6}, {} queries)",
        args.strategy.as_str(),
        args.target.as_str(),
        o.decision.as_str(),
        o.estimate,
        o.threshold,
        o.queries
    );
    Ok(serde_json::json!({
        "strategy": args.strategy.as_str(),
        "target": args.target.as_str(),
        "tau": r.tau,
        "mode": args.params.mode,
        "outcome": o,
        "hypothesis_error": r.hypothesis_error,
        "clip_rate": r.clip_rate,
    }))
}
