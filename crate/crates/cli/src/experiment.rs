//! Strategy x target x seed grids, sweeps over τ and δ, and their plots.

use crate::bundle::Bundle;
use crate::strategy::{self, outcome_row, run_strategy, Strategy, StrategyParams, TargetKind, OUTCOME_HEADER};
use crate::svg::{Plot, Series};
use crate::{execution, load_instance, read_text, Cli};
use anyhow::{Context, Result};
use clap::Args;
use rcn_sq_core::classify::opt_error;
use rcn_sq_core::exec;
use rcn_sq_core::hidden::{random_direction, HiddenInstance, LabeledSource};
use rcn_sq_core::io::{fmt_f64, DirectionSpec, InstanceFile, MatrixSpec};
use rcn_sq_core::univariate::{CombSpec, RawCombSpec};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExperimentArgs {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Instance file; overrides the configuration's.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Number of seeds; overrides the configuration's.
    #[arg(long)]
    pub seeds: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub instance: Option<PathBuf>,
    pub strategies: Vec<Strategy>,
    pub targets: Vec<TargetKind>,
    /// Seeds run are `--seed .. --seed + seeds`.
    pub seeds: u64,
    /// Draw a fresh hidden direction per seed instead of using the file's.
    pub resample_direction: bool,
    pub params: StrategyParams,
    pub tau_sweep: Vec<f64>,
    pub delta_sweep: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            instance: None,
            strategies: vec![Strategy::Cheat, Strategy::ConstantK, Strategy::Moments, Strategy::SqSgd],
            targets: vec![TargetKind::Null, TargetKind::Alternative],
            seeds: 20,
            resample_direction: true,
            params: StrategyParams { sgd_steps: 300, pool_size: 20_000, ..StrategyParams::default() },
            tau_sweep: vec![0.001, 0.003, 0.01, 0.03, 0.1],
            delta_sweep: vec![0.5, 0.25, 0.125],
        }
    }
}

/// Dimension 16, k = 3, δ = 0.25, ξ = 1e-3, m = 4 with the singular 3x3 matrix.
pub fn desk_instance(seed: u64) -> InstanceFile {
    InstanceFile {
        n: 16,
        v: DirectionSpec::Seeded { seed },
        spec: RawCombSpec { delta: 0.25, xi: 1e-3, m: 4, k: 3 },
        a: vec![0.5, 0.5],
        matrix: MatrixSpec::Named("eq1".into()),
    }
}

fn with_direction(file: &InstanceFile, v: Vec<f64>) -> Result<HiddenInstance> {
    Ok(HiddenInstance::new(v, file.comb_spec()?, file.a.clone(), file.noise()?)?)
}

struct Cell {
    strategy: Strategy,
    target: TargetKind,
    seed: u64,
}

pub fn run(args: &ExperimentArgs, cli: &Cli, bundle: &mut Bundle) -> Result<serde_json::Value> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(p) => serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &args.instance {
        cfg.instance = Some(p.clone());
    }
    if let Some(s) = args.seeds {
        cfg.seeds = s;
    }
    let file = match &cfg.instance {
        Some(p) => load_instance(p)?,
        None => desk_instance(cli.seed),
    };
    let base = file.instance()?;
    let dim = file.n;

    let cells: Vec<Cell> = cfg
        .strategies
        .iter()
        .flat_map(|&strategy| {
            cfg.targets.iter().flat_map(move |&target| {
                (0..cfg.seeds).map(move |i| Cell { strategy, target, seed: cli.seed.wrapping_add(i) })
            })
        })
        .collect();
    let results = exec::map_items(execution(), &cells, |c| {
        let alt = if cfg.resample_direction {
            with_direction(&file, random_direction(dim, c.seed))
        } else {
            Ok(base.clone())
        };
        alt.and_then(|alt| run_strategy(&alt, c.target, c.strategy, c.seed, &cfg.params)).map_err(|e| format!("{e:#}"))
    });

    let mut csv = format!("{OUTCOME_HEADER}\n");
    let mut summary = String::from("strategy,target,runs,reject_null,accept_null,failed,accuracy\n");
    let mut loss_csv = String::from("seed,step,loss\n");
    let mut summary_json = Vec::new();
    for (c, r) in cells.iter().zip(&results) {
        csv.push_str(&outcome_row(c.strategy, c.target, c.seed, r.as_ref().map_err(String::as_str)));
        csv.push('\n');
        match r {
            Ok(r) => {
                for w in &r.warnings {
                    bundle.warn(w.clone());
                }
                if c.strategy == Strategy::SqSgd && c.target == TargetKind::Alternative {
                    for (step, loss) in &r.losses {
                        loss_csv.push_str(&format!("{},{step},{}\n", c.seed, fmt_f64(*loss)));
                    }
                }
            }
            Err(e) => bundle.warn(format!("{} on {} (seed {}) failed: {e}", c.strategy.as_str(), c.target.as_str(), c.seed)),
        }
    }
    for &strategy in &cfg.strategies {
        for &target in &cfg.targets {
            let group: Vec<_> = cells
                .iter()
                .zip(&results)
                .filter(|(c, _)| c.strategy == strategy && c.target == target)
                .map(|(_, r)| r)
                .collect();
            let ok: Vec<_> = group.iter().filter_map(|r| r.as_ref().ok()).collect();
            let rejects = ok.iter().filter(|r| r.outcome.decision == rcn_sq_core::sq::Decision::RejectNull).count();
            let correct = ok.iter().filter(|r| r.outcome.decision == target.correct_decision()).count();
            let failed = group.len() - ok.len();
            let accuracy = if group.is_empty() { 0.0 } else { correct as f64 / group.len() as f64 };
            summary.push_str(&format!(
                "{},{},{},{rejects},{},{failed},{}\n",
                strategy.as_str(),
                target.as_str(),
                group.len(),
                ok.len() - rejects,
                fmt_f64(accuracy)
            ));
            println!(
                "{:>10} on {:<11}: {correct}/{} correct ({rejects} reject-null, {failed} failed)",
                strategy.as_str(),
                target.as_str(),
                group.len()
            );
            summary_json.push(serde_json::json!({
                "strategy": strategy.as_str(), "target": target.as_str(),
                "runs": group.len(), "correct": correct, "reject_null": rejects, "failed": failed,
            }));
        }
    }
    bundle.write("outcomes.csv", csv.as_bytes())?;
    bundle.write("summary.csv", summary.as_bytes())?;
    bundle.write("sgd_loss.csv", loss_csv.as_bytes())?;

    let k = base.noise().k();
    let trivial = 1.0 - base.noise().get(k - 1, k - 1);
    let sweep_seed = cli.seed;
    let sgd_error = |alt: &HiddenInstance, tau: f64| -> std::result::Result<f64, String> {
        strategy::sgd_error(alt, tau, sweep_seed, &cfg.params).map_err(|e| format!("{e:#}"))
    };

    let tau_rows = exec::map_items(execution(), &cfg.tau_sweep, |&tau| sgd_error(&base, tau));
    let mut tau_csv = String::from("tau,sq_sgd_error,constant_error,opt,failure\n");
    let opt = opt_error(&base);
    let mut sgd_points = Vec::new();
    for (&tau, r) in cfg.tau_sweep.iter().zip(&tau_rows) {
        match r {
            Ok(e) => {
                sgd_points.push((tau, *e));
                tau_csv.push_str(&format!("{},{},{},{},\n", fmt_f64(tau), fmt_f64(*e), fmt_f64(trivial), fmt_f64(opt)));
            }
            Err(msg) => {
                bundle.warn(format!("tau sweep at {tau}: {msg}"));
                tau_csv.push_str(&format!("{},,{},{},\"{}\"\n", fmt_f64(tau), fmt_f64(trivial), fmt_f64(opt), msg));
            }
        }
    }
    bundle.write("error_vs_tau.csv", tau_csv.as_bytes())?;
    let flat = |y: f64, xs: &[f64]| xs.iter().map(|&x| (x, y)).collect::<Vec<_>>();
    let tau_plot = Plot {
        title: "Learned error vs oracle tolerance".into(),
        x_label: "tau".into(),
        y_label: "0-1 error".into(),
        log_x: true,
        series: vec![
            Series { label: "sq-sgd".into(), points: sgd_points },
            Series { label: "constant k".into(), points: flat(trivial, &cfg.tau_sweep) },
            Series { label: "opt".into(), points: flat(opt, &cfg.tau_sweep) },
        ],
    };
    bundle.write("error_vs_tau.svg", tau_plot.render().as_bytes())?;

    let ratio = file.spec.xi / file.spec.delta;
    let delta_rows = exec::map_items(execution(), &cfg.delta_sweep, |&delta| {
        let spec = CombSpec::new(delta, ratio * delta, file.spec.m, file.spec.k).map_err(|e| e.to_string())?;
        let alt = HiddenInstance::new(base.v().to_vec(), spec, file.a.clone(), base.noise().clone())
            .map_err(|e| e.to_string())?;
        Ok::<_, String>((opt_error(&alt), sgd_error(&alt, cfg.params.sgd_tau)?))
    });
    let mut delta_csv = String::from("delta,xi,opt,constant_error,sq_sgd_error,failure\n");
    let (mut opt_pts, mut sgd_pts) = (Vec::new(), Vec::new());
    for (&delta, r) in cfg.delta_sweep.iter().zip(&delta_rows) {
        let xi = ratio * delta;
        match r {
            Ok((o, e)) => {
                opt_pts.push((delta, *o));
                sgd_pts.push((delta, *e));
                delta_csv.push_str(&format!(
                    "{},{},{},{},{},\n",
                    fmt_f64(delta),
                    fmt_f64(xi),
                    fmt_f64(*o),
                    fmt_f64(trivial),
                    fmt_f64(*e)
                ));
            }
            Err(msg) => {
                bundle.warn(format!("delta sweep at {delta}: {msg}"));
                delta_csv.push_str(&format!("{},{},,{},,\"{}\"\n", fmt_f64(delta), fmt_f64(xi), fmt_f64(trivial), msg));
            }
        }
    }
    bundle.write("error_vs_delta.csv", delta_csv.as_bytes())?;
    let delta_plot = Plot {
        title: "Error vs tooth spacing".into(),
        x_label: "delta".into(),
        y_label: "0-1 error".into(),
        log_x: false,
        series: vec![
            Series { label: "sq-sgd".into(), points: sgd_pts },
            Series { label: "constant k".into(), points: flat(trivial, &cfg.delta_sweep) },
            Series { label: "opt".into(), points: opt_pts },
        ],
    };
    bundle.write("error_vs_delta.svg", delta_plot.render().as_bytes())?;

    Ok(serde_json::json!({
        "config": cfg,
        "instance": file,
        "cells": cells.len(),
        "summary": summary_json,
    }))
}
