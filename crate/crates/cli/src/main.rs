mod bundle;
mod experiment;
mod recipes;
mod strategy;
mod svg;
mod verify;

use anyhow::{Context, Result};
use bundle::{Bundle, Manifest};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rcn_sq_core::classify::{analytic_error, build_ground_truth, mc_error, opt_error, AnyClassifier, Classifier};
use rcn_sq_core::io::{fmt_f64, write_samples, InstanceFile};
use rcn_sq_core::hidden::LabeledSource;
use rcn_sq_core::Execution;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

pub const EXIT_PRECONDITION: u8 = 2;
pub const EXIT_VERIFICATION: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// Failure with an explicit exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

pub fn verification_failure(message: impl Into<String>) -> anyhow::Error {
    Exit { code: EXIT_VERIFICATION, message: message.into() }.into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Exit>() {
            return e.code;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<rcn_sq_core::Error>() {
            return match e {
                rcn_sq_core::Error::Io(_) => EXIT_IO,
                _ => EXIT_PRECONDITION,
            };
        }
    }
    EXIT_PRECONDITION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ToleranceProfile {
    /// The documented tolerances.
    #[default]
    Tight,
    /// Every tolerance multiplied by 100.
    Loose,
}

impl ToleranceProfile {
    pub fn factor(self) -> f64 {
        match self {
            ToleranceProfile::Tight => 1.0,
            ToleranceProfile::Loose => 100.0,
        }
    }
}

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "rcn-sq", version, about = "Hard multiclass label-noise instances and statistical-query experiments")]
pub struct Cli {
    /// Master seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = ToleranceProfile::Tight)]
    pub tolerance_profile: ToleranceProfile,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Write an instance file from a named recipe or explicit parameters.
    MakeInstance(recipes::MakeInstanceArgs),
    /// Run invariant suites against an instance.
    Verify(VerifyArgs),
    /// Export labeled samples as CSV.
    Sample(SampleArgs),
    /// Analytic and Monte-Carlo error of classifiers.
    Evaluate(EvaluateArgs),
    /// One strategy against one target through the SQ oracle.
    SqTest(strategy::SqTestArgs),
    /// Strategy x target x seed grid with summary tables and plots.
    Experiment(experiment::ExperimentArgs),
    /// Regenerate a bundle from its manifest and compare outputs bit for bit.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    All,
    Matrix,
    Moments,
    Chisq,
    Projection,
    Error,
    Marginal,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Samples per distribution for the empirical checks.
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Draw from the null distribution instead of the planted one.
    #[arg(long)]
    pub null: bool,
    #[arg(long, default_value = "samples.csv")]
    pub file: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    GroundTruth,
    ConstantK,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Classifier JSON files.
    #[arg(long)]
    pub classifier: Vec<PathBuf>,
    /// Built-in hypotheses to include.
    #[arg(long, value_enum)]
    pub builtin: Vec<Builtin>,
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::MakeInstance(_) => "make-instance",
            Command::Verify(_) => "verify",
            Command::Sample(_) => "sample",
            Command::Evaluate(_) => "evaluate",
            Command::SqTest(_) => "sq-test",
            Command::Experiment(_) => "experiment",
            Command::Report(_) => "report",
        }
    }

    /// Input files read by the command, keyed by role.
    fn inputs_mut(&mut self) -> Vec<(String, &mut PathBuf)> {
        match self {
            Command::MakeInstance(_) | Command::Report(_) => Vec::new(),
            Command::Verify(a) => vec![("instance".into(), &mut a.instance)],
            Command::Sample(a) => vec![("instance".into(), &mut a.instance)],
            Command::Evaluate(a) => {
                let mut v = vec![("instance".to_string(), &mut a.instance)];
                v.extend(a.classifier.iter_mut().enumerate().map(|(i, p)| (format!("classifier-{i}"), p)));
                v
            }
            Command::SqTest(a) => vec![("instance".into(), &mut a.instance)],
            Command::Experiment(a) => {
                let mut v = Vec::new();
                if let Some(p) = a.config.as_mut() {
                    v.push(("config".to_string(), p));
                }
                if let Some(p) = a.instance.as_mut() {
                    v.push(("instance".to_string(), p));
                }
                v
            }
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_instance(path: &Path) -> Result<InstanceFile> {
    let text = read_text(path)?;
    InstanceFile::from_json(&text).with_context(|| format!("parsing instance file {}", path.display()))
}

pub fn execution() -> Execution {
    if cfg!(feature = "parallel") {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut bundle = Bundle::create(&cli.out)?;
    let mut manifest = Manifest::new(cli.clone());
    let mut cmd = cli.command.clone();
    for (role, path) in cmd.inputs_mut() {
        let text = read_text(path)?;
        manifest.add_input(&role, path, text);
    }
    let outcome = match &cli.command {
        Command::MakeInstance(a) => recipes::make_instance(a, cli, &mut bundle)?,
        Command::Verify(a) => verify::run(a, cli, &mut bundle)?,
        Command::Sample(a) => sample(a, cli, &mut bundle)?,
        Command::Evaluate(a) => evaluate(a, cli, &mut bundle)?,
        Command::SqTest(a) => strategy::sq_test(a, cli, &mut bundle)?,
        Command::Experiment(a) => experiment::run(a, cli, &mut bundle)?,
        Command::Report(a) => return report(a, cli),
    };
    manifest.finish(bundle, outcome)
}

fn sample(a: &SampleArgs, cli: &Cli, bundle: &mut Bundle) -> Result<serde_json::Value> {
    if a.n == 0 {
        return Err(Exit { code: EXIT_PRECONDITION, message: "n must be at least 1".into() }.into());
    }
    let file = load_instance(&a.instance)?;
    let data = if a.null {
        file.null()?.sample_n(a.n, cli.seed, execution())
    } else {
        file.instance()?.sample_n(a.n, cli.seed, execution())
    };
    let mut buf = Vec::new();
    write_samples(&mut buf, file.n, &data)?;
    bundle.write(&a.file, &buf)?;
    let mut counts = vec![0usize; file.noise()?.k()];
    for s in &data {
        counts[s.y] += 1;
    }
    println!("wrote {} samples to {}", a.n, bundle.path(&a.file).display());
    Ok(serde_json::json!({ "rows": a.n, "label_counts": counts }))
}

fn evaluate(a: &EvaluateArgs, cli: &Cli, bundle: &mut Bundle) -> Result<serde_json::Value> {
    let inst = load_instance(&a.instance)?.instance()?;
    let k = inst.noise().k();
    let opt = opt_error(&inst);
    let mut hyps: Vec<(String, Arc<dyn Classifier>)> = Vec::new();
    for b in &a.builtin {
        let h = match b {
            Builtin::GroundTruth => build_ground_truth(&inst),
            Builtin::ConstantK => {
                rcn_sq_core::classify::UnivariatePolyMulticlass::constant(inst.v().to_vec(), k, k - 1)?
            }
        };
        let id = match b {
            Builtin::GroundTruth => "ground-truth",
            Builtin::ConstantK => "constant-k",
        };
        hyps.push((id.into(), Arc::new(h)));
    }
    for p in &a.classifier {
        let any: AnyClassifier = serde_json::from_str(&read_text(p)?)
            .with_context(|| format!("parsing classifier {}", p.display()))?;
        let id = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
        hyps.push((id, any.into_shared()?));
    }
    if hyps.is_empty() {
        return Err(Exit { code: EXIT_PRECONDITION, message: "nothing to evaluate".into() }.into());
    }
    let mut csv = String::from("hypothesis_id,err_analytic,err_mc,stderr,opt,gap\n");
    let mut rows = Vec::new();
    for (i, (id, h)) in hyps.iter().enumerate() {
        if h.dim() != inst.v().len() || h.k() != k {
            return Err(Exit { code: EXIT_PRECONDITION, message: format!("{id}: shape does not match the instance") }
                .into());
        }
        let analytic = match h.as_poly() {
            Some(p) if p.v() == inst.v() => Some(analytic_error(&inst, p)?.err),
            _ => None,
        };
        let mc = mc_error(&inst, h.as_ref(), a.mc_samples, cli.seed.wrapping_add(i as u64), execution())?;
        let err = analytic.unwrap_or(mc.err);
        csv.push_str(&format!(
            "{id},{},{},{},{},{}\n",
            analytic.map(fmt_f64).unwrap_or_default(),
            fmt_f64(mc.err),
            fmt_f64(mc.stderr),
            fmt_f64(opt),
            fmt_f64(err - opt)
        ));
        println!("{id}: err {err:.6} (mc {:.6} ± {:.6}), opt {opt:.6}", mc.err, mc.stderr);
        rows.push(serde_json::json!({ "id": id, "err_analytic": analytic, "err_mc": mc.err }));
    }
    bundle.write("errors.csv", csv.as_bytes())?;
    Ok(serde_json::json!({ "hypotheses": rows, "opt": opt }))
}

fn report(a: &ReportArgs, cli: &Cli) -> Result<()> {
    let original: Manifest = serde_json::from_str(&read_text(&a.manifest)?)
        .with_context(|| format!("parsing manifest {}", a.manifest.display()))?;
    let mut rerun = original.run.clone();
    if matches!(rerun.command, Command::Report(_)) {
        return Err(Exit { code: EXIT_PRECONDITION, message: "a report manifest cannot be regenerated".into() }.into());
    }
    rerun.out = cli.out.clone();
    rerun.threads = cli.threads.or(rerun.threads);
    let inputs_dir = cli.out.join("inputs");
    std::fs::create_dir_all(&inputs_dir)?;
    for (role, path) in rerun.command.inputs_mut() {
        let input = original
            .inputs
            .get(&role)
            .ok_or_else(|| Exit { code: EXIT_PRECONDITION, message: format!("manifest lacks input {role}") })?;
        let dest = inputs_dir.join(format!("{role}.json"));
        std::fs::write(&dest, &input.contents)?;
        *path = dest;
    }
    println!("regenerating {} run into {}", rerun.command.name(), rerun.out.display());
    run(&rerun)?;
    let regenerated: Manifest = serde_json::from_str(&read_text(&cli.out.join(bundle::MANIFEST))?)?;
    let mut csv = String::from("file,original_sha256,regenerated_sha256,identical\n");
    let mut mismatched = Vec::new();
    for (file, hash) in &original.outputs {
        let new = regenerated.outputs.get(file).map(String::as_str).unwrap_or("");
        let same = new == hash;
        if !same {
            mismatched.push(file.clone());
        }
        csv.push_str(&format!("{file},{hash},{new},{same}\n"));
    }
    std::fs::write(cli.out.join("regeneration.csv"), csv)?;
    if mismatched.is_empty() {
        println!("all {} outputs identical", original.outputs.len());
        Ok(())
    } else {
        Err(verification_failure(format!("outputs differ after regeneration: {}", mismatched.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = rcn_sq_core::exec::with_threads(threads, || run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
