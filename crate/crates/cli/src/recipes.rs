//! Instance construction from named parameter recipes.

use crate::bundle::Bundle;
use crate::{Cli, Exit, EXIT_PRECONDITION};
use anyhow::Result;
use clap::{Args, ValueEnum};
use rcn_sq_core::io::{DirectionSpec, FamilyParams, InstanceFile, MatrixSpec};
use rcn_sq_core::univariate::RawCombSpec;
use serde::{Deserialize, Serialize};

/// Smallest tooth half-width written to an instance file.
pub const XI_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    /// `δ = 1/√N`, `m = ε√N`, `ξ = exp(-2N^0.99)`, k = 3 with the singular 3x3 matrix.
    Thm61,
    /// `δ = 1/√N`, `m = ⌈C√(ln k)/δ⌉`, `ξ = exp(-N^0.99 ln k)`, separation-ζ family.
    Thm62,
    /// `δ`, `ξ`, `m`, `k` given directly.
    Explicit,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MakeInstanceArgs {
    #[arg(long, value_enum, default_value_t = Recipe::Explicit)]
    pub recipe: Recipe,
    /// Ambient dimension.
    #[arg(long = "dim", short = 'N', default_value_t = 16)]
    pub n: usize,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Separation of the family matrix; without it an explicit k = 3 instance uses the singular matrix.
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Seed of the hidden direction; defaults to `--seed`.
    #[arg(long)]
    pub direction_seed: Option<u64>,
    #[arg(long, default_value = "instance.json")]
    pub file: String,
}

fn missing(what: &str, recipe: &str) -> anyhow::Error {
    Exit { code: EXIT_PRECONDITION, message: format!("recipe {recipe} needs --{what}") }.into()
}

fn clamp_xi(xi: f64, bundle: &mut Bundle) -> f64 {
    if xi < XI_FLOOR {
        bundle.warn(format!(
            "recipe tooth half-width {xi:e} is below {XI_FLOOR:e}; clamped (the asymptotic regime is out of reach in double precision)"
        ));
        XI_FLOOR
    } else {
        xi
    }
}

/// Builds the instance file, validating every precondition.
pub fn build(args: &MakeInstanceArgs, seed: u64, bundle: &mut Bundle) -> Result<InstanceFile> {
    if args.n < 2 || args.k < 2 {
        return Err(Exit { code: EXIT_PRECONDITION, message: "need dimension >= 2 and k >= 2".into() }.into());
    }
    let sqrt_n = (args.n as f64).sqrt();
    let (spec, matrix) = match args.recipe {
        Recipe::Thm61 => {
            let eps = args.epsilon.ok_or_else(|| missing("epsilon", "thm61"))?;
            let delta = 1.0 / sqrt_n;
            let m = ((eps * sqrt_n).round() as usize).max(1);
            let xi = clamp_xi((-2.0 * (args.n as f64).powf(0.99)).exp(), bundle);
            (RawCombSpec { delta, xi, m, k: 3 }, MatrixSpec::Named("eq1".into()))
        }
        Recipe::Thm62 => {
            let zeta = args.zeta.ok_or_else(|| missing("zeta", "thm62"))?;
            let delta = 1.0 / sqrt_n;
            let ln_k = (args.k as f64).ln();
            let m = (args.c * ln_k.sqrt() / delta).ceil() as usize;
            let xi = clamp_xi((-(args.n as f64).powf(0.99) * ln_k).exp(), bundle);
            let family = FamilyParams { k: args.k, zeta };
            (RawCombSpec { delta, xi, m, k: args.k }, MatrixSpec::Family { family })
        }
        Recipe::Explicit => {
            let delta = args.delta.ok_or_else(|| missing("delta", "explicit"))?;
            let xi = args.xi.ok_or_else(|| missing("xi", "explicit"))?;
            let m = args.m.ok_or_else(|| missing("m", "explicit"))?;
            let matrix = match args.zeta {
                Some(zeta) => MatrixSpec::Family { family: FamilyParams { k: args.k, zeta } },
                None if args.k == 3 => MatrixSpec::Named("eq1".into()),
                None => return Err(missing("zeta", "explicit with k != 3")),
            };
            (RawCombSpec { delta, xi, m, k: args.k }, matrix)
        }
    };
    // Both matrix kinds have the last row as the plain average of the others.
    let k = spec.k;
    let weights = vec![1.0 / (k - 1) as f64; k - 1];
    let file = InstanceFile {
        n: args.n,
        v: DirectionSpec::Seeded { seed: args.direction_seed.unwrap_or(seed) },
        spec,
        a: weights,
        matrix,
    };
    file.instance()?;
    Ok(file)
}

pub fn make_instance(args: &MakeInstanceArgs, cli: &Cli, bundle: &mut Bundle) -> Result<serde_json::Value> {
    let file = build(args, cli.seed, bundle)?;
    bundle.write(&args.file, file.to_json()?.as_bytes())?;
    let s = file.spec;
    println!(
        "wrote {}: N={} delta={} xi={:e} m={} k={}",
        bundle.path(&args.file).display(),
        file.n,
        s.delta,
        s.xi,
        s.m,
        s.k
    );
    Ok(serde_json::to_value(&file)?)
}
