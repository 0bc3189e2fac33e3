//! Invariant suites run against an instance file.

use crate::bundle::Bundle;
use crate::{execution, load_instance, Cli, Suite, VerifyArgs};
use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcn_sq_core::classify::{analytic_error, build_ground_truth, mc_error, opt_error, UnivariatePolyMulticlass};
use rcn_sq_core::gauss::{self, GaussLegendre};
use rcn_sq_core::hidden::{chisq_hidden, random_unit, HiddenInstance, LabeledSource};
use rcn_sq_core::io::{fmt_f64, InstanceFile};
use rcn_sq_core::noise::{NoiseMatrix, CERTIFICATE_TOL};
use rcn_sq_core::univariate::ShiftedComb;

const MOMENT_DEGREES: usize = 8;
const GRID_POINTS: usize = 1000;
const PANEL: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.measured <= self.tolerance
    }
}

struct Checks {
    factor: f64,
    list: Vec<Check>,
}

impl Checks {
    /// Records `measured <= tolerance`, the tolerance scaled by the profile.
    fn le(&mut self, suite: &'static str, name: impl Into<String>, measured: f64, tolerance: f64) -> bool {
        let c = Check { suite, name: name.into(), measured, tolerance: tolerance * self.factor };
        let ok = c.pass();
        self.list.push(c);
        ok
    }
}

fn wants(sel: Suite, s: Suite) -> bool {
    sel == Suite::All || sel == s
}

pub fn run(args: &VerifyArgs, cli: &Cli, bundle: &mut Bundle) -> Result<serde_json::Value> {
    let file = load_instance(&args.instance)?;
    let mut checks = Checks { factor: cli.tolerance_profile.factor(), list: Vec::new() };
    let matrix_ok = if wants(args.suite, Suite::Matrix) { matrix_suite(&file, &mut checks)? } else { true };
    if matrix_ok {
        let inst = file.instance()?;
        if wants(args.suite, Suite::Moments) {
            moments_suite(&inst, &mut checks)?;
        }
        if wants(args.suite, Suite::Chisq) {
            chisq_suite(&inst, cli.seed, &mut checks)?;
        }
        if wants(args.suite, Suite::Projection) {
            projection_suite(&inst, cli.seed, &mut checks)?;
        }
        if wants(args.suite, Suite::Error) {
            error_suite(&inst, args.samples, cli.seed, &mut checks)?;
        }
        if wants(args.suite, Suite::Marginal) {
            marginal_suite(&file, &inst, args.samples, cli.seed, &mut checks)?;
        }
    }

    let mut csv = String::from("suite,check,measured,tolerance,pass\n");
    for c in &checks.list {
        csv.push_str(&format!("{},{},{},{},{}\n", c.suite, c.name, fmt_f64(c.measured), fmt_f64(c.tolerance), c.pass()));
    }
    bundle.write("checks.csv", csv.as_bytes())?;
    let failed: Vec<&Check> = checks.list.iter().filter(|c| !c.pass()).collect();
    for c in &failed {
        println!("FAIL {}/{}: measured {:e} > tolerance {:e}", c.suite, c.name, c.measured, c.tolerance);
    }
    println!("{} checks, {} failed", checks.list.len(), failed.len());
    if let Some(first) = failed.first() {
        bundle.failure = Some(format!("check {} failed ({}/{})", first.name, first.suite, failed.len()));
    }
    Ok(serde_json::json!({
        "checks": checks.list.len(),
        "failed": failed.iter().map(|c| format!("{}/{}", c.suite, c.name)).collect::<Vec<_>>(),
    }))
}

fn matrix_suite(file: &InstanceFile, checks: &mut Checks) -> Result<bool> {
    const S: &str = "matrix";
    let entries = file.matrix.entries()?;
    let row_err = entries.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let neg = entries.iter().flatten().fold(0.0f64, |acc, &x| acc.max(-x)) + 0.0;
    let stochastic = checks.le(S, "row-stochastic", row_err, 1e-12);
    let nonneg = checks.le(S, "nonnegative", neg, 0.0);
    if !(stochastic && nonneg) {
        return Ok(false);
    }
    let h = NoiseMatrix::new(entries)?;
    let mut ok = checks.le(S, "diagonal-dominant", (-h.separation()).max(0.0), 0.0);
    let residual = match h.check_hard_to_distinguish() {
        Ok(cert) => cert.residual,
        Err(rcn_sq_core::Error::NotHardToDistinguish { residual }) => residual,
        Err(e) => return Err(e.into()),
    };
    ok &= checks.le(S, "certificate-residual", residual, CERTIFICATE_TOL);
    let a = &file.a;
    let simplex = (a.iter().sum::<f64>() - 1.0).abs() + a.iter().fold(0.0f64, |acc, &x| acc.max(-x));
    ok &= checks.le(S, "weights-on-simplex", simplex, 1e-12);
    if a.len() + 1 == h.k() {
        ok &= checks.le(S, "weights-residual", h.combination_residual(a), CERTIFICATE_TOL);
    } else {
        ok &= checks.le(S, "weights-length", (a.len() as f64 + 1.0 - h.k() as f64).abs(), 0.0);
    }
    Ok(ok)
}

/// `∫ f` over each piece of `comb`, by composite Gauss-Legendre.
fn piecewise<F: Fn(f64) -> f64>(gl: &GaussLegendre, comb: &ShiftedComb, f: F) -> f64 {
    comb.pieces()
        .iter()
        .map(|p| {
            let panels = ((p.hi() - p.lo()) / PANEL).ceil().max(1.0) as usize;
            gl.integrate_composite(p.lo(), p.hi(), panels, |x| comb.density(x) * f(x))
        })
        .sum()
}

fn moments_suite(inst: &HiddenInstance, checks: &mut Checks) -> Result<()> {
    const S: &str = "moments";
    let gl = GaussLegendre::new(20);
    for (c, comb) in inst.combs().iter().enumerate() {
        let mass = piecewise(&gl, comb, |_| 1.0);
        checks.le(S, format!("A{}-mass", c + 1), (mass - 1.0).abs(), 1e-9);
        for r in comb.moments(MOMENT_DEGREES)?.iter().skip(1) {
            let quad = piecewise(&gl, comb, |x| x.powi(r.t as i32));
            let scale = r.gamma_t.abs().max(1.0);
            checks.le(S, format!("A{}-moment-{}", c + 1, r.t), (quad - r.value).abs() / scale, 1e-9);
        }
    }
    Ok(())
}

fn overlap_chisq(gl: &GaussLegendre, a: &ShiftedComb, b: &ShiftedComb) -> f64 {
    let mut total = 0.0;
    for p in a.pieces() {
        for q in b.pieces() {
            let (lo, hi) = (p.lo().max(q.lo()), p.hi().min(q.hi()));
            if hi > lo {
                let panels = ((hi - lo) / PANEL).ceil().max(1.0) as usize;
                total += gl.integrate_composite(lo, hi, panels, |x| a.density(x) * b.density(x) / gauss::pdf(x));
            }
        }
    }
    total - 1.0
}

/// A unit vector with `u·v = rho` exactly up to rounding.
fn direction_at(v: &[f64], rho: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut perp = loop {
        let w = random_unit(rng, v.len());
        let proj: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
        let perp: Vec<f64> = w.iter().zip(v).map(|(a, b)| a - proj * b).collect();
        if perp.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
            break perp;
        }
    };
    let norm = perp.iter().map(|x| x * x).sum::<f64>().sqrt();
    perp.iter_mut().for_each(|x| *x /= norm);
    let s = (1.0 - rho * rho).sqrt();
    perp.iter().zip(v).map(|(p, b)| rho * b + s * p).collect()
}

fn chisq_suite(inst: &HiddenInstance, seed: u64, checks: &mut Checks) -> Result<()> {
    const S: &str = "chisq";
    let spec = inst.spec();
    let gl = GaussLegendre::new(20);
    let combs = inst.combs();
    for i in 0..combs.len() {
        for j in 0..combs.len() {
            let closed = spec.chisq_pair(i, j)?;
            let quad = overlap_chisq(&gl, &combs[i], &combs[j]);
            checks.le(S, format!("A{}-A{}", i + 1, j + 1), (closed - quad).abs() / closed.abs().max(1.0), 1e-9);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc41_5eed);
    let nu = spec.moment_deviation(4)?;
    let self_chisq = spec.chisq_pair(0, 0)?;
    let u = direction_at(inst.v(), 0.0, &mut rng);
    checks.le(S, "hidden-orthogonal", chisq_hidden(spec, 0, &u, inst.v())?.abs(), 1e-6);
    for rho in [0.05, 0.1] {
        let u = direction_at(inst.v(), rho, &mut rng);
        let value = chisq_hidden(spec, 0, &u, inst.v())?;
        let bound = rho.powi(4) * self_chisq + nu * nu;
        checks.le(S, format!("hidden-bound-rho-{rho}"), (value.abs() - bound).max(0.0), 0.0);
    }
    Ok(())
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Tooth midpoints first, then an even sweep across the hull and beyond.
fn projection_grid(inst: &HiddenInstance) -> Vec<f64> {
    let mut zs: Vec<f64> =
        inst.supports().iter().flat_map(|s| s.intervals().iter().map(|(a, b)| 0.5 * (a + b))).collect();
    zs.truncate(GRID_POINTS / 2);
    let (lo, hi) = inst.inner_hull();
    let (lo, hi) = (lo - 1.0, hi + 1.0);
    let rest = GRID_POINTS - zs.len();
    zs.extend((0..rest).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / rest as f64));
    zs
}

fn projection_suite(inst: &HiddenInstance, seed: u64, checks: &mut Checks) -> Result<()> {
    const S: &str = "projection";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let v = inst.v();
    let points: Vec<Vec<f64>> = projection_grid(inst)
        .into_iter()
        .map(|z| {
            let g = random_unit(&mut rng, v.len());
            let proj: f64 = g.iter().zip(v).map(|(a, b)| a * b).sum();
            let r = 1.5;
            g.iter().zip(v).map(|(a, b)| z * b + r * (a - proj * b)).collect()
        })
        .collect();
    let k = inst.noise().k();
    for y in 0..k {
        if inst.noise().get(k - 1, y) <= 0.0 {
            continue;
        }
        let mut worst: f64 = 0.0;
        let mut worst_marginal: f64 = 0.0;
        for x in &points {
            let cond = inst.conditional_density(x, y)?;
            worst = worst.max(relative_gap(cond, inst.mixture_conditional(x, y)?));
            if y == k - 1 {
                worst_marginal = worst_marginal.max(relative_gap(cond, inst.marginal_density(x)?));
            }
        }
        checks.le(S, format!("conditional-mixture-y{}", y + 1), worst, 1e-9);
        if y == k - 1 {
            checks.le(S, "last-label-conditional-equals-marginal", worst_marginal, 1e-9);
        }
    }
    Ok(())
}

fn error_suite(inst: &HiddenInstance, n: usize, seed: u64, checks: &mut Checks) -> Result<()> {
    const S: &str = "error";
    let h = inst.noise();
    let k = h.k();
    let hkk = h.get(k - 1, k - 1);
    let opt = opt_error(inst);
    let constant = UnivariatePolyMulticlass::constant(inst.v().to_vec(), k, k - 1)?;
    let truth = build_ground_truth(inst);
    let rc = analytic_error(inst, &constant)?;
    let rt = analytic_error(inst, &truth)?;
    checks.le(S, "constant-k-error", (rc.err - (1.0 - hkk)).abs(), 1e-12);
    checks.le(S, "ground-truth-error-is-opt", (rt.err - opt).abs(), 1e-10);
    checks.le(S, "cellwise-agrees", (rt.err - rt.err_cellwise).abs(), 1e-10);
    let p_in = inst.spec().inner_mass();
    let gap: f64 = inst.weights().iter().enumerate().map(|(j, a)| a * p_in * (h.get(j, j) - hkk)).sum();
    checks.le(S, "constant-minus-opt", ((rc.err - opt) - gap).abs(), 1e-10);
    for (name, hyp, exact, s) in [("mc-ground-truth", &truth, rt.err, 2), ("mc-constant-k", &constant, rc.err, 3)] {
        let mc = mc_error(inst, hyp, n, seed.wrapping_add(s), execution())?;
        let z = if mc.stderr > 0.0 { (mc.err - exact).abs() / mc.stderr } else { (mc.err - exact).abs() * 1e12 };
        checks.le(S, name, z, 4.0);
    }
    Ok(())
}

fn marginal_suite(file: &InstanceFile, inst: &HiddenInstance, n: usize, seed: u64, checks: &mut Checks) -> Result<()> {
    const S: &str = "marginal";
    let h = inst.noise();
    let k = h.k();
    let analytic = inst.label_marginal();
    let counts = |data: &[rcn_sq_core::hidden::LabeledSample]| {
        let mut c = vec![0usize; k];
        for s in data {
            c[s.y] += 1;
        }
        c
    };
    let alt = counts(&inst.sample_n(n, seed, execution()));
    let null = counts(&file.null()?.sample_n(n, seed.wrapping_add(1), execution()));
    for i in 0..k {
        let p = h.get(k - 1, i);
        checks.le(S, format!("label-marginal-y{}", i + 1), (analytic[i] - p).abs(), 1e-10);
        let diff = (alt[i] as f64 - null[i] as f64).abs() / n as f64;
        let se = (2.0 * p * (1.0 - p) / n as f64).sqrt();
        let z = if se > 0.0 { diff / se } else { diff * 1e12 };
        checks.le(S, format!("histogram-y{}", i + 1), z, 4.0);
    }
    Ok(())
}
