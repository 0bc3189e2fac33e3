//! Closed forms and quadrature rules of the library against the independent
//! reference computations in `common`.

mod common;

use approx::assert_relative_eq;
use common::{adaptive, chi_2d, phi, RefComb};
use rcn_sq_core::hidden::{chisq_hidden, random_direction, HiddenInstance};
use rcn_sq_core::noise::NoiseMatrix;
use rcn_sq_core::sq::oracle::{projected_expectation, ProjectedFn};
use rcn_sq_core::sq::Target;
use rcn_sq_core::univariate::{CombSpec, ShiftedComb};
use std::sync::Arc;

fn unit_pair(dim: usize, rho: f64) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; dim];
    let mut u = vec![0.0; dim];
    v[0] = 1.0;
    u[0] = rho;
    u[1] = (1.0 - rho * rho).sqrt();
    (u, v)
}

#[test]
fn univariate_chisq_matches_quadrature() {
    let spec = CombSpec::new(0.25, 1e-3, 4, 3).unwrap();
    let refs: Vec<RefComb> = (0..2).map(|i| RefComb::new(0.25, 1e-3, 4, i)).collect();
    for i in 0..2 {
        assert_relative_eq!(spec.chisq_pair(i, i).unwrap(), refs[i].chisq(), max_relative = 1e-9);
    }
    // Cross term: only the shared outer teeth overlap.
    let per = 1e-14 / refs[0].pieces.len() as f64;
    let cross: f64 = refs[0]
        .pieces
        .iter()
        .zip(&refs[0].inner)
        .filter(|(_, inner)| !**inner)
        .map(|(&(lo, hi, _), _)| adaptive(&|x: f64| refs[0].height * refs[1].height * phi(x), lo, hi, per))
        .sum::<f64>()
        - 1.0;
    assert_relative_eq!(spec.chisq_pair(0, 1).unwrap(), cross, max_relative = 1e-9);
}

#[test]
fn hidden_direction_chi_matches_double_integral() {
    // Wide teeth and a shifted block keep the correlation visible.
    let (delta, xi, m) = (1.0, 0.08, 1);
    let spec = CombSpec::new(delta, xi, m, 3).unwrap();
    for i in 0..2 {
        let r = RefComb::new(delta, xi, m, i);
        for rho in [0.3, 0.7, 0.95] {
            let (u, v) = unit_pair(3, rho);
            let lib = chisq_hidden(&spec, i, &u, &v).unwrap();
            let quad = chi_2d(&r, &r, rho, 12.0);
            assert!((lib - quad).abs() <= 1e-9 * (1.0 + quad.abs()), "i={i} rho={rho}: {lib} vs {quad}");
        }
    }
}

#[test]
fn component_masses_and_densities_match_reference() {
    let spec = CombSpec::new(0.25, 1e-3, 4, 3).unwrap();
    for i in 0..2 {
        let comb = ShiftedComb::new(spec, i).unwrap();
        let r = RefComb::new(0.25, 1e-3, 4, i);
        assert_relative_eq!(comb.height(), r.height, max_relative = 1e-12);
        for (a, b) in [(-1.0, 1.0), (-0.3, 2.5), (0.9, 0.95)] {
            let quad = r.integrate(|x| f64::from(u8::from(x >= a && x <= b)), 1e-15);
            assert!((comb.mass_between(a, b) - quad).abs() < 1e-12, "[{a}, {b}]");
        }
        for k in 0..400 {
            let x = -3.0 + 6.0 * k as f64 / 400.0 + 1e-4;
            assert!((comb.density(x) - r.density(x)).abs() <= 1e-10 * r.height);
        }
    }
}

#[test]
fn label_marginal_matches_quadrature() {
    let spec = CombSpec::new(0.25, 1e-3, 4, 3).unwrap();
    let inst = HiddenInstance::eq1(random_direction(4, 2), spec).unwrap();
    let h = NoiseMatrix::eq1();
    let mut expect = [0.0; 3];
    for j in 0..2 {
        let r = RefComb::new(0.25, 1e-3, 4, j);
        for (&(lo, hi, s), &inner) in r.pieces.iter().zip(&r.inner) {
            let mass = adaptive(&|x: f64| r.height * phi(x + s), lo, hi, 1e-18);
            let row = if inner { j } else { 2 };
            for (y, e) in expect.iter_mut().enumerate() {
                *e += 0.5 * mass * h.get(row, y);
            }
        }
    }
    for (a, b) in inst.label_marginal().iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn projected_queries_match_quadrature() {
    let spec = CombSpec::new(0.25, 1e-3, 4, 3).unwrap();
    let rho = 0.6;
    let (u, v) = unit_pair(5, rho);
    let inst = HiddenInstance::eq1(v, spec).unwrap();
    let h = NoiseMatrix::eq1();
    let f = |t: f64, y: usize| (t * (y as f64 + 1.0) / 3.0).tanh();
    let pf: ProjectedFn = Arc::new(f);
    let lib = projected_expectation(&Target::Hidden(inst), &u, &pf);

    // u·x = ρz + σg with g independent of (z, y).
    let sigma = (1.0 - rho * rho).sqrt();
    let mut quad = 0.0;
    for j in 0..2 {
        let r = RefComb::new(0.25, 1e-3, 4, j);
        for (&(lo, hi, s), &inner) in r.pieces.iter().zip(&r.inner) {
            if lo.abs() > 9.0 {
                continue;
            }
            let row = if inner { j } else { 2 };
            for y in 0..3 {
                let w = 0.5 * h.get(row, y);
                if w == 0.0 {
                    continue;
                }
                let g_avg = |z: f64| adaptive(&|g: f64| phi(g) * f(rho * z + sigma * g, y), -12.0, 12.0, 1e-14);
                quad += w * adaptive(&|z: f64| r.height * phi(z + s) * g_avg(z), lo, hi, 1e-15);
            }
        }
    }
    assert!((lib - quad).abs() < 1e-9, "{lib} vs {quad}");
}
