//! Label-flip matrices and the hard-to-distinguish condition.
//!
//! Row `i` of a [`NoiseMatrix`] is the law of the observed label given true
//! label `i`. Labels are 0-based in code; row `k - 1` plays the role of the
//! "outside" label.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

const ROW_SUM_TOL: f64 = 1e-12;
/// Residual below which a simplex fit certifies `h_k = Σ a_j h_j`.
pub const CERTIFICATE_TOL: f64 = 1e-9;
const FIT_MAX_ITERS: usize = 10_000;
const FIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct NoiseMatrix {
    k: usize,
    entries: Vec<Vec<f64>>,
}

/// Wire form `{"k": int, "entries": [[...]]}`, unvalidated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMatrix {
    pub k: usize,
    pub entries: Vec<Vec<f64>>,
}

impl TryFrom<RawMatrix> for NoiseMatrix {
    type Error = Error;
    fn try_from(raw: RawMatrix) -> Result<Self> {
        NoiseMatrix::new(raw.entries).and_then(|m| {
            if m.k != raw.k {
                Err(Error::DimensionMismatch { expected: raw.k, got: m.k })
            } else {
                Ok(m)
            }
        })
    }
}

impl From<NoiseMatrix> for RawMatrix {
    fn from(m: NoiseMatrix) -> Self {
        RawMatrix { k: m.k, entries: m.entries }
    }
}

impl NoiseMatrix {
    /// Validates shape, entry range, and row sums.
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let k = entries.len();
        if k < 2 {
            return Err(Error::InvalidParameter(format!("need k >= 2 labels, got {k}")));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: row.len() });
            }
            if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::NotStochastic(format!("entry {x} in row {i} outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NotStochastic(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { k, entries })
    }

    /// The 3×3 matrix whose third row is the average of the first two.
    pub fn eq1() -> Self {
        Self {
            k: 3,
            entries: vec![
                vec![0.6, 0.0, 0.4],
                vec![0.0, 0.6, 0.4],
                vec![0.3, 0.3, 0.4],
            ],
        }
    }

    /// Small-separation family for `k >= 3` labels.
    ///
    /// Rows `i < k`: `H_ii = (k-1)/k - ζ`, `H_ik = 1/k + ζ`, zero elsewhere.
    /// Row `k`: `H_kk = 1/k + ζ`, `H_kj = 1/k - ζ/(k-1)`, which makes it the
    /// uniform average of the other rows.
    pub fn separation_family(k: usize, zeta: f64) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidParameter(format!("family needs k >= 3, got {k}")));
        }
        let kf = k as f64;
        let limit = (kf - 2.0) / (2.0 * kf);
        if !(zeta > 0.0 && zeta < limit) {
            return Err(Error::InvalidParameter(format!(
                "zeta = {zeta} outside (0, {limit}) for k = {k}"
            )));
        }
        let diag = (kf - 1.0) / kf - zeta;
        let last = 1.0 / kf + zeta;
        let off = 1.0 / kf - zeta / (kf - 1.0);
        let mut entries = vec![vec![0.0; k]; k];
        for (i, row) in entries.iter_mut().enumerate().take(k - 1) {
            row[i] = diag;
            row[k - 1] = last;
        }
        for j in 0..k - 1 {
            entries[k - 1][j] = off;
        }
        entries[k - 1][k - 1] = last;
        Self::new(entries)
    }

    pub fn identity(k: usize) -> Self {
        let entries = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { k, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// `min_{i≠j} H_ii - H_ij`; may be negative.
    pub fn separation(&self) -> f64 {
        self.pairwise_gaps().fold(f64::INFINITY, f64::min)
    }

    /// `max_{i≠j} H_ii - H_ij`.
    pub fn max_separation(&self) -> f64 {
        self.pairwise_gaps().fold(f64::NEG_INFINITY, f64::max)
    }

    fn pairwise_gaps(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.k).flat_map(move |i| {
            (0..self.k)
                .filter(move |&j| j != i)
                .map(move |j| self.entries[i][i] - self.entries[i][j])
        })
    }

    /// `H_jj - H_ji >= 0` for all `j, i`.
    pub fn diagonal_dominant(&self) -> bool {
        self.separation() >= 0.0
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.k, |i, j| self.entries[i][j])
    }

    pub fn determinant(&self) -> f64 {
        self.to_dmatrix().determinant()
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.to_dmatrix().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values().last().copied().unwrap_or(0.0)
    }

    /// Max-norm of `h_k - Σ_j a_j h_j`.
    pub fn combination_residual(&self, a: &[f64]) -> f64 {
        let last = self.k - 1;
        (0..self.k)
            .map(|col| {
                let mix: f64 = a.iter().enumerate().map(|(j, aj)| aj * self.entries[j][col]).sum();
                (self.entries[last][col] - mix).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Solves `min_{a ∈ simplex} ‖h_k - Σ a_j h_j‖₂` by accelerated projected
    /// gradient and certifies the fit when its max-norm residual is within
    /// [`CERTIFICATE_TOL`].
    pub fn check_hard_to_distinguish(&self) -> Result<DistinguishCertificate> {
        let n = self.k - 1;
        let target = &self.entries[n];
        let rows = &self.entries[..n];

        // Lipschitz constant of the gradient: ‖B Bᵀ‖ ≤ ‖B‖_F².
        let lip: f64 = rows.iter().flatten().map(|x| x * x).sum::<f64>().max(1e-300);
        let step = 1.0 / lip;

        let grad = |a: &[f64]| -> Vec<f64> {
            let resid: Vec<f64> = (0..self.k)
                .map(|c| a.iter().zip(rows).map(|(aj, r)| aj * r[c]).sum::<f64>() - target[c])
                .collect();
            rows.iter()
                .map(|r| r.iter().zip(&resid).map(|(x, e)| x * e).sum())
                .collect()
        };

        let mut a = vec![1.0 / n as f64; n];
        let mut y = a.clone();
        let mut t = 1.0_f64;
        for _ in 0..FIT_MAX_ITERS {
            if self.combination_residual(&a) == 0.0 {
                break;
            }
            let g = grad(&y);
            let stepped: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - step * gi).collect();
            let next = project_simplex(&stepped);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let moved = next.iter().zip(&a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            y = next
                .iter()
                .zip(&a)
                .map(|(p, q)| p + (t - 1.0) / t_next * (p - q))
                .collect();
            a = next;
            t = t_next;
            if moved < FIT_TOL {
                break;
            }
        }

        let residual = self.combination_residual(&a);
        if residual > CERTIFICATE_TOL {
            return Err(Error::NotHardToDistinguish { residual });
        }
        Ok(DistinguishCertificate {
            weights: a,
            residual,
            diagonal_dominant: self.diagonal_dominant(),
        })
    }
}

/// Convex weights `a` with `h_k = Σ a_j h_j` plus the diagonal-dominance flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishCertificate {
    pub weights: Vec<f64>,
    pub residual: f64,
    /// `H_jj - H_ji >= 0` for every `j, i`.
    pub diagonal_dominant: bool,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let candidate = (cum - 1.0) / (i as f64 + 1.0);
        if ui - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Pair enumeration oracle for the separation.
    fn separation_by_enumeration(h: &NoiseMatrix) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..h.k() {
            for j in 0..h.k() {
                if i != j {
                    best = best.min(h.get(i, i) - h.get(i, j));
                }
            }
        }
        best
    }

    #[test]
    fn eq1_entries_and_identities() {
        let h = NoiseMatrix::eq1();
        assert_eq!(h.rows()[2], vec![0.3, 0.3, 0.4]);
        assert_relative_eq!(h.separation(), 0.1, epsilon = 1e-15);
        assert!(h.determinant().abs() < 1e-12);
        let cert = h.check_hard_to_distinguish().unwrap();
        assert_eq!(cert.weights, vec![0.5, 0.5]);
        assert_eq!(cert.residual, 0.0);
        assert!(cert.diagonal_dominant);
    }

    #[test]
    fn family_k3_matches_hand_substitution() {
        let h = NoiseMatrix::separation_family(3, 0.01).unwrap();
        let diag = 2.0 / 3.0 - 0.01;
        let last = 1.0 / 3.0 + 0.01;
        let off = 1.0 / 3.0 - 0.005;
        assert_relative_eq!(h.get(0, 0), diag, epsilon = 1e-15);
        assert_relative_eq!(h.get(0, 2), last, epsilon = 1e-15);
        assert_relative_eq!(h.get(2, 0), off, epsilon = 1e-15);
        assert_relative_eq!(h.get(0, 0), 0.65667, epsilon = 5e-6);
        assert_relative_eq!(h.get(2, 1), 0.32833, epsilon = 5e-6);
        for c in 0..3 {
            assert_relative_eq!(h.get(2, c), 0.5 * (h.get(0, c) + h.get(1, c)), epsilon = 1e-12);
        }
    }

    #[test]
    fn family_certificate_is_uniform() {
        let h = NoiseMatrix::separation_family(5, 0.02).unwrap();
        let cert = h.check_hard_to_distinguish().unwrap();
        for w in &cert.weights {
            assert_relative_eq!(*w, 0.25, epsilon = 1e-12);
        }
        assert!(cert.residual <= 1e-15);
    }

    #[test]
    fn family_separation_formula() {
        let h = NoiseMatrix::separation_family(4, 0.03).unwrap();
        assert_relative_eq!(h.separation(), 0.04, epsilon = 1e-12);
        assert_relative_eq!(separation_by_enumeration(&h), 0.04, epsilon = 1e-12);
    }

    #[test]
    fn identity_has_no_certificate() {
        let h = NoiseMatrix::identity(3);
        assert!(matches!(h.check_hard_to_distinguish(), Err(Error::NotHardToDistinguish { .. })));
        assert_eq!(h.separation(), 1.0);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(NoiseMatrix::new(vec![vec![0.5, 0.51], vec![0.5, 0.5]]).is_err());
        assert!(NoiseMatrix::new(vec![vec![1.2, -0.2], vec![0.5, 0.5]]).is_err());
        assert!(NoiseMatrix::new(vec![vec![1.0]]).is_err());
        assert!(NoiseMatrix::separation_family(3, 0.2).is_err());
    }

    #[test]
    fn json_round_trip_keeps_full_precision() {
        let h = NoiseMatrix::separation_family(3, 0.01).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        assert!(s.starts_with("{\"k\":3,\"entries\":"));
        let back: NoiseMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<NoiseMatrix>(r#"{"k":2,"entries":[[0.5,0.6],[0.5,0.5]]}"#).is_err());
    }

    #[test]
    fn certificate_is_deterministic() {
        let h = NoiseMatrix::new(vec![
            vec![0.7, 0.1, 0.2],
            vec![0.1, 0.7, 0.2],
            vec![0.34, 0.46, 0.2],
        ])
        .unwrap();
        let c1 = h.check_hard_to_distinguish().unwrap();
        let c2 = h.check_hard_to_distinguish().unwrap();
        assert_eq!(c1, c2);
        assert_relative_eq!(c1.weights[0], 0.4, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn family_invariants(k in 3usize..12, frac in 0.01f64..0.99) {
            let kf = k as f64;
            let zeta = frac * (kf - 2.0) / (2.0 * kf);
            let h = NoiseMatrix::separation_family(k, zeta).unwrap();
            for r in h.rows() {
                prop_assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
            for c in 0..k {
                let mean: f64 = (0..k - 1).map(|i| h.get(i, c)).sum::<f64>() / (kf - 1.0);
                prop_assert!((mean - h.get(k - 1, c)).abs() <= 1e-12);
            }
            let cert = h.check_hard_to_distinguish().unwrap();
            for c in 0..k {
                let mix: f64 = cert.weights.iter().enumerate().map(|(j, a)| a * h.get(j, c)).sum();
                prop_assert!((mix - h.get(k - 1, c)).abs() <= 1e-9);
            }
            prop_assert!((h.separation() - separation_by_enumeration(&h)).abs() < 1e-15);
        }

        #[test]
        fn simplex_projection_lands_on_simplex(v in proptest::collection::vec(-3.0f64..3.0, 1..8)) {
            let p = project_simplex(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
        }
    }
}
