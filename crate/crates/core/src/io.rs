//! On-disk formats: instance files and fixed-precision CSV.

use crate::error::{Error, Result};
use crate::hidden::{random_direction, HiddenInstance, LabeledSample, NullInstance};
use crate::noise::{NoiseMatrix, RawMatrix};
use crate::univariate::{CombSpec, RawCombSpec};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionSpec {
    Explicit(Vec<f64>),
    Seeded { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub k: usize,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Family { family: FamilyParams },
    Explicit(RawMatrix),
}

impl MatrixSpec {
    /// Entries as written, before any validation.
    pub fn entries(&self) -> Result<Vec<Vec<f64>>> {
        match self {
            MatrixSpec::Named(name) if name == "eq1" => Ok(NoiseMatrix::eq1().rows().to_vec()),
            MatrixSpec::Named(name) => Err(Error::InvalidParameter(format!("unknown matrix name {name:?}"))),
            MatrixSpec::Family { family } => {
                Ok(NoiseMatrix::separation_family(family.k, family.zeta)?.rows().to_vec())
            }
            MatrixSpec::Explicit(raw) => {
                if raw.entries.len() != raw.k || raw.entries.iter().any(|r| r.len() != raw.k) {
                    return Err(Error::InvalidParameter(format!("matrix entries are not {0}x{0}", raw.k)));
                }
                Ok(raw.entries.clone())
            }
        }
    }

    pub fn build(&self) -> Result<NoiseMatrix> {
        NoiseMatrix::new(self.entries()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(rename = "N")]
    pub n: usize,
    pub v: DirectionSpec,
    pub spec: RawCombSpec,
    pub a: Vec<f64>,
    pub matrix: MatrixSpec,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn direction(&self) -> Result<Vec<f64>> {
        match &self.v {
            DirectionSpec::Seeded { seed } => Ok(random_direction(self.n, *seed)),
            DirectionSpec::Explicit(v) if v.len() == self.n => Ok(v.clone()),
            DirectionSpec::Explicit(v) => Err(Error::DimensionMismatch { expected: self.n, got: v.len() }),
        }
    }

    pub fn comb_spec(&self) -> Result<CombSpec> {
        CombSpec::try_from(self.spec)
    }

    pub fn noise(&self) -> Result<NoiseMatrix> {
        self.matrix.build()
    }

    /// The planted instance, with every precondition enforced.
    pub fn instance(&self) -> Result<HiddenInstance> {
        HiddenInstance::new(self.direction()?, self.comb_spec()?, self.a.clone(), self.noise()?)
    }

    /// The matching null distribution.
    pub fn null(&self) -> Result<NullInstance> {
        NullInstance::new(self.n, self.noise()?)
    }
}

/// Writes `x_1..x_N,y` rows with labels printed 1-based.
pub fn write_samples<W: Write>(mut w: W, dim: usize, samples: &[LabeledSample]) -> std::io::Result<()> {
    let header = (1..=dim).map(|i| format!("x_{i}")).chain(["y".to_string()]).collect::<Vec<_>>();
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for s in samples {
        line.clear();
        for x in &s.x {
            line.push_str(&fmt_f64(*x));
            line.push(',');
        }
        line.push_str(&(s.y + 1).to_string());
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Inverse of [`write_samples`].
pub fn read_samples(text: &str) -> Result<Vec<LabeledSample>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidParameter("empty sample file".into()))?;
    let cols = header.split(',').count();
    if cols < 2 || header.rsplit(',').next() != Some("y") {
        return Err(Error::InvalidParameter("sample header must be x_1..x_N,y".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(row, l)| {
            let fields = l.split(',').collect::<Vec<_>>();
            if fields.len() != cols {
                return Err(Error::InvalidParameter(format!("row {} has {} fields", row + 1, fields.len())));
            }
            let bad = |f: &str| Error::InvalidParameter(format!("row {}: cannot parse {f:?}", row + 1));
            let x = fields[..cols - 1]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(f)))
                .collect::<Result<Vec<_>>>()?;
            let y: usize = fields[cols - 1].parse().map_err(|_| bad(fields[cols - 1]))?;
            if y == 0 {
                return Err(bad("0"));
            }
            Ok(LabeledSample { x, y: y - 1 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::hidden::LabeledSource;

    const DESK: &str = r#"{"N": 4, "v": {"seed": 11}, "spec": {"delta": 0.25, "xi": 0.001, "m": 4, "k": 3},
        "a": [0.5, 0.5], "matrix": "eq1"}"#;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02e23, 5e-324, 1.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.6), "5.9999999999999998e-1");
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn instance_file_variants() {
        let f = InstanceFile::from_json(DESK).unwrap();
        let inst = f.instance().unwrap();
        assert_eq!(inst.v().len(), 4);
        assert_eq!(inst.v(), &random_direction(4, 11)[..]);
        let round = InstanceFile::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(round, f);

        let fam = DESK.replace(r#""eq1""#, r#"{"family": {"k": 3, "zeta": 0.05}}"#);
        assert_eq!(InstanceFile::from_json(&fam).unwrap().noise().unwrap().get(2, 2), 1.0 / 3.0 + 0.05);

        let explicit = DESK.replace(r#""eq1""#, r#"{"k": 2, "entries": [[0.5, 0.5], [0.5, 0.5]]}"#);
        assert_eq!(InstanceFile::from_json(&explicit).unwrap().noise().unwrap().k(), 2);

        let bad = DESK.replace(r#""eq1""#, r#""eq2""#);
        assert!(InstanceFile::from_json(&bad).unwrap().noise().is_err());
    }

    #[test]
    fn sample_csv_round_trip() {
        let inst = InstanceFile::from_json(DESK).unwrap().instance().unwrap();
        let data = inst.sample_n(50, 3, Execution::Sequential);
        let mut buf = Vec::new();
        write_samples(&mut buf, 4, &data).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x_1,x_2,x_3,x_4,y\n"));
        assert_eq!(read_samples(&text).unwrap(), data);
    }
}
