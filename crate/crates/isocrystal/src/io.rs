//! JSON file formats for crystals, stairs data and Hom modules.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::crystal::{FCrystal, PolarizedCrystal};
use crate::error::{Error, Result};
use crate::plinalg::Matrix;
use crate::semilinear::HomModule;
use crate::stairs::{StairsDatum, Strategy};
use crate::witt::{make_witt_ring, WittRing};

pub const FORMAT_VERSION: u32 = 1;

/// Row-major matrix of coefficient arrays.
pub type MatrixJson = Vec<Vec<Vec<u64>>>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalFile {
    pub version: u32,
    pub p: u64,
    pub q: usize,
    pub n: u32,
    pub rank: usize,
    pub shift: u32,
    pub matrix: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram_c: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stairs: Option<StairsDatumJson>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyJson {
    Monomial,
    FixedLattice,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StairsDatumJson {
    /// Working precision of the datum, at most the crystal's.
    pub n: u32,
    pub basis: Vec<MatrixJson>,
    pub perm: Vec<usize>,
    pub exponents: Vec<i64>,
    pub m: u32,
    pub multiplicative: bool,
    pub strategy: StrategyJson,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomModuleJson {
    pub p: u64,
    pub q: usize,
    pub n: u32,
    pub rows: usize,
    pub cols: usize,
    pub basis: Vec<MatrixJson>,
    pub exponents: Vec<u32>,
}

pub fn matrix_to_json(m: &Matrix) -> MatrixJson {
    m.entries().chunks(m.cols()).map(|row| row.to_vec()).collect()
}

/// Rejects ragged rows, wrong coefficient counts and unreduced entries.
pub fn matrix_from_json(ring: &Arc<WittRing>, rows: usize, cols: usize, m: &MatrixJson) -> Result<Matrix> {
    if m.len() != rows || m.iter().any(|row| row.len() != cols) {
        return Err(Error::Parse(format!("matrix must be {rows}x{cols}")));
    }
    let modulus = ring.modulus();
    let mut data = Vec::with_capacity(rows * cols);
    for entry in m.iter().flatten() {
        if entry.len() != ring.q() {
            return Err(Error::Parse(format!("entries need {} coefficients", ring.q())));
        }
        if entry.iter().any(|&x| x >= modulus) {
            return Err(Error::Parse(format!("coefficient not reduced mod {modulus}")));
        }
        data.push(entry.clone());
    }
    Matrix::from_coeffs(ring, rows, cols, data)
}

/// A parsed crystal file.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub crystal: FCrystal,
    pub polarization: Option<PolarizedCrystal>,
    pub datum: Option<StairsDatum>,
}

impl CrystalFile {
    pub fn from_crystal(c: &FCrystal) -> CrystalFile {
        let ring = c.ring();
        CrystalFile {
            version: FORMAT_VERSION,
            p: ring.p(),
            q: ring.q(),
            n: ring.n(),
            rank: c.rank(),
            shift: c.shift(),
            matrix: matrix_to_json(c.matrix()),
            gram: None,
            gram_c: None,
            stairs: None,
        }
    }

    pub fn from_polarized(pc: &PolarizedCrystal) -> CrystalFile {
        CrystalFile {
            gram: Some(matrix_to_json(&pc.gram)),
            gram_c: Some(pc.c),
            ..Self::from_crystal(&pc.base)
        }
    }

    pub fn with_datum(mut self, d: &StairsDatum) -> CrystalFile {
        self.stairs = Some(StairsDatumJson {
            n: d.ring().n(),
            basis: d.basis.iter().map(matrix_to_json).collect(),
            perm: d.perm.clone(),
            exponents: d.exponents.clone(),
            m: d.m,
            multiplicative: d.multiplicative,
            strategy: match d.strategy {
                Strategy::Monomial => StrategyJson::Monomial,
                Strategy::FixedLattice => StrategyJson::FixedLattice,
            },
        });
        self
    }

    pub fn load(&self) -> Result<Loaded> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported version {}", self.version)));
        }
        let ring = make_witt_ring(self.p, self.q, self.n)?;
        let b = matrix_from_json(&ring, self.rank, self.rank, &self.matrix)?;
        let crystal = FCrystal::new(b, self.shift)?;
        if crystal.shift() != self.shift || crystal.matrix() != &matrix_from_json(&ring, self.rank, self.rank, &self.matrix)? {
            return Err(Error::Parse("crystal is not in canonical form".into()));
        }
        let polarization = match (&self.gram, self.gram_c) {
            (Some(j), Some(c)) => {
                let j = matrix_from_json(&ring, self.rank, self.rank, j)?;
                Some(PolarizedCrystal::new(crystal.clone(), j, c)?)
            }
            (None, None) => None,
            _ => return Err(Error::Parse("gram and gram_c go together".into())),
        };
        let datum = self
            .stairs
            .as_ref()
            .map(|s| s.load(&crystal))
            .transpose()?;
        Ok(Loaded {
            crystal,
            polarization,
            datum,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn parse(text: &str) -> Result<CrystalFile> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<CrystalFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

impl StairsDatumJson {
    /// Rebuilds the datum over the crystal reduced to `n` and validates it.
    pub fn load(&self, c: &FCrystal) -> Result<StairsDatum> {
        if self.n == 0 || self.n > c.ring().n() {
            return Err(Error::Parse("datum precision out of range".into()));
        }
        let crystal = c.reduce(self.n)?;
        let ring = crystal.ring().clone();
        let r = crystal.rank();
        let basis = self
            .basis
            .iter()
            .map(|m| matrix_from_json(&ring, r, r, m))
            .collect::<Result<Vec<_>>>()?;
        let d = StairsDatum {
            crystal,
            basis,
            perm: self.perm.clone(),
            exponents: self.exponents.clone(),
            m: self.m,
            multiplicative: self.multiplicative,
            strategy: match self.strategy {
                StrategyJson::Monomial => Strategy::Monomial,
                StrategyJson::FixedLattice => Strategy::FixedLattice,
            },
        };
        if d.perm.len() != d.basis.len() || d.exponents.len() != d.basis.len() {
            return Err(Error::Parse("basis, perm and exponents differ in length".into()));
        }
        if d.perm.iter().any(|&t| t >= d.basis.len()) {
            return Err(Error::Parse("perm entry out of range".into()));
        }
        d.validate()?;
        Ok(d)
    }
}

impl HomModuleJson {
    pub fn from_module(h: &HomModule) -> HomModuleJson {
        HomModuleJson {
            p: h.ring.p(),
            q: h.ring.q(),
            n: h.ring.n(),
            rows: h.rows,
            cols: h.cols,
            basis: h.basis.iter().map(matrix_to_json).collect(),
            exponents: h.exponents.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{ordinary, polarized_4_5_4};
    use crate::stairs::build_stairs_datum;

    #[test]
    fn round_trip() {
        let ring = make_witt_ring(3, 2, 4).unwrap();
        let c = ordinary(&ring, 3, 1).unwrap();
        let d = build_stairs_datum(&c).unwrap();
        let f = CrystalFile::from_crystal(&c).with_datum(&d);
        let back = CrystalFile::parse(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let loaded = back.load().unwrap();
        assert_eq!(loaded.crystal, c);
        assert_eq!(loaded.datum.unwrap().basis, d.basis);

        let ring = make_witt_ring(2, 1, 4).unwrap();
        let pc = polarized_4_5_4(&ring, &ring.one()).unwrap();
        let f = CrystalFile::from_polarized(&pc);
        let loaded = CrystalFile::parse(&f.to_json()).unwrap().load().unwrap();
        assert_eq!(loaded.polarization.unwrap().gram, pc.gram);
    }

    #[test]
    fn rejects_bad_files() {
        let ring = make_witt_ring(2, 1, 3).unwrap();
        let f = CrystalFile::from_crystal(&ordinary(&ring, 2, 1).unwrap());
        let mut v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
        v["extra"] = 1.into();
        assert!(CrystalFile::parse(&v.to_string()).is_err());
        let mut g = f.clone();
        g.matrix[0][0] = vec![9];
        assert!(g.load().is_err());
        let mut g = f.clone();
        g.version = 2;
        assert!(g.load().is_err());
    }
}
