//! File formats and the artifact writer.
//!
//! Real matrices are `{"n_modes": n, "rows": [[...], ...]}`, complex ones
//! `{"re": rows, "im": rows}`. Channels are `{"A": matrix, "B": matrix}`,
//! tensors `{"legs": [{"name": "P", "modes": 2}, ...], "Lambda": matrix}` and
//! lattice models `{"orbitals": m, "bonds": [{"d": [dx, dy], "T": matrix}]}`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::bail;
use isogauss::isotns::{IsoTensor, Leg, LegKind};
use isogauss::linalg::Mat;
use isogauss::models::LatticeModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixJson {
    Real {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_modes: Option<usize>,
        rows: Vec<Vec<f64>>,
    },
    Complex { re: Vec<Vec<f64>>, im: Vec<Vec<f64>> },
}

fn rows_to_mat(rows: &[Vec<f64>]) -> anyhow::Result<Mat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        bail!("ragged matrix rows");
    }
    Ok(Mat::from_shape_fn((nr, nc), |(i, j)| rows[i][j]))
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl MatrixJson {
    pub fn real(m: &Mat) -> Self {
        MatrixJson::Real { n_modes: Some(m.nrows()), rows: mat_to_rows(m) }
    }

    /// Real matrix; a complex entry with a nonzero imaginary part is rejected.
    pub fn to_real(&self) -> anyhow::Result<Mat> {
        match self {
            MatrixJson::Real { n_modes, rows } => {
                let m = rows_to_mat(rows)?;
                if let Some(n) = n_modes {
                    if *n != m.nrows() {
                        bail!("n_modes = {n} but the matrix has {} rows", m.nrows());
                    }
                }
                Ok(m)
            }
            MatrixJson::Complex { re, im } => {
                let im = rows_to_mat(im)?;
                if im.iter().any(|&x| x != 0.0) {
                    bail!("expected a real matrix");
                }
                rows_to_mat(re)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelJson {
    #[serde(rename = "A")]
    pub a: MatrixJson,
    #[serde(rename = "B")]
    pub b: MatrixJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LegJson {
    pub name: LegKind,
    pub modes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorJson {
    pub legs: Vec<LegJson>,
    #[serde(rename = "Lambda")]
    pub lambda: MatrixJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BondJson {
    pub d: (i32, i32),
    #[serde(rename = "T")]
    pub t: MatrixJson,
}

/// Each bond enters as T at d and -Tᵀ at -d, so an on-site block
/// d = (0, 0) contributes T - Tᵀ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub orbitals: usize,
    pub bonds: Vec<BondJson>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn in_file<T>(path: &Path, r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(format!("{}: {e:#}", path.display())))
}

/// Channel matrices as stored, before any CPTP check.
pub fn read_channel_matrices(path: &Path) -> Result<(Mat, Mat), Failure> {
    let c: ChannelJson = read_json(path)?;
    Ok((in_file(path, c.a.to_real())?, in_file(path, c.b.to_real())?))
}

pub fn read_matrix(path: &Path) -> Result<Mat, Failure> {
    let m: MatrixJson = read_json(path)?;
    in_file(path, m.to_real())
}

pub fn read_tensor(path: &Path) -> Result<IsoTensor, Failure> {
    let t: TensorJson = read_json(path)?;
    let legs = t.legs.iter().map(|l| Leg::new(l.name, l.modes)).collect();
    IsoTensor::new(legs, in_file(path, t.lambda.to_real())?).map_err(Failure::from)
}

pub fn read_model(path: &Path) -> Result<LatticeModel, Failure> {
    let m: ModelJson = read_json(path)?;
    let mut model = LatticeModel::new(m.orbitals).map_err(Failure::from)?;
    for bond in &m.bonds {
        model.add_bond(bond.d, &in_file(path, bond.t.to_real())?).map_err(Failure::from)?;
    }
    Ok(model)
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

/// A named invariant with its measured value and the limit it must respect.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    parameters: &'a serde_json::Map<String, serde_json::Value>,
    artifacts: &'a [Artifact],
    checks: &'a [Check],
    passed: bool,
}

/// Collects the artifacts and checks of one run and writes the manifest.
pub struct Run {
    dir: PathBuf,
    command: &'static str,
    parameters: serde_json::Map<String, serde_json::Value>,
    artifacts: Vec<Artifact>,
    checks: Vec<Check>,
}

impl Run {
    pub fn new(dir: PathBuf, command: &'static str) -> Result<Self, Failure> {
        fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, command, parameters: serde_json::Map::new(), artifacts: Vec::new(), checks: Vec::new() })
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.into(), serde_json::to_value(value).expect("serialisable parameter"));
    }

    fn store(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        let sha256 = Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect();
        self.artifacts.push(Artifact { file: name.into(), sha256 });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serialisable report");
        bytes.push(b'\n');
        self.store(name, &bytes)
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Failure::Usage(format!("csv {name}: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Usage(format!("csv {name}: {e}")))?;
        self.store(name, &bytes)
    }

    /// value ≤ limit.
    pub fn at_most(&mut self, name: &str, value: f64, limit: f64) -> bool {
        let passed = value <= limit;
        self.checks.push(Check { name: name.into(), value, limit, passed });
        passed
    }

    /// A boolean invariant, recorded as 0 (holds) or 1 (violated) against limit 0.
    pub fn holds(&mut self, name: &str, ok: bool) -> bool {
        self.at_most(name, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    /// Writes `<command>.manifest.json`, reports violations on stderr and
    /// returns whether every check passed.
    pub fn finish(self) -> Result<bool, Failure> {
        let passed = self.checks.iter().all(|c| c.passed);
        for c in self.checks.iter().filter(|c| !c.passed) {
            eprintln!("invariant violated: {} = {:.3e} (limit {:.1e})", c.name, c.value, c.limit);
        }
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            parameters: &self.parameters,
            artifacts: &self.artifacts,
            checks: &self.checks,
            passed,
        };
        let path = self.dir.join(format!("{}.manifest.json", self.command));
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serialisable manifest");
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        println!("manifest: {}", path.display());
        Ok(passed)
    }
}
