//! Instance files.
//!
//! An instance is a JSON object:
//!
//! ```json
//! {
//!   "n": 2,
//!   "D": {"blocks": [[1], [2]]},
//!   "A": {"triangular_over": [[1], [2]]},
//!   "state": {"tracial": true},
//!   "character": {"block_compression": true}
//! }
//! ```
//!
//! Matrices are row-major arrays of `[re, im]` pairs. Partitions are lists of
//! 1-based indices. A character given as `{"matrix": ...}` is the `n² × n²`
//! matrix of the map acting on column-major vectorizations.

use std::path::Path;

use ncrep_core::algebra::{generate_star_algebra, generate_subalgebra, StarAlgebra, Subalgebra};
use ncrep_core::hoffman_rossi::{make_block_character, DCharacter};
use ncrep_core::matrix::{c64, ComplexMatrix, LinearMap};
use ncrep_core::states::PositiveFunctional;
use ncrep_core::Error;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Row-major rows of `[re, im]` entries.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDescription {
    pub n: usize,
    #[serde(rename = "D")]
    pub d: DSpec,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<ASpec>,
    pub state: StateSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub character: Option<CharacterSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<MatrixSpec>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ASpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triangular_over: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<MatrixSpec>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracial: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<MatrixSpec>,
    /// Divide the density by its trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_compression: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSpec>,
}

/// A parsed instance whose objects have passed their invariants.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub m: StarAlgebra,
    pub d: StarAlgebra,
    pub a: Option<Subalgebra>,
    pub state: PositiveFunctional,
    pub phi: Option<DCharacter>,
    /// The state was declared as the normalized trace.
    pub tracial: bool,
}

pub fn read_description(path: &Path) -> CliResult<InstanceDescription> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    from_str(&text)
}

pub fn from_str(text: &str) -> CliResult<InstanceDescription> {
    serde_json::from_str(text).map_err(|e| CliError::parse(e.to_string()))
}

pub fn to_string(desc: &InstanceDescription) -> String {
    let mut s = serde_json::to_string_pretty(desc).expect("instance descriptions always serialize");
    s.push('\n');
    s
}

/// Read, parse and validate an instance file.
pub fn load(path: &Path) -> CliResult<Instance> {
    read_description(path)?.build()
}

fn exactly_one(what: &str, set: &[bool]) -> CliResult<usize> {
    match set.iter().filter(|&&b| b).count() {
        1 => Ok(set.iter().position(|&b| b).unwrap()),
        0 => Err(CliError::parse(format!("{what}: no variant given"))),
        _ => Err(CliError::parse(format!("{what}: more than one variant given"))),
    }
}

fn parse_matrix(spec: &MatrixSpec, rows: usize, cols: usize, what: &str) -> CliResult<ComplexMatrix> {
    if spec.len() != rows {
        return Err(CliError::parse(format!("{what}: expected {rows} rows, found {}", spec.len())));
    }
    for (i, row) in spec.iter().enumerate() {
        if row.len() != cols {
            return Err(CliError::parse(format!("{what}: row {i} has {} entries, expected {cols}", row.len())));
        }
        if row.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CliError::parse(format!("{what}: row {i} has a non-finite entry")));
        }
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| c64(spec[i][j][0], spec[i][j][1])))
}

pub fn matrix_spec(x: &ComplexMatrix) -> MatrixSpec {
    (0..x.nrows()).map(|i| (0..x.ncols()).map(|j| [x[(i, j)].re, x[(i, j)].im]).collect()).collect()
}

fn parse_partition(blocks: &[Vec<usize>], n: usize, what: &str) -> CliResult<Vec<Vec<usize>>> {
    blocks
        .iter()
        .map(|b| {
            b.iter()
                .map(|&i| {
                    if i == 0 || i > n {
                        Err(CliError::parse(format!("{what}: index {i} outside 1..={n}")))
                    } else {
                        Ok(i - 1)
                    }
                })
                .collect()
        })
        .collect()
}

fn parse_generators(gens: &[MatrixSpec], n: usize, what: &str) -> CliResult<Vec<ComplexMatrix>> {
    if gens.is_empty() {
        return Err(CliError::parse(format!("{what}: empty generator list")));
    }
    gens.iter().enumerate().map(|(k, g)| parse_matrix(g, n, n, &format!("{what} generator {k}"))).collect()
}

impl InstanceDescription {
    /// Parse matrices and partitions, build every object and check its invariants.
    pub fn build(&self) -> CliResult<Instance> {
        let n = self.n;
        if n == 0 {
            return Err(CliError::parse("n must be positive"));
        }
        let m = StarAlgebra::full(n);

        let d_blocks = match exactly_one("D", &[self.d.blocks.is_some(), self.d.generators.is_some()])? {
            0 => Some(parse_partition(self.d.blocks.as_ref().unwrap(), n, "D blocks")?),
            _ => None,
        };
        let d = match &d_blocks {
            Some(b) => StarAlgebra::block_diagonal(n, b)?,
            None => generate_star_algebra(&parse_generators(self.d.generators.as_ref().unwrap(), n, "D")?, n)?,
        };
        d.validate()?;

        let mut a_blocks = None;
        let a = match &self.a {
            None => None,
            Some(spec) => {
                let a = match exactly_one("A", &[spec.triangular_over.is_some(), spec.generators.is_some()])? {
                    0 => {
                        let b = parse_partition(spec.triangular_over.as_ref().unwrap(), n, "A triangular_over")?;
                        let a = Subalgebra::block_upper_triangular(n, &b)?;
                        a_blocks = Some(b);
                        a
                    }
                    _ => generate_subalgebra(&parse_generators(spec.generators.as_ref().unwrap(), n, "A")?, n)?,
                };
                a.validate()?;
                if d.basis().iter().any(|x| !a.contains(x)) {
                    return Err(Error::InvariantViolation {
                        invariant: "D ⊆ A".into(),
                        detail: "a basis element of D is not in A".into(),
                    }
                    .into());
                }
                Some(a)
            }
        };

        let s = &self.state;
        let tracial_flag = s.tracial == Some(true);
        if s.tracial == Some(false) {
            return Err(CliError::parse("state: \"tracial\": false is not a state; give a density instead"));
        }
        let (state, tracial) = match exactly_one("state", &[tracial_flag, s.density.is_some()])? {
            0 => {
                if s.normalize.is_some() {
                    return Err(CliError::parse("state: \"normalize\" only applies to a density"));
                }
                (PositiveFunctional::tracial(n), true)
            }
            _ => {
                let rho = parse_matrix(s.density.as_ref().unwrap(), n, n, "state density")?;
                let f = if s.normalize == Some(true) {
                    PositiveFunctional::state(rho)?
                } else {
                    PositiveFunctional::new(rho)?
                };
                (f, false)
            }
        };

        let phi = match &self.character {
            None => None,
            Some(spec) => {
                let a_alg = a.clone().ok_or_else(|| CliError::parse("character given without an algebra A"))?;
                let compression = spec.block_compression == Some(true);
                if spec.block_compression == Some(false) {
                    return Err(CliError::parse("character: \"block_compression\": false selects nothing"));
                }
                match exactly_one("character", &[compression, spec.matrix.is_some()])? {
                    0 => {
                        let (Some(db), Some(ab)) = (&d_blocks, &a_blocks) else {
                            return Err(CliError::parse(
                                "block_compression needs D given by blocks and A by triangular_over",
                            ));
                        };
                        if db != ab {
                            return Err(CliError::parse("block_compression needs the same partition for D and A"));
                        }
                        Some(make_block_character(n, db)?.2)
                    }
                    _ => {
                        let mat = parse_matrix(spec.matrix.as_ref().unwrap(), n * n, n * n, "character matrix")?;
                        Some(DCharacter::new(a_alg, d.clone(), LinearMap::from_matrix(n, mat)?)?)
                    }
                }
            }
        };

        Ok(Instance { n, m, d, a, state, phi, tracial })
    }
}

impl Instance {
    /// Generator form of this instance: bases for `D` and `A`, the explicit
    /// density and the character's full matrix. Rebuilding it gives the same
    /// objects up to rounding.
    pub fn describe(&self) -> InstanceDescription {
        describe_parts(&self.d, self.a.as_ref(), &self.state, self.phi.as_ref())
    }
}

pub fn describe_parts(
    d: &StarAlgebra,
    a: Option<&Subalgebra>,
    state: &PositiveFunctional,
    phi: Option<&DCharacter>,
) -> InstanceDescription {
    InstanceDescription {
        n: d.n(),
        d: DSpec { blocks: None, generators: Some(d.basis().iter().map(matrix_spec).collect()) },
        a: a.map(|a| ASpec { triangular_over: None, generators: Some(a.basis().iter().map(matrix_spec).collect()) }),
        state: StateSpec { tracial: None, density: Some(matrix_spec(state.density())), normalize: None },
        character: phi.map(|p| CharacterSpec { block_compression: None, matrix: Some(matrix_spec(p.map().matrix())) }),
    }
}
