//! State specifications: catalog names with parameters, or JSON files.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use septensor::qcore::{
    density_from_state, parse_product_label, random_density, BellKind, CMatrix, DensityMatrix, StateVector, C64,
    MAX_QUBITS,
};

use crate::{usage, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Ghz(usize),
    W(usize),
    Bell(BellKind),
    Werner(f64),
    MaxMixed(usize),
    GhzDiag(Vec<f64>),
    Random(usize),
    Product(String),
    File(PathBuf),
}

fn qubits(arg: &str, min: usize) -> CliResult<usize> {
    let n: usize = arg.parse().map_err(|_| crate::CliError::Usage(format!("bad qubit count '{arg}'")))?;
    if n < min || n > MAX_QUBITS {
        return usage(format!("qubit count {n} outside {min}..={MAX_QUBITS}"));
    }
    Ok(n)
}

fn real(arg: &str) -> CliResult<f64> {
    arg.trim().parse().map_err(|_| crate::CliError::Usage(format!("bad number '{arg}'")))
}

impl std::str::FromStr for StateSpec {
    type Err = crate::CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        if let Some((name, arg)) = s.split_once(':') {
            return match name {
                "ghz" => Ok(StateSpec::Ghz(qubits(arg, 2)?)),
                "w" => Ok(StateSpec::W(qubits(arg, 2)?)),
                "bell" => Ok(StateSpec::Bell(arg.parse()?)),
                "werner" => {
                    let q = real(arg)?;
                    if !(0.0..=1.0).contains(&q) {
                        return usage(format!("werner parameter {q} outside [0,1]"));
                    }
                    Ok(StateSpec::Werner(q))
                }
                "maxmixed" => Ok(StateSpec::MaxMixed(qubits(arg, 1)?)),
                "ghzdiag" => {
                    let p = arg.split(',').map(real).collect::<CliResult<Vec<f64>>>()?;
                    Ok(StateSpec::GhzDiag(p))
                }
                "random" => Ok(StateSpec::Random(qubits(arg, 1)?)),
                "product" => Ok(StateSpec::Product(arg.to_string())),
                "file" => Ok(StateSpec::File(PathBuf::from(arg))),
                _ => usage(format!("unknown state '{name}'")),
            };
        }
        if Path::new(s).is_file() {
            return Ok(StateSpec::File(PathBuf::from(s)));
        }
        if parse_product_label(s).is_ok() {
            return Ok(StateSpec::Product(s.to_string()));
        }
        usage(format!("'{s}' is neither a catalog state, a product label nor a file"))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    n_qubits: usize,
    statevector: Option<Vec<[f64; 2]>>,
    density: Option<Vec<[f64; 2]>>,
}

fn complex(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|z| C64::new(z[0], z[1])).collect()
}

fn load_file(path: &Path) -> CliResult<DensityMatrix> {
    let f: StateFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if f.n_qubits == 0 || f.n_qubits > MAX_QUBITS {
        return usage(format!("n_qubits {} outside 1..={MAX_QUBITS}", f.n_qubits));
    }
    let d = 1usize << f.n_qubits;
    match (f.statevector, f.density) {
        (Some(v), None) => Ok(density_from_state(&StateVector::new(f.n_qubits, complex(&v))?)),
        (None, Some(m)) => {
            if m.len() != d * d {
                return usage(format!("density needs {} entries, found {}", d * d, m.len()));
            }
            Ok(DensityMatrix::new(f.n_qubits, CMatrix::from_row_slice(d, d, &complex(&m)))?)
        }
        _ => usage("state file needs exactly one of 'statevector' or 'density'"),
    }
}

impl StateSpec {
    pub fn density(&self, seed: u64) -> CliResult<DensityMatrix> {
        Ok(match self {
            StateSpec::Ghz(n) => density_from_state(&StateVector::ghz(*n)?),
            StateSpec::W(n) => density_from_state(&StateVector::w(*n)?),
            StateSpec::Bell(k) => density_from_state(&StateVector::bell(*k)),
            StateSpec::Werner(q) => DensityMatrix::werner(*q)?,
            StateSpec::MaxMixed(n) => DensityMatrix::maximally_mixed(*n)?,
            StateSpec::GhzDiag(p) => DensityMatrix::ghz_diagonal(p)?,
            StateSpec::Random(n) => random_density(*n, seed)?,
            StateSpec::Product(label) => density_from_state(&StateVector::product(label)?),
            StateSpec::File(path) => load_file(path)?,
        })
    }
}

pub fn parse_state(spec: &str, seed: u64) -> CliResult<DensityMatrix> {
    spec.parse::<StateSpec>()?.density(seed)
}
