//! Reference entanglement tests: partial-transpose positivity, negativity,
//! Wootters concurrence and the Bell-diagonal closed form.

use nalgebra::Matrix4;
use serde::Serialize;

use crate::error::{invalid_arg, Error, Result};
use crate::qcore::{
    hermitian_eigenvalues, partial_transpose, pauli_matrix, CMatrix, DensityMatrix, C64, PSD_TOL,
};

/// Eigenvalue floor used when taking matrix square roots.
const SQRT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bipartition {
    n_qubits: usize,
    left: Vec<usize>,
}

impl Bipartition {
    pub fn new(n_qubits: usize, mut left: Vec<usize>) -> Result<Self> {
        left.sort_unstable();
        left.dedup();
        if left.is_empty() || left.len() >= n_qubits {
            return invalid_arg(format!("{left:?} is not a nonempty proper subset of {n_qubits} qubits"));
        }
        if left.iter().any(|&q| q >= n_qubits) {
            return invalid_arg(format!("{left:?} has a qubit out of range for {n_qubits} qubits"));
        }
        Ok(Bipartition { n_qubits, left })
    }

    /// The first `floor(N/2)` qubits against the rest.
    pub fn balanced(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, (0..n_qubits / 2).collect())
    }

    /// Every cut up to exchange of the two sides.
    pub fn all(n_qubits: usize) -> Vec<Bipartition> {
        (1..1usize << n_qubits)
            .filter(|m| m & 1 == 1 && m.count_ones() < n_qubits as u32)
            .map(|m| {
                let left = (0..n_qubits).filter(|q| m >> q & 1 == 1).collect();
                Bipartition { n_qubits, left }
            })
            .collect()
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> Vec<usize> {
        (0..self.n_qubits).filter(|q| !self.left.contains(q)).collect()
    }

    pub fn label(&self) -> String {
        let side = |v: &[usize]| v.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",");
        format!("{}|{}", side(&self.left), side(&self.right()))
    }

    fn check(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.n_qubits() != self.n_qubits {
            return invalid_arg(format!(
                "cut for {} qubits applied to a {}-qubit state",
                self.n_qubits,
                rho.n_qubits()
            ));
        }
        Ok(())
    }
}

fn pt_spectrum(rho: &DensityMatrix, cut: &Bipartition) -> Result<Vec<f64>> {
    cut.check(rho)?;
    Ok(hermitian_eigenvalues(&partial_transpose(rho, cut.left())?))
}

/// Values below this are reported as exactly zero.
const NEGATIVITY_FLOOR: f64 = 1e-12;

/// Trace norm of the partial transpose minus one, clamped at zero.
pub fn negativity(rho: &DensityMatrix, cut: &Bipartition) -> Result<f64> {
    let ev = pt_spectrum(rho, cut)?;
    let v = ev.iter().map(|x| x.abs()).sum::<f64>() - 1.0;
    Ok(if v < NEGATIVITY_FLOOR { 0.0 } else { v })
}

/// `Tr(rho^T_A rho^T_A^dagger) - 1`.
pub fn pt_purity_expression(rho: &DensityMatrix, cut: &Bipartition) -> Result<f64> {
    cut.check(rho)?;
    let pt = partial_transpose(rho, cut.left())?;
    Ok(pt.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0)
}

/// Eigenvalues of the Bell-diagonal state with correlations `(a, b, c)`.
pub fn bell_diag_eigenvalues(a: f64, b: f64, c: f64) -> [f64; 4] {
    [
        (1.0 - a - b - c) / 4.0,
        (1.0 - a + b + c) / 4.0,
        (1.0 + a - b + c) / 4.0,
        (1.0 + a + b - c) / 4.0,
    ]
}

pub fn bell_diag_negativity(a: f64, b: f64, c: f64) -> Result<f64> {
    if bell_diag_eigenvalues(a, b, c).iter().any(|&x| x < -1e-12) {
        return Err(Error::NotAState(format!("({a}, {b}, {c}) lies outside the tetrahedron")));
    }
    Ok(((a.abs() + b.abs() + c.abs() - 1.0) / 2.0).max(0.0))
}

/// `(I + a XX + b YY + c ZZ)/4`.
pub fn bell_diagonal_state(a: f64, b: f64, c: f64) -> Result<DensityMatrix> {
    bell_diag_negativity(a, b, c)?;
    let mut m = CMatrix::identity(4, 4);
    for (k, w) in [(1, a), (2, b), (3, c)] {
        let p = pauli_matrix(k)?;
        m += p.kronecker(&p) * C64::new(w, 0.0);
    }
    DensityMatrix::new(2, m * C64::new(0.25, 0.0))
}

fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let d = m.nrows();
    let mut out = CMatrix::zeros(d, d);
    for k in 0..d {
        let v = eig.eigenvectors.column(k);
        let lam = eig.eigenvalues[k];
        let root = if lam < SQRT_FLOOR { 0.0 } else { lam.sqrt() };
        out += &v * v.adjoint() * C64::new(root, 0.0);
    }
    out
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits() != 2 {
        return invalid_arg("concurrence is defined here for two qubits");
    }
    let y = pauli_matrix(2)?;
    let yy: Matrix4<C64> = y.kronecker(&y);
    let yy = CMatrix::from_fn(4, 4, |r, c| yy[(r, c)]);
    let r = rho.entries();
    let tilde = &yy * r.conjugate() * &yy;
    let s = hermitian_sqrt(r);
    let inner = &s * tilde * &s;
    let mut lam: Vec<f64> = hermitian_eigenvalues(&inner)
        .into_iter()
        .map(|x| if x < SQRT_FLOOR { 0.0 } else { x.sqrt() })
        .collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PptVerdict {
    pub cut: String,
    pub min_eigenvalue: f64,
    pub ppt: bool,
}

pub fn ppt_verdict(rho: &DensityMatrix, cut: &Bipartition) -> Result<PptVerdict> {
    let ev = pt_spectrum(rho, cut)?;
    let min = ev[0];
    Ok(PptVerdict { cut: cut.label(), min_eigenvalue: min, ppt: min >= -PSD_TOL })
}

/// Smallest white-noise weight `q` at which `(1-q) rho + q I/d` becomes PPT
/// across `cut`. The identity is invariant under partial transposition, so
/// the smallest eigenvalue moves linearly in `q`.
pub fn ppt_noise_threshold(rho: &DensityMatrix, cut: &Bipartition) -> Result<f64> {
    let min = pt_spectrum(rho, cut)?[0];
    if min >= 0.0 {
        return Ok(0.0);
    }
    let inv_d = 1.0 / rho.dim() as f64;
    Ok(-min / (inv_d - min))
}
