//! Pauli correlation tensors of density matrices, their inverse, n-mode
//! products and the SU(2) to SO(3) map of local unitaries.

use nalgebra::{DMatrix, Matrix2, Matrix3};
use rayon::prelude::*;

use crate::error::{invalid_arg, Error, Result};
use crate::qcore::{pauli_matrix, CMatrix, DensityMatrix, PauliString, C64, MAX_QUBITS};
use crate::tensor::Tensor;

/// Largest imaginary residue tolerated when reading off a coefficient.
pub const IMAG_TOL: f64 = 1e-8;
/// Positivity slack when turning a correlation tensor back into a state.
pub const RECONSTRUCT_PSD_TOL: f64 = 1e-8;

/// Full expansion `rho = 2^-N sum_i t_i sigma_i1 x ... x sigma_iN`, indices in `0..=3`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensorR {
    n_qubits: usize,
    data: Vec<f64>,
}

impl CorrelationTensorR {
    pub fn new(n_qubits: usize, data: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return invalid_arg(format!("qubit count {n_qubits} outside 1..={MAX_QUBITS}"));
        }
        if data.len() != 1 << (2 * n_qubits) {
            return Err(Error::InvalidTensor(format!(
                "expected {} entries, found {}",
                1usize << (2 * n_qubits),
                data.len()
            )));
        }
        if (data[0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidTensor(format!("identity coefficient {} is not 1", data[0])));
        }
        Ok(CorrelationTensorR { n_qubits, data })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, p: &PauliString) -> f64 {
        self.data[p.flat()]
    }

    /// Coefficient for an index list such as `[3, 3, 0]`.
    pub fn at(&self, idx: &[u8]) -> f64 {
        self.data[idx.iter().fold(0, |acc, &i| acc * 4 + i as usize)]
    }

    /// Restriction to indices in `1..=3`.
    pub fn global(&self) -> CorrelationTensorT {
        let n = self.n_qubits;
        let mut t = Tensor::cube(n);
        for (flat, v) in t.data_mut().iter_mut().enumerate() {
            let mut rem = flat;
            let mut r = 0;
            let mut place = 1;
            for _ in 0..n {
                r += (rem % 3 + 1) * place;
                rem /= 3;
                place *= 4;
            }
            *v = self.data[r];
        }
        CorrelationTensorT(t)
    }

    /// Nonzero coefficients whose support is a nonempty proper subset of the qubits.
    pub fn non_global(&self, tol: f64) -> Vec<(PauliString, f64)> {
        let n = self.n_qubits;
        (1..self.data.len())
            .filter(|&f| self.data[f].abs() > tol)
            .map(|f| (PauliString::from_flat(n, f), self.data[f]))
            .filter(|(p, _)| p.weight() < n)
            .collect()
    }

    /// Same tensor with every qubit's Pauli axes re-expressed in a new frame:
    /// `t'_{..a..} = sum_b F[b, a] t_{..b..}` on each qubit.
    pub fn in_frame(&self, frames: &[Matrix3<f64>]) -> Result<CorrelationTensorR> {
        if frames.len() != self.n_qubits {
            return invalid_arg("one frame per qubit is required");
        }
        let shape = vec![4; self.n_qubits];
        let mut t = Tensor::new(shape, self.data.clone())?;
        for (q, f) in frames.iter().enumerate() {
            let mut m = DMatrix::zeros(4, 4);
            m[(0, 0)] = 1.0;
            for a in 0..3 {
                for b in 0..3 {
                    m[(a + 1, b + 1)] = f[(b, a)];
                }
            }
            t = t.mode_product(&m, q)?;
        }
        let mut data = t.data().to_vec();
        data[0] = 1.0;
        Ok(CorrelationTensorR { n_qubits: self.n_qubits, data })
    }
}

/// Full-weight block of the correlation tensor, indices `1..=3` stored as `0..=2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensorT(pub Tensor);

impl CorrelationTensorT {
    pub fn n_qubits(&self) -> usize {
        self.0.order()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    /// Entry for Pauli axes in `1..=3`.
    pub fn at(&self, axes: &[u8]) -> f64 {
        let idx: Vec<usize> = axes.iter().map(|&a| a as usize - 1).collect();
        self.0.get(&idx)
    }
}

pub fn correlation_tensor(rho: &DensityMatrix) -> Result<CorrelationTensorR> {
    let n = rho.n_qubits();
    let d = rho.dim();
    let m = rho.entries();
    let coeff = |flat: usize| -> Result<f64> {
        let act = PauliString::from_flat(n, flat).action();
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..d {
            acc += act.phase(k) * m[(k, k ^ act.flip)];
        }
        if acc.im.abs() > IMAG_TOL {
            return Err(Error::NumericFailure(format!(
                "coefficient {} has imaginary part {:e}",
                PauliString::from_flat(n, flat).label(),
                acc.im
            )));
        }
        Ok(acc.re)
    };
    let total = 1usize << (2 * n);
    let mut data: Vec<f64> = if n >= 6 {
        (0..total).into_par_iter().map(coeff).collect::<Result<_>>()?
    } else {
        (0..total).map(coeff).collect::<Result<_>>()?
    };
    data[0] = 1.0;
    Ok(CorrelationTensorR { n_qubits: n, data })
}

pub fn reconstruct_density(r: &CorrelationTensorR) -> Result<DensityMatrix> {
    let n = r.n_qubits;
    let d = 1usize << n;
    let scale = 1.0 / d as f64;
    let mut m = CMatrix::zeros(d, d);
    for (flat, &t) in r.data.iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        let act = PauliString::from_flat(n, flat).action();
        for k in 0..d {
            m[(k ^ act.flip, k)] += act.phase(k) * (t * scale);
        }
    }
    let min = crate::qcore::min_eigenvalue(&m);
    if min < -RECONSTRUCT_PSD_TOL {
        return Err(Error::NotAState(format!("reconstructed eigenvalue {min:e} is negative")));
    }
    Ok(DensityMatrix::trusted(n, m))
}

pub fn mode_n_product(t: &Tensor, o: &DMatrix<f64>, n: usize) -> Result<Tensor> {
    t.mode_product(o, n)
}

/// Proper rotation of the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if orth > 1e-10 || (det - 1.0).abs() > 1e-10 {
            return invalid_arg(format!("not a proper rotation (orthogonality {orth:e}, det {det})"));
        }
        Ok(Rotation3(m))
    }

    pub fn identity() -> Self {
        Rotation3(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, 3, |r, c| self.0[(r, c)])
    }
}

/// `O_ij = Tr(sigma_i U sigma_j U^dagger) / 2`.
pub fn su2_to_so3(u: &Matrix2<C64>) -> Result<Rotation3> {
    let defect = (u.adjoint() * u - Matrix2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if defect > 1e-10 {
        return invalid_arg(format!("matrix is not unitary (defect {defect:e})"));
    }
    let s: Vec<Matrix2<C64>> = (1..4).map(|k| pauli_matrix(k).expect("valid index")).collect();
    let conj: Vec<Matrix2<C64>> = s.iter().map(|sj| u * sj * u.adjoint()).collect();
    let m = Matrix3::from_fn(|i, j| 0.5 * (s[i] * conj[j]).trace().re);
    Rotation3::new(m)
}

pub fn local_rotate_tensor(t: &CorrelationTensorT, rotations: &[Rotation3]) -> Result<CorrelationTensorT> {
    if rotations.len() != t.n_qubits() {
        return invalid_arg(format!(
            "{} rotations supplied for {} qubits",
            rotations.len(),
            t.n_qubits()
        ));
    }
    let mut out = t.0.clone();
    for (k, r) in rotations.iter().enumerate() {
        out = out.mode_product(&r.dmatrix(), k)?;
    }
    Ok(CorrelationTensorT(out))
}

/// Short rational rendering when `x` is close to `p/q` with `q <= 64`.
pub fn format_value(x: f64) -> String {
    if x.abs() < 1e-12 {
        return "0".into();
    }
    for q in 1..=64u32 {
        let p = (x * q as f64).round();
        if (x * q as f64 - p).abs() < 1e-9 * q as f64 {
            return if q == 1 { format!("{p}") } else { format!("{p}/{q}") };
        }
    }
    format!("{x:.6}")
}

fn render_matrix(out: &mut String, rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) {
    let cells: Vec<Vec<String>> = (0..rows)
        .map(|r| (0..cols).map(|c| format_value(f(r, c))).collect())
        .collect();
    let w = cells.iter().flatten().map(|s| s.len()).max().unwrap_or(1);
    for row in cells {
        let line: Vec<String> = row.iter().map(|s| format!("{s:>w$}")).collect();
        out.push_str("  ");
        out.push_str(&line.join("  "));
        out.push('\n');
    }
}

/// Slices `R[:, :, k3, ..]` with rows indexed by the first qubit and
/// columns by the second.
pub fn format_r_slices(r: &CorrelationTensorR) -> String {
    let n = r.n_qubits;
    let mut out = String::new();
    if n == 1 {
        out.push_str("R =\n");
        render_matrix(&mut out, 1, 4, |_, c| r.data[c]);
        return out;
    }
    let tail = 1usize << (2 * (n - 2));
    for rest in 0..tail {
        let label: String = (0..n - 2)
            .map(|k| char::from(b'0' + ((rest >> (2 * (n - 3 - k))) & 3) as u8))
            .collect();
        out.push_str(&format!("R[:,:{}{}] =\n", if n > 2 { "," } else { "" }, label));
        render_matrix(&mut out, 4, 4, |a, b| r.data[(a * 4 + b) * tail + rest]);
    }
    out
}

/// Slices of a cubic tensor with the first two modes displayed, axis labels `1..=3`.
pub fn format_t_slices(name: &str, t: &Tensor) -> String {
    let n = t.order();
    let mut out = String::new();
    if n == 1 {
        out.push_str(&format!("{name} =\n"));
        render_matrix(&mut out, 1, 3, |_, c| t.data()[c]);
        return out;
    }
    let tail: usize = t.shape()[2..].iter().product();
    for rest in 0..tail {
        let mut label = String::new();
        let mut rem = rest;
        let mut digits = Vec::new();
        for _ in 2..n {
            digits.push((rem % 3 + 1) as u8);
            rem /= 3;
        }
        for d in digits.iter().rev() {
            label.push(char::from(b'0' + d));
        }
        out.push_str(&format!("{name}[:,:{}{}] =\n", if n > 2 { "," } else { "" }, label));
        render_matrix(&mut out, 3, 3, |a, b| t.data()[(a * 3 + b) * tail + rest]);
    }
    out
}
