//! Qubit primitives: Pauli operators, state vectors, density matrices,
//! mixtures, partial transposes, single-qubit channels and seeded random
//! generation.
//!
//! Qubit 0 is the leftmost tensor factor, so it is the most significant bit
//! of a basis index.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Largest supported register.
pub const MAX_QUBITS: usize = 10;
/// Hermiticity and trace tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue of a density matrix.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed norm deviation of a state vector.
pub const NORM_TOL: f64 = 1e-9;
/// Completeness tolerance for Kraus operators.
pub const CHANNEL_TOL: f64 = 1e-9;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn pauli_matrix(index: usize) -> Result<Matrix2<C64>> {
    match index {
        0 => Ok(Matrix2::new(ONE, ZERO, ZERO, ONE)),
        1 => Ok(Matrix2::new(ZERO, ONE, ONE, ZERO)),
        2 => Ok(Matrix2::new(ZERO, -I, I, ZERO)),
        3 => Ok(Matrix2::new(ONE, ZERO, ZERO, -ONE)),
        _ => invalid_arg(format!("Pauli index {index} is not in 0..=3")),
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return invalid_arg(format!("qubit count {n} outside 1..={MAX_QUBITS}"));
    }
    Ok(())
}

/// Bit of qubit `q` inside a basis index of an `n`-qubit register.
#[inline]
pub fn qubit_bit(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

/// Tensor product of single-qubit Paulis, one index in `0..=3` per qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    indices: Vec<u8>,
}

impl PauliString {
    pub fn new(indices: Vec<u8>) -> Result<Self> {
        if indices.is_empty() {
            return invalid_arg("empty Pauli string");
        }
        if let Some(bad) = indices.iter().find(|&&i| i > 3) {
            return invalid_arg(format!("Pauli index {bad} is not in 0..=3"));
        }
        Ok(PauliString { indices })
    }

    /// Decodes a base-4 flat index with qubit 0 as the most significant digit.
    pub fn from_flat(n: usize, mut flat: usize) -> Self {
        let mut indices = vec![0u8; n];
        for slot in indices.iter_mut().rev() {
            *slot = (flat % 4) as u8;
            flat /= 4;
        }
        PauliString { indices }
    }

    pub fn indices(&self) -> &[u8] {
        &self.indices
    }

    pub fn n_qubits(&self) -> usize {
        self.indices.len()
    }

    pub fn flat(&self) -> usize {
        self.indices.iter().fold(0, |acc, &i| acc * 4 + i as usize)
    }

    /// Qubits carrying a non-identity factor, as a bit mask.
    pub fn support_mask(&self) -> usize {
        let n = self.indices.len();
        (0..n)
            .filter(|&q| self.indices[q] != 0)
            .fold(0, |m, q| m | qubit_bit(n, q))
    }

    pub fn weight(&self) -> usize {
        self.indices.iter().filter(|&&i| i != 0).count()
    }

    pub fn label(&self) -> String {
        self.indices.iter().map(|i| char::from(b'0' + i)).collect()
    }

    /// Matrix form: Kronecker product in qubit order.
    pub fn matrix(&self) -> CMatrix {
        let mut out = CMatrix::from_element(1, 1, ONE);
        for &i in &self.indices {
            let p = pauli_matrix(i as usize).expect("validated index");
            out = out.kronecker(&p);
        }
        out
    }

    /// Masks and phase data for the action `P|k> = phase(k) |k ^ flip>`.
    pub(crate) fn action(&self) -> PauliAction {
        let n = self.indices.len();
        let mut flip = 0;
        let mut sign = 0;
        let mut n_y = 0;
        for (q, &i) in self.indices.iter().enumerate() {
            let b = qubit_bit(n, q);
            match i {
                1 => flip |= b,
                2 => {
                    flip |= b;
                    sign |= b;
                    n_y += 1;
                }
                3 => sign |= b,
                _ => {}
            }
        }
        let global = match n_y % 4 {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        };
        PauliAction { flip, sign, global }
    }
}

pub fn pauli_string_matrix(p: &PauliString) -> CMatrix {
    p.matrix()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PauliAction {
    pub flip: usize,
    pub sign: usize,
    pub global: C64,
}

impl PauliAction {
    #[inline]
    pub fn phase(&self, k: usize) -> C64 {
        if (k & self.sign).count_ones() % 2 == 1 {
            -self.global
        } else {
            self.global
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(n_qubits: usize, amplitudes: Vec<C64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(Error::InvalidState(format!(
                "expected {} amplitudes, found {}",
                1usize << n_qubits,
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("squared norm {norm} is not 1")));
        }
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Normalizes the amplitudes before validation.
    pub fn normalized(n_qubits: usize, mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::new(n_qubits, amplitudes)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn ghz(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let mut a = vec![ZERO; 1 << n];
        let h = C64::new(0.5f64.sqrt(), 0.0);
        a[0] = h;
        a[(1 << n) - 1] = h;
        Self::new(n, a)
    }

    pub fn w(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let mut a = vec![ZERO; 1 << n];
        let h = C64::new(1.0 / (n as f64).sqrt(), 0.0);
        for q in 0..n {
            a[qubit_bit(n, q)] = h;
        }
        Self::new(n, a)
    }

    pub fn bell(kind: BellKind) -> Self {
        let h = 0.5f64.sqrt();
        let (i, j, s) = match kind {
            BellKind::PhiPlus => (0, 3, 1.0),
            BellKind::PhiMinus => (0, 3, -1.0),
            BellKind::PsiPlus => (1, 2, 1.0),
            BellKind::PsiMinus => (1, 2, -1.0),
        };
        let mut a = vec![ZERO; 4];
        a[i] = C64::new(h, 0.0);
        a[j] = C64::new(s * h, 0.0);
        StateVector { n_qubits: 2, amplitudes: a }
    }

    /// Product of single-qubit kets from a label such as `"01+-"` or `"+~-0"`.
    ///
    /// Symbols: `0`, `1`, `+`, `-`, and `~+`/`~-` for the σ₂ eigenstates.
    pub fn product(label: &str) -> Result<Self> {
        let kets = parse_product_label(label)?;
        check_qubits(kets.len())?;
        let mut amps = vec![ONE];
        for k in &kets {
            let ket = k.ket();
            let mut next = Vec::with_capacity(amps.len() * 2);
            for a in &amps {
                next.push(a * ket[0]);
                next.push(a * ket[1]);
            }
            amps = next;
        }
        Self::new(kets.len(), amps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl std::str::FromStr for BellKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi+" => Ok(BellKind::PhiPlus),
            "phi-" => Ok(BellKind::PhiMinus),
            "psi+" => Ok(BellKind::PsiPlus),
            "psi-" => Ok(BellKind::PsiMinus),
            _ => invalid_arg(format!("unknown Bell state '{s}'")),
        }
    }
}

/// Eigenstates of a single Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKet {
    Zero,
    One,
    Plus,
    Minus,
    TildePlus,
    TildeMinus,
}

impl AxisKet {
    pub fn ket(self) -> [C64; 2] {
        let h = 0.5f64.sqrt();
        match self {
            AxisKet::Zero => [ONE, ZERO],
            AxisKet::One => [ZERO, ONE],
            AxisKet::Plus => [C64::new(h, 0.0), C64::new(h, 0.0)],
            AxisKet::Minus => [C64::new(h, 0.0), C64::new(-h, 0.0)],
            AxisKet::TildePlus => [C64::new(h, 0.0), C64::new(0.0, h)],
            AxisKet::TildeMinus => [C64::new(h, 0.0), C64::new(0.0, -h)],
        }
    }

    pub fn bloch(self) -> [f64; 3] {
        match self {
            AxisKet::Zero => [0.0, 0.0, 1.0],
            AxisKet::One => [0.0, 0.0, -1.0],
            AxisKet::Plus => [1.0, 0.0, 0.0],
            AxisKet::Minus => [-1.0, 0.0, 0.0],
            AxisKet::TildePlus => [0.0, 1.0, 0.0],
            AxisKet::TildeMinus => [0.0, -1.0, 0.0],
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            AxisKet::Zero => "0",
            AxisKet::One => "1",
            AxisKet::Plus => "+",
            AxisKet::Minus => "-",
            AxisKet::TildePlus => "~+",
            AxisKet::TildeMinus => "~-",
        }
    }

    /// The ket whose Bloch vector matches `v` within `tol`, if any.
    pub fn from_bloch(v: [f64; 3], tol: f64) -> Option<AxisKet> {
        [
            AxisKet::Zero,
            AxisKet::One,
            AxisKet::Plus,
            AxisKet::Minus,
            AxisKet::TildePlus,
            AxisKet::TildeMinus,
        ]
        .into_iter()
        .find(|k| {
            let b = k.bloch();
            (0..3).all(|i| (b[i] - v[i]).abs() <= tol)
        })
    }
}

pub fn parse_product_label(label: &str) -> Result<Vec<AxisKet>> {
    let mut out = Vec::new();
    let mut chars = label.chars();
    while let Some(c) = chars.next() {
        let k = match c {
            '0' => AxisKet::Zero,
            '1' => AxisKet::One,
            '+' => AxisKet::Plus,
            '-' => AxisKet::Minus,
            '~' => match chars.next() {
                Some('+') => AxisKet::TildePlus,
                Some('-') => AxisKet::TildeMinus,
                _ => return invalid_arg(format!("'~' must be followed by + or - in '{label}'")),
            },
            _ => return invalid_arg(format!("unexpected symbol '{c}' in product label '{label}'")),
        };
        out.push(k);
    }
    if out.is_empty() {
        return invalid_arg("empty product label");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(n_qubits: usize, entries: CMatrix) -> Result<Self> {
        check_qubits(n_qubits)?;
        let d = 1usize << n_qubits;
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::InvalidState(format!(
                "expected a {d}x{d} matrix, found {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let herm = hermitian_defect(&entries);
        if herm > DENSITY_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = min_eigenvalue(&entries);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(DensityMatrix { n_qubits, entries })
    }

    /// Wraps a matrix produced by a state-preserving construction.
    pub(crate) fn trusted(n_qubits: usize, entries: CMatrix) -> Self {
        debug_assert_eq!(entries.nrows(), 1 << n_qubits);
        DensityMatrix { n_qubits, entries }
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let d = 1usize << n;
        Ok(DensityMatrix::trusted(
            n,
            CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
        ))
    }

    /// `(1 - q)|psi-><psi-| + q I/4`.
    pub fn werner(q: f64) -> Result<Self> {
        let psi = density_from_state(&StateVector::bell(BellKind::PsiMinus));
        white_noise_mix(&psi, q)
    }

    /// Mixture of the eight GHZ-type basis states `(|b> +- |~b>)/sqrt2`,
    /// ordered 000+, 000-, 001+, 001-, 010+, 010-, 011+, 011-.
    pub fn ghz_diagonal(p: &[f64]) -> Result<Self> {
        check_distribution(p, 8)?;
        let mut m = CMatrix::zeros(8, 8);
        for (k, &pk) in p.iter().enumerate() {
            let b = k / 2;
            let s = if k % 2 == 0 { 0.5 } else { -0.5 };
            let c = 7 - b;
            m[(b, b)] += C64::new(0.5 * pk, 0.0);
            m[(c, c)] += C64::new(0.5 * pk, 0.0);
            m[(b, c)] += C64::new(s * pk, 0.0);
            m[(c, b)] += C64::new(s * pk, 0.0);
        }
        Ok(DensityMatrix::trusted(3, m))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries)
    }

    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs_diff(&self.entries, &other.entries)
    }

    /// `U_q rho U_q^dagger` for a single-qubit operator on qubit `q`.
    pub fn conjugate_local(&self, u: &Matrix2<C64>, q: usize) -> Result<Self> {
        if q >= self.n_qubits {
            return invalid_arg(format!("qubit {q} out of range"));
        }
        let mut m = self.entries.clone();
        left_apply(&mut m, u, self.n_qubits, q);
        right_apply_adjoint(&mut m, u, self.n_qubits, q);
        Ok(DensityMatrix::trusted(self.n_qubits, m))
    }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..d {
        for c in r..d {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub(crate) fn check_distribution(p: &[f64], len: usize) -> Result<()> {
    if p.len() != len {
        return invalid_arg(format!("expected {len} probabilities, found {}", p.len()));
    }
    if p.iter().any(|&x| !x.is_finite() || x < -1e-12) {
        return invalid_arg("probabilities must be nonnegative");
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return invalid_arg(format!("probabilities sum to {s}, not 1"));
    }
    Ok(())
}

pub fn density_from_state(psi: &StateVector) -> DensityMatrix {
    let a = &psi.amplitudes;
    let d = a.len();
    let m = CMatrix::from_fn(d, d, |r, c| a[r] * a[c].conj());
    DensityMatrix::trusted(psi.n_qubits, m)
}

/// Density matrix of a product of single-qubit states given by Bloch vectors.
pub fn product_density(bloch: &[[f64; 3]]) -> Result<DensityMatrix> {
    check_qubits(bloch.len())?;
    let mut m = CMatrix::from_element(1, 1, ONE);
    for v in bloch {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1.0 + 1e-9 {
            return Err(Error::InvalidState(format!("Bloch vector length {norm} exceeds 1")));
        }
        m = m.kronecker(&bloch_matrix(*v));
    }
    Ok(DensityMatrix::trusted(bloch.len(), m))
}

/// `(I + v.sigma)/2`.
pub fn bloch_matrix(v: [f64; 3]) -> Matrix2<C64> {
    Matrix2::new(
        C64::new(0.5 * (1.0 + v[2]), 0.0),
        C64::new(0.5 * v[0], -0.5 * v[1]),
        C64::new(0.5 * v[0], 0.5 * v[1]),
        C64::new(0.5 * (1.0 - v[2]), 0.0),
    )
}

/// State of one ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub enum MemberState {
    Density(DensityMatrix),
    /// Product of single-qubit states given by Bloch vectors.
    Product(Vec<[f64; 3]>),
}

impl MemberState {
    pub fn n_qubits(&self) -> usize {
        match self {
            MemberState::Density(d) => d.n_qubits(),
            MemberState::Product(v) => v.len(),
        }
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        match self {
            MemberState::Density(d) => Ok(d.clone()),
            MemberState::Product(v) => product_density(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<(f64, MemberState)>,
}

impl Ensemble {
    pub fn new(members: Vec<(f64, MemberState)>) -> Result<Self> {
        if members.is_empty() {
            return invalid_arg("empty ensemble");
        }
        let n = members[0].1.n_qubits();
        if members.iter().any(|(_, s)| s.n_qubits() != n) {
            return invalid_arg("ensemble members have different qubit counts");
        }
        if members.iter().any(|(p, _)| !(-1e-15..=1.0 + 1e-12).contains(p)) {
            return invalid_arg("member probability outside [0,1]");
        }
        let total: f64 = members.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > DENSITY_TOL {
            return invalid_arg(format!("probabilities sum to {total}, not 1"));
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[(f64, MemberState)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.members[0].1.n_qubits()
    }
}

pub fn mix(e: &Ensemble) -> Result<DensityMatrix> {
    let n = e.n_qubits();
    let d = 1usize << n;
    let mut m = CMatrix::zeros(d, d);
    for (p, s) in e.members() {
        m += s.density()?.entries * C64::new(*p, 0.0);
    }
    DensityMatrix::new(n, m)
}

pub fn white_noise_mix(rho: &DensityMatrix, q: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&q) {
        return invalid_arg(format!("noise weight {q} outside [0,1]"));
    }
    let d = rho.dim();
    let mut m = &rho.entries * C64::new(1.0 - q, 0.0);
    let w = q / d as f64;
    for k in 0..d {
        m[(k, k)] += C64::new(w, 0.0);
    }
    Ok(DensityMatrix::trusted(rho.n_qubits, m))
}

pub fn partial_transpose(rho: &DensityMatrix, subset: &[usize]) -> Result<CMatrix> {
    partial_transpose_matrix(&rho.entries, rho.n_qubits, subset)
}

/// Partial transpose of any `2^n x 2^n` matrix on the qubits in `subset`.
pub fn partial_transpose_matrix(m: &CMatrix, n: usize, subset: &[usize]) -> Result<CMatrix> {
    let d = 1usize << n;
    if m.nrows() != d || m.ncols() != d {
        return invalid_arg(format!("expected a {d}x{d} matrix, found {}x{}", m.nrows(), m.ncols()));
    }
    let mut mask = 0;
    for &q in subset {
        if q >= n {
            return invalid_arg(format!("qubit {q} out of range for {n} qubits"));
        }
        mask |= qubit_bit(n, q);
    }
    Ok(CMatrix::from_fn(d, d, |r, c| {
        let swap = (r ^ c) & mask;
        m[(r ^ swap, c ^ swap)]
    }))
}

/// Left multiplication by `a` acting on qubit `q`.
pub(crate) fn left_apply(m: &mut CMatrix, a: &Matrix2<C64>, n: usize, q: usize) {
    let b = qubit_bit(n, q);
    let d = m.nrows();
    for c in 0..m.ncols() {
        for r0 in (0..d).filter(|r| r & b == 0) {
            let r1 = r0 | b;
            let (x0, x1) = (m[(r0, c)], m[(r1, c)]);
            m[(r0, c)] = a[(0, 0)] * x0 + a[(0, 1)] * x1;
            m[(r1, c)] = a[(1, 0)] * x0 + a[(1, 1)] * x1;
        }
    }
}

/// Right multiplication by `a^dagger` acting on qubit `q`.
pub(crate) fn right_apply_adjoint(m: &mut CMatrix, a: &Matrix2<C64>, n: usize, q: usize) {
    let b = qubit_bit(n, q);
    let d = m.ncols();
    for r in 0..m.nrows() {
        for c0 in (0..d).filter(|c| c & b == 0) {
            let c1 = c0 | b;
            let (x0, x1) = (m[(r, c0)], m[(r, c1)]);
            m[(r, c0)] = x0 * a[(0, 0)].conj() + x1 * a[(0, 1)].conj();
            m[(r, c1)] = x0 * a[(1, 0)].conj() + x1 * a[(1, 1)].conj();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    operators: Vec<Matrix2<C64>>,
}

impl KrausChannel {
    pub fn new(operators: Vec<Matrix2<C64>>) -> Result<Self> {
        let ch = KrausChannel { operators };
        let defect = ch.completeness_defect();
        if ch.operators.is_empty() || defect > CHANNEL_TOL {
            return Err(Error::InvalidChannel(format!("completeness defect {defect:e}")));
        }
        Ok(ch)
    }

    /// Kraus form `sqrt(1 - 3q/4) I`, `sqrt(q/4) sigma_k`.
    pub fn depolarizing(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return invalid_arg(format!("depolarizing strength {q} outside [0,1]"));
        }
        let mut ops = vec![pauli_matrix(0)? * C64::new((1.0 - 0.75 * q).sqrt(), 0.0)];
        for k in 1..4 {
            ops.push(pauli_matrix(k)? * C64::new((0.25 * q).sqrt(), 0.0));
        }
        Self::new(ops)
    }

    pub fn operators(&self) -> &[Matrix2<C64>] {
        &self.operators
    }

    pub fn completeness_defect(&self) -> f64 {
        let mut s = Matrix2::<C64>::zeros();
        for k in &self.operators {
            s += k.adjoint() * k;
        }
        s -= Matrix2::identity();
        s.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn apply_channel(rho: &DensityMatrix, ch: &KrausChannel, qubit: usize) -> Result<DensityMatrix> {
    let defect = ch.completeness_defect();
    if defect > CHANNEL_TOL {
        return Err(Error::InvalidChannel(format!("completeness defect {defect:e}")));
    }
    let n = rho.n_qubits;
    if qubit >= n {
        return invalid_arg(format!("qubit {qubit} out of range for {n} qubits"));
    }
    let d = rho.dim();
    let mut out = CMatrix::zeros(d, d);
    for k in &ch.operators {
        let mut m = rho.entries.clone();
        left_apply(&mut m, k, n, qubit);
        right_apply_adjoint(&mut m, k, n, qubit);
        out += m;
    }
    Ok(DensityMatrix::trusted(n, out))
}

/// Applies the same channel to every qubit.
pub fn apply_channel_all(rho: &DensityMatrix, ch: &KrausChannel) -> Result<DensityMatrix> {
    (0..rho.n_qubits).try_fold(rho.clone(), |acc, q| apply_channel(&acc, ch, q))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_pure_state_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<StateVector> {
    if n < 1 {
        return invalid_arg("random state needs at least one qubit");
    }
    check_qubits(n)?;
    let amps = (0..1usize << n).map(|_| gaussian_c64(rng)).collect();
    StateVector::normalized(n, amps)
}

pub fn random_pure_state(n: usize, seed: u64) -> Result<StateVector> {
    random_pure_state_with(n, &mut rng_from_seed(seed))
}

/// Haar-random SU(2) element from a uniform point on the 3-sphere.
pub fn random_local_unitary_with<R: Rng + ?Sized>(rng: &mut R) -> Matrix2<C64> {
    let mut v = [0.0f64; 4];
    let norm = loop {
        v.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            break n;
        }
    };
    let [a, b, c, d] = v.map(|x| x / norm);
    Matrix2::new(
        C64::new(a, -d),
        C64::new(-c, -b),
        C64::new(c, -b),
        C64::new(a, d),
    )
}

pub fn random_local_unitary(seed: u64) -> Matrix2<C64> {
    random_local_unitary_with(&mut rng_from_seed(seed))
}

/// Hilbert-Schmidt random mixed state `G G^dagger / Tr` with a square Ginibre `G`.
pub fn random_density_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DensityMatrix> {
    check_qubits(n)?;
    let d = 1usize << n;
    let g = CMatrix::from_fn(d, d, |_, _| gaussian_c64(rng));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    Ok(DensityMatrix::trusted(n, m / C64::new(tr, 0.0)))
}

pub fn random_density(n: usize, seed: u64) -> Result<DensityMatrix> {
    random_density_with(n, &mut rng_from_seed(seed))
}
