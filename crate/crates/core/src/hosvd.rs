//! Higher-order SVD of cubic tensors and the iterated slice reduction that
//! bounds the cost of a product decomposition.
//!
//! `iterate_reduce` fixes the last mode first: the tensor is brought to its
//! HOSVD core, sliced along the last mode, and each slice is reduced again
//! until only 3x3 matrices remain. The sum of their singular values is `smin`.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{invalid_arg, Error, Result};
use crate::tensor::Tensor;

/// Singular values below this are treated as zero.
pub const SVD_FLOOR: f64 = 1e-12;
/// Slack for the `s <= 1` feasibility test.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi sweeps.
///
/// Eigenvalues are returned in descending order with ties kept in index
/// order. An input that is already diagonal comes back with permuted unit
/// eigenvectors and no rotation inside degenerate blocks.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.iter().map(|x| x.abs()).fold(0.0, f64::max);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)] * m[(p, q)])
            .sum();
        if off <= (1e-32 * scale * scale).max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..n).map(|k| m[(k, k)]).collect();
    let order = descending_order(&vals);
    let sorted = order.iter().map(|&k| vals[k]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (sorted, vecs)
}

/// Indices sorting `vals` descending; values within a relative 1e-12 keep index order.
fn descending_order(vals: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (vals[order[j - 1]], vals[order[j]]);
            let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
            if b > a + tol {
                order.swap(j - 1, j);
                j -= 1;
            } else {
                break;
            }
        }
    }
    order
}

/// Singular value decomposition `M = U diag(s) V^T` with `s` descending.
pub fn matrix_svd(m: &Matrix3<f64>) -> Result<(Matrix3<f64>, [f64; 3], Matrix3<f64>)> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericFailure("non-finite matrix entry".into()));
    }
    let svd = m.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::NumericFailure("SVD did not converge".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::NumericFailure("SVD did not converge".into()))?;
    let vals: Vec<f64> = svd.singular_values.iter().copied().collect();
    let order = descending_order(&vals);
    let mut s = [0.0; 3];
    let mut uu = Matrix3::zeros();
    let mut vv = Matrix3::zeros();
    for (k, &o) in order.iter().enumerate() {
        s[k] = if vals[o] < SVD_FLOOR { 0.0 } else { vals[o] };
        uu.set_column(k, &u.column(o));
        vv.set_column(k, &vt.row(o).transpose());
    }
    Ok((uu, s, vv))
}

/// Singular values (descending, floored) and their sum.
pub fn matrix_svd_sum(m: &Matrix3<f64>) -> Result<([f64; 3], f64)> {
    let (_, s, _) = matrix_svd(m)?;
    Ok((s, s.iter().sum()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HosvdResult {
    pub core: Tensor,
    /// Orthogonal factor per mode; `T = core x_1 U_1 ... x_N U_N`.
    pub factors: Vec<DMatrix<f64>>,
    /// Frobenius norms of the core slices along each mode, descending.
    pub mode_norms: Vec<Vec<f64>>,
}

impl HosvdResult {
    pub fn reconstruct(&self) -> Result<Tensor> {
        let mut t = self.core.clone();
        for (n, u) in self.factors.iter().enumerate() {
            t = t.mode_product(u, n)?;
        }
        Ok(t)
    }

    pub fn determinants(&self) -> Vec<f64> {
        self.factors.iter().map(|u| u.determinant()).collect()
    }
}

pub fn hosvd(t: &Tensor) -> Result<HosvdResult> {
    if t.order() < 2 {
        return invalid_arg("HOSVD needs a tensor of order at least 2");
    }
    if t.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericFailure("non-finite tensor entry".into()));
    }
    let mut factors = Vec::with_capacity(t.order());
    let mut mode_norms = Vec::with_capacity(t.order());
    for n in 0..t.order() {
        let a = t.unfold(n);
        let gram = &a * a.transpose();
        let (vals, vecs) = symmetric_eigen(&gram);
        mode_norms.push(vals.iter().map(|v| v.max(0.0).sqrt()).collect());
        factors.push(vecs);
    }
    let mut core = t.clone();
    for (n, u) in factors.iter().enumerate() {
        core = core.mode_product(&u.transpose(), n)?;
    }
    Ok(HosvdResult { core, factors, mode_norms })
}

/// A 3x3 matrix left after fixing every mode beyond the first two.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    /// Fixed index of each of the modes `2..N`, in that mode's frame.
    pub fixed: Vec<usize>,
    pub matrix: Matrix3<f64>,
    /// Frame of every mode: columns are the directions of each index.
    pub frames: Vec<Matrix3<f64>>,
}

impl Slice {
    /// Direction of the fixed index of mode `m >= 2`.
    pub fn fixed_direction(&self, m: usize) -> Vector3<f64> {
        self.frames[m].column(self.fixed[m - 2]).into_owned()
    }
}

fn to_matrix3(d: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| d[(r, c)])
}

fn check_cubic(t: &Tensor) -> Result<()> {
    if t.order() < 2 || t.shape().iter().any(|&d| d != 3) {
        return invalid_arg(format!("expected a 3x..x3 tensor of order >= 2, found {:?}", t.shape()));
    }
    Ok(())
}

pub fn iterate_reduce(t: &Tensor) -> Result<Vec<Slice>> {
    check_cubic(t)?;
    let mut out = Vec::new();
    let frames = vec![Matrix3::identity(); t.order()];
    reduce(t, frames, &mut out)?;
    Ok(out)
}

fn reduce(x: &Tensor, frames: Vec<Matrix3<f64>>, out: &mut Vec<Slice>) -> Result<()> {
    let k = x.order();
    if k == 2 {
        let matrix = Matrix3::from_row_slice(x.data());
        out.push(Slice { fixed: Vec::new(), matrix, frames });
        return Ok(());
    }
    let h = hosvd(x)?;
    let mut frames = frames;
    for (n, u) in h.factors.iter().enumerate() {
        frames[n] *= to_matrix3(u);
    }
    for alpha in 0..3 {
        let sub = h.core.slice_last(alpha);
        let start = out.len();
        reduce(&sub, frames.clone(), out)?;
        for s in &mut out[start..] {
            s.fixed.push(alpha);
        }
    }
    Ok(())
}

/// One term `weight * d_1 x ... x d_N` of an exact rank-one decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankOneTerm {
    pub weight: f64,
    pub directions: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularTensor {
    /// Slice singular values placed on a Latin hypercube.
    pub entries: Tensor,
    pub smin: f64,
    /// Every singular value is at most 1.
    pub feasible: bool,
    pub slices: Vec<Slice>,
    pub slice_values: Vec<[f64; 3]>,
}

impl SingularTensor {
    /// Rank-one terms of the reduced tensor, in physical directions.
    pub fn rank_one_terms(&self) -> Result<Vec<RankOneTerm>> {
        let mut terms = Vec::new();
        for slice in &self.slices {
            let (u, s, v) = matrix_svd(&slice.matrix)?;
            let n = slice.frames.len();
            for r in 0..3 {
                if s[r] == 0.0 {
                    continue;
                }
                let mut dirs = Vec::with_capacity(n);
                dirs.push(vec3(slice.frames[0] * u.column(r)));
                dirs.push(vec3(slice.frames[1] * v.column(r)));
                for m in 2..n {
                    dirs.push(vec3(slice.fixed_direction(m)));
                }
                terms.push(RankOneTerm { weight: s[r], directions: dirs });
            }
        }
        Ok(terms)
    }
}

fn vec3(v: Vector3<f64>) -> [f64; 3] {
    let norm = v.norm();
    [v[0] / norm, v[1] / norm, v[2] / norm]
}

pub fn smin(t: &Tensor) -> Result<SingularTensor> {
    check_cubic(t)?;
    let n = t.order();
    let slices = iterate_reduce(t)?;
    let mut entries = Tensor::cube(n);
    let mut slice_values = Vec::with_capacity(slices.len());
    let mut total = 0.0;
    let mut feasible = true;
    for slice in &slices {
        let (s, sum) = matrix_svd_sum(&slice.matrix)?;
        total += sum;
        let shift: usize = slice.fixed.iter().sum();
        for (r, &v) in s.iter().enumerate() {
            if v > 1.0 + FEASIBILITY_TOL {
                feasible = false;
            }
            let mut idx = vec![r, (r + shift) % 3];
            idx.extend_from_slice(&slice.fixed);
            entries.set(&idx, v);
        }
        slice_values.push(s);
    }
    Ok(SingularTensor { entries, smin: total, feasible, slices, slice_values })
}

/// `smin` with the modes fixed in the order given by `perm`: mode `perm[N-1]`
/// is fixed first.
pub fn smin_with_order(t: &Tensor, perm: &[usize]) -> Result<f64> {
    Ok(smin(&t.permute_modes(perm)?)?.smin)
}

/// `smin` over every reduction order, paired with the order used.
pub fn smin_all_orders(t: &Tensor) -> Result<Vec<(Vec<usize>, f64)>> {
    check_cubic(t)?;
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..t.order()).collect();
    permutations(&mut perm, 0, &mut |p| {
        out.push((p.to_vec(), smin_with_order(t, p)));
    });
    out.into_iter().map(|(p, s)| s.map(|v| (p, v))).collect()
}

fn permutations(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, f);
        p.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order3(entries: &[([usize; 3], f64)]) -> Tensor {
        let mut t = Tensor::cube(3);
        for (idx, v) in entries {
            t.set(idx, *v);
        }
        t
    }

    #[test]
    fn jacobi_keeps_diagonal_frames() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 2.0, 0.5]));
        let (vals, vecs) = symmetric_eigen(&a);
        assert_eq!(vals, vec![2.0, 0.5, 0.5]);
        let want = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(vecs, want);
    }

    #[test]
    fn jacobi_general() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, -2.0, 1.0, 2.0, 0.5, -2.0, 0.5, 3.0]);
        let (vals, vecs) = symmetric_eigen(&a);
        let rebuilt = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone())) * vecs.transpose();
        assert!((rebuilt - a).abs().max() < 1e-13);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_sums() {
        let (s, sum) = matrix_svd_sum(&Matrix3::from_diagonal(&Vector3::new(2.0, -1.0, 0.5))).unwrap();
        assert_eq!(s, [2.0, 1.0, 0.5]);
        assert!((sum - 3.5).abs() < 1e-14);
        let (_, zero) = matrix_svd_sum(&Matrix3::zeros()).unwrap();
        assert_eq!(zero, 0.0);
        let ones = Matrix3::from_element(1.0);
        let (s, sum) = matrix_svd_sum(&ones).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-12 && s[1] == 0.0 && s[2] == 0.0);
        assert!((sum - 3.0).abs() < 1e-12);
        assert!(matrix_svd_sum(&Matrix3::from_element(f64::NAN)).is_err());
    }

    #[test]
    fn ghz_core_slices() {
        let t = order3(&[([0, 0, 0], 1.0), ([0, 1, 1], -1.0), ([1, 0, 1], -1.0), ([1, 1, 0], -1.0)]);
        let st = smin(&t).unwrap();
        let sums: Vec<f64> = st.slice_values.iter().map(|s| s.iter().sum()).collect();
        assert_eq!(sums.len(), 3);
        let mut sorted = sums.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        assert!((sorted[0] - 2.0).abs() < 1e-12 && (sorted[1] - 2.0).abs() < 1e-12 && sorted[2].abs() < 1e-12);
        assert!((st.smin - 4.0).abs() < 1e-12);
        assert!(st.feasible);
    }

    #[test]
    fn singular_tensor_layout() {
        let t = order3(&[([2, 2, 2], 0.5)]);
        let st = smin(&t).unwrap();
        assert!((st.smin - 0.5).abs() < 1e-15);
        let nz: Vec<usize> = (0..27).filter(|&f| st.entries.data()[f] != 0.0).collect();
        assert_eq!(nz.len(), 1);
        let idx = st.entries.index_of(nz[0]);
        assert_eq!(idx[1], (idx[0] + idx[2]) % 3);
    }

    #[test]
    fn zero_and_too_small() {
        let st = smin(&Tensor::cube(3)).unwrap();
        assert_eq!(st.smin, 0.0);
        assert!(st.entries.data().iter().all(|&x| x == 0.0));
        assert!(hosvd(&Tensor::zeros(vec![3])).is_err());
        assert!(smin(&Tensor::zeros(vec![3])).is_err());
    }

    #[test]
    fn infeasible_flag() {
        let t = order3(&[([0, 0, 0], 1.5)]);
        assert!(!smin(&t).unwrap().feasible);
    }

    #[test]
    fn rank_one_terms_rebuild_tensor() {
        let data: Vec<f64> = (0..81).map(|k| ((k * 7 % 11) as f64 - 5.0) / 9.0).collect();
        let t = Tensor::new(vec![3; 4], data).unwrap();
        let st = smin(&t).unwrap();
        let mut sum = Tensor::cube(4);
        for term in st.rank_one_terms().unwrap() {
            for flat in 0..81 {
                let idx = sum.index_of(flat);
                let mut v = term.weight;
                for (m, &i) in idx.iter().enumerate() {
                    v *= term.directions[m][i];
                }
                sum.data_mut()[flat] += v;
            }
        }
        assert!(sum.max_abs_diff(&t) < 1e-12);
        let weights: f64 = st.rank_one_terms().unwrap().iter().map(|t| t.weight).sum();
        assert!((weights - st.smin).abs() < 1e-12);
    }

    #[test]
    fn all_orders_agree_on_symmetric_tensor() {
        let t = order3(&[([0, 0, 0], 1.0), ([0, 1, 1], -1.0), ([1, 0, 1], -1.0), ([1, 1, 0], -1.0)]);
        let all = smin_all_orders(&t).unwrap();
        assert_eq!(all.len(), 6);
        assert!(all.iter().all(|(_, s)| (s - 4.0).abs() < 1e-12));
    }
}
