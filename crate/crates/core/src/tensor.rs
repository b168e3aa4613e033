//! Dense real tensors stored row-major (last index fastest).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || len != data.len() {
            return Err(Error::InvalidTensor(format!(
                "shape {shape:?} does not match {} entries",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor { shape, data: vec![0.0; len] }
    }

    /// Order-`n` tensor with every dimension equal to 3.
    pub fn cube(n: usize) -> Self {
        Self::zeros(vec![3; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for k in (0..self.shape.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.shape[k + 1];
        }
        s
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn index_of(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn abs_sum(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `(T x_n M)_{..m..} = sum_i t_{..i..} M[m, i]`.
    pub fn mode_product(&self, m: &DMatrix<f64>, n: usize) -> Result<Tensor> {
        if n >= self.order() {
            return invalid_arg(format!("mode {n} out of range for order {}", self.order()));
        }
        if m.ncols() != self.shape[n] {
            return invalid_arg(format!(
                "matrix with {} columns cannot act on mode of size {}",
                m.ncols(),
                self.shape[n]
            ));
        }
        let mut shape = self.shape.clone();
        shape[n] = m.nrows();
        let inner: usize = self.shape[n + 1..].iter().product();
        let outer: usize = self.shape[..n].iter().product();
        let (din, dout) = (self.shape[n], m.nrows());
        let mut data = vec![0.0; outer * dout * inner];
        for o in 0..outer {
            for r in 0..dout {
                for i in 0..din {
                    let w = m[(r, i)];
                    if w == 0.0 {
                        continue;
                    }
                    let src = &self.data[(o * din + i) * inner..(o * din + i + 1) * inner];
                    let dst = &mut data[(o * dout + r) * inner..(o * dout + r + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        Ok(Tensor { shape, data })
    }

    /// Mode-`n` unfolding: rows indexed by mode `n`, columns by the other
    /// indices in their original order.
    pub fn unfold(&self, n: usize) -> DMatrix<f64> {
        let dn = self.shape[n];
        let inner: usize = self.shape[n + 1..].iter().product();
        let outer: usize = self.shape[..n].iter().product();
        DMatrix::from_fn(dn, outer * inner, |r, c| {
            let (o, i) = (c / inner, c % inner);
            self.data[(o * dn + r) * inner + i]
        })
    }

    /// Sub-tensor with the last mode fixed at `k`.
    pub fn slice_last(&self, k: usize) -> Tensor {
        let d = *self.shape.last().expect("nonempty shape");
        let shape = self.shape[..self.shape.len() - 1].to_vec();
        let data = self.data.iter().skip(k).step_by(d).copied().collect();
        Tensor { shape, data }
    }

    /// Tensor whose mode `k` is mode `perm[k]` of `self`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Tensor> {
        let n = self.order();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return invalid_arg(format!("{perm:?} is not a permutation of {n} modes"));
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let mut out = Tensor::zeros(shape);
        let mut src = vec![0; n];
        for flat in 0..out.data.len() {
            let idx = out.index_of(flat);
            for k in 0..n {
                src[perm[k]] = idx[k];
            }
            out.data[flat] = self.get(&src);
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(shape: Vec<usize>) -> Tensor {
        let len: usize = shape.iter().product();
        Tensor::new(shape, (0..len).map(|k| (k as f64 * 0.37).sin()).collect()).unwrap()
    }

    #[test]
    fn indexing_round_trip() {
        let t = sample(vec![3, 2, 4]);
        for flat in 0..t.len() {
            assert_eq!(t.offset(&t.index_of(flat)), flat);
        }
        assert_eq!(t.strides(), vec![8, 4, 1]);
    }

    #[test]
    fn mode_product_order_two() {
        let t = sample(vec![3, 3]);
        let o = DMatrix::from_fn(3, 3, |r, c| (r * 3 + c) as f64 - 4.0);
        let m = DMatrix::from_row_slice(3, 3, t.data());
        let first = t.mode_product(&o, 0).unwrap();
        let want = &o * &m;
        assert!(first.data().iter().zip(want.transpose().iter()).all(|(a, b)| (a - b).abs() < 1e-14));
        let second = t.mode_product(&o, 1).unwrap();
        let want = &m * o.transpose();
        assert!(second.data().iter().zip(want.transpose().iter()).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn mode_product_errors() {
        let t = sample(vec![3, 3]);
        assert!(t.mode_product(&DMatrix::identity(2, 2), 0).is_err());
        assert!(t.mode_product(&DMatrix::identity(3, 3), 2).is_err());
    }

    #[test]
    fn unfold_and_slice() {
        let t = sample(vec![2, 3, 2]);
        let u = t.unfold(1);
        assert_eq!(u.shape(), (3, 4));
        assert_eq!(u[(2, 3)], t.get(&[1, 2, 1]));
        let s = t.slice_last(1);
        assert_eq!(s.shape(), &[2, 3]);
        assert_eq!(s.get(&[1, 2]), t.get(&[1, 2, 1]));
    }

    #[test]
    fn permute() {
        let t = sample(vec![2, 3, 4]);
        let p = t.permute_modes(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), t.get(&[1, 2, 3]));
        assert!(t.permute_modes(&[0, 0, 1]).is_err());
    }
}
