//! Rebuilding hidden full-weight correlations from lower-order coefficients.
//!
//! For an axis tuple `a`, every coefficient supported on a subset `S` of the
//! qubits with the axes of `a` is a parity character of a distribution `l`
//! over the eigenbasis of `a`. The cheapest such distribution reproducing the
//! coefficients (together with the actual full-weight entry) has mass
//! `t_hat`; the excess `t_hat - |t_a|` is that tuple's hidden strength.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::corrtensor::{CorrelationTensorR, CorrelationTensorT};
use crate::error::{invalid_arg, Result};
use crate::hosvd::{hosvd, smin, FEASIBILITY_TOL};
use crate::qcore::{check_distribution, qubit_bit, PauliString};
use crate::tensor::Tensor;

/// One Pauli axis in `1..=3` per qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AxisTuple(Vec<u8>);

impl AxisTuple {
    pub fn new(axes: Vec<u8>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|&a| !(1..=3).contains(&a)) {
            return invalid_arg(format!("axis tuple {axes:?} must use axes 1..=3"));
        }
        Ok(AxisTuple(axes))
    }

    pub fn axes(&self) -> &[u8] {
        &self.0
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|a| char::from(b'0' + a)).collect()
    }

    pub fn compatible(&self, p: &PauliString) -> bool {
        p.indices().iter().zip(&self.0).all(|(&i, &a)| i == 0 || i == a)
    }

    /// String carrying this tuple's axes on the qubits of `mask`.
    pub fn restrict(&self, mask: usize) -> PauliString {
        let n = self.0.len();
        let idx = (0..n)
            .map(|q| if mask & qubit_bit(n, q) != 0 { self.0[q] } else { 0 })
            .collect();
        PauliString::new(idx).expect("axes are valid Pauli indices")
    }

    /// Index into a `3^N` tensor.
    pub fn cube_index(&self) -> Vec<usize> {
        self.0.iter().map(|&a| a as usize - 1).collect()
    }
}

/// Weights over the `2^N` eigenstates of an axis tuple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    pub l: Vec<f64>,
    pub feasible: bool,
}

impl WeightVector {
    pub fn total(&self) -> f64 {
        self.l.iter().sum()
    }
}

/// `(-1)^(sum_{n in S} j_n)` with `S` and `j` given as bit masks.
pub fn parity_character(subset: usize, j: usize) -> i8 {
    if (subset & j).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// In-place unnormalized Walsh-Hadamard transform.
fn walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for i in (0..v.len()).step_by(2 * h) {
            for k in i..i + h {
                let (a, b) = (v[k], v[k + h]);
                v[k] = a + b;
                v[k + h] = a - b;
            }
        }
        h *= 2;
    }
}

fn weights_from_spectrum(n: usize, spectrum: Vec<f64>) -> WeightVector {
    let mut f = spectrum;
    walsh_hadamard(&mut f);
    let min = f.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = 1.0 / (1usize << n) as f64;
    let l: Vec<f64> = f.iter().map(|x| (x - min) * scale).collect();
    let feasible = l.iter().sum::<f64>() <= 1.0 + FEASIBILITY_TOL;
    WeightVector { l, feasible }
}

/// Weights reproducing coefficients on nonempty proper subsets (bit masks).
pub fn compose_weights(n: usize, coeffs: &[(usize, f64)]) -> Result<WeightVector> {
    compose_with_full(n, coeffs, 0.0)
}

/// As [`compose_weights`], with the full-set coefficient taking part too.
pub fn compose_with_full(n: usize, coeffs: &[(usize, f64)], full: f64) -> Result<WeightVector> {
    if n == 0 || n > 20 {
        return invalid_arg(format!("qubit count {n} out of range"));
    }
    let all = (1usize << n) - 1;
    let mut spectrum = vec![0.0; 1 << n];
    for &(s, t) in coeffs {
        if s == 0 || s >= all {
            return invalid_arg(format!("subset mask {s:#b} is empty or full"));
        }
        spectrum[s] += t;
    }
    spectrum[all] = full;
    Ok(weights_from_spectrum(n, spectrum))
}

/// Total mass `sum_j l_j`, the strength of the full-weight string.
pub fn hidden_strength(l: &WeightVector) -> f64 {
    l.total()
}

/// Coefficient of the string on `subset` implied by the weights.
pub fn implied_coefficient(l: &WeightVector, subset: usize) -> f64 {
    l.l.iter()
        .enumerate()
        .map(|(j, &w)| w * parity_character(subset, j) as f64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Auto,
    Exhaustive,
    Greedy,
}

/// Axis frame in which the rebuild is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// The computational Pauli axes.
    Native,
    /// Per-qubit HOSVD factors of the full-weight block.
    #[default]
    Canonical,
}

/// How the hidden strengths are turned into a cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HiddenCost {
    /// Sum of the per-tuple hidden strengths.
    #[default]
    Independent,
    /// `smin` of the additive tensor.
    Hosvd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RebuildConfig {
    pub exhaustive_limit: usize,
    pub max_allocations: u64,
    pub coeff_tol: f64,
    pub strategy: Strategy,
    pub frame: Frame,
    pub hidden_cost: HiddenCost,
}

impl Default for RebuildConfig {
    fn default() -> Self {
        RebuildConfig {
            exhaustive_limit: 12,
            max_allocations: 1 << 20,
            coeff_tol: 1e-12,
            strategy: Strategy::Auto,
            frame: Frame::Canonical,
            hidden_cost: HiddenCost::Independent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub tuple: AxisTuple,
    pub strings: Vec<(PauliString, f64)>,
    /// Actual full-weight coefficient of the tuple.
    pub actual: f64,
    pub weights: WeightVector,
    pub t_hat: f64,
    pub t_add: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebuildResult {
    /// Per-qubit frames; column `a` is the direction of axis `a + 1`.
    pub frames: Vec<Matrix3<f64>>,
    /// The correlation tensor expressed in `frames`.
    pub r: CorrelationTensorR,
    pub t_core: CorrelationTensorT,
    pub t_add: CorrelationTensorT,
    pub allocations: Vec<Allocation>,
    /// Coefficients no feasible tuple could absorb.
    pub unconsumed: Vec<(PauliString, f64)>,
    /// Tuples rejected because their compatible set was infeasible.
    pub infeasible: Vec<AxisTuple>,
    pub strategy: Strategy,
}

impl RebuildResult {
    pub fn sum_t_add(&self) -> f64 {
        self.allocations.iter().map(|a| a.t_add).sum()
    }

    pub fn unconsumed_abs_sum(&self) -> f64 {
        self.unconsumed.iter().map(|(_, t)| t.abs()).sum()
    }

    pub fn consumed(&self) -> BTreeSet<PauliString> {
        self.allocations
            .iter()
            .flat_map(|a| a.strings.iter().map(|(p, _)| p.clone()))
            .collect()
    }

    pub fn feasible(&self) -> bool {
        self.infeasible.is_empty() && self.unconsumed.is_empty()
    }
}

/// Relative gap below which two mode eigenvalues count as degenerate.
const DEGENERACY_TOL: f64 = 1e-8;
/// Relative norm below which an alignment vector is ignored.
const ALIGN_TOL: f64 = 1e-8;

/// Canonical per-qubit frames: HOSVD factors of the full-weight block.
///
/// Inside a degenerate eigenspace the factor is not unique. Such blocks are
/// fixed qubit by qubit, by Gram-Schmidt on the correlation vectors that link
/// the qubit to itself and to the qubits already fixed.
pub fn canonical_frames(r: &CorrelationTensorR) -> Result<Vec<Matrix3<f64>>> {
    let n = r.n_qubits();
    if n < 2 {
        return Ok(vec![Matrix3::identity(); n]);
    }
    let h = hosvd(r.global().tensor())?;
    let mut data = r.data().to_vec();
    let mut frames = Vec::with_capacity(n);
    for q in 0..n {
        let mut f = Matrix3::from_fn(|i, j| h.factors[q][(i, j)]);
        let eig: Vec<f64> = h.mode_norms[q].iter().map(|x| x * x).collect();
        let tol = DEGENERACY_TOL * eig[0] + 1e-14;
        let mut start = 0;
        while start < 3 {
            let mut end = start + 1;
            while end < 3 && (eig[start] - eig[end]).abs() <= tol {
                end += 1;
            }
            if end - start > 1 {
                align_block(&mut f, start, end, &alignment_rows(&data, n, q));
            }
            start = end;
        }
        rotate_qubit(&mut data, n, q, &f);
        frames.push(f);
    }
    Ok(frames)
}

/// Vectors on qubit `q` from every subset of qubits `0..=q` containing `q`,
/// smaller subsets first; qubits before `q` are already in their frames.
fn alignment_rows(data: &[f64], n: usize, q: usize) -> Vec<[f64; 3]> {
    let mut subsets: Vec<usize> = (0..1usize << q).collect();
    subsets.sort_by_key(|m| (m.count_ones(), *m));
    let mut rows = Vec::new();
    for others in subsets {
        let members: Vec<usize> = (0..q).filter(|r| others >> r & 1 == 1).collect();
        for code in 0..3usize.pow(members.len() as u32) {
            let mut flat = 0;
            let mut c = code;
            for &m in members.iter().rev() {
                flat += (1 + c % 3) * 4usize.pow((n - 1 - m) as u32);
                c /= 3;
            }
            let stride = 4usize.pow((n - 1 - q) as u32);
            rows.push([data[flat + stride], data[flat + 2 * stride], data[flat + 3 * stride]]);
        }
    }
    rows
}

/// Replaces columns `start..end` of `f` by an orthonormal basis of the same
/// span, aligned with the first independent `rows`.
fn align_block(f: &mut Matrix3<f64>, start: usize, end: usize, rows: &[[f64; 3]]) {
    let k = end - start;
    let basis: Vec<Vector3<f64>> = (start..end).map(|c| f.column(c).into_owned()).collect();
    let coords: Vec<Vec<f64>> = rows
        .iter()
        .map(|w| {
            let w = Vector3::new(w[0], w[1], w[2]);
            basis.iter().map(|b| b.dot(&w)).collect()
        })
        .collect();
    let scale = coords.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    let mut chosen: Vec<Vec<f64>> = Vec::new();
    for c in coords {
        if chosen.len() + 1 >= k {
            break;
        }
        let mut v = c;
        for u in &chosen {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > ALIGN_TOL * scale {
            chosen.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    if chosen.is_empty() {
        return;
    }
    // Complete with the original block vectors, then fix the orientation of the last one.
    for e in 0..k {
        if chosen.len() == k {
            break;
        }
        let mut v: Vec<f64> = (0..k).map(|i| if i == e { 1.0 } else { 0.0 }).collect();
        for u in &chosen {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            chosen.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let det = match k {
        2 => chosen[0][0] * chosen[1][1] - chosen[0][1] * chosen[1][0],
        _ => Matrix3::from_fn(|i, j| chosen[j][i]).determinant(),
    };
    if det < 0.0 {
        chosen[k - 1].iter_mut().for_each(|x| *x = -*x);
    }
    for (j, u) in chosen.iter().enumerate() {
        let col: Vector3<f64> = basis.iter().zip(u).map(|(b, w)| b * *w).sum();
        f.set_column(start + j, &col);
    }
}

/// Re-expresses the axes of qubit `q` in `frame`, in place on a flat R-tensor.
fn rotate_qubit(data: &mut [f64], n: usize, q: usize, frame: &Matrix3<f64>) {
    let stride = 4usize.pow((n - 1 - q) as u32);
    for base in 0..data.len() {
        if !(base / stride).is_multiple_of(4) {
            continue;
        }
        let old = [data[base + stride], data[base + 2 * stride], data[base + 3 * stride]];
        for a in 0..3 {
            data[base + (a + 1) * stride] = (0..3).map(|b| frame[(b, a)] * old[b]).sum();
        }
    }
}

fn allocate(tuple: &AxisTuple, strings: Vec<(PauliString, f64)>, r: &CorrelationTensorR) -> Allocation {
    let n = tuple.n_qubits();
    let coeffs: Vec<(usize, f64)> = strings.iter().map(|(p, t)| (p.support_mask(), *t)).collect();
    let actual = r.get(&tuple.restrict((1 << n) - 1));
    let weights = compose_with_full(n, &coeffs, actual).expect("proper subsets");
    let t_hat = hidden_strength(&weights);
    let t_add = (t_hat - actual.abs()).max(0.0);
    Allocation { tuple: tuple.clone(), strings, actual, weights, t_hat, t_add }
}

struct Pool {
    n: usize,
    /// Flat index of each pooled string into the R-tensor, with its value.
    strings: Vec<(PauliString, f64)>,
    by_flat: HashMap<usize, usize>,
}

impl Pool {
    fn new(r: &CorrelationTensorR, tol: f64) -> Self {
        let strings = r.non_global(tol);
        let by_flat = strings.iter().enumerate().map(|(k, (p, _))| (p.flat(), k)).collect();
        Pool { n: r.n_qubits(), strings, by_flat }
    }

    /// Pool members compatible with `a` that pass `keep`.
    fn compatible(&self, a: &AxisTuple, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        let all = (1usize << self.n) - 1;
        let mut out: Vec<usize> = (1..all)
            .filter_map(|mask| self.by_flat.get(&a.restrict(mask).flat()).copied())
            .filter(|&k| keep(k))
            .collect();
        out.sort_unstable();
        out
    }

    /// Every axis tuple compatible with pool member `k`.
    fn tuples_of(&self, k: usize) -> Vec<AxisTuple> {
        let p = &self.strings[k].0;
        let mut out = vec![Vec::new()];
        for &i in p.indices() {
            let choices: Vec<u8> = if i == 0 { vec![1, 2, 3] } else { vec![i] };
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<u8>| {
                    choices.iter().map(move |&c| {
                        let mut v = prefix.clone();
                        v.push(c);
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(|v| AxisTuple::new(v).expect("valid axes")).collect()
    }
}

pub fn rebuild(r: &CorrelationTensorR, cfg: &RebuildConfig) -> Result<RebuildResult> {
    let n = r.n_qubits();
    if n < 2 {
        return invalid_arg("rebuild needs at least two qubits");
    }
    let frames = match cfg.frame {
        Frame::Native => vec![Matrix3::identity(); n],
        Frame::Canonical => canonical_frames(r)?,
    };
    let r = match cfg.frame {
        Frame::Native => r.clone(),
        Frame::Canonical => r.in_frame(&frames)?,
    };
    let pool = Pool::new(&r, cfg.coeff_tol);

    let candidates: BTreeSet<AxisTuple> = (0..pool.strings.len()).flat_map(|k| pool.tuples_of(k)).collect();
    let options: u64 = (0..pool.strings.len())
        .map(|k| pool.tuples_of(k).len() as u64)
        .try_fold(1u64, |acc, x| acc.checked_mul(x))
        .unwrap_or(u64::MAX);
    let exhaustive = match cfg.strategy {
        Strategy::Exhaustive => true,
        Strategy::Greedy => false,
        Strategy::Auto => candidates.len() <= cfg.exhaustive_limit && options <= cfg.max_allocations,
    };

    let (mut allocations, unconsumed, infeasible, strategy) = if pool.strings.is_empty() {
        (Vec::new(), Vec::new(), Vec::new(), Strategy::Auto)
    } else if exhaustive {
        match exhaustive_allocation(&pool, &r, cfg) {
            Some(allocs) => (allocs, Vec::new(), Vec::new(), Strategy::Exhaustive),
            None => {
                let (a, u, i) = greedy_allocation(&pool, &r);
                (a, u, i, Strategy::Greedy)
            }
        }
    } else {
        let (a, u, i) = greedy_allocation(&pool, &r);
        (a, u, i, Strategy::Greedy)
    };
    allocations.sort_by(|a, b| a.tuple.cmp(&b.tuple));

    let t_core = r.global();
    let mut add = Tensor::cube(n);
    for a in &allocations {
        add.set(&a.tuple.cube_index(), a.t_add);
    }
    Ok(RebuildResult {
        frames,
        r,
        t_core,
        t_add: CorrelationTensorT(add),
        allocations,
        unconsumed,
        infeasible,
        strategy,
    })
}

/// Intersection-priority greedy: the string compatible with the most tuples
/// is placed first, into the tuple absorbing the most remaining strings.
fn greedy_allocation(pool: &Pool, r: &CorrelationTensorR) -> (Vec<Allocation>, Vec<(PauliString, f64)>, Vec<AxisTuple>) {
    let m = pool.strings.len();
    let mut consumed = vec![false; m];
    let mut done = vec![false; m];
    let mut dead: BTreeSet<AxisTuple> = BTreeSet::new();
    let mut infeasible = Vec::new();
    let mut allocations = Vec::new();
    let share = |k: usize| 3usize.pow((pool.n - pool.strings[k].0.weight()) as u32);

    loop {
        let next = (0..m)
            .filter(|&k| !done[k])
            .max_by(|&a, &b| share(a).cmp(&share(b)).then(b.cmp(&a)));
        let Some(s) = next else { break };
        let mut ranked: Vec<(usize, usize, AxisTuple, Vec<usize>)> = pool
            .tuples_of(s)
            .into_iter()
            .filter(|a| !dead.contains(a))
            .map(|a| {
                let members = pool.compatible(&a, |k| !consumed[k]);
                let weight = members.iter().map(|&k| share(k)).sum();
                (members.len(), weight, a, members)
            })
            .collect();
        ranked.sort_by(|x, y| y.0.cmp(&x.0).then(y.1.cmp(&x.1)).then(x.2.cmp(&y.2)));
        let mut placed = false;
        for (_, _, tuple, members) in ranked {
            let strings = members.iter().map(|&k| pool.strings[k].clone()).collect();
            let alloc = allocate(&tuple, strings, r);
            dead.insert(tuple.clone());
            if alloc.weights.feasible {
                for &k in &members {
                    consumed[k] = true;
                    done[k] = true;
                }
                allocations.push(alloc);
                placed = true;
                break;
            }
            infeasible.push(tuple);
        }
        if !placed {
            done[s] = true;
        }
    }
    let unconsumed = (0..m).filter(|&k| !consumed[k]).map(|k| pool.strings[k].clone()).collect();
    infeasible.sort();
    (allocations, unconsumed, infeasible)
}

/// Every assignment of strings to compatible tuples; the feasible one with
/// the smallest hidden cost wins, earliest in enumeration order on ties.
fn exhaustive_allocation(pool: &Pool, r: &CorrelationTensorR, cfg: &RebuildConfig) -> Option<Vec<Allocation>> {
    let m = pool.strings.len();
    let options: Vec<Vec<AxisTuple>> = (0..m).map(|k| pool.tuples_of(k)).collect();
    let mut choice = vec![0usize; m];
    let mut cache: HashMap<(AxisTuple, Vec<usize>), Allocation> = HashMap::new();
    let mut best: Option<(f64, Vec<Allocation>)> = None;
    loop {
        let mut groups: BTreeMap<&AxisTuple, Vec<usize>> = BTreeMap::new();
        for (k, &c) in choice.iter().enumerate() {
            groups.entry(&options[k][c]).or_default().push(k);
        }
        let mut allocs = Vec::with_capacity(groups.len());
        let mut ok = true;
        for (tuple, members) in groups {
            let key = (tuple.clone(), members.clone());
            let alloc = cache
                .entry(key)
                .or_insert_with(|| {
                    let strings = members.iter().map(|&k| pool.strings[k].clone()).collect();
                    allocate(tuple, strings, r)
                })
                .clone();
            if !alloc.weights.feasible {
                ok = false;
                break;
            }
            allocs.push(alloc);
        }
        if ok {
            let cost = allocation_cost(&allocs, pool.n, cfg.hidden_cost);
            if best.as_ref().is_none_or(|(b, _)| cost < b - 1e-12) {
                best = Some((cost, allocs));
            }
        }
        let mut k = m;
        loop {
            if k == 0 {
                return best.map(|(_, a)| a);
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < options[k].len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

fn allocation_cost(allocs: &[Allocation], n: usize, mode: HiddenCost) -> f64 {
    match mode {
        HiddenCost::Independent => allocs.iter().map(|a| a.t_add).sum(),
        HiddenCost::Hosvd => {
            let mut add = Tensor::cube(n);
            for a in allocs {
                add.set(&a.tuple.cube_index(), a.t_add);
            }
            smin(&add).map(|s| s.smin).unwrap_or(f64::INFINITY)
        }
    }
}

/// Closed-form hidden strength of the `333` tuple for a mixture of the eight
/// GHZ-type basis states.
pub fn ghz_diag_tadd(p: &[f64]) -> Result<f64> {
    check_distribution(p, 8)?;
    let pairs = [p[0] + p[1], p[2] + p[3], p[4] + p[5], p[6] + p[7]];
    let min = pairs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((1.0 - 4.0 * min).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrtensor::correlation_tensor;
    use crate::qcore::{density_from_state, DensityMatrix, StateVector};

    fn mask(n: usize, qubits: &[usize]) -> usize {
        qubits.iter().fold(0, |m, &q| m | qubit_bit(n, q))
    }

    fn bits(s: &str) -> usize {
        usize::from_str_radix(s, 2).unwrap()
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity_character(mask(3, &[0]), bits("011")), 1);
        assert_eq!(parity_character(mask(3, &[0, 1, 2]), bits("110")), 1);
        assert_eq!(parity_character(mask(3, &[0, 1, 2]), bits("111")), -1);
        assert_eq!(parity_character(0, bits("101")), 1);
    }

    #[test]
    fn compose_pairs_of_ghz() {
        let c = [(mask(3, &[0, 1]), 1.0), (mask(3, &[0, 2]), 1.0), (mask(3, &[1, 2]), 1.0)];
        let w = compose_weights(3, &c).unwrap();
        for j in 0..8 {
            let want = if j == 0 || j == 7 { 0.5 } else { 0.0 };
            assert!((w.l[j] - want).abs() < 1e-15);
        }
        assert!((hidden_strength(&w) - 1.0).abs() < 1e-15);
        assert!(w.feasible);
    }

    #[test]
    fn compose_w_pairs() {
        let t = 2.0 / 3.0;
        let c = [(mask(3, &[0, 1]), t), (mask(3, &[0, 2]), t), (mask(3, &[1, 2]), t)];
        let w = compose_weights(3, &c).unwrap();
        assert!((w.l[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((w.l[7] - 1.0 / 3.0).abs() < 1e-15);
        assert!((hidden_strength(&w) - t).abs() < 1e-15);
    }

    #[test]
    fn compose_single_coefficient() {
        let w = compose_weights(3, &[(mask(3, &[0]), 1.0)]).unwrap();
        for j in 0..8 {
            let want = if j < 4 { 0.25 } else { 0.0 };
            assert!((w.l[j] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn compose_rejects_empty_and_full() {
        assert!(compose_weights(3, &[(0, 1.0)]).is_err());
        assert!(compose_weights(3, &[(7, 1.0)]).is_err());
        let zero = compose_weights(3, &[]).unwrap();
        assert_eq!(hidden_strength(&zero), 0.0);
    }

    #[test]
    fn walsh_round_trip() {
        let c = [(mask(3, &[0]), 0.2), (mask(3, &[1, 2]), -0.4), (mask(3, &[0, 2]), 0.1)];
        let w = compose_weights(3, &c).unwrap();
        for (s, t) in c {
            assert!((implied_coefficient(&w, s) - t).abs() < 1e-15);
        }
    }

    fn r_of(rho: &DensityMatrix) -> CorrelationTensorR {
        correlation_tensor(rho).unwrap()
    }

    fn native() -> RebuildConfig {
        RebuildConfig { frame: Frame::Native, ..Default::default() }
    }

    #[test]
    fn ghz3_rebuild() {
        let r = r_of(&density_from_state(&StateVector::ghz(3).unwrap()));
        let res = rebuild(&r, &native()).unwrap();
        let nz: Vec<f64> = res.t_add.tensor().data().iter().copied().filter(|&x| x != 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert!((res.t_add.at(&[3, 3, 3]) - 1.0).abs() < 1e-14);
        assert_eq!(res.t_core, r.global());
        assert!(res.unconsumed.is_empty());
    }

    #[test]
    fn w3_rebuild() {
        let r = r_of(&density_from_state(&StateVector::w(3).unwrap()));
        let res = rebuild(&r, &native()).unwrap();
        let t = 2.0 / 3.0;
        assert!((res.t_add.at(&[1, 1, 1]) - t).abs() < 1e-14);
        assert!((res.t_add.at(&[2, 2, 2]) - t).abs() < 1e-14);
        assert!((res.sum_t_add() - 2.0 * t).abs() < 1e-14);
        let z = res.allocations.iter().find(|a| a.tuple.axes() == [3, 3, 3]).unwrap();
        assert_eq!(z.strings.len(), 6);
        assert!(z.t_add.abs() < 1e-14);
        for j in [bits("001"), bits("010"), bits("100")] {
            assert!((z.weights.l[j] - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn product_state_rebuild() {
        let r = r_of(&density_from_state(&StateVector::product("000").unwrap()));
        let res = rebuild(&r, &native()).unwrap();
        assert!(res.t_add.tensor().data().iter().all(|&x| x.abs() < 1e-14));
        let z = &res.allocations[0];
        assert_eq!(z.tuple.axes(), [3, 3, 3]);
        assert!((z.weights.l[0] - 1.0).abs() < 1e-14);
        assert!((z.t_hat - 1.0).abs() < 1e-14);
    }

    #[test]
    fn no_local_terms_means_no_rebuild() {
        let mut data = vec![0.0; 64];
        data[0] = 1.0;
        data[21] = 0.3;
        let r = CorrelationTensorR::new(3, data).unwrap();
        let res = rebuild(&r, &native()).unwrap();
        assert!(res.allocations.is_empty());
        assert_eq!(res.t_core, r.global());
        assert!(res.t_add.tensor().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn closed_form_ghz_diagonal() {
        let mut p = [0.0; 8];
        p[0] = 1.0;
        assert_eq!(ghz_diag_tadd(&p).unwrap(), 1.0);
        assert_eq!(ghz_diag_tadd(&[0.125; 8]).unwrap(), 0.0);
        p[0] = 0.5;
        p[1] = 0.5;
        assert_eq!(ghz_diag_tadd(&p).unwrap(), 1.0);
        assert!(ghz_diag_tadd(&[0.2; 8]).is_err());
        assert!(ghz_diag_tadd(&[0.5; 2]).is_err());
    }
}
