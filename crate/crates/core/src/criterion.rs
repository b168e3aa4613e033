//! The separability scalar `S`, its verdict, noise thresholds, closed forms
//! for GHZ families, robustness curves and explicit separable ensembles.

use nalgebra::{Matrix2, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{negativity, Bipartition};
use crate::corrtensor::correlation_tensor;
use crate::error::{invalid_arg, Error, Result};
use crate::hosvd::{matrix_svd_sum, smin, smin_all_orders, RankOneTerm, SingularTensor};
use crate::qcore::{
    apply_channel_all, check_distribution, density_from_state, pauli_matrix, product_density, qubit_bit,
    white_noise_mix, AxisKet, CMatrix, DensityMatrix, Ensemble, KrausChannel, MemberState, StateVector, C64,
    MAX_QUBITS,
};
use crate::rebuild::{compose_with_full, rebuild, Frame, HiddenCost, RebuildConfig, RebuildResult};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriterionConfig {
    pub verdict_tol: f64,
    pub rebuild: RebuildConfig,
    /// Count coefficients no tuple could absorb towards `S`.
    pub strict_nonglobal: bool,
    /// Scan every mode-fixing order (N <= 4) and report the best.
    pub all_orders: bool,
    pub max_qubits: usize,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        CriterionConfig {
            verdict_tol: 1e-9,
            rebuild: RebuildConfig::default(),
            strict_nonglobal: false,
            all_orders: false,
            max_qubits: MAX_QUBITS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Entangled,
    Separable,
}

impl Verdict {
    pub fn is_entangled(self) -> bool {
        self == Verdict::Entangled
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Entangled => "entangled",
            Verdict::Separable => "separable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationReport {
    pub tuple: String,
    pub strings: Vec<(String, f64)>,
    pub actual: f64,
    pub t_hat: f64,
    pub t_add: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceReport {
    pub fixed: Vec<usize>,
    pub singular_values: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub order: Vec<usize>,
    pub sum_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub strategy: String,
    pub frame: Frame,
    pub frame_determinants: Vec<f64>,
    pub allocations: Vec<AllocationReport>,
    pub infeasible_tuples: Vec<String>,
    pub unconsumed: Vec<(String, f64)>,
    pub unconsumed_abs_sum: f64,
    pub core_slices: Vec<SliceReport>,
    pub slices_feasible: bool,
    pub rebuild_feasible: bool,
    /// `smin` of the additive tensor, for comparison with `sum_s_add`.
    pub sum_s_add_hosvd: f64,
    pub order_scan: Option<Vec<OrderReport>>,
    /// Set when some mode-fixing order gives a smaller `sum_s` than the default.
    pub better_order: Option<OrderReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub n_qubits: usize,
    #[serde(rename = "S")]
    pub s: f64,
    pub sum_s: f64,
    pub sum_s_add: f64,
    pub verdict: Verdict,
    /// `|S - 1| <= verdict_tol`.
    pub boundary: bool,
    pub feasibility_ok: bool,
    /// Separable by the scalar, but a feasibility check failed.
    pub inconclusive: bool,
    pub noise_threshold: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Report together with the intermediate objects it was computed from.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: CriterionReport,
    pub rebuild: RebuildResult,
    pub core: SingularTensor,
}

pub fn analyze(rho: &DensityMatrix, cfg: &CriterionConfig) -> Result<Analysis> {
    let n = rho.n_qubits();
    if n < 2 {
        return invalid_arg("the criterion needs at least two qubits");
    }
    if n > cfg.max_qubits {
        return invalid_arg(format!("{n} qubits exceeds the configured maximum {}", cfg.max_qubits));
    }
    let r = correlation_tensor(rho)?;
    let rb = rebuild(&r, &cfg.rebuild)?;
    let core = smin(rb.t_core.tensor())?;
    let add_hosvd = smin(rb.t_add.tensor())?.smin;
    let mut sum_s_add = match cfg.rebuild.hidden_cost {
        HiddenCost::Independent => rb.sum_t_add(),
        HiddenCost::Hosvd => add_hosvd,
    };
    if cfg.strict_nonglobal {
        sum_s_add += rb.unconsumed_abs_sum();
    }
    // Adding +0.0 turns a negative zero into a positive one.
    sum_s_add += 0.0;
    let s = core.smin + sum_s_add;
    let verdict = if s > 1.0 + cfg.verdict_tol { Verdict::Entangled } else { Verdict::Separable };
    let slices_feasible = core.feasible;
    let rebuild_feasible = rb.unconsumed.is_empty();
    let feasibility_ok = slices_feasible && rebuild_feasible;

    let (order_scan, better_order) = if cfg.all_orders && n <= 4 {
        let scan: Vec<OrderReport> = smin_all_orders(rb.t_core.tensor())?
            .into_iter()
            .map(|(order, sum_s)| OrderReport { order, sum_s })
            .collect();
        let best = scan
            .iter()
            .filter(|o| o.sum_s < core.smin - 1e-9)
            .min_by(|a, b| a.sum_s.total_cmp(&b.sum_s))
            .cloned();
        (Some(scan), best)
    } else {
        (None, None)
    };

    let diagnostics = Diagnostics {
        strategy: format!("{:?}", rb.strategy).to_lowercase(),
        frame: cfg.rebuild.frame,
        frame_determinants: rb.frames.iter().map(|f| f.determinant()).collect(),
        allocations: rb
            .allocations
            .iter()
            .map(|a| AllocationReport {
                tuple: a.tuple.label(),
                strings: a.strings.iter().map(|(p, t)| (p.label(), *t)).collect(),
                actual: a.actual,
                t_hat: a.t_hat,
                t_add: a.t_add,
            })
            .collect(),
        infeasible_tuples: rb.infeasible.iter().map(|t| t.label()).collect(),
        unconsumed: rb.unconsumed.iter().map(|(p, t)| (p.label(), *t)).collect(),
        unconsumed_abs_sum: rb.unconsumed_abs_sum(),
        core_slices: core
            .slices
            .iter()
            .zip(&core.slice_values)
            .map(|(sl, sv)| SliceReport { fixed: sl.fixed.clone(), singular_values: *sv })
            .collect(),
        slices_feasible,
        rebuild_feasible,
        sum_s_add_hosvd: add_hosvd,
        order_scan,
        better_order,
    };
    let report = CriterionReport {
        n_qubits: n,
        s,
        sum_s: core.smin,
        sum_s_add,
        verdict,
        boundary: (s - 1.0).abs() <= cfg.verdict_tol,
        feasibility_ok,
        inconclusive: verdict == Verdict::Separable && !feasibility_ok,
        noise_threshold: None,
        diagnostics,
    };
    Ok(Analysis { report, rebuild: rb, core })
}

pub fn evaluate(rho: &DensityMatrix, cfg: &CriterionConfig) -> Result<CriterionReport> {
    analyze(rho, cfg).map(|a| a.report)
}

/// `max(||T||_* - 1, 0)` for the 3x3 correlation matrix of a two-qubit state.
pub fn two_qubit_measure(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits() != 2 {
        return invalid_arg("the two-qubit measure needs exactly two qubits");
    }
    let t = correlation_tensor(rho)?.global();
    let m = Matrix3::from_row_slice(t.tensor().data());
    let (_, nuclear) = matrix_svd_sum(&m)?;
    Ok((nuclear - 1.0).max(0.0))
}

/// `(S - 1)/S`, the threshold when every coefficient scales with `1 - q`.
pub fn linear_noise_threshold(s: f64) -> f64 {
    if s <= 1.0 {
        0.0
    } else {
        (s - 1.0) / s
    }
}

/// Smallest white-noise weight at which `S` reaches 1, by bisection.
pub fn noise_threshold(rho: &DensityMatrix, cfg: &CriterionConfig) -> Result<f64> {
    if (rho.purity() - 1.0).abs() > 1e-9 {
        return invalid_arg("noise threshold needs a pure input state");
    }
    let s_at = |q: f64| -> Result<f64> { Ok(evaluate(&white_noise_mix(rho, q)?, cfg)?.s) };
    if s_at(0.0)? <= 1.0 + cfg.verdict_tol {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if s_at(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `S` of the N-qubit GHZ state.
pub fn ghz_s(n: usize) -> Result<f64> {
    if n < 2 {
        return invalid_arg("GHZ closed form needs N >= 2");
    }
    Ok(2f64.powi(n as i32 - 1) + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GhzDiagonalReport {
    pub t111: f64,
    pub t122: f64,
    pub t212: f64,
    pub t221: f64,
    pub t_add_333: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub verdict: Verdict,
}

/// Closed form for a mixture of the eight GHZ-type basis states.
pub fn ghz_diagonal_report(p: &[f64], verdict_tol: f64) -> Result<GhzDiagonalReport> {
    check_distribution(p, 8)?;
    let t111 = p[0] - p[1] + p[2] - p[3] + p[4] - p[5] + p[6] - p[7];
    let t122 = -p[0] + p[1] + p[2] - p[3] + p[4] - p[5] - p[6] + p[7];
    let t212 = -p[0] + p[1] + p[2] - p[3] - p[4] + p[5] + p[6] - p[7];
    let t221 = -p[0] + p[1] - p[2] + p[3] + p[4] - p[5] + p[6] - p[7];
    let t_add_333 = crate::rebuild::ghz_diag_tadd(p)?;
    let s = t111.abs() + t122.abs() + t212.abs() + t221.abs() + t_add_333;
    let verdict = if s > 1.0 + verdict_tol { Verdict::Entangled } else { Verdict::Separable };
    Ok(GhzDiagonalReport { t111, t122, t212, t221, t_add_333, s, verdict })
}

pub fn ghz_diagonal_s(p: &[f64]) -> Result<f64> {
    ghz_diagonal_report(p, 1e-9).map(|r| r.s)
}

/// One member of a separable decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemberKind {
    /// `2^-N (I + (d_1.sigma) x ... x (d_N.sigma))` for unit directions `d_n`.
    Correlated { directions: Vec<[f64; 3]> },
    /// Diagonal mixture in the eigenbasis of one axis per qubit; `axes` are
    /// the Bloch vectors of the bit-0 eigenstates and `weights` sum to 1.
    Diagonal { tuple: String, axes: Vec<[f64; 3]>, weights: Vec<f64> },
    Pure { bloch: Vec<[f64; 3]> },
    MaximallyMixed { n_qubits: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Member {
    pub probability: f64,
    #[serde(flatten)]
    pub kind: MemberKind,
}

fn pauli_dot(d: [f64; 3]) -> Matrix2<C64> {
    let mut m = Matrix2::zeros();
    for (k, &w) in d.iter().enumerate() {
        m += pauli_matrix(k + 1).expect("valid index") * C64::new(w, 0.0);
    }
    m
}

impl Member {
    pub fn density(&self) -> Result<DensityMatrix> {
        match &self.kind {
            MemberKind::Correlated { directions } => {
                let n = directions.len();
                let d = 1usize << n;
                let mut prod = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
                for &v in directions {
                    prod = prod.kronecker(&pauli_dot(v));
                }
                let m = (CMatrix::identity(d, d) + prod) * C64::new(1.0 / d as f64, 0.0);
                DensityMatrix::new(n, m)
            }
            MemberKind::Diagonal { axes, weights, .. } => {
                let n = axes.len();
                let d = 1usize << n;
                let mut m = CMatrix::zeros(d, d);
                for (j, &w) in weights.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    m += product_density(&eigen_bloch(axes, j))?.into_entries() * C64::new(w, 0.0);
                }
                DensityMatrix::new(n, m)
            }
            MemberKind::Pure { bloch } => product_density(bloch),
            MemberKind::MaximallyMixed { n_qubits } => DensityMatrix::maximally_mixed(*n_qubits),
        }
    }

    /// Compact description using `0 1 + - ~+ ~-` for axis-aligned states.
    pub fn label(&self) -> String {
        match &self.kind {
            MemberKind::Pure { bloch } => {
                let syms: Option<Vec<&str>> =
                    bloch.iter().map(|v| AxisKet::from_bloch(*v, 1e-9).map(|k| k.symbol())).collect();
                match syms {
                    Some(s) => format!("|{}>", s.join("")),
                    None => format!("product {}", format_vectors(bloch)),
                }
            }
            MemberKind::Correlated { directions } => match signed_axes(directions) {
                Some((sign, axes)) => format!("(I {} {})/{}", if sign > 0.0 { "+" } else { "-" }, axes, 1 << directions.len()),
                None => format!("(I + {})/{}", format_vectors(directions), 1 << directions.len()),
            },
            MemberKind::Diagonal { tuple, weights, .. } => {
                let support = weights.iter().filter(|&&w| w > 0.0).count();
                format!("diagonal in axes {tuple} over {support} eigenstates")
            }
            MemberKind::MaximallyMixed { n_qubits } => format!("I/{}", 1usize << n_qubits),
        }
    }
}

fn format_vectors(v: &[[f64; 3]]) -> String {
    let parts: Vec<String> = v.iter().map(|d| format!("({:.4},{:.4},{:.4})", d[0], d[1], d[2])).collect();
    parts.join(" x ")
}

/// Overall sign and Pauli labels when every direction is a signed axis.
fn signed_axes(dirs: &[[f64; 3]]) -> Option<(f64, String)> {
    let mut sign = 1.0;
    let mut label = String::new();
    for d in dirs {
        let k = (0..3).find(|&k| (d[k].abs() - 1.0).abs() < 1e-9)?;
        sign *= d[k].signum();
        label.push(char::from(b'1' + k as u8));
    }
    Some((sign, label))
}

fn eigen_bloch(axes: &[[f64; 3]], j: usize) -> Vec<[f64; 3]> {
    let n = axes.len();
    (0..n)
        .map(|q| {
            let s = if j & qubit_bit(n, q) != 0 { -1.0 } else { 1.0 };
            axes[q].map(|x| s * x)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparableDecomposition {
    pub n_qubits: usize,
    #[serde(rename = "S")]
    pub s: f64,
    /// Correlated terms and per-tuple diagonal mixtures.
    pub mixed: Vec<Member>,
    /// Every member split into pure product states.
    pub pure: Vec<Member>,
    /// Weight on `I/2^N`, already included as the last member of both levels when nonzero.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Mixed,
    Pure,
}

impl SeparableDecomposition {
    pub fn members(&self, level: Level) -> &[Member] {
        match level {
            Level::Mixed => &self.mixed,
            Level::Pure => &self.pure,
        }
    }

    pub fn ensemble(&self, level: Level) -> Result<Ensemble> {
        let members = self
            .members(level)
            .iter()
            .map(|m| Ok((m.probability, member_state(m)?)))
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(members)
    }

    /// Largest entrywise deviation of the re-mixed ensemble from `rho`.
    pub fn max_residual(&self, rho: &DensityMatrix, level: Level) -> Result<f64> {
        let d = rho.dim();
        let mut m = CMatrix::zeros(d, d);
        for member in self.members(level) {
            m += member.density()?.into_entries() * C64::new(member.probability, 0.0);
        }
        Ok(crate::qcore::max_abs_diff(&m, rho.entries()))
    }
}

fn member_state(m: &Member) -> Result<MemberState> {
    Ok(match &m.kind {
        MemberKind::Pure { bloch } => MemberState::Product(bloch.clone()),
        _ => MemberState::Density(m.density()?),
    })
}

fn physical(frame: &Matrix3<f64>, d: [f64; 3]) -> [f64; 3] {
    let v = frame * nalgebra::Vector3::new(d[0], d[1], d[2]);
    let n = v.norm();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Rank-one terms of `t`: its entries when that is no more expensive than
/// the iterated HOSVD, otherwise the HOSVD terms.
fn core_terms(t: &Tensor) -> Result<Vec<RankOneTerm>> {
    let direct = t.abs_sum();
    let reduced = smin(t)?;
    if direct <= reduced.smin + 1e-12 {
        Ok((0..t.len())
            .filter(|&f| t.data()[f].abs() > 1e-15)
            .map(|f| {
                let v = t.data()[f];
                let idx = t.index_of(f);
                let mut dirs: Vec<[f64; 3]> = idx
                    .iter()
                    .map(|&a| {
                        let mut e = [0.0; 3];
                        e[a] = 1.0;
                        e
                    })
                    .collect();
                dirs[0] = dirs[0].map(|x| x * v.signum());
                RankOneTerm { weight: v.abs(), directions: dirs }
            })
            .collect())
    } else {
        reduced.rank_one_terms()
    }
}

struct Candidate {
    core: Vec<RankOneTerm>,
    /// (tuple label, tuple axes, weights l_j, mass)
    hidden: Vec<(String, Vec<u8>, Vec<f64>, f64)>,
    mass: f64,
}

/// Splits each allocation's full-weight entry: `x[k]` goes to the hidden
/// element and the rest stays in the core tensor.
struct Split<'a> {
    rb: &'a RebuildResult,
    coeffs: Vec<Vec<(usize, f64)>>,
}

impl<'a> Split<'a> {
    fn new(rb: &'a RebuildResult) -> Self {
        let coeffs = rb
            .allocations
            .iter()
            .map(|a| a.strings.iter().map(|(p, t)| (p.support_mask(), *t)).collect())
            .collect();
        Split { rb, coeffs }
    }

    fn core_tensor(&self, x: &[f64]) -> Tensor {
        let mut core_t = self.rb.t_core.tensor().clone();
        for (a, &xk) in self.rb.allocations.iter().zip(x) {
            core_t.set(&a.tuple.cube_index(), a.actual - xk);
        }
        core_t
    }

    fn hidden_weights(&self, k: usize, x: f64) -> Result<crate::rebuild::WeightVector> {
        let n = self.rb.t_core.n_qubits();
        compose_with_full(n, &self.coeffs[k], x)
    }

    fn mass(&self, x: &[f64]) -> Result<f64> {
        let core_t = self.core_tensor(x);
        let core = core_t.abs_sum().min(smin(&core_t)?.smin);
        let mut hidden = 0.0;
        for (k, &xk) in x.iter().enumerate() {
            hidden += self.hidden_weights(k, xk)?.total();
        }
        Ok(core + hidden)
    }

    fn build(&self, x: &[f64]) -> Result<Candidate> {
        let mut hidden = Vec::new();
        for (k, a) in self.rb.allocations.iter().enumerate() {
            let w = self.hidden_weights(k, x[k])?;
            let mass = w.total();
            if mass > 1e-15 {
                hidden.push((a.tuple.label(), a.tuple.axes().to_vec(), w.l, mass));
            }
        }
        let core = core_terms(&self.core_tensor(x))?;
        let mass = core.iter().map(|t| t.weight).sum::<f64>() + hidden.iter().map(|h| h.3).sum::<f64>();
        Ok(Candidate { core, hidden, mass })
    }

    /// Coordinate descent on the split, from the better of the two pure splits.
    fn optimize(&self) -> Result<Vec<f64>> {
        let with: Vec<f64> = self.rb.allocations.iter().map(|a| a.actual).collect();
        let without = vec![0.0; with.len()];
        let (m_with, m_without) = (self.mass(&with)?, self.mass(&without)?);
        let (mut x, mut best) = if m_without < m_with - 1e-12 { (without, m_without) } else { (with, m_with) };
        if best <= 1.0 {
            return Ok(x);
        }
        for _sweep in 0..4 {
            let before = best;
            for k in 0..x.len() {
                let t = self.rb.allocations[k].actual;
                let span = t.abs().max(0.05);
                let (lo, hi) = (t.min(0.0) - span, t.max(0.0) + span);
                let eval = |v: f64, x: &mut Vec<f64>| -> Result<f64> {
                    x[k] = v;
                    self.mass(x)
                };
                let mut trial = x.clone();
                let mut best_v = x[k];
                for i in 0..=16 {
                    let v = lo + (hi - lo) * i as f64 / 16.0;
                    let m = eval(v, &mut trial)?;
                    if m < best - 1e-13 {
                        best = m;
                        best_v = v;
                    }
                }
                let step = (hi - lo) / 16.0;
                let (mut a, mut b) = (best_v - step, best_v + step);
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..40 {
                    let c = b - g * (b - a);
                    let d = a + g * (b - a);
                    if eval(c, &mut trial)? < eval(d, &mut trial)? {
                        b = d;
                    } else {
                        a = c;
                    }
                }
                let v = 0.5 * (a + b);
                let m = eval(v, &mut trial)?;
                if m < best - 1e-13 {
                    best = m;
                    best_v = v;
                }
                x[k] = best_v;
            }
            if before - best < 1e-12 {
                break;
            }
        }
        Ok(x)
    }
}

/// Explicit product-state ensemble for a state the criterion calls separable.
pub fn extract_ensemble(rho: &DensityMatrix, cfg: &CriterionConfig) -> Result<SeparableDecomposition> {
    let a = analyze(rho, cfg)?;
    let rep = &a.report;
    if rep.s > 1.0 + cfg.verdict_tol || !rep.feasibility_ok {
        return Err(Error::PreconditionViolation(format!(
            "state is not certified separable (S = {}, feasible = {})",
            rep.s, rep.feasibility_ok
        )));
    }
    let n = rep.n_qubits;
    let rb = &a.rebuild;
    let split = Split::new(rb);
    let mut best = split.build(&split.optimize()?)?;
    if best.mass > 1.0 + 1e-9 {
        return Err(Error::PreconditionViolation(format!(
            "decomposition needs total weight {} > 1",
            best.mass
        )));
    }
    let scale = if best.mass > 1.0 { 1.0 / best.mass } else { 1.0 };
    if scale != 1.0 {
        best.core.iter_mut().for_each(|t| t.weight *= scale);
        best.hidden.iter_mut().for_each(|h| {
            h.2.iter_mut().for_each(|w| *w *= scale);
            h.3 *= scale;
        });
    }
    let frames = &rb.frames;

    let mut mixed = Vec::new();
    let mut pure = Vec::new();
    for term in &best.core {
        let dirs: Vec<[f64; 3]> = term.directions.iter().enumerate().map(|(q, d)| physical(&frames[q], *d)).collect();
        let half = 1usize << (n - 1);
        for signs in 0..1usize << n {
            if signs.count_ones() % 2 == 1 {
                continue;
            }
            pure.push(Member { probability: term.weight / half as f64, kind: MemberKind::Pure { bloch: eigen_bloch(&dirs, signs) } });
        }
        mixed.push(Member { probability: term.weight, kind: MemberKind::Correlated { directions: dirs } });
    }
    for (label, axes, l, mass) in &best.hidden {
        let bloch_axes: Vec<[f64; 3]> = axes
            .iter()
            .enumerate()
            .map(|(q, &ax)| {
                let c = frames[q].column(ax as usize - 1);
                physical(&Matrix3::identity(), [c[0], c[1], c[2]])
            })
            .collect();
        for (j, &w) in l.iter().enumerate() {
            if w > 1e-15 {
                pure.push(Member { probability: w, kind: MemberKind::Pure { bloch: eigen_bloch(&bloch_axes, j) } });
            }
        }
        let weights = l.iter().map(|w| if *w > 1e-15 { w / mass } else { 0.0 }).collect();
        mixed.push(Member { probability: *mass, kind: MemberKind::Diagonal { tuple: label.clone(), axes: bloch_axes, weights } });
    }
    let total: f64 = mixed.iter().map(|m| m.probability).sum();
    let residual = 1.0 - total;
    if residual > 1e-12 {
        for level in [&mut mixed, &mut pure] {
            level.push(Member { probability: residual, kind: MemberKind::MaximallyMixed { n_qubits: n } });
        }
    }
    Ok(SeparableDecomposition { n_qubits: n, s: rep.s, mixed, pure, residual: residual.max(0.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RobustnessVariant {
    /// `max((S_N x^N - 1)/(S_N - 1), 0)` with `x = 1 - q`.
    E,
    /// The same without the clamp.
    EPrime,
    /// `S_N x^N - 1`.
    EDoublePrime,
    /// Negativity across the balanced cut.
    Negativity,
}

impl std::str::FromStr for RobustnessVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E" | "e" => Ok(RobustnessVariant::E),
            "E'" | "E1" | "Eprime" | "e1" => Ok(RobustnessVariant::EPrime),
            "E''" | "E2dbl" | "E2" | "Edoubleprime" | "e2" => Ok(RobustnessVariant::EDoublePrime),
            "negativity" | "neg" => Ok(RobustnessVariant::Negativity),
            _ => invalid_arg(format!("unknown robustness variant '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessCurve {
    pub n_qubits: usize,
    pub variant: RobustnessVariant,
    pub samples: Vec<(f64, f64)>,
}

/// `ln S_N` for `S_N = 2^(N-1) + 1`, stable for large `N`.
fn ln_ghz_s(n: usize) -> f64 {
    (n as f64 - 1.0) * std::f64::consts::LN_2 + (-(n as f64 - 1.0) * std::f64::consts::LN_2).exp().ln_1p()
}

/// `S_N (1 - q)^N` evaluated in log space.
fn scaled_s(n: usize, q: f64) -> f64 {
    if q >= 1.0 {
        return 0.0;
    }
    (ln_ghz_s(n) + n as f64 * (1.0 - q).ln()).exp()
}

pub fn robustness_value(n: usize, variant: RobustnessVariant, q: f64) -> Result<f64> {
    if n < 2 {
        return invalid_arg("robustness curves need N >= 2");
    }
    if !(0.0..=1.0).contains(&q) {
        return invalid_arg(format!("noise strength {q} outside [0,1]"));
    }
    let x = scaled_s(n, q);
    // S_N - 1 = 2^(N-1); divide in log space to stay finite for large N.
    let ratio = |x: f64| (x.ln() - (n as f64 - 1.0) * std::f64::consts::LN_2).exp();
    let eps = (-(n as f64 - 1.0) * std::f64::consts::LN_2).exp();
    Ok(match variant {
        RobustnessVariant::EDoublePrime => x - 1.0,
        RobustnessVariant::EPrime => {
            if x == 0.0 {
                -eps
            } else {
                ratio(x) - eps
            }
        }
        RobustnessVariant::E => {
            if x == 0.0 {
                0.0
            } else {
                (ratio(x) - eps).max(0.0)
            }
        }
        RobustnessVariant::Negativity => {
            if n > 8 {
                return invalid_arg("negativity curves are limited to N <= 8");
            }
            let ghz = density_from_state(&StateVector::ghz(n)?);
            let rho = apply_channel_all(&ghz, &KrausChannel::depolarizing(q)?)?;
            negativity(&rho, &Bipartition::balanced(n)?)?
        }
    })
}

pub fn robustness_curve(n: usize, variant: RobustnessVariant, grid: &[f64]) -> Result<RobustnessCurve> {
    if grid.is_empty() {
        return invalid_arg("empty grid");
    }
    if grid.iter().any(|q| !(0.0..=1.0).contains(q)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid_arg("grid must be strictly increasing inside [0,1]");
    }
    let samples = grid
        .par_iter()
        .map(|&q| robustness_value(n, variant, q).map(|v| (q, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RobustnessCurve { n_qubits: n, variant, samples })
}

/// Noise strength where `E_N` and `E'_N` vanish: `1 - S_N^(-1/N)`.
pub fn robustness_zero(n: usize) -> Result<f64> {
    if n < 2 {
        return invalid_arg("robustness curves need N >= 2");
    }
    Ok(1.0 - (-ln_ghz_s(n) / n as f64).exp())
}

/// Uniform grid of `steps + 1` points on `[0, 1]`.
pub fn uniform_grid(steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![0.0];
    }
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

/// Closed-form `S_N (1-q)^N` next to the pipeline's `S` on depolarized GHZ states.
pub fn robustness_spot_check(n: usize, grid: &[f64], cfg: &CriterionConfig) -> Result<Vec<(f64, f64, f64)>> {
    let ghz = density_from_state(&StateVector::ghz(n)?);
    grid.par_iter()
        .map(|&q| {
            let rho = apply_channel_all(&ghz, &KrausChannel::depolarizing(q)?)?;
            Ok((q, scaled_s(n, q), evaluate(&rho, cfg)?.s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::BellKind;

    fn pure(psi: StateVector) -> DensityMatrix {
        density_from_state(&psi)
    }

    #[test]
    fn ghz3_value() {
        let r = evaluate(&pure(StateVector::ghz(3).unwrap()), &CriterionConfig::default()).unwrap();
        assert!((r.s - 5.0).abs() < 1e-10);
        assert!((r.sum_s - 4.0).abs() < 1e-10);
        assert!((r.sum_s_add - 1.0).abs() < 1e-10);
        assert_eq!(r.verdict, Verdict::Entangled);
    }

    #[test]
    fn w_values() {
        let cfg = CriterionConfig::default();
        let r3 = evaluate(&pure(StateVector::w(3).unwrap()), &cfg).unwrap();
        assert!((r3.s - 19.0 / 3.0).abs() < 1e-10, "{}", r3.s);
        let r4 = evaluate(&pure(StateVector::w(4).unwrap()), &cfg).unwrap();
        assert!((r4.s - 21.0).abs() < 1e-10, "{}", r4.s);
    }

    #[test]
    fn maximally_mixed_is_separable() {
        let r = evaluate(&DensityMatrix::maximally_mixed(3).unwrap(), &CriterionConfig::default()).unwrap();
        assert_eq!(r.s, 0.0);
        assert_eq!(r.verdict, Verdict::Separable);
        assert!(evaluate(&DensityMatrix::maximally_mixed(1).unwrap(), &CriterionConfig::default()).is_err());
    }

    #[test]
    fn two_qubit_measure_examples() {
        let phi = pure(StateVector::bell(BellKind::PhiPlus));
        assert!((two_qubit_measure(&phi).unwrap() - 2.0).abs() < 1e-12);
        let prod = pure(StateVector::product("+1").unwrap());
        assert!(two_qubit_measure(&prod).unwrap() < 1e-12);
        for q in [0.0, 0.5, 2.0 / 3.0, 0.8] {
            let w = DensityMatrix::werner(q).unwrap();
            let want = (2.0 - 3.0 * q).max(0.0);
            assert!((two_qubit_measure(&w).unwrap() - want).abs() < 1e-12);
        }
        assert!(two_qubit_measure(&pure(StateVector::ghz(3).unwrap())).is_err());
    }

    #[test]
    fn thresholds() {
        let cfg = CriterionConfig::default();
        let q = noise_threshold(&pure(StateVector::ghz(3).unwrap()), &cfg).unwrap();
        assert!((q - 0.8).abs() < 1e-8);
        assert!((linear_noise_threshold(5.0) - 0.8).abs() < 1e-15);
        let mixed = DensityMatrix::werner(0.3).unwrap();
        assert!(noise_threshold(&mixed, &cfg).is_err());
    }

    #[test]
    fn ghz_closed_forms() {
        assert_eq!(ghz_s(3).unwrap(), 5.0);
        assert_eq!(ghz_s(2).unwrap(), 3.0);
        assert_eq!(ghz_s(5).unwrap(), 17.0);
        assert!(ghz_s(1).is_err());
        let mut p = [0.0; 8];
        p[0] = 1.0;
        assert!((ghz_diagonal_s(&p).unwrap() - 5.0).abs() < 1e-15);
        assert!(ghz_diagonal_s(&[0.125; 8]).unwrap().abs() < 1e-15);
        p[0] = 0.5;
        p[1] = 0.5;
        let r = ghz_diagonal_report(&p, 1e-9).unwrap();
        assert!((r.s - 1.0).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Separable);
    }

    #[test]
    fn ghz_ensemble_at_threshold() {
        let rho = white_noise_mix(&pure(StateVector::ghz(3).unwrap()), 0.8).unwrap();
        let dec = extract_ensemble(&rho, &CriterionConfig::default()).unwrap();
        assert_eq!(dec.pure.len(), 18);
        assert_eq!(dec.mixed.len(), 5);
        let mut probs: Vec<f64> = dec.pure.iter().map(|m| m.probability).collect();
        probs.sort_by(|a, b| a.total_cmp(b));
        assert!(probs[..16].iter().all(|p| (p - 0.05).abs() < 1e-12));
        assert!(probs[16..].iter().all(|p| (p - 0.1).abs() < 1e-12));
        assert!(dec.max_residual(&rho, Level::Pure).unwrap() < 1e-12);
        assert!(dec.max_residual(&rho, Level::Mixed).unwrap() < 1e-12);
        let e = dec.ensemble(Level::Pure).unwrap();
        assert!(crate::qcore::mix(&e).unwrap().max_abs_diff(&rho) < 1e-12);
    }

    #[test]
    fn ensemble_of_maximally_mixed() {
        let dec = extract_ensemble(&DensityMatrix::maximally_mixed(2).unwrap(), &CriterionConfig::default()).unwrap();
        assert_eq!(dec.pure.len(), 1);
        assert_eq!(dec.pure[0].probability, 1.0);
        assert_eq!(dec.pure[0].kind, MemberKind::MaximallyMixed { n_qubits: 2 });
    }

    #[test]
    fn ensemble_rejects_entangled() {
        let r = extract_ensemble(&pure(StateVector::ghz(3).unwrap()), &CriterionConfig::default());
        assert!(matches!(r, Err(Error::PreconditionViolation(_))));
    }

    #[test]
    fn robustness_closed_forms() {
        for n in [2, 3, 4, 5, 40, 400] {
            assert!((robustness_value(n, RobustnessVariant::E, 0.0).unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(robustness_value(3, RobustnessVariant::EDoublePrime, 1.0).unwrap(), -1.0);
        let z = robustness_zero(4).unwrap();
        assert!((z - (1.0 - 3f64.powf(-0.5))).abs() < 1e-12);
        assert!(robustness_value(4, RobustnessVariant::EPrime, z).unwrap().abs() < 1e-12);
        assert!(robustness_curve(3, RobustnessVariant::E, &[0.5, 0.2]).is_err());
        assert!(robustness_curve(3, RobustnessVariant::E, &[0.5, 1.2]).is_err());
        assert!(robustness_value(1, RobustnessVariant::E, 0.1).is_err());
    }
}
