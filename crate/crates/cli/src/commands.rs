//! Subcommands. Every command writes to the given sinks and returns its exit code.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use septensor::baselines::{concurrence, negativity, ppt_noise_threshold, ppt_verdict, Bipartition};
use septensor::corrtensor::{correlation_tensor, format_r_slices, format_t_slices};
use septensor::criterion::{
    analyze, evaluate, extract_ensemble, ghz_diagonal_report, noise_threshold, robustness_curve, robustness_value,
    robustness_zero, two_qubit_measure, uniform_grid, CriterionConfig, Level, RobustnessVariant,
    SeparableDecomposition, Verdict,
};
use septensor::qcore::{white_noise_mix, DensityMatrix};
use septensor::rebuild::Frame;

use crate::config::RunConfig;
use crate::spec::parse_state;
use crate::{format_g, usage, CliResult, EXIT_ENTANGLED, EXIT_OK};

/// Largest register for which `analyze` also bisects the noise threshold.
const THRESHOLD_MAX_QUBITS: usize = 6;
/// Largest register for the negativity column and curve.
const NEGATIVITY_MAX_QUBITS: usize = 8;
const CROSSING_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "septensor", version, about = "Correlation-tensor separability analysis for multi-qubit states")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Rebuild in the computational frame instead of the HOSVD frame.
    #[arg(long, global = true)]
    pub native_frame: bool,
    /// Count unabsorbed lower-weight coefficients towards S.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Scan every mode-fixing order (up to four qubits).
    #[arg(long, global = true)]
    pub all_orders: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute S and the verdict for one state.
    Analyze {
        spec: String,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        show_tensor: bool,
    },
    /// CSV of S and baselines along a white-noise grid.
    Sweep {
        spec: String,
        qmin: f64,
        qmax: f64,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Explicit product-state ensemble of a separable state.
    Decompose {
        spec: String,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        verify: bool,
        /// List correlated terms instead of pure product states.
        #[arg(long)]
        mixed: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// CSV of a depolarized-GHZ robustness curve.
    Robustness {
        n: usize,
        /// One of E, Eprime, E2dbl, negativity.
        variant: String,
        #[arg(long)]
        steps: Option<usize>,
        /// Print only the zero crossing.
        #[arg(long)]
        find_zero: bool,
    },
    /// Closed form for a mixture of the eight GHZ-type basis states.
    Ghzdiag {
        #[arg(num_args = 8, allow_negative_numbers = true)]
        p: Vec<f64>,
        #[arg(long)]
        check: bool,
    },
    /// Criterion next to PPT, negativity and concurrence.
    Compare {
        spec: String,
        #[arg(long)]
        noise: Option<f64>,
    },
}

fn run_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.native_frame {
        cfg.frame = Frame::Native;
    }
    cfg.strict_nonglobal |= cli.strict;
    cfg.all_orders |= cli.all_orders;
    Ok(cfg)
}

fn verdict_code(v: Verdict) -> i32 {
    if v.is_entangled() {
        EXIT_ENTANGLED
    } else {
        EXIT_OK
    }
}

fn load(spec: &str, noise: Option<f64>, cfg: &RunConfig) -> CliResult<DensityMatrix> {
    let rho = parse_state(spec, cfg.seed)?;
    Ok(match noise {
        Some(q) => white_noise_mix(&rho, q)?,
        None => rho,
    })
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let cfg = run_config(cli)?;
    match &cli.command {
        Command::Analyze { spec, noise, json, show_tensor } => cmd_analyze(spec, *noise, *json, *show_tensor, &cfg, out),
        Command::Sweep { spec, qmin, qmax, steps } => cmd_sweep(spec, *qmin, *qmax, steps.unwrap_or(cfg.steps), &cfg, out, err),
        Command::Decompose { spec, noise, verify, mixed, output } => {
            let output = output.clone().or_else(|| cfg.output.clone());
            cmd_decompose(spec, *noise, *verify, *mixed, output, &cfg, out, err)
        }
        Command::Robustness { n, variant, steps, find_zero } => {
            cmd_robustness(*n, variant, steps.unwrap_or(100), *find_zero, out)
        }
        Command::Ghzdiag { p, check } => cmd_ghzdiag(p, *check, &cfg, out),
        Command::Compare { spec, noise } => cmd_compare(spec, *noise, &cfg, out),
    }
}

fn cmd_analyze(
    spec: &str,
    noise: Option<f64>,
    json: bool,
    show_tensor: bool,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let rho = load(spec, noise, cfg)?;
    let ccfg = cfg.criterion();
    let analysis = analyze(&rho, &ccfg)?;
    let mut report = analysis.report;
    if noise.is_none() && rho.n_qubits() <= THRESHOLD_MAX_QUBITS && (rho.purity() - 1.0).abs() <= 1e-9 {
        report.noise_threshold = Some(noise_threshold(&rho, &ccfg)?);
    }
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        writeln!(out, "state: {spec}")?;
        if let Some(q) = noise {
            writeln!(out, "noise: {}", format_g(q))?;
        }
        writeln!(out, "qubits: {}", report.n_qubits)?;
        writeln!(out, "S = {}", format_g(report.s))?;
        writeln!(out, "sum_s = {}", format_g(report.sum_s))?;
        writeln!(out, "sum_s_add = {}", format_g(report.sum_s_add))?;
        let tag = if report.boundary {
            " (boundary)"
        } else if report.inconclusive {
            " (inconclusive: feasibility check failed)"
        } else {
            ""
        };
        writeln!(out, "verdict: {}{tag}", report.verdict)?;
        if let Some(q) = report.noise_threshold {
            writeln!(out, "noise threshold: {}", format_g(q))?;
        }
        let d = &report.diagnostics;
        writeln!(out, "rebuild: {} strategy, {} allocations", d.strategy, d.allocations.len())?;
        for a in &d.allocations {
            let strings: Vec<&str> = a.strings.iter().map(|(s, _)| s.as_str()).collect();
            writeln!(
                out,
                "  tuple {}: t_hat = {}, t_add = {}, strings {}",
                a.tuple,
                format_g(a.t_hat),
                format_g(a.t_add),
                strings.join(" ")
            )?;
        }
        if !d.unconsumed.is_empty() {
            writeln!(out, "unconsumed: {} strings, sum |t| = {}", d.unconsumed.len(), format_g(d.unconsumed_abs_sum))?;
        }
        if let Some(b) = &d.better_order {
            writeln!(out, "better mode order {:?}: sum_s = {}", b.order, format_g(b.sum_s))?;
        }
    }
    if show_tensor {
        let r = correlation_tensor(&rho)?;
        writeln!(out, "{}", format_r_slices(&r))?;
        writeln!(out, "{}", format_t_slices("T", r.global().tensor()))?;
        writeln!(out, "{}", format_t_slices("T_add", analysis.rebuild.t_add.tensor()))?;
    }
    Ok(verdict_code(report.verdict))
}

fn grid(qmin: f64, qmax: f64, steps: usize) -> CliResult<Vec<f64>> {
    if !(0.0..=1.0).contains(&qmin) || !(0.0..=1.0).contains(&qmax) || qmin > qmax {
        return usage(format!("noise range [{qmin}, {qmax}] must satisfy 0 <= qmin <= qmax <= 1"));
    }
    if steps == 0 {
        return usage("steps must be at least 1");
    }
    if qmin == qmax {
        return Ok(vec![qmin]);
    }
    Ok((0..=steps).map(|k| qmin + (qmax - qmin) * k as f64 / steps as f64).collect())
}

struct SweepRow {
    q: f64,
    s: f64,
    verdict: Verdict,
    negativity: Option<f64>,
    concurrence: Option<f64>,
}

fn sweep_row(base: &DensityMatrix, q: f64, ccfg: &CriterionConfig) -> CliResult<SweepRow> {
    let rho = white_noise_mix(base, q)?;
    let rep = evaluate(&rho, ccfg)?;
    let n = rho.n_qubits();
    let negativity = if n <= NEGATIVITY_MAX_QUBITS { Some(negativity(&rho, &Bipartition::balanced(n)?)?) } else { None };
    let concurrence = if n == 2 { Some(concurrence(&rho)?) } else { None };
    Ok(SweepRow { q, s: rep.s, verdict: rep.verdict, negativity, concurrence })
}

/// Bisects `S(q) = 1 + tol` between two grid points with different verdicts.
fn refine_crossing(base: &DensityMatrix, mut lo: f64, mut hi: f64, ccfg: &CriterionConfig) -> CliResult<f64> {
    let entangled_at = |q: f64| -> CliResult<bool> { Ok(evaluate(&white_noise_mix(base, q)?, ccfg)?.verdict.is_entangled()) };
    let lo_ent = entangled_at(lo)?;
    while hi - lo > CROSSING_TOL {
        let mid = 0.5 * (lo + hi);
        if entangled_at(mid)? == lo_ent {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn opt(v: Option<f64>) -> String {
    v.map(format_g).unwrap_or_default()
}

fn cmd_sweep(
    spec: &str,
    qmin: f64,
    qmax: f64,
    steps: usize,
    cfg: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<i32> {
    let qs = grid(qmin, qmax, steps)?;
    let base = parse_state(spec, cfg.seed)?;
    let ccfg = cfg.criterion();
    let rows = qs.par_iter().map(|&q| sweep_row(&base, q, &ccfg)).collect::<CliResult<Vec<_>>>()?;
    writeln!(out, "q,S,verdict,negativity,concurrence")?;
    for r in &rows {
        writeln!(out, "{},{},{},{},{}", format_g(r.q), format_g(r.s), r.verdict, opt(r.negativity), opt(r.concurrence))?;
    }
    match rows.windows(2).find(|w| w[0].verdict != w[1].verdict) {
        Some(w) => {
            let q = refine_crossing(&base, w[0].q, w[1].q, &ccfg)?;
            writeln!(err, "crossing: q = {} ({} -> {})", format_g(q), w[0].verdict, w[1].verdict)?;
        }
        None => writeln!(err, "crossing: none in range")?,
    }
    Ok(EXIT_OK)
}

/// Loads a state, adds noise and extracts its ensemble.
pub fn decompose_state(
    spec: &str,
    noise: Option<f64>,
    cfg: &RunConfig,
) -> CliResult<(DensityMatrix, Result<SeparableDecomposition, Verdict>)> {
    let rho = load(spec, noise, cfg)?;
    let ccfg = cfg.criterion();
    let rep = evaluate(&rho, &ccfg)?;
    if rep.verdict.is_entangled() {
        return Ok((rho, Err(rep.verdict)));
    }
    let dec = extract_ensemble(&rho, &ccfg)?;
    Ok((rho, Ok(dec)))
}

#[allow(clippy::too_many_arguments)]
fn cmd_decompose(
    spec: &str,
    noise: Option<f64>,
    verify: bool,
    mixed: bool,
    output: Option<PathBuf>,
    cfg: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<i32> {
    let (rho, dec) = decompose_state(spec, noise, cfg)?;
    let dec = match dec {
        Ok(d) => d,
        Err(_) => {
            writeln!(err, "state is entangled; no separable ensemble exists")?;
            return Ok(EXIT_ENTANGLED);
        }
    };
    let level = if mixed { Level::Mixed } else { Level::Pure };
    let members = dec.members(level);
    writeln!(out, "S = {}", format_g(dec.s))?;
    let products = members.iter().filter(|m| !matches!(m.kind, septensor::criterion::MemberKind::MaximallyMixed { .. })).count();
    let kind = if mixed { "mixed" } else { "pure product" };
    if dec.residual > 1e-12 {
        writeln!(out, "members: {products} {kind} + maximally mixed residual {}", format_g(dec.residual))?;
    } else {
        writeln!(out, "members: {products} {kind}")?;
    }
    writeln!(out, "probability\tmember")?;
    for m in members {
        writeln!(out, "{}\t{}", format_g(m.probability), m.label())?;
    }
    if verify {
        writeln!(out, "max residual: {}", format_g(dec.max_residual(&rho, level)?))?;
    }
    if let Some(path) = output {
        std::fs::write(&path, serde_json::to_string_pretty(&dec)?)?;
        writeln!(err, "wrote {}", path.display())?;
    }
    Ok(EXIT_OK)
}

/// First zero of a curve when it starts positive, refined by bisection.
fn curve_zero(n: usize, variant: RobustnessVariant) -> CliResult<f64> {
    match variant {
        RobustnessVariant::Negativity => {
            let (mut lo, mut hi) = (0.0, 1.0);
            while hi - lo > CROSSING_TOL {
                let mid = 0.5 * (lo + hi);
                if robustness_value(n, variant, mid)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
        _ => Ok(robustness_zero(n)?),
    }
}

fn cmd_robustness(n: usize, variant: &str, steps: usize, find_zero: bool, out: &mut dyn Write) -> CliResult<i32> {
    let variant: RobustnessVariant = variant.parse()?;
    if n < 2 {
        return usage("robustness curves need N >= 2");
    }
    if steps == 0 {
        return usage("steps must be at least 1");
    }
    let zero = curve_zero(n, variant)?;
    if find_zero {
        writeln!(out, "{}", format_g(zero))?;
        return Ok(EXIT_OK);
    }
    let curve = robustness_curve(n, variant, &uniform_grid(steps))?;
    writeln!(out, "q,value,zero_crossing")?;
    for (q, v) in &curve.samples {
        writeln!(out, "{},{},{}", format_g(*q), format_g(*v), format_g(zero))?;
    }
    Ok(EXIT_OK)
}

fn cmd_ghzdiag(p: &[f64], check: bool, cfg: &RunConfig, out: &mut dyn Write) -> CliResult<i32> {
    let r = ghz_diagonal_report(p, cfg.verdict_tol)?;
    writeln!(out, "t111 = {}", format_g(r.t111))?;
    writeln!(out, "t122 = {}", format_g(r.t122))?;
    writeln!(out, "t212 = {}", format_g(r.t212))?;
    writeln!(out, "t221 = {}", format_g(r.t221))?;
    writeln!(out, "t_add,333 = {}", format_g(r.t_add_333))?;
    writeln!(out, "S = {}", format_g(r.s))?;
    let boundary = if (r.s - 1.0).abs() <= cfg.verdict_tol { " (boundary)" } else { "" };
    writeln!(out, "verdict: {}{boundary}", r.verdict)?;
    if check {
        let rho = DensityMatrix::ghz_diagonal(p)?;
        let pipeline = evaluate(&rho, &cfg.criterion())?.s;
        let diff = (pipeline - r.s).abs();
        writeln!(out, "pipeline S = {} (difference {})", format_g(pipeline), format_g(diff))?;
        if diff > 1e-8 {
            return usage(format!("closed form and pipeline differ by {diff}"));
        }
    }
    Ok(verdict_code(r.verdict))
}

fn cmd_compare(spec: &str, noise: Option<f64>, cfg: &RunConfig, out: &mut dyn Write) -> CliResult<i32> {
    let rho = load(spec, noise, cfg)?;
    let n = rho.n_qubits();
    let rep = evaluate(&rho, &cfg.criterion())?;
    writeln!(out, "criterion: S = {}, {}", format_g(rep.s), rep.verdict)?;
    for cut in Bipartition::all(n) {
        let v = ppt_verdict(&rho, &cut)?;
        writeln!(
            out,
            "PPT {}: min eigenvalue {}, {}, noise threshold {}",
            v.cut,
            format_g(v.min_eigenvalue),
            if v.ppt { "ppt" } else { "npt" },
            format_g(ppt_noise_threshold(&rho, &cut)?)
        )?;
    }
    if n <= NEGATIVITY_MAX_QUBITS {
        let cut = Bipartition::balanced(n)?;
        writeln!(out, "negativity {}: {}", cut.label(), format_g(negativity(&rho, &cut)?))?;
    }
    if n == 2 {
        writeln!(out, "concurrence: {}", format_g(concurrence(&rho)?))?;
        writeln!(out, "two-qubit measure: {}", format_g(two_qubit_measure(&rho)?))?;
    }
    Ok(verdict_code(rep.verdict))
}
