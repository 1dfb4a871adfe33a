//! Reachability-based safety verification against linear unsafe regions,
//! directly or through a compressed network with an inflated unsafe region.

use std::fmt;
use std::io;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::bisim::{bisim_error_upper, sample_point};
use crate::error::{Error, Result};
use crate::network::{IntervalBox, Network};
use crate::norm::NormKind;
use crate::reach::{cell_centers, reach, Meet, Method, ReachOptions};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: u64 = 10_000;

/// `{y : a y <= d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub a: Array2<f64>,
    pub d: Array1<f64>,
}

impl Polytope {
    pub fn new(a: Array2<f64>, d: Array1<f64>) -> Result<Self> {
        if a.nrows() == 0 {
            return Err(Error::InvalidArgument("unsafe polytope has no constraints".into()));
        }
        if a.nrows() != d.len() {
            return Err(Error::shape("polytope rows", a.nrows(), d.len()));
        }
        Ok(Polytope { a, d })
    }

    /// Exact membership, no tolerance.
    pub fn contains(&self, y: &[f64]) -> bool {
        self.a.rows().into_iter().zip(self.d.iter()).all(|(row, &b)| {
            let lhs: f64 = row.iter().zip(y).map(|(a, y)| a * y).sum();
            lhs <= b
        })
    }
}

/// Unsafe output region as a union of polytopes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpec {
    polytopes: Vec<Polytope>,
}

impl LinearSpec {
    pub fn new(polytopes: Vec<Polytope>) -> Result<Self> {
        if let Some(first) = polytopes.first() {
            let n = first.a.ncols();
            for p in &polytopes[1..] {
                if p.a.ncols() != n {
                    return Err(Error::shape("unsafe polytope columns", n, p.a.ncols()));
                }
            }
        }
        Ok(LinearSpec { polytopes })
    }

    /// Single half-space `a · y <= b`.
    pub fn halfspace(a: &[f64], b: f64) -> Result<Self> {
        let row = Array2::from_shape_vec((1, a.len()), a.to_vec()).expect("1 x n");
        LinearSpec::new(vec![Polytope::new(row, Array1::from(vec![b]))?])
    }

    pub fn polytopes(&self) -> &[Polytope] {
        &self.polytopes
    }

    /// Output width the constraints refer to; `None` for an empty spec.
    pub fn output_dim(&self) -> Option<usize> {
        self.polytopes.first().map(|p| p.a.ncols())
    }

    pub fn is_unsafe(&self, y: &[f64]) -> bool {
        self.polytopes.iter().any(|p| p.contains(y))
    }

    fn check_dim(&self, net: &Network) -> Result<()> {
        match self.output_dim() {
            Some(n) if n != net.output_dim() => {
                Err(Error::shape("unsafe region vs network output", net.output_dim(), n))
            }
            _ => Ok(()),
        }
    }
}

/// Enlarges every half-space `a·y <= b` to `a·y <= b + eps·||a||_*`,
/// which contains the Minkowski sum of the region with the `eps`-ball.
pub fn inflate_spec(spec: &LinearSpec, eps: f64, norm: NormKind) -> Result<LinearSpec> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!("inflation must be >= 0, got {eps}")));
    }
    if eps == 0.0 {
        return Ok(spec.clone());
    }
    let polytopes = spec
        .polytopes
        .iter()
        .map(|p| {
            let mut d = p.d.clone();
            for (i, row) in p.a.rows().into_iter().enumerate() {
                d[i] += eps * norm.dual_of(row.as_slice().expect("row-major"));
            }
            Polytope { a: p.a.clone(), d }
        })
        .collect();
    Ok(LinearSpec { polytopes })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Safe,
    Unsafe { witness: Vec<f64> },
    Uncertain,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Safe => "Safe",
            Verdict::Unsafe { .. } => "Unsafe",
            Verdict::Uncertain => "Uncertain",
        }
    }

    pub fn is_safe(&self) -> bool {
        matches!(self, Verdict::Safe)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub reach: ReachOptions,
    /// Random points tried in the counterexample search.
    pub samples: u64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            reach: ReachOptions::default(),
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

/// Safe if the output set provably misses the unsafe region, Unsafe with
/// a witness input if one is found, Uncertain otherwise.
pub fn verify(
    net: &Network,
    input: &IntervalBox,
    spec: &LinearSpec,
    method: Method,
    opts: &VerifyOptions,
) -> Result<Verdict> {
    spec.check_dim(net)?;
    if input.dim() != net.input_dim() {
        return Err(Error::shape("verify input", net.input_dim(), input.dim()));
    }
    let out = reach(net, input, method, &opts.reach)?;
    let mut all_disjoint = true;
    for p in spec.polytopes() {
        match out.meets(&p.a, &p.d)? {
            Meet::Disjoint => {}
            Meet::Possible { .. } => all_disjoint = false,
            Meet::Exact { input: x } => {
                all_disjoint = false;
                if let Some(w) = confirm_witness(net, spec, input, x)? {
                    return Ok(Verdict::Unsafe { witness: w });
                }
            }
        }
    }
    if all_disjoint {
        return Ok(Verdict::Safe);
    }
    match search_counterexample(net, spec, input, method, opts)? {
        Some(witness) => Ok(Verdict::Unsafe { witness }),
        None => Ok(Verdict::Uncertain),
    }
}

fn confirm_witness(
    net: &Network,
    spec: &LinearSpec,
    input: &IntervalBox,
    x: Vec<f64>,
) -> Result<Option<Vec<f64>>> {
    if !input.contains(&x) {
        return Ok(None);
    }
    let y = net.eval_slice(&x)?;
    Ok(spec.is_unsafe(&y).then_some(x))
}

/// Grid cell centers, then seeded uniform samples; first hit wins.
pub fn search_counterexample(
    net: &Network,
    spec: &LinearSpec,
    input: &IntervalBox,
    method: Method,
    opts: &VerifyOptions,
) -> Result<Option<Vec<f64>>> {
    let centers = cell_centers(input, method.cells_per_dim(), opts.reach.cell_cap)?;
    let hit = |x: &Vec<f64>| net.eval_slice(x).is_ok_and(|y| spec.is_unsafe(&y));
    if let Some(x) = centers.par_iter().find_first(|x| hit(x)) {
        return Ok(Some(x.clone()));
    }
    Ok((0..opts.samples)
        .into_par_iter()
        .map(|i| sample_point(input, opts.seed, i))
        .find_first(|x| hit(x)))
}

/// One row of a compressed-verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct BisimReport {
    pub network_id: String,
    pub epsilon: f64,
    pub time_large_seconds: Option<f64>,
    pub time_small_seconds: f64,
    pub verdict_large: Option<Verdict>,
    pub verdict_small: Verdict,
    /// Time spent computing `epsilon`; not part of the CSV.
    pub epsilon_time_seconds: f64,
}

/// Verifies `large` through `small`: computes the discrepancy bound,
/// inflates the unsafe region by it and verifies `small` against that.
/// Only Safe lifts to `large`; every other outcome is Uncertain.
#[allow(clippy::too_many_arguments)]
pub fn verify_via_compressed(
    id: &str,
    large: &Network,
    small: &Network,
    input: &IntervalBox,
    spec: &LinearSpec,
    method: Method,
    norm: NormKind,
    opts: &VerifyOptions,
    also_large: bool,
) -> Result<BisimReport> {
    spec.check_dim(large)?;
    let bound = bisim_error_upper(large, small, input, method, norm, &opts.reach)?;
    let inflated = inflate_spec(spec, bound.epsilon_upper, norm)?;

    let started = Instant::now();
    let small_verdict = verify(small, input, &inflated, method, opts)?;
    let time_small_seconds = started.elapsed().as_secs_f64();
    let verdict_small = if small_verdict.is_safe() {
        Verdict::Safe
    } else {
        Verdict::Uncertain
    };

    let (verdict_large, time_large_seconds) = if also_large {
        let started = Instant::now();
        let v = verify(large, input, spec, method, opts)?;
        (Some(v), Some(started.elapsed().as_secs_f64()))
    } else {
        (None, None)
    };

    Ok(BisimReport {
        network_id: id.to_string(),
        epsilon: bound.epsilon_upper,
        time_large_seconds,
        time_small_seconds,
        verdict_large,
        verdict_small,
        epsilon_time_seconds: bound.wall_time_seconds,
    })
}

pub const CSV_HEADER: [&str; 6] = [
    "id",
    "epsilon",
    "time_large_s",
    "time_small_s",
    "verdict_large",
    "verdict_small",
];

/// Writes the header and one record per report. Absent optionals are
/// empty fields; times have 5 decimals.
pub fn write_reports_csv<W: io::Write>(out: W, reports: &[BisimReport]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.network_id.clone(),
            r.epsilon.to_string(),
            r.time_large_seconds.map(|t| format!("{t:.5}")).unwrap_or_default(),
            format!("{:.5}", r.time_small_seconds),
            r.verdict_large.as_ref().map(|v| v.label().to_string()).unwrap_or_default(),
            r.verdict_small.label().to_string(),
        ])?;
    }
    w.flush()
}

/// Fixed-width table with columns `ID  eps  T_L(s)  T_S(s)  V_L  V_S`.
pub fn render_table(reports: &[BisimReport]) -> String {
    let mut s = format!(
        "{:<12} {:>12} {:>12} {:>12} {:>10} {:>10}\n",
        "ID", "eps", "T_L (s)", "T_S (s)", "V_L", "V_S"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<12} {:>12.4} {:>12} {:>12.5} {:>10} {:>10}\n",
            r.network_id,
            r.epsilon,
            r.time_large_seconds.map(|t| format!("{t:.5}")).unwrap_or_else(|| "-".into()),
            r.time_small_seconds,
            r.verdict_large.as_ref().map_or("-", Verdict::label),
            r.verdict_small.label(),
        ));
    }
    s
}
