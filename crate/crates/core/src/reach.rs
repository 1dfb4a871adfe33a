//! Back-end selection shared by error computation and verification.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array1, Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interval::{reach_box, reach_box_split, split_cells, SplitConfig, DEFAULT_CELL_CAP};
use crate::lp::feasible_point;
use crate::network::{IntervalBox, Network};
use crate::norm::NormKind;
use crate::star::{box_to_star, reach_stars, star_sup_norm, Star, DEFAULT_STAR_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Interval,
    /// Interval propagation on a `k^n` grid of input cells.
    IntervalSplit(u32),
    ExactStar,
}

impl Method {
    pub fn is_exact(self) -> bool {
        matches!(self, Method::ExactStar)
    }

    /// Grid used for cell-center sampling.
    pub fn cells_per_dim(self) -> u32 {
        match self {
            Method::IntervalSplit(k) => k,
            _ => 1,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Interval => write!(f, "interval"),
            Method::IntervalSplit(k) => write!(f, "split({k})"),
            Method::ExactStar => write!(f, "exact"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `interval`, `exact`, `split` (k = 2) and `split:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "interval" => Ok(Method::Interval),
            "exact" | "star" => Ok(Method::ExactStar),
            "split" => Ok(Method::IntervalSplit(2)),
            other => match other.strip_prefix("split:") {
                Some(k) => k
                    .parse::<u32>()
                    .ok()
                    .filter(|k| *k >= 1)
                    .map(Method::IntervalSplit)
                    .ok_or_else(|| Error::InvalidArgument(format!("bad split count `{k}`"))),
                None => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
            },
        }
    }
}

/// Resource caps for the back-ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReachOptions {
    pub cell_cap: u64,
    pub star_cap: usize,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions {
            cell_cap: DEFAULT_CELL_CAP,
            star_cap: DEFAULT_STAR_CAP,
        }
    }
}

/// An over-approximation (boxes) or exact representation (stars) of a
/// network's output set.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum OutputSet {
    Boxes(Vec<IntervalBox>),
    /// Stars share their predicate variables with `input`.
    Stars { stars: Vec<Star>, input: Star },
}

impl OutputSet {
    pub fn len(&self) -> usize {
        match self {
            OutputSet::Boxes(b) => b.len(),
            OutputSet::Stars { stars, .. } => stars.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest norm over the set.
    pub fn sup_norm(&self, norm: NormKind) -> Result<f64> {
        match self {
            OutputSet::Boxes(boxes) => Ok(boxes
                .iter()
                .map(|b| {
                    norm.sup_over_box(
                        b.lower().as_slice().expect("contiguous"),
                        b.upper().as_slice().expect("contiguous"),
                    )
                })
                .fold(0.0, f64::max)),
            OutputSet::Stars { stars, .. } => star_sup_norm(stars, norm),
        }
    }

    /// Whether the set may meet `{y : h y <= g}`. For stars a hit also
    /// yields the input point (in the input box) that realizes it.
    pub fn meets(&self, h: &Array2<f64>, g: &Array1<f64>) -> Result<Meet> {
        match self {
            OutputSet::Boxes(boxes) => {
                for (i, b) in boxes.iter().enumerate() {
                    if box_meets_polytope(b, h, g)? {
                        return Ok(Meet::Possible { cell: Some(i) });
                    }
                }
                Ok(Meet::Disjoint)
            }
            OutputSet::Stars { stars, input } => {
                for s in stars {
                    if let Some(alpha) = s.intersect_point(h, g)? {
                        return Ok(Meet::Exact {
                            input: input.point_at(&alpha),
                        });
                    }
                }
                Ok(Meet::Disjoint)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Meet {
    Disjoint,
    Possible { cell: Option<usize> },
    Exact { input: Vec<f64> },
}

/// LP feasibility of `{y : h y <= g, lower <= y <= upper}`.
pub fn box_meets_polytope(b: &IntervalBox, h: &Array2<f64>, g: &Array1<f64>) -> Result<bool> {
    let n = b.dim();
    if h.ncols() != n {
        return Err(Error::shape("polytope columns", n, h.ncols()));
    }
    if h.nrows() != g.len() {
        return Err(Error::shape("polytope rows", h.nrows(), g.len()));
    }
    let eye = Array2::<f64>::eye(n);
    let a = concatenate![Axis(0), *h, eye, -&eye];
    let d = concatenate![Axis(0), *g, *b.upper(), -b.lower()];
    Ok(feasible_point(&a, &d)?.is_some())
}

/// Output set of `net` over `input` with the chosen back-end.
pub fn reach(
    net: &Network,
    input: &IntervalBox,
    method: Method,
    opts: &ReachOptions,
) -> Result<OutputSet> {
    match method {
        Method::Interval => Ok(OutputSet::Boxes(vec![reach_box(net, input)?])),
        Method::IntervalSplit(k) => {
            let cfg = SplitConfig::new(k)?.with_cap(opts.cell_cap);
            Ok(OutputSet::Boxes(reach_box_split(net, input, &cfg)?))
        }
        Method::ExactStar => {
            if input.dim() != net.input_dim() {
                return Err(Error::shape("reach input", net.input_dim(), input.dim()));
            }
            let start = box_to_star(input);
            let stars = reach_stars(net, &start, opts.star_cap)?;
            Ok(OutputSet::Stars {
                stars,
                input: start,
            })
        }
    }
}

/// Centers of the `k^n` grid cells over `input`.
pub fn cell_centers(input: &IntervalBox, k: u32, cap: u64) -> Result<Vec<Vec<f64>>> {
    let cfg = SplitConfig::new(k)?.with_cap(cap);
    Ok(split_cells(input, &cfg)?
        .par_iter()
        .map(|c| c.midpoint().to_vec())
        .collect())
}
