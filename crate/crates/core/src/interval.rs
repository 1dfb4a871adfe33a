//! Interval bound propagation with optional uniform input splitting.
//!
//! Plain `f64` arithmetic without outward rounding, so containment holds
//! up to floating-point error.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{Activation, IntervalBox, Network};

pub const DEFAULT_CELL_CAP: u64 = 1_000_000;

/// Uniform grid refinement: every input dimension is cut into
/// `cells_per_dim` equal pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitConfig {
    pub cells_per_dim: u32,
    pub cell_cap: u64,
}

impl SplitConfig {
    pub fn new(cells_per_dim: u32) -> Result<Self> {
        if cells_per_dim == 0 {
            return Err(Error::InvalidArgument("cells per dimension must be >= 1".into()));
        }
        Ok(SplitConfig {
            cells_per_dim,
            cell_cap: DEFAULT_CELL_CAP,
        })
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cell_cap = cap;
        self
    }

    /// `k^dim`, or a resource error when it exceeds the cap.
    pub fn cell_count(&self, dim: usize) -> Result<u64> {
        let k = u64::from(self.cells_per_dim);
        let mut total: u64 = 1;
        for _ in 0..dim {
            total = match total.checked_mul(k) {
                Some(t) if t <= self.cell_cap => t,
                _ => {
                    return Err(Error::Resource(format!(
                        "{k}^{dim} grid cells exceed the cap of {}",
                        self.cell_cap
                    )))
                }
            };
        }
        Ok(total)
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            cells_per_dim: 1,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }
}

/// Bounds of `{W x + b : x in input}`.
pub fn affine_bounds(
    weights: &Array2<f64>,
    bias: &Array1<f64>,
    input: &IntervalBox,
) -> Result<IntervalBox> {
    if weights.ncols() != input.dim() {
        return Err(Error::shape("affine bounds", weights.ncols(), input.dim()));
    }
    if weights.nrows() != bias.len() {
        return Err(Error::shape("affine bias", weights.nrows(), bias.len()));
    }
    let (lo_in, hi_in) = (input.lower(), input.upper());
    let mut lower = bias.clone();
    let mut upper = bias.clone();
    for (i, row) in weights.rows().into_iter().enumerate() {
        let (mut lo, mut hi) = (0.0, 0.0);
        for (j, &w) in row.iter().enumerate() {
            if w >= 0.0 {
                lo += w * lo_in[j];
                hi += w * hi_in[j];
            } else {
                lo += w * hi_in[j];
                hi += w * lo_in[j];
            }
        }
        lower[i] += lo;
        upper[i] += hi;
    }
    Ok(IntervalBox::from_arrays(lower, upper))
}

pub fn act_bounds(acts: &[Activation], input: &IntervalBox) -> Result<IntervalBox> {
    if acts.len() != input.dim() {
        return Err(Error::shape("activation bounds", acts.len(), input.dim()));
    }
    let mut lower = input.lower().clone();
    let mut upper = input.upper().clone();
    for (i, act) in acts.iter().enumerate() {
        lower[i] = act.apply(lower[i]);
        upper[i] = act.apply(upper[i]);
    }
    Ok(IntervalBox::from_arrays(lower, upper))
}

/// Output box containing the image of `input` under `net`.
pub fn reach_box(net: &Network, input: &IntervalBox) -> Result<IntervalBox> {
    if input.dim() != net.input_dim() {
        return Err(Error::shape("reach_box input", net.input_dim(), input.dim()));
    }
    net.layers().iter().try_fold(input.clone(), |cur, layer| {
        let pre = affine_bounds(&layer.weights, &layer.bias, &cur)?;
        act_bounds(&layer.activations, &pre)
    })
}

/// Cell `index` (row-major over dimensions, last dimension fastest) of
/// the `k^n` grid over `input`.
pub fn grid_cell(input: &IntervalBox, k: u32, mut index: u64) -> IntervalBox {
    let n = input.dim();
    let k64 = u64::from(k);
    let kf = f64::from(k);
    let mut lower = Array1::zeros(n);
    let mut upper = Array1::zeros(n);
    for d in (0..n).rev() {
        let j = (index % k64) as u32;
        index /= k64;
        let (lo, hi) = (input.lower()[d], input.upper()[d]);
        let at = |t: u32| {
            if t == 0 {
                lo
            } else if t == k {
                hi
            } else {
                lo + (hi - lo) * f64::from(t) / kf
            }
        };
        lower[d] = at(j);
        upper[d] = at(j + 1);
    }
    IntervalBox::from_arrays(lower, upper)
}

/// All grid cells of the split, in index order.
pub fn split_cells(input: &IntervalBox, cfg: &SplitConfig) -> Result<Vec<IntervalBox>> {
    let count = cfg.cell_count(input.dim())?;
    Ok((0..count)
        .map(|i| grid_cell(input, cfg.cells_per_dim, i))
        .collect())
}

/// Output boxes of every grid cell, in cell index order.
pub fn reach_box_split(
    net: &Network,
    input: &IntervalBox,
    cfg: &SplitConfig,
) -> Result<Vec<IntervalBox>> {
    if input.dim() != net.input_dim() {
        return Err(Error::shape("reach_box input", net.input_dim(), input.dim()));
    }
    let count = cfg.cell_count(input.dim())?;
    (0..count)
        .into_par_iter()
        .map(|i| reach_box(net, &grid_cell(input, cfg.cells_per_dim, i)))
        .collect()
}
