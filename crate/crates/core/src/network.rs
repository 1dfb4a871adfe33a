//! Feedforward networks with per-neuron activation tags, and the
//! axis-aligned boxes used as input sets.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Identity => write!(f, "identity"),
        }
    }
}

/// One affine layer `act(W x + b)`. `weights` is `rows = out`, `cols = in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activations: Vec<Activation>,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activations: Vec<Activation>) -> Self {
        Layer {
            weights,
            bias,
            activations,
        }
    }

    /// Layer with the same activation on every neuron.
    pub fn uniform(weights: Array2<f64>, bias: Array1<f64>, act: Activation) -> Self {
        let n = weights.nrows();
        Layer::new(weights, bias, vec![act; n])
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Pre-activation `W x + b`. Each row is summed left to right, so
    /// zero blocks in a weight matrix never perturb the other entries.
    pub fn affine(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut z = Array1::zeros(self.out_dim());
        for (i, row) in self.weights.rows().into_iter().enumerate() {
            let dot = row.iter().zip(x.iter()).fold(0.0, |acc, (w, v)| acc + w * v);
            z[i] = dot + self.bias[i];
        }
        z
    }

    /// `W m`, summed in the same order as [`Layer::affine`].
    pub fn linear_map(&self, m: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.out_dim(), m.ncols()));
        for (i, row) in self.weights.rows().into_iter().enumerate() {
            for (j, col) in m.columns().into_iter().enumerate() {
                out[(i, j)] = row.iter().zip(col.iter()).fold(0.0, |acc, (w, v)| acc + w * v);
            }
        }
        out
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut z = self.affine(x);
        for (v, act) in z.iter_mut().zip(&self.activations) {
            *v = act.apply(*v);
        }
        z
    }
}

/// A structural problem found by [`Network::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoLayers,
    ZeroInputDim,
    ZeroWidth { layer: usize },
    BiasLength { layer: usize, rows: usize, found: usize },
    ActivationLength { layer: usize, rows: usize, found: usize },
    Chaining { layer: usize, expected: usize, found: usize },
    NonFinite { layer: usize },
}

impl Violation {
    pub fn layer(&self) -> Option<usize> {
        match *self {
            Violation::NoLayers | Violation::ZeroInputDim => None,
            Violation::ZeroWidth { layer }
            | Violation::BiasLength { layer, .. }
            | Violation::ActivationLength { layer, .. }
            | Violation::Chaining { layer, .. }
            | Violation::NonFinite { layer } => Some(layer),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoLayers => write!(f, "network has no layers"),
            Violation::ZeroInputDim => write!(f, "input dimension is zero"),
            Violation::ZeroWidth { layer } => write!(f, "layer {layer}: zero output width"),
            Violation::BiasLength { layer, rows, found } => {
                write!(f, "layer {layer}: bias length {found} != {rows} weight rows")
            }
            Violation::ActivationLength { layer, rows, found } => {
                write!(f, "layer {layer}: {found} activations for {rows} weight rows")
            }
            Violation::Chaining {
                layer,
                expected,
                found,
            } => write!(
                f,
                "layer {layer}: weight matrix has {found} columns, previous width is {expected}"
            ),
            Violation::NonFinite { layer } => {
                write!(f, "layer {layer}: non-finite weight or bias")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds a network, rejecting it if [`Network::validate`] reports anything.
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        let net = Network { input_dim, layers };
        let violations = net.validate();
        if let Some(first) = violations.first() {
            return Err(Error::InvalidArgument(first.to_string()));
        }
        Ok(net)
    }

    /// Builds a network without checking its invariants. Useful for
    /// inspecting malformed inputs with [`Network::validate`].
    pub fn new_unchecked(input_dim: usize, layers: Vec<Layer>) -> Self {
        Network { input_dim, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Output width of every layer, prefixed by the input width.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub fn relu_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.activations)
            .filter(|a| **a == Activation::Relu)
            .count()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Whether some layer mixes ReLU and Identity neurons.
    pub fn has_mixed_layers(&self) -> bool {
        self.layers.iter().any(|l| {
            l.activations.contains(&Activation::Relu)
                && l.activations.contains(&Activation::Identity)
        })
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.input_dim == 0 {
            out.push(Violation::ZeroInputDim);
        }
        if self.layers.is_empty() {
            out.push(Violation::NoLayers);
        }
        let mut prev = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            let rows = layer.out_dim();
            if rows == 0 {
                out.push(Violation::ZeroWidth { layer: i });
            }
            if layer.in_dim() != prev {
                out.push(Violation::Chaining {
                    layer: i,
                    expected: prev,
                    found: layer.in_dim(),
                });
            }
            if layer.bias.len() != rows {
                out.push(Violation::BiasLength {
                    layer: i,
                    rows,
                    found: layer.bias.len(),
                });
            }
            if layer.activations.len() != rows {
                out.push(Violation::ActivationLength {
                    layer: i,
                    rows,
                    found: layer.activations.len(),
                });
            }
            if layer.weights.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                out.push(Violation::NonFinite { layer: i });
            }
            prev = rows;
        }
        out
    }

    pub fn eval(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::shape("network input", self.input_dim, x.len()));
        }
        let mut cur = x.to_owned();
        for layer in &self.layers {
            cur = layer.forward(cur.view());
        }
        Ok(cur)
    }

    /// Convenience wrapper over [`Network::eval`] for slices.
    pub fn eval_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(ArrayView1::from(x))?.to_vec())
    }

    /// Network made of layers `range` of `self`. Panics if the range is
    /// out of bounds or empty.
    pub fn slice_layers(&self, range: std::ops::Range<usize>) -> Network {
        assert!(!range.is_empty() && range.end <= self.layers.len());
        let input_dim = if range.start == 0 {
            self.input_dim
        } else {
            self.layers[range.start - 1].out_dim()
        };
        Network {
            input_dim,
            layers: self.layers[range].to_vec(),
        }
    }
}

/// Random network with weights and biases uniform in
/// `[-weight_range, weight_range]`, ReLU hidden layers and an Identity
/// output layer. `layer_sizes` includes the input width.
pub fn random_network(layer_sizes: &[usize], weight_range: f64, seed: u64) -> Result<Network> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least an input and an output size, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidArgument("layer sizes must be positive".into()));
    }
    if !(weight_range.is_finite() && weight_range > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "weight range must be positive, got {weight_range}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_layers = layer_sizes.len() - 1;
    let layers = layer_sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (cols, rows) = (w[0], w[1]);
            let weights = Array2::from_shape_fn((rows, cols), |_| {
                rng.random_range(-weight_range..=weight_range)
            });
            let bias =
                Array1::from_shape_fn(rows, |_| rng.random_range(-weight_range..=weight_range));
            let act = if i + 1 == n_layers {
                Activation::Identity
            } else {
                Activation::Relu
            };
            Layer::uniform(weights, bias, act)
        })
        .collect();
    Network::new(layer_sizes[0], layers)
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    lower: Array1<f64>,
    upper: Array1<f64>,
}

impl IntervalBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::shape("box bounds", lower.len(), upper.len()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() {
                return Err(Error::InvalidArgument(format!("box bound {i} is NaN")));
            }
            if lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "box dimension {i}: lower {lo} > upper {hi}"
                )));
            }
        }
        Ok(IntervalBox {
            lower: Array1::from(lower),
            upper: Array1::from(upper),
        })
    }

    /// Degenerate box containing only `x`.
    pub fn point(x: &[f64]) -> Self {
        IntervalBox {
            lower: Array1::from(x.to_vec()),
            upper: Array1::from(x.to_vec()),
        }
    }

    /// Used by interval arithmetic where `lower <= upper` holds by construction.
    pub(crate) fn from_arrays(lower: Array1<f64>, upper: Array1<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        IntervalBox { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &Array1<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &Array1<f64> {
        &self.upper
    }

    pub fn midpoint(&self) -> Array1<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// `self ⊆ other`, widened by `slack` on each side.
    pub fn is_subset_of(&self, other: &IntervalBox, slack: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| {
                self.lower[i] >= other.lower[i] - slack && self.upper[i] <= other.upper[i] + slack
            })
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &IntervalBox) -> IntervalBox {
        let lower = ndarray::Zip::from(&self.lower)
            .and(&other.lower)
            .map_collect(|a, b| a.min(*b));
        let upper = ndarray::Zip::from(&self.upper)
            .and(&other.upper)
            .map_collect(|a, b| a.max(*b));
        IntervalBox { lower, upper }
    }

    /// Maps a point of the unit cube `[0,1]^n` into the box.
    pub fn lerp(&self, t: &[f64]) -> Vec<f64> {
        t.iter()
            .enumerate()
            .map(|(i, &t)| {
                if t >= 1.0 {
                    self.upper[i]
                } else {
                    self.lower[i] + (self.upper[i] - self.lower[i]) * t
                }
            })
            .collect()
    }
}
