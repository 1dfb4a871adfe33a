#![allow(dead_code)]

use bisim_core::network::{random_network, Activation, IntervalBox, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain nested-loop forward pass, independent of the library's evaluator.
pub fn oracle_eval(net: &Network, x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for layer in net.layers() {
        let mut next = Vec::with_capacity(layer.out_dim());
        for i in 0..layer.out_dim() {
            let mut z = layer.bias[i];
            for (j, v) in cur.iter().enumerate() {
                z += layer.weights[[i, j]] * v;
            }
            next.push(match layer.activations[i] {
                Activation::Relu => z.max(0.0),
                Activation::Identity => z,
            });
        }
        cur = next;
    }
    cur
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Layer sizes `[n_in, h.., n_out]` with `hidden` hidden layers of width in `1..=max_width`.
pub fn random_sizes(r: &mut ChaCha8Rng, n_in: usize, n_out: usize, hidden: usize, max_width: usize) -> Vec<usize> {
    let mut sizes = vec![n_in];
    sizes.extend((0..hidden).map(|_| r.random_range(1..=max_width)));
    sizes.push(n_out);
    sizes
}

/// A large/small pair sharing input and output widths. `large_layers` and
/// `small_layers` count affine layers.
pub fn random_pair(
    r: &mut ChaCha8Rng,
    n_in: usize,
    n_out: usize,
    large_layers: usize,
    small_layers: usize,
    max_width: usize,
    weight_range: f64,
) -> (Network, Network) {
    let ls = random_sizes(r, n_in, n_out, large_layers - 1, max_width);
    let ss = random_sizes(r, n_in, n_out, small_layers - 1, max_width);
    let large = random_network(&ls, weight_range, r.random()).unwrap();
    let small = random_network(&ss, weight_range, r.random()).unwrap();
    (large, small)
}

pub fn random_box(r: &mut ChaCha8Rng, dim: usize, max_half_width: f64) -> IntervalBox {
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    for _ in 0..dim {
        let c: f64 = r.random_range(-1.0..=1.0);
        let h: f64 = r.random_range(0.05..=max_half_width);
        lo.push(c - h);
        hi.push(c + h);
    }
    IntervalBox::new(lo, hi).unwrap()
}

/// Uniform point of `b`.
pub fn sample_in(r: &mut ChaCha8Rng, b: &IntervalBox) -> Vec<f64> {
    (0..b.dim())
        .map(|i| r.random_range(b.lower()[i]..=b.upper()[i]))
        .collect()
}

/// Every point of a regular grid with spacing at most `step` over a box
/// of dimension 1 or 2.
pub fn grid_points(b: &IntervalBox, step: f64) -> Vec<Vec<f64>> {
    let axis = |i: usize| -> Vec<f64> {
        let (lo, hi) = (b.lower()[i], b.upper()[i]);
        let n = ((hi - lo) / step).ceil() as usize;
        (0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect()
    };
    match b.dim() {
        1 => axis(0).into_iter().map(|x| vec![x]).collect(),
        2 => {
            let (xs, ys) = (axis(0), axis(1));
            xs.iter().flat_map(|x| ys.iter().map(move |y| vec![*x, *y])).collect()
        }
        d => panic!("grid over {d} dimensions"),
    }
}
