//! Merged difference network.
//!
//! For a large network with `L` affine layers and a small one with `S`
//! layers (`L >= S >= 2`, equal input and output widths) this builds a
//! network with `L + 1` layers whose output is exactly
//! `large(x) - small(x)`:
//!
//! | layer `m`        | weights                          | activations            |
//! |------------------|----------------------------------|------------------------|
//! | 1                | `[W1_L; W1_S]`                   | stacked                |
//! | 2 ..= S-1        | `diag(Wm_L, Wm_S)`               | stacked                |
//! | S ..= L-1        | `diag(Wm_L, I)`                  | large, then Identity   |
//! | L                | `diag(WL_L, WS_S)`               | stacked output acts    |
//! | L+1              | `[I, -I]`                        | Identity               |
//!
//! The small network's last hidden activation is carried through the
//! padding layers by identity blocks with zero bias.

use ndarray::{concatenate, s, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::network::{Activation, Layer, Network};

fn check_preconditions(large: &Network, small: &Network) -> Result<()> {
    if large.input_dim() != small.input_dim() {
        return Err(Error::MergePrecondition {
            clause: "equal-input-dims",
            detail: format!(
                "large network takes {} inputs, small network takes {}",
                large.input_dim(),
                small.input_dim()
            ),
        });
    }
    if large.output_dim() != small.output_dim() {
        return Err(Error::MergePrecondition {
            clause: "equal-output-dims",
            detail: format!(
                "large network has {} outputs, small network has {}",
                large.output_dim(),
                small.output_dim()
            ),
        });
    }
    if large.layer_count() < small.layer_count() {
        return Err(Error::MergePrecondition {
            clause: "large-not-shallower",
            detail: format!(
                "large network has {} layers, fewer than the small network's {}",
                large.layer_count(),
                small.layer_count()
            ),
        });
    }
    if small.layer_count() < 2 {
        return Err(Error::UnsupportedShape(format!(
            "small network must have at least 2 affine layers, got {}",
            small.layer_count()
        )));
    }
    Ok(())
}

fn block_diag(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar + br, ac + bc));
    out.slice_mut(s![..ar, ..ac]).assign(a);
    out.slice_mut(s![ar.., ac..]).assign(b);
    out
}

fn stack(a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    concatenate![Axis(0), *a, *b]
}

fn stack_acts(a: &[Activation], b: &[Activation]) -> Vec<Activation> {
    a.iter().chain(b).copied().collect()
}

/// Builds the merged network for `large` and `small`.
pub fn merge(large: &Network, small: &Network) -> Result<Network> {
    for (name, net) in [("large", large), ("small", small)] {
        if let Some(v) = net.validate().first() {
            return Err(Error::InvalidArgument(format!("{name} network: {v}")));
        }
    }
    check_preconditions(large, small)?;

    let l_layers = large.layers();
    let s_layers = small.layers();
    let n_l = l_layers.len();
    let n_s = s_layers.len();
    let mut merged = Vec::with_capacity(n_l + 1);

    // m = 1
    let (l1, s1) = (&l_layers[0], &s_layers[0]);
    merged.push(Layer::new(
        concatenate![Axis(0), l1.weights, s1.weights],
        stack(&l1.bias, &s1.bias),
        stack_acts(&l1.activations, &s1.activations),
    ));

    // 1 < m <= S-1 (1-based), i.e. indices 1..n_s-1
    for m in 1..n_s - 1 {
        let (lm, sm) = (&l_layers[m], &s_layers[m]);
        merged.push(Layer::new(
            block_diag(&lm.weights, &sm.weights),
            stack(&lm.bias, &sm.bias),
            stack_acts(&lm.activations, &sm.activations),
        ));
    }

    // S-1 < m <= L-1: pass the small network's last hidden state through.
    let carried = s_layers[n_s - 2].out_dim();
    for lm in &l_layers[n_s - 1..n_l - 1] {
        merged.push(Layer::new(
            block_diag(&lm.weights, &Array2::eye(carried)),
            stack(&lm.bias, &Array1::zeros(carried)),
            stack_acts(&lm.activations, &vec![Activation::Identity; carried]),
        ));
    }

    // m = L
    let (ll, sl) = (&l_layers[n_l - 1], &s_layers[n_s - 1]);
    merged.push(Layer::new(
        block_diag(&ll.weights, &sl.weights),
        stack(&ll.bias, &sl.bias),
        stack_acts(&ll.activations, &sl.activations),
    ));

    // m = L+1: comparison layer [I, -I].
    let out = large.output_dim();
    let eye = Array2::<f64>::eye(out);
    merged.push(Layer::uniform(
        concatenate![Axis(1), eye, -&eye],
        Array1::zeros(out),
        Activation::Identity,
    ));

    Network::new(large.input_dim(), merged)
}

/// `large(x) - small(x)`, evaluated directly on the two networks.
pub fn difference_eval(large: &Network, small: &Network, x: &[f64]) -> Result<Vec<f64>> {
    if large.input_dim() != small.input_dim() {
        return Err(Error::shape(
            "difference input dims",
            large.input_dim(),
            small.input_dim(),
        ));
    }
    if large.output_dim() != small.output_dim() {
        return Err(Error::shape(
            "difference output dims",
            large.output_dim(),
            small.output_dim(),
        ));
    }
    let a = large.eval_slice(x)?;
    let b = small.eval_slice(x)?;
    Ok(a.iter().zip(&b).map(|(p, q)| p - q).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::random_network;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant(value: f64, inputs: usize) -> Network {
        Network::new(
            inputs,
            vec![
                Layer::uniform(Array2::zeros((1, inputs)), array![0.0], Activation::Relu),
                Layer::uniform(array![[0.0]], array![value], Activation::Identity),
            ],
        )
        .unwrap()
    }

    #[test]
    fn widths_and_padding_block() {
        let large = random_network(&[2, 3, 3, 1], 1.0, 3).unwrap();
        let small = random_network(&[2, 2, 1], 1.0, 4).unwrap();
        let m = merge(&large, &small).unwrap();
        assert_eq!(m.widths(), vec![2, 5, 5, 2, 1]);

        let pad = &m.layers()[1];
        assert_eq!(pad.weights.dim(), (5, 5));
        assert_eq!(pad.weights.slice(s![..3, ..3]), large.layers()[1].weights);
        assert_eq!(pad.weights.slice(s![3.., 3..]), Array2::<f64>::eye(2));
        assert!(pad.weights.slice(s![..3, 3..]).iter().all(|v| *v == 0.0));
        assert!(pad.weights.slice(s![3.., ..3]).iter().all(|v| *v == 0.0));
        assert!(pad.bias.slice(s![3..]).iter().all(|v| *v == 0.0));
        assert_eq!(&pad.activations[3..], &[Activation::Identity; 2]);

        let cmp = &m.layers()[3];
        assert_eq!(cmp.weights, array![[1.0, -1.0]]);
        assert_eq!(cmp.bias, array![0.0]);
    }

    #[test]
    fn width_formula_for_every_case() {
        let large = random_network(&[3, 4, 5, 6, 7, 2], 1.0, 1).unwrap();
        let small = random_network(&[3, 8, 9, 2], 1.0, 2).unwrap();
        let m = merge(&large, &small).unwrap();
        // m=1: 4+8, m=2: 5+9, m=3..4: n_L + 9, m=5: 2+2, m=6: 2
        assert_eq!(m.widths(), vec![3, 12, 14, 15, 16, 4, 2]);
        assert!(m.validate().is_empty());
    }

    #[test]
    fn equal_depth_has_no_padding_layers() {
        let a = random_network(&[2, 3, 2], 1.0, 5).unwrap();
        let b = random_network(&[2, 4, 2], 1.0, 6).unwrap();
        let m = merge(&a, &b).unwrap();
        assert_eq!(m.widths(), vec![2, 7, 4, 2]);
    }

    #[test]
    fn identical_networks_merge_to_zero() {
        let net = random_network(&[3, 6, 5, 2], 2.0, 9).unwrap();
        let m = merge(&net, &net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert!(m.eval_slice(&x).unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn merged_matches_difference_on_random_inputs() {
        let large = random_network(&[2, 4, 3, 2], 1.0, 1).unwrap();
        let small = random_network(&[2, 3, 2], 1.0, 2).unwrap();
        let m = merge(&large, &small).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let merged = m.eval_slice(&x).unwrap();
            let diff = difference_eval(&large, &small, &x).unwrap();
            for (a, b) in merged.iter().zip(&diff) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst <= 1e-9, "max deviation {worst}");
    }

    #[test]
    fn difference_of_constant_networks() {
        let d = difference_eval(&constant(3.0, 1), &constant(1.0, 1), &[0.4]).unwrap();
        assert_eq!(d, vec![2.0]);
    }

    #[test]
    fn precondition_errors_name_the_clause() {
        let a = random_network(&[2, 3, 1], 1.0, 1).unwrap();
        let wrong_in = random_network(&[3, 3, 1], 1.0, 1).unwrap();
        let wrong_out = random_network(&[2, 3, 2], 1.0, 1).unwrap();
        let deeper = random_network(&[2, 3, 3, 1], 1.0, 1).unwrap();
        let single = random_network(&[2, 1], 1.0, 1).unwrap();

        let clause = |r: Result<Network>| match r {
            Err(Error::MergePrecondition { clause, .. }) => clause,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(clause(merge(&a, &wrong_in)), "equal-input-dims");
        assert_eq!(clause(merge(&a, &wrong_out)), "equal-output-dims");
        assert_eq!(clause(merge(&a, &deeper)), "large-not-shallower");
        assert!(matches!(merge(&a, &single), Err(Error::UnsupportedShape(_))));
        assert!(merge(&deeper, &a).is_ok());
    }

    #[test]
    fn difference_eval_shape_errors() {
        let a = random_network(&[2, 3, 1], 1.0, 1).unwrap();
        let b = random_network(&[2, 3, 2], 1.0, 1).unwrap();
        assert!(difference_eval(&a, &b, &[0.0, 0.0]).is_err());
        assert!(difference_eval(&a, &a, &[0.0]).is_err());
    }
}
