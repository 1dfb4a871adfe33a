//! Approximate bisimulation error between a large network and its
//! compressed counterpart: the largest output discrepancy
//! `sup_x ||large(x) - small(x)||` over an input box.
//!
//! The upper bound comes from reachability on the merged difference
//! network; the lower bound from evaluating concrete inputs.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::FEAS_TOL;
use crate::merge::{difference_eval, merge};
use crate::network::{IntervalBox, Network};
use crate::norm::NormKind;
use crate::reach::{cell_centers, reach, Method, OutputSet, ReachOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBound {
    /// Sound upper bound on the discrepancy.
    pub epsilon_upper: f64,
    /// Discrepancy attained at some concrete input.
    pub epsilon_lower: f64,
    pub method: Method,
    pub norm: NormKind,
    pub wall_time_seconds: f64,
}

/// Upper bound on `sup_x ||large(x) - small(x)||` over `input`.
pub fn bisim_error_upper(
    large: &Network,
    small: &Network,
    input: &IntervalBox,
    method: Method,
    norm: NormKind,
    opts: &ReachOptions,
) -> Result<ErrorBound> {
    let started = Instant::now();
    let merged = merge(large, small)?;
    let out = reach(&merged, input, method, opts)?;
    let epsilon_upper = out.sup_norm(norm)?;

    // Concrete witnesses: cell centers for the interval back-ends, the LP
    // optima's preimages for stars.
    let mut candidates = cell_centers(input, method.cells_per_dim(), opts.cell_cap)?;
    if let OutputSet::Stars { stars, input: start } = &out {
        for s in stars {
            for i in 0..s.dim() {
                for sign in [1.0, -1.0] {
                    let mut dir = vec![0.0; s.dim()];
                    dir[i] = sign;
                    if let Some(alpha) = s.argmax(&dir)? {
                        let x = start.point_at(&alpha);
                        candidates.push(clamp_into(input, x));
                    }
                }
            }
        }
    }
    let epsilon_lower = candidates
        .par_iter()
        .map(|x| difference_eval(large, small, x).map(|d| norm.of(&d)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;

    Ok(ErrorBound {
        epsilon_upper,
        epsilon_lower,
        method,
        norm,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    })
}

fn clamp_into(b: &IntervalBox, mut x: Vec<f64>) -> Vec<f64> {
    for (i, v) in x.iter_mut().enumerate() {
        *v = v.clamp(b.lower()[i], b.upper()[i]);
    }
    x
}

/// `samples` uniform points of `input`, point `i` drawn from its own
/// ChaCha stream so the result does not depend on how work is split.
pub fn sample_point(input: &IntervalBox, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let t: Vec<f64> = (0..input.dim()).map(|_| rng.random::<f64>()).collect();
    input.lerp(&t)
}

/// Monte-Carlo lower bound on the discrepancy.
pub fn bisim_error_lower_mc(
    large: &Network,
    small: &Network,
    input: &IntervalBox,
    samples: u64,
    seed: u64,
    norm: NormKind,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if input.dim() != large.input_dim() {
        return Err(Error::shape("sample box", large.input_dim(), input.dim()));
    }
    (0..samples)
        .into_par_iter()
        .map(|i| difference_eval(large, small, &sample_point(input, seed, i)).map(|d| norm.of(&d)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Whether `small` is certified as an assured compression of `large` with
/// precision `eps`. `false` from a non-exact method is inconclusive.
///
/// The comparison allows the LP feasibility tolerance, so identical
/// networks pass with `eps = 0` under the exact back-end.
pub fn check_assured(
    large: &Network,
    small: &Network,
    input: &IntervalBox,
    eps: f64,
    method: Method,
    norm: NormKind,
    opts: &ReachOptions,
) -> Result<bool> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!("precision must be >= 0, got {eps}")));
    }
    let bound = bisim_error_upper(large, small, input, method, norm, opts)?;
    Ok(bound.epsilon_upper <= eps + FEAS_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{random_network, Activation, Layer};
    use ndarray::{array, Array2};

    fn constant(value: f64) -> Network {
        Network::new(
            1,
            vec![
                Layer::uniform(Array2::zeros((1, 1)), array![0.0], Activation::Relu),
                Layer::uniform(array![[0.0]], array![value], Activation::Identity),
            ],
        )
        .unwrap()
    }

    fn unit() -> IntervalBox {
        IntervalBox::new(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn identical_networks_exact_zero() {
        let net = random_network(&[2, 3, 2], 1.0, 4).unwrap();
        let b = IntervalBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let e = bisim_error_upper(&net, &net, &b, Method::ExactStar, NormKind::Linf, &Default::default())
            .unwrap();
        assert!(e.epsilon_upper.abs() <= 1e-9, "{e:?}");
        assert_eq!(e.epsilon_lower, 0.0);
    }

    #[test]
    fn interval_dependency_loss() {
        // relu(x) followed by identity, merged with itself
        let net = Network::new(
            1,
            vec![
                Layer::uniform(array![[1.0]], array![0.0], Activation::Relu),
                Layer::uniform(array![[1.0]], array![0.0], Activation::Identity),
            ],
        )
        .unwrap();
        let e = bisim_error_upper(&net, &net, &unit(), Method::Interval, NormKind::Linf, &Default::default())
            .unwrap();
        assert_eq!(e.epsilon_upper, 1.0);
        assert_eq!(e.epsilon_lower, 0.0);
        let exact =
            bisim_error_upper(&net, &net, &unit(), Method::ExactStar, NormKind::Linf, &Default::default())
                .unwrap();
        assert!(exact.epsilon_upper <= 1e-9);
    }

    #[test]
    fn constant_networks() {
        let (a, b) = (constant(3.0), constant(1.0));
        for method in [Method::Interval, Method::IntervalSplit(3), Method::ExactStar] {
            let e = bisim_error_upper(&a, &b, &unit(), method, NormKind::Linf, &Default::default())
                .unwrap();
            assert_eq!(e.epsilon_upper, 2.0);
            assert_eq!(e.epsilon_lower, 2.0);
        }
        assert_eq!(bisim_error_lower_mc(&a, &b, &unit(), 1, 0, NormKind::Linf).unwrap(), 2.0);
        assert_eq!(bisim_error_lower_mc(&a, &b, &unit(), 500, 9, NormKind::L2).unwrap(), 2.0);
    }

    #[test]
    fn check_assured_examples() {
        let opts = ReachOptions::default();
        let net = random_network(&[1, 4, 1], 1.0, 2).unwrap();
        assert!(check_assured(&net, &net, &unit(), 0.0, Method::ExactStar, NormKind::Linf, &opts).unwrap());
        let (a, b) = (constant(3.0), constant(1.0));
        assert!(!check_assured(&a, &b, &unit(), 1.0, Method::ExactStar, NormKind::Linf, &opts).unwrap());
        assert!(check_assured(&a, &b, &unit(), 2.0, Method::ExactStar, NormKind::Linf, &opts).unwrap());
        assert!(check_assured(&a, &b, &unit(), -1.0, Method::ExactStar, NormKind::Linf, &opts).is_err());
    }

    #[test]
    fn mc_is_deterministic_and_below_upper() {
        let a = random_network(&[2, 5, 3, 1], 1.0, 10).unwrap();
        let b = random_network(&[2, 4, 1], 1.0, 11).unwrap();
        let bx = IntervalBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let lo1 = bisim_error_lower_mc(&a, &b, &bx, 2000, 42, NormKind::Linf).unwrap();
        let lo2 = bisim_error_lower_mc(&a, &b, &bx, 2000, 42, NormKind::Linf).unwrap();
        assert_eq!(lo1, lo2);
        for m in [Method::Interval, Method::IntervalSplit(4), Method::ExactStar] {
            let up = bisim_error_upper(&a, &b, &bx, m, NormKind::Linf, &Default::default()).unwrap();
            assert!(lo1 <= up.epsilon_upper + 1e-9);
            assert!(up.epsilon_lower <= up.epsilon_upper + 1e-9);
        }
        assert!(bisim_error_lower_mc(&a, &b, &bx, 0, 42, NormKind::Linf).is_err());
    }

    #[test]
    fn samples_lie_in_box() {
        let bx = IntervalBox::new(vec![-1.0, 2.0], vec![1.0, 2.5]).unwrap();
        for i in 0..100 {
            assert!(bx.contains(&sample_point(&bx, 1, i)));
        }
        assert_ne!(sample_point(&bx, 1, 0), sample_point(&bx, 1, 1));
    }
}
