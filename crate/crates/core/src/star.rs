//! Star sets and exact ReLU reachability.
//!
//! A star is `{c + V α : A α <= d}`. Affine layers map `c` and `V`;
//! a ReLU neuron whose sign is not fixed over the star splits it into the
//! half where the neuron is non-negative (kept) and the half where it is
//! non-positive (its row of `c` and `V` zeroed). The predicate variables
//! `α` are never re-parameterized, so `α` always refers back to the same
//! point of the input star.

use ndarray::{concatenate, Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{feasible_point, lp_max, LpOutcome};
use crate::network::{Activation, IntervalBox, Layer, Network};
use crate::norm::NormKind;

pub const DEFAULT_STAR_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Star {
    center: Array1<f64>,
    basis: Array2<f64>,
    a: Array2<f64>,
    d: Array1<f64>,
    /// Outer bounds on `α` known from construction (e.g. `[-1, 1]^p` for
    /// stars built from boxes). Only used to skip LPs.
    alpha_bounds: Option<(Array1<f64>, Array1<f64>)>,
}

impl Star {
    /// Validates shapes and rejects empty constraint sets.
    pub fn new(
        center: Array1<f64>,
        basis: Array2<f64>,
        a: Array2<f64>,
        d: Array1<f64>,
    ) -> Result<Self> {
        if basis.nrows() != center.len() {
            return Err(Error::shape("star basis rows", center.len(), basis.nrows()));
        }
        if a.ncols() != basis.ncols() {
            return Err(Error::shape("star constraint columns", basis.ncols(), a.ncols()));
        }
        if a.nrows() != d.len() {
            return Err(Error::shape("star constraint rows", a.nrows(), d.len()));
        }
        if feasible_point(&a, &d)?.is_none() {
            return Err(Error::EmptyStar);
        }
        Ok(Star {
            center,
            basis,
            a,
            d,
            alpha_bounds: None,
        })
    }

    pub fn center(&self) -> &Array1<f64> {
        &self.center
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn constraints(&self) -> (&Array2<f64>, &Array1<f64>) {
        (&self.a, &self.d)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn n_vars(&self) -> usize {
        self.basis.ncols()
    }

    /// `c + V α`.
    pub fn point_at(&self, alpha: &[f64]) -> Vec<f64> {
        (&self.center + &self.basis.dot(&ArrayView1::from(alpha))).to_vec()
    }

    fn affine_map(&self, layer: &Layer) -> Star {
        Star {
            center: layer.affine(self.center.view()),
            basis: layer.linear_map(&self.basis),
            a: self.a.clone(),
            d: self.d.clone(),
            alpha_bounds: self.alpha_bounds.clone(),
        }
    }

    fn with_constraint(&self, row: ArrayView1<'_, f64>, rhs: f64) -> Star {
        let a = concatenate![Axis(0), self.a, row.insert_axis(Axis(0))];
        let mut d = self.d.to_vec();
        d.push(rhs);
        Star {
            center: self.center.clone(),
            basis: self.basis.clone(),
            a,
            d: Array1::from(d),
            alpha_bounds: self.alpha_bounds.clone(),
        }
    }

    fn zero_row(mut self, i: usize) -> Star {
        self.center[i] = 0.0;
        self.basis.row_mut(i).fill(0.0);
        self
    }

    /// Cheap outer bounds of coordinate `i` from the known `α` box.
    fn quick_range(&self, i: usize) -> Option<(f64, f64)> {
        let (lo, hi) = self.alpha_bounds.as_ref()?;
        let mut min = self.center[i];
        let mut max = self.center[i];
        for (j, &v) in self.basis.row(i).iter().enumerate() {
            if v >= 0.0 {
                min += v * lo[j];
                max += v * hi[j];
            } else {
                min += v * hi[j];
                max += v * lo[j];
            }
        }
        Some((min, max))
    }

    /// Largest value of `direction · y` over the star.
    pub fn support(&self, direction: &[f64]) -> Result<f64> {
        let dir = ArrayView1::from(direction);
        let obj = self.basis.t().dot(&dir);
        let offset = dir.dot(&self.center);
        match lp_max(obj.as_slice().expect("contiguous"), &self.a, &self.d)? {
            LpOutcome::Optimal { value, .. } => Ok(offset + value),
            LpOutcome::Unbounded => Ok(f64::INFINITY),
            LpOutcome::Infeasible => Err(Error::EmptyStar),
        }
    }

    /// Predicate point maximizing `direction · y`, if the maximum is attained.
    pub fn argmax(&self, direction: &[f64]) -> Result<Option<Vec<f64>>> {
        let obj = self.basis.t().dot(&ArrayView1::from(direction));
        match lp_max(obj.as_slice().expect("contiguous"), &self.a, &self.d)? {
            LpOutcome::Optimal { point, .. } => Ok(Some(point)),
            _ => Ok(None),
        }
    }

    /// Exact range of coordinate `i`.
    pub fn range(&self, i: usize) -> Result<(f64, f64)> {
        let mut e = vec![0.0; self.dim()];
        e[i] = 1.0;
        let max = self.support(&e)?;
        e[i] = -1.0;
        let min = -self.support(&e)?;
        Ok((min, max))
    }

    /// Tightest axis-aligned box around the star.
    pub fn bounding_box(&self) -> Result<IntervalBox> {
        let (lower, upper): (Vec<f64>, Vec<f64>) =
            (0..self.dim()).map(|i| self.range(i)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
        IntervalBox::new(lower, upper)
    }

    /// Some `α` whose image satisfies `h y <= g`, if the star meets that polytope.
    pub fn intersect_point(&self, h: &Array2<f64>, g: &Array1<f64>) -> Result<Option<Vec<f64>>> {
        if h.ncols() != self.dim() {
            return Err(Error::shape("polytope columns", self.dim(), h.ncols()));
        }
        let a = concatenate![Axis(0), self.a, h.dot(&self.basis)];
        let d = concatenate![Axis(0), self.d, g - &h.dot(&self.center)];
        feasible_point(&a, &d)
    }

    /// Whether `y` lies in the star, with `tol` slack on each coordinate.
    pub fn contains(&self, y: &[f64], tol: f64) -> Result<bool> {
        if y.len() != self.dim() {
            return Err(Error::shape("star membership", self.dim(), y.len()));
        }
        let n = self.dim();
        let mut h = Array2::zeros((2 * n, n));
        let mut g = Array1::zeros(2 * n);
        for i in 0..n {
            h[(i, i)] = 1.0;
            g[i] = y[i] + tol;
            h[(n + i, i)] = -1.0;
            g[n + i] = -y[i] + tol;
        }
        Ok(self.intersect_point(&h, &g)?.is_some())
    }

    /// ReLU on coordinate `i`: zero, one or two result stars.
    fn relu_split(self, i: usize) -> Result<Vec<Star>> {
        let (min, max) = match self.quick_range(i) {
            Some((lo, _)) if lo >= 0.0 => return Ok(vec![self]),
            Some((_, hi)) if hi <= 0.0 => return Ok(vec![self.zero_row(i)]),
            _ => self.range(i)?,
        };
        if min >= 0.0 {
            return Ok(vec![self]);
        }
        if max <= 0.0 {
            return Ok(vec![self.zero_row(i)]);
        }
        let row = self.basis.row(i).to_owned();
        let c = self.center[i];
        // y_i >= 0  <=>  -V_i α <= c_i
        let pos = self.with_constraint((-&row).view(), c);
        // y_i <= 0  <=>  V_i α <= -c_i
        let neg = self.with_constraint(row.view(), -c).zero_row(i);
        Ok(vec![pos, neg])
    }

    fn apply_layer(self, layer: &Layer, cap: usize) -> Result<Vec<Star>> {
        let mut stars = vec![self.affine_map(layer)];
        for (i, act) in layer.activations.iter().enumerate() {
            if *act == Activation::Relu {
                let mut next = Vec::with_capacity(stars.len() * 2);
                for s in stars {
                    next.extend(s.relu_split(i)?);
                }
                if next.len() > cap {
                    return Err(star_cap_error(cap));
                }
                stars = next;
            }
        }
        Ok(stars)
    }
}

fn star_cap_error(cap: usize) -> Error {
    Error::Resource(format!("star count exceeds the cap of {cap}"))
}

/// Star for a box: center at the midpoint, half-widths on the diagonal,
/// `-1 <= α_i <= 1`.
pub fn box_to_star(input: &IntervalBox) -> Star {
    let n = input.dim();
    let half = (input.upper() - input.lower()) * 0.5;
    let mut a = Array2::zeros((2 * n, n));
    for i in 0..n {
        a[(2 * i, i)] = 1.0;
        a[(2 * i + 1, i)] = -1.0;
    }
    Star {
        center: input.midpoint(),
        basis: Array2::from_diag(&half),
        a,
        d: Array1::ones(2 * n),
        alpha_bounds: Some((-Array1::ones(n), Array1::ones(n))),
    }
}

/// Exact output set of `net` over `input` as a union of stars.
pub fn reach_stars(net: &Network, input: &Star, star_cap: usize) -> Result<Vec<Star>> {
    if input.dim() != net.input_dim() {
        return Err(Error::shape("reach_stars input", net.input_dim(), input.dim()));
    }
    if star_cap == 0 {
        return Err(Error::InvalidArgument("star cap must be >= 1".into()));
    }
    let mut stars = vec![input.clone()];
    for layer in net.layers() {
        let parts: Vec<Vec<Star>> = stars
            .into_par_iter()
            .map(|s| s.apply_layer(layer, star_cap))
            .collect::<Result<_>>()?;
        let total: usize = parts.iter().map(Vec::len).sum();
        if total > star_cap {
            return Err(star_cap_error(star_cap));
        }
        stars = parts.into_iter().flatten().collect();
    }
    Ok(stars)
}

/// Largest norm over the union of `stars`.
///
/// Exact for `Linf`. For `L2` this returns the norm of the per-coordinate
/// extreme magnitudes, an upper bound on the true maximum.
pub fn star_sup_norm(stars: &[Star], norm: NormKind) -> Result<f64> {
    let first = stars
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty star list".into()))?;
    let n = first.dim();
    if let Some(bad) = stars.iter().find(|s| s.dim() != n) {
        return Err(Error::shape("star dims", n, bad.dim()));
    }
    let ranges: Vec<Vec<(f64, f64)>> = stars
        .par_iter()
        .map(|s| (0..n).map(|i| s.range(i)).collect())
        .collect::<Result<_>>()?;
    match norm {
        NormKind::Linf => Ok(ranges
            .iter()
            .flatten()
            .fold(0.0, |m, (lo, hi)| m.max(lo.abs()).max(hi.abs()))),
        NormKind::L2 => {
            let mut lower = vec![f64::INFINITY; n];
            let mut upper = vec![f64::NEG_INFINITY; n];
            for r in &ranges {
                for (i, (lo, hi)) in r.iter().enumerate() {
                    lower[i] = lower[i].min(*lo);
                    upper[i] = upper[i].max(*hi);
                }
            }
            Ok(NormKind::L2.sup_over_box(&lower, &upper))
        }
    }
}

/// Bounding box of a union of stars.
pub fn stars_bounding_box(stars: &[Star]) -> Result<IntervalBox> {
    let boxes: Vec<IntervalBox> = stars
        .par_iter()
        .map(Star::bounding_box)
        .collect::<Result<_>>()?;
    boxes
        .into_iter()
        .reduce(|a, b| a.hull(&b))
        .ok_or_else(|| Error::InvalidArgument("empty star list".into()))
}

/// Whether `y` is within `tol` of some star's set.
pub fn union_contains(stars: &[Star], y: &[f64], tol: f64) -> Result<bool> {
    for s in stars {
        if s.contains(y, tol)? {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn bx(lo: &[f64], hi: &[f64]) -> IntervalBox {
        IntervalBox::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    #[test]
    fn box_to_star_examples() {
        let s = box_to_star(&bx(&[0.0], &[2.0]));
        assert_eq!(s.center(), &array![1.0]);
        assert_eq!(s.basis(), &array![[1.0]]);
        assert_eq!(s.constraints().0, &array![[1.0], [-1.0]]);
        assert_eq!(s.constraints().1, &array![1.0, 1.0]);

        let p = box_to_star(&bx(&[1.0], &[1.0]));
        assert_eq!(p.basis(), &array![[0.0]]);
        assert_eq!(p.n_vars(), 1);

        let s = box_to_star(&bx(&[-1.0, 0.0], &[1.0, 4.0]));
        assert_eq!(s.center(), &array![0.0, 2.0]);
        assert_eq!(s.basis(), &array![[1.0, 0.0], [0.0, 2.0]]);
    }

    #[test]
    fn new_rejects_empty_and_misshaped() {
        let r = Star::new(array![0.0], array![[1.0]], array![[1.0], [-1.0]], array![-1.0, -1.0]);
        assert_eq!(r.unwrap_err(), Error::EmptyStar);
        let r = Star::new(array![0.0], array![[1.0, 0.0]], array![[1.0]], array![1.0]);
        assert!(matches!(r, Err(Error::Shape { .. })));
    }

    #[test]
    fn split_into_two_sign_patterns() {
        let net = Network::new(
            1,
            vec![Layer::uniform(array![[1.0], [-1.0]], array![0.0, 0.0], Activation::Relu)],
        )
        .unwrap();
        let stars = reach_stars(&net, &box_to_star(&bx(&[-1.0], &[1.0])), 100).unwrap();
        assert_eq!(stars.len(), 2);
        let boxes: Vec<IntervalBox> = stars.iter().map(|s| s.bounding_box().unwrap()).collect();
        let mut seen_first = false;
        let mut seen_second = false;
        for b in &boxes {
            let close = |a: &IntervalBox, lo: [f64; 2], hi: [f64; 2]| {
                (0..2).all(|i| {
                    (a.lower()[i] - lo[i]).abs() < 1e-12 && (a.upper()[i] - hi[i]).abs() < 1e-12
                })
            };
            seen_first |= close(b, [0.0, 0.0], [1.0, 0.0]);
            seen_second |= close(b, [0.0, 0.0], [0.0, 1.0]);
        }
        assert!(seen_first && seen_second, "{boxes:?}");
        assert!(union_contains(&stars, &[0.5, 0.0], 1e-9).unwrap());
        assert!(union_contains(&stars, &[0.0, 0.3], 1e-9).unwrap());
        assert!(!union_contains(&stars, &[0.5, 0.5], 1e-9).unwrap());
        assert!((star_sup_norm(&stars, NormKind::Linf).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_network_gives_one_star() {
        let net = Network::new(
            2,
            vec![Layer::uniform(
                array![[1.0, 2.0], [0.5, -1.0]],
                array![1.0, 0.0],
                Activation::Identity,
            )],
        )
        .unwrap();
        let stars = reach_stars(&net, &box_to_star(&bx(&[0.0, 0.0], &[1.0, 1.0])), 10).unwrap();
        assert_eq!(stars.len(), 1);
        let b = stars[0].bounding_box().unwrap();
        assert!((b.upper()[0] - 4.0).abs() < 1e-12 && (b.lower()[0] - 1.0).abs() < 1e-12);
        assert!((b.lower()[1] + 1.0).abs() < 1e-12 && (b.upper()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn point_star_sup_norms() {
        let s = Star::new(
            array![3.0, -4.0],
            Array2::zeros((2, 0)),
            Array2::zeros((0, 0)),
            Array1::zeros(0),
        )
        .unwrap();
        assert_eq!(star_sup_norm(std::slice::from_ref(&s), NormKind::Linf).unwrap(), 4.0);
        assert_eq!(star_sup_norm(&[s], NormKind::L2).unwrap(), 5.0);
        assert!(star_sup_norm(&[], NormKind::Linf).is_err());
    }

    #[test]
    fn star_cap_is_enforced() {
        let net = crate::network::random_network(&[2, 8, 8, 1], 1.0, 3).unwrap();
        let r = reach_stars(&net, &box_to_star(&bx(&[-5.0, -5.0], &[5.0, 5.0])), 2);
        assert!(matches!(r, Err(Error::Resource(_))));
    }
}
