//! Verification problem files (TOML):
//!
//! ```toml
//! norm = "inf"          # optional: inf | l2
//! method = "split"      # optional: interval | split | exact
//! splits = 4            # optional: cells per input dimension for `split`
//! # unsafe region: list of polytopes, each a list of `a·y <= b` constraints
//! unsafe = [
//!   [{ a = [1.0, -1.0], b = 0.0 }, { a = [0.0, 1.0], b = 2.0 }],
//! ]
//!
//! [input]
//! lower = [-1.0, -1.0]
//! upper = [1.0, 1.0]
//! ```

use ndarray::{Array1, Array2};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::network::IntervalBox;
use crate::norm::NormKind;
use crate::reach::Method;
use crate::verify::{LinearSpec, Polytope};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    input: InputDoc,
    #[serde(rename = "unsafe")]
    unsafe_region: Vec<Vec<ConstraintDoc>>,
    norm: Option<String>,
    method: Option<String>,
    splits: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputDoc {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintDoc {
    a: Vec<f64>,
    b: f64,
}

/// Optional back-end settings stored alongside a problem.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProblemOptions {
    pub norm: Option<NormKind>,
    pub method: Option<Method>,
    pub splits: Option<u32>,
}

impl ProblemOptions {
    /// Method with `splits` folded in; `split` without a count uses 2.
    pub fn resolved_method(&self) -> Option<Method> {
        match (self.method, self.splits) {
            (Some(Method::IntervalSplit(_)), Some(k)) => Some(Method::IntervalSplit(k)),
            (m, _) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub input: IntervalBox,
    pub spec: LinearSpec,
    pub options: ProblemOptions,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    let doc: ProblemDoc = toml::from_str(text).map_err(|e| {
        let loc = e
            .span()
            .map_or_else(|| "document".to_string(), |s| format!("line {}", line_of(text, s.start)));
        Error::parse(loc, e.message().to_string())
    })?;

    let input = IntervalBox::new(doc.input.lower, doc.input.upper)
        .map_err(|e| Error::parse("input", e.to_string()))?;

    let mut polytopes = Vec::with_capacity(doc.unsafe_region.len());
    let mut width: Option<usize> = None;
    for (j, poly) in doc.unsafe_region.iter().enumerate() {
        if poly.is_empty() {
            return Err(Error::parse(format!("unsafe[{j}]"), "polytope has no constraints"));
        }
        let n = *width.get_or_insert(poly[0].a.len());
        if n == 0 {
            return Err(Error::parse(format!("unsafe[{j}][0].a"), "empty constraint normal"));
        }
        let mut a = Array2::zeros((poly.len(), n));
        let mut d = Array1::zeros(poly.len());
        for (i, c) in poly.iter().enumerate() {
            if c.a.len() != n {
                return Err(Error::parse(
                    format!("unsafe[{j}][{i}].a"),
                    format!("expected {n} entries, found {}", c.a.len()),
                ));
            }
            if c.a.iter().chain(std::iter::once(&c.b)).any(|v| !v.is_finite()) {
                return Err(Error::parse(format!("unsafe[{j}][{i}]"), "non-finite value"));
            }
            a.row_mut(i).assign(&Array1::from(c.a.clone()));
            d[i] = c.b;
        }
        polytopes.push(Polytope::new(a, d)?);
    }
    let spec = LinearSpec::new(polytopes)?;

    let norm = doc
        .norm
        .map(|s| s.parse::<NormKind>())
        .transpose()
        .map_err(|e| Error::parse("norm", e.to_string()))?;
    let method = doc
        .method
        .map(|s| s.parse::<Method>())
        .transpose()
        .map_err(|e| Error::parse("method", e.to_string()))?;
    if doc.splits == Some(0) {
        return Err(Error::parse("splits", "must be >= 1"));
    }
    Ok(Problem {
        input,
        spec,
        options: ProblemOptions {
            norm,
            method,
            splits: doc.splits,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const ONE_D: &str = r#"
unsafe = [[{ a = [1.0], b = -2.0 }]]

[input]
lower = [-1.0]
upper = [1.0]
"#;

    #[test]
    fn one_dimensional_problem() {
        let p = parse_problem(ONE_D).unwrap();
        assert_eq!(p.input, IntervalBox::new(vec![-1.0], vec![1.0]).unwrap());
        assert_eq!(p.spec.polytopes().len(), 1);
        assert_eq!(p.spec.polytopes()[0].a, array![[1.0]]);
        assert_eq!(p.spec.polytopes()[0].d, array![-2.0]);
        assert_eq!(p.options, ProblemOptions::default());
    }

    #[test]
    fn options_are_parsed() {
        let text = format!("norm = \"l2\"\nmethod = \"split\"\nsplits = 8\n{ONE_D}");
        let p = parse_problem(&text).unwrap();
        assert_eq!(p.options.norm, Some(NormKind::L2));
        assert_eq!(p.options.resolved_method(), Some(Method::IntervalSplit(8)));
    }

    #[test]
    fn inverted_bounds_rejected() {
        let err = parse_problem(&ONE_D.replace("upper = [1.0]", "upper = [-3.0]")).unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "input"));
    }

    #[test]
    fn errors_name_the_field() {
        let err = parse_problem(&ONE_D.replace("b = -2.0 }]]", "b = -2.0 }, { a = [1.0, 2.0], b = 0.0 }]]"))
            .unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "unsafe[0][1].a"));
        let err = parse_problem("unsafe = []\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = parse_problem(&format!("colour = 1\n{ONE_D}")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        let err = parse_problem(&format!("norm = \"l9\"\n{ONE_D}")).unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "norm"));
    }
}
