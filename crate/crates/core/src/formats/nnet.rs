//! The plain-text NNet format used by the ACAS Xu networks.
//!
//! ```text
//! // comment lines
//! numLayers,inputSize,outputSize,maxLayerSize,
//! size0,size1,...,sizeN,
//! 0,                      (legacy flag, ignored)
//! input mins
//! input maxes
//! means   (inputSize + 1 entries, last for the outputs)
//! ranges  (inputSize + 1 entries)
//! per layer: one line per weight row, then one line per bias
//! ```
//!
//! Hidden layers are ReLU, the output layer is Identity.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::network::{Activation, Layer, Network};

/// Input/output normalization carried by NNet files.
#[derive(Debug, Clone, PartialEq)]
pub struct NNetMeta {
    pub input_mins: Vec<f64>,
    pub input_maxes: Vec<f64>,
    /// `input_dim + 1` entries; the last applies to every output.
    pub means: Vec<f64>,
    pub ranges: Vec<f64>,
}

impl NNetMeta {
    /// No clamping, zero means, unit ranges.
    pub fn identity(input_dim: usize) -> Self {
        NNetMeta {
            input_mins: vec![-f64::MAX; input_dim],
            input_maxes: vec![f64::MAX; input_dim],
            means: vec![0.0; input_dim + 1],
            ranges: vec![1.0; input_dim + 1],
        }
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        let check = |name: &str, v: &[f64], n: usize| {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::shape(format!("NNet {name}"), n, v.len()))
            }
        };
        check("input mins", &self.input_mins, input_dim)?;
        check("input maxes", &self.input_maxes, input_dim)?;
        check("means", &self.means, input_dim + 1)?;
        check("ranges", &self.ranges, input_dim + 1)?;
        if let Some(i) = self.ranges.iter().position(|r| *r == 0.0) {
            return Err(Error::InvalidArgument(format!("NNet range {i} is zero")));
        }
        if let Some(i) = (0..input_dim).find(|&i| self.input_mins[i] > self.input_maxes[i]) {
            return Err(Error::InvalidArgument(format!("NNet input {i}: min > max")));
        }
        Ok(())
    }
}

/// Evaluation with NNet normalization: clamp the input to `[mins, maxes]`,
/// normalize by `means`/`ranges`, evaluate, de-normalize the outputs.
pub fn eval_normalized(net: &Network, meta: &NNetMeta, x: &[f64]) -> Result<Vec<f64>> {
    meta.validate(net.input_dim())?;
    if x.len() != net.input_dim() {
        return Err(Error::shape("network input", net.input_dim(), x.len()));
    }
    let z: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clamp(meta.input_mins[i], meta.input_maxes[i]) - meta.means[i]) / meta.ranges[i])
        .collect();
    let n = net.input_dim();
    Ok(net
        .eval_slice(&z)?
        .into_iter()
        .map(|y| y * meta.ranges[n] + meta.means[n])
        .collect())
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let mut inner = text.lines().enumerate().peekable();
        while inner.peek().is_some_and(|(_, l)| l.trim_start().starts_with("//")) {
            inner.next();
        }
        Lines { inner }
    }

    /// Next line as numbers, with its 1-based line number.
    fn numbers(&mut self, what: &str) -> Result<(usize, Vec<f64>)> {
        let Some((i, line)) = self.inner.next() else {
            return Err(Error::parse("end of file", format!("missing {what}")));
        };
        let lineno = i + 1;
        let values = line
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    Error::parse(format!("line {lineno} ({what})"), format!("`{t}` is not a number"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((lineno, values))
    }

    fn exactly(&mut self, what: &str, n: usize) -> Result<Vec<f64>> {
        let (lineno, v) = self.numbers(what)?;
        if v.len() != n {
            return Err(Error::parse(
                format!("line {lineno} ({what})"),
                format!("expected {n} values, found {}", v.len()),
            ));
        }
        Ok(v)
    }

    fn rest_is_blank(&mut self) -> Result<()> {
        match self.inner.find(|(_, l)| !l.trim().is_empty()) {
            Some((i, _)) => Err(Error::parse(format!("line {}", i + 1), "unexpected trailing data")),
            None => Ok(()),
        }
    }
}

fn to_count(v: f64, lineno_what: &str) -> Result<usize> {
    if v.fract() == 0.0 && v >= 1.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::parse(lineno_what, format!("`{v}` is not a positive integer")))
    }
}

pub fn parse_nnet(text: &str) -> Result<(Network, NNetMeta)> {
    let mut lines = Lines::new(text);

    let (head_line, head) = lines.numbers("header")?;
    let head_loc = format!("line {head_line} (header)");
    if head.len() < 3 {
        return Err(Error::parse(
            head_loc,
            "expected numLayers,inputSize,outputSize,maxLayerSize",
        ));
    }
    let num_layers = to_count(head[0], &head_loc)?;
    let input_size = to_count(head[1], &head_loc)?;
    let output_size = to_count(head[2], &head_loc)?;

    let (sizes_line, raw_sizes) = lines.numbers("layer sizes")?;
    let sizes_loc = format!("line {sizes_line} (layer sizes)");
    if raw_sizes.len() != num_layers + 1 {
        return Err(Error::parse(
            sizes_loc,
            format!("expected {} sizes, found {}", num_layers + 1, raw_sizes.len()),
        ));
    }
    let sizes = raw_sizes
        .iter()
        .map(|v| to_count(*v, &sizes_loc))
        .collect::<Result<Vec<_>>>()?;
    if sizes[0] != input_size || sizes[num_layers] != output_size {
        return Err(Error::parse(
            sizes_loc,
            format!("sizes {sizes:?} disagree with inputSize {input_size} / outputSize {output_size}"),
        ));
    }

    lines.numbers("legacy flag")?;
    let meta = NNetMeta {
        input_mins: lines.exactly("input mins", input_size)?,
        input_maxes: lines.exactly("input maxes", input_size)?,
        means: lines.exactly("means", input_size + 1)?,
        ranges: lines.exactly("ranges", input_size + 1)?,
    };
    meta.validate(input_size)
        .map_err(|e| Error::parse("normalization lines", e.to_string()))?;

    let mut layers = Vec::with_capacity(num_layers);
    for k in 0..num_layers {
        let (rows, cols) = (sizes[k + 1], sizes[k]);
        let mut w = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            w.extend(lines.exactly(&format!("layer {k} weight row {r}"), cols)?);
        }
        let mut b = Vec::with_capacity(rows);
        for r in 0..rows {
            b.extend(lines.exactly(&format!("layer {k} bias {r}"), 1)?);
        }
        let act = if k + 1 == num_layers {
            Activation::Identity
        } else {
            Activation::Relu
        };
        layers.push(Layer::uniform(
            Array2::from_shape_vec((rows, cols), w).expect("rows * cols values"),
            Array1::from(b),
            act,
        ));
    }
    lines.rest_is_blank()?;

    let net = Network::new(input_size, layers).map_err(|e| Error::parse("network", e.to_string()))?;
    Ok((net, meta))
}

/// 17 significant digits: enough to round-trip any `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join<I: IntoIterator<Item = String>>(items: I) -> String {
    items.into_iter().collect::<Vec<_>>().join(",")
}

/// Serializes a network whose hidden layers are all ReLU and whose
/// output layer is Identity.
pub fn write_nnet(net: &Network, meta: &NNetMeta) -> Result<String> {
    meta.validate(net.input_dim())?;
    let n = net.layer_count();
    for (k, layer) in net.layers().iter().enumerate() {
        let want = if k + 1 == n {
            Activation::Identity
        } else {
            Activation::Relu
        };
        if layer.activations.iter().any(|a| *a != want) {
            return Err(Error::UnsupportedShape(format!(
                "layer {k} must be all {want} to be written as NNet"
            )));
        }
    }
    let widths = net.widths();
    let max_width = widths.iter().copied().max().unwrap_or(0);
    let mut out = String::new();
    out.push_str("// written by nnbisim\n");
    out.push_str(&format!(
        "{n},{},{},{max_width}\n",
        net.input_dim(),
        net.output_dim()
    ));
    out.push_str(&join(widths.iter().map(usize::to_string)));
    out.push('\n');
    out.push_str("0\n");
    for v in [&meta.input_mins, &meta.input_maxes, &meta.means, &meta.ranges] {
        out.push_str(&join(v.iter().map(|x| fmt_f64(*x))));
        out.push('\n');
    }
    for layer in net.layers() {
        for row in layer.weights.rows() {
            out.push_str(&join(row.iter().map(|x| fmt_f64(*x))));
            out.push('\n');
        }
        for b in &layer.bias {
            out.push_str(&fmt_f64(*b));
            out.push('\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::random_network;

    pub(crate) const MINIMAL: &str = "// minimal network\n\
        1,1,1,1,\n\
        1,1,\n\
        0,\n\
        -10.0,\n\
        10.0,\n\
        0.0,0.0,\n\
        1.0,1.0,\n\
        2.0,\n\
        0.5,\n";

    #[test]
    fn minimal_file_evaluates() {
        let (net, meta) = parse_nnet(MINIMAL).unwrap();
        assert_eq!(net.layer_count(), 1);
        assert_eq!(net.layers()[0].activations, vec![Activation::Identity]);
        assert_eq!(net.eval_slice(&[1.0]).unwrap(), vec![2.5]);
        assert_eq!(eval_normalized(&net, &meta, &[1.0]).unwrap(), vec![2.5]);
        // clamped to the input max of 10
        assert_eq!(eval_normalized(&net, &meta, &[50.0]).unwrap(), vec![20.5]);
    }

    #[test]
    fn minimal_file_through_json() {
        use crate::formats::{parse_json_net, write_json_net};
        let (net, _) = parse_nnet(MINIMAL).unwrap();
        let json = parse_json_net(&write_json_net(&net)).unwrap();
        for x in [-3.0, 0.0, 1.0, 7.25] {
            assert_eq!(json.eval_slice(&[x]).unwrap(), net.eval_slice(&[x]).unwrap());
        }
    }

    #[test]
    fn crlf_and_scientific_notation() {
        let text = MINIMAL.replace('\n', "\r\n").replace("2.0,", "2e0,");
        let (net, _) = parse_nnet(&text).unwrap();
        assert_eq!(net.eval_slice(&[1.0]).unwrap(), vec![2.5]);
    }

    #[test]
    fn normalization_applies_means_and_ranges() {
        let text = MINIMAL.replace("0.0,0.0,", "1.0,3.0,").replace("1.0,1.0,", "2.0,4.0,");
        let (net, meta) = parse_nnet(&text).unwrap();
        // ((5 - 1) / 2) * 2 + 0.5 = 4.5, then * 4 + 3
        assert_eq!(eval_normalized(&net, &meta, &[5.0]).unwrap(), vec![21.0]);
    }

    #[test]
    fn wrong_sizes_line_is_reported() {
        let text = MINIMAL.replace("1,1,\n0,", "1,1,1,\n0,");
        let err = parse_nnet(&text).unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, "line 3 (layer sizes)"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_tokens_and_counts() {
        let err = parse_nnet(&MINIMAL.replace("2.0,", "two,")).unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location.starts_with("line 9")));
        let err = parse_nnet(&MINIMAL.replace("\n0.5,\n", "\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = parse_nnet(&format!("{MINIMAL}1.0\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "line 11"));
        let err = parse_nnet(&MINIMAL.replace("1.0,1.0,", "0.0,1.0,")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = random_network(&[5, 7, 6, 5], 3.0, 21).unwrap();
        let meta = NNetMeta {
            input_mins: vec![-1.0, -2.0, 0.1, -0.3, 0.0],
            input_maxes: vec![1.0, 2.0, 0.7, 1e-3, 1.0 / 3.0],
            means: vec![0.1, 0.2, 0.3, 0.4, 0.5, 7.51888402010059],
            ranges: vec![1.0, 2.0, 3.0, 4.0, 5.0, 373.94992],
        };
        let text = write_nnet(&net, &meta).unwrap();
        assert!(!text.lines().any(|l| l.ends_with(',')));
        let (net2, meta2) = parse_nnet(&text).unwrap();
        assert_eq!(net2, net);
        assert_eq!(meta2, meta);
        assert_eq!(write_nnet(&net2, &meta2).unwrap(), text);
    }

    #[test]
    fn mixed_activations_cannot_be_written() {
        let a = random_network(&[2, 3, 1], 1.0, 1).unwrap();
        let merged = crate::merge::merge(&a, &a).unwrap();
        assert!(write_nnet(&merged, &NNetMeta::identity(2)).is_err());
    }
}
