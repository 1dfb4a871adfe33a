//! JSON network format with per-neuron activation tags:
//!
//! ```json
//! {"input_dim": 2,
//!  "layers": [{"weights": [[1.0, 0.0]], "bias": [0.0], "activations": ["relu"]}]}
//! ```

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Activation, Layer, Network};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetDoc {
    input_dim: usize,
    layers: Vec<LayerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activations: Vec<Activation>,
}

pub fn parse_json_net(text: &str) -> Result<Network> {
    let doc: NetDoc = serde_json::from_str(text).map_err(|e| {
        Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    if doc.input_dim == 0 {
        return Err(Error::parse("input_dim", "must be positive"));
    }
    if doc.layers.is_empty() {
        return Err(Error::parse("layers", "network has no layers"));
    }
    let mut prev = doc.input_dim;
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (k, l) in doc.layers.into_iter().enumerate() {
        let rows = l.weights.len();
        if rows == 0 {
            return Err(Error::parse(format!("layers[{k}].weights"), "no rows"));
        }
        if let Some(r) = l.weights.iter().position(|row| row.len() != prev) {
            return Err(Error::parse(
                format!("layers[{k}].weights[{r}]"),
                format!("expected {prev} columns, found {}", l.weights[r].len()),
            ));
        }
        if l.bias.len() != rows {
            return Err(Error::parse(
                format!("layers[{k}].bias"),
                format!("expected {rows} entries, found {}", l.bias.len()),
            ));
        }
        if l.activations.len() != rows {
            return Err(Error::parse(
                format!("layers[{k}].activations"),
                format!("expected {rows} entries, found {}", l.activations.len()),
            ));
        }
        let flat: Vec<f64> = l.weights.into_iter().flatten().collect();
        layers.push(Layer::new(
            Array2::from_shape_vec((rows, prev), flat).expect("checked row lengths"),
            Array1::from(l.bias),
            l.activations,
        ));
        prev = rows;
    }
    Network::new(doc.input_dim, layers).map_err(|e| Error::parse("layers", e.to_string()))
}

/// Pretty-printed JSON; floats use the shortest representation that
/// parses back to the same bits.
pub fn write_json_net(net: &Network) -> String {
    let doc = NetDoc {
        input_dim: net.input_dim(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerDoc {
                weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                bias: l.bias.to_vec(),
                activations: l.activations.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("finite values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merge::merge;
    use crate::network::random_network;

    #[test]
    fn merged_network_round_trip() {
        let a = random_network(&[3, 5, 4, 2], 2.0, 1).unwrap();
        let b = random_network(&[3, 3, 2], 2.0, 2).unwrap();
        let m = merge(&a, &b).unwrap();
        let back = parse_json_net(&write_json_net(&m)).unwrap();
        assert_eq!(back, m);
        assert!(back.has_mixed_layers());
    }

    #[test]
    fn shape_errors_carry_field_paths() {
        let bad_acts = r#"{"input_dim": 1, "layers": [
            {"weights": [[1.0], [2.0]], "bias": [0.0, 0.0], "activations": ["relu"]}]}"#;
        match parse_json_net(bad_acts).unwrap_err() {
            Error::Parse { location, .. } => assert_eq!(location, "layers[0].activations"),
            other => panic!("{other:?}"),
        }
        let bad_row = r#"{"input_dim": 2, "layers": [
            {"weights": [[1.0, 1.0], [2.0]], "bias": [0.0, 0.0], "activations": ["relu", "relu"]}]}"#;
        match parse_json_net(bad_row).unwrap_err() {
            Error::Parse { location, .. } => assert_eq!(location, "layers[0].weights[1]"),
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"input_dim": 1, "layers": [], "extra": 1}"#;
        assert!(matches!(parse_json_net(unknown), Err(Error::Parse { .. })));
        let bad_tag = r#"{"input_dim": 1, "layers": [
            {"weights": [[1.0]], "bias": [0.0], "activations": ["tanh"]}]}"#;
        assert!(matches!(parse_json_net(bad_tag), Err(Error::Parse { .. })));
    }
}
