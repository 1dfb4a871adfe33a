//! Network and problem file formats.

mod json;
mod nnet;
mod problem;

use std::fs;
use std::path::Path;

pub use json::{parse_json_net, write_json_net};
pub use nnet::{eval_normalized, parse_nnet, write_nnet, NNetMeta};
pub use problem::{parse_problem, Problem, ProblemOptions};

use crate::error::{Error, Result};
use crate::network::Network;

/// Reads a network, choosing the parser from the extension
/// (`.nnet`, otherwise JSON).
pub fn load_network(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let is_nnet = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("nnet"));
    let parsed = if is_nnet {
        parse_nnet(&text).map(|(net, _)| net)
    } else {
        parse_json_net(&text)
    };
    parsed.map_err(|e| match e {
        Error::Parse { location, message } => {
            Error::parse(format!("{}: {location}", path.display()), message)
        }
        other => other,
    })
}

pub fn load_problem(path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    parse_problem(&text).map_err(|e| match e {
        Error::Parse { location, message } => {
            Error::parse(format!("{}: {location}", path.display()), message)
        }
        other => other,
    })
}
