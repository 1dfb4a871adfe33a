//! Certified output-discrepancy bounds between feedforward ReLU networks.
//!
//! Two networks with the same input and output widths are merged into a
//! single network whose output is the difference of theirs
//! ([`merge::merge`]). Reachability on the merged network over an input
//! box then bounds the largest discrepancy, either with interval
//! propagation ([`interval`]) or exactly with star sets ([`star`]).
//! The bound lets a compressed network stand in for the original during
//! safety verification ([`verify::verify_via_compressed`]).

pub mod bisim;
pub mod error;
pub mod formats;
pub mod interval;
pub mod lp;
pub mod merge;
pub mod network;
pub mod norm;
pub mod reach;
pub mod star;
pub mod verify;

pub use bisim::{bisim_error_lower_mc, bisim_error_upper, check_assured, ErrorBound};
pub use error::{Error, Result};
pub use merge::{difference_eval, merge};
pub use network::{random_network, Activation, IntervalBox, Layer, Network};
pub use norm::NormKind;
pub use reach::{Method, ReachOptions};
pub use verify::{inflate_spec, verify, verify_via_compressed, BisimReport, LinearSpec, Verdict};
