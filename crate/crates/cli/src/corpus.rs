//! The built-in problem corpus. Each entry ships as a TOML file under
//! `corpus/` so the same definitions are usable from the command line.

use crate::config::{HarnessError, RunConfig};

pub const CORPUS_TOML: &[(&str, &str)] = &[
    (
        "quadratic-decay",
        include_str!("../corpus/quadratic-decay.toml"),
    ),
    ("lasso", include_str!("../corpus/lasso.toml")),
    (
        "box-quadratic",
        include_str!("../corpus/box-quadratic.toml"),
    ),
    (
        "cosine-quadratic",
        include_str!("../corpus/cosine-quadratic.toml"),
    ),
    ("quartic-box", include_str!("../corpus/quartic-box.toml")),
    ("halfline", include_str!("../corpus/halfline.toml")),
];

/// Parses every built-in configuration.
pub fn corpus() -> Result<Vec<RunConfig>, HarnessError> {
    CORPUS_TOML
        .iter()
        .map(|(_, text)| RunConfig::from_toml_str(text))
        .collect()
}
