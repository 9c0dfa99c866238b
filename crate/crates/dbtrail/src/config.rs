//! `engine.toml`: search parameters and per-table title columns.
//!
//! ```toml
//! repetitions = 3
//! explore_iterations = 40
//! converge_iterations = 40
//! discrimination = 0.5
//! starting_points = 10
//! max_tree = 2000
//! seed = 0
//! length_damping = 1.0
//! position_discount = 0.75
//! repetition_discount = 0.25
//! gain_discount = 0.5
//! gain_depth = 3
//! page_size = 10
//!
//! [titles]
//! publication = "title"
//! author = "name"
//! ```
//!
//! Every key is optional.

use std::path::Path;

use dbtrail_core::EngineConfig;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}: {1}")]
    Parse(String, toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    repetitions: Option<u32>,
    explore_iterations: Option<u32>,
    converge_iterations: Option<u32>,
    discrimination: Option<f64>,
    starting_points: Option<usize>,
    max_tree: Option<usize>,
    seed: Option<u64>,
    length_damping: Option<f64>,
    position_discount: Option<f64>,
    repetition_discount: Option<f64>,
    gain_discount: Option<f64>,
    gain_depth: Option<u32>,
    page_size: Option<usize>,
    #[serde(default)]
    titles: std::collections::BTreeMap<String, String>,
}

pub fn parse_config(text: &str, origin: &str) -> Result<EngineConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(origin.into(), e))?;
    let mut c = EngineConfig::default();
    let b = &mut c.best;
    b.repetitions = file.repetitions.unwrap_or(b.repetitions);
    b.explore_iterations = file.explore_iterations.unwrap_or(b.explore_iterations);
    b.converge_iterations = file.converge_iterations.unwrap_or(b.converge_iterations);
    b.discrimination = file.discrimination.unwrap_or(b.discrimination);
    b.starting_points = file.starting_points.unwrap_or(b.starting_points);
    b.max_tree = file.max_tree.unwrap_or(b.max_tree);
    b.seed = file.seed.unwrap_or(b.seed);
    let s = &mut c.scoring;
    s.length_damping = file.length_damping.unwrap_or(s.length_damping);
    s.position_discount = file.position_discount.unwrap_or(s.position_discount);
    s.repetition_discount = file.repetition_discount.unwrap_or(s.repetition_discount);
    c.gain.discount = file.gain_discount.unwrap_or(c.gain.discount);
    c.gain.depth = file.gain_depth.unwrap_or(c.gain.depth);
    c.page_size = file.page_size.unwrap_or(c.page_size);
    c.titles = file.titles.into_iter().map(|(t, col)| (t.to_lowercase(), col.to_lowercase())).collect();
    validate(&c).map_err(|m| ConfigError::Invalid(format!("{origin}: {m}")))?;
    Ok(c)
}

fn validate(c: &EngineConfig) -> Result<(), String> {
    let in_range = |v: f64, lo: f64, hi: f64, lo_open: bool, hi_open: bool| {
        v.is_finite() && (if lo_open { v > lo } else { v >= lo }) && (if hi_open { v < hi } else { v <= hi })
    };
    if c.best.repetitions == 0 {
        return Err("repetitions must be at least 1".into());
    }
    if c.best.starting_points == 0 {
        return Err("starting_points must be at least 1".into());
    }
    if c.best.max_tree == 0 {
        return Err("max_tree must be at least 1".into());
    }
    if !(c.best.discrimination.is_finite() && c.best.discrimination >= 0.0) {
        return Err("discrimination must be finite and non-negative".into());
    }
    if !(c.scoring.length_damping.is_finite() && c.scoring.length_damping > 0.0) {
        return Err("length_damping must be positive".into());
    }
    if !in_range(c.scoring.position_discount, 0.0, 1.0, true, false) {
        return Err("position_discount must be in (0, 1]".into());
    }
    if !in_range(c.scoring.repetition_discount, 0.0, 1.0, true, true) {
        return Err("repetition_discount must be in (0, 1)".into());
    }
    if !in_range(c.gain.discount, 0.0, 1.0, true, true) {
        return Err("gain_discount must be in (0, 1)".into());
    }
    if c.gain.depth == 0 {
        return Err("gain_depth must be at least 1".into());
    }
    if c.page_size == 0 {
        return Err("page_size must be at least 1".into());
    }
    Ok(())
}

pub fn load_config(path: &Path) -> Result<EngineConfig, ConfigError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(origin.clone(), e))?;
    parse_config(&text, &origin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config("", "t").unwrap(), EngineConfig::default());
    }

    #[test]
    fn keys_override_defaults() {
        let c = parse_config("seed = 9\nmax_tree = 50\n[titles]\nAuthor = \"Name\"\n", "t").unwrap();
        assert_eq!(c.best.seed, 9);
        assert_eq!(c.best.max_tree, 50);
        assert_eq!(c.titles.get("author").map(String::as_str), Some("name"));
    }

    #[test]
    fn rejects_bad_values_and_keys() {
        assert!(parse_config("repetition_discount = 1.0", "t").is_err());
        assert!(parse_config("repetitions = 0", "t").is_err());
        assert!(parse_config("nonsense = 1", "t").is_err());
    }
}
