//! Search-space definition files (TOML) and vocabulary files.
//!
//! ```toml
//! # pareto-tuner space v1
//! [[param]]
//! name = "inference_steps"
//! kind = "integer"
//! lo = 1
//! hi = 100
//!
//! [[param]]
//! name = "positive_prompt"
//! kind = "tokens"
//! vocabulary = ["photograph", "color", "ultra real"]
//! ```
//!
//! `kind` is `integer`, `real` or `tokens`. Parameters keep file order, which is also the gene
//! order. A vocabulary file lists one token per line; blank lines and lines starting with `#`
//! are skipped.

use std::path::Path;

use pareto_tuner_core::SearchSpace;

use crate::config::ConfigError;

pub const SPACE_HEADER: &str = "# pareto-tuner space v1";

pub fn space_to_string(space: &SearchSpace) -> String {
    let body = toml::to_string(space).expect("search space serializes");
    format!("{SPACE_HEADER}\n{body}")
}

pub fn parse_space(text: &str, path: &Path) -> Result<SearchSpace, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })
}

pub fn load_space(path: &Path) -> Result<SearchSpace, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    parse_space(&text, path)
}

pub fn load_vocabulary(path: &Path) -> Result<Vec<String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pareto_tuner_core::ParamSpec;

    #[test]
    fn default_space_round_trips() {
        let space = SearchSpace::default_space();
        let text = space_to_string(&space);
        assert!(text.starts_with(SPACE_HEADER));
        assert!(text.contains("kind = \"tokens\""));
        assert_eq!(parse_space(&text, Path::new("s.toml")).unwrap(), space);
    }

    #[test]
    fn invalid_spaces_are_rejected() {
        let p = Path::new("s.toml");
        let inverted = "[[param]]\nname = \"x\"\nkind = \"real\"\nlo = 2.0\nhi = 1.0\n";
        assert!(parse_space(inverted, p).is_err());
        let unknown_kind = "[[param]]\nname = \"x\"\nkind = \"complex\"\n";
        assert!(parse_space(unknown_kind, p).is_err());
        let ok = "[[param]]\nname = \"x\"\nkind = \"real\"\nlo = -1\nhi = 1\n";
        let space = parse_space(ok, p).unwrap();
        assert_eq!(space.params(), [ParamSpec::real("x", -1.0, 1.0)]);
    }
}
