//! Built-in data files and loaders for lexicons and environments.

use std::path::Path;

use anyhow::{bail, Context, Result};
use quiver_core::features::Lexicon;
use quiver_core::sim::EnvironmentSpec;

/// Default keyword lexicon shipped with the binary.
pub const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.txt");

/// Built-in environments, addressable by name from `--env`.
pub const BUILTIN_ENVS: &[(&str, &str)] = &[
    ("strategy", include_str!("../data/strategy.json")),
    ("tool", include_str!("../data/tool.json")),
    ("domain", include_str!("../data/domain.json")),
];

/// Load the default lexicon or one from a file.
pub fn load_lexicon(path: Option<&Path>) -> Result<Lexicon> {
    let (content, what) = match path {
        Some(p) => (
            std::fs::read_to_string(p)
                .with_context(|| format!("reading lexicon file {}", p.display()))?,
            p.display().to_string(),
        ),
        None => (BUILTIN_LEXICON.to_string(), "builtin lexicon".to_string()),
    };
    Lexicon::parse(&content).with_context(|| format!("parsing {what}"))
}

/// Resolve `--env`: a builtin name (`strategy` / `tool` / `domain`) or a
/// path to an environment JSON file.
pub fn load_env(name_or_path: &str) -> Result<EnvironmentSpec> {
    let content = match BUILTIN_ENVS.iter().find(|(name, _)| *name == name_or_path) {
        Some((_, json)) => (*json).to_string(),
        None => {
            let p = Path::new(name_or_path);
            if !p.exists() {
                bail!(
                    "environment '{name_or_path}' is neither a builtin \
                     (strategy, tool, domain) nor an existing file"
                );
            }
            std::fs::read_to_string(p)
                .with_context(|| format!("reading environment file {name_or_path}"))?
        }
    };
    let env: EnvironmentSpec = serde_json::from_str(&content)
        .with_context(|| format!("parsing environment '{name_or_path}'"))?;
    env.validate()
        .with_context(|| format!("validating environment '{name_or_path}'"))?;
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use quiver_core::features::{extract, FeatureSpec};
    use quiver_core::rng::{stream, streams};
    use quiver_core::sim::generate_query;

    #[test]
    fn builtin_lexicon_parses_with_documented_sizes() {
        let lex = load_lexicon(None).unwrap();
        assert_eq!(lex.complexity.len(), 20);
        assert_eq!(lex.drug.len(), 50);
        assert_eq!(lex.protein.len(), 50);
        assert_eq!(lex.clinical.len(), 50);
    }

    #[test]
    fn builtin_envs_validate() {
        for (name, _) in BUILTIN_ENVS {
            let env = load_env(name).unwrap();
            assert!(!env.archetypes.is_empty(), "{name}");
        }
    }

    #[test]
    fn missing_env_is_an_error() {
        assert!(load_env("no_such_env").is_err());
    }

    /// Every shipped archetype must produce the feature signature its
    /// optimal action relies on, under the shipped lexicon.
    #[test]
    fn builtin_env_signatures_hold() {
        let lex = load_lexicon(None).unwrap();
        let spec = FeatureSpec::standard();
        for (name, _) in BUILTIN_ENVS {
            let env = load_env(name).unwrap();
            let mut rng = stream(0, streams::QUERIES);
            for i in 0..200 {
                let q = generate_query(&env, &mut rng, format!("{i}")).unwrap();
                let x = extract(&q, &lex, &spec).unwrap();
                let complexity = x.get(FeatureSpec::COMPLEXITY).unwrap();
                let drug = x.get(FeatureSpec::DRUG).unwrap();
                let protein = x.get(FeatureSpec::PROTEIN).unwrap();
                let clinical = x.get(FeatureSpec::CLINICAL).unwrap();
                match q.archetype.as_deref().unwrap() {
                    // Strategy env: the warm-start gate must see the
                    // right side of the 0.5 complexity threshold.
                    "simple_factoid" => {
                        assert_eq!(complexity, 0.0, "{}", q.text);
                        assert_eq!(drug, 1.0, "{}", q.text);
                    }
                    "complex_mechanism" => {
                        assert!(complexity > 0.5, "{} -> {complexity}", q.text);
                        assert_eq!(protein, 1.0, "{}", q.text);
                    }
                    "recent_research" => {
                        assert_eq!(protein, 1.0, "{}", q.text);
                        assert_eq!(complexity, 0.0, "{}", q.text);
                    }
                    "drug_interaction" => {
                        assert_eq!(drug, 1.0, "{}", q.text);
                        assert_eq!(protein, 0.0, "{}", q.text);
                    }
                    "mechanism_question" => {
                        assert!(complexity > 0.5, "{} -> {complexity}", q.text);
                        assert_eq!(drug, 0.0, "{}", q.text);
                    }
                    "dosage_calculation" => {
                        assert_eq!(clinical, 1.0, "{}", q.text);
                        assert_eq!(drug, 0.0, "{}", q.text);
                    }
                    "drug_mechanism" => {
                        assert_eq!(drug, 1.0, "{}", q.text);
                        assert_eq!(clinical, 0.0, "{}", q.text);
                    }
                    "protein_function" => {
                        assert_eq!(protein, 1.0, "{}", q.text);
                        assert_eq!(drug, 0.0, "{}", q.text);
                    }
                    "treatment_plan" => {
                        assert_eq!(clinical, 1.0, "{}", q.text);
                        assert_eq!(protein, 0.0, "{}", q.text);
                    }
                    "literature_review" => {
                        assert!(complexity > 0.5, "{} -> {complexity}", q.text);
                        assert_eq!(drug + protein + clinical, 0.0, "{}", q.text);
                    }
                    other => panic!("unknown archetype {other}"),
                }
            }
        }
    }
}
