//! Keyword featurization of raw query text.
//!
//! A query maps to a five-component vector: normalized character length,
//! complexity-keyword density, and capped hit counts against three domain
//! keyword sets (drug, protein, clinical). All components land in [0, 1].

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::context::ContextVector;
use crate::error::{Error, Result};
use crate::math::fnv1a_64;

/// A raw text query. The archetype label is simulation bookkeeping; the
/// policy path never reads it.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Query {
    pub text: String,
    pub id: String,
    pub archetype: Option<String>,
}

impl Query {
    pub fn new(text: impl Into<String>, id: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("query text is empty"));
        }
        Ok(Self {
            text,
            id: id.into(),
            archetype: None,
        })
    }

    pub fn with_archetype(mut self, archetype: impl Into<String>) -> Self {
        self.archetype = Some(archetype.into());
        self
    }
}

/// The ordered feature stack. Index positions are part of the contract:
/// warm start reads the complexity component by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    names: Vec<&'static str>,
}

impl FeatureSpec {
    pub const LENGTH: usize = 0;
    pub const COMPLEXITY: usize = 1;
    pub const DRUG: usize = 2;
    pub const PROTEIN: usize = 3;
    pub const CLINICAL: usize = 4;

    /// The standard five-feature stack.
    pub fn standard() -> Self {
        Self {
            names: alloc::vec!["length", "complexity", "drug", "protein", "clinical"],
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[&'static str] {
        &self.names
    }
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self::standard()
    }
}

/// Keyword sets driving the complexity and domain features.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub complexity: BTreeSet<String>,
    pub drug: BTreeSet<String>,
    pub protein: BTreeSet<String>,
    pub clinical: BTreeSet<String>,
    /// Character count at which the length feature saturates.
    pub length_scale: f64,
}

/// Default saturation point of the length feature, in characters.
pub const DEFAULT_LENGTH_SCALE: f64 = 50.0;

/// Hit count at which a domain feature saturates.
const DOMAIN_HIT_CAP: f64 = 2.0;

impl Lexicon {
    pub fn new(
        complexity: BTreeSet<String>,
        drug: BTreeSet<String>,
        protein: BTreeSet<String>,
        clinical: BTreeSet<String>,
    ) -> Result<Self> {
        let lex = Self {
            complexity,
            drug,
            protein,
            clinical,
            length_scale: DEFAULT_LENGTH_SCALE,
        };
        lex.validate()?;
        Ok(lex)
    }

    pub fn with_length_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("length_scale must be positive"));
        }
        self.length_scale = scale;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        for (name, set) in self.sections() {
            if set.is_empty() {
                return Err(Error::invalid(format!("lexicon section [{name}] is empty")));
            }
            for token in set {
                if token.is_empty()
                    || token.chars().any(|c| !c.is_alphanumeric())
                    || token.chars().any(|c| c.is_uppercase())
                {
                    return Err(Error::invalid(format!(
                        "lexicon token '{token}' in [{name}] must be a single lowercase \
                         alphanumeric word"
                    )));
                }
            }
        }
        Ok(())
    }

    fn sections(&self) -> [(&'static str, &BTreeSet<String>); 4] {
        [
            ("complexity", &self.complexity),
            ("drug", &self.drug),
            ("protein", &self.protein),
            ("clinical", &self.clinical),
        ]
    }

    /// Parse the line-oriented lexicon format: one token per line,
    /// sections opened by `[complexity]`, `[drug]`, `[protein]`,
    /// `[clinical]`; `#` starts a comment; blank lines are skipped.
    pub fn parse(content: &str) -> Result<Self> {
        let mut complexity = BTreeSet::new();
        let mut drug = BTreeSet::new();
        let mut protein = BTreeSet::new();
        let mut clinical = BTreeSet::new();
        let mut current: Option<&mut BTreeSet<String>> = None;

        for (lineno, raw) in content.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => raw[..i].trim(),
                None => raw.trim(),
            };
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                current = match &line[1..line.len() - 1] {
                    "complexity" => Some(&mut complexity),
                    "drug" => Some(&mut drug),
                    "protein" => Some(&mut protein),
                    "clinical" => Some(&mut clinical),
                    other => {
                        return Err(Error::invalid(format!(
                            "line {}: unknown lexicon section [{other}]",
                            lineno + 1
                        )))
                    }
                };
                continue;
            }
            let section = current.as_deref_mut().ok_or_else(|| {
                Error::invalid(format!(
                    "line {}: token '{line}' appears before any section header",
                    lineno + 1
                ))
            })?;
            section.insert(line.to_lowercase());
        }
        Self::new(complexity, drug, protein, clinical)
    }

    /// Stable fingerprint of the lexicon contents, recorded in state
    /// files so a posterior is never silently replayed under different
    /// featurization.
    pub fn fingerprint(&self) -> u64 {
        let mut canon = String::new();
        for (name, set) in self.sections() {
            canon.push('[');
            canon.push_str(name);
            canon.push(']');
            for token in set {
                canon.push_str(token);
                canon.push('\n');
            }
        }
        canon.push_str(&format!("length_scale={}", self.length_scale));
        fnv1a_64(canon.as_bytes())
    }
}

/// Lowercase the text and split it into alphanumeric runs. Matching is
/// whole-word: "aspirin" never matches inside "aspirins".
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(ToString::to_string)
        .collect()
}

fn distinct_hits(tokens: &BTreeSet<&str>, set: &BTreeSet<String>) -> usize {
    set.iter().filter(|kw| tokens.contains(kw.as_str())).count()
}

/// Featurize a query.
///
/// - length: `min(char_count / length_scale, 1)`
/// - complexity: fraction of the complexity keyword set present
/// - drug/protein/clinical: `min(distinct_hits / 2, 1)`
pub fn extract(query: &Query, lexicon: &Lexicon, spec: &FeatureSpec) -> Result<ContextVector> {
    let trimmed = query.text.trim();
    if trimmed.is_empty() {
        return Err(Error::invalid("query text is empty"));
    }
    let tokens = tokenize(trimmed);
    let token_set: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();

    let char_count = trimmed.chars().count() as f64;
    let length = (char_count / lexicon.length_scale).min(1.0);
    let complexity =
        distinct_hits(&token_set, &lexicon.complexity) as f64 / lexicon.complexity.len() as f64;
    let domain =
        |set: &BTreeSet<String>| (distinct_hits(&token_set, set) as f64 / DOMAIN_HIT_CAP).min(1.0);

    let mut values = alloc::vec![0.0; spec.dim()];
    values[FeatureSpec::LENGTH] = length;
    values[FeatureSpec::COMPLEXITY] = complexity;
    values[FeatureSpec::DRUG] = domain(&lexicon.drug);
    values[FeatureSpec::PROTEIN] = domain(&lexicon.protein);
    values[FeatureSpec::CLINICAL] = domain(&lexicon.clinical);
    ContextVector::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn frozen_lexicon() -> Lexicon {
        Lexicon::parse(
            "[complexity]\nhow\nwhy\nexplain\ndescribe\n\
             [drug]\naspirin\nwarfarin\nibuprofen\n\
             [protein]\np53\nkinase\ncrispr\n\
             [clinical]\ndiagnosis\ntreatment\ndose\n",
        )
        .unwrap()
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(
            tokenize("Half-life of Aspirin!"),
            ["half", "life", "of", "aspirin"]
        );
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("p53"), ["p53"]);
        assert_eq!(tokenize("  --  "), Vec::<String>::new());
    }

    #[test]
    fn extract_aspirin_query() {
        let lex = frozen_lexicon();
        let q = Query::new("What is the half-life of aspirin?", "q1").unwrap();
        let x = extract(&q, &lex, &FeatureSpec::standard()).unwrap();
        // 33 characters against a scale of 50.
        assert!((x.get(FeatureSpec::LENGTH).unwrap() - 0.66).abs() < 1e-12);
        assert_eq!(x.get(FeatureSpec::COMPLEXITY).unwrap(), 0.0);
        // One drug hit, capped-hit normalization min(1/2, 1).
        assert_eq!(x.get(FeatureSpec::DRUG).unwrap(), 0.5);
        assert_eq!(x.get(FeatureSpec::PROTEIN).unwrap(), 0.0);
        assert_eq!(x.get(FeatureSpec::CLINICAL).unwrap(), 0.0);
    }

    #[test]
    fn extract_complexity_fraction() {
        let lex = frozen_lexicon();
        let q = Query::new("Explain how and why p53 works", "q2").unwrap();
        let x = extract(&q, &lex, &FeatureSpec::standard()).unwrap();
        // 3 of the 4 frozen complexity keywords appear.
        assert!((x.get(FeatureSpec::COMPLEXITY).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(x.get(FeatureSpec::PROTEIN).unwrap(), 0.5);
    }

    #[test]
    fn length_saturates_at_scale() {
        let lex = frozen_lexicon();
        let q = Query::new("x".repeat(80), "q3").unwrap();
        let x = extract(&q, &lex, &FeatureSpec::standard()).unwrap();
        assert_eq!(x.get(FeatureSpec::LENGTH).unwrap(), 1.0);
    }

    #[test]
    fn domain_hits_cap_at_two() {
        let lex = frozen_lexicon();
        let q = Query::new("aspirin warfarin ibuprofen", "q4").unwrap();
        let x = extract(&q, &lex, &FeatureSpec::standard()).unwrap();
        assert_eq!(x.get(FeatureSpec::DRUG).unwrap(), 1.0);
    }

    #[test]
    fn repeated_keyword_counts_once() {
        let lex = frozen_lexicon();
        let q = Query::new("aspirin aspirin aspirin", "q5").unwrap();
        let x = extract(&q, &lex, &FeatureSpec::standard()).unwrap();
        assert_eq!(x.get(FeatureSpec::DRUG).unwrap(), 0.5);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(Query::new("   ", "q").is_err());
        let mut q = Query::new("ok", "q").unwrap();
        q.text = "  \t ".into();
        assert!(extract(&q, &frozen_lexicon(), &FeatureSpec::standard()).is_err());
    }

    #[test]
    fn archetype_label_does_not_change_features() {
        let lex = frozen_lexicon();
        let spec = FeatureSpec::standard();
        let a = Query::new("Why does warfarin interact?", "q6").unwrap();
        let b = a.clone().with_archetype("hidden");
        assert_eq!(
            extract(&a, &lex, &spec).unwrap(),
            extract(&b, &lex, &spec).unwrap()
        );
    }

    #[test]
    fn parse_rejects_bad_files() {
        assert!(Lexicon::parse("token-before-section\n[complexity]\nhow").is_err());
        assert!(Lexicon::parse("[unknown]\nhow").is_err());
        // Missing sections leave an empty set.
        assert!(Lexicon::parse("[complexity]\nhow").is_err());
        // Multi-word entries are not supported.
        let two_words = "[complexity]\nhow now\n[drug]\na\n[protein]\nb\n[clinical]\nc";
        assert!(Lexicon::parse(two_words).is_err());
    }

    #[test]
    fn parse_strips_comments_and_normalizes_case() {
        let lex = Lexicon::parse(
            "# a comment\n[complexity]\nHow # trailing\nwhy\n\
             [drug]\naspirin\n[protein]\np53\n[clinical]\ndose\n",
        )
        .unwrap();
        assert!(lex.complexity.contains("how"));
        assert!(lex.complexity.contains("why"));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = frozen_lexicon();
        let mut b = frozen_lexicon();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.drug.insert("statin".into());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}

#[cfg(test)]
mod properties {
    use super::tests::frozen_lexicon;
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn features_stay_in_unit_box(text in "\\PC{1,120}") {
            let lex = frozen_lexicon();
            if let Ok(q) = Query::new(text, "p") {
                let x = extract(&q, &lex, &FeatureSpec::standard()).unwrap();
                for v in x.values() {
                    prop_assert!((0.0..=1.0).contains(v));
                }
            }
        }

        #[test]
        fn appending_complexity_keyword_never_decreases_complexity(
            text in "[a-z ]{1,60}",
        ) {
            let lex = frozen_lexicon();
            let spec = FeatureSpec::standard();
            if let Ok(q) = Query::new(text.clone(), "p") {
                let before = extract(&q, &lex, &spec).unwrap();
                let q2 = Query::new(alloc::format!("{text} explain"), "p").unwrap();
                let after = extract(&q2, &lex, &spec).unwrap();
                prop_assert!(
                    after.get(FeatureSpec::COMPLEXITY).unwrap()
                        >= before.get(FeatureSpec::COMPLEXITY).unwrap()
                );
            }
        }

        #[test]
        fn token_order_does_not_matter(words in proptest::collection::vec("[a-z]{1,10}", 1..12)) {
            let lex = frozen_lexicon();
            let spec = FeatureSpec::standard();
            let forward = words.join(" ");
            let mut rev = words.clone();
            rev.reverse();
            let backward = rev.join(" ");
            let qa = Query::new(forward, "p").unwrap();
            let qb = Query::new(backward, "p").unwrap();
            let xa = extract(&qa, &lex, &spec).unwrap();
            let xb = extract(&qb, &lex, &spec).unwrap();
            // Same length because words are identical up to order; all
            // other features are order-free set lookups.
            prop_assert_eq!(xa.values(), xb.values());
        }

        #[test]
        fn surrounding_whitespace_is_ignored(text in "[a-z][a-z ]{0,40}[a-z]") {
            let lex = frozen_lexicon();
            let spec = FeatureSpec::standard();
            let qa = Query::new(text.clone(), "p").unwrap();
            let qb = Query::new(alloc::format!("  {text}\t\n"), "p").unwrap();
            let xa = extract(&qa, &lex, &spec).unwrap();
            let xb = extract(&qb, &lex, &spec).unwrap();
            prop_assert_eq!(xa.values(), xb.values());
        }
    }
}
