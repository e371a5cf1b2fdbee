//! Text handling for BIM family names: rule-based simplification to a core
//! object class, and detector prompt construction.

use crate::error::{Error, Result};

const MAX_WORDS: usize = 6;

const COLORS: &[&str] = &[
    "orange", "red", "yellow", "green", "blue", "white", "black", "grey", "gray", "brown", "silver", "purple",
    "pink",
];

const SIZES: &[&str] = &["small", "medium", "large", "xl", "xs", "mini", "std", "standard", "default", "type"];

fn is_noise(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_digit()) || COLORS.contains(&token) || SIZES.contains(&token)
}

/// Splits `camelCase` / `PascalCase` runs; leaves acronyms and hyphenated
/// words (`I-Beam`) intact.
fn split_camel(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut parts = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let prev_lower = i > 0 && chars[i - 1].is_lowercase();
        if c.is_uppercase() && prev_lower && !cur.is_empty() {
            parts.push(std::mem::take(&mut cur));
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        parts.push(cur);
    }
    parts
}

/// Reduces a verbose family name to its core object class, e.g.
/// `Traffic_Cone_Orange_70cm` → `traffic cone`.
///
/// Tokens carrying digits (sizes, grades, section codes), colors and size
/// words are dropped. If nothing survives, the cleaned full name is kept.
pub fn simplify_label(raw: &str) -> Result<String> {
    let tokens: Vec<String> = raw
        .split(|c: char| c == '_' || c.is_whitespace() || c == '/' || c == ',' || c == ':')
        .filter(|t| !t.is_empty())
        .flat_map(split_camel)
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric() && c != '-').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(Error::invalid("label is empty"));
    }
    let kept: Vec<&String> = tokens.iter().filter(|t| !is_noise(t)).take(MAX_WORDS).collect();
    let out = if kept.is_empty() {
        tokens.iter().take(MAX_WORDS).cloned().collect::<Vec<_>>().join(" ")
    } else {
        kept.into_iter().cloned().collect::<Vec<_>>().join(" ")
    };
    Ok(out)
}

/// Typical material for single-word classes, used to make detector prompts
/// more specific ("wall" → "concrete wall").
const DEFAULT_MATERIAL: &[(&str, &str)] = &[
    ("wall", "concrete"),
    ("pillar", "concrete"),
    ("column", "concrete"),
    ("slab", "concrete"),
    ("crate", "wooden"),
    ("pallet", "wooden"),
    ("barrel", "steel"),
];

fn article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// One phrase per label, `a <label> in a <context>`, joined with `"; "`.
pub fn build_detection_prompt(labels: &[String], context: &str) -> Result<String> {
    if labels.is_empty() {
        return Err(Error::invalid("at least one label is required"));
    }
    let context = context.trim();
    let phrases: Vec<String> = labels
        .iter()
        .map(|label| {
            let label = label.trim();
            let described = match DEFAULT_MATERIAL.iter().find(|(w, _)| label.eq_ignore_ascii_case(w)) {
                Some((_, material)) => format!("{material} {}", label.to_lowercase()),
                None => label.to_string(),
            };
            if context.is_empty() {
                format!("{} {described}", article(&described))
            } else {
                format!("{} {described} in {} {context}", article(&described), article(context))
            }
        })
        .collect();
    Ok(phrases.join("; "))
}
