//! Tokenization and lexical cue matching shared by scoring, safeguards and
//! slot extraction.

use std::collections::HashSet;

use regex::{Regex, RegexBuilder};

/// Lowercase word tokens, split on non-alphanumeric characters,
/// deduplicated in first-occurrence order.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for word in text.split(|c: char| !c.is_alphanumeric()) {
        if word.is_empty() {
            continue;
        }
        let lower = word.to_lowercase();
        if seen.insert(lower.clone()) {
            out.push(lower);
        }
    }
    out
}

pub fn token_set(text: &str) -> HashSet<String> {
    tokenize(text).into_iter().collect()
}

/// Case-insensitive substring match; returns the first cue found.
pub fn find_substring_cue<'a>(text: &str, cues: &'a [String]) -> Option<&'a str> {
    let lower = text.to_lowercase();
    cues.iter()
        .map(|c| c.trim())
        .find(|c| !c.is_empty() && lower.contains(&c.to_lowercase()))
}

/// Whole-word, case-insensitive matcher for a list of (possibly multi-word)
/// markers. Internal whitespace in a marker matches any run of whitespace.
#[derive(Debug, Clone)]
pub struct MarkerMatcher {
    re: Option<Regex>,
}

impl MarkerMatcher {
    pub fn new(markers: &[String]) -> Self {
        let alts: Vec<String> = markers
            .iter()
            .map(|m| m.split_whitespace().map(regex::escape).collect::<Vec<_>>().join(r"\s+"))
            .filter(|m| !m.is_empty())
            .collect();
        if alts.is_empty() {
            return Self { re: None };
        }
        // Longer markers first so "after that" wins over a hypothetical "after".
        let mut alts = alts;
        alts.sort_by_key(|a| std::cmp::Reverse(a.len()));
        let pattern = format!(r"\b(?:{})\b", alts.join("|"));
        let re = RegexBuilder::new(&pattern)
            .case_insensitive(true)
            .build()
            .expect("escaped marker pattern is valid");
        Self { re: Some(re) }
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.re.as_ref().is_some_and(|re| re.is_match(text))
    }

    /// Splits `text` at every marker occurrence, dropping clauses that hold no
    /// alphanumeric content.
    pub fn split_clauses<'t>(&self, text: &'t str) -> Vec<&'t str> {
        let pieces: Vec<&str> = match &self.re {
            Some(re) => re.split(text).collect(),
            None => vec![text],
        };
        pieces
            .into_iter()
            .map(|p| p.trim_matches(|c: char| !c.is_alphanumeric() && c != '"'))
            .filter(|p| p.chars().any(char::is_alphanumeric))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn markers() -> Vec<String> {
        ["first", "then", "after that", "next", "finally"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn tokenize_lowercases_and_dedups() {
        assert_eq!(tokenize("Book a FLIGHT, book a flight!"), vec!["book", "a", "flight"]);
        assert_eq!(tokenize("weather_api"), vec!["weather", "api"]);
        assert!(tokenize("  ,.; ").is_empty());
    }

    #[test]
    fn markers_are_whole_word() {
        let m = MarkerMatcher::new(&markers());
        assert!(m.is_match("First check weather"));
        assert!(m.is_match("do this and after   that do that"));
        assert!(!m.is_match("firstly, the authentic thenar"));
        assert!(!m.is_match("nextdoor"));
    }

    #[test]
    fn clause_split_drops_empty_pieces() {
        let m = MarkerMatcher::new(&markers());
        assert_eq!(
            m.split_clauses("first check weather, then book a cab"),
            vec!["check weather", "book a cab"]
        );
        assert_eq!(m.split_clauses("no markers here"), vec!["no markers here"]);
    }

    #[test]
    fn substring_cue_is_case_insensitive() {
        let cues = vec!["password".to_string(), "without authorization".to_string()];
        assert_eq!(find_substring_cue("Dump every PASSWORD", &cues), Some("password"));
        assert_eq!(find_substring_cue("book a taxi", &cues), None);
    }
}
