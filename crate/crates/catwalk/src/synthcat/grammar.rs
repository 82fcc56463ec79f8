//! Noun-phrase grammar: one sortal head plus brand/feature/color modifiers.
//!
//! The lexicon is the module-owned predicate table, not the catalog, so the
//! parser also accepts queries about combinations the catalog never produced.

use super::{Brand, ColorName, Feature, Pattern, Sortal, Style, SynthError};

/// Modifier predicate attached to a sortal head, in surface order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modifier {
    Brand(Brand),
    Feature(Feature),
    Color(ColorName),
}

/// A parsed noun phrase: exactly one sortal, any number of modifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NounPhrase {
    pub sortal: Sortal,
    pub modifiers: Vec<Modifier>,
}

impl NounPhrase {
    /// Canonical surface form: brands, body color, sortal, then the remaining
    /// modifiers after "with". A color immediately preceding a feature stays
    /// bound to that feature ("black high heels").
    pub fn text(&self) -> String {
        let mut brands = Vec::new();
        let mut body_color: Option<ColorName> = None;
        let mut tail: Vec<String> = Vec::new();
        let mut i = 0;
        while i < self.modifiers.len() {
            match self.modifiers[i] {
                Modifier::Brand(b) => brands.push(b.word().to_string()),
                Modifier::Color(c) => {
                    if let Some(Modifier::Feature(f)) = self.modifiers.get(i + 1) {
                        tail.push(format!("{} {}", c.word(), f.word()));
                        i += 2;
                        continue;
                    }
                    if body_color.is_none() {
                        body_color = Some(c);
                    } else {
                        tail.push(c.word().to_string());
                    }
                }
                Modifier::Feature(f) => tail.push(f.word().to_string()),
            }
            i += 1;
        }
        let mut parts = brands;
        if let Some(c) = body_color {
            parts.push(c.word().to_string());
        }
        parts.push(self.sortal.word().to_string());
        let mut s = parts.join(" ");
        if !tail.is_empty() {
            s.push_str(" with ");
            s.push_str(&tail.join(" and "));
        }
        s
    }
}

fn is_connector(token: &str) -> bool {
    matches!(
        token,
        "a" | "an" | "the" | "with" | "and" | "by" | "from" | "featuring" | "in" | "of" | "item"
            | "style"
    )
}

/// Style and pattern adjectives are recognized vocabulary but not modifier
/// kinds, so the parser skips them like connectors.
fn is_skippable_adjective(token: &str) -> bool {
    Style::from_word(token).is_some() || Pattern::from_word(token).is_some()
}

/// Parses a lowercase token stream into a noun phrase. Multiword feature
/// names are matched greedily (bigram before unigram).
pub fn parse_np(text: &str) -> Result<NounPhrase, SynthError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut sortal: Option<Sortal> = None;
    let mut modifiers = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() {
            let bigram = format!("{} {}", tokens[i], tokens[i + 1]);
            if let Some(f) = Feature::from_word(&bigram) {
                modifiers.push(Modifier::Feature(f));
                i += 2;
                continue;
            }
        }
        let tok = tokens[i];
        if let Some(s) = Sortal::from_word(tok) {
            if let Some(prev) = sortal {
                return Err(SynthError::TwoSortals(prev, s));
            }
            sortal = Some(s);
        } else if let Some(b) = Brand::from_word(tok) {
            modifiers.push(Modifier::Brand(b));
        } else if let Some(f) = Feature::from_word(tok) {
            modifiers.push(Modifier::Feature(f));
        } else if let Some(c) = ColorName::from_word(tok) {
            modifiers.push(Modifier::Color(c));
        } else if is_connector(tok) || is_skippable_adjective(tok) {
            // skipped
        } else {
            // Unknown token: not a predicate of any kind, skipped.
        }
        i += 1;
    }
    match sortal {
        Some(s) => Ok(NounPhrase { sortal: s, modifiers }),
        None => Err(SynthError::NoSortal(text.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brand_plus_sortal() {
        let np = parse_np("nike dress").unwrap();
        assert_eq!(np.sortal, Sortal::Dress);
        assert_eq!(np.modifiers, vec![Modifier::Brand(Brand::Nike)]);
    }

    #[test]
    fn bare_sortal() {
        let np = parse_np("dress").unwrap();
        assert_eq!(np.sortal, Sortal::Dress);
        assert!(np.modifiers.is_empty());
    }

    #[test]
    fn no_sortal_is_invalid_formula() {
        assert!(matches!(parse_np("nike gucci"), Err(SynthError::NoSortal(_))));
    }

    #[test]
    fn two_sortals_is_ambiguous() {
        assert!(matches!(
            parse_np("dress shoe"),
            Err(SynthError::TwoSortals(Sortal::Dress, Sortal::Shoe))
        ));
    }

    #[test]
    fn multiword_features_match_greedily() {
        let np = parse_np("red shoe with black high heels").unwrap();
        assert_eq!(np.sortal, Sortal::Shoe);
        assert_eq!(
            np.modifiers,
            vec![
                Modifier::Color(ColorName::Red),
                Modifier::Color(ColorName::Black),
                Modifier::Feature(Feature::HighHeels),
            ]
        );
    }

    #[test]
    fn connectors_and_adjectives_are_skipped() {
        let np = parse_np("a classic striped blue bag with handles from prada").unwrap();
        assert_eq!(np.sortal, Sortal::Bag);
        assert_eq!(
            np.modifiers,
            vec![
                Modifier::Color(ColorName::Blue),
                Modifier::Feature(Feature::Handles),
                Modifier::Brand(Brand::Prada),
            ]
        );
    }

    #[test]
    fn canonical_text_round_trips() {
        let np = NounPhrase {
            sortal: Sortal::Shoe,
            modifiers: vec![
                Modifier::Brand(Brand::Nike),
                Modifier::Color(ColorName::Red),
                Modifier::Color(ColorName::Black),
                Modifier::Feature(Feature::HighHeels),
            ],
        };
        let text = np.text();
        assert_eq!(text, "nike red shoe with black high heels");
        assert_eq!(parse_np(&text).unwrap(), np);
    }
}
