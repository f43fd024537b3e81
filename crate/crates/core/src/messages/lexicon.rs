//! Deterministic keyword classifier.

use super::Stance;

pub const LEXICON_VERSION: &str = "lexicon-v1";

const HAWKISH: &[&str] = &[
    "rate hike",
    "rate hikes",
    "raise rate",
    "raise rates",
    "raising rates",
    "hike",
    "hikes",
    "hiked",
    "hiking",
    "tighten",
    "tightening",
    "tighter",
    "hawkish",
    "aggressive",
    "aggressively",
    "restrictive",
    "inflation fight",
    "fight inflation",
    "fighting inflation",
    "higher for longer",
    "taper",
    "tapering",
    "qt",
];

const DOVISH: &[&str] = &[
    "rate cut",
    "rate cuts",
    "cut rate",
    "cut rates",
    "cutting rates",
    "cut",
    "cuts",
    "cutting",
    "ease",
    "easing",
    "eased",
    "quantitative easing",
    "stimulus",
    "qe",
    "pause",
    "pausing",
    "pivot",
    "dovish",
    "lower rates",
    "accommodative",
];

/// Phrase table matched on whole lowercase tokens, longest phrase first,
/// without overlap. Score is `clamp(dovish - hawkish, -2, 2)`.
#[derive(Debug, Clone)]
pub struct Lexicon {
    // (tokens, is_hawkish), sorted by descending token count
    phrases: Vec<(Vec<String>, bool)>,
}

impl Default for Lexicon {
    fn default() -> Self {
        let mut phrases: Vec<(Vec<String>, bool)> = HAWKISH
            .iter()
            .map(|p| (p, true))
            .chain(DOVISH.iter().map(|p| (p, false)))
            .map(|(p, h)| (p.split_whitespace().map(str::to_string).collect(), h))
            .collect();
        phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Self { phrases }
    }
}

pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

impl Lexicon {
    pub fn hawkish_terms() -> &'static [&'static str] {
        HAWKISH
    }

    pub fn dovish_terms() -> &'static [&'static str] {
        DOVISH
    }

    /// `(hawkish_hits, dovish_hits)`.
    pub fn hits(&self, text: &str) -> (usize, usize) {
        let tokens = tokenize(text);
        let (mut hawk, mut dove) = (0, 0);
        let mut i = 0;
        'outer: while i < tokens.len() {
            for (phrase, is_hawk) in &self.phrases {
                let n = phrase.len();
                if i + n <= tokens.len() && tokens[i..i + n] == phrase[..] {
                    if *is_hawk {
                        hawk += 1;
                    } else {
                        dove += 1;
                    }
                    i += n;
                    continue 'outer;
                }
            }
            i += 1;
        }
        (hawk, dove)
    }

    pub fn score(&self, text: &str) -> Stance {
        let (hawk, dove) = self.hits(text);
        let s = (dove as i64 - hawk as i64).clamp(-2, 2);
        Stance::from_value(s).expect("clamped")
    }
}
