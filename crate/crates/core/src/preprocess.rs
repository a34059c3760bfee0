//! Tokenization and lexicon indicator tokens.

use std::collections::BTreeSet;
use std::fs;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POS_INDICATOR: &str = "<POS_IND>";
pub const NEG_INDICATOR: &str = "<NEG_IND>";
pub const NEGATION_INDICATOR: &str = "<NEGATION_IND>";

/// Default negation and adversative words.
pub const DEFAULT_NEGATIONS: &[&str] = &["not", "no", "never", "n't", "but", "however", "although"];

/// Returns true for the reserved indicator tokens. The tokenizer strips `<`
/// and `>`, so these never collide with corpus tokens.
pub fn is_indicator(token: &str) -> bool {
    matches!(token, POS_INDICATOR | NEG_INDICATOR | NEGATION_INDICATOR)
}

/// A lowercase token sequence, possibly ending in indicator tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence(tokens)
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    fn push(&mut self, token: &str) {
        self.0.push(token.to_string());
    }
}

impl Deref for TokenSequence {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl From<Vec<String>> for TokenSequence {
    fn from(v: Vec<String>) -> Self {
        TokenSequence(v)
    }
}

impl<'a> From<&[&'a str]> for TokenSequence {
    fn from(v: &[&'a str]) -> Self {
        TokenSequence(v.iter().map(|s| s.to_string()).collect())
    }
}

const CONTRACTIONS: &[&str] = &["'s", "'ve", "n't", "'re", "'d", "'ll"];
const SPLIT_PUNCT: &[char] = &[',', '!', '(', ')', '?'];

/// Kim-style sentence cleaning: lowercase, drop everything except
/// alphanumerics and `,!?'()`, split common contractions and pad the kept
/// punctuation with spaces.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut cleaned = String::with_capacity(text.len() + 8);
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() || c == '\'' {
            cleaned.push(c);
        } else if SPLIT_PUNCT.contains(&c) {
            cleaned.push(' ');
            cleaned.push(c);
            cleaned.push(' ');
        } else {
            cleaned.push(' ');
        }
    }
    for suffix in CONTRACTIONS {
        if cleaned.contains(suffix) {
            cleaned = cleaned.replace(suffix, &format!(" {suffix}"));
        }
    }
    TokenSequence(cleaned.split_whitespace().map(str::to_string).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LexiconKind {
    Positive,
    Negative,
    Negation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub kind: LexiconKind,
    entries: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<I, S>(kind: LexiconKind, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if entries.is_empty() {
            return Err(Error::Empty(format!("{kind:?} lexicon has no entries")));
        }
        Ok(Lexicon { kind, entries })
    }

    pub fn default_negations() -> Self {
        Lexicon::new(LexiconKind::Negation, DEFAULT_NEGATIONS).expect("non-empty default list")
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    /// Union of two lexicons of the same kind.
    pub fn merge(mut self, other: &Lexicon) -> Result<Self> {
        if self.kind != other.kind {
            return Err(Error::InvalidArgument(format!(
                "cannot merge {:?} lexicon into {:?}",
                other.kind, self.kind
            )));
        }
        self.entries.extend(other.entries.iter().cloned());
        Ok(self)
    }
}

/// Loads a lexicon file.
///
/// Plain files hold one word per line with `#` (or Liu-style `;`) comments.
/// Files containing `=` are read as MPQA subjectivity clues, keeping the
/// `word1` entries whose `priorpolarity` matches `kind` (`both` counts for
/// either polarity).
pub fn load_lexicon(path: &Path, kind: LexiconKind) -> Result<Lexicon> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(&content, kind).map_err(|e| match e {
        Error::Empty(_) => Error::Empty(format!("lexicon {} has no usable entries", path.display())),
        e => e,
    })
}

pub fn parse_lexicon(content: &str, kind: LexiconKind) -> Result<Lexicon> {
    let lines = content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with(';'));
    if content.contains('=') {
        let mut words = Vec::new();
        for line in lines {
            let mut word = None;
            let mut polarity = None;
            for field in line.split_whitespace() {
                if let Some((k, v)) = field.split_once('=') {
                    match k {
                        "word1" => word = Some(v),
                        "priorpolarity" => polarity = Some(v),
                        _ => {}
                    }
                }
            }
            let keep = matches!(
                (kind, polarity),
                (LexiconKind::Positive, Some("positive" | "both")) | (LexiconKind::Negative, Some("negative" | "both"))
            );
            if keep {
                if let Some(w) = word {
                    words.push(w);
                }
            }
        }
        Lexicon::new(kind, words)
    } else {
        Lexicon::new(kind, lines)
    }
}

/// The lexicons used for indicator injection, at most one per kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconSet {
    pub positive: Option<Lexicon>,
    pub negative: Option<Lexicon>,
    pub negation: Option<Lexicon>,
}

impl LexiconSet {
    /// Adds `lexicon`, merging with any lexicon of the same kind already present.
    pub fn add(&mut self, lexicon: Lexicon) -> Result<()> {
        let slot = match lexicon.kind {
            LexiconKind::Positive => &mut self.positive,
            LexiconKind::Negative => &mut self.negative,
            LexiconKind::Negation => &mut self.negation,
        };
        *slot = Some(match slot.take() {
            Some(existing) => existing.merge(&lexicon)?,
            None => lexicon,
        });
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_none() && self.negative.is_none() && self.negation.is_none()
    }
}

/// Appends one indicator per lexicon category with at least one matching
/// token, in the fixed order positive, negative, negation.
pub fn append_indicators(seq: &TokenSequence, lexicons: &LexiconSet) -> TokenSequence {
    let hit = |lex: &Option<Lexicon>| {
        lex.as_ref()
            .is_some_and(|l| seq.iter().any(|t| !is_indicator(t) && l.contains(t)))
    };
    let mut out = seq.clone();
    if hit(&lexicons.positive) {
        out.push(POS_INDICATOR);
    }
    if hit(&lexicons.negative) {
        out.push(NEG_INDICATOR);
    }
    if hit(&lexicons.negation) {
        out.push(NEGATION_INDICATOR);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> TokenSequence {
        TokenSequence::from(s)
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Don't stop!"), toks(&["do", "n't", "stop", "!"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("hello"), toks(&["hello"]));
    }

    #[test]
    fn tokenize_cleaning_rules() {
        assert_eq!(
            tokenize("It's a \"great\" film -- (really), isn't it?"),
            toks(&["it", "'s", "a", "great", "film", "(", "really", ")", ",", "is", "n't", "it", "?"])
        );
        assert_eq!(tokenize("we've they'll I'd you're"), toks(&["we", "'ve", "they", "'ll", "i", "'d", "you", "'re"]));
        assert_eq!(tokenize("a<b>c; d:e"), toks(&["a", "b", "c", "d", "e"]));
        assert_eq!(tokenize("Café déjà-vu"), toks(&["café", "déjà", "vu"]));
    }

    #[test]
    fn indicators_never_produced_by_tokenizer() {
        let t = tokenize("<POS_IND> <NEG_IND> <NEGATION_IND>");
        assert!(t.iter().all(|x| !is_indicator(x)));
    }

    fn lexicons() -> LexiconSet {
        let mut set = LexiconSet::default();
        set.add(Lexicon::new(LexiconKind::Positive, ["great", "good"]).unwrap()).unwrap();
        set.add(Lexicon::new(LexiconKind::Negative, ["bad"]).unwrap()).unwrap();
        set.add(Lexicon::default_negations()).unwrap();
        set
    }

    #[test]
    fn append_indicator_examples() {
        let lex = lexicons();
        assert_eq!(
            append_indicators(&toks(&["great", "movie"]), &lex),
            toks(&["great", "movie", POS_INDICATOR])
        );
        assert_eq!(append_indicators(&toks(&["the", "table"]), &lex), toks(&["the", "table"]));
        assert_eq!(
            append_indicators(&toks(&["not", "good"]), &lex),
            toks(&["not", "good", POS_INDICATOR, NEGATION_INDICATOR])
        );
        assert_eq!(
            append_indicators(&toks(&["bad", "but", "good", "good"]), &lex),
            toks(&["bad", "but", "good", "good", POS_INDICATOR, NEG_INDICATOR, NEGATION_INDICATOR])
        );
    }

    #[test]
    fn append_indicators_adds_at_most_three() {
        let lex = lexicons();
        let seq = tokenize("great bad not good however bad never");
        let out = append_indicators(&seq, &lex);
        assert_eq!(&out[..seq.len()], &seq[..]);
        assert_eq!(out.len() - seq.len(), 3);
    }

    #[test]
    fn plain_lexicon_lowercases_and_dedups() {
        let l = parse_lexicon("good\nGreat\n", LexiconKind::Positive).unwrap();
        assert_eq!(l.entries().collect::<Vec<_>>(), vec!["good", "great"]);
        let l = parse_lexicon("good\nGOOD\n\n", LexiconKind::Positive).unwrap();
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn comment_only_lexicon_is_an_error() {
        assert!(matches!(
            parse_lexicon("# header\n# more\n", LexiconKind::Negative),
            Err(Error::Empty(_))
        ));
        // Liu lexicon files open with `;` comments.
        let l = parse_lexicon(";;; opinion lexicon\n;\na+\nabound\n", LexiconKind::Positive).unwrap();
        assert_eq!(l.len(), 2);
    }

    #[test]
    fn mpqa_lexicon_split_by_polarity() {
        let clues = "type=weaksubj len=1 word1=abandoned pos1=adj stemmed1=n priorpolarity=negative\n\
                     type=strongsubj len=1 word1=Admire pos1=verb stemmed1=y priorpolarity=positive\n\
                     type=weaksubj len=1 word1=brag pos1=verb stemmed1=y priorpolarity=both\n\
                     type=weaksubj len=1 word1=about pos1=adj stemmed1=n priorpolarity=neutral\n";
        let pos = parse_lexicon(clues, LexiconKind::Positive).unwrap();
        let neg = parse_lexicon(clues, LexiconKind::Negative).unwrap();
        assert_eq!(pos.entries().collect::<Vec<_>>(), vec!["admire", "brag"]);
        assert_eq!(neg.entries().collect::<Vec<_>>(), vec!["abandoned", "brag"]);
        assert!(parse_lexicon(clues, LexiconKind::Negation).is_err());
    }

    #[test]
    fn merging_requires_same_kind() {
        let a = Lexicon::new(LexiconKind::Positive, ["a"]).unwrap();
        let b = Lexicon::new(LexiconKind::Positive, ["b"]).unwrap();
        let c = Lexicon::new(LexiconKind::Negative, ["c"]).unwrap();
        assert_eq!(a.clone().merge(&b).unwrap().len(), 2);
        assert!(a.merge(&c).is_err());
    }
}
