//! Sentence segmentation, tokenization and quantity detection.

use std::collections::HashMap;
use std::sync::LazyLock;

use num_traits::Zero;
use regex::Regex;

use crate::num::{parse_decimal, Rational};

use super::{Language, Token, TokenKind};

// Integers (optionally comma grouped), decimals, fractions and percentages.
static EN_TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?P<num>(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?:/\d+(?:\.\d+)?)?%?)|(?P<word>[A-Za-z]+(?:'[A-Za-z]+)*)|(?P<other>\S)")
        .expect("valid regex")
});

static ZH_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\d+(?:\.\d+)?(?:/\d+(?:\.\d+)?)?%?").expect("valid regex"));

static ZH_LEXICON: LazyLock<Lexicon> =
    LazyLock::new(|| Lexicon::from_tsv(include_str!("../../resources/zh_lexicon.tsv")));

/// Pluggable tokenizer. Implementations must be deterministic.
pub trait Tokenizer: Send + Sync {
    fn split_sentences(&self, text: &str) -> Vec<String>;

    fn tokenize(&self, sentence: &str) -> Vec<Token>;

    /// Renders token surfaces back to text that re-tokenizes to the same surfaces.
    fn join(&self, surfaces: &[&str]) -> String;

    /// Joins sentence texts into a problem text.
    fn join_sentences(&self, sentences: &[&str]) -> String;
}

impl Language {
    pub fn tokenizer(self) -> &'static dyn Tokenizer {
        static EN: EnglishTokenizer = EnglishTokenizer;
        static ZH: LazyLock<ChineseTokenizer> = LazyLock::new(ChineseTokenizer::bundled);
        match self {
            Language::En => &EN,
            Language::Zh => &*ZH,
        }
    }
}

/// Parses a quantity surface (`12`, `1,000`, `0.5`, `3/4`, `20%`).
pub fn quantity_value(surface: &str) -> Option<Rational> {
    let cleaned = surface.replace(',', "");
    let (body, percent) = match cleaned.strip_suffix('%') {
        Some(b) => (b, true),
        None => (cleaned.as_str(), false),
    };
    let value = match body.split_once('/') {
        Some((n, d)) => {
            let d = parse_decimal(d)?;
            if d.is_zero() {
                return None;
            }
            parse_decimal(n)? / d
        }
        None => parse_decimal(body)?,
    };
    Some(if percent { value / Rational::from_integer(100.into()) } else { value })
}

fn make_token(surface: &str, position: usize, numeric: bool) -> Token {
    let value = if numeric { quantity_value(surface) } else { None };
    Token {
        surface: surface.to_string(),
        kind: if value.is_some() { TokenKind::Quantity } else { TokenKind::Word },
        value,
        position,
    }
}

fn split_after(text: &str, is_terminal: impl Fn(char, Option<char>) -> bool) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        current.push(c);
        if is_terminal(c, chars.get(i + 1).copied()) {
            let trimmed = current.trim();
            if !trimmed.is_empty() {
                out.push(trimmed.to_string());
            }
            current.clear();
        }
    }
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    out
}

#[derive(Debug, Default, Clone, Copy)]
pub struct EnglishTokenizer;

impl Tokenizer for EnglishTokenizer {
    fn split_sentences(&self, text: &str) -> Vec<String> {
        split_after(text, |c, next| matches!(c, '.' | '?' | '!') && next.is_none_or(char::is_whitespace))
    }

    fn tokenize(&self, sentence: &str) -> Vec<Token> {
        EN_TOKEN
            .captures_iter(sentence)
            .enumerate()
            .map(|(position, caps)| {
                let numeric = caps.name("num").is_some();
                make_token(caps.get(0).expect("whole match").as_str(), position, numeric)
            })
            .collect()
    }

    fn join(&self, surfaces: &[&str]) -> String {
        let mut out = String::new();
        let mut prev: Option<&str> = None;
        for s in surfaces {
            let glue_left = matches!(*s, "." | "," | "?" | "!" | ";" | ":" | ")" | "%" | "'s");
            let prev_opens = matches!(prev, Some("(") | Some("$"));
            if prev.is_some() && !glue_left && !prev_opens {
                out.push(' ');
            }
            out.push_str(s);
            prev = Some(s);
        }
        out
    }

    fn join_sentences(&self, sentences: &[&str]) -> String {
        sentences.join(" ")
    }
}

/// Greedy longest-match lexicon tokenizer for Chinese text.
#[derive(Debug, Clone)]
pub struct ChineseTokenizer {
    lexicon: &'static Lexicon,
}

impl ChineseTokenizer {
    pub fn bundled() -> Self {
        ChineseTokenizer { lexicon: &ZH_LEXICON }
    }
}

impl Tokenizer for ChineseTokenizer {
    fn split_sentences(&self, text: &str) -> Vec<String> {
        split_after(text, |c, _| matches!(c, '。' | '？' | '！' | '?' | '!' | '；' | ';'))
    }

    fn tokenize(&self, sentence: &str) -> Vec<Token> {
        let chars: Vec<(usize, char)> = sentence.char_indices().collect();
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let (byte, c) = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let rest = &sentence[byte..];
            if c.is_ascii_digit() {
                if let Some(m) = ZH_NUMBER.find(rest) {
                    tokens.push(make_token(m.as_str(), tokens.len(), true));
                    i += m.as_str().chars().count();
                    continue;
                }
            }
            if c.is_ascii_alphabetic() {
                let len = rest.chars().take_while(|c| c.is_ascii_alphabetic()).count();
                let word: String = rest.chars().take(len).collect();
                tokens.push(make_token(&word, tokens.len(), false));
                i += len;
                continue;
            }
            let len = self.lexicon.longest_match(rest).unwrap_or(1);
            let word: String = rest.chars().take(len).collect();
            tokens.push(make_token(&word, tokens.len(), false));
            i += len;
        }
        tokens
    }

    fn join(&self, surfaces: &[&str]) -> String {
        let mut out = String::new();
        let mut prev_last: Option<char> = None;
        for s in surfaces {
            let first = s.chars().next();
            let boundary = |c: Option<char>| c.is_some_and(|c| c.is_ascii_alphanumeric() || c == '.');
            if boundary(prev_last) && boundary(first) {
                out.push(' ');
            }
            out.push_str(s);
            prev_last = s.chars().last();
        }
        out
    }

    fn join_sentences(&self, sentences: &[&str]) -> String {
        sentences.concat()
    }
}

static EN_LEXICON: LazyLock<Lexicon> =
    LazyLock::new(|| Lexicon::from_tsv(include_str!("../../resources/en_lexicon.tsv")));

#[derive(Debug, Clone, PartialEq, Eq)]
struct LexiconEntry {
    tag: String,
    lemma: Option<String>,
}

/// Word list with coarse part-of-speech tags (`n`, `v`, `u` for units, `f`
/// for function words) and optional lemmas. Lines are `word<TAB>tag` or
/// `word<TAB>tag<TAB>lemma`.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, LexiconEntry>,
    max_chars: usize,
}

impl Lexicon {
    pub fn from_tsv(text: &str) -> Self {
        let mut lexicon = Lexicon::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(word), Some(tag)) = (parts.next(), parts.next()) else { continue };
            let lemma = parts.next().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string);
            lexicon.max_chars = lexicon.max_chars.max(word.chars().count());
            lexicon.entries.insert(word.to_string(), LexiconEntry { tag: tag.trim().to_string(), lemma });
        }
        lexicon
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tag(&self, word: &str) -> Option<&str> {
        self.entries.get(word).map(|e| e.tag.as_str())
    }

    /// Lemma of a listed word (the word itself unless a lemma is given).
    pub fn lemma<'a>(&'a self, word: &'a str) -> Option<&'a str> {
        self.entries.get(word).map(|e| e.lemma.as_deref().unwrap_or(word))
    }

    /// Length in chars of the longest entry that prefixes `text`.
    pub fn longest_match(&self, text: &str) -> Option<usize> {
        let chars: Vec<char> = text.chars().take(self.max_chars).collect();
        (2..=chars.len()).rev().find(|&n| {
            let candidate: String = chars[..n].iter().collect();
            self.entries.contains_key(&candidate)
        })
    }

    pub fn bundled_zh() -> &'static Lexicon {
        &ZH_LEXICON
    }

    pub fn bundled_en() -> &'static Lexicon {
        &EN_LEXICON
    }
}
