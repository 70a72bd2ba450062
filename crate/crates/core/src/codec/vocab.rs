use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{EndpointKind, LineCategory, LineType, DEFAULT_PATCH_SIZE};

/// One vocabulary entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    OpenBrace,
    CloseBrace,
    OpenBracket,
    CloseBracket,
    Comma,
    Colon,
    Points,
    Category,
    LineTypeKey,
    Start,
    End,
    CategoryValue(LineCategory),
    TypeValue(LineType),
    Kind(EndpointKind),
    Coord(u32),
}

impl Token {
    /// Surface form, e.g. `<{>`, `<points>`, `<Curb>`, `<257>`.
    pub fn surface(&self) -> Cow<'static, str> {
        let s = match self {
            Token::OpenBrace => "<{>",
            Token::CloseBrace => "<}>",
            Token::OpenBracket => "<[>",
            Token::CloseBracket => "<]>",
            Token::Comma => "<,>",
            Token::Colon => "<:>",
            Token::Points => "<points>",
            Token::Category => "<category>",
            Token::LineTypeKey => "<line_type>",
            Token::Start => "<start>",
            Token::End => "<end>",
            Token::CategoryValue(c) => return Cow::Owned(format!("<{}>", c.name())),
            Token::TypeValue(t) => return Cow::Owned(format!("<{}>", t.name())),
            Token::Kind(k) => return Cow::Owned(format!("<{}>", k.name())),
            Token::Coord(n) => return Cow::Owned(format!("<{n}>")),
        };
        Cow::Borrowed(s)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface())
    }
}

/// The closed set of tokens a map may be written with.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    max_coord: u32,
    lookup: HashMap<String, Token>,
    max_surface_len: usize,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::new(DEFAULT_PATCH_SIZE - 1)
    }
}

impl Vocabulary {
    /// Vocabulary with coordinate tokens `<0>` through `<max_coord>`.
    pub fn new(max_coord: u32) -> Self {
        let mut tokens = vec![
            Token::OpenBrace,
            Token::CloseBrace,
            Token::OpenBracket,
            Token::CloseBracket,
            Token::Comma,
            Token::Colon,
            Token::Points,
            Token::Category,
            Token::LineTypeKey,
            Token::Start,
            Token::End,
        ];
        tokens.extend(LineCategory::ALL.iter().map(|&c| Token::CategoryValue(c)));
        tokens.extend(LineType::ALL.iter().map(|&t| Token::TypeValue(t)));
        tokens.extend(EndpointKind::ALL.iter().map(|&k| Token::Kind(k)));
        tokens.extend((0..=max_coord).map(Token::Coord));

        let lookup: HashMap<String, Token> =
            tokens.into_iter().map(|t| (t.surface().into_owned(), t)).collect();
        let max_surface_len = lookup.keys().map(String::len).max().unwrap_or(0);
        Vocabulary {
            max_coord,
            lookup,
            max_surface_len,
        }
    }

    pub fn max_coord(&self) -> u32 {
        self.max_coord
    }

    pub fn len(&self) -> usize {
        self.lookup.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lookup.is_empty()
    }

    pub fn get(&self, surface: &str) -> Option<Token> {
        self.lookup.get(surface).copied()
    }

    pub fn contains(&self, token: &Token) -> bool {
        match token {
            Token::Coord(n) => *n <= self.max_coord,
            _ => true,
        }
    }

    pub(crate) fn max_surface_len(&self) -> usize {
        self.max_surface_len
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.lookup.keys().map(String::as_str)
    }
}

/// A token list together with its rendered surface string.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TokenSequence {
    tokens: Vec<Token>,
    rendered: String,
}

impl TokenSequence {
    /// Builds a sequence, rejecting coordinates outside the vocabulary.
    pub fn new(tokens: Vec<Token>, vocab: &Vocabulary) -> Result<Self> {
        if let Some(t) = tokens.iter().find(|t| !vocab.contains(t)) {
            return Err(Error::UnknownToken {
                surface: t.surface().into_owned(),
                offset: 0,
            });
        }
        Ok(Self::from_tokens_unchecked(tokens))
    }

    pub(crate) fn from_tokens_unchecked(tokens: Vec<Token>) -> Self {
        let mut rendered = String::with_capacity(tokens.len() * 5);
        for t in &tokens {
            rendered.push_str(&t.surface());
        }
        TokenSequence { tokens, rendered }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// The wire string: token surfaces concatenated with no separators.
    pub fn rendered(&self) -> &str {
        &self.rendered
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_rendered(self) -> String {
        self.rendered
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surfaces_are_distinct_and_complete() {
        let v = Vocabulary::default();
        // 11 structural/keyword tokens, 3 + 5 + 2 values, 896 coordinates
        assert_eq!(v.len(), 11 + 10 + 896);
        assert_eq!(v.get("<257>"), Some(Token::Coord(257)));
        assert_eq!(v.get("<895>"), Some(Token::Coord(895)));
        assert_eq!(v.get("<896>"), None);
        assert_eq!(v.get("<Curb>"), Some(Token::CategoryValue(LineCategory::Curb)));
        assert_eq!(v.get("<line_type>"), Some(Token::LineTypeKey));
        assert!(v.surfaces().all(|s| !s.chars().any(char::is_whitespace)));
    }

    #[test]
    fn sequence_rejects_out_of_range_coordinates() {
        let v = Vocabulary::new(10);
        assert!(TokenSequence::new(vec![Token::Coord(11)], &v).is_err());
        let seq = TokenSequence::new(vec![Token::Coord(3), Token::Comma], &v).unwrap();
        assert_eq!(seq.rendered(), "<3><,>");
    }
}
