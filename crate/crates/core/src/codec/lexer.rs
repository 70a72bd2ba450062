use super::parse::Diagnostic;
use super::vocab::{Token, TokenSequence, Vocabulary};
use crate::error::{Error, Result};

/// Longest vocabulary entry starting at byte `start`, if any.
fn longest_match(surface: &str, start: usize, vocab: &Vocabulary) -> Option<(Token, usize)> {
    let rest = &surface[start..];
    let max = vocab.max_surface_len().min(rest.len());
    (1..=max).rev().find_map(|len| {
        rest.get(..len)
            .and_then(|s| vocab.get(s))
            .map(|t| (t, len))
    })
}

/// Offending text at `start`: up to and including the next `>`, bounded.
fn offending(surface: &str, start: usize) -> String {
    let rest = &surface[start..];
    let end = rest
        .char_indices()
        .skip(1)
        .find(|&(_, c)| c == '<' || c == '>')
        .map(|(i, c)| if c == '>' { i + 1 } else { i })
        .unwrap_or(rest.len());
    rest[..end].chars().take(32).collect()
}

/// Greedy longest-match segmentation of a rendered string into tokens.
pub fn tokenize_raw(surface: &str, vocab: &Vocabulary) -> Result<TokenSequence> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < surface.len() {
        match longest_match(surface, pos, vocab) {
            Some((t, len)) => {
                tokens.push(t);
                pos += len;
            }
            None => {
                return Err(Error::UnknownToken {
                    surface: offending(surface, pos),
                    offset: pos,
                })
            }
        }
    }
    Ok(TokenSequence::from_tokens_unchecked(tokens))
}

/// Like [`tokenize_raw`] but skips unknown text up to the next `<`, recording
/// one diagnostic per skipped span. Whitespace is skipped silently.
pub fn tokenize_lenient(surface: &str, vocab: &Vocabulary) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut tokens = Vec::new();
    let mut diagnostics = Vec::new();
    let mut pos = 0;
    while pos < surface.len() {
        if let Some((t, len)) = longest_match(surface, pos, vocab) {
            tokens.push(t);
            pos += len;
            continue;
        }
        let rest = &surface[pos..];
        let skip = rest
            .char_indices()
            .skip(1)
            .find(|&(_, c)| c == '<')
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        let junk = &rest[..skip];
        if !junk.trim().is_empty() {
            diagnostics.push(Diagnostic {
                token_index: tokens.len(),
                message: format!("skipped unknown text {:?} at byte {pos}", offending(surface, pos)),
            });
        }
        pos += skip;
    }
    (tokens, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_token_boundaries() {
        let v = Vocabulary::default();
        let seq = tokenize_raw("<257><,><49>", &v).unwrap();
        assert_eq!(seq.tokens(), &[Token::Coord(257), Token::Comma, Token::Coord(49)]);
        assert!(tokenize_raw("", &v).unwrap().is_empty());
    }

    #[test]
    fn unknown_token_names_the_surface_form() {
        let v = Vocabulary::default();
        let err = tokenize_raw("<1><,><9000>", &v).unwrap_err();
        assert_eq!(
            err,
            Error::UnknownToken {
                surface: "<9000>".into(),
                offset: 6
            }
        );
        let err = tokenize_raw("<1> <2>", &v).unwrap_err();
        assert!(matches!(err, Error::UnknownToken { offset: 3, .. }));
        let err = tokenize_raw("<Lane line>", &v).unwrap_err();
        assert!(matches!(err, Error::UnknownToken { ref surface, .. } if surface == "<Lane line>"));
    }

    #[test]
    fn lenient_skips_junk() {
        let v = Vocabulary::default();
        let (toks, diags) = tokenize_lenient("<1>xx<2> <foo><3>", &v);
        assert_eq!(toks, vec![Token::Coord(1), Token::Coord(2), Token::Coord(3)]);
        assert_eq!(diags.len(), 2);
    }

    #[test]
    fn handles_multibyte_input() {
        let v = Vocabulary::default();
        assert!(tokenize_raw("<1>é", &v).is_err());
        let (toks, diags) = tokenize_lenient("é<1>", &v);
        assert_eq!(toks, vec![Token::Coord(1)]);
        assert_eq!(diags.len(), 1);
    }
}
