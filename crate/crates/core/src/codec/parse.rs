use serde::{Deserialize, Serialize};

use super::lexer::{tokenize_lenient, tokenize_raw};
use super::vocab::{Token, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{
    dedup_consecutive, EndpointKind, LineCategory, LineRecord, LineType, Point2, VectorMap,
};

/// How strictly generator output is parsed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// Accept exactly the serializer's grammar or fail.
    Strict,
    /// Skip malformed line objects and keep going.
    #[default]
    Lenient,
}

/// A recoverable problem found while decoding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub token_index: usize,
    pub message: String,
}

/// Decoded map plus whatever was skipped on the way.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// Lines in patch-local pixels; the extent is `max_coord + 1` square.
    pub map: VectorMap,
    pub diagnostics: Vec<Diagnostic>,
}

struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn found(&self) -> String {
        self.peek()
            .map(|t| t.surface().into_owned())
            .unwrap_or_else(|| "end of input".into())
    }

    fn error(&self, expected: &[&str]) -> Error {
        Error::Parse {
            index: self.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.found(),
        }
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&[&want.surface()]))
        }
    }

    fn eat(&mut self, want: Token) -> bool {
        if self.peek() == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn coord(&mut self) -> Result<f64> {
        match self.peek() {
            Some(Token::Coord(n)) => {
                self.pos += 1;
                Ok(n as f64)
            }
            _ => Err(self.error(&["<coordinate>"])),
        }
    }

    fn point(&mut self) -> Result<Point2> {
        self.expect(Token::OpenBracket)?;
        let x = self.coord()?;
        self.expect(Token::Comma)?;
        let y = self.coord()?;
        self.expect(Token::CloseBracket)?;
        Ok(Point2::new(x, y))
    }

    fn point_list(&mut self) -> Result<Vec<Point2>> {
        self.expect(Token::OpenBracket)?;
        let mut points = vec![self.point()?];
        while self.eat(Token::Comma) {
            points.push(self.point()?);
        }
        self.expect(Token::CloseBracket)?;
        Ok(points)
    }

    fn category(&mut self) -> Result<LineCategory> {
        match self.peek() {
            Some(Token::CategoryValue(c)) => {
                self.pos += 1;
                Ok(c)
            }
            _ => Err(self.error(&["<Curb>", "<LaneLine>", "<VirtualLine>"])),
        }
    }

    fn line_type(&mut self) -> Result<LineType> {
        match self.peek() {
            Some(Token::TypeValue(t)) => {
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.error(&["<Solid>", "<ThickSolid>", "<Dashed>", "<ShortDashed>", "<Other>"])),
        }
    }

    fn kind(&mut self) -> Result<EndpointKind> {
        match self.peek() {
            Some(Token::Kind(k)) => {
                self.pos += 1;
                Ok(k)
            }
            _ => Err(self.error(&["<Natural>", "<Cut>"])),
        }
    }

    /// One line object in the exact serializer layout.
    fn strict_line(&mut self, id: usize) -> Result<LineRecord> {
        self.expect(Token::OpenBrace)?;
        self.expect(Token::Points)?;
        self.expect(Token::Colon)?;
        let points = self.point_list()?;
        self.expect(Token::Comma)?;
        self.expect(Token::Category)?;
        self.expect(Token::Colon)?;
        let category = self.category()?;
        self.expect(Token::Comma)?;
        self.expect(Token::LineTypeKey)?;
        self.expect(Token::Colon)?;
        let line_type = self.line_type()?;
        self.expect(Token::Comma)?;
        self.expect(Token::Start)?;
        self.expect(Token::Colon)?;
        let start_kind = self.kind()?;
        self.expect(Token::Comma)?;
        self.expect(Token::End)?;
        self.expect(Token::Colon)?;
        let end_kind = self.kind()?;
        self.expect(Token::CloseBrace)?;
        let line = LineRecord {
            id: id.to_string(),
            points,
            category,
            line_type,
            start_kind,
            end_kind,
            score: None,
        };
        line.validate()?;
        Ok(line)
    }

    /// One line object with attributes in any order; `start`/`end` default
    /// to natural.
    fn lenient_line(&mut self, id: usize) -> Result<LineRecord> {
        self.expect(Token::OpenBrace)?;
        let mut points = None;
        let mut category = None;
        let mut line_type = None;
        let mut start_kind = None;
        let mut end_kind = None;
        loop {
            let key_at = self.pos;
            let key = self.peek();
            let dup = || Error::Parse {
                index: key_at,
                expected: vec!["<}>".into()],
                found: format!("duplicate {}", key.map(|k| k.surface().into_owned()).unwrap_or_default()),
            };
            match key {
                Some(Token::Points) | Some(Token::Category) | Some(Token::LineTypeKey)
                | Some(Token::Start) | Some(Token::End) => self.pos += 1,
                _ => {
                    return Err(self.error(&["<points>", "<category>", "<line_type>", "<start>", "<end>"]))
                }
            }
            self.expect(Token::Colon)?;
            match key {
                Some(Token::Points) if points.is_none() => points = Some(self.point_list()?),
                Some(Token::Category) if category.is_none() => category = Some(self.category()?),
                Some(Token::LineTypeKey) if line_type.is_none() => line_type = Some(self.line_type()?),
                Some(Token::Start) if start_kind.is_none() => start_kind = Some(self.kind()?),
                Some(Token::End) if end_kind.is_none() => end_kind = Some(self.kind()?),
                _ => return Err(dup()),
            }
            if self.eat(Token::CloseBrace) {
                break;
            }
            self.expect(Token::Comma)?;
        }
        let missing = |what: &str| Error::InvalidGeometry(format!("line object without {what}"));
        let mut points = points.ok_or_else(|| missing("points"))?;
        dedup_consecutive(&mut points);
        let line = LineRecord {
            id: id.to_string(),
            points,
            category: category.ok_or_else(|| missing("category"))?,
            line_type: line_type.ok_or_else(|| missing("line_type"))?,
            start_kind: start_kind.unwrap_or_default(),
            end_kind: end_kind.unwrap_or_default(),
            score: None,
        };
        line.validate()?;
        Ok(line)
    }
}

fn wrap(lines: Vec<LineRecord>, diagnostics: Vec<Diagnostic>, vocab: &Vocabulary) -> Decoded {
    let extent = vocab.max_coord() + 1;
    Decoded {
        map: VectorMap::empty("patch", extent, extent).with_lines(lines),
        diagnostics,
    }
}

fn parse_strict(tokens: &[Token]) -> Result<Vec<LineRecord>> {
    let mut cur = Cursor { tokens, pos: 0 };
    let mut lines = Vec::new();
    if tokens.is_empty() {
        return Ok(lines);
    }
    loop {
        lines.push(cur.strict_line(lines.len())?);
        if cur.peek().is_none() {
            return Ok(lines);
        }
        if !cur.eat(Token::Comma) {
            return Err(cur.error(&["<,>", "end of input"]));
        }
    }
}

fn next_object(tokens: &[Token], from: usize) -> usize {
    tokens[from..]
        .iter()
        .position(|t| *t == Token::OpenBrace)
        .map(|i| from + i)
        .unwrap_or(tokens.len())
}

fn parse_lenient(tokens: &[Token], diagnostics: &mut Vec<Diagnostic>) -> Vec<LineRecord> {
    let mut lines = Vec::new();
    let mut pos = next_object(tokens, 0);
    if pos > 0 {
        diagnostics.push(Diagnostic {
            token_index: 0,
            message: format!("skipped {pos} token(s) before the first line object"),
        });
    }
    while pos < tokens.len() {
        let mut cur = Cursor { tokens, pos };
        match cur.lenient_line(lines.len()) {
            Ok(line) => {
                lines.push(line);
                let after = cur.pos + usize::from(cur.peek() == Some(Token::Comma));
                let next = next_object(tokens, after);
                // anything left over that is not just the trailing separator
                if next > after {
                    diagnostics.push(Diagnostic {
                        token_index: after,
                        message: format!("skipped {} stray token(s) after a line object", next - after),
                    });
                }
                pos = next;
            }
            Err(e) => {
                diagnostics.push(Diagnostic {
                    token_index: pos,
                    message: format!("skipped malformed line object: {e}"),
                });
                pos = next_object(tokens, pos + 1);
            }
        }
    }
    lines
}

/// Decodes a token list back into a patch-local map.
pub fn detokenize(tokens: &[Token], vocab: &Vocabulary, mode: ParseMode) -> Result<Decoded> {
    if let Some((i, t)) = tokens.iter().enumerate().find(|(_, t)| !vocab.contains(t)) {
        if mode == ParseMode::Strict {
            return Err(Error::UnknownToken {
                surface: t.surface().into_owned(),
                offset: i,
            });
        }
    }
    match mode {
        ParseMode::Strict => Ok(wrap(parse_strict(tokens)?, Vec::new(), vocab)),
        ParseMode::Lenient => {
            let mut diagnostics = Vec::new();
            let lines = parse_lenient(tokens, &mut diagnostics);
            Ok(wrap(lines, diagnostics, vocab))
        }
    }
}

/// Decodes a rendered token string.
///
/// In strict mode unknown text is an error; in lenient mode it is skipped and
/// reported as a diagnostic.
pub fn detokenize_str(surface: &str, vocab: &Vocabulary, mode: ParseMode) -> Result<Decoded> {
    match mode {
        ParseMode::Strict => {
            let seq = tokenize_raw(surface, vocab)?;
            detokenize(seq.tokens(), vocab, mode)
        }
        ParseMode::Lenient => {
            let (tokens, mut lex_diags) = tokenize_lenient(surface, vocab);
            let mut decoded = detokenize(&tokens, vocab, mode)?;
            lex_diags.append(&mut decoded.diagnostics);
            decoded.diagnostics = lex_diags;
            Ok(decoded)
        }
    }
}
