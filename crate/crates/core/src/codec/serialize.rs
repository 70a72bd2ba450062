use super::vocab::{Token, TokenSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{dedup_consecutive, LineRecord, Point2, VectorMap};

/// Rounds half-up (`2.5 -> 3`, `-2.5 -> -2`).
pub fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

fn coord(value: f64, line: usize, point: usize, vocab: &Vocabulary) -> Result<u32> {
    let r = round_half_up(value);
    if r < 0 || r > vocab.max_coord() as i64 || !value.is_finite() {
        return Err(Error::CoordinateOutOfRange {
            line,
            point,
            value: r,
            max: vocab.max_coord(),
        });
    }
    Ok(r as u32)
}

fn push_line(out: &mut Vec<Token>, idx: usize, line: &LineRecord, vocab: &Vocabulary) -> Result<()> {
    let mut pts: Vec<(u32, u32)> = Vec::with_capacity(line.points.len());
    for (j, p) in line.points.iter().enumerate() {
        let q = (coord(p.x, idx, j, vocab)?, coord(p.y, idx, j, vocab)?);
        if pts.last() != Some(&q) {
            pts.push(q);
        }
    }
    if pts.len() < 2 {
        return Err(Error::InvalidGeometry(format!(
            "line {idx} ({:?}) collapses to a single point after rounding",
            line.id
        )));
    }

    out.extend([Token::OpenBrace, Token::Points, Token::Colon, Token::OpenBracket]);
    for (j, (x, y)) in pts.into_iter().enumerate() {
        if j > 0 {
            out.push(Token::Comma);
        }
        out.extend([
            Token::OpenBracket,
            Token::Coord(x),
            Token::Comma,
            Token::Coord(y),
            Token::CloseBracket,
        ]);
    }
    out.extend([
        Token::CloseBracket,
        Token::Comma,
        Token::Category,
        Token::Colon,
        Token::CategoryValue(line.category),
        Token::Comma,
        Token::LineTypeKey,
        Token::Colon,
        Token::TypeValue(line.line_type),
        Token::Comma,
        Token::Start,
        Token::Colon,
        Token::Kind(line.start_kind),
        Token::Comma,
        Token::End,
        Token::Colon,
        Token::Kind(line.end_kind),
        Token::CloseBrace,
    ]);
    Ok(())
}

/// Serializes lines in their current order.
///
/// Coordinates are rounded half-up; consecutive points that round to the same
/// pixel are emitted once. The caller is expected to have resampled and
/// reordered the map already.
pub fn serialize_map(map: &VectorMap, vocab: &Vocabulary) -> Result<TokenSequence> {
    let mut tokens = Vec::new();
    for (i, line) in map.lines.iter().enumerate() {
        if i > 0 {
            tokens.push(Token::Comma);
        }
        push_line(&mut tokens, i, line, vocab)?;
    }
    Ok(TokenSequence::from_tokens_unchecked(tokens))
}

/// Clamps every coordinate into `[0, max_coord]`, rounds it, and drops lines
/// that no longer have two distinct points. The result serializes without
/// error and round-trips exactly.
pub fn quantize_map(map: &VectorMap, vocab: &Vocabulary) -> VectorMap {
    let max = vocab.max_coord() as f64;
    let q = |v: f64| round_half_up(v.clamp(0.0, max)) as f64;
    let lines = map
        .lines
        .iter()
        .filter_map(|l| {
            let mut points: Vec<Point2> = l.points.iter().map(|p| Point2::new(q(p.x), q(p.y))).collect();
            dedup_consecutive(&mut points);
            (points.len() >= 2).then(|| LineRecord {
                points,
                ..l.clone()
            })
        })
        .collect();
    VectorMap {
        lines,
        ..map.clone()
    }
}
