//! Map serialization to and from the bracketed special-token grammar.
//!
//! A map is rendered as a comma-separated sequence of line objects:
//!
//! ```text
//! <{><points><:><[><[><257><,><49><]><,><[><376><,><15><]><]><,><category><:><Curb>
//! <,><line_type><:><Solid><,><start><:><Natural><,><end><:><Cut><}>
//! ```
//!
//! (wrapped here for display; the rendered string never contains whitespace).
//! Every coordinate is a single token, so `257` is `<257>` rather than digits.

mod lexer;
mod parse;
mod serialize;
mod vocab;

pub use lexer::{tokenize_lenient, tokenize_raw};
pub use parse::{detokenize, detokenize_str, Decoded, Diagnostic, ParseMode};
pub use serialize::{quantize_map, round_half_up, serialize_map};
pub use vocab::{Token, TokenSequence, Vocabulary};
