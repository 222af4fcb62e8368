//! Hand-rolled lexer. Tracks 1-based line/column for spans.

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    // keywords
    Function,
    Export,
    Var,
    If,
    Else,
    While,
    For,
    Return,
    Throw,
    Try,
    Catch,
    True,
    False,
    Null,
    // literals / names
    Int(i64),
    Str(Vec<u8>),
    Ident(String),
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Dot,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    pub len: u32,
    /// Byte offset of the token start in the source text.
    pub offset: usize,
}

pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr, $n:expr, $off:expr) => {
            toks.push(Token { tok: $tok, line: $l, col: $c, len: $n, offset: $off })
        };
    }

    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            b' ' | b'\t' | b'\r' => {
                i += 1;
                col += 1;
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'"' => {
                let (sl, sc, so) = (line, col, i);
                i += 1;
                col += 1;
                let mut s = Vec::new();
                loop {
                    match bytes.get(i) {
                        None | Some(b'\n') => {
                            return Err(ParseError::new(sl, sc, "unterminated string literal"))
                        }
                        Some(b'"') => {
                            i += 1;
                            col += 1;
                            break;
                        }
                        Some(b'\\') => {
                            let esc = bytes.get(i + 1).copied();
                            let byte = match esc {
                                Some(b'n') => b'\n',
                                Some(b't') => b'\t',
                                Some(b'\\') => b'\\',
                                Some(b'"') => b'"',
                                Some(b'0') => 0,
                                _ => return Err(ParseError::new(line, col, "bad escape")),
                            };
                            s.push(byte);
                            i += 2;
                            col += 2;
                        }
                        Some(&c) => {
                            s.push(c);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                push!(Tok::Str(s), sl, sc, (i - so) as u32, so);
            }
            b'0'..=b'9' => {
                let (sl, sc) = (line, col);
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let text = std::str::from_utf8(&bytes[start..i]).unwrap();
                let n = text
                    .parse::<i64>()
                    .map_err(|_| ParseError::new(sl, sc, "integer literal out of range"))?;
                push!(Tok::Int(n), sl, sc, (i - start) as u32, start);
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let (sl, sc) = (line, col);
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                    col += 1;
                }
                let word = std::str::from_utf8(&bytes[start..i]).unwrap();
                let tok = match word {
                    "function" => Tok::Function,
                    "export" => Tok::Export,
                    "var" => Tok::Var,
                    "if" => Tok::If,
                    "else" => Tok::Else,
                    "while" => Tok::While,
                    "for" => Tok::For,
                    "return" => Tok::Return,
                    "throw" => Tok::Throw,
                    "try" => Tok::Try,
                    "catch" => Tok::Catch,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "null" => Tok::Null,
                    _ => Tok::Ident(word.to_string()),
                };
                push!(tok, sl, sc, (i - start) as u32, start);
            }
            _ => {
                let (sl, sc) = (line, col);
                let two = bytes.get(i..i + 2).unwrap_or(&bytes[i..]);
                let (tok, n) = match two {
                    b"==" => (Tok::EqEq, 2),
                    b"!=" => (Tok::NotEq, 2),
                    b"<=" => (Tok::Le, 2),
                    b">=" => (Tok::Ge, 2),
                    b"&&" => (Tok::AndAnd, 2),
                    b"||" => (Tok::OrOr, 2),
                    _ => match b {
                        b'(' => (Tok::LParen, 1),
                        b')' => (Tok::RParen, 1),
                        b'{' => (Tok::LBrace, 1),
                        b'}' => (Tok::RBrace, 1),
                        b'[' => (Tok::LBracket, 1),
                        b']' => (Tok::RBracket, 1),
                        b',' => (Tok::Comma, 1),
                        b';' => (Tok::Semi, 1),
                        b'.' => (Tok::Dot, 1),
                        b'=' => (Tok::Assign, 1),
                        b'+' => (Tok::Plus, 1),
                        b'-' => (Tok::Minus, 1),
                        b'*' => (Tok::Star, 1),
                        b'/' => (Tok::Slash, 1),
                        b'%' => (Tok::Percent, 1),
                        b'<' => (Tok::Lt, 1),
                        b'>' => (Tok::Gt, 1),
                        b'!' => (Tok::Bang, 1),
                        _ => {
                            return Err(ParseError::new(
                                line,
                                col,
                                format!("unexpected character `{}`", b as char),
                            ))
                        }
                    },
                };
                push!(tok, sl, sc, n as u32, i);
                i += n;
                col += n as u32;
            }
        }
    }
    push!(Tok::Eof, line, col, 0, bytes.len());
    Ok(toks)
}
