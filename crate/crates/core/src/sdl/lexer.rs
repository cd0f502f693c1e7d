use alloc::string::String;
use alloc::vec::Vec;

use super::error::{Origin, ParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Word(String),
    Int(String),
    Decimal(String),
    Str(String),
    Url(String),
    Punct(char),
    Eof,
}

impl Token {
    pub fn describe(&self) -> String {
        use alloc::format;
        match self {
            Token::Word(w) => format!("'{w}'"),
            Token::Int(n) | Token::Decimal(n) => format!("number {n}"),
            Token::Str(_) => "string literal".into(),
            Token::Url(u) => format!("url {u}"),
            Token::Punct(c) => format!("'{c}'"),
            Token::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub token: Token,
    pub origin: Origin,
}

const PUNCTUATION: &[char] = &['{', '}', '(', ')', '[', ']', '<', '>', ',', ':', '='];

struct Cursor<'a> {
    chars: core::iter::Peekable<core::str::Chars<'a>>,
    rest: &'a str,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor {
            chars: src.chars().peekable(),
            rest: src,
            line: 1,
            column: 1,
        }
    }

    fn origin(&self) -> Origin {
        Origin::new(self.line, self.column)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        self.rest = &self.rest[c.len_utf8()..];
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn eat_while(&mut self, mut pred: impl FnMut(char) -> bool) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            out.push(c);
            self.bump();
        }
        out
    }
}

/// Splits source text into tokens. Stops at the first lexical error.
pub fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut cur = Cursor::new(src);
    let mut tokens = Vec::new();
    loop {
        // whitespace and comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('#') => {
                    cur.eat_while(|c| c != '\n');
                }
                _ => break,
            }
        }
        let origin = cur.origin();
        let Some(c) = cur.peek() else {
            tokens.push(Spanned {
                token: Token::Eof,
                origin,
            });
            return Ok(tokens);
        };
        let token = if cur.rest.starts_with("http://") || cur.rest.starts_with("https://") {
            Token::Url(cur.eat_while(|c| !c.is_whitespace() && !matches!(c, '}' | ']' | ',')))
        } else if c.is_ascii_alphabetic() {
            Token::Word(cur.eat_while(|c| c.is_ascii_alphanumeric() || c == '_'))
        } else if c.is_ascii_digit() || (c == '-' && starts_number(&cur.rest[1..])) {
            lex_number(&mut cur, origin)?
        } else if c == '"' {
            lex_string(&mut cur, origin)?
        } else if PUNCTUATION.contains(&c) {
            cur.bump();
            Token::Punct(c)
        } else {
            return Err(ParseError::error(
                origin,
                alloc::format!("unexpected character '{c}'"),
            ));
        };
        tokens.push(Spanned { token, origin });
    }
}

fn starts_number(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_digit())
}

fn lex_number(cur: &mut Cursor<'_>, origin: Origin) -> Result<Token, ParseError> {
    let mut text = String::new();
    if cur.peek() == Some('-') {
        cur.bump();
        text.push('-');
    }
    text.push_str(&cur.eat_while(|c| c.is_ascii_digit()));
    if cur.peek() == Some('.') {
        cur.bump();
        let frac = cur.eat_while(|c| c.is_ascii_digit());
        if frac.is_empty() {
            return Err(ParseError::error(
                origin,
                "expected digits after decimal point",
            ));
        }
        text.push('.');
        text.push_str(&frac);
        Ok(Token::Decimal(text))
    } else {
        Ok(Token::Int(text))
    }
}

fn lex_string(cur: &mut Cursor<'_>, origin: Origin) -> Result<Token, ParseError> {
    cur.bump();
    let mut out = String::new();
    loop {
        match cur.bump() {
            None => return Err(ParseError::error(origin, "unterminated string literal")),
            Some('"') => return Ok(Token::Str(out)),
            Some('\\') => {
                let at = cur.origin();
                match cur.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some(other) => {
                        return Err(ParseError::error(
                            Origin::new(at.line, at.column.saturating_sub(1).max(1)),
                            alloc::format!("invalid escape sequence '\\{other}'"),
                        ))
                    }
                    None => return Err(ParseError::error(origin, "unterminated string literal")),
                }
            }
            Some(c) => out.push(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn kinds(src: &str) -> Vec<Token> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| t.token)
            .collect()
    }

    #[test]
    fn lexes_quantities_and_money() {
        assert_eq!(
            kinds("set quota 5 GB # trailing\nset p 9.99 EUR"),
            vec![
                Token::Word("set".into()),
                Token::Word("quota".into()),
                Token::Int("5".into()),
                Token::Word("GB".into()),
                Token::Word("set".into()),
                Token::Word("p".into()),
                Token::Decimal("9.99".into()),
                Token::Word("EUR".into()),
                Token::Eof,
            ]
        );
    }

    #[test]
    fn string_escapes() {
        assert_eq!(
            kinds(r#""a \"b\" \\ c""#),
            vec![Token::Str(r#"a "b" \ c"#.into()), Token::Eof]
        );
        assert!(tokenize(r#""bad \n""#).is_err());
    }

    #[test]
    fn urls_stop_at_whitespace_and_braces() {
        assert_eq!(
            kinds("https://example.com/a?b=1}"),
            vec![
                Token::Url("https://example.com/a?b=1".into()),
                Token::Punct('}'),
                Token::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based_characters() {
        let toks = tokenize("ä\n  x").unwrap_err();
        assert_eq!((toks.line, toks.column), (1, 1));
        let toks = tokenize("# é\n  x").unwrap();
        assert_eq!(toks[0].origin, Origin::new(2, 3));
        assert_eq!((toks[0].origin.line, toks[0].origin.column), (2, 3));
    }

    #[test]
    fn unterminated_string_reports_its_start() {
        let err = tokenize("  \"abc").unwrap_err();
        assert_eq!((err.line, err.column), (1, 3));
    }
}
