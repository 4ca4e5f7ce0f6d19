use std::iter::Peekable;
use std::str::Chars;

use thiserror::Error;

use super::{
    classify_token, is_delimiter, SExpr, SExprKind, SourcePosition, TokenClass, RESERVED_SYMBOL,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{pos}: unbalanced parentheses: list opened here is never closed")]
    UnclosedList { pos: SourcePosition },
    #[error("{pos}: unexpected `)`")]
    StrayClose { pos: SourcePosition },
    #[error("{pos}: unterminated string literal")]
    UnterminatedString { pos: SourcePosition },
    #[error("{pos}: unknown escape `\\{ch}` in string literal")]
    InvalidEscape { pos: SourcePosition, ch: char },
    #[error("{pos}: integer literal `{text}` does not fit in 64 bits")]
    IntegerOutOfRange { pos: SourcePosition, text: String },
    #[error("{pos}: float literal `{text}` is not finite")]
    FloatOutOfRange { pos: SourcePosition, text: String },
    #[error("{pos}: `{RESERVED_SYMBOL}` is a reserved symbol")]
    ReservedSymbol { pos: SourcePosition },
    #[error("{pos}: `{marker}` must be followed by a form")]
    MissingOperand {
        pos: SourcePosition,
        marker: &'static str,
    },
}

impl ParseError {
    pub fn position(&self) -> SourcePosition {
        match self {
            ParseError::UnclosedList { pos }
            | ParseError::StrayClose { pos }
            | ParseError::UnterminatedString { pos }
            | ParseError::InvalidEscape { pos, .. }
            | ParseError::IntegerOutOfRange { pos, .. }
            | ParseError::FloatOutOfRange { pos, .. }
            | ParseError::ReservedSymbol { pos }
            | ParseError::MissingOperand { pos, .. } => *pos,
        }
    }
}

/// Reads every top-level form in `text`.
///
/// `;` starts a comment running to the end of the line. `,X` reads as
/// `(unquote X)` and `,@X` as `(unquote-splicing X)`.
pub fn parse_sexprs(text: &str) -> Result<Vec<SExpr>, ParseError> {
    let mut reader = Reader::new(text);
    let mut forms = Vec::new();
    loop {
        reader.skip_atmosphere();
        match reader.peek() {
            None => return Ok(forms),
            Some(')') => return Err(ParseError::StrayClose { pos: reader.pos() }),
            Some(_) => forms.push(reader.read_form()?),
        }
    }
}

struct Reader<'a> {
    chars: Peekable<Chars<'a>>,
    line: u32,
    column: u32,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn pos(&self) -> SourcePosition {
        SourcePosition::new(self.line, self.column)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_atmosphere(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Reads one form; the caller has checked that input remains and the
    /// next character is not `)`.
    fn read_form(&mut self) -> Result<SExpr, ParseError> {
        let start = self.pos();
        match self.peek() {
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_atmosphere();
                    match self.peek() {
                        None => return Err(ParseError::UnclosedList { pos: start }),
                        Some(')') => {
                            self.bump();
                            return Ok(SExpr::list(items).at(start));
                        }
                        Some(_) => items.push(self.read_form()?),
                    }
                }
            }
            Some('"') => self.read_string(start),
            Some(',') => {
                self.bump();
                let marker = if self.peek() == Some('@') {
                    self.bump();
                    "unquote-splicing"
                } else {
                    "unquote"
                };
                self.skip_atmosphere();
                match self.peek() {
                    None | Some(')') => Err(ParseError::MissingOperand { pos: start, marker }),
                    Some(_) => {
                        let operand = self.read_form()?;
                        Ok(SExpr::list(vec![SExpr::symbol(marker).at(start), operand]).at(start))
                    }
                }
            }
            _ => self.read_atom(start),
        }
    }

    fn read_string(&mut self, start: SourcePosition) -> Result<SExpr, ParseError> {
        self.bump();
        let mut text = String::new();
        loop {
            let here = self.pos();
            match self.bump() {
                None => return Err(ParseError::UnterminatedString { pos: start }),
                Some('"') => return Ok(SExpr::string(text).at(start)),
                Some('\\') => match self.bump() {
                    Some('"') => text.push('"'),
                    Some('\\') => text.push('\\'),
                    Some('n') => text.push('\n'),
                    Some('t') => text.push('\t'),
                    Some('r') => text.push('\r'),
                    Some(ch) => return Err(ParseError::InvalidEscape { pos: here, ch }),
                    None => return Err(ParseError::UnterminatedString { pos: start }),
                },
                Some(c) => text.push(c),
            }
        }
    }

    fn read_atom(&mut self, start: SourcePosition) -> Result<SExpr, ParseError> {
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if is_delimiter(c) {
                break;
            }
            text.push(c);
            self.bump();
        }
        let kind = match classify_token(&text) {
            TokenClass::Integer(v) => SExprKind::Integer(v),
            TokenClass::IntegerOverflow => {
                return Err(ParseError::IntegerOutOfRange { pos: start, text })
            }
            TokenClass::Float(v) if v.is_finite() => SExprKind::Float(v),
            TokenClass::Float(_) => return Err(ParseError::FloatOutOfRange { pos: start, text }),
            TokenClass::Symbol if text == RESERVED_SYMBOL => {
                return Err(ParseError::ReservedSymbol { pos: start })
            }
            TokenClass::Symbol => SExprKind::Symbol(text),
        };
        Ok(SExpr::new(kind).at(start))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(s: &str) -> SExpr {
        SExpr::symbol(s)
    }

    fn list(items: Vec<SExpr>) -> SExpr {
        SExpr::list(items)
    }

    #[test]
    fn declare_form() {
        let forms = parse_sexprs("(declare var int)").unwrap();
        assert_eq!(
            forms,
            vec![list(vec![sym("declare"), sym("var"), sym("int")])]
        );
    }

    #[test]
    fn empty_input() {
        assert!(parse_sexprs("").unwrap().is_empty());
        assert!(parse_sexprs("  ; only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn unquote_reader_macro() {
        let forms = parse_sexprs("(eq (call getchar) ,EOF)").unwrap();
        let expected = list(vec![
            sym("eq"),
            list(vec![sym("call"), sym("getchar")]),
            list(vec![sym("unquote"), sym("EOF")]),
        ]);
        assert_eq!(forms, vec![expected]);
    }

    #[test]
    fn unquote_splicing_reader_macro() {
        let forms = parse_sexprs(",@(declare_multiple (ch i) int)").unwrap();
        let expected = list(vec![
            sym("unquote-splicing"),
            list(vec![
                sym("declare_multiple"),
                list(vec![sym("ch"), sym("i")]),
                sym("int"),
            ]),
        ]);
        assert_eq!(forms, vec![expected]);
    }

    #[test]
    fn atoms() {
        let forms = parse_sexprs(r#"45 45.0 -1 "ker\"nel\\" x"#).unwrap();
        assert_eq!(
            forms,
            vec![
                SExpr::integer(45),
                SExpr::float(45.0),
                SExpr::integer(-1),
                SExpr::string("ker\"nel\\"),
                sym("x"),
            ]
        );
    }

    #[test]
    fn positions_are_recorded() {
        let forms = parse_sexprs("\n  (set x\n     (add x 1))").unwrap();
        let set = &forms[0];
        assert_eq!(set.pos, Some(SourcePosition::new(2, 3)));
        let add = &set.as_list().unwrap()[2];
        assert_eq!(add.pos, Some(SourcePosition::new(3, 6)));
        assert_eq!(
            add.as_list().unwrap()[2].pos,
            Some(SourcePosition::new(3, 13))
        );
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            parse_sexprs("(a\n (b c)").unwrap_err(),
            ParseError::UnclosedList {
                pos: SourcePosition::new(1, 1)
            }
        );
        assert_eq!(
            parse_sexprs("(a) )").unwrap_err(),
            ParseError::StrayClose {
                pos: SourcePosition::new(1, 5)
            }
        );
        assert_eq!(
            parse_sexprs("(a \"abc").unwrap_err(),
            ParseError::UnterminatedString {
                pos: SourcePosition::new(1, 4)
            }
        );
        assert!(matches!(
            parse_sexprs("(a ,)"),
            Err(ParseError::MissingOperand { .. })
        ));
        assert!(matches!(
            parse_sexprs("1e999"),
            Err(ParseError::FloatOutOfRange { .. })
        ));
        assert!(matches!(
            parse_sexprs("123456789012345678901"),
            Err(ParseError::IntegerOutOfRange { .. })
        ));
        assert!(matches!(
            parse_sexprs("(string x)"),
            Err(ParseError::ReservedSymbol { .. })
        ));
        assert!(matches!(
            parse_sexprs(r#""\q""#),
            Err(ParseError::InvalidEscape { ch: 'q', .. })
        ));
    }

    #[test]
    fn comments_are_invisible() {
        let plain = parse_sexprs("(define ((f int)) (ret 1))").unwrap();
        let commented =
            parse_sexprs("; header\n(define ; name\n ((f int)) ; sig\n (ret 1)) ; done").unwrap();
        assert_eq!(plain, commented);
    }
}
