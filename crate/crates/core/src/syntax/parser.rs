use thiserror::Error;

use super::Formula;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    True,
    False,
    Kh,
    Univ,
    Exists,
    Tilde,
    Amp,
    Bar,
    Arrow,
    DoubleArrow,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("proposition `{s}`"),
            Tok::True => "`true`".into(),
            Tok::False => "`false`".into(),
            Tok::Kh => "`Kh`".into(),
            Tok::Univ => "`A`".into(),
            Tok::Exists => "`E`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::DoubleArrow => "`<->`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut column) = (0, 1, 1);
    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        let mut push = |tok, len: usize, i: &mut usize, column: &mut usize| {
            out.push(Spanned {
                tok,
                line: start_line,
                column: start_col,
            });
            *i += len;
            *column += len;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                column += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '~' => push(Tok::Tilde, 1, &mut i, &mut column),
            '&' => push(Tok::Amp, 1, &mut i, &mut column),
            '|' => push(Tok::Bar, 1, &mut i, &mut column),
            '(' => push(Tok::LParen, 1, &mut i, &mut column),
            ')' => push(Tok::RParen, 1, &mut i, &mut column),
            ',' => push(Tok::Comma, 1, &mut i, &mut column),
            '-' if chars.get(i + 1) == Some(&'>') => push(Tok::Arrow, 2, &mut i, &mut column),
            '<' if chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') => {
                push(Tok::DoubleArrow, 3, &mut i, &mut column)
            }
            c if c.is_ascii_alphabetic() => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                let tok = match word.as_str() {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "Kh" => Tok::Kh,
                    "A" => Tok::Univ,
                    "E" => Tok::Exists,
                    w if w.starts_with(|c: char| c.is_ascii_lowercase()) => {
                        Tok::Ident(word.clone())
                    }
                    _ => return Err(err(
                        start_line,
                        start_col,
                        format!(
                            "unknown token `{word}`; propositions start with a lowercase letter"
                        ),
                    )),
                };
                push(tok, j - i, &mut i, &mut column);
            }
            other => {
                return Err(err(line, column, format!("unexpected character `{other}`")));
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError {
            line: s.line,
            column: s.column,
            message,
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                tok.describe(),
                self.peek().describe()
            )))
        }
    }

    // iff := imp ("<->" imp)*          left-assoc
    fn iff(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.implication()?;
        while *self.peek() == Tok::DoubleArrow {
            self.bump();
            let rhs = self.implication()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    // imp := or ("->" imp)?            right-assoc
    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Tilde => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Univ => {
                self.bump();
                Ok(Formula::univ(self.unary()?))
            }
            Tok::Exists => {
                self.bump();
                Ok(Formula::exists(self.unary()?))
            }
            Tok::Kh => {
                self.bump();
                self.expect(Tok::LParen)?;
                let pre = self.iff()?;
                self.expect(Tok::Comma)?;
                let post = self.iff()?;
                self.expect(Tok::RParen)?;
                Ok(Formula::kh(pre, post))
            }
            Tok::LParen => {
                self.bump();
                let f = self.iff()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::True => {
                self.bump();
                Ok(Formula::Top)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::Bot)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Formula::Prop(name))
            }
            other => Err(self.error(format!("expected a formula, found {}", other.describe()))),
        }
    }
}

/// Parses a formula in the concrete grammar.
///
/// Precedence from tightest: `~`/`A`/`E`, `&`, `|`, `->` (right-assoc),
/// `<->` (left-assoc). `#` starts a comment running to the end of the line.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let f = p.iff()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error(format!("unexpected {} after formula", p.peek().describe())));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop(s: &str) -> Formula {
        Formula::prop(s)
    }

    #[test]
    fn kh_with_conjunction() {
        assert_eq!(
            parse("Kh(p & q, r)").unwrap(),
            Formula::kh(Formula::and(prop("p"), prop("q")), prop("r"))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            parse("~p & q | r -> s -> t <-> u").unwrap(),
            Formula::iff(
                Formula::implies(
                    Formula::or(Formula::and(Formula::not(prop("p")), prop("q")), prop("r")),
                    Formula::implies(prop("s"), prop("t"))
                ),
                prop("u")
            )
        );
        assert_eq!(
            parse("A p & E q").unwrap(),
            Formula::and(Formula::univ(prop("p")), Formula::exists(prop("q")))
        );
        assert_eq!(
            parse("p & q & r").unwrap(),
            Formula::and(Formula::and(prop("p"), prop("q")), prop("r"))
        );
    }

    #[test]
    fn comments_and_whitespace() {
        let text = "# leading comment\n  Kh(p,\n     q) # trailing\n";
        assert_eq!(parse(text).unwrap(), Formula::kh(prop("p"), prop("q")));
        assert_eq!(
            parse("true|false").unwrap(),
            Formula::or(Formula::Top, Formula::Bot)
        );
        assert_eq!(parse("x_1").unwrap(), prop("x_1"));
    }

    #[test]
    fn errors_report_position() {
        let e = parse("p &\n  & q").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));

        let e = parse("Kh(p q)").unwrap_err();
        assert_eq!((e.line, e.column), (1, 6));
        assert!(e.message.contains("expected `,`"));

        let e = parse("p $ q").unwrap_err();
        assert_eq!((e.line, e.column), (1, 3));

        let e = parse("Foo").unwrap_err();
        assert!(e.message.contains("unknown token"));

        assert!(parse("").is_err());
        assert!(parse("(p").is_err());
        assert!(parse("p q").is_err());
    }
}
