//! Recursive-descent parser for noncommutative polynomial text.
//!
//! Grammar (left-to-right word order, `*` is noncommutative concatenation):
//!
//! ```text
//! expr    := [+|-] term ((+|-) term)*
//! term    := factor (* factor)*
//! factor  := primary (^ uint)?
//! primary := number | ident | ( expr )
//! number  := digits [. digits] [(e|E) [+|-] digits] [i]   |   i
//! ident   := x1 .. x9
//! ```
//!
//! Complex literals like `1+2i` arise from ordinary expression arithmetic.

use num_complex::Complex64;

use super::{NcPoly, PencilError, PencilResult};

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    d: usize,
    text: &'a str,
}

/// Parses polynomial text over generators `x1 .. x{d}`.
pub fn parse_poly(text: &str, d: usize) -> PencilResult<NcPoly> {
    if d == 0 || d > 9 {
        return Err(PencilError::Parse("generator count must lie in 1..=9".into()));
    }
    let mut p = Parser { chars: text.chars().collect(), pos: 0, d, text };
    let poly = p.expr()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(PencilError::Parse(format!(
            "unexpected trailing input at byte {} in {:?}",
            p.pos, p.text
        )));
    }
    Ok(poly)
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        self.skip_ws();
        let c = self.chars.get(self.pos).copied();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn expr(&mut self) -> PencilResult<NcPoly> {
        let mut acc = match self.peek() {
            Some('-') => {
                self.bump();
                self.term()?.neg()
            }
            Some('+') => {
                self.bump();
                self.term()?
            }
            _ => self.term()?,
        };
        while let Some(op) = self.peek() {
            match op {
                '+' => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                '-' => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> PencilResult<NcPoly> {
        let mut acc = self.factor()?;
        while self.peek() == Some('*') {
            self.bump();
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> PencilResult<NcPoly> {
        let base = self.primary()?;
        if self.peek() == Some('^') {
            self.bump();
            let e = self.uint()?;
            Ok(base.pow(e))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> PencilResult<NcPoly> {
        match self.peek() {
            Some('(') => {
                self.bump();
                let inner = self.expr()?;
                if self.bump() != Some(')') {
                    return Err(PencilError::Parse(format!("missing ')' in {:?}", self.text)));
                }
                Ok(inner)
            }
            Some('x') => {
                self.bump();
                let idx = match self.chars.get(self.pos) {
                    Some(c @ '1'..='9') => {
                        self.pos += 1;
                        c.to_digit(10).unwrap() as usize
                    }
                    _ => {
                        return Err(PencilError::Parse(format!(
                            "expected generator index 1..9 after 'x' in {:?}",
                            self.text
                        )))
                    }
                };
                if idx > self.d {
                    return Err(PencilError::Parse(format!(
                        "generator x{idx} exceeds declared count {}",
                        self.d
                    )));
                }
                Ok(NcPoly::var(self.d, idx - 1))
            }
            Some('i') => {
                self.bump();
                Ok(NcPoly::constant(self.d, Complex64::new(0.0, 1.0)))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            other => Err(PencilError::Parse(format!(
                "unexpected token {other:?} at byte {} in {:?}",
                self.pos, self.text
            ))),
        }
    }

    fn number(&mut self) -> PencilResult<NcPoly> {
        self.skip_ws();
        let start = self.pos;
        while self
            .chars
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit() || *c == '.')
        {
            self.pos += 1;
        }
        if matches!(self.chars.get(self.pos), Some('e') | Some('E')) {
            self.pos += 1;
            if matches!(self.chars.get(self.pos), Some('+') | Some('-')) {
                self.pos += 1;
            }
            while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let lit: String = self.chars[start..self.pos].iter().collect();
        let value: f64 = lit
            .parse()
            .map_err(|_| PencilError::Parse(format!("bad numeric literal {lit:?}")))?;
        if self.chars.get(self.pos) == Some(&'i') {
            self.pos += 1;
            Ok(NcPoly::constant(self.d, Complex64::new(0.0, value)))
        } else {
            Ok(NcPoly::constant(self.d, Complex64::new(value, 0.0)))
        }
    }

    fn uint(&mut self) -> PencilResult<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let lit: String = self.chars[start..self.pos].iter().collect();
        lit.parse()
            .map_err(|_| PencilError::Parse(format!("bad exponent {lit:?} in {:?}", self.text)))
    }
}
