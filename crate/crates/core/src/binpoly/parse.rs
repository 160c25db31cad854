//! Reader for the canonical polynomial text format.
//!
//! ```text
//! poly   := sign? term (sign term)*
//! term   := factor ('*'? factor)*
//! factor := integer | var
//! var    := [pqr] digits | 'z' '\''* (digit digit | '_' digits '_' digits) | 'w' digits
//! ```
//!
//! Whitespace is free between tokens, and both `-` and U+2212 are minus.

use super::{Monomial, Poly, Var};
use crate::{Error, Result};

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    at: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { chars: src.char_indices().collect(), at: 0, src }
    }

    fn pos(&self) -> usize {
        self.chars.get(self.at).map_or(self.src.len(), |&(i, _)| i)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.at).map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.at += 1;
        c
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.at += 1;
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos(), msg: msg.into() })
    }

    fn digits(&mut self) -> Result<String> {
        let mut s = String::new();
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            s.push(c);
            self.at += 1;
        }
        if s.is_empty() {
            return self.err("expected digits");
        }
        Ok(s)
    }

    fn number(&mut self) -> Result<u32> {
        let start = self.pos();
        let d = self.digits()?;
        d.parse().map_err(|_| Error::Parse { pos: start, msg: format!("index {d} out of range") })
    }

    fn integer(&mut self) -> Result<i64> {
        let start = self.pos();
        let d = self.digits()?;
        d.parse().map_err(|_| Error::Parse { pos: start, msg: format!("integer {d} out of range") })
    }

    fn var(&mut self) -> Result<Var> {
        let start = self.pos();
        let head = self.bump().expect("caller checked");
        match head {
            'p' | 'q' | 'r' => {
                let factor = match head {
                    'p' => 0,
                    'q' => 1,
                    _ => 2,
                };
                let bit = self.number()?;
                if bit == 0 {
                    return Err(Error::Parse { pos: start, msg: "bit 0 of a factor is fixed".into() });
                }
                Ok(Var::factor(factor, bit))
            }
            'w' => Ok(Var::Ancilla(self.number()?)),
            'z' => {
                let mut stage = 0u8;
                while self.peek() == Some('\'') {
                    self.at += 1;
                    stage += 1;
                }
                let (from, to) = if self.peek() == Some('_') {
                    self.at += 1;
                    let from = self.number()?;
                    if self.bump() != Some('_') {
                        self.at -= 1;
                        return self.err("expected '_' between carry columns");
                    }
                    (from, self.number()?)
                } else {
                    let d = self.digits()?;
                    if d.len() != 2 {
                        return Err(Error::Parse {
                            pos: start,
                            msg: format!("ambiguous carry name z{d}; write z_i_j"),
                        });
                    }
                    let b = d.as_bytes();
                    ((b[0] - b'0') as u32, (b[1] - b'0') as u32)
                };
                if to <= from {
                    return Err(Error::Parse { pos: start, msg: "carry must move to a higher column".into() });
                }
                Ok(Var::staged_carry(from, to, stage))
            }
            _ => unreachable!(),
        }
    }

    fn term(&mut self) -> Result<(Monomial, i64)> {
        let mut coeff = 1i64;
        let mut vars = Vec::new();
        let mut factors = 0;
        loop {
            self.skip_ws();
            if factors > 0 && self.peek() == Some('*') {
                self.at += 1;
                self.skip_ws();
            }
            match self.peek() {
                Some(c) if c.is_ascii_digit() => {
                    let k = self.integer()?;
                    coeff = coeff.checked_mul(k).ok_or(Error::Parse { pos: self.pos(), msg: "coefficient overflow".into() })?;
                }
                Some('p' | 'q' | 'r' | 'z' | 'w') => vars.push(self.var()?),
                _ if factors == 0 => return self.err("expected a number or variable"),
                _ => break,
            }
            factors += 1;
        }
        Ok((Monomial::new(vars), coeff))
    }
}

/// Parses the canonical text form. Repeated variables collapse (`p1 p1` is
/// `p1`) and like terms are merged.
pub fn parse_poly(text: &str) -> Result<Poly> {
    let mut cur = Cursor::new(text);
    let mut out = Poly::zero();
    let mut first = true;
    loop {
        cur.skip_ws();
        let mut sign = 1;
        match cur.peek() {
            None if !first => break,
            None => return cur.err("empty polynomial"),
            Some('+') if !first => {
                cur.at += 1;
            }
            Some('-' | '\u{2212}') => {
                cur.at += 1;
                sign = -1;
            }
            Some(_) if first => {}
            Some(c) => return cur.err(format!("expected '+' or '-', found {c:?}")),
        }
        let (m, c) = cur.term()?;
        out.add_term(m, c * sign);
        first = false;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_printed_four_qubit_hamiltonian() {
        let p = parse_poly("5 - 3 p1 - p2 - q1 + 2 p1 q1 - 3 p2 q1 + 2 p1 p2 q1 - 3 q2 + p1 q2 + 2 p2 q2 + 2 p2 q1 q2").unwrap();
        assert_eq!(p.num_terms(), 11);
        assert_eq!(p.degree(), 3);
        assert_eq!(p.constant_term(), 5);
    }

    #[test]
    fn zero_and_idempotence() {
        assert!(parse_poly("0").unwrap().is_zero());
        assert_eq!(parse_poly("p1 p1").unwrap(), Poly::var(Var::factor(0, 1)));
    }

    #[test]
    fn carry_spellings() {
        let a = parse_poly("z12 + z_10_11 + z'_1_2").unwrap();
        let vs: Vec<Var> = a.vars().into_iter().collect();
        assert_eq!(vs, [Var::carry(1, 2), Var::carry(10, 11), Var::staged_carry(1, 2, 1)]);
        assert_eq!(parse_poly("p1q1*2").unwrap().to_string(), "2 p1 q1");
    }

    #[test]
    fn errors_carry_position() {
        match parse_poly("p1 + + q1") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_poly("z123"), Err(Error::Parse { pos: 0, .. })));
        assert!(matches!(parse_poly(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_poly("p0"), Err(Error::Parse { .. })));
        assert!(matches!(parse_poly("x1"), Err(Error::Parse { pos: 0, .. })));
    }

    #[test]
    fn unicode_minus() {
        assert_eq!(parse_poly("p1 \u{2212} 1").unwrap(), parse_poly("p1 - 1").unwrap());
    }
}
