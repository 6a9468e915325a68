//! Canonical text formats for tensors and certificates.
//!
//! The structured document is a single JSON object written by hand so the
//! byte stream is reproducible: no whitespace, fields in a fixed order,
//! entries as canonical integers in row-major order. A one-line compact
//! variant `p^m|n1,n2,n3|e1 e2 ...` is accepted for pipes.

use crate::error::{Error, Result};
use crate::gf::{Elem, Field};
use crate::subrank::SubrankCertificate;
use crate::tensor::FqTensor;

pub fn field_name(f: &Field) -> String {
    if f.m() == 1 {
        format!("{}", f.p())
    } else {
        format!("{}^{}", f.p(), f.m())
    }
}

fn write_list<T: std::fmt::Display>(out: &mut String, items: impl Iterator<Item = T>) {
    out.push('[');
    for (i, x) in items.enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&x.to_string());
    }
    out.push(']');
}

pub fn tensor_to_structured(t: &FqTensor) -> String {
    let mut s = String::new();
    s.push_str("{\"field\":\"");
    s.push_str(&field_name(t.field()));
    s.push_str("\",\"dims\":");
    write_list(&mut s, t.dims().iter());
    s.push_str(",\"entries\":");
    write_list(&mut s, t.entries().iter());
    s.push('}');
    s
}

pub fn tensor_to_compact(t: &FqTensor) -> String {
    let dims: Vec<String> = t.dims().iter().map(|n| n.to_string()).collect();
    let entries: Vec<String> = t.entries().iter().map(|e| e.to_string()).collect();
    format!(
        "{}|{}|{}",
        field_name(t.field()),
        dims.join(","),
        entries.join(" ")
    )
}

pub fn certificate_to_structured(c: &SubrankCertificate) -> String {
    let mut s = String::new();
    s.push_str("{\"field\":\"");
    s.push_str(&field_name(&c.field));
    s.push_str("\",\"c\":");
    s.push_str(&c.c.to_string());
    s.push_str(",\"u\":[");
    for (i, mode) in c.u.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push('[');
        for (j, v) in mode.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write_list(&mut s, v.iter());
        }
        s.push(']');
    }
    s.push_str("],\"coeff\":[");
    for (k, v) in c.coeff.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        write_list(&mut s, v.iter());
    }
    s.push_str("]}");
    s
}

/// Minimal recursive-descent reader for the subset of JSON the writers
/// above emit: objects with string keys, strings, unsigned integers, and
/// nested arrays. Enough for round trips without pulling in a parser crate.
struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn new(s: &'a str) -> Scanner<'a> {
        Scanner {
            bytes: s.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Result<u8> {
        self.skip_ws();
        self.bytes
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Parse("unexpected end of input".into()))
    }

    fn expect(&mut self, b: u8) -> Result<()> {
        let got = self.peek()?;
        if got != b {
            return Err(Error::Parse(format!(
                "expected {:?} at byte {}, found {:?}",
                b as char, self.pos, got as char
            )));
        }
        self.pos += 1;
        Ok(())
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Ok(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn string(&mut self) -> Result<String> {
        self.expect(b'"')?;
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos] != b'"' {
            self.pos += 1;
        }
        if self.pos == self.bytes.len() {
            return Err(Error::Parse("unterminated string".into()));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Parse("invalid utf-8 in string".into()))?
            .to_string();
        self.pos += 1;
        Ok(s)
    }

    fn uint(&mut self) -> Result<u64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Parse(format!("expected integer at byte {start}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse("integer out of range".into()))
    }

    fn uint_list(&mut self) -> Result<Vec<u64>> {
        self.expect(b'[')?;
        let mut out = Vec::new();
        if self.eat(b']') {
            return Ok(out);
        }
        loop {
            out.push(self.uint()?);
            if self.eat(b']') {
                return Ok(out);
            }
            self.expect(b',')?;
        }
    }

    fn key(&mut self, name: &str) -> Result<()> {
        let k = self.string()?;
        if k != name {
            return Err(Error::Parse(format!("expected key {name:?}, found {k:?}")));
        }
        self.expect(b':')
    }

    fn done(&mut self) -> Result<()> {
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return Err(Error::Parse(format!("trailing data at byte {}", self.pos)));
        }
        Ok(())
    }
}

fn elems(raw: Vec<u64>, field: &Field) -> Result<Vec<Elem>> {
    raw.into_iter()
        .map(|e| {
            if e < field.q() {
                Ok(e as Elem)
            } else {
                Err(Error::Parse(format!(
                    "entry {e} out of range for GF({})",
                    field.q()
                )))
            }
        })
        .collect()
}

pub fn tensor_from_structured(s: &str) -> Result<FqTensor> {
    let mut sc = Scanner::new(s);
    sc.expect(b'{')?;
    sc.key("field")?;
    let field = Field::parse(&sc.string()?)?;
    sc.expect(b',')?;
    sc.key("dims")?;
    let dims: Vec<usize> = sc.uint_list()?.into_iter().map(|n| n as usize).collect();
    sc.expect(b',')?;
    sc.key("entries")?;
    let entries = elems(sc.uint_list()?, &field)?;
    sc.expect(b'}')?;
    sc.done()?;
    FqTensor::new(field, dims, entries)
}

pub fn tensor_from_compact(s: &str) -> Result<FqTensor> {
    let mut parts = s.trim().splitn(3, '|');
    let (f, d, e) = match (parts.next(), parts.next(), parts.next()) {
        (Some(f), Some(d), Some(e)) => (f, d, e),
        _ => {
            return Err(Error::Parse(
                "compact form is field|dims|entries with two pipes".into(),
            ))
        }
    };
    let field = Field::parse(f)?;
    let dims: Vec<usize> = d
        .split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad dimension {x:?}")))
        })
        .collect::<Result<_>>()?;
    let raw: Vec<u64> = e
        .split_whitespace()
        .map(|x| {
            x.parse()
                .map_err(|_| Error::Parse(format!("bad entry {x:?}")))
        })
        .collect::<Result<_>>()?;
    FqTensor::new(field.clone(), dims, elems(raw, &field)?)
}

/// Reads either format: structured if the text starts with '{'.
pub fn tensor_from_str(s: &str) -> Result<FqTensor> {
    if s.trim_start().starts_with('{') {
        tensor_from_structured(s)
    } else {
        tensor_from_compact(s)
    }
}

pub fn certificate_from_structured(s: &str) -> Result<SubrankCertificate> {
    let mut sc = Scanner::new(s);
    sc.expect(b'{')?;
    sc.key("field")?;
    let field = Field::parse(&sc.string()?)?;
    sc.expect(b',')?;
    sc.key("c")?;
    let c = sc.uint()? as usize;
    sc.expect(b',')?;
    sc.key("u")?;
    sc.expect(b'[')?;
    let mut u = Vec::new();
    if !sc.eat(b']') {
        loop {
            sc.expect(b'[')?;
            let mut mode = Vec::new();
            if !sc.eat(b']') {
                loop {
                    mode.push(elems(sc.uint_list()?, &field)?);
                    if sc.eat(b']') {
                        break;
                    }
                    sc.expect(b',')?;
                }
            }
            u.push(mode);
            if sc.eat(b']') {
                break;
            }
            sc.expect(b',')?;
        }
    }
    sc.expect(b',')?;
    sc.key("coeff")?;
    sc.expect(b'[')?;
    let mut coeff = Vec::new();
    if !sc.eat(b']') {
        loop {
            coeff.push(elems(sc.uint_list()?, &field)?);
            if sc.eat(b']') {
                break;
            }
            sc.expect(b',')?;
        }
    }
    sc.expect(b'}')?;
    sc.done()?;
    if u.iter().any(|m| m.len() != c) || coeff.len() != c {
        return Err(Error::Parse(
            "certificate lists do not match the stated size".into(),
        ));
    }
    Ok(SubrankCertificate { field, c, u, coeff })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> Field {
        Field::build(2, 1).unwrap()
    }

    #[test]
    fn tensor_round_trip_structured() {
        let t = FqTensor::w_tensor(f2()).unwrap();
        let s = tensor_to_structured(&t);
        assert_eq!(
            s,
            "{\"field\":\"2\",\"dims\":[2,2,2],\"entries\":[0,1,1,0,1,0,0,0]}"
        );
        assert_eq!(tensor_from_str(&s).unwrap(), t);
    }

    #[test]
    fn tensor_round_trip_compact() {
        let f = Field::build(2, 2).unwrap();
        let t = FqTensor::random(f, vec![2, 3, 2], 7).unwrap();
        let s = tensor_to_compact(&t);
        assert_eq!(tensor_from_str(&s).unwrap(), t);
        let t2 = tensor_from_str("2|2,2|1 0 0 1").unwrap();
        assert_eq!(t2.dims(), &[2, 2]);
    }

    #[test]
    fn certificate_round_trip() {
        let c = SubrankCertificate {
            field: f2(),
            c: 2,
            u: vec![
                vec![vec![1, 0], vec![0, 1]],
                vec![vec![1, 0], vec![0, 1]],
            ],
            coeff: vec![vec![1, 0], vec![0, 1]],
        };
        let s = certificate_to_structured(&c);
        assert_eq!(certificate_from_structured(&s).unwrap(), c);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(tensor_from_str("{\"field\":\"2\"}").is_err());
        assert!(tensor_from_str("2|2,2|1 0 0 5").is_err());
        assert!(tensor_from_str("2|2,2").is_err());
        assert!(certificate_from_structured("{}").is_err());
    }

    #[test]
    fn structured_output_is_stable() {
        let t = FqTensor::identity(Field::build(3, 1).unwrap(), 2, 3).unwrap();
        let a = tensor_to_structured(&t);
        let b = tensor_to_structured(&tensor_from_str(&a).unwrap());
        assert_eq!(a, b);
    }
}
