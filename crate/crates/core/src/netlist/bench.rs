//! The ISCAS-85 `.bench` text format.
//!
//! ```text
//! # comment
//! INPUT(a)
//! OUTPUT(y)
//! y = NAND(a, b)
//! ```
//!
//! Keywords and gate kinds are case-insensitive, names are
//! `[A-Za-z0-9_]+`, whitespace is insignificant and CRLF is accepted.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::{Gate, GateKind, Netlist, NetlistError};

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn err(&self, message: impl Into<String>) -> NetlistError {
        NetlistError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn ident(&mut self) -> Result<String, NetlistError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_ascii_alphanumeric() || self.chars[self.pos] == '_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.chars.get(self.pos) {
                Some(c) => self.err(format!("expected a name, found {c:?}")),
                None => self.err("expected a name, found end of line"),
            });
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn expect(&mut self, c: char) -> Result<(), NetlistError> {
        self.skip_ws();
        match self.chars.get(self.pos) {
            Some(&found) if found == c => {
                self.pos += 1;
                Ok(())
            }
            Some(found) => Err(self.err(format!("expected {c:?}, found {found:?}"))),
            None => Err(self.err(format!("expected {c:?}, found end of line"))),
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }
}

/// Parses `.bench` text into a validated [`Netlist`] called `name`.
///
/// Declaration order of inputs, outputs and gates is preserved.
pub fn parse_bench(text: &str, name: &str) -> Result<Netlist, NetlistError> {
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut gates = Vec::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut cur = Cursor::new(line, idx + 1);
        if cur.at_end() {
            continue;
        }
        let head_col = cur.pos;
        let head = cur.ident()?;
        match cur.peek() {
            Some('(') => {
                let upper = head.to_ascii_uppercase();
                let target = match upper.as_str() {
                    "INPUT" => &mut inputs,
                    "OUTPUT" => &mut outputs,
                    _ => {
                        cur.pos = head_col;
                        return Err(cur.err(format!("unknown declaration {head:?}")));
                    }
                };
                cur.expect('(')?;
                let sig = cur.ident()?;
                cur.expect(')')?;
                target.push(sig);
            }
            Some('=') => {
                cur.expect('=')?;
                let kind_col = {
                    cur.skip_ws();
                    cur.pos
                };
                let kind_name = cur.ident()?;
                let kind: GateKind = kind_name.parse().map_err(|_| {
                    cur.pos = kind_col;
                    cur.err(format!("unsupported gate kind {kind_name:?}"))
                })?;
                cur.expect('(')?;
                let mut fanin = Vec::new();
                if cur.peek() != Some(')') {
                    loop {
                        fanin.push(cur.ident()?);
                        if cur.peek() == Some(',') {
                            cur.expect(',')?;
                        } else {
                            break;
                        }
                    }
                }
                cur.expect(')')?;
                gates.push(Gate {
                    output: head,
                    kind,
                    fanin,
                });
            }
            Some(c) => return Err(cur.err(format!("expected '(' or '=', found {c:?}"))),
            None => return Err(cur.err("unexpected end of line")),
        }
        if !cur.at_end() {
            let c = cur.chars[cur.pos];
            return Err(cur.err(format!("trailing input {c:?}")));
        }
    }

    Netlist::new(name, inputs, outputs, gates)
}

/// Renders a netlist as `.bench` text with LF line endings.
pub fn serialize_bench(n: &Netlist) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}", n.name());
    let _ = writeln!(
        out,
        "# {} inputs, {} outputs, {} gates",
        n.input_count(),
        n.output_count(),
        n.gate_count()
    );
    for i in n.inputs() {
        let _ = writeln!(out, "INPUT({i})");
    }
    for o in n.outputs() {
        let _ = writeln!(out, "OUTPUT({o})");
    }
    for g in n.gates() {
        let _ = writeln!(out, "{} = {}({})", g.output, g.kind, g.fanin.join(", "));
    }
    out
}
