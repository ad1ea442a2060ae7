//! The line-oriented lineage file format.
//!
//! ```text
//! # comment
//! var r1 0.5
//! var s1 0.3
//! formula (or (and r1 s1) ...)
//! ```
//!
//! Declarations come first, one per line. The expression after `formula`
//! may span several lines.

use std::collections::BTreeSet;
use std::fmt::{Display, Write as _};

use crate::error::{Error, Result};
use crate::formula::{Formula, VarId};
use crate::num::Scalar;
use crate::table::ProbTable;

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Word(&'a str),
}

struct Token<'a> {
    tok: Tok<'a>,
    line: usize,
    column: usize,
}

fn tokenize<'a>(pieces: &[(usize, usize, &'a str)]) -> Vec<Token<'a>> {
    let mut out = Vec::new();
    for &(line, col0, text) in pieces {
        let mut chars = text.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            let column = col0 + text[..i].chars().count();
            match c {
                '(' => out.push(Token { tok: Tok::Open, line, column }),
                ')' => out.push(Token { tok: Tok::Close, line, column }),
                c if c.is_whitespace() => {}
                _ => {
                    let mut end = text.len();
                    while let Some(&(j, d)) = chars.peek() {
                        if d.is_whitespace() || d == '(' || d == ')' {
                            end = j;
                            break;
                        }
                        chars.next();
                    }
                    out.push(Token {
                        tok: Tok::Word(&text[i..end]),
                        line,
                        column,
                    });
                }
            }
        }
    }
    out
}

struct ExprParser<'a, 'b> {
    tokens: &'b [Token<'a>],
    pos: usize,
    declared: &'b BTreeSet<VarId>,
    end: (usize, usize),
}

impl ExprParser<'_, '_> {
    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .map(|t| (t.line, t.column))
            .unwrap_or(self.end)
    }

    fn expr(&mut self) -> Result<Formula> {
        let (line, column) = self.here();
        let Some(t) = self.tokens.get(self.pos) else {
            return Err(syntax(line, column, "unexpected end of input"));
        };
        self.pos += 1;
        match &t.tok {
            Tok::Word("true") => Ok(Formula::True),
            Tok::Word("false") => Ok(Formula::False),
            Tok::Word(w) => {
                let v = VarId::new(w)
                    .map_err(|_| syntax(line, column, format!("invalid identifier `{w}`")))?;
                if !self.declared.contains(&v) {
                    return Err(Error::UndeclaredVariable(v));
                }
                Ok(Formula::Var(v))
            }
            Tok::Close => Err(syntax(line, column, "unexpected `)`")),
            Tok::Open => {
                let (line, column) = self.here();
                let is_and = match self.tokens.get(self.pos).map(|t| &t.tok) {
                    Some(Tok::Word("and")) => true,
                    Some(Tok::Word("or")) => false,
                    _ => return Err(syntax(line, column, "expected `and` or `or`")),
                };
                self.pos += 1;
                let mut children = Vec::new();
                loop {
                    match self.tokens.get(self.pos).map(|t| &t.tok) {
                        Some(Tok::Close) => {
                            self.pos += 1;
                            break;
                        }
                        None => {
                            let (l, c) = self.end;
                            return Err(syntax(l, c, "missing `)`"));
                        }
                        _ => children.push(self.expr()?),
                    }
                }
                if children.is_empty() {
                    return Err(syntax(line, column, "connective needs at least one operand"));
                }
                Ok(if is_and {
                    Formula::and(children)
                } else {
                    Formula::or(children)
                })
            }
        }
    }
}

/// Parses a lineage file into its variable table and (unsimplified)
/// formula.
pub fn parse_lineage(text: &str) -> Result<(ProbTable<f64>, Formula)> {
    let mut table = ProbTable::new();
    let mut declared = BTreeSet::new();
    let mut expr_pieces: Vec<(usize, usize, &str)> = Vec::new();
    let mut in_formula = false;
    let mut last = (1, 1);

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_start();
        let indent = raw.chars().count() - trimmed.chars().count();
        last = (line, raw.chars().count() + 1);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if in_formula {
            expr_pieces.push((line, indent + 1, trimmed));
            continue;
        }
        let mut words = trimmed.split_whitespace();
        match words.next() {
            Some("var") => {
                let (Some(name), Some(prob)) = (words.next(), words.next()) else {
                    return Err(syntax(line, indent + 1, "expected `var NAME PROBABILITY`"));
                };
                if let Some(extra) = words.next() {
                    let column = raw.find(extra).unwrap_or(0) + 1;
                    return Err(syntax(line, column, format!("unexpected `{extra}`")));
                }
                let column = raw.find(name).unwrap_or(0) + 1;
                let v = VarId::new(name)
                    .map_err(|_| syntax(line, column, format!("invalid identifier `{name}`")))?;
                let p: f64 = prob.parse().map_err(|_| {
                    let column = raw.rfind(prob).unwrap_or(0) + 1;
                    syntax(line, column, format!("invalid probability `{prob}`"))
                })?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ProbabilityOutOfRange {
                        name: name.to_string(),
                        value: prob.to_string(),
                    });
                }
                table.insert(v.clone(), p)?;
                declared.insert(v);
            }
            Some(w) if w == "formula" || w.starts_with("formula(") => {
                in_formula = true;
                let rest = &trimmed["formula".len()..];
                expr_pieces.push((line, indent + 1 + "formula".len(), rest));
            }
            Some(other) => {
                return Err(syntax(
                    line,
                    indent + 1,
                    format!("expected `var` or `formula`, found `{other}`"),
                ))
            }
            None => unreachable!("blank lines are skipped"),
        }
    }

    if !in_formula {
        return Err(syntax(last.0, last.1, "missing `formula` line"));
    }
    let tokens = tokenize(&expr_pieces);
    let mut parser = ExprParser {
        tokens: &tokens,
        pos: 0,
        declared: &declared,
        end: last,
    };
    let formula = parser.expr()?;
    if let Some(t) = tokens.get(parser.pos) {
        return Err(syntax(t.line, t.column, "trailing input after formula"));
    }
    Ok((table, formula))
}

/// Renders a table and formula in the lineage file format. Only variables
/// occurring in `f` are written.
pub fn write_lineage<T: Scalar + Display>(table: &ProbTable<T>, f: &Formula) -> String {
    let vars = f.vars();
    let mut out = String::new();
    for (v, p) in table.iter().filter(|(v, _)| vars.contains(*v)) {
        if let Some(prov) = table.provenance(v) {
            let _ = writeln!(out, "# {v}: {}({})", prov.table, prov.key);
        }
        let _ = writeln!(out, "var {v} {p}");
    }
    let _ = writeln!(out, "formula {f}");
    out
}
