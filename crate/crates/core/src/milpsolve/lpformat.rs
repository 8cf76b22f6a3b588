//! Plain-text LP format, a subset of the CPLEX dialect:
//!
//! ```text
//! \ comment
//! Minimize
//!  obj: 3 x + 0 y - 2 z + 17.5
//! Subject To
//!  c1: x + y >= 2
//!  c2: -1 <= x - z <= 4
//!  c3: y + z = 1
//! Bounds
//!  0 <= x <= 1
//!  y free
//!  -inf <= z <= 5
//! Binaries
//!  x
//! End
//! ```
//!
//! Every constraint sits on one line; the objective may wrap. A trailing
//! number in the objective is the constant offset. Variables take their
//! order of first appearance, and the writer lists every variable in the
//! objective (with a zero coefficient if need be) so the order survives a
//! round trip. Variables without a bounds line default to `[0, +inf)`, or
//! `[0, 1]` when declared binary. Numbers are written in shortest
//! round-trip form, so export followed by import is lossless.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{MilpInstance, Row};
use crate::error::{Error, Result};

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    for (k, (c, name)) in terms.enumerate() {
        if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
            let _ = write!(out, " - {} {}", num(-c), name);
        } else if k == 0 {
            let _ = write!(out, " {} {}", num(c), name);
        } else {
            let _ = write!(out, " + {} {}", num(c), name);
        }
    }
}

pub fn write_lp(inst: &MilpInstance) -> String {
    let mut out = String::from("Minimize\n obj:");
    write_terms(
        &mut out,
        inst.objective
            .iter()
            .zip(&inst.names)
            .map(|(c, n)| (*c, n.clone())),
    );
    let off = inst.objective_offset;
    if off < 0.0 {
        let _ = write!(out, " - {}", num(-off));
    } else {
        let _ = write!(out, " + {}", num(off));
    }
    out.push_str("\nSubject To\n");
    for row in &inst.rows {
        let _ = write!(out, " {}:", row.name);
        if row.lower.is_finite() && row.upper.is_finite() && row.lower != row.upper {
            let _ = write!(out, " {} <=", num(row.lower));
        }
        let terms = row.coefs.iter().map(|&(j, a)| (a, inst.names[j].clone()));
        write_terms(&mut out, terms);
        if row.lower == row.upper {
            let _ = write!(out, " = {}", num(row.lower));
        } else if row.upper.is_finite() {
            let _ = write!(out, " <= {}", num(row.upper));
        } else {
            let _ = write!(out, " >= {}", num(row.lower));
        }
        out.push('\n');
    }
    out.push_str("Bounds\n");
    for (j, name) in inst.names.iter().enumerate() {
        let (l, u) = (inst.lower[j], inst.upper[j]);
        if l == u {
            let _ = writeln!(out, " {name} = {}", num(l));
        } else if l == f64::NEG_INFINITY && u == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", num(l), num(u));
        }
    }
    if !inst.binaries.is_empty() {
        out.push_str("Binaries\n");
        for &j in &inst.binaries {
            let _ = writeln!(out, " {}", inst.names[j]);
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sign(f64),
    Op(Cmp),
    Colon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    Le,
    Ge,
    Eq,
}

fn lex(line: &str, lineno: usize) -> Result<Vec<Tok>> {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    let err = |d: String| Error::Parse {
        line: lineno,
        detail: d,
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let op = match c {
                '<' => Cmp::Le,
                '>' => Cmp::Ge,
                _ => Cmp::Eq,
            };
            i += 1;
            if i < chars.len() && chars[i] == '=' {
                i += 1;
            }
            out.push(Tok::Op(op));
        } else if c == '+' || c == '-' {
            out.push(Tok::Sign(if c == '+' { 1.0 } else { -1.0 }));
            i += 1;
        } else if c == ':' {
            out.push(Tok::Colon);
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() {
                let d = chars[i];
                let exp_ok = (d == 'e' || d == 'E')
                    && chars.get(i + 1).is_some_and(|n| {
                        n.is_ascii_digit()
                            || ((*n == '+' || *n == '-')
                                && chars.get(i + 2).is_some_and(|m| m.is_ascii_digit()))
                    });
                if d.is_ascii_digit() || d == '.' {
                    i += 1;
                } else if exp_ok {
                    i += 2;
                } else {
                    break;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| err(format!("bad number {s:?}")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || "_.[]()#$%&@!?'{}~^".contains(chars[i]))
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => out.push(Tok::Num(f64::INFINITY)),
                _ => out.push(Tok::Ident(s)),
            }
        } else {
            return Err(err(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.split_whitespace().collect::<Vec<_>>().join(" ");
    match l.as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "end" => Some(Section::End),
        _ => None,
    }
}

struct Builder {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), j);
        j
    }
}

/// Parses `[sign] [number] [ident]` terms; returns terms and the constant.
fn parse_expr(
    toks: &[Tok],
    b: &mut Builder,
    line: usize,
) -> Result<(Vec<(usize, f64)>, f64)> {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut constant = 0.0;
    let mut i = 0;
    let err = |d: &str| Error::Parse {
        line,
        detail: d.to_string(),
    };
    while i < toks.len() {
        let mut sign = 1.0;
        let mut saw_sign = false;
        while let Some(Tok::Sign(s)) = toks.get(i) {
            sign *= s;
            saw_sign = true;
            i += 1;
        }
        if i > 0 && !saw_sign && (!terms.is_empty() || constant != 0.0) {
            return Err(err("missing operator between terms"));
        }
        let mut coef = None;
        if let Some(Tok::Num(v)) = toks.get(i) {
            coef = Some(*v);
            i += 1;
        }
        match toks.get(i) {
            Some(Tok::Ident(name)) => {
                let j = b.var(name);
                terms.push((j, sign * coef.unwrap_or(1.0)));
                i += 1;
            }
            _ => match coef {
                Some(v) => constant += sign * v,
                None => return Err(err("expected a term")),
            },
        }
    }
    Ok((terms, constant))
}

fn parse_objective(
    toks: &[Tok],
    b: &mut Builder,
    line: usize,
) -> Result<(Vec<(usize, f64)>, f64)> {
    let (_, rest) = split_name(toks);
    parse_expr(rest, b, line)
}

fn split_name(toks: &[Tok]) -> (Option<String>, &[Tok]) {
    match toks {
        [Tok::Ident(n), Tok::Colon, rest @ ..] => (Some(n.clone()), rest),
        _ => (None, toks),
    }
}

fn signed_number(toks: &[Tok], line: usize) -> Result<f64> {
    let mut sign = 1.0;
    let mut i = 0;
    while let Some(Tok::Sign(s)) = toks.get(i) {
        sign *= s;
        i += 1;
    }
    match (toks.get(i), toks.len() == i + 1) {
        (Some(Tok::Num(v)), true) => Ok(sign * v),
        _ => Err(Error::Parse {
            line,
            detail: "expected a number".into(),
        }),
    }
}

pub fn read_lp(text: &str) -> Result<MilpInstance> {
    let mut b = Builder {
        names: Vec::new(),
        index: HashMap::new(),
    };
    let mut section = Section::None;
    let mut obj_toks: Vec<Tok> = Vec::new();
    let mut obj_line = 0;
    let mut objective: Option<(Vec<(usize, f64)>, f64)> = None;
    let mut rows: Vec<Row> = Vec::new();
    let mut bounds: Vec<(usize, Option<f64>, Option<f64>)> = Vec::new();
    let mut binaries = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_of(line) {
            if section == Section::Objective {
                objective = Some(parse_objective(&obj_toks, &mut b, obj_line)?);
            }
            section = s;
            continue;
        }
        let err = |d: &str| Error::Parse {
            line: lineno,
            detail: d.to_string(),
        };
        let toks = lex(line, lineno)?;
        match section {
            Section::None => return Err(err("content before the objective section")),
            Section::End => return Err(err("content after End")),
            Section::Objective => {
                if obj_toks.is_empty() {
                    obj_line = lineno;
                }
                obj_toks.extend(toks);
            }
            Section::Constraints => {
                let (name, rest) = split_name(&toks);
                let name = name.unwrap_or_else(|| format!("R{}", rows.len()));
                let ops: Vec<usize> = rest
                    .iter()
                    .enumerate()
                    .filter(|t| matches!(t.1, Tok::Op(_)))
                    .map(|t| t.0)
                    .collect();
                let op_at = |i: usize| match rest[i] {
                    Tok::Op(o) => o,
                    _ => unreachable!(),
                };
                let (lower, upper, expr) = match ops.as_slice() {
                    [i] => {
                        let rhs = signed_number(&rest[i + 1..], lineno)?;
                        let expr = &rest[..*i];
                        match op_at(*i) {
                            Cmp::Le => (f64::NEG_INFINITY, rhs, expr),
                            Cmp::Ge => (rhs, f64::INFINITY, expr),
                            Cmp::Eq => (rhs, rhs, expr),
                        }
                    }
                    [i, j] => {
                        if op_at(*i) != Cmp::Le || op_at(*j) != Cmp::Le {
                            return Err(err("ranged rows must read lo <= expr <= hi"));
                        }
                        let lo = signed_number(&rest[..*i], lineno)?;
                        let hi = signed_number(&rest[j + 1..], lineno)?;
                        (lo, hi, &rest[i + 1..*j])
                    }
                    _ => return Err(err("a constraint needs one or two comparison operators")),
                };
                let (coefs, constant) = parse_expr(expr, &mut b, lineno)?;
                if constant != 0.0 {
                    return Err(err("constants are only allowed on the right-hand side"));
                }
                rows.push(Row {
                    name,
                    coefs,
                    lower,
                    upper,
                    lazy_group: None,
                });
            }
            Section::Bounds => {
                let parsed = match toks.as_slice() {
                    [Tok::Ident(n), Tok::Ident(f)] if f.eq_ignore_ascii_case("free") => {
                        Some((n.clone(), Some(f64::NEG_INFINITY), Some(f64::INFINITY)))
                    }
                    _ => None,
                };
                let entry = match parsed {
                    Some(e) => e,
                    None => {
                        let ops: Vec<usize> = toks
                            .iter()
                            .enumerate()
                            .filter(|t| matches!(t.1, Tok::Op(_)))
                            .map(|t| t.0)
                            .collect();
                        let ident = |t: &[Tok]| match t {
                            [Tok::Ident(n)] => Some(n.clone()),
                            _ => None,
                        };
                        match ops.as_slice() {
                            [i, j] => {
                                let name = ident(&toks[i + 1..*j])
                                    .ok_or_else(|| err("expected lo <= name <= hi"))?;
                                let lo = signed_number(&toks[..*i], lineno)?;
                                let hi = signed_number(&toks[j + 1..], lineno)?;
                                (name, Some(lo), Some(hi))
                            }
                            [i] => {
                                let op = match toks[*i] {
                                    Tok::Op(o) => o,
                                    _ => unreachable!(),
                                };
                                if let Some(name) = ident(&toks[..*i]) {
                                    let v = signed_number(&toks[i + 1..], lineno)?;
                                    match op {
                                        Cmp::Le => (name, None, Some(v)),
                                        Cmp::Ge => (name, Some(v), None),
                                        Cmp::Eq => (name, Some(v), Some(v)),
                                    }
                                } else {
                                    let name = ident(&toks[i + 1..])
                                        .ok_or_else(|| err("malformed bound"))?;
                                    let v = signed_number(&toks[..*i], lineno)?;
                                    match op {
                                        Cmp::Le => (name, Some(v), None),
                                        Cmp::Ge => (name, None, Some(v)),
                                        Cmp::Eq => (name, Some(v), Some(v)),
                                    }
                                }
                            }
                            _ => return Err(err("malformed bound")),
                        }
                    }
                };
                let j = b.var(&entry.0);
                bounds.push((j, entry.1, entry.2));
            }
            Section::Binaries => {
                for t in toks {
                    match t {
                        Tok::Ident(n) => binaries.push(b.var(&n)),
                        _ => return Err(err("expected variable names")),
                    }
                }
            }
        }
    }
    if section != Section::End {
        return Err(Error::Parse {
            line: text.lines().count(),
            detail: "missing End".into(),
        });
    }
    let (terms, offset) = objective.ok_or_else(|| Error::Parse {
        line: 1,
        detail: "missing objective section".into(),
    })?;
    let n = b.names.len();
    let mut objective = vec![0.0; n];
    for (j, c) in terms {
        objective[j] += c;
    }
    let mut lower = vec![0.0; n];
    let mut upper = vec![f64::INFINITY; n];
    for &j in &binaries {
        upper[j] = 1.0;
    }
    for (j, lo, hi) in bounds {
        if let Some(v) = lo {
            lower[j] = v;
        }
        if let Some(v) = hi {
            upper[j] = v;
        }
    }
    Ok(MilpInstance {
        names: b.names,
        lower,
        upper,
        objective,
        objective_offset: offset,
        rows,
        binaries,
    })
}
