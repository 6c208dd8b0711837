//! Text export and import in a CPLEX-style LP subset.
//!
//! Sections: `Maximize`, `Subject To`, `Bounds`, `Binaries`, `End`. Every
//! column gets an explicit bound line so a parse reproduces the model exactly.
//! Numbers use the shortest representation that round-trips.

use std::fmt::Write as _;

use super::model::LpModel;
use super::simplex::Sense;
use crate::error::{Result, StowError};

const TERMS_PER_LINE: usize = 8;

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], model: &LpModel) {
    for (i, &(j, a)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", num(a.abs()), model.vars[j].name);
    }
}

pub fn export_lp(model: &LpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ stowage plan model\nMaximize\n obj:");
    let obj: Vec<(usize, f64)> = (0..model.n_vars()).filter(|&j| model.obj[j] != 0.0).map(|j| (j, model.obj[j])).collect();
    if obj.is_empty() && model.n_vars() > 0 {
        let _ = write!(out, " + 0.0 {}", model.vars[0].name);
    }
    write_terms(&mut out, &obj, model);
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let _ = write!(out, " {}:", row.name);
        if row.coefs.is_empty() {
            let _ = write!(out, " + 0.0 {}", model.vars[0].name);
        }
        write_terms(&mut out, &row.coefs, model);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", num(row.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.vars {
        if v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lb), v.name, num(v.ub));
        }
    }
    let bins = model.binaries();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for j in bins {
            let _ = writeln!(out, " {}", model.vars[j].name);
        }
    }
    out.push_str("End\n");
    out
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    Head,
    Objective,
    Rows,
    Bounds,
    Binaries,
    End,
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "+inf" | "inf" | "+infinity" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().map_err(|_| StowError::Parse {
            line,
            detail: format!("expected a number, found '{tok}'"),
        }),
    }
}

struct Pending {
    name: String,
    tokens: Vec<String>,
    line: usize,
}

/// Terms `[+|-] coef name ...` followed by an optional `op rhs`.
fn parse_expr(
    tokens: &[String],
    line: usize,
    lookup: &mut dyn FnMut(&str) -> usize,
) -> Result<(Vec<(usize, f64)>, Option<(Sense, f64)>)> {
    let mut terms = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = tokens[i].as_str();
        if matches!(t, "<=" | ">=" | "=" | "=<" | "=>") {
            let sense = match t {
                "<=" | "=<" => Sense::Le,
                ">=" | "=>" => Sense::Ge,
                _ => Sense::Eq,
            };
            let rhs_tok = tokens.get(i + 1).ok_or_else(|| StowError::Parse {
                line,
                detail: "missing right-hand side".into(),
            })?;
            let rhs = match rhs_tok.as_str() {
                "-" | "+" => {
                    let v = parse_num(tokens.get(i + 2).map(String::as_str).unwrap_or(""), line)?;
                    if rhs_tok == "-" { -v } else { v }
                }
                t => parse_num(t, line)?,
            };
            return Ok((terms, Some((sense, rhs))));
        }
        let mut sign = 1.0;
        if t == "+" || t == "-" {
            if t == "-" {
                sign = -1.0;
            }
            i += 1;
        }
        let tok = tokens.get(i).ok_or_else(|| StowError::Parse {
            line,
            detail: "dangling sign".into(),
        })?;
        let (coef, name) = match parse_num(tok, line) {
            Ok(c) => {
                i += 1;
                let name = tokens.get(i).ok_or_else(|| StowError::Parse {
                    line,
                    detail: "coefficient without a variable".into(),
                })?;
                (c, name.as_str())
            }
            Err(_) => (1.0, tok.as_str()),
        };
        terms.push((lookup(name), sign * coef));
        i += 1;
    }
    Ok((terms, None))
}

fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let spaced = s.replace("<=", " <= ").replace(">=", " >= ");
    for raw in spaced.split_whitespace() {
        // "+3" and "-x" style glued signs
        if raw.len() > 1 && (raw.starts_with('+') || raw.starts_with('-')) && !raw[1..].starts_with(|c: char| c.is_ascii_digit() || c == '.' || c == 'i') {
            out.push(raw[..1].to_string());
            out.push(raw[1..].to_string());
        } else if raw == "=" || raw == "<=" || raw == ">=" {
            out.push(raw.to_string());
        } else if let Some(rest) = raw.strip_prefix('=') {
            out.push("=".into());
            out.push(rest.to_string());
        } else {
            out.push(raw.to_string());
        }
    }
    out
}

/// Parses text written by [`export_lp`] (and simple hand-written files in the
/// same subset). Columns follow the bounds section, then first appearance.
pub fn parse_lp(text: &str) -> Result<LpModel> {
    let mut model = LpModel::default();
    let mut index: std::collections::HashMap<String, usize> = Default::default();
    let mut section = Section::Head;
    let mut pending: Option<Pending> = None;
    let mut obj_terms: Vec<(usize, f64)> = Vec::new();
    let mut bounds_seen = Vec::new();
    let mut binaries = Vec::new();

    let mut lookup = |name: &str, model: &mut LpModel| -> usize {
        if let Some(&j) = index.get(name) {
            return j;
        }
        let j = model.add_var(name.to_string(), 0.0, f64::INFINITY, false, 0.0);
        index.insert(name.to_string(), j);
        j
    };

    let flush = |p: Option<Pending>, section: Section, model: &mut LpModel, obj: &mut Vec<(usize, f64)>,
                     lookup: &mut dyn FnMut(&str, &mut LpModel) -> usize|
     -> Result<()> {
        let Some(p) = p else { return Ok(()) };
        let mut cols = Vec::new();
        let (terms, rel) = {
            let mut f = |n: &str| {
                cols.push(n.to_string());
                cols.len() - 1
            };
            parse_expr(&p.tokens, p.line, &mut f)?
        };
        let terms: Vec<(usize, f64)> = terms.into_iter().map(|(c, a)| (lookup(&cols[c], model), a)).collect();
        match section {
            Section::Objective => {
                if rel.is_some() {
                    return Err(StowError::Parse { line: p.line, detail: "relation in objective".into() });
                }
                obj.extend(terms);
            }
            Section::Rows => {
                let (sense, rhs) = rel.ok_or_else(|| StowError::Parse {
                    line: p.line,
                    detail: format!("row '{}' has no relation", p.name),
                })?;
                model.add_row(p.name, terms, sense, rhs);
            }
            _ => unreachable!(),
        }
        Ok(())
    };

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        let new_section = match lower.as_str() {
            "maximize" | "maximise" | "max" => Some(Section::Objective),
            "minimize" | "minimise" | "min" => {
                return Err(StowError::Parse { line: line_no, detail: "only maximization models are supported".into() })
            }
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Rows),
            "bounds" => Some(Section::Bounds),
            "binaries" | "binary" | "bin" => Some(Section::Binaries),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(ns) = new_section {
            flush(pending.take(), section, &mut model, &mut obj_terms, &mut lookup)?;
            section = ns;
            continue;
        }
        match section {
            Section::Head | Section::End => {
                return Err(StowError::Parse { line: line_no, detail: format!("unexpected text '{line}'") })
            }
            Section::Objective | Section::Rows => {
                let starts_new = line.split_whitespace().next().is_some_and(|t| t.ends_with(':'))
                    || (line.contains(':') && !line.starts_with(['+', '-']));
                if starts_new {
                    flush(pending.take(), section, &mut model, &mut obj_terms, &mut lookup)?;
                    let (name, rest) = line.split_once(':').unwrap();
                    pending = Some(Pending { name: name.trim().to_string(), tokens: tokenize(rest), line: line_no });
                } else if let Some(p) = pending.as_mut() {
                    p.tokens.extend(tokenize(line));
                } else {
                    let name = if section == Section::Rows { format!("r{}", model.rows.len() + 1) } else { "obj".into() };
                    pending = Some(Pending { name, tokens: tokenize(line), line: line_no });
                }
            }
            Section::Bounds => {
                let toks = tokenize(line);
                let parse_err = || StowError::Parse { line: line_no, detail: format!("bad bound '{line}'") };
                match toks.as_slice() {
                    [name, free] if free.eq_ignore_ascii_case("free") => {
                        let j = lookup(name, &mut model);
                        model.vars[j].lb = f64::NEG_INFINITY;
                        model.vars[j].ub = f64::INFINITY;
                        bounds_seen.push(j);
                    }
                    [lo, op1, name, op2, hi] if op1 == "<=" && op2 == "<=" => {
                        let j = lookup(name, &mut model);
                        model.vars[j].lb = parse_num(lo, line_no)?;
                        model.vars[j].ub = parse_num(hi, line_no)?;
                        bounds_seen.push(j);
                    }
                    [name, op, v] => {
                        let j = lookup(name, &mut model);
                        let v = parse_num(v, line_no)?;
                        match op.as_str() {
                            "<=" => model.vars[j].ub = v,
                            ">=" => model.vars[j].lb = v,
                            "=" => {
                                model.vars[j].lb = v;
                                model.vars[j].ub = v;
                            }
                            _ => return Err(parse_err()),
                        }
                        bounds_seen.push(j);
                    }
                    _ => return Err(parse_err()),
                }
            }
            Section::Binaries => {
                for name in line.split_whitespace() {
                    binaries.push(lookup(name, &mut model));
                }
            }
        }
    }
    flush(pending.take(), section, &mut model, &mut obj_terms, &mut lookup)?;
    if section != Section::End {
        return Err(StowError::Parse { line: text.lines().count(), detail: "missing End".into() });
    }
    for (j, a) in obj_terms {
        model.obj[j] += a;
    }
    for j in binaries {
        let v = &mut model.vars[j];
        v.binary = true;
        if !bounds_seen.contains(&j) {
            v.lb = 0.0;
            v.ub = 1.0;
        }
    }
    // placeholder zero terms written for empty rows
    for row in &mut model.rows {
        if row.coefs.len() == 1 && row.coefs[0].1 == 0.0 {
            row.coefs.clear();
        }
    }
    Ok(reorder(model, &bounds_seen))
}

/// Puts columns in bounds-section order, then any column without a bound line.
fn reorder(model: LpModel, bounds_order: &[usize]) -> LpModel {
    let n = model.n_vars();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for &j in bounds_order.iter().chain(&(0..n).collect::<Vec<_>>()) {
        if !seen[j] {
            seen[j] = true;
            order.push(j);
        }
    }
    let mut new_of = vec![0; n];
    for (pos, &j) in order.iter().enumerate() {
        new_of[j] = pos;
    }
    let LpModel { vars, obj, mut rows } = model;
    for row in &mut rows {
        for t in &mut row.coefs {
            t.0 = new_of[t.0];
        }
    }
    LpModel {
        vars: order.iter().map(|&j| vars[j].clone()).collect(),
        obj: order.iter().map(|&j| obj[j]).collect(),
        rows,
    }
}
