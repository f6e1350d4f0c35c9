//! DIMACS weighted CNF (`p wcnf nvars nclauses top`) export and import.
//!
//! The affine offset and scale travel as `c offset <num>` / `c scale <den>`
//! comment lines so a round trip keeps the map back to Ising energies.
//! External solvers ignore comments. Hard clauses are not produced and are
//! rejected on import.

use std::io::{BufRead, Write};

use super::maxsat::{Clause, Lit, MaxSatInstance};
use crate::error::{Error, Result};

pub fn write_wcnf<W: Write>(inst: &MaxSatInstance, mut out: W) -> std::io::Result<()> {
    let top = inst.total_weight() + 1;
    writeln!(out, "c weighted MAX-2-SAT reduction of an Ising model")?;
    writeln!(out, "c offset {}", inst.offset_num)?;
    writeln!(out, "c scale {}", inst.scale)?;
    writeln!(out, "p wcnf {} {} {}", inst.var_count, inst.clauses.len(), top)?;
    for c in &inst.clauses {
        write!(out, "{}", c.weight)?;
        for l in &c.lits {
            write!(out, " {}", l.to_dimacs())?;
        }
        writeln!(out, " 0")?;
    }
    Ok(())
}

pub fn to_wcnf_string(inst: &MaxSatInstance) -> String {
    let mut buf = Vec::new();
    write_wcnf(inst, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Wcnf { line, msg: msg.into() }
}

pub fn read_wcnf<R: BufRead>(input: R) -> Result<MaxSatInstance> {
    let mut header: Option<(usize, usize, u64)> = None;
    let mut offset_num: i128 = 0;
    let mut scale: u64 = 1;
    let mut clauses = Vec::new();
    let mut pending: Vec<i64> = Vec::new();
    let mut last_line = 0;

    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('c') {
            let mut words = comment.split_whitespace();
            match (words.next(), words.next()) {
                (Some("offset"), Some(v)) => {
                    offset_num = v.parse().map_err(|_| err(lineno, format!("bad offset '{v}'")))?;
                }
                (Some("scale"), Some(v)) => {
                    scale = v.parse().map_err(|_| err(lineno, format!("bad scale '{v}'")))?;
                }
                _ => {}
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('p') {
            if header.is_some() {
                return Err(err(lineno, "duplicate header"));
            }
            let words: Vec<&str> = rest.split_whitespace().collect();
            if words.len() != 4 || words[0] != "wcnf" {
                return Err(err(lineno, "expected 'p wcnf <vars> <clauses> <top>'"));
            }
            let parse = |w: &str| w.parse::<u64>().map_err(|_| err(lineno, format!("bad header value '{w}'")));
            header = Some((parse(words[1])? as usize, parse(words[2])? as usize, parse(words[3])?));
            continue;
        }
        let Some((vars, _, top)) = header else {
            return Err(err(lineno, "clause before header"));
        };
        for word in trimmed.split_whitespace() {
            let x: i64 = word.parse().map_err(|_| err(lineno, format!("bad token '{word}'")))?;
            if x != 0 {
                pending.push(x);
                continue;
            }
            let Some((&w, lits)) = pending.split_first() else {
                return Err(err(lineno, "empty clause"));
            };
            if w <= 0 {
                return Err(err(lineno, format!("weight {w} is not positive")));
            }
            if w as u64 >= top {
                return Err(err(lineno, "hard clauses are not supported"));
            }
            let lits: Vec<Lit> = lits.iter().map(|&l| Lit::from_dimacs(l).expect("nonzero")).collect();
            if lits.iter().any(|l| l.var >= vars) {
                return Err(err(lineno, format!("literal beyond declared {vars} variables")));
            }
            clauses.push(Clause { weight: w as u64, lits });
            pending.clear();
        }
    }
    let Some((vars, count, _)) = header else {
        return Err(err(last_line, "missing 'p wcnf' header"));
    };
    if !pending.is_empty() {
        return Err(err(last_line, "last clause is not terminated by 0"));
    }
    if clauses.len() != count {
        return Err(err(last_line, format!("header declares {count} clauses, found {}", clauses.len())));
    }
    MaxSatInstance::new(vars, clauses, offset_num, scale).map_err(|m| err(last_line, m))
}
