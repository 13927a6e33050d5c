//! LP-file writer and reader, plus the solution-file format exchanged with
//! external solvers.
//!
//! Numbers are written as C's `%.17g` would write them, so a write/read
//! cycle is bit-exact. Variables are named `v<index>`, rows `r<index>`.
//! Perspective terms cannot be expressed in the LP format and go to a JSON
//! sidecar next to the LP file.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::lp::{LinearProgram, LpRow};
use crate::formulation::{Model, PerspectiveTerm, RowSense, VarKind};

#[derive(Debug, Error)]
pub enum LpFileError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
}

/// `%.17g`.
pub fn fmt_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let strip = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", strip(mant), sign, exp.abs())
    } else {
        strip(&format!("{:.*}", (16 - exp) as usize, v))
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64, LpFileError> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        t => t.parse().map_err(|_| LpFileError::Parse {
            line,
            msg: format!("bad number '{tok}'"),
        }),
    }
}

/// Parsed LP file.
#[derive(Debug, Clone, Default)]
pub struct LpFile {
    pub lp: LinearProgram,
    pub integer: Vec<bool>,
    pub maximize: bool,
}

fn write_expr(out: &mut String, coeffs: &[(usize, f64)]) {
    if coeffs.is_empty() {
        out.push_str(" 0 v0");
    }
    for &(j, a) in coeffs {
        if a < 0.0 || (a == 0.0 && a.is_sign_negative()) {
            let _ = write!(out, " - {} v{}", fmt_g17(-a), j);
        } else {
            let _ = write!(out, " + {} v{}", fmt_g17(a), j);
        }
    }
}

fn sense_str(s: RowSense) -> &'static str {
    match s {
        RowSense::Le => "<=",
        RowSense::Ge => ">=",
        RowSense::Eq => "=",
    }
}

/// Writes `lp` (rows as stored, no rescaling) with the given integrality.
pub fn write_lp(lp: &LinearProgram, integer: &[bool], relax_integers: bool) -> String {
    let mut out = String::new();
    out.push_str("\\ pwconvex\nMinimize\n obj:");
    let obj: Vec<(usize, f64)> = lp
        .cost
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(j, &c)| (j, c))
        .collect();
    write_expr(&mut out, &obj);
    out.push_str("\nSubject To\n");
    for (i, r) in lp.rows.iter().enumerate() {
        let _ = write!(out, " r{i}:");
        write_expr(&mut out, &r.coeffs);
        let _ = writeln!(out, " {} {}", sense_str(r.sense), fmt_g17(r.rhs));
    }
    out.push_str("Bounds\n");
    for j in 0..lp.n_vars() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " v{j} free");
        } else {
            let _ = writeln!(out, " {} <= v{j} <= {}", fmt_g17(lo), fmt_g17(hi));
        }
    }
    if !relax_integers && integer.iter().any(|&b| b) {
        out.push_str("Generals\n");
        for (j, _) in integer.iter().enumerate().filter(|(_, &b)| b) {
            let _ = writeln!(out, " v{j}");
        }
    }
    out.push_str("End\n");
    out
}

/// LP of a model's linear part plus the given cut rows, in minimization form.
pub fn model_lp(m: &Model, extra_rows: &[LpRow]) -> (LinearProgram, Vec<bool>) {
    let sign = match m.sense {
        crate::formulation::ObjectiveSense::Minimize => 1.0,
        crate::formulation::ObjectiveSense::Maximize => -1.0,
    };
    let mut lp = LinearProgram::new();
    for v in &m.variables {
        lp.add_var(0.0, v.lower, v.upper);
    }
    for &(j, c) in &m.objective {
        lp.cost[j] += sign * c;
    }
    for r in &m.rows {
        lp.add_row(&r.coeffs, r.sense, r.rhs);
    }
    lp.rows.extend_from_slice(extra_rows);
    let integer = m.variables.iter().map(|v| v.kind != VarKind::Continuous).collect();
    (lp, integer)
}

/// Writes the LP file and its `.terms.json` sidecar.
pub fn write_model(m: &Model, extra_rows: &[LpRow], path: &Path, relax_integers: bool) -> Result<(), LpFileError> {
    let (lp, integer) = model_lp(m, extra_rows);
    std::fs::write(path, write_lp(&lp, &integer, relax_integers))?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&m.terms)?)?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".terms.json");
    s.into()
}

pub fn read_sidecar(path: &Path) -> Result<Vec<PerspectiveTerm>, LpFileError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?)
}

fn var_index(tok: &str, line: usize) -> Result<usize, LpFileError> {
    tok.strip_prefix('v')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| LpFileError::Parse {
            line,
            msg: format!("unknown variable '{tok}'"),
        })
}

/// Parses `[+|-] coef var ...` tokens.
fn parse_expr(tokens: &[&str], line: usize) -> Result<Vec<(usize, f64)>, LpFileError> {
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &t in tokens {
        match t {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ if t.starts_with('v') && t[1..].chars().all(|c| c.is_ascii_digit()) && t.len() > 1 => {
                out.push((var_index(t, line)?, sign * coef.unwrap_or(1.0)));
                sign = 1.0;
                coef = None;
            }
            _ => coef = Some(parse_num(t, line)?),
        }
    }
    Ok(out)
}

#[derive(PartialEq)]
enum Section {
    None,
    Objective,
    Rows,
    Bounds,
    Integers,
}

/// Parses the subset of the LP format produced by [`write_lp`].
pub fn read_lp(text: &str) -> Result<LpFile, LpFileError> {
    let mut f = LpFile::default();
    let mut section = Section::None;
    let mut obj = Vec::new();
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut ints = Vec::new();
    let mut n = 0usize;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('\\') {
            continue;
        }
        match s.to_ascii_lowercase().as_str() {
            "minimize" | "minimum" | "min" => {
                section = Section::Objective;
                continue;
            }
            "maximize" | "maximum" | "max" => {
                f.maximize = true;
                section = Section::Objective;
                continue;
            }
            "subject to" | "st" | "s.t." => {
                section = Section::Rows;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "generals" | "general" | "binaries" | "binary" | "integers" => {
                section = Section::Integers;
                continue;
            }
            "end" => break,
            _ => {}
        }
        let body = match s.split_once(':') {
            Some((_, b)) if section != Section::Bounds => b,
            _ => s,
        };
        let tokens: Vec<&str> = body.split_whitespace().collect();
        match section {
            Section::Objective => {
                let e = parse_expr(&tokens, line)?;
                n = n.max(e.iter().map(|&(j, _)| j + 1).max().unwrap_or(0));
                obj.extend(e);
            }
            Section::Rows => {
                let k = tokens
                    .iter()
                    .position(|t| matches!(*t, "<=" | ">=" | "=" | "<" | ">" | "=<" | "=>"))
                    .ok_or(LpFileError::Parse {
                        line,
                        msg: "row without sense".into(),
                    })?;
                let sense = match tokens[k] {
                    "<=" | "<" | "=<" => RowSense::Le,
                    ">=" | ">" | "=>" => RowSense::Ge,
                    _ => RowSense::Eq,
                };
                let rhs = parse_num(tokens.get(k + 1).ok_or(LpFileError::Parse {
                    line,
                    msg: "row without rhs".into(),
                })?, line)?;
                let e = parse_expr(&tokens[..k], line)?;
                n = n.max(e.iter().map(|&(j, _)| j + 1).max().unwrap_or(0));
                rows.push(LpRow { coeffs: e, sense, rhs });
            }
            Section::Bounds => {
                let b = match tokens.as_slice() {
                    [v, free] if free.eq_ignore_ascii_case("free") => {
                        (var_index(v, line)?, f64::NEG_INFINITY, f64::INFINITY)
                    }
                    [lo, "<=", v, "<=", hi] => (var_index(v, line)?, parse_num(lo, line)?, parse_num(hi, line)?),
                    [v, "=", x] => {
                        let x = parse_num(x, line)?;
                        (var_index(v, line)?, x, x)
                    }
                    [v, "<=", hi] => (var_index(v, line)?, 0.0, parse_num(hi, line)?),
                    [v, ">=", lo] => (var_index(v, line)?, parse_num(lo, line)?, f64::INFINITY),
                    _ => {
                        return Err(LpFileError::Parse {
                            line,
                            msg: format!("bad bound '{s}'"),
                        })
                    }
                };
                n = n.max(b.0 + 1);
                bounds.push(b);
            }
            Section::Integers => {
                for t in tokens {
                    let j = var_index(t, line)?;
                    n = n.max(j + 1);
                    ints.push(j);
                }
            }
            Section::None => {
                return Err(LpFileError::Parse {
                    line,
                    msg: "content before objective".into(),
                })
            }
        }
    }
    for _ in 0..n {
        f.lp.add_var(0.0, 0.0, f64::INFINITY);
    }
    f.integer = vec![false; n];
    for (j, c) in obj {
        f.lp.cost[j] += c;
    }
    if f.maximize {
        f.lp.cost.iter_mut().for_each(|c| *c = -*c);
    }
    f.lp.rows = rows;
    for (j, lo, hi) in bounds {
        f.lp.lower[j] = lo;
        f.lp.upper[j] = hi;
    }
    for j in ints {
        f.integer[j] = true;
    }
    Ok(f)
}

/// Solution file: `status <word>`, `objective <value>`, then `v<j> <value>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub status: String,
    pub objective: f64,
    pub values: Vec<f64>,
}

pub fn write_solution(s: &SolutionFile) -> String {
    let mut out = format!("status {}\nobjective {}\n", s.status, fmt_g17(s.objective));
    for (j, v) in s.values.iter().enumerate() {
        let _ = writeln!(out, "v{j} {}", fmt_g17(*v));
    }
    out
}

pub fn read_solution(text: &str, n: usize) -> Result<SolutionFile, LpFileError> {
    let mut s = SolutionFile {
        status: String::new(),
        objective: f64::NAN,
        values: vec![0.0; n],
    };
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let t: Vec<&str> = raw.split_whitespace().collect();
        match t.as_slice() {
            [] => {}
            ["status", w] => s.status = w.to_string(),
            ["objective", v] => s.objective = parse_num(v, line)?,
            [v, x] => {
                let j = var_index(v, line)?;
                if j >= n {
                    return Err(LpFileError::Parse {
                        line,
                        msg: format!("variable {v} out of range"),
                    });
                }
                s.values[j] = parse_num(x, line)?;
            }
            _ => {
                return Err(LpFileError::Parse {
                    line,
                    msg: format!("bad solution line '{raw}'"),
                })
            }
        }
    }
    if s.status.is_empty() {
        return Err(LpFileError::Parse {
            line: 0,
            msg: "missing status".into(),
        });
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(1e20), "1e+20");
        assert_eq!(fmt_g17(1.5e-7), "1.4999999999999999e-07");
        assert_eq!(fmt_g17(123456.0), "123456");
        assert_eq!(fmt_g17(0.0001), "0.0001");
        assert_eq!(fmt_g17(f64::INFINITY), "inf");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut lp = LinearProgram::new();
        lp.add_var(std::f64::consts::PI, -1.0 / 3.0, 2.0f64.sqrt());
        lp.add_var(-1e-300, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_var(0.0, 0.0, 1.0);
        lp.add_row(&[(0, 0.7), (1, -3.0)], RowSense::Ge, 1.0 / 7.0);
        lp.add_row(&[(2, 1.0)], RowSense::Eq, 0.0);
        let text = write_lp(&lp, &[false, false, true], false);
        let back = read_lp(&text).unwrap();
        assert_eq!(back.lp.cost, lp.cost);
        assert_eq!(back.lp.lower, lp.lower);
        assert_eq!(back.lp.upper, lp.upper);
        assert_eq!(back.lp.rows, lp.rows);
        assert_eq!(back.integer, vec![false, false, true]);
        assert_eq!(write_lp(&back.lp, &back.integer, false), text);
    }

    #[test]
    fn solution_round_trip() {
        let s = SolutionFile {
            status: "optimal".into(),
            objective: -1.25,
            values: vec![0.1, 2.0],
        };
        assert_eq!(read_solution(&write_solution(&s), 2).unwrap(), s);
        assert!(read_solution("objective 1\n", 1).is_err());
    }
}
