use std::collections::HashMap;
use std::fmt::Write as _;

use super::mps::check_name;
use super::{LinearModel, Sense, VarKind};
use crate::error::{Error, Result};

const WRAP: usize = 200;

fn push_term(line: &mut String, out: &mut String, coef: f64, name: &str, first: bool) {
    let term = match (first, coef < 0.0) {
        (true, false) => format!("{coef} {name}"),
        (true, true) => format!("- {} {name}", -coef),
        (false, false) => format!(" + {coef} {name}"),
        (false, true) => format!(" - {} {name}", -coef),
    };
    if line.len() + term.len() > WRAP {
        out.push_str(line);
        out.push('\n');
        line.clear();
        line.push_str("  ");
    }
    line.push_str(&term);
}

/// Writes the model in CPLEX LP format.
pub fn export_lp(model: &LinearModel) -> Result<String> {
    for v in &model.variables {
        check_name(&v.name)?;
    }
    for r in &model.rows {
        check_name(&r.name)?;
    }
    let mut s = String::new();
    writeln!(s, "\\ {}", model.name).unwrap();
    s.push_str("Minimize\n");
    let mut line = String::from(" obj: ");
    let mut first = true;
    for (j, &c) in model.objective.iter().enumerate() {
        if c != 0.0 {
            push_term(&mut line, &mut s, c, &model.variables[j].name, first);
            first = false;
        }
    }
    if first {
        line.push_str(&format!("0 {}", model.variables.first().map_or("x", |v| v.name.as_str())));
    }
    s.push_str(&line);
    s.push('\n');

    s.push_str("Subject To\n");
    for row in &model.rows {
        let mut line = format!(" {}: ", row.name);
        let mut first = true;
        for &(j, a) in &row.terms {
            push_term(&mut line, &mut s, a, &model.variables[j].name, first);
            first = false;
        }
        if first {
            line.push_str(&format!("0 {}", model.variables.first().map_or("x", |v| v.name.as_str())));
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        writeln!(s, "{line} {op} {}", row.rhs).unwrap();
    }

    s.push_str("Bounds\n");
    for v in &model.variables {
        if v.kind == VarKind::Continuous {
            match v.upper {
                Some(u) if u.is_finite() => writeln!(s, " 0 <= {} <= {u}", v.name).unwrap(),
                _ => writeln!(s, " {} >= 0", v.name).unwrap(),
            }
        }
    }
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        s.push_str("Binaries\n");
        for chunk in binaries.chunks(8) {
            writeln!(s, " {}", chunk.join(" ")).unwrap();
        }
    }
    s.push_str("End\n");
    Ok(s)
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
}

/// Reads the LP dialect written by [`export_lp`]: one statement may span
/// several lines, continuation lines start with whitespace and carry no
/// label.
pub fn read_lp(text: &str) -> Result<LinearModel> {
    let mut model = LinearModel::default();
    let mut vars: HashMap<String, usize> = HashMap::new();
    let mut section = Section::None;
    // (first line, statement text)
    let mut statements: Vec<(usize, Section, String)> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if let Some(name) = raw.strip_prefix("\\ ") {
            if model.name.is_empty() {
                model.name = name.trim().to_string();
            }
            continue;
        }
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let head = match trimmed.to_ascii_lowercase().as_str() {
            "minimize" => Some(Section::Objective),
            "subject to" => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "binaries" => Some(Section::Binaries),
            "end" => Some(Section::None),
            _ => None,
        };
        if let Some(h) = head {
            section = h;
            continue;
        }
        if section == Section::None {
            return Err(Error::Parse { line, message: format!("unexpected `{trimmed}`") });
        }
        let continuation = raw.starts_with("  ") && !trimmed.contains(':');
        match statements.last_mut() {
            Some(last) if continuation && matches!(section, Section::Objective | Section::Constraints) => {
                last.2.push(' ');
                last.2.push_str(trimmed);
            }
            _ => statements.push((line, section, trimmed.to_string())),
        }
    }

    let mut var = |model: &mut LinearModel, name: &str| -> usize {
        *vars
            .entry(name.to_string())
            .or_insert_with(|| model.add_var(name, VarKind::Continuous, None, 0.0))
    };

    for (line, section, stmt) in statements {
        let err = |message: String| Error::Parse { line, message };
        match section {
            Section::Objective | Section::Constraints => {
                let (label, body) = stmt.split_once(':').ok_or_else(|| err("missing label".into()))?;
                let (expr, sense, rhs) = if section == Section::Objective {
                    (body, Sense::Eq, 0.0)
                } else {
                    let (expr, op, rhs) = ["<=", ">=", "="]
                        .iter()
                        .find_map(|op| body.split_once(op).map(|(l, r)| (l, *op, r)))
                        .ok_or_else(|| err("missing comparison".into()))?;
                    let sense = match op {
                        "<=" => Sense::Le,
                        ">=" => Sense::Ge,
                        _ => Sense::Eq,
                    };
                    let rhs: f64 = rhs.trim().parse().map_err(|_| err(format!("bad right-hand side `{}`", rhs.trim())))?;
                    (expr, sense, rhs)
                };
                let mut terms = Vec::new();
                let tokens: Vec<&str> = expr.split_whitespace().collect();
                let mut i = 0;
                let mut sign = 1.0;
                while i < tokens.len() {
                    match tokens[i] {
                        "+" => sign = 1.0,
                        "-" => sign = -1.0,
                        tok => {
                            let coef: f64 = tok.parse().map_err(|_| err(format!("bad coefficient `{tok}`")))?;
                            let name = tokens.get(i + 1).ok_or_else(|| err("coefficient without variable".into()))?;
                            let j = var(&mut model, name);
                            terms.push((j, sign * coef));
                            sign = 1.0;
                            i += 1;
                        }
                    }
                    i += 1;
                }
                if section == Section::Objective {
                    for (j, c) in terms {
                        model.objective[j] += c;
                    }
                } else {
                    terms.retain(|&(_, a)| a != 0.0);
                    model.add_row(label.trim(), terms, sense, rhs);
                }
            }
            Section::Bounds => {
                let tokens: Vec<&str> = stmt.split_whitespace().collect();
                match tokens[..] {
                    ["0", "<=", name, "<=", ub] => {
                        let j = var(&mut model, name);
                        model.variables[j].upper = Some(ub.parse().map_err(|_| err(format!("bad bound `{ub}`")))?);
                    }
                    [name, ">=", "0"] => {
                        var(&mut model, name);
                    }
                    _ => return Err(err(format!("unsupported bound `{stmt}`"))),
                }
            }
            Section::Binaries => {
                for name in stmt.split_whitespace() {
                    let j = var(&mut model, name);
                    model.variables[j].kind = VarKind::Binary;
                }
            }
            Section::None => {}
        }
    }
    Ok(model)
}
