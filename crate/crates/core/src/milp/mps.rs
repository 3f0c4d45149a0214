use std::collections::HashMap;
use std::fmt::Write as _;

use super::{LinearModel, Sense, VarKind, MAX_NAME_LEN};
use crate::error::{Error, Result};

pub(super) fn check_name(name: &str) -> Result<()> {
    if name.is_empty() {
        return Err(Error::Export("empty name".into()));
    }
    if name.len() > MAX_NAME_LEN {
        return Err(Error::Export(format!(
            "name `{}...` is {} characters, more than {MAX_NAME_LEN}",
            &name[..32],
            name.len()
        )));
    }
    if name.chars().any(|c| c.is_whitespace() || c == ':') {
        return Err(Error::Export(format!("name `{name}` contains a separator")));
    }
    Ok(())
}

/// Writes the model in free-format MPS.
pub fn export_mps(model: &LinearModel) -> Result<String> {
    for v in &model.variables {
        check_name(&v.name)?;
    }
    for r in &model.rows {
        check_name(&r.name)?;
    }
    let name = if model.name.is_empty() { "model" } else { &model.name };
    check_name(name)?;

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables.len()];
    for (i, row) in model.rows.iter().enumerate() {
        for &(j, a) in &row.terms {
            columns[j].push((i, a));
        }
    }

    let mut s = String::new();
    writeln!(s, "NAME {name}").unwrap();
    s.push_str("ROWS\n N obj\n");
    for row in &model.rows {
        let tag = match row.sense {
            Sense::Le => 'L',
            Sense::Eq => 'E',
            Sense::Ge => 'G',
        };
        writeln!(s, " {tag} {}", row.name).unwrap();
    }
    s.push_str("COLUMNS\n");
    for (j, v) in model.variables.iter().enumerate() {
        let c = model.objective[j];
        if c != 0.0 || columns[j].is_empty() {
            writeln!(s, "    {} obj {c}", v.name).unwrap();
        }
        for &(i, a) in &columns[j] {
            writeln!(s, "    {} {} {a}", v.name, model.rows[i].name).unwrap();
        }
    }
    s.push_str("RHS\n");
    for row in &model.rows {
        if row.rhs != 0.0 {
            writeln!(s, "    rhs {} {}", row.name, row.rhs).unwrap();
        }
    }
    s.push_str("BOUNDS\n");
    for v in &model.variables {
        match (v.kind, v.upper) {
            (VarKind::Binary, _) => writeln!(s, " BV bnd {}", v.name).unwrap(),
            (VarKind::Continuous, Some(u)) if u.is_finite() => writeln!(s, " UP bnd {} {u}", v.name).unwrap(),
            _ => {}
        }
    }
    s.push_str("ENDATA\n");
    Ok(s)
}

#[derive(PartialEq)]
enum Section {
    Start,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

/// Reads free-format MPS as written by [`export_mps`].
pub fn read_mps(text: &str) -> Result<LinearModel> {
    let mut model = LinearModel::default();
    let mut section = Section::Start;
    let mut objective_row = String::new();
    let mut rows: HashMap<String, usize> = HashMap::new();
    let mut vars: HashMap<String, usize> = HashMap::new();
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let number = |line: usize, s: &str| s.parse::<f64>().map_err(|_| parse_err(line, format!("bad number `{s}`")));

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') {
            section = match fields[0] {
                "NAME" => {
                    model.name = fields.get(1).unwrap_or(&"").to_string();
                    Section::Start
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(parse_err(line, format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::Rows => {
                let [tag, name] = fields[..] else {
                    return Err(parse_err(line, "expected `type name`".into()));
                };
                let sense = match tag {
                    "N" => {
                        objective_row = name.to_string();
                        continue;
                    }
                    "L" => Sense::Le,
                    "E" => Sense::Eq,
                    "G" => Sense::Ge,
                    _ => return Err(parse_err(line, format!("unknown row type `{tag}`"))),
                };
                rows.insert(name.to_string(), model.rows.len());
                model.add_row(name, Vec::new(), sense, 0.0);
            }
            Section::Columns => {
                if fields.len() < 3 || fields.len().is_multiple_of(2) {
                    return Err(parse_err(line, "expected `column row value [row value]`".into()));
                }
                let j = *vars
                    .entry(fields[0].to_string())
                    .or_insert_with(|| model.add_var(fields[0], VarKind::Continuous, None, 0.0));
                for pair in fields[1..].chunks(2) {
                    let a = number(line, pair[1])?;
                    if pair[0] == objective_row {
                        model.objective[j] = a;
                    } else {
                        let i = *rows.get(pair[0]).ok_or_else(|| parse_err(line, format!("unknown row `{}`", pair[0])))?;
                        model.rows[i].terms.push((j, a));
                    }
                }
            }
            Section::Rhs => {
                if fields.len() < 3 || fields.len().is_multiple_of(2) {
                    return Err(parse_err(line, "expected `set row value`".into()));
                }
                for pair in fields[1..].chunks(2) {
                    let i = *rows.get(pair[0]).ok_or_else(|| parse_err(line, format!("unknown row `{}`", pair[0])))?;
                    model.rows[i].rhs = number(line, pair[1])?;
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(parse_err(line, "expected `type set column [value]`".into()));
                }
                let j = *vars.get(fields[2]).ok_or_else(|| parse_err(line, format!("unknown column `{}`", fields[2])))?;
                match fields[0] {
                    "BV" => {
                        model.variables[j].kind = VarKind::Binary;
                        model.variables[j].upper = None;
                    }
                    "UP" => {
                        let value = fields.get(3).ok_or_else(|| parse_err(line, "missing bound".into()))?;
                        model.variables[j].upper = Some(number(line, value)?);
                    }
                    other => return Err(parse_err(line, format!("unsupported bound type `{other}`"))),
                }
            }
            Section::Start | Section::End => return Err(parse_err(line, "data outside a section".into())),
        }
    }
    if section != Section::End {
        return Err(parse_err(text.lines().count(), "missing ENDATA".into()));
    }
    Ok(model)
}
