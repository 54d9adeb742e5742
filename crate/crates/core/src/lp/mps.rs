//! Fixed-format MPS writer.
//!
//! Fixed MPS limits names to 8 characters and numbers to 12, so columns and
//! rows are renamed `C0000001`, `R0000001`, ... and the original names are
//! listed in leading comment lines. Numbers that do not fit in 12 characters
//! are rounded to the longest scientific form that does.

use std::io::{self, Write};

use super::{LpModel, Relation, Sense};

pub fn write_mps(model: &LpModel, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "* model {}", model.name())?;
    for (k, v) in model.vars().iter().enumerate() {
        writeln!(out, "* {} {}", col_name(k), v.name)?;
    }
    for (k, r) in model.constraints().iter().enumerate() {
        writeln!(out, "* {} {}", row_name(k), r.name)?;
    }
    let name: String = model.name().chars().filter(|c| !c.is_whitespace()).take(8).collect();
    writeln!(out, "NAME          {name}")?;
    if model.sense() == Sense::Maximize {
        writeln!(out, "OBJSENSE")?;
        writeln!(out, "    MAX")?;
    }
    writeln!(out, "ROWS")?;
    writeln!(out, " N  OBJ")?;
    for (k, r) in model.constraints().iter().enumerate() {
        let t = match r.relation {
            Relation::Le => 'L',
            Relation::Ge => 'G',
            Relation::Eq => 'E',
        };
        writeln!(out, " {t}  {}", row_name(k))?;
    }

    // Column-major view of the coefficient matrix.
    let mut cols: Vec<Vec<(String, f64)>> = vec![Vec::new(); model.n_vars()];
    for &(v, c) in model.objective() {
        cols[v.0].push(("OBJ".to_string(), c));
    }
    for (k, r) in model.constraints().iter().enumerate() {
        for &(v, a) in &r.coeffs {
            cols[v.0].push((row_name(k), a));
        }
    }
    writeln!(out, "COLUMNS")?;
    for (k, entries) in cols.iter().enumerate() {
        let c = col_name(k);
        if entries.is_empty() {
            writeln!(out, "    {c:<8}  {:<8}  {:>12}", "OBJ", num(0.0))?;
        }
        for e in entries {
            writeln!(out, "    {c:<8}  {:<8}  {:>12}", e.0, num(e.1))?;
        }
    }
    writeln!(out, "RHS")?;
    for (k, r) in model.constraints().iter().enumerate() {
        if r.rhs != 0.0 {
            writeln!(out, "    {:<8}  {:<8}  {:>12}", "RHS", row_name(k), num(r.rhs))?;
        }
    }
    writeln!(out, "BOUNDS")?;
    for (k, v) in model.vars().iter().enumerate() {
        let c = col_name(k);
        let (lo, hi) = (v.lower, v.upper);
        let mut bound = |kind: &str, val: Option<f64>| match val {
            Some(x) => writeln!(out, " {kind} {:<8}  {c:<8}  {:>12}", "BND", num(x)),
            None => writeln!(out, " {kind} {:<8}  {c}", "BND"),
        };
        if lo == hi {
            bound("FX", Some(lo))?;
            continue;
        }
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => bound("FR", None)?,
            (false, true) => {
                bound("MI", None)?;
                bound("UP", Some(hi))?;
            }
            (true, _) => {
                if lo != 0.0 {
                    bound("LO", Some(lo))?;
                }
                if hi.is_finite() {
                    bound("UP", Some(hi))?;
                }
            }
        }
    }
    writeln!(out, "ENDATA")
}

fn col_name(k: usize) -> String {
    format!("C{:07}", k + 1)
}

fn row_name(k: usize) -> String {
    format!("R{:07}", k + 1)
}

fn num(x: f64) -> String {
    let plain = format!("{x}");
    if plain.len() <= 12 {
        return plain;
    }
    (0..=10)
        .rev()
        .map(|p| format!("{x:.p$e}"))
        .find(|s| s.len() <= 12)
        .unwrap_or_else(|| format!("{x:.0e}"))
}
