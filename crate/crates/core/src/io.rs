//! CSV and JSON serialization of scalar fields.
//!
//! CSV: a `N,a` header line, a line with the two values, then N² rows
//! `i,j,value` in row-major order. JSON mirrors the same schema. Floats are
//! written in shortest round-trip form so both formats reproduce the field
//! bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{GridSpec, ScalarField};

#[derive(Debug, Serialize, Deserialize)]
struct FieldEntry {
    i: usize,
    j: usize,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldDocument {
    #[serde(rename = "N")]
    n: usize,
    a: f64,
    values: Vec<FieldEntry>,
}

pub fn field_to_csv(field: &ScalarField) -> String {
    let grid = field.grid();
    let mut out = String::with_capacity(16 * grid.n_sites() + 32);
    out.push_str("N,a\n");
    out.push_str(&format!("{},{:?}\n", grid.n(), grid.a()));
    for i in 0..grid.n() {
        for j in 0..grid.n() {
            out.push_str(&format!("{i},{j},{:?}\n", field.get(i, j)));
        }
    }
    out
}

pub fn field_from_csv(text: &str) -> Result<ScalarField> {
    let bad = |line: usize, msg: &str| Error::Parse(format!("field CSV line {line}: {msg}"));
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == "N,a" => {}
        _ => return Err(bad(1, "expected header `N,a`")),
    }
    let (ln, params) = lines.next().ok_or_else(|| bad(2, "missing grid line"))?;
    let mut parts = params.split(',');
    let n: usize = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(ln + 1, "bad N"))?;
    let a: f64 = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(ln + 1, "bad a"))?;
    let grid = GridSpec::new(n, a)?;
    let mut field = ScalarField::zeros(grid);
    let mut seen = vec![false; grid.n_sites()];
    for (ln, line) in lines {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(bad(ln + 1, "expected `i,j,value`"));
        }
        let i: usize = cols[0].parse().map_err(|_| bad(ln + 1, "bad i"))?;
        let j: usize = cols[1].parse().map_err(|_| bad(ln + 1, "bad j"))?;
        let v: f64 = cols[2].parse().map_err(|_| bad(ln + 1, "bad value"))?;
        if i >= n || j >= n {
            return Err(bad(ln + 1, "site out of range"));
        }
        if std::mem::replace(&mut seen[i * n + j], true) {
            return Err(bad(ln + 1, "duplicate site"));
        }
        field.set(i, j, v);
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Parse("field CSV: missing sites".into()));
    }
    Ok(field)
}

pub fn field_to_json(field: &ScalarField) -> Result<String> {
    let grid = field.grid();
    let doc = FieldDocument {
        n: grid.n(),
        a: grid.a(),
        values: grid
            .sites()
            .map(|s| FieldEntry {
                i: s.i,
                j: s.j,
                value: field.at(s),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn field_from_json(text: &str) -> Result<ScalarField> {
    let doc: FieldDocument = serde_json::from_str(text)?;
    let grid = GridSpec::new(doc.n, doc.a)?;
    if doc.values.len() != grid.n_sites() {
        return Err(Error::Parse(format!(
            "field JSON: expected {} entries, got {}",
            grid.n_sites(),
            doc.values.len()
        )));
    }
    let mut field = ScalarField::zeros(grid);
    for e in doc.values {
        if e.i >= doc.n || e.j >= doc.n {
            return Err(Error::Parse("field JSON: site out of range".into()));
        }
        field.set(e.i, e.j, e.value);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_field() -> impl Strategy<Value = ScalarField> {
        (3usize..7, 0.1f64..4.0).prop_flat_map(|(n, a)| {
            prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, n * n).prop_map(
                move |vals| ScalarField::from_values(GridSpec::new(n, a).unwrap(), vals).unwrap(),
            )
        })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(field in arb_field()) {
            let back = field_from_json(&field_to_json(&field).unwrap()).unwrap();
            prop_assert_eq!(back.grid(), field.grid());
            for (x, y) in back.values().iter().zip(field.values()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }

        #[test]
        fn csv_round_trip_is_bit_exact(field in arb_field()) {
            let back = field_from_csv(&field_to_csv(&field)).unwrap();
            for (x, y) in back.values().iter().zip(field.values()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn csv_layout() {
        let grid = GridSpec::new(3, 1.0).unwrap();
        let f = ScalarField::from_fn(grid, |i, j| (i * 3 + j) as f64 * 0.5);
        let csv = field_to_csv(&f);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "N,a");
        assert_eq!(lines[1], "3,1.0");
        assert_eq!(lines[2], "0,0,0.0");
        assert_eq!(lines[10], "2,2,4.0");
        assert_eq!(lines.len(), 11);
    }

    #[test]
    fn csv_rejects_missing_and_duplicate_sites() {
        let grid = GridSpec::new(3, 1.0).unwrap();
        let csv = field_to_csv(&ScalarField::zeros(grid));
        let truncated: String = csv.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(field_from_csv(&truncated).is_err());
        let dup = csv.replace("0,1,0.0", "0,0,0.0");
        assert!(field_from_csv(&dup).is_err());
    }
}
