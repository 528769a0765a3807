//! Dataset CSV format.
//!
//! Header: `x0..x{dx-1},t,m0..m{dm-1}` followed by optional `y`, optional
//! `y0,y1`, and optional `s0..s{k-1}`. Values are written with Rust's
//! shortest round-trip f64 formatting, so save/load is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::Matrix;

use super::dataset::Dataset;

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    d.validate()?;
    let mut out = String::new();
    let mut header: Vec<String> = (0..d.d_x()).map(|i| format!("x{i}")).collect();
    header.push("t".into());
    header.extend((0..d.d_m()).map(|i| format!("m{i}")));
    if d.y.is_some() {
        header.push("y".into());
    }
    if d.y0.is_some() {
        header.push("y0".into());
        header.push("y1".into());
    }
    if let Some(s) = &d.s_true {
        header.extend((0..s.cols()).map(|i| format!("s{i}")));
    }
    out.push_str(&header.join(","));
    out.push('\n');

    for i in 0..d.n_units() {
        let mut fields: Vec<String> = d.x.row(i).iter().map(|v| format!("{v}")).collect();
        fields.push(format!("{}", d.t[i]));
        fields.extend(d.m.row(i).iter().map(|v| format!("{v}")));
        if let Some(y) = &d.y {
            fields.push(format!("{}", y[i]));
        }
        if let (Some(y0), Some(y1)) = (&d.y0, &d.y1) {
            fields.push(format!("{}", y0[i]));
            fields.push(format!("{}", y1[i]));
        }
        if let Some(s) = &d.s_true {
            fields.extend(s.row(i).iter().map(|v| format!("{v}")));
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

struct Schema {
    d_x: usize,
    d_m: usize,
    has_y: bool,
    has_potentials: bool,
    d_s: usize,
}

fn parse_header(path: &Path, header: &str) -> Result<Schema> {
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut idx = 0;
    let count_prefix = |idx: &mut usize, prefix: &str| {
        let mut n = 0;
        while *idx < cols.len() && cols[*idx] == format!("{prefix}{n}") {
            n += 1;
            *idx += 1;
        }
        n
    };
    let d_x = count_prefix(&mut idx, "x");
    if idx >= cols.len() || cols[idx] != "t" {
        return Err(Error::parse(
            format!("{}:1", path.display()),
            format!("expected column 't' after {d_x} covariate columns"),
        ));
    }
    idx += 1;
    let d_m = count_prefix(&mut idx, "m");
    let has_y = idx < cols.len() && cols[idx] == "y";
    if has_y {
        idx += 1;
    }
    let has_potentials = idx + 1 < cols.len() && cols[idx] == "y0" && cols[idx + 1] == "y1";
    if has_potentials {
        idx += 2;
    }
    let d_s = count_prefix(&mut idx, "s");
    if idx != cols.len() {
        return Err(Error::parse(
            format!("{}:1", path.display()),
            format!("unrecognized column '{}'", cols[idx]),
        ));
    }
    if d_x == 0 || d_m == 0 {
        return Err(Error::parse(
            format!("{}:1", path.display()),
            "dataset needs at least one x column and one m column".to_string(),
        ));
    }
    Ok(Schema { d_x, d_m, has_y, has_potentials, d_s })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path.display().to_string(), "empty file".to_string()))?;
    let schema = parse_header(path, header)?;
    let expected =
        schema.d_x + 1 + schema.d_m + usize::from(schema.has_y)
            + 2 * usize::from(schema.has_potentials)
            + schema.d_s;

    let mut x_rows = Vec::new();
    let mut t = Vec::new();
    let mut m_rows = Vec::new();
    let mut y = Vec::new();
    let mut y0 = Vec::new();
    let mut y1 = Vec::new();
    let mut s_rows = Vec::new();

    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let loc = |col: &str| format!("{}:{} column {col}", path.display(), lineno + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected {
            return Err(Error::parse(
                format!("{}:{}", path.display(), lineno + 1),
                format!("ragged row: {} fields, expected {expected}", fields.len()),
            ));
        }
        let parse = |v: &str, col: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|e| Error::parse(loc(col), e.to_string()))
        };
        let mut k = 0;
        let mut xr = Vec::with_capacity(schema.d_x);
        for j in 0..schema.d_x {
            xr.push(parse(fields[k], &format!("x{j}"))?);
            k += 1;
        }
        x_rows.push(xr);
        let tv = parse(fields[k], "t")?;
        if tv != 0.0 && tv != 1.0 {
            return Err(Error::parse(loc("t"), format!("non-binary treatment value {tv}")));
        }
        t.push(tv as u8);
        k += 1;
        let mut mr = Vec::with_capacity(schema.d_m);
        for j in 0..schema.d_m {
            mr.push(parse(fields[k], &format!("m{j}"))?);
            k += 1;
        }
        m_rows.push(mr);
        if schema.has_y {
            y.push(parse(fields[k], "y")?);
            k += 1;
        }
        if schema.has_potentials {
            y0.push(parse(fields[k], "y0")?);
            y1.push(parse(fields[k + 1], "y1")?);
            k += 2;
        }
        if schema.d_s > 0 {
            let mut sr = Vec::with_capacity(schema.d_s);
            for j in 0..schema.d_s {
                sr.push(parse(fields[k], &format!("s{j}"))?);
                k += 1;
            }
            s_rows.push(sr);
        }
    }

    let d = Dataset {
        x: Matrix::from_rows(&x_rows)?,
        t,
        m: Matrix::from_rows(&m_rows)?,
        y: schema.has_y.then_some(y),
        y0: schema.has_potentials.then_some(y0),
        y1: schema.has_potentials.then_some(y1),
        s_true: if schema.d_s > 0 { Some(Matrix::from_rows(&s_rows)?) } else { None },
    };
    d.validate()?;
    Ok(d)
}
