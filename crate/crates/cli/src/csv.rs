//! Minimal CSV emission: one-line header, floats at 17 significant digits so
//! runs are byte-comparable.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

pub enum Field {
    I(i64),
    U(u64),
    F(f64),
    S(String),
    B(bool),
}

impl Field {
    fn render(&self, out: &mut String) {
        match self {
            Field::I(x) => {
                let _ = write!(out, "{x}");
            }
            Field::U(x) => {
                let _ = write!(out, "{x}");
            }
            Field::F(x) => {
                let _ = write!(out, "{x:.16e}");
            }
            Field::S(x) => {
                let _ = write!(out, "{x}");
            }
            Field::B(x) => {
                let _ = write!(out, "{x}");
            }
        }
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Field>]) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        for (i, field) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            field.render(&mut out);
        }
        out.push('\n');
    }
    fs::write(path, out)
}
