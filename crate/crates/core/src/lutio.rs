//! LUT text formats.
//!
//! 3D LUTs use the Iridas/Adobe `.cube` layout: a `LUT_3D_SIZE N` header
//! followed by `N³` lines of `r g b`, red index varying fastest. 1D LUTs use
//! a minimal `SEPLUT1D N` header followed by `N` lines of `r g b`. Values are
//! written with six decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lut::{Lut1D, Lut3D};

pub const LUT1D_MAGIC: &str = "SEPLUT1D";

pub fn format_cube(lut: &Lut3D) -> String {
    let s = lut.size();
    let mut out = String::with_capacity(s * s * s * 28 + 32);
    writeln!(out, "LUT_3D_SIZE {s}").unwrap();
    for b in 0..s {
        for g in 0..s {
            for r in 0..s {
                writeln!(
                    out,
                    "{:.6} {:.6} {:.6}",
                    lut.at(0, r, g, b),
                    lut.at(1, r, g, b),
                    lut.at(2, r, g, b)
                )
                .unwrap();
            }
        }
    }
    out
}

fn parse_triplet(line: &str, lineno: usize) -> Result<[f32; 3]> {
    let mut it = line.split_whitespace().map(|t| {
        t.parse::<f32>().map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("`{t}`: {e}"),
        })
    });
    let mut v = [0.0; 3];
    for slot in &mut v {
        *slot = it.next().ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "expected three values".into(),
        })??;
    }
    if it.next().is_some() {
        return Err(Error::Parse {
            line: lineno,
            msg: "more than three values".into(),
        });
    }
    Ok(v)
}

fn parse_size(tok: Option<&str>, lineno: usize) -> Result<usize> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "missing or invalid size".into(),
        })
}

pub fn parse_cube(text: &str) -> Result<Lut3D> {
    let mut size = None;
    let mut rows: Vec<[f32; 3]> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap();
        match head {
            "LUT_3D_SIZE" => size = Some(parse_size(toks.next(), lineno)?),
            "LUT_1D_SIZE" => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "1D .cube files are not supported here".into(),
                });
            }
            "TITLE" => {}
            "DOMAIN_MIN" | "DOMAIN_MAX" => {
                let want = if head == "DOMAIN_MIN" { 0.0 } else { 1.0 };
                let rest = line[head.len()..].trim();
                if parse_triplet(rest, lineno)? != [want; 3] {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "only the unit domain is supported".into(),
                    });
                }
            }
            _ if head.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '.') => {
                rows.push(parse_triplet(line, lineno)?)
            }
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown keyword `{other}`"),
                });
            }
        }
    }
    let s = size.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing LUT_3D_SIZE".into(),
    })?;
    if s < 2 {
        return Err(Error::InvalidSize {
            what: "3D LUT size",
            size: s,
            min: 2,
        });
    }
    let n = s * s * s;
    if rows.len() != n {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {n} rows for size {s}, found {}", rows.len()),
        });
    }
    let mut values = vec![0.0; 3 * n];
    for (line, rgb) in rows.iter().enumerate() {
        let r = line % s;
        let g = (line / s) % s;
        let b = line / (s * s);
        let node = (r * s + g) * s + b;
        for c in 0..3 {
            values[c * n + node] = rgb[c];
        }
    }
    Lut3D::new(s, values)
}

pub fn format_lut1d(lut: &Lut1D) -> String {
    let s = lut.size();
    let mut out = String::with_capacity(s * 28 + 16);
    writeln!(out, "{LUT1D_MAGIC} {s}").unwrap();
    let (r, g, b) = (lut.channel(0), lut.channel(1), lut.channel(2));
    for ((r, g), b) in r.iter().zip(g).zip(b) {
        writeln!(out, "{r:.6} {g:.6} {b:.6}").unwrap();
    }
    out
}

pub fn parse_lut1d(text: &str) -> Result<Lut1D> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (lineno, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some(LUT1D_MAGIC) {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("expected `{LUT1D_MAGIC} <size>` header"),
        });
    }
    let s = parse_size(toks.next(), lineno)?;
    let mut ch = [
        Vec::with_capacity(s),
        Vec::with_capacity(s),
        Vec::with_capacity(s),
    ];
    for (lineno, line) in lines {
        let v = parse_triplet(line, lineno)?;
        for c in 0..3 {
            ch[c].push(v[c]);
        }
    }
    if ch[0].len() != s {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {s} rows, found {}", ch[0].len()),
        });
    }
    Lut1D::new(s, ch.concat())
}

pub fn write_cube(lut: &Lut3D, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_cube(lut))?;
    Ok(())
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<Lut3D> {
    parse_cube(&fs::read_to_string(path)?)
}

pub fn write_lut1d(lut: &Lut1D, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_lut1d(lut))?;
    Ok(())
}

pub fn read_lut1d(path: impl AsRef<Path>) -> Result<Lut1D> {
    parse_lut1d(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_red_varies_fastest() {
        let text = format_cube(&Lut3D::identity(2).unwrap());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "LUT_3D_SIZE 2");
        assert_eq!(lines[1], "0.000000 0.000000 0.000000");
        assert_eq!(lines[2], "1.000000 0.000000 0.000000");
        assert_eq!(lines[3], "0.000000 1.000000 0.000000");
        assert_eq!(lines[5], "0.000000 0.000000 1.000000");
    }

    #[test]
    fn cube_parse_errors() {
        assert!(parse_cube("0 0 0\n").is_err());
        assert!(matches!(
            parse_cube("LUT_3D_SIZE 2\n0 0 0\n"),
            Err(Error::Parse { line: 0, .. })
        ));
        assert!(matches!(
            parse_cube("LUT_3D_SIZE 2\n0 0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_cube("LUT_1D_SIZE 2\n").is_err());
    }

    #[test]
    fn cube_accepts_title_and_unit_domain() {
        let mut text = String::from("TITLE \"x\"\n# comment\nDOMAIN_MIN 0 0 0\nDOMAIN_MAX 1 1 1\n");
        text.push_str(&format_cube(&Lut3D::identity(3).unwrap()));
        assert_eq!(parse_cube(&text).unwrap(), Lut3D::identity(3).unwrap());
        assert!(parse_cube("DOMAIN_MAX 2 2 2\nLUT_3D_SIZE 2\n").is_err());
    }

    #[test]
    fn lut1d_text_round_trip() {
        let lut = Lut1D::new(3, vec![0.0, 0.25, 1.0, 0.1, 0.2, 0.3, 0.5, 0.5, 0.5]).unwrap();
        let text = format_lut1d(&lut);
        assert!(text.starts_with("SEPLUT1D 3\n0.000000 0.100000 0.500000\n"));
        assert_eq!(parse_lut1d(&text).unwrap(), lut);
        assert!(parse_lut1d("LUT 3\n").is_err());
        assert!(parse_lut1d("SEPLUT1D 3\n0 0 0\n").is_err());
    }
}
