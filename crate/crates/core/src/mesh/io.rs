use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{TriangleMesh, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Off,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("off") => Ok(MeshFormat::Off),
            _ => Err(Error::InvalidParams(format!(
                "cannot infer mesh format from {}",
                path.display()
            ))),
        }
    }
}

/// How coordinates are printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Rounded to this many significant digits.
    Significant(usize),
    /// Shortest text that parses back to the same `f64`.
    #[default]
    Full,
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path)?;
    match format {
        MeshFormat::Obj => parse_obj(&text),
        MeshFormat::Off => parse_off(&text),
    }
}

pub fn save_mesh(
    mesh: &TriangleMesh,
    path: &Path,
    format: MeshFormat,
    precision: Precision,
) -> Result<()> {
    fs::write(path, write_mesh(mesh, format, precision))?;
    Ok(())
}

fn parse_float(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        message: "missing coordinate".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad number {tok:?}"),
    })
}

fn parse_vertex<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec3> {
    let x = parse_float(toks.next(), line)?;
    let y = parse_float(toks.next(), line)?;
    let z = parse_float(toks.next(), line)?;
    Ok(Vec3::new(x, y, z))
}

fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, lines: &[usize]) -> Result<TriangleMesh> {
    TriangleMesh::new(vertices, faces).map_err(|e| match e {
        Error::InvalidFace { face, message } => Error::Parse {
            line: lines[face],
            message,
        },
        other => other,
    })
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut face_lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => vertices.push(parse_vertex(toks, line)?),
            Some("f") => {
                let refs: Vec<&str> = toks.collect();
                if refs.len() != 3 {
                    return Err(Error::NonTriangular(line));
                }
                let mut face = [0usize; 3];
                for (slot, r) in face.iter_mut().zip(&refs) {
                    let pos = r.split('/').next().unwrap_or("");
                    let idx: i64 = pos.parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("bad face index {r:?}"),
                    })?;
                    let resolved = match idx {
                        i if i > 0 => i - 1,
                        i if i < 0 => vertices.len() as i64 + i,
                        _ => -1,
                    };
                    if resolved < 0 {
                        return Err(Error::Parse {
                            line,
                            message: format!("bad face index {r:?}"),
                        });
                    }
                    *slot = resolved as usize;
                }
                faces.push(face);
                face_lines.push(line);
            }
            _ => {}
        }
    }
    build(vertices, faces, &face_lines)
}

pub fn parse_off(text: &str) -> Result<TriangleMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let rest = header.strip_prefix("OFF").ok_or_else(|| Error::Parse {
        line,
        message: "missing OFF header".into(),
    })?;
    let counts_text = if rest.trim().is_empty() {
        lines.next().ok_or(Error::Parse {
            line,
            message: "missing counts line".into(),
        })?
    } else {
        (line, rest.trim())
    };
    let counts: Vec<usize> = counts_text
        .1
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse {
            line: counts_text.0,
            message: "bad counts line".into(),
        })?;
    if counts.len() < 2 {
        return Err(Error::Parse {
            line: counts_text.0,
            message: "bad counts line".into(),
        });
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: counts_text.0,
            message: "too few vertex lines".into(),
        })?;
        vertices.push(parse_vertex(l.split_whitespace(), line)?);
    }
    let mut faces = Vec::with_capacity(nf);
    let mut face_lines = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: counts_text.0,
            message: "too few face lines".into(),
        })?;
        let nums: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line,
                message: "bad face line".into(),
            })?;
        match nums.first() {
            Some(3) if nums.len() >= 4 => {}
            Some(3) | None => {
                return Err(Error::Parse {
                    line,
                    message: "bad face line".into(),
                })
            }
            Some(_) => return Err(Error::NonTriangular(line)),
        }
        faces.push([nums[1], nums[2], nums[3]]);
        face_lines.push(line);
    }
    build(vertices, faces, &face_lines)
}

fn fmt_coord(out: &mut String, v: f64, precision: Precision) {
    match precision {
        Precision::Full => write!(out, "{v}").unwrap(),
        Precision::Significant(d) => {
            let rounded: f64 = format!("{:.*e}", d.max(1) - 1, v).parse().unwrap();
            write!(out, "{rounded}").unwrap()
        }
    }
}

fn push_point(out: &mut String, p: &Vec3, precision: Precision) {
    for (k, c) in p.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        fmt_coord(out, *c, precision);
    }
    out.push('\n');
}

pub fn write_mesh(mesh: &TriangleMesh, format: MeshFormat, precision: Precision) -> String {
    let mut out = String::new();
    match format {
        MeshFormat::Obj => {
            for v in mesh.vertices() {
                out.push_str("v ");
                push_point(&mut out, v, precision);
            }
            for f in mesh.faces() {
                writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
            }
        }
        MeshFormat::Off => {
            writeln!(out, "OFF\n{} {} 0", mesh.num_vertices(), mesh.num_faces()).unwrap();
            for v in mesh.vertices() {
                push_point(&mut out, v, precision);
            }
            for f in mesh.faces() {
                writeln!(out, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
            }
        }
    }
    out
}
