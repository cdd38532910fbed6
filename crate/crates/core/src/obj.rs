//! Wavefront OBJ reading and writing, plus vertex index list files.
//!
//! Only `v` and `f` records are interpreted. Normals, texture coordinates
//! and grouping statements are skipped on read and never written.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};

pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_obj(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_obj(reader: impl BufRead) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();

    for (line_index, line) in reader.lines().enumerate() {
        let line_no = line_index + 1;
        let line = line.map_err(|e| Error::io("<obj stream>", e))?;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0; 3];
                for c in &mut coords {
                    let tok = tokens.next().ok_or_else(|| Error::Format {
                        line: line_no,
                        message: "vertex record needs three coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| Error::Format {
                        line: line_no,
                        message: format!("invalid coordinate {tok:?}"),
                    })?;
                }
                vertices.push(Vec3::from(coords));
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    if refs.len() > 3 {
                        return Err(Error::UnsupportedTopology {
                            line: line_no,
                            message: format!(
                                "{}-sided face, only triangles are supported",
                                refs.len()
                            ),
                        });
                    }
                    return Err(Error::Format {
                        line: line_no,
                        message: "face record needs three vertex references".into(),
                    });
                }
                let mut face = [0usize; 3];
                for (slot, r) in face.iter_mut().zip(refs) {
                    *slot = parse_face_ref(r, vertices.len(), line_no)?;
                }
                faces.push(face);
            }
            _ => {}
        }
    }

    if faces.is_empty() {
        return Err(Error::Format {
            line: 0,
            message: "no faces found".into(),
        });
    }
    Mesh::new(vertices, faces)
}

fn parse_face_ref(token: &str, n_vertices: usize, line: usize) -> Result<usize> {
    let index_str = token.split('/').next().unwrap_or("");
    let raw: i64 = index_str.parse().map_err(|_| Error::Format {
        line,
        message: format!("invalid face index {token:?}"),
    })?;
    let resolved = match raw {
        0 => None,
        r if r > 0 => Some(r as usize - 1),
        r => (n_vertices as i64 + r).try_into().ok(),
    };
    resolved.ok_or_else(|| Error::Format {
        line,
        message: format!("face index {raw} does not resolve to a vertex"),
    })
}

/// Writes `v` and `f` records. Coordinates use the shortest decimal form
/// that parses back to the same `f64`.
pub fn write_obj(mesh: &Mesh, mut writer: impl Write) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(writer, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(writer, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn save_obj(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_obj(mesh, &mut writer)
        .and_then(|_| writer.flush())
        .map_err(|e| Error::io(path, e))
}

/// Parses one 0-based vertex index per line; `#` starts a comment.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        out.push(content.parse().map_err(|_| Error::Format {
            line: i + 1,
            message: format!("invalid vertex index {content:?}"),
        })?);
    }
    Ok(out)
}

pub fn read_index_list(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_index_list(&text)
}
