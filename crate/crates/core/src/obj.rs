//! Minimal Wavefront OBJ reading and writing (`v` and `f` records only).

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObjMesh {
    pub vertices: Vec<[f64; 3]>,
    /// Zero-based vertex indices.
    pub faces: Vec<[u32; 3]>,
}

/// Serializes with 1-based face indices. Coordinates use the shortest
/// representation that round-trips exactly.
pub fn write_obj(vertices: &[[f64; 3]], faces: &[[u32; 3]]) -> String {
    let mut out = String::with_capacity(vertices.len() * 40 + faces.len() * 20);
    for v in vertices {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

fn parse_index(tok: &str, n_vertices: usize, line: usize) -> Result<u32> {
    // "f 1/2/3" style: only the position index matters here.
    let head = tok.split('/').next().unwrap_or("");
    let i: i64 = head
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: bad face index {tok:?}")))?;
    let resolved = if i < 0 { n_vertices as i64 + i } else { i - 1 };
    if resolved < 0 {
        return Err(Error::Format(format!("line {line}: face index {i} out of range")));
    }
    Ok(resolved as u32)
}

pub fn parse_obj(text: &str) -> Result<ObjMesh> {
    let mut mesh = ObjMesh::default();
    for (n, line) in text.lines().enumerate() {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let mut v = [0.0; 3];
                for c in v.iter_mut() {
                    *c = toks
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::Format(format!("line {}: bad vertex", n + 1)))?;
                }
                mesh.vertices.push(v);
            }
            Some("f") => {
                let idx = toks
                    .map(|t| parse_index(t, mesh.vertices.len(), n + 1))
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(Error::Format(format!("line {}: face with < 3 vertices", n + 1)));
                }
                // fan-triangulate polygons
                for w in 1..idx.len() - 1 {
                    mesh.faces.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    let nv = mesh.vertices.len() as u32;
    if mesh.faces.iter().flatten().any(|&i| i >= nv) {
        return Err(Error::Format("face references a missing vertex".into()));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let verts = vec![[0.1, -2.5e-7, 3.0], [1.0 / 3.0, 2.0, 1e10], [0.0, 0.0, -0.0]];
        let faces = vec![[0, 1, 2]];
        let text = write_obj(&verts, &faces);
        assert!(text.contains("f 1 2 3"));
        let mesh = parse_obj(&text).unwrap();
        assert_eq!(mesh.vertices, verts);
        assert_eq!(mesh.faces, faces);
    }

    #[test]
    fn quads_and_slashes() {
        let text = "# c\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 -1//1\n";
        let mesh = parse_obj(text).unwrap();
        assert_eq!(mesh.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn rejects_dangling_index() {
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }
}
