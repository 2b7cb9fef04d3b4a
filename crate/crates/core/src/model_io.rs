//! Model file formats.
//!
//! The canonical form is a little-endian binary file:
//!
//! ```text
//! "HMDL"  u32 version (=1)
//! u32 n_vertices, n_faces, n_joints, n_shape, n_pose
//! template        n_vertices x 3        f64
//! faces           n_faces x 3           u32
//! shape_blend     n_shape x n_vertices x 3   f64
//! pose_blend      9 n_joints x n_vertices x 3 f64
//! joint_regressor u32 count, count x (u32 row, u32 col), count x f64
//! skin_weights    n_vertices x n_joints f64
//! parent          n_joints              i32 (-1 for the root)
//! pose_mean       3 (n_joints - 1)      f64
//! pose_basis      3 (n_joints - 1) x n_pose f64
//! fingertips      5                     u32
//! palm weights    u32 present flag, then u32 count, count x u32, count x f64
//! ```
//!
//! A JSON mirror with identical content is available for inspection.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::hand_model::{ModelConstants, SparseMatrix, SparseVector, NUM_FINGERTIPS};

pub const MAGIC: &[u8; 4] = b"HMDL";
pub const VERSION: u32 = 1;

// Guards allocation sizes read from untrusted headers.
const MAX_COUNT: usize = 1 << 28;

fn write_vec3s<W: Write>(w: &mut W, rows: &[[f64; 3]]) -> Result<()> {
    for r in rows {
        for &v in r {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn write_binary<W: Write>(c: &ModelConstants, w: &mut W) -> Result<()> {
    c.validate()?;
    let k = c.n_joints();
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    for n in [c.n_vertices(), c.n_faces(), k, c.n_shape(), c.n_pose()] {
        w.write_u32::<LittleEndian>(n as u32)?;
    }
    write_vec3s(w, &c.template)?;
    for f in &c.faces {
        for &i in f {
            w.write_u32::<LittleEndian>(i)?;
        }
    }
    for s in &c.shape_blend {
        write_vec3s(w, s)?;
    }
    for p in &c.pose_blend {
        write_vec3s(w, p)?;
    }
    let reg = &c.joint_regressor;
    w.write_u32::<LittleEndian>(reg.entries.len() as u32)?;
    for &(r, col, _) in &reg.entries {
        w.write_u32::<LittleEndian>(r)?;
        w.write_u32::<LittleEndian>(col)?;
    }
    for &(_, _, v) in &reg.entries {
        w.write_f64::<LittleEndian>(v)?;
    }
    for row in &c.skin_weights {
        for &v in row {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    for p in &c.parent {
        w.write_i32::<LittleEndian>(p.map_or(-1, |p| p as i32))?;
    }
    for &v in &c.pose_mean {
        w.write_f64::<LittleEndian>(v)?;
    }
    for row in &c.pose_basis {
        for &v in row {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    for &i in &c.fingertip_vertex_ids {
        w.write_u32::<LittleEndian>(i)?;
    }
    match &c.palm_center_weights {
        None => w.write_u32::<LittleEndian>(0)?,
        Some(palm) => {
            w.write_u32::<LittleEndian>(1)?;
            w.write_u32::<LittleEndian>(palm.indices.len() as u32)?;
            for &i in &palm.indices {
                w.write_u32::<LittleEndian>(i)?;
            }
            for &v in &palm.values {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
    }
    Ok(())
}

fn read_count<R: Read>(r: &mut R) -> Result<usize> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    if n > MAX_COUNT {
        return Err(Error::Format(format!("count {n} exceeds limit")));
    }
    Ok(n)
}

fn read_vec3s<R: Read>(r: &mut R, n: usize) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push([
            r.read_f64::<LittleEndian>()?,
            r.read_f64::<LittleEndian>()?,
            r.read_f64::<LittleEndian>()?,
        ]);
    }
    Ok(out)
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n)
        .map(|_| r.read_f64::<LittleEndian>().map_err(Error::from))
        .collect()
}

pub fn read_binary<R: Read>(r: &mut R) -> Result<ModelConstants> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let nv = read_count(r)?;
    let nf = read_count(r)?;
    let k = read_count(r)?;
    let n_shape = read_count(r)?;
    let n_pose = read_count(r)?;
    if k < 2 {
        return Err(Error::Format(format!("model declares {k} joints")));
    }
    let template = read_vec3s(r, nv)?;
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        faces.push([
            r.read_u32::<LittleEndian>()?,
            r.read_u32::<LittleEndian>()?,
            r.read_u32::<LittleEndian>()?,
        ]);
    }
    let shape_blend = (0..n_shape)
        .map(|_| read_vec3s(r, nv))
        .collect::<Result<Vec<_>>>()?;
    let pose_blend = (0..9 * k)
        .map(|_| read_vec3s(r, nv))
        .collect::<Result<Vec<_>>>()?;
    let count = read_count(r)?;
    let mut index_pairs = Vec::with_capacity(count);
    for _ in 0..count {
        index_pairs.push((r.read_u32::<LittleEndian>()?, r.read_u32::<LittleEndian>()?));
    }
    let values = read_f64s(r, count)?;
    let joint_regressor = SparseMatrix {
        rows: k,
        cols: nv,
        entries: index_pairs
            .into_iter()
            .zip(values)
            .map(|((row, col), v)| (row, col, v))
            .collect(),
    };
    let skin_weights = (0..nv)
        .map(|_| read_f64s(r, k))
        .collect::<Result<Vec<_>>>()?;
    let mut parent = Vec::with_capacity(k);
    for _ in 0..k {
        let p = r.read_i32::<LittleEndian>()?;
        parent.push(if p < 0 { None } else { Some(p as usize) });
    }
    let pose_mean = read_f64s(r, 3 * (k - 1))?;
    let pose_basis = (0..3 * (k - 1))
        .map(|_| read_f64s(r, n_pose))
        .collect::<Result<Vec<_>>>()?;
    let mut fingertip_vertex_ids = [0u32; NUM_FINGERTIPS];
    for id in fingertip_vertex_ids.iter_mut() {
        *id = r.read_u32::<LittleEndian>()?;
    }
    let palm_center_weights = match r.read_u32::<LittleEndian>()? {
        0 => None,
        1 => {
            let n = read_count(r)?;
            let indices = (0..n)
                .map(|_| r.read_u32::<LittleEndian>().map_err(Error::from))
                .collect::<Result<Vec<_>>>()?;
            let values = read_f64s(r, n)?;
            Some(SparseVector {
                len: nv,
                indices,
                values,
            })
        }
        flag => return Err(Error::Format(format!("bad palm-weight flag {flag}"))),
    };
    let c = ModelConstants {
        template,
        faces,
        shape_blend,
        pose_blend,
        joint_regressor,
        skin_weights,
        parent,
        pose_mean,
        pose_basis,
        fingertip_vertex_ids,
        palm_center_weights,
    };
    // n_pose cannot be recovered from an empty basis, so check it explicitly.
    if c.n_pose() != n_pose {
        return Err(Error::Format("pose basis width disagrees with header".into()));
    }
    c.validate()?;
    Ok(c)
}

pub fn to_json(c: &ModelConstants) -> Result<String> {
    Ok(serde_json::to_string(c)?)
}

pub fn from_json(s: &str) -> Result<ModelConstants> {
    let c: ModelConstants = serde_json::from_str(s)?;
    c.validate()?;
    Ok(c)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Loads a model, picking the JSON mirror for `.json` paths and the binary
/// format otherwise.
pub fn load_model(path: impl AsRef<Path>) -> Result<ModelConstants> {
    let path = path.as_ref();
    if is_json(path) {
        from_json(&std::fs::read_to_string(path)?)
    } else {
        read_binary(&mut BufReader::new(File::open(path)?))
    }
}

pub fn save_model(c: &ModelConstants, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_json(path) {
        std::fs::write(path, to_json(c)?)?;
    } else {
        let mut w = BufWriter::new(File::create(path)?);
        write_binary(c, &mut w)?;
        w.flush()?;
    }
    Ok(())
}
