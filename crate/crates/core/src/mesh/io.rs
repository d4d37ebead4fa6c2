use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point3;

use super::TriMesh;
use crate::error::{invalid_input, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    /// Guesses from the file extension, case-insensitively.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "off" => Some(Self::Off),
            "obj" => Some(Self::Obj),
            _ => None,
        }
    }
}

/// Reads a mesh; `format = None` picks one from the extension.
pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriMesh> {
    let format = match format.or_else(|| MeshFormat::from_path(path)) {
        Some(f) => f,
        None => {
            return Err(invalid_input(format!(
                "cannot infer mesh format of {}",
                path.display()
            )))
        }
    };
    let text = fs::read_to_string(path)?;
    match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    }
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| format_err(line, format!("expected {what}, found {tok:?}")))
}

fn fan(poly: &[u32], faces: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len().saturating_sub(1) {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
}

pub fn parse_off(text: &str) -> Result<TriMesh> {
    // Non-empty, comment-stripped lines with 1-based numbers.
    let mut lines = text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    });

    let (first_no, first) = lines
        .next()
        .ok_or_else(|| invalid_input("empty OFF file"))?;
    let header_rest = first
        .strip_prefix("OFF")
        .ok_or_else(|| format_err(first_no, "missing OFF header"))?;
    // Some exporters glue the counts onto the header ("OFF490 518 0").
    let (count_no, counts) = if header_rest.trim().is_empty() {
        lines
            .next()
            .ok_or_else(|| format_err(first_no, "missing count line"))?
    } else {
        (first_no, header_rest.trim())
    };
    let toks: Vec<&str> = counts.split_whitespace().collect();
    if toks.len() < 2 {
        return Err(format_err(
            count_no,
            format!("malformed count line {counts:?}"),
        ));
    }
    let nv: usize = parse_num(toks[0], count_no, "vertex count")?;
    let nf: usize = parse_num(toks[1], count_no, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, l) = lines
            .next()
            .ok_or_else(|| format_err(count_no, format!("expected {nv} vertices")))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(format_err(no, "vertex needs three coordinates"));
        }
        vertices.push(Point3::new(
            parse_num(t[0], no, "coordinate")?,
            parse_num(t[1], no, "coordinate")?,
            parse_num(t[2], no, "coordinate")?,
        ));
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (no, l) = lines
            .next()
            .ok_or_else(|| format_err(count_no, format!("expected {nf} faces")))?;
        let mut t = l.split_whitespace();
        let k: usize = parse_num(t.next().unwrap_or(""), no, "polygon size")?;
        let mut poly = Vec::with_capacity(k);
        for _ in 0..k {
            let tok = t
                .next()
                .ok_or_else(|| format_err(no, format!("face lists fewer than {k} indices")))?;
            let idx: u32 = parse_num(tok, no, "vertex index")?;
            if idx as usize >= nv {
                return Err(format_err(no, format!("vertex index {idx} out of range")));
            }
            poly.push(idx);
        }
        if k < 3 {
            return Err(format_err(no, "face needs at least three vertices"));
        }
        fan(&poly, &mut faces);
    }
    TriMesh::new(vertices, faces)
}

pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<&str> = t.collect();
                if c.len() < 3 {
                    return Err(format_err(no, "vertex needs three coordinates"));
                }
                vertices.push(Point3::new(
                    parse_num(c[0], no, "coordinate")?,
                    parse_num(c[1], no, "coordinate")?,
                    parse_num(c[2], no, "coordinate")?,
                ));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in t {
                    let head = tok.split('/').next().unwrap_or("");
                    let idx: i64 = parse_num(head, no, "vertex index")?;
                    let n = vertices.len() as i64;
                    let resolved = match idx {
                        0 => return Err(format_err(no, "vertex index 0 is invalid")),
                        i if i > 0 => i - 1,
                        i => n + i,
                    };
                    if resolved < 0 || resolved >= n {
                        return Err(format_err(no, format!("vertex index {idx} out of range")));
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(format_err(no, "face needs at least three vertices"));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(invalid_input("OBJ file holds no faces"));
    }
    TriMesh::new(vertices, faces)
}

/// Serializes as OFF with round-trip precision.
pub fn write_off(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", mesh.vertices().len(), mesh.faces().len());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}
