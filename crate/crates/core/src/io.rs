//! OBJ and PLY readers/writers for meshes and point clouds.
//!
//! OBJ: ASCII `v` / `f` records with 1-based (or negative relative) indices;
//! polygons are fan-triangulated. PLY: `ascii 1.0` and
//! `binary_little_endian 1.0`, reading `vertex` x/y/z (any scalar type) and
//! `face` index lists. Writers emit float32 coordinates.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::TriangleMesh;

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let xyz: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse(format!("obj line {}: {e}", lineno + 1)))?;
                if xyz.len() != 3 {
                    return Err(Error::parse(format!("obj line {}: vertex needs 3 coordinates", lineno + 1)));
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let idx = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first
                            .parse()
                            .map_err(|e| Error::parse(format!("obj line {}: {e}", lineno + 1)))?;
                        let resolved = if i > 0 { i - 1 } else { vertices.len() as i64 + i };
                        if i == 0 || resolved < 0 {
                            return Err(Error::parse(format!("obj line {}: bad index {i}", lineno + 1)));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<Vec<usize>>>()?;
                if idx.len() < 3 {
                    return Err(Error::parse(format!("obj line {}: face needs 3 indices", lineno + 1)));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in mesh.triangles() {
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::parse(format!("ply: unknown scalar type {other}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
}

/// Parsed PLY content: vertex positions, optional vertex normals, faces.
#[derive(Debug, Clone, Default)]
pub struct PlyData {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub faces: Vec<Vec<usize>>,
}

fn parse_header(bytes: &[u8]) -> Result<(Format, Vec<Element>, usize)> {
    let marker = b"end_header";
    let pos = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::parse("ply: missing end_header"))?;
    let mut body = pos + marker.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) == Some(&b'\n') {
        body += 1;
    }
    let header = std::str::from_utf8(&bytes[..pos]).map_err(|_| Error::parse("ply: header not utf-8"))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::parse("ply: missing magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => format = Some(Format::Ascii),
            ["format", "binary_little_endian", _] => format = Some(Format::BinaryLe),
            ["format", other, _] => return Err(Error::parse(format!("ply: unsupported format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| Error::parse("ply: bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse("ply: property before element"))?
                .props
                .push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count)?,
                    item: Scalar::parse(item)?,
                }),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse("ply: property before element"))?
                .props
                .push(Property::Scalar { name: name.to_string(), ty: Scalar::parse(ty)? }),
            _ => {}
        }
    }
    let format = format.ok_or_else(|| Error::parse("ply: missing format line"))?;
    Ok((format, elements, body))
}

/// Value source over either ASCII tokens or little-endian bytes.
enum Reader<'a> {
    Ascii(std::str::SplitAsciiWhitespace<'a>),
    Binary(&'a [u8]),
}

impl Reader<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        match self {
            Reader::Ascii(it) => it
                .next()
                .ok_or_else(|| Error::parse("ply: unexpected end of data"))?
                .parse::<f64>()
                .map_err(|e| Error::parse(format!("ply: {e}"))),
            Reader::Binary(b) => {
                let n = ty.size();
                if b.len() < n {
                    return Err(Error::parse("ply: unexpected end of data"));
                }
                let v = ty.read_le(&b[..n]);
                *b = &b[n..];
                Ok(v)
            }
        }
    }
}

pub fn parse_ply(bytes: &[u8]) -> Result<PlyData> {
    let (format, elements, body) = parse_header(bytes)?;
    let mut reader = match format {
        Format::Ascii => Reader::Ascii(
            std::str::from_utf8(&bytes[body..])
                .map_err(|_| Error::parse("ply: ascii body not utf-8"))?
                .split_ascii_whitespace(),
        ),
        Format::BinaryLe => Reader::Binary(&bytes[body..]),
    };
    let mut out = PlyData::default();
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let pos_of = |n: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
        };
        let xyz = [pos_of("x"), pos_of("y"), pos_of("z")];
        let nxyz = [pos_of("nx"), pos_of("ny"), pos_of("nz")];
        if is_vertex && xyz.iter().any(Option::is_none) {
            return Err(Error::parse("ply: vertex element lacks x/y/z"));
        }
        let has_normals = is_vertex && nxyz.iter().all(Option::is_some);
        let mut normals = Vec::new();
        for _ in 0..el.count {
            let mut scalars = vec![0.0; el.props.len()];
            let mut list: Option<Vec<usize>> = None;
            for (k, p) in el.props.iter().enumerate() {
                match p {
                    Property::Scalar { ty, .. } => scalars[k] = reader.next(*ty)?,
                    Property::List { name, count, item } => {
                        let n = reader.next(*count)? as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            let v = reader.next(*item)?;
                            if v < 0.0 {
                                return Err(Error::parse("ply: negative face index"));
                            }
                            items.push(v as usize);
                        }
                        if name == "vertex_indices" || name == "vertex_index" {
                            list = Some(items);
                        }
                    }
                }
            }
            if is_vertex {
                let g = |i: Option<usize>| scalars[i.unwrap()];
                out.points.push(Vec3::new(g(xyz[0]), g(xyz[1]), g(xyz[2])));
                if has_normals {
                    normals.push(Vec3::new(g(nxyz[0]), g(nxyz[1]), g(nxyz[2])));
                }
            } else if is_face {
                out.faces.push(list.ok_or_else(|| Error::parse("ply: face lacks vertex_indices"))?);
            }
        }
        if has_normals {
            out.normals = Some(normals);
        }
    }
    Ok(out)
}

pub fn ply_to_mesh(data: PlyData) -> Result<TriangleMesh> {
    let mut triangles = Vec::new();
    for f in &data.faces {
        if f.len() < 3 {
            return Err(Error::parse("ply: face with fewer than 3 vertices"));
        }
        for k in 1..f.len() - 1 {
            triangles.push([f[0], f[k], f[k + 1]]);
        }
    }
    TriangleMesh::new(data.points, triangles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    #[default]
    Ascii,
    BinaryLittleEndian,
}

fn ply_header(enc: PlyEncoding, nverts: usize, normals: bool, nfaces: Option<usize>) -> String {
    let mut h = String::from("ply\n");
    h.push_str(match enc {
        PlyEncoding::Ascii => "format ascii 1.0\n",
        PlyEncoding::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    h.push_str(&format!("element vertex {nverts}\nproperty float x\nproperty float y\nproperty float z\n"));
    if normals {
        h.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    if let Some(n) = nfaces {
        h.push_str(&format!("element face {n}\nproperty list uchar int vertex_indices\n"));
    }
    h.push_str("end_header\n");
    h
}

fn push_f32s(out: &mut Vec<u8>, enc: PlyEncoding, vals: &[f64]) {
    match enc {
        PlyEncoding::Ascii => {
            let s: Vec<String> = vals.iter().map(|v| (*v as f32).to_string()).collect();
            out.extend_from_slice(s.join(" ").as_bytes());
            out.push(b'\n');
        }
        PlyEncoding::BinaryLittleEndian => {
            for v in vals {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
}

pub fn write_ply_mesh(mesh: &TriangleMesh, enc: PlyEncoding) -> Vec<u8> {
    let mut out = ply_header(enc, mesh.vertices().len(), false, Some(mesh.triangles().len())).into_bytes();
    for v in mesh.vertices() {
        push_f32s(&mut out, enc, &[v.x, v.y, v.z]);
    }
    for t in mesh.triangles() {
        match enc {
            PlyEncoding::Ascii => out.extend_from_slice(format!("3 {} {} {}\n", t[0], t[1], t[2]).as_bytes()),
            PlyEncoding::BinaryLittleEndian => {
                out.push(3);
                for &i in t {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    out
}

/// Vertex-only PLY, with normals when given.
pub fn write_ply_points(points: &[Vec3], normals: Option<&[Vec3]>, enc: PlyEncoding) -> Vec<u8> {
    let mut out = ply_header(enc, points.len(), normals.is_some(), None).into_bytes();
    for (i, p) in points.iter().enumerate() {
        match normals {
            Some(n) => push_f32s(&mut out, enc, &[p.x, p.y, p.z, n[i].x, n[i].y, n[i].z]),
            None => push_f32s(&mut out, enc, &[p.x, p.y, p.z]),
        }
    }
    out
}

/// Loads a mesh, dispatching on the `.obj` / `.ply` extension.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    match extension(path).as_str() {
        "obj" => parse_obj(&fs::read_to_string(path)?),
        "ply" => ply_to_mesh(parse_ply(&fs::read(path)?)?),
        other => Err(Error::invalid(format!("unsupported mesh extension '{other}'"))),
    }
}

pub fn save_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let bytes = match extension(path).as_str() {
        "obj" => write_obj(mesh).into_bytes(),
        "ply" => write_ply_mesh(mesh, PlyEncoding::Ascii),
        other => return Err(Error::invalid(format!("unsupported mesh extension '{other}'"))),
    };
    write_file(path, &bytes)
}

pub fn load_points(path: &Path) -> Result<PlyData> {
    parse_ply(&fs::read(path)?)
}

pub fn save_points(path: &Path, points: &[Vec3], normals: Option<&[Vec3]>) -> Result<()> {
    write_file(path, &write_ply_points(points, normals, PlyEncoding::Ascii))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}
