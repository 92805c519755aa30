//! Point cloud, mesh and trajectory files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Quaternion, Translation3, UnitQuaternion};
use ply_rs::parser::Parser;
use ply_rs::ply::{
    Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyAccess, PropertyDef,
    PropertyType, ScalarType,
};
use ply_rs::writer::Writer;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::{Point3, Pose};

/// Points and optional colors read from a PLY file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub colors: Option<Vec<[u8; 3]>>,
}

#[derive(Debug, Clone, Copy, Default)]
struct PointElement {
    xyz: [f64; 3],
    rgb: [u8; 3],
}

fn scalar_f64(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        _ => return None,
    })
}

impl PropertyAccess for PointElement {
    fn new() -> Self {
        Self::default()
    }

    fn set_property(&mut self, name: String, p: Property) {
        let slot = match name.as_str() {
            "x" => &mut self.xyz[0],
            "y" => &mut self.xyz[1],
            "z" => &mut self.xyz[2],
            "red" | "green" | "blue" => {
                let k = ["red", "green", "blue"].iter().position(|c| *c == name).unwrap();
                if let Property::UChar(c) = p {
                    self.rgb[k] = c;
                } else if let Some(v) = scalar_f64(&p) {
                    self.rgb[k] = v.round().clamp(0.0, 255.0) as u8;
                }
                return;
            }
            _ => return,
        };
        if let Some(v) = scalar_f64(&p) {
            *slot = v;
        }
    }
}

fn ply_err(e: std::io::Error) -> Error {
    Error::Ply(e.to_string())
}

/// Read the `vertex` element of an ascii or binary PLY file. Colors are
/// returned when the vertex has `red`, `green` and `blue` properties.
pub fn read_ply_points<R: Read>(source: &mut R) -> Result<PointCloud> {
    let mut reader = BufReader::new(source);
    let parser = Parser::<PointElement>::new();
    let header = parser.read_header(&mut reader).map_err(ply_err)?;
    let mut cloud = PointCloud::default();
    let mut found = false;
    for (name, def) in &header.elements {
        let elems = parser
            .read_payload_for_element(&mut reader, def, &header)
            .map_err(ply_err)?;
        if name != "vertex" {
            continue;
        }
        let props = &def.properties;
        for axis in ["x", "y", "z"] {
            match props.get(axis).map(|p| &p.data_type) {
                Some(PropertyType::Scalar(_)) => {}
                _ => return Err(Error::Ply(format!("vertex element lacks scalar property {axis}"))),
            }
        }
        let colored = ["red", "green", "blue"].iter().all(|c| props.contains_key(*c));
        cloud.points = elems.iter().map(|e| Point3::from(e.xyz)).collect();
        cloud.colors = colored.then(|| elems.iter().map(|e| e.rgb).collect());
        found = true;
        break;
    }
    if !found {
        return Err(Error::Ply("no vertex element".into()));
    }
    if cloud.points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::Ply("non-finite vertex coordinate".into()));
    }
    Ok(cloud)
}

pub fn load_ply_points(path: &Path) -> Result<PointCloud> {
    read_ply_points(&mut File::open(path)?)
}

fn uchar_prop(name: &str) -> PropertyDef {
    PropertyDef::new(name.to_string(), PropertyType::Scalar(ScalarType::UChar))
}

/// Write points (and colors) as a PLY vertex element.
pub fn write_ply_points<W: Write>(sink: &mut W, cloud: &PointCloud, encoding: Encoding) -> Result<()> {
    if let Some(c) = &cloud.colors {
        if c.len() != cloud.points.len() {
            return Err(Error::Ply("color count differs from point count".into()));
        }
    }
    let mut ply = Ply::<DefaultElement>::new();
    ply.header.encoding = encoding;
    let mut vertex = ElementDef::new("vertex".to_string());
    for p in ["x", "y", "z"] {
        vertex.properties.add(PropertyDef::new(
            p.to_string(),
            PropertyType::Scalar(ScalarType::Double),
        ));
    }
    if cloud.colors.is_some() {
        for c in ["red", "green", "blue"] {
            vertex.properties.add(uchar_prop(c));
        }
    }
    ply.header.elements.add(vertex);
    let rows = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut e = DefaultElement::new();
            e.insert("x".into(), Property::Double(p.x));
            e.insert("y".into(), Property::Double(p.y));
            e.insert("z".into(), Property::Double(p.z));
            if let Some(c) = &cloud.colors {
                for (k, name) in ["red", "green", "blue"].iter().enumerate() {
                    e.insert(name.to_string(), Property::UChar(c[i][k]));
                }
            }
            e
        })
        .collect();
    ply.payload.insert("vertex".into(), rows);
    Writer::new().write_ply(sink, &mut ply).map_err(ply_err)?;
    Ok(())
}

pub fn save_ply_points(path: &Path, cloud: &PointCloud, encoding: Encoding) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ply_points(&mut w, cloud, encoding)?;
    w.flush()?;
    Ok(())
}

/// Binary little-endian PLY with per-vertex position, normal and optional
/// color, and triangle faces. Written directly: the ply-rs binary writer
/// emits a wrong length prefix for list properties.
pub fn write_mesh_ply<W: Write>(sink: &mut W, mesh: &Mesh) -> Result<()> {
    let colored = mesh.has_colors();
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", mesh.num_vertices());
    for p in ["x", "y", "z", "nx", "ny", "nz"] {
        header += &format!("property float {p}\n");
    }
    if colored {
        for c in ["red", "green", "blue"] {
            header += &format!("property uchar {c}\n");
        }
    }
    header += &format!("element face {}\n", mesh.num_triangles());
    header += "property list uchar uint vertex_indices\nend_header\n";

    let vertex_len = 24 + if colored { 3 } else { 0 };
    let mut buf = Vec::with_capacity(header.len() + mesh.num_vertices() * vertex_len + mesh.num_triangles() * 13);
    buf.extend_from_slice(header.as_bytes());
    for (i, (p, n)) in mesh.vertices.iter().zip(&mesh.normals).enumerate() {
        for c in p.iter().chain(n.iter()) {
            buf.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        if colored {
            buf.extend_from_slice(&mesh.colors[i]);
        }
    }
    for t in &mesh.triangles {
        buf.push(3);
        for i in t {
            buf.extend_from_slice(&i.to_le_bytes());
        }
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub fn save_mesh_ply(path: &Path, mesh: &Mesh) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mesh_ply(&mut w, mesh)?;
    w.flush()?;
    Ok(())
}

/// Timestamped sensor-to-world poses, one per line:
/// `timestamp tx ty tz qx qy qz qw`. Blank lines and `#` comments are
/// ignored; quaternions are normalized.
pub fn read_tum_trajectory<R: Read>(source: R) -> Result<Vec<(f64, Pose)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|w| w.parse::<f64>().map_err(|_| err(format!("not a number: {w:?}"))))
            .collect::<Result<_>>()?;
        if nums.len() != 8 {
            return Err(err(format!("expected 8 fields, got {}", nums.len())));
        }
        if nums.iter().any(|x| !x.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        let q = Quaternion::new(nums[7], nums[4], nums[5], nums[6]);
        if q.norm() < 1e-9 {
            return Err(err("zero quaternion".into()));
        }
        let pose = Pose::from_parts(
            Translation3::new(nums[1], nums[2], nums[3]),
            UnitQuaternion::from_quaternion(q),
        );
        out.push((nums[0], pose));
    }
    Ok(out)
}

pub fn load_tum_trajectory(path: &Path) -> Result<Vec<(f64, Pose)>> {
    read_tum_trajectory(File::open(path)?)
}

pub fn write_tum_trajectory<W: Write>(sink: &mut W, poses: &[(f64, Pose)]) -> Result<()> {
    writeln!(sink, "# timestamp tx ty tz qx qy qz qw")?;
    for (t, p) in poses {
        let tr = p.translation.vector;
        let q = p.rotation.quaternion();
        writeln!(
            sink,
            "{t} {} {} {} {} {} {} {}",
            tr.x, tr.y, tr.z, q.i, q.j, q.k, q.w
        )?;
    }
    Ok(())
}
