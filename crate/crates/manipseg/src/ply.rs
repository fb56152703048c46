//! PLY point clouds: `ascii 1.0` and `binary_little_endian 1.0`, vertex
//! properties x, y, z with optional nx, ny, nz and red, green, blue.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use manipseg_core::{Point, PointCloud, Vec3};

use crate::error::{FormatError, FormatResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
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
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
}

fn read_header(r: &mut impl BufRead) -> FormatResult<Header> {
    let mut line = String::new();
    let mut next = |line: &mut String| -> FormatResult<bool> {
        line.clear();
        Ok(r.read_line(line)? > 0)
    };
    if !next(&mut line)? || line.trim_end() != "ply" {
        return Err(FormatError::malformed("not a PLY file (missing 'ply' magic)"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        if !next(&mut line)? {
            return Err(FormatError::malformed("PLY header has no end_header"));
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => return Err(FormatError::malformed(format!("unsupported PLY format '{other}'"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| FormatError::malformed(format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", count_ty, item_ty, _] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| FormatError::malformed("property before any element"))?;
                let parse = |t: &str| Scalar::parse(t).ok_or_else(|| FormatError::malformed(format!("unknown PLY type '{t}'")));
                el.props.push(Property::List(parse(count_ty)?, parse(item_ty)?));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| FormatError::malformed("property before any element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| FormatError::malformed(format!("unknown PLY type '{ty}'")))?;
                el.props.push(Property::Scalar(name.to_string(), ty));
            }
            _ => return Err(FormatError::malformed(format!("unexpected PLY header line '{}'", line.trim_end()))),
        }
    }
    let encoding = encoding.ok_or_else(|| FormatError::malformed("PLY header has no format line"))?;
    Ok(Header { encoding, elements })
}

/// Column slots of the vertex properties we understand.
struct Layout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
    color: Option<([usize; 3], bool)>,
}

fn layout(el: &Element) -> FormatResult<Layout> {
    let find = |n: &str| {
        el.props.iter().position(|p| matches!(p, Property::Scalar(name, _) if name == n))
    };
    let triple = |a: &str, b: &str, c: &str| match (find(a), find(b), find(c)) {
        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
        _ => None,
    };
    let xyz = triple("x", "y", "z").ok_or_else(|| FormatError::malformed("PLY vertex lacks x, y, z"))?;
    let normal = triple("nx", "ny", "nz");
    let color = triple("red", "green", "blue").map(|c| {
        let integer = matches!(&el.props[c[0]], Property::Scalar(_, t) if t.is_integer());
        (c, integer)
    });
    Ok(Layout { xyz, normal, color })
}

fn assemble(rows: &[Vec<f64>], lay: &Layout) -> FormatResult<PointCloud> {
    let pick = |row: &Vec<f64>, s: [usize; 3]| [row[s[0]], row[s[1]], row[s[2]]];
    let positions = rows
        .iter()
        .map(|r| {
            let [x, y, z] = pick(r, lay.xyz);
            Point::new(x, y, z)
        })
        .collect();
    let mut normals: Option<Vec<Vec3>> = lay.normal.map(|s| {
        rows.iter()
            .map(|r| {
                let [x, y, z] = pick(r, s);
                Vec3::new(x, y, z)
            })
            .collect()
    });
    if let Some(n) = &mut normals {
        // stored normals are often float-rounded or unnormalized; zero ones make the set unusable
        if n.iter().any(|v| !(v.norm() > 1e-9) || !v.iter().all(|c| c.is_finite())) {
            log::warn!("PLY normals contain zero or non-finite vectors; ignoring them");
            normals = None;
        } else {
            n.iter_mut().for_each(|v| *v /= v.norm());
        }
    }
    let colors = lay.color.map(|(s, integer)| {
        let div = if integer { 255.0 } else { 1.0 };
        rows.iter()
            .map(|r| {
                let [x, y, z] = pick(r, s);
                Vec3::new(x, y, z).map(|c| (c / div).clamp(0.0, 1.0))
            })
            .collect()
    });
    Ok(PointCloud::from_parts(positions, normals, colors)?)
}

pub fn read_ply(r: impl Read) -> FormatResult<PointCloud> {
    let mut r = BufReader::new(r);
    let header = read_header(&mut r)?;
    let Some(vertex_at) = header.elements.iter().position(|e| e.name == "vertex") else {
        return Err(FormatError::malformed("PLY file has no vertex element"));
    };
    let el = &header.elements[vertex_at];
    let lay = layout(el)?;
    match header.encoding {
        PlyEncoding::Ascii => {
            let mut text = String::new();
            r.read_to_string(&mut text)?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            // skip whole lines of any elements before the vertices
            for e in &header.elements[..vertex_at] {
                for _ in 0..e.count {
                    lines.next();
                }
            }
            let mut rows = Vec::with_capacity(el.count);
            for i in 0..el.count {
                let line = lines
                    .next()
                    .ok_or_else(|| FormatError::malformed(format!("PLY ends after {i} of {} vertices", el.count)))?;
                let mut tok = line.split_whitespace();
                let mut row = Vec::with_capacity(el.props.len());
                for p in &el.props {
                    let mut value = || -> FormatResult<f64> {
                        let t = tok
                            .next()
                            .ok_or_else(|| FormatError::malformed(format!("vertex {i}: too few values")))?;
                        t.parse()
                            .map_err(|_| FormatError::malformed(format!("vertex {i}: bad number '{t}'")))
                    };
                    match p {
                        Property::Scalar(..) => row.push(value()?),
                        Property::List(..) => {
                            let n = value()? as usize;
                            for _ in 0..n {
                                value()?;
                            }
                            row.push(f64::NAN);
                        }
                    }
                }
                rows.push(row);
            }
            assemble(&rows, &lay)
        }
        PlyEncoding::BinaryLittleEndian => {
            for e in &header.elements[..vertex_at] {
                skip_binary_element(&mut r, e)?;
            }
            let mut rows = Vec::with_capacity(el.count);
            let mut buf = [0u8; 8];
            for i in 0..el.count {
                let mut row = Vec::with_capacity(el.props.len());
                for p in &el.props {
                    match p {
                        Property::Scalar(_, t) => {
                            read_exact(&mut r, &mut buf[..t.size()], i, el.count)?;
                            row.push(t.read_le(&buf));
                        }
                        Property::List(ct, it) => {
                            read_exact(&mut r, &mut buf[..ct.size()], i, el.count)?;
                            let n = ct.read_le(&buf) as usize;
                            for _ in 0..n {
                                read_exact(&mut r, &mut buf[..it.size()], i, el.count)?;
                            }
                            row.push(f64::NAN);
                        }
                    }
                }
                rows.push(row);
            }
            assemble(&rows, &lay)
        }
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], i: usize, n: usize) -> FormatResult<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            FormatError::malformed(format!("PLY ends inside vertex {i} of {n}"))
        } else {
            e.into()
        }
    })
}

fn skip_binary_element(r: &mut impl Read, el: &Element) -> FormatResult<()> {
    let mut buf = [0u8; 8];
    for i in 0..el.count {
        for p in &el.props {
            match p {
                Property::Scalar(_, t) => read_exact(r, &mut buf[..t.size()], i, el.count)?,
                Property::List(ct, it) => {
                    read_exact(r, &mut buf[..ct.size()], i, el.count)?;
                    let n = ct.read_le(&buf) as usize;
                    for _ in 0..n {
                        read_exact(r, &mut buf[..it.size()], i, el.count)?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn color_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Positions as `double`, normals as `float`, colors as `uchar`.
pub fn write_ply(w: impl Write, cloud: &PointCloud, encoding: PlyEncoding) -> FormatResult<()> {
    let mut w = BufWriter::new(w);
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply\nformat {fmt} 1.0\nelement vertex {}", cloud.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if cloud.normals().is_some() {
        writeln!(w, "property float nx\nproperty float ny\nproperty float nz")?;
    }
    if cloud.colors().is_some() {
        writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue")?;
    }
    writeln!(w, "end_header")?;
    for i in 0..cloud.len() {
        let p = cloud.positions()[i];
        match encoding {
            PlyEncoding::Ascii => {
                write!(w, "{} {} {}", p.x, p.y, p.z)?;
                if let Some(n) = cloud.normals() {
                    let n = n[i].map(|v| v as f32);
                    write!(w, " {} {} {}", n.x, n.y, n.z)?;
                }
                if let Some(c) = cloud.colors() {
                    let c = c[i];
                    write!(w, " {} {} {}", color_byte(c.x), color_byte(c.y), color_byte(c.z))?;
                }
                writeln!(w)?;
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in [p.x, p.y, p.z] {
                    w.write_all(&v.to_le_bytes())?;
                }
                if let Some(n) = cloud.normals() {
                    for v in n[i].iter() {
                        w.write_all(&(*v as f32).to_le_bytes())?;
                    }
                }
                if let Some(c) = cloud.colors() {
                    w.write_all(&[color_byte(c[i].x), color_byte(c[i].y), color_byte(c[i].z)])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_ply_file(path: &Path) -> FormatResult<PointCloud> {
    File::open(path)
        .map_err(FormatError::from)
        .and_then(read_ply)
        .map_err(|e| e.at(path))
}

pub fn write_ply_file(path: &Path, cloud: &PointCloud, encoding: PlyEncoding) -> FormatResult<()> {
    File::create(path)
        .map_err(FormatError::from)
        .and_then(|f| write_ply(f, cloud, encoding))
        .map_err(|e| e.at(path))
}
