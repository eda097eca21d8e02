use nalgebra::Point3;

use super::{MeshError, TriangleMesh};

#[derive(Debug)]
enum Property {
    Scalar(String),
    List(String),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

const SCALAR_TYPES: &[&str] = &[
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16", "uint16", "int32",
    "uint32", "float32", "float64",
];

/// Parses an ASCII PLY document with `vertex` (x, y, z) and optional `face`
/// elements. Polygons are fan-triangulated; unknown elements are skipped.
pub fn parse_ply(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(MeshError::parse(1, "missing 'ply' magic")),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let Some((ln, line)) = lines.next() else {
            return Err(MeshError::parse(0, "header is not terminated by end_header"));
        };
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                match tok.next() {
                    Some("ascii") => {}
                    Some(other) => return Err(MeshError::Unsupported(format!("PLY format '{other}'"))),
                    None => return Err(MeshError::parse(ln, "format line without a format")),
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| MeshError::parse(ln, "element without a name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| MeshError::parse(ln, "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| MeshError::parse(ln, "property before any element"))?;
                let kind = tok.next();
                let prop = match kind {
                    Some("list") => {
                        let count_ty = tok.next();
                        let item_ty = tok.next();
                        let name = tok.next();
                        match (count_ty, item_ty, name) {
                            (Some(c), Some(i), Some(n)) if SCALAR_TYPES.contains(&c) && SCALAR_TYPES.contains(&i) => {
                                Property::List(n.to_string())
                            }
                            _ => return Err(MeshError::parse(ln, "malformed list property")),
                        }
                    }
                    Some(ty) if SCALAR_TYPES.contains(&ty) => {
                        let name = tok
                            .next()
                            .ok_or_else(|| MeshError::parse(ln, "property without a name"))?;
                        Property::Scalar(name.to_string())
                    }
                    _ => return Err(MeshError::parse(ln, "unknown property type")),
                };
                element.properties.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(MeshError::parse(ln, format!("unexpected header keyword '{other}'"))),
        }
    }
    if !saw_format {
        return Err(MeshError::parse(0, "missing format line"));
    }

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut saw_vertex = false;

    for element in &elements {
        let mut body = lines.by_ref().filter(|(_, l)| !l.is_empty());
        match element.name.as_str() {
            "vertex" => {
                saw_vertex = true;
                let axis = |n: &str| {
                    element
                        .properties
                        .iter()
                        .position(|p| matches!(p, Property::Scalar(s) if s == n))
                };
                let (Some(ix), Some(iy), Some(iz)) = (axis("x"), axis("y"), axis("z")) else {
                    return Err(MeshError::parse(0, "vertex element lacks x/y/z properties"));
                };
                if element.properties.iter().any(|p| matches!(p, Property::List(_))) {
                    return Err(MeshError::Unsupported("list property on vertex".into()));
                }
                vertices.reserve(element.count.min(1 << 24));
                for _ in 0..element.count {
                    let (ln, line) = body
                        .next()
                        .ok_or_else(|| MeshError::parse(0, "unexpected end of vertex data"))?;
                    let values = line
                        .split_whitespace()
                        .map(|t| t.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| MeshError::parse(ln, "non-numeric vertex value"))?;
                    if values.len() != element.properties.len() {
                        return Err(MeshError::parse(
                            ln,
                            format!("expected {} values, found {}", element.properties.len(), values.len()),
                        ));
                    }
                    vertices.push(Point3::new(values[ix], values[iy], values[iz]));
                }
            }
            "face" => {
                let list_pos = element
                    .properties
                    .iter()
                    .position(|p| matches!(p, Property::List(n) if n == "vertex_indices" || n == "vertex_index"));
                let Some(list_pos) = list_pos else {
                    return Err(MeshError::parse(0, "face element lacks vertex_indices"));
                };
                for f in 0..element.count {
                    let (ln, line) = body
                        .next()
                        .ok_or_else(|| MeshError::parse(0, "unexpected end of face data"))?;
                    let polygon = read_face_list(&element.properties, list_pos, line, ln)?;
                    triangulate(&polygon, vertices.len(), f, &mut faces)?;
                }
            }
            _ => {
                for _ in 0..element.count {
                    body.next()
                        .ok_or_else(|| MeshError::parse(0, "unexpected end of element data"))?;
                }
            }
        }
    }
    if !saw_vertex {
        return Err(MeshError::parse(0, "no vertex element"));
    }
    TriangleMesh::new(vertices, faces)
}

fn read_face_list(properties: &[Property], list_pos: usize, line: &str, ln: usize) -> Result<Vec<i64>, MeshError> {
    let mut tok = line.split_whitespace();
    let mut result = None;
    for (i, prop) in properties.iter().enumerate() {
        match prop {
            Property::Scalar(_) => {
                tok.next()
                    .ok_or_else(|| MeshError::parse(ln, "truncated face record"))?;
            }
            Property::List(_) => {
                let n = tok
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| MeshError::parse(ln, "bad list length"))?;
                let mut items = Vec::with_capacity(n.min(64));
                for _ in 0..n {
                    let v = tok
                        .next()
                        .and_then(|t| t.parse::<i64>().ok())
                        .ok_or_else(|| MeshError::parse(ln, "bad face index"))?;
                    items.push(v);
                }
                if i == list_pos {
                    result = Some(items);
                }
            }
        }
    }
    if tok.next().is_some() {
        return Err(MeshError::parse(ln, "trailing values in face record"));
    }
    result.ok_or_else(|| MeshError::parse(ln, "missing vertex index list"))
}

/// Fan-triangulates one polygon, checking every index against the vertex count.
pub(super) fn triangulate(
    polygon: &[i64],
    vertex_count: usize,
    face: usize,
    out: &mut Vec<[u32; 3]>,
) -> Result<(), MeshError> {
    if polygon.len() < 3 {
        return Err(MeshError::parse(0, format!("face {face} has fewer than 3 vertices")));
    }
    for &idx in polygon {
        if idx < 0 || idx as u64 >= vertex_count as u64 {
            return Err(MeshError::FaceIndexOutOfRange {
                face,
                index: idx,
                count: vertex_count,
            });
        }
    }
    for k in 1..polygon.len() - 1 {
        out.push([polygon[0] as u32, polygon[k] as u32, polygon[k + 1] as u32]);
    }
    Ok(())
}
