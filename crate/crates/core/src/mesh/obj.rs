use nalgebra::Point3;

use super::ply::triangulate;
use super::{MeshError, TriangleMesh};

/// Parses Wavefront OBJ `v` and `f` records. Face tokens may carry texture
/// and normal indices (`i/t/n`, `i//n`); negative indices count from the end.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut face_count = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let coords = tok
                    .map(str::parse::<f64>)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| MeshError::parse(ln, "non-numeric vertex coordinate"))?;
                if !(3..=4).contains(&coords.len()) && coords.len() != 6 && coords.len() != 7 {
                    return Err(MeshError::parse(ln, format!("vertex has {} components", coords.len())));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let polygon = tok
                    .map(|t| parse_face_index(t, vertices.len(), ln))
                    .collect::<Result<Vec<_>, _>>()?;
                triangulate(&polygon, vertices.len(), face_count, &mut faces)?;
                face_count += 1;
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn parse_face_index(token: &str, vertex_count: usize, ln: usize) -> Result<i64, MeshError> {
    let head = token.split('/').next().unwrap_or("");
    let idx: i64 = head
        .parse()
        .map_err(|_| MeshError::parse(ln, format!("bad face index '{token}'")))?;
    match idx {
        0 => Err(MeshError::parse(ln, "face index 0 is invalid in OBJ")),
        i if i > 0 => Ok(i - 1),
        i => Ok(vertex_count as i64 + i),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_tetrahedron() {
        let text = "# tetra\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3\nf 1 2 4\nf 1 3 4\nf 2 3 4\n";
        let mesh = parse_obj(text).unwrap();
        assert_eq!(mesh.vertices().len(), 4);
        assert_eq!(mesh.faces().len(), 4);
        // longest pair is any edge between two unit-axis vertices
        assert_eq!(mesh.diameter(), 2f64.sqrt());
    }

    #[test]
    fn slashed_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nvn 0 0 1\nf 1/1/1 2//1 -1\n";
        let mesh = parse_obj(text).unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 3]]);
    }

    #[test]
    fn bad_records() {
        assert!(matches!(
            parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 9\n"),
            Err(MeshError::FaceIndexOutOfRange { index: 8, .. })
        ));
        assert!(matches!(
            parse_obj("v 0 zero 0\n"),
            Err(MeshError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_obj("v 0 0 0\nf 0 1 1\n"),
            Err(MeshError::Parse { line: 2, .. })
        ));
    }
}
