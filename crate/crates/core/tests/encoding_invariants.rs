mod common;

use common::violations;
use hipose::encoding::{decode_encoding, encode_encoding};
use hipose::mesh::{upsample_mesh, TriangleMesh};
use hipose::SurfaceEncoding;
use nalgebra::Point3;
use proptest::prelude::*;

fn encoded(mesh: &TriangleMesh, bits: u32) -> SurfaceEncoding {
    let up = upsample_mesh(mesh, bits).unwrap();
    SurfaceEncoding::build(up.into_vertices(), bits, 3).unwrap()
}

#[test]
fn cube_and_sphere_at_three_depths() {
    let cube = TriangleMesh::cuboid(40.0, 40.0, 40.0).unwrap();
    // finest uv-sphere that still fits under 2^d vertices
    for (bits, rings, segments) in [(3, 2, 4), (6, 4, 6), (10, 16, 32)] {
        let sphere = TriangleMesh::uv_sphere(25.0, rings, segments).unwrap();
        assert!(sphere.vertices().len() <= 1 << bits);
        assert_eq!(violations(&encoded(&cube, bits)), 0, "cube d={bits}");
        assert_eq!(violations(&encoded(&sphere, bits)), 0, "sphere d={bits}");
    }
}

#[test]
fn file_round_trip_preserves_everything() {
    let enc = encoded(&TriangleMesh::uv_sphere(10.0, 5, 8).unwrap(), 7);
    let back = decode_encoding(&encode_encoding(&enc)).unwrap();
    assert_eq!(back, enc);
}

#[test]
fn same_seed_same_encoding() {
    let cube = TriangleMesh::cuboid(30.0, 20.0, 10.0).unwrap();
    let a = SurfaceEncoding::build(upsample_mesh(&cube, 8).unwrap().into_vertices(), 8, 1).unwrap();
    let b = SurfaceEncoding::build(upsample_mesh(&cube, 8).unwrap().into_vertices(), 8, 1).unwrap();
    assert_eq!(a, b);
    assert_eq!(violations(&a), 0);
}

fn cloud(n: usize) -> impl Strategy<Value = Vec<Point3<f64>>> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64), n)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_clouds_satisfy_invariants(bits in 1u32..=6, seed in any::<u64>(), pts in cloud(64)) {
        let vertices = pts[..1 << bits].to_vec();
        let enc = SurfaceEncoding::build(vertices, bits, seed).unwrap();
        prop_assert_eq!(violations(&enc), 0);
        prop_assert_eq!(decode_encoding(&encode_encoding(&enc)).unwrap(), enc);
    }

    #[test]
    fn decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_encoding(&bytes);
    }
}
